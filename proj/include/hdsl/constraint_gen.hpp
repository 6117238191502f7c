#pragma once

#include <cstddef>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hdsl/fw_solver.hpp"
#include "hdsl/similarity_model.hpp"
#include "hdsl/sparse_data.hpp"

namespace hdsl {

using PointSimilarity = std::function<double(const SparseVector&, const SparseVector&)>;

struct GeneratedTriplets {
  std::vector<TripletConstraint> triplets;
  std::size_t skipped = 0;  // anchors or links that could not produce a triplet
};

// Observed signed link between two samples; y is +1 (similar) or -1.
struct SignedLink {
  std::size_t a = 0;
  std::size_t b = 0;
  int y = 1;
  friend bool operator==(const SignedLink&, const SignedLink&) = default;
};

// For every point: its n_targets most similar same-label points times its
// n_impostors most similar different-label points. Ties go to the lower index.
// `sim` defaults to the dot product.
GeneratedTriplets neighbors_triplets(const Dataset& ds, std::size_t n_targets = 3,
                                     std::size_t n_impostors = 5, PointSimilarity sim = {});

// per_instance triplets per point with b drawn from its class and c from the others.
GeneratedTriplets random_label_triplets(const Dataset& ds, std::size_t per_instance, Rng& rng);

// Anchors uniform; b from the ceil(alpha (n-1)) most similar others under the
// truth, c from as many least similar ones.
GeneratedTriplets truth_triplets(const Dataset& samples, const Model& truth, double alpha,
                                 std::size_t count, Rng& rng);

// per_link triplets per training link. The third point is drawn from the
// anchor's opposite-sign (y = +1) or same-sign (y = -1) training links.
GeneratedTriplets link_triplets(std::size_t num_samples, const std::vector<SignedLink>& links,
                                std::size_t per_link, Rng& rng);

std::vector<SignedLink> parse_links(std::istream& in);
std::vector<SignedLink> load_links(const std::string& path);
void serialize_links(const std::vector<SignedLink>& links, std::ostream& out);
void save_links(const std::vector<SignedLink>& links, const std::string& path);

}  // namespace hdsl
