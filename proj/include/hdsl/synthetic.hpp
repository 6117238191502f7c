#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "hdsl/constraint_gen.hpp"
#include "hdsl/fw_solver.hpp"
#include "hdsl/similarity_model.hpp"
#include "hdsl/sparse_data.hpp"

namespace hdsl {

// Half-open feature range [begin, end).
struct FeatureBlock {
  FeatureIndex begin = 0;
  FeatureIndex end = 0;
  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
};

using BlockPair = std::pair<FeatureBlock, FeatureBlock>;

// n_bases distinct random bases with symmetric Dirichlet(dirichlet_a) weights.
// With `blocks`, each basis takes both features from one of the two blocks.
Model gen_truth(std::size_t dim, std::size_t n_bases, std::optional<BlockPair> blocks,
                double dirichlet_a, Rng& rng);

// ceil(sparsity * dim) distinct uniform features per point, values in (0, 1).
Dataset gen_uniform_sparse(std::size_t n, std::size_t dim, double sparsity, Rng& rng);

// Feature f appears with probability proportional to (f + 1)^-exponent, scaled
// so the expected nnz is avg_sparsity * dim. Values in (0, 1).
Dataset gen_powerlaw_sparse(std::size_t n, std::size_t dim, double avg_sparsity, double exponent,
                            Rng& rng);

// Pairs ranked in the top (y = +1) or bottom (y = -1) top_frac of either
// endpoint's neighbours under the truth. Pairs meeting both are dropped.
// `count` links are drawn without replacement (0 keeps all candidates).
std::vector<SignedLink> gen_links(const Dataset& samples, const Model& truth, double top_frac,
                                  std::size_t count, Rng& rng);

// Fraction of points in which each feature is nonzero.
std::vector<double> feature_frequencies(const Dataset& samples);

// As gen_truth (no blocks) with both features of every basis drawn from the
// features whose empirical frequency is at least min_freq.
Model gen_truth_frequent(std::size_t dim, std::size_t n_bases, const Dataset& samples,
                         double min_freq, double dirichlet_a, Rng& rng);

// Average sparsity for the link experiment: 0.02 at d = 5000 down to 0.002 at
// d = 10^6, interpolated linearly in log d and clamped outside that range.
double link_sparsity_schedule(std::size_t dim);

}  // namespace hdsl
