#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hdsl/similarity_model.hpp"
#include "hdsl/sparse_data.hpp"

namespace hdsl {

// Triplets over a shared dataset, with y - z precomputed per constraint.
class ConstraintSet {
 public:
  ConstraintSet(std::shared_ptr<const Dataset> data, std::vector<TripletConstraint> triplets);

  std::size_t size() const noexcept { return triplets_.size(); }
  bool empty() const noexcept { return triplets_.empty(); }
  std::size_t dim() const noexcept { return data_->dim; }

  const Dataset& data() const noexcept { return *data_; }
  const std::shared_ptr<const Dataset>& data_ptr() const noexcept { return data_; }
  const std::vector<TripletConstraint>& triplets() const noexcept { return triplets_; }

  const SparseVector& anchor(std::size_t t) const { return data_->points[triplets_[t].a]; }
  const SparseVector& diff(std::size_t t) const { return diffs_[t]; }

 private:
  std::shared_ptr<const Dataset> data_;
  std::vector<TripletConstraint> triplets_;
  std::vector<SparseVector> diffs_;
};

// m_t = <A^t, M> for every constraint.
struct MarginCache {
  std::vector<double> margins;
  std::size_t size() const noexcept { return margins.size(); }
};

enum class StepKind { Forward, Away };

// Smoothed hinge: 0 above 1, linear below 0, quadratic in between.
double smoothed_hinge(double m) noexcept;
// Scalar g with G^t(M) = g * A^t.
double smoothed_hinge_deriv(double m) noexcept;

// Average loss over the cached margins. Throws on an empty cache.
double objective(const MarginCache& cache);

// <A^t, B> for every constraint and one basis.
std::vector<double> basis_inners(const ConstraintSet& cs, const BasisId& b, double lambda);

MarginCache init_cache(const ConstraintSet& cs, const Model& m);

// forward: m <- (1-g) m + g b;  away: m <- (1+g) m - g b.
void update_cache(MarginCache& cache, StepKind kind, double gamma,
                  std::span<const double> basis_inners);

// <M, grad f(M)> = (1/T) sum_t g_t m_t.
double grad_inner_with_model(const MarginCache& cache);

}  // namespace hdsl
