#include "hdsl/objective.hpp"

#include <stdexcept>
#include <string>

namespace hdsl {

ConstraintSet::ConstraintSet(std::shared_ptr<const Dataset> data,
                             std::vector<TripletConstraint> triplets)
    : data_(std::move(data)), triplets_(std::move(triplets)) {
  if (!data_) throw std::invalid_argument("constraint set needs a dataset");
  const std::size_t n = data_->size();
  diffs_.reserve(triplets_.size());
  for (std::size_t t = 0; t < triplets_.size(); ++t) {
    const auto& tr = triplets_[t];
    if (tr.a >= n || tr.b >= n || tr.c >= n)
      throw std::out_of_range("triplet " + std::to_string(t) + " references a missing point");
    if (tr.b == tr.c) throw std::invalid_argument("triplet " + std::to_string(t) + " has b == c");
    diffs_.push_back(subtract(data_->points[tr.b], data_->points[tr.c]));
  }
}

double smoothed_hinge(double m) noexcept {
  if (m >= 1.0) return 0.0;
  if (m <= 0.0) return 0.5 - m;
  const double r = 1.0 - m;
  return 0.5 * r * r;
}

double smoothed_hinge_deriv(double m) noexcept {
  if (m >= 1.0) return 0.0;
  if (m <= 0.0) return -1.0;
  return m - 1.0;
}

double objective(const MarginCache& cache) {
  if (cache.margins.empty()) throw std::invalid_argument("objective of an empty constraint set");
  double s = 0.0;
  for (double m : cache.margins) s += smoothed_hinge(m);
  return s / static_cast<double>(cache.margins.size());
}

std::vector<double> basis_inners(const ConstraintSet& cs, const BasisId& b, double lambda) {
  std::vector<double> out(cs.size());
  for (std::size_t t = 0; t < cs.size(); ++t)
    out[t] = basis_inner(cs.anchor(t), cs.diff(t), b, lambda);
  return out;
}

MarginCache init_cache(const ConstraintSet& cs, const Model& m) {
  MarginCache cache;
  cache.margins.assign(cs.size(), 0.0);
  for (std::size_t t = 0; t < cs.size(); ++t) {
    double s = 0.0;
    for (const auto& [b, a] : m.atoms()) s += a * basis_inner(cs.anchor(t), cs.diff(t), b, 1.0);
    cache.margins[t] = m.lambda() * s;
  }
  return cache;
}

void update_cache(MarginCache& cache, StepKind kind, double gamma,
                  std::span<const double> inners) {
  if (inners.size() != cache.margins.size())
    throw std::invalid_argument("update_cache: basis_inners length mismatch");
  auto& ms = cache.margins;
  if (kind == StepKind::Forward) {
    if (gamma == 1.0) {
      std::copy(inners.begin(), inners.end(), ms.begin());
      return;
    }
    for (std::size_t t = 0; t < ms.size(); ++t) ms[t] = (1.0 - gamma) * ms[t] + gamma * inners[t];
  } else {
    for (std::size_t t = 0; t < ms.size(); ++t) ms[t] = (1.0 + gamma) * ms[t] - gamma * inners[t];
  }
}

double grad_inner_with_model(const MarginCache& cache) {
  if (cache.margins.empty()) return 0.0;
  double s = 0.0;
  for (double m : cache.margins) {
    const double g = smoothed_hinge_deriv(m);
    if (g != 0.0) s += g * m;
  }
  return s / static_cast<double>(cache.margins.size());
}

}  // namespace hdsl
