#include "hdsl/fw_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

namespace hdsl {

namespace {

constexpr double kDropWeight = 1e-12;
constexpr std::size_t kDenseTriangleLimit = std::size_t{1} << 22;

struct Candidate {
  BasisId basis;
  double score = std::numeric_limits<double>::infinity();
  bool set = false;

  void consider(const BasisId& b, double s) {
    if (!set || s < score || (s == score && b < basis)) {
      basis = b;
      score = s;
      set = true;
    }
  }
};

// (value, index) of the `count` smallest diagonal entries over all `dim`
// features, absent features reading as 0, optionally skipping one feature.
std::vector<std::pair<double, FeatureIndex>> smallest_diag(
    std::vector<std::pair<double, FeatureIndex>> cands, const std::function<bool(FeatureIndex)>& present,
    std::size_t dim, std::size_t count, std::optional<FeatureIndex> skip) {
  if (skip) std::erase_if(cands, [&](const auto& c) { return c.second == *skip; });
  std::size_t absent = 0;
  for (std::size_t f = 0; f < dim && absent < count; ++f) {
    const auto fi = static_cast<FeatureIndex>(f);
    if ((skip && fi == *skip) || present(fi)) continue;
    cands.emplace_back(0.0, fi);
    ++absent;
  }
  const std::size_t keep = std::min(count, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end());
  cands.resize(keep);
  return cands;
}

Sign sign_for(double h) { return h > 0.0 ? Sign::Neg : Sign::Pos; }

}  // namespace

std::string to_string(OracleKind k) {
  switch (k) {
    case OracleKind::Exact: return "exact";
    case OracleKind::MiniBatch: return "minibatch";
    case OracleKind::Heuristic: return "heuristic";
  }
  return "?";
}

OracleKind parse_oracle(const std::string& name) {
  if (name == "exact") return OracleKind::Exact;
  if (name == "minibatch") return OracleKind::MiniBatch;
  if (name == "heuristic") return OracleKind::Heuristic;
  throw std::invalid_argument("unknown oracle '" + name + "'");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::MaxIters: return "max_iters";
    case StopReason::GapTolerance: return "gap_tolerance";
    case StopReason::EarlyStopping: return "early_stopping";
  }
  return "?";
}

void SolverConfig::validate(std::size_t num_constraints) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw SolverError("lambda must be positive");
  if (!(line_search_tol > 0.0)) throw SolverError("line search tolerance must be positive");
  if (oracle != OracleKind::Exact && batch_size > num_constraints)
    throw SolverError("batch size " + std::to_string(batch_size) + " exceeds constraint count " +
                      std::to_string(num_constraints));
  if (validation && (!validation->metric || validation->every == 0))
    throw SolverError("validation hook needs a metric and a positive interval");
  if (recompute_every == 0) throw SolverError("recompute interval must be positive");
}

// ---------------------------------------------------------------------------
// Gradient accumulation

GradientAccumulators::GradientAccumulators(std::size_t dim)
    : dim_(dim), diag_values_(dim, 0.0), diag_seen_(dim, 0) {
  const std::size_t pairs = dim < 2 ? 0 : dim * (dim - 1) / 2;
  dense_ = pairs > 0 && pairs <= kDenseTriangleLimit;
  if (dense_) {
    dense_values_.assign(pairs, 0.0);
    dense_seen_.assign(pairs, 0);
  }
}

std::size_t GradientAccumulators::slot(std::uint64_t k) const {
  const std::size_t i = key_i(k), j = key_j(k);
  return i * dim_ - i * (i + 1) / 2 + (j - i - 1);
}

void GradientAccumulators::clear() {
  for (FeatureIndex i : diag_touched_) {
    diag_values_[i] = 0.0;
    diag_seen_[i] = 0;
  }
  diag_touched_.clear();
  scale_ = 1.0;
  if (dense_) {
    for (std::uint64_t k : touched_) {
      const std::size_t s = slot(k);
      dense_values_[s] = 0.0;
      dense_seen_[s] = 0;
    }
    touched_.clear();
  } else {
    sparse_.clear();
  }
}

void GradientAccumulators::add_diag(FeatureIndex i, double v) {
  if (!diag_seen_[i]) {
    diag_seen_[i] = 1;
    diag_touched_.push_back(i);
  }
  diag_values_[i] += v;
}

void GradientAccumulators::add_pair(FeatureIndex i, FeatureIndex j, double v) {
  const std::uint64_t k = key(i, j);
  if (dense_) {
    const std::size_t s = slot(k);
    if (!dense_seen_[s]) {
      dense_seen_[s] = 1;
      touched_.push_back(k);
    }
    dense_values_[s] += v;
  } else {
    sparse_[k] += v;
  }
}

double GradientAccumulators::diag(FeatureIndex i) const {
  return diag_values_[i] * scale_;
}

double GradientAccumulators::offdiag(FeatureIndex i, FeatureIndex j) const {
  if (i > j) std::swap(i, j);
  if (i == j) return 0.0;
  const std::uint64_t k = key(i, j);
  if (dense_) return dense_values_[slot(k)] * scale_;
  auto it = sparse_.find(k);
  return it == sparse_.end() ? 0.0 : it->second * scale_;
}

std::size_t GradientAccumulators::offdiag_size() const noexcept {
  return dense_ ? touched_.size() : sparse_.size();
}

void gradient_accumulate(const ConstraintSet& cs, const MarginCache& cache,
                         std::optional<std::span<const std::size_t>> subset,
                         GradientAccumulators& acc) {
  acc.clear();
  const std::size_t count = subset ? subset->size() : cs.size();
  acc.set_normalizer(count == 0 ? 1.0 : static_cast<double>(count));
  auto visit = [&](std::size_t t) {
    const double g = smoothed_hinge_deriv(cache.margins[t]);
    if (g == 0.0) return;
    const auto& x = cs.anchor(t);
    const auto& d = cs.diff(t);
    const auto& di = d.indices();
    const auto& dv = d.values();
    for (std::size_t p = 0; p < x.nnz(); ++p) {
      const FeatureIndex i = x.indices()[p];
      const double gx = g * x.values()[p];
      for (std::size_t q = 0; q < di.size(); ++q) {
        const FeatureIndex j = di[q];
        const double v = gx * dv[q];
        if (i == j)
          acc.add_diag(i, v);
        else if (i < j)
          acc.add_pair(i, j, v);
        else
          acc.add_pair(j, i, v);
      }
    }
  };
  if (subset)
    for (std::size_t t : *subset) visit(t);
  else
    for (std::size_t t = 0; t < cs.size(); ++t) visit(t);
}

// ---------------------------------------------------------------------------
// Forward oracles

Direction forward_exact(const GradientAccumulators& acc, double lambda, std::size_t dim) {
  if (dim < 2) throw SolverError("forward search needs at least two features");
  Candidate best;
  acc.for_each_offdiag([&](FeatureIndex i, FeatureIndex j, double h) {
    const double s = lambda * (acc.diag(i) + acc.diag(j) - std::abs(h));
    best.consider(BasisId{i, j, sign_for(h)}, s);
  });
  // Pairs with no off-diagonal mass score c_i + c_j >= c_(1) + c_(2). If the
  // two smallest diagonal entries do have off-diagonal mass, the scan above
  // already holds a strictly lower score for them.
  std::vector<std::pair<double, FeatureIndex>> diag;
  diag.reserve(acc.diag_size() + 2);
  acc.for_each_diag([&](FeatureIndex i, double v) { diag.emplace_back(v, i); });
  auto two = smallest_diag(std::move(diag), [&](FeatureIndex f) { return acc.has_diag(f); }, dim, 2,
                           std::nullopt);
  best.consider(BasisId::make(two[0].second, two[1].second, Sign::Pos),
                lambda * (two[0].first + two[1].first));

  Direction dir;
  dir.kind = StepKind::Forward;
  dir.basis = best.basis;
  dir.gamma_max = 1.0;
  dir.score = best.score;
  dir.oracle_score = best.score;
  return dir;
}

void complete_direction(const ConstraintSet& cs, const MarginCache& cache, double lambda,
                        Direction& dir) {
  dir.basis_inners = basis_inners(cs, dir.basis, lambda);
  double s = 0.0;
  for (std::size_t t = 0; t < cs.size(); ++t) {
    const double g = smoothed_hinge_deriv(cache.margins[t]);
    if (g != 0.0) s += g * dir.basis_inners[t];
  }
  dir.score = cs.empty() ? 0.0 : s / static_cast<double>(cs.size());
}

BatchSampler::BatchSampler(std::size_t total) : perm_(total) {
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
}

std::span<const std::size_t> BatchSampler::sample(std::size_t size, Rng& rng) {
  size = std::min(size, perm_.size());
  // Partial Fisher-Yates: the prefix is a uniform sample without replacement
  // and the array stays a permutation for the next call.
  for (std::size_t p = 0; p < size; ++p) {
    std::uniform_int_distribution<std::size_t> pick(p, perm_.size() - 1);
    std::swap(perm_[p], perm_[pick(rng)]);
  }
  return {perm_.data(), size};
}

Direction forward_minibatch(const ConstraintSet& cs, const MarginCache& cache, double lambda,
                            std::size_t batch_size, BatchSampler& sampler, Rng& rng,
                            GradientAccumulators* scratch) {
  if (batch_size == 0) throw SolverError("mini-batch size must be positive");
  if (batch_size > cs.size()) throw SolverError("mini-batch larger than the constraint set");
  if (scratch && scratch->dim() != cs.dim()) throw SolverError("scratch accumulator has the wrong dimension");
  auto batch = sampler.sample(batch_size, rng);
  std::optional<GradientAccumulators> local;
  GradientAccumulators& acc = scratch ? *scratch : local.emplace(cs.dim());
  gradient_accumulate(cs, cache, batch, acc);
  Direction dir = forward_exact(acc, lambda, cs.dim());
  complete_direction(cs, cache, lambda, dir);
  return dir;
}

namespace {

// Sampled gradient restricted to what the heuristic needs: the full diagonal
// and single rows of the off-diagonal part.
class BatchGradient {
 public:
  BatchGradient(const ConstraintSet& cs, const MarginCache& cache,
                std::span<const std::size_t> batch)
      : cs_(cs), scale_(batch.empty() ? 1.0 : 1.0 / static_cast<double>(batch.size())) {
    for (std::size_t t : batch) {
      const double g = smoothed_hinge_deriv(cache.margins[t]);
      if (g == 0.0) continue;
      active_.emplace_back(t, g);
      const auto& x = cs.anchor(t);
      const auto& d = cs.diff(t);
      std::size_t p = 0, q = 0;
      while (p < x.nnz() && q < d.nnz()) {
        if (x.indices()[p] < d.indices()[q]) {
          ++p;
        } else if (d.indices()[q] < x.indices()[p]) {
          ++q;
        } else {
          diag_[x.indices()[p]] += g * x.values()[p] * d.values()[q];
          ++p;
          ++q;
        }
      }
    }
  }

  double diag(FeatureIndex f) const {
    auto it = diag_.find(f);
    return it == diag_.end() ? 0.0 : it->second * scale_;
  }

  absl::flat_hash_map<FeatureIndex, double> row(FeatureIndex i) const {
    absl::flat_hash_map<FeatureIndex, double> r;
    for (const auto& [t, g] : active_) {
      const auto& x = cs_.anchor(t);
      const auto& d = cs_.diff(t);
      if (const double xi = x.at(i); xi != 0.0)
        for (std::size_t q = 0; q < d.nnz(); ++q)
          if (d.indices()[q] != i) r[d.indices()[q]] += g * xi * d.values()[q];
      if (const double di = d.at(i); di != 0.0)
        for (std::size_t p = 0; p < x.nnz(); ++p)
          if (x.indices()[p] != i) r[x.indices()[p]] += g * x.values()[p] * di;
    }
    return r;
  }

  Candidate best_in_row(FeatureIndex i, double lambda, std::size_t dim) const {
    Candidate best;
    const double ci = diag(i);
    for (const auto& [j, raw] : row(i)) {
      const double h = raw * scale_;
      best.consider(BasisId::make(i, j, sign_for(h)), lambda * (ci + diag(j) - std::abs(h)));
    }
    std::vector<std::pair<double, FeatureIndex>> cands;
    cands.reserve(diag_.size() + 1);
    for (const auto& [f, v] : diag_) cands.emplace_back(v * scale_, f);
    auto partner = smallest_diag(std::move(cands), [&](FeatureIndex f) { return diag_.contains(f); }, dim, 1, i);
    best.consider(BasisId::make(i, partner[0].second, Sign::Pos),
                  lambda * (ci + partner[0].first));
    return best;
  }

 private:
  const ConstraintSet& cs_;
  double scale_;
  std::vector<std::pair<std::size_t, double>> active_;
  absl::flat_hash_map<FeatureIndex, double> diag_;
};

}  // namespace

Direction forward_heuristic_from(const ConstraintSet& cs, const MarginCache& cache,
                                 double lambda, std::span<const std::size_t> batch,
                                 FeatureIndex first) {
  const std::size_t dim = cs.dim();
  if (dim < 2) throw SolverError("forward search needs at least two features");
  if (first >= dim) throw SolverError("heuristic start feature out of range");
  BatchGradient bg(cs, cache, batch);
  const Candidate stage1 = bg.best_in_row(first, lambda, dim);
  const FeatureIndex partner = stage1.basis.i == first ? stage1.basis.j : stage1.basis.i;
  const Candidate stage2 = bg.best_in_row(partner, lambda, dim);

  Direction dir;
  dir.kind = StepKind::Forward;
  dir.basis = stage2.basis;
  dir.gamma_max = 1.0;
  dir.oracle_score = stage2.score;
  complete_direction(cs, cache, lambda, dir);
  return dir;
}

Direction forward_heuristic(const ConstraintSet& cs, const MarginCache& cache, double lambda,
                            std::size_t batch_size, BatchSampler& sampler, Rng& rng) {
  if (cs.dim() < 2) throw SolverError("forward search needs at least two features");
  if (batch_size == 0) throw SolverError("mini-batch size must be positive");
  if (batch_size > cs.size()) throw SolverError("mini-batch larger than the constraint set");
  std::uniform_int_distribution<std::size_t> pick(0, cs.dim() - 1);
  const auto first = static_cast<FeatureIndex>(pick(rng));
  auto batch = sampler.sample(batch_size, rng);
  return forward_heuristic_from(cs, cache, lambda, batch, first);
}

// ---------------------------------------------------------------------------
// Away direction

namespace {

struct AwayChoice {
  BasisId basis;
  double weight = 0.0;
  double score = 0.0;
};

// Scores every active atom in one pass over the violated constraints. Each
// anchor entry x_f contributes x_f (d_f + s d_other) to the atoms touching f.
AwayChoice best_away_atom(const Model& m, const ConstraintSet& cs, const MarginCache& cache) {
  struct Touch {
    std::size_t atom;
    FeatureIndex other;
    double sign;
  };
  std::vector<std::pair<BasisId, double>> atoms(m.atoms().begin(), m.atoms().end());
  absl::flat_hash_map<FeatureIndex, std::vector<Touch>> touching;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const auto& b = atoms[a].first;
    const double s = sign_value(b.sign);
    touching[b.i].push_back({a, b.j, s});
    touching[b.j].push_back({a, b.i, s});
  }
  std::vector<double> acc(atoms.size(), 0.0);
  for (std::size_t t = 0; t < cs.size(); ++t) {
    const double g = smoothed_hinge_deriv(cache.margins[t]);
    if (g == 0.0) continue;
    const auto& x = cs.anchor(t);
    const auto& d = cs.diff(t);
    for (std::size_t p = 0; p < x.nnz(); ++p) {
      auto it = touching.find(x.indices()[p]);
      if (it == touching.end()) continue;
      const double gx = g * x.values()[p];
      const double df = d.at(x.indices()[p]);
      for (const auto& tc : it->second) acc[tc.atom] += gx * (df + tc.sign * d.at(tc.other));
    }
  }
  const double norm = cs.empty() ? 0.0 : m.lambda() / static_cast<double>(cs.size());
  AwayChoice best;
  bool set = false;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const double s = acc[a] * norm;
    // atoms are in lexicographic order, so strict > keeps the smallest on ties
    if (!set || s > best.score) {
      best = {atoms[a].first, atoms[a].second, s};
      set = true;
    }
  }
  return best;
}

Direction away_without_inners(const Model& m, const ConstraintSet& cs, const MarginCache& cache) {
  if (m.atom_count() == 0) throw SolverError("away direction needs an active atom");
  const AwayChoice c = best_away_atom(m, cs, cache);
  Direction dir;
  dir.kind = StepKind::Away;
  dir.basis = c.basis;
  dir.score = c.score;
  dir.oracle_score = c.score;
  dir.gamma_max = m.atom_count() == 1 ? 0.0 : c.weight / (1.0 - c.weight);
  return dir;
}

}  // namespace

Direction away_direction(const Model& m, const ConstraintSet& cs, const MarginCache& cache) {
  Direction dir = away_without_inners(m, cs, cache);
  dir.basis_inners = basis_inners(cs, dir.basis, m.lambda());
  return dir;
}

Direction choose_direction(Direction fwd, Direction away, const MarginCache& cache) {
  if (away.gamma_max <= 0.0) return fwd;
  const double model_inner = grad_inner_with_model(cache);
  const double fwd_slope = fwd.score - model_inner;
  const double away_slope = model_inner - away.score;
  return fwd_slope <= away_slope ? std::move(fwd) : std::move(away);
}

// ---------------------------------------------------------------------------
// Line search and updates

double line_search(const MarginCache& cache, const Direction& dir, double eps) {
  if (!(eps > 0.0)) throw SolverError("line search tolerance must be positive");
  const std::size_t n = cache.size();
  if (dir.basis_inners.size() != n) throw SolverError("direction lacks basis inner products");
  if (dir.gamma_max <= 0.0 || n == 0) return 0.0;

  std::vector<double> slope(n);
  for (std::size_t t = 0; t < n; ++t)
    slope[t] = dir.kind == StepKind::Forward ? dir.basis_inners[t] - cache.margins[t]
                                             : cache.margins[t] - dir.basis_inners[t];
  const auto& m = cache.margins;
  auto dphi = [&](double gamma) {
    double s = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (slope[t] == 0.0) continue;
      const double g = smoothed_hinge_deriv(m[t] + gamma * slope[t]);
      if (g != 0.0) s += g * slope[t];
    }
    return s / static_cast<double>(n);
  };

  if (dphi(0.0) >= 0.0) return 0.0;
  if (dphi(dir.gamma_max) <= 0.0) return dir.gamma_max;
  // Invariant: dphi(lo) < 0 < dphi(hi). Returning a point with dphi <= 0
  // keeps the step a descent step.
  double lo = 0.0, hi = dir.gamma_max;
  while (hi - lo > eps) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double d = dphi(mid);
    if (d <= 0.0) {
      lo = mid;
      if (d >= -eps) return mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

void apply_step(SolverState& state, const Direction& dir, double gamma) {
  if (!(gamma >= 0.0) || gamma > dir.gamma_max * (1.0 + 1e-12))
    throw SolverError("step size out of range");
  if (gamma == 0.0) return;
  gamma = std::min(gamma, dir.gamma_max);
  auto& atoms = state.model.mutable_atoms();
  bool dropped = false;
  if (dir.kind == StepKind::Forward) {
    if (gamma == 1.0) {
      atoms.clear();
      atoms[dir.basis] = 1.0;
    } else {
      for (auto& [b, a] : atoms) a *= 1.0 - gamma;
      atoms[dir.basis] += gamma;
    }
  } else {
    for (auto& [b, a] : atoms) a *= 1.0 + gamma;
    auto it = atoms.find(dir.basis);
    if (it == atoms.end()) throw SolverError("away step on an inactive atom");
    it->second -= gamma;
    // gamma == gamma_max removes the atom exactly
    if (gamma == dir.gamma_max || it->second <= kDropWeight) {
      atoms.erase(it);
      dropped = true;
    }
  }
  for (auto it = atoms.begin(); it != atoms.end();) {
    if (it->second <= kDropWeight) {
      it = atoms.erase(it);
      dropped = true;
    } else {
      ++it;
    }
  }
  const double sum = state.model.weight_sum();
  if (dropped || std::abs(sum - 1.0) > 1e-13)
    for (auto& [b, a] : atoms) a /= sum;
  update_cache(state.cache, dir.kind, gamma, dir.basis_inners);
  state.model.validate();
}

double fw_gap(const SolverState& state, const Direction& fwd) {
  return grad_inner_with_model(state.cache) - fwd.score;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

class ForwardOracle {
 public:
  ForwardOracle(const ConstraintSet& cs, const SolverConfig& cfg)
      : cs_(cs), cfg_(cfg), rng_(cfg.seed), sampler_(cs.size()) {
    batch_ = cfg.batch_size == 0 ? cs.size() : cfg.batch_size;
    if (cfg.oracle != OracleKind::Heuristic) acc_.emplace(cs.dim());
  }

  Direction operator()(const MarginCache& cache) {
    switch (cfg_.oracle) {
      case OracleKind::Exact: {
        gradient_accumulate(cs_, cache, std::nullopt, *acc_);
        Direction dir = forward_exact(*acc_, cfg_.lambda, cs_.dim());
        complete_direction(cs_, cache, cfg_.lambda, dir);
        return dir;
      }
      case OracleKind::MiniBatch:
        return forward_minibatch(cs_, cache, cfg_.lambda, batch_, sampler_, rng_, &*acc_);
      case OracleKind::Heuristic:
        return forward_heuristic(cs_, cache, cfg_.lambda, batch_, sampler_, rng_);
    }
    throw SolverError("unknown oracle");
  }

 private:
  const ConstraintSet& cs_;
  const SolverConfig& cfg_;
  Rng rng_;
  BatchSampler sampler_;
  std::size_t batch_;
  std::optional<GradientAccumulators> acc_;
};

}  // namespace

TrainResult train(const ConstraintSet& cs, const SolverConfig& cfg) {
  if (cs.empty()) throw SolverError("empty constraint set");
  if (cs.dim() < 2) throw SolverError("need at least two features");
  cfg.validate(cs.size());

  ForwardOracle forward(cs, cfg);
  SolverState state;
  state.model = Model::single(BasisId{0, 1, Sign::Pos}, cfg.lambda, cs.dim());
  state.cache = init_cache(cs, state.model);
  {
    // Replace the placeholder atom by the first forward basis (full step).
    Direction first = forward(state.cache);
    state.model = Model::single(first.basis, cfg.lambda, cs.dim());
    state.cache.margins = std::move(first.basis_inners);
  }

  TrainResult result;
  result.model = state.model;
  std::size_t stale_evals = 0;
  const bool gap_stop = cfg.oracle == OracleKind::Exact;

  for (std::size_t k = 0;; ++k) {
    state.iteration = k;
    IterationRecord rec;
    rec.k = k;
    rec.objective = objective(state.cache);
    rec.atoms = state.model.atom_count();
    rec.features = state.model.feature_count();

    bool stop = false;
    if (cfg.validation && k % cfg.validation->every == 0) {
      const double v = cfg.validation->metric(state.model);
      rec.val_metric = v;
      const bool better = !result.best_val_metric ||
                          (cfg.validation->minimize ? v < *result.best_val_metric
                                                    : v > *result.best_val_metric);
      if (better) {
        result.best_val_metric = v;
        result.best_iteration = k;
        result.model = state.model;
        stale_evals = 0;
      } else if (cfg.patience > 0 && ++stale_evals >= cfg.patience) {
        result.reason = StopReason::EarlyStopping;
        stop = true;
      }
    }

    Direction fwd = forward(state.cache);
    rec.gap = fw_gap(state, fwd);
    if (!stop && gap_stop && rec.gap <= cfg.gap_tol) {
      result.reason = StopReason::GapTolerance;
      stop = true;
    }
    if (!stop && k >= cfg.max_iters) {
      result.reason = StopReason::MaxIters;
      stop = true;
    }
    if (stop) {
      state.history.push_back(rec);
      if (cfg.observer) cfg.observer(rec, state.model);
      break;
    }

    Direction away = away_without_inners(state.model, cs, state.cache);
    Direction dir = choose_direction(std::move(fwd), std::move(away), state.cache);
    if (dir.kind == StepKind::Away) dir.basis_inners = basis_inners(cs, dir.basis, cfg.lambda);
    const double gamma = line_search(state.cache, dir, cfg.line_search_tol);
    rec.step = dir.kind;
    rec.gamma = gamma;
    state.history.push_back(rec);
    if (cfg.observer) cfg.observer(rec, state.model);

    apply_step(state, dir, gamma);
    if ((k + 1) % cfg.recompute_every == 0) state.cache = init_cache(cs, state.model);
  }

  if (!cfg.validation) {
    result.model = state.model;
    result.best_iteration = state.iteration;
  }
  result.history = std::move(state.history);
  return result;
}

// ---------------------------------------------------------------------------
// Diagnostics

double lipschitz_constant(const ConstraintSet& cs) {
  if (cs.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < cs.size(); ++t)
    s += cs.anchor(t).squared_norm() * cs.diff(t).squared_norm();
  return s / static_cast<double>(cs.size());
}

double convergence_bound(double lambda, double lipschitz, std::size_t k) {
  if (k < 1) throw std::domain_error("convergence bound needs k >= 1");
  return 16.0 * lipschitz * lambda * lambda / (static_cast<double>(k) + 2.0);
}

double excess_risk_bound(double lambda, double lipschitz, double bx, std::size_t k,
                         std::size_t n, double delta, std::optional<double> b_dual) {
  if (n < 3) throw std::domain_error("excess risk bound needs n >= 3");
  if (k < 1) throw std::domain_error("excess risk bound needs k >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("delta must lie in (0, 1)");
  const double bd = b_dual.value_or(4.0 * lambda);
  const double nd = static_cast<double>(n);
  const double optimization = convergence_bound(lambda, lipschitz, k);
  const double complexity =
      16.0 * lambda * bx * std::sqrt(2.0 * std::log(static_cast<double>(k)) / static_cast<double>(n / 3));
  const double concentration = 5.0 * bx * bd * std::sqrt(std::log(4.0 / delta) / nd);
  return optimization + complexity + concentration;
}

std::string history_record_json(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["objective"] = r.objective;
  j["gap"] = r.gap;
  j["step"] = r.step == StepKind::Forward ? "F" : "A";
  j["gamma"] = r.gamma;
  j["atoms"] = r.atoms;
  j["features"] = r.features;
  if (r.val_metric) j["val_metric"] = *r.val_metric;
  return j.dump();
}

void write_history_jsonl(const std::vector<IterationRecord>& history, std::ostream& out) {
  for (const auto& r : history) out << history_record_json(r) << '\n';
}

}  // namespace hdsl
