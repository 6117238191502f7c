#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "hdsl/objective.hpp"
#include "hdsl/similarity_model.hpp"

namespace hdsl {

using Rng = std::mt19937_64;

class SolverError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OracleKind { Exact, MiniBatch, Heuristic };

std::string to_string(OracleKind k);
OracleKind parse_oracle(const std::string& name);

// Metric evaluated on a frozen model snapshot every `every` iterations.
struct ValidationHook {
  std::function<double(const Model&)> metric;
  bool minimize = true;
  std::size_t every = 50;
};

struct IterationRecord {
  std::size_t k = 0;
  double objective = 0.0;
  double gap = 0.0;
  StepKind step = StepKind::Forward;
  double gamma = 0.0;
  std::size_t atoms = 0;
  std::size_t features = 0;
  std::optional<double> val_metric;
};

struct SolverConfig {
  double lambda = 1.0;
  std::size_t max_iters = 1000;
  OracleKind oracle = OracleKind::Exact;
  std::size_t batch_size = 0;  // mini-batch size M; 0 means T
  double line_search_tol = 1e-6;
  double gap_tol = 1e-5;
  std::uint64_t seed = 0;
  std::optional<ValidationHook> validation;
  std::size_t patience = 0;  // evaluations without improvement; 0 disables
  bool deterministic = true;
  std::size_t recompute_every = 1000;
  // Called after every history record with the iterate it describes.
  std::function<void(const IterationRecord&, const Model&)> observer;

  void validate(std::size_t num_constraints) const;
};

struct SolverState {
  Model model;
  MarginCache cache;
  std::size_t iteration = 0;
  std::vector<IterationRecord> history;
};

struct Direction {
  StepKind kind = StepKind::Forward;
  BasisId basis;
  double gamma_max = 1.0;
  std::vector<double> basis_inners;  // <A^t, B> over the full constraint set
  double score = 0.0;                // <B, grad f> over the full constraint set
  double oracle_score = 0.0;         // value the oracle minimised (sampled for inexact oracles)
};

// Accumulated gradient pieces over a set of constraints:
//   diag(i)       = (1/|set|) sum_t g_t x_ti d_ti
//   offdiag(i,j)  = (1/|set|) sum_t g_t (x_ti d_tj + x_tj d_ti),  i < j
// so that <P_ij, grad> = lambda (c_i + c_j + H_ij) and <N_ij, grad> uses -H_ij.
class GradientAccumulators {
 public:
  explicit GradientAccumulators(std::size_t dim);

  void clear();
  void add_diag(FeatureIndex i, double v);
  void add_pair(FeatureIndex i, FeatureIndex j, double v);  // requires i < j
  void set_normalizer(double n) { scale_ = 1.0 / n; }

  std::size_t dim() const noexcept { return dim_; }
  double diag(FeatureIndex i) const;
  double offdiag(FeatureIndex i, FeatureIndex j) const;
  std::size_t diag_size() const noexcept { return diag_touched_.size(); }
  std::size_t offdiag_size() const noexcept;
  bool empty() const noexcept { return diag_size() == 0 && offdiag_size() == 0; }

  bool has_diag(FeatureIndex i) const { return diag_seen_[i] != 0; }

  template <class F>
  void for_each_diag(F&& f) const {
    for (FeatureIndex i : diag_touched_) f(i, diag_values_[i] * scale_);
  }
  template <class F>
  void for_each_offdiag(F&& f) const {
    if (dense_ && touched_.size() * 8 > dense_values_.size()) {
      // mostly touched: a sequential sweep beats chasing the touched list
      std::size_t s = 0;
      for (std::size_t i = 0; i + 1 < dim_; ++i)
        for (std::size_t j = i + 1; j < dim_; ++j, ++s)
          if (dense_seen_[s])
            f(static_cast<FeatureIndex>(i), static_cast<FeatureIndex>(j), dense_values_[s] * scale_);
    } else if (dense_) {
      for (std::uint64_t key : touched_) f(key_i(key), key_j(key), dense_values_[slot(key)] * scale_);
    } else {
      for (const auto& [key, v] : sparse_) f(key_i(key), key_j(key), v * scale_);
    }
  }

 private:
  static std::uint64_t key(FeatureIndex i, FeatureIndex j) {
    return (static_cast<std::uint64_t>(i) << 32) | j;
  }
  static FeatureIndex key_i(std::uint64_t k) { return static_cast<FeatureIndex>(k >> 32); }
  static FeatureIndex key_j(std::uint64_t k) { return static_cast<FeatureIndex>(k & 0xffffffffu); }
  std::size_t slot(std::uint64_t k) const;

  std::size_t dim_;
  double scale_ = 1.0;
  std::vector<double> diag_values_;
  std::vector<std::uint8_t> diag_seen_;
  std::vector<FeatureIndex> diag_touched_;
  // Small dims use a dense upper triangle with a touched list; larger dims a hash map.
  bool dense_ = false;
  std::vector<double> dense_values_;
  std::vector<std::uint8_t> dense_seen_;
  std::vector<std::uint64_t> touched_;
  absl::flat_hash_map<std::uint64_t, double> sparse_;
};

// Accumulates over `subset` (or all constraints), skipping satisfied ones.
void gradient_accumulate(const ConstraintSet& cs, const MarginCache& cache,
                         std::optional<std::span<const std::size_t>> subset,
                         GradientAccumulators& acc);

// Global argmin over all bases given full-set accumulators. basis_inners is
// left empty; score and oracle_score hold the accumulator value.
Direction forward_exact(const GradientAccumulators& acc, double lambda, std::size_t dim);

// Fills basis_inners and the full-set score of a direction.
void complete_direction(const ConstraintSet& cs, const MarginCache& cache, double lambda,
                        Direction& dir);

// Uniform sample of `size` constraint indices without replacement.
class BatchSampler {
 public:
  explicit BatchSampler(std::size_t total);
  std::span<const std::size_t> sample(std::size_t size, Rng& rng);

 private:
  std::vector<std::size_t> perm_;
};

// `scratch`, when given, must have dimension cs.dim() and is reused.
Direction forward_minibatch(const ConstraintSet& cs, const MarginCache& cache, double lambda,
                            std::size_t batch_size, BatchSampler& sampler, Rng& rng,
                            GradientAccumulators* scratch = nullptr);

// Two-stage restricted search: pairs containing a random feature i, then
// pairs containing the partner j found in stage one.
Direction forward_heuristic(const ConstraintSet& cs, const MarginCache& cache, double lambda,
                            std::size_t batch_size, BatchSampler& sampler, Rng& rng);
// Same with the stage-one feature fixed.
Direction forward_heuristic_from(const ConstraintSet& cs, const MarginCache& cache,
                                 double lambda, std::span<const std::size_t> batch,
                                 FeatureIndex first);

// Active atom maximising <B, grad f> over the full set.
Direction away_direction(const Model& m, const ConstraintSet& cs, const MarginCache& cache);

Direction choose_direction(Direction fwd, Direction away, const MarginCache& cache);

// Bisection on phi'(gamma) over [0, gamma_max].
double line_search(const MarginCache& cache, const Direction& dir, double eps);

void apply_step(SolverState& state, const Direction& dir, double gamma);

double fw_gap(const SolverState& state, const Direction& fwd);

enum class StopReason { MaxIters, GapTolerance, EarlyStopping };
std::string to_string(StopReason r);

struct TrainResult {
  Model model;  // best on validation when a hook is set, else final
  std::vector<IterationRecord> history;
  StopReason reason = StopReason::MaxIters;
  std::size_t best_iteration = 0;
  std::optional<double> best_val_metric;
};

TrainResult train(const ConstraintSet& cs, const SolverConfig& cfg);

double lipschitz_constant(const ConstraintSet& cs);
double convergence_bound(double lambda, double lipschitz, std::size_t k);
// B_dual defaults to 4 lambda, the entrywise L1 bound over the domain.
double excess_risk_bound(double lambda, double lipschitz, double bx, std::size_t k,
                         std::size_t n, double delta, std::optional<double> b_dual = std::nullopt);

void write_history_jsonl(const std::vector<IterationRecord>& history, std::ostream& out);
std::string history_record_json(const IterationRecord& r);

}  // namespace hdsl
