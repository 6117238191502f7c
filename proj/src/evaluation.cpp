#include "hdsl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

namespace hdsl {

double auc_grouped(std::vector<ScoreGroup> groups) {
  std::sort(groups.begin(), groups.end(),
            [](const ScoreGroup& a, const ScoreGroup& b) { return a.score < b.score; });
  double pos = 0.0, neg = 0.0;
  for (const auto& g : groups) {
    pos += g.positives;
    neg += g.negatives;
  }
  if (pos <= 0.0 || neg <= 0.0) throw std::invalid_argument("AUC needs positives and negatives");
  double wins = 0.0, neg_below = 0.0;
  for (std::size_t s = 0; s < groups.size();) {
    double gp = 0.0, gn = 0.0;
    const double score = groups[s].score;
    for (; s < groups.size() && groups[s].score == score; ++s) {
      gp += groups[s].positives;
      gn += groups[s].negatives;
    }
    wins += gp * (neg_below + 0.5 * gn);
    neg_below += gn;
  }
  return wins / (pos * neg);
}

double auc(const std::vector<std::pair<std::size_t, double>>& scores,
           const std::set<std::size_t>& positives) {
  std::vector<ScoreGroup> groups;
  groups.reserve(scores.size());
  for (const auto& [item, s] : scores) {
    const bool p = positives.contains(item);
    groups.push_back({s, p ? 1.0 : 0.0, p ? 0.0 : 1.0});
  }
  return auc_grouped(std::move(groups));
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) fn(i);
    });
  for (auto& t : pool) t.join();
}

int vote(const std::vector<std::size_t>& nbrs, const std::vector<int>& labels) {
  std::map<int, std::size_t> counts;
  for (std::size_t v : nbrs) ++counts[labels[v]];
  int best = 0;
  std::size_t best_count = 0;
  for (const auto& [label, c] : counts)  // ascending labels: strict > keeps the smaller on ties
    if (c > best_count) {
      best = label;
      best_count = c;
    }
  return best;
}

double knn_error_impl(const std::function<double(std::size_t, std::size_t)>& sim,
                      const Dataset& train, const Dataset& test, std::size_t k,
                      std::size_t threads) {
  if (!train.has_labels() || !test.has_labels()) throw std::invalid_argument("k-NN needs labels");
  if (train.size() == 0 || test.size() == 0) throw std::invalid_argument("k-NN on an empty set");
  if (k == 0 || k > train.size()) throw std::invalid_argument("k must lie in [1, |train|]");
  const auto& ytr = *train.labels;
  const auto& yte = *test.labels;
  std::vector<unsigned char> wrong(test.size(), 0);
  parallel_for(test.size(), threads, [&](std::size_t q) {
    std::vector<double> sims(train.size());
    std::vector<std::size_t> idx(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      sims[r] = sim(q, r);
      idx[r] = r;
    }
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t u, std::size_t v) {
                        return sims[u] != sims[v] ? sims[u] > sims[v] : u < v;
                      });
    idx.resize(k);
    wrong[q] = vote(idx, ytr) != yte[q];
  });
  std::size_t errors = 0;
  for (auto w : wrong) errors += w;
  return static_cast<double>(errors) / static_cast<double>(test.size());
}

}  // namespace

double knn_error(const PointSimilarity& sim, const Dataset& train, const Dataset& test,
                 std::size_t k, std::size_t threads) {
  return knn_error_impl(
      [&](std::size_t q, std::size_t r) { return sim(test.points[q], train.points[r]); }, train,
      test, k, threads);
}

double knn_error(const Model& m, const Dataset& train, const Dataset& test, std::size_t k,
                 std::size_t threads) {
  if (train.dim != m.dim() || test.dim != m.dim())
    throw DimensionMismatch("k-NN: model and data dimensions differ");
  // x^T M x' = (L^T x) . (L^T x'), so project once and take sparse dots.
  const auto proj = factorize(m);
  const auto ptr = project_all(proj, train.points);
  const auto pte = project_all(proj, test.points);
  return knn_error_impl([&](std::size_t q, std::size_t r) { return dot(pte[q], ptr[r]); }, train,
                        test, k, threads);
}

std::set<FeatureIndex> active_features(const Model& m) {
  std::set<FeatureIndex> out;
  for (const auto& e : to_sparse_matrix(m)) out.insert(e.row);
  return out;
}

std::set<std::pair<FeatureIndex, FeatureIndex>> active_entries(const Model& m) {
  std::set<std::pair<FeatureIndex, FeatureIndex>> out;
  for (const auto& e : to_sparse_matrix(m))
    if (e.row < e.col) out.emplace(e.row, e.col);
  return out;
}

double feature_recovery_auc(const Model& m, const std::set<FeatureIndex>& truth_features) {
  const double dim = static_cast<double>(m.dim());
  const double npos = static_cast<double>(truth_features.size());
  if (truth_features.empty() || npos >= dim)
    throw std::invalid_argument("truth features must be a nonempty proper subset");
  std::map<FeatureIndex, double> row_l1;
  for (const auto& e : to_sparse_matrix(m)) row_l1[e.row] += std::abs(e.value);
  std::vector<ScoreGroup> groups;
  double explicit_pos = 0.0, explicit_neg = 0.0;
  for (const auto& [f, s] : row_l1) {
    const bool p = truth_features.contains(f);
    groups.push_back({s, p ? 1.0 : 0.0, p ? 0.0 : 1.0});
    (p ? explicit_pos : explicit_neg) += 1.0;
  }
  groups.push_back({0.0, npos - explicit_pos, (dim - npos) - explicit_neg});
  return auc_grouped(std::move(groups));
}

double entry_recovery_auc(const Model& m,
                          const std::set<std::pair<FeatureIndex, FeatureIndex>>& truth_entries) {
  const double dim = static_cast<double>(m.dim());
  const double universe = dim * (dim - 1.0) / 2.0;
  std::set<std::pair<FeatureIndex, FeatureIndex>> truth;
  for (auto [i, j] : truth_entries) {
    if (i == j) continue;
    truth.insert(std::minmax(i, j));
  }
  const double npos = static_cast<double>(truth.size());
  if (truth.empty() || npos >= universe)
    throw std::invalid_argument("truth entries must be a nonempty proper subset");
  std::vector<ScoreGroup> groups;
  double explicit_pos = 0.0, explicit_neg = 0.0;
  for (const auto& e : to_sparse_matrix(m)) {
    if (e.row >= e.col) continue;
    const bool p = truth.contains({e.row, e.col});
    groups.push_back({std::abs(e.value), p ? 1.0 : 0.0, p ? 0.0 : 1.0});
    (p ? explicit_pos : explicit_neg) += 1.0;
  }
  groups.push_back({0.0, npos - explicit_pos, (universe - npos) - explicit_neg});
  return auc_grouped(std::move(groups));
}

double link_auc(const Model& m, const Dataset& samples, const std::vector<SignedLink>& links) {
  const auto proj = project_all(factorize(m), samples.points);
  std::vector<ScoreGroup> groups;
  groups.reserve(links.size());
  for (const auto& l : links) {
    if (l.a >= samples.size() || l.b >= samples.size())
      throw std::out_of_range("link references an invalid sample");
    const double s = dot(proj[l.a], proj[l.b]);
    groups.push_back({s, l.y == 1 ? 1.0 : 0.0, l.y == 1 ? 0.0 : 1.0});
  }
  return auc_grouped(std::move(groups));
}

}  // namespace hdsl
