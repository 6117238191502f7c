#include <doctest.h>

#include <cmath>
#include <random>

#include "hdsl/evaluation.hpp"
#include "support/dense_oracle.hpp"

using namespace hdsl;

namespace {

// Pairwise enumeration, ties worth one half.
double auc_pairwise(const std::vector<double>& pos, const std::vector<double>& neg) {
  double w = 0.0;
  for (double p : pos)
    for (double n : neg) w += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return w / static_cast<double>(pos.size() * neg.size());
}

std::vector<std::pair<std::size_t, double>> scored(const std::vector<double>& s) {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.emplace_back(i, s[i]);
  return out;
}

}  // namespace

TEST_CASE("auc examples") {
  const std::set<std::size_t> pos{0, 1};
  CHECK(auc(scored({3, 2, 1, 0}), pos) == 1.0);
  CHECK(auc(scored({1, 1, 1, 1}), pos) == 0.5);
  CHECK(auc(scored({0, 1, 2, 3}), pos) == 0.0);
  CHECK_THROWS(auc(scored({1, 2}), {0, 1}));
  CHECK_THROWS(auc(scored({1, 2}), {}));
}

TEST_CASE("auc agrees with pairwise enumeration and is rank invariant") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> coarse(0, 5);  // plenty of ties
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s;
    std::set<std::size_t> pos;
    std::vector<double> ps, ns;
    for (std::size_t i = 0; i < 40; ++i) {
      s.push_back(coarse(rng) * 0.5 - 1.0);
      if ((i + trial) % 3 == 0) {
        pos.insert(i);
        ps.push_back(s.back());
      } else {
        ns.push_back(s.back());
      }
    }
    const double a = auc(scored(s), pos);
    CHECK(a == doctest::Approx(auc_pairwise(ps, ns)).epsilon(1e-14));
    CHECK((a >= 0.0 && a <= 1.0));
    std::vector<double> e, aff;
    for (double v : s) {
      e.push_back(std::exp(v));
      aff.push_back(3.0 * v + 7.0);
    }
    CHECK(auc(scored(e), pos) == a);
    CHECK(auc(scored(aff), pos) == a);
  }
}

TEST_CASE("auc_grouped folds large tied populations") {
  CHECK(auc_grouped({{1.0, 1, 0}, {0.0, 0, 1e6}}) == 1.0);
  CHECK(auc_grouped({{0.0, 3, 7}}) == 0.5);
  CHECK(auc_grouped({{2.0, 1, 1}, {0.0, 1, 1}}) == doctest::Approx(0.5));
}

TEST_CASE("knn_error on a separable toy instance") {
  // class 0 lives on features {0,1}, class 1 on {2,3}
  Dataset train;
  train.dim = 4;
  train.points = {SparseVector(4, {{0, 1.0}}), SparseVector(4, {{1, 1.0}}), SparseVector(4, {{0, 0.5}, {1, 0.5}}),
                  SparseVector(4, {{2, 1.0}}), SparseVector(4, {{3, 1.0}}), SparseVector(4, {{2, 0.5}, {3, 0.5}})};
  train.labels = std::vector<int>{0, 0, 0, 1, 1, 1};
  Model m(1.0, 4);
  m.mutable_atoms()[{0, 1, Sign::Pos}] = 0.5;
  m.mutable_atoms()[{2, 3, Sign::Pos}] = 0.5;
  CHECK(knn_error(m, train, train, 3) == 0.0);
  CHECK(knn_error(m, train, train, 3, 4) == 0.0);

  Dataset single = train;
  single.points.resize(1);
  single.labels = std::vector<int>{1};
  CHECK(knn_error(m, single, train, 1) == doctest::Approx(0.5));

  Dataset empty;
  empty.dim = 4;
  empty.labels = std::vector<int>{};
  CHECK_THROWS(knn_error(m, train, empty, 3));
  CHECK_THROWS(knn_error(m, train, train, 7));
}

TEST_CASE("knn_error matches brute force and is invariant to lambda") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Dataset train = *oracle::random_dataset(40, 15, 0.3, rng, false);
    Dataset test = *oracle::random_dataset(20, 15, 0.3, rng, false);
    std::vector<int> ytr, yte;
    for (std::size_t i = 0; i < 40; ++i) ytr.push_back(static_cast<int>(i % 3));
    for (std::size_t i = 0; i < 20; ++i) yte.push_back(static_cast<int>((i * 7) % 3));
    train.labels = ytr;
    test.labels = yte;
    Model m = oracle::random_model(15, 5, 1.0, rng);

    const auto M = oracle::model_matrix(m);
    std::size_t wrong = 0;
    for (std::size_t q = 0; q < test.size(); ++q) {
      std::vector<std::pair<double, std::size_t>> order;
      for (std::size_t r = 0; r < train.size(); ++r)
        order.emplace_back(-oracle::bilinear(oracle::dense(test.points[q]), M, oracle::dense(train.points[r])), r);
      std::sort(order.begin(), order.end(), [](const auto& u, const auto& v) {
        // near-equal similarities count as ties
        if (std::abs(u.first - v.first) > 1e-12) return u.first < v.first;
        return u.second < v.second;
      });
      int votes[3] = {0, 0, 0};
      for (int k = 0; k < 3; ++k) ++votes[ytr[order[static_cast<std::size_t>(k)].second]];
      int pred = 0;
      for (int c = 1; c < 3; ++c)
        if (votes[c] > votes[pred]) pred = c;
      wrong += pred != yte[q];
    }
    const double err = knn_error(m, train, test, 3);
    CHECK(err == doctest::Approx(static_cast<double>(wrong) / 20.0));
    Model scaled = m;
    scaled.set_lambda(37.5);
    CHECK(knn_error(scaled, train, test, 3) == err);
    CHECK((err >= 0.0 && err <= 1.0));
  }
}

TEST_CASE("knn_error with a plain similarity function") {
  Dataset train;
  train.dim = 2;
  train.points = {SparseVector(2, {{0, 1.0}}), SparseVector(2, {{1, 1.0}})};
  train.labels = std::vector<int>{4, 9};
  auto d = [](const SparseVector& u, const SparseVector& v) { return dot(u, v); };
  CHECK(knn_error(d, train, train, 1) == 0.0);
  // both neighbours tie in the vote, the smaller label wins
  Dataset q = train;
  q.points = {SparseVector(2, {{0, 1.0}, {1, 1.0}})};
  q.labels = std::vector<int>{4};
  CHECK(knn_error(d, train, q, 2) == 0.0);
}

TEST_CASE("recovery AUCs") {
  std::mt19937_64 rng(3);
  const Model truth = oracle::random_model(40, 6, 1.0, rng);
  const auto feats = active_features(truth);
  const auto entries = active_entries(truth);
  CHECK(feature_recovery_auc(truth, feats) == 1.0);
  CHECK(entry_recovery_auc(truth, entries) == 1.0);

  // a model on disjoint features scores every truth feature 0
  std::set<FeatureIndex> low;
  for (FeatureIndex f = 0; f < 5; ++f) low.insert(f);
  const Model far = Model::single({30, 31, Sign::Pos}, 1.0, 40);
  CHECK(feature_recovery_auc(far, low) <= 0.5);

  const Model empty(1.0, 40);
  CHECK(entry_recovery_auc(empty, entries) == 0.5);
  CHECK(feature_recovery_auc(empty, feats) == 0.5);
  CHECK_THROWS(feature_recovery_auc(truth, {}));
  CHECK_THROWS(entry_recovery_auc(truth, {}));
}

TEST_CASE("entry recovery of unrelated models is near one half") {
  std::mt19937_64 rng(4);
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const Model truth = oracle::random_model(30, 20, 1.0, rng);
    const Model guess = oracle::random_model(30, 20, 1.0, rng);
    total += entry_recovery_auc(guess, active_entries(truth));
  }
  CHECK(std::abs(total / reps - 0.5) < 0.02);
}

TEST_CASE("recovery AUC matches explicit enumeration over the universe") {
  std::mt19937_64 rng(5);
  const std::size_t d = 25;
  const Model truth = oracle::random_model(d, 5, 1.0, rng);
  const Model guess = oracle::random_model(d, 8, 2.0, rng);
  const auto M = oracle::model_matrix(guess);
  const auto te = active_entries(truth);
  std::vector<double> ps, ns;
  for (FeatureIndex i = 0; i < d; ++i)
    for (FeatureIndex j = i + 1; j < d; ++j) (te.contains({i, j}) ? ps : ns).push_back(std::abs(M[i][j]));
  CHECK(entry_recovery_auc(guess, te) == doctest::Approx(auc_pairwise(ps, ns)).epsilon(1e-14));

  const auto tf = active_features(truth);
  ps.clear();
  ns.clear();
  for (FeatureIndex f = 0; f < d; ++f) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += std::abs(M[f][c]);
    (tf.contains(f) ? ps : ns).push_back(s);
  }
  CHECK(feature_recovery_auc(guess, tf) == doctest::Approx(auc_pairwise(ps, ns)).epsilon(1e-14));
}

TEST_CASE("link_auc") {
  Dataset ds;
  ds.dim = 4;
  ds.points = {SparseVector(4, {{0, 1.0}}), SparseVector(4, {{1, 1.0}}), SparseVector(4, {{2, 1.0}}),
               SparseVector(4, {{3, 1.0}})};
  const Model m = Model::single({0, 1, Sign::Pos}, 1.0, 4);
  CHECK(link_auc(m, ds, {{0, 1, 1}, {2, 3, -1}}) == 1.0);
  CHECK(link_auc(Model::single({2, 3, Sign::Neg}, 1.0, 4), ds, {{0, 1, 1}, {0, 3, -1}}) == 0.5);
  CHECK_THROWS(link_auc(m, ds, {{0, 1, 1}}));
  CHECK_THROWS(link_auc(m, ds, {{0, 9, 1}, {0, 1, -1}}));
}
