#include <doctest.h>

#include <random>
#include <set>

#include "hdsl/similarity_model.hpp"
#include "support/dense_oracle.hpp"

using namespace hdsl;

namespace {

SparseVector unit(std::size_t d, FeatureIndex i) { return SparseVector(d, {{i, 1.0}}); }

}  // namespace

TEST_CASE("BasisId canonical order and tie-break order") {
  CHECK(BasisId::make(5, 2, Sign::Neg) == BasisId{2, 5, Sign::Neg});
  CHECK_THROWS(BasisId::make(3, 3, Sign::Pos));
  CHECK(BasisId{0, 1, Sign::Pos} < BasisId{0, 1, Sign::Neg});
  CHECK(BasisId{0, 1, Sign::Neg} < BasisId{0, 2, Sign::Pos});
  CHECK(BasisId{0, 9, Sign::Neg} < BasisId{1, 2, Sign::Pos});
  CHECK(to_string(BasisId{2, 5, Sign::Neg}) == "N(2,5)");
}

TEST_CASE("basis_inner examples") {
  const SparseVector x(3, {{0, 1.0}});
  const SparseVector d(3, {{1, 1.0}, {2, -1.0}});
  CHECK(basis_inner(x, d, {0, 1, Sign::Pos}, 2.0) == 2.0);
  CHECK(basis_inner(x, d, {0, 1, Sign::Neg}, 2.0) == -2.0);
  CHECK(basis_inner(SparseVector(3), d, {0, 1, Sign::Pos}, 2.0) == 0.0);
}

TEST_CASE("basis_inner agrees with the dense oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = 2 + trial % 29;
    const auto x = oracle::random_sparse(d, 0.5, rng);
    const auto y = oracle::random_sparse(d, 0.5, rng);
    const auto z = oracle::random_sparse(d, 0.5, rng);
    const auto diff = subtract(y, z);
    std::uniform_int_distribution<FeatureIndex> f(0, static_cast<FeatureIndex>(d - 1));
    FeatureIndex a = f(rng), b = f(rng);
    if (a == b) continue;
    const BasisId bid = BasisId::make(a, b, trial % 2 ? Sign::Pos : Sign::Neg);
    const double lambda = 0.5 + trial % 7;
    const auto A = oracle::outer(oracle::dense(x), oracle::dense(diff));
    const double ref = oracle::frob(A, oracle::basis_matrix(bid, lambda, d));
    CHECK(std::abs(basis_inner(x, diff, bid, lambda) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("similarity examples") {
  const Model m = Model::single({0, 1, Sign::Pos}, 1.0, 3);
  CHECK(similarity(m, unit(3, 0), unit(3, 1)) == 1.0);
  CHECK(similarity(m, unit(3, 0), unit(3, 0)) == 1.0);
  CHECK(similarity(m, SparseVector(3), unit(3, 2)) == 0.0);
  CHECK_THROWS_AS(similarity(m, unit(3, 0), unit(4, 0)), DimensionMismatch);
}

TEST_CASE("similarity paths agree with each other and the dense oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 4 + trial % 20;
    const Model m = oracle::random_model(d, 1 + trial % 9, 0.5 + trial % 4, rng);
    const auto M = oracle::model_matrix(m);
    for (int r = 0; r < 5; ++r) {
      const auto x = oracle::random_sparse(d, 0.4, rng);
      const auto y = oracle::random_sparse(d, 0.4, rng);
      const double ref = oracle::bilinear(oracle::dense(x), M, oracle::dense(y));
      const double a = similarity_by_atoms(m, x, y);
      const double b = similarity_by_matrix(m, x, y);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(ref)));
      CHECK(std::abs(a - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
      CHECK(std::abs(similarity(m, x, y) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("to_sparse_matrix examples") {
  CHECK(to_sparse_matrix(Model::single({0, 1, Sign::Pos}, 3.0, 2)) ==
        std::vector<MatrixEntry>{{0, 0, 3}, {0, 1, 3}, {1, 0, 3}, {1, 1, 3}});
  Model mixed(2.0, 2);
  mixed.mutable_atoms()[{0, 1, Sign::Pos}] = 0.5;
  mixed.mutable_atoms()[{0, 1, Sign::Neg}] = 0.5;
  CHECK(to_sparse_matrix(mixed) == std::vector<MatrixEntry>{{0, 0, 2}, {1, 1, 2}});
  CHECK(to_sparse_matrix(Model::single({2, 5, Sign::Neg}, 1.0, 6)) ==
        std::vector<MatrixEntry>{{2, 2, 1}, {2, 5, -1}, {5, 2, -1}, {5, 5, 1}});
}

TEST_CASE("to_sparse_matrix matches the dense sum and obeys the size bounds") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 5 + trial % 15;
    const Model m = oracle::random_model(d, 1 + trial % 12, 1.0 + trial % 3, rng);
    const auto M = oracle::model_matrix(m);
    const auto coo = to_sparse_matrix(m);
    CHECK(coo.size() <= 4 * m.atom_count());
    std::set<FeatureIndex> features;
    auto dense = oracle::zeros(d);
    for (const auto& e : coo) {
      dense[e.row][e.col] = e.value;
      features.insert(e.row);
    }
    CHECK(features.size() <= 2 * m.atom_count());
    CHECK(m.feature_count() <= 2 * m.atom_count());
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        CHECK(std::abs(dense[i][j] - M[i][j]) <= 1e-12);
        CHECK(dense[i][j] == dense[j][i]);
      }
  }
}

TEST_CASE("factorize examples") {
  const auto p = factorize(Model::single({0, 1, Sign::Pos}, 4.0, 2));
  REQUIRE(p.columns.size() == 1);
  CHECK(p.columns[0].coefficient == 2.0);
  CHECK(project(p, unit(2, 0)) == std::vector<double>{2.0});

  Model n(4.0, 3);
  n.mutable_atoms()[{0, 1, Sign::Neg}] = 0.25;
  n.mutable_atoms()[{1, 2, Sign::Pos}] = 0.75;
  const auto pn = factorize(n);
  CHECK(pn.columns[0].coefficient == 1.0);
  CHECK(project(pn, SparseVector(3, {{0, 1.0}, {1, 1.0}}))[0] == 0.0);
  CHECK(project(pn, SparseVector(3)) == std::vector<double>{0.0, 0.0});

  std::mt19937_64 rng(1);
  CHECK(factorize(oracle::random_model(20, 7, 1.0, rng)).columns.size() == 7);
}

TEST_CASE("L L^T reconstructs M") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 4 + trial % 10;
    const Model m = oracle::random_model(d, 1 + trial % 8, 0.3 + trial, rng);
    const auto p = factorize(m);
    auto L = oracle::Mat(d, oracle::Vec(p.columns.size(), 0.0));
    for (std::size_t c = 0; c < p.columns.size(); ++c) {
      L[p.columns[c].i][c] = p.columns[c].coefficient;
      L[p.columns[c].j][c] = sign_value(p.columns[c].sign) * p.columns[c].coefficient;
    }
    const auto M = oracle::model_matrix(m);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < p.columns.size(); ++c) s += L[i][c] * L[j][c];
        CHECK(std::abs(s - M[i][j]) <= 1e-10);
      }
  }
}

TEST_CASE("projection dot products reproduce similarity; PSD on random points") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 30;
    const Model m = oracle::random_model(d, 1 + trial, 5.0, rng);
    const auto p = factorize(m);
    std::vector<SparseVector> xs;
    for (int r = 0; r < 40; ++r) xs.push_back(oracle::random_sparse(d, 0.3, rng));
    const auto sparse_proj = project_all(p, xs);
    for (std::size_t r = 0; r + 1 < xs.size(); ++r) {
      const auto u = project(p, xs[r]), v = project(p, xs[r + 1]);
      double dd = 0.0;
      for (std::size_t c = 0; c < u.size(); ++c) dd += u[c] * v[c];
      const double s = similarity(m, xs[r], xs[r + 1]);
      CHECK(std::abs(dd - s) <= 1e-10);
      CHECK(std::abs(dot(sparse_proj[r], sparse_proj[r + 1]) - s) <= 1e-10);
      CHECK(similarity(m, xs[r], xs[r]) >= -1e-10);
    }
  }
}

TEST_CASE("model serialization") {
  Model m(2.5, 10);
  m.mutable_atoms()[{1, 4, Sign::Pos}] = 0.3;
  m.mutable_atoms()[{2, 9, Sign::Neg}] = 0.7;
  const std::string text = serialize_model(m);
  CHECK(text.rfind("hdsl-model 1\nlambda 2.5 dim 10\n", 0) == 0);
  CHECK(deserialize_model(text) == m);

  const std::string one = serialize_model(Model::single({0, 1, Sign::Pos}, 1.0, 2));
  CHECK(std::count(one.begin(), one.end(), '\n') == 3);

  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Model r = oracle::random_model(50, 1 + trial, 1e-3 * (trial + 1), rng);
    CHECK(deserialize_model(serialize_model(r)) == r);
  }
}

TEST_CASE("model deserialization errors") {
  CHECK_THROWS_AS(deserialize_model("hdsl-model 2\nlambda 1 dim 3\nP 0 1 1\n"), ModelError);
  CHECK_THROWS_AS(deserialize_model("hdsl-model 1\nlambda 1 dim 3\nP 0 1 0.5\n"), ModelError);
  CHECK_THROWS_AS(deserialize_model("hdsl-model 1\nlambda 1 dim 3\nP 0 1 0.5\nP 0 1 0.5\n"),
                  ModelError);
  CHECK_THROWS_AS(deserialize_model("hdsl-model 1\nlambda 1 dim 3\nP 0 3 1\n"), ModelError);
  CHECK_THROWS_AS(deserialize_model("hdsl-model 1\nlambda 1 dim 3\nP 1 0 1\n"), ModelError);
  CHECK_THROWS_AS(deserialize_model("hdsl-model 1\nlambda 0 dim 3\nP 0 1 1\n"), ModelError);
  CHECK_THROWS_AS(deserialize_model("garbage\n"), ModelError);
  // within the load tolerance the weights are renormalised
  const Model m = deserialize_model("hdsl-model 1\nlambda 1 dim 3\nP 0 1 0.5000001\nN 1 2 0.5\n");
  CHECK(std::abs(m.weight_sum() - 1.0) <= 1e-12);
}

TEST_CASE("Model::validate") {
  Model m(1.0, 4);
  CHECK_THROWS_AS(m.validate(), ModelError);
  m.mutable_atoms()[{0, 1, Sign::Pos}] = 0.5;
  CHECK_THROWS_AS(m.validate(), ModelError);
  m.mutable_atoms()[{0, 2, Sign::Pos}] = 0.5;
  CHECK_NOTHROW(m.validate());
  m.mutable_atoms()[{0, 3, Sign::Pos}] = 0.0;
  CHECK_THROWS_AS(m.validate(), ModelError);
  CHECK_THROWS_AS(Model(-1.0, 3), ModelError);
}
