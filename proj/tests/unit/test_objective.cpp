#include <doctest.h>

#include <random>

#include "hdsl/objective.hpp"
#include "support/dense_oracle.hpp"

using namespace hdsl;

namespace {

// x = e0, y = e1, z = e2 so that d = (0, 1, -1).
ConstraintSet toy_constraint() {
  auto ds = std::make_shared<Dataset>();
  ds->dim = 3;
  ds->points = {SparseVector(3, {{0, 1.0}}), SparseVector(3, {{1, 1.0}}), SparseVector(3, {{2, 1.0}})};
  return ConstraintSet(ds, {{0, 1, 2}});
}

}  // namespace

TEST_CASE("smoothed hinge examples") {
  CHECK(smoothed_hinge(1.5) == 0.0);
  CHECK(smoothed_hinge(-0.5) == 1.0);
  CHECK(smoothed_hinge(0.5) == 0.125);
  CHECK(smoothed_hinge_deriv(2.0) == 0.0);
  CHECK(smoothed_hinge_deriv(-3.0) == -1.0);
  CHECK(smoothed_hinge_deriv(0.25) == -0.75);
}

TEST_CASE("smoothed hinge is C1 at the branch points") {
  const double below0 = std::nextafter(0.0, -1.0), above0 = std::nextafter(0.0, 1.0);
  CHECK(smoothed_hinge(0.0) == 0.5);
  CHECK(smoothed_hinge(below0) == doctest::Approx(0.5));
  CHECK(smoothed_hinge(above0) == doctest::Approx(0.5));
  CHECK(smoothed_hinge_deriv(0.0) == -1.0);
  CHECK(smoothed_hinge_deriv(above0) == doctest::Approx(-1.0));
  CHECK(smoothed_hinge(1.0) == 0.0);
  CHECK(smoothed_hinge(std::nextafter(1.0, 0.0)) == doctest::Approx(0.0));
  CHECK(smoothed_hinge_deriv(1.0) == 0.0);
  CHECK(smoothed_hinge_deriv(std::nextafter(1.0, 0.0)) == doctest::Approx(0.0));
}

TEST_CASE("derivative matches central differences") {
  const double h = 1e-6;
  for (int k = 0; k <= 400; ++k) {
    const double m = -2.0 + 0.01 * k;
    const double fd = (smoothed_hinge(m + h) - smoothed_hinge(m - h)) / (2 * h);
    CHECK(std::abs(fd - smoothed_hinge_deriv(m)) <= 1e-6);
  }
}

TEST_CASE("objective examples") {
  CHECK(objective(MarginCache{{1.0, 2.0, 5.0}}) == 0.0);
  CHECK(objective(MarginCache{{0.0, 1.0}}) == 0.25);
  CHECK(objective(MarginCache{{-1.0}}) == 1.5);
  CHECK_THROWS(objective(MarginCache{}));
}

TEST_CASE("objective is convex along segments") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd(0.5, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    MarginCache a, b, mid;
    for (int t = 0; t < 20; ++t) {
      a.margins.push_back(nd(rng));
      b.margins.push_back(nd(rng));
      mid.margins.push_back(0.5 * (a.margins.back() + b.margins.back()));
    }
    CHECK(objective(mid) <= 0.5 * (objective(a) + objective(b)) + 1e-12);
  }
}

TEST_CASE("init_cache examples") {
  const auto cs = toy_constraint();
  const auto cache = init_cache(cs, Model::single({0, 1, Sign::Pos}, 2.0, 3));
  REQUIRE(cache.size() == 1);
  CHECK(cache.margins[0] == 2.0);

  auto ds = std::make_shared<Dataset>();
  ds->dim = 3;
  const ConstraintSet empty(ds, {});
  CHECK(init_cache(empty, Model::single({0, 1, Sign::Pos}, 1.0, 3)).size() == 0);
}

TEST_CASE("init_cache agrees with dense margins") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cs = oracle::random_constraints(12, 10, 25, 0.4, rng);
    const Model m = oracle::random_model(10, 1 + trial % 6, 3.0, rng);
    const auto ref = oracle::margins(cs, oracle::model_matrix(m));
    const auto cache = init_cache(cs, m);
    for (std::size_t t = 0; t < cs.size(); ++t) CHECK(std::abs(cache.margins[t] - ref[t]) <= 1e-12);
  }
}

TEST_CASE("update_cache examples") {
  MarginCache c{{1.0, 3.0}};
  const std::vector<double> b{2.0, -1.0};
  update_cache(c, StepKind::Forward, 0.0, b);
  CHECK(c.margins == std::vector<double>{1.0, 3.0});
  update_cache(c, StepKind::Forward, 1.0, b);
  CHECK(c.margins == b);
  MarginCache a{{1.0}};
  update_cache(a, StepKind::Away, 0.5, std::vector<double>{2.0});
  CHECK(a.margins[0] == 0.5);
  CHECK_THROWS(update_cache(a, StepKind::Away, 0.5, std::vector<double>{1.0, 2.0}));
}

TEST_CASE("away update matches recomputation from updated weights") {
  std::mt19937_64 rng(45);
  const auto cs = oracle::random_constraints(10, 8, 30, 0.5, rng);
  Model m = oracle::random_model(8, 4, 2.0, rng);
  auto cache = init_cache(cs, m);
  const auto [b, alpha] = *m.atoms().begin();
  const double gamma = 0.5 * alpha / (1.0 - alpha);
  for (auto& [id, w] : m.mutable_atoms()) w *= 1.0 + gamma;
  m.mutable_atoms()[b] -= gamma;
  update_cache(cache, StepKind::Away, gamma, basis_inners(cs, b, m.lambda()));
  const auto ref = init_cache(cs, m);
  for (std::size_t t = 0; t < cs.size(); ++t) CHECK(std::abs(cache.margins[t] - ref.margins[t]) <= 1e-12);
}

TEST_CASE("grad_inner_with_model") {
  CHECK(grad_inner_with_model(MarginCache{{1.0, 4.0}}) == 0.0);
  CHECK(grad_inner_with_model(MarginCache{{0.5}}) == -0.25);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cs = oracle::random_constraints(15, 12, 20, 0.4, rng);
    const Model m = oracle::random_model(12, 3, 1.0 + trial, rng);
    const auto M = oracle::model_matrix(m);
    const auto G = oracle::gradient(cs, oracle::margins(cs, M));
    CHECK(std::abs(grad_inner_with_model(init_cache(cs, m)) - oracle::frob(M, G)) <= 1e-10);
  }
}

TEST_CASE("ConstraintSet validation") {
  auto ds = std::make_shared<Dataset>();
  ds->dim = 2;
  ds->points = {SparseVector(2), SparseVector(2)};
  CHECK_THROWS(ConstraintSet(ds, {{0, 1, 1}}));
  CHECK_THROWS(ConstraintSet(ds, {{0, 1, 2}}));
  const ConstraintSet ok(ds, {{0, 0, 1}});
  CHECK(ok.size() == 1);
}
