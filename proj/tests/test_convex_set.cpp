#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "stodec/convex_set.hpp"
#include "stodec/errors.hpp"
#include "stodec/rng.hpp"

using namespace stodec;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// The set kinds exercised by the randomized property suites.
std::vector<ConvexSet> property_sets() {
  std::vector<ConvexSet> sets;
  sets.push_back(ConvexSet::box(vec({-1.0, 0.0}), vec({2.0, 1.5})));
  sets.push_back(ConvexSet::ball(vec({0.5, -0.5}), 1.25));
  sets.push_back(ConvexSet::half_space(vec({1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}), 0.5));
  sets.push_back(ConvexSet::orthant(2));
  sets.push_back(ConvexSet::full_space(2));
  {
    std::vector<ConvexSet> members;
    members.push_back(ConvexSet::box(vec({-2.0, -2.0}), vec({2.0, 2.0})));
    members.push_back(ConvexSet::half_space(vec({0.6, 0.8}), 1.0));
    sets.push_back(ConvexSet::intersection(std::move(members)));
  }
  return sets;
}

Eigen::VectorXd random_point(CounterRng& rng, int dim, double radius) {
  Eigen::VectorXd y(dim);
  for (int i = 0; i < dim; ++i) y[i] = rng.next_uniform(-radius, radius);
  return y;
}

}  // namespace

TEST_CASE("projection matches the analytic nearest points") {
  const auto ball = ConvexSet::ball(vec({0.0, 0.0}), 1.0);
  CHECK((ball.project(vec({2.0, 0.0})) - vec({1.0, 0.0})).norm() == doctest::Approx(0.0));

  const auto box = ConvexSet::box(vec({0.0, 0.0}), vec({1.0, 1.0}));
  CHECK(box.project(vec({0.5, 0.5})) == vec({0.5, 0.5}));

  const auto orthant = ConvexSet::orthant(2);
  CHECK(orthant.project(vec({-3.0, 2.0})) == vec({0.0, 2.0}));
}

TEST_CASE("squared distance basics") {
  CHECK(ConvexSet::orthant(1).distance_sq(vec({-2.0})) == doctest::Approx(4.0));
  CHECK(ConvexSet::full_space(3).distance_sq(vec({9.0, -3.0, 1.0})) == 0.0);
  CHECK(ConvexSet::ball(vec({0.0, 0.0}), 1.0).distance_sq(vec({2.0, 0.0})) ==
        doctest::Approx(1.0));
}

TEST_CASE("gradient of the squared distance") {
  CHECK(ConvexSet::orthant(1).grad_distance_sq(vec({-2.0}))[0] == doctest::Approx(-4.0));
  const auto g = ConvexSet::ball(vec({0.0, 0.0}), 1.0).grad_distance_sq(vec({2.0, 0.0}));
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(g[1] == doctest::Approx(0.0));
  // Vanishes at interior points.
  const auto box = ConvexSet::box(vec({0.0, 0.0}), vec({1.0, 1.0}));
  CHECK(box.grad_distance_sq(vec({0.25, 0.75})).norm() == 0.0);
}

TEST_CASE("hessian estimates on canonical sets") {
  const auto full = ConvexSet::full_space(2);
  const auto h_full = full.hessian_distance_sq(vec({0.3, -0.7}), 1e-4);
  CHECK(h_full.matrix.norm() == doctest::Approx(0.0));
  CHECK(h_full.bounds_ok);

  const auto orthant = ConvexSet::orthant(1);
  const auto h_orth = orthant.hessian_distance_sq(vec({-1.0}), 1e-4);
  CHECK(h_orth.matrix(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(h_orth.bounds_ok);

  // Half-space {x1 <= 0}: squared distance max(x1, 0)^2, Hessian diag(2, 0)
  // in the exterior by direct differentiation.
  const auto half = ConvexSet::half_space(vec({1.0, 0.0}), 0.0);
  const auto h_half = half.hessian_distance_sq(vec({1.0, 0.0}), 1e-4);
  CHECK(h_half.matrix(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(h_half.matrix(0, 1)) < 1e-8);
  CHECK(std::abs(h_half.matrix(1, 1)) < 1e-8);
  CHECK(h_half.bounds_ok);
  // Symmetrized exactly.
  CHECK(h_half.matrix(0, 1) == h_half.matrix(1, 0));
}

TEST_CASE("hessian rejects non-finite quotients") {
  const auto ball = ConvexSet::ball(vec({0.0}), 1.0);
  CHECK_THROWS_AS(ball.hessian_distance_sq(vec({1e308}), 1e-4), NonFiniteError);
}

TEST_CASE("mollified squared distance: zero set, smooth region, boundary band") {
  const auto full = ConvexSet::full_space(2);
  CHECK(full.mollified_distance_sq(vec({3.0, -1.0}), 0.05, 256, 1) == 0.0);

  // Deep in the exterior of the half-line (distance 5): d^2 is locally
  // smooth there and the estimate must sit near the dense-quadrature value
  // of the same convolution. Deep inside, the smoothed distance vanishes.
  const auto orthant = ConvexSet::orthant(1);
  const double est = orthant.mollified_distance_sq(vec({-5.0}), 0.01, 4096, 11);
  CHECK(est >= 24.9);
  CHECK(est <= 25.2);
  const double oracle = oracles::halfline_mollified_distance_sq(-5.0, 0.01);
  CHECK(est == doctest::Approx(oracle).epsilon(2e-3));
  CHECK(orthant.mollified_distance_sq(vec({5.0}), 0.01, 4096, 11) == 0.0);

  // Just inside the set, within delta of the boundary: bounded by the
  // smoothing band.
  const double band = orthant.mollified_distance_sq(vec({-0.005}), 0.01, 4096, 11);
  CHECK(band >= 0.0);
  CHECK(band <= (0.005 + 0.01) * (0.005 + 0.01));
}

TEST_CASE("construction invariants") {
  CHECK_THROWS_AS(ConvexSet::box(vec({1.0}), vec({0.0})), InvalidArgument);
  CHECK_THROWS_AS(ConvexSet::ball(vec({0.0}), 0.0), InvalidArgument);
  CHECK_THROWS_AS(ConvexSet::half_space(vec({1.0, 1.0}), 0.0), InvalidArgument);
  CHECK_THROWS_AS(ConvexSet::orthant(0), InvalidArgument);
  CHECK_THROWS_AS(ConvexSet::orthant(2).project(vec({1.0})), DimensionError);

  // Disjoint members: the alternating scheme stalls and reports.
  std::vector<ConvexSet> disjoint;
  disjoint.push_back(ConvexSet::box(vec({0.0}), vec({1.0})));
  disjoint.push_back(ConvexSet::box(vec({2.0}), vec({3.0})));
  CHECK_THROWS_AS(ConvexSet::intersection(std::move(disjoint)), ConvergenceError);
}

TEST_CASE("dykstra projection agrees with analytic intersections") {
  // Two overlapping boxes intersect in a box.
  std::vector<ConvexSet> boxes;
  boxes.push_back(ConvexSet::box(vec({0.0, 0.0}), vec({2.0, 2.0})));
  boxes.push_back(ConvexSet::box(vec({1.0, 1.0}), vec({3.0, 3.0})));
  const auto inter = ConvexSet::intersection(std::move(boxes));
  const auto exact = ConvexSet::box(vec({1.0, 1.0}), vec({2.0, 2.0}));
  CounterRng rng(33, 0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd a = random_point(rng, 2, 5.0);
    CHECK((inter.project(a) - exact.project(a)).norm() <= 1e-9);
  }

  // Ball cap of the nonnegative quadrant.
  std::vector<ConvexSet> cap;
  cap.push_back(ConvexSet::ball(vec({0.0, 0.0}), 2.0));
  cap.push_back(ConvexSet::orthant(2));
  const auto wedge = ConvexSet::intersection(std::move(cap));
  const Eigen::VectorXd p1 = wedge.project(vec({3.0, 3.0}));
  CHECK((p1 - vec({std::sqrt(2.0), std::sqrt(2.0)})).norm() <= 1e-9);
  const Eigen::VectorXd p2 = wedge.project(vec({-3.0, 1.0}));
  CHECK((p2 - vec({0.0, 1.0})).norm() <= 1e-9);
}

TEST_CASE("projection property suite per set kind") {
  const int checks = 2000;
  for (const auto& set : property_sets()) {
    CounterRng rng(7, static_cast<std::uint64_t>(set.kind()));
    const bool analytic = set.kind() != ConvexSet::Kind::Intersection;
    for (int i = 0; i < checks; ++i) {
      const Eigen::VectorXd y = random_point(rng, set.dim(), 5.0);
      const Eigen::VectorXd x = random_point(rng, set.dim(), 2.0);
      const Eigen::VectorXd py = set.project(y);

      // Membership and idempotence.
      CHECK(set.distance(py) <= 1e-10);
      CHECK((set.project(py) - py).norm() <= (analytic ? 1e-12 : 1e-10));

      // Nonexpansiveness of the projection map.
      CHECK((set.project(y) - set.project(x + y)).norm() <= x.norm() + 1e-10);

      // Convexity of the squared distance.
      const double lambda = rng.next_uniform();
      const Eigen::VectorXd y2 = random_point(rng, set.dim(), 5.0);
      const double lhs = set.distance_sq(lambda * y + (1.0 - lambda) * y2);
      const double rhs =
          lambda * set.distance_sq(y) + (1.0 - lambda) * set.distance_sq(y2);
      CHECK(lhs <= rhs + 1e-10);
    }
  }
}

TEST_CASE("gradient identity vs central differences") {
  for (const auto& set : property_sets()) {
    if (set.kind() == ConvexSet::Kind::FullSpace) continue;  // d_K never reaches 10h
    CounterRng rng(19, static_cast<std::uint64_t>(set.kind()));
    int tested = 0;
    for (int i = 0; i < 600 && tested < 300; ++i) {
      const Eigen::VectorXd y = random_point(rng, set.dim(), 5.0);
      const double h = 1e-6 * (1.0 + y.norm());
      if (set.distance(y) < 10.0 * h) continue;
      ++tested;
      const Eigen::VectorXd grad = set.grad_distance_sq(y);
      Eigen::VectorXd fd(set.dim());
      Eigen::VectorXd probe = y;
      for (int k = 0; k < set.dim(); ++k) {
        probe[k] = y[k] + h;
        const double fp = set.distance_sq(probe);
        probe[k] = y[k] - h;
        const double fm = set.distance_sq(probe);
        probe[k] = y[k];
        fd[k] = (fp - fm) / (2.0 * h);
      }
      CHECK((grad - fd).norm() <= 1e-6 * grad.norm());
    }
    CHECK(tested > 0);
  }
}

TEST_CASE("hessian eigenvalue bounds at sampled points") {
  for (const auto& set : property_sets()) {
    CounterRng rng(23, static_cast<std::uint64_t>(set.kind()));
    const double h = 1e-4;
    int flagged = 0;
    for (int i = 0; i < 300; ++i) {
      const Eigen::VectorXd y = random_point(rng, set.dim(), 4.0);
      const auto est = set.hessian_distance_sq(y, h);
      if (!est.bounds_ok) {
        ++flagged;
        continue;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * est.matrix,
                                                         Eigen::EigenvaluesOnly);
      CHECK(eig.eigenvalues().minCoeff() >= -10.0 * h);
      CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 10.0 * h);
    }
    // Non-smooth points are a thin set; flags must be rare.
    CHECK(flagged <= 3);
  }
}

TEST_CASE("mollifier bound holds for random triples") {
  for (const auto& set : property_sets()) {
    CounterRng rng(29, static_cast<std::uint64_t>(set.kind()));
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd x = random_point(rng, set.dim(), 4.0);
      const double delta = rng.next_uniform(0.01, 0.5);
      const auto est = set.mollified_distance_sq_detail(x, delta, 512, 17);
      CHECK(est.value >= 0.0);
      CHECK(est.value <= est.upper_bound);
      CHECK(est.pre_clamp <= est.upper_bound + 1e-3);
      CHECK(est.pre_clamp >= -1e-3);
    }
  }
}

TEST_CASE("json round trip for every kind") {
  auto sets = property_sets();
  for (const auto& set : sets) {
    const auto j = set.to_json();
    const auto back = ConvexSet::from_json(j);
    CHECK(back.to_json().dump() == j.dump());
    CHECK(back.dim() == set.dim());
  }
  CHECK(ConvexSet::from_json(nlohmann::json::parse(
            R"({"kind":"box","lo":[0,0],"hi":[1,1]})"))
            .kind() == ConvexSet::Kind::Box);
  CHECK_THROWS_AS(ConvexSet::from_json(nlohmann::json::parse(R"({"kind":"moon"})")),
                  ConfigError);
  CHECK_THROWS_AS(ConvexSet::from_json(nlohmann::json::parse(
                      R"({"kind":"box","lo":[0],"hi":[1],"extra":2})")),
                  ConfigError);
}
