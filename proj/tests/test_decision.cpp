#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "stodec/catalog.hpp"
#include "stodec/decision.hpp"
#include "stodec/errors.hpp"
#include "stodec/rng.hpp"
#include "stodec/viability.hpp"

using namespace stodec;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

struct LqrSetup {
  DiffusionModel model;
  CostModel cost;
  Driver driver;
  SpaceGrid space;
  TimeGrid tgrid;
  ValueGrid values;
  double sigma;
  double qt;
};

LqrSetup make_lqr(double qt, int nodes = 121, int steps = 160) {
  LqrSetup s{.model = make_model("lqr", nlohmann::json{{"dim", 1}, {"sigma", 0.1}},
                                 ControlSet::from_box(vec1(-4.0), vec1(4.0), {41})),
             .cost = make_cost("lq", {{"qx", 1.0}, {"qu", 1.0}, {"qt", qt}}),
             .driver = make_driver("zero", {{"n", 1}}),
             .space = SpaceGrid(vec1(-3.0), vec1(3.0), {nodes}),
             .tgrid = TimeGrid(0.0, 0.5, steps),
             .values = {},
             .sigma = 0.1,
             .qt = qt};
  s.values = solve_hjb_system(s.model, s.cost, s.driver, s.space, s.tgrid);
  return s;
}

Policy negate(const Policy& p) {
  Policy out = p;
  for (double& u : out.u_star) u = -u;
  return out;
}

}  // namespace

TEST_CASE("singleton control mesh extracts a constant policy") {
  const auto mesh = ControlSet::singleton(vec1(0.75));
  const auto model =
      make_model("controlled-integrator", nlohmann::json{{"dim", 1}, {"sigma", 0.2}}, mesh);
  const auto cost = make_cost("terminal-square", {{"n", 1}});
  const auto driver = make_driver("zero", {{"n", 1}});
  const SpaceGrid space(vec1(-2.0), vec1(2.0), {21});
  const TimeGrid tgrid(0.0, 0.1, 50);
  const auto values = solve_hjb_system(model, cost, driver, space, tgrid);
  const auto policy = extract_policy(values, ExtractMode::per_component(0));
  for (int k = 0; k <= tgrid.n_steps; k += 10)
    for (long node = 0; node < space.n_nodes(); ++node)
      CHECK(policy.at(k, node, 0) == 0.75);
  CHECK(policy.control_at(3, vec1(0.33))[0] == 0.75);
}

TEST_CASE("mode mismatch is reported unless re-minimization inputs are given") {
  const auto s = make_lqr(1.0, 41, 160);
  CHECK_THROWS_AS(extract_policy(s.values, ExtractMode::scalarized(Eigen::VectorXd::Ones(1))),
                  ModeMismatch);
  // With the model supplied, re-minimization recovers the stored argmins up
  // to one mesh step: the sweep minimizes on slice k+1, the re-run on slice
  // k, an O(dt) difference that can only flip near-ties to a neighbour.
  const auto direct = extract_policy(s.values, ExtractMode::per_component(0));
  const auto remin = extract_policy(s.values, ExtractMode::scalarized(Eigen::VectorXd::Ones(1)),
                                    s.model, s.cost, s.driver);
  REQUIRE(direct.u_star.size() == remin.u_star.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < direct.u_star.size(); ++i)
    worst = std::max(worst, std::abs(direct.u_star[i] - remin.u_star[i]));
  CHECK(worst <= 8.0 / 40.0 + 1e-12);
}

TEST_CASE("quadratic benchmark: policy gain tracks the backward-ODE oracle") {
  // qt = 0 gives a genuinely time-varying gain a(t) = tanh(T - t).
  for (double qt : {1.0, 0.0}) {
    const auto s = make_lqr(qt);
    const auto oracle = oracles::riccati_rk4(1.0, 1.0, qt, s.sigma, 0.0, 0.5);
    const auto policy = extract_policy(s.values, ExtractMode::per_component(0));
    const double mesh_h = 8.0 / 40.0;
    for (double t : {0.0, 0.2, 0.4}) {
      const int k = static_cast<int>(t / s.tgrid.dt() + 0.5);
      for (double x : {-1.0, -0.5, 0.5, 1.0}) {
        const double u_star = policy.control_at(k, vec1(x))[0];
        const double u_exact = -oracle.gain(t) * x;
        CHECK(std::abs(u_star - u_exact) <= mesh_h + 0.05 * std::abs(u_exact) + 1e-9);
      }
    }
    // Value at the start against the oracle.
    const double phi0 = s.values.interpolate_slice(0, vec1(0.5))[0];
    const double exact = oracle.value(0.0, 0.5);
    CHECK(std::abs(phi0 - exact) <= 0.05 * std::max(std::abs(exact), 0.05));
  }
}

TEST_CASE("policy controls are members of the generating mesh") {
  const auto s = make_lqr(1.0, 61, 160);
  for (auto lookup : {PolicyLookup::NearestNode, PolicyLookup::MultilinearSnap}) {
    const auto policy = extract_policy(s.values, ExtractMode::per_component(0), lookup);
    CounterRng rng(3, 0);
    for (int i = 0; i < 500; ++i) {
      const double x = rng.next_uniform(-3.5, 3.5);
      const int k = static_cast<int>(rng.next_index(s.tgrid.n_steps + 1));
      const Eigen::VectorXd u = policy.control_at(k, vec1(x));
      bool found = false;
      for (const auto& m : policy.mesh) found = found || (m - u).norm() == 0.0;
      CHECK(found);
    }
  }
}

TEST_CASE("antisymmetric policies on a symmetric instance") {
  const auto s = make_lqr(1.0, 121, 160);
  const long nodes = s.space.n_nodes();
  for (int k = 0; k <= s.tgrid.n_steps; k += 16)
    for (long node = 0; node < nodes; ++node) {
      const long mirror = nodes - 1 - node;
      if (node == mirror) continue;  // x = 0: ties may break asymmetrically
      CHECK(std::abs(s.values.argmin(k, node, 0, 0) + s.values.argmin(k, mirror, 0, 0)) <=
            1e-12);
    }
}

TEST_CASE("closed-loop cost: plain mean reduction and the quadratic oracle") {
  // Null driver and cost rate: j equals the Monte Carlo mean of the terminal.
  {
    const auto mesh = ControlSet::singleton(vec1(0.0));
    const auto model = make_model("brownian", nlohmann::json{{"dim", 1}, {"sigma", 1.0}}, mesh);
    const auto cost = make_cost("terminal-square", {{"n", 1}});
    const auto driver = make_driver("zero", {{"n", 1}});
    const SpaceGrid space(vec1(-6.0), vec1(6.0), {101});
    const TimeGrid tgrid(0.0, 0.25, 80);
    const auto values = solve_hjb_system(model, cost, driver, space, tgrid);
    const auto policy = extract_policy(values, ExtractMode::per_component(0));
    const auto outcome =
        closed_loop_cost(policy, model, cost, driver, vec1(0.0), 4000,
                         RegressionBasis::polynomial(3), 55);
    // E[X_T^2] = sigma^2 T = 0.25 from a standstill start.
    CHECK(std::abs(outcome.j_vector[0] - 0.25) <= 3.0 * outcome.std_err[0]);
    CHECK(outcome.reliable);
  }
  // Quadratic instance: matches a(0) x0^2 + b(0) within 5%, and the negated
  // policy is strictly worse.
  {
    const auto s = make_lqr(1.0);
    const auto oracle = oracles::riccati_rk4(1.0, 1.0, 1.0, s.sigma, 0.0, 0.5);
    const auto policy = extract_policy(s.values, ExtractMode::per_component(0));
    const auto outcome = closed_loop_cost(policy, s.model, s.cost, s.driver, vec1(0.5), 10000,
                                          RegressionBasis::polynomial(3), 77);
    const double exact = oracle.value(0.0, 0.5);
    CHECK(std::abs(outcome.j_vector[0] - exact) <= 0.05 * exact);

    const auto worse = closed_loop_cost(negate(policy), s.model, s.cost, s.driver, vec1(0.5),
                                        10000, RegressionBasis::polynomial(3), 77);
    CHECK(worse.j_vector[0] - outcome.j_vector[0] >=
          3.0 * std::sqrt(outcome.std_err[0] * outcome.std_err[0] +
                          worse.std_err[0] * worse.std_err[0]));
    CHECK(pareto_compare(outcome, worse) == ParetoOrder::ADominates);
  }
}

TEST_CASE("pareto comparison basics and antisymmetry") {
  auto outcome = [](std::initializer_list<double> j, double se) {
    CostOutcome o;
    o.j_vector = Eigen::VectorXd(static_cast<Eigen::Index>(j.size()));
    int i = 0;
    for (double v : j) o.j_vector[i++] = v;
    o.std_err = Eigen::VectorXd::Constant(o.j_vector.size(), se);
    o.n_paths = 1000;
    return o;
  };
  const auto a = outcome({1.0, 1.0}, 1e-6);
  const auto b = outcome({2.0, 2.0}, 1e-6);
  CHECK(pareto_compare(a, b) == ParetoOrder::ADominates);
  CHECK(pareto_compare(b, a) == ParetoOrder::BDominates);
  const auto c = outcome({1.0, 3.0}, 1e-6);
  const auto d = outcome({2.0, 2.0}, 1e-6);
  CHECK(pareto_compare(c, d) == ParetoOrder::Incomparable);
  CHECK(pareto_compare(a, a) == ParetoOrder::Equal);
  // Differences inside the noise band are Equal.
  const auto e = outcome({1.0, 1.0}, 0.5);
  const auto f = outcome({1.3, 0.9}, 0.5);
  CHECK(pareto_compare(e, f) == ParetoOrder::Equal);
  CHECK_THROWS_AS(pareto_compare(a, outcome({1.0}, 1e-6)), DimensionError);
}

TEST_CASE("scalarized policy beats every constant control within noise") {
  const auto s = make_lqr(1.0);
  const auto policy = extract_policy(s.values, ExtractMode::scalarized(Eigen::VectorXd::Ones(1)),
                                     s.model, s.cost, s.driver);
  const auto basis = RegressionBasis::polynomial(3);
  const auto opt = closed_loop_cost(policy, s.model, s.cost, s.driver, vec1(0.5), 6000, basis,
                                    111);
  for (double uc : {-1.0, 0.0, 1.0}) {
    const auto bundle = simulate_paths(s.model, ControlSource::constant(vec1(uc)), vec1(0.5),
                                       s.tgrid, 6000, 111);
    const auto g = conditional_g_expectation(bundle, s.driver, s.cost, basis, 3);
    const double combined =
        std::sqrt(opt.std_err[0] * opt.std_err[0] + g.std_err[0] * g.std_err[0]);
    CHECK(opt.j_vector[0] <= g.y0[0] + 3.0 * combined);
  }
}

TEST_CASE("domain exits are counted and flag the run") {
  // A policy grid much smaller than the diffusion's reach: most lookups
  // clamp to the boundary nodes and the outcome is marked unreliable.
  const auto mesh = ControlSet::singleton(vec1(0.0));
  const auto model = make_model("brownian", nlohmann::json{{"dim", 1}, {"sigma", 1.0}}, mesh);
  const auto cost = make_cost("terminal-square", {{"n", 1}});
  const auto driver = make_driver("zero", {{"n", 1}});
  const SpaceGrid space(vec1(-0.05), vec1(0.05), {5});
  const TimeGrid tgrid(0.0, 1.0, 32);
  HjbOptions opts;
  opts.scheme = Scheme::SemiImplicitDiffusion;  // the tiny grid breaks the explicit bound
  const auto values = solve_hjb_system(model, cost, driver, space, tgrid, opts);
  const auto policy = extract_policy(values, ExtractMode::per_component(0));
  const auto outcome = closed_loop_cost(policy, model, cost, driver, vec1(0.0), 500,
                                        RegressionBasis::polynomial(2), 13);
  CHECK(outcome.domain_exit_fraction > 0.01);
  CHECK(!outcome.reliable);
}

TEST_CASE("dynamic-programming gap: tight for the optimal policy, positive when perturbed") {
  // Heat instance: singleton control, the tower property holds to noise.
  {
    const auto mesh = ControlSet::singleton(vec1(0.0));
    const auto model = make_model("brownian", nlohmann::json{{"dim", 1}, {"sigma", std::sqrt(2.0)}}, mesh);
    const auto cost = make_cost("terminal-square", {{"n", 1}});
    const auto driver = make_driver("zero", {{"n", 1}});
    const SpaceGrid space(vec1(-6.0), vec1(6.0), {201});
    const TimeGrid tgrid(0.0, 0.25, 160);
    const auto values = solve_hjb_system(model, cost, driver, space, tgrid);
    const auto policy = extract_policy(values, ExtractMode::per_component(0));
    const auto rep = dp_consistency(values, policy, model, cost, driver, 80, vec1(0.5), 4000,
                                    RegressionBasis::polynomial(3), 91);
    CHECK(std::abs(rep.gap[0]) <=
          rep.interpolation_error_bound + 3.0 * rep.std_err[0] + 2e-3);
  }
  // Quadratic instance: r = n_steps reduces to the closed-loop comparison;
  // the negated policy leaves a positive gap.
  {
    const auto s = make_lqr(1.0);
    const auto policy = extract_policy(s.values, ExtractMode::per_component(0));
    const auto tight = dp_consistency(s.values, policy, s.model, s.cost, s.driver,
                                      s.tgrid.n_steps, vec1(0.5), 6000,
                                      RegressionBasis::polynomial(3), 93);
    CHECK(std::abs(tight.gap[0]) <=
          tight.interpolation_error_bound + 3.0 * tight.std_err[0] + 0.02);

    const auto loose = dp_consistency(s.values, negate(policy), s.model, s.cost, s.driver, 80,
                                      vec1(0.5), 6000, RegressionBasis::polynomial(3), 93);
    CHECK(loose.gap[0] >= 3.0 * loose.std_err[0]);
  }
}
