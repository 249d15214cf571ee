#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "stodec/bsde.hpp"
#include "stodec/errors.hpp"
#include "stodec/numeric.hpp"
#include "stodec/sde.hpp"

using namespace stodec;

namespace {

DiffusionModel brownian_model(int dim, double sigma) {
  DiffusionModel m;
  m.dim_x = dim;
  m.drift = [dim](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(dim).eval();
  };
  m.diffusion = [dim, sigma](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return (sigma * Eigen::MatrixXd::Identity(dim, dim)).eval();
  };
  m.control_set = ControlSet::singleton(Eigen::VectorXd::Zero(1));
  return m;
}

ControlSource zero_control() { return ControlSource::constant(Eigen::VectorXd::Zero(1)); }

Driver zero_driver(int n) {
  Driver d;
  d.dim_y = n;
  d.g = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&, int) { return 0.0; };
  d.lipschitz_const = 0.0;
  return d;
}

Driver decay_driver(int n, double r) {
  Driver d;
  d.dim_y = n;
  d.g = [r](double, const Eigen::VectorXd& y, const Eigen::VectorXd&, int j) {
    return -r * y[j];
  };
  d.lipschitz_const = r;
  return d;
}

CostModel zero_cost(int n) {
  CostModel c;
  c.dim_n = n;
  c.running = [n](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(n).eval();
  };
  c.terminal = [n](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(n).eval(); };
  return c;
}

}  // namespace

TEST_CASE("accumulated cost: terminal passthrough, unit rate, constant control rate") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 64);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 32, 4);

  CostModel c = zero_cost(1);
  c.terminal = [](const Eigen::VectorXd& x) { return x.eval(); };
  const Eigen::MatrixXd terminal_only = accumulated_cost(bundle, c);
  for (int p = 0; p < 32; ++p)
    CHECK(terminal_only(p, 0) == bundle.state(p, grid.n_steps, 0));

  CostModel unit = zero_cost(1);
  unit.running = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Ones(1).eval();
  };
  const Eigen::MatrixXd ones = accumulated_cost(bundle, unit);
  for (int p = 0; p < 32; ++p) CHECK(ones(p, 0) == doctest::Approx(1.0).epsilon(1e-12));

  // Rate = control, constant control 2, T = 0.5.
  const TimeGrid half(0.0, 0.5, 32);
  const auto bundle2 = simulate_paths(model, ControlSource::constant(
                                                  Eigen::VectorXd::Constant(1, 2.0)),
                                      Eigen::VectorXd::Zero(1), half, 8, 4);
  CostModel u_cost = zero_cost(1);
  u_cost.running = [](double, const Eigen::VectorXd&, const Eigen::VectorXd& u) {
    return u.eval();
  };
  const Eigen::MatrixXd from_u = accumulated_cost(bundle2, u_cost);
  for (int p = 0; p < 8; ++p) CHECK(from_u(p, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("accumulated cost rejects non-finite data with a location") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 8);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 8, 4);
  CostModel bad = zero_cost(1);
  bad.terminal = [](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN()).eval();
  };
  CHECK_THROWS_WITH_AS(accumulated_cost(bundle, bad), doctest::Contains("path"),
                       NonFiniteError);
}

TEST_CASE("martingale case recovers the initial state") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 64);
  const double x0 = 0.7;
  const auto bundle = simulate_paths(model, zero_control(),
                                     Eigen::VectorXd::Constant(1, x0), grid, 10000, 8);
  CostModel c = zero_cost(1);
  c.terminal = [](const Eigen::VectorXd& x) { return x.eval(); };
  const auto g = conditional_g_expectation(bundle, zero_driver(1), c,
                                           RegressionBasis::polynomial(3), 3);
  CHECK(std::abs(g.y0[0] - x0) <= 3.0 * g.std_err[0]);
}

TEST_CASE("linear decay driver reproduces the exponential") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 256);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 2000, 12);
  CostModel c = zero_cost(1);
  c.terminal = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(1).eval(); };
  const auto g = conditional_g_expectation(bundle, decay_driver(1, 0.5), c,
                                           RegressionBasis::polynomial(2), 3);
  CHECK(std::abs(g.y0[0] - std::exp(-0.5)) <= 0.01);
  // Constant terminal data: no cross-path spread at all.
  CHECK(g.y0_spread[0] <= 1e-12);
}

TEST_CASE("diagonal drivers with decoupled terminals solve componentwise") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 32);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 500, 31);

  Driver vec_driver;
  vec_driver.dim_y = 2;
  vec_driver.g = [](double, const Eigen::VectorXd& y, const Eigen::VectorXd& z, int j) {
    return j == 0 ? -0.5 * y[0] + 0.1 * z[0] : 0.25 * y[1];
  };
  vec_driver.lipschitz_const = 0.6;

  Eigen::MatrixXd terminal(500, 2);
  for (int p = 0; p < 500; ++p) {
    const double xT = bundle.state(p, grid.n_steps, 0);
    terminal(p, 0) = xT;
    terminal(p, 1) = xT * xT;
  }
  const auto basis = RegressionBasis::polynomial(3);
  const auto joint = solve_bsde(bundle, vec_driver, terminal, basis, 3);

  Driver s0;
  s0.dim_y = 1;
  s0.g = [](double, const Eigen::VectorXd& y, const Eigen::VectorXd& z, int) {
    return -0.5 * y[0] + 0.1 * z[0];
  };
  s0.lipschitz_const = 0.6;
  Driver s1;
  s1.dim_y = 1;
  s1.g = [](double, const Eigen::VectorXd& y, const Eigen::VectorXd&, int) {
    return 0.25 * y[0];
  };
  s1.lipschitz_const = 0.6;
  const auto sol0 = solve_bsde(bundle, s0, terminal.col(0), basis, 3);
  const auto sol1 = solve_bsde(bundle, s1, terminal.col(1), basis, 3);

  double worst = 0.0;
  for (int p = 0; p < 500; ++p)
    for (int k = 0; k <= grid.n_steps; ++k) {
      worst = std::max(worst, std::abs(joint.y_at(p, k, 0) - sol0.y_at(p, k, 0)));
      worst = std::max(worst, std::abs(joint.y_at(p, k, 1) - sol1.y_at(p, k, 0)));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("terminal slice is stored verbatim") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 8);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 64, 2);
  Eigen::MatrixXd terminal(64, 1);
  for (int p = 0; p < 64; ++p) terminal(p, 0) = bundle.state(p, 8, 0) * 3.0 + 0.1;
  const auto sol =
      solve_bsde(bundle, zero_driver(1), terminal, RegressionBasis::polynomial(1), 1);
  for (int p = 0; p < 64; ++p) CHECK(sol.y_at(p, 8, 0) == terminal(p, 0));
}

TEST_CASE("degree-zero basis reduces the null driver to the plain mean") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 128);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 10000, 5);
  CostModel c = zero_cost(1);
  c.terminal = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, x.squaredNorm()).eval();
  };
  const auto g = conditional_g_expectation(bundle, zero_driver(1), c,
                                           RegressionBasis::polynomial(0), 1);
  const Eigen::MatrixXd xi = accumulated_cost(bundle, c);
  const double plain_mean = kahan_mean(xi.col(0));
  CHECK(std::abs(g.y0[0] - plain_mean) <= 1e-12);
}

TEST_CASE("solution is linear in the terminal data for linear drivers") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 32);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 800, 77);
  const auto basis = RegressionBasis::polynomial(3);
  const auto driver = decay_driver(1, 0.4);

  Eigen::MatrixXd xi1(800, 1), xi2(800, 1);
  for (int p = 0; p < 800; ++p) {
    const double xT = bundle.state(p, grid.n_steps, 0);
    xi1(p, 0) = xT;
    xi2(p, 0) = std::abs(xT);
  }
  const double alpha = 1.7, beta = -0.3;
  const auto sol1 = solve_bsde(bundle, driver, xi1, basis, 3);
  const auto sol2 = solve_bsde(bundle, driver, xi2, basis, 3);
  const auto sol_mix = solve_bsde(bundle, driver, alpha * xi1 + beta * xi2, basis, 3);
  double worst = 0.0;
  for (int p = 0; p < 800; ++p)
    for (int k = 0; k <= grid.n_steps; ++k)
      worst = std::max(worst, std::abs(sol_mix.y_at(p, k, 0) - alpha * sol1.y_at(p, k, 0) -
                                       beta * sol2.y_at(p, k, 0)));
  CHECK(worst <= 1e-10);
}

TEST_CASE("comparison positivity: nonnegative data keep Y above the noise floor") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 64);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 4000, 13);
  Driver d;
  d.dim_y = 1;
  d.g = [](double, const Eigen::VectorXd& y, const Eigen::VectorXd&, int) {
    return 0.1 + 0.2 * std::max(y[0], 0.0);  // g(t,0,0) >= 0, nondecreasing in y
  };
  d.lipschitz_const = 0.2;
  Eigen::MatrixXd terminal(4000, 1);
  for (int p = 0; p < 4000; ++p) {
    const double xT = bundle.state(p, grid.n_steps, 0);
    terminal(p, 0) = xT * xT;
  }
  const auto sol = solve_bsde(bundle, d, terminal, RegressionBasis::polynomial(3), 3);
  double min_y = std::numeric_limits<double>::infinity();
  for (int p = 0; p < 4000; ++p)
    for (int k = 0; k <= grid.n_steps; ++k) min_y = std::min(min_y, sol.y_at(p, k, 0));
  CHECK(min_y >= -sol.residual_scale());
}

TEST_CASE("restart consistency at an intermediate index") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 32);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 600, 23);
  const auto basis = RegressionBasis::polynomial(2);

  CostModel c = zero_cost(1);
  c.terminal = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, x.squaredNorm()).eval();
  };

  // Null driver and cost: the restarted recursion consumes identical data.
  const auto rep0 = consistency_check(bundle, zero_driver(1), c, basis, 16, 3);
  CHECK(rep0.max_abs_gap <= rep0.residual_scale_full + 1e-12);

  // Linear driver: still the same recursion on the same paths.
  const auto rep1 = consistency_check(bundle, decay_driver(1, 0.5), c, basis, 16, 3);
  CHECK(rep1.max_abs_gap <= 2.0 * rep0.max_abs_gap + 1e-12);

  // One step before the horizon: bounded by the one-step error scale.
  const auto solution =
      solve_bsde(bundle, decay_driver(1, 0.5),
                 accumulated_cost(bundle, c), basis, 3);
  double max_y = 0.0;
  for (int p = 0; p < 600; ++p)
    for (int k = 0; k <= 32; ++k) max_y = std::max(max_y, std::abs(solution.y_at(p, k, 0)));
  const auto rep2 = consistency_check(bundle, decay_driver(1, 0.5), c, basis, 31, 3);
  CHECK(rep2.max_abs_gap <=
        grid.dt() * 0.5 * max_y + rep2.residual_scale_full + 1e-12);
}

TEST_CASE("cost folding routes agree for a state-dependent rate") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 64);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 8000, 37);
  CostModel c = zero_cost(1);
  c.running = [](double, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, x.squaredNorm()).eval();
  };
  c.terminal = [](const Eigen::VectorXd& x) { return x.eval(); };
  const auto basis = RegressionBasis::polynomial(3);
  const auto folded = conditional_g_expectation(bundle, zero_driver(1), c, basis, 3,
                                                CostFolding::DriverPlusTerminalPsi);
  const auto shifted = conditional_g_expectation(bundle, zero_driver(1), c, basis, 3,
                                                 CostFolding::AccumulatedTerminal);
  const double tol = 3.0 * (folded.std_err[0] + shifted.std_err[0]) + 1e-3;
  CHECK(std::abs(folded.y0[0] - shifted.y0[0]) <= tol);
}

TEST_CASE("independent seeds agree within combined standard errors") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 64);
  CostModel c = zero_cost(1);
  c.terminal = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, x.squaredNorm()).eval();
  };
  const auto basis = RegressionBasis::polynomial(3);
  const auto run = [&](std::uint64_t seed) {
    const auto bundle =
        simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 8000, seed);
    return conditional_g_expectation(bundle, decay_driver(1, 0.5), c, basis, 3);
  };
  const auto a = run(101);
  const auto b = run(707);
  const double combined = std::sqrt(a.std_err[0] * a.std_err[0] + b.std_err[0] * b.std_err[0]);
  CHECK(std::abs(a.y0[0] - b.y0[0]) <= 3.0 * combined);
}

TEST_CASE("collinear states with zero ridge trip the condition gate") {
  DiffusionModel m;
  m.dim_x = 2;
  m.drift = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Ones(2).eval();
  };
  // Both coordinates driven by the same scalar noise: states stay collinear.
  m.diffusion = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 0.0, 2.0, 0.0;
    return s;
  };
  m.control_set = ControlSet::singleton(Eigen::VectorXd::Zero(1));
  const TimeGrid grid(0.0, 1.0, 4);
  const auto bundle =
      simulate_paths(m, zero_control(), Eigen::VectorXd::Zero(2), grid, 400, 3);
  Eigen::MatrixXd terminal(400, 1);
  for (int p = 0; p < 400; ++p) terminal(p, 0) = bundle.state(p, 4, 0);
  CHECK_THROWS_AS(solve_bsde(bundle, zero_driver(1), terminal,
                             RegressionBasis::polynomial(2, 0.0), 1),
                  SingularRegressionError);
}

TEST_CASE("fixed-point contraction gate") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 2);  // dt = 0.5
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 2000, 3);
  Eigen::MatrixXd terminal = Eigen::MatrixXd::Ones(2000, 1);
  CHECK_THROWS_AS(solve_bsde(bundle, decay_driver(1, 3.0), terminal,
                             RegressionBasis::polynomial(1), 3),
                  ContractionError);
}

TEST_CASE("driver lipschitz probe matches the declared constant") {
  const auto d = decay_driver(1, 0.5);
  const double ratio = probe_driver_lipschitz(d, 1, 2000, 9);
  CHECK(ratio <= 0.5 * (1.0 + 1e-9));
  CHECK(ratio >= 0.4);
}

TEST_CASE("local partition basis solves the exponential benchmark") {
  const auto model = brownian_model(1, 1.0);
  const TimeGrid grid(0.0, 1.0, 128);
  const auto bundle =
      simulate_paths(model, zero_control(), Eigen::VectorXd::Zero(1), grid, 4000, 41);
  CostModel c = zero_cost(1);
  c.terminal = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(1).eval(); };
  const auto g = conditional_g_expectation(bundle, decay_driver(1, 0.5), c,
                                           RegressionBasis::local_partition(4), 3);
  CHECK(std::abs(g.y0[0] - std::exp(-0.5)) <= 0.02);
  CHECK(!g.solution.regression_report.empty());
  for (const auto& s : g.solution.regression_report) CHECK(s.condition_number >= 1.0);
}
