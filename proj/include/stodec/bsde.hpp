#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "stodec/sde.hpp"

namespace stodec {

/// Vector driver with the diagonal row structure: component j reads only
/// row j of z, which the signature enforces (the row is all it receives).
struct Driver {
  int dim_y = 1;
  /// g(t, y, z_row, j) evaluates component j at time t, state y, j-th z row.
  std::function<double(double, const Eigen::VectorXd&, const Eigen::VectorXd&, int)> g;
  double lipschitz_const = 0.0;
};

/// Running cost rate c(t, x, u) and terminal cost Psi(x), both R^n-valued.
struct CostModel {
  int dim_n = 1;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)> running;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> terminal;
};

/// Basis for the per-step conditional-expectation regressions.
struct RegressionBasis {
  enum class Kind { Polynomial, LocalPartition };
  Kind kind = Kind::Polynomial;
  int degree = 3;         ///< total degree (Polynomial)
  int cells_per_dim = 4;  ///< hypercube cells per axis (LocalPartition)
  double ridge = 1e-10;

  static RegressionBasis polynomial(int degree, double ridge = 1e-10);
  static RegressionBasis local_partition(int cells_per_dim, double ridge = 1e-10);
};

struct RegressionStepStats {
  int step = 0;
  int component = 0;
  double condition_number = 0.0;
  double rms_residual = 0.0;
};

/// Adapted pair (Y, Z) along a path bundle, together with the per-step
/// regression diagnostics.
struct BsdeSolution {
  int n_paths = 0;
  int n_steps = 0;
  int dim_y = 0;
  int dim_w = 0;  ///< Brownian dimension (= dim_x of the bundle)
  TimeGrid grid;
  std::uint64_t source_seed = 0;
  std::vector<double> y;  // n_paths x (n_steps+1) x dim_y
  std::vector<double> z;  // n_paths x n_steps x dim_y x dim_w
  std::vector<RegressionStepStats> regression_report;

  double& y_at(int p, int k, int j) { return y[(static_cast<std::size_t>(p) * (n_steps + 1) + k) * dim_y + j]; }
  double y_at(int p, int k, int j) const { return y[(static_cast<std::size_t>(p) * (n_steps + 1) + k) * dim_y + j]; }
  Eigen::Map<const Eigen::VectorXd> y_vec(int p, int k) const {
    return Eigen::Map<const Eigen::VectorXd>(&y[(static_cast<std::size_t>(p) * (n_steps + 1) + k) * dim_y], dim_y);
  }
  double& z_at(int p, int k, int j, int m) {
    return z[((static_cast<std::size_t>(p) * n_steps + k) * dim_y + j) * dim_w + m];
  }
  double z_at(int p, int k, int j, int m) const {
    return z[((static_cast<std::size_t>(p) * n_steps + k) * dim_y + j) * dim_w + m];
  }

  /// Largest per-step RMS regression residual; the operational noise floor
  /// for tolerances built on this solve.
  double residual_scale() const;
};

/// Pathwise accumulated cost: left-endpoint Riemann sum of the running cost
/// plus the terminal cost. Rows = paths, columns = components.
Eigen::MatrixXd accumulated_cost(const PathBundle& paths, const CostModel& cost);

/// Backward regression solve of the vector BSDE along the bundle.
///
/// Per backward step k the j-th z row is the regression of Y_{k+1,j} dW_k^T
/// scaled by 1/dt, and Y_k adds dt times the driver to the regressed
/// conditional mean, resolved by `picard_iters` fixed-point passes. When
/// `fold_running_cost` is given, its rate (evaluated along the recorded
/// states and controls) is added to the driver, so the terminal data should
/// then be the plain terminal cost; with a null cost and accumulated-cost
/// terminal data the solve computes the shifted variant instead.
///
/// Requires driver.lipschitz_const * dt < 1 so the fixed point contracts.
BsdeSolution solve_bsde(const PathBundle& paths, const Driver& driver,
                        const Eigen::MatrixXd& terminal, const RegressionBasis& basis,
                        int picard_iters, const CostModel* fold_running_cost = nullptr);

enum class CostFolding {
  DriverPlusTerminalPsi,  ///< terminal = Psi(X_T), running cost folded into the driver
  AccumulatedTerminal,    ///< terminal = full accumulated cost, driver used as-is
};

struct GExpectation {
  Eigen::VectorXd y0;         ///< cross-path mean of Y_0 (deterministic up to noise)
  Eigen::VectorXd y0_spread;  ///< cross-path standard deviation of Y_0 (diagnostic)
  Eigen::VectorXd std_err;    ///< Monte-Carlo scale: std of the pathwise cost / sqrt(n)
  BsdeSolution solution;
};

/// Nonlinear conditional expectation of the accumulated cost: the time-0
/// value of the BSDE whose terminal data is the cost functional.
GExpectation conditional_g_expectation(const PathBundle& paths, const Driver& driver,
                                       const CostModel& cost, const RegressionBasis& basis,
                                       int picard_iters = 3,
                                       CostFolding folding = CostFolding::DriverPlusTerminalPsi);

struct ConsistencyReport {
  int r = 0;
  double max_abs_gap = 0.0;
  double mean_abs_gap = 0.0;
  double residual_scale_full = 0.0;
  double residual_scale_restart = 0.0;
};

/// Compares Y at an intermediate index r from the full-horizon solve against
/// a fresh solve on [t_r, T] restarted at the paths' time-r states. The two
/// recursions consume the same data, so the gap measures pure bookkeeping
/// noise; it is bounded by the recorded regression residual scale.
ConsistencyReport consistency_check(const PathBundle& paths, const Driver& driver,
                                    const CostModel& cost, const RegressionBasis& basis, int r,
                                    int picard_iters = 3);

/// Max sampled Lipschitz ratio of the driver in (y, z) over random probes;
/// a spot check of the declared lipschitz_const.
double probe_driver_lipschitz(const Driver& driver, int dim_w, int n_probes, std::uint64_t seed);

}  // namespace stodec
