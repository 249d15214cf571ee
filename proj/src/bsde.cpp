#include "stodec/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stodec/errors.hpp"
#include "stodec/numeric.hpp"
#include "stodec/parallel.hpp"
#include "stodec/rng.hpp"

namespace stodec {

RegressionBasis RegressionBasis::polynomial(int degree, double ridge) {
  if (degree < 0) throw InvalidArgument("RegressionBasis: degree must be >= 0");
  if (ridge < 0.0) throw InvalidArgument("RegressionBasis: ridge must be >= 0");
  RegressionBasis b;
  b.kind = Kind::Polynomial;
  b.degree = degree;
  b.ridge = ridge;
  return b;
}

RegressionBasis RegressionBasis::local_partition(int cells_per_dim, double ridge) {
  if (cells_per_dim < 1) throw InvalidArgument("RegressionBasis: cells_per_dim must be >= 1");
  if (ridge < 0.0) throw InvalidArgument("RegressionBasis: ridge must be >= 0");
  RegressionBasis b;
  b.kind = Kind::LocalPartition;
  b.cells_per_dim = cells_per_dim;
  b.ridge = ridge;
  return b;
}

double BsdeSolution::residual_scale() const {
  double scale = 0.0;
  for (const auto& s : regression_report) scale = std::max(scale, s.rms_residual);
  return scale;
}

Eigen::MatrixXd accumulated_cost(const PathBundle& paths, const CostModel& cost) {
  const int n = cost.dim_n;
  const double dt = paths.grid.dt();
  Eigen::MatrixXd out(paths.n_paths, n);
  parallel_for(paths.n_paths, [&](std::int64_t p0, std::int64_t p1) {
    for (std::int64_t p = p0; p < p1; ++p) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
      for (int k = 0; k < paths.grid.n_steps; ++k) {
        acc += dt * cost.running(paths.grid.time(k), paths.state_vec(static_cast<int>(p), k),
                                 paths.control_vec(static_cast<int>(p), k));
      }
      acc += cost.terminal(paths.state_vec(static_cast<int>(p), paths.grid.n_steps));
      if (!acc.allFinite())
        throw NonFiniteError("accumulated_cost: non-finite cost at path " + std::to_string(p));
      out.row(p) = acc.transpose();
    }
  });
  return out;
}

namespace {

// Multi-indices with 1 <= |alpha| <= degree, lexicographic. The constant
// feature is handled separately through target centering.
std::vector<std::vector<int>> multi_indices(int dim, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> alpha(dim, 0);
  while (true) {
    int total = 0;
    for (int a : alpha) total += a;
    if (total >= 1 && total <= degree) out.push_back(alpha);
    int i = dim - 1;
    while (i >= 0) {
      if (++alpha[i] <= degree) break;
      alpha[i] = 0;
      --i;
    }
    if (i < 0) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct FitResult {
  Eigen::MatrixXd fitted;            // n_paths x n_targets
  double condition_number = 1.0;
};

// Centered/scaled least squares: target mean plus a ridge fit of the
// centered targets on centered features. Centering keeps the intercept
// unpenalized, so a degree-0 basis reproduces the exact (compensated) mean.
FitResult ridge_fit(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                    double ridge, int step_for_error) {
  const Eigen::Index n = targets.rows();
  const Eigen::Index b = features.cols();
  FitResult res;
  const Eigen::VectorXd target_means = kahan_col_means(targets);
  if (b == 0) {
    res.fitted = target_means.transpose().replicate(n, 1);
    return res;
  }
  const Eigen::RowVectorXd feat_means = features.colwise().mean();
  Eigen::MatrixXd fc = features.rowwise() - feat_means;
  Eigen::MatrixXd yc = targets.rowwise() - target_means.transpose();

  Eigen::MatrixXd gram = (fc.transpose() * fc) / static_cast<double>(n);
  gram.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lambda_min = eig.eigenvalues().minCoeff();
  const double lambda_max = eig.eigenvalues().maxCoeff();
  res.condition_number =
      lambda_min > 0.0 ? lambda_max / lambda_min : std::numeric_limits<double>::infinity();
  if (!(res.condition_number < 1e12))
    throw SingularRegressionError("regression: condition number " +
                                  std::to_string(res.condition_number) +
                                  " exceeds 1e12 at step " + std::to_string(step_for_error));
  const Eigen::MatrixXd rhs = (fc.transpose() * yc) / static_cast<double>(n);
  const Eigen::MatrixXd beta = gram.ldlt().solve(rhs);
  res.fitted = (fc * beta).rowwise() + target_means.transpose();
  return res;
}

class BasisEvaluator {
 public:
  BasisEvaluator(const RegressionBasis& basis, const Eigen::MatrixXd& states)
      : basis_(basis), states_(states) {
    const Eigen::Index n = states.rows();
    const Eigen::Index d = states.cols();
    means_ = states.colwise().mean();
    scales_.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double sd = std::sqrt((states.col(i).array() - means_[i]).square().sum() /
                                  std::max<Eigen::Index>(n - 1, 1));
      scales_[i] = sd > 1e-12 ? sd : 1.0;
    }
  }

  // Polynomial design matrix of the normalized coordinates (no constant column).
  Eigen::MatrixXd polynomial_features() const {
    const Eigen::Index n = states_.rows();
    const Eigen::Index d = states_.cols();
    const auto alphas = multi_indices(static_cast<int>(d), basis_.degree);
    Eigen::MatrixXd norm = (states_.rowwise() - means_.transpose()).array().rowwise() /
                           scales_.transpose().array();
    Eigen::MatrixXd feats(n, static_cast<Eigen::Index>(alphas.size()));
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      Eigen::VectorXd col = Eigen::VectorXd::Ones(n);
      for (Eigen::Index i = 0; i < d; ++i)
        for (int rep = 0; rep < alphas[a][static_cast<std::size_t>(i)]; ++rep)
          col = col.cwiseProduct(norm.col(i));
      feats.col(static_cast<Eigen::Index>(a)) = col;
    }
    return feats;
  }

  std::vector<int> cell_assignment() const {
    const Eigen::Index n = states_.rows();
    const Eigen::Index d = states_.cols();
    const int cells = basis_.cells_per_dim;
    Eigen::VectorXd lo = states_.colwise().minCoeff();
    Eigen::VectorXd hi = states_.colwise().maxCoeff();
    std::vector<int> assign(n);
    for (Eigen::Index p = 0; p < n; ++p) {
      int flat = 0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double width = hi[i] - lo[i];
        int c = width > 0.0 ? static_cast<int>((states_(p, i) - lo[i]) / width * cells) : 0;
        c = std::min(std::max(c, 0), cells - 1);
        flat = flat * cells + c;
      }
      assign[static_cast<std::size_t>(p)] = flat;
    }
    return assign;
  }

  const Eigen::MatrixXd& states() const { return states_; }

 private:
  const RegressionBasis& basis_;
  const Eigen::MatrixXd& states_;
  Eigen::VectorXd means_;
  Eigen::VectorXd scales_;
};

// Regress every target column on the basis at the given states; one shared
// factorization for all columns.
FitResult regress(const RegressionBasis& basis, const BasisEvaluator& eval,
                  const Eigen::MatrixXd& targets, int step) {
  if (basis.kind == RegressionBasis::Kind::Polynomial) {
    if (basis.degree == 0) {
      Eigen::MatrixXd empty(targets.rows(), 0);
      return ridge_fit(empty, targets, basis.ridge, step);
    }
    return ridge_fit(eval.polynomial_features(), targets, basis.ridge, step);
  }

  // Local partition: an affine fit per occupied cell, intercept-only when a
  // cell is too thin to support the slopes.
  const Eigen::MatrixXd& states = eval.states();
  const Eigen::Index d = states.cols();
  const std::vector<int> assign = eval.cell_assignment();
  const int max_cell = *std::max_element(assign.begin(), assign.end());
  FitResult res;
  res.fitted.resize(targets.rows(), targets.cols());
  for (int c = 0; c <= max_cell; ++c) {
    std::vector<Eigen::Index> rows;
    for (std::size_t p = 0; p < assign.size(); ++p)
      if (assign[p] == c) rows.push_back(static_cast<Eigen::Index>(p));
    if (rows.empty()) continue;
    Eigen::MatrixXd cell_states(rows.size(), d);
    Eigen::MatrixXd cell_targets(rows.size(), targets.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      cell_states.row(static_cast<Eigen::Index>(r)) = states.row(rows[r]);
      cell_targets.row(static_cast<Eigen::Index>(r)) = targets.row(rows[r]);
    }
    FitResult cell_fit;
    if (static_cast<Eigen::Index>(rows.size()) < d + 2) {
      Eigen::MatrixXd empty(cell_targets.rows(), 0);
      cell_fit = ridge_fit(empty, cell_targets, basis.ridge, step);
    } else {
      cell_fit = ridge_fit(cell_states, cell_targets, basis.ridge, step);
    }
    res.condition_number = std::max(res.condition_number, cell_fit.condition_number);
    for (std::size_t r = 0; r < rows.size(); ++r)
      res.fitted.row(rows[r]) = cell_fit.fitted.row(static_cast<Eigen::Index>(r));
  }
  return res;
}

}  // namespace

BsdeSolution solve_bsde(const PathBundle& paths, const Driver& driver,
                        const Eigen::MatrixXd& terminal, const RegressionBasis& basis,
                        int picard_iters, const CostModel* fold_running_cost) {
  const int n_paths = paths.n_paths;
  const int n_steps = paths.grid.n_steps;
  const int n = driver.dim_y;
  const int d = paths.dim_x;
  const double dt = paths.grid.dt();

  if (terminal.rows() != n_paths)
    throw DimensionError("solve_bsde: terminal row count " + std::to_string(terminal.rows()) +
                         " does not match n_paths " + std::to_string(n_paths));
  if (terminal.cols() != n)
    throw DimensionError("solve_bsde: terminal has " + std::to_string(terminal.cols()) +
                         " columns, driver.dim_y is " + std::to_string(n));
  if (picard_iters < 1) throw InvalidArgument("solve_bsde: picard_iters must be >= 1");
  if (!(driver.lipschitz_const * dt < 1.0))
    throw ContractionError("solve_bsde: driver Lipschitz constant " +
                           std::to_string(driver.lipschitz_const) + " times dt " +
                           std::to_string(dt) + " must be < 1 for the fixed-point step");
  if (fold_running_cost && fold_running_cost->dim_n != n)
    throw DimensionError("solve_bsde: running-cost dimension does not match driver.dim_y");

  BsdeSolution sol;
  sol.n_paths = n_paths;
  sol.n_steps = n_steps;
  sol.dim_y = n;
  sol.dim_w = d;
  sol.grid = paths.grid;
  sol.source_seed = paths.seed;
  sol.y.resize(static_cast<std::size_t>(n_paths) * (n_steps + 1) * n);
  sol.z.resize(static_cast<std::size_t>(n_paths) * n_steps * n * d);
  sol.regression_report.reserve(static_cast<std::size_t>(n_steps) * n);

  if (!terminal.allFinite()) throw NonFiniteError("solve_bsde: non-finite terminal data");
  for (int p = 0; p < n_paths; ++p)
    for (int j = 0; j < n; ++j) sol.y_at(p, n_steps, j) = terminal(p, j);

  Eigen::MatrixXd y_next = terminal;           // n_paths x n
  Eigen::MatrixXd states(n_paths, d);
  Eigen::MatrixXd z_targets(n_paths, n * d);   // column (j*d + m) = Y_{k+1,j} dW_m
  Eigen::MatrixXd y_cur(n_paths, n);

  for (int k = n_steps - 1; k >= 0; --k) {
    const double t = paths.grid.time(k);
    for (int p = 0; p < n_paths; ++p)
      for (int i = 0; i < d; ++i) states(p, i) = paths.state(p, k, i);

    parallel_for(n_paths, [&](std::int64_t p0, std::int64_t p1) {
      for (std::int64_t p = p0; p < p1; ++p)
        for (int j = 0; j < n; ++j)
          for (int m = 0; m < d; ++m)
            z_targets(p, j * d + m) =
                y_next(p, j) * paths.increment(static_cast<int>(p), k, m);
    });

    BasisEvaluator eval(basis, states);
    const FitResult y_fit = regress(basis, eval, y_next, k);
    const FitResult z_fit = regress(basis, eval, z_targets, k);

    parallel_for(n_paths, [&](std::int64_t p0, std::int64_t p1) {
      for (std::int64_t p = p0; p < p1; ++p)
        for (int j = 0; j < n; ++j)
          for (int m = 0; m < d; ++m)
            sol.z_at(static_cast<int>(p), k, j, m) = z_fit.fitted(p, j * d + m) / dt;
    });

    // Y step: regressed conditional mean plus dt times the driver, iterated.
    parallel_for(n_paths, [&](std::int64_t p0, std::int64_t p1) {
      Eigen::VectorXd y_iter(n), z_row(d);
      for (std::int64_t p = p0; p < p1; ++p) {
        const int pi = static_cast<int>(p);
        const Eigen::VectorXd x = paths.state_vec(pi, k);
        Eigen::VectorXd cost_rate = Eigen::VectorXd::Zero(n);
        if (fold_running_cost)
          cost_rate = fold_running_cost->running(t, x, paths.control_vec(pi, k));
        y_iter = y_fit.fitted.row(p).transpose();
        for (int it = 0; it < picard_iters; ++it) {
          Eigen::VectorXd y_new(n);
          for (int j = 0; j < n; ++j) {
            for (int m = 0; m < d; ++m) z_row[m] = sol.z_at(pi, k, j, m);
            y_new[j] = y_fit.fitted(p, j) +
                       dt * (cost_rate[j] + driver.g(t, y_iter, z_row, j));
          }
          y_iter = y_new;
        }
        if (!y_iter.allFinite())
          throw NonFiniteError("solve_bsde: non-finite Y at path " + std::to_string(p) +
                               ", step " + std::to_string(k));
        y_cur.row(p) = y_iter.transpose();
        for (int j = 0; j < n; ++j) sol.y_at(pi, k, j) = y_iter[j];
      }
    });

    for (int j = 0; j < n; ++j) {
      RegressionStepStats stats;
      stats.step = k;
      stats.component = j;
      stats.condition_number = std::max(y_fit.condition_number, z_fit.condition_number);
      stats.rms_residual =
          std::sqrt((y_next.col(j) - y_fit.fitted.col(j)).squaredNorm() / n_paths);
      sol.regression_report.push_back(stats);
    }
    y_next.swap(y_cur);
  }
  return sol;
}

GExpectation conditional_g_expectation(const PathBundle& paths, const Driver& driver,
                                       const CostModel& cost, const RegressionBasis& basis,
                                       int picard_iters, CostFolding folding) {
  const int n = driver.dim_y;
  if (cost.dim_n != n)
    throw DimensionError("conditional_g_expectation: cost dim " + std::to_string(cost.dim_n) +
                         " does not match driver.dim_y " + std::to_string(n));

  const Eigen::MatrixXd xi = accumulated_cost(paths, cost);

  GExpectation out;
  if (folding == CostFolding::DriverPlusTerminalPsi) {
    Eigen::MatrixXd terminal(paths.n_paths, n);
    for (int p = 0; p < paths.n_paths; ++p)
      terminal.row(p) = cost.terminal(paths.state_vec(p, paths.grid.n_steps)).transpose();
    out.solution = solve_bsde(paths, driver, terminal, basis, picard_iters, &cost);
  } else {
    out.solution = solve_bsde(paths, driver, xi, basis, picard_iters, nullptr);
  }

  out.y0.resize(n);
  out.y0_spread.resize(n);
  out.std_err.resize(n);
  Eigen::VectorXd col(paths.n_paths);
  for (int j = 0; j < n; ++j) {
    for (int p = 0; p < paths.n_paths; ++p) col[p] = out.solution.y_at(p, 0, j);
    out.y0[j] = kahan_mean(col);
    out.y0_spread[j] = sample_std(col);
    out.std_err[j] = sample_std(xi.col(j)) / std::sqrt(static_cast<double>(paths.n_paths));
  }
  return out;
}

ConsistencyReport consistency_check(const PathBundle& paths, const Driver& driver,
                                    const CostModel& cost, const RegressionBasis& basis, int r,
                                    int picard_iters) {
  if (r <= 0 || r >= paths.grid.n_steps)
    throw InvalidArgument("consistency_check: r must satisfy 0 < r < n_steps");

  const int n = driver.dim_y;
  Eigen::MatrixXd terminal(paths.n_paths, n);
  for (int p = 0; p < paths.n_paths; ++p)
    terminal.row(p) = cost.terminal(paths.state_vec(p, paths.grid.n_steps)).transpose();

  const BsdeSolution full = solve_bsde(paths, driver, terminal, basis, picard_iters, &cost);
  const PathBundle sub = paths.tail_from(r);
  const BsdeSolution restart = solve_bsde(sub, driver, terminal, basis, picard_iters, &cost);

  ConsistencyReport report;
  report.r = r;
  report.residual_scale_full = full.residual_scale();
  report.residual_scale_restart = restart.residual_scale();
  double total = 0.0;
  for (int p = 0; p < paths.n_paths; ++p)
    for (int j = 0; j < n; ++j) {
      const double gap = std::abs(full.y_at(p, r, j) - restart.y_at(p, 0, j));
      report.max_abs_gap = std::max(report.max_abs_gap, gap);
      total += gap;
    }
  report.mean_abs_gap = total / (static_cast<double>(paths.n_paths) * n);
  return report;
}

double probe_driver_lipschitz(const Driver& driver, int dim_w, int n_probes,
                              std::uint64_t seed) {
  CounterRng rng(seed, 0x11b5u);
  const int n = driver.dim_y;
  double worst = 0.0;
  for (int probe = 0; probe < n_probes; ++probe) {
    const double t = rng.next_uniform();
    Eigen::VectorXd y1(n), y2(n), z1(dim_w), z2(dim_w);
    for (int j = 0; j < n; ++j) {
      y1[j] = rng.next_uniform(-5.0, 5.0);
      y2[j] = rng.next_uniform(-5.0, 5.0);
    }
    for (int m = 0; m < dim_w; ++m) {
      z1[m] = rng.next_uniform(-5.0, 5.0);
      z2[m] = rng.next_uniform(-5.0, 5.0);
    }
    const double denom = (y1 - y2).norm() + (z1 - z2).norm();
    if (denom < 1e-12) continue;
    for (int j = 0; j < n; ++j) {
      const double diff = std::abs(driver.g(t, y1, z1, j) - driver.g(t, y2, z2, j));
      worst = std::max(worst, diff / denom);
    }
  }
  return worst;
}

}  // namespace stodec
