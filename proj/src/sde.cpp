#include "stodec/sde.hpp"

#include <cmath>
#include <string>

#include "stodec/bsde.hpp"
#include "stodec/errors.hpp"
#include "stodec/numeric.hpp"
#include "stodec/parallel.hpp"
#include "stodec/rng.hpp"

namespace stodec {

TimeGrid::TimeGrid(double t0_, double T_, int n_steps_) : t0(t0_), T(T_), n_steps(n_steps_) {
  if (!(t0 < T)) throw InvalidArgument("TimeGrid: t0 must be < T");
  if (n_steps < 1) throw InvalidArgument("TimeGrid: n_steps must be >= 1");
}

ControlSet ControlSet::from_points(std::vector<Eigen::VectorXd> pts) {
  if (pts.empty()) throw InvalidArgument("ControlSet: mesh must be nonempty");
  ControlSet cs;
  cs.dim_u = static_cast<int>(pts.front().size());
  for (const auto& p : pts)
    if (static_cast<int>(p.size()) != cs.dim_u)
      throw DimensionError("ControlSet: mesh points must share a dimension");
  cs.points = std::move(pts);
  return cs;
}

ControlSet ControlSet::from_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                const std::vector<int>& mesh_per_dim) {
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d || static_cast<int>(mesh_per_dim.size()) != d)
    throw DimensionError("ControlSet::from_box: lo, hi, mesh_per_dim sizes disagree");
  if ((lo.array() > hi.array()).any())
    throw InvalidArgument("ControlSet::from_box: lo must be <= hi");
  long total = 1;
  for (int m : mesh_per_dim) {
    if (m < 1) throw InvalidArgument("ControlSet::from_box: mesh_per_dim entries must be >= 1");
    total *= m;
  }
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(total);
  std::vector<int> idx(d, 0);
  for (long c = 0; c < total; ++c) {
    Eigen::VectorXd u(d);
    for (int i = 0; i < d; ++i)
      u[i] = mesh_per_dim[i] == 1 ? lo[i]
                                  : lo[i] + (hi[i] - lo[i]) * idx[i] / (mesh_per_dim[i] - 1);
    pts.push_back(u);
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[i] < mesh_per_dim[i]) break;
      idx[i] = 0;
    }
  }
  return from_points(std::move(pts));
}

ControlSet ControlSet::singleton(const Eigen::VectorXd& u) {
  return from_points({u});
}

ControlSource ControlSource::constant(const Eigen::VectorXd& u) {
  ControlSource s;
  s.dim_u_ = static_cast<int>(u.size());
  s.constant_ = u;
  s.mode_ = Mode::Constant;
  return s;
}

ControlSource ControlSource::open_loop(const Eigen::MatrixXd& controls) {
  if (controls.rows() < 1 || controls.cols() < 1)
    throw InvalidArgument("ControlSource::open_loop: controls must be nonempty");
  ControlSource s;
  s.dim_u_ = static_cast<int>(controls.cols());
  s.open_loop_ = controls;
  s.mode_ = Mode::OpenLoop;
  return s;
}

ControlSource ControlSource::feedback(int dim_u, Feedback fn) {
  ControlSource s;
  s.dim_u_ = dim_u;
  s.feedback_ = std::move(fn);
  s.mode_ = Mode::Feedback;
  return s;
}

Eigen::VectorXd ControlSource::at(int step, double t, const Eigen::VectorXd& x) const {
  switch (mode_) {
    case Mode::Constant:
      return constant_;
    case Mode::OpenLoop: {
      const int row = step < static_cast<int>(open_loop_.rows())
                          ? step
                          : static_cast<int>(open_loop_.rows()) - 1;
      return open_loop_.row(row).transpose();
    }
    case Mode::Feedback:
      return feedback_(step, t, x);
  }
  throw Error("ControlSource: unknown mode");
}

PathBundle PathBundle::tail_from(int r) const {
  if (r < 0 || r >= grid.n_steps)
    throw InvalidArgument("PathBundle::tail_from: r must be in [0, n_steps)");
  PathBundle sub;
  sub.grid = TimeGrid(grid.time(r), grid.T, grid.n_steps - r);
  sub.n_paths = n_paths;
  sub.dim_x = dim_x;
  sub.dim_u = dim_u;
  sub.seed = seed;
  sub.x.resize(static_cast<std::size_t>(n_paths) * (sub.grid.n_steps + 1) * dim_x);
  sub.dw.resize(static_cast<std::size_t>(n_paths) * sub.grid.n_steps * dim_x);
  sub.controls.resize(static_cast<std::size_t>(n_paths) * sub.grid.n_steps * dim_u);
  for (int p = 0; p < n_paths; ++p) {
    for (int k = r; k <= grid.n_steps; ++k)
      for (int i = 0; i < dim_x; ++i) sub.state(p, k - r, i) = state(p, k, i);
    for (int k = r; k < grid.n_steps; ++k) {
      for (int i = 0; i < dim_x; ++i) sub.increment(p, k - r, i) = increment(p, k, i);
      for (int i = 0; i < dim_u; ++i) sub.control(p, k - r, i) = control(p, k, i);
    }
  }
  return sub;
}

std::vector<double> brownian_increments(const TimeGrid& grid, int n_paths, int dim,
                                        std::uint64_t seed) {
  if (n_paths < 1) throw InvalidArgument("brownian_increments: n_paths must be >= 1");
  if (dim < 1) throw InvalidArgument("brownian_increments: dim must be >= 1");
  std::vector<double> dw(static_cast<std::size_t>(n_paths) * grid.n_steps * dim);
  const double sqrt_dt = std::sqrt(grid.dt());
  parallel_for(n_paths, [&](std::int64_t p0, std::int64_t p1) {
    for (std::int64_t p = p0; p < p1; ++p) {
      CounterRng rng(seed, static_cast<std::uint64_t>(p));
      double* row = &dw[static_cast<std::size_t>(p) * grid.n_steps * dim];
      for (int k = 0; k < grid.n_steps; ++k)
        for (int i = 0; i < dim; ++i) row[k * dim + i] = sqrt_dt * rng.next_normal();
    }
  });
  return dw;
}

namespace {

// Loose RNG sanity gate; meaningful only once the ensemble is large.
void moment_gate(const std::vector<double>& dw, int n_paths, int n_steps, int dim, double dt) {
  const std::size_t per_component = static_cast<std::size_t>(n_paths) * n_steps;
  if (per_component < 1000) return;
  for (int i = 0; i < dim; ++i) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t pk = 0; pk < per_component; ++pk) {
      const double v = dw[pk * dim + i];
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / per_component;
    const double var = sum_sq / per_component - mean * mean;
    const double mean_tol =
        5.0 * std::max(1.0, std::sqrt(dt)) / std::sqrt(static_cast<double>(per_component));
    if (std::abs(mean) > mean_tol)
      throw Error("PathBundle: Brownian increment mean " + std::to_string(mean) +
                  " outside sanity band " + std::to_string(mean_tol) + " for component " +
                  std::to_string(i));
    if (std::abs(var - dt) > 0.1 * dt)
      throw Error("PathBundle: Brownian increment variance " + std::to_string(var) +
                  " deviates more than 10% from dt = " + std::to_string(dt) +
                  " for component " + std::to_string(i));
  }
}

PathBundle run_euler(const DiffusionModel& model, const ControlSource& control,
                     const Eigen::VectorXd& x0, const TimeGrid& grid, int n_paths,
                     std::vector<double> dw, std::uint64_t seed) {
  const int d = model.dim_x;
  PathBundle bundle;
  bundle.grid = grid;
  bundle.n_paths = n_paths;
  bundle.dim_x = d;
  bundle.dim_u = control.dim_u();
  bundle.seed = seed;
  bundle.x.resize(static_cast<std::size_t>(n_paths) * (grid.n_steps + 1) * d);
  bundle.dw = std::move(dw);
  bundle.controls.resize(static_cast<std::size_t>(n_paths) * grid.n_steps * control.dim_u());

  const double dt = grid.dt();
  parallel_for(n_paths, [&](std::int64_t p0, std::int64_t p1) {
    Eigen::VectorXd xk(d), xn(d);
    for (std::int64_t p = p0; p < p1; ++p) {
      xk = x0;
      for (int i = 0; i < d; ++i) bundle.state(static_cast<int>(p), 0, i) = x0[i];
      for (int k = 0; k < grid.n_steps; ++k) {
        const double t = grid.time(k);
        const Eigen::VectorXd u = control.at(k, t, xk);
        for (int i = 0; i < control.dim_u(); ++i)
          bundle.control(static_cast<int>(p), k, i) = u[i];
        const Eigen::VectorXd f = model.drift(t, xk, u);
        const Eigen::MatrixXd sigma = model.diffusion(t, xk, u);
        xn = xk + dt * f + sigma * bundle.increment_vec(static_cast<int>(p), k);
        if (!xn.allFinite())
          throw NonFiniteError("simulate_paths: non-finite state at path " + std::to_string(p) +
                               ", step " + std::to_string(k));
        for (int i = 0; i < d; ++i) bundle.state(static_cast<int>(p), k + 1, i) = xn[i];
        xk.swap(xn);
      }
    }
  });
  return bundle;
}

}  // namespace

PathBundle simulate_paths(const DiffusionModel& model, const ControlSource& control,
                          const Eigen::VectorXd& x0, const TimeGrid& grid, int n_paths,
                          std::uint64_t seed) {
  if (static_cast<int>(x0.size()) != model.dim_x)
    throw DimensionError("simulate_paths: x0 dimension " + std::to_string(x0.size()) +
                         " does not match model dim_x " + std::to_string(model.dim_x));
  if (n_paths < 1) throw InvalidArgument("simulate_paths: n_paths must be >= 1");
  std::vector<double> dw = brownian_increments(grid, n_paths, model.dim_x, seed);
  moment_gate(dw, n_paths, grid.n_steps, model.dim_x, grid.dt());
  return run_euler(model, control, x0, grid, n_paths, std::move(dw), seed);
}

PathBundle simulate_paths_with_increments(const DiffusionModel& model,
                                          const ControlSource& control,
                                          const Eigen::VectorXd& x0, const TimeGrid& grid,
                                          int n_paths, std::vector<double> dw,
                                          std::uint64_t seed_tag) {
  if (static_cast<int>(x0.size()) != model.dim_x)
    throw DimensionError("simulate_paths_with_increments: x0/model dimension mismatch");
  const std::size_t expected = static_cast<std::size_t>(n_paths) * grid.n_steps * model.dim_x;
  if (dw.size() != expected)
    throw DimensionError("simulate_paths_with_increments: increment array has size " +
                         std::to_string(dw.size()) + ", expected " + std::to_string(expected));
  return run_euler(model, control, x0, grid, n_paths, std::move(dw), seed_tag);
}

GrowthReport check_growth(const DiffusionModel& model, const CostModel& cost,
                          const std::vector<SamplePoint>& cloud, int p, double C) {
  if (cloud.empty()) throw InvalidArgument("check_growth: sample cloud must be nonempty");
  GrowthReport report;
  report.bound = C;
  for (const auto& s : cloud) {
    const double num = model.drift(s.t, s.x, s.u).norm() +
                       model.diffusion(s.t, s.x, s.u).norm() +
                       cost.running(s.t, s.x, s.u).norm() + cost.terminal(s.x).norm();
    const double den = 1.0 + std::pow(s.x.norm(), p) + s.u.norm();
    const double ratio = num / den;
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      report.worst = s;
    }
  }
  report.pass = report.max_ratio <= C;
  return report;
}

EllipticityReport check_ellipticity(const DiffusionModel& model,
                                    const std::vector<SamplePoint>& cloud, double floor) {
  if (cloud.empty()) throw InvalidArgument("check_ellipticity: sample cloud must be nonempty");
  EllipticityReport report;
  report.floor = floor;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& s : cloud) {
    const Eigen::MatrixXd sigma = model.diffusion(s.t, s.x, s.u);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma * sigma.transpose(),
                                                       Eigen::EigenvaluesOnly);
    const double lambda_min = eig.eigenvalues().minCoeff();
    if (lambda_min < report.min_eigenvalue) {
      report.min_eigenvalue = lambda_min;
      report.worst = s;
    }
  }
  report.pass = report.min_eigenvalue >= floor;
  return report;
}

}  // namespace stodec
