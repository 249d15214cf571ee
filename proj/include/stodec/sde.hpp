#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace stodec {

/// Uniform grid on [t0, T].
struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  int n_steps = 1;

  TimeGrid() = default;
  TimeGrid(double t0_, double T_, int n_steps_);

  double dt() const { return (T - t0) / n_steps; }
  double time(int k) const { return t0 + k * dt(); }
};

/// Compact control set, materialized as a finite mesh of points in R^{dim_u}.
struct ControlSet {
  int dim_u = 0;
  std::vector<Eigen::VectorXd> points;

  static ControlSet from_points(std::vector<Eigen::VectorXd> pts);
  /// Tensor mesh over the box [lo, hi] with mesh_per_dim[i] points per axis.
  static ControlSet from_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const std::vector<int>& mesh_per_dim);
  static ControlSet singleton(const Eigen::VectorXd& u);
};

/// Controlled diffusion dX = f(t, X, u) dt + sigma(t, X, u) dB.
struct DiffusionModel {
  int dim_x = 1;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)> drift;
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)> diffusion;
  ControlSet control_set;
  double lipschitz_hint = 0.0;
};

/// Supplies the control at each step: a constant, an open-loop sequence, or a
/// state-feedback rule (e.g. a policy extracted from a value grid).
class ControlSource {
 public:
  using Feedback = std::function<Eigen::VectorXd(int step, double t, const Eigen::VectorXd& x)>;

  static ControlSource constant(const Eigen::VectorXd& u);
  /// One control per step, shared across paths; rows = steps.
  static ControlSource open_loop(const Eigen::MatrixXd& controls);
  static ControlSource feedback(int dim_u, Feedback fn);

  int dim_u() const { return dim_u_; }
  Eigen::VectorXd at(int step, double t, const Eigen::VectorXd& x) const;

 private:
  int dim_u_ = 0;
  Eigen::VectorXd constant_;
  Eigen::MatrixXd open_loop_;
  Feedback feedback_;
  enum class Mode { Constant, OpenLoop, Feedback } mode_ = Mode::Constant;
};

/// Seeded ensemble of forward trajectories with their Brownian increments and
/// applied controls. Layouts are row-major flat arrays; use the accessors.
struct PathBundle {
  TimeGrid grid;
  int n_paths = 0;
  int dim_x = 0;
  int dim_u = 0;
  std::uint64_t seed = 0;
  std::vector<double> x;         // n_paths x (n_steps+1) x dim_x
  std::vector<double> dw;        // n_paths x n_steps x dim_x
  std::vector<double> controls;  // n_paths x n_steps x dim_u

  double& state(int p, int k, int i) { return x[(static_cast<std::size_t>(p) * (grid.n_steps + 1) + k) * dim_x + i]; }
  double state(int p, int k, int i) const { return x[(static_cast<std::size_t>(p) * (grid.n_steps + 1) + k) * dim_x + i]; }
  Eigen::Map<const Eigen::VectorXd> state_vec(int p, int k) const {
    return Eigen::Map<const Eigen::VectorXd>(&x[(static_cast<std::size_t>(p) * (grid.n_steps + 1) + k) * dim_x], dim_x);
  }
  double& increment(int p, int k, int i) { return dw[(static_cast<std::size_t>(p) * grid.n_steps + k) * dim_x + i]; }
  double increment(int p, int k, int i) const { return dw[(static_cast<std::size_t>(p) * grid.n_steps + k) * dim_x + i]; }
  Eigen::Map<const Eigen::VectorXd> increment_vec(int p, int k) const {
    return Eigen::Map<const Eigen::VectorXd>(&dw[(static_cast<std::size_t>(p) * grid.n_steps + k) * dim_x], dim_x);
  }
  double& control(int p, int k, int i) { return controls[(static_cast<std::size_t>(p) * grid.n_steps + k) * dim_u + i]; }
  double control(int p, int k, int i) const { return controls[(static_cast<std::size_t>(p) * grid.n_steps + k) * dim_u + i]; }
  Eigen::Map<const Eigen::VectorXd> control_vec(int p, int k) const {
    return Eigen::Map<const Eigen::VectorXd>(&controls[(static_cast<std::size_t>(p) * grid.n_steps + k) * dim_u], dim_u);
  }

  /// Sub-bundle on [t_r, T]: states, increments and controls from step r on.
  PathBundle tail_from(int r) const;
};

/// Gaussian increments with variance dt, one independent stream per path.
/// Layout: n_paths x n_steps x dim, row-major, matching PathBundle::dw.
std::vector<double> brownian_increments(const TimeGrid& grid, int n_paths, int dim,
                                        std::uint64_t seed);

/// Euler scheme for the controlled diffusion. Path p consumes only the
/// (seed, p) stream, so the result is independent of the worker count.
PathBundle simulate_paths(const DiffusionModel& model, const ControlSource& control,
                          const Eigen::VectorXd& x0, const TimeGrid& grid, int n_paths,
                          std::uint64_t seed);

/// Same scheme but driven by caller-supplied increments (layout as above).
/// Used for strong-convergence measurements against a shared fine driver.
/// No moment gate is applied to the supplied increments.
PathBundle simulate_paths_with_increments(const DiffusionModel& model,
                                          const ControlSource& control,
                                          const Eigen::VectorXd& x0, const TimeGrid& grid,
                                          int n_paths, std::vector<double> dw,
                                          std::uint64_t seed_tag);

struct SamplePoint {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd u;
};

struct GrowthReport {
  double max_ratio = 0.0;
  double bound = 0.0;
  bool pass = false;
  SamplePoint worst;
};

struct EllipticityReport {
  double min_eigenvalue = 0.0;
  double floor = 0.0;
  bool pass = false;
  SamplePoint worst;
};

// Forward declaration; the running/terminal cost pair lives with the BSDE types.
struct CostModel;

/// Checks the polynomial growth bound |f|+|sigma|+|c|+|Psi| <= C (1+|x|^p+|u|)
/// over a sample cloud.
GrowthReport check_growth(const DiffusionModel& model, const CostModel& cost,
                          const std::vector<SamplePoint>& cloud, int p, double C);

/// Spot-checks the smallest eigenvalue of sigma sigma^T over a sample cloud.
EllipticityReport check_ellipticity(const DiffusionModel& model,
                                    const std::vector<SamplePoint>& cloud, double floor);

}  // namespace stodec
