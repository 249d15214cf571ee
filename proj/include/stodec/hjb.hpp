#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "stodec/bsde.hpp"
#include "stodec/sde.hpp"

namespace stodec {

/// Axis-aligned box grid truncating R^d. At least 3 nodes per axis so the
/// interior supports central differences.
struct SpaceGrid {
  Eigen::VectorXd lo, hi;
  std::vector<int> nodes_per_dim;

  SpaceGrid() = default;
  SpaceGrid(const Eigen::VectorXd& lo_, const Eigen::VectorXd& hi_, std::vector<int> nodes);

  int dim() const { return static_cast<int>(nodes_per_dim.size()); }
  long n_nodes() const;
  double spacing(int axis) const { return (hi[axis] - lo[axis]) / (nodes_per_dim[axis] - 1); }
  long stride(int axis) const;
  Eigen::VectorXd coords(long node) const;
  int axis_index(long node, int axis) const;
  bool is_boundary(long node) const;
  /// True when the node keeps at least `margin` nodes distance to every face.
  bool is_interior(long node, int margin = 1) const;
  long clamp_to_node(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x) const;
};

enum class Scheme { Explicit, SemiImplicitDiffusion };
enum class MinimizationMode { PerComponent, Scalarized };

struct HjbOptions {
  Scheme scheme = Scheme::Explicit;
  MinimizationMode mode = MinimizationMode::PerComponent;
  Eigen::VectorXd weights;  ///< Scalarized mode only; defaults to all-ones.
  int max_inner_iters = 50;
  double inner_tol = 1e-10;
};

/// Vector value function on the space-time grid with per-node minimizer
/// annotations. In per-component mode each component records its own argmin
/// (`n_argmin` = n); the scalarized mode stores one shared argmin per node.
struct ValueGrid {
  SpaceGrid space;
  TimeGrid tgrid;
  int dim_n = 1;
  int dim_u = 1;
  int n_argmin = 1;
  Scheme scheme = Scheme::Explicit;
  MinimizationMode mode = MinimizationMode::PerComponent;
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> control_mesh;
  std::vector<double> phi;       // (n_steps+1) x n_nodes x dim_n
  std::vector<double> argmin_u;  // (n_steps+1) x n_nodes x n_argmin x dim_u

  double& value(int k, long node, int j) {
    return phi[(static_cast<std::size_t>(k) * space.n_nodes() + node) * dim_n + j];
  }
  double value(int k, long node, int j) const {
    return phi[(static_cast<std::size_t>(k) * space.n_nodes() + node) * dim_n + j];
  }
  Eigen::Map<const Eigen::VectorXd> value_vec(int k, long node) const {
    return Eigen::Map<const Eigen::VectorXd>(
        &phi[(static_cast<std::size_t>(k) * space.n_nodes() + node) * dim_n], dim_n);
  }
  double& argmin(int k, long node, int slot, int i) {
    return argmin_u[((static_cast<std::size_t>(k) * space.n_nodes() + node) * n_argmin + slot) *
                        dim_u + i];
  }
  double argmin(int k, long node, int slot, int i) const {
    return argmin_u[((static_cast<std::size_t>(k) * space.n_nodes() + node) * n_argmin + slot) *
                        dim_u + i];
  }

  /// Multilinear-in-space, linear-in-time interpolation of the value vector.
  Eigen::VectorXd interpolate(double t, const Eigen::VectorXd& x) const;
  /// Multilinear interpolation within time slice k.
  Eigen::VectorXd interpolate_slice(int k, const Eigen::VectorXd& x) const;

  /// Linear-interpolation error bound for slice k from the grid's own second
  /// differences, max over components: max |delta^2 phi| / 8.
  double interpolation_error_bound(int k) const;
};

/// Pointwise bracket of the backward system: the generator applied to
/// component j plus the cost rate and driver term,
///   1/2 tr(sigma sigma^T H) + f . grad + c_j + G_j(t, phi, grad^T sigma).
double hamiltonian(int j, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& phi_vec, const Eigen::VectorXd& grad_j,
                   const Eigen::MatrixXd& hess_j, const DiffusionModel& model,
                   const CostModel& cost, const Driver& driver);

/// Backward sweep from T to t0 minimizing the bracket over the control mesh
/// at every node. Explicit stepping requires dt <= hx^2 / (d max|a|); the
/// semi-implicit variant treats the diagonal diffusion implicitly with the
/// minimization lagged through inner fixed-point passes. First derivatives
/// in the advection term are upwinded by the drift sign per candidate
/// control; boundary nodes close with zero second differences and one-sided
/// first differences. Argmin ties resolve to the lowest mesh index.
ValueGrid solve_hjb_system(const DiffusionModel& model, const CostModel& cost,
                           const Driver& driver, const SpaceGrid& space, const TimeGrid& tgrid,
                           const HjbOptions& options = {});

struct ResidualReport {
  double max_abs_residual = 0.0;
  long samples = 0;
  int worst_step = -1;
  long worst_node = -1;
  int worst_component = -1;
};

/// Interior PDE residual at sampled (node, step) pairs: one-sided time
/// difference plus the minimized bracket recomputed from the stored values.
ResidualReport residual_check(const ValueGrid& values, const DiffusionModel& model,
                              const CostModel& cost, const Driver& driver, long sample_nodes,
                              std::uint64_t seed);

/// Re-runs the bracket minimization at every (step, node) of an existing
/// grid under the requested mode, returning a fresh argmin array with the
/// same layout as ValueGrid::argmin_u (slots = dim_n for per-component
/// mode, 1 for scalarized).
std::vector<double> reminimize_controls(const ValueGrid& values, const DiffusionModel& model,
                                        const CostModel& cost, const Driver& driver,
                                        MinimizationMode mode, const Eigen::VectorXd& weights);

struct FkPoint {
  Eigen::VectorXd x0;
  Eigen::VectorXd pde_value;
  Eigen::VectorXd bsde_value;
  Eigen::VectorXd std_err;
  double discrepancy = 0.0;
};

struct FkReport {
  std::vector<FkPoint> points;
  double max_discrepancy = 0.0;
  double max_domain_exit_fraction = 0.0;
};

/// Probabilistic cross-check of the grid solution: simulate under the grid's
/// own recorded minimizer policy from each start point, solve the BSDE along
/// those paths, and compare the time-0 value against the interpolated grid.
FkReport feynman_kac_crosscheck(const ValueGrid& values, const DiffusionModel& model,
                                const CostModel& cost, const Driver& driver,
                                const std::vector<Eigen::VectorXd>& x0_list, int n_paths,
                                const RegressionBasis& basis, std::uint64_t seed,
                                int picard_iters = 3);

}  // namespace stodec
