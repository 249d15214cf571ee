#include "stodec/hjb.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stodec/errors.hpp"
#include "stodec/parallel.hpp"
#include "stodec/rng.hpp"

namespace stodec {

SpaceGrid::SpaceGrid(const Eigen::VectorXd& lo_, const Eigen::VectorXd& hi_,
                     std::vector<int> nodes)
    : lo(lo_), hi(hi_), nodes_per_dim(std::move(nodes)) {
  if (lo.size() != hi.size() || lo.size() != static_cast<Eigen::Index>(nodes_per_dim.size()))
    throw DimensionError("SpaceGrid: lo, hi, nodes_per_dim sizes disagree");
  if ((lo.array() >= hi.array()).any())
    throw InvalidArgument("SpaceGrid: lo must be < hi componentwise");
  for (int n : nodes_per_dim)
    if (n < 3) throw InvalidArgument("SpaceGrid: nodes_per_dim must be >= 3");
}

long SpaceGrid::n_nodes() const {
  long n = 1;
  for (int m : nodes_per_dim) n *= m;
  return n;
}

long SpaceGrid::stride(int axis) const {
  long s = 1;
  for (int a = axis + 1; a < dim(); ++a) s *= nodes_per_dim[a];
  return s;
}

Eigen::VectorXd SpaceGrid::coords(long node) const {
  Eigen::VectorXd x(dim());
  for (int a = 0; a < dim(); ++a) x[a] = lo[a] + spacing(a) * axis_index(node, a);
  return x;
}

int SpaceGrid::axis_index(long node, int axis) const {
  return static_cast<int>((node / stride(axis)) % nodes_per_dim[axis]);
}

bool SpaceGrid::is_boundary(long node) const { return !is_interior(node, 1); }

bool SpaceGrid::is_interior(long node, int margin) const {
  for (int a = 0; a < dim(); ++a) {
    const int i = axis_index(node, a);
    if (i < margin || i >= nodes_per_dim[a] - margin) return false;
  }
  return true;
}

long SpaceGrid::clamp_to_node(const Eigen::VectorXd& x) const {
  long node = 0;
  for (int a = 0; a < dim(); ++a) {
    int i = static_cast<int>(std::floor((x[a] - lo[a]) / spacing(a) + 0.5));
    i = std::min(std::max(i, 0), nodes_per_dim[a] - 1);
    node += i * stride(a);
  }
  return node;
}

bool SpaceGrid::contains(const Eigen::VectorXd& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Eigen::VectorXd ValueGrid::interpolate_slice(int k, const Eigen::VectorXd& x) const {
  const int d = space.dim();
  std::vector<int> base(d);
  std::vector<double> frac(d);
  for (int a = 0; a < d; ++a) {
    const double pos = (x[a] - space.lo[a]) / space.spacing(a);
    int i = static_cast<int>(std::floor(pos));
    i = std::min(std::max(i, 0), space.nodes_per_dim[a] - 2);
    base[a] = i;
    frac[a] = std::min(std::max(pos - i, 0.0), 1.0);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_n);
  const int corners = 1 << d;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    long node = 0;
    for (int a = 0; a < d; ++a) {
      const int hi_side = (c >> a) & 1;
      w *= hi_side ? frac[a] : 1.0 - frac[a];
      node += (base[a] + hi_side) * space.stride(a);
    }
    if (w == 0.0) continue;
    out += w * value_vec(k, node);
  }
  return out;
}

Eigen::VectorXd ValueGrid::interpolate(double t, const Eigen::VectorXd& x) const {
  const double dt = tgrid.dt();
  double s = (t - tgrid.t0) / dt;
  s = std::min(std::max(s, 0.0), static_cast<double>(tgrid.n_steps));
  const int k0 = std::min(static_cast<int>(std::floor(s)), tgrid.n_steps - 1);
  const double w = s - k0;
  if (w == 0.0) return interpolate_slice(k0, x);
  return (1.0 - w) * interpolate_slice(k0, x) + w * interpolate_slice(k0 + 1, x);
}

double ValueGrid::interpolation_error_bound(int k) const {
  double bound = 0.0;
  const long nodes = space.n_nodes();
  for (long node = 0; node < nodes; ++node) {
    for (int a = 0; a < space.dim(); ++a) {
      const int i = space.axis_index(node, a);
      if (i < 1 || i >= space.nodes_per_dim[a] - 1) continue;
      const long s = space.stride(a);
      for (int j = 0; j < dim_n; ++j) {
        const double second =
            value(k, node + s, j) - 2.0 * value(k, node, j) + value(k, node - s, j);
        bound = std::max(bound, std::abs(second) / 8.0);
      }
    }
  }
  return bound;
}

double hamiltonian(int j, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& phi_vec, const Eigen::VectorXd& grad_j,
                   const Eigen::MatrixXd& hess_j, const DiffusionModel& model,
                   const CostModel& cost, const Driver& driver) {
  const Eigen::MatrixXd sigma = model.diffusion(t, x, u);
  const Eigen::MatrixXd a = sigma * sigma.transpose();
  const double diffusion = 0.5 * (a * hess_j).trace();
  const double advection = model.drift(t, x, u).dot(grad_j);
  const double rate = cost.running(t, x, u)[j];
  const Eigen::VectorXd z_row = sigma.transpose() * grad_j;
  const double g = driver.g(t, phi_vec, z_row, j);
  const double value = diffusion + advection + rate + g;
  if (!std::isfinite(value)) throw NonFiniteError("hamiltonian: non-finite bracket value");
  return value;
}

namespace {

// Finite-difference data of one node within one time slice: per component,
// forward/backward/central first differences and pure/cross second
// differences, with the boundary closure (zero second differences, one-sided
// first differences) already applied.
struct NodeStencil {
  Eigen::MatrixXd fwd, bwd, central;  // dim_n x d
  Eigen::MatrixXd second;             // dim_n x d
  std::vector<Eigen::MatrixXd> cross;  // per component, d x d (zero on boundary axes)
  Eigen::VectorXd phi_vec;            // dim_n

  NodeStencil(const ValueGrid& v, const double* slice, long node) {
    const int d = v.space.dim();
    const int n = v.dim_n;
    fwd.resize(n, d);
    bwd.resize(n, d);
    central.resize(n, d);
    second.resize(n, d);
    cross.assign(n, Eigen::MatrixXd::Zero(d, d));
    phi_vec.resize(n);
    auto at = [&](long nd, int j) { return slice[nd * n + j]; };
    for (int j = 0; j < n; ++j) phi_vec[j] = at(node, j);
    for (int a = 0; a < d; ++a) {
      const double h = v.space.spacing(a);
      const long s = v.space.stride(a);
      const int i = v.space.axis_index(node, a);
      const bool has_lo = i > 0;
      const bool has_hi = i < v.space.nodes_per_dim[a] - 1;
      for (int j = 0; j < n; ++j) {
        const double f0 = at(node, j);
        const double fp = has_hi ? at(node + s, j) : f0;
        const double fm = has_lo ? at(node - s, j) : f0;
        const double dfwd = has_hi ? (fp - f0) / h : (f0 - fm) / h;
        const double dbwd = has_lo ? (f0 - fm) / h : (fp - f0) / h;
        fwd(j, a) = dfwd;
        bwd(j, a) = dbwd;
        central(j, a) = (has_lo && has_hi) ? (fp - fm) / (2.0 * h) : (has_hi ? dfwd : dbwd);
        second(j, a) = (has_lo && has_hi) ? (fp - 2.0 * f0 + fm) / (h * h) : 0.0;
      }
    }
    if (d > 1) {
      for (int a = 0; a < d; ++a) {
        const int ia = v.space.axis_index(node, a);
        if (ia < 1 || ia >= v.space.nodes_per_dim[a] - 1) continue;
        for (int b = a + 1; b < d; ++b) {
          const int ib = v.space.axis_index(node, b);
          if (ib < 1 || ib >= v.space.nodes_per_dim[b] - 1) continue;
          const long sa = v.space.stride(a);
          const long sb = v.space.stride(b);
          const double denom = 4.0 * v.space.spacing(a) * v.space.spacing(b);
          for (int j = 0; j < n; ++j) {
            const double vpp = at(node + sa + sb, j);
            const double vpm = at(node + sa - sb, j);
            const double vmp = at(node - sa + sb, j);
            const double vmm = at(node - sa - sb, j);
            const double c = (vpp - vpm - vmp + vmm) / denom;
            cross[j](a, b) = c;
            cross[j](b, a) = c;
          }
        }
      }
    }
  }

  // Scheme bracket for one control: upwinded advection, central gradient in
  // the driver's z argument.
  void brackets(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                const DiffusionModel& model, const CostModel& cost, const Driver& driver,
                Eigen::VectorXd& out) const {
    const int d = static_cast<int>(fwd.cols());
    const int n = static_cast<int>(fwd.rows());
    const Eigen::VectorXd f = model.drift(t, x, u);
    const Eigen::MatrixXd sigma = model.diffusion(t, x, u);
    const Eigen::MatrixXd a = sigma * sigma.transpose();
    const Eigen::VectorXd c = cost.running(t, x, u);
    for (int j = 0; j < n; ++j) {
      double val = c[j];
      for (int m = 0; m < d; ++m) {
        val += 0.5 * a(m, m) * second(j, m);
        val += f[m] * (f[m] > 0.0 ? fwd(j, m) : (f[m] < 0.0 ? bwd(j, m) : central(j, m)));
        for (int l = m + 1; l < d; ++l) val += a(m, l) * cross[j](m, l);
      }
      const Eigen::VectorXd z_row = sigma.transpose() * central.row(j).transpose();
      val += driver.g(t, phi_vec, z_row, j);
      out[j] = val;
    }
  }
};

struct NodeMinimization {
  Eigen::VectorXd min_bracket;   // dim_n
  std::vector<int> argmin_idx;   // n_argmin entries (per component or shared)
};

NodeMinimization minimize_node(const ValueGrid& v, const NodeStencil& stencil, double t,
                               const Eigen::VectorXd& x, const DiffusionModel& model,
                               const CostModel& cost, const Driver& driver,
                               MinimizationMode mode, const Eigen::VectorXd& weights) {
  const int n = v.dim_n;
  NodeMinimization out;
  out.min_bracket.resize(n);
  Eigen::VectorXd bracket(n);
  if (mode == MinimizationMode::PerComponent) {
    out.argmin_idx.assign(n, 0);
    Eigen::VectorXd best = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    for (std::size_t ui = 0; ui < v.control_mesh.size(); ++ui) {
      stencil.brackets(t, x, v.control_mesh[ui], model, cost, driver, bracket);
      for (int j = 0; j < n; ++j) {
        if (bracket[j] < best[j]) {  // strict: ties keep the lowest mesh index
          best[j] = bracket[j];
          out.argmin_idx[static_cast<std::size_t>(j)] = static_cast<int>(ui);
        }
      }
    }
    out.min_bracket = best;
  } else {
    out.argmin_idx.assign(1, 0);
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_bracket(n);
    for (std::size_t ui = 0; ui < v.control_mesh.size(); ++ui) {
      stencil.brackets(t, x, v.control_mesh[ui], model, cost, driver, bracket);
      const double w = weights.dot(bracket);
      if (w < best) {
        best = w;
        best_bracket = bracket;
        out.argmin_idx[0] = static_cast<int>(ui);
      }
    }
    out.min_bracket = best_bracket;
  }
  if (!out.min_bracket.allFinite())
    throw NonFiniteError("solve_hjb_system: non-finite minimized bracket");
  return out;
}

double max_diffusion_norm(const DiffusionModel& model, const SpaceGrid& space,
                          const TimeGrid& tgrid) {
  double amax = 0.0;
  const long nodes = space.n_nodes();
  for (double t : {tgrid.t0, tgrid.T}) {
    for (long node = 0; node < nodes; ++node) {
      const Eigen::VectorXd x = space.coords(node);
      for (const auto& u : model.control_set.points) {
        const Eigen::MatrixXd sigma = model.diffusion(t, x, u);
        const Eigen::MatrixXd a = sigma * sigma.transpose();
        amax = std::max(amax, a.cwiseAbs().rowwise().sum().maxCoeff());
      }
    }
  }
  return amax;
}

void store_argmin(ValueGrid& v, int k, long node, const NodeMinimization& nm) {
  for (int slot = 0; slot < v.n_argmin; ++slot) {
    const Eigen::VectorXd& u = v.control_mesh[static_cast<std::size_t>(
        nm.argmin_idx[static_cast<std::size_t>(std::min<int>(slot, nm.argmin_idx.size() - 1))])];
    for (int i = 0; i < v.dim_u; ++i) v.argmin(k, node, slot, i) = u[i];
  }
}

}  // namespace

ValueGrid solve_hjb_system(const DiffusionModel& model, const CostModel& cost,
                           const Driver& driver, const SpaceGrid& space, const TimeGrid& tgrid,
                           const HjbOptions& options) {
  const int n = driver.dim_y;
  const int d = space.dim();
  if (model.dim_x != d)
    throw DimensionError("solve_hjb_system: model.dim_x " + std::to_string(model.dim_x) +
                         " does not match space grid dimension " + std::to_string(d));
  if (cost.dim_n != n)
    throw DimensionError("solve_hjb_system: cost.dim_n does not match driver.dim_y");
  if (model.control_set.points.empty())
    throw InvalidArgument("solve_hjb_system: control mesh is empty");

  ValueGrid v;
  v.space = space;
  v.tgrid = tgrid;
  v.dim_n = n;
  v.dim_u = model.control_set.dim_u;
  v.scheme = options.scheme;
  v.mode = options.mode;
  v.n_argmin = options.mode == MinimizationMode::PerComponent ? n : 1;
  v.weights = options.weights.size() == n ? options.weights : Eigen::VectorXd::Ones(n);
  v.control_mesh = model.control_set.points;
  const long nodes = space.n_nodes();
  v.phi.resize(static_cast<std::size_t>(tgrid.n_steps + 1) * nodes * n);
  v.argmin_u.resize(static_cast<std::size_t>(tgrid.n_steps + 1) * nodes * v.n_argmin * v.dim_u,
                    0.0);

  for (long node = 0; node < nodes; ++node) {
    const Eigen::VectorXd psi = cost.terminal(space.coords(node));
    if (!psi.allFinite())
      throw NonFiniteError("solve_hjb_system: non-finite terminal data at node " +
                           std::to_string(node));
    for (int j = 0; j < n; ++j) v.value(tgrid.n_steps, node, j) = psi[j];
  }

  // Minimizer annotations for the terminal slice come from the terminal data
  // itself, so policies remain defined at the horizon.
  {
    const double tT = tgrid.time(tgrid.n_steps);
    const double* slice_T = &v.phi[static_cast<std::size_t>(tgrid.n_steps) * nodes * n];
    parallel_for(nodes, [&](std::int64_t n0, std::int64_t n1) {
      for (std::int64_t node = n0; node < n1; ++node) {
        const NodeMinimization nm =
            minimize_node(v, NodeStencil(v, slice_T, node), tT, space.coords(node), model,
                          cost, driver, options.mode, v.weights);
        store_argmin(v, tgrid.n_steps, node, nm);
      }
    });
  }

  const double dt = tgrid.dt();
  if (options.scheme == Scheme::Explicit) {
    const double amax = max_diffusion_norm(model, space, tgrid);
    double hx_min = std::numeric_limits<double>::infinity();
    for (int a = 0; a < d; ++a) hx_min = std::min(hx_min, space.spacing(a));
    if (amax > 0.0 && dt > hx_min * hx_min / (d * amax))
      throw CflViolation("solve_hjb_system: explicit step dt = " + std::to_string(dt) +
                         " violates dt <= hx^2/(d max|a|) = " +
                         std::to_string(hx_min * hx_min / (d * amax)));
  }

  std::vector<double> lagged;  // semi-implicit inner iterate
  for (int k = tgrid.n_steps - 1; k >= 0; --k) {
    const double t = tgrid.time(k + 1);
    const double* slice_next = &v.phi[static_cast<std::size_t>(k + 1) * nodes * n];

    if (options.scheme == Scheme::Explicit) {
      parallel_for(nodes, [&](std::int64_t n0, std::int64_t n1) {
        for (std::int64_t node = n0; node < n1; ++node) {
          const Eigen::VectorXd x = space.coords(node);
          NodeStencil stencil(v, slice_next, node);
          const NodeMinimization nm = minimize_node(v, stencil, t, x, model, cost, driver,
                                                    options.mode, v.weights);
          for (int j = 0; j < n; ++j)
            v.value(k, node, j) = v.value(k + 1, node, j) + dt * nm.min_bracket[j];
          store_argmin(v, k, node, nm);
        }
      });
      continue;
    }

    // Semi-implicit: diagonal diffusion implicit, everything else (advection,
    // cross terms, cost, driver, and the minimizer itself) lagged on the
    // current inner iterate.
    lagged.assign(slice_next, slice_next + nodes * n);
    std::vector<double> iterate(static_cast<std::size_t>(nodes) * n);
    std::vector<NodeMinimization> mins(nodes);
    bool converged = false;
    for (int inner = 0; inner < options.max_inner_iters; ++inner) {
      std::vector<Eigen::VectorXd> rhs(n, Eigen::VectorXd(nodes));
      std::vector<std::vector<Eigen::VectorXd>> diag_a(
          n, std::vector<Eigen::VectorXd>(d, Eigen::VectorXd(nodes)));
      parallel_for(nodes, [&](std::int64_t n0, std::int64_t n1) {
        Eigen::VectorXd bracket(n);
        for (std::int64_t node = n0; node < n1; ++node) {
          const Eigen::VectorXd x = space.coords(node);
          NodeStencil stencil(v, lagged.data(), node);
          NodeMinimization nm = minimize_node(v, stencil, t, x, model, cost, driver,
                                              options.mode, v.weights);
          mins[node] = nm;
          for (int j = 0; j < n; ++j) {
            const int slot = options.mode == MinimizationMode::PerComponent ? j : 0;
            const Eigen::VectorXd& u =
                v.control_mesh[static_cast<std::size_t>(nm.argmin_idx[slot])];
            const Eigen::MatrixXd sigma = model.diffusion(t, x, u);
            const Eigen::MatrixXd a = sigma * sigma.transpose();
            stencil.brackets(t, x, u, model, cost, driver, bracket);
            // Remove the lagged diagonal diffusion from the explicit part.
            double explicit_part = bracket[j];
            for (int m = 0; m < d; ++m) explicit_part -= 0.5 * a(m, m) * stencil.second(j, m);
            rhs[j][node] = slice_next[node * n + j] + dt * explicit_part;
            for (int m = 0; m < d; ++m) diag_a[j][m][node] = a(m, m);
          }
        }
      });

      for (int j = 0; j < n; ++j) {
        Eigen::SparseMatrix<double> mat(nodes, nodes);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(nodes) * (2 * d + 1));
        for (long node = 0; node < nodes; ++node) {
          double diag = 1.0;
          for (int a = 0; a < d; ++a) {
            const int i = space.axis_index(node, a);
            if (i < 1 || i >= space.nodes_per_dim[a] - 1) continue;
            const double h = space.spacing(a);
            const double coeff = 0.5 * diag_a[j][a][node] * dt / (h * h);
            diag += 2.0 * coeff;
            trips.emplace_back(node, node - space.stride(a), -coeff);
            trips.emplace_back(node, node + space.stride(a), -coeff);
          }
          trips.emplace_back(node, node, diag);
        }
        mat.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> solver(mat);
        if (solver.info() != Eigen::Success)
          throw Error("solve_hjb_system: implicit diffusion factorization failed");
        const Eigen::VectorXd phi_new = solver.solve(rhs[j]);
        for (long node = 0; node < nodes; ++node) iterate[node * n + j] = phi_new[node];
      }

      double delta = 0.0;
      for (std::size_t i = 0; i < iterate.size(); ++i)
        delta = std::max(delta, std::abs(iterate[i] - lagged[i]));
      lagged = iterate;
      if (delta <= options.inner_tol) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw FixedPointDivergence("solve_hjb_system: inner fixed point did not reach " +
                                 std::to_string(options.inner_tol) + " within " +
                                 std::to_string(options.max_inner_iters) +
                                 " iterations at step " + std::to_string(k));
    for (long node = 0; node < nodes; ++node) {
      for (int j = 0; j < n; ++j) v.value(k, node, j) = lagged[node * n + j];
      store_argmin(v, k, node, mins[node]);
    }
  }

  for (double val : v.phi)
    if (!std::isfinite(val)) throw NonFiniteError("solve_hjb_system: non-finite value entry");
  return v;
}

ResidualReport residual_check(const ValueGrid& values, const DiffusionModel& model,
                              const CostModel& cost, const Driver& driver, long sample_nodes,
                              std::uint64_t seed) {
  ResidualReport report;
  const long nodes = values.space.n_nodes();
  const double dt = values.tgrid.dt();
  // "Interior" keeps a 10% margin per axis, matching the start-point
  // convention of the probabilistic cross-check; the truncation closure
  // contaminates a boundary layer that residuals should not report.
  std::vector<long> interior;
  interior.reserve(nodes);
  for (long node = 0; node < nodes; ++node) {
    bool ok = true;
    for (int a = 0; a < values.space.dim(); ++a) {
      const int margin = std::max(1, values.space.nodes_per_dim[a] / 10);
      const int i = values.space.axis_index(node, a);
      if (i < margin || i >= values.space.nodes_per_dim[a] - margin) ok = false;
    }
    if (ok) interior.push_back(node);
  }
  if (interior.empty()) return report;

  CounterRng rng(seed, 0x7e51u);
  Eigen::VectorXd bracket(values.dim_n);
  for (long s = 0; s < sample_nodes; ++s) {
    const long node = interior[rng.next_index(interior.size())];
    const int k = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(values.tgrid.n_steps)));
    const double t = values.tgrid.time(k);
    const Eigen::VectorXd x = values.space.coords(node);
    const double* slice = &values.phi[static_cast<std::size_t>(k) * nodes * values.dim_n];
    NodeStencil stencil(values, slice, node);
    Eigen::VectorXd best =
        Eigen::VectorXd::Constant(values.dim_n, std::numeric_limits<double>::infinity());
    for (const auto& u : values.control_mesh) {
      stencil.brackets(t, x, u, model, cost, driver, bracket);
      best = best.cwiseMin(bracket);
    }
    for (int j = 0; j < values.dim_n; ++j) {
      const double dphi_dt = (values.value(k + 1, node, j) - values.value(k, node, j)) / dt;
      const double res = std::abs(dphi_dt + best[j]);
      if (res > report.max_abs_residual) {
        report.max_abs_residual = res;
        report.worst_step = k;
        report.worst_node = node;
        report.worst_component = j;
      }
    }
    ++report.samples;
  }
  return report;
}

std::vector<double> reminimize_controls(const ValueGrid& values, const DiffusionModel& model,
                                        const CostModel& cost, const Driver& driver,
                                        MinimizationMode mode, const Eigen::VectorXd& weights) {
  const long nodes = values.space.n_nodes();
  const int n = values.dim_n;
  const int slots = mode == MinimizationMode::PerComponent ? n : 1;
  const Eigen::VectorXd w = weights.size() == n ? weights : Eigen::VectorXd::Ones(n);
  std::vector<double> out(static_cast<std::size_t>(values.tgrid.n_steps + 1) * nodes * slots *
                              values.dim_u,
                          0.0);
  for (int k = 0; k <= values.tgrid.n_steps; ++k) {
    const double t = values.tgrid.time(k);
    const double* slice = &values.phi[static_cast<std::size_t>(k) * nodes * n];
    parallel_for(nodes, [&](std::int64_t n0, std::int64_t n1) {
      for (std::int64_t node = n0; node < n1; ++node) {
        const Eigen::VectorXd x = values.space.coords(node);
        NodeStencil stencil(values, slice, node);
        const NodeMinimization nm =
            minimize_node(values, stencil, t, x, model, cost, driver, mode, w);
        for (int slot = 0; slot < slots; ++slot) {
          const Eigen::VectorXd& u =
              values.control_mesh[static_cast<std::size_t>(nm.argmin_idx[slot])];
          for (int i = 0; i < values.dim_u; ++i)
            out[((static_cast<std::size_t>(k) * nodes + node) * slots + slot) * values.dim_u +
                i] = u[i];
        }
      }
    });
  }
  return out;
}

}  // namespace stodec
