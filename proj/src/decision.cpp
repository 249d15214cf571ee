#include "stodec/decision.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "stodec/errors.hpp"
#include "stodec/numeric.hpp"

namespace stodec {

namespace {

Eigen::VectorXd snap_to_mesh(const std::vector<Eigen::VectorXd>& mesh,
                             const Eigen::VectorXd& u) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double d = (mesh[i] - u).squaredNorm();
    if (d < best) {
      best = d;
      best_i = i;
    }
  }
  return mesh[best_i];
}

double domain_exit_fraction(const PathBundle& bundle, const SpaceGrid& space) {
  long exits = 0;
  long total = 0;
  for (int p = 0; p < bundle.n_paths; ++p) {
    for (int k = 0; k < bundle.grid.n_steps; ++k) {
      ++total;
      if (!space.contains(bundle.state_vec(p, k))) ++exits;
    }
  }
  return total > 0 ? static_cast<double>(exits) / static_cast<double>(total) : 0.0;
}

}  // namespace

Eigen::VectorXd Policy::control_at(int step, const Eigen::VectorXd& x) const {
  const int k = std::min(std::max(step, 0), tgrid.n_steps);
  if (lookup == PolicyLookup::NearestNode) {
    const long node = space.clamp_to_node(x);
    Eigen::VectorXd u(dim_u);
    for (int i = 0; i < dim_u; ++i) u[i] = at(k, node, i);
    return u;
  }
  // Multilinear lookup, snapped back onto the mesh so the control stays in
  // the compact set.
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
  Eigen::VectorXd u = Eigen::VectorXd::Zero(dim_u);
  for (int c = 0; c < (1 << d); ++c) {
    double w = 1.0;
    long node = 0;
    for (int a = 0; a < d; ++a) {
      const int hi_side = (c >> a) & 1;
      w *= hi_side ? frac[a] : 1.0 - frac[a];
      node += (base[a] + hi_side) * space.stride(a);
    }
    for (int i = 0; i < dim_u; ++i) u[i] += w * at(k, node, i);
  }
  return snap_to_mesh(mesh, u);
}

ControlSource Policy::as_control_source() const {
  return ControlSource::feedback(
      dim_u, [pol = *this](int step, double, const Eigen::VectorXd& x) {
        return pol.control_at(step, x);
      });
}

ExtractMode ExtractMode::per_component(int j) {
  ExtractMode m;
  m.kind = Kind::PerComponent;
  m.component = j;
  return m;
}

ExtractMode ExtractMode::scalarized(const Eigen::VectorXd& weights) {
  ExtractMode m;
  m.kind = Kind::Scalarized;
  m.weights = weights;
  return m;
}

namespace {

Policy materialize(const ValueGrid& values, const std::vector<double>& argmin, int slots,
                   int slot, PolicyLookup lookup) {
  Policy pol;
  pol.space = values.space;
  pol.tgrid = values.tgrid;
  pol.dim_u = values.dim_u;
  pol.lookup = lookup;
  pol.mesh = values.control_mesh;
  const long nodes = values.space.n_nodes();
  pol.u_star.resize(static_cast<std::size_t>(values.tgrid.n_steps + 1) * nodes * values.dim_u);
  for (int k = 0; k <= values.tgrid.n_steps; ++k)
    for (long node = 0; node < nodes; ++node)
      for (int i = 0; i < values.dim_u; ++i)
        pol.at(k, node, i) =
            argmin[((static_cast<std::size_t>(k) * nodes + node) * slots + slot) * values.dim_u +
                   i];
  return pol;
}

}  // namespace

Policy extract_policy(const ValueGrid& values, const ExtractMode& mode, PolicyLookup lookup) {
  if (mode.kind == ExtractMode::Kind::PerComponent) {
    if (values.mode != MinimizationMode::PerComponent)
      throw ModeMismatch(
          "extract_policy: grid was solved in scalarized mode; per-component argmins are not "
          "recorded (pass model/cost/driver to re-minimize)");
    if (mode.component < 0 || mode.component >= values.dim_n)
      throw InvalidArgument("extract_policy: component out of range");
    return materialize(values, values.argmin_u, values.n_argmin, mode.component, lookup);
  }
  if (values.mode != MinimizationMode::Scalarized)
    throw ModeMismatch(
        "extract_policy: grid was solved per-component; the scalarized argmin is not recorded "
        "(pass model/cost/driver to re-minimize)");
  if (mode.weights.size() == values.dim_n && (mode.weights - values.weights).norm() > 0.0)
    throw ModeMismatch("extract_policy: grid was scalarized with different weights");
  return materialize(values, values.argmin_u, values.n_argmin, 0, lookup);
}

Policy extract_policy(const ValueGrid& values, const ExtractMode& mode,
                      const DiffusionModel& model, const CostModel& cost, const Driver& driver,
                      PolicyLookup lookup) {
  const bool per_component = mode.kind == ExtractMode::Kind::PerComponent;
  const MinimizationMode mm =
      per_component ? MinimizationMode::PerComponent : MinimizationMode::Scalarized;
  const bool stored_matches =
      values.mode == mm &&
      (per_component ||
       (mode.weights.size() == values.dim_n && (mode.weights - values.weights).norm() == 0.0));
  if (stored_matches) return extract_policy(values, mode, lookup);
  const std::vector<double> argmin =
      reminimize_controls(values, model, cost, driver, mm, mode.weights);
  const int slots = per_component ? values.dim_n : 1;
  return materialize(values, argmin, slots, per_component ? mode.component : 0, lookup);
}

CostOutcome closed_loop_cost(const Policy& policy, const DiffusionModel& model,
                             const CostModel& cost, const Driver& driver,
                             const Eigen::VectorXd& x0, int n_paths,
                             const RegressionBasis& basis, std::uint64_t seed,
                             int picard_iters) {
  const PathBundle bundle =
      simulate_paths(model, policy.as_control_source(), x0, policy.tgrid, n_paths, seed);
  const GExpectation g =
      conditional_g_expectation(bundle, driver, cost, basis, picard_iters);
  CostOutcome out;
  out.j_vector = g.y0;
  out.std_err = g.std_err;
  out.n_paths = n_paths;
  out.seed = seed;
  out.domain_exit_fraction = domain_exit_fraction(bundle, policy.space);
  out.reliable = out.domain_exit_fraction <= 0.01;
  return out;
}

ParetoOrder pareto_compare(const CostOutcome& a, const CostOutcome& b) {
  if (a.j_vector.size() != b.j_vector.size())
    throw DimensionError("pareto_compare: outcomes have different dimensions");
  const int n = static_cast<int>(a.j_vector.size());
  bool a_strict = false, b_strict = false;
  for (int j = 0; j < n; ++j) {
    const double band =
        2.0 * std::sqrt(a.std_err[j] * a.std_err[j] + b.std_err[j] * b.std_err[j]);
    const double diff = a.j_vector[j] - b.j_vector[j];
    if (diff < -band) a_strict = true;
    if (diff > band) b_strict = true;
  }
  if (a_strict && b_strict) return ParetoOrder::Incomparable;
  if (a_strict) return ParetoOrder::ADominates;
  if (b_strict) return ParetoOrder::BDominates;
  return ParetoOrder::Equal;
}

DpReport dp_consistency(const ValueGrid& values, const Policy& policy,
                        const DiffusionModel& model, const CostModel& cost,
                        const Driver& driver, int r, const Eigen::VectorXd& x0, int n_paths,
                        const RegressionBasis& basis, std::uint64_t seed, int picard_iters) {
  if (r <= 0 || r > values.tgrid.n_steps)
    throw InvalidArgument("dp_consistency: r must satisfy 0 < r <= n_steps");
  const double t_r = values.tgrid.time(r);
  const TimeGrid sub_grid(values.tgrid.t0, t_r, r);

  const PathBundle bundle =
      simulate_paths(model, policy.as_control_source(), x0, sub_grid, n_paths, seed);

  // Terminal data: the value surface at t_r, interpolated at the landed states.
  const int n = values.dim_n;
  Eigen::MatrixXd terminal(n_paths, n);
  for (int p = 0; p < n_paths; ++p)
    terminal.row(p) = values.interpolate_slice(r, bundle.state_vec(p, r)).transpose();

  const BsdeSolution sol = solve_bsde(bundle, driver, terminal, basis, picard_iters, &cost);

  DpReport report;
  report.r = r;
  report.gap.resize(n);
  report.std_err.resize(n);
  Eigen::VectorXd col(n_paths);
  const Eigen::MatrixXd xi = accumulated_cost(bundle, cost);
  const Eigen::VectorXd phi0 = values.interpolate_slice(0, x0);
  for (int j = 0; j < n; ++j) {
    for (int p = 0; p < n_paths; ++p) col[p] = sol.y_at(p, 0, j);
    report.gap[j] = kahan_mean(col) - phi0[j];
    Eigen::VectorXd raw(n_paths);
    for (int p = 0; p < n_paths; ++p) raw[p] = xi(p, j) - cost.terminal(bundle.state_vec(p, r))[j] + terminal(p, j);
    report.std_err[j] = sample_std(raw) / std::sqrt(static_cast<double>(n_paths));
  }
  report.interpolation_error_bound = values.interpolation_error_bound(r);
  report.domain_exit_fraction = domain_exit_fraction(bundle, policy.space);
  return report;
}

}  // namespace stodec
