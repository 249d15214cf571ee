#include "stodec/viability.hpp"

#include <cmath>
#include <string>

#include "stodec/errors.hpp"
#include "stodec/rng.hpp"

namespace stodec {

namespace {
std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
}  // namespace

nlohmann::json ViabilityReport::to_json() const {
  nlohmann::json j;
  switch (kind) {
    case ViabilityKind::PointwiseCondition:
      j["kind"] = "pointwise_condition";
      break;
    case ViabilityKind::PathViability:
      j["kind"] = "path_viability";
      break;
    case ViabilityKind::GridViability:
      j["kind"] = "grid_viability";
      break;
  }
  j["n_samples"] = n_samples;
  j["worst_margin"] = worst_margin;
  j["pass"] = pass;
  j["tolerance"] = tolerance;
  nlohmann::json w;
  w["t"] = worst_witness.t;
  if (worst_witness.x.size()) w["x"] = to_std(worst_witness.x);
  if (worst_witness.y.size()) w["y"] = to_std(worst_witness.y);
  if (worst_witness.u.size()) w["u"] = to_std(worst_witness.u);
  if (worst_witness.value.size()) w["value"] = to_std(worst_witness.value);
  if (worst_witness.z.size()) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < worst_witness.z.rows(); ++r)
      rows.push_back(to_std(worst_witness.z.row(r).transpose()));
    w["z"] = rows;
  }
  if (worst_witness.path >= 0) w["path"] = worst_witness.path;
  if (worst_witness.step >= 0) w["step"] = worst_witness.step;
  if (worst_witness.node >= 0) w["node"] = worst_witness.node;
  j["worst_witness"] = w;
  return j;
}

ViabilityReport check_viability_condition(const ConvexSet& set, const Driver& driver,
                                          const CostModel& cost, const DiffusionModel& model,
                                          const SampleCloudSpec& sampler, double C, double h,
                                          std::uint64_t seed, double tolerance) {
  const int n = driver.dim_y;
  const int d = model.dim_x;
  if (set.dim() != n)
    throw DimensionError("check_viability_condition: set.dim " + std::to_string(set.dim()) +
                         " does not match driver.dim_y " + std::to_string(n));
  if (cost.dim_n != n)
    throw DimensionError("check_viability_condition: cost.dim_n does not match driver.dim_y");
  if (sampler.x_lo.size() != d || sampler.x_hi.size() != d)
    throw DimensionError("check_viability_condition: x box does not match model.dim_x");
  if (sampler.y_lo.size() != n || sampler.y_hi.size() != n)
    throw DimensionError("check_viability_condition: y box does not match driver.dim_y");
  if (!(C > 0.0)) throw InvalidArgument("check_viability_condition: C must be positive");
  if (model.control_set.points.empty())
    throw InvalidArgument("check_viability_condition: control mesh is empty");

  ViabilityReport report;
  report.kind = ViabilityKind::PointwiseCondition;
  report.tolerance = tolerance;
  report.n_samples = sampler.n_samples;
  report.worst_margin = std::numeric_limits<double>::infinity();

  const long budget = 10 * sampler.n_samples;
  long draws = 0;
  std::uint64_t resample_stream = static_cast<std::uint64_t>(sampler.n_samples);

  Eigen::VectorXd x(d), y(n), z_row(d);
  Eigen::MatrixXd z(n, d);
  for (long s = 0; s < sampler.n_samples; ++s) {
    std::uint64_t stream = static_cast<std::uint64_t>(s);
    double t = 0.0;
    Eigen::VectorXd u;
    HessianEstimate hess;
    bool accepted = false;
    while (!accepted) {
      if (++draws > budget)
        throw ResampleBudgetExceeded(
            "check_viability_condition: more than 10x n_samples draws needed; the set/sampler "
            "pair concentrates on the non-smooth set");
      CounterRng rng(seed, stream);
      t = rng.next_uniform(sampler.t_lo, sampler.t_hi);
      for (int i = 0; i < d; ++i) x[i] = rng.next_uniform(sampler.x_lo[i], sampler.x_hi[i]);
      for (int j = 0; j < n; ++j) y[j] = rng.next_uniform(sampler.y_lo[j], sampler.y_hi[j]);
      for (int j = 0; j < n; ++j)
        for (int m = 0; m < d; ++m) z(j, m) = rng.next_uniform(sampler.z_lo, sampler.z_hi);
      u = model.control_set.points[rng.next_index(model.control_set.points.size())];

      const double step = h > 0.0 ? h : 1e-4 * (1.0 + y.norm());
      hess = set.hessian_distance_sq(y, step);
      if (hess.bounds_ok) {
        accepted = true;
      } else {
        stream = resample_stream++;
      }
    }

    const Eigen::MatrixXd sigma = model.diffusion(t, x, u);
    const Eigen::MatrixXd w = z * sigma;  // n x d
    const Eigen::VectorXd offset = y - set.project(y);
    const Eigen::VectorXd c_rate = cost.running(t, x, u);
    double lhs = 0.0;
    for (int j = 0; j < n; ++j) {
      z_row = w.row(j).transpose();
      lhs += offset[j] * (c_rate[j] + driver.g(t, y, z_row, j));
    }
    const double quad = (w.transpose() * hess.matrix * w).trace();
    const double rhs = 0.25 * quad + C * set.distance_sq(y);
    const double margin = rhs - lhs;
    if (!std::isfinite(margin))
      throw NonFiniteError("check_viability_condition: non-finite margin at sample " +
                           std::to_string(s));
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      report.worst_witness.t = t;
      report.worst_witness.x = x;
      report.worst_witness.y = y;
      report.worst_witness.z = z;
      report.worst_witness.u = u;
    }
  }
  report.pass = report.worst_margin >= -tolerance;
  return report;
}

double search_condition_constant(const ConvexSet& set, const Driver& driver,
                                 const CostModel& cost, const DiffusionModel& model,
                                 const SampleCloudSpec& sampler, double h, std::uint64_t seed,
                                 double tolerance) {
  for (int e = 0; e <= 20; ++e) {
    const double C = std::ldexp(1.0, e);
    const ViabilityReport r =
        check_viability_condition(set, driver, cost, model, sampler, C, h, seed, tolerance);
    if (r.pass) return C;
  }
  return std::numeric_limits<double>::infinity();
}

ViabilityReport empirical_viability(const BsdeSolution& solution, const ConvexSet& set,
                                    double eps) {
  if (set.dim() != solution.dim_y)
    throw DimensionError("empirical_viability: set.dim " + std::to_string(set.dim()) +
                         " does not match solution.dim_y " + std::to_string(solution.dim_y));
  ViabilityReport report;
  report.kind = ViabilityKind::PathViability;
  report.tolerance = eps;
  report.n_samples = static_cast<long>(solution.n_paths) * (solution.n_steps + 1);
  double worst = 0.0;
  for (int p = 0; p < solution.n_paths; ++p) {
    for (int k = 0; k <= solution.n_steps; ++k) {
      const double dist = set.distance(solution.y_vec(p, k));
      if (dist > worst) {
        worst = dist;
        report.worst_witness.path = p;
        report.worst_witness.step = k;
        report.worst_witness.t = solution.grid.time(k);
        report.worst_witness.value = solution.y_vec(p, k);
      }
    }
  }
  report.worst_margin = -worst;
  report.pass = worst <= eps;
  return report;
}

ViabilityReport grid_viability(const ValueGrid& values, const ConvexSet& set, double eps) {
  if (set.dim() != values.dim_n)
    throw DimensionError("grid_viability: set.dim " + std::to_string(set.dim()) +
                         " does not match values.dim_n " + std::to_string(values.dim_n));
  ViabilityReport report;
  report.kind = ViabilityKind::GridViability;
  report.tolerance = eps;
  report.n_samples = static_cast<long>(values.tgrid.n_steps + 1) * values.space.n_nodes();
  double worst = 0.0;
  for (int k = 0; k <= values.tgrid.n_steps; ++k) {
    for (long node = 0; node < values.space.n_nodes(); ++node) {
      const double dist = set.distance(values.value_vec(k, node));
      if (dist > worst) {
        worst = dist;
        report.worst_witness.step = k;
        report.worst_witness.node = node;
        report.worst_witness.t = values.tgrid.time(k);
        report.worst_witness.x = values.space.coords(node);
        report.worst_witness.value = values.value_vec(k, node);
      }
    }
  }
  report.worst_margin = -worst;
  report.pass = worst <= eps;
  return report;
}

}  // namespace stodec
