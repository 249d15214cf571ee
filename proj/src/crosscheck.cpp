#include <cmath>

#include "stodec/decision.hpp"
#include "stodec/errors.hpp"
#include "stodec/hjb.hpp"

namespace stodec {

FkReport feynman_kac_crosscheck(const ValueGrid& values, const DiffusionModel& model,
                                const CostModel& cost, const Driver& driver,
                                const std::vector<Eigen::VectorXd>& x0_list, int n_paths,
                                const RegressionBasis& basis, std::uint64_t seed,
                                int picard_iters) {
  const int d = values.space.dim();
  for (const auto& x0 : x0_list) {
    if (static_cast<int>(x0.size()) != d)
      throw DimensionError("feynman_kac_crosscheck: start point dimension mismatch");
    for (int a = 0; a < d; ++a) {
      const double margin = 0.1 * (values.space.hi[a] - values.space.lo[a]);
      if (x0[a] < values.space.lo[a] + margin || x0[a] > values.space.hi[a] - margin)
        throw InvalidArgument(
            "feynman_kac_crosscheck: start points must keep a 10% margin to the grid boundary");
    }
  }

  const ExtractMode mode = values.mode == MinimizationMode::Scalarized
                               ? ExtractMode::scalarized(values.weights)
                               : ExtractMode::per_component(0);
  const Policy policy = extract_policy(values, mode);

  FkReport report;
  std::uint64_t point_seed = seed;
  for (const auto& x0 : x0_list) {
    const CostOutcome outcome = closed_loop_cost(policy, model, cost, driver, x0, n_paths,
                                                 basis, point_seed++, picard_iters);
    FkPoint pt;
    pt.x0 = x0;
    pt.pde_value = values.interpolate_slice(0, x0);
    pt.bsde_value = outcome.j_vector;
    pt.std_err = outcome.std_err;
    pt.discrepancy = (pt.pde_value - pt.bsde_value).cwiseAbs().maxCoeff();
    report.max_discrepancy = std::max(report.max_discrepancy, pt.discrepancy);
    report.max_domain_exit_fraction =
        std::max(report.max_domain_exit_fraction, outcome.domain_exit_fraction);
    report.points.push_back(std::move(pt));
  }
  return report;
}

}  // namespace stodec
