#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "stodec/bsde.hpp"
#include "stodec/hjb.hpp"
#include "stodec/sde.hpp"

namespace stodec {

enum class PolicyLookup { NearestNode, MultilinearSnap };

/// Feedback rule on the space-time grid. Every stored control is a member of
/// the generating control mesh; off-grid queries clamp to the nearest node
/// (or interpolate and snap back onto the mesh).
struct Policy {
  SpaceGrid space;
  TimeGrid tgrid;
  int dim_u = 1;
  PolicyLookup lookup = PolicyLookup::NearestNode;
  std::vector<Eigen::VectorXd> mesh;  ///< control mesh of the generating run
  std::vector<double> u_star;         ///< (n_steps+1) x n_nodes x dim_u

  Eigen::VectorXd control_at(int step, const Eigen::VectorXd& x) const;
  ControlSource as_control_source() const;

  double& at(int k, long node, int i) {
    return u_star[(static_cast<std::size_t>(k) * space.n_nodes() + node) * dim_u + i];
  }
  double at(int k, long node, int i) const {
    return u_star[(static_cast<std::size_t>(k) * space.n_nodes() + node) * dim_u + i];
  }
};

struct ExtractMode {
  enum class Kind { PerComponent, Scalarized };
  Kind kind = Kind::PerComponent;
  int component = 0;          ///< per-component mode: which equation's argmin
  Eigen::VectorXd weights;    ///< scalarized mode

  static ExtractMode per_component(int j = 0);
  static ExtractMode scalarized(const Eigen::VectorXd& weights);
};

/// Materializes the argmin annotations of a value grid as a policy. Throws
/// ModeMismatch when the grid was not solved in the requested mode; the
/// overload with model/cost/driver re-minimizes from the stored values
/// instead.
Policy extract_policy(const ValueGrid& values, const ExtractMode& mode,
                      PolicyLookup lookup = PolicyLookup::NearestNode);
Policy extract_policy(const ValueGrid& values, const ExtractMode& mode,
                      const DiffusionModel& model, const CostModel& cost, const Driver& driver,
                      PolicyLookup lookup = PolicyLookup::NearestNode);

/// Estimated closed-loop vector cost with its Monte-Carlo scale.
struct CostOutcome {
  Eigen::VectorXd j_vector;
  Eigen::VectorXd std_err;
  int n_paths = 0;
  std::uint64_t seed = 0;
  double domain_exit_fraction = 0.0;  ///< share of lookups outside the grid
  bool reliable = true;               ///< false when exits exceed 1%
};

/// Simulates under the feedback policy and evaluates the nonlinear
/// expectation of the accumulated cost along those paths.
CostOutcome closed_loop_cost(const Policy& policy, const DiffusionModel& model,
                             const CostModel& cost, const Driver& driver,
                             const Eigen::VectorXd& x0, int n_paths,
                             const RegressionBasis& basis, std::uint64_t seed,
                             int picard_iters = 3);

enum class ParetoOrder { ADominates, BDominates, Incomparable, Equal };

/// Componentwise ordering with a 2x combined-standard-error noise band:
/// dominance needs every component at least as good and one strictly better
/// beyond the band; everything inside the band is Equal.
ParetoOrder pareto_compare(const CostOutcome& a, const CostOutcome& b);

struct DpReport {
  int r = 0;
  Eigen::VectorXd gap;      ///< estimate of E[cost to t_r + value at t_r] minus value at t0
  Eigen::VectorXd std_err;
  double interpolation_error_bound = 0.0;
  double domain_exit_fraction = 0.0;
};

/// Dynamic-programming consistency: simulate under the policy to the
/// intermediate index r, pay the running cost, land on the interpolated
/// value surface, and compare the resulting nonlinear expectation against
/// the value at the start point. Optimal policies close the gap to noise;
/// suboptimal ones leave it positive.
DpReport dp_consistency(const ValueGrid& values, const Policy& policy,
                        const DiffusionModel& model, const CostModel& cost,
                        const Driver& driver, int r, const Eigen::VectorXd& x0, int n_paths,
                        const RegressionBasis& basis, std::uint64_t seed,
                        int picard_iters = 3);

}  // namespace stodec
