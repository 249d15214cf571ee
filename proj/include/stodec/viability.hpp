#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>

#include "stodec/bsde.hpp"
#include "stodec/convex_set.hpp"
#include "stodec/hjb.hpp"
#include "stodec/sde.hpp"

namespace stodec {

enum class ViabilityKind { PointwiseCondition, PathViability, GridViability };

/// The sample or grid location achieving the worst margin. Fields that do
/// not apply to the report kind stay empty / -1.
struct ViabilityWitness {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::MatrixXd z;
  Eigen::VectorXd u;
  Eigen::VectorXd value;
  int path = -1;
  int step = -1;
  long node = -1;
};

struct ViabilityReport {
  ViabilityKind kind = ViabilityKind::PathViability;
  long n_samples = 0;
  double worst_margin = 0.0;  ///< negative = violation
  ViabilityWitness worst_witness;
  bool pass = false;
  double tolerance = 0.0;

  nlohmann::json to_json() const;
};

/// Bounded boxes from which the pointwise condition samples (t, x, y, z);
/// controls are drawn from the model's mesh.
struct SampleCloudSpec {
  long n_samples = 10000;
  double t_lo = 0.0, t_hi = 1.0;
  Eigen::VectorXd x_lo, x_hi;
  Eigen::VectorXd y_lo, y_hi;
  double z_lo = -1.0, z_hi = 1.0;  ///< entrywise bounds for the n x d matrix z
};

/// Samples the pointwise inward-drift inequality that is sufficient for the
/// solution to stay in the set: at each sampled tuple the inner product of
/// the outward offset y - proj(y) with the effective driver must not exceed
/// a quarter of the Hessian quadratic form in z sigma plus C d_K^2(y).
/// Reports the worst margin (RHS - LHS) and its witness. Samples whose
/// Hessian estimate lands on the non-smooth set are redrawn, within a total
/// budget of 10x n_samples draws. h <= 0 selects the default step
/// 1e-4 (1 + |y|).
ViabilityReport check_viability_condition(const ConvexSet& set, const Driver& driver,
                                          const CostModel& cost, const DiffusionModel& model,
                                          const SampleCloudSpec& sampler, double C, double h,
                                          std::uint64_t seed, double tolerance = 1e-9);

/// Geometric sweep C in {2^0 .. 2^20}; returns the smallest constant whose
/// report passes, or +infinity when none does.
double search_condition_constant(const ConvexSet& set, const Driver& driver,
                                 const CostModel& cost, const DiffusionModel& model,
                                 const SampleCloudSpec& sampler, double h, std::uint64_t seed,
                                 double tolerance = 1e-9);

/// Pathwise viability of a solved BSDE: worst margin is minus the largest
/// distance of any (path, step) value from the set.
ViabilityReport empirical_viability(const BsdeSolution& solution, const ConvexSet& set,
                                    double eps);

/// Viability of a grid solution: worst margin over all (step, node) values.
ViabilityReport grid_viability(const ValueGrid& values, const ConvexSet& set, double eps);

}  // namespace stodec
