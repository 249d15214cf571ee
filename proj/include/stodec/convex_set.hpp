#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <vector>

namespace stodec {

/// Finite-difference estimate of the Hessian of the squared distance d_K^2.
///
/// The squared distance to a closed convex set is convex, differentiable,
/// and twice differentiable almost everywhere, with half the Hessian lying
/// between 0 and the identity wherever it exists. `bounds_ok` reports whether
/// the estimate honours those bounds up to a step-proportional tolerance;
/// points where it does not are the (measure-zero) non-smooth set.
struct HessianEstimate {
  Eigen::MatrixXd matrix;  ///< symmetrized: exactly (M + M^T)/2
  double step = 0.0;       ///< finite-difference step h
  Eigen::VectorXd at;      ///< evaluation point
  bool bounds_ok = false;  ///< eigenvalues of matrix/2 within [-10h, 1+10h]
};

/// Result of the mollified squared distance, before and after enforcing the
/// bound 0 <= value <= (d_K(x) + delta)^2.
struct MollifiedEstimate {
  double value = 0.0;        ///< clamped estimate
  double pre_clamp = 0.0;    ///< raw quadrature value
  double upper_bound = 0.0;  ///< (d_K(x) + delta)^2
};

/// A closed convex subset of R^n with an exact nearest-point projection.
///
/// Supported shapes: axis-aligned box, Euclidean ball, half-space with unit
/// normal, nonnegative orthant, the whole space, and finite intersections of
/// those. Intersections are projected with Dykstra's alternating scheme, which
/// converges to the true nearest point (plain alternation only finds *a*
/// point of the intersection).
class ConvexSet {
 public:
  enum class Kind { Box, Ball, HalfSpace, Orthant, Intersection, FullSpace };

  static ConvexSet box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
  static ConvexSet ball(const Eigen::VectorXd& center, double radius);
  /// The set { y : normal . y <= offset }; `normal` must have unit length
  /// within 1e-12.
  static ConvexSet half_space(const Eigen::VectorXd& normal, double offset);
  static ConvexSet orthant(int dim);
  static ConvexSet full_space(int dim);
  /// Members must share a dimension and have nonempty intersection; emptiness
  /// is screened at construction by projecting the origin and requiring the
  /// alternating scheme to converge.
  static ConvexSet intersection(std::vector<ConvexSet> members);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  /// Nearest point of the set. Exact for the analytic shapes; for an
  /// intersection, Dykstra iterations run to tolerance 1e-12 (at most 10^4
  /// sweeps, ConvergenceError beyond that).
  Eigen::VectorXd project(const Eigen::VectorXd& a) const;

  /// Squared Euclidean distance |a - project(a)|^2.
  double distance_sq(const Eigen::VectorXd& a) const;

  double distance(const Eigen::VectorXd& a) const;

  bool contains(const Eigen::VectorXd& a, double tol = 1e-10) const;

  /// Gradient of the squared distance, 2 (y - project(y)). Vanishes on the set.
  Eigen::VectorXd grad_distance_sq(const Eigen::VectorXd& y) const;

  /// Symmetrized central-difference Hessian of distance_sq with step h.
  /// Valid almost everywhere; `bounds_ok` is false at points where the
  /// eigenvalues of half the estimate leave [-10h, 1 + 10h].
  HessianEstimate hessian_distance_sq(const Eigen::VectorXd& y, double h) const;

  /// Smoothed squared distance: the convolution of distance_sq with a C-inf
  /// bump kernel supported on the ball of radius delta, estimated with
  /// n_quad low-discrepancy points and clamped to [0, (d_K(x)+delta)^2].
  /// Deterministic for a fixed seed.
  double mollified_distance_sq(const Eigen::VectorXd& x, double delta, int n_quad,
                               std::uint64_t seed) const;
  MollifiedEstimate mollified_distance_sq_detail(const Eigen::VectorXd& x, double delta,
                                                 int n_quad, std::uint64_t seed) const;

  nlohmann::json to_json() const;
  static ConvexSet from_json(const nlohmann::json& j);

  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }
  const Eigen::VectorXd& center() const { return center_; }
  double radius() const { return radius_; }
  const Eigen::VectorXd& normal() const { return normal_; }
  double offset() const { return offset_; }
  const std::vector<ConvexSet>& members() const { return members_; }

 private:
  ConvexSet() = default;

  void require_dim(const Eigen::VectorXd& a, const char* op) const;
  Eigen::VectorXd project_analytic(const Eigen::VectorXd& a) const;
  static Eigen::VectorXd project_dykstra(const std::vector<ConvexSet>& members,
                                         const Eigen::VectorXd& a, double tol,
                                         int max_sweeps);

  Kind kind_ = Kind::FullSpace;
  int dim_ = 0;
  Eigen::VectorXd lo_, hi_;       // Box
  Eigen::VectorXd center_;        // Ball
  double radius_ = 0.0;           // Ball
  Eigen::VectorXd normal_;        // HalfSpace
  double offset_ = 0.0;           // HalfSpace
  std::vector<ConvexSet> members_;  // Intersection
};

}  // namespace stodec
