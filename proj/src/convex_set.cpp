#include "stodec/convex_set.hpp"

#include <cmath>
#include <utility>

#include "stodec/errors.hpp"
#include "stodec/rng.hpp"

namespace stodec {

namespace {
constexpr double kDykstraTol = 1e-12;
constexpr int kDykstraMaxSweeps = 10000;

double bump_weight(double r_sq) {
  return r_sq < 1.0 ? std::exp(-1.0 / (1.0 - r_sq)) : 0.0;
}
}  // namespace

ConvexSet ConvexSet::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw InvalidArgument("ConvexSet::box: lo and hi must be nonempty and equal-sized");
  if ((lo.array() > hi.array()).any())
    throw InvalidArgument("ConvexSet::box: lo must be <= hi componentwise");
  ConvexSet s;
  s.kind_ = Kind::Box;
  s.dim_ = static_cast<int>(lo.size());
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

ConvexSet ConvexSet::ball(const Eigen::VectorXd& center, double radius) {
  if (center.size() == 0) throw InvalidArgument("ConvexSet::ball: empty center");
  if (!(radius > 0.0)) throw InvalidArgument("ConvexSet::ball: radius must be positive");
  ConvexSet s;
  s.kind_ = Kind::Ball;
  s.dim_ = static_cast<int>(center.size());
  s.center_ = center;
  s.radius_ = radius;
  return s;
}

ConvexSet ConvexSet::half_space(const Eigen::VectorXd& normal, double offset) {
  if (normal.size() == 0) throw InvalidArgument("ConvexSet::half_space: empty normal");
  if (std::abs(normal.norm() - 1.0) > 1e-12)
    throw InvalidArgument("ConvexSet::half_space: normal must have unit length (within 1e-12)");
  ConvexSet s;
  s.kind_ = Kind::HalfSpace;
  s.dim_ = static_cast<int>(normal.size());
  s.normal_ = normal;
  s.offset_ = offset;
  return s;
}

ConvexSet ConvexSet::orthant(int dim) {
  if (dim < 1) throw InvalidArgument("ConvexSet::orthant: dim must be positive");
  ConvexSet s;
  s.kind_ = Kind::Orthant;
  s.dim_ = dim;
  return s;
}

ConvexSet ConvexSet::full_space(int dim) {
  if (dim < 1) throw InvalidArgument("ConvexSet::full_space: dim must be positive");
  ConvexSet s;
  s.kind_ = Kind::FullSpace;
  s.dim_ = dim;
  return s;
}

ConvexSet ConvexSet::intersection(std::vector<ConvexSet> members) {
  if (members.empty()) throw InvalidArgument("ConvexSet::intersection: needs at least one member");
  const int dim = members.front().dim();
  for (const auto& m : members)
    if (m.dim() != dim)
      throw DimensionError("ConvexSet::intersection: members must share a dimension");
  // Emptiness screen: the alternating scheme stalls on disjoint members.
  project_dykstra(members, Eigen::VectorXd::Zero(dim), kDykstraTol, kDykstraMaxSweeps);
  ConvexSet s;
  s.kind_ = Kind::Intersection;
  s.dim_ = dim;
  s.members_ = std::move(members);
  return s;
}

void ConvexSet::require_dim(const Eigen::VectorXd& a, const char* op) const {
  if (static_cast<int>(a.size()) != dim_)
    throw DimensionError(std::string(op) + ": point has dimension " + std::to_string(a.size()) +
                         ", set has dimension " + std::to_string(dim_));
}

Eigen::VectorXd ConvexSet::project_analytic(const Eigen::VectorXd& a) const {
  switch (kind_) {
    case Kind::FullSpace:
      return a;
    case Kind::Box:
      return a.cwiseMax(lo_).cwiseMin(hi_);
    case Kind::Orthant:
      return a.cwiseMax(0.0);
    case Kind::Ball: {
      const Eigen::VectorXd r = a - center_;
      const double len = r.norm();
      if (len <= radius_) return a;
      return center_ + (radius_ / len) * r;
    }
    case Kind::HalfSpace: {
      const double excess = normal_.dot(a) - offset_;
      if (excess <= 0.0) return a;
      return a - excess * normal_;
    }
    case Kind::Intersection:
      return project_dykstra(members_, a, kDykstraTol, kDykstraMaxSweeps);
  }
  throw Error("ConvexSet: unknown kind");
}

Eigen::VectorXd ConvexSet::project_dykstra(const std::vector<ConvexSet>& members,
                                           const Eigen::VectorXd& a, double tol,
                                           int max_sweeps) {
  const std::size_t m = members.size();
  Eigen::VectorXd x = a;
  std::vector<Eigen::VectorXd> corrections(m, Eigen::VectorXd::Zero(a.size()));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const Eigen::VectorXd target = x + corrections[i];
      const Eigen::VectorXd y = members[i].project(target);
      const Eigen::VectorXd new_correction = target - y;
      change_sq += (new_correction - corrections[i]).squaredNorm();
      corrections[i] = new_correction;
      x = y;
    }
    // Robust stopping rule of Birgin & Raydan (SISC 26(4), 2005): the summed
    // correction increments vanish exactly when iterates have converged.
    if (std::sqrt(change_sq) <= tol) return x;
  }
  throw ConvergenceError(
      "ConvexSet: Dykstra projection did not reach tolerance " + std::to_string(tol) + " in " +
      std::to_string(max_sweeps) + " sweeps (intersection may be empty)");
}

Eigen::VectorXd ConvexSet::project(const Eigen::VectorXd& a) const {
  require_dim(a, "project");
  return project_analytic(a);
}

double ConvexSet::distance_sq(const Eigen::VectorXd& a) const {
  require_dim(a, "distance_sq");
  return (a - project_analytic(a)).squaredNorm();
}

double ConvexSet::distance(const Eigen::VectorXd& a) const {
  return std::sqrt(distance_sq(a));
}

bool ConvexSet::contains(const Eigen::VectorXd& a, double tol) const {
  return distance(a) <= tol;
}

Eigen::VectorXd ConvexSet::grad_distance_sq(const Eigen::VectorXd& y) const {
  require_dim(y, "grad_distance_sq");
  return 2.0 * (y - project_analytic(y));
}

HessianEstimate ConvexSet::hessian_distance_sq(const Eigen::VectorXd& y, double h) const {
  require_dim(y, "hessian_distance_sq");
  if (!(h > 0.0)) throw InvalidArgument("hessian_distance_sq: step h must be positive");

  const int n = dim_;
  Eigen::MatrixXd m(n, n);
  const double f0 = distance_sq(y);
  Eigen::VectorXd probe = y;
  for (int i = 0; i < n; ++i) {
    probe[i] = y[i] + h;
    const double fp = distance_sq(probe);
    probe[i] = y[i] - h;
    const double fm = distance_sq(probe);
    probe[i] = y[i];
    m(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      probe[i] = y[i] + h;
      probe[j] = y[j] + h;
      const double fpp = distance_sq(probe);
      probe[j] = y[j] - h;
      const double fpm = distance_sq(probe);
      probe[i] = y[i] - h;
      const double fmm = distance_sq(probe);
      probe[j] = y[j] + h;
      const double fmp = distance_sq(probe);
      probe[i] = y[i];
      probe[j] = y[j];
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  if (!m.allFinite())
    throw NonFiniteError("hessian_distance_sq: non-finite difference quotient");

  HessianEstimate est;
  est.matrix = 0.5 * (m + m.transpose());
  est.step = h;
  est.at = y;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * est.matrix,
                                                     Eigen::EigenvaluesOnly);
  const double tol = 10.0 * h;
  est.bounds_ok = eig.eigenvalues().minCoeff() >= -tol &&
                  eig.eigenvalues().maxCoeff() <= 1.0 + tol;
  return est;
}

MollifiedEstimate ConvexSet::mollified_distance_sq_detail(const Eigen::VectorXd& x, double delta,
                                                          int n_quad,
                                                          std::uint64_t seed) const {
  require_dim(x, "mollified_distance_sq");
  if (!(delta > 0.0)) throw InvalidArgument("mollified_distance_sq: delta must be positive");
  if (n_quad < 1) throw InvalidArgument("mollified_distance_sq: n_quad must be >= 1");

  MollifiedEstimate est;
  const double dist = distance(x);
  est.upper_bound = (dist + delta) * (dist + delta);

  // Self-normalized quadrature over the kernel support: the kernel's global
  // normalization constant cancels, and every evaluation of d_K^2 inside the
  // delta-ball is already within the bound, so the weighted mean is too.
  KroneckerSequence seq(dim_, seed);
  Eigen::VectorXd p(dim_);
  Eigen::VectorXd shifted(dim_);
  double weight_sum = 0.0;
  double value_sum = 0.0;
  for (int q = 0; q < n_quad; ++q) {
    seq.point(static_cast<std::uint64_t>(q), p.data());
    p = 2.0 * p.array() - 1.0;  // cube [-1, 1)^n
    const double w = bump_weight(p.squaredNorm());
    if (w == 0.0) continue;
    shifted = x - delta * p;
    value_sum += w * distance_sq(shifted);
    weight_sum += w;
  }
  est.pre_clamp = weight_sum > 0.0 ? value_sum / weight_sum : distance_sq(x);
  est.value = std::min(std::max(est.pre_clamp, 0.0), est.upper_bound);
  return est;
}

double ConvexSet::mollified_distance_sq(const Eigen::VectorXd& x, double delta, int n_quad,
                                        std::uint64_t seed) const {
  return mollified_distance_sq_detail(x, delta, n_quad, seed).value;
}

nlohmann::json ConvexSet::to_json() const {
  nlohmann::json j;
  switch (kind_) {
    case Kind::Box:
      j["kind"] = "box";
      j["lo"] = std::vector<double>(lo_.data(), lo_.data() + lo_.size());
      j["hi"] = std::vector<double>(hi_.data(), hi_.data() + hi_.size());
      break;
    case Kind::Ball:
      j["kind"] = "ball";
      j["center"] = std::vector<double>(center_.data(), center_.data() + center_.size());
      j["radius"] = radius_;
      break;
    case Kind::HalfSpace:
      j["kind"] = "halfspace";
      j["normal"] = std::vector<double>(normal_.data(), normal_.data() + normal_.size());
      j["offset"] = offset_;
      break;
    case Kind::Orthant:
      j["kind"] = "orthant";
      j["dim"] = dim_;
      break;
    case Kind::FullSpace:
      j["kind"] = "fullspace";
      j["dim"] = dim_;
      break;
    case Kind::Intersection: {
      j["kind"] = "intersection";
      nlohmann::json members = nlohmann::json::array();
      for (const auto& m : members_) members.push_back(m.to_json());
      j["members"] = members;
      break;
    }
  }
  return j;
}

namespace {
Eigen::VectorXd vec_from_json(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("ConvexSet: missing key '") + key + "'");
  const auto& arr = j.at(key);
  if (!arr.is_array()) throw ConfigError(std::string("ConvexSet: '") + key + "' must be an array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError("ConvexSet: unknown key '" + it.key() + "'");
  }
}
}  // namespace

ConvexSet ConvexSet::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("ConvexSet: expected an object with a 'kind' key");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "box") {
    require_keys(j, {"kind", "lo", "hi"});
    return box(vec_from_json(j, "lo"), vec_from_json(j, "hi"));
  }
  if (kind == "ball") {
    require_keys(j, {"kind", "center", "radius"});
    return ball(vec_from_json(j, "center"), j.at("radius").get<double>());
  }
  if (kind == "halfspace") {
    require_keys(j, {"kind", "normal", "offset"});
    return half_space(vec_from_json(j, "normal"), j.at("offset").get<double>());
  }
  if (kind == "orthant") {
    require_keys(j, {"kind", "dim"});
    return orthant(j.at("dim").get<int>());
  }
  if (kind == "fullspace") {
    require_keys(j, {"kind", "dim"});
    return full_space(j.at("dim").get<int>());
  }
  if (kind == "intersection") {
    require_keys(j, {"kind", "members"});
    std::vector<ConvexSet> members;
    for (const auto& mj : j.at("members")) members.push_back(from_json(mj));
    return intersection(std::move(members));
  }
  throw ConfigError("ConvexSet: unknown kind '" + kind + "'");
}

}  // namespace stodec
