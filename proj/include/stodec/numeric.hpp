#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>

namespace stodec {

/// Compensated (Kahan) summation. Used wherever an iterated mean must stay
/// exact to a few ulps across many backward steps.
inline double kahan_sum(const double* data, std::size_t n) {
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = data[i] - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

inline double kahan_mean(const double* data, std::size_t n) {
  return n == 0 ? 0.0 : kahan_sum(data, n) / static_cast<double>(n);
}

inline double kahan_mean(const Eigen::VectorXd& v) {
  return kahan_mean(v.data(), static_cast<std::size_t>(v.size()));
}

/// Column means of a matrix via compensated summation.
inline Eigen::VectorXd kahan_col_means(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[c] = kahan_mean(m.col(c));
  return out;
}

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.allFinite();
}

/// Sample standard deviation (unbiased); 0 for fewer than two points.
inline double sample_std(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double mean = kahan_mean(v);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = v[i] - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n - 1));
}

}  // namespace stodec
