#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace stodec {

/// SplitMix64 finalizer. Bijective on 64-bit words; the avalanche stage of
/// the counter-based generator below.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Counter-based random stream keyed by (seed, stream_id).
///
/// Draw i of stream s is mix64(key(seed, s) + i * gamma), so a stream's
/// output depends only on (seed, stream_id, draw index) and never on other
/// streams or on scheduling. One stream per Monte Carlo path / sample makes
/// parallel runs bitwise identical to serial ones.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id)
      : key_(mix64(mix64(seed + 0x9E3779B97F4A7C15ull) ^
                   mix64(stream_id + 0xD1B54A32D192ED03ull))) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ull); }

  /// Uniform draw in (0, 1].
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Uniform draw in [lo, hi].
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  /// Standard normal draw (Box-Muller, pairs cached).
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.28318530717958647692528676655900577 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Additive-recurrence low-discrepancy sequence on [0,1)^dim.
///
/// Uses the generalized golden ratio (root of x^(dim+1) = x + 1) for the
/// step vector; the seed only rotates the starting offset, so two seeds give
/// shifted lattices of the same quality.
class KroneckerSequence {
 public:
  KroneckerSequence(int dim, std::uint64_t seed) : alpha_(dim), offset_(dim) {
    double phi = 1.5;
    for (int it = 0; it < 64; ++it) {
      // Newton step for x^(dim+1) - x - 1 = 0.
      double num = std::pow(phi, dim + 1) - phi - 1.0;
      double den = (dim + 1) * std::pow(phi, dim) - 1.0;
      phi -= num / den;
    }
    CounterRng rng(seed, 0x4c44u);
    double inv = 1.0 / phi;
    double a = 1.0;
    for (int i = 0; i < dim; ++i) {
      a *= inv;
      alpha_[i] = a - std::floor(a);
      offset_[i] = rng.next_uniform();
    }
  }

  int dim() const { return static_cast<int>(alpha_.size()); }

  /// Writes point j into out[0..dim).
  void point(std::uint64_t j, double* out) const {
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      double v = offset_[i] + static_cast<double>(j + 1) * alpha_[i];
      out[i] = v - std::floor(v);
    }
  }

 private:
  std::vector<double> alpha_;
  std::vector<double> offset_;
};

}  // namespace stodec
