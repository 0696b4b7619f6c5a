#pragma once

#include <cstdint>
#include <cmath>

namespace dcsim {

/// Counter-based random stream. Streams are keyed by (seed, index, tag) so
/// any worker can reconstruct the stream for a given pulse or block without
/// shared state; runs are reproducible independent of the worker count.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t index, uint64_t tag) {
    state_ = mix64(seed ^ 0x6a09e667f3bcc909ull);
    state_ = mix64(state_ ^ index);
    state_ = mix64(state_ ^ tag);
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  /// Exponential(mean) conditioned on being <= cut.
  double exponential_truncated(double mean, double cut) {
    const double w = 1.0 - std::exp(-cut / mean);
    return -mean * std::log1p(-uniform() * w);
  }

  /// Standard normal, Box-Muller with one cached value.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925287 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  /// Poisson by inversion; intended for small and moderate means.
  int poisson(double mu) {
    if (mu <= 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-mu);
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 10000) {
      ++k;
      p *= mu / k;
      cdf += p;
    }
    return k;
  }

  /// Poisson conditioned on k >= 1.
  int poisson_at_least_one(double mu) {
    const double p0 = std::exp(-mu);
    const double u = p0 + uniform() * (1.0 - p0);
    double p = p0;
    double cdf = p0;
    int k = 0;
    while (u > cdf && k < 10000) {
      ++k;
      p *= mu / k;
      cdf += p;
    }
    return k < 1 ? 1 : k;
  }

  /// Number of successes in n fair coin flips. Exact popcount sampling for
  /// small n, rounded normal approximation for large n (used only for
  /// bookkeeping of idle-trigger configuration counters).
  uint64_t binomial_half(uint64_t n) {
    if (n == 0) return 0;
    if (n <= 256) {
      uint64_t s = 0;
      uint64_t left = n;
      while (left >= 64) {
        s += static_cast<uint64_t>(__builtin_popcountll(next_u64()));
        left -= 64;
      }
      if (left > 0) {
        const uint64_t mask = (left == 64) ? ~0ull : ((1ull << left) - 1);
        s += static_cast<uint64_t>(__builtin_popcountll(next_u64() & mask));
      }
      return s;
    }
    const double mean = 0.5 * static_cast<double>(n);
    const double sd = 0.5 * std::sqrt(static_cast<double>(n));
    double v = std::round(mean + sd * normal());
    if (v < 0.0) v = 0.0;
    if (v > static_cast<double>(n)) v = static_cast<double>(n);
    return static_cast<uint64_t>(v);
  }

 private:
  static uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  uint64_t state_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Stream purpose tags. Distinct tags decorrelate streams that share a key.
namespace rng_tag {
inline constexpr uint64_t kEmission = 0x01;
inline constexpr uint64_t kRouting = 0x02;
inline constexpr uint64_t kDetection = 0x03;
inline constexpr uint64_t kQrngNoise = 0x04;
inline constexpr uint64_t kOccupancy = 0x05;
inline constexpr uint64_t kGapBits = 0x06;
inline constexpr uint64_t kCalibration = 0x07;
}  // namespace rng_tag

}  // namespace dcsim
