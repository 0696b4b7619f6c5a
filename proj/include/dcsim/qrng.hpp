#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dcsim/rng.hpp"

namespace dcsim {

/// Shotnoise QRNG model: a stationary Gauss-Markov noise process sampled by a
/// zero-level comparator at the clock rate. The optional oscillation term
/// reproduces the few-percent short-lag anticorrelation seen in the hardware;
/// it is off by default.
struct QrngParams {
  double corr_time = 60.0;      // ns, exponential autocorrelation time
  double sample_period = 238.0;  // ns
  double osc_amplitude = 0.0;    // in [0, 1), weight of the oscillation term
  double osc_period = 800.0;     // ns
  double osc_damping = 250.0;    // ns, decay time of the oscillation envelope

  void validate() const {
    if (!(corr_time > 0.0)) throw std::domain_error("corr_time must be > 0");
    if (!(sample_period > 0.0))
      throw std::domain_error("sample_period must be > 0");
    if (!(osc_amplitude >= 0.0 && osc_amplitude < 1.0))
      throw std::domain_error("osc_amplitude must be in [0, 1)");
    if (osc_amplitude > 0.0 && !(osc_period > 0.0 && osc_damping > 0.0))
      throw std::domain_error("oscillation term needs positive period/damping");
  }

  /// Autocovariance of the noise value at lag dt (unit variance).
  double autocovariance(double dt) const {
    const double base = std::exp(-std::abs(dt) / corr_time);
    if (osc_amplitude <= 0.0) return base;
    const double osc = std::exp(-std::abs(dt) / osc_damping) *
                       std::cos(2.0 * M_PI * dt / osc_period);
    return (1.0 - osc_amplitude) * base + osc_amplitude * osc;
  }

  /// Comparator-bit autocorrelation implied by the Gaussian orthant law:
  /// r_bit = (2/pi) asin(rho) at the given lag.
  double bit_autocorrelation(double dt) const {
    return 2.0 / M_PI * std::asin(autocovariance(dt));
  }
};

/// State of the noise process: an Ornstein-Uhlenbeck component plus a complex
/// OU component whose real part carries the damped-cosine autocovariance.
struct NoiseState {
  double x = 0.0;
  double zr = 0.0;
  double zi = 0.0;
};

inline NoiseState init_noise_stationary(const QrngParams& params,
                                        RngStream& rng) {
  params.validate();
  NoiseState s;
  s.x = rng.normal();
  s.zr = rng.normal() * std::sqrt(0.5);
  s.zi = rng.normal() * std::sqrt(0.5);
  return s;
}

/// Advance the stationary process by dt. Exact for any step size, so idle
/// stretches can be skipped in one jump.
inline void advance_noise(NoiseState& s, double dt, const QrngParams& params,
                          RngStream& rng) {
  const double rho = std::exp(-dt / params.corr_time);
  s.x = rho * s.x + std::sqrt(1.0 - rho * rho) * rng.normal();
  if (params.osc_amplitude > 0.0) {
    const double r = std::exp(-dt / params.osc_damping);
    const double a = 2.0 * M_PI * dt / params.osc_period;
    const double c = std::cos(a), sn = std::sin(a);
    const double zr = r * (c * s.zr - sn * s.zi);
    const double zi = r * (sn * s.zr + c * s.zi);
    const double sigma = std::sqrt(0.5 * (1.0 - r * r));
    s.zr = zr + sigma * rng.normal();
    s.zi = zi + sigma * rng.normal();
  }
}

inline double noise_value(const NoiseState& s, const QrngParams& params) {
  if (params.osc_amplitude <= 0.0) return s.x;
  return std::sqrt(1.0 - params.osc_amplitude) * s.x +
         std::sqrt(2.0 * params.osc_amplitude) * s.zr;
}

/// Advance one sample period and compare to zero. An exact zero (measure-zero
/// event) is broken by a fresh fair bit.
inline int sample_bit(NoiseState& s, const QrngParams& params, RngStream& rng) {
  advance_noise(s, params.sample_period, params, rng);
  const double v = noise_value(s, params);
  if (v == 0.0) return rng.next_u64() & 1 ? 1 : 0;
  return v > 0.0 ? 1 : 0;
}

struct BitSequence {
  std::vector<uint8_t> bits;
  double sample_period = 238.0;  // ns
};

inline BitSequence generate_bits(const QrngParams& params, size_t n,
                                 uint64_t seed) {
  RngStream rng(seed, 0, rng_tag::kQrngNoise);
  NoiseState s = init_noise_stationary(params, rng);
  BitSequence seq;
  seq.sample_period = params.sample_period;
  seq.bits.reserve(n);
  for (size_t i = 0; i < n; ++i)
    seq.bits.push_back(static_cast<uint8_t>(sample_bit(s, params, rng)));
  return seq;
}

/// Normalized autocorrelation r(0..max_lag) of a bit sequence.
inline std::vector<double> autocorrelation(const BitSequence& seq,
                                           size_t max_lag) {
  const size_t n = seq.bits.size();
  if (n == 0 || n <= max_lag)
    throw std::invalid_argument("sequence shorter than max_lag");
  double mean = 0.0;
  for (uint8_t b : seq.bits) mean += b;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (uint8_t b : seq.bits) c0 += (b - mean) * (b - mean);
  if (c0 == 0.0) throw std::runtime_error("zero-variance bit sequence");
  std::vector<double> r(max_lag + 1);
  r[0] = 1.0;
  for (size_t k = 1; k <= max_lag; ++k) {
    double c = 0.0;
    for (size_t i = 0; i + k < n; ++i)
      c += (seq.bits[i] - mean) * (seq.bits[i + k] - mean);
    r[k] = c / c0;
  }
  return r;
}

/// Exponential fit of the empirical autocovariance of noise samples taken at
/// fixed spacing; returns the decay constant in ns.
inline double estimate_corr_time(const std::vector<double>& samples,
                                 double spacing_ns) {
  const size_t n = samples.size();
  if (n < 10000) throw std::invalid_argument("need at least 1e4 samples");
  if (!(spacing_ns > 0.0)) throw std::invalid_argument("bad sample spacing");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : samples) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  if (c0 == 0.0) throw std::runtime_error("constant sample sequence");

  // Log-linear least squares over lags with autocovariance above 10% of c0.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t used = 0;
  const size_t max_lag = n / 2;
  for (size_t k = 1; k <= max_lag; ++k) {
    double c = 0.0;
    for (size_t i = 0; i + k < n; ++i)
      c += (samples[i] - mean) * (samples[i + k] - mean);
    c /= static_cast<double>(n - k);
    const double rho = c / c0;
    if (rho < 0.1) break;
    const double x = static_cast<double>(k) * spacing_ns;
    const double y = std::log(rho);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used < 3) throw std::runtime_error("autocovariance decays too fast for a fit");
  const double denom = used * sxx - sx * sx;
  if (denom == 0.0) throw std::runtime_error("degenerate autocovariance fit");
  const double slope = (used * sxy - sx * sy) / denom;
  if (!(slope < 0.0)) throw std::runtime_error("non-decaying autocovariance");
  return -1.0 / slope;
}

/// Direct noise sampling at fixed spacing (the 10 ns diagnostic mode).
inline std::vector<double> sample_noise(const QrngParams& params, size_t n,
                                        double spacing_ns, uint64_t seed) {
  QrngParams p = params;
  p.validate();
  RngStream rng(seed, 1, rng_tag::kQrngNoise);
  NoiseState s = init_noise_stationary(p, rng);
  std::vector<double> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    advance_noise(s, spacing_ns, p, rng);
    out.push_back(noise_value(s, p));
  }
  return out;
}

}  // namespace dcsim
