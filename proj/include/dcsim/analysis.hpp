#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "dcsim/experiment.hpp"
#include "dcsim/stats.hpp"

namespace dcsim {

/// Anticorrelation parameter alpha = N_C * N_T / (N_1 * N_2) with a Poisson
/// error propagated from the three counts. N_C = 0 yields alpha = 0 with the
/// one-count scale as sigma.
struct AlphaResult {
  double alpha = 0.0;
  double sigma = 0.0;
  double n_t = 0.0, n_1 = 0.0, n_2 = 0.0, n_c = 0.0;
};

inline AlphaResult alpha_from_counts(double n_t, double n_1, double n_2,
                                     double n_c) {
  if (n_t <= 0.0 || n_1 <= 0.0 || n_2 <= 0.0)
    throw std::invalid_argument("alpha needs positive trigger/singles counts");
  AlphaResult r;
  r.n_t = n_t;
  r.n_1 = n_1;
  r.n_2 = n_2;
  r.n_c = n_c;
  const double scale = n_t / (n_1 * n_2);
  if (n_c <= 0.0) {
    r.alpha = 0.0;
    r.sigma = scale;  // one coincidence would move alpha by this much
    return r;
  }
  r.alpha = n_c * scale;
  r.sigma = r.alpha * std::sqrt(1.0 / n_c + 1.0 / n_1 + 1.0 / n_2);
  return r;
}

inline AlphaResult alpha(const CountSummary& s) {
  return alpha_from_counts(static_cast<double>(s.n_t),
                           static_cast<double>(s.n_1),
                           static_cast<double>(s.n_2),
                           static_cast<double>(s.n_c));
}

/// Dark-count corrected counts. Singles lose the expected dark hits; the
/// coincidence count loses the expected photon x dark and dark x dark
/// accidentals. Results are floored at zero.
struct CorrectedCounts {
  double n_t = 0.0, n_1 = 0.0, n_2 = 0.0, n_c = 0.0;
};

inline CorrectedCounts correct_for_darks(const CountSummary& s, double pd1,
                                         double pd2) {
  CorrectedCounts c;
  c.n_t = static_cast<double>(s.n_t);
  const double p1 = std::max(0.0, static_cast<double>(s.n_1) / c.n_t - pd1);
  const double p2 = std::max(0.0, static_cast<double>(s.n_2) / c.n_t - pd2);
  c.n_1 = p1 * c.n_t;
  c.n_2 = p2 * c.n_t;
  const double accidental = p1 * pd2 + pd1 * p2 + pd1 * pd2;
  c.n_c = std::max(0.0, static_cast<double>(s.n_c) - accidental * c.n_t);
  return c;
}

inline AlphaResult alpha_corrected(const CountSummary& s, double pd1,
                                   double pd2) {
  const CorrectedCounts c = correct_for_darks(s, pd1, pd2);
  AlphaResult r = alpha_from_counts(c.n_t, c.n_1, c.n_2,
                                    std::max(c.n_c, 0.0));
  // Error bars still follow the raw Poisson counts.
  const double scale = c.n_t / (c.n_1 * c.n_2);
  if (s.n_c > 0)
    r.sigma = r.alpha > 0.0
                  ? r.alpha * std::sqrt(1.0 / static_cast<double>(s.n_c) +
                                        1.0 / c.n_1 + 1.0 / c.n_2)
                  : scale * std::sqrt(static_cast<double>(s.n_c));
  return r;
}

/// Which-way information from the two output rates: |r1 - r2| / (r1 + r2).
inline double which_way_info(double n_1, double n_2) {
  if (n_1 < 0.0 || n_2 < 0.0 || n_1 + n_2 <= 0.0)
    throw std::invalid_argument("which_way_info needs nonnegative counts");
  return std::abs(n_1 - n_2) / (n_1 + n_2);
}

/// Expected-background subtraction for a per-trigger rate, floored at zero.
inline double corrected_rate(double n, double n_t, double dark_prob,
                             double flat_prob = 0.0) {
  if (n_t <= 0.0) throw std::invalid_argument("corrected_rate: n_t <= 0");
  return std::max(0.0, n / n_t - dark_prob - flat_prob);
}

/// Least-squares fit of y = a + b cos(2 phi) + c sin(2 phi).
/// Visibility = sqrt(b^2 + c^2) / a, clamped to [0, 1] with a flag.
struct FringeFit {
  double a = 0.0, b = 0.0, c = 0.0;
  double visibility = 0.0;
  double phase_offset = 0.0;  // radians, fringe maximum at phi = phase_offset
  double rms_residual = 0.0;
  bool clamped = false;
};

inline FringeFit fit_fringe(const std::vector<double>& phases,
                            const std::vector<double>& values,
                            const std::vector<double>& sigmas = {}) {
  const size_t n = phases.size();
  if (values.size() != n || (!sigmas.empty() && sigmas.size() != n))
    throw std::invalid_argument("fit_fringe: size mismatch");
  if (n < 4) throw std::invalid_argument("fit_fringe: need at least 4 points");
  const auto [mn, mx] = std::minmax_element(phases.begin(), phases.end());
  if (*mx - *mn < M_PI / 2.0)
    throw std::invalid_argument("fit_fringe: phase span below pi/2");

  // Normal equations for the 3-parameter linear model.
  double m[3][3] = {};
  double rhs[3] = {};
  for (size_t i = 0; i < n; ++i) {
    const double w =
        sigmas.empty() ? 1.0 : 1.0 / (sigmas[i] * sigmas[i]);
    const double basis[3] = {1.0, std::cos(2.0 * phases[i]),
                             std::sin(2.0 * phases[i])};
    for (int r = 0; r < 3; ++r) {
      rhs[r] += w * basis[r] * values[i];
      for (int s = 0; s < 3; ++s) m[r][s] += w * basis[r] * basis[s];
    }
  }
  // Gauss-Jordan with partial pivoting on the 3x3 system.
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-14)
      throw std::runtime_error("fit_fringe: singular design matrix");
    std::swap(m[col], m[piv]);
    std::swap(rhs[col], rhs[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int s = col; s < 3; ++s) m[r][s] -= f * m[col][s];
      rhs[r] -= f * rhs[col];
    }
  }
  FringeFit fit;
  fit.a = rhs[0] / m[0][0];
  fit.b = rhs[1] / m[1][1];
  fit.c = rhs[2] / m[2][2];

  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double pred = fit.a + fit.b * std::cos(2.0 * phases[i]) +
                        fit.c * std::sin(2.0 * phases[i]);
    ss += (values[i] - pred) * (values[i] - pred);
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(n));

  if (fit.a <= 0.0)
    throw std::runtime_error("fit_fringe: nonpositive mean level");
  fit.visibility = std::sqrt(fit.b * fit.b + fit.c * fit.c) / fit.a;
  if (fit.visibility > 1.0) {
    fit.visibility = 1.0;
    fit.clamped = true;
  }
  fit.phase_offset = 0.5 * std::atan2(fit.c, fit.b);
  return fit;
}

/// Visibility from the extreme points of a sampled fringe.
inline double visibility_minmax(const std::vector<double>& values) {
  if (values.size() < 2)
    throw std::invalid_argument("visibility_minmax: need at least 2 values");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (*mx + *mn <= 0.0)
    throw std::invalid_argument("visibility_minmax: nonpositive sum");
  return (*mx - *mn) / (*mx + *mn);
}

/// Peak areas of a coincidence histogram: counts integrated over half a clock
/// period around each multiple of the period.
struct PeakAreas {
  double central = 0.0;
  std::vector<double> side;  // one entry per signed peak, k = -kmax..-1, 1..kmax
  int side_peaks_per_side = 0;
};

inline PeakAreas peak_areas(const Histogram& h) {
  PeakAreas out;
  const double half = 0.5 * h.clock_period;
  const int kmax = static_cast<int>(std::floor((h.tau_max - half) /
                                               h.clock_period + 1e-9));
  if (kmax < 3)
    throw std::invalid_argument("histogram covers fewer than 3 side peaks");
  out.side_peaks_per_side = kmax;
  std::vector<double> per_k(static_cast<size_t>(2 * kmax) + 1, 0.0);
  for (size_t i = 0; i < h.counts.size(); ++i) {
    const double t = h.bin_center(i);
    const int k = static_cast<int>(std::lround(t / h.clock_period));
    if (std::abs(k) > kmax) continue;
    if (std::abs(t - k * h.clock_period) > half) continue;
    per_k[static_cast<size_t>(k + kmax)] += static_cast<double>(h.counts[i]);
  }
  out.central = per_k[static_cast<size_t>(kmax)];
  for (int k = -kmax; k <= kmax; ++k)
    if (k != 0) out.side.push_back(per_k[static_cast<size_t>(k + kmax)]);
  return out;
}

/// g2(0) as the ratio of the central peak area to the mean side peak area.
struct G2Result {
  double g2 = 0.0;
  double sigma = 0.0;
  double central_area = 0.0;
  double mean_side_area = 0.0;
  int side_peaks = 0;
};

inline G2Result g2_zero(const Histogram& h) {
  const PeakAreas pa = peak_areas(h);
  double side_total = 0.0;
  for (double s : pa.side) side_total += s;
  if (side_total <= 0.0)
    throw std::runtime_error("g2_zero: empty side peaks");
  G2Result r;
  r.side_peaks = pa.side_peaks_per_side;
  r.central_area = pa.central;
  r.mean_side_area = side_total / static_cast<double>(pa.side.size());
  r.g2 = pa.central / r.mean_side_area;
  const double rel_c = pa.central > 0.0 ? 1.0 / pa.central : 1.0;
  r.sigma = (r.g2 > 0.0 ? r.g2 : 1.0 / r.mean_side_area) *
            std::sqrt(rel_c + 1.0 / side_total);
  return r;
}

/// Dark-corrected variant: expected photon x dark and dark x dark accidentals
/// are removed from both the central and the side areas before the ratio.
inline G2Result g2_zero_corrected(const Histogram& h, double pd1, double pd2) {
  const PeakAreas pa = peak_areas(h);
  const double n = static_cast<double>(h.n_triggers);
  const double p1 = std::max(0.0, static_cast<double>(h.n1) / n - pd1);
  const double p2 = std::max(0.0, static_cast<double>(h.n2) / n - pd2);
  const double acc = (p1 * pd2 + pd1 * p2 + pd1 * pd2) * n;
  double side_total = 0.0;
  for (double s : pa.side) side_total += std::max(0.0, s - acc);
  if (side_total <= 0.0)
    throw std::runtime_error("g2_zero_corrected: empty side peaks");
  G2Result r;
  r.side_peaks = pa.side_peaks_per_side;
  r.central_area = std::max(0.0, pa.central - acc);
  r.mean_side_area = side_total / static_cast<double>(pa.side.size());
  r.g2 = r.central_area / r.mean_side_area;
  const double rel_c = pa.central > 0.0 ? 1.0 / pa.central : 1.0;
  r.sigma = (r.g2 > 0.0 ? r.g2 : 1.0 / r.mean_side_area) *
            std::sqrt(rel_c + 1.0 / side_total);
  return r;
}

/// Emitter lifetime from the side-peak profile. Within a side peak the time
/// difference of two independent gated exponential delays has density
/// proportional to exp(-|u|/tau) * (1 - exp(-2 (G - |u|)/tau)) for |u| < G,
/// where G is the gate width. When the per-gate dark probabilities are
/// supplied, the expected photon-dark and dark-dark accidental profiles are
/// subtracted bin by bin before fitting; a flat baseline absorbs the rest.
struct DecayFit {
  double tau = 0.0;
  double amplitude = 0.0;
  double baseline = 0.0;
  double rms_residual = 0.0;
};

inline DecayFit fit_side_decay(const Histogram& h, double gate_width,
                               double pd1 = 0.0, double pd2 = 0.0,
                               double tau_lo = 10.0, double tau_hi = 120.0) {
  // Fold all side peaks onto |u| in [0, G).
  const double half = 0.5 * h.clock_period;
  const int kmax = static_cast<int>(std::floor((h.tau_max - half) /
                                               h.clock_period + 1e-9));
  if (kmax < 1) throw std::invalid_argument("fit_side_decay: no side peaks");
  std::map<int64_t, double> folded;  // key = bin index of |u|
  for (size_t i = 0; i < h.counts.size(); ++i) {
    const double t = h.bin_center(i);
    const int k = static_cast<int>(std::lround(t / h.clock_period));
    if (k == 0 || std::abs(k) > kmax) continue;
    const double u = std::abs(t - k * h.clock_period);
    if (u >= std::min(gate_width, half)) continue;
    folded[static_cast<int64_t>(u / h.bin_width)] +=
        static_cast<double>(h.counts[i]);
  }
  if (folded.size() < 8)
    throw std::runtime_error("fit_side_decay: too few populated bins");
  std::vector<double> us, ys;
  for (const auto& [bin, y] : folded) {
    us.push_back((static_cast<double>(bin) + 0.5) * h.bin_width);
    ys.push_back(y);
  }

  // Accidental pairings with dark counts (uniform inside the gate) are not
  // flat in u and would bias the lifetime: a photon paired with a dark count
  // folds to F(G) - F(u) + F(G - u) with F the gated exponential CDF, and a
  // dark-dark pair folds to the triangle 2 (G - u) / G^2. Both rates follow
  // from the supplied dark probabilities and the recorded singles, so their
  // expected profile is subtracted before the two-parameter fit.
  const double g = gate_width;
  double rate_pd = 0.0, rate_dd = 0.0;  // per trigger pair, per signed peak
  if ((pd1 > 0.0 || pd2 > 0.0) && h.n_triggers > 0) {
    const double nt = static_cast<double>(h.n_triggers);
    const double q1p = std::max(0.0, static_cast<double>(h.n1) / nt - pd1);
    const double q2p = std::max(0.0, static_cast<double>(h.n2) / nt - pd2);
    rate_pd = q1p * pd2 + pd1 * q2p;
    rate_dd = pd1 * pd2;
  }
  const double pairs =
      2.0 * static_cast<double>(kmax) * static_cast<double>(h.n_triggers);

  const auto sse_for = [&](double tau, double* amp_out, double* base_out) {
    const double z = 1.0 - std::exp(-g / tau);  // gated CDF normalization
    // Profile out the two linear parameters for this tau.
    double s_mm = 0.0, s_m1 = 0.0, s_11 = 0.0, s_my = 0.0, s_1y = 0.0;
    std::vector<double> mv(us.size()), yv(us.size());
    for (size_t i = 0; i < us.size(); ++i) {
      const double u = us[i];
      const double m = std::exp(-u / tau) *
                       (1.0 - std::exp(-2.0 * (g - u) / tau));
      const double f_u = (1.0 - std::exp(-u / tau)) / z;
      const double f_gu = (1.0 - std::exp(-(g - u) / tau)) / z;
      const double acc =
          pairs * h.bin_width *
          (rate_pd * (1.0 - f_u + f_gu) / g + rate_dd * 2.0 * (g - u) / (g * g));
      mv[i] = m;
      yv[i] = ys[i] - acc;
      s_mm += m * m;
      s_m1 += m;
      s_11 += 1.0;
      s_my += m * yv[i];
      s_1y += yv[i];
    }
    const double det = s_mm * s_11 - s_m1 * s_m1;
    if (std::abs(det) < 1e-12) return std::numeric_limits<double>::infinity();
    const double amp = (s_my * s_11 - s_m1 * s_1y) / det;
    const double base = (s_mm * s_1y - s_m1 * s_my) / det;
    double sse = 0.0;
    for (size_t i = 0; i < us.size(); ++i) {
      const double r = yv[i] - amp * mv[i] - base;
      sse += r * r;
    }
    if (amp_out) *amp_out = amp;
    if (base_out) *base_out = base;
    return sse;
  };

  // Golden-section search on tau.
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = tau_lo, b = tau_hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = sse_for(x1, nullptr, nullptr);
  double f2 = sse_for(x2, nullptr, nullptr);
  for (int it = 0; it < 200 && b - a > 1e-6; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = sse_for(x1, nullptr, nullptr);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = sse_for(x2, nullptr, nullptr);
    }
  }
  DecayFit fit;
  fit.tau = 0.5 * (a + b);
  const double sse = sse_for(fit.tau, &fit.amplitude, &fit.baseline);
  fit.rms_residual = std::sqrt(sse / static_cast<double>(us.size()));
  return fit;
}

/// Rebuild per-(phase, config) groups from a raw log plus its trigger
/// counters. Used when analyzing logs loaded from disk.
inline std::vector<GroupCounts> group_log(const EventLog& log) {
  std::map<std::pair<double, int>, GroupCounts> groups;
  for (const auto& row : log.counters) {
    auto& g = groups[{row.phase_setpoint, row.config_bit}];
    g.phase_setpoint = row.phase_setpoint;
    g.config_bit = row.config_bit;
    g.counts.n_t += row.n_triggers;
  }
  for (const auto& r : log.records) {
    const auto key = std::make_pair(r.phase_setpoint, int(r.config_bit));
    auto it = groups.find(key);
    if (it == groups.end())
      throw std::runtime_error("log record without matching counter row");
    it->second.counts.n_1 += r.d1;
    it->second.counts.n_2 += r.d2;
    it->second.counts.n_c += r.d1 && r.d2;
  }
  std::vector<GroupCounts> out;
  for (auto& [k, g] : groups) out.push_back(g);
  return out;
}

}  // namespace dcsim
