#pragma once

#include <cmath>
#include <stdexcept>

#include "dcsim/analysis.hpp"
#include "dcsim/config.hpp"
#include "dcsim/experiment.hpp"

namespace dcsim {

/// Calibration targets: a measured per-detector singles rate (dark counts
/// included) and a dark-corrected anticorrelation level.
struct CalibrationTargets {
  double singles_rate_hz = 700.0;  // per detector, darks included
  double target_alpha = 0.12;      // dark-corrected
};

struct CalibrationResult {
  double p_emit = 0.0;
  double mu_bg = 0.0;
  double background_fraction = 0.0;  // of the photon singles rate
  double achieved_alpha = -1.0;      // filled by the refine step only
};

/// Closed-form inversion. With per-detector signal probability a and Poisson
/// background mean b, the corrected anticorrelation is
///   alpha = (2ab + b^2) / (a + b)^2 = 1 - (1 - x)^2,  x = b / (a + b),
/// so x = 1 - sqrt(1 - alpha). The measured singles probability per trigger
/// is a + b plus the mean dark probability.
inline CalibrationResult calibrate(const CalibrationTargets& targets,
                                   const RunConfig& base) {
  if (targets.singles_rate_hz <= 0.0)
    throw std::invalid_argument("calibrate: singles rate must be positive");
  if (targets.target_alpha < 0.0 || targets.target_alpha >= 1.0)
    throw std::invalid_argument("calibrate: target alpha must be in [0, 1)");

  const double period_s = base.timing.clock_period * 1e-9;
  const double g =
      1.0 - std::exp(-base.timing.gate_width / base.source.tau_sp);
  const double eff = base.detector.efficiency;
  const double pd_mean =
      0.5 * (base.detector.dark_prob(1) + base.detector.dark_prob(2));

  const double p_meas = targets.singles_rate_hz * period_s;
  const double p_photon = p_meas - pd_mean;
  if (p_photon <= 0.0)
    throw std::runtime_error("calibrate: dark rate exceeds the singles rate");

  const double x = 1.0 - std::sqrt(1.0 - targets.target_alpha);
  CalibrationResult r;
  r.background_fraction = x;
  r.p_emit = 2.0 * (1.0 - x) * p_photon / (g * eff);
  r.mu_bg = 2.0 * x * p_photon / (g * eff);
  if (r.p_emit > 1.0)
    throw std::runtime_error("calibrate: required emission probability > 1");
  return r;
}

/// Monte Carlo refinement of mu_bg. Runs the counting simulation in the open
/// configuration and bisects a scale factor on mu_bg until the measured
/// corrected alpha matches the target within tol, keeping the total photon
/// singles rate fixed. Deterministic for a fixed seed.
inline CalibrationResult calibrate_refined(const CalibrationTargets& targets,
                                           const RunConfig& base,
                                           uint64_t n_triggers,
                                           uint64_t seed,
                                           double tol = 0.005,
                                           int max_iters = 24) {
  CalibrationResult r = calibrate(targets, base);
  const double total = r.p_emit + r.mu_bg;  // keep singles fixed

  const auto measure = [&](double mu) {
    RunConfig c = base;
    c.mode = RunMode::forced_open;
    c.driver = Driver::sparse;
    c.log_records = false;
    c.n_triggers = n_triggers;
    c.seed = seed;
    c.phase_schedule.clear();
    c.source.mu_bg = mu;
    c.source.p_emit = total - mu;
    const RunResult res = run(c);
    const CountSummary s = res.total();
    return alpha_corrected(s, c.detector.dark_prob(1), c.detector.dark_prob(2))
        .alpha;
  };

  if (targets.target_alpha == 0.0) {
    r.mu_bg = 0.0;
    r.p_emit = total;
    r.achieved_alpha = measure(0.0);
    return r;
  }

  double lo = 0.0, hi = std::min(total, 4.0 * r.mu_bg);
  double mu = r.mu_bg;
  double achieved = measure(mu);
  for (int i = 0; i < max_iters && std::abs(achieved - targets.target_alpha) >
                                       tol; ++i) {
    if (achieved < targets.target_alpha) lo = mu;
    else hi = mu;
    mu = 0.5 * (lo + hi);
    achieved = measure(mu);
  }
  if (std::abs(achieved - targets.target_alpha) > tol)
    throw std::runtime_error("calibrate: refinement did not converge");
  r.mu_bg = mu;
  r.p_emit = total - mu;
  r.achieved_alpha = achieved;
  return r;
}

}  // namespace dcsim
