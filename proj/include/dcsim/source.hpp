#pragma once

#include <stdexcept>
#include <vector>

#include "dcsim/rng.hpp"

namespace dcsim {

enum class EmitterMode { single_photon, poissonian };

/// Triggered-source statistics. p_emit and mu_bg are lumped post-collection
/// quantities: collection optics, filters and propagation losses are folded
/// in, since only net rates are observable.
// Default emission/background levels from the bench calibration: 700
// singles per second per detector (dark counts included) at a 238 ns clock
// and a 40 ns gate, split so the dark-corrected anticorrelation is 0.12.
inline constexpr double kCalibratedPEmit = 5.189589856887184e-4;
inline constexpr double kCalibratedMuBg = 3.42531518513603e-5;

struct EmitterParams {
  double tau_sp = 44.5;  // excited-state lifetime, ns
  double p_emit = kCalibratedPEmit;  // P(trigger yields one collected photon)
  double mu_bg = kCalibratedMuBg;    // mean collected background per trigger
  EmitterMode mode = EmitterMode::single_photon;
  double poisson_mean = 0.0;  // used in poissonian mode

  void validate() const {
    if (!(tau_sp > 0.0)) throw std::domain_error("tau_sp must be positive");
    if (!(p_emit >= 0.0 && p_emit <= 1.0))
      throw std::domain_error("p_emit must be in [0, 1]");
    if (!(mu_bg >= 0.0)) throw std::domain_error("mu_bg must be >= 0");
    if (mode == EmitterMode::poissonian && !(poisson_mean >= 0.0))
      throw std::domain_error("poisson_mean must be >= 0");
  }
};

/// Photon content of one trigger. delays[0..n_signal-1] belong to the signal
/// photon, the rest to background photons; all are measured from the trigger.
struct EmissionEvent {
  int n_signal = 0;
  int n_background = 0;
  std::vector<double> delays;  // ns, one per photon
};

/// Sample the photon content of one trigger. Every photon delay follows the
/// same exponential decay law: background light here is pump-synchronous
/// (photoluminescence and Raman), so it shares the signal's time profile.
inline EmissionEvent emit(const EmitterParams& params, RngStream& rng) {
  EmissionEvent ev;
  if (params.mode == EmitterMode::single_photon) {
    ev.n_signal = rng.bernoulli(params.p_emit) ? 1 : 0;
    ev.n_background = rng.poisson(params.mu_bg);
  } else {
    ev.n_signal = 0;
    ev.n_background = rng.poisson(params.poisson_mean);
  }
  const int total = ev.n_signal + ev.n_background;
  ev.delays.reserve(total);
  for (int i = 0; i < total; ++i)
    ev.delays.push_back(rng.exponential(params.tau_sp));
  return ev;
}

}  // namespace dcsim
