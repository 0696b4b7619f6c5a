#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dcsim/rng.hpp"
#include "dcsim/timeline.hpp"

namespace dcsim {

/// Gated avalanche-photodiode model. One lumped efficiency per arriving
/// photon; dark counts are Poissonian and saturate, like real hits, at one
/// registration per gate.
struct DetectorParams {
  double efficiency = 1.0;     // per arriving photon
  double dark_rate_d1 = 59.0;  // s^-1, free-running
  double dark_rate_d2 = 70.0;  // s^-1
  double gate_width = 40.0;    // ns

  void validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
      throw std::domain_error("efficiency must be in [0, 1]");
    if (!(dark_rate_d1 >= 0.0 && dark_rate_d2 >= 0.0))
      throw std::domain_error("dark rates must be >= 0");
    if (!(gate_width > 0.0)) throw std::domain_error("gate_width must be > 0");
  }

  /// Probability that a detector fires from dark counts within one gate.
  double dark_prob(int detector) const {
    const double rate = detector == 1 ? dark_rate_d1 : dark_rate_d2;
    return 1.0 - std::exp(-rate * gate_width * 1e-9);
  }
};

struct Arrival {
  int detector = 0;   // 1 or 2
  double time = 0.0;  // absolute ns
};

struct GateOutcome {
  bool d1_hit = false;
  bool d2_hit = false;
  bool coincidence = false;
};

/// Register arrivals against one gate. An arrival counts iff it falls inside
/// the gate window and survives a Bernoulli(efficiency) draw; darks are added
/// per detector. Draw order: arrivals in list order, then D1 dark, D2 dark.
inline GateOutcome detect(const std::vector<Arrival>& arrivals,
                          const PulseSchedule& schedule,
                          const DetectorParams& params, RngStream& rng) {
  params.validate();
  GateOutcome out;
  for (const auto& a : arrivals) {
    if (a.time < schedule.gate_window.start || a.time > schedule.gate_window.end)
      continue;
    if (!rng.bernoulli(params.efficiency)) continue;
    if (a.detector == 1) out.d1_hit = true;
    else if (a.detector == 2) out.d2_hit = true;
  }
  if (rng.bernoulli(params.dark_prob(1))) out.d1_hit = true;
  if (rng.bernoulli(params.dark_prob(2))) out.d2_hit = true;
  out.coincidence = out.d1_hit && out.d2_hit;
  return out;
}

}  // namespace dcsim
