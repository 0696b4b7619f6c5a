#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dcsim {

inline constexpr double kSpeedOfLight = 0.299792458;  // m per ns

/// Per-trigger schedule constants. The random choice is drawn on the trigger,
/// the EOM commutes while the photon is in flight, and the detection gate
/// opens one time-of-flight after the trigger.
struct TimingParams {
  double clock_period = 238.0;       // ns
  double flight_time = 160.0;        // ns
  double gate_width = 40.0;          // ns
  double eom_commute_start = 85.0;   // ns after trigger
  double eom_commute_width = 40.0;   // ns
  double interferometer_length = 48.0;  // m
  double jitter_sigma = 0.0;         // ns, optional, off by default

  void validate() const {
    if (!(gate_width > 0.0)) throw std::domain_error("gate_width must be > 0");
    if (!(clock_period > 0.0))
      throw std::domain_error("clock_period must be > 0");
    const double nominal = interferometer_length / kSpeedOfLight;
    if (std::abs(flight_time - nominal) > 0.01 * nominal)
      throw std::domain_error(
          "flight_time must match interferometer_length/c within 1%");
    if (eom_commute_start + eom_commute_width > flight_time)
      throw std::domain_error("EOM must settle before the gate opens");
    // One pulse in flight at a time.
    if (!(flight_time < clock_period))
      throw std::domain_error("flight_time must be below the clock period");
  }
};

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
};

struct PulseSchedule {
  double trigger_time = 0.0;
  double qrng_draw_time = 0.0;
  TimeWindow eom_window;
  TimeWindow gate_window;
};

inline PulseSchedule build_schedule(uint64_t n, const TimingParams& params) {
  params.validate();
  PulseSchedule s;
  s.trigger_time = static_cast<double>(n) * params.clock_period;
  s.qrng_draw_time = s.trigger_time;
  s.eom_window = {s.trigger_time + params.eom_commute_start,
                  s.trigger_time + params.eom_commute_start +
                      params.eom_commute_width};
  s.gate_window = {s.trigger_time + params.flight_time,
                   s.trigger_time + params.flight_time + params.gate_width};
  return s;
}

/// Event on the interferometer axis: x in meters (input splitter at 0), t in ns.
struct SpacetimeEvent {
  double x = 0.0;
  double t = 0.0;
};

enum class IntervalClass { space_like, time_like, light_like };

inline IntervalClass interval_class(const SpacetimeEvent& a,
                                    const SpacetimeEvent& b) {
  const double dx = std::abs(a.x - b.x);
  const double cdt = kSpeedOfLight * std::abs(a.t - b.t);
  const double scale = std::max({dx, cdt, 1.0});
  if (std::abs(dx - cdt) <= 1e-9 * scale) return IntervalClass::light_like;
  return dx > cdt ? IntervalClass::space_like : IntervalClass::time_like;
}

struct LightconeEntry {
  bool entered = false;
  double x = 0.0;  // m
  double t = 0.0;  // ns
};

/// Intersection of a photon worldline (moving at c from photon_start toward
/// x = length) with the future light cone of the choice event.
inline LightconeEntry lightcone_entry(const SpacetimeEvent& choice,
                                      const SpacetimeEvent& photon_start,
                                      double length_m = 48.0) {
  const double c = kSpeedOfLight;
  // Photon: x(t) = x0 + c (t - t0). Cone (approaching side):
  // x(t) = x_c - c (t - t_c), t >= t_c.
  const double t = (choice.x - photon_start.x + c * photon_start.t +
                    c * choice.t) /
                   (2.0 * c);
  const double x = photon_start.x + c * (t - photon_start.t);
  LightconeEntry e;
  e.x = x;
  e.t = t;
  e.entered = (t >= photon_start.t - 1e-12) && (t >= choice.t - 1e-12) &&
              (x >= -1e-9) && (x <= length_m + 1e-9);
  return e;
}

struct CausalityViolation {
  uint64_t pulse_index = 0;
  const char* reason = "";
};

struct CausalityReport {
  uint64_t n_pulses = 0;
  uint64_t n_violations = 0;
  std::vector<CausalityViolation> violations;  // capped at 1000 entries
  double min_margin_m = 0.0;  // min space-like clearance |dx| - c|dt|
  double min_commute_distance_m = 0.0;  // photon distance when EOM starts
  double max_commute_distance_m = 0.0;
  std::vector<double> margins_m;  // per pulse, filled when keep_margins
};

/// Check, pulse by pulse: (i) photon entry and configuration choice are
/// space-like separated, (ii) the in-flight distance when the EOM starts to
/// commute matches c (eom_commute_start - delay), (iii) the EOM has settled
/// before the gate opens.
inline CausalityReport causality_audit(const std::vector<PulseSchedule>& schedules,
                                       const std::vector<double>& delays,
                                       const TimingParams& params,
                                       bool keep_margins = false) {
  params.validate();
  if (schedules.size() != delays.size())
    throw std::invalid_argument("one emission delay per schedule required");
  CausalityReport report;
  report.n_pulses = schedules.size();
  report.min_margin_m = std::numeric_limits<double>::infinity();
  report.min_commute_distance_m = std::numeric_limits<double>::infinity();
  report.max_commute_distance_m = -std::numeric_limits<double>::infinity();
  const double len = params.interferometer_length;
  if (keep_margins) report.margins_m.reserve(schedules.size());

  for (size_t i = 0; i < schedules.size(); ++i) {
    const auto& sch = schedules[i];
    const double delay = delays[i];
    const SpacetimeEvent entry{0.0, sch.trigger_time + delay};
    const SpacetimeEvent choice{len, sch.qrng_draw_time};
    const double margin =
        len - kSpeedOfLight * std::abs(entry.t - choice.t);
    if (keep_margins) report.margins_m.push_back(margin);
    report.min_margin_m = std::min(report.min_margin_m, margin);

    auto flag = [&](const char* why) {
      ++report.n_violations;
      if (report.violations.size() < 1000) report.violations.push_back({i, why});
    };

    if (interval_class(entry, choice) != IntervalClass::space_like)
      flag("entry/choice pair not space-like separated");

    // Worldline position at commutation start, two routes.
    const double t_commute = sch.eom_window.start;
    const double in_flight = t_commute - entry.t;
    const double d_direct = kSpeedOfLight * (params.eom_commute_start - delay);
    const double d_worldline = kSpeedOfLight * in_flight;
    report.min_commute_distance_m =
        std::min(report.min_commute_distance_m, d_worldline);
    report.max_commute_distance_m =
        std::max(report.max_commute_distance_m, d_worldline);
    // The worldline route subtracts two absolute timestamps, so allow for
    // rounding that grows with the magnitude of the times involved.
    const double tol =
        1e-9 + 8.0 * std::numeric_limits<double>::epsilon() *
                   kSpeedOfLight * (std::abs(t_commute) + std::abs(entry.t));
    if (std::abs(d_direct - d_worldline) > tol)
      flag("commutation-distance bookkeeping mismatch");
    if (in_flight < 0.0) flag("EOM commutation before photon entry");

    if (sch.eom_window.end > sch.gate_window.start + 1e-12)
      flag("EOM not settled before gate opens");
  }
  return report;
}

}  // namespace dcsim
