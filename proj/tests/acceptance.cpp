// End-to-end acceptance checks. Each criterion prints one [PASS]/[FAIL] line
// with the measured values; the process exits nonzero if any criterion fails.
//
// Sample sizes are chosen so every tolerance sits several standard errors
// away from the expected value; where that required more statistics than the
// bench-equivalent acquisition time, the trigger counts are scaled up and the
// check is against the same physical quantity.

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "dcsim/analysis.hpp"
#include "dcsim/calibrate.hpp"
#include "dcsim/csv.hpp"
#include "dcsim/experiment.hpp"
#include "dcsim/qrng.hpp"
#include "dcsim/timeline.hpp"

using namespace dcsim;

namespace {

int g_failures = 0;

void report(int index, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", index, name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

std::vector<PhasePoint> grid(int points, uint64_t per_point) {
  std::vector<PhasePoint> g;
  for (int i = 0; i < points; ++i)
    g.push_back({M_PI * i / points, per_point});
  return g;
}

// D1 rate with darks and the flat (non-interfering) background removed, so a
// fringe fit over these values estimates the mode overlap directly.
double fringe_value(const RunConfig& c, const CountSummary& s) {
  const double g =
      1.0 - std::exp(-c.timing.gate_width / c.source.tau_sp);
  const double flat =
      c.source.mu_bg * 0.5 * g * c.detector.efficiency;
  return corrected_rate(static_cast<double>(s.n_1),
                        static_cast<double>(s.n_t),
                        c.detector.dark_prob(1), flat);
}

struct SweepStats {
  double visibility = 0.0;
  double flat_max_dev = 0.0;  // max |N1/(N1+N2) - 1/2| over points
  double mean_detections = 0.0;
  double rate_hz = 0.0;  // per-detector singles rate, darks included
};

SweepStats sweep_stats(const RunConfig& c, const RunResult& r, int bit) {
  SweepStats out;
  std::vector<double> phases, values;
  double det_sum = 0.0, n1_sum = 0.0, nt_sum = 0.0;
  int points = 0;
  for (const auto& g : r.groups) {
    if (g.config_bit != bit || g.counts.n_t == 0) continue;
    phases.push_back(g.phase_setpoint);
    values.push_back(fringe_value(c, g.counts));
    const double n1 = static_cast<double>(g.counts.n_1);
    const double n2 = static_cast<double>(g.counts.n_2);
    out.flat_max_dev =
        std::max(out.flat_max_dev, std::abs(n1 / (n1 + n2) - 0.5));
    det_sum += n1 + n2;
    n1_sum += n1;
    nt_sum += static_cast<double>(g.counts.n_t);
    ++points;
  }
  const FringeFit fit = fit_fringe(phases, values);
  out.visibility = fit.visibility;
  out.mean_detections = det_sum / points;
  out.rate_hz = n1_sum / (nt_sum * 238e-9);
  return out;
}

double criterion_1_fringe() {
  RunConfig c;
  c.mode = RunMode::forced_closed;
  c.seed = 1001;
  c.log_records = false;
  c.phase_schedule = grid(20, 8000000);  // about 1.9 s per point on the bench
  const RunResult r = sweep_phase(c);
  const SweepStats s = sweep_stats(c, r, 1);
  report(1, "closed-configuration fringe visibility",
         std::abs(s.visibility - 0.94) <= 0.02,
         fmt("fitted V = %.4f (target 0.94 +- 0.02, 20 points x 8e6 triggers)",
             s.visibility));
  return s.mean_detections;
}

void criterion_2_open_flatness(double* rate_out) {
  RunConfig c;
  c.mode = RunMode::forced_open;
  c.seed = 1002;
  c.log_records = false;
  // 2e8 triggers per point: the +-0.01 band sits at 3.7 sigma per point.
  c.phase_schedule = grid(20, 200000000);
  const RunResult r = sweep_phase(c);
  const SweepStats s = sweep_stats(c, r, 0);
  *rate_out = s.rate_hz;
  report(2, "open-configuration flatness", s.flat_max_dev <= 0.01,
         fmt("max |D1 proportion - 0.5| = %.4f (bound 0.01), fitted V = %.4f",
             s.flat_max_dev, s.visibility));
}

void criterion_6_rates(double rate_hz, double detections_per_point) {
  report(6, "count-rate calibration",
         std::abs(rate_hz - 700.0) <= 35.0 &&
             std::abs(detections_per_point - 2600.0) <= 150.0,
         fmt("open-configuration D1 rate = %.1f s^-1 (target 700 +- 35); "
             "mean detections per 1.9 s point = %.0f (target 2600 +- 150)",
             rate_hz, detections_per_point));
}

AlphaResult open_alpha(uint64_t n_triggers, double mu_bg, uint64_t seed,
                       RunMode mode) {
  RunConfig c;
  c.mode = mode;
  c.n_triggers = n_triggers;
  c.seed = seed;
  c.log_records = false;
  c.source.mu_bg = mu_bg;
  const RunResult r = run(c);
  const CountSummary s =
      mode == RunMode::delayed_choice ? r.total(0) : r.total();
  return alpha_corrected(s, c.detector.dark_prob(1), c.detector.dark_prob(2));
}

void criterion_3_anticorrelation() {
  const AlphaResult a =
      open_alpha(500000000000ull, kCalibratedMuBg, 1003, RunMode::forced_open);
  const bool pass_a = std::abs(a.alpha - 0.12) <= 0.01;

  const AlphaResult b =
      open_alpha(800000000000ull, 0.0, 1004, RunMode::forced_open);
  const bool pass_b = b.alpha < 0.005;

  // Classical reference: Poissonian light pooled over 100 seeds.
  CountSummary pooled;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    RunConfig c;
    c.mode = RunMode::classical_poissonian;
    c.source.mode = EmitterMode::poissonian;
    c.source.poisson_mean = 0.2;
    c.n_triggers = 1000000;
    c.seed = seed;
    c.log_records = false;
    pooled += run(c).total();
  }
  const AlphaResult cl = alpha(pooled);
  const bool pass_c = cl.alpha >= 1.0 - 3.0 * cl.sigma;

  report(3, "single-photon anticorrelation", pass_a && pass_b && pass_c,
         fmt("alpha = %.4f +- %.4f (target 0.12 +- 0.01); "
             "background-free alpha = %.4f (< 0.005); "
             "classical alpha = %.4f +- %.4f (>= 1 - 3 sigma)",
             a.alpha, a.sigma, b.alpha, cl.alpha, cl.sigma));
}

double blocked_info(RunMode mode, int blocked_path, uint64_t seed) {
  RunConfig c;
  c.mode = mode;
  c.blocked_path = blocked_path;
  c.n_triggers = 600000000;
  c.seed = seed;
  c.log_records = false;
  const RunResult r = run(c);
  const CountSummary s =
      mode == RunMode::delayed_choice ? r.total(0) : r.total();
  const double n_t = static_cast<double>(s.n_t);
  const double r1 = corrected_rate(static_cast<double>(s.n_1), n_t,
                                   c.detector.dark_prob(1));
  const double r2 = corrected_rate(static_cast<double>(s.n_2), n_t,
                                   c.detector.dark_prob(2));
  return which_way_info(r1, r2);
}

void criterion_4_which_way() {
  const double i2 = blocked_info(RunMode::blocked, 2, 1005);
  const double i1 = blocked_info(RunMode::blocked, 1, 1006);
  report(4, "which-way information with a blocked path",
         i1 > 0.99 && i2 > 0.99,
         fmt("I = %.5f (path 1 blocked), %.5f (path 2 blocked), both > 0.99",
             i1, i2));
}

void criterion_5_hbt() {
  RunConfig c;
  c.mode = RunMode::hbt;
  c.n_triggers = 80000000000ull;
  c.seed = 1007;
  c.log_records = false;
  const Histogram h = hbt_run(c);
  const double pd1 = 1.0 - std::exp(-c.detector.dark_rate_d1 *
                                    c.hbt_gate_width * 1e-9);
  const double pd2 = 1.0 - std::exp(-c.detector.dark_rate_d2 *
                                    c.hbt_gate_width * 1e-9);
  const G2Result g2 = g2_zero_corrected(h, pd1, pd2);
  const DecayFit decay = fit_side_decay(h, c.hbt_gate_width, pd1, pd2);
  report(5, "photon statistics from the coincidence histogram",
         std::abs(g2.g2 - 0.12) <= 0.02 && std::abs(decay.tau - 44.5) <= 1.5,
         fmt("g2(0) = %.4f +- %.4f (target 0.12 +- 0.02); side-peak lifetime "
             "= %.2f ns (target 44.5 +- 1.5)",
             g2.g2, g2.sigma, decay.tau));
}

void criterion_7_qrng() {
  QrngParams p;
  const size_t n = 420000;
  const BitSequence seq = generate_bits(p, n, 1008);
  const auto r = autocorrelation(seq, 100);
  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  const double sigma = 1.0 / std::sqrt(static_cast<double>(n));
  const double predicted = p.bit_autocorrelation(p.sample_period);

  // The physical lag-1 correlation (0.0121) exceeds the white-noise bound
  // 4/sqrt(N) = 0.0062 by construction, so lag 1 is checked against the
  // arcsin-law prediction and the white-noise bound applies from lag 2 on.
  const bool lag1_ok = std::abs(r[1] - predicted) <= 3.0 * sigma;
  double worst = 0.0;
  for (size_t k = 2; k <= 100; ++k) worst = std::max(worst, std::abs(r[k]));
  const bool tail_ok = worst < bound;

  const auto samples = sample_noise(p, 200000, 10.0, 1009);
  const double est = estimate_corr_time(samples, 10.0);
  const bool tau_ok = std::abs(est - 60.0) <= 5.0;

  report(7, "bit-stream randomness", lag1_ok && tail_ok && tau_ok,
         fmt("r(1) = %.5f (arcsin-law prediction %.5f +- %.5f); "
             "max |r(2..100)| = %.5f (bound %.5f); "
             "corr time = %.1f ns (target 60 +- 5)",
             r[1], predicted, 3.0 * sigma, worst, bound, est));
}

void criterion_8_causality() {
  TimingParams t;
  const uint64_t n = 1000000;
  std::vector<PulseSchedule> schedules(n);
  std::vector<double> delays(n);
  for (uint64_t i = 0; i < n; ++i) {
    schedules[i] = build_schedule(i, t);
    RngStream rng(1010, i, rng_tag::kEmission);
    delays[i] = rng.exponential_truncated(44.5, 45.0);
  }
  const CausalityReport rep = causality_audit(schedules, delays, t);
  const LightconeEntry entry =
      lightcone_entry({t.interferometer_length, schedules[0].qrng_draw_time},
                      {0.0, schedules[0].trigger_time});
  const bool bracket_ok = rep.min_commute_distance_m > 11.9 &&
                          rep.min_commute_distance_m < 12.5 &&
                          rep.max_commute_distance_m > 25.3 &&
                          rep.max_commute_distance_m < 25.5;
  report(8, "relativistic spacetime audit",
         rep.n_violations == 0 && rep.min_margin_m > 0.0 && bracket_ok &&
             entry.entered && std::abs(entry.x - 24.0) < 0.5,
         fmt("violations = %llu over 1e6 pulses; commute distances "
             "[%.2f, %.2f] m (target [12, 25.5]); light-cone entry at "
             "%.2f m (target ~24)",
             static_cast<unsigned long long>(rep.n_violations),
             rep.min_commute_distance_m, rep.max_commute_distance_m,
             entry.x));
}

void criterion_9_delayed_equivalence() {
  // Conditioned subsets of delayed-choice runs must reproduce the forced
  // results: closed fringe, open flatness, open anticorrelation, blocked I.
  RunConfig c;
  c.mode = RunMode::delayed_choice;
  c.seed = 1011;
  c.log_records = false;
  c.phase_schedule = grid(20, 200000000);
  const RunResult r = sweep_phase(c);
  const SweepStats closed = sweep_stats(c, r, 1);
  const SweepStats open = sweep_stats(c, r, 0);
  const bool fringe_ok = std::abs(closed.visibility - 0.94) <= 0.02;
  const bool flat_ok = open.flat_max_dev <= 0.01;

  const AlphaResult a = open_alpha(800000000000ull, kCalibratedMuBg, 1012,
                                   RunMode::delayed_choice);
  const bool alpha_ok = std::abs(a.alpha - 0.12) <= 0.01;

  const double info = blocked_info(RunMode::delayed_choice, 2, 1013);
  const bool info_ok = info > 0.99;

  report(9, "delayed-choice equivalence", fringe_ok && flat_ok && alpha_ok &&
                                              info_ok,
         fmt("closed-bit V = %.4f; open-bit max flatness dev = %.4f; "
             "open-bit alpha = %.4f +- %.4f; open-bit I = %.5f",
             closed.visibility, open.flat_max_dev, a.alpha, a.sigma, info));
}

std::string serialize(const RunResult& r) {
  std::ostringstream o;
  o.precision(17);
  for (const auto& rec : r.log.records)
    o << rec.pulse_index << ',' << rec.phase_setpoint << ','
      << int(rec.config_bit) << ',' << int(rec.d1) << ',' << int(rec.d2)
      << ',' << rec.emission_delay << '\n';
  for (const auto& row : r.log.counters)
    o << row.phase_setpoint << ',' << row.config_bit << ',' << row.n_triggers
      << '\n';
  return o.str();
}

void criterion_10_determinism() {
  bool ok = true;
  std::string detail;
  for (Driver d : {Driver::sparse, Driver::detailed}) {
    RunConfig c;
    c.mode = RunMode::delayed_choice;
    c.driver = d;
    c.seed = 1014;
    c.log_records = true;
    c.n_triggers = d == Driver::sparse ? 300000000 : 2000000;
    std::string ref;
    for (int workers : {1, 4, 16}) {
      c.workers = workers;
      const std::string out = serialize(run(c));
      if (ref.empty()) ref = out;
      else if (out != ref) ok = false;
    }
    detail += fmt("%s: %zu log bytes identical at workers 1/4/16; ",
                  d == Driver::sparse ? "sparse" : "detailed", ref.size());
  }
  report(10, "seed and worker-count determinism", ok, detail);
}

}  // namespace

int main() {
  const double detections = criterion_1_fringe();
  double rate_hz = 0.0;
  criterion_2_open_flatness(&rate_hz);
  criterion_3_anticorrelation();
  criterion_4_which_way();
  criterion_5_hbt();
  criterion_6_rates(rate_hz, detections);
  criterion_7_qrng();
  criterion_8_causality();
  criterion_9_delayed_equivalence();
  criterion_10_determinism();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
