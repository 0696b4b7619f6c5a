// Command line front end for the simulator: counting runs, phase sweeps,
// log analysis, bit-stream diagnostics, timing audits and calibration.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcsim/analysis.hpp"
#include "dcsim/calibrate.hpp"
#include "dcsim/config.hpp"
#include "dcsim/csv.hpp"
#include "dcsim/experiment.hpp"
#include "dcsim/qrng.hpp"
#include "dcsim/timeline.hpp"

namespace {

constexpr int kExitBadConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCheckFailed = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_prefix = "dcsim";
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  int verbosity = 1;
  bool check = false;
};

dcsim::RunConfig load(const CommonOpts& o) {
  dcsim::RunConfig c = dcsim::load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  return c;
}

void add_common(CLI::App* app, CommonOpts& o, bool need_config = true) {
  auto* copt = app->add_option("-c,--config", o.config_path, "config file");
  if (need_config) copt->required();
  app->add_option("-o,--out", o.out_prefix, "output file prefix");
  app->add_option("-s,--seed", o.seed, "override the config seed");
  app->add_option("-w,--workers", o.workers, "override the worker count");
  app->add_option("-v,--verbosity", o.verbosity, "0 quiet, 1 normal, 2 debug");
  app->add_flag("--check", o.check, "exit 3 if result checks fail");
}

void write_outputs(const CommonOpts& o, const dcsim::RunConfig& c,
                   const dcsim::RunResult& r) {
  if (c.log_records)
    dcsim::csv::write_records(o.out_prefix + "_events.csv", r.log.records);
  dcsim::csv::write_counters(o.out_prefix + "_counters.csv", r.log.counters);
  dcsim::csv::write_counts(o.out_prefix + "_counts.csv", r.groups);
}

void print_groups(const dcsim::RunResult& r) {
  for (const auto& g : r.groups) {
    std::cout << "phase=" << g.phase_setpoint << " config=" << g.config_bit
              << " n_t=" << g.counts.n_t << " n_d1=" << g.counts.n_1
              << " n_d2=" << g.counts.n_2 << " n_coinc=" << g.counts.n_c
              << "\n";
  }
}

int cmd_run(const CommonOpts& o) {
  dcsim::RunConfig c = load(o);
  if (o.verbosity >= 2) std::cout << dcsim::render_config(c);
  if (c.mode == dcsim::RunMode::hbt) {
    const dcsim::Histogram h = dcsim::hbt_run(c);
    dcsim::csv::write_histogram(o.out_prefix + "_histogram.csv", h);
    const auto g2 = dcsim::g2_zero_corrected(h, c.detector.dark_prob(1),
                                             c.detector.dark_prob(2));
    if (o.verbosity >= 1)
      std::cout << "g2(0) = " << g2.g2 << " +- " << g2.sigma
                << " (central " << g2.central_area << ", mean side "
                << g2.mean_side_area << ")\n";
    if (o.check && g2.g2 >= 0.5) {
      std::cout << "check failed: g2(0) >= 0.5\n";
      return kExitCheckFailed;
    }
    return 0;
  }

  const dcsim::RunResult r = dcsim::run(c);
  write_outputs(o, c, r);
  if (o.verbosity >= 1) print_groups(r);
  const dcsim::CountSummary total = r.total();
  const auto a = dcsim::alpha_corrected(total, c.detector.dark_prob(1),
                                        c.detector.dark_prob(2));
  if (o.verbosity >= 1)
    std::cout << "alpha_corrected = " << a.alpha << " +- " << a.sigma << "\n";
  if (o.check && c.source.mode == dcsim::EmitterMode::single_photon &&
      a.alpha - 2.0 * a.sigma > 0.5) {
    std::cout << "check failed: alpha inconsistent with a single emitter\n";
    return kExitCheckFailed;
  }
  return 0;
}

int cmd_sweep(const CommonOpts& o) {
  dcsim::RunConfig c = load(o);
  if (o.verbosity >= 2) std::cout << dcsim::render_config(c);
  const dcsim::RunResult r = dcsim::sweep_phase(c);
  write_outputs(o, c, r);
  if (o.verbosity >= 1) print_groups(r);

  // Fit the D1 fringe per configuration present in the sweep.
  for (int bit = 0; bit < 2; ++bit) {
    std::vector<double> phases, values;
    for (const auto& g : r.groups) {
      if (g.config_bit != bit || g.counts.n_t == 0) continue;
      phases.push_back(g.phase_setpoint);
      values.push_back(static_cast<double>(g.counts.n_1) /
                       static_cast<double>(g.counts.n_t));
    }
    if (phases.size() < 4) continue;
    try {
      const auto fit = dcsim::fit_fringe(phases, values);
      std::cout << "config=" << bit << " fitted visibility = "
                << fit.visibility << " (raw rates, mean level " << fit.a
                << ")\n";
    } catch (const std::exception& e) {
      std::cout << "config=" << bit << " fringe fit failed: " << e.what()
                << "\n";
    }
  }
  return 0;
}

int cmd_analyze(const CommonOpts& o, const std::string& events,
                const std::string& counters, const std::string& counts,
                const std::string& histogram, double gate_width) {
  bool check_ok = true;
  std::vector<dcsim::GroupCounts> groups;
  if (!counts.empty()) {
    groups = dcsim::csv::read_counts(counts);
  } else if (!events.empty() && !counters.empty()) {
    dcsim::EventLog log;
    log.records = dcsim::csv::read_records(events);
    log.counters = dcsim::csv::read_counters(counters);
    groups = dcsim::group_log(log);
  }
  if (!groups.empty()) {
    dcsim::CountSummary total;
    for (const auto& g : groups) total += g.counts;
    const auto a = dcsim::alpha(total);
    std::cout << "alpha = " << a.alpha << " +- " << a.sigma << "\n";
    if (a.alpha - 2.0 * a.sigma > 1.0) check_ok = false;
    std::vector<double> phases, values;
    for (const auto& g : groups) {
      if (g.counts.n_t == 0) continue;
      phases.push_back(g.phase_setpoint);
      values.push_back(static_cast<double>(g.counts.n_1) /
                       static_cast<double>(g.counts.n_t));
    }
    if (phases.size() >= 4) {
      try {
        const auto fit = dcsim::fit_fringe(phases, values);
        std::cout << "visibility = " << fit.visibility << "\n";
      } catch (const std::exception&) {
      }
    }
  }
  if (!histogram.empty()) {
    const dcsim::Histogram h = dcsim::csv::read_histogram(histogram);
    const auto g2 = dcsim::g2_zero(h);
    std::cout << "g2(0) = " << g2.g2 << " +- " << g2.sigma << "\n";
    if (g2.g2 - 2.0 * g2.sigma > 0.5) check_ok = false;
    if (gate_width > 0.0) {
      const auto decay = dcsim::fit_side_decay(h, gate_width);
      std::cout << "lifetime_fit_ns = " << decay.tau << "\n";
    }
  }
  if (groups.empty() && histogram.empty()) {
    std::cerr << "analyze: nothing to do (give --counts, --events/--counters "
                 "or --histogram)\n";
    return kExitBadConfig;
  }
  if (o.check && !check_ok) {
    std::cout << "check failed: classical bound exceeded\n";
    return kExitCheckFailed;
  }
  return 0;
}

int cmd_qrng_test(const CommonOpts& o, uint64_t n_bits, int max_lag) {
  dcsim::QrngParams params;
  if (!o.config_path.empty()) params = dcsim::load_config(o.config_path).qrng;
  const uint64_t seed = o.seed.value_or(1);
  const dcsim::BitSequence seq = dcsim::generate_bits(params, n_bits, seed);
  const std::vector<double> ac = dcsim::autocorrelation(seq, max_lag);

  double ones = 0.0;
  for (uint8_t b : seq.bits) ones += b;
  const double bias = ones / static_cast<double>(seq.bits.size()) - 0.5;
  const double bound = 4.0 / std::sqrt(static_cast<double>(seq.bits.size()));
  std::cout << "n_bits = " << seq.bits.size() << "\n"
            << "bias = " << bias << "\n"
            << "lag1_autocorr = " << ac[1] << " (model "
            << params.bit_autocorrelation(params.sample_period) << ")\n";
  bool ok = std::abs(bias) < bound;
  double worst = 0.0;
  for (int lag = 2; lag <= max_lag; ++lag)
    worst = std::max(worst, std::abs(ac[lag]));
  std::cout << "max_abs_autocorr_lag2plus = " << worst << " (bound " << bound
            << ")\n";
  if (worst >= bound) ok = false;
  if (o.verbosity >= 2)
    for (int lag = 1; lag <= std::min(max_lag, 10); ++lag)
      std::cout << "  r[" << lag << "] = " << ac[lag] << "\n";
  if (o.check && !ok) {
    std::cout << "check failed: bit stream statistics out of bounds\n";
    return kExitCheckFailed;
  }
  return 0;
}

int cmd_causality(const CommonOpts& o, uint64_t n_pulses) {
  dcsim::RunConfig c = load(o);
  std::vector<dcsim::PulseSchedule> schedules(n_pulses);
  std::vector<double> delays(n_pulses);
  for (uint64_t i = 0; i < n_pulses; ++i) {
    schedules[i] = dcsim::build_schedule(i, c.timing);
    dcsim::RngStream rng(c.seed, i, dcsim::rng_tag::kEmission);
    // Audit the photons that can actually register: delays inside the gate.
    delays[i] =
        rng.exponential_truncated(c.source.tau_sp, c.timing.gate_width);
  }
  const dcsim::CausalityReport rep =
      dcsim::causality_audit(schedules, delays, c.timing, false);
  std::cout << "pulses_checked = " << n_pulses << "\n"
            << "violations = " << rep.n_violations << "\n"
            << "min_margin_m = " << rep.min_margin_m << "\n"
            << "commute_distance_m = [" << rep.min_commute_distance_m << ", "
            << rep.max_commute_distance_m << "]\n";
  if (o.check && rep.n_violations > 0) {
    std::cout << "check failed: causality violations found\n";
    return kExitCheckFailed;
  }
  return 0;
}

int cmd_calibrate(const CommonOpts& o, double rate_hz, double target_alpha,
                  bool refine, uint64_t n_triggers) {
  dcsim::RunConfig base;
  if (!o.config_path.empty()) base = dcsim::load_config(o.config_path);
  const dcsim::CalibrationTargets targets{rate_hz, target_alpha};
  const dcsim::CalibrationResult r =
      refine ? dcsim::calibrate_refined(targets, base, n_triggers,
                                        o.seed.value_or(1))
             : dcsim::calibrate(targets, base);
  std::cout << "p_emit = " << r.p_emit << "\n"
            << "mu_bg = " << r.mu_bg << "\n"
            << "background_fraction = " << r.background_fraction << "\n";
  if (r.achieved_alpha >= 0.0)
    std::cout << "achieved_alpha = " << r.achieved_alpha << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delayed-choice interferometer simulator"};
  app.require_subcommand(1);

  CommonOpts run_o, sweep_o, an_o, qr_o, ca_o, cal_o;

  auto* run_cmd = app.add_subcommand("run", "execute one counting run");
  add_common(run_cmd, run_o);

  auto* sweep_cmd = app.add_subcommand("sweep", "execute a phase sweep");
  add_common(sweep_cmd, sweep_o);

  auto* an_cmd = app.add_subcommand("analyze", "analyze saved output files");
  std::string an_events, an_counters, an_counts, an_hist;
  double an_gate = 0.0;
  an_cmd->add_option("--events", an_events, "event log CSV");
  an_cmd->add_option("--counters", an_counters, "trigger counter CSV");
  an_cmd->add_option("--counts", an_counts, "aggregated counts CSV");
  an_cmd->add_option("--histogram", an_hist, "coincidence histogram CSV");
  an_cmd->add_option("--gate-width", an_gate,
                     "gate width (ns) for the lifetime fit");
  an_cmd->add_flag("--check", an_o.check, "exit 3 if result checks fail");
  an_cmd->add_option("-v,--verbosity", an_o.verbosity, "verbosity");

  auto* qr_cmd = app.add_subcommand("qrng-test", "bit stream diagnostics");
  uint64_t qr_bits = 420000;
  int qr_maxlag = 100;
  qr_cmd->add_option("-n,--bits", qr_bits, "number of bits");
  qr_cmd->add_option("--max-lag", qr_maxlag, "highest autocorrelation lag");
  add_common(qr_cmd, qr_o, false);

  auto* ca_cmd = app.add_subcommand("causality-check",
                                    "audit spacetime intervals");
  uint64_t ca_pulses = 100000;
  ca_cmd->add_option("-n,--pulses", ca_pulses, "number of pulses to audit");
  add_common(ca_cmd, ca_o);

  auto* cal_cmd = app.add_subcommand("calibrate",
                                     "solve source parameters from targets");
  double cal_rate = 700.0, cal_alpha = 0.12;
  bool cal_refine = false;
  uint64_t cal_triggers = 2'000'000'000;
  cal_cmd->add_option("--rate", cal_rate, "singles rate per detector (Hz)");
  cal_cmd->add_option("--alpha", cal_alpha, "target corrected alpha");
  cal_cmd->add_flag("--refine", cal_refine, "refine with a counting run");
  cal_cmd->add_option("--triggers", cal_triggers,
                      "triggers per refinement run");
  add_common(cal_cmd, cal_o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run_o);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_o);
    if (an_cmd->parsed())
      return cmd_analyze(an_o, an_events, an_counters, an_counts, an_hist,
                         an_gate);
    if (qr_cmd->parsed()) return cmd_qrng_test(qr_o, qr_bits, qr_maxlag);
    if (ca_cmd->parsed()) return cmd_causality(ca_o, ca_pulses);
    if (cal_cmd->parsed())
      return cmd_calibrate(cal_o, cal_rate, cal_alpha, cal_refine,
                           cal_triggers);
  } catch (const dcsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
