#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcsim/detection.hpp"
#include "dcsim/jones.hpp"
#include "dcsim/qrng.hpp"
#include "dcsim/source.hpp"
#include "dcsim/timeline.hpp"

namespace dcsim {

enum class RunMode {
  delayed_choice,
  forced_open,
  forced_closed,
  blocked,
  hbt,
  classical_poissonian,
};

/// Simulation driver. `detailed` samples every trigger; `sparse` skips idle
/// triggers with exact geometric gap sampling (same model, different random
/// realization). `automatic` picks sparse whenever full per-trigger logs are
/// not requested.
enum class Driver { automatic, detailed, sparse };

struct PhasePoint {
  double phase = 0.0;        // radians
  uint64_t n_triggers = 0;   // triggers at this setpoint
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  RunMode mode = RunMode::delayed_choice;
  uint64_t n_triggers = 1000000;
  double phase = 0.0;          // used when no sweep schedule is given
  std::vector<PhasePoint> phase_schedule;  // sweep setpoints, optional
  uint64_t seed = 1;
  int workers = 1;
  Driver driver = Driver::automatic;
  int blocked_path = 0;        // 0 = none
  bool log_records = true;     // false: keep per-(phase, config) counters only
  bool log_all_triggers = false;  // detailed driver: log hit-less rows too

  InterferometerModel photonics;   // phase field is overridden per point
  EmitterParams source;
  QrngParams qrng;
  TimingParams timing;
  DetectorParams detector;

  // HBT histogram controls.
  double hbt_bin_width = 1.0;   // ns
  int hbt_window_periods = 5;   // histogram spans +- this many clock periods
  double hbt_gate_width = 119.0;  // ns; HBT runs gate a full half period

  void validate() const {
    if (n_triggers == 0 && phase_schedule.empty())
      throw ConfigError("n_triggers must be positive");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (blocked_path != 0 && blocked_path != 1 && blocked_path != 2)
      throw ConfigError("blocked_path must be 0, 1 or 2");
    if (mode == RunMode::blocked && blocked_path == 0)
      throw ConfigError("blocked mode requires blocked_path of 1 or 2");
    if (mode == RunMode::classical_poissonian &&
        source.mode != EmitterMode::poissonian)
      throw ConfigError("classical_poissonian mode requires source mode 'poissonian'");
    photonics.validate();
    source.validate();
    qrng.validate();
    timing.validate();
    detector.validate();
    if (!(hbt_bin_width > 0.0)) throw ConfigError("hbt_bin_width must be > 0");
    if (hbt_window_periods < 1)
      throw ConfigError("hbt_window_periods must be >= 1");
    for (const auto& p : phase_schedule)
      if (p.n_triggers == 0)
        throw ConfigError("phase point with zero triggers");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct ConfigParser {
  std::map<std::string, std::pair<std::string, int>> entries;  // key -> (value, line)

  void parse(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("line " + std::to_string(lineno) +
                            ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) +
                          ": expected 'key = value'");
      const std::string key = section + "." + trim(line.substr(0, eq));
      entries[key] = {trim(line.substr(eq + 1)), lineno};
    }
  }

  bool has(const std::string& key) const { return entries.count(key) > 0; }

  double number(const std::string& key, double fallback) {
    auto it = entries.find(key);
    if (it == entries.end()) return fallback;
    try {
      size_t pos = 0;
      const double v = std::stod(it->second.first, &pos);
      if (pos != it->second.first.size()) throw std::invalid_argument("");
      consumed.push_back(key);
      return v;
    } catch (...) {
      throw ConfigError("line " + std::to_string(it->second.second) + ": key '" +
                        key + "' has a non-numeric value");
    }
  }

  std::string word(const std::string& key, const std::string& fallback) {
    auto it = entries.find(key);
    if (it == entries.end()) return fallback;
    consumed.push_back(key);
    return it->second.first;
  }

  void check_unknown() const {
    for (const auto& [key, v] : entries) {
      bool known = false;
      for (const auto& c : consumed)
        if (c == key) { known = true; break; }
      if (!known)
        throw ConfigError("line " + std::to_string(v.second) +
                          ": unknown key '" + key + "'");
    }
  }

  std::vector<std::string> consumed;
};

}  // namespace detail

inline RunMode parse_mode(const std::string& s) {
  if (s == "delayed_choice") return RunMode::delayed_choice;
  if (s == "forced_open") return RunMode::forced_open;
  if (s == "forced_closed") return RunMode::forced_closed;
  if (s == "blocked") return RunMode::blocked;
  if (s == "hbt") return RunMode::hbt;
  if (s == "classical_poissonian") return RunMode::classical_poissonian;
  throw ConfigError("unknown mode '" + s + "'");
}

inline const char* mode_name(RunMode m) {
  switch (m) {
    case RunMode::delayed_choice: return "delayed_choice";
    case RunMode::forced_open: return "forced_open";
    case RunMode::forced_closed: return "forced_closed";
    case RunMode::blocked: return "blocked";
    case RunMode::hbt: return "hbt";
    case RunMode::classical_poissonian: return "classical_poissonian";
  }
  return "?";
}

/// Parse the line-based `key = value` config format with one section per
/// module. Unknown keys and malformed values name the offending line.
inline RunConfig parse_config(const std::string& text) {
  detail::ConfigParser p;
  p.parse(text);
  RunConfig c;

  c.mode = parse_mode(p.word("run.mode", "delayed_choice"));
  c.n_triggers = static_cast<uint64_t>(p.number("run.n_triggers", 1e6));
  c.phase = p.number("run.phase", 0.0);
  c.seed = static_cast<uint64_t>(p.number("run.seed", 1));
  c.workers = static_cast<int>(p.number("run.workers", 1));
  c.blocked_path = static_cast<int>(p.number("run.blocked_path", 0));
  c.log_records = p.number("run.log_records", 1) != 0;
  c.log_all_triggers = p.number("run.log_all_triggers", 0) != 0;
  const std::string driver = p.word("run.driver", "auto");
  if (driver == "auto") c.driver = Driver::automatic;
  else if (driver == "detailed") c.driver = Driver::detailed;
  else if (driver == "sparse") c.driver = Driver::sparse;
  else throw ConfigError("unknown driver '" + driver + "'");

  const int points = static_cast<int>(p.number("sweep.phase_points", 0));
  if (points > 0) {
    const double start = p.number("sweep.phase_start", 0.0);
    const double stop = p.number("sweep.phase_stop", M_PI);
    const auto per = static_cast<uint64_t>(p.number("sweep.triggers_per_point", 1e6));
    for (int i = 0; i < points; ++i)
      c.phase_schedule.push_back(
          {start + (stop - start) * i / points, per});
  }

  c.photonics.overlap = p.number("photonics.overlap", 0.94);
  c.photonics.length_m = p.number("photonics.length", 48.0);

  c.source.tau_sp = p.number("source.tau_sp", 44.5);
  c.source.p_emit = p.number("source.p_emit", kCalibratedPEmit);
  c.source.mu_bg = p.number("source.mu_bg", kCalibratedMuBg);
  const std::string smode = p.word("source.mode", "single_photon");
  if (smode == "single_photon") c.source.mode = EmitterMode::single_photon;
  else if (smode == "poissonian") c.source.mode = EmitterMode::poissonian;
  else throw ConfigError("unknown source mode '" + smode + "'");
  c.source.poisson_mean = p.number("source.poisson_mean", 0.2);

  c.qrng.corr_time = p.number("qrng.corr_time", 60.0);
  c.qrng.sample_period = p.number("qrng.sample_period", 238.0);
  c.qrng.osc_amplitude = p.number("qrng.osc_amplitude", 0.0);
  c.qrng.osc_period = p.number("qrng.osc_period", 800.0);
  c.qrng.osc_damping = p.number("qrng.osc_damping", 250.0);

  c.timing.clock_period = p.number("timing.clock_period", 238.0);
  c.timing.flight_time = p.number("timing.flight_time", 160.0);
  c.timing.gate_width = p.number("timing.gate_width", 40.0);
  c.timing.eom_commute_start = p.number("timing.eom_commute_start", 85.0);
  c.timing.eom_commute_width = p.number("timing.eom_commute_width", 40.0);
  c.timing.interferometer_length = p.number("timing.interferometer_length", 48.0);
  c.timing.jitter_sigma = p.number("timing.jitter_sigma", 0.0);

  c.detector.efficiency = p.number("detector.efficiency", 1.0);
  c.detector.dark_rate_d1 = p.number("detector.dark_rate_d1", 59.0);
  c.detector.dark_rate_d2 = p.number("detector.dark_rate_d2", 70.0);
  c.detector.gate_width = c.timing.gate_width;

  c.hbt_bin_width = p.number("hbt.bin_width", 1.0);
  c.hbt_window_periods = static_cast<int>(p.number("hbt.window_periods", 5));
  c.hbt_gate_width = p.number("hbt.gate_width", 119.0);

  p.check_unknown();
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Render a config back to the file format, defaults included.
inline std::string render_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "[run]\n"
    << "mode = " << mode_name(c.mode) << "\n"
    << "n_triggers = " << c.n_triggers << "\n"
    << "phase = " << c.phase << "\n"
    << "seed = " << c.seed << "\n"
    << "workers = " << c.workers << "\n"
    << "blocked_path = " << c.blocked_path << "\n"
    << "log_records = " << (c.log_records ? 1 : 0) << "\n"
    << "log_all_triggers = " << (c.log_all_triggers ? 1 : 0) << "\n"
    << "driver = "
    << (c.driver == Driver::automatic
            ? "auto"
            : c.driver == Driver::detailed ? "detailed" : "sparse")
    << "\n\n[photonics]\n"
    << "overlap = " << c.photonics.overlap << "\n"
    << "length = " << c.photonics.length_m << "\n\n[source]\n"
    << "tau_sp = " << c.source.tau_sp << "\n"
    << "p_emit = " << c.source.p_emit << "\n"
    << "mu_bg = " << c.source.mu_bg << "\n"
    << "mode = "
    << (c.source.mode == EmitterMode::single_photon ? "single_photon"
                                                    : "poissonian")
    << "\n"
    << "poisson_mean = " << c.source.poisson_mean << "\n\n[qrng]\n"
    << "corr_time = " << c.qrng.corr_time << "\n"
    << "sample_period = " << c.qrng.sample_period << "\n"
    << "osc_amplitude = " << c.qrng.osc_amplitude << "\n"
    << "osc_period = " << c.qrng.osc_period << "\n"
    << "osc_damping = " << c.qrng.osc_damping << "\n\n[timing]\n"
    << "clock_period = " << c.timing.clock_period << "\n"
    << "flight_time = " << c.timing.flight_time << "\n"
    << "gate_width = " << c.timing.gate_width << "\n"
    << "eom_commute_start = " << c.timing.eom_commute_start << "\n"
    << "eom_commute_width = " << c.timing.eom_commute_width << "\n"
    << "interferometer_length = " << c.timing.interferometer_length << "\n"
    << "jitter_sigma = " << c.timing.jitter_sigma << "\n\n[detector]\n"
    << "efficiency = " << c.detector.efficiency << "\n"
    << "dark_rate_d1 = " << c.detector.dark_rate_d1 << "\n"
    << "dark_rate_d2 = " << c.detector.dark_rate_d2 << "\n\n[hbt]\n"
    << "bin_width = " << c.hbt_bin_width << "\n"
    << "window_periods = " << c.hbt_window_periods << "\n"
    << "gate_width = " << c.hbt_gate_width << "\n";
  if (!c.phase_schedule.empty()) {
    o << "\n[sweep]\n"
      << "phase_points = " << c.phase_schedule.size() << "\n"
      << "phase_start = " << c.phase_schedule.front().phase << "\n";
    // phase_stop reconstructs the open-ended grid used by parse_config.
    const double step = c.phase_schedule.size() > 1
                            ? c.phase_schedule[1].phase - c.phase_schedule[0].phase
                            : 0.0;
    o << "phase_stop = "
      << c.phase_schedule.front().phase + step * c.phase_schedule.size() << "\n"
      << "triggers_per_point = " << c.phase_schedule.front().n_triggers << "\n";
  }
  return o.str();
}

}  // namespace dcsim
