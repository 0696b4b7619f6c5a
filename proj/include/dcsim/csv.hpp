#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcsim/experiment.hpp"

namespace dcsim::csv {

inline constexpr const char* kRecordHeader =
    "pulse_index,phase_setpoint_rad,config_bit,d1,d2,emission_delay_ns";
inline constexpr const char* kCounterHeader =
    "phase_setpoint_rad,config_bit,n_triggers";
inline constexpr const char* kCountsHeader =
    "phase_setpoint_rad,config_bit,n_triggers,n_d1,n_d2,n_coinc";
inline constexpr const char* kHistogramHeader = "tau_ns,counts";

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.precision(17);
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}

inline void expect_header(std::ifstream& f, const char* header,
                          const std::string& path) {
  std::string line;
  if (!std::getline(f, line) || line != header)
    throw std::runtime_error("unexpected header in " + path);
}

}  // namespace detail

inline void write_records(const std::string& path,
                          const std::vector<PulseRecord>& records) {
  auto f = detail::open_out(path);
  f << kRecordHeader << '\n';
  for (const auto& r : records)
    f << r.pulse_index << ',' << r.phase_setpoint << ',' << int(r.config_bit)
      << ',' << int(r.d1) << ',' << int(r.d2) << ',' << r.emission_delay
      << '\n';
}

inline std::vector<PulseRecord> read_records(const std::string& path) {
  auto f = detail::open_in(path);
  detail::expect_header(f, kRecordHeader, path);
  std::vector<PulseRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split(line);
    if (fields.size() != 6)
      throw std::runtime_error("malformed record row in " + path);
    PulseRecord r;
    r.pulse_index = std::stoull(fields[0]);
    r.phase_setpoint = std::stod(fields[1]);
    r.config_bit = static_cast<uint8_t>(std::stoi(fields[2]));
    r.d1 = static_cast<uint8_t>(std::stoi(fields[3]));
    r.d2 = static_cast<uint8_t>(std::stoi(fields[4]));
    r.emission_delay = std::stod(fields[5]);
    out.push_back(r);
  }
  return out;
}

inline void write_counters(const std::string& path,
                           const std::vector<CounterRow>& counters) {
  auto f = detail::open_out(path);
  f << kCounterHeader << '\n';
  for (const auto& c : counters)
    f << c.phase_setpoint << ',' << c.config_bit << ',' << c.n_triggers
      << '\n';
}

inline std::vector<CounterRow> read_counters(const std::string& path) {
  auto f = detail::open_in(path);
  detail::expect_header(f, kCounterHeader, path);
  std::vector<CounterRow> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split(line);
    if (fields.size() != 3)
      throw std::runtime_error("malformed counter row in " + path);
    out.push_back({std::stod(fields[0]), std::stoi(fields[1]),
                   std::stoull(fields[2])});
  }
  return out;
}

/// Aggregated counts per (phase, config) group. This is the compact output
/// used by large counting runs where per-trigger rows would be impractical.
inline void write_counts(const std::string& path,
                         const std::vector<GroupCounts>& groups) {
  auto f = detail::open_out(path);
  f << kCountsHeader << '\n';
  for (const auto& g : groups)
    f << g.phase_setpoint << ',' << g.config_bit << ',' << g.counts.n_t << ','
      << g.counts.n_1 << ',' << g.counts.n_2 << ',' << g.counts.n_c << '\n';
}

inline std::vector<GroupCounts> read_counts(const std::string& path) {
  auto f = detail::open_in(path);
  detail::expect_header(f, kCountsHeader, path);
  std::vector<GroupCounts> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split(line);
    if (fields.size() != 6)
      throw std::runtime_error("malformed counts row in " + path);
    GroupCounts g;
    g.phase_setpoint = std::stod(fields[0]);
    g.config_bit = std::stoi(fields[1]);
    g.counts.n_t = std::stoull(fields[2]);
    g.counts.n_1 = std::stoull(fields[3]);
    g.counts.n_2 = std::stoull(fields[4]);
    g.counts.n_c = std::stoull(fields[5]);
    out.push_back(g);
  }
  return out;
}

/// Histogram with its sampling metadata carried in '#' comment lines so a
/// file round-trips without a sidecar.
inline void write_histogram(const std::string& path, const Histogram& h) {
  auto f = detail::open_out(path);
  f << "# bin_width_ns = " << h.bin_width << '\n'
    << "# tau_max_ns = " << h.tau_max << '\n'
    << "# clock_period_ns = " << h.clock_period << '\n'
    << "# n_triggers = " << h.n_triggers << '\n'
    << "# n_d1 = " << h.n1 << '\n'
    << "# n_d2 = " << h.n2 << '\n'
    << kHistogramHeader << '\n';
  for (size_t i = 0; i < h.counts.size(); ++i)
    f << h.bin_center(i) << ',' << h.counts[i] << '\n';
}

inline Histogram read_histogram(const std::string& path) {
  auto f = detail::open_in(path);
  Histogram h;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key, eq;
      double value;
      if (!(ss >> key >> eq >> value) || eq != "=")
        throw std::runtime_error("malformed metadata line in " + path);
      if (key == "bin_width_ns") h.bin_width = value;
      else if (key == "tau_max_ns") h.tau_max = value;
      else if (key == "clock_period_ns") h.clock_period = value;
      else if (key == "n_triggers") h.n_triggers = static_cast<uint64_t>(value);
      else if (key == "n_d1") h.n1 = static_cast<uint64_t>(value);
      else if (key == "n_d2") h.n2 = static_cast<uint64_t>(value);
      else throw std::runtime_error("unknown metadata key in " + path);
      continue;
    }
    if (!header_seen) {
      if (line != kHistogramHeader)
        throw std::runtime_error("unexpected header in " + path);
      header_seen = true;
      continue;
    }
    const auto fields = detail::split(line);
    if (fields.size() != 2)
      throw std::runtime_error("malformed histogram row in " + path);
    h.counts.push_back(std::stoull(fields[1]));
  }
  if (!header_seen) throw std::runtime_error("missing header in " + path);
  return h;
}

}  // namespace dcsim::csv
