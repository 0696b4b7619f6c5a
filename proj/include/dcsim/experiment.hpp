#pragma once

#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "dcsim/config.hpp"
#include "dcsim/detection.hpp"
#include "dcsim/jones.hpp"
#include "dcsim/qrng.hpp"
#include "dcsim/rng.hpp"
#include "dcsim/source.hpp"
#include "dcsim/timeline.hpp"

namespace dcsim {

/// One raw log row. emission_delay is a simulation-truth field: the delay of
/// the detected signal photon, or -1 when no signal photon registered.
struct PulseRecord {
  uint64_t pulse_index = 0;
  double phase_setpoint = 0.0;  // radians
  uint8_t config_bit = 0;       // 0 = open, 1 = closed
  uint8_t d1 = 0;
  uint8_t d2 = 0;
  double emission_delay = -1.0;  // ns
};

struct CounterRow {
  double phase_setpoint = 0.0;
  int config_bit = 0;
  uint64_t n_triggers = 0;
};

struct CountSummary {
  uint64_t n_t = 0;
  uint64_t n_1 = 0;
  uint64_t n_2 = 0;
  uint64_t n_c = 0;

  void validate() const {
    if (n_c > std::min(n_1, n_2) || n_1 > n_t || n_2 > n_t)
      throw std::logic_error("inconsistent count summary");
  }

  CountSummary& operator+=(const CountSummary& o) {
    n_t += o.n_t;
    n_1 += o.n_1;
    n_2 += o.n_2;
    n_c += o.n_c;
    return *this;
  }
};

struct GroupCounts {
  double phase_setpoint = 0.0;
  int config_bit = 0;
  CountSummary counts;
};

struct EventLog {
  std::vector<PulseRecord> records;
  std::vector<CounterRow> counters;
};

struct RunResult {
  EventLog log;
  std::vector<GroupCounts> groups;  // always filled, ordered by point then bit

  CountSummary total(std::optional<int> config_bit = std::nullopt,
                     std::optional<double> phase = std::nullopt) const {
    CountSummary s;
    for (const auto& g : groups) {
      if (config_bit && g.config_bit != *config_bit) continue;
      if (phase && g.phase_setpoint != *phase) continue;
      s += g.counts;
    }
    return s;
  }
};

namespace detail {

inline constexpr uint64_t kSparseBlock = 1ull << 20;
inline constexpr uint64_t kDetailedBlock = 1ull << 14;

/// Per-trigger detection probabilities for one configuration bit, with
/// emission probability, routing, gate acceptance and detector efficiency
/// folded in. Exact thinning of the detailed per-photon model.
struct BitModel {
  double s1 = 0.0, s2 = 0.0;      // signal photon detected at D1 / D2
  double lam1 = 0.0, lam2 = 0.0;  // Poisson means of detected background
};

struct PhaseModel {
  BitModel bit[2];
  double pd1 = 0.0, pd2 = 0.0;  // dark probability per gate
  double p_occ = 0.0;           // P(any hit in a trigger); config independent
  double gate_acceptance = 0.0;
  InterferometerModel interferometer[2];  // same, kept for the detailed path
};

inline EomState bit_state(int bit) {
  return bit == 0 ? EomState::open : EomState::closed;
}

inline PhaseModel build_phase_model(const RunConfig& c, double phase) {
  PhaseModel pm;
  const double g = 1.0 - std::exp(-c.timing.gate_width / c.source.tau_sp);
  pm.gate_acceptance = g;
  pm.pd1 = c.detector.dark_prob(1);
  pm.pd2 = c.detector.dark_prob(2);
  const double eff = c.detector.efficiency;
  const double mu = c.source.mode == EmitterMode::single_photon
                        ? c.source.mu_bg
                        : c.source.poisson_mean;
  const double pe = c.source.mode == EmitterMode::single_photon
                        ? c.source.p_emit
                        : 0.0;
  for (int b = 0; b < 2; ++b) {
    InterferometerModel m = c.photonics;
    m.phase = phase;
    if (c.blocked_path != 0) m.blocked = c.blocked_path;
    pm.interferometer[b] = m;
    const PortProbabilities sig = routing_probabilities(m, bit_state(b));
    const PortProbabilities bg = background_routing(m, bit_state(b));
    pm.bit[b].s1 = pe * sig.p1 * g * eff;
    pm.bit[b].s2 = pe * sig.p2 * g * eff;
    pm.bit[b].lam1 = mu * bg.p1 * g * eff;
    pm.bit[b].lam2 = mu * bg.p2 * g * eff;
  }
  // Total detection probability must not depend on the configuration bit,
  // otherwise idle-trigger skipping could not precede the choice.
  const auto occ = [&](const BitModel& bm) {
    return 1.0 - (1.0 - bm.s1 - bm.s2) * std::exp(-bm.lam1 - bm.lam2) *
                     (1.0 - pm.pd1) * (1.0 - pm.pd2);
  };
  const double o0 = occ(pm.bit[0]);
  const double o1 = occ(pm.bit[1]);
  assert(std::abs(o0 - o1) < 1e-12);
  pm.p_occ = o0;
  return pm;
}

struct BlockResult {
  std::vector<PulseRecord> records;
  uint64_t n_bit[2] = {0, 0};
  CountSummary counts[2];
};

/// Trigger content conditioned on at least one registered hit. Components are
/// sampled in a fixed order (signal, bg D1, bg D2, dark D1, dark D2) with the
/// standard sequential conditioning construction.
struct OccupiedContent {
  int signal_detector = 0;  // 0 none, 1, 2
  int bg1 = 0, bg2 = 0;
  bool dark1 = false, dark2 = false;
};

inline OccupiedContent sample_occupied(const BitModel& bm, double pd1,
                                       double pd2, RngStream& rng) {
  OccupiedContent out;
  const double p0[5] = {1.0 - bm.s1 - bm.s2, std::exp(-bm.lam1),
                        std::exp(-bm.lam2), 1.0 - pd1, 1.0 - pd2};
  double suffix[6];
  suffix[5] = 1.0;
  for (int i = 4; i >= 0; --i) suffix[i] = suffix[i + 1] * p0[i];
  bool all_zero = true;
  for (int i = 0; i < 5; ++i) {
    bool nonzero;
    if (all_zero) {
      const double denom = 1.0 - suffix[i];
      const double p_nonzero = denom > 0.0 ? (1.0 - p0[i]) / denom : 0.0;
      nonzero = rng.uniform() < p_nonzero;
    } else {
      nonzero = rng.uniform() >= p0[i];
    }
    if (!nonzero) continue;
    all_zero = false;
    switch (i) {
      case 0:
        out.signal_detector =
            rng.uniform() * (bm.s1 + bm.s2) < bm.s1 ? 1 : 2;
        break;
      case 1:
        out.bg1 = rng.poisson_at_least_one(bm.lam1);
        break;
      case 2:
        out.bg2 = rng.poisson_at_least_one(bm.lam2);
        break;
      case 3:
        out.dark1 = true;
        break;
      case 4:
        out.dark2 = true;
        break;
    }
  }
  return out;
}

inline int forced_bit(RunMode mode) {
  return mode == RunMode::forced_closed ? 1 : 0;
}

inline void sparse_block(const RunConfig& c, const PhaseModel& pm, double phase,
                         uint64_t first_pulse, uint64_t n, BlockResult& out) {
  const bool delayed = c.mode == RunMode::delayed_choice;
  const int fixed_bit = forced_bit(c.mode);
  RngStream occ_rng(c.seed, first_pulse, rng_tag::kOccupancy);
  RngStream gap_rng(c.seed, first_pulse, rng_tag::kGapBits);
  RngStream noise_rng(c.seed, first_pulse, rng_tag::kQrngNoise);
  NoiseState noise;
  if (delayed) noise = init_noise_stationary(c.qrng, noise_rng);

  const double p_occ = pm.p_occ;
  const double dt = c.timing.clock_period;

  auto account_idle = [&](uint64_t k) {
    if (k == 0) return;
    if (delayed) {
      // Idle triggers carry unobserved comparator bits; their per-config
      // counts are tallied as fair splits (bit correlation at one clock
      // period is ~1e-2 and idle stretches are long).
      const uint64_t ones = gap_rng.binomial_half(k);
      out.n_bit[1] += ones;
      out.n_bit[0] += k - ones;
      advance_noise(noise, static_cast<double>(k) * dt, c.qrng, noise_rng);
    } else {
      out.n_bit[fixed_bit] += k;
    }
  };

  if (p_occ <= 0.0) {
    account_idle(n);
    return;
  }
  const double log_q = std::log1p(-p_occ);

  uint64_t i = 0;
  while (i < n) {
    uint64_t gap;
    if (p_occ >= 1.0) {
      gap = 0;
    } else {
      const double k = std::floor(std::log(occ_rng.uniform_pos()) / log_q);
      gap = k >= static_cast<double>(n) ? n : static_cast<uint64_t>(k);
    }
    if (i + gap >= n) {
      account_idle(n - i);
      return;
    }
    account_idle(gap);
    i += gap;

    // Occupied trigger.
    int bit = fixed_bit;
    if (delayed) {
      advance_noise(noise, dt, c.qrng, noise_rng);
      const double v = noise_value(noise, c.qrng);
      bit = v == 0.0 ? static_cast<int>(noise_rng.next_u64() & 1) : (v > 0.0);
    }
    out.n_bit[bit] += 1;

    const uint64_t pulse = first_pulse + i;
    RngStream ev(c.seed, pulse, rng_tag::kEmission);
    const OccupiedContent oc = sample_occupied(pm.bit[bit], pm.pd1, pm.pd2, ev);
    const bool d1 = oc.signal_detector == 1 || oc.bg1 > 0 || oc.dark1;
    const bool d2 = oc.signal_detector == 2 || oc.bg2 > 0 || oc.dark2;
    auto& ctr = out.counts[bit];
    ctr.n_1 += d1;
    ctr.n_2 += d2;
    ctr.n_c += d1 && d2;
    if (c.log_records) {
      double delay = -1.0;
      if (oc.signal_detector != 0)
        delay = ev.exponential_truncated(c.source.tau_sp, c.timing.gate_width);
      out.records.push_back({pulse, phase, static_cast<uint8_t>(bit),
                             static_cast<uint8_t>(d1), static_cast<uint8_t>(d2),
                             delay});
    }
    i += 1;
  }
}

inline void detailed_block(const RunConfig& c, const PhaseModel& pm,
                           double phase, uint64_t first_pulse, uint64_t n,
                           BlockResult& out) {
  const bool delayed = c.mode == RunMode::delayed_choice;
  const int fixed_bit = forced_bit(c.mode);
  RngStream noise_rng(c.seed, first_pulse, rng_tag::kQrngNoise);
  NoiseState noise;
  if (delayed) noise = init_noise_stationary(c.qrng, noise_rng);
  const double eff = c.detector.efficiency;

  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t pulse = first_pulse + i;
    int bit = fixed_bit;
    if (delayed) {
      advance_noise(noise, c.timing.clock_period, c.qrng, noise_rng);
      const double v = noise_value(noise, c.qrng);
      bit = v == 0.0 ? static_cast<int>(noise_rng.next_u64() & 1) : (v > 0.0);
    }
    out.n_bit[bit] += 1;

    RngStream em(c.seed, pulse, rng_tag::kEmission);
    RngStream route(c.seed, pulse, rng_tag::kRouting);
    RngStream det(c.seed, pulse, rng_tag::kDetection);
    const EmissionEvent evn = emit(c.source, em);
    const PortProbabilities sig =
        routing_probabilities(pm.interferometer[bit], bit_state(bit));
    const PortProbabilities bg =
        background_routing(pm.interferometer[bit], bit_state(bit));

    bool d1 = false, d2 = false;
    double signal_delay = -1.0;
    const int total = evn.n_signal + evn.n_background;
    for (int ph = 0; ph < total; ++ph) {
      const bool is_signal = ph < evn.n_signal;
      const PortProbabilities& p = is_signal ? sig : bg;
      const double u = route.uniform();
      int detector = 0;
      if (u < p.p1) detector = 1;
      else if (u < p.p1 + p.p2) detector = 2;
      else continue;  // absorbed (blocked path)
      const double delay = evn.delays[ph];
      if (delay > c.timing.gate_width) continue;  // outside the gate
      if (!det.bernoulli(eff)) continue;
      if (detector == 1) d1 = true;
      else d2 = true;
      if (is_signal) signal_delay = delay;
    }
    if (det.bernoulli(pm.pd1)) d1 = true;
    if (det.bernoulli(pm.pd2)) d2 = true;

    auto& ctr = out.counts[bit];
    ctr.n_1 += d1;
    ctr.n_2 += d2;
    ctr.n_c += d1 && d2;
    if (c.log_records && (d1 || d2 || c.log_all_triggers))
      out.records.push_back({pulse, phase, static_cast<uint8_t>(bit),
                             static_cast<uint8_t>(d1), static_cast<uint8_t>(d2),
                             signal_delay});
  }
}

inline void run_point(const RunConfig& c, double phase, uint64_t first_pulse,
                      uint64_t n_triggers, Driver driver, RunResult& result) {
  const PhaseModel pm = build_phase_model(c, phase);
  const uint64_t bsz =
      driver == Driver::sparse ? kSparseBlock : kDetailedBlock;
  const uint64_t n_blocks = (n_triggers + bsz - 1) / bsz;
  std::vector<BlockResult> blocks(n_blocks);

  std::atomic<uint64_t> next{0};
  auto work = [&]() {
    for (;;) {
      const uint64_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      const uint64_t start = b * bsz;
      const uint64_t len = std::min(bsz, n_triggers - start);
      if (driver == Driver::sparse)
        sparse_block(c, pm, phase, first_pulse + start, len, blocks[b]);
      else
        detailed_block(c, pm, phase, first_pulse + start, len, blocks[b]);
    }
  };
  if (c.workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < c.workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  GroupCounts g0{phase, 0, {}};
  GroupCounts g1{phase, 1, {}};
  uint64_t nt0 = 0, nt1 = 0;
  for (auto& b : blocks) {
    g0.counts += b.counts[0];
    g1.counts += b.counts[1];
    nt0 += b.n_bit[0];
    nt1 += b.n_bit[1];
    for (auto& r : b.records) result.log.records.push_back(r);
  }
  g0.counts.n_t = nt0;
  g1.counts.n_t = nt1;
  if (nt0 > 0 || c.mode == RunMode::delayed_choice) {
    result.groups.push_back(g0);
    result.log.counters.push_back({phase, 0, nt0});
  }
  if (nt1 > 0 || c.mode == RunMode::delayed_choice) {
    result.groups.push_back(g1);
    result.log.counters.push_back({phase, 1, nt1});
  }
}

}  // namespace detail

inline Driver resolve_driver(const RunConfig& c) {
  if (c.driver != Driver::automatic) return c.driver;
  return c.log_all_triggers ? Driver::detailed : Driver::sparse;
}

/// Execute a run over the configured phase schedule (or the single configured
/// phase). Bitwise deterministic for a fixed seed and config, independent of
/// the worker count.
inline RunResult run(const RunConfig& config) {
  config.validate();
  if (config.mode == RunMode::hbt)
    throw std::invalid_argument("hbt mode is executed by hbt_run");
  const Driver driver = resolve_driver(config);
  if (config.log_all_triggers && !config.log_records)
    throw std::invalid_argument("log_all_triggers requires log_records");
  if (config.log_all_triggers && driver == Driver::sparse)
    throw std::invalid_argument("log_all_triggers requires the detailed driver");

  RunResult result;
  std::vector<PhasePoint> schedule = config.phase_schedule;
  if (schedule.empty()) schedule.push_back({config.phase, config.n_triggers});
  uint64_t first_pulse = 0;
  for (const auto& pt : schedule) {
    detail::run_point(config, pt.phase, first_pulse, pt.n_triggers, driver,
                      result);
    first_pulse += pt.n_triggers;
  }
  return result;
}

/// Sweep wrapper: requires at least two setpoints, preserves their order.
inline RunResult sweep_phase(const RunConfig& config) {
  if (config.phase_schedule.size() < 2)
    throw std::invalid_argument("sweep_phase needs at least 2 phase points");
  return run(config);
}

/// Detection time-difference histogram from an HBT run (no interferometer;
/// every photon routes 50/50). tau = t_D1 - t_D2, clipped to
/// +-(window_periods + 1/2) clock periods so all side peaks sit in full bins.
struct Histogram {
  double bin_width = 1.0;   // ns
  double tau_max = 0.0;     // ns, histogram spans [-tau_max, tau_max)
  double clock_period = 238.0;
  std::vector<uint64_t> counts;
  uint64_t n_triggers = 0;
  uint64_t n1 = 0, n2 = 0;  // singles

  double bin_center(size_t i) const {
    return -tau_max + (static_cast<double>(i) + 0.5) * bin_width;
  }
};

inline Histogram hbt_run(const RunConfig& config) {
  config.validate();
  if (config.mode != RunMode::hbt)
    throw std::invalid_argument("hbt_run requires mode = hbt");

  const double gw = config.hbt_gate_width;
  const double tau = config.source.tau_sp;
  const double g = 1.0 - std::exp(-gw / tau);
  const double eff = config.detector.efficiency;
  const double mu = config.source.mode == EmitterMode::single_photon
                        ? config.source.mu_bg
                        : config.source.poisson_mean;
  const double pe = config.source.mode == EmitterMode::single_photon
                        ? config.source.p_emit
                        : 0.0;
  detail::BitModel bm;
  bm.s1 = pe * 0.5 * g * eff;
  bm.s2 = pe * 0.5 * g * eff;
  bm.lam1 = mu * 0.5 * g * eff;
  bm.lam2 = mu * 0.5 * g * eff;
  const double pd1 = 1.0 - std::exp(-config.detector.dark_rate_d1 * gw * 1e-9);
  const double pd2 = 1.0 - std::exp(-config.detector.dark_rate_d2 * gw * 1e-9);
  const double p_occ = 1.0 - (1.0 - bm.s1 - bm.s2) *
                                 std::exp(-bm.lam1 - bm.lam2) * (1.0 - pd1) *
                                 (1.0 - pd2);

  Histogram h;
  h.bin_width = config.hbt_bin_width;
  h.clock_period = config.timing.clock_period;
  h.tau_max = (config.hbt_window_periods + 0.5) * config.timing.clock_period;
  const size_t n_bins =
      static_cast<size_t>(std::ceil(2.0 * h.tau_max / h.bin_width));
  h.counts.assign(n_bins, 0);
  h.n_triggers = config.n_triggers;

  struct Hit {
    double time;
    int detector;
  };
  std::deque<Hit> window;
  auto record_hit = [&](double time, int detector) {
    if (detector == 1) ++h.n1;
    else ++h.n2;
    while (!window.empty() && window.front().time < time - h.tau_max)
      window.pop_front();
    for (const auto& s : window) {
      if (s.detector == detector) continue;
      const double d = detector == 1 ? time - s.time : s.time - time;
      if (d < -h.tau_max || d >= h.tau_max) continue;
      const size_t idx = static_cast<size_t>((d + h.tau_max) / h.bin_width);
      if (idx < h.counts.size()) ++h.counts[idx];
    }
    window.push_back({time, detector});
  };

  if (p_occ <= 0.0) return h;
  const double log_q = p_occ >= 1.0 ? 0.0 : std::log1p(-p_occ);
  const double period = config.timing.clock_period;
  const uint64_t n = config.n_triggers;

  std::vector<Hit> hits;  // per-trigger scratch, time-sorted before use
  for (uint64_t block_start = 0; block_start < n;
       block_start += detail::kSparseBlock) {
    const uint64_t len = std::min(detail::kSparseBlock, n - block_start);
    RngStream occ_rng(config.seed, block_start, rng_tag::kOccupancy);
    uint64_t i = 0;
    while (i < len) {
      uint64_t gap = 0;
      if (p_occ < 1.0) {
        const double k = std::floor(std::log(occ_rng.uniform_pos()) / log_q);
        gap = k >= static_cast<double>(len) ? len : static_cast<uint64_t>(k);
      }
      if (i + gap >= len) break;
      i += gap;
      const uint64_t pulse = block_start + i;
      const double t0 = static_cast<double>(pulse) * period;
      RngStream ev(config.seed, pulse, rng_tag::kEmission);
      const detail::OccupiedContent oc =
          detail::sample_occupied(bm, pd1, pd2, ev);
      hits.clear();
      if (oc.signal_detector != 0)
        hits.push_back({t0 + ev.exponential_truncated(tau, gw),
                        oc.signal_detector});
      for (int k = 0; k < oc.bg1; ++k)
        hits.push_back({t0 + ev.exponential_truncated(tau, gw), 1});
      for (int k = 0; k < oc.bg2; ++k)
        hits.push_back({t0 + ev.exponential_truncated(tau, gw), 2});
      if (oc.dark1) hits.push_back({t0 + gw * ev.uniform(), 1});
      if (oc.dark2) hits.push_back({t0 + gw * ev.uniform(), 2});
      std::sort(hits.begin(), hits.end(),
                [](const Hit& a, const Hit& b) { return a.time < b.time; });
      for (const auto& hit : hits) record_hit(hit.time, hit.detector);
      i += 1;
    }
  }
  return h;
}

}  // namespace dcsim
