#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dcsim/analysis.hpp"
#include "dcsim/experiment.hpp"
#include "dcsim/stats.hpp"

using namespace dcsim;

namespace {

RunConfig boosted_config(RunMode mode) {
  // Rates inflated far above the calibrated ones so a short run has enough
  // occupied triggers for distributional comparisons.
  RunConfig c;
  c.mode = mode;
  c.n_triggers = 200000;
  c.phase = 0.7;
  c.seed = 21;
  c.log_records = false;
  c.source.p_emit = 0.05;
  c.source.mu_bg = 0.01;
  return c;
}

}  // namespace

TEST_CASE("trigger counters account for every pulse") {
  for (RunMode mode : {RunMode::forced_open, RunMode::forced_closed,
                       RunMode::delayed_choice}) {
    RunConfig c = boosted_config(mode);
    const RunResult r = run(c);
    uint64_t total = 0;
    for (const auto& g : r.groups) {
      total += g.counts.n_t;
      g.counts.validate();
      CHECK(g.counts.n_1 <= g.counts.n_t);
      CHECK(g.counts.n_c <= std::min(g.counts.n_1, g.counts.n_2));
    }
    CHECK(total == c.n_triggers);
    uint64_t counter_total = 0;
    for (const auto& row : r.log.counters) counter_total += row.n_triggers;
    CHECK(counter_total == c.n_triggers);
  }
}

TEST_CASE("forced modes put all triggers on one configuration") {
  RunConfig c = boosted_config(RunMode::forced_open);
  const RunResult r = run(c);
  CHECK(r.total(0).n_t == c.n_triggers);
  CHECK(r.total(1).n_t == 0);

  c.mode = RunMode::forced_closed;
  const RunResult rc = run(c);
  CHECK(rc.total(1).n_t == c.n_triggers);
}

TEST_CASE("delayed choice splits triggers evenly") {
  RunConfig c = boosted_config(RunMode::delayed_choice);
  c.n_triggers = 2000000;
  const RunResult r = run(c);
  const double n0 = static_cast<double>(r.total(0).n_t);
  const double n1 = static_cast<double>(r.total(1).n_t);
  CHECK(n0 + n1 == 2000000.0);
  // Comparator bits are balanced; allow for the small lag-1 correlation.
  CHECK(std::abs(n0 - n1) < 5.0 * std::sqrt(2000000.0) * 0.5 * 1.1);
}

TEST_CASE("runs are deterministic and worker-count independent") {
  for (Driver d : {Driver::sparse, Driver::detailed}) {
    RunConfig c = boosted_config(RunMode::delayed_choice);
    c.driver = d;
    c.log_records = true;
    c.n_triggers = d == Driver::sparse ? 300000 : 60000;

    c.workers = 1;
    const RunResult a = run(c);
    const RunResult b = run(c);
    c.workers = 4;
    const RunResult w4 = run(c);

    REQUIRE(a.log.records.size() == b.log.records.size());
    REQUIRE(a.log.records.size() == w4.log.records.size());
    for (size_t i = 0; i < a.log.records.size(); ++i) {
      CHECK(a.log.records[i].pulse_index == w4.log.records[i].pulse_index);
      CHECK(a.log.records[i].config_bit == w4.log.records[i].config_bit);
      CHECK(a.log.records[i].d1 == w4.log.records[i].d1);
      CHECK(a.log.records[i].d2 == w4.log.records[i].d2);
      CHECK(a.log.records[i].emission_delay ==
            w4.log.records[i].emission_delay);
    }
    for (int bit : {0, 1}) {
      CHECK(a.total(bit).n_t == w4.total(bit).n_t);
      CHECK(a.total(bit).n_1 == w4.total(bit).n_1);
      CHECK(a.total(bit).n_2 == w4.total(bit).n_2);
      CHECK(a.total(bit).n_c == w4.total(bit).n_c);
      CHECK(a.total(bit).n_1 == b.total(bit).n_1);
    }
  }
}

TEST_CASE("sparse and detailed drivers sample the same distribution") {
  // Two-sample comparison of per-trigger outcome categories
  // (D1 only, D2 only, coincidence) between the drivers.
  RunConfig c = boosted_config(RunMode::forced_closed);
  c.n_triggers = 400000;
  c.driver = Driver::sparse;
  const CountSummary s = run(c).total();
  c.driver = Driver::detailed;
  const CountSummary d = run(c).total();

  const double cats_s[3] = {static_cast<double>(s.n_1 - s.n_c),
                            static_cast<double>(s.n_2 - s.n_c),
                            static_cast<double>(s.n_c)};
  const double cats_d[3] = {static_cast<double>(d.n_1 - d.n_c),
                            static_cast<double>(d.n_2 - d.n_c),
                            static_cast<double>(d.n_c)};
  double chi2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double expected = 0.5 * (cats_s[k] + cats_d[k]);
    REQUIRE(expected > 5.0);
    chi2 += (cats_s[k] - expected) * (cats_s[k] - expected) / expected;
    chi2 += (cats_d[k] - expected) * (cats_d[k] - expected) / expected;
  }
  CHECK(chi2_pvalue(chi2, 2) > 0.001);

  // And both match the analytic per-trigger probabilities.
  const double g = 1.0 - std::exp(-40.0 / 44.5);
  const double p1 = c.source.p_emit * 0.5 *
                        (1.0 + 0.94 * std::cos(2.0 * c.phase)) * g +
                    c.source.mu_bg * 0.5 * g + c.detector.dark_prob(1);
  for (const CountSummary* cs : {&s, &d}) {
    const double rate = static_cast<double>(cs->n_1) / c.n_triggers;
    CHECK(std::abs(rate - p1) < 5.0 * std::sqrt(p1 / c.n_triggers));
  }
}

TEST_CASE("hit log and counters agree with the aggregated groups") {
  RunConfig c = boosted_config(RunMode::delayed_choice);
  c.log_records = true;
  const RunResult r = run(c);
  const auto regrouped = group_log(r.log);
  REQUIRE(regrouped.size() == r.groups.size());
  for (const auto& g : regrouped) {
    const CountSummary ref = r.total(g.config_bit, g.phase_setpoint);
    CHECK(g.counts.n_t == ref.n_t);
    CHECK(g.counts.n_1 == ref.n_1);
    CHECK(g.counts.n_2 == ref.n_2);
    CHECK(g.counts.n_c == ref.n_c);
  }
}

TEST_CASE("logged emission delays live inside the gate") {
  RunConfig c = boosted_config(RunMode::forced_open);
  c.log_records = true;
  c.source.mu_bg = 0.0;
  c.detector.dark_rate_d1 = 0.0;
  c.detector.dark_rate_d2 = 0.0;
  const RunResult r = run(c);
  REQUIRE(!r.log.records.empty());
  double sum = 0.0;
  for (const auto& rec : r.log.records) {
    REQUIRE(rec.emission_delay >= 0.0);  // every hit here is a signal photon
    REQUIRE(rec.emission_delay <= c.timing.gate_width);
    sum += rec.emission_delay;
  }
  // Mean of the gate-truncated exponential.
  CHECK(sum / static_cast<double>(r.log.records.size()) ==
        Catch::Approx(17.043332979759388).margin(0.5));
}

TEST_CASE("phase sweep concatenates points with contiguous pulse indices") {
  RunConfig c = boosted_config(RunMode::forced_closed);
  c.log_records = true;
  c.phase_schedule = {{0.0, 50000}, {0.5, 50000}, {1.0, 50000}};
  const RunResult r = sweep_phase(c);
  CHECK(r.total().n_t == 150000);
  uint64_t last = 0;
  for (const auto& rec : r.log.records) {
    CHECK(rec.pulse_index >= last);
    last = rec.pulse_index;
    if (rec.pulse_index < 50000) CHECK(rec.phase_setpoint == 0.0);
    else if (rec.pulse_index < 100000) CHECK(rec.phase_setpoint == 0.5);
    else CHECK(rec.phase_setpoint == 1.0);
  }
  CHECK(last < 150000);

  c.phase_schedule = {{0.0, 1000}};
  CHECK_THROWS_AS(sweep_phase(c), std::invalid_argument);
}

TEST_CASE("blocked runs kill one output up to darks") {
  RunConfig c = boosted_config(RunMode::blocked);
  c.blocked_path = 2;
  c.n_triggers = 1000000;
  const CountSummary s = run(c).total();
  // Open configuration with path 2 blocked: only darks can fire D2.
  const double expected_d2 = c.detector.dark_prob(2) * c.n_triggers;
  CHECK(static_cast<double>(s.n_2) < expected_d2 + 5.0 * std::sqrt(expected_d2) + 5.0);
  CHECK(s.n_1 > 10000);
}

TEST_CASE("hbt histogram has the configured geometry and is deterministic") {
  RunConfig c;
  c.mode = RunMode::hbt;
  c.n_triggers = 100000000;
  c.seed = 4;
  c.log_records = false;
  const Histogram a = hbt_run(c);
  const Histogram b = hbt_run(c);
  CHECK(a.counts == b.counts);
  CHECK(a.tau_max == Catch::Approx(5.5 * 238.0));
  CHECK(a.counts.size() == static_cast<size_t>(std::ceil(2 * a.tau_max)));
  CHECK(a.n_triggers == c.n_triggers);
  CHECK(a.n1 > 0);
  CHECK(a.n2 > 0);
  uint64_t pairs = 0;
  for (uint64_t v : a.counts) pairs += v;
  CHECK(pairs > 0);
  CHECK_THROWS_AS(run(c), std::invalid_argument);
  c.mode = RunMode::forced_open;
  CHECK_THROWS_AS(hbt_run(c), std::invalid_argument);
}

TEST_CASE("classical source mode is accepted only with poissonian statistics") {
  RunConfig c = boosted_config(RunMode::classical_poissonian);
  CHECK_THROWS_AS(run(c), ConfigError);
  c.source.mode = EmitterMode::poissonian;
  c.source.poisson_mean = 0.1;
  const CountSummary s = run(c).total();
  CHECK(s.n_c > 0);  // classical light shows no anticorrelation
}
