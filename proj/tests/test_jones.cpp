#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dcsim/jones.hpp"
#include "dcsim/rng.hpp"

using namespace dcsim;

TEST_CASE("factory elements are unitary, blocker is a projector") {
  RngStream rng(101, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    const double angle = (rng.uniform() - 0.5) * 20.0;
    CHECK(OpticalElement::half_wave_plate(angle).m.is_unitary());
    CHECK(OpticalElement::phase_retarder(angle).m.is_unitary());
  }
  CHECK(OpticalElement::polarizing_splitter().m.is_unitary());
  CHECK(OpticalElement::wollaston().m.is_unitary());
  CHECK(OpticalElement::eom(EomState::open).m.is_unitary());
  CHECK(OpticalElement::eom(EomState::closed).m.is_unitary());
  CHECK(OpticalElement::blocker(1).m.is_projector());
  CHECK(OpticalElement::blocker(2).m.is_projector());
  CHECK_FALSE(OpticalElement::blocker(1).m.is_unitary());
}

TEST_CASE("non-unitary matrices are rejected at construction") {
  CHECK_THROWS_AS(OpticalElement(ElementKind::eom, Mat2{2.0, 0.0, 0.0, 1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      OpticalElement(ElementKind::blocker, Mat2{0.5, 0.0, 0.0, 1.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(OpticalElement::blocker(3), std::invalid_argument);
}

TEST_CASE("unitary propagation preserves the norm") {
  RngStream rng(102, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    JonesVector v{complexd(rng.normal(), rng.normal()),
                  complexd(rng.normal(), rng.normal())};
    const double n0 = v.norm2();
    v = apply_element(v, OpticalElement::phase_retarder(rng.uniform() * 6.0));
    v = apply_element(v, OpticalElement::half_wave_plate(rng.uniform()));
    v = apply_element(v, OpticalElement::eom(EomState::closed));
    CHECK(v.norm2() == Catch::Approx(n0).epsilon(1e-12));
  }
}

TEST_CASE("closed-form and chain probabilities agree on a phase grid") {
  for (double overlap : {0.0, 0.5, 0.94, 1.0}) {
    InterferometerModel m;
    m.overlap = overlap;
    for (int i = 0; i < 100; ++i) {
      m.phase = -M_PI + 2.0 * M_PI * i / 99.0;
      for (EomState s : {EomState::open, EomState::closed}) {
        const auto closed_form = detection_probabilities(m, s);
        const auto chain = chain_detection_probabilities(m, s);
        CHECK(chain.p1 == Catch::Approx(closed_form.p1).margin(1e-12));
        CHECK(chain.p2 == Catch::Approx(closed_form.p2).margin(1e-12));
        CHECK(closed_form.p1 + closed_form.p2 ==
              Catch::Approx(1.0).margin(1e-12));
      }
    }
  }
}

TEST_CASE("closed configuration interferes, open does not") {
  InterferometerModel m;
  m.overlap = 0.94;
  m.phase = 0.3;
  const auto closed = detection_probabilities(m, EomState::closed);
  CHECK(closed.p1 == Catch::Approx(0.8879077390075487).margin(1e-14));
  CHECK(closed.p2 == Catch::Approx(1.0 - 0.8879077390075487).margin(1e-14));
  const auto open = detection_probabilities(m, EomState::open);
  CHECK(open.p1 == 0.5);
  CHECK(open.p2 == 0.5);

  m.overlap = 0.0;  // fully distinguishable paths: no fringe left
  const auto flat = detection_probabilities(m, EomState::closed);
  CHECK(flat.p1 == Catch::Approx(0.5).margin(1e-14));
}

TEST_CASE("blocked-path probabilities") {
  InterferometerModel m;
  m.phase = 1.1;

  auto p = blocked_probabilities(m, EomState::open, 2);
  CHECK(p.p1 == 0.5);
  CHECK(p.p2 == 0.0);
  p = blocked_probabilities(m, EomState::open, 1);
  CHECK(p.p1 == 0.0);
  CHECK(p.p2 == 0.5);
  p = blocked_probabilities(m, EomState::closed, 2);
  CHECK(p.p1 == 0.25);
  CHECK(p.p2 == 0.25);

  // Chain propagation reproduces the same values, phase independent.
  m.blocked = 2;
  for (double phase : {0.0, 0.4, 2.2}) {
    m.phase = phase;
    const auto open_chain = chain_detection_probabilities(m, EomState::open);
    CHECK(open_chain.p1 == Catch::Approx(0.5).margin(1e-12));
    CHECK(open_chain.p2 == Catch::Approx(0.0).margin(1e-12));
    const auto closed_chain =
        chain_detection_probabilities(m, EomState::closed);
    CHECK(closed_chain.p1 == Catch::Approx(0.25).margin(1e-12));
    CHECK(closed_chain.p2 == Catch::Approx(0.25).margin(1e-12));
  }

  CHECK_THROWS_AS(blocked_probabilities(m, EomState::open, 0),
                  std::domain_error);
  CHECK_THROWS_AS(detection_probabilities(m, EomState::open),
                  std::logic_error);
}

TEST_CASE("background photons route without interference") {
  InterferometerModel m;
  m.phase = 0.7;
  auto p = background_routing(m, EomState::closed);
  CHECK(p.p1 == 0.5);
  CHECK(p.p2 == 0.5);
  m.blocked = 1;
  p = background_routing(m, EomState::open);
  CHECK(p.p1 == 0.0);
  CHECK(p.p2 == 0.5);
  p = background_routing(m, EomState::closed);
  CHECK(p.p1 == 0.25);
  CHECK(p.p2 == 0.25);
}

TEST_CASE("model validation") {
  InterferometerModel m;
  m.overlap = 1.5;
  CHECK_THROWS_AS(m.validate(), std::domain_error);
  m.overlap = 0.94;
  m.length_m = -1.0;
  CHECK_THROWS_AS(m.validate(), std::domain_error);
  m.length_m = 48.0;
  m.blocked = 5;
  CHECK_THROWS_AS(m.validate(), std::domain_error);
}
