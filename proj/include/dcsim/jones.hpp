#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>

namespace dcsim {

using complexd = std::complex<double>;

inline constexpr double kUnitarityTol = 1e-12;

/// Polarization state over the two interferometer paths: a_s is the amplitude
/// of the S-polarized path (path 1), a_p of the P-polarized path (path 2).
struct JonesVector {
  complexd a_s{0.0, 0.0};
  complexd a_p{0.0, 0.0};

  double norm2() const { return std::norm(a_s) + std::norm(a_p); }
};

struct Mat2 {
  complexd m00, m01, m10, m11;

  JonesVector apply(const JonesVector& v) const {
    return {m00 * v.a_s + m01 * v.a_p, m10 * v.a_s + m11 * v.a_p};
  }

  Mat2 mul(const Mat2& o) const {
    return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
            m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
  }

  bool is_unitary(double tol = kUnitarityTol) const {
    // m†m == I
    const complexd a = std::conj(m00) * m00 + std::conj(m10) * m10;
    const complexd b = std::conj(m00) * m01 + std::conj(m10) * m11;
    const complexd c = std::conj(m01) * m00 + std::conj(m11) * m10;
    const complexd d = std::conj(m01) * m01 + std::conj(m11) * m11;
    return std::abs(a - 1.0) <= tol && std::abs(b) <= tol &&
           std::abs(c) <= tol && std::abs(d - 1.0) <= tol;
  }

  bool is_projector(double tol = kUnitarityTol) const {
    const Mat2 sq = mul(*this);
    return std::abs(sq.m00 - m00) <= tol && std::abs(sq.m01 - m01) <= tol &&
           std::abs(sq.m10 - m10) <= tol && std::abs(sq.m11 - m11) <= tol;
  }
};

/// EOM drive state. V = 0 leaves the paths unrecombined (open interferometer);
/// V = V_pi recombines them (closed).
enum class EomState { open, closed };

enum class ElementKind {
  polarizing_splitter,
  half_wave_plate,
  phase_retarder,
  eom,
  wollaston,
  blocker,
};

struct OpticalElement {
  ElementKind kind;
  Mat2 m;

  OpticalElement(ElementKind k, const Mat2& mat) : kind(k), m(mat) {
    if (kind == ElementKind::blocker) {
      if (!m.is_projector())
        throw std::invalid_argument("blocker matrix is not a projector");
    } else if (!m.is_unitary()) {
      throw std::invalid_argument("non-unitary matrix for a unitary element");
    }
  }

  // The splitter maps the 45-degree input onto the S/P path basis; in that
  // basis its matrix is the identity.
  static OpticalElement polarizing_splitter() {
    return {ElementKind::polarizing_splitter, identity()};
  }

  static OpticalElement half_wave_plate(double axis_rad) {
    const double c = std::cos(2.0 * axis_rad);
    const double s = std::sin(2.0 * axis_rad);
    return {ElementKind::half_wave_plate, Mat2{c, s, s, -c}};
  }

  static OpticalElement phase_retarder(double delta_rad) {
    return {ElementKind::phase_retarder,
            Mat2{1.0, 0.0, 0.0, std::polar(1.0, delta_rad)}};
  }

  /// Closed: half-wave plate with eigenaxes at 22.5 degrees, i.e. a 45-degree
  /// polarization rotation. Open: identity.
  static OpticalElement eom(EomState state) {
    if (state == EomState::open) return {ElementKind::eom, identity()};
    const double r = std::sqrt(0.5);
    return {ElementKind::eom, Mat2{r, r, r, -r}};
  }

  // Port mapping element: port 1 reads |a_s|^2, port 2 reads |a_p|^2.
  static OpticalElement wollaston() {
    return {ElementKind::wollaston, identity()};
  }

  static OpticalElement blocker(int path) {
    if (path == 1) return {ElementKind::blocker, Mat2{0.0, 0.0, 0.0, 1.0}};
    if (path == 2) return {ElementKind::blocker, Mat2{1.0, 0.0, 0.0, 0.0}};
    throw std::invalid_argument("blocker path must be 1 or 2");
  }

 private:
  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
};

inline JonesVector apply_element(const JonesVector& state,
                                 const OpticalElement& elem) {
  return elem.m.apply(state);
}

/// Interferometer summary: arm phase shift, mode-overlap factor limiting the
/// visibility, physical length, and an optionally blocked path.
struct InterferometerModel {
  double phase = 0.0;      // radians
  double overlap = 0.94;   // in [0, 1]
  double length_m = 48.0;  // meters
  std::optional<int> blocked;

  void validate() const {
    if (!(overlap >= 0.0 && overlap <= 1.0))
      throw std::domain_error("overlap must be in [0, 1]");
    if (!(length_m > 0.0)) throw std::domain_error("length must be positive");
    if (blocked && *blocked != 1 && *blocked != 2)
      throw std::domain_error("blocked path must be 1 or 2");
  }
};

struct PortProbabilities {
  double p1 = 0.0;
  double p2 = 0.0;
};

/// Output-port probabilities for a normalized 45-degree input with no path
/// blocked. Closed: (1 +- M cos 2phi)/2; open: 1/2 each, independent of phi.
inline PortProbabilities detection_probabilities(
    const InterferometerModel& model, EomState config) {
  model.validate();
  if (model.blocked)
    throw std::logic_error("detection_probabilities requires no blocked path");
  if (config == EomState::open) return {0.5, 0.5};
  const double t = model.overlap * std::cos(2.0 * model.phase);
  return {0.5 * (1.0 + t), 0.5 * (1.0 - t)};
}

/// Port probabilities with one path blocked. Open configuration: survivors of
/// the unblocked path all reach the matching detector. Closed: the single
/// surviving arm splits equally, with no interference term.
inline PortProbabilities blocked_probabilities(const InterferometerModel& model,
                                               EomState config, int blocked) {
  model.validate();
  if (blocked != 1 && blocked != 2)
    throw std::domain_error("blocked path must be 1 or 2");
  if (config == EomState::closed) return {0.25, 0.25};
  return blocked == 2 ? PortProbabilities{0.5, 0.0}
                      : PortProbabilities{0.0, 0.5};
}

/// Port probabilities by explicit element-chain propagation. The coherent
/// fraction M goes through the full chain; the non-overlapping fraction
/// 1 - M propagates each path separately and its intensities add.
inline PortProbabilities chain_detection_probabilities(
    const InterferometerModel& model, EomState config) {
  model.validate();
  const double r = std::sqrt(0.5);
  const OpticalElement chain[] = {
      OpticalElement::polarizing_splitter(),
      model.blocked ? OpticalElement::blocker(*model.blocked)
                    : OpticalElement::phase_retarder(0.0),
      OpticalElement::phase_retarder(2.0 * model.phase),
      OpticalElement::eom(config),
      OpticalElement::wollaston(),
  };
  auto propagate = [&](JonesVector v) {
    for (const auto& e : chain) v = apply_element(v, e);
    return v;
  };
  const JonesVector coherent = propagate({r, r});
  const JonesVector arm1 = propagate({r, 0.0});
  const JonesVector arm2 = propagate({0.0, r});
  const double m = model.overlap;
  return {m * std::norm(coherent.a_s) +
              (1.0 - m) * (std::norm(arm1.a_s) + std::norm(arm2.a_s)),
          m * std::norm(coherent.a_p) +
              (1.0 - m) * (std::norm(arm1.a_p) + std::norm(arm2.a_p))};
}

/// Dispatch used by the experiment driver: blocked model or not.
inline PortProbabilities routing_probabilities(const InterferometerModel& model,
                                               EomState config) {
  if (model.blocked) return blocked_probabilities(model, config, *model.blocked);
  return detection_probabilities(model, config);
}

/// Routing of an unpolarized (background) photon: equal odds for the two
/// paths, no interference term in either configuration.
inline PortProbabilities background_routing(const InterferometerModel& model,
                                            EomState config) {
  model.validate();
  if (!model.blocked) return {0.5, 0.5};
  if (config == EomState::closed) return {0.25, 0.25};
  return *model.blocked == 2 ? PortProbabilities{0.5, 0.0}
                             : PortProbabilities{0.0, 0.5};
}

}  // namespace dcsim
