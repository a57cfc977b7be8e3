#pragma once

// Exact geometry of the hyperbolic upper half-plane (curvature -1).
//
// Conventions used throughout the library:
//  * points are complex numbers z with Im z > 0, metric (dx^2 + dy^2) / y^2;
//  * a covector xi = xi_x dx + xi_y dy is packed as the complex number xi_x + i xi_y,
//    its dual norm is ||xi||_z = Im z * |xi|;
//  * a unit frame g in PSL(2,R) represents the state (g.i, push of the upward unit covector at i);
//  * geodesic flow is right multiplication by diag(e^{t/2}, e^{-t/2});
//  * xi_perp is xi rotated clockwise in the chart (-i * xi). With this orientation the base
//    point of both horocycle flows moves along xi_perp, the unstable one is right multiplication
//    by the lower unipotent and the stable one by the upper unipotent.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "horoflow/errors.hpp"

namespace horoflow {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};

/// Real 2x2 matrix of determinant one acting on the upper half-plane by z -> (az+b)/(cz+d).
/// A matrix and its negative define the same map.
struct MoebiusMap {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

  static constexpr MoebiusMap identity() { return {}; }

  constexpr double det() const { return a * d - b * c; }
  constexpr double trace() const { return a + d; }
  constexpr MoebiusMap inverse() const { return {d, -b, -c, a}; }
  constexpr MoebiusMap negated() const { return {-a, -b, -c, -d}; }

  MoebiusMap normalized() const {
    const double dt = det();
    if (!(dt > 0.0)) throw InternalError("MoebiusMap: non-positive determinant");
    const double s = 1.0 / std::sqrt(dt);
    return {a * s, b * s, c * s, d * s};
  }

  Complex apply(Complex z) const {
    const Complex den = c * z + d;
    if (den == 0.0) throw InternalError("MoebiusMap: cz + d vanished");
    return (a * z + b) / den;
  }

  /// Complex derivative m'(z) = 1 / (cz+d)^2 (determinant one).
  Complex derivative(Complex z) const {
    const Complex den = c * z + d;
    if (den == 0.0) throw InternalError("MoebiusMap: cz + d vanished");
    return 1.0 / (den * den);
  }

  friend std::ostream& operator<<(std::ostream& os, const MoebiusMap& m) {
    return os << "[[" << m.a << ", " << m.b << "], [" << m.c << ", " << m.d << "]]";
  }
};

/// Raw product without renormalization.
constexpr MoebiusMap multiply_raw(const MoebiusMap& x, const MoebiusMap& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
          x.c * y.b + x.d * y.d};
}

/// Product renormalized to determinant one whenever the drift exceeds round-off.
inline MoebiusMap operator*(const MoebiusMap& x, const MoebiusMap& y) {
  MoebiusMap p = multiply_raw(x, y);
  if (std::abs(p.det() - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) p = p.normalized();
  return p;
}

/// Entrywise distance modulo the global sign.
inline double projective_distance(const MoebiusMap& x, const MoebiusMap& y) {
  auto dist = [](const MoebiusMap& p, const MoebiusMap& q) {
    return std::max({std::abs(p.a - q.a), std::abs(p.b - q.b), std::abs(p.c - q.c),
                     std::abs(p.d - q.d)});
  };
  return std::min(dist(x, y), dist(x, y.negated()));
}

// One-parameter subgroups.
inline MoebiusMap geodesic_element(double t) {
  return {std::exp(0.5 * t), 0.0, 0.0, std::exp(-0.5 * t)};
}
constexpr MoebiusMap upper_unipotent(double s) { return {1.0, s, 0.0, 1.0}; }
constexpr MoebiusMap lower_unipotent(double s) { return {1.0, 0.0, s, 1.0}; }
/// Rotation about i; pushes the covector i at i to i * e^{2 i phi}.
inline MoebiusMap rotation_element(double phi) {
  const double cs = std::cos(phi), sn = std::sin(phi);
  return {cs, sn, -sn, cs};
}

// ---------------------------------------------------------------------------
// Points and cotangent states
// ---------------------------------------------------------------------------

inline void require_upper_half_plane(Complex z, const char* where) {
  if (!(z.imag() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw DomainError(std::string(where) + ": point must satisfy Im z > 0");
}

/// cosh of the hyperbolic distance.
inline double cosh_distance(Complex z1, Complex z2) {
  return 1.0 + std::norm(z1 - z2) / (2.0 * z1.imag() * z2.imag());
}

inline double hyperbolic_distance(Complex z1, Complex z2) {
  require_upper_half_plane(z1, "hyperbolic_distance");
  require_upper_half_plane(z2, "hyperbolic_distance");
  // 2 asinh(|z1 - z2| / (2 sqrt(y1 y2))) equals arccosh(1 + |z1-z2|^2 / (2 y1 y2)) and stays
  // accurate for nearby points.
  return 2.0 * std::asinh(std::abs(z1 - z2) / (2.0 * std::sqrt(z1.imag() * z2.imag())));
}

/// Point with covector on T*H. `xi` packs (xi_x, xi_y) as xi_x + i xi_y.
struct CotangentState {
  Complex z{0.0, 1.0};
  Complex xi{0.0, 1.0};

  double xi_x() const { return xi.real(); }
  double xi_y() const { return xi.imag(); }
  double norm() const { return z.imag() * std::abs(xi); }
  /// p_0 = ||xi||^2 / 2.
  double kinetic_energy() const {
    const double n = norm();
    return 0.5 * n * n;
  }
};

/// Dual metric pairing g*_z(eta1, eta2).
inline double cometric(Complex z, Complex eta1, Complex eta2) {
  const double y = z.imag();
  return y * y * (eta1.real() * eta2.real() + eta1.imag() * eta2.imag());
}

/// Pushes a covector at z forward by m: xi' = xi / conj(m'(z)).
inline Complex push_covector(const MoebiusMap& m, Complex z, Complex xi) {
  return xi / std::conj(m.derivative(z));
}

inline CotangentState apply_moebius(const MoebiusMap& m, const CotangentState& s) {
  require_upper_half_plane(s.z, "apply_moebius");
  return {m.apply(s.z), push_covector(m, s.z, s.xi)};
}

/// Covector rotated by a quarter turn clockwise in the chart; (xi, xi_perp) is the
/// orthogonal pair whose second member points along the horocycle direction.
inline Complex perp(Complex xi) { return Complex{xi.imag(), -xi.real()}; }

inline CotangentState rotate_covector_perp(const CotangentState& s) {
  if (s.xi == 0.0) throw DomainError("rotate_covector_perp: zero covector");
  return {s.z, perp(s.xi)};
}

// ---------------------------------------------------------------------------
// Unit frames and exact flows
// ---------------------------------------------------------------------------

struct UnitTangentFrame {
  MoebiusMap g;

  static constexpr UnitTangentFrame identity() { return {}; }
  Complex base() const { return g.apply(kI); }
};

enum class HorocycleBranch { unstable, stable };

inline UnitTangentFrame geodesic_flow_exact(const UnitTangentFrame& f, double t) {
  return {f.g * geodesic_element(t)};
}

inline UnitTangentFrame horocycle_flow(const UnitTangentFrame& f, double s,
                                       HorocycleBranch branch) {
  return {f.g * (branch == HorocycleBranch::unstable ? lower_unipotent(s) : upper_unipotent(s))};
}

inline CotangentState frame_to_state(const UnitTangentFrame& f) {
  const Complex den = f.g.c * kI + f.g.d;
  return {f.g.apply(kI), kI * std::conj(den * den)};
}

inline constexpr double kUnitTolerance = 1e-9;

inline UnitTangentFrame state_to_frame(const CotangentState& s) {
  require_upper_half_plane(s.z, "state_to_frame");
  const double n = s.norm();
  if (!(std::abs(n - 1.0) <= kUnitTolerance))
    throw DomainError("state_to_frame: covector is not unit (norm " + std::to_string(n) + ")");
  const double x = s.z.real(), y = s.z.imag(), r = std::sqrt(y);
  const MoebiusMap lift{r, x / r, 0.0, 1.0 / r};
  const double theta = std::arg(s.xi);
  return {lift * rotation_element(0.5 * (theta - 0.5 * std::numbers::pi))};
}

/// Frames equal up to the global sign.
inline bool same_frame(const UnitTangentFrame& f1, const UnitTangentFrame& f2, double tol) {
  return projective_distance(f1.g, f2.g) <= tol;
}

/// Left-invariant distance on the unit bundle: sqrt(2) * min_sign ||f1^{-1} f2 -+ I||_F.
/// At the identity it coincides with the Sasaki norm of the displacement to first order
/// (geodesic, horizontal-perpendicular and vertical generators are orthonormal).
inline double frame_distance(const UnitTangentFrame& f1, const UnitTangentFrame& f2) {
  const MoebiusMap q = multiply_raw(f1.g.inverse(), f2.g);
  auto fro = [](double a, double b, double c, double d) {
    return std::sqrt(a * a + b * b + c * c + d * d);
  };
  const double plus = fro(q.a - 1.0, q.b, q.c, q.d - 1.0);
  const double minus = fro(q.a + 1.0, q.b, q.c, q.d + 1.0);
  return std::numbers::sqrt2 * std::min(plus, minus);
}

/// Constant-curvature Riccati and expansion constants.
struct CurvatureConstants {
  double U_u = 1.0;
  double U_s = -1.0;
  double U_plus = 1.0;
  double U_minus = 1.0;
  double gamma_c = 0.5;
};

inline constexpr CurvatureConstants kCurvatureMinusOne{};

// Cayley map between the half-plane (center i) and the Poincare disk (center 0).
inline Complex to_disk(Complex z) { return (z - kI) / (z + kI); }
inline Complex from_disk(Complex w) { return kI * (1.0 + w) / (1.0 - w); }

/// Chart angle of a covector in (-pi, pi].
inline double covector_angle(Complex xi) { return std::arg(xi); }

/// Unit state at z whose covector makes chart angle theta.
inline CotangentState unit_state(Complex z, double theta) {
  require_upper_half_plane(z, "unit_state");
  return {z, std::polar(1.0 / z.imag(), theta)};
}

}  // namespace horoflow
