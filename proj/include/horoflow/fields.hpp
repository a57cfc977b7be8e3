#pragma once

// Gamma-invariant potentials and observables. Everything here is a periodization of a compactly
// supported function on the plane (or its unit bundle), evaluated through precomputed lists of
// the translates that can reach the fundamental domain.

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "horoflow/errors.hpp"
#include "horoflow/hyperbolic.hpp"
#include "horoflow/quadrature.hpp"
#include "horoflow/surface.hpp"

namespace horoflow {

using SurfacePtr = std::shared_ptr<const FuchsianSurface>;

/// Extra distance covered by the support-proximity lists of potentials.
inline constexpr double kReachMargin = 1.0;

/// psi(u) = exp(1 - 1/(1-s)), s = (u-1)/(cosh r_max - 1), as a function of u = cosh d.
/// psi(1) = 1, smooth, flat to all orders at u = cosh r_max.
struct BumpProfile {
  double r_max = 0.7;
  double u_max = std::cosh(0.7);

  static BumpProfile with_radius(double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("bump radius must be positive", "r_max");
    return {r, std::cosh(r)};
  }

  double value(double u) const {
    if (u >= u_max) return 0.0;
    const double s = std::max(u - 1.0, 0.0) / (u_max - 1.0);
    return std::exp(1.0 - 1.0 / (1.0 - s));
  }

  /// d psi / du.
  double derivative(double u) const {
    if (u >= u_max) return 0.0;
    const double s = std::max(u - 1.0, 0.0) / (u_max - 1.0);
    const double q = 1.0 / (1.0 - s);
    return -std::exp(1.0 - q) * q * q / (u_max - 1.0);
  }

  /// Integral of psi over [1, u_max]; the plane integral of psi(cosh d) is 2 pi times this.
  double integral() const {
    return quad::composite([&](double u) { return value(u); }, 1.0, u_max, 64, 16);
  }
};

namespace detail {

/// Value and (d/dx + i d/dy) of psi(cosh d(z, q)).
inline double radial_term(const BumpProfile& p, Complex z, Complex q, Complex* grad) {
  const double y = z.imag(), qy = q.imag();
  const Complex dz = z - q;
  const double u = 1.0 + std::norm(dz) / (2.0 * y * qy);
  if (u >= p.u_max) return 0.0;
  if (grad) {
    const double du_dx = dz.real() / (y * qy);
    const double du_dy = dz.imag() / (y * qy) - std::norm(dz) / (2.0 * y * y * qy);
    *grad += p.derivative(u) * Complex{du_dx, du_dy};
  }
  return p.value(u);
}

/// Reduced copy of a center point.
inline Complex reduce_point(const FuchsianSurface& surf, Complex z) {
  return reducing_element(surf, z).first.apply(z);
}

}  // namespace detail

/// Sum of radial bumps A_j psi(cosh d(z, gamma c_j)) over the group.
struct RadialPotential {
  struct Image {
    Complex point;
    double amplitude;
  };

  SurfacePtr surface;
  std::vector<Complex> centers;  // reduced, upper half-plane
  std::vector<double> amplitudes;
  BumpProfile profile;
  std::vector<Image> images;     // translates within domain_radius + r_max of i
  std::vector<Complex> reach;    // translates within domain_radius + r_max + kReachMargin of i

  double value_reduced(Complex z) const {
    double v = 0.0;
    for (const auto& im : images) v += im.amplitude * detail::radial_term(profile, z, im.point, nullptr);
    return v;
  }

  Complex gradient_reduced(Complex z) const {
    Complex g{0.0, 0.0};
    for (const auto& im : images) {
      Complex gi{0.0, 0.0};
      detail::radial_term(profile, z, im.point, &gi);
      g += im.amplitude * gi;
    }
    return g;
  }

  double sup_bound() const {
    double s = 0.0;
    for (double a : amplitudes) s += std::abs(a);
    return s;
  }

  /// False only when the support is farther than `extra` (at most kReachMargin) from the
  /// domain point z.
  bool near_support(Complex z, double extra = 0.0) const {
    const double lim = std::cosh(profile.r_max + extra);
    for (Complex q : reach)
      if (cosh_distance(z, q) < lim) return true;
    return false;
  }
};

inline RadialPotential make_radial_potential(SurfacePtr surf, std::vector<Complex> centers,
                                             std::vector<double> amplitudes, double r_max) {
  if (!surf) throw ConfigError("potential needs a surface");
  if (centers.size() != amplitudes.size())
    throw ConfigError("centers and amplitudes differ in length", "amplitudes");
  if (!(r_max < surf->injectivity_radius))
    throw ConfigError("r_max " + std::to_string(r_max) + " must be below the injectivity radius " +
                          std::to_string(surf->injectivity_radius),
                      "r_max");
  RadialPotential V;
  V.surface = surf;
  V.profile = BumpProfile::with_radius(r_max);
  V.amplitudes = std::move(amplitudes);
  for (Complex c : centers) {
    require_upper_half_plane(c, "make_radial_potential");
    V.centers.push_back(detail::reduce_point(*surf, c));
  }
  for (std::size_t j = 0; j < V.centers.size(); ++j) {
    if (V.amplitudes[j] == 0.0) continue;
    for (const auto& [sigma, q] :
         orbit_near_center(*surf, V.centers[j], surf->domain_radius + r_max + kReachMargin)) {
      V.reach.push_back(q);
      if (cosh_distance(q, kI) <= std::cosh(surf->domain_radius + r_max + 1e-9))
        V.images.push_back({q, V.amplitudes[j]});
    }
  }
  return V;
}

/// Smooth bump on (-1, 1): exp(-1/(1-s^2)).
inline double unit_bump(double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }
inline double unit_bump_derivative(double s) {
  if (!(std::abs(s) < 1.0)) return 0.0;
  const double q = 1.0 - s * s;
  return unit_bump(s) * (-2.0 * s / (q * q));
}

/// Potential supported on the (geodesic time t, unstable horocycle parameter tau) patch through
/// an anchor frame f0: W(f0 . G^t H^tau . i) = chi1(t) chi2(tau) on the universal cover,
/// periodized over the group.
///
/// Global coordinates of w = f0^{-1} z = u + iv: tau = u / v, t = log(|w|^2 / v).
struct PatchPotential {
  SurfacePtr surface;
  UnitTangentFrame anchor;
  double delta = 0.25;
  double chi1_scale = 1.0;  // normalizes the integral of chi1 e^{-t} over t > 0 to 2
  double patch_radius = 0.0;
  double patch_diameter = 0.0;
  std::vector<MoebiusMap> chart_maps;  // (sigma f0)^{-1} for translates reaching the domain
  std::vector<Complex> reach;          // anchor base translates within reach of the domain

  // chi1 supported in (-1/2, 1).
  double chi1(double t) const { return chi1_scale * unit_bump((t - 0.25) / 0.75); }
  double chi1_derivative(double t) const {
    return chi1_scale * unit_bump_derivative((t - 0.25) / 0.75) / 0.75;
  }
  // chi2(tau) = delta b(tau/delta) (1 + tau/delta) / b(0): nonnegative, chi2'(0) = 1.
  double chi2(double tau) const {
    const double s = tau / delta;
    return delta * unit_bump(s) * (1.0 + s) / unit_bump(0.0);
  }
  double chi2_derivative(double tau) const {
    const double s = tau / delta;
    return (unit_bump_derivative(s) * (1.0 + s) + unit_bump(s)) / unit_bump(0.0);
  }

  /// Value in patch coordinates of w = chart(z); adds the z-gradient when requested.
  double term(const MoebiusMap& chart, Complex z, Complex* grad) const {
    const Complex w = chart.apply(z);
    const double u = w.real(), v = w.imag();
    const double n2 = std::norm(w);
    const double tau = u / v;
    if (!(std::abs(tau) < delta)) return 0.0;
    const double t = std::log(n2 / v);
    if (!(t > -0.5 && t < 1.0)) return 0.0;
    const double c1 = chi1(t), c2 = chi2(tau);
    if (grad) {
      const double t_u = 2.0 * u / n2, t_v = 2.0 * v / n2 - 1.0 / v;
      const double tau_u = 1.0 / v, tau_v = -u / (v * v);
      const double d1 = chi1_derivative(t), d2 = chi2_derivative(tau);
      const double F_u = d1 * c2 * t_u + c1 * d2 * tau_u;
      const double F_v = d1 * c2 * t_v + c1 * d2 * tau_v;
      const Complex m = chart.derivative(z);
      const double p = m.real(), q = m.imag();
      *grad += Complex{F_u * p + F_v * q, -F_u * q + F_v * p};
    }
    return c1 * c2;
  }

  double value_reduced(Complex z) const {
    double v = 0.0;
    for (const auto& m : chart_maps) v += term(m, z, nullptr);
    return v;
  }

  Complex gradient_reduced(Complex z) const {
    Complex g{0.0, 0.0};
    for (const auto& m : chart_maps) term(m, z, &g);
    return g;
  }

  double sup_bound() const {
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i <= 400; ++i) {
      m1 = std::max(m1, chi1(-0.5 + 1.5 * i / 400.0));
      m2 = std::max(m2, chi2(delta * (-1.0 + 2.0 * i / 400.0)));
    }
    return m1 * m2 * static_cast<double>(std::max<std::size_t>(1, chart_maps.size()));
  }

  bool near_support(Complex z, double extra = 0.0) const {
    const double lim = std::cosh(patch_radius + extra);
    for (Complex q : reach)
      if (cosh_distance(z, q) < lim) return true;
    return false;
  }

  /// Point of the plane with patch coordinates (t, tau) on the anchor's sheet.
  Complex patch_point(double t, double tau) const {
    return anchor.g.apply(std::exp(t) * Complex{tau, 1.0} / (1.0 + tau * tau));
  }
};

/// Builds the geodesic-patch potential through rho0. Throws ConfigError when the patch
/// [-1/2, 1] x [-delta, delta] is not embedded (diameter at least twice the injectivity radius).
inline PatchPotential build_bump_along_geodesic(SurfacePtr surf, const CotangentState& rho0,
                                                double delta = 0.25) {
  if (!surf) throw ConfigError("potential needs a surface");
  if (!(delta > 0.0)) throw ConfigError("patch width must be positive", "delta");
  PatchPotential W;
  W.surface = surf;
  W.delta = delta;
  W.anchor = reduce_frame(*surf, state_to_frame(rho0));
  const double raw = quad::composite(
      [&](double t) { return unit_bump((t - 0.25) / 0.75) * std::exp(-t); }, 0.0, 1.0, 32, 16);
  W.chi1_scale = 2.0 / raw;

  std::vector<Complex> boundary;
  constexpr int kSide = 64;
  for (int i = 0; i <= kSide; ++i) {
    const double t = -0.5 + 1.5 * i / kSide;
    const double tau = delta * (-1.0 + 2.0 * i / kSide);
    boundary.push_back(W.patch_point(t, -delta));
    boundary.push_back(W.patch_point(t, delta));
    boundary.push_back(W.patch_point(-0.5, tau));
    boundary.push_back(W.patch_point(1.0, tau));
  }
  const Complex base = W.anchor.base();
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    W.patch_radius = std::max(W.patch_radius, hyperbolic_distance(boundary[i], base));
    for (std::size_t j = i + 1; j < boundary.size(); ++j)
      W.patch_diameter = std::max(W.patch_diameter, hyperbolic_distance(boundary[i], boundary[j]));
  }
  if (!(W.patch_diameter < 2.0 * surf->injectivity_radius))
    throw ConfigError("patch of diameter " + std::to_string(W.patch_diameter) +
                          " is not embedded (twice the injectivity radius is " +
                          std::to_string(2.0 * surf->injectivity_radius) + ")",
                      "delta");
  for (const auto& [sigma, q] :
       orbit_near_center(*surf, base, surf->domain_radius + W.patch_radius + kReachMargin)) {
    W.reach.push_back(q);
    if (cosh_distance(q, kI) <= std::cosh(surf->domain_radius + W.patch_radius + 1e-9))
      W.chart_maps.push_back((sigma * W.anchor.g).inverse());
  }
  return W;
}

using Potential = std::variant<RadialPotential, PatchPotential>;

inline const FuchsianSurface& potential_surface(const Potential& V) {
  return *std::visit([](const auto& p) -> const SurfacePtr& { return p.surface; }, V);
}

/// Value at a point of the closed fundamental domain.
inline double potential_value_reduced(const Potential& V, Complex z) {
  return std::visit([&](const auto& p) { return p.value_reduced(z); }, V);
}

/// Coordinate differential dV = dV/dx + i dV/dy at a point of the closed fundamental domain.
inline Complex potential_gradient_reduced(const Potential& V, Complex z) {
  return std::visit([&](const auto& p) { return p.gradient_reduced(z); }, V);
}

inline bool potential_near_support(const Potential& V, Complex z, double extra = 0.0) {
  return std::visit([&](const auto& p) { return p.near_support(z, extra); }, V);
}

inline double potential_sup_bound(const Potential& V) {
  return std::visit([](const auto& p) { return p.sup_bound(); }, V);
}

inline double eval_potential(const Potential& V, Complex z) {
  require_upper_half_plane(z, "eval_potential");
  const auto& surf = potential_surface(V);
  return potential_value_reduced(V, reducing_element(surf, z).first.apply(z));
}

/// Differential at an arbitrary point: the reduced differential pulled back by the reducing map.
inline Complex grad_potential(const Potential& V, Complex z) {
  require_upper_half_plane(z, "grad_potential");
  const auto& surf = potential_surface(V);
  const auto [gamma, steps] = reducing_element(surf, z);
  const Complex D = potential_gradient_reduced(V, gamma.apply(z));
  return steps == 0 ? D : D * std::conj(gamma.derivative(z));
}

// ---------------------------------------------------------------------------
// Perturbation families
// ---------------------------------------------------------------------------

struct PerturbationFamily {
  SurfacePtr surface;
  std::vector<Potential> potentials;

  std::size_t size() const { return potentials.size(); }
  int J() const { return static_cast<int>(potentials.size()) - 1; }

  double value_reduced(const std::vector<double>& eps, Complex z) const {
    double v = 0.0;
    for (std::size_t j = 0; j < potentials.size(); ++j)
      if (eps[j] != 0.0) v += eps[j] * potential_value_reduced(potentials[j], z);
    return v;
  }

  Complex gradient_reduced(const std::vector<double>& eps, Complex z) const {
    Complex g{0.0, 0.0};
    for (std::size_t j = 0; j < potentials.size(); ++j)
      if (eps[j] != 0.0) g += eps[j] * potential_gradient_reduced(potentials[j], z);
    return g;
  }

  /// V(eps, z) at any point.
  double value(const std::vector<double>& eps, Complex z) const {
    require_upper_half_plane(z, "PerturbationFamily::value");
    return value_reduced(eps, reducing_element(*surface, z).first.apply(z));
  }

  double sup_bound(const std::vector<double>& eps) const {
    double s = 0.0;
    for (std::size_t j = 0; j < potentials.size(); ++j)
      s += std::abs(eps[j]) * potential_sup_bound(potentials[j]);
    return s;
  }

  void check_eps(const std::vector<double>& eps) const {
    if (eps.size() != potentials.size())
      throw ConfigError("eps has " + std::to_string(eps.size()) + " entries, family has " +
                            std::to_string(potentials.size()),
                        "eps");
  }
};

/// One potential: a sum of radial bumps, centers in Poincare disk coordinates.
struct PotentialSpec {
  std::vector<Complex> centers_disk;
  std::vector<double> amplitudes;
};

struct FamilySpec {
  std::vector<PotentialSpec> potentials{
      {{{0.1056, 0.632641}, {-0.321606, -0.149488}, {0.580867, 0.052807}}, {2.0, -1.37936, -1.44706}},
      {{{0.527934, -0.389091}, {0.160125, 0.240799}, {-0.307705, -0.694915}}, {-1.34253, -1.66475, -1.7415}},
      {{{-0.665084, -0.265783}, {0.134003, -0.255837}, {-0.603737, 0.308401}}, {-1.182, -0.699047, -0.344043}}};
  double r_max = 1.4;
};

/// One radial potential per entry of the spec.
inline PerturbationFamily build_admissible_family(SurfacePtr surf, const FamilySpec& spec) {
  if (spec.potentials.empty()) throw ConfigError("family needs at least one potential", "family");
  if (!(spec.r_max > 0.0 && spec.r_max < surf->injectivity_radius))
    throw ConfigError("r_max " + std::to_string(spec.r_max) + " must lie in (0, " +
                          std::to_string(surf->injectivity_radius) + ")",
                      "family.r_max");
  PerturbationFamily fam;
  fam.surface = surf;
  for (std::size_t j = 0; j < spec.potentials.size(); ++j) {
    const auto& ps = spec.potentials[j];
    const std::string field = "family.potentials[" + std::to_string(j) + "]";
    if (ps.centers_disk.empty()) throw ConfigError("potential without bumps", field);
    if (ps.centers_disk.size() != ps.amplitudes.size())
      throw ConfigError("centers and amplitudes differ in length", field + ".amplitudes");
    std::vector<Complex> centers;
    for (Complex w : ps.centers_disk) {
      if (!(std::abs(w) < 1.0)) throw ConfigError("center outside the unit disk", field + ".centers");
      centers.push_back(from_disk(w));
    }
    fam.potentials.emplace_back(make_radial_potential(surf, centers, ps.amplitudes, spec.r_max));
  }
  return fam;
}

// ---------------------------------------------------------------------------
// Observables on the unit bundle
// ---------------------------------------------------------------------------

/// c_0 + sum_{k=1}^{n} (c_k cos k theta + s_k sin k theta), n <= 4.
struct FiberPolynomial {
  std::vector<double> cos_coeffs{1.0};
  std::vector<double> sin_coeffs{0.0};

  int order() const { return static_cast<int>(std::max(cos_coeffs.size(), sin_coeffs.size())) - 1; }

  double operator()(double theta) const {
    double v = cos_coeffs.empty() ? 0.0 : cos_coeffs[0];
    for (std::size_t k = 1; k < cos_coeffs.size(); ++k) v += cos_coeffs[k] * std::cos(k * theta);
    for (std::size_t k = 1; k < sin_coeffs.size(); ++k) v += sin_coeffs[k] * std::sin(k * theta);
    return v;
  }

  double mean() const { return cos_coeffs.empty() ? 0.0 : cos_coeffs[0]; }
};

struct ObservableTerm {
  Complex center = kI;  // upper half-plane, reduced
  double amplitude = 1.0;
  BumpProfile profile;
  FiberPolynomial fiber;
};

/// a(x, xi) = constant + sum over terms and group elements of A psi(cosh d(x, sigma c)) F(angle of
/// the covector pulled back by sigma). Depends only on the direction of xi.
struct Observable {
  struct Image {
    MoebiusMap sigma_inv;
    Complex point;
    std::size_t term;
  };

  SurfacePtr surface;
  double constant = 0.0;
  std::vector<ObservableTerm> terms;
  std::vector<Image> images;

  double value_reduced(const CotangentState& s) const {
    double v = constant;
    for (const auto& im : images) {
      const auto& tm = terms[im.term];
      const double u = cosh_distance(s.z, im.point);
      if (u >= tm.profile.u_max) continue;
      const Complex xi = push_covector(im.sigma_inv, s.z, s.xi);
      v += tm.amplitude * tm.profile.value(u) * tm.fiber(std::arg(xi));
    }
    return v;
  }

  double operator()(const CotangentState& s) const {
    require_upper_half_plane(s.z, "Observable");
    if (s.xi == 0.0) throw DomainError("Observable: zero covector");
    const auto [gamma, steps] = reducing_element(*surface, s.z);
    return value_reduced(steps == 0 ? s : apply_moebius(gamma, s));
  }

  double operator()(const UnitTangentFrame& f) const {
    return value_reduced(frame_to_state(reduce_frame(*surface, f)));
  }

  /// Exact Liouville average by unfolding each periodized term to the plane.
  double unfolded_average() const {
    double v = constant;
    for (const auto& tm : terms)
      v += tm.amplitude * tm.fiber.mean() * 2.0 * std::numbers::pi * tm.profile.integral() / surface->area;
    return v;
  }

  bool is_constant() const { return images.empty(); }
};

struct ObservableTermSpec {
  Complex center_disk{0.0, 0.0};
  double amplitude = 1.0;
  double r_max = 1.0;
  std::vector<double> cos_coeffs{1.0};
  std::vector<double> sin_coeffs{0.0};
};

struct ObservableSpec {
  double constant = 0.0;
  std::vector<ObservableTermSpec> terms;
};

inline Observable make_observable(SurfacePtr surf, const ObservableSpec& spec) {
  if (!surf) throw ConfigError("observable needs a surface");
  Observable a;
  a.surface = surf;
  a.constant = spec.constant;
  for (const auto& ts : spec.terms) {
    if (!(std::abs(ts.center_disk) < 1.0)) throw ConfigError("center outside the unit disk", "observable.center");
    if (ts.cos_coeffs.size() > 5 || ts.sin_coeffs.size() > 5)
      throw ConfigError("fiber order above 4", "observable.fiber");
    ObservableTerm tm;
    tm.center = detail::reduce_point(*surf, from_disk(ts.center_disk));
    tm.amplitude = ts.amplitude;
    tm.profile = BumpProfile::with_radius(ts.r_max);
    tm.fiber = {ts.cos_coeffs, ts.sin_coeffs};
    if (tm.fiber.cos_coeffs.empty()) tm.fiber.cos_coeffs = {0.0};
    a.terms.push_back(tm);
    if (ts.amplitude == 0.0) continue;
    const std::size_t k = a.terms.size() - 1;
    for (const auto& [sigma, q] :
         orbit_near_center(*surf, tm.center, surf->domain_radius + ts.r_max))
      a.images.push_back({sigma.inverse(), q, k});
  }
  return a;
}

inline Observable constant_observable(SurfacePtr surf, double c) {
  return make_observable(std::move(surf), ObservableSpec{c, {}});
}

/// Grid of unit states covering the closed fundamental domain: an n x n grid of the disk square
/// around the domain, restricted to domain points, times n_angles chart angles.
inline std::vector<Complex> domain_grid(const FuchsianSurface& surf, int n) {
  const double R = std::tanh(0.5 * surf.domain_radius);
  std::vector<Complex> pts;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Complex w{-R + 2.0 * R * (i + 0.5) / n, -R + 2.0 * R * (j + 0.5) / n};
      if (std::abs(w) >= 1.0) continue;
      const Complex z = from_disk(w);
      if (in_domain(surf, z)) pts.push_back(z);
    }
  return pts;
}

/// max - min of a over a base grid times an angle grid.
inline double oscillation(const Observable& a, int n_base = 48, int n_angles = 64) {
  if (a.is_constant()) return 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<Complex> pts = domain_grid(*a.surface, n_base);
  for (const auto& im : a.images)
    if (in_domain(*a.surface, im.point)) pts.push_back(im.point);
  for (Complex z : pts)
    for (int k = 0; k < n_angles; ++k) {
      const double v = a.value_reduced(unit_state(z, 2.0 * std::numbers::pi * k / n_angles));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  return hi - lo;
}

}  // namespace horoflow
