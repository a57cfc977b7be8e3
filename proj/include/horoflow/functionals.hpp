#pragma once

// Exponentially weighted averages along geodesics: the admissibility functional, the unstable
// and stable averaging operators, the horocycle shift and the first-order correction curve.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "horoflow/errors.hpp"
#include "horoflow/fields.hpp"
#include "horoflow/hyperbolic.hpp"
#include "horoflow/parallel.hpp"
#include "horoflow/quadrature.hpp"
#include "horoflow/surface.hpp"

namespace horoflow {

struct QuadratureConfig {
  double T_max = 40.0;
  /// Gauss-Legendre nodes per unit-time panel (before adaptive bisection).
  std::size_t nodes_per_unit = 8;
  /// Requested absolute accuracy; a larger estimate raises PrecisionError.
  double tolerance = 1e-10;
  int max_depth = 14;

  void validate() const {
    if (!(T_max > 0.0)) throw ConfigError("T_max must be positive", "quadrature.T_max");
    if (nodes_per_unit < 2) throw ConfigError("need at least 2 nodes per unit", "quadrature.nodes_per_unit");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive", "quadrature.tolerance");
  }
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  double tail_bound = 0.0;
};

/// Integrand callback for vector-valued averages: writes m values at a reduced unit state.
using StateIntegrand = std::function<void(const CotangentState&, double*)>;

namespace detail {

struct GeodesicMarch {
  const FuchsianSurface& surf;
  int direction;

  /// Reduced unit state at time s past the panel frame f.
  CotangentState at(const UnitTangentFrame& f, double s) const {
    return frame_to_state(reduce_frame(surf, {f.g * geodesic_element(direction * s)}));
  }
};

/// Adaptive Gauss-Legendre for m-vector integrands of the form b(G^{dir t} rho) e^{-t}.
class WeightedAverager {
 public:
  WeightedAverager(const FuchsianSurface& surf, int direction, std::size_t m,
                   const StateIntegrand& b, const QuadratureConfig& q)
      : march_{surf, direction}, m_(m), b_(b), q_(q), gl_(quad::gauss_legendre(q.nodes_per_unit)),
        buf_(m) {}

  /// Integrates over [0, T_max] starting at frame f0. `skip(z, half_width)` may return true for
  /// panels whose midpoint z is farther than half_width from every support.
  template <class Skip>
  std::vector<QuadResult> run(const UnitTangentFrame& f0, Skip&& skip) {
    std::vector<QuadResult> out(m_);
    envelope_.assign(m_, 0.0);
    const auto panels = static_cast<std::size_t>(std::ceil(q_.T_max - 1e-12));
    UnitTangentFrame f = reduce_frame(march_.surf, f0);
    const double per_panel_tol = q_.tolerance / (4.0 * static_cast<double>(panels));
    std::vector<double> coarse(m_), acc(m_), err(m_);
    for (std::size_t k = 0; k < panels; ++k) {
      const double a = static_cast<double>(k);
      const double b = std::min(q_.T_max, a + 1.0);
      const double weight = std::exp(-a);
      const CotangentState mid = march_.at(f, 0.5 * (b - a));
      if (!skip(mid.z, 0.5 * (b - a))) {
        std::fill(acc.begin(), acc.end(), 0.0);
        std::fill(err.begin(), err.end(), 0.0);
        rule(f, 0.0, b - a, coarse);
        refine(f, 0.0, b - a, coarse, per_panel_tol / weight, 0, acc, err);
        for (std::size_t j = 0; j < m_; ++j) {
          out[j].value += weight * acc[j];
          out[j].error += weight * err[j];
        }
      }
      f = reduce_frame(march_.surf, {f.g * geodesic_element(march_.direction * (b - a))});
    }
    for (std::size_t j = 0; j < m_; ++j) {
      out[j].tail_bound = envelope_[j] * std::exp(-q_.T_max);
      out[j].error += out[j].tail_bound;
    }
    return out;
  }

 private:
  // Integral of b(G^{dir s} f) e^{-s} over [lo, hi] (s relative to the panel start).
  void rule(const UnitTangentFrame& f, double lo, double hi, std::vector<double>& res) {
    std::fill(res.begin(), res.end(), 0.0);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (std::size_t i = 0; i < gl_.size(); ++i) {
      const double s = mid + half * gl_.nodes[i];
      b_(march_.at(f, s), buf_.data());
      const double w = gl_.weights[i] * half * std::exp(-s);
      for (std::size_t j = 0; j < m_; ++j) {
        res[j] += w * buf_[j];
        envelope_[j] = std::max(envelope_[j], std::abs(buf_[j]));
      }
    }
  }

  void refine(const UnitTangentFrame& f, double lo, double hi, const std::vector<double>& whole,
              double tol, int depth, std::vector<double>& acc, std::vector<double>& err) {
    const double mid = 0.5 * (lo + hi);
    std::vector<double> left(m_), right(m_);
    rule(f, lo, mid, left);
    rule(f, mid, hi, right);
    double diff = 0.0;
    for (std::size_t j = 0; j < m_; ++j) diff = std::max(diff, std::abs(left[j] + right[j] - whole[j]));
    if (diff <= tol || depth >= q_.max_depth) {
      for (std::size_t j = 0; j < m_; ++j) {
        acc[j] += left[j] + right[j];
        err[j] += std::abs(left[j] + right[j] - whole[j]);
      }
      return;
    }
    refine(f, lo, mid, left, 0.5 * tol, depth + 1, acc, err);
    refine(f, mid, hi, right, 0.5 * tol, depth + 1, acc, err);
  }

  GeodesicMarch march_;
  std::size_t m_;
  const StateIntegrand& b_;
  const QuadratureConfig& q_;
  const quad::GaussLegendre& gl_;
  std::vector<double> buf_;
  std::vector<double> envelope_;
};

inline UnitTangentFrame unit_frame_of(const CotangentState& rho) {
  require_upper_half_plane(rho.z, "geodesic average");
  const double n = rho.norm();
  if (!(n > 0.0)) throw DomainError("geodesic average: zero covector");
  return state_to_frame({rho.z, rho.xi / n});
}

inline void require_precision(const QuadResult& r, const QuadratureConfig& q, const char* what) {
  if (r.error > q.tolerance)
    throw PrecisionError(std::string(what) + ": error estimate " + std::to_string(r.error) +
                             " exceeds tolerance " + std::to_string(q.tolerance),
                         r.error);
}

}  // namespace detail

/// g*(dW, xi_perp) at a reduced unit state.
inline double unstable_component(const Potential& W, const CotangentState& s) {
  const Complex D = potential_gradient_reduced(W, s.z);
  const double y = s.z.imag();
  const Complex xp = perp(s.xi);
  return y * y * (D.real() * xp.real() + D.imag() * xp.imag());
}

/// Integral over [0, T_max] of b(G^{direction t} rho) e^{-t} for several integrands at once
/// (no factor 1/2). `rho` may have any nonzero covector; only its direction is used.
inline std::vector<QuadResult> weighted_geodesic_integrals(const FuchsianSurface& surf,
                                                           const CotangentState& rho, int direction,
                                                           std::size_t m, const StateIntegrand& b,
                                                           const QuadratureConfig& q = {}) {
  q.validate();
  detail::WeightedAverager avg(surf, direction, m, b, q);
  return avg.run(detail::unit_frame_of(rho), [](Complex, double) { return false; });
}

/// L^u(b)(rho) = integral of (b/2)(G^t rho) e^{-t}.
inline QuadResult averaging_Lu(const FuchsianSurface& surf,
                               const std::function<double(const CotangentState&)>& b,
                               const CotangentState& rho, const QuadratureConfig& q = {}) {
  StateIntegrand f = [&](const CotangentState& s, double* out) { out[0] = 0.5 * b(s); };
  QuadResult r = weighted_geodesic_integrals(surf, rho, +1, 1, f, q)[0];
  detail::require_precision(r, q, "averaging_Lu");
  return r;
}

/// L^s(b)(rho) = integral of (b/2)(G^{-t} rho) e^{-t}.
inline QuadResult averaging_Ls(const FuchsianSurface& surf,
                               const std::function<double(const CotangentState&)>& b,
                               const CotangentState& rho, const QuadratureConfig& q = {}) {
  StateIntegrand f = [&](const CotangentState& s, double* out) { out[0] = 0.5 * b(s); };
  QuadResult r = weighted_geodesic_integrals(surf, rho, -1, 1, f, q)[0];
  detail::require_precision(r, q, "averaging_Ls");
  return r;
}

/// L values of several potentials along one geodesic, skipping panels away from all supports.
/// direction = +1 gives the admissibility functional, -1 its stable counterpart.
inline std::vector<QuadResult> admissibility_values(const std::vector<Potential>& Ws,
                                                    const CotangentState& rho,
                                                    const QuadratureConfig& q = {},
                                                    int direction = +1) {
  q.validate();
  if (Ws.empty()) return {};
  const auto& surf = potential_surface(Ws.front());
  StateIntegrand f = [&](const CotangentState& s, double* out) {
    for (std::size_t j = 0; j < Ws.size(); ++j) out[j] = 0.5 * unstable_component(Ws[j], s);
  };
  detail::WeightedAverager avg(surf, direction, Ws.size(), f, q);
  return avg.run(detail::unit_frame_of(rho), [&](Complex z, double half) {
    for (const auto& W : Ws)
      if (potential_near_support(W, z, half + 1e-6)) return false;
    return true;
  });
}

/// (1/2) integral of g*(dW, xi_perp)(G^t rho) e^{-t} dt.
inline QuadResult admissibility_L(const CotangentState& rho, const Potential& W,
                                  const QuadratureConfig& q = {}) {
  QuadResult r = admissibility_values({W}, rho, q)[0];
  detail::require_precision(r, q, "admissibility_L");
  return r;
}

using RiccatiFunction = std::function<double(const CotangentState&)>;

/// Variable-Riccati form: integral of g*(dW, xi_perp)(G^t rho) exp(-int_0^t U^u) / (U^u - U^s)
/// over [0, T_max], by a fixed composite rule of `sub` Gauss-Legendre panels per unit time.
inline QuadResult admissibility_L_riccati(const CotangentState& rho, const Potential& W,
                                          const RiccatiFunction& U_u, const RiccatiFunction& U_s,
                                          const QuadratureConfig& q = {}, int sub = 32) {
  q.validate();
  const auto& surf = potential_surface(W);
  const auto& gl = quad::gauss_legendre(q.nodes_per_unit);
  const detail::GeodesicMarch march{surf, +1};
  UnitTangentFrame f = reduce_frame(surf, detail::unit_frame_of(rho));
  const auto panels = static_cast<std::size_t>(std::ceil(q.T_max * sub - 1e-9));
  const double width = q.T_max / static_cast<double>(panels);
  double log_weight = 0.0;  // -int_0^{panel start} U^u
  QuadResult r;
  double envelope = 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double half = 0.5 * width;
    for (std::size_t i = 0; i < gl.size(); ++i) {
      const double s = half + half * gl.nodes[i];
      const CotangentState st = march.at(f, s);
      // -int_{panel start}^{s} U^u by Gauss-Legendre on [0, s].
      double partial = 0.0;
      for (std::size_t l = 0; l < gl.size(); ++l) {
        const double sl = 0.5 * s + 0.5 * s * gl.nodes[l];
        partial += gl.weights[l] * 0.5 * s * U_u(march.at(f, sl));
      }
      const double g = unstable_component(W, st);
      envelope = std::max(envelope, std::abs(g));
      r.value += gl.weights[i] * half * g * std::exp(log_weight - partial) / (U_u(st) - U_s(st));
    }
    double full = 0.0;
    for (std::size_t l = 0; l < gl.size(); ++l)
      full += gl.weights[l] * half * U_u(march.at(f, half + half * gl.nodes[l]));
    log_weight -= full;
    f = reduce_frame(surf, {f.g * geodesic_element(width)});
  }
  r.tail_bound = envelope * std::exp(log_weight);
  r.error = r.tail_bound;
  return r;
}

/// Horocycle form: (1/2) integral of d/dtau W(base of H_u^tau G^t rho) at tau = 0, e^{-t} dt,
/// with a central difference of step h in tau.
inline QuadResult admissibility_L_horocycle(const CotangentState& rho, const Potential& W,
                                            double h = 1e-5, const QuadratureConfig& q = {}) {
  q.validate();
  const auto& surf = potential_surface(W);
  StateIntegrand f = [&](const CotangentState& s, double* out) {
    const UnitTangentFrame fr = state_to_frame(s);
    const Complex zp = fr.g.apply(lower_unipotent(h).apply(kI));
    const Complex zm = fr.g.apply(lower_unipotent(-h).apply(kI));
    out[0] = 0.5 * (eval_potential(W, zp) - eval_potential(W, zm)) / (2.0 * h);
  };
  return weighted_geodesic_integrals(surf, rho, +1, 1, f, q)[0];
}

// ---------------------------------------------------------------------------
// Horocycle shift and correction field
// ---------------------------------------------------------------------------

struct ZCoefficients {
  double c_u = 0.0;
  double c_s = 0.0;
};

/// Cached L^u(b_1^j), L^s(b_1^j) at Pi(rho0), b_1^j = g*(dV_j, xi_perp) / ||xi0||.
struct GeodesicAverages {
  std::vector<double> L_u;  // L^u(b_1^j) = L_{Pi rho0}(V_j) / ||xi0||
  std::vector<double> L_s;
  double xi_norm = 1.0;
  double error = 0.0;

  double beta_u(const std::vector<double>& eps) const {
    double b = 0.0;
    for (std::size_t j = 0; j < L_u.size(); ++j) b -= eps.at(j) * L_u[j];
    return b;
  }

  ZCoefficients z(const std::vector<double>& eps) const {
    ZCoefficients c;
    for (std::size_t j = 0; j < L_u.size(); ++j) {
      c.c_u -= eps.at(j) * L_u[j];
      c.c_s -= eps.at(j) * L_s[j];
    }
    return c;
  }
};

inline GeodesicAverages geodesic_averages(const PerturbationFamily& fam, const CotangentState& rho0,
                                          const QuadratureConfig& q = {}) {
  GeodesicAverages g;
  g.xi_norm = rho0.norm();
  if (!(g.xi_norm > 0.0)) throw DomainError("geodesic_averages: zero covector");
  for (const auto& r : admissibility_values(fam.potentials, rho0, q, +1)) {
    g.L_u.push_back(r.value / g.xi_norm);
    g.error = std::max(g.error, r.error);
  }
  for (const auto& r : admissibility_values(fam.potentials, rho0, q, -1)) {
    g.L_s.push_back(r.value / g.xi_norm);
    g.error = std::max(g.error, r.error);
  }
  return g;
}

/// beta^u(eps) = -(1/||xi0||) sum_j eps_j L_{Pi rho0}(V_j).
inline double beta_u(const CotangentState& rho0, const PerturbationFamily& fam,
                     const std::vector<double>& eps, const QuadratureConfig& q = {}) {
  fam.check_eps(eps);
  return geodesic_averages(fam, rho0, q).beta_u(eps);
}

inline ZCoefficients z_coefficients(const CotangentState& rho0, const PerturbationFamily& fam,
                                    const std::vector<double>& eps, const QuadratureConfig& q = {}) {
  fam.check_eps(eps);
  return geodesic_averages(fam, rho0, q).z(eps);
}

/// H_s^{c_s} H_u^{c_u} Pi(rho0).
inline UnitTangentFrame alpha_tilde(const UnitTangentFrame& rho0, const ZCoefficients& c) {
  return horocycle_flow(horocycle_flow(rho0, c.c_u, HorocycleBranch::unstable), c.c_s,
                        HorocycleBranch::stable);
}

inline CotangentState alpha_tilde(const CotangentState& rho0, const PerturbationFamily& fam,
                                  const std::vector<double>& eps, const QuadratureConfig& q = {}) {
  const UnitTangentFrame f = detail::unit_frame_of(rho0);
  return frame_to_state(alpha_tilde(f, z_coefficients(rho0, fam, eps, q)));
}

// ---------------------------------------------------------------------------
// Admissibility certificate
// ---------------------------------------------------------------------------

struct AdmissibilityGrid {
  int base = 40;
  int angles = 64;
  double threshold = 1e-2;
  QuadratureConfig quadrature{20.0, 8, 1e-6, 14};
};

struct AdmissibilityRecord {
  CotangentState rho;
  std::vector<double> L;
  double max_abs = 0.0;
  double error = 0.0;
};

struct AdmissibilityReport {
  double min_max_abs = 0.0;
  CotangentState argmin;
  bool pass = false;
  std::size_t grid_size = 0;
  double max_error = 0.0;
  std::vector<AdmissibilityRecord> records;
};

inline std::vector<CotangentState> admissibility_states(const FuchsianSurface& surf, int base, int angles) {
  std::vector<CotangentState> out;
  for (Complex z : domain_grid(surf, base))
    for (int k = 0; k < angles; ++k) out.push_back(unit_state(z, 2.0 * std::numbers::pi * k / angles));
  return out;
}

inline AdmissibilityReport admissibility_check(const PerturbationFamily& fam,
                                               const AdmissibilityGrid& grid = {},
                                               unsigned threads = 1, bool keep_records = true) {
  if (grid.base < 1 || grid.angles < 1) throw ConfigError("empty admissibility grid", "admissibility.grid");
  const auto states = admissibility_states(*fam.surface, grid.base, grid.angles);
  std::vector<AdmissibilityRecord> recs(states.size());
  parallel_for(states.size(), threads, [&](std::size_t i) {
    AdmissibilityRecord& r = recs[i];
    r.rho = states[i];
    for (const auto& v : admissibility_values(fam.potentials, states[i], grid.quadrature)) {
      r.L.push_back(v.value);
      r.max_abs = std::max(r.max_abs, std::abs(v.value));
      r.error = std::max(r.error, v.error);
    }
  });
  AdmissibilityReport rep;
  rep.grid_size = states.size();
  rep.min_max_abs = std::numeric_limits<double>::infinity();
  for (const auto& r : recs) {
    rep.max_error = std::max(rep.max_error, r.error);
    if (r.max_abs < rep.min_max_abs) {
      rep.min_max_abs = r.max_abs;
      rep.argmin = r.rho;
    }
  }
  if (states.empty()) rep.min_max_abs = 0.0;
  rep.pass = rep.min_max_abs >= grid.threshold;
  if (keep_records) rep.records = std::move(recs);
  return rep;
}

/// CSV: z_re, z_im, xi_x, xi_y, L_0..L_J, max_abs_L.
inline void write_admissibility_csv(std::ostream& os, const AdmissibilityReport& rep) {
  const std::size_t m = rep.records.empty() ? 0 : rep.records.front().L.size();
  os << "z_re,z_im,xi_x,xi_y";
  for (std::size_t j = 0; j < m; ++j) os << ",L_" << j;
  os << ",max_abs_L\n";
  os.precision(12);
  for (const auto& r : rep.records) {
    os << r.rho.z.real() << ',' << r.rho.z.imag() << ',' << r.rho.xi.real() << ',' << r.rho.xi.imag();
    for (double v : r.L) os << ',' << v;
    os << ',' << r.max_abs << '\n';
  }
}

}  // namespace horoflow
