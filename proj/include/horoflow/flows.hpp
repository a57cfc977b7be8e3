#pragma once

// Perturbed Hamiltonian flow for p_eps = |xi|^2 / 2 + sum_j eps_j V_j by Strang splitting:
// half kick, exact geodesic drift, half kick. The phase point is stored as a unit frame g and a
// speed r, so the drift is a single right multiplication and the kick a rotation of the frame.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "horoflow/errors.hpp"
#include "horoflow/fields.hpp"
#include "horoflow/hyperbolic.hpp"
#include "horoflow/surface.hpp"

namespace horoflow {

struct HamiltonianParams {
  std::shared_ptr<const PerturbationFamily> family;
  std::vector<double> eps;

  bool unperturbed() const {
    for (double e : eps)
      if (e != 0.0) return false;
    return true;
  }

  double eps_norm() const {
    double s = 0.0;
    for (double e : eps) s += e * e;
    return std::sqrt(s);
  }
};

enum class ReductionPolicy { always, none };

struct IntegratorConfig {
  double step = 1e-3;
  double max_time = 1e4;
  /// Steps between energy checks; 0 disables monitoring.
  std::size_t energy_monitor_interval = 1000;
  double max_relative_energy_drift = 1e-6;
  ReductionPolicy reduction = ReductionPolicy::always;
  double eps_cap = 0.2;

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("step must be positive", "integrator.step");
    if (!(max_time > 0.0) || !(max_time / step < 1e12))
      throw ConfigError("max_time must be positive and below 1e12 steps", "integrator.max_time");
    if (!(max_relative_energy_drift > 0.0))
      throw ConfigError("energy drift bound must be positive", "integrator.max_relative_energy_drift");
    if (!(eps_cap > 0.0)) throw ConfigError("eps cap must be positive", "integrator.eps_cap");
  }
};

/// Frame plus speed: the covector is speed times the unit covector of the frame.
struct PhasePoint {
  UnitTangentFrame frame;
  double speed = 1.0;
  std::size_t last_reduction_steps = 0;
};

inline PhasePoint to_phase_point(const CotangentState& s) {
  require_upper_half_plane(s.z, "perturbed_flow");
  const double r = s.norm();
  if (!(r > 0.0)) throw DomainError("perturbed_flow: zero covector");
  return {state_to_frame({s.z, s.xi / r}), r, 0};
}

inline CotangentState to_state(const PhasePoint& p) {
  CotangentState s = frame_to_state(p.frame);
  s.xi *= p.speed;
  return s;
}

/// p_eps(z, xi) = |xi|^2_z / 2 + V(eps, z).
inline double energy(const CotangentState& s, const HamiltonianParams& params) {
  params.family->check_eps(params.eps);
  return s.kinetic_energy() + params.family->value(params.eps, s.z);
}

namespace detail {

/// Spatial differential at the reduced copy gamma g of a frame.
struct Force {
  Complex D{0.0, 0.0};
  MoebiusMap gamma;

  /// D pulled back to the identity frame through the current frame g: D conj((gamma g)'(i)).
  Complex body(const UnitTangentFrame& f) const {
    return D * std::conj(multiply_raw(gamma, f.g).derivative(kI));
  }
};

inline Force spatial_force(const PerturbationFamily& fam, const std::vector<double>& eps,
                           const UnitTangentFrame& f, ReductionPolicy policy) {
  Force F;
  if (policy == ReductionPolicy::none) F.gamma = reducing_element(*fam.surface, f.base()).first;
  F.D = fam.gradient_reduced(eps, F.gamma.apply(f.base()));
  return F;
}

inline void kick(PhasePoint& p, const Force& F, double half_step) {
  if (F.D == 0.0) return;
  const Complex xi = Complex{0.0, p.speed} - half_step * F.body(p.frame);
  const double r = std::abs(xi);
  if (!(r > 0.0)) throw IntegrationError("kick annihilated the covector", 0.0, 0.0);
  p.speed = r;
  const double phi = 0.5 * std::arg(xi / Complex{0.0, r});
  p.frame.g = p.frame.g * rotation_element(phi);
}

inline double phase_energy(const PerturbationFamily& fam, const std::vector<double>& eps,
                           const PhasePoint& p, ReductionPolicy policy) {
  const UnitTangentFrame r = policy == ReductionPolicy::always ? p.frame : reduce_frame(*fam.surface, p.frame);
  return 0.5 * p.speed * p.speed + fam.value_reduced(eps, r.base());
}

}  // namespace detail

/// Optional per-step observer: (time, phase point).
using FlowObserver = std::function<void(double, const PhasePoint&)>;

/// Integrates for signed time T from a phase point. Returns the final phase point.
inline PhasePoint integrate_phase(PhasePoint p, const HamiltonianParams& params, double T,
                                  const IntegratorConfig& cfg, const FlowObserver& observe = {}) {
  cfg.validate();
  const auto& fam = *params.family;
  fam.check_eps(params.eps);
  if (params.eps_norm() > cfg.eps_cap)
    throw ConfigError("||eps|| = " + std::to_string(params.eps_norm()) + " exceeds the cap " +
                          std::to_string(cfg.eps_cap),
                      "eps");
  if (!std::isfinite(T) || std::abs(T) > cfg.max_time)
    throw ConfigError("flow time outside [-max_time, max_time]", "T");
  if (T == 0.0) return p;

  const auto n = static_cast<std::size_t>(std::ceil(std::abs(T) / cfg.step - 1e-9));
  const double h = T / static_cast<double>(n);
  const bool free = params.unperturbed();
  const auto policy = cfg.reduction;
  if (policy == ReductionPolicy::always) p.frame = reduce_frame(*fam.surface, p.frame, &p.last_reduction_steps);

  const double e0 = free ? 0.0 : detail::phase_energy(fam, params.eps, p, policy);
  detail::Force force = free ? detail::Force{} : detail::spatial_force(fam, params.eps, p.frame, policy);
  // Without a potential the drifts compose exactly, so each step restarts from the last
  // reduced frame instead of accumulating one rounding per step.
  MoebiusMap origin = p.frame.g;
  std::size_t since = 0;
  for (std::size_t k = 0; k < n; ++k) {
    detail::kick(p, force, 0.5 * h);
    if (free) {
      p.frame.g = origin * geodesic_element(h * p.speed * static_cast<double>(++since));
    } else {
      p.frame.g = p.frame.g * geodesic_element(h * p.speed);
    }
    if (policy == ReductionPolicy::always) {
      p.frame = reduce_frame(*fam.surface, p.frame, &p.last_reduction_steps);
      if (free && p.last_reduction_steps > 0) {
        origin = p.frame.g;
        since = 0;
      }
    }
    if (!free) {
      force = detail::spatial_force(fam, params.eps, p.frame, policy);
      detail::kick(p, force, 0.5 * h);
    }
    if (!free && cfg.energy_monitor_interval && (k + 1) % cfg.energy_monitor_interval == 0) {
      const double e = detail::phase_energy(fam, params.eps, p, policy);
      const double drift = std::abs(e - e0) / std::max(std::abs(e0), 1e-300);
      if (drift > cfg.max_relative_energy_drift)
        throw IntegrationError("relative energy drift " + std::to_string(drift) + " at t = " +
                                   std::to_string(h * (k + 1)),
                               h * static_cast<double>(k + 1), drift);
    }
    if (observe) observe(h * static_cast<double>(k + 1), p);
  }
  return p;
}

/// G_eps^T applied to a cotangent state (any nonzero covector).
inline CotangentState perturbed_flow(const CotangentState& s, const HamiltonianParams& params,
                                     double T, const IntegratorConfig& cfg = {}) {
  return to_state(integrate_phase(to_phase_point(s), params, T, cfg));
}

/// Same flow, also writing one line per `every` steps: t, Re z, Im z, xi_x, xi_y, p_eps,
/// length of the last reduction word.
inline CotangentState perturbed_flow_logged(const CotangentState& s, const HamiltonianParams& params,
                                            double T, const IntegratorConfig& cfg, std::ostream& log,
                                            std::size_t every = 1) {
  const auto& fam = *params.family;
  auto line = [&](double t, const PhasePoint& p) {
    const CotangentState st = to_state(p);
    const double e = st.kinetic_energy() + fam.value(params.eps, st.z);
    log << t << ' ' << st.z.real() << ' ' << st.z.imag() << ' ' << st.xi.real() << ' '
        << st.xi.imag() << ' ' << e << ' ' << p.last_reduction_steps << '\n';
  };
  log.precision(17);
  const PhasePoint p0 = to_phase_point(s);
  line(0.0, p0);
  std::size_t count = 0;
  return to_state(integrate_phase(p0, params, T, cfg, [&](double t, const PhasePoint& p) {
    if (++count % std::max<std::size_t>(every, 1) == 0) line(t, p);
  }));
}

/// c_eps(x) = sqrt((p_eps(rho0) - V_eps(x)) / p_0(rho0)).
inline double c_eps(const CotangentState& anchor, const HamiltonianParams& params, Complex x) {
  const double E = energy(anchor, params);
  const double rad = (E - params.family->value(params.eps, x)) / anchor.kinetic_energy();
  if (!(rad > 0.0)) throw DomainError("c_eps: point outside the energy shell's allowed region");
  return std::sqrt(rad);
}

/// phi_eps^t: lift a unit state onto the energy shell of the anchor, flow by G_eps for
/// t / sqrt(2E), normalize the covector.
inline UnitTangentFrame projected_flow(const UnitTangentFrame& rho, const CotangentState& anchor,
                                       const HamiltonianParams& params, double t,
                                       const IntegratorConfig& cfg = {}) {
  const double E = energy(anchor, params);
  const double rad = 2.0 * (E - params.family->value(params.eps, rho.base()));
  if (!(rad > 0.0)) throw DomainError("projected_flow: shell lift radicand is not positive");
  PhasePoint p{rho, std::sqrt(rad), 0};
  return integrate_phase(p, params, t / std::sqrt(2.0 * E), cfg).frame;
}

inline CotangentState projected_flow(const CotangentState& rho, const CotangentState& anchor,
                                     const HamiltonianParams& params, double t,
                                     const IntegratorConfig& cfg = {}) {
  return frame_to_state(projected_flow(state_to_frame(rho), anchor, params, t, cfg));
}

}  // namespace horoflow
