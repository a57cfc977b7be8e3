#pragma once

// Desk-scale experiments: Liouville averages by two independent oracles, epsilon-box averages of
// perturbed orbits, horocycle convergence rates, the horocycle reduction of box averages,
// shadowing of perturbed orbits by horocycle shifts, and fits of the resulting trends.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "horoflow/errors.hpp"
#include "horoflow/fields.hpp"
#include "horoflow/flows.hpp"
#include "horoflow/functionals.hpp"
#include "horoflow/hyperbolic.hpp"
#include "horoflow/parallel.hpp"
#include "horoflow/quadrature.hpp"
#include "horoflow/random.hpp"
#include "horoflow/surface.hpp"

namespace horoflow {

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// Sums that combine in a fixed order, so chunked reductions are reproducible.
struct MomentSums {
  double n = 0.0, s1 = 0.0, s2 = 0.0;

  void add(double x) {
    n += 1.0;
    s1 += x;
    s2 += x * x;
  }
  void merge(const MomentSums& o) {
    n += o.n;
    s1 += o.s1;
    s2 += o.s2;
  }
  double mean() const { return n > 0.0 ? s1 / n : 0.0; }
  /// Standard error of the mean.
  double standard_error() const {
    if (n < 2.0) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, (s2 - n * m * m) / (n - 1.0)) / n);
  }
  Estimate estimate() const { return {mean(), standard_error()}; }
};

/// Least-squares line through (log x, log y).
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  /// Half-width of the 95% confidence interval of the slope; infinite with two points.
  double slope_ci95 = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
};

inline LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  LogLogFit f;
  f.n = lx.size();
  if (f.n < 2) {
    f.slope = f.intercept = std::numeric_limits<double>::quiet_NaN();
    return f;
  }
  const double n = static_cast<double>(f.n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (f.n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
      const double r = ly[i] - f.intercept - f.slope * lx[i];
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
    const boost::math::students_t dist(n - 2.0);
    f.slope_ci95 = boost::math::quantile(boost::math::complement(dist, 0.025)) * f.slope_stderr;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Liouville averages
// ---------------------------------------------------------------------------

/// Uniform sample of the unit bundle over the fundamental domain: rejection sampling in the disk
/// with density 4 / (1 - |w|^2)^2, restricted to the domain, with a uniform covector angle.
inline CotangentState sample_liouville(const FuchsianSurface& surf, CounterRng& rng) {
  const double R = std::tanh(0.5 * surf.domain_radius);
  const double cap = 1.0 - R * R;
  for (;;) {
    const double r = R * std::sqrt(rng.uniform());
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    const double accept = rng.uniform();
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const double den = cap / (1.0 - r * r);
    if (accept >= den * den) continue;
    const Complex z = from_disk(std::polar(r, phi));
    if (in_domain(surf, z)) return unit_state(z, theta);
  }
}

/// Integrals of a along H_u^{s} f for s from 0 to each breakpoint (signed, increasing in
/// absolute value), by exact unipotent steps and Gauss-Legendre on panels of length at most 1.
inline std::vector<double> horocycle_integrals(const Observable& a, const UnitTangentFrame& f,
                                               const std::vector<double>& breakpoints,
                                               std::size_t nodes_per_unit = 8) {
  const auto& gl = quad::gauss_legendre(nodes_per_unit);
  const FuchsianSurface& surf = *a.surface;
  std::vector<double> out;
  UnitTangentFrame panel = reduce_frame(surf, f);
  double at = 0.0, acc = 0.0;
  for (double b : breakpoints) {
    const double len = b - at;
    const auto n = static_cast<std::size_t>(std::ceil(std::abs(len) - 1e-12));
    const double w = n ? len / static_cast<double>(n) : 0.0;
    const MoebiusMap step = lower_unipotent(w);
    for (std::size_t k = 0; k < n; ++k) {
      double sum = 0.0;
      for (std::size_t i = 0; i < gl.size(); ++i) {
        const double s = 0.5 * w * (1.0 + gl.nodes[i]);
        sum += gl.weights[i] * a(UnitTangentFrame{panel.g * lower_unipotent(s)});
      }
      acc += 0.5 * w * sum;
      panel = reduce_frame(surf, {panel.g * step});
    }
    at = b;
    out.push_back(acc);
  }
  return out;
}

struct LiouvilleConfig {
  std::size_t mc_samples = 1000000;
  double horocycle_length = 1e4;
  std::size_t horocycle_starts = 8;
  std::size_t nodes_per_unit = 8;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const {
    if (mc_samples < 2) throw ConfigError("need at least two Monte Carlo samples", "liouville.mc_samples");
    if (!(horocycle_length > 0.0)) throw ConfigError("horocycle length must be positive", "liouville.horocycle_length");
    if (horocycle_starts < 2) throw ConfigError("need at least two horocycle starts", "liouville.horocycle_starts");
  }
};

struct LiouvilleResult {
  Estimate monte_carlo;
  Estimate horocycle;
  /// Exact value by unfolding the periodized terms.
  double unfolded = 0.0;
  double value = 0.0;
  double error = 0.0;
  bool consistent = true;
};

namespace detail {
inline constexpr std::uint64_t kStreamLiouvilleMc = 0x4C4D43;
inline constexpr std::uint64_t kStreamLiouvilleHoro = 0x4C4842;
inline constexpr std::uint64_t kStreamBasePoints = 0x425053;
inline constexpr std::uint64_t kStreamBox = 0x424F58;
inline constexpr std::uint64_t kChunk = 4096;
}  // namespace detail

/// Both oracles for several observables on shared samples. The reported value is the horocycle
/// Birkhoff average; the Monte Carlo average is the cross-check.
inline std::vector<LiouvilleResult> liouville_averages(const std::vector<Observable>& obs,
                                                       const LiouvilleConfig& cfg = {}) {
  cfg.validate();
  if (obs.empty()) return {};
  const FuchsianSurface& surf = *obs.front().surface;
  const std::size_t m = obs.size();

  // Oracle A: Monte Carlo over domain x angle, chunked by counter streams.
  const std::size_t chunks = (cfg.mc_samples + detail::kChunk - 1) / detail::kChunk;
  std::vector<std::vector<MomentSums>> part(chunks, std::vector<MomentSums>(m));
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    CounterRng rng(cfg.seed, detail::kStreamLiouvilleMc + (c << 20));
    const std::size_t n = std::min(detail::kChunk, cfg.mc_samples - c * detail::kChunk);
    for (std::size_t i = 0; i < n; ++i) {
      const CotangentState s = sample_liouville(surf, rng);
      for (std::size_t j = 0; j < m; ++j) part[c][j].add(obs[j].value_reduced(s));
    }
  });
  std::vector<MomentSums> mc(m);
  for (const auto& p : part)
    for (std::size_t j = 0; j < m; ++j) mc[j].merge(p[j]);

  // Oracle B: unstable horocycle averages from independent starts, spread across starts.
  const std::size_t K = cfg.horocycle_starts;
  std::vector<std::vector<double>> horo(K, std::vector<double>(m));
  parallel_for(K, cfg.threads, [&](std::size_t k) {
    CounterRng rng(cfg.seed, detail::kStreamLiouvilleHoro + k);
    const Complex w = std::polar(0.5 * rng.uniform(), 2.0 * std::numbers::pi * rng.uniform());
    const UnitTangentFrame f0 = state_to_frame(unit_state(from_disk(w), 2.0 * std::numbers::pi * rng.uniform()));
    for (std::size_t j = 0; j < m; ++j)
      horo[k][j] = horocycle_integrals(obs[j], f0, {cfg.horocycle_length}, cfg.nodes_per_unit)[0] /
                   cfg.horocycle_length;
  });

  std::vector<LiouvilleResult> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    MomentSums hs;
    for (std::size_t k = 0; k < K; ++k) hs.add(horo[k][j]);
    LiouvilleResult& r = out[j];
    r.monte_carlo = mc[j].estimate();
    r.horocycle = hs.estimate();
    r.unfolded = obs[j].unfolded_average();
    r.value = r.horocycle.value;
    r.error = r.horocycle.error;
    const double sigma = std::hypot(r.monte_carlo.error, r.horocycle.error);
    r.consistent = std::abs(r.monte_carlo.value - r.horocycle.value) <= 3.0 * sigma ||
                   (obs[j].is_constant() && std::abs(r.monte_carlo.value - r.horocycle.value) <= 1e-12);
  }
  return out;
}

inline LiouvilleResult liouville_average(const Observable& a, const LiouvilleConfig& cfg = {}) {
  return liouville_averages({a}, cfg).front();
}

inline void require_consistent(const LiouvilleResult& r, const std::string& what) {
  if (!r.consistent)
    throw ConsistencyError(what + ": Monte Carlo " + std::to_string(r.monte_carlo.value) + " +- " +
                           std::to_string(r.monte_carlo.error) + " vs horocycle " +
                           std::to_string(r.horocycle.value) + " +- " + std::to_string(r.horocycle.error));
}

// ---------------------------------------------------------------------------
// Epsilon-box averages
// ---------------------------------------------------------------------------

/// The box (-b0, b0)^dim of perturbation parameters.
struct EpsBox {
  double b0 = 1e-3;
  std::size_t dim = 3;

  void validate() const {
    if (!(b0 >= 0.0) || !std::isfinite(b0)) throw ConfigError("b0 must be nonnegative", "box.b0");
    if (dim == 0) throw ConfigError("box dimension must be positive", "box.dim");
  }
};

enum class BoxMode { monte_carlo, grid };

struct BoxSampling {
  BoxMode mode = BoxMode::monte_carlo;
  std::size_t samples = 256;
  /// Gauss-Legendre nodes per axis in grid mode.
  std::size_t grid_nodes = 8;
};

/// Evaluation points and weights (summing to 1) of a box rule. A degenerate box is the single
/// point eps = 0.
inline void box_rule(const EpsBox& box, const BoxSampling& bs, std::uint64_t seed, std::uint64_t stream,
                     std::vector<std::vector<double>>& pts, std::vector<double>& weights) {
  box.validate();
  pts.clear();
  weights.clear();
  if (box.b0 == 0.0) {
    pts.emplace_back(box.dim, 0.0);
    weights.push_back(1.0);
    return;
  }
  if (bs.mode == BoxMode::monte_carlo) {
    if (bs.samples == 0) throw ConfigError("need at least one box sample", "box.samples");
    CounterRng rng(seed, stream);
    for (std::size_t i = 0; i < bs.samples; ++i) {
      std::vector<double> e(box.dim);
      for (double& x : e) x = rng.uniform(-box.b0, box.b0);
      pts.push_back(std::move(e));
      weights.push_back(1.0 / static_cast<double>(bs.samples));
    }
    return;
  }
  const auto& gl = quad::gauss_legendre(bs.grid_nodes);
  std::size_t total = 1;
  for (std::size_t d = 0; d < box.dim; ++d) total *= gl.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::vector<double> e(box.dim);
    double w = 1.0;
    std::size_t r = idx;
    for (std::size_t d = 0; d < box.dim; ++d) {
      const std::size_t i = r % gl.size();
      r /= gl.size();
      e[d] = box.b0 * gl.nodes[i];
      w *= 0.5 * gl.weights[i];
    }
    pts.push_back(std::move(e));
    weights.push_back(w);
  }
}

/// Weighted mean of m-vector evaluations over a box rule. Monte Carlo mode reports standard
/// errors; grid mode reports zero error.
inline std::vector<Estimate> box_average(
    const EpsBox& box, const BoxSampling& bs, std::uint64_t seed, std::uint64_t stream, unsigned threads,
    std::size_t m, const std::function<void(const std::vector<double>&, double*)>& f) {
  std::vector<std::vector<double>> pts;
  std::vector<double> w;
  box_rule(box, bs, seed, stream, pts, w);
  std::vector<double> vals(pts.size() * m);
  parallel_for(pts.size(), threads, [&](std::size_t i) { f(pts[i], vals.data() + i * m); });
  std::vector<Estimate> out(m);
  const bool mc = bs.mode == BoxMode::monte_carlo && box.b0 > 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (mc) {
      MomentSums s;
      for (std::size_t i = 0; i < pts.size(); ++i) s.add(vals[i * m + j]);
      out[j] = s.estimate();
    } else {
      double v = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) v += w[i] * vals[i * m + j];
      out[j] = {v, 0.0};
    }
  }
  return out;
}

/// Common inputs of the box experiments.
struct DynamicsSetup {
  std::shared_ptr<const PerturbationFamily> family;
  Observable observable;
  IntegratorConfig integrator;
  BoxSampling sampling;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Observable at the end of the perturbed orbit; a depends only on the covector direction, so
/// it is its own 0-homogeneous extension.
inline double evolved_value(const DynamicsSetup& d, const CotangentState& rho0, const std::vector<double>& eps,
                            double T0) {
  if (T0 == 0.0) return d.observable(rho0);
  const HamiltonianParams params{d.family, eps};
  const PhasePoint p = integrate_phase(to_phase_point(rho0), params, T0, d.integrator);
  return d.observable(p.frame);
}

/// I(b0, T0) = box average of a o G_eps^{T0}(rho0).
inline Estimate I_integral(const DynamicsSetup& d, const CotangentState& rho0, const EpsBox& box, double T0,
                           std::uint64_t stream = detail::kStreamBox) {
  if (!(T0 >= 0.0)) throw ConfigError("T0 must be nonnegative", "T0");
  if (box.dim != d.family->size()) throw ConfigError("box dimension differs from the family size", "box.dim");
  if (d.observable.is_constant()) return {d.observable.constant, 0.0};
  return box_average(box, d.sampling, d.seed, stream, d.threads, 1,
                     [&](const std::vector<double>& eps, double* out) { out[0] = evolved_value(d, rho0, eps, T0); })
      .front();
}

/// Unit states drawn from the Liouville measure, used as base points.
inline std::vector<CotangentState> base_points(const FuchsianSurface& surf, std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, detail::kStreamBasePoints);
  std::vector<CotangentState> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_liouville(surf, rng));
  return out;
}

inline std::uint64_t box_stream(std::size_t b0_index, std::size_t point_index, std::uint64_t tag = 0) {
  return detail::kStreamBox + (static_cast<std::uint64_t>(b0_index) << 32) + (point_index << 8) + tag;
}

// ---------------------------------------------------------------------------
// Equidistribution sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  double b0 = 0.0;
  double T0 = 0.0;
  std::vector<Estimate> I;       // per base point
  std::vector<double> deviation;  // |I - reference| per base point
  double D = 0.0;                 // max over base points
  double D_error = 0.0;           // error bar of the maximizing point
  double median = 0.0;
};

struct SweepResult {
  double t = 0.0;
  double reference = 0.0;
  double oscillation = 0.0;
  std::vector<SweepRow> rows;
  bool decreasing = false;
  LogLogFit fit;  // log D vs log b0
  // Sub-critical control.
  double t_sub = 0.0;
  double b0_sub = 0.0;
  std::vector<double> sub_deviation;  // |I - a o G_0^{T0}(rho0)| per base point
  double sub_max = 0.0;
  double max_over_median = 0.0;
};

inline double critical_time(double t, double b0) { return t * std::abs(std::log(b0)); }

inline SweepRow sweep_row(const DynamicsSetup& d, const std::vector<CotangentState>& pts, double b0, double t,
                          double reference, std::size_t b0_index) {
  SweepRow row;
  row.b0 = b0;
  row.T0 = critical_time(t, b0);
  const EpsBox box{b0, d.family->size()};
  for (std::size_t k = 0; k < pts.size(); ++k) {
    row.I.push_back(I_integral(d, pts[k], box, row.T0, box_stream(b0_index, k)));
    row.deviation.push_back(std::abs(row.I.back().value - reference));
  }
  const auto it = std::max_element(row.deviation.begin(), row.deviation.end());
  row.D = *it;
  row.D_error = row.I[static_cast<std::size_t>(it - row.deviation.begin())].error;
  std::vector<double> sorted = row.deviation;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  row.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return row;
}

/// D(b0) = max over base points of |I(b0, t |log b0|) - reference| for a decreasing b0 list,
/// plus the sub-critical control at (t_sub, b0_sub) against the unperturbed orbit value.
inline SweepResult equidistribution_sweep(const DynamicsSetup& d, double t, const std::vector<double>& b0_list,
                                          const std::vector<CotangentState>& pts, double reference,
                                          double t_sub, double b0_sub) {
  if (!(t > 1.0 && t < 1.5)) throw ConfigError("t must lie in (1, 3/2)", "equidist.t");
  for (std::size_t i = 0; i < b0_list.size(); ++i) {
    if (!(b0_list[i] > 0.0 && b0_list[i] < 1.0)) throw ConfigError("b0 must lie in (0, 1)", "equidist.b0_list");
    if (i && !(b0_list[i] < b0_list[i - 1])) throw ConfigError("b0_list must be decreasing", "equidist.b0_list");
  }
  if (pts.empty()) throw ConfigError("need at least one base point", "equidist.base_points");
  SweepResult res;
  res.t = t;
  res.reference = reference;
  res.oscillation = oscillation(d.observable);
  std::vector<double> bs, Ds;
  for (std::size_t i = 0; i < b0_list.size(); ++i) {
    res.rows.push_back(sweep_row(d, pts, b0_list[i], t, reference, i));
    bs.push_back(b0_list[i]);
    Ds.push_back(res.rows.back().D);
  }
  res.decreasing = true;
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    const auto& p = res.rows[i - 1];
    const auto& q = res.rows[i];
    if (q.D > p.D + 2.0 * std::hypot(p.D_error, q.D_error)) res.decreasing = false;
  }
  res.fit = fit_loglog(bs, Ds);
  for (const auto& r : res.rows)
    if (r.median > 0.0) res.max_over_median = std::max(res.max_over_median, r.D / r.median);

  res.t_sub = t_sub;
  res.b0_sub = b0_sub;
  if (t_sub > 0.0 && b0_sub > 0.0) {
    const double T0 = critical_time(t_sub, b0_sub);
    const EpsBox box{b0_sub, d.family->size()};
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const Estimate I = I_integral(d, pts[k], box, T0, box_stream(b0_list.size(), k, 1));
      const double orbit = d.observable(geodesic_flow_exact(state_to_frame(pts[k]), T0));
      res.sub_deviation.push_back(std::abs(I.value - orbit));
      res.sub_max = std::max(res.sub_max, res.sub_deviation.back());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Horocycle convergence rate
// ---------------------------------------------------------------------------

struct HorocycleRateResult {
  std::vector<double> T;
  std::vector<double> R;                    // max over samples
  std::vector<std::vector<double>> per_rho;  // [sample][T]
  bool nonincreasing = false;
  double ratio = 0.0;  // R(last) / R(first)
  LogLogFit fit;
};

/// R(T) = max over samples of |(1/2T) int_{-T}^{T} a(H_u^s rho) ds - reference|.
inline HorocycleRateResult horocycle_rate(const Observable& a, const std::vector<CotangentState>& rhos,
                                          const std::vector<double>& T_list, double reference,
                                          unsigned threads = 1, std::size_t nodes_per_unit = 8) {
  for (std::size_t i = 0; i < T_list.size(); ++i)
    if (!(T_list[i] > 0.0) || (i && !(T_list[i] > T_list[i - 1])))
      throw ConfigError("T_list must be positive and increasing", "horocycle.T_list");
  HorocycleRateResult res;
  res.T = T_list;
  res.per_rho.assign(rhos.size(), std::vector<double>(T_list.size()));
  std::vector<double> neg(T_list.size());
  for (std::size_t i = 0; i < T_list.size(); ++i) neg[i] = -T_list[i];
  parallel_for(rhos.size(), threads, [&](std::size_t k) {
    const UnitTangentFrame f = state_to_frame(rhos[k]);
    const auto fw = horocycle_integrals(a, f, T_list, nodes_per_unit);
    const auto bw = horocycle_integrals(a, f, neg, nodes_per_unit);
    for (std::size_t i = 0; i < T_list.size(); ++i)
      res.per_rho[k][i] = std::abs((fw[i] - bw[i]) / (2.0 * T_list[i]) - reference);
  });
  res.R.assign(T_list.size(), 0.0);
  for (const auto& row : res.per_rho)
    for (std::size_t i = 0; i < T_list.size(); ++i) res.R[i] = std::max(res.R[i], row[i]);
  res.nonincreasing = true;
  for (std::size_t i = 1; i < res.R.size(); ++i)
    if (res.R[i] > res.R[i - 1]) res.nonincreasing = false;
  if (!res.R.empty() && res.R.front() > 0.0) res.ratio = res.R.back() / res.R.front();
  res.fit = fit_loglog(res.T, res.R);
  return res;
}

// ---------------------------------------------------------------------------
// Reduction of box averages to horocycle shifts
// ---------------------------------------------------------------------------

struct ReductionRow {
  double b0 = 0.0;
  double T0 = 0.0;
  Estimate perturbed;  // box average of a o G_eps^{T0}(rho0)
  Estimate reduced;    // box average of a o G_0^{T0} H_u^{beta(eps)}(rho0)
  Estimate delta;      // mean difference on shared samples
  double scaled = 0.0;  // |delta| / (b0 |log b0|)
  double budget = 0.0;  // b0 (1 + e^{T0} b0^{gamma1})
};

struct ReductionResult {
  double t = 0.0;
  double gamma1 = 0.49;
  std::vector<ReductionRow> rows;
  bool decreasing = false;
  double scaled_spread = 0.0;  // max / min of the scaled column
};

inline ReductionResult reduction_chain_check(const DynamicsSetup& d, const CotangentState& rho0, double t,
                                             const std::vector<double>& b0_list,
                                             const QuadratureConfig& q = {}, double gamma1 = 0.49) {
  if (!(t > 1.0 && t < 1.5)) throw ConfigError("t must lie in (1, 3/2)", "reduction.t");
  const GeodesicAverages avg = geodesic_averages(*d.family, rho0, q);
  const UnitTangentFrame f0 = detail::unit_frame_of(rho0);
  const double speed = std::sqrt(2.0 * rho0.kinetic_energy());
  ReductionResult res;
  res.t = t;
  res.gamma1 = gamma1;
  for (std::size_t i = 0; i < b0_list.size(); ++i) {
    const double b0 = b0_list[i];
    ReductionRow row;
    row.b0 = b0;
    row.T0 = b0 > 0.0 ? critical_time(t, b0) : 0.0;
    const EpsBox box{b0, d.family->size()};
    const auto est = box_average(box, d.sampling, d.seed, box_stream(i, 0, 2), d.threads, 3,
                                 [&](const std::vector<double>& eps, double* out) {
                                   out[0] = evolved_value(d, rho0, eps, row.T0);
                                   const UnitTangentFrame h =
                                       horocycle_flow(f0, avg.beta_u(eps), HorocycleBranch::unstable);
                                   out[1] = d.observable(geodesic_flow_exact(h, row.T0 * speed));
                                   out[2] = out[0] - out[1];
                                 });
    row.perturbed = est[0];
    row.reduced = est[1];
    row.delta = est[2];
    if (b0 > 0.0) {
      row.scaled = std::abs(row.delta.value) / (b0 * std::abs(std::log(b0)));
      row.budget = b0 * (1.0 + std::exp(row.T0 * speed) * std::pow(b0, gamma1));
    }
    res.rows.push_back(row);
  }
  res.decreasing = true;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    if (i && std::abs(res.rows[i].delta.value) > std::abs(res.rows[i - 1].delta.value)) res.decreasing = false;
    if (res.rows[i].b0 > 0.0) {
      lo = std::min(lo, res.rows[i].scaled);
      hi = std::max(hi, res.rows[i].scaled);
    }
  }
  res.scaled_spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return res;
}

// ---------------------------------------------------------------------------
// Shadowing by horocycle shifts
// ---------------------------------------------------------------------------

struct ShadowingConfig {
  /// Half-window; 0 selects min(2 + |ln ||eps|| |, 12).
  double window = 0.0;
  double grid_step = 0.05;
  double tolerance = 1e-10;
  int max_sweeps = 50;
  double shift_factor = 5.0;
};

struct ShadowingResult {
  double s_u = 0.0;
  double s_s = 0.0;
  double residual = 0.0;
  double window = 0.0;
  int sweeps = 0;
  UnitTangentFrame alpha_hat;
  ZCoefficients initial;
  bool quality_warning = false;
};

namespace detail {

/// Minimizer of a unimodal function on [lo, hi] by golden-section search.
template <class F>
double golden_section(F&& f, double lo, double hi, double tol) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace detail

/// Finds the horocycle shifts (s_u, s_s) whose geodesic best shadows the projected perturbed
/// orbit of rho0 on [-W, W], allowing a time shift of at most shift_factor ||eps|| W. All
/// orbits are compared on the universal cover.
inline ShadowingResult shadowing_point(const CotangentState& rho0, const std::shared_ptr<const PerturbationFamily>& fam,
                                       const std::vector<double>& eps, const ShadowingConfig& sc = {},
                                       IntegratorConfig ic = {}, const QuadratureConfig& q = {}) {
  fam->check_eps(eps);
  const HamiltonianParams params{fam, eps};
  const double en = params.eps_norm();
  if (en > 0.05) throw ConfigError("shadowing needs ||eps|| <= 0.05", "shadowing.eps");
  ShadowingResult res;
  res.window = sc.window > 0.0 ? sc.window : (en > 0.0 ? std::min(2.0 + std::abs(std::log(en)), 12.0) : 2.0);
  const UnitTangentFrame f0 = detail::unit_frame_of(rho0);
  res.initial = z_coefficients(rho0, *fam, eps, q);
  ic.reduction = ReductionPolicy::none;

  // Perturbed orbit sampled on a time grid in each direction.
  const auto n = static_cast<std::size_t>(std::ceil(res.window / sc.grid_step - 1e-9));
  const double dt = res.window / static_cast<double>(n);
  const CotangentState unit0 = frame_to_state(f0);
  const double E = energy(unit0, params);
  const double lift = 2.0 * (E - fam->value(eps, unit0.z));
  auto orbit = [&](int dir) {
    std::vector<UnitTangentFrame> out{f0};
    PhasePoint p{f0, std::sqrt(lift), 0};
    for (std::size_t k = 0; k < n; ++k) {
      p = integrate_phase(p, params, dir * dt / std::sqrt(2.0 * E), ic);
      out.push_back(p.frame);
    }
    return out;
  };
  const auto fwd = orbit(+1);
  const auto bwd = orbit(-1);
  const double budget = sc.shift_factor * en * res.window;

  auto divergence = [&](const UnitTangentFrame& cand, int dir) {
    const auto& path = dir > 0 ? fwd : bwd;
    double worst = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
      const double t = dir * dt * static_cast<double>(k);
      auto at = [&](double delta) { return frame_distance(geodesic_flow_exact(cand, t + delta), path[k]); };
      const double d = budget > 0.0 ? at(detail::golden_section(at, -budget, budget, 1e-13)) : at(0.0);
      worst = std::max(worst, d);
    }
    return worst;
  };
  auto candidate = [&](double su, double ss) {
    return horocycle_flow(horocycle_flow(f0, su, HorocycleBranch::unstable), ss, HorocycleBranch::stable);
  };

  double su = res.initial.c_u, ss = res.initial.c_s;
  const double span = 4.0 * (std::abs(su) + std::abs(ss)) + 2.0 * en;
  for (res.sweeps = 1; res.sweeps <= sc.max_sweeps; ++res.sweeps) {
    const double su_new = span > 0.0 ? detail::golden_section([&](double x) { return divergence(candidate(x, ss), +1); },
                                                              su - span, su + span, sc.tolerance)
                                     : su;
    const double ss_new = span > 0.0 ? detail::golden_section(
                                           [&](double x) { return divergence(candidate(su_new, x), -1); },
                                           ss - span, ss + span, sc.tolerance)
                                     : ss;
    const double change = std::max(std::abs(su_new - su), std::abs(ss_new - ss));
    su = su_new;
    ss = ss_new;
    if (change <= sc.tolerance) break;
  }
  if (res.sweeps > sc.max_sweeps)
    throw SearchError("shadowing search did not converge in " + std::to_string(sc.max_sweeps) + " sweeps");
  res.s_u = su;
  res.s_s = ss;
  res.alpha_hat = candidate(su, ss);
  res.residual = std::max(divergence(res.alpha_hat, +1), divergence(res.alpha_hat, -1));
  res.quality_warning = res.residual > 10.0 * en;
  return res;
}

struct ShadowingSweepRow {
  double eps_norm = 0.0;
  std::vector<double> residual;   // per rho0
  std::vector<double> deviation;  // d(alpha_hat, alpha_tilde) per rho0
  double max_residual = 0.0;
  double mean_deviation = 0.0;
};

struct ShadowingSweepResult {
  std::vector<ShadowingSweepRow> rows;
  LogLogFit fit;  // mean deviation vs ||eps||
  bool residual_ok = false;
};

/// Shadowing along eps = norm * direction for each norm and each rho0.
inline ShadowingSweepResult shadowing_sweep(const std::vector<CotangentState>& rhos,
                                            const std::shared_ptr<const PerturbationFamily>& fam,
                                            const std::vector<double>& direction, const std::vector<double>& norms,
                                            const ShadowingConfig& sc = {}, const IntegratorConfig& ic = {},
                                            const QuadratureConfig& q = {}, unsigned threads = 1) {
  fam->check_eps(direction);
  double dn = 0.0;
  for (double x : direction) dn += x * x;
  dn = std::sqrt(dn);
  if (!(dn > 0.0)) throw ConfigError("zero eps direction", "shadowing.direction");
  ShadowingSweepResult res;
  res.rows.resize(norms.size());
  std::vector<double> xs, ys;
  res.residual_ok = true;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    auto& row = res.rows[i];
    row.eps_norm = norms[i];
    std::vector<double> eps(direction.size());
    for (std::size_t j = 0; j < eps.size(); ++j) eps[j] = norms[i] * direction[j] / dn;
    row.residual.resize(rhos.size());
    row.deviation.resize(rhos.size());
    parallel_for(rhos.size(), threads, [&](std::size_t k) {
      const ShadowingResult s = shadowing_point(rhos[k], fam, eps, sc, ic, q);
      row.residual[k] = s.residual;
      row.deviation[k] = frame_distance(s.alpha_hat, alpha_tilde(detail::unit_frame_of(rhos[k]), s.initial));
    });
    for (std::size_t k = 0; k < rhos.size(); ++k) {
      row.max_residual = std::max(row.max_residual, row.residual[k]);
      row.mean_deviation += row.deviation[k] / static_cast<double>(rhos.size());
    }
    if (row.max_residual > 5.0 * norms[i]) res.residual_ok = false;
    xs.push_back(norms[i]);
    ys.push_back(row.mean_deviation);
  }
  res.fit = fit_loglog(xs, ys);
  return res;
}

// ---------------------------------------------------------------------------
// Empirical bounds over energy shells
// ---------------------------------------------------------------------------

struct BoundsSpec {
  double E1 = 0.5;
  double E2 = 0.5;
  double delta = 0.0;
  std::size_t shells = 3;
  std::size_t base_points = 4;
};

struct BoundsResult {
  double A_minus = 0.0;
  double A_plus = 0.0;
  std::vector<double> energies;
  std::vector<std::vector<double>> values;  // [shell][point]
};

/// Inf and sup of the box average over sampled shells in [E1 - delta/2, E2 + delta/2] and base
/// points. These bound the true quantities only up to the sampling resolution.
inline BoundsResult a_plus_minus_bounds(const DynamicsSetup& d, const BoundsSpec& spec, const EpsBox& box, double t) {
  const double lo = spec.E1 - 0.5 * spec.delta, hi = spec.E2 + 0.5 * spec.delta;
  if (!(lo > 0.0 && hi <= 1.0 && lo <= hi)) throw ConfigError("energy window must lie in (0, 1]", "bounds.window");
  if (spec.shells == 0 || spec.base_points == 0) throw ConfigError("empty sample spec", "bounds.sample");
  const double T0 = box.b0 > 0.0 ? critical_time(t, box.b0) : 0.0;
  const auto pts = base_points(*d.family->surface, spec.base_points, d.seed);
  BoundsResult res;
  res.A_minus = std::numeric_limits<double>::infinity();
  res.A_plus = -res.A_minus;
  for (std::size_t s = 0; s < spec.shells; ++s) {
    const double E = spec.shells == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * s / (spec.shells - 1.0);
    res.energies.push_back(E);
    std::vector<double> row;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      CotangentState rho = pts[k];
      rho.xi *= std::sqrt(2.0 * E);
      const double v = I_integral(d, rho, box, T0, box_stream(s, k, 3)).value;
      row.push_back(v);
      res.A_minus = std::min(res.A_minus, v);
      res.A_plus = std::max(res.A_plus, v);
    }
    res.values.push_back(std::move(row));
  }
  return res;
}

}  // namespace horoflow
