#pragma once

// Experiment dispatch and artifacts: each experiment turns a RunConfig into an ExperimentReport
// holding estimates, error bars, fits, pass/fail checks and tables, written as one JSON summary
// plus CSV and two-column plot files.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "horoflow/config.hpp"
#include "horoflow/experiments.hpp"
#include "horoflow/fields.hpp"
#include "horoflow/flows.hpp"
#include "horoflow/functionals.hpp"
#include "horoflow/surface.hpp"

namespace horoflow {

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  Json config;
  std::string config_hash;
  Json estimates = Json::object();
  Json error_bars = Json::object();
  Json fitted_exponents = Json::object();
  std::vector<Check> checks;
  std::vector<Table> tables;
  /// Two-column plot series.
  std::vector<Table> series;
  Json timings = Json::object();

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  void check(std::string name, bool ok, std::string detail) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  }

  /// Everything except wall-clock timings, so reruns compare byte for byte.
  Json summary() const {
    Json cs = Json::array();
    for (const auto& c : checks) cs.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return {{"schema_version", kSchemaVersion},
            {"version", kVersion},
            {"experiment", experiment},
            {"config_hash", config_hash},
            {"pass", pass()},
            {"estimates", estimates},
            {"error_bars", error_bars},
            {"fitted_exponents", fitted_exponents},
            {"checks", cs},
            {"config", config}};
  }

  std::string summary_text() const { return summary().dump(2) + "\n"; }

  std::string summary_line() const {
    std::size_t ok = 0;
    for (const auto& c : checks) ok += c.pass;
    std::ostringstream os;
    os << experiment << ": " << (pass() ? "ok" : "FAILED") << " (" << ok << "/" << checks.size() << " checks)";
    for (const auto& c : checks)
      if (!c.pass) os << " [" << c.name << ": " << c.detail << "]";
    return os.str();
  }
};

inline void write_table(std::ostream& os, const Table& t, char sep) {
  for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? std::string(1, sep) : "") << t.columns[k];
  os << '\n';
  os.precision(17);
  for (const auto& r : t.rows) {
    for (std::size_t k = 0; k < r.size(); ++k) os << (k ? std::string(1, sep) : "") << r[k];
    os << '\n';
  }
}

/// Writes <experiment>.json, <experiment>_timings.json, <experiment>_<table>.csv and
/// <experiment>_<series>.dat under dir.
inline void write_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw ConfigError("cannot write " + (dir / name).string(), "output");
    return f;
  };
  open(rep.experiment + ".json") << rep.summary_text();
  open(rep.experiment + "_timings.json") << rep.timings.dump(2) << '\n';
  for (const auto& t : rep.tables) {
    auto f = open(rep.experiment + "_" + t.name + ".csv");
    write_table(f, t, ',');
  }
  for (const auto& t : rep.series) {
    auto f = open(rep.experiment + "_" + t.name + ".dat");
    Table body = t;
    body.columns.clear();
    f << "# " << (t.columns.size() > 1 ? t.columns[0] + " " + t.columns[1] : std::string()) << '\n';
    write_table(f, body, ' ');
  }
}

// ---------------------------------------------------------------------------
// Shared context
// ---------------------------------------------------------------------------

struct Context {
  RunConfig cfg;
  SurfacePtr surface;
  std::shared_ptr<const PerturbationFamily> family;
  Observable observable;

  DynamicsSetup dynamics() const {
    return {family, observable, cfg.integrator, cfg.sampling, cfg.seed, cfg.threads};
  }
};

inline Context make_context(const RunConfig& cfg) {
  Context c;
  c.cfg = cfg;
  c.surface = std::make_shared<const FuchsianSurface>(load_surface(cfg.surface));
  c.family = std::make_shared<const PerturbationFamily>(build_admissible_family(c.surface, cfg.family));
  c.observable = make_observable(c.surface, cfg.observable);
  return c;
}

namespace detail {

inline ExperimentReport new_report(const Context& ctx, const std::string& name) {
  ExperimentReport r;
  r.experiment = name;
  r.config = result_relevant_json(ctx.cfg);
  r.config_hash = config_hash(ctx.cfg);
  r.timings["threads"] = ctx.cfg.threads;
  r.timings["output"] = ctx.cfg.output;
  return r;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string num(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

inline CotangentState config_state(Complex w, double angle) { return unit_state(from_disk(w), angle); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

inline ExperimentReport run_admissibility(const Context& ctx) {
  auto rep = detail::new_report(ctx, "admissibility");
  const auto& s = ctx.cfg.admissibility;
  detail::Stopwatch sw;
  const AdmissibilityReport base = admissibility_check(*ctx.family, s.grid, ctx.cfg.threads, true);
  rep.timings["grid_seconds"] = sw.seconds();
  rep.estimates["min_max_abs_L"] = base.min_max_abs;
  rep.estimates["argmin"] = {base.argmin.z.real(), base.argmin.z.imag(), base.argmin.xi.real(), base.argmin.xi.imag()};
  rep.estimates["grid_size"] = base.grid_size;
  rep.error_bars["min_max_abs_L"] = base.max_error;
  rep.check("threshold", base.pass, "min max|L| = " + detail::num(base.min_max_abs) + " vs " + detail::num(s.grid.threshold));

  Table t{"grid", {"z_re", "z_im", "xi_x", "xi_y"}, {}};
  for (std::size_t j = 0; j < ctx.family->size(); ++j) t.columns.push_back("L_" + std::to_string(j));
  t.columns.push_back("max_abs_L");
  for (const auto& r : base.records) {
    std::vector<double> row{r.rho.z.real(), r.rho.z.imag(), r.rho.xi.real(), r.rho.xi.imag()};
    row.insert(row.end(), r.L.begin(), r.L.end());
    row.push_back(r.max_abs);
    t.rows.push_back(std::move(row));
  }
  rep.tables.push_back(std::move(t));

  if (s.refine) {
    AdmissibilityGrid fine = s.grid;
    fine.base *= 2;
    fine.angles *= 2;
    detail::Stopwatch sw2;
    const AdmissibilityReport ref = admissibility_check(*ctx.family, fine, ctx.cfg.threads, false);
    rep.timings["refined_seconds"] = sw2.seconds();
    const double change = base.min_max_abs > 0.0 ? std::abs(ref.min_max_abs - base.min_max_abs) / base.min_max_abs
                                                 : std::numeric_limits<double>::infinity();
    rep.estimates["refined_min_max_abs_L"] = ref.min_max_abs;
    rep.estimates["refined_argmin"] = {ref.argmin.z.real(), ref.argmin.z.imag(), ref.argmin.xi.real(),
                                       ref.argmin.xi.imag()};
    rep.estimates["refined_grid_size"] = ref.grid_size;
    rep.estimates["relative_change"] = change;
    rep.check("refinement_stability", change <= s.stability,
              "refined min " + detail::num(ref.min_max_abs) + ", relative change " + detail::num(change));
  }
  return rep;
}

inline ExperimentReport run_liouville(const Context& ctx) {
  auto rep = detail::new_report(ctx, "liouville");
  const auto& s = ctx.cfg.liouville;
  std::vector<Observable> obs{ctx.observable};
  for (const auto& spec : s.cross_checks) obs.push_back(make_observable(ctx.surface, spec));
  LiouvilleConfig lc{s.mc_samples, s.horocycle_length, s.horocycle_starts, 8, ctx.cfg.seed, ctx.cfg.threads};
  detail::Stopwatch sw;
  const auto res = liouville_averages(obs, lc);
  rep.timings["seconds"] = sw.seconds();
  Table t{"averages", {"observable", "monte_carlo", "mc_error", "horocycle", "horocycle_error", "unfolded"}, {}};
  for (std::size_t k = 0; k < res.size(); ++k) {
    const auto& r = res[k];
    const std::string key = k == 0 ? "main" : "cross_check_" + std::to_string(k);
    rep.estimates[key] = {{"value", r.value},
                          {"monte_carlo", r.monte_carlo.value},
                          {"horocycle", r.horocycle.value},
                          {"unfolded", r.unfolded}};
    rep.error_bars[key] = {{"value", r.error}, {"monte_carlo", r.monte_carlo.error}, {"horocycle", r.horocycle.error}};
    t.rows.push_back({static_cast<double>(k), r.monte_carlo.value, r.monte_carlo.error, r.horocycle.value,
                      r.horocycle.error, r.unfolded});
    rep.check(key + "_oracles_agree", r.consistent,
              "MC " + detail::num(r.monte_carlo.value) + " +- " + detail::num(r.monte_carlo.error) + ", horocycle " +
                  detail::num(r.horocycle.value) + " +- " + detail::num(r.horocycle.error));
    if (r.unfolded == 0.0 && !obs[k].is_constant()) {
      const bool zero = std::abs(r.monte_carlo.value) <= 3.0 * r.monte_carlo.error &&
                        std::abs(r.horocycle.value) <= 3.0 * r.horocycle.error;
      rep.check(key + "_zero_mean", zero, "odd observable averages to zero within 3 sigma");
    }
  }
  rep.tables.push_back(std::move(t));
  return rep;
}

inline ExperimentReport run_equidist(const Context& ctx) {
  auto rep = detail::new_report(ctx, "equidist");
  const auto& s = ctx.cfg.equidist;
  const auto pts = base_points(*ctx.surface, s.base_points, ctx.cfg.seed);
  const double ref = ctx.observable.unfolded_average();
  detail::Stopwatch sw;
  const SweepResult r = equidistribution_sweep(ctx.dynamics(), s.t, s.b0_list, pts, ref, s.t_sub, s.b0_sub);
  rep.timings["seconds"] = sw.seconds();
  rep.estimates["liouville_reference"] = ref;
  rep.estimates["oscillation"] = r.oscillation;
  Json D = Json::array(), De = Json::array();
  Table rows{"points", {"b0", "T0", "point", "I", "I_error", "deviation"}, {}};
  Table plot{"D", {"b0", "D"}, {}};
  for (const auto& row : r.rows) {
    D.push_back(row.D);
    De.push_back(row.D_error);
    plot.rows.push_back({row.b0, row.D});
    for (std::size_t k = 0; k < row.I.size(); ++k)
      rows.rows.push_back({row.b0, row.T0, static_cast<double>(k), row.I[k].value, row.I[k].error, row.deviation[k]});
  }
  rep.estimates["D"] = D;
  rep.error_bars["D"] = De;
  rep.estimates["sub_critical_max"] = r.sub_max;
  rep.estimates["max_over_median"] = r.max_over_median;
  rep.fitted_exponents["D_vs_b0"] = {{"slope", r.fit.slope}, {"ci95", r.fit.slope_ci95}};
  const double last = r.rows.empty() ? 0.0 : r.rows.back().D;
  rep.check("D_decreasing", r.decreasing, "D = " + D.dump());
  rep.check("D_final", last <= s.final_fraction * r.oscillation,
            "D(last) = " + detail::num(last) + " vs " + detail::num(s.final_fraction * r.oscillation));
  if (s.t_sub > 0.0)
    rep.check("sub_critical", r.sub_max <= s.sub_fraction * r.oscillation,
              "max |I - a(G_0 rho0)| = " + detail::num(r.sub_max) + " vs " + detail::num(s.sub_fraction * r.oscillation));
  rep.tables.push_back(std::move(rows));
  rep.series.push_back(std::move(plot));
  return rep;
}

inline ExperimentReport run_horocycle_rate(const Context& ctx) {
  auto rep = detail::new_report(ctx, "horocycle-rate");
  const auto& s = ctx.cfg.horocycle;
  const auto rhos = base_points(*ctx.surface, s.samples, ctx.cfg.seed + 1);
  const double ref = ctx.observable.unfolded_average();
  detail::Stopwatch sw;
  const auto r = horocycle_rate(ctx.observable, rhos, s.T_list, ref, ctx.cfg.threads);
  rep.timings["seconds"] = sw.seconds();
  rep.estimates["liouville_reference"] = ref;
  rep.estimates["R"] = r.R;
  rep.estimates["ratio"] = r.ratio;
  rep.fitted_exponents["R_vs_T"] = {{"slope", r.fit.slope}, {"ci95", r.fit.slope_ci95}};
  Table plot{"R", {"T", "R"}, {}};
  Table rows{"samples", {"sample", "T", "deviation"}, {}};
  for (std::size_t i = 0; i < r.T.size(); ++i) plot.rows.push_back({r.T[i], r.R[i]});
  for (std::size_t k = 0; k < r.per_rho.size(); ++k)
    for (std::size_t i = 0; i < r.T.size(); ++i) rows.rows.push_back({static_cast<double>(k), r.T[i], r.per_rho[k][i]});
  rep.check("R_nonincreasing", r.nonincreasing, "R = " + Json(r.R).dump());
  rep.check("R_ratio", r.ratio <= s.max_ratio, "R(last)/R(first) = " + detail::num(r.ratio));
  rep.check("R_slope", r.fit.slope <= s.max_slope, "slope = " + detail::num(r.fit.slope));
  rep.tables.push_back(std::move(rows));
  rep.series.push_back(std::move(plot));
  return rep;
}

inline ExperimentReport run_reduction(const Context& ctx) {
  auto rep = detail::new_report(ctx, "reduction-check");
  const auto& s = ctx.cfg.reduction;
  const CotangentState rho0 = detail::config_state(s.point_disk, s.angle);
  detail::Stopwatch sw;
  const auto r = reduction_chain_check(ctx.dynamics(), rho0, s.t, s.b0_list, ctx.cfg.quadrature, s.gamma1);
  rep.timings["seconds"] = sw.seconds();
  Json delta = Json::array(), derr = Json::array(), scaled = Json::array(), budget = Json::array();
  Table rows{"rows", {"b0", "T0", "perturbed", "perturbed_error", "reduced", "reduced_error", "delta", "delta_error",
                      "scaled", "budget"},
             {}};
  Table plot{"delta", {"b0", "delta"}, {}};
  for (const auto& row : r.rows) {
    delta.push_back(std::abs(row.delta.value));
    derr.push_back(row.delta.error);
    scaled.push_back(row.scaled);
    budget.push_back(row.budget);
    rows.rows.push_back({row.b0, row.T0, row.perturbed.value, row.perturbed.error, row.reduced.value,
                         row.reduced.error, row.delta.value, row.delta.error, row.scaled, row.budget});
    plot.rows.push_back({row.b0, std::abs(row.delta.value)});
  }
  rep.estimates["delta"] = delta;
  rep.error_bars["delta"] = derr;
  rep.estimates["scaled"] = scaled;
  rep.estimates["budget"] = budget;
  rep.estimates["scaled_spread"] = r.scaled_spread;
  std::vector<double> bs, ds;
  for (const auto& row : r.rows) {
    bs.push_back(row.b0);
    ds.push_back(std::abs(row.delta.value));
  }
  const LogLogFit fit = fit_loglog(bs, ds);
  rep.fitted_exponents["delta_vs_b0"] = {{"slope", fit.slope}, {"ci95", fit.slope_ci95}};
  rep.check("delta_decreasing", r.decreasing, "delta = " + delta.dump());
  rep.check("scaled_bounded", r.scaled_spread <= s.max_spread, "max/min = " + detail::num(r.scaled_spread));
  rep.tables.push_back(std::move(rows));
  rep.series.push_back(std::move(plot));
  return rep;
}

inline ExperimentReport run_shadowing(const Context& ctx) {
  auto rep = detail::new_report(ctx, "shadowing");
  const auto& s = ctx.cfg.shadowing;
  const auto rhos = base_points(*ctx.surface, s.samples, ctx.cfg.seed + 2);
  detail::Stopwatch sw;
  const auto r = shadowing_sweep(rhos, ctx.family, s.direction, s.norms, s.search, ctx.cfg.integrator,
                                 ctx.cfg.quadrature, ctx.cfg.threads);
  rep.timings["seconds"] = sw.seconds();
  Json res = Json::array(), dev = Json::array();
  Table rows{"samples", {"eps_norm", "sample", "residual", "deviation"}, {}};
  Table plot{"deviation", {"eps_norm", "mean_deviation"}, {}};
  for (const auto& row : r.rows) {
    res.push_back(row.max_residual);
    dev.push_back(row.mean_deviation);
    plot.rows.push_back({row.eps_norm, row.mean_deviation});
    for (std::size_t k = 0; k < row.residual.size(); ++k)
      rows.rows.push_back({row.eps_norm, static_cast<double>(k), row.residual[k], row.deviation[k]});
  }
  rep.estimates["max_residual"] = res;
  rep.estimates["mean_deviation"] = dev;
  rep.fitted_exponents["deviation_vs_eps"] = {{"slope", r.fit.slope}, {"ci95", r.fit.slope_ci95}};
  rep.check("residual", r.residual_ok, "max residual per norm = " + res.dump());
  rep.check("exponent", r.fit.slope >= s.min_exponent, "fitted exponent = " + detail::num(r.fit.slope));
  rep.tables.push_back(std::move(rows));
  rep.series.push_back(std::move(plot));
  return rep;
}

inline ExperimentReport run_bounds(const Context& ctx) {
  auto rep = detail::new_report(ctx, "bounds");
  const auto& s = ctx.cfg.bounds;
  detail::Stopwatch sw;
  const EpsBox box{s.b0, ctx.family->size()};
  const auto r = a_plus_minus_bounds(ctx.dynamics(), s.spec, box, s.t);
  rep.timings["seconds"] = sw.seconds();
  rep.estimates["A_minus"] = r.A_minus;
  rep.estimates["A_plus"] = r.A_plus;
  Table rows{"shells", {"energy", "point", "I"}, {}};
  bool inside = true;
  for (std::size_t i = 0; i < r.energies.size(); ++i)
    for (std::size_t k = 0; k < r.values[i].size(); ++k) {
      rows.rows.push_back({r.energies[i], static_cast<double>(k), r.values[i][k]});
      inside = inside && r.values[i][k] >= r.A_minus && r.values[i][k] <= r.A_plus;
    }
  rep.check("ordered", r.A_minus <= r.A_plus && inside,
            "A_minus = " + detail::num(r.A_minus) + ", A_plus = " + detail::num(r.A_plus));
  rep.tables.push_back(std::move(rows));
  return rep;
}

/// Quick invariant self-tests on the loaded configuration.
inline ExperimentReport run_validate(const Context& ctx) {
  auto rep = detail::new_report(ctx, "validate");
  detail::Stopwatch sw;
  const auto& surf = *ctx.surface;
  const CotangentState rho = detail::config_state({0.21, -0.33}, 1.1);
  const UnitTangentFrame f = state_to_frame(rho);

  double inter = 0.0;
  for (double t : {-3.0, 0.5, 4.0}) {
    const auto lhs = horocycle_flow(geodesic_flow_exact(f, t), 0.7, HorocycleBranch::unstable);
    const auto rhs = geodesic_flow_exact(horocycle_flow(f, 0.7 * std::exp(-t), HorocycleBranch::unstable), t);
    inter = std::max(inter, projective_distance(lhs.g, rhs.g));
  }
  rep.check("intertwining", inter <= 1e-12, "max deviation " + detail::num(inter));

  const auto red = reduce_to_domain(surf, frame_to_state(geodesic_flow_exact(f, 7.3)));
  const double norm_err = std::abs(red.state.norm() - 1.0);
  rep.check("reduction_norm", norm_err <= 1e-10 && in_domain(surf, red.state.z), "norm error " + detail::num(norm_err));

  const HamiltonianParams params{ctx.family, std::vector<double>(ctx.family->size(), 0.05)};
  IntegratorConfig ic = ctx.cfg.integrator;
  const CotangentState end = perturbed_flow(rho, params, 5.0, ic);
  const double drift = std::abs(energy(end, params) - energy(rho, params)) / energy(rho, params);
  rep.check("energy", drift <= ic.max_relative_energy_drift, "relative drift " + detail::num(drift));

  const auto flat = make_radial_potential(ctx.surface, {}, {}, 1.0);
  const double L0 = admissibility_L(rho, flat, ctx.cfg.quadrature).value;
  rep.check("L_constant", L0 == 0.0, "L = " + detail::num(L0));

  const Potential& V = ctx.family->potentials.front();
  const double La = admissibility_L(rho, V, ctx.cfg.quadrature).value;
  const double Lb = admissibility_L_riccati(rho, V, [](const CotangentState&) { return 1.0; },
                                            [](const CotangentState&) { return -1.0; }, ctx.cfg.quadrature)
                        .value;
  rep.check("riccati_identity", std::abs(La - Lb) <= 1e-9, "difference " + detail::num(std::abs(La - Lb)));

  const auto one = liouville_average(constant_observable(ctx.surface, 1.0),
                                     {2000, 50.0, 2, 8, ctx.cfg.seed, ctx.cfg.threads});
  rep.check("normalization", std::abs(one.monte_carlo.value - 1.0) <= 1e-12 && std::abs(one.horocycle.value - 1.0) <= 1e-12,
            "constant observable averages to 1");
  rep.estimates["intertwining"] = inter;
  rep.estimates["reduction_norm_error"] = norm_err;
  rep.estimates["energy_drift"] = drift;
  rep.estimates["riccati_difference"] = std::abs(La - Lb);
  rep.timings["seconds"] = sw.seconds();
  return rep;
}

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"validate", "admissibility", "liouville", "equidist",
                                              "horocycle-rate", "reduction-check", "shadowing", "bounds"};
  return names;
}

inline ExperimentReport run_experiment(const std::string& name, const Context& ctx) {
  static const std::map<std::string, std::function<ExperimentReport(const Context&)>> table{
      {"validate", run_validate},         {"admissibility", run_admissibility},
      {"liouville", run_liouville},       {"equidist", run_equidist},
      {"horocycle-rate", run_horocycle_rate}, {"reduction-check", run_reduction},
      {"shadowing", run_shadowing},       {"bounds", run_bounds}};
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown experiment " + name, "experiment");
  return it->second(ctx);
}

}  // namespace horoflow
