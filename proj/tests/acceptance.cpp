// Runs each acceptance criterion on the default configuration and prints one PASS/FAIL line per
// criterion. Exit status is nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "common.hpp"
#include "oracles.hpp"
#include "horoflow/runner.hpp"

using namespace horoflow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Accumulates named sub-checks into one outcome.
struct Tally {
  bool pass = true;
  std::string detail;
  void add(const std::string& name, bool ok, const std::string& info) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += name + (ok ? " ok " : " FAILED ") + info;
  }
  Outcome done() const { return {pass, detail}; }
};

UnitTangentFrame random_frame(CounterRng& rng, double radius) {
  const Complex w = std::polar(radius * std::sqrt(rng.uniform()), 2.0 * std::numbers::pi * rng.uniform());
  return state_to_frame(unit_state(from_disk(w), 2.0 * std::numbers::pi * rng.uniform()));
}

Outcome exactness() {
  Tally t;
  CounterRng rng(101, 0);
  double inter = 0.0;
  for (int k = 0; k < 200; ++k) {
    const UnitTangentFrame f = random_frame(rng, 0.6);
    const double tt = rng.uniform(-10.0, 10.0), s = rng.uniform(-2.0, 2.0);
    const auto lhs = geodesic_flow_exact(horocycle_flow(f, s, HorocycleBranch::unstable), tt);
    const auto rhs = horocycle_flow(geodesic_flow_exact(f, tt), s * std::exp(tt), HorocycleBranch::unstable);
    inter = std::max(inter, projective_distance(lhs.g, rhs.g));
  }
  t.add("intertwining", inter <= 1e-12, "max " + fmt(inter));

  const auto& surf = *test::bolza();
  double norm_err = 0.0, round = 0.0;
  bool inside = true;
  for (int k = 0; k < 500; ++k) {
    const CotangentState st = frame_to_state(geodesic_flow_exact(random_frame(rng, 0.6), rng.uniform(0.0, 15.0)));
    const ReducedPoint r = reduce_to_domain(surf, st);
    inside = inside && in_domain(surf, r.state.z);
    norm_err = std::max(norm_err, std::abs(r.state.norm() - st.norm()));
    const CotangentState back = apply_moebius(r.element.inverse(), r.state);
    round = std::max(round, hyperbolic_distance(back.z, st.z) + std::abs(back.xi - st.xi) / st.norm() * st.z.imag());
  }
  t.add("reduction_norm", norm_err <= 1e-10 && inside, "max " + fmt(norm_err));
  t.add("round_trip", round <= 1e-8, "max " + fmt(round));
  return t.done();
}

Outcome integrator() {
  Tally t;
  const auto fam = test::default_family();
  std::vector<double> eps{0.06, -0.05, 0.05};
  double en = 0.0;
  for (double e : eps) en += e * e;
  for (double& e : eps) e *= 0.1 / std::sqrt(en);
  const HamiltonianParams params{fam, eps};
  IntegratorConfig ic;
  ic.step = 1e-3;
  ic.energy_monitor_interval = 0;

  CounterRng rng(202, 0);
  double worst = 0.0, early = 0.0, late = 0.0;
  for (int k = 0; k < 2; ++k) {
    const CotangentState s0 = frame_to_state(random_frame(rng, 0.6));
    const double E0 = energy(s0, params);
    CotangentState s = s0;
    for (int seg = 0; seg < 10; ++seg) {
      s = perturbed_flow(s, params, 5.0, ic);
      const double d = std::abs(energy(s, params) - E0) / E0;
      worst = std::max(worst, d);
      if (seg < 3) early = std::max(early, d);
      if (seg >= 7) late = std::max(late, d);
    }
  }
  t.add("energy", worst <= 1e-6, "max relative error " + fmt(worst));
  t.add("no_secular_drift", late <= 3.0 * early + 1e-12, "early " + fmt(early) + ", late " + fmt(late));

  const CotangentState s0 = frame_to_state(random_frame(rng, 0.5));
  IntegratorConfig cover = ic;
  cover.reduction = ReductionPolicy::none;
  auto run = [&](double h) {
    cover.step = h;
    return perturbed_flow(s0, params, 2.0, cover);
  };
  const CotangentState a = run(4e-3), b = run(2e-3), c = run(1e-3);
  const double ratio = std::abs(a.z - b.z) / std::abs(b.z - c.z);
  t.add("order", std::abs(ratio - 4.0) <= 0.4, "ratio " + fmt(ratio));

  const HamiltonianParams zero{fam, {0.0, 0.0, 0.0}};
  cover.step = 1e-3;
  double match = 0.0;
  for (int k = 0; k < 3; ++k) {
    const UnitTangentFrame f = random_frame(rng, 0.5);
    const PhasePoint num = integrate_phase(to_phase_point(frame_to_state(f)), zero, 20.0, cover);
    match = std::max(match, projective_distance(num.frame.g, geodesic_flow_exact(f, 20.0).g));
  }
  t.add("unperturbed_exact", match <= 1e-10, "max " + fmt(match));
  return t.done();
}

Outcome functionals() {
  Tally t;
  const auto surf = test::bolza();
  const auto fam = test::default_family();
  const CotangentState anchor = unit_state(from_disk({0.1, 0.2}), 0.7);
  const double L0 = admissibility_L(anchor, make_radial_potential(surf, {}, {}, 1.0)).value;
  t.add("L_constant", L0 == 0.0, "L " + fmt(L0));

  CounterRng rng(303, 0);
  const auto uu = [](const CotangentState&) { return 1.0; };
  const auto us = [](const CotangentState&) { return -1.0; };
  double ric = 0.0, horo = 0.0;
  QuadratureConfig hq;
  hq.tolerance = 1e-8;
  for (int k = 0; k < 100; ++k) {
    const CotangentState rho = frame_to_state(random_frame(rng, 0.8));
    const Potential& V = fam->potentials[static_cast<std::size_t>(k) % fam->size()];
    const double L = admissibility_L(rho, V).value;
    ric = std::max(ric, std::abs(L - admissibility_L_riccati(rho, V, uu, us).value));
    if (k < 10) horo = std::max(horo, std::abs(admissibility_L_horocycle(rho, V, 1e-5, hq).value - L));
  }
  t.add("riccati_identity", ric <= 1e-9, "max " + fmt(ric));
  t.add("horocycle_form", horo <= 1e-5, "max " + fmt(horo));

  // Unit bump of radius 0.7 at the domain center, seen from the identity frame.
  const QuadratureConfig q;
  const Potential bump = make_radial_potential(surf, {kI}, {1.0}, 0.7);
  // The identity frame sits on a symmetry axis (value 0), so a generic frame is checked too.
  double diff = 0.0;
  std::string vals;
  for (const CotangentState& rho : {frame_to_state(UnitTangentFrame{}), anchor}) {
    const double v = admissibility_L(rho, bump, q).value;
    diff = std::max(diff, std::abs(v - test::oracle_L(rho, bump, q.T_max)));
    vals += fmt(v) + " ";
  }
  t.add("reference_bump_oracle", diff <= 1e-8, "L " + vals + "difference " + fmt(diff));
  const Potential patch = build_bump_along_geodesic(surf, anchor);
  const double pdiff = std::abs(admissibility_L(anchor, patch, q).value - test::oracle_L(anchor, patch, q.T_max));
  t.add("patch_bump_oracle", pdiff <= 1e-8, "difference " + fmt(pdiff));
  return t.done();
}

std::filesystem::path out_dir() {
  const char* env = std::getenv("HOROFLOW_OUT");
  return env ? env : "acceptance_out";
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

Context default_context() {
  RunConfig cfg;
  cfg.threads = workers();
  cfg.output = out_dir().string();
  return make_context(cfg);
}

Outcome experiment(const std::string& name) {
  static const Context ctx = default_context();
  const ExperimentReport rep = run_experiment(name, ctx);
  write_report(rep, out_dir());
  return {rep.pass(), rep.summary_line()};
}

// Small configurations of every stochastic experiment, each run twice.
Outcome reproducibility() {
  RunConfig cfg;
  cfg.output = out_dir().string();
  cfg.liouville.mc_samples = 20000;
  cfg.liouville.horocycle_length = 200.0;
  cfg.equidist.b0_list = {1e-1, 1e-2};
  cfg.equidist.base_points = 2;
  cfg.sampling.samples = 16;
  cfg.horocycle.T_list = {10.0, 100.0};
  cfg.horocycle.samples = 3;
  cfg.reduction.b0_list = {1e-2, 3e-3};
  cfg.shadowing.norms = {1e-3, 1e-2};
  cfg.shadowing.samples = 2;
  cfg.bounds.spec.shells = 2;
  cfg.bounds.spec.base_points = 2;
  Tally t;
  for (const std::string name : {"validate", "liouville", "equidist", "horocycle-rate", "reduction-check",
                                 "shadowing", "bounds"}) {
    const std::string a = run_experiment(name, make_context(cfg)).summary_text();
    RunConfig again = cfg;
    again.threads = workers() + 1;
    const std::string b = run_experiment(name, make_context(again)).summary_text();
    t.add(name, a == b, a == b ? "identical" : "summaries differ");
  }
  return t.done();
}

}  // namespace

int main() {
  // The 30 minute budget of the headline run assumes 8 workers.
  const double headline = 1800.0 * 8.0 / std::min(8u, workers());
  const std::vector<Criterion> criteria{
      {1, "exactness", 10.0, exactness},
      {2, "integrator", 60.0, integrator},
      {3, "functionals", 60.0, functionals},
      {4, "liouville", 300.0, [] { return experiment("liouville"); }},
      {5, "horocycle-rate", 600.0, [] { return experiment("horocycle-rate"); }},
      {6, "equidist", headline, [] { return experiment("equidist"); }},
      {7, "reduction-check", 1200.0, [] { return experiment("reduction-check"); }},
      {8, "shadowing", 900.0, [] { return experiment("shadowing"); }},
      {9, "admissibility", 600.0, [] { return experiment("admissibility"); }},
      {10, "reproducibility", 0.0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_seconds <= 0.0 || secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << " (" << fmt(secs) << " s"
              << (c.budget_seconds > 0.0 ? " of " + fmt(c.budget_seconds) : std::string()) << (in_time ? "" : ", over budget")
              << "): " << o.detail << std::endl;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << 10 - failed << "/10" << std::endl;
  return failed ? 1 : 0;
}
