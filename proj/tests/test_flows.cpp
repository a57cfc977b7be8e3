#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "common.hpp"
#include "horoflow/flows.hpp"

using namespace horoflow;
using horoflow::test::default_family;

namespace {

HamiltonianParams params(std::vector<double> eps) { return {default_family(), std::move(eps)}; }

const CotangentState kStart = unit_state(from_disk({0.1, -0.2}), 0.4);

}  // namespace

TEST(Integrator, UnperturbedMatchesExactFlow) {
  IntegratorConfig cfg;
  cfg.reduction = ReductionPolicy::none;
  const UnitTangentFrame f = state_to_frame(kStart);
  const PhasePoint p = integrate_phase(to_phase_point(kStart), params({0.0, 0.0, 0.0}), 20.0, cfg);
  EXPECT_LE(projective_distance(p.frame.g, geodesic_flow_exact(f, 20.0).g), 1e-10);
  EXPECT_NEAR(p.speed, 1.0, 1e-15);
}

TEST(Integrator, EnergyConservedOverLongRun) {
  IntegratorConfig cfg;
  const auto P = params({0.06, -0.05, 0.05});
  ASSERT_LE(P.eps_norm(), 0.1);
  const double e0 = energy(kStart, P);
  double worst = 0.0, early = 0.0, late = 0.0;
  integrate_phase(to_phase_point(kStart), P, 50.0, cfg, [&](double t, const PhasePoint& p) {
    const double e = energy(to_state(p), P);
    const double rel = std::abs(e - e0) / e0;
    worst = std::max(worst, rel);
    if (t <= 10.0) early = std::max(early, rel);
    if (t >= 40.0) late = std::max(late, rel);
  });
  EXPECT_LE(worst, 1e-6);
  // No secular growth: the last fifth stays within a small factor of the first.
  EXPECT_LE(late, 3.0 * early + 1e-12);
}

TEST(Integrator, SecondOrderConvergence) {
  IntegratorConfig cfg;
  cfg.reduction = ReductionPolicy::none;
  const auto P = params({0.08, -0.04, 0.05});
  auto run = [&](double h) {
    cfg.step = h;
    return integrate_phase(to_phase_point(kStart), P, 2.0, cfg).frame;
  };
  const auto f1 = run(4e-3), f2 = run(2e-3), f3 = run(1e-3);
  const double ratio = frame_distance(f1, f2) / frame_distance(f2, f3);
  EXPECT_NEAR(ratio, 4.0, 0.4);
}

TEST(Integrator, TimeReversible) {
  IntegratorConfig cfg;
  cfg.reduction = ReductionPolicy::none;
  const auto P = params({0.05, 0.05, -0.05});
  PhasePoint p = integrate_phase(to_phase_point(kStart), P, 3.0, cfg);
  p = integrate_phase(p, P, -3.0, cfg);
  EXPECT_LE(frame_distance(p.frame, state_to_frame(kStart)), 1e-10);
}

TEST(Integrator, ReductionDoesNotChangeTheOrbit) {
  const auto P = params({0.05, -0.03, 0.04});
  IntegratorConfig a, b;
  b.reduction = ReductionPolicy::none;
  const CotangentState sa = perturbed_flow(kStart, P, 8.0, a);
  const CotangentState sb = perturbed_flow(kStart, P, 8.0, b);
  const auto& surf = *default_family()->surface;
  EXPECT_LE(quotient_distance(surf, sa.z, sb.z), 1e-8);
  EXPECT_NEAR(sa.norm(), sb.norm(), 1e-9);
}

TEST(Integrator, RejectsBadInput) {
  IntegratorConfig cfg;
  EXPECT_THROW(perturbed_flow(kStart, params({0.3, 0.0, 0.0}), 1.0, cfg), ConfigError);
  EXPECT_THROW(perturbed_flow(kStart, params({0.1, 0.0}), 1.0, cfg), ConfigError);
  EXPECT_THROW(perturbed_flow({kI, 0.0}, params({0.0, 0.0, 0.0}), 1.0, cfg), DomainError);
  cfg.step = -1.0;
  EXPECT_THROW(perturbed_flow(kStart, params({0.0, 0.0, 0.0}), 1.0, cfg), ConfigError);
}

TEST(Integrator, EnergyMonitorTrips) {
  IntegratorConfig cfg;
  cfg.step = 0.2;
  cfg.energy_monitor_interval = 1;
  cfg.max_relative_energy_drift = 1e-12;
  EXPECT_THROW(perturbed_flow(kStart, params({0.15, -0.1, 0.05}), 20.0, cfg), IntegrationError);
}

TEST(Integrator, LoggedRunWritesColumns) {
  std::ostringstream log;
  IntegratorConfig cfg;
  perturbed_flow_logged(kStart, params({0.01, 0.0, 0.0}), 0.01, cfg, log);
  std::istringstream in(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    double x;
    int cols = 0;
    while (row >> x) ++cols;
    EXPECT_EQ(cols, 7);
    ++lines;
  }
  EXPECT_EQ(lines, 11);
}

TEST(Projected, StaysOnUnitBundleAndTracksShell) {
  const auto P = params({0.02, 0.01, -0.02});
  const CotangentState r = projected_flow(kStart, kStart, P, 3.0);
  EXPECT_NEAR(r.norm(), 1.0, 1e-9);
  EXPECT_GT(c_eps(kStart, P, r.z), 0.0);
  const CotangentState zero = projected_flow(kStart, kStart, params({0.0, 0.0, 0.0}), 3.0);
  const auto& surf = *default_family()->surface;
  EXPECT_LE(quotient_distance(surf, zero.z, frame_to_state(geodesic_flow_exact(state_to_frame(kStart), 3.0)).z), 1e-9);
}
