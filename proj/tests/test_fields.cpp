#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "common.hpp"
#include "horoflow/fields.hpp"
#include "horoflow/quadrature.hpp"
#include "horoflow/random.hpp"

using namespace horoflow;
using horoflow::test::bolza;
using horoflow::test::default_family;

namespace {

double fd_x(const Potential& V, Complex z, double h) {
  return (eval_potential(V, z + h) - eval_potential(V, z - h)) / (2.0 * h);
}
double fd_y(const Potential& V, Complex z, double h) {
  return (eval_potential(V, z + Complex{0.0, h}) - eval_potential(V, z - Complex{0.0, h})) / (2.0 * h);
}

}  // namespace

TEST(Bump, ProfileShapeAndIntegral) {
  const BumpProfile p = BumpProfile::with_radius(1.2);
  EXPECT_NEAR(p.value(1.0), 1.0, 1e-15);
  EXPECT_EQ(p.value(std::cosh(1.2)), 0.0);
  const double ref = quad::composite([&](double u) { return p.value(u); }, 1.0, p.u_max, 400, 16);
  EXPECT_NEAR(p.integral(), ref, 1e-10);
  const double u = 1.3, h = 1e-6;
  EXPECT_NEAR(p.derivative(u), (p.value(u + h) - p.value(u - h)) / (2.0 * h), 1e-7);
}

TEST(Radial, GradientMatchesFiniteDifferences) {
  const Potential V = make_radial_potential(bolza(), {from_disk({0.1, 0.2}), from_disk({-0.4, 0.3})}, {1.5, -0.7}, 1.1);
  CounterRng rng(9, 0);
  for (int k = 0; k < 40; ++k) {
    const Complex z = from_disk(std::polar(0.9 * std::sqrt(rng.uniform()), 6.3 * rng.uniform()));
    const Complex g = grad_potential(V, z);
    const double h = 1e-6 * z.imag();
    EXPECT_NEAR(g.real(), fd_x(V, z, h), 1e-6 / z.imag());
    EXPECT_NEAR(g.imag(), fd_y(V, z, h), 1e-6 / z.imag());
  }
}

TEST(Radial, PeriodicUnderPairings) {
  const auto& fam = *default_family();
  const Complex z = from_disk({0.55, -0.2});
  for (const auto& g : bolza()->pairings)
    for (const auto& V : fam.potentials) EXPECT_NEAR(eval_potential(V, g.apply(z)), eval_potential(V, z), 1e-12);
}

TEST(Radial, RejectsRadiusBeyondInjectivity) {
  EXPECT_THROW(make_radial_potential(bolza(), {kI}, {1.0}, 1.6), ConfigError);
  EXPECT_THROW(make_radial_potential(bolza(), {kI, kI}, {1.0}, 1.0), ConfigError);
}

TEST(Patch, GradientMatchesFiniteDifferences) {
  const CotangentState rho = unit_state(from_disk({0.1, 0.2}), 0.7);
  const Potential W = build_bump_along_geodesic(bolza(), rho);
  const auto& P = std::get<PatchPotential>(W);
  for (double t : {-0.2, 0.3, 0.7})
    for (double tau : {-0.15, 0.05, 0.2}) {
      const Complex z = P.patch_point(t, tau);
      const Complex g = grad_potential(W, z);
      const double h = 1e-6 * z.imag();
      EXPECT_NEAR(g.real(), fd_x(W, z, h), 2e-6 / z.imag());
      EXPECT_NEAR(g.imag(), fd_y(W, z, h), 2e-6 / z.imag());
    }
}

TEST(Patch, RejectsNonEmbeddedPatch) {
  EXPECT_THROW(build_bump_along_geodesic(bolza(), unit_state(kI, 0.0), 3.0), ConfigError);
}

TEST(Family, BuildsThreePotentials) {
  const auto& fam = *default_family();
  EXPECT_EQ(fam.size(), 3u);
  EXPECT_EQ(fam.J(), 2);
  EXPECT_THROW(fam.check_eps({0.1}), ConfigError);
  const Complex z = from_disk({0.3, 0.3});
  const std::vector<double> eps{0.1, -0.05, 0.02};
  double v = 0.0;
  for (std::size_t j = 0; j < 3; ++j) v += eps[j] * eval_potential(fam.potentials[j], z);
  EXPECT_NEAR(fam.value(eps, z), v, 1e-14);
  EXPECT_GE(fam.sup_bound(eps) + 1e-14, std::abs(v));
}

TEST(Family, ConfigErrorsCarryFieldPaths) {
  FamilySpec spec;
  spec.r_max = 2.0;
  try {
    build_admissible_family(bolza(), spec);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "family.r_max");
  }
  spec = {};
  spec.potentials[1].amplitudes.pop_back();
  try {
    build_admissible_family(bolza(), spec);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "family.potentials[1].amplitudes");
  }
}

TEST(Observable, InvariantUnderGroupAndScaling) {
  ObservableSpec spec{0.2, {{{0.2, -0.1}, 1.0, 2.0, {1.0, 0.5}, {0.0, 0.3}}}};
  const Observable a = make_observable(bolza(), spec);
  const CotangentState s = unit_state(from_disk({0.65, 0.1}), 1.3);
  for (const auto& g : bolza()->pairings) EXPECT_NEAR(a(apply_moebius(g, s)), a(s), 1e-12);
  EXPECT_NEAR(a({s.z, 3.0 * s.xi}), a(s), 1e-14);
  EXPECT_NEAR(a(state_to_frame(s)), a(s), 1e-12);
}

TEST(Observable, ConstantAndUnfoldedAverage) {
  const Observable one = constant_observable(bolza(), 1.0);
  EXPECT_TRUE(one.is_constant());
  EXPECT_EQ(one(unit_state(kI, 0.3)), 1.0);
  EXPECT_EQ(one.unfolded_average(), 1.0);
  EXPECT_EQ(oscillation(one), 0.0);
  // A zero-mean fiber factor has zero Liouville average.
  const Observable odd = make_observable(bolza(), {0.0, {{{0.1, 0.1}, 1.0, 1.0, {0.0, 1.0}, {0.0}}}});
  EXPECT_EQ(odd.unfolded_average(), 0.0);
}

TEST(Observable, UnfoldedAverageMatchesDomainQuadrature) {
  // Integrate the radial part over the fundamental domain in polar coordinates about i.
  const Observable a = make_observable(bolza(), {0.0, {{{0.3, 0.2}, 1.0, 1.7, {1.0}, {0.0}}}});
  const auto& s = *bolza();
  double total = 0.0;
  const int na = 720, nr = 600;
  for (int i = 0; i < na; ++i) {
    const double phi = 2.0 * std::numbers::pi * (i + 0.5) / na;
    for (int k = 0; k < nr; ++k) {
      const double r = s.domain_radius * (k + 0.5) / nr;
      const Complex z = from_disk(std::polar(std::tanh(0.5 * r), phi));
      if (!in_domain(s, z)) continue;
      total += a.value_reduced(unit_state(z, 0.0)) * std::sinh(r) * (s.domain_radius / nr) * (2.0 * std::numbers::pi / na);
    }
  }
  EXPECT_NEAR(total / s.area, a.unfolded_average(), 2e-3);
}

TEST(Observable, RejectsHighFiberOrder) {
  ObservableSpec spec{0.0, {{{0.0, 0.0}, 1.0, 1.0, {1.0, 0.0, 0.0, 0.0, 0.0, 1.0}, {0.0}}}};
  EXPECT_THROW(make_observable(bolza(), spec), ConfigError);
}
