#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "common.hpp"
#include "oracles.hpp"
#include "horoflow/functionals.hpp"
#include "horoflow/random.hpp"

using namespace horoflow;
using horoflow::test::bolza;
using horoflow::test::default_family;

namespace {

const CotangentState kAnchor = unit_state(from_disk({0.1, 0.2}), 0.7);

Potential reference_bump() { return build_bump_along_geodesic(bolza(), kAnchor); }

}  // namespace

TEST(Admissibility, ConstantPotentialGivesZero) {
  const Potential flat = make_radial_potential(bolza(), {}, {}, 1.0);
  EXPECT_EQ(admissibility_L(kAnchor, flat).value, 0.0);
}

TEST(Admissibility, ReferenceBumpFirstPassIsOne) {
  // The first crossing of the patch contributes exactly 1; later returns add a small remainder.
  EXPECT_NEAR(test::oracle_L(kAnchor, reference_bump(), 1.0), 1.0, 1e-8);
  const double L = admissibility_L(kAnchor, reference_bump()).value;
  EXPECT_LT(std::abs(L - 1.0), std::exp(-1.0));
}

TEST(Admissibility, ReferenceBumpMatchesSimpsonOracle) {
  const Potential W = reference_bump();
  QuadratureConfig q;
  for (const CotangentState& rho : {kAnchor, unit_state(from_disk({0.12, 0.17}), 0.75),
                                    unit_state(from_disk({0.05, 0.25}), 0.6)}) {
    const double oracle = test::oracle_L(rho, W, q.T_max);
    EXPECT_NEAR(admissibility_L(rho, W, q).value, oracle, 1e-8);
  }
}

TEST(Admissibility, FrozenReferenceBumpMatchesSimpsonOracle) {
  const Potential W = make_radial_potential(bolza(), {kI}, {1.0}, 0.7);
  // The identity frame lies on a symmetry axis, where the value is 0; the anchor is generic.
  for (const CotangentState& rho : {frame_to_state(UnitTangentFrame{}), kAnchor})
    EXPECT_NEAR(admissibility_L(rho, W).value, test::oracle_L(rho, W, 40.0), 1e-8);
  EXPECT_GT(std::abs(admissibility_L(kAnchor, W).value), 1e-3);
}

TEST(Admissibility, RadialPotentialMatchesSimpsonOracle) {
  const Potential& V = default_family()->potentials[1];
  const CotangentState rho = unit_state(from_disk({-0.3, 0.4}), 2.1);
  EXPECT_NEAR(admissibility_L(rho, V).value, test::oracle_L(rho, V, 40.0), 1e-8);
}

TEST(Admissibility, ConstantRiccatiFormAgrees) {
  CounterRng rng(23, 0);
  auto uu = [](const CotangentState&) { return 1.0; };
  auto us = [](const CotangentState&) { return -1.0; };
  QuadratureConfig q;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Complex w = std::polar(0.8 * std::sqrt(rng.uniform()), 6.3 * rng.uniform());
    const CotangentState rho = unit_state(from_disk(w), rng.uniform(-3.1, 3.1));
    const Potential& V = default_family()->potentials[k % 3];
    const double a = admissibility_L(rho, V, q).value;
    const double b = admissibility_L_riccati(rho, V, uu, us, q).value;
    worst = std::max(worst, std::abs(a - b));
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Admissibility, HorocycleDerivativeFormAgrees) {
  CounterRng rng(29, 0);
  QuadratureConfig q;
  q.tolerance = 1e-8;
  for (int k = 0; k < 10; ++k) {
    const CotangentState rho = unit_state(from_disk(std::polar(0.7 * rng.uniform(), 6.3 * rng.uniform())), 6.3 * rng.uniform());
    const Potential& V = default_family()->potentials[k % 3];
    EXPECT_NEAR(admissibility_L_horocycle(rho, V, 1e-5, q).value, admissibility_L(rho, V, q).value, 1e-5);
  }
}

TEST(Admissibility, LinearInThePotential) {
  const CotangentState rho = unit_state(from_disk({0.2, 0.1}), 1.0);
  const Potential sum = make_radial_potential(bolza(), {from_disk({0.3, 0.0})}, {2.0}, 1.0);
  const Potential half = make_radial_potential(bolza(), {from_disk({0.3, 0.0})}, {1.0}, 1.0);
  EXPECT_NEAR(admissibility_L(rho, sum).value, 2.0 * admissibility_L(rho, half).value, 1e-12);
}

TEST(Averaging, UnstableAverageOfDifferentialIsL) {
  const Potential& V = default_family()->potentials[0];
  const CotangentState rho = unit_state(from_disk({-0.1, 0.3}), 0.2);
  const auto b = [&](const CotangentState& s) { return unstable_component(V, s); };
  EXPECT_NEAR(averaging_Lu(*bolza(), b, rho).value, admissibility_L(rho, V).value, 1e-9);
}

TEST(Averaging, ConstantFunction) {
  const auto one = [](const CotangentState&) { return 1.0; };
  const CotangentState rho = unit_state(kI, 0.0);
  EXPECT_NEAR(averaging_Lu(*bolza(), one, rho).value, 0.5, 1e-10);
  EXPECT_NEAR(averaging_Ls(*bolza(), one, rho).value, 0.5, 1e-10);
}

TEST(Averaging, PrecisionErrorWhenToleranceUnreachable) {
  QuadratureConfig q;
  q.T_max = 3.0;
  const auto one = [](const CotangentState&) { return 1.0; };
  EXPECT_THROW(averaging_Lu(*bolza(), one, unit_state(kI, 0.0), q), PrecisionError);
}

TEST(Shift, BetaIsLinearAndVanishesAtZero) {
  const auto& fam = *default_family();
  const CotangentState rho = unit_state(from_disk({0.15, -0.1}), 0.7);
  const GeodesicAverages g = geodesic_averages(fam, rho);
  EXPECT_EQ(g.beta_u({0.0, 0.0, 0.0}), 0.0);
  const double b1 = g.beta_u({1e-3, 0.0, 0.0});
  EXPECT_NEAR(b1, -1e-3 * admissibility_L(rho, fam.potentials[0]).value, 1e-12);
  EXPECT_NEAR(g.beta_u({2e-3, 1e-3, 0.0}), 2.0 * b1 + g.beta_u({0.0, 1e-3, 0.0}), 1e-15);
  EXPECT_NEAR(beta_u(rho, fam, {1e-3, 0.0, 0.0}), b1, 1e-15);
}

TEST(Shift, AlphaTildeIsIdentityAtZero) {
  const auto& fam = *default_family();
  const CotangentState rho = unit_state(from_disk({0.15, -0.1}), 0.7);
  const CotangentState a = alpha_tilde(rho, fam, {0.0, 0.0, 0.0});
  EXPECT_NEAR(std::abs(a.z - rho.z), 0.0, 1e-14);
  const ZCoefficients c = z_coefficients(rho, fam, {1e-3, -2e-3, 5e-4});
  EXPECT_NE(c.c_u, 0.0);
  EXPECT_NE(c.c_s, 0.0);
}

TEST(Certificate, SmallGridReportIsConsistent) {
  AdmissibilityGrid g;
  g.base = 6;
  g.angles = 8;
  const auto rep = admissibility_check(*default_family(), g, 2, true);
  ASSERT_EQ(rep.records.size(), rep.grid_size);
  double m = 1e300;
  for (const auto& r : rep.records) m = std::min(m, r.max_abs);
  EXPECT_EQ(m, rep.min_max_abs);
  EXPECT_EQ(rep.pass, rep.min_max_abs >= g.threshold);
  const auto again = admissibility_check(*default_family(), g, 1, false);
  EXPECT_EQ(again.min_max_abs, rep.min_max_abs);
  std::ostringstream csv;
  write_admissibility_csv(csv, rep);
  EXPECT_EQ(csv.str().substr(0, 40), "z_re,z_im,xi_x,xi_y,L_0,L_1,L_2,max_abs_");
}
