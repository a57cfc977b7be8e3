#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "horoflow/hyperbolic.hpp"
#include "horoflow/random.hpp"

using namespace horoflow;

namespace {

UnitTangentFrame random_frame(CounterRng& rng) {
  const Complex z{rng.uniform(-2.0, 2.0), rng.uniform(0.2, 3.0)};
  return state_to_frame(unit_state(z, rng.uniform(-3.0, 3.0)));
}

}  // namespace

TEST(Moebius, CompositionMatchesApplication) {
  const MoebiusMap a{2.0, 1.0, 1.0, 1.0}, b{1.0, -0.5, 0.3, 0.85};
  const Complex z{0.3, 1.7};
  const Complex lhs = (a * b).apply(z);
  const Complex rhs = a.apply(b.apply(z));
  EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-14);
}

TEST(Moebius, InverseAndDeterminant) {
  const MoebiusMap a = MoebiusMap{2.0, 1.0, 1.0, 1.0}.normalized();
  EXPECT_NEAR(a.det(), 1.0, 1e-15);
  EXPECT_LE(projective_distance(a * a.inverse(), MoebiusMap::identity()), 1e-14);
}

TEST(Moebius, IsometryOfDistance) {
  const MoebiusMap a = MoebiusMap{3.0, -1.0, 2.0, 0.0}.normalized();
  const Complex z1{0.1, 0.5}, z2{-1.2, 2.5};
  EXPECT_NEAR(hyperbolic_distance(a.apply(z1), a.apply(z2)), hyperbolic_distance(z1, z2), 1e-12);
}

TEST(Distance, KnownValues) {
  EXPECT_NEAR(hyperbolic_distance(kI, Complex{0.0, std::exp(2.5)}), 2.5, 1e-14);
  EXPECT_EQ(hyperbolic_distance(kI, kI), 0.0);
  EXPECT_THROW(hyperbolic_distance(kI, Complex{0.0, -1.0}), DomainError);
}

TEST(Covector, PushPreservesNorm) {
  const MoebiusMap m = MoebiusMap{1.0, 2.0, 0.5, 2.0}.normalized();
  const CotangentState s{{0.4, 0.9}, {1.3, -0.2}};
  EXPECT_NEAR(apply_moebius(m, s).norm(), s.norm(), 1e-13);
}

TEST(Covector, PerpIsUnitRotation) {
  const CotangentState s = unit_state({0.2, 1.4}, 0.9);
  const CotangentState p = rotate_covector_perp(s);
  EXPECT_NEAR(p.norm(), 1.0, 1e-14);
  EXPECT_NEAR(cometric(s.z, s.xi, p.xi), 0.0, 1e-14);
}

TEST(Frames, StateRoundTrip) {
  CounterRng rng(3, 0);
  for (int k = 0; k < 50; ++k) {
    const CotangentState s = unit_state({rng.uniform(-3.0, 3.0), rng.uniform(0.1, 4.0)}, rng.uniform(-3.1, 3.1));
    const CotangentState r = frame_to_state(state_to_frame(s));
    EXPECT_NEAR(std::abs(r.z - s.z), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(r.xi - s.xi) * s.z.imag(), 0.0, 1e-12);
  }
  EXPECT_THROW(state_to_frame({kI, {2.0, 0.0}}), DomainError);
}

TEST(Frames, IdentityFrameIsUpwardAtI) {
  const CotangentState s = frame_to_state(UnitTangentFrame::identity());
  EXPECT_NEAR(std::abs(s.z - kI), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.xi - kI), 0.0, 1e-15);
}

TEST(Flows, GeodesicMovesAlongImaginaryAxis) {
  const UnitTangentFrame f = geodesic_flow_exact(UnitTangentFrame::identity(), 1.75);
  EXPECT_NEAR(std::abs(f.base() - Complex{0.0, std::exp(1.75)}), 0.0, 1e-13);
}

TEST(Flows, GroupLaws) {
  CounterRng rng(5, 0);
  const UnitTangentFrame f = random_frame(rng);
  const auto a = geodesic_flow_exact(geodesic_flow_exact(f, 1.2), -0.7);
  EXPECT_TRUE(same_frame(a, geodesic_flow_exact(f, 0.5), 1e-13));
  const auto b = horocycle_flow(horocycle_flow(f, 0.4, HorocycleBranch::unstable), 0.9, HorocycleBranch::unstable);
  EXPECT_TRUE(same_frame(b, horocycle_flow(f, 1.3, HorocycleBranch::unstable), 1e-13));
}

TEST(Flows, IntertwiningIdentity) {
  CounterRng rng(11, 0);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const UnitTangentFrame f = random_frame(rng);
    const double t = rng.uniform(-10.0, 10.0), s = rng.uniform(-2.0, 2.0);
    // G^t H_u^s = H_u^{s e^t} G^t and G^t H_s^s = H_s^{s e^-t} G^t.
    const auto u1 = geodesic_flow_exact(horocycle_flow(f, s, HorocycleBranch::unstable), t);
    const auto u2 = horocycle_flow(geodesic_flow_exact(f, t), s * std::exp(t), HorocycleBranch::unstable);
    const auto s1 = geodesic_flow_exact(horocycle_flow(f, s, HorocycleBranch::stable), t);
    const auto s2 = horocycle_flow(geodesic_flow_exact(f, t), s * std::exp(-t), HorocycleBranch::stable);
    const double scale = std::max(1.0, std::exp(std::abs(t)));
    worst = std::max({worst, projective_distance(u1.g, u2.g) / scale, projective_distance(s1.g, s2.g) / scale});
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Flows, UnstableHorocycleExpandsForward) {
  // Two frames on one unstable horocycle separate like e^t under the geodesic flow.
  const UnitTangentFrame f = UnitTangentFrame::identity();
  const auto g = horocycle_flow(f, 1e-6, HorocycleBranch::unstable);
  const double d0 = frame_distance(f, g);
  const double d5 = frame_distance(geodesic_flow_exact(f, 5.0), geodesic_flow_exact(g, 5.0));
  EXPECT_NEAR(d5 / d0, std::exp(5.0), 1e-3 * std::exp(5.0));
}

TEST(Flows, FrameDistanceIsLeftInvariant) {
  CounterRng rng(2, 0);
  const auto f1 = random_frame(rng), f2 = random_frame(rng);
  const MoebiusMap m = MoebiusMap{2.0, 1.0, 3.0, 2.0}.normalized();
  EXPECT_NEAR(frame_distance({m * f1.g}, {m * f2.g}), frame_distance(f1, f2), 1e-10);
}

TEST(Disk, CayleyRoundTrip) {
  const Complex w{0.3, -0.4};
  EXPECT_NEAR(std::abs(to_disk(from_disk(w)) - w), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(from_disk(0.0) - kI), 0.0, 1e-15);
}

TEST(Rotation, MovesCovectorAtI) {
  const CotangentState s = frame_to_state({rotation_element(0.3)});
  EXPECT_NEAR(std::abs(s.z - kI), 0.0, 1e-15);
  EXPECT_NEAR(std::arg(s.xi), 0.5 * std::numbers::pi + 0.6, 1e-14);
}
