#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "calerm/geometry.hpp"
#include "oracles.hpp"

using namespace calerm;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ConstraintSet random_set(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.2, 3.0);
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return ConstraintSet::l2_ball(n, u(rng));
    case 1: return ConstraintSet::l1_ball(n, u(rng));
    default: return ConstraintSet::l1_l2(n, u(rng), u(rng));
  }
}

Vector gaussian(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace

TEST(Geometry, ProjectExamples) {
  const Vector a = project(ConstraintSet::l1_ball(2, 1.0), vec({3, 0}));
  EXPECT_NEAR(a[0], 1.0, 1e-15);
  EXPECT_NEAR(a[1], 0.0, 1e-15);
  const Vector b = project(ConstraintSet::l1_ball(2, 1.0), vec({0.3, 0.2}));
  EXPECT_EQ(b, vec({0.3, 0.2}));
  const Vector c = project(ConstraintSet::l2_ball(2, 2.0), vec({3, 4}));
  EXPECT_NEAR(c[0], 1.2, 1e-15);
  EXPECT_NEAR(c[1], 1.6, 1e-15);
  EXPECT_THROW(project(ConstraintSet::l2_ball(3, 1.0), vec({1, 2})), ArgumentError);
}

TEST(Geometry, SupportExamples) {
  EXPECT_NEAR(support_value(ConstraintSet::l1_l2(2, 1, 1), vec({1, 0})), 1.0, 1e-14);
  EXPECT_NEAR(support_value(ConstraintSet::l1_l2(2, 1, 1), vec({1, 1})), 1.0, 1e-14);
  EXPECT_NEAR(support_value(ConstraintSet::l2_ball(2, 3), vec({0, 4})), 12.0, 1e-14);
  EXPECT_NEAR(symmetric_support(ConstraintSet::l1_ball(2, 2), vec({-3, 1})), 6.0, 1e-14);
  EXPECT_EQ(symmetric_support(ConstraintSet::l2_ball(2, 1), vec({0, 0})), 0.0);
  EXPECT_NEAR(symmetric_support(ConstraintSet::l1_l2(2, 1, 0.5), vec({1, 0})), 0.5, 1e-14);
  EXPECT_THROW(support_value(ConstraintSet::full_space(2), vec({1, 0})), UnboundedError);
}

TEST(Geometry, DiameterExamples) {
  EXPECT_EQ(diameter(ConstraintSet::l2_ball(3, 3)), 6.0);
  EXPECT_EQ(diameter(ConstraintSet::l1_l2(3, 5, 1)), 2.0);
  EXPECT_TRUE(std::isinf(diameter(ConstraintSet::full_space(4))));
}

TEST(Geometry, InvalidSetsRejected) {
  EXPECT_THROW(ConstraintSet::l2_ball(3, -1.0).validate(), ArgumentError);
  EXPECT_THROW(ConstraintSet::l1_l2(3, 1.0, 0.0).validate(), ArgumentError);
  EXPECT_THROW(ConstraintSet::full_space(0).validate(), ArgumentError);
}

TEST(Geometry, ProjectionIsFeasibleAndIdempotent) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 12;
    const ConstraintSet set = random_set(rng, n);
    const Vector p = gaussian(rng, n, 3.0);
    const Vector q = project(set, p);
    EXPECT_TRUE(oracle::feasible(set, q));
    EXPECT_LE((project(set, q) - q).norm(), 1e-12);
  }
}

TEST(Geometry, ProjectionMatchesIndependentOracles) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 7;
    const ConstraintSet set = random_set(rng, n);
    const Vector p = gaussian(rng, n, 2.0);
    const Vector q = project(set, p);
    EXPECT_LE((q - oracle::project_dykstra(set, p)).norm(), 1e-7) << to_string(set.kind);
    const double dist = (q - p).norm();
    for (int k = 0; k < 2000; ++k)
      ASSERT_LE(dist, (oracle::random_feasible(set, rng) - p).norm() + 1e-8);
  }
}

TEST(Geometry, ProjectionIsNonexpansive) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 10;
    const ConstraintSet set = random_set(rng, n);
    const Vector a = gaussian(rng, n, 3.0), b = gaussian(rng, n, 3.0);
    EXPECT_LE((project(set, a) - project(set, b)).norm(), (a - b).norm() + 1e-10);
  }
}

TEST(Geometry, IntersectionSupportMatchesGoldenSection) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 40;
    const Vector w = gaussian(rng, n);
    const double alpha = u(rng), r = u(rng);
    const double exact = support_value(ConstraintSet::l1_l2(n, alpha, r), w);
    EXPECT_NEAR(exact, oracle::support_golden(w, alpha, r), 1e-10 * (1.0 + exact));
  }
}

TEST(Geometry, SupportMatchesProjectedGradientAscent) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 15;
    const ConstraintSet set = random_set(rng, n);
    const Vector w = gaussian(rng, n);
    const double s = support_value(set, w);
    EXPECT_NEAR(oracle::support_pga(set, w, rng, 3), s, 1e-6 * s) << to_string(set.kind);
  }
}

TEST(Geometry, SupportDualityAndHomogeneity) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 16;
    const ConstraintSet set = random_set(rng, n);
    const Vector w = gaussian(rng, n);
    const double s = support_value(set, w);
    EXPECT_NEAR(w.dot(project(set, Vector(1e6 * w))), s, 1e-6 * s);
    EXPECT_NEAR(support_value(set, Vector(3.7 * w)), 3.7 * s, 1e-12 * 3.7 * s);
    EXPECT_NEAR(symmetric_support(set, w), s, 1e-12 * s);
  }
}

TEST(Geometry, LocalizeAndRadialLimit) {
  const ConstraintSet l1 = ConstraintSet::l1_ball(4, 2.0);
  const ConstraintSet loc = localize(l1, 0.5);
  EXPECT_EQ(loc.kind, SetKind::l1_l2_intersection);
  EXPECT_EQ(loc.r, 0.5);
  EXPECT_EQ(localize(ConstraintSet::full_space(3), 2.0), ConstraintSet::l2_ball(3, 2.0));
  EXPECT_EQ(localize(ConstraintSet::l2_ball(3, 1.0), 2.0), ConstraintSet::l2_ball(3, 1.0));
  EXPECT_NEAR(radial_limit(l1, vec({1, 1, 0, 0})), 1.0, 1e-15);
  EXPECT_TRUE(std::isinf(radial_limit(ConstraintSet::full_space(2), vec({1, 0}))));
  EXPECT_THROW(localize(l1, 0.0), ArgumentError);
}

TEST(Geometry, Contains) {
  EXPECT_TRUE(contains(ConstraintSet::l1_ball(2, 1.0), vec({0.5, 0.5})));
  EXPECT_FALSE(contains(ConstraintSet::l1_ball(2, 1.0), vec({0.6, 0.5})));
  EXPECT_TRUE(contains(ConstraintSet::full_space(2), vec({1e9, -1e9})));
}

TEST(Geometry, StringRoundTrip) {
  for (auto k : {SetKind::full_space, SetKind::l2_ball, SetKind::l1_ball, SetKind::l1_l2_intersection})
    EXPECT_EQ(set_kind_from_string(to_string(k)), k);
}
