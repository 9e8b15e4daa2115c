#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "calerm/synthdata.hpp"

using namespace calerm;

namespace {

struct Moments {
  double mean, l2, l2_se, l4, l4_se, mean_se;
};

// Sample moments of W with delta-method standard errors for the norms.
Moments draw_moments(const NoiseKind& noise, int m, std::uint64_t seed) {
  Rng rng(seed);
  double s1 = 0, s2 = 0, s4 = 0, s8 = 0;
  for (int i = 0; i < m; ++i) {
    const double w = sample_noise(noise, rng);
    const double w2 = w * w;
    s1 += w;
    s2 += w2;
    s4 += w2 * w2;
    s8 += w2 * w2 * w2 * w2;
  }
  const double e2 = s2 / m, e4 = s4 / m, e8 = s8 / m;
  Moments out;
  out.mean = s1 / m;
  out.mean_se = std::sqrt(e2 / m);
  out.l2 = std::sqrt(e2);
  out.l2_se = std::sqrt((e4 - e2 * e2) / m) / (2 * out.l2);
  out.l4 = std::pow(e4, 0.25);
  out.l4_se = std::sqrt((e8 - e4 * e4) / m) / (4 * std::pow(e4, 0.75));
  return out;
}

}  // namespace

TEST(Synthdata, NoiseMomentExamples) {
  const NoiseMoments t5 = noise_moments(NoiseKind::student_t(5.0, 1.0));
  EXPECT_NEAR(t5.l2, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_NEAR(t5.l4, std::pow(25.0, 0.25), 1e-12);
  const NoiseMoments g = noise_moments(NoiseKind::gaussian(1.0));
  EXPECT_EQ(g.l2, 1.0);
  EXPECT_NEAR(g.l4, 1.3161, 1e-4);
  const NoiseMoments p = noise_moments(NoiseKind::symmetrized_pareto(2.5, 1.0));
  EXPECT_TRUE(std::isinf(p.l4));
  EXPECT_NEAR(p.l2, std::sqrt(5.0), 1e-12);
}

TEST(Synthdata, MonteCarloMomentsAgree) {
  const NoiseKind kinds[] = {NoiseKind::gaussian(2.0), NoiseKind::student_t(9.0, 1.5),
                             NoiseKind::symmetrized_pareto(9.0, 0.7),
                             NoiseKind::symmetrized_pareto(2.5, 1.0)};
  std::uint64_t seed = 1;
  for (const auto& k : kinds) {
    const NoiseMoments exact = noise_moments(k);
    const Moments mc = draw_moments(k, 1000000, seed++);
    EXPECT_LE(std::abs(mc.mean), 4 * mc.mean_se) << to_string(k.family);
    if (std::isfinite(exact.l4)) {
      EXPECT_LE(std::abs(mc.l2 - exact.l2), 3 * mc.l2_se) << to_string(k.family);
      EXPECT_LE(std::abs(mc.l4 - exact.l4), 3 * mc.l4_se) << to_string(k.family);
    } else {
      // Infinite fourth moment: the L2 standard error is itself unreliable.
      EXPECT_NEAR(mc.l2, exact.l2, 0.05 * exact.l2);
    }
  }
}

TEST(Synthdata, GaussianNoiseVariance) {
  const Moments mc = draw_moments(NoiseKind::gaussian(2.0), 100000, 77);
  const double se_var = std::sqrt(2.0) * 4.0 / std::sqrt(1e5);
  EXPECT_LE(std::abs(mc.l2 * mc.l2 - 4.0), 3 * se_var);
}

TEST(Synthdata, NoiseWithL2) {
  for (auto fam : {NoiseFamily::gaussian, NoiseFamily::student_t, NoiseFamily::symmetrized_pareto})
    EXPECT_NEAR(noise_moments(noise_with_l2(fam, 1.7, 5.0, 2.5)).l2, 1.7, 1e-12);
  EXPECT_EQ(noise_with_l2(NoiseFamily::none, 0.0).family, NoiseFamily::none);
}

TEST(Synthdata, InfiniteVarianceRejected) {
  const DesignKind d{DesignFamily::gaussian_isotropic, 2};
  EXPECT_THROW(sample_dataset(d, {Vector::Zero(2), NoiseKind::student_t(2.0, 1.0)}, 5, 1), ArgumentError);
  EXPECT_THROW(sample_dataset(d, {Vector::Zero(2), NoiseKind::symmetrized_pareto(1.5, 1.0)}, 5, 1),
               ArgumentError);
  EXPECT_THROW(sample_dataset({DesignFamily::student_t_isotropic, 2, 2.0}, {Vector::Zero(2), {}}, 5, 1),
               ArgumentError);
  EXPECT_THROW(sample_dataset(d, {Vector::Zero(3), {}}, 5, 1), ArgumentError);
}

TEST(Synthdata, NoiseFreeResponsesAreExact) {
  Vector t0(3);
  t0 << 1.0, -2.0, 0.5;
  const Sample s = sample_dataset({DesignFamily::gaussian_isotropic, 3}, {t0, NoiseKind::none()}, 50, 3);
  EXPECT_EQ(s.responses, s.design * t0);
}

TEST(Synthdata, RademacherEntries) {
  const Sample s = sample_dataset({DesignFamily::rademacher_cube, 5}, {Vector::Zero(5), {}}, 200, 4);
  EXPECT_TRUE((s.design.array().abs() == 1.0).all());
}

TEST(Synthdata, Isotropy) {
  const int n = 16, big_n = 10000;
  for (auto fam : {DesignFamily::gaussian_isotropic, DesignFamily::rademacher_cube,
                   DesignFamily::student_t_isotropic}) {
    const Sample s = sample_dataset({fam, n, 9.0}, {Vector::Zero(n), {}}, big_n, 5);
    const Matrix cov = s.design.transpose() * s.design / big_n;
    EXPECT_LE((cov - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 3 * std::sqrt(double(n) / big_n))
        << to_string(fam);
  }
}

TEST(Synthdata, Reproducible) {
  const DesignKind d{DesignFamily::student_t_isotropic, 4, 5.0};
  const TargetSpec t{Vector::Ones(4), NoiseKind::symmetrized_pareto(3.0, 1.0)};
  const Sample a = sample_dataset(d, t, 100, 42), b = sample_dataset(d, t, 100, 42);
  std::ostringstream oa, ob;
  write_dataset_csv(oa, a);
  write_dataset_csv(ob, b);
  EXPECT_EQ(oa.str(), ob.str());
  EXPECT_EQ(oa.str().substr(0, 16), "x_1,x_2,x_3,x_4,");
  EXPECT_NE(sample_dataset(d, t, 100, 43).responses, a.responses);
}

TEST(Synthdata, DependentSignStub) {
  Vector t0 = Vector::Ones(3);
  TargetSpec t{t0, NoiseKind::gaussian(1.0), true};
  const Sample s = sample_dataset({DesignFamily::gaussian_isotropic, 3}, t, 500, 9);
  const Vector xi = s.design * t0 - s.responses;
  const Vector signal = s.design * t0;
  for (Eigen::Index i = 0; i < xi.size(); ++i) EXPECT_GE(xi[i] * signal[i], 0.0);
}

TEST(Synthdata, StringRoundTrip) {
  for (auto f : {NoiseFamily::none, NoiseFamily::gaussian, NoiseFamily::student_t,
                 NoiseFamily::symmetrized_pareto})
    EXPECT_EQ(noise_family_from_string(to_string(f)), f);
  EXPECT_EQ(noise_family_from_string("pareto"), NoiseFamily::symmetrized_pareto);
  EXPECT_EQ(design_family_from_string("rademacher_cube"), DesignFamily::rademacher_cube);
}
