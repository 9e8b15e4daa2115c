#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "calerm/erm.hpp"
#include "calerm/synthdata.hpp"
#include "oracles.hpp"

using namespace calerm;

namespace {

Sample make_sample(int n, int big_n, const NoiseKind& noise, std::uint64_t seed, Vector* t0_out = nullptr) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector t0(n);
  for (auto& v : t0) v = normal(rng) / std::sqrt(static_cast<double>(n));
  if (t0_out) *t0_out = t0;
  return sample_dataset({DesignFamily::gaussian_isotropic, n}, {t0, noise}, big_n, seed + 1);
}

}  // namespace

TEST(Erm, EmpiricalRiskExamples) {
  const Sample one(Matrix::Ones(1, 1), Vector::Constant(1, -3.0));
  EXPECT_DOUBLE_EQ(empirical_risk(LossSpec::squared(), Vector::Zero(1), one), 9.0);
  Matrix x(2, 1);
  x << 1.0, 1.0;
  Vector y(2);
  y << -0.5, -2.0;
  const Sample two(x, y);
  EXPECT_DOUBLE_EQ(empirical_risk(LossSpec::huber(1.0), Vector::Zero(1), two), 0.8125);
  Vector t0;
  const Sample s = make_sample(3, 10, NoiseKind::none(), 4, &t0);
  EXPECT_NEAR(empirical_risk(LossSpec::logistic(), t0, s), 0.0, 1e-30);
  EXPECT_THROW(empirical_risk(LossSpec::squared(), Vector::Zero(2), s), ArgumentError);
}

TEST(Erm, NoiseFreeRecovery) {
  for (const auto& spec : {LossSpec::squared(), LossSpec::huber(0.5), LossSpec::logistic()}) {
    Vector t0;
    const Sample s = make_sample(10, 60, NoiseKind::none(), 5, &t0);
    const FitResult r = fit(spec, ConstraintSet::full_space(10), s);
    EXPECT_LE((r.t_hat - t0).norm(), 1e-6) << to_string(spec.kind);
    EXPECT_TRUE(r.converged);
  }
}

TEST(Erm, ZeroResponsesGiveOrigin) {
  const Sample s(Matrix::Random(20, 4), Vector::Zero(20));
  for (const auto& spec : {LossSpec::squared(), LossSpec::huber(1.0), LossSpec::logistic()}) {
    const FitResult r = fit(spec, ConstraintSet::l1_ball(4, 1.0), s);
    EXPECT_EQ(r.t_hat, Vector::Zero(4));
    EXPECT_EQ(r.objective, 0.0);
  }
}

TEST(Erm, L1ConstraintBindsOnTheSphere) {
  Matrix x(4, 2);
  x << 1, 0, 0, 1, 1, 1, 1, -1;
  Vector y(4);
  y << 3, 2, 5, 1;  // unconstrained optimum (3, 2)
  const Sample s(x, y);
  const ConstraintSet set = ConstraintSet::l1_ball(2, 0.5);
  const FitResult r = fit(LossSpec::squared(), set, s);
  EXPECT_NEAR(r.t_hat.lpNorm<1>(), 0.5, 1e-8);
  // Brute-force grid over the l1 sphere of radius 0.5.
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 400000; ++k) {
    const double a = -0.5 + k * 2.5e-6;
    if (a > 0.5) break;
    for (double sign : {1.0, -1.0}) {
      Vector t(2);
      t << a, sign * (0.5 - std::abs(a));
      best = std::min(best, empirical_risk(LossSpec::squared(), t, s));
    }
  }
  EXPECT_LE(r.objective, best + 1e-8);
}

TEST(Erm, CertificateAndFeasibility) {
  std::mt19937_64 rng(6);
  const NoiseKind noise = noise_with_l2(NoiseFamily::student_t, 1.0, 3.0);
  for (int inst = 0; inst < 12; ++inst) {
    const int n = 4 + inst;
    Vector t0;
    const Sample s = make_sample(n, 10 * n, noise, 100 + inst, &t0);
    const ConstraintSet set = inst % 3 == 0   ? ConstraintSet::l1_ball(n, 1.0)
                              : inst % 3 == 1 ? ConstraintSet::l2_ball(n, 0.8)
                                              : ConstraintSet::l1_l2(n, 1.0, 0.6);
    for (const auto& spec : {LossSpec::squared(), LossSpec::huber(0.7), LossSpec::logistic()}) {
      const FitResult r = fit(spec, set, s);
      EXPECT_TRUE(contains(set, r.t_hat, 1e-10));
      EXPECT_NEAR(r.objective, empirical_risk(spec, r.t_hat, s), 1e-12 * (1.0 + r.objective));
      std::vector<Vector> refs{project(set, t0), Vector::Zero(n)};
      for (int k = 0; k < 100; ++k) refs.push_back(oracle::random_feasible(set, rng));
      for (const auto& ref : refs) EXPECT_LE(r.objective, empirical_risk(spec, ref, s) + 1e-8);
    }
  }
}

TEST(Erm, FixedAndBacktrackingAgree) {
  const NoiseKind noise = NoiseKind::gaussian(0.5);
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 3 + inst % 6;
    const Sample s = make_sample(n, 40 * n, noise, 200 + inst);
    const ConstraintSet set = inst % 2 ? ConstraintSet::l1_ball(n, 0.7) : ConstraintSet::l1_l2(n, 2.0, 0.5);
    const LossSpec spec = inst % 3 == 0 ? LossSpec::squared()
                          : inst % 3 == 1 ? LossSpec::huber(0.4)
                                          : LossSpec::logistic();
    SolverOptions fixed;
    fixed.step_rule = StepRule::fixed_inverse_smoothness;
    fixed.max_iters = 20000;
    fixed.tol = 1e-13;
    SolverOptions bt = fixed;
    bt.step_rule = StepRule::backtracking;
    const double a = fit(spec, set, s, fixed).objective;
    const double b = fit(spec, set, s, bt).objective;
    EXPECT_NEAR(a, b, 1e-7 * std::max(a, b)) << inst;
  }
}

TEST(Erm, LeastSquaresFastPathMatchesNormalEquations) {
  Vector t0;
  const Sample s = make_sample(12, 80, NoiseKind::gaussian(1.0), 7, &t0);
  const Vector ls = (s.design.transpose() * s.design).ldlt().solve(s.design.transpose() * s.responses);
  const FitResult r = fit(LossSpec::squared(), ConstraintSet::full_space(12), s);
  EXPECT_LE((r.t_hat - ls).norm(), 1e-8);
  SolverOptions slow;
  slow.least_squares_fast_path = false;
  slow.max_iters = 50000;
  slow.tol = 1e-15;
  EXPECT_LE((fit(LossSpec::squared(), ConstraintSet::full_space(12), s, slow).t_hat - ls).norm(), 1e-6);
}

TEST(Erm, InfeasibleStartRejected) {
  const Sample s(Matrix::Random(5, 2), Vector::Zero(5));
  EXPECT_THROW(fit(LossSpec::squared(), ConstraintSet::l1_ball(2, 1.0), s, {}, Vector::Constant(2, 1.0)),
               ArgumentError);
  SolverOptions bad;
  bad.tol = 0.0;
  EXPECT_THROW(fit(LossSpec::squared(), ConstraintSet::l1_ball(2, 1.0), s, bad), ArgumentError);
}

TEST(Erm, StepRuleStrings) {
  EXPECT_EQ(step_rule_from_string("backtracking"), StepRule::backtracking);
  EXPECT_EQ(step_rule_from_string(to_string(StepRule::fixed_inverse_smoothness)),
            StepRule::fixed_inverse_smoothness);
  EXPECT_THROW(step_rule_from_string("newton"), ArgumentError);
}
