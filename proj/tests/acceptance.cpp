// Acceptance suite: one PASS/FAIL line per criterion. Tolerances below are
// fixed; the process exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "calerm/calerm.hpp"
#include "oracles.hpp"

using namespace calerm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const std::vector<LossSpec> kLosses{LossSpec::squared(), LossSpec::huber(1.0), LossSpec::logistic()};

// ------------------------------------------------------------------ 1, 2 --

Outcome decomposition_additivity() {
  constexpr int kDraws = 100000;
  constexpr double kRelTol = 1e-10;
  std::mt19937_64 rng(101);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  double worst = 0.0;
  for (const auto& spec : kLosses)
    for (int i = 0; i < kDraws; ++i) {
      const double xi = normal(rng) * std::pow(10.0, log_scale(rng));
      const double h = normal(rng) * std::pow(10.0, log_scale(rng));
      const PointTerms p = decompose_point(spec, xi, h);
      const double scale = std::max({std::abs(p.excess), std::abs(p.multiplier), std::abs(p.quadratic)});
      if (scale > 0.0) worst = std::max(worst, std::abs(p.excess - p.multiplier - p.quadratic) / scale);
    }
  return {worst <= kRelTol, "max relative residual " + fmt("%.3g", worst) + " over 3 x 1e5 draws"};
}

Outcome quadratic_nonnegativity_and_scaling() {
  constexpr int kDraws = 10000;
  std::mt19937_64 rng(102);
  std::normal_distribution<double> normal(0.0, 2.0);
  double min_q = INFINITY, worst_scaling = INFINITY;
  for (const auto& spec : kLosses)
    for (int i = 0; i < kDraws; ++i) {
      const double xi = normal(rng), h = normal(rng);
      const double q = decompose_point(spec, xi, h).quadratic;
      min_q = std::min(min_q, q);
      for (double lambda : {1.5, 2.0, 3.7}) {
        const double ql = decompose_point(spec, xi, lambda * h).quadratic;
        worst_scaling = std::min(worst_scaling, ql - std::floor(lambda) * q);
      }
    }
  const bool pass = min_q >= -1e-12 && worst_scaling >= -1e-10;
  return {pass, "min Q " + fmt("%.3g", min_q) + ", min Q(lh) - floor(l) Q(h) " + fmt("%.3g", worst_scaling)};
}

// --------------------------------------------------------------------- 3 --

ConstraintSet random_set(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.2, 3.0);
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return ConstraintSet::l2_ball(n, u(rng));
    case 1: return ConstraintSet::l1_ball(n, u(rng));
    default: return ConstraintSet::l1_l2(n, u(rng), u(rng));
  }
}

Vector gaussian_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

Outcome geometry_oracles() {
  std::mt19937_64 rng(103);
  double proj_err = 0.0, search_gap = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + i % 8;
    const double alpha = std::uniform_real_distribution<double>(0.2, 3.0)(rng);
    const Vector p = gaussian_vector(rng, n, 2.0);
    const Vector q = project(ConstraintSet::l1_ball(n, alpha), p);
    proj_err = std::max(proj_err, (q - oracle::project_l1_bisect(p, alpha)).norm());
    // Brute-force search: no feasible point may be closer than the projection.
    const ConstraintSet set = ConstraintSet::l1_ball(n, alpha);
    const double dist = (q - p).norm();
    for (int k = 0; k < 5000; ++k)
      search_gap = std::max(search_gap, dist - (oracle::random_feasible(set, rng) - p).norm());
  }
  double support_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = 2 + i % 15;
    const ConstraintSet set = random_set(rng, n);
    const Vector w = gaussian_vector(rng, n);
    const double s = support_value(set, w);
    support_err = std::max(support_err, std::abs(oracle::support_pga(set, w, rng, 3) - s) / s);
  }
  const bool pass = proj_err <= 1e-8 && search_gap <= 1e-8 && support_err <= 1e-6;
  return {pass, "projection error " + fmt("%.3g", proj_err) + ", search gap " + fmt("%.3g", search_gap) +
                    ", support rel error " + fmt("%.3g", support_err)};
}

// --------------------------------------------------------------------- 4 --

Outcome gaussian_width_calibration() {
  constexpr int n = 16;
  constexpr double r = 1.5;
  const WidthEstimate w = gaussian_width(ConstraintSet::l2_ball(n, r), r, 10000, 104);
  const double exact = r * oracle::chi_mean(n);
  const double z = std::abs(w.value - exact) / w.std_error;

  std::vector<double> ratios;
  const double loc = 0.5;
  for (int dim : {64, 256, 1024}) {
    const WidthEstimate l1 = gaussian_width(ConstraintSet::l1_ball(dim, 1.0), loc, 2000, 105);
    ratios.push_back(l1.value / std::sqrt(std::log(std::exp(1.0) * dim * loc * loc)));
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  const double band = *hi / *lo;
  return {z <= 3.0 && band <= 2.0, "ball width " + fmt("%.5f", w.value) + " vs " + fmt("%.5f", exact) + " (" +
                                       fmt("%.2f", z) + " SE); l1 ratio band " + fmt("%.3f", band)};
}

// --------------------------------------------------------------------- 5 --

FixedPointProblem fp_problem(FixedPointKind kind, const ConstraintSet& set, int big_n, double zeta, int budget,
                             std::uint64_t seed) {
  FixedPointProblem p;
  p.kind = kind;
  p.set = set;
  p.sample_size = big_n;
  p.zeta = zeta;
  p.mc_budget = budget;
  p.seed = seed;
  p.design = {DesignFamily::gaussian_isotropic, set.dim};
  return p;
}

Outcome fixed_point_sanity() {
  const int n = 16;
  const FixedPointResult r1 =
      solve_fixed_point(fp_problem(FixedPointKind::r1Q, ConstraintSet::full_space(n), 4 * n, 1.0, 1000, 106));

  bool monotone = true;
  const ConstraintSet l1 = ConstraintSet::l1_ball(64, 1.0);
  for (auto kind : {FixedPointKind::r1Q, FixedPointKind::r2Q, FixedPointKind::rM_prime, FixedPointKind::kbarN}) {
    FixedPointProblem p = fp_problem(kind, l1, 100, kind == FixedPointKind::r1Q ? 0.5 : 1.0, 1000, 107);
    p.loss = LossSpec::huber(1.0);
    p.noise = NoiseKind::gaussian(1.0);
    p.kappa = 0.5;
    const FixedPointResult res = solve_fixed_point(p);
    monotone = monotone && !res.capped && trace_is_monotone(res, p.sample_size, 3.0);
  }

  FixedPointProblem p = fp_problem(FixedPointKind::r2Q, l1, 100, 1.0, 1000, 108);
  const FixedPointResult r2 = solve_fixed_point(p);
  p.kind = FixedPointKind::kbarN;
  p.lipschitz = 1.0;
  const FixedPointResult kb = solve_fixed_point(p);
  const double rel = std::abs(kb.r - r2.r) / r2.r;
  const bool pass = r1.r == 0.0 && !r1.capped && monotone && r2.r > 0.0 && rel <= p.rel_tol;
  return {pass, "r1Q(full, N=4n) " + fmt("%.3g", r1.r) + ", traces monotone " + (monotone ? "yes" : "no") +
                    ", |kbarN - r2Q| / r2Q " + fmt("%.3g", rel)};
}

// --------------------------------------------------------------------- 6 --

struct Law {
  const char* name;
  double l4_over_l2;
  std::function<double(Rng&)> draw;
};

Outcome smallball_checks() {
  Rng rng(109);
  std::vector<double> g(100000);
  for (auto& v : g) v = std::normal_distribution<double>()(rng);
  const double at_half = smallball_curve(g, std::vector<double>{0.5}).front();

  const std::vector<Law> laws{
      {"gaussian", std::pow(3.0, 0.25), [](Rng& r) { return std::normal_distribution<double>()(r); }},
      {"rademacher", 1.0, [](Rng& r) { return std::bernoulli_distribution(0.5)(r) ? 1.0 : -1.0; }},
      {"student_t5", std::pow(9.0, 0.25), [](Rng& r) { return sample_noise(NoiseKind::student_t(5.0, 1.0), r); }},
      {"uniform", std::pow(1.8, 0.25), [](Rng& r) { return std::uniform_real_distribution<double>(-1.0, 1.0)(r); }},
  };
  int certified = 0;
  std::uint64_t seed = 110;
  for (const auto& law : laws) {
    const SmallBallParams c = paley_zygmund_certificate(law.l4_over_l2, 0.25);
    Rng lr(seed++);
    std::vector<double> d(100000);
    for (auto& v : d) v = law.draw(lr);
    certified += smallball_curve(d, std::vector<double>{c.kappa0}).front() >= c.eps;
  }

  const int n = 8;
  const SmallBallParams design_cert = paley_zygmund_certificate(std::pow(3.0, 0.25), 0.25);
  int passed = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Sample s = sample_dataset({DesignFamily::gaussian_isotropic, n}, {Vector::Zero(n), {}, false}, 50 * n,
                                    derive_seed(111, trial));
    passed += empirical_smallball_check(s, ConstraintSet::full_space(n), 1.0, design_cert, 200,
                                        derive_seed(112, trial))
                  .pass;
  }
  const bool pass = std::abs(at_half - 0.617) <= 0.02 && certified == 4 && passed >= 990;
  return {pass, "Pr(|g| >= 0.5) " + fmt("%.4f", at_half) + ", certificates " + std::to_string(certified) +
                    "/4, empirical check " + std::to_string(passed) + "/1000"};
}

// --------------------------------------------------------------------- 7 --

Outcome order_statistics() {
  const double l4 = std::pow(3.0, 0.25);
  int failures = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    Rng rng(derive_seed(113, rep));
    std::normal_distribution<double> normal;
    std::vector<double> d(1000);
    for (auto& v : d) v = normal(rng);
    failures += !order_statistics_check(d, 2.0, 4.0, 2.0, l4);
  }
  return {failures <= 20, std::to_string(failures) + " failures in 1e4 reps (limit 20)"};
}

// ------------------------------------------------------------------ 8-11 --

ExperimentConfig rate_config() {
  ExperimentConfig cfg;
  cfg.experiment_id = "acceptance_rate";
  cfg.kind = ExperimentKind::rate_fit;
  cfg.design = {DesignFamily::gaussian_isotropic, 32, 5.0};
  cfg.set = ConstraintSet::full_space(32);
  cfg.target.kind = TargetRuleKind::first_k;
  cfg.target.k = 4;
  cfg.noise = {NoiseFamily::student_t, 1.0, 5.0, 3.0};
  cfg.losses = {LossChoice::auto_huber(1.0, CalibrationMode::oracle)};
  cfg.complexity.zeta1 = 1.0;
  cfg.complexity.zeta2 = 1.0;
  cfg.sweep = Sweep{SweepParameter::N, {128, 256, 512, 1024, 2048, 4096}};
  cfg.trials = 200;
  cfg.holdout = 0;
  cfg.master_seed = 8;
  return cfg;
}

Outcome rate_scaling(unsigned threads) {
  const RateFitResult r = rate_fit(rate_config(), threads);
  const RateFit& f = r.fits.front();
  const bool pass = !f.degenerate && f.slope >= -0.6 && f.slope <= -0.4;
  return {pass, "slope " + fmt("%.4f", f.slope) + " (r2 " + fmt("%.4f", f.r2) + ")"};
}

Outcome two_regime_shape(unsigned threads) {
  ExperimentConfig cfg;
  cfg.experiment_id = "acceptance_regime";
  cfg.kind = ExperimentKind::regime_sweep;
  cfg.design = {DesignFamily::gaussian_isotropic, 64, 5.0};
  cfg.set = ConstraintSet::l1_ball(64, 4.0);
  cfg.target.kind = TargetRuleKind::l1_fraction;
  cfg.target.k = 4;
  cfg.target.fraction = 0.5;
  cfg.noise = {NoiseFamily::gaussian, 0.0, 5.0, 3.0};
  cfg.losses = {LossChoice::of(LossSpec::squared())};
  cfg.sweep = Sweep{SweepParameter::sigma, {0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0}};
  cfg.N = 256;
  cfg.trials = 100;
  cfg.holdout = 0;
  cfg.master_seed = 99;
  cfg.complexity.zeta1 = 1.0;
  cfg.complexity.zeta2 = 1.0;
  const RQEstimate rq = estimate_r_q(cfg.complexity, expand_cells(cfg).front(), cfg.master_seed, threads);
  const ExperimentResult res = regime_sweep(cfg, threads);
  const auto med = medians_for(res, "squared");
  const RegimeShape shape = check_regime_shape(cfg.sweep->values, med, 1);
  std::ostringstream os;
  os << "r_Q " << fmt("%.3g", rq.value) << ", medians";
  for (double m : med) os << ' ' << fmt("%.3g", m);
  os << "; flat " << (shape.flat_ok ? "ok" : "violated") << " (ratio " << fmt("%.3g", shape.ratio) << "), rising "
     << (shape.rising_ok ? "ok" : "violated");
  return {rq.value > 0.0 && shape.flat_ok && shape.rising_ok, os.str()};
}

ExperimentConfig comparison_config(NoiseFamily family) {
  ExperimentConfig cfg;
  cfg.experiment_id = "acceptance_comparison";
  cfg.kind = ExperimentKind::loss_comparison;
  cfg.design = {DesignFamily::gaussian_isotropic, 8, 5.0};
  cfg.set = ConstraintSet::full_space(8);
  cfg.target.kind = TargetRuleKind::first_k;
  cfg.target.k = 2;
  cfg.noise = {family, 1.0, 5.0, 2.5};
  cfg.losses = {LossChoice::of(LossSpec::squared()), LossChoice::auto_huber(1.0, CalibrationMode::oracle)};
  cfg.complexity.zeta1 = 1.0;
  cfg.complexity.zeta2 = 1.0;
  cfg.N = 64;
  cfg.trials = 10000;
  cfg.holdout = 0;
  cfg.margin = 1.5;
  cfg.master_seed = 31;
  return cfg;
}

Outcome outlier_robustness(unsigned threads) {
  const LossComparison heavy = loss_comparison(comparison_config(NoiseFamily::symmetrized_pareto), threads);
  const LossComparison light = loss_comparison(comparison_config(NoiseFamily::gaussian), threads);
  const double ratio = heavy.q99_ratio.front();
  const double diff = light.median_rel_diff.front();
  return {ratio >= 1.5 && diff <= 0.2, "pareto(2.5) q99 ratio " + fmt("%.4f", ratio) +
                                           " (margin 1.5), gaussian median rel diff " + fmt("%.4f", diff)};
}

std::string experiment_bytes(const ExperimentConfig& cfg, unsigned threads) {
  const ExperimentResult res = run_experiment(cfg, threads);
  std::ostringstream os;
  write_results_csv(os, res);
  write_summary_csv(os, res);
  return os.str();
}

Outcome determinism() {
  ExperimentConfig cfg = comparison_config(NoiseFamily::student_t);
  cfg.kind = ExperimentKind::trials;
  cfg.trials = 50;
  cfg.holdout = 2000;
  cfg.complexity.zeta1.reset();
  cfg.complexity.zeta2.reset();
  cfg.sweep = Sweep{SweepParameter::sigma, {0.0, 0.5, 1.0}};
  cfg.losses.push_back(LossChoice::auto_huber(1.0, CalibrationMode::plugin));
  cfg.losses.push_back(LossChoice::of(LossSpec::logistic()));
  const std::string one = experiment_bytes(cfg, 1);
  bool same = true;
  for (unsigned t : {2u, 3u, 8u}) same = same && experiment_bytes(cfg, t) == one;

  std::vector<Cell> cells;
  auto complexity_bytes = [&](unsigned t) {
    ExperimentConfig c = cfg;
    c.losses = {LossChoice::of(LossSpec::huber(1.0))};
    c.complexity.mc_budget = 300;
    std::ostringstream os;
    const auto rows = compute_complexity(c, t, &cells);
    write_complexity_csv(os, c, cells, rows);
    return os.str();
  };
  const bool same_cx = complexity_bytes(1) == complexity_bytes(4);
  return {same && same_cx, std::string("results/summary CSV ") + (same ? "identical" : "differ") +
                               " across 1/2/3/8 threads, complexity CSV " + (same_cx ? "identical" : "differs") +
                               " across 1/4 threads (" + std::to_string(one.size()) + " bytes)"};
}

}  // namespace

int main() {
  const unsigned threads = default_thread_count();
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "decomposition additivity", 5, decomposition_additivity},
      {2, "quadratic nonnegativity and scaling", 5, quadratic_nonnegativity_and_scaling},
      {3, "geometry oracles", 60, geometry_oracles},
      {4, "gaussian width calibration", 60, gaussian_width_calibration},
      {5, "fixed-point sanity", 120, fixed_point_sanity},
      {6, "small-ball", 120, smallball_checks},
      {7, "order statistics", 60, order_statistics},
      {8, "rate scaling", 600, [&] { return rate_scaling(threads); }},
      {9, "two-regime shape", 600, [&] { return two_regime_shape(threads); }},
      {10, "outlier robustness", 600, [&] { return outlier_robustness(threads); }},
      {11, "determinism", 120, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %d (%s): %s [%.2fs, budget %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
