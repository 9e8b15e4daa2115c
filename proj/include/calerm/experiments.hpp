#ifndef CALERM_EXPERIMENTS_HPP
#define CALERM_EXPERIMENTS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calerm/complexity.hpp"
#include "calerm/decomposition.hpp"
#include "calerm/erm.hpp"
#include "calerm/error.hpp"
#include "calerm/geometry.hpp"
#include "calerm/losses.hpp"
#include "calerm/parallel.hpp"
#include "calerm/smallball.hpp"
#include "calerm/synthdata.hpp"

namespace calerm {

enum class CalibrationMode { oracle, plugin };

inline std::string_view to_string(CalibrationMode m) {
  return m == CalibrationMode::plugin ? "plugin" : "oracle";
}

inline CalibrationMode calibration_mode_from_string(std::string_view s) {
  if (s == "oracle") return CalibrationMode::oracle;
  if (s == "plugin") return CalibrationMode::plugin;
  throw ArgumentError("unknown calibration mode '" + std::string(s) + "'");
}

/// A fixed loss, or Huber with gamma chosen per trial from the noise level
/// and r_Q.
struct LossChoice {
  bool huber_auto = false;
  LossSpec fixed;
  double c0 = 1.0;
  CalibrationMode mode = CalibrationMode::oracle;

  static LossChoice of(LossSpec spec) { return {false, spec, 1.0, CalibrationMode::oracle}; }
  static LossChoice auto_huber(double c0, CalibrationMode mode) { return {true, {}, c0, mode}; }

  std::string label() const {
    if (!huber_auto) return std::string(to_string(fixed.kind));
    return "huber_auto_" + std::string(to_string(mode));
  }

  bool operator==(const LossChoice& o) const {
    if (huber_auto != o.huber_auto) return false;
    return huber_auto ? (c0 == o.c0 && mode == o.mode) : fixed == o.fixed;
  }
};

/// How the true parameter t0 is built for a given dimension.
enum class TargetRuleKind { explicit_values, first_k, l1_fraction };

inline std::string_view to_string(TargetRuleKind k) {
  switch (k) {
    case TargetRuleKind::explicit_values: return "explicit";
    case TargetRuleKind::first_k: return "first_k";
    case TargetRuleKind::l1_fraction: return "l1_fraction";
  }
  return "unknown";
}

struct TargetRule {
  TargetRuleKind kind = TargetRuleKind::first_k;
  std::vector<double> values;  // explicit
  int k = 1;                   // first_k, l1_fraction: support size
  double value = 1.0;          // first_k: coordinate value
  double fraction = 0.5;       // l1_fraction: ||t0||_1 = fraction * alpha

  bool operator==(const TargetRule&) const = default;
};

/// t0 in R^n for the rule; l1_fraction spreads fraction*alpha evenly over
/// the first k coordinates.
inline Vector materialize_target(const TargetRule& rule, int n, const ConstraintSet& set) {
  Vector t0 = Vector::Zero(n);
  switch (rule.kind) {
    case TargetRuleKind::explicit_values:
      if (static_cast<int>(rule.values.size()) != n)
        throw ArgumentError("explicit t0 has " + std::to_string(rule.values.size()) +
                            " entries but the dimension is " + std::to_string(n));
      for (int j = 0; j < n; ++j) t0[j] = rule.values[j];
      break;
    case TargetRuleKind::first_k:
      for (int j = 0; j < std::min(rule.k, n); ++j) t0[j] = rule.value;
      break;
    case TargetRuleKind::l1_fraction: {
      if (!set.has_l1()) throw ArgumentError("l1_fraction target needs a set with an l1 radius");
      const int k = std::min(rule.k, n);
      for (int j = 0; j < k; ++j) t0[j] = rule.fraction * set.alpha / k;
      break;
    }
  }
  return t0;
}

/// Noise family plus its L2 level `sigma`; the law's scale is derived.
struct NoiseSetting {
  NoiseFamily family = NoiseFamily::gaussian;
  double sigma = 1.0;
  double df = 5.0;
  double tail_index = 3.0;

  NoiseKind kind() const {
    if (family == NoiseFamily::none || sigma == 0.0) return NoiseKind::none();
    return noise_with_l2(family, sigma, df, tail_index);
  }

  bool operator==(const NoiseSetting&) const = default;
};

enum class SweepParameter { sigma, N, n };

inline std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::sigma: return "sigma";
    case SweepParameter::N: return "N";
    case SweepParameter::n: return "n";
  }
  return "unknown";
}

inline SweepParameter sweep_parameter_from_string(std::string_view s) {
  if (s == "sigma") return SweepParameter::sigma;
  if (s == "N") return SweepParameter::N;
  if (s == "n") return SweepParameter::n;
  throw ArgumentError("unknown sweep parameter '" + std::string(s) + "'");
}

struct Sweep {
  SweepParameter parameter = SweepParameter::sigma;
  std::vector<double> values;

  bool operator==(const Sweep&) const = default;
};

enum class ExperimentKind { trials, regime_sweep, loss_comparison, rate_fit, persistence };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::trials: return "trials";
    case ExperimentKind::regime_sweep: return "regime_sweep";
    case ExperimentKind::loss_comparison: return "loss_comparison";
    case ExperimentKind::rate_fit: return "rate_fit";
    case ExperimentKind::persistence: return "persistence";
  }
  return "unknown";
}

inline ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (auto k : {ExperimentKind::trials, ExperimentKind::regime_sweep,
                 ExperimentKind::loss_comparison, ExperimentKind::rate_fit,
                 ExperimentKind::persistence})
    if (to_string(k) == s) return k;
  throw ArgumentError("unknown experiment kind '" + std::string(s) + "'");
}

/// Constants and budgets of the complexity estimates. Unset constants take
/// their defaults from the design's Paley-Zygmund certificate.
struct ComplexitySettings {
  std::optional<double> zeta1;
  std::optional<double> zeta2;
  std::optional<double> kappa;  // rM_prime and r0; default theta / 16
  std::optional<double> theta;
  std::optional<double> t2;     // upper end of the rho interval
  std::optional<double> r_q;    // skip estimation and use this r_Q
  double delta = 0.1;
  int mc_budget = 2000;         // rM_prime replicates
  int width_reps = 200;         // r1Q, r2Q, kbarN replicates
  double cap = 1e3;
  double rel_tol = 1e-3;
  double pz_theta = 0.25;
  R0Mode r0_mode = R0Mode::independent_isotropic;
  int lprime_draws = 100000;

  bool operator==(const ComplexitySettings&) const = default;
};

struct SmallBallSettings {
  std::string source = "design";  // "design" or "noise"
  int draws = 100000;
  std::vector<double> kappa_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0};
  double theta = 0.25;
  double kappa1 = 0.1;
  int num_directions = 200;
  double r = 1.0;

  bool operator==(const SmallBallSettings&) const = default;
};

/// alpha as a function of n for the persistence hierarchy: scale * n^exponent.
struct AlphaRule {
  double scale = 1.0;
  double exponent = 0.0;

  double at(int n) const { return scale * std::pow(static_cast<double>(n), exponent); }
  bool operator==(const AlphaRule&) const = default;
};

struct ExperimentConfig {
  std::string experiment_id = "experiment";
  ExperimentKind kind = ExperimentKind::trials;
  DesignKind design;
  TargetRule target;
  NoiseSetting noise;
  bool dependent_sign = false;
  ConstraintSet set;
  std::vector<LossChoice> losses{LossChoice::of(LossSpec::squared())};
  SolverOptions solver;
  int N = 100;
  int trials = 1;
  std::uint64_t master_seed = 0;
  std::optional<Sweep> sweep;
  int holdout = 100000;
  bool record_runtime = false;
  double margin = 1.5;
  ComplexitySettings complexity;
  SmallBallSettings smallball;
  std::optional<AlphaRule> alpha_rule;
  RateConstants rate_constants;

  void validate() const;
  bool operator==(const ExperimentConfig& o) const;
};

inline bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return experiment_id == o.experiment_id && kind == o.kind && design == o.design &&
         target == o.target && noise == o.noise && dependent_sign == o.dependent_sign &&
         set == o.set && losses == o.losses && solver == o.solver && N == o.N &&
         trials == o.trials && master_seed == o.master_seed && sweep == o.sweep &&
         holdout == o.holdout && record_runtime == o.record_runtime && margin == o.margin &&
         complexity == o.complexity && smallball == o.smallball && alpha_rule == o.alpha_rule &&
         rate_constants == o.rate_constants;
}

/// Validation errors name the offending key.
inline void ExperimentConfig::validate() const {
  auto fail = [](const char* key, const std::string& what) { throw ConfigError(key, what); };
  if (trials < 1) fail("trials", "must be >= 1");
  if (N < 1) fail("N", "must be >= 1");
  if (holdout < 0) fail("holdout", "must be >= 0");
  if (!(margin > 0.0)) fail("margin", "must be positive");
  if (losses.empty()) fail("losses", "at least one loss is required");
  for (std::size_t i = 0; i < losses.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (losses[i].label() == losses[j].label()) fail("losses", "duplicate loss " + losses[i].label());
  for (const auto& l : losses) {
    if (l.huber_auto && !(l.c0 > 0.0)) fail("loss.huber_auto.c0", "must be positive");
    if (!l.huber_auto && l.fixed.kind == LossKind::huber && !(l.fixed.gamma > 0.0))
      fail("loss.gamma", "must be positive");
  }
  try {
    design.validate();
  } catch (const Error& e) {
    fail("design", e.what());
  }
  try {
    set.validate();
  } catch (const Error& e) {
    fail("set", e.what());
  }
  if (set.dim != design.dim) fail("set.dim", "must equal design.dim");
  if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) fail("noise.sigma", "must be >= 0");
  if (noise.family == NoiseFamily::student_t && !(noise.df > 2.0))
    fail("noise.df", "must exceed 2 (finite variance)");
  if (noise.family == NoiseFamily::symmetrized_pareto && !(noise.tail_index > 2.0))
    fail("noise.tail_index", "must exceed 2 (finite variance)");
  try {
    solver.validate();
  } catch (const Error& e) {
    fail("solver", e.what());
  }
  if (target.kind == TargetRuleKind::explicit_values &&
      static_cast<int>(target.values.size()) != design.dim && !(sweep && sweep->parameter == SweepParameter::n))
    fail("target.t0", "explicit t0 length must equal design.dim");
  if (target.kind == TargetRuleKind::explicit_values && sweep && sweep->parameter == SweepParameter::n)
    fail("target.t0", "an explicit t0 cannot follow an n sweep; use a rule");
  if (target.kind != TargetRuleKind::explicit_values && target.k < 1) fail("target.k", "must be >= 1");
  if (target.kind == TargetRuleKind::l1_fraction && !set.has_l1())
    fail("target.rule", "l1_fraction needs a set with an l1 radius");
  if (sweep) {
    if (sweep->values.empty()) fail("sweep.values", "must be non-empty");
    for (std::size_t i = 1; i < sweep->values.size(); ++i)
      if (!(sweep->values[i] > sweep->values[i - 1])) fail("sweep.values", "must be strictly increasing");
    for (double v : sweep->values) {
      if (!std::isfinite(v)) fail("sweep.values", "must be finite");
      if (sweep->parameter == SweepParameter::sigma && v < 0.0) fail("sweep.values", "sigma must be >= 0");
      if (sweep->parameter != SweepParameter::sigma && (v < 1.0 || v != std::floor(v)))
        fail("sweep.values", "N and n values must be positive integers");
    }
  }
  if (alpha_rule && !set.has_l1()) fail("alpha_rule", "needs a set with an l1 radius");
  if (alpha_rule && !(alpha_rule->scale > 0.0)) fail("alpha_rule.scale", "must be positive");
  const auto& c = complexity;
  for (auto [key, v] : {std::pair{"complexity.zeta1", c.zeta1}, {"complexity.zeta2", c.zeta2},
                        {"complexity.kappa", c.kappa}, {"complexity.theta", c.theta},
                        {"complexity.t2", c.t2}})
    if (v && !(*v > 0.0)) fail(key, "must be positive");
  if (c.r_q && !(*c.r_q >= 0.0)) fail("complexity.r_q", "must be >= 0");
  if (!(c.delta > 0.0 && c.delta < 1.0)) fail("complexity.delta", "must lie in (0, 1)");
  if (c.mc_budget < 100) fail("complexity.mc_budget", "must be >= 100");
  if (c.width_reps < 2) fail("complexity.width_reps", "must be >= 2");
  if (!(c.cap > 0.0)) fail("complexity.cap", "must be positive");
  if (!(c.rel_tol > 0.0 && c.rel_tol < 1.0)) fail("complexity.rel_tol", "must lie in (0, 1)");
  if (!(c.pz_theta > 0.0 && c.pz_theta < 1.0)) fail("complexity.pz_theta", "must lie in (0, 1)");
  if (c.lprime_draws < 1) fail("complexity.lprime_draws", "must be >= 1");
  const auto& s = smallball;
  if (s.source != "design" && s.source != "noise") fail("smallball.source", "must be design or noise");
  if (s.draws < 100) fail("smallball.draws", "must be >= 100");
  if (!(s.theta > 0.0 && s.theta < 1.0)) fail("smallball.theta", "must lie in (0, 1)");
  if (s.num_directions < 1) fail("smallball.num_directions", "must be >= 1");
  if (!(s.r > 0.0)) fail("smallball.r", "must be positive");
  if (!(rate_constants.c1 > 0.0 && rate_constants.c2 > 0.0 && rate_constants.c0 > 0.0))
    fail("rate_constants", "must be positive");
  switch (kind) {
    case ExperimentKind::regime_sweep:
      if (!sweep || sweep->parameter != SweepParameter::sigma)
        fail("sweep.parameter", "regime_sweep needs a sigma sweep");
      break;
    case ExperimentKind::rate_fit:
      if (!sweep || sweep->parameter != SweepParameter::N)
        fail("sweep.parameter", "rate_fit needs an N sweep");
      break;
    case ExperimentKind::persistence:
      if (!sweep || sweep->parameter != SweepParameter::n)
        fail("sweep.parameter", "persistence needs an n sweep");
      if (!set.has_l1()) fail("set.kind", "persistence needs an l1 set");
      break;
    default: break;
  }
}

/// One sweep cell with every derived quantity resolved.
struct Cell {
  std::size_t index = 0;
  double sweep_value = std::numeric_limits<double>::quiet_NaN();
  int N = 1;
  int n = 1;
  double sigma = 0.0;
  DesignKind design;
  ConstraintSet set;
  Vector t0;
  NoiseKind noise;
};

inline std::vector<Cell> expand_cells(const ExperimentConfig& cfg) {
  const std::size_t count = cfg.sweep ? cfg.sweep->values.size() : 1;
  std::vector<Cell> cells(count);
  for (std::size_t c = 0; c < count; ++c) {
    Cell& cell = cells[c];
    cell.index = c;
    cell.N = cfg.N;
    cell.n = cfg.design.dim;
    cell.sigma = cfg.noise.family == NoiseFamily::none ? 0.0 : cfg.noise.sigma;
    if (cfg.sweep) {
      const double v = cfg.sweep->values[c];
      cell.sweep_value = v;
      switch (cfg.sweep->parameter) {
        case SweepParameter::sigma: cell.sigma = v; break;
        case SweepParameter::N: cell.N = static_cast<int>(v); break;
        case SweepParameter::n: cell.n = static_cast<int>(v); break;
      }
    }
    cell.design = cfg.design;
    cell.design.dim = cell.n;
    cell.set = cfg.set;
    cell.set.dim = cell.n;
    if (cfg.alpha_rule) cell.set.alpha = cfg.alpha_rule->at(cell.n);
    NoiseSetting ns = cfg.noise;
    ns.sigma = cell.sigma;
    if (cell.sigma > 0.0 && ns.family == NoiseFamily::none) ns.family = NoiseFamily::gaussian;
    cell.noise = ns.kind();
    cell.t0 = materialize_target(cfg.target, cell.n, cell.set);
    if (!contains(cell.set, cell.t0, 1e-12))
      throw ConfigError("target", "t0 lies outside the constraint set");
  }
  return cells;
}

/// Stream identifiers mixed into derive_seed.
namespace streams {
inline constexpr std::uint64_t complexity = 0x436f6d706c6578ULL;
inline constexpr std::uint64_t holdout = 1;
inline constexpr std::uint64_t smallball = 0x536d616c6cULL;
}  // namespace streams

/// Small-ball constants used for the default zeta/theta.
inline SmallBallParams design_smallball(const DesignKind& design, double pz_theta) {
  const double ratio = design_l4_over_l2(design);
  if (!std::isfinite(ratio))
    throw ConfigError("complexity.zeta1",
                      "the design has no finite fourth moment; set zeta1, zeta2 and theta explicitly");
  return paley_zygmund_certificate(ratio, pz_theta);
}

/// Resolved constants for one loss and cell.
struct ResolvedConstants {
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double theta = 0.0;
  double kappa = 0.0;
  double t2 = 0.0;
};

inline double default_t2(const LossSpec& loss, double noise_l2) {
  switch (loss.kind) {
    case LossKind::huber: return 0.5 * loss.gamma;
    case LossKind::logistic: return noise_l2 > 0.0 ? noise_l2 : 1.0;
    case LossKind::squared: return 1.0;
  }
  return 1.0;
}

inline ResolvedConstants resolve_constants(const ComplexitySettings& cs, const DesignKind& design,
                                           const LossSpec& loss, double noise_l2) {
  ResolvedConstants out;
  out.t2 = cs.t2.value_or(default_t2(loss, noise_l2));
  const bool need_sb = !cs.zeta1 || !cs.zeta2 || (!cs.theta && !cs.kappa);
  const SmallBallParams sb = need_sb ? design_smallball(design, cs.pz_theta) : SmallBallParams{};
  const ComplexityConstants d = default_constants(sb, rho(loss, 0.0, out.t2));
  out.zeta1 = cs.zeta1.value_or(d.zeta1);
  out.zeta2 = cs.zeta2.value_or(d.zeta2);
  out.theta = cs.theta.value_or(d.theta);
  out.kappa = cs.kappa.value_or(out.theta / 16.0);
  return out;
}

/// r_Q = max(r1Q, r2Q) for a cell, on a dedicated seed stream.
struct RQEstimate {
  FixedPointResult r1q;
  FixedPointResult r2q;
  double value = 0.0;
};

inline RQEstimate estimate_r_q(const ComplexitySettings& cs, const Cell& cell,
                               std::uint64_t master_seed, unsigned threads) {
  // zeta1 and zeta2 do not depend on the loss; squared is a placeholder.
  const ResolvedConstants k = resolve_constants(cs, cell.design, LossSpec::squared(), 0.0);
  FixedPointProblem p;
  p.set = cell.set;
  p.sample_size = cell.N;
  p.design = cell.design;
  p.mc_budget = cs.width_reps;
  p.cap = cs.cap;
  p.rel_tol = cs.rel_tol;
  p.threads = threads;
  p.seed = derive_seed(master_seed, streams::complexity, cell.index);
  RQEstimate out;
  p.kind = FixedPointKind::r1Q;
  p.zeta = k.zeta1;
  out.r1q = solve_fixed_point(p);
  p.kind = FixedPointKind::r2Q;
  p.zeta = k.zeta2;
  out.r2q = solve_fixed_point(p);
  out.value = r_q(out.r1q, out.r2q);
  return out;
}

/// Type-7 (linear interpolation) sample quantile.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

/// Median absolute deviation about the median.
inline double mad(const Vector& x) {
  std::vector<double> v(x.data(), x.data() + x.size());
  const double m = median(v);
  for (double& e : v) e = std::abs(e - m);
  return median(std::move(v));
}

struct TrialResult {
  std::size_t cell = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string loss_label;
  LossSpec loss;
  double est_error_l2 = 0.0;
  double excess_risk = std::numeric_limits<double>::quiet_NaN();
  double excess_risk_se = std::numeric_limits<double>::quiet_NaN();
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double runtime_ms = 0.0;
  std::vector<std::string> flags;
  Vector t_hat;
};

namespace detail {

inline double fallback_scale(const Sample& s) {
  const double rms = std::sqrt(s.responses.squaredNorm() / static_cast<double>(s.size()));
  return rms > 0.0 ? rms : 1.0;
}

}  // namespace detail

/// Resolves a loss choice on a dataset. Returns the spec and whether the
/// calibration fell back to the response scale.
inline std::pair<LossSpec, bool> resolve_loss(const LossChoice& choice, const Sample& sample,
                                              const ConstraintSet& set, double noise_l2,
                                              double r_q_value, const SolverOptions& solver) {
  if (!choice.huber_auto) return {choice.fixed, false};
  double scale = noise_l2;
  if (choice.mode == CalibrationMode::plugin) {
    double pilot_gamma = mad(sample.responses);
    if (!(pilot_gamma > 0.0)) pilot_gamma = detail::fallback_scale(sample);
    const FitResult pilot = fit(LossSpec::huber(pilot_gamma), set, sample, solver);
    scale = 1.4826 * mad(Vector(sample.design * pilot.t_hat - sample.responses));
  }
  if (scale > 0.0 || r_q_value > 0.0) return {calibrate_huber(scale, r_q_value, choice.c0), false};
  return {LossSpec::huber(choice.c0 * detail::fallback_scale(sample)), true};
}

struct RiskEstimate {
  double mean = 0.0;
  double se = 0.0;
};

/// Holdout estimate of E[l(<t_hat, X> - Y) - l(<t0, X> - Y)] for each
/// (loss, t_hat) pair, all on one stream of `m` fresh draws.
inline std::vector<RiskEstimate> holdout_excess_risk(const DesignKind& design, const TargetSpec& target,
                                                     const std::vector<LossSpec>& losses,
                                                     const std::vector<Vector>& t_hats, int m,
                                                     std::uint64_t seed) {
  if (losses.size() != t_hats.size()) throw ArgumentError("holdout_excess_risk: size mismatch");
  if (m < 1) throw ArgumentError("holdout_excess_risk: need at least one draw");
  Rng rng(seed);
  const std::size_t k = losses.size();
  std::vector<double> sum(k, 0.0), sq(k, 0.0);
  Vector x(design.dim);
  for (int i = 0; i < m; ++i) {
    sample_design_row(design, rng, x);
    const double y = make_response(target, x, sample_noise(target.noise, rng));
    const double base = target.t0.dot(x) - y;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = loss_value(losses[j], t_hats[j].dot(x) - y) - loss_value(losses[j], base);
      sum[j] += d;
      sq[j] += d * d;
    }
  }
  std::vector<RiskEstimate> out(k);
  const double md = m;
  for (std::size_t j = 0; j < k; ++j) {
    const double mean = sum[j] / md;
    const double var = m > 1 ? std::max(0.0, (sq[j] - md * mean * mean) / (md - 1.0)) : 0.0;
    out[j] = {mean, std::sqrt(var / md)};
  }
  return out;
}

/// Runs every loss on the dataset of (cell, trial). All losses see the same
/// sample and the same holdout stream.
inline std::vector<TrialResult> run_trial(const ExperimentConfig& cfg, const Cell& cell, int trial,
                                          double r_q_value) {
  const std::uint64_t seed = derive_seed(cfg.master_seed, cell.index, static_cast<std::uint64_t>(trial));
  TargetSpec target{cell.t0, cell.noise, cfg.dependent_sign};
  const Sample sample = sample_dataset(cell.design, target, cell.N, seed);
  const double noise_l2 = noise_moments(cell.noise).l2;

  std::vector<TrialResult> out;
  out.reserve(cfg.losses.size());
  for (const auto& choice : cfg.losses) {
    TrialResult r;
    r.cell = cell.index;
    r.trial = trial;
    r.seed = seed;
    r.loss_label = choice.label();
    const auto start = std::chrono::steady_clock::now();
    const auto [spec, fallback] = resolve_loss(choice, sample, cell.set, noise_l2, r_q_value, cfg.solver);
    r.loss = spec;
    if (fallback) r.flags.emplace_back("calibration_fallback");
    const FitResult f = fit(spec, cell.set, sample, cfg.solver);
    r.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    r.t_hat = f.t_hat;
    r.objective = f.objective;
    r.iterations = f.iterations;
    r.converged = f.converged;
    if (!f.converged) r.flags.emplace_back("nonconverged");
    r.est_error_l2 = (f.t_hat - cell.t0).norm();
    const double ref = std::min(empirical_risk(spec, cell.t0, sample),
                                empirical_risk(spec, Vector::Zero(cell.n), sample));
    if (f.objective > ref + 1e-8 * std::max(1.0, std::abs(ref))) r.flags.emplace_back("certificate");
    out.push_back(std::move(r));
  }

  if (cfg.holdout > 0) {
    std::vector<LossSpec> specs;
    std::vector<Vector> fits;
    for (const auto& r : out) {
      specs.push_back(r.loss);
      fits.push_back(r.t_hat);
    }
    const auto est = holdout_excess_risk(cell.design, target, specs, fits, cfg.holdout,
                                         derive_seed(seed, streams::holdout));
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j].excess_risk = est[j].mean;
      out[j].excess_risk_se = est[j].se;
      if (est[j].mean < -4.0 * est[j].se) out[j].flags.emplace_back("negative_excess_risk");
    }
  }
  return out;
}

struct CellSummary {
  std::size_t cell = 0;
  std::string loss_label;
  int trials = 0;
  int flagged = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double q99 = 0.0;
  double median_excess_risk = 0.0;
  double median_gamma = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Cell> cells;
  std::vector<RQEstimate> r_q;           // per cell, when estimated
  std::vector<double> r_q_used;          // per cell
  std::vector<TrialResult> trials;       // cell-major, then trial, then loss
  std::vector<CellSummary> summaries;    // cell-major, then loss
};

inline std::vector<CellSummary> summarize(const ExperimentConfig& cfg, const std::vector<Cell>& cells,
                                          const std::vector<TrialResult>& trials) {
  std::vector<CellSummary> out;
  for (const auto& cell : cells) {
    for (const auto& choice : cfg.losses) {
      const std::string label = choice.label();
      std::vector<double> err, risk, gamma;
      CellSummary s;
      s.cell = cell.index;
      s.loss_label = label;
      for (const auto& t : trials) {
        if (t.cell != cell.index || t.loss_label != label) continue;
        err.push_back(t.est_error_l2);
        if (std::isfinite(t.excess_risk)) risk.push_back(t.excess_risk);
        if (t.loss.kind == LossKind::huber) gamma.push_back(t.loss.gamma);
        s.flagged += !t.flags.empty();
      }
      s.trials = static_cast<int>(err.size());
      s.median = quantile(err, 0.5);
      s.q25 = quantile(err, 0.25);
      s.q75 = quantile(err, 0.75);
      s.q99 = quantile(err, 0.99);
      s.median_excess_risk = risk.empty() ? std::numeric_limits<double>::quiet_NaN() : median(risk);
      if (!gamma.empty()) s.median_gamma = median(gamma);
      out.push_back(s);
    }
  }
  return out;
}

/// Runs all cells x trials x losses. Trial (c, i) uses seed
/// derive_seed(master_seed, c, i); results are stored by index, so the output
/// does not depend on `threads`.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;
  res.cells = expand_cells(cfg);
  const bool need_rq = std::any_of(cfg.losses.begin(), cfg.losses.end(),
                                   [](const LossChoice& l) { return l.huber_auto; });
  for (const auto& cell : res.cells) {
    double used = 0.0;
    if (cfg.complexity.r_q) {
      used = *cfg.complexity.r_q;
    } else if (need_rq) {
      res.r_q.push_back(estimate_r_q(cfg.complexity, cell, cfg.master_seed, threads));
      used = res.r_q.back().value;
    }
    res.r_q_used.push_back(used);
  }

  const std::size_t per_cell = static_cast<std::size_t>(cfg.trials);
  const std::size_t total = res.cells.size() * per_cell;
  std::vector<std::vector<TrialResult>> slots(total);
  parallel_for(total, threads, [&](std::size_t idx) {
    const std::size_t c = idx / per_cell;
    slots[idx] = run_trial(cfg, res.cells[c], static_cast<int>(idx % per_cell), res.r_q_used[c]);
  });
  for (auto& s : slots)
    for (auto& t : s) res.trials.push_back(std::move(t));
  res.summaries = summarize(cfg, res.cells, res.trials);
  return res;
}

/// Per-sigma quantiles of the estimation error.
inline ExperimentResult regime_sweep(ExperimentConfig cfg, unsigned threads = 1) {
  cfg.kind = ExperimentKind::regime_sweep;
  return run_experiment(cfg, threads);
}

/// Medians per sigma for one loss, in sweep order.
inline std::vector<double> medians_for(const ExperimentResult& res, const std::string& label) {
  std::vector<double> out;
  for (const auto& s : res.summaries)
    if (s.loss_label == label) out.push_back(s.median);
  return out;
}

/// Flat-then-rising check: median at the smallest nonzero sigma is at most
/// `factor` times the sigma = 0 median, and medians are non-decreasing from
/// `transition` onwards.
struct RegimeShape {
  bool flat_ok = false;
  bool rising_ok = false;
  double ratio = 0.0;
};

inline RegimeShape check_regime_shape(const std::vector<double>& sigmas,
                                      const std::vector<double>& medians, std::size_t transition,
                                      double factor = 2.0) {
  RegimeShape out;
  if (sigmas.size() < 2 || sigmas.size() != medians.size() || sigmas[0] != 0.0) return out;
  out.ratio = medians[0] > 0.0 ? medians[1] / medians[0] : std::numeric_limits<double>::infinity();
  out.flat_ok = medians[1] <= factor * medians[0];
  out.rising_ok = true;
  for (std::size_t i = std::max<std::size_t>(transition, 1); i < medians.size(); ++i)
    if (medians[i] < medians[i - 1]) out.rising_ok = false;
  return out;
}

struct LossComparisonRow {
  std::size_t cell = 0;
  std::string loss_label;
  double median = 0.0;
  double q99 = 0.0;
};

struct LossComparison {
  ExperimentResult result;
  std::vector<LossComparisonRow> rows;
  // Squared vs the first Huber-type loss, per cell.
  std::vector<double> q99_ratio;
  std::vector<double> median_rel_diff;
  std::vector<bool> robust;
};

/// Fits every loss on identical datasets and compares median and 0.99
/// quantile of the error; `robust` marks q99(squared) >= margin * q99(huber).
inline LossComparison loss_comparison(ExperimentConfig cfg, unsigned threads = 1) {
  cfg.kind = ExperimentKind::loss_comparison;
  LossComparison out;
  out.result = run_experiment(cfg, threads);
  for (const auto& s : out.result.summaries) out.rows.push_back({s.cell, s.loss_label, s.median, s.q99});
  std::string huber_label;
  for (const auto& l : cfg.losses)
    if (l.huber_auto || l.fixed.kind == LossKind::huber) {
      huber_label = l.label();
      break;
    }
  const bool has_squared = std::any_of(cfg.losses.begin(), cfg.losses.end(), [](const LossChoice& l) {
    return !l.huber_auto && l.fixed.kind == LossKind::squared;
  });
  if (huber_label.empty() || !has_squared) return out;
  for (const auto& cell : out.result.cells) {
    const CellSummary* sq = nullptr;
    const CellSummary* hu = nullptr;
    for (const auto& s : out.result.summaries) {
      if (s.cell != cell.index) continue;
      if (s.loss_label == "squared") sq = &s;
      if (s.loss_label == huber_label) hu = &s;
    }
    const double ratio = sq->q99 / hu->q99;
    out.q99_ratio.push_back(ratio);
    out.median_rel_diff.push_back(std::abs(sq->median - hu->median) / hu->median);
    out.robust.push_back(ratio >= cfg.margin);
  }
  return out;
}

struct RateFit {
  std::string loss_label;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  int points = 0;
  bool degenerate = false;
};

/// Least-squares line through (log x, log y). Non-positive or vanishing y
/// (below `floor`) marks the fit degenerate.
inline RateFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y,
                           double floor = 1e-12) {
  RateFit f;
  f.points = static_cast<int>(x.size());
  if (x.size() < 2 || x.size() != y.size()) {
    f.degenerate = true;
    return f;
  }
  for (double v : y)
    if (!(v > floor)) {
      f.degenerate = true;
      return f;
    }
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) {
    f.degenerate = true;
    return f;
  }
  f.slope = (m * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / m;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double ly = std::log(y[i]);
    const double pred = f.intercept + f.slope * std::log(x[i]);
    ss_res += (ly - pred) * (ly - pred);
    ss_tot += (ly - mean) * (ly - mean);
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

struct RateFitResult {
  ExperimentResult result;
  std::vector<RateFit> fits;  // one per loss
};

/// log(median error) against log N, per loss.
inline RateFitResult rate_fit(ExperimentConfig cfg, unsigned threads = 1) {
  cfg.kind = ExperimentKind::rate_fit;
  RateFitResult out;
  out.result = run_experiment(cfg, threads);
  for (const auto& choice : cfg.losses) {
    RateFit f = fit_log_log(cfg.sweep->values, medians_for(out.result, choice.label()));
    f.loss_label = choice.label();
    out.fits.push_back(f);
  }
  return out;
}

struct PersistenceRow {
  std::size_t cell = 0;
  std::string loss_label;
  int n = 0;
  int N = 0;
  double alpha = 0.0;
  double median_sq_error = 0.0;
  double q99_sq_error = 0.0;
  double rho_N = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  double ratio_optimal = 0.0;    // median_sq_error / max(v1, v2)
  double ratio_classical = 0.0;  // median_sq_error / rho_N
};

struct PersistenceResult {
  ExperimentResult result;
  std::vector<PersistenceRow> rows;
  // Per loss: max/min of ratio_optimal across the sweep is <= 3.
  std::map<std::string, bool> shape_ok;
};

/// Achieved squared estimation error (the excess risk of the squared loss)
/// next to the persistence rates rho_N and max(v1, v2).
inline PersistenceResult persistence_experiment(ExperimentConfig cfg, unsigned threads = 1) {
  cfg.kind = ExperimentKind::persistence;
  PersistenceResult out;
  out.result = run_experiment(cfg, threads);
  std::map<std::string, std::vector<double>> ratios;
  for (const auto& cell : out.result.cells) {
    RateParams rp;
    rp.n = cell.n;
    rp.N = cell.N;
    rp.alpha = cell.set.alpha;
    rp.sigma_l2 = cell.sigma;
    rp.sigma_l4 = noise_moments(cell.noise).l4;
    rp.constants = cfg.rate_constants;
    const RatePrediction pred = predict_rates(RateExample::persistence_cube, rp);
    for (const auto& choice : cfg.losses) {
      PersistenceRow row;
      row.cell = cell.index;
      row.loss_label = choice.label();
      row.n = cell.n;
      row.N = cell.N;
      row.alpha = cell.set.alpha;
      std::vector<double> sq;
      for (const auto& t : out.result.trials)
        if (t.cell == cell.index && t.loss_label == row.loss_label)
          sq.push_back(t.est_error_l2 * t.est_error_l2);
      row.median_sq_error = median(sq);
      row.q99_sq_error = quantile(sq, 0.99);
      row.rho_N = pred.classical;
      row.v1 = pred.v1;
      row.v2 = pred.v2;
      const double opt = std::max(pred.v1, pred.v2);
      row.ratio_optimal = opt > 0.0 ? row.median_sq_error / opt : std::numeric_limits<double>::infinity();
      row.ratio_classical = pred.classical > 0.0 ? row.median_sq_error / pred.classical
                                                 : std::numeric_limits<double>::infinity();
      ratios[row.loss_label].push_back(row.ratio_optimal);
      out.rows.push_back(row);
    }
  }
  for (const auto& [label, r] : ratios) {
    const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    out.shape_ok[label] = std::isfinite(*hi) && *lo > 0.0 && *hi / *lo <= 3.0;
  }
  return out;
}

}  // namespace calerm

#endif  // CALERM_EXPERIMENTS_HPP
