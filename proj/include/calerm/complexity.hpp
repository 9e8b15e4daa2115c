#ifndef CALERM_COMPLEXITY_HPP
#define CALERM_COMPLEXITY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "calerm/decomposition.hpp"
#include "calerm/error.hpp"
#include "calerm/geometry.hpp"
#include "calerm/losses.hpp"
#include "calerm/parallel.hpp"
#include "calerm/smallball.hpp"
#include "calerm/synthdata.hpp"

namespace calerm {

/// Monte Carlo estimate of an expected supremum.
struct WidthEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int reps = 0;
};

namespace detail {

inline WidthEstimate mean_and_se(const std::vector<double>& values) {
  WidthEstimate w;
  w.reps = static_cast<int>(values.size());
  if (values.empty()) return w;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double m = static_cast<double>(values.size());
  w.value = mean;
  w.std_error = values.size() > 1 ? std::sqrt(var / (m - 1.0) / m) : 0.0;
  return w;
}

inline Vector standard_gaussian(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector g(n);
  for (int j = 0; j < n; ++j) g[j] = normal(rng);
  return g;
}

}  // namespace detail

/// E sup_{t in set, ||t||_2 <= r} |<g, t>| for standard Gaussian g. Under an
/// isotropic design this is the Gaussian width of the localized linear class.
/// Replicate i uses seed derive_seed(seed, i), so the estimate does not
/// depend on `threads`.
inline WidthEstimate gaussian_width(const ConstraintSet& set, double r, int reps,
                                    std::uint64_t seed, unsigned threads = 1) {
  if (reps < 2) throw ArgumentError("gaussian_width needs at least 2 replicates");
  const ConstraintSet local = localize(set, r);
  std::vector<double> values(static_cast<std::size_t>(reps));
  parallel_for(values.size(), threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    values[i] = symmetric_support(local, detail::standard_gaussian(set.dim, rng));
  });
  return detail::mean_and_se(values);
}

/// (1/sqrt(N)) sup_{t in set, ||t||_2 <= r} |sum_i eps_i m_i <t, X_i>|,
/// evaluated exactly as a support function of the localized set.
inline double rademacher_multiplier_width(const ConstraintSet& set, double r,
                                          const Sample& sample, const Vector& multipliers,
                                          const Vector& rademacher) {
  if (sample.dim() != set.dim)
    throw ArgumentError("rademacher_multiplier_width: design dimension mismatch");
  if (multipliers.size() != sample.size() || rademacher.size() != sample.size())
    throw ArgumentError("rademacher_multiplier_width: weight length must equal N");
  const Vector weights = multipliers.cwiseProduct(rademacher);
  const Vector w = sample.design.transpose() * weights;
  return symmetric_support(localize(set, r), w) / std::sqrt(static_cast<double>(sample.size()));
}

enum class FixedPointKind { r1Q, r2Q, rM_prime, r0, rM_total, kbarN };

inline std::string_view to_string(FixedPointKind k) {
  switch (k) {
    case FixedPointKind::r1Q: return "r1Q";
    case FixedPointKind::r2Q: return "r2Q";
    case FixedPointKind::rM_prime: return "rM_prime";
    case FixedPointKind::r0: return "r0";
    case FixedPointKind::rM_total: return "rM_total";
    case FixedPointKind::kbarN: return "kbarN";
  }
  return "unknown";
}

/// One evaluation of the bisected criterion.
struct TracePoint {
  double r = 0.0;
  double statistic = 0.0;     // width, mean Bernoulli sup, or quantile of phi_N
  double threshold = 0.0;     // zeta r sqrt(N) or zeta r^2 sqrt(N)
  double statistic_se = 0.0;
  bool holds = false;
};

struct FixedPointResult {
  FixedPointKind kind = FixedPointKind::r1Q;
  double r = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double mc_std_error = 0.0;
  // The criterion failed on the whole search range and r is the upper end.
  bool capped = false;
  std::vector<TracePoint> trace;
};

/// Inputs of solve_fixed_point. `zeta` is the constant on the right-hand side
/// (zeta_1, zeta_2, or gamma for kbarN); `kappa` and `delta` belong to rM_prime.
struct FixedPointProblem {
  FixedPointKind kind = FixedPointKind::r1Q;
  ConstraintSet set;
  int sample_size = 1;
  double zeta = 1.0;
  double kappa = 1.0;
  double delta = 0.1;
  double lipschitz = 1.0;  // kbarN argument scaling r / ||ell||_lip
  LossSpec loss;
  DesignKind design;
  NoiseKind noise;
  int mc_budget = 2000;
  std::uint64_t seed = 0;
  double cap = 1e3;  // upper end for the unbounded full space
  double rel_tol = 1e-3;
  unsigned threads = 1;
};

namespace detail {

// Replicate vectors for the criterion. For r1Q these are Gaussian vectors;
// for r2Q/kbarN w = N^{-1/2} sum eps_i X_i; for rM_prime the sum carries the
// weights ell'(xi_i) with xi_i = -W_i. Every support evaluation is then
// symmetric_support(localize(set, r), w), so the replicates are shared by all
// radii (common random numbers).
inline std::vector<Vector> criterion_replicates(const FixedPointProblem& p) {
  const std::size_t m = static_cast<std::size_t>(p.mc_budget);
  std::vector<Vector> reps(m);
  const int n = p.set.dim;
  parallel_for(m, p.threads, [&](std::size_t i) {
    Rng rng(derive_seed(p.seed, i));
    if (p.kind == FixedPointKind::r1Q) {
      reps[i] = standard_gaussian(n, rng);
      return;
    }
    DesignKind design = p.design;
    design.dim = n;
    std::bernoulli_distribution coin(0.5);
    Vector w = Vector::Zero(n);
    Vector row(n);
    for (int j = 0; j < p.sample_size; ++j) {
      sample_design_row(design, rng, row);
      double weight = coin(rng) ? 1.0 : -1.0;
      if (p.kind == FixedPointKind::rM_prime)
        weight *= loss_deriv(p.loss, -sample_noise(p.noise, rng));
      w += weight * row;
    }
    reps[i] = w / std::sqrt(static_cast<double>(p.sample_size));
  });
  return reps;
}

// Order statistic at rank ceil(level * m) (1-based) and a distribution-free
// standard error from the neighbouring ranks k +- sqrt(m level (1 - level)).
inline std::pair<double, double> upper_quantile(std::vector<double> values, double level) {
  const std::size_t m = values.size();
  std::sort(values.begin(), values.end());
  const auto rank = [&](double q) {
    const double k = std::ceil(q * static_cast<double>(m));
    return static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(m))) - 1;
  };
  const std::size_t k = rank(level);
  const double spread = std::sqrt(static_cast<double>(m) * level * (1.0 - level));
  const double lo_rank = std::max(0.0, static_cast<double>(k) - spread);
  const double hi_rank = std::min(static_cast<double>(m - 1), static_cast<double>(k) + spread);
  const double se =
      0.5 * (values[static_cast<std::size_t>(std::round(hi_rank))] -
             values[static_cast<std::size_t>(std::round(lo_rank))]);
  return {values[k], se};
}

// Bisection over [lo, hi] for inf{r : holds(r)} assuming holds is monotone
// (false below the fixed point, true above). Geometric midpoints; stops at
// relative bracket width rel_tol.
template <class Eval>
FixedPointResult bisect_fixed_point(FixedPointKind kind, double lo, double hi, double rel_tol,
                                    Eval&& eval) {
  FixedPointResult res;
  res.kind = kind;
  TracePoint at_lo = eval(lo);
  res.trace.push_back(at_lo);
  if (at_lo.holds) {
    res.r = 0.0;
    res.bracket_lo = 0.0;
    res.bracket_hi = lo;
    return res;
  }
  TracePoint at_hi = eval(hi);
  res.trace.push_back(at_hi);
  if (!at_hi.holds) {
    res.r = hi;
    res.bracket_lo = hi;
    res.bracket_hi = hi;
    res.capped = true;
    return res;
  }
  TracePoint best = at_hi;
  while (hi - lo > rel_tol * hi) {
    const double mid = std::sqrt(lo * hi);
    const TracePoint tp = eval(mid);
    res.trace.push_back(tp);
    if (tp.holds) {
      hi = mid;
      best = tp;
    } else {
      lo = mid;
    }
  }
  res.r = hi;
  res.bracket_lo = lo;
  res.bracket_hi = hi;
  if (best.statistic > 0.0) res.mc_std_error = hi * best.statistic_se / best.statistic;
  return res;
}

}  // namespace detail

/// Fixed points by bisection on r, using that sup over the localized set
/// divided by r is non-increasing for star-shaped sets.
///   r1Q:      E sup_{T cap rB2} <g, t>            <= zeta r sqrt(N)
///   r2Q:      E phi_N(r) (unit multipliers)       <= zeta r^2 sqrt(N)
///   kbarN:    E phi_N(r / lipschitz)              <= zeta r^2 sqrt(N)
///   rM_prime: (1 - delta)-quantile of phi_N^ell(r) <= kappa r^2 sqrt(N)
/// The search range is [1e-6 hi, hi] with hi = diameter/2 (or `cap` for the
/// full space). Returns 0 when the criterion already holds at the lower end
/// and the upper end with `capped` set when it never holds.
inline FixedPointResult solve_fixed_point(const FixedPointProblem& p) {
  p.set.validate();
  if (p.sample_size < 1) throw ArgumentError("solve_fixed_point: N must be >= 1");
  if (p.kind == FixedPointKind::r0 || p.kind == FixedPointKind::rM_total)
    throw ArgumentError("solve_fixed_point: r0 and rM_total have dedicated routines");
  if (p.kind == FixedPointKind::rM_prime) {
    if (p.mc_budget < 100)
      throw ArgumentError("solve_fixed_point: rM_prime needs mc_budget >= 100");
    if (!(p.delta > 0.0 && p.delta < 1.0))
      throw ArgumentError("solve_fixed_point: delta must lie in (0, 1)");
    if (!(p.kappa > 0.0)) throw ArgumentError("solve_fixed_point: kappa must be positive");
  } else {
    if (p.mc_budget < 2) throw ArgumentError("solve_fixed_point: mc_budget must be >= 2");
    if (!(p.zeta > 0.0)) throw ArgumentError("solve_fixed_point: zeta must be positive");
  }
  if (p.kind == FixedPointKind::kbarN && !(p.lipschitz > 0.0 && std::isfinite(p.lipschitz)))
    throw ArgumentError("solve_fixed_point: kbarN needs a finite positive Lipschitz constant");

  const double hi = p.set.bounded() ? 0.5 * diameter(p.set) : p.cap;
  const double lo = 1e-6 * hi;
  const std::vector<Vector> reps = detail::criterion_replicates(p);
  const double sqrt_n = std::sqrt(static_cast<double>(p.sample_size));

  auto eval = [&](double r) {
    const double radius = p.kind == FixedPointKind::kbarN ? r / p.lipschitz : r;
    const ConstraintSet local = localize(p.set, radius);
    std::vector<double> sups(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) sups[i] = symmetric_support(local, reps[i]);
    TracePoint tp;
    tp.r = r;
    if (p.kind == FixedPointKind::rM_prime) {
      const auto [q, se] = detail::upper_quantile(std::move(sups), 1.0 - p.delta);
      tp.statistic = q;
      tp.statistic_se = se;
      tp.threshold = p.kappa * r * r * sqrt_n;
    } else {
      const WidthEstimate w = detail::mean_and_se(sups);
      tp.statistic = w.value;
      tp.statistic_se = w.std_error;
      tp.threshold = p.kind == FixedPointKind::r1Q ? p.zeta * r * sqrt_n
                                                   : p.zeta * r * r * sqrt_n;
    }
    tp.holds = tp.statistic <= tp.threshold;
    return tp;
  };
  return detail::bisect_fixed_point(p.kind, lo, hi, p.rel_tol, eval);
}

/// Normalized criterion statistic / (r^p sqrt(N)) along the trace, p = 1 for
/// r1Q and 2 otherwise; compare against zeta (or kappa).
inline double normalized_criterion(const FixedPointResult& res, const TracePoint& tp,
                                   int sample_size) {
  const double power = res.kind == FixedPointKind::r1Q ? 1.0 : 2.0;
  return tp.statistic / (std::pow(tp.r, power) * std::sqrt(static_cast<double>(sample_size)));
}

/// True when the normalized criterion is non-increasing in r along the trace,
/// up to `n_se` Monte Carlo standard errors.
inline bool trace_is_monotone(const FixedPointResult& res, int sample_size, double n_se = 3.0) {
  std::vector<TracePoint> pts = res.trace;
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.r < b.r; });
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double prev = normalized_criterion(res, pts[i - 1], sample_size);
    const double cur = normalized_criterion(res, pts[i], sample_size);
    const double power = res.kind == FixedPointKind::r1Q ? 1.0 : 2.0;
    const double se = pts[i].statistic_se /
                          (std::pow(pts[i].r, power) * std::sqrt(double(sample_size))) +
                      pts[i - 1].statistic_se /
                          (std::pow(pts[i - 1].r, power) * std::sqrt(double(sample_size)));
    if (cur > prev + n_se * se + 1e-12 * std::abs(prev)) return false;
  }
  return true;
}

/// r_Q = max(r1Q, r2Q) from a pair of solved fixed points.
inline double r_q(const FixedPointResult& r1q, const FixedPointResult& r2q) {
  return std::max(r1q.r, r2q.r);
}

enum class R0Mode { independent_isotropic, monte_carlo };

inline std::string_view to_string(R0Mode m) {
  return m == R0Mode::monte_carlo ? "monte_carlo" : "independent_isotropic";
}

inline R0Mode r0_mode_from_string(std::string_view s) {
  if (s == "independent_isotropic") return R0Mode::independent_isotropic;
  if (s == "monte_carlo") return R0Mode::monte_carlo;
  throw ArgumentError("unknown r0 mode '" + std::string(s) + "'");
}

/// Monte Carlo ||ell'(xi)||_L2 with xi = -W.
inline double lprime_l2_norm(const LossSpec& loss, const NoiseKind& noise, int draws,
                             std::uint64_t seed) {
  if (noise.family == NoiseFamily::none) return 0.0;
  if (draws < 1) throw ArgumentError("lprime_l2_norm needs at least one draw");
  Rng rng(seed);
  double s = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double d = loss_deriv(loss, -sample_noise(noise, rng));
    s += d * d;
  }
  return std::sqrt(s / draws);
}

/// Sample-based inputs of the Monte Carlo r0 mode.
struct R0Sample {
  const Sample* sample = nullptr;
  const Vector* t_star = nullptr;
  int directions = 512;
  std::uint64_t seed = 0;
};

/// r0(kappa) = inf{r : sup_{h in H cap rD} ||ell'(xi) h(X)||_L2 <= sqrt(N) kappa r^2 / 4}.
/// Independent isotropic mode: the supremum is ||ell'(xi)||_L2 * r, giving
/// 4 ||ell'(xi)||_L2 / (sqrt(N) kappa). Monte Carlo mode: the supremum is
/// taken over a net of random directions plus the top singular direction of
/// diag(ell'(xi)) X, then bisected.
inline double r0(const LossSpec& loss, const ConstraintSet& set, double kappa,
                 double lprime_l2, int sample_size, R0Mode mode,
                 const R0Sample& mc = {}, double cap = 1e3) {
  if (!(kappa > 0.0)) throw ArgumentError("r0: kappa must be positive");
  if (sample_size < 1) throw ArgumentError("r0: N must be >= 1");
  const double sqrt_n = std::sqrt(static_cast<double>(sample_size));
  if (mode == R0Mode::independent_isotropic) {
    if (!(lprime_l2 >= 0.0)) throw ArgumentError("r0: ||ell'(xi)||_L2 must be nonnegative");
    return 4.0 * lprime_l2 / (sqrt_n * kappa);
  }
  if (mc.sample == nullptr || mc.t_star == nullptr)
    throw ArgumentError("r0: monte_carlo mode requires a sample and t_star");
  const Sample& s = *mc.sample;
  if (s.dim() != set.dim || mc.t_star->size() != set.dim)
    throw ArgumentError("r0: dimension mismatch");
  Vector weights = s.design * *mc.t_star - s.responses;
  for (double& v : weights) v = loss_deriv(loss, v);
  if (weights.squaredNorm() == 0.0) return 0.0;
  const Matrix m =
      weights.asDiagonal() * s.design / std::sqrt(static_cast<double>(s.size()));

  std::vector<Vector> net;
  Rng rng(mc.seed);
  for (int d = 0; d < mc.directions; ++d)
    if (auto u = feasible_direction(set, 0.0, rng)) net.push_back(*u);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinV);
  net.push_back(svd.matrixV().col(0));

  std::vector<double> gains(net.size()), reach(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    gains[i] = (m * net[i]).norm();
    reach[i] = radial_limit(set, net[i]);
  }
  auto holds = [&](double r) {
    double sup = 0.0;
    for (std::size_t i = 0; i < net.size(); ++i) sup = std::max(sup, std::min(r, reach[i]) * gains[i]);
    TracePoint tp;
    tp.r = r;
    tp.statistic = sup;
    tp.threshold = sqrt_n * kappa * r * r / 4.0;
    tp.holds = tp.statistic <= tp.threshold;
    return tp;
  };
  const double hi = set.bounded() ? 0.5 * diameter(set) : cap;
  return detail::bisect_fixed_point(FixedPointKind::r0, 1e-6 * hi, hi, 1e-6, holds).r;
}

/// r_M = r_M' + r0.
inline FixedPointResult r_M_total(const FixedPointResult& rm_prime, double r0_value) {
  if (!(r0_value >= 0.0)) throw ArgumentError("r_M_total: r0 must be nonnegative");
  FixedPointResult out = rm_prime;
  out.kind = FixedPointKind::rM_total;
  out.r = rm_prime.r + r0_value;
  out.bracket_lo = rm_prime.bracket_lo + r0_value;
  out.bracket_hi = rm_prime.bracket_hi + r0_value;
  out.trace.clear();
  return out;
}

/// k_F = (E||G||_F / d_F)^2.
inline double dvoretzky_dimension(const WidthEstimate& width, double diam) {
  if (!(diam > 0.0) || !std::isfinite(diam))
    throw ArgumentError("dvoretzky_dimension: diameter must be positive and finite");
  const double ratio = width.value / diam;
  return ratio * ratio;
}

/// E||g||_2 for g standard Gaussian in R^n: sqrt(2) Gamma((n+1)/2) / Gamma(n/2).
inline double chi_mean(int n) {
  return std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (n + 1)) - std::lgamma(0.5 * n));
}

enum class RateExample { full_space, l1_class, persistence_cube };

inline std::string_view to_string(RateExample e) {
  switch (e) {
    case RateExample::full_space: return "full_space";
    case RateExample::l1_class: return "l1_class";
    case RateExample::persistence_cube: return "persistence_cube";
  }
  return "unknown";
}

inline RateExample rate_example_from_string(std::string_view s) {
  if (s == "full_space") return RateExample::full_space;
  if (s == "l1_class") return RateExample::l1_class;
  if (s == "persistence_cube") return RateExample::persistence_cube;
  throw ArgumentError("unknown rate example '" + std::string(s) + "'");
}

/// Unspecified constants in the closed-form rates; all default to 1.
struct RateConstants {
  double c0 = 1.0;  // Huber gamma = c0 max(||xi||_L2, r_Q); logistic exponent
  double c1 = 1.0;
  double c2 = 1.0;

  bool operator==(const RateConstants&) const = default;
};

struct RateParams {
  int n = 1;
  int N = 1;
  double alpha = 1.0;     // l1 radius (the persistence radius r)
  double sigma_l2 = 0.0;  // ||xi||_L2
  double sigma_l4 = 0.0;  // ||xi||_L4
  double delta = 0.1;
  LossKind loss = LossKind::squared;
  RateConstants constants;
};

enum class Regime { intrinsic, noise_dominated };

inline std::string_view to_string(Regime r) {
  return r == Regime::noise_dominated ? "noise_dominated" : "intrinsic";
}

struct RatePrediction {
  double r_Q_pred = 0.0;
  double r_M_pred = 0.0;
  Regime regime = Regime::intrinsic;
  std::string formula_id;
  // Persistence quantities (squared-error scale); zero for other examples.
  double classical = 0.0;  // rho_N
  double v1 = 0.0;
  double v2 = 0.0;
};

namespace detail {

inline double safe_log(double x) { return x > 1.0 ? std::log(x) : 0.0; }

}  // namespace detail

/// Closed-form rate predictors for the linear-class examples.
inline RatePrediction predict_rates(RateExample example, const RateParams& p) {
  if (p.n < 1 || p.N < 1) throw ArgumentError("predict_rates: n and N must be positive");
  if (!(p.delta > 0.0 && p.delta < 1.0))
    throw ArgumentError("predict_rates: delta must lie in (0, 1)");
  if (!(p.sigma_l2 >= 0.0) || !(p.sigma_l4 >= 0.0))
    throw ArgumentError("predict_rates: noise norms must be nonnegative");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double n = p.n, big_n = p.N, delta = p.delta;
  const auto& c = p.constants;
  RatePrediction out;

  switch (example) {
    case RateExample::full_space: {
      out.r_Q_pred = big_n >= c.c1 * n ? 0.0 : inf;
      const double conf = 1.0 + std::sqrt(std::log(1.0 / delta) / n);
      const double base = std::sqrt(n / big_n);
      switch (p.loss) {
        case LossKind::squared: {
          const double beta = std::max(1.0 / std::pow(big_n * delta, 0.25), 1.0);
          out.r_M_pred = p.sigma_l4 == 0.0 ? 0.0 : beta * conf * p.sigma_l4 * base;
          break;
        }
        case LossKind::huber: out.r_M_pred = conf * p.sigma_l2 * base; break;
        case LossKind::logistic:
          out.r_M_pred = std::exp(c.c0 * p.sigma_l2) * conf * base;
          break;
      }
      out.formula_id = "full_space/" + std::string(to_string(p.loss));
      break;
    }
    case RateExample::l1_class: {
      if (!(p.alpha > 0.0)) throw ArgumentError("predict_rates: alpha must be positive");
      if (c.c1 > c.c2) throw ArgumentError("predict_rates: l1_class needs c1 <= c2");
      const double a = p.alpha;
      if (big_n <= c.c1 * n)
        out.r_Q_pred = a / std::sqrt(big_n) * std::sqrt(detail::safe_log(std::exp(1.0) * n / big_n));
      else if (big_n <= c.c2 * n)
        out.r_Q_pred = a / std::sqrt(n);
      else
        out.r_Q_pred = 0.0;
      double rm2 = 0.0;
      switch (p.loss) {
        case LossKind::squared: {
          const double beta = std::max(1.0 / std::pow(delta * big_n, 0.25), 1.0);
          const double s4 = p.sigma_l4;
          rm2 = beta * beta * s4 * s4 * std::log(2.0 / delta) / big_n;
          if (a <= beta * s4 * n / std::sqrt(big_n))
            rm2 += a * beta * s4 / std::sqrt(big_n) *
                   std::sqrt(detail::safe_log(std::exp(1.0) * n * beta * s4 / (a * std::sqrt(big_n))));
          else
            rm2 += beta * beta * s4 * s4 * n / big_n;
          break;
        }
        case LossKind::huber: {
          const double gamma = c.c0 * std::max(p.sigma_l2, out.r_Q_pred);
          rm2 = p.sigma_l2 * p.sigma_l2 * std::log(2.0 / delta) / big_n;
          if (a <= n * gamma / std::sqrt(big_n))
            rm2 += gamma * a / std::sqrt(big_n) *
                   std::sqrt(detail::safe_log(std::exp(1.0) * n * gamma / (a * std::sqrt(big_n))));
          else
            rm2 += gamma * gamma * n / big_n;
          break;
        }
        case LossKind::logistic:
          throw ArgumentError("predict_rates: no l1_class rate for the logistic loss");
      }
      out.r_M_pred = std::sqrt(rm2);
      out.formula_id = "l1_class/" + std::string(to_string(p.loss));
      break;
    }
    case RateExample::persistence_cube: {
      if (!(p.alpha > 0.0)) throw ArgumentError("predict_rates: radius must be positive");
      const double r = p.alpha, sigma = p.sigma_l2;
      out.classical = big_n <= c.c1 * n * n
                          ? r * r / std::sqrt(big_n) *
                                std::sqrt(detail::safe_log(2.0 * c.c1 * n / std::sqrt(big_n)))
                          : r * r * n / big_n;
      out.v1 = big_n <= c.c1 * n ? r * r / big_n * detail::safe_log(2.0 * c.c1 * n / big_n) : 0.0;
      if (sigma > 0.0 && big_n <= c.c2 * n * n * sigma * sigma / (r * r))
        out.v2 = r * sigma / std::sqrt(big_n) *
                 std::sqrt(detail::safe_log(2.0 * c.c2 * n * sigma / (std::sqrt(big_n) * r)));
      else
        out.v2 = sigma * sigma * n / big_n;
      out.r_Q_pred = std::sqrt(out.v1);
      out.r_M_pred = std::sqrt(out.v2);
      out.formula_id = "persistence_cube";
      break;
    }
  }
  out.regime = out.r_M_pred > out.r_Q_pred ? Regime::noise_dominated : Regime::intrinsic;
  return out;
}

/// Default zeta_1 = kappa0 eps^{3/2}, zeta_2 = kappa0 eps and
/// theta = eps kappa0^2 rho(t1, t2) / 16 from small-ball constants.
struct ComplexityConstants {
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double theta = 0.0;
};

inline ComplexityConstants default_constants(const SmallBallParams& sb, double rho_value) {
  return {sb.kappa0 * std::pow(sb.eps, 1.5), sb.kappa0 * sb.eps,
          sb.eps * sb.kappa0 * sb.kappa0 * rho_value / 16.0};
}

}  // namespace calerm

#endif  // CALERM_COMPLEXITY_HPP
