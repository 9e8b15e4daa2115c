#ifndef CALERM_LOSSES_HPP
#define CALERM_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "calerm/error.hpp"

namespace calerm {

enum class LossKind { squared, huber, logistic };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::squared: return "squared";
    case LossKind::huber: return "huber";
    case LossKind::logistic: return "logistic";
  }
  return "unknown";
}

inline LossKind loss_kind_from_string(std::string_view s) {
  if (s == "squared") return LossKind::squared;
  if (s == "huber") return LossKind::huber;
  if (s == "logistic") return LossKind::logistic;
  throw ArgumentError("unknown loss kind '" + std::string(s) + "'");
}

/// An even, convex loss with ell(0) = 0. `gamma` is the Huber kink and is
/// ignored for the other kinds.
struct LossSpec {
  LossKind kind = LossKind::squared;
  double gamma = 1.0;

  static LossSpec squared() { return {LossKind::squared, 1.0}; }
  static LossSpec logistic() { return {LossKind::logistic, 1.0}; }
  static LossSpec huber(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw ArgumentError("huber gamma must be positive and finite");
    return {LossKind::huber, gamma};
  }

  bool operator==(const LossSpec& o) const {
    return kind == o.kind && (kind != LossKind::huber || gamma == o.gamma);
  }
};

namespace detail {

inline void require_finite(double t) {
  if (!std::isfinite(t)) throw DomainError("loss evaluated at a non-finite point");
}

// log(1 + exp(-|t|)) without overflow.
inline double log1p_exp_neg_abs(double t) { return std::log1p(std::exp(-std::abs(t))); }

}  // namespace detail

/// ell(t). The logistic branch uses ell(t) = 2 log cosh(t/2), evaluated as
/// 2 log1p(2 sinh^2(t/4)) near zero and as |t| - log 4 + 2 log1p(e^{-|t|})
/// elsewhere; both are the softplus form -log 4 - t + 2 softplus(t).
inline double loss_value(const LossSpec& spec, double t) {
  detail::require_finite(t);
  switch (spec.kind) {
    case LossKind::squared:
      return t * t;
    case LossKind::huber: {
      const double a = std::abs(t);
      return a <= spec.gamma ? 0.5 * t * t : spec.gamma * a - 0.5 * spec.gamma * spec.gamma;
    }
    case LossKind::logistic: {
      const double a = std::abs(t);
      if (a < 8.0) {
        const double s = std::sinh(0.25 * a);
        return 2.0 * std::log1p(2.0 * s * s);
      }
      return a - 2.0 * std::numbers::ln2 + 2.0 * detail::log1p_exp_neg_abs(a);
    }
  }
  return 0.0;
}

/// ell'(t); logistic is tanh(t/2) = 1 - 2/(e^t + 1).
inline double loss_deriv(const LossSpec& spec, double t) {
  detail::require_finite(t);
  switch (spec.kind) {
    case LossKind::squared:
      return 2.0 * t;
    case LossKind::huber:
      return std::abs(t) <= spec.gamma ? t : std::copysign(spec.gamma, t);
    case LossKind::logistic:
      return std::tanh(0.5 * t);
  }
  return 0.0;
}

/// ell''(t). Huber is 0 at the kink |t| = gamma.
inline double loss_second_deriv(const LossSpec& spec, double t) {
  detail::require_finite(t);
  switch (spec.kind) {
    case LossKind::squared:
      return 2.0;
    case LossKind::huber:
      return std::abs(t) < spec.gamma ? 1.0 : 0.0;
    case LossKind::logistic: {
      const double e = std::exp(-std::abs(t));
      return 2.0 * e / ((1.0 + e) * (1.0 + e));
    }
  }
  return 0.0;
}

/// sup_t ell''(t), the smoothness constant of the loss.
inline double loss_smoothness(const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::squared: return 2.0;
    case LossKind::huber: return 1.0;
    case LossKind::logistic: return 0.5;
  }
  return 0.0;
}

/// Lipschitz constant of ell on the whole line (infinite for squared).
inline double loss_lipschitz(const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::squared: return std::numeric_limits<double>::infinity();
    case LossKind::huber: return spec.gamma;
    case LossKind::logistic: return 1.0;
  }
  return 0.0;
}

/// Local strong-convexity profile: inf of ell'' over [t1, t2] away from kinks.
/// Closed form per loss since ell'' is constant or non-increasing on t >= 0.
inline double rho(const LossSpec& spec, double t1, double t2) {
  detail::require_finite(t1);
  detail::require_finite(t2);
  if (t1 < 0.0 || t1 > t2) throw ArgumentError("rho requires 0 <= t1 <= t2");
  switch (spec.kind) {
    case LossKind::squared:
      return 2.0;
    case LossKind::huber:
      return t2 < spec.gamma ? 1.0 : 0.0;
    case LossKind::logistic:
      return loss_second_deriv(spec, t2);
  }
  return 0.0;
}

/// Huber with gamma = c0 * max(sigma_estimate, r_q).
inline LossSpec calibrate_huber(double sigma_estimate, double r_q, double c0 = 1.0) {
  if (!(sigma_estimate >= 0.0) || !(r_q >= 0.0) || !std::isfinite(sigma_estimate) ||
      !std::isfinite(r_q))
    throw ArgumentError("calibrate_huber: scales must be finite and nonnegative");
  if (!(c0 > 0.0)) throw ArgumentError("calibrate_huber: c0 must be positive");
  const double scale = std::max(sigma_estimate, r_q);
  if (scale == 0.0)
    throw CalibrationError("calibrate_huber: noise level and r_Q are both zero");
  return LossSpec::huber(c0 * scale);
}

}  // namespace calerm

#endif  // CALERM_LOSSES_HPP
