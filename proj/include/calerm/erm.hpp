#ifndef CALERM_ERM_HPP
#define CALERM_ERM_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "calerm/decomposition.hpp"
#include "calerm/error.hpp"
#include "calerm/geometry.hpp"
#include "calerm/losses.hpp"

namespace calerm {

enum class StepRule { fixed_inverse_smoothness, backtracking };

inline std::string_view to_string(StepRule s) {
  return s == StepRule::backtracking ? "backtracking" : "fixed_inverse_smoothness";
}

inline StepRule step_rule_from_string(std::string_view s) {
  if (s == "backtracking") return StepRule::backtracking;
  if (s == "fixed_inverse_smoothness") return StepRule::fixed_inverse_smoothness;
  throw ArgumentError("unknown step rule '" + std::string(s) + "'");
}

struct SolverOptions {
  int max_iters = 5000;
  double tol = 1e-10;
  StepRule step_rule = StepRule::backtracking;
  double backtracking_shrink = 0.5;
  // Squared loss over the full space is solved by conjugate gradient on the
  // normal equations unless this is cleared.
  bool least_squares_fast_path = true;

  void validate() const {
    if (max_iters < 1) throw ArgumentError("solver max_iters must be >= 1");
    if (!(tol > 0.0)) throw ArgumentError("solver tol must be positive");
    if (!(backtracking_shrink > 0.0 && backtracking_shrink < 1.0))
      throw ArgumentError("solver backtracking_shrink must lie in (0, 1)");
  }

  bool operator==(const SolverOptions&) const = default;
};

struct FitResult {
  Vector t_hat;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// (1/N) sum_i ell(<t, X_i> - Y_i).
inline double empirical_risk(const LossSpec& spec, const Vector& t, const Sample& sample) {
  if (t.size() != sample.dim())
    throw ArgumentError("empirical_risk: parameter dimension does not match the design");
  const Vector residual = sample.design * t - sample.responses;
  double sum = 0.0;
  for (double v : residual) sum += loss_value(spec, v);
  return sum / static_cast<double>(sample.size());
}

namespace detail {

inline Vector risk_gradient(const LossSpec& spec, const Vector& t, const Sample& sample) {
  Vector residual = sample.design * t - sample.responses;
  for (double& v : residual) v = loss_deriv(spec, v);
  return sample.design.transpose() * residual / static_cast<double>(sample.size());
}

// Largest eigenvalue of X^T X / N by 50 power iterations from the all-ones start.
inline double gram_top_eigenvalue(const Matrix& x) {
  const double n_obs = static_cast<double>(x.rows());
  Vector v = Vector::Ones(x.cols()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    Vector w = x.transpose() * (x * v) / n_obs;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    lambda = v.dot(w);
    v = w / norm;
  }
  return std::max(lambda, 0.0);
}

// Conjugate gradient on X^T X t = X^T Y.
inline FitResult least_squares_cg(const Sample& sample, const Vector& t_init, int max_iters) {
  const Matrix& x = sample.design;
  Vector t = t_init;
  Vector r = x.transpose() * (sample.responses - x * t);
  Vector p = r;
  double rs = r.squaredNorm();
  const double stop = 1e-24 * std::max(1.0, (x.transpose() * sample.responses).squaredNorm());
  FitResult out;
  int it = 0;
  for (; it < std::max(max_iters, 4 * static_cast<int>(x.cols())) && rs > stop; ++it) {
    const Vector ap = x.transpose() * (x * p);
    const double denom = p.dot(ap);
    if (denom <= 0.0) break;
    const double step = rs / denom;
    t += step * p;
    r -= step * ap;
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  out.t_hat = std::move(t);
  out.iterations = it;
  out.converged = rs <= stop * 1e4;
  return out;
}

}  // namespace detail

/// Empirical risk minimizer over `set` by projected gradient descent.
inline FitResult fit(const LossSpec& spec, const ConstraintSet& set, const Sample& sample,
                     const SolverOptions& opts = {}, std::optional<Vector> t_init = std::nullopt) {
  opts.validate();
  if (sample.dim() != set.dim)
    throw ArgumentError("fit: design dimension does not match the constraint set");
  Vector t = t_init ? *t_init : Vector::Zero(set.dim);
  if (t.size() != set.dim) throw ArgumentError("fit: t_init has the wrong dimension");
  if (!contains(set, t, 1e-10)) throw ArgumentError("fit: t_init is infeasible");

  double f = empirical_risk(spec, t, sample);
  if (!std::isfinite(f)) throw NumericError("fit: non-finite objective at t_init");

  if (spec.kind == LossKind::squared && set.kind == SetKind::full_space &&
      opts.least_squares_fast_path) {
    FitResult cg = detail::least_squares_cg(sample, t, opts.max_iters);
    cg.objective = empirical_risk(spec, cg.t_hat, sample);
    if (!std::isfinite(cg.objective)) throw NumericError("fit: non-finite objective");
    if (cg.objective > f) {
      cg.t_hat = t;
      cg.objective = f;
    }
    return cg;
  }

  const double smooth = loss_smoothness(spec) * detail::gram_top_eigenvalue(sample.design);
  const double base_step = smooth > 0.0 ? 1.0 / smooth : 1.0;
  double step = base_step;

  FitResult out;
  out.t_hat = t;
  out.objective = f;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    if (f == 0.0) {
      out.converged = true;
      break;
    }
    const Vector grad = detail::risk_gradient(spec, t, sample);
    Vector next;
    double f_next;
    if (opts.step_rule == StepRule::fixed_inverse_smoothness) {
      next = project(set, t - base_step * grad);
      f_next = empirical_risk(spec, next, sample);
    } else {
      step = std::min(2.0 * step, 1e6 * base_step);
      for (;;) {
        next = project(set, t - step * grad);
        f_next = empirical_risk(spec, next, sample);
        const Vector d = next - t;
        const double model = f + grad.dot(d) + 0.5 / step * d.squaredNorm();
        if (f_next <= model + 1e-15 * std::abs(f) || step < 1e-12 * base_step) break;
        step *= opts.backtracking_shrink;
      }
    }
    if (!std::isfinite(f_next)) throw NumericError("fit: non-finite objective encountered");
    const double moved = (next - t).norm();
    const double decrease = f - f_next;
    t = std::move(next);
    f = f_next;
    if (f < out.objective) {
      out.t_hat = t;
      out.objective = f;
    }
    if ((decrease >= 0.0 && decrease < opts.tol * std::abs(f + decrease)) ||
        moved <= 1e-15 * (1.0 + t.norm())) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.iterations = it;
  out.objective = empirical_risk(spec, out.t_hat, sample);
  return out;
}

}  // namespace calerm

#endif  // CALERM_ERM_HPP
