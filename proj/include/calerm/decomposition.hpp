#ifndef CALERM_DECOMPOSITION_HPP
#define CALERM_DECOMPOSITION_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "calerm/error.hpp"
#include "calerm/geometry.hpp"
#include "calerm/losses.hpp"

namespace calerm {

/// Design matrix (rows X_i) and responses Y_i.
struct Sample {
  Matrix design;
  Vector responses;

  Sample() = default;
  Sample(Matrix x, Vector y) : design(std::move(x)), responses(std::move(y)) { validate(); }

  Eigen::Index size() const { return design.rows(); }
  Eigen::Index dim() const { return design.cols(); }

  void validate() const {
    if (design.rows() < 1 || design.cols() < 1)
      throw ArgumentError("sample needs N >= 1 rows and n >= 1 columns");
    if (responses.size() != design.rows())
      throw ArgumentError("sample responses length does not match design rows");
    if (!design.allFinite() || !responses.allFinite())
      throw ArgumentError("sample contains non-finite entries");
  }
};

/// Per-observation excess loss split into its multiplier (linear in h) and
/// quadratic (Bregman remainder) parts.
struct DecompositionTerms {
  Vector excess;
  Vector multiplier;
  Vector quadratic;
  Vector residuals_star;
};

struct EmpiricalMeans {
  double excess = 0.0;
  double multiplier = 0.0;
  double quadratic = 0.0;
};

/// Scalar kernel of the decomposition at residual xi and increment h.
struct PointTerms {
  double excess;
  double multiplier;
  double quadratic;
};

inline PointTerms decompose_point(const LossSpec& spec, double xi, double h) {
  const double base = loss_value(spec, xi);
  const double moved = loss_value(spec, xi + h);
  const double multiplier = loss_deriv(spec, xi) * h;
  // The integral of ell'(w) - ell'(xi) over [xi, xi + h] in closed form.
  const double quadratic = moved - base - multiplier;
  return {moved - base, multiplier, quadratic};
}

/// xi_i = <t_star, X_i> - Y_i and h_i = <t - t_star, X_i>.
inline DecompositionTerms decompose(const LossSpec& spec, const Vector& t, const Vector& t_star,
                                    const Sample& sample) {
  if (t.size() != sample.dim() || t_star.size() != sample.dim())
    throw ArgumentError("decompose: parameter dimension does not match the design");
  const Eigen::Index n_obs = sample.size();
  DecompositionTerms out;
  out.residuals_star = sample.design * t_star - sample.responses;
  const Vector h = sample.design * (t - t_star);
  out.excess.resize(n_obs);
  out.multiplier.resize(n_obs);
  out.quadratic.resize(n_obs);
  for (Eigen::Index i = 0; i < n_obs; ++i) {
    const PointTerms p = decompose_point(spec, out.residuals_star[i], h[i]);
    out.excess[i] = p.excess;
    out.multiplier[i] = p.multiplier;
    out.quadratic[i] = p.quadratic;
  }
  return out;
}

inline EmpiricalMeans empirical_means(const DecompositionTerms& terms) {
  EmpiricalMeans m;
  if (terms.excess.size() == 0) return m;
  m.excess = terms.excess.mean();
  m.multiplier = terms.multiplier.mean();
  m.quadratic = terms.quadratic.mean();
  return m;
}

/// Exclusion diagnostic for a candidate at L2 distance `h_norm` from the
/// target: holds when P_N Q >= theta * h_norm^2 and the centred multiplier
/// mean satisfies |P_N M - E M| <= (theta / 4) * max(h_norm^2, r^2).
/// `multiplier_expectation` is a Monte Carlo surrogate for E M supplied by
/// the caller (zero for independent symmetric noise).
inline bool check_exclusion(const DecompositionTerms& terms, double theta, double r,
                            double h_norm, double multiplier_expectation = 0.0) {
  const EmpiricalMeans m = empirical_means(terms);
  const double h2 = h_norm * h_norm;
  const bool quadratic_ok = m.quadratic >= theta * h2;
  const bool multiplier_ok =
      std::abs(m.multiplier - multiplier_expectation) <= 0.25 * theta * std::max(h2, r * r);
  return quadratic_ok && multiplier_ok;
}

}  // namespace calerm

#endif  // CALERM_DECOMPOSITION_HPP
