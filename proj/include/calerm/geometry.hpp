#ifndef CALERM_GEOMETRY_HPP
#define CALERM_GEOMETRY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "calerm/error.hpp"

namespace calerm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class SetKind { full_space, l2_ball, l1_ball, l1_l2_intersection };

inline std::string_view to_string(SetKind k) {
  switch (k) {
    case SetKind::full_space: return "full_space";
    case SetKind::l2_ball: return "l2_ball";
    case SetKind::l1_ball: return "l1_ball";
    case SetKind::l1_l2_intersection: return "l1_l2_intersection";
  }
  return "unknown";
}

inline SetKind set_kind_from_string(std::string_view s) {
  if (s == "full_space") return SetKind::full_space;
  if (s == "l2_ball") return SetKind::l2_ball;
  if (s == "l1_ball") return SetKind::l1_ball;
  if (s == "l1_l2_intersection") return SetKind::l1_l2_intersection;
  throw ArgumentError("unknown constraint set kind '" + std::string(s) + "'");
}

/// Origin-centred convex symmetric index set T in R^n. `alpha` is the l1
/// radius and `r` the l2 radius; each is meaningful only for kinds that use it.
struct ConstraintSet {
  SetKind kind = SetKind::full_space;
  int dim = 1;
  double alpha = 0.0;
  double r = 0.0;

  static ConstraintSet full_space(int n) { return make(SetKind::full_space, n, 0.0, 0.0); }
  static ConstraintSet l2_ball(int n, double r) { return make(SetKind::l2_ball, n, 0.0, r); }
  static ConstraintSet l1_ball(int n, double alpha) {
    return make(SetKind::l1_ball, n, alpha, 0.0);
  }
  static ConstraintSet l1_l2(int n, double alpha, double r) {
    return make(SetKind::l1_l2_intersection, n, alpha, r);
  }

  bool has_l1() const {
    return kind == SetKind::l1_ball || kind == SetKind::l1_l2_intersection;
  }
  bool has_l2() const {
    return kind == SetKind::l2_ball || kind == SetKind::l1_l2_intersection;
  }
  bool bounded() const { return kind != SetKind::full_space; }

  void validate() const {
    if (dim < 1) throw ArgumentError("constraint set dimension must be positive");
    if (has_l1() && !(alpha > 0.0 && std::isfinite(alpha)))
      throw ArgumentError("constraint set alpha must be positive and finite");
    if (has_l2() && !(r > 0.0 && std::isfinite(r)))
      throw ArgumentError("constraint set r must be positive and finite");
  }

  bool operator==(const ConstraintSet& o) const {
    return kind == o.kind && dim == o.dim && (!has_l1() || alpha == o.alpha) &&
           (!has_l2() || r == o.r);
  }

 private:
  static ConstraintSet make(SetKind k, int n, double alpha, double r) {
    ConstraintSet s;
    s.kind = k;
    s.dim = n;
    s.alpha = alpha;
    s.r = r;
    s.validate();
    return s;
  }
};

namespace detail {

inline void require_dim(const ConstraintSet& set, Eigen::Index n) {
  if (n != set.dim)
    throw ArgumentError("vector dimension " + std::to_string(n) +
                        " does not match set dimension " + std::to_string(set.dim));
}

inline Vector soft_threshold(const Vector& p, double tau) {
  return p.unaryExpr([tau](double v) {
    const double a = std::abs(v) - tau;
    return a > 0.0 ? std::copysign(a, v) : 0.0;
  });
}

inline double soft_threshold_l2(const Vector& p, double tau) {
  double s = 0.0;
  for (double v : p) {
    const double a = std::abs(v) - tau;
    if (a > 0.0) s += a * a;
  }
  return std::sqrt(s);
}

// Sort-and-threshold projection onto {||x||_1 <= alpha}.
inline Vector project_l1(const Vector& p, double alpha) {
  if (p.lpNorm<1>() <= alpha) return p;
  std::vector<double> u(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) u[i] = std::abs(p[i]);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double candidate = (cumsum - alpha) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) tau = candidate;
  }
  Vector x = soft_threshold(p, tau);
  const double l1 = x.lpNorm<1>();
  if (l1 > alpha) x *= alpha / l1;
  return x;
}

inline Vector project_l2(const Vector& p, double r) {
  const double norm = p.norm();
  if (norm <= r) return p;
  return p * (r / norm);
}

// Projection onto {||x||_1 <= alpha, ||x||_2 <= r}. When both constraints
// bind, the solution is r * s/||s||_2 with s = soft_threshold(p, tau) and tau
// chosen so that ||s||_1 / ||s||_2 = alpha / r; that ratio is non-increasing
// in tau, so tau is found by bisection.
inline Vector project_l1_l2(const Vector& p, double alpha, double r) {
  const Vector q2 = project_l2(p, r);
  if (q2.lpNorm<1>() <= alpha) return q2;
  const Vector q1 = project_l1(p, alpha);
  if (q1.norm() <= r) return q1;

  const double target = alpha / r;
  double lo = 0.0;
  double hi = p.lpNorm<Eigen::Infinity>();
  auto ratio = [&p](double tau) {
    double l1 = 0.0, l2 = 0.0;
    for (double v : p) {
      const double a = std::abs(v) - tau;
      if (a > 0.0) {
        l1 += a;
        l2 += a * a;
      }
    }
    return l2 > 0.0 ? l1 / std::sqrt(l2) : 1.0;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (ratio(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  Vector s = soft_threshold(p, lo);
  const double norm = s.norm();
  if (norm == 0.0) return s;
  s *= r / norm;
  const double l1 = s.lpNorm<1>();
  if (l1 > alpha) s *= alpha / l1;
  return s;
}

}  // namespace detail

/// Euclidean projection onto the set.
inline Vector project(const ConstraintSet& set, const Vector& point) {
  detail::require_dim(set, point.size());
  switch (set.kind) {
    case SetKind::full_space: return point;
    case SetKind::l2_ball: return detail::project_l2(point, set.r);
    case SetKind::l1_ball: return detail::project_l1(point, set.alpha);
    case SetKind::l1_l2_intersection: return detail::project_l1_l2(point, set.alpha, set.r);
  }
  return point;
}

/// Membership up to an absolute tolerance on each norm constraint.
inline bool contains(const ConstraintSet& set, const Vector& t, double tol = 1e-12) {
  detail::require_dim(set, t.size());
  if (!t.allFinite()) return false;
  if (set.has_l1() && t.lpNorm<1>() > set.alpha + tol) return false;
  if (set.has_l2() && t.norm() > set.r + tol) return false;
  return true;
}

/// Largest s >= 0 with s * u in the set (+inf when unbounded along u).
inline double radial_limit(const ConstraintSet& set, const Vector& u) {
  detail::require_dim(set, u.size());
  double s = std::numeric_limits<double>::infinity();
  if (set.has_l1()) {
    const double l1 = u.lpNorm<1>();
    if (l1 > 0.0) s = std::min(s, set.alpha / l1);
  }
  if (set.has_l2()) {
    const double l2 = u.norm();
    if (l2 > 0.0) s = std::min(s, set.r / l2);
  }
  return s;
}

/// The set intersected with the origin-centred l2 ball of radius `radius`.
inline ConstraintSet localize(const ConstraintSet& set, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ArgumentError("localization radius must be positive and finite");
  switch (set.kind) {
    case SetKind::full_space: return ConstraintSet::l2_ball(set.dim, radius);
    case SetKind::l2_ball: return ConstraintSet::l2_ball(set.dim, std::min(set.r, radius));
    case SetKind::l1_ball: return ConstraintSet::l1_l2(set.dim, set.alpha, radius);
    case SetKind::l1_l2_intersection:
      return ConstraintSet::l1_l2(set.dim, set.alpha, std::min(set.r, radius));
  }
  return set;
}

namespace detail {

// sup over {||t||_1 <= alpha, ||t||_2 <= r} of <w, t>, as the infimal
// convolution min_{tau >= 0} alpha*tau + r*||soft_threshold(w, tau)||_2.
// The objective is convex and, between consecutive breakpoints |w|_(k+1) <=
// tau <= |w|_(k), equals alpha*tau + r*sqrt(sum_{j<=k} (a_j - tau)^2), whose
// stationary point is available in closed form. The minimum is taken over all
// breakpoints and clamped stationary points.
inline double support_l1_l2(const Vector& w, double alpha, double r) {
  std::vector<double> a(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) a[i] = std::abs(w[i]);
  std::sort(a.begin(), a.end(), std::greater<>());
  const std::size_t n = a.size();
  if (n == 0 || a[0] == 0.0) return 0.0;

  auto objective = [&](double tau) {
    double s = 0.0;
    for (double v : a) {
      if (v <= tau) break;
      s += (v - tau) * (v - tau);
    }
    return alpha * tau + r * std::sqrt(s);
  };

  double best = objective(0.0);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    s1 += a[k - 1];
    s2 += a[k - 1] * a[k - 1];
    const double upper = a[k - 1];
    const double lower = k < n ? a[k] : 0.0;
    best = std::min(best, objective(upper));
    if (upper <= lower) continue;
    const double kd = static_cast<double>(k);
    const double denom = r * r - alpha * alpha / kd;
    if (denom <= 0.0) continue;
    const double var = std::max(0.0, s2 - s1 * s1 / kd);
    const double u = alpha * std::sqrt(var / denom);
    const double tau = std::clamp((s1 - u) / kd, lower, upper);
    best = std::min(best, objective(tau));
  }
  return std::max(best, 0.0);
}

}  // namespace detail

/// sup_{t in set} <w, t>.
inline double support_value(const ConstraintSet& set, const Vector& w) {
  detail::require_dim(set, w.size());
  switch (set.kind) {
    case SetKind::full_space:
      throw UnboundedError("support function of the full space is unbounded");
    case SetKind::l2_ball: return set.r * w.norm();
    case SetKind::l1_ball: return set.alpha * w.lpNorm<Eigen::Infinity>();
    case SetKind::l1_l2_intersection: return detail::support_l1_l2(w, set.alpha, set.r);
  }
  return 0.0;
}

/// sup_{t in set} |<w, t>|. All supported sets are symmetric, so this equals
/// support_value; both directions are still evaluated.
inline double symmetric_support(const ConstraintSet& set, const Vector& w) {
  const double plus = support_value(set, w);
  if (set.kind == SetKind::l2_ball || set.kind == SetKind::l1_ball) return plus;
  return std::max(plus, support_value(set, Vector(-w)));
}

/// Euclidean diameter, +inf for the full space.
inline double diameter(const ConstraintSet& set) {
  switch (set.kind) {
    case SetKind::full_space: return std::numeric_limits<double>::infinity();
    case SetKind::l2_ball: return 2.0 * set.r;
    case SetKind::l1_ball: return 2.0 * set.alpha;
    case SetKind::l1_l2_intersection: return 2.0 * std::min(set.alpha, set.r);
  }
  return 0.0;
}

}  // namespace calerm

#endif  // CALERM_GEOMETRY_HPP
