#ifndef CALERM_SMALLBALL_HPP
#define CALERM_SMALLBALL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "calerm/decomposition.hpp"
#include "calerm/error.hpp"
#include "calerm/geometry.hpp"
#include "calerm/parallel.hpp"

namespace calerm {

/// Small-ball constants: Pr(|Z| >= kappa0 ||Z||_L2) >= eps.
struct SmallBallParams {
  double kappa0 = 0.5;
  double eps = 0.1;

  void validate() const {
    if (!(kappa0 > 0.0)) throw ArgumentError("small-ball kappa0 must be positive");
    if (!(eps > 0.0 && eps < 1.0)) throw ArgumentError("small-ball eps must lie in (0, 1)");
  }
};

inline double empirical_l2(std::span<const double> draws) {
  if (draws.empty()) return 0.0;
  double s = 0.0;
  for (double z : draws) s += z * z;
  return std::sqrt(s / static_cast<double>(draws.size()));
}

inline double empirical_lp(std::span<const double> draws, double p) {
  if (draws.empty()) return 0.0;
  double s = 0.0;
  for (double z : draws) s += std::pow(std::abs(z), p);
  return std::pow(s / static_cast<double>(draws.size()), 1.0 / p);
}

/// Empirical Pr(|Z| >= kappa * ||Z||) for each kappa, with ||Z|| the
/// empirical L2 norm of the draws.
inline std::vector<double> smallball_curve(std::span<const double> draws,
                                           std::span<const double> kappa_grid) {
  if (draws.size() < 100) throw ArgumentError("smallball_curve needs at least 100 draws");
  const double l2 = empirical_l2(draws);
  if (l2 == 0.0) throw DegenerateError("smallball_curve: all draws are zero");
  std::vector<double> mags(draws.size());
  std::transform(draws.begin(), draws.end(), mags.begin(), [](double z) { return std::abs(z); });
  std::sort(mags.begin(), mags.end());
  const double m = static_cast<double>(mags.size());
  std::vector<double> out;
  out.reserve(kappa_grid.size());
  for (double kappa : kappa_grid) {
    const auto first = std::lower_bound(mags.begin(), mags.end(), kappa * l2);
    out.push_back(static_cast<double>(mags.end() - first) / m);
  }
  return out;
}

/// Paley-Zygmund applied to Z^2: kappa0 = sqrt(theta) and
/// eps = (1 - theta)^2 / (||Z||_4 / ||Z||_2)^4.
inline SmallBallParams paley_zygmund_certificate(double l4_over_l2, double theta) {
  if (!(theta > 0.0 && theta < 1.0))
    throw ArgumentError("paley_zygmund_certificate: theta must lie in (0, 1)");
  if (!(l4_over_l2 >= 1.0) || !std::isfinite(l4_over_l2))
    throw ArgumentError("paley_zygmund_certificate: L4/L2 ratio must be finite and >= 1");
  const double q = l4_over_l2 * l4_over_l2;
  return {std::sqrt(theta), (1.0 - theta) * (1.0 - theta) / (q * q)};
}

struct SmallBallCheck {
  bool pass = false;
  double min_value = 0.0;
  int directions_used = 0;
};

/// Draws a random direction u whose multiple r*u lies in the set. Mixed
/// sparsity keeps l1 sets reachable at radii beyond alpha/sqrt(n).
inline std::optional<Vector> feasible_direction(const ConstraintSet& set, double r, Rng& rng,
                                                int max_attempts = 1000) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> sparsity(1, set.dim);
  std::vector<int> idx(set.dim);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Vector u = Vector::Zero(set.dim);
    const int k = set.has_l1() ? sparsity(rng) : set.dim;
    for (int j = 0; j < set.dim; ++j) idx[j] = j;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int j = 0; j < k; ++j) u[idx[j]] = normal(rng);
    const double norm = u.norm();
    if (norm == 0.0) continue;
    u /= norm;
    if (radial_limit(set, u) >= r) return u;
  }
  return std::nullopt;
}

/// Evaluates (1/N) sum_i <u, X_i>^2 over random unit directions u with r*u in
/// the set and passes iff the minimum exceeds eps * kappa0^2 / 16. Under an
/// isotropic design ||<u, .>||_L2 = ||u||_2 = 1.
inline SmallBallCheck empirical_smallball_check(const Sample& sample, const ConstraintSet& set,
                                                double r, const SmallBallParams& params,
                                                int num_directions, std::uint64_t seed) {
  params.validate();
  if (sample.dim() != set.dim)
    throw ArgumentError("empirical_smallball_check: dimension mismatch");
  if (!(r > 0.0)) throw ArgumentError("empirical_smallball_check: r must be positive");
  if (num_directions < 1) throw ArgumentError("empirical_smallball_check: need >= 1 direction");
  Rng rng(seed);
  SmallBallCheck out;
  out.min_value = std::numeric_limits<double>::infinity();
  const double n_obs = static_cast<double>(sample.size());
  for (int d = 0; d < num_directions; ++d) {
    const auto u = feasible_direction(set, r, rng);
    if (!u) {
      if (out.directions_used == 0)
        throw ArgumentError("empirical_smallball_check: no feasible direction at norm r");
      break;
    }
    const double value = (sample.design * *u).squaredNorm() / n_obs;
    out.min_value = std::min(out.min_value, value);
    ++out.directions_used;
  }
  out.pass = out.min_value > params.eps * params.kappa0 * params.kappa0 / 16.0;
  return out;
}

/// Same check over an explicit list of unit directions (columns of `dirs`).
inline SmallBallCheck empirical_smallball_check(const Sample& sample, const Matrix& dirs,
                                                const SmallBallParams& params) {
  params.validate();
  if (dirs.rows() != sample.dim() || dirs.cols() < 1)
    throw ArgumentError("empirical_smallball_check: direction matrix has the wrong shape");
  SmallBallCheck out;
  const Matrix proj = sample.design * dirs;
  const Eigen::RowVectorXd values =
      proj.colwise().squaredNorm() / static_cast<double>(sample.size());
  out.min_value = values.minCoeff();
  out.directions_used = static_cast<int>(dirs.cols());
  out.pass = out.min_value > params.eps * params.kappa0 * params.kappa0 / 16.0;
  return out;
}

/// Checks Z*_k <= u (N/k)^{1/q} ||Z||_{L_r} for 1 <= k <= N/2, where Z*_k is
/// the k-th largest |Z_i|. `lr_norm` defaults to the empirical L_r norm.
inline bool order_statistics_check(std::span<const double> draws, double q, double r_moment,
                                   double u, std::optional<double> lr_norm = std::nullopt) {
  if (!(q >= 1.0) || !(r_moment >= q) || !(u >= 2.0))
    throw ArgumentError("order_statistics_check: need q >= 1, r >= q and u >= 2");
  const double norm = lr_norm ? *lr_norm : empirical_lp(draws, r_moment);
  if (!std::isfinite(norm)) throw ArgumentError("order_statistics_check: L_r norm is infinite");
  std::vector<double> mags(draws.size());
  std::transform(draws.begin(), draws.end(), mags.begin(), [](double z) { return std::abs(z); });
  std::sort(mags.begin(), mags.end(), std::greater<>());
  const double n_obs = static_cast<double>(mags.size());
  const std::size_t kmax = std::max<std::size_t>(1, mags.size() / 2);
  for (std::size_t k = 1; k <= kmax && k <= mags.size(); ++k) {
    const double bound = u * std::pow(n_obs / static_cast<double>(k), 1.0 / q) * norm;
    if (mags[k - 1] > bound) return false;
  }
  return true;
}

/// Fraction of draws with |Z_i| > c2 * eps^{-1/2} * ||Z||_L2.
inline double large_value_fraction(std::span<const double> draws, double l2_norm, double eps,
                                   double c2 = 2.0) {
  if (draws.empty()) return 0.0;
  const double bound = c2 * l2_norm / std::sqrt(eps);
  const auto count = std::count_if(draws.begin(), draws.end(),
                                   [bound](double z) { return std::abs(z) > bound; });
  return static_cast<double>(count) / static_cast<double>(draws.size());
}

/// Number of draws with kappa0 ||Z|| <= |Z_j| <= c2 ||Z|| / sqrt(eps).
inline std::size_t two_sided_count(std::span<const double> draws, double l2_norm,
                                   const SmallBallParams& params, double c2 = 2.0) {
  const double lo = params.kappa0 * l2_norm;
  const double hi = c2 * l2_norm / std::sqrt(params.eps);
  return static_cast<std::size_t>(std::count_if(draws.begin(), draws.end(), [=](double z) {
    const double a = std::abs(z);
    return a >= lo && a <= hi;
  }));
}

/// Noise anti-concentration diagnostic: empirical Pr(|W| <= kappa1 ||W||_L2).
inline double noise_smallball_mass(std::span<const double> draws, double kappa1) {
  const double l2 = empirical_l2(draws);
  if (l2 == 0.0) throw DegenerateError("noise_smallball_mass: all draws are zero");
  const auto count = std::count_if(draws.begin(), draws.end(),
                                   [&](double w) { return std::abs(w) <= kappa1 * l2; });
  return static_cast<double>(count) / static_cast<double>(draws.size());
}

}  // namespace calerm

#endif  // CALERM_SMALLBALL_HPP
