#ifndef CALERM_SYNTHDATA_HPP
#define CALERM_SYNTHDATA_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <string_view>

#include "calerm/decomposition.hpp"
#include "calerm/error.hpp"
#include "calerm/geometry.hpp"
#include "calerm/parallel.hpp"

namespace calerm {

enum class DesignFamily { gaussian_isotropic, rademacher_cube, student_t_isotropic };

inline std::string_view to_string(DesignFamily f) {
  switch (f) {
    case DesignFamily::gaussian_isotropic: return "gaussian_isotropic";
    case DesignFamily::rademacher_cube: return "rademacher_cube";
    case DesignFamily::student_t_isotropic: return "student_t_isotropic";
  }
  return "unknown";
}

inline DesignFamily design_family_from_string(std::string_view s) {
  if (s == "gaussian_isotropic") return DesignFamily::gaussian_isotropic;
  if (s == "rademacher_cube") return DesignFamily::rademacher_cube;
  if (s == "student_t_isotropic") return DesignFamily::student_t_isotropic;
  throw ArgumentError("unknown design kind '" + std::string(s) + "'");
}

/// Isotropic design with independent mean-zero unit-variance coordinates.
struct DesignKind {
  DesignFamily family = DesignFamily::gaussian_isotropic;
  int dim = 1;
  double df = 5.0;  // student_t only

  void validate() const {
    if (dim < 1) throw ArgumentError("design dimension must be positive");
    if (family == DesignFamily::student_t_isotropic && !(df > 2.0))
      throw ArgumentError("student-t design needs df > 2 for finite variance");
  }

  bool operator==(const DesignKind& o) const {
    return family == o.family && dim == o.dim &&
           (family != DesignFamily::student_t_isotropic || df == o.df);
  }
};

enum class NoiseFamily { none, gaussian, student_t, symmetrized_pareto };

inline std::string_view to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::none: return "none";
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::student_t: return "student_t";
    case NoiseFamily::symmetrized_pareto: return "symmetrized_pareto";
  }
  return "unknown";
}

inline NoiseFamily noise_family_from_string(std::string_view s) {
  if (s == "none") return NoiseFamily::none;
  if (s == "gaussian") return NoiseFamily::gaussian;
  if (s == "student_t") return NoiseFamily::student_t;
  if (s == "symmetrized_pareto" || s == "pareto") return NoiseFamily::symmetrized_pareto;
  throw ArgumentError("unknown noise kind '" + std::string(s) + "'");
}

/// Symmetric noise law. `scale` is sigma for gaussian, the t scale for
/// student_t and the Pareto threshold s (density prop. to |x|^{-a-1} on |x| >= s).
struct NoiseKind {
  NoiseFamily family = NoiseFamily::none;
  double scale = 0.0;
  double df = 5.0;          // student_t
  double tail_index = 3.0;  // symmetrized_pareto

  static NoiseKind none() { return {}; }
  static NoiseKind gaussian(double sigma) { return {NoiseFamily::gaussian, sigma, 5.0, 3.0}; }
  static NoiseKind student_t(double df, double scale) {
    return {NoiseFamily::student_t, scale, df, 3.0};
  }
  static NoiseKind symmetrized_pareto(double a, double scale) {
    return {NoiseFamily::symmetrized_pareto, scale, 5.0, a};
  }

  void validate() const {
    if (family == NoiseFamily::none) return;
    if (!(scale >= 0.0) || !std::isfinite(scale))
      throw ArgumentError("noise scale must be finite and nonnegative");
    if (family == NoiseFamily::student_t && !(df > 2.0))
      throw ArgumentError("student-t noise needs df > 2 for finite variance");
    if (family == NoiseFamily::symmetrized_pareto && !(tail_index > 2.0))
      throw ArgumentError("pareto noise needs tail index > 2 for finite variance");
  }

  bool operator==(const NoiseKind& o) const = default;
};

struct NoiseMoments {
  double l2 = 0.0;
  double l4 = 0.0;  // +inf when the fourth moment diverges
};

/// Exact L2 and L4 norms of the noise law.
inline NoiseMoments noise_moments(const NoiseKind& noise) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double s = noise.scale;
  switch (noise.family) {
    case NoiseFamily::none: return {0.0, 0.0};
    case NoiseFamily::gaussian: return {s, s * std::pow(3.0, 0.25)};
    case NoiseFamily::student_t: {
      const double v = noise.df;
      if (!(v > 2.0)) return {inf, inf};
      const double l2 = s * std::sqrt(v / (v - 2.0));
      const double l4 =
          v > 4.0 ? s * std::pow(3.0 * v * v / ((v - 2.0) * (v - 4.0)), 0.25) : inf;
      return {l2, l4};
    }
    case NoiseFamily::symmetrized_pareto: {
      const double a = noise.tail_index;
      if (!(a > 2.0)) return {inf, inf};
      const double l2 = s * std::sqrt(a / (a - 2.0));
      const double l4 = a > 4.0 ? s * std::pow(a / (a - 4.0), 0.25) : inf;
      return {l2, l4};
    }
  }
  return {0.0, 0.0};
}

/// Noise of the given family rescaled so that its L2 norm equals `sigma`.
inline NoiseKind noise_with_l2(NoiseFamily family, double sigma, double df = 5.0,
                               double tail_index = 3.0) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw ArgumentError("noise level sigma must be finite and nonnegative");
  NoiseKind k;
  k.family = family;
  k.df = df;
  k.tail_index = tail_index;
  k.scale = 1.0;
  if (family == NoiseFamily::none) {
    k.scale = 0.0;
    return k;
  }
  k.validate();
  k.scale = sigma / noise_moments(k).l2;
  return k;
}

/// L4/L2 ratio of a single design coordinate.
inline double design_l4_over_l2(const DesignKind& d) {
  switch (d.family) {
    case DesignFamily::gaussian_isotropic: return std::pow(3.0, 0.25);
    case DesignFamily::rademacher_cube: return 1.0;
    case DesignFamily::student_t_isotropic:
      if (!(d.df > 4.0)) return std::numeric_limits<double>::infinity();
      return std::pow(3.0 * (d.df - 2.0) / (d.df - 4.0), 0.25);
  }
  return 1.0;
}

/// Linear target Y = <t0, X> + W. With `dependent_sign` set (experimental)
/// the residual becomes xi = sign(<t0, X>) |W|, which is not independent of X.
struct TargetSpec {
  Vector t0;
  NoiseKind noise;
  bool dependent_sign = false;
};

namespace detail {

inline double student_t_draw(Rng& rng, double df) {
  std::normal_distribution<double> normal;
  std::chi_squared_distribution<double> chi2(df);
  return normal(rng) / std::sqrt(chi2(rng) / df);
}

}  // namespace detail

inline double sample_noise(const NoiseKind& noise, Rng& rng) {
  switch (noise.family) {
    case NoiseFamily::none: return 0.0;
    case NoiseFamily::gaussian: return noise.scale * std::normal_distribution<double>()(rng);
    case NoiseFamily::student_t: return noise.scale * detail::student_t_draw(rng, noise.df);
    case NoiseFamily::symmetrized_pareto: {
      // Inverse CDF of the magnitude, then an independent sign.
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const double u = 1.0 - unif(rng);  // (0, 1]
      const double mag = noise.scale * std::pow(u, -1.0 / noise.tail_index);
      return std::bernoulli_distribution(0.5)(rng) ? mag : -mag;
    }
  }
  return 0.0;
}

/// Fills `row` with one draw of X.
inline void sample_design_row(const DesignKind& design, Rng& rng, Eigen::Ref<Vector> row) {
  switch (design.family) {
    case DesignFamily::gaussian_isotropic: {
      std::normal_distribution<double> normal;
      for (Eigen::Index j = 0; j < row.size(); ++j) row[j] = normal(rng);
      break;
    }
    case DesignFamily::rademacher_cube: {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index j = 0; j < row.size(); ++j) row[j] = coin(rng) ? 1.0 : -1.0;
      break;
    }
    case DesignFamily::student_t_isotropic: {
      const double norm = std::sqrt((design.df - 2.0) / design.df);
      for (Eigen::Index j = 0; j < row.size(); ++j)
        row[j] = norm * detail::student_t_draw(rng, design.df);
      break;
    }
  }
}

inline Matrix sample_design(const DesignKind& design, Eigen::Index n_obs, Rng& rng) {
  Matrix x(n_obs, design.dim);
  Vector row(design.dim);
  for (Eigen::Index i = 0; i < n_obs; ++i) {
    sample_design_row(design, rng, row);
    x.row(i) = row.transpose();
  }
  return x;
}

/// Response for one design row and one noise draw.
inline double make_response(const TargetSpec& target, const Vector& x, double w) {
  const double signal = target.t0.dot(x);
  if (target.dependent_sign) {
    const double sign = signal > 0.0 ? 1.0 : (signal < 0.0 ? -1.0 : 0.0);
    return signal - sign * std::abs(w);
  }
  return signal + w;
}

/// N i.i.d. rows X_i and Y_i = <t0, X_i> + W_i with W independent of X.
/// Rows are drawn first, then the noise, from one generator seeded by `seed`.
inline Sample sample_dataset(const DesignKind& design, const TargetSpec& target,
                             Eigen::Index n_obs, std::uint64_t seed) {
  design.validate();
  target.noise.validate();
  if (target.t0.size() != design.dim)
    throw ArgumentError("target t0 dimension does not match the design");
  if (n_obs < 1) throw ArgumentError("sample size must be >= 1");
  Rng rng(seed);
  Matrix x = sample_design(design, n_obs, rng);
  Vector y(n_obs);
  for (Eigen::Index i = 0; i < n_obs; ++i)
    y[i] = make_response(target, x.row(i).transpose(), sample_noise(target.noise, rng));
  return Sample(std::move(x), std::move(y));
}

/// CSV with header x_1..x_n,y.
inline void write_dataset_csv(std::ostream& os, const Sample& sample) {
  for (Eigen::Index j = 0; j < sample.dim(); ++j) os << "x_" << (j + 1) << ',';
  os << "y\n";
  char buf[40];
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    for (Eigen::Index j = 0; j < sample.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", sample.design(i, j));
      os << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", sample.responses[i]);
    os << buf << '\n';
  }
}

}  // namespace calerm

#endif  // CALERM_SYNTHDATA_HPP
