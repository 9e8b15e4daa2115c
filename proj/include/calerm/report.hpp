#ifndef CALERM_REPORT_HPP
#define CALERM_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "calerm/complexity.hpp"
#include "calerm/csv.hpp"
#include "calerm/experiments.hpp"
#include "calerm/smallball.hpp"
#include "calerm/svg.hpp"
#include "calerm/synthdata.hpp"

namespace calerm {

namespace detail {

inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

inline std::string sweep_param_name(const ExperimentConfig& cfg) {
  return cfg.sweep ? std::string(to_string(cfg.sweep->parameter)) : "none";
}

inline std::string noise_name(const Cell& cell) {
  return std::string(to_string(cell.noise.family));
}

inline double gamma_of(const LossSpec& loss) { return loss.kind == LossKind::huber ? loss.gamma : nan; }

inline double alpha_of(const Cell& cell) { return cell.set.has_l1() ? cell.set.alpha : nan; }

inline std::vector<std::string> cell_prefix(const ExperimentConfig& cfg, const Cell& cell) {
  return {cfg.experiment_id, sweep_param_name(cfg), csv::number(cell.sweep_value)};
}

}  // namespace detail

// ---------------------------------------------------------------- results --

inline void write_results_csv(std::ostream& os, const ExperimentResult& res) {
  csv::write_row(os, {"experiment_id", "sweep_param", "sweep_value", "trial", "seed", "loss_kind", "gamma",
                      "N", "n", "alpha", "sigma_l2", "noise_kind", "est_error_l2", "excess_risk",
                      "converged", "runtime_ms", "flags"});
  const auto& cfg = res.config;
  for (const auto& t : res.trials) {
    const Cell& cell = res.cells[t.cell];
    auto row = detail::cell_prefix(cfg, cell);
    row.insert(row.end(),
               {csv::number(t.trial), csv::number(t.seed), t.loss_label, csv::number(detail::gamma_of(t.loss)),
                csv::number(cell.N), csv::number(cell.n), csv::number(detail::alpha_of(cell)),
                csv::number(cell.sigma), detail::noise_name(cell), csv::number(t.est_error_l2),
                csv::number(t.excess_risk), csv::boolean(t.converged),
                cfg.record_runtime ? csv::number(t.runtime_ms) : "NA", csv::join(t.flags, ';')});
    csv::write_row(os, row);
  }
}

inline void write_summary_csv(std::ostream& os, const ExperimentResult& res) {
  csv::write_row(os, {"experiment_id", "sweep_param", "sweep_value", "loss_kind", "N", "n", "alpha",
                      "sigma_l2", "trials", "flagged", "median", "q25", "q75", "q99",
                      "median_excess_risk", "median_gamma", "r_q"});
  for (const auto& s : res.summaries) {
    const Cell& cell = res.cells[s.cell];
    auto row = detail::cell_prefix(res.config, cell);
    row.insert(row.end(),
               {s.loss_label, csv::number(cell.N), csv::number(cell.n), csv::number(detail::alpha_of(cell)),
                csv::number(cell.sigma), csv::number(s.trials), csv::number(s.flagged), csv::number(s.median),
                csv::number(s.q25), csv::number(s.q75), csv::number(s.q99), csv::number(s.median_excess_risk),
                csv::number(s.median_gamma), csv::number(res.r_q_used[s.cell])});
    csv::write_row(os, row);
  }
}

inline void write_rate_fit_csv(std::ostream& os, const ExperimentConfig& cfg, const RateFitResult& r) {
  csv::write_row(os, {"experiment_id", "loss_kind", "slope", "intercept", "r2", "points", "degenerate"});
  for (const auto& f : r.fits)
    csv::write_row(os, {cfg.experiment_id, f.loss_label, csv::number(f.slope), csv::number(f.intercept),
                        csv::number(f.r2), csv::number(f.points), csv::boolean(f.degenerate)});
}

inline void write_comparison_csv(std::ostream& os, const ExperimentConfig& cfg, const LossComparison& c) {
  csv::write_row(os, {"experiment_id", "sweep_param", "sweep_value", "loss_kind", "median", "q99",
                      "q99_ratio_squared_over_huber", "median_rel_diff", "robust", "margin"});
  for (const auto& row : c.rows) {
    const Cell& cell = c.result.cells[row.cell];
    const bool have = row.cell < c.q99_ratio.size();
    auto out = detail::cell_prefix(cfg, cell);
    out.insert(out.end(), {row.loss_label, csv::number(row.median), csv::number(row.q99),
                           csv::number(have ? c.q99_ratio[row.cell] : detail::nan),
                           csv::number(have ? c.median_rel_diff[row.cell] : detail::nan),
                           have ? csv::boolean(c.robust[row.cell]) : "NA", csv::number(cfg.margin)});
    csv::write_row(os, out);
  }
}

inline void write_persistence_csv(std::ostream& os, const ExperimentConfig& cfg, const PersistenceResult& p) {
  csv::write_row(os, {"experiment_id", "loss_kind", "n", "N", "alpha", "median_sq_error", "q99_sq_error",
                      "rho_N", "v1", "v2", "ratio_optimal", "ratio_classical", "shape_ok"});
  for (const auto& r : p.rows)
    csv::write_row(os, {cfg.experiment_id, r.loss_label, csv::number(r.n), csv::number(r.N),
                        csv::number(r.alpha), csv::number(r.median_sq_error), csv::number(r.q99_sq_error),
                        csv::number(r.rho_N), csv::number(r.v1), csv::number(r.v2),
                        csv::number(r.ratio_optimal), csv::number(r.ratio_classical),
                        csv::boolean(p.shape_ok.at(r.loss_label))});
}

/// Median error against the sweep value, one curve per loss.
inline void write_summary_svg(std::ostream& os, const ExperimentResult& res) {
  std::vector<svg::Series> series;
  for (const auto& choice : res.config.losses) {
    svg::Series s;
    s.label = choice.label();
    for (const auto& sum : res.summaries) {
      if (sum.loss_label != s.label) continue;
      const double x = res.cells[sum.cell].sweep_value;
      s.x.push_back(std::isnan(x) ? static_cast<double>(sum.cell) : x);
      s.y.push_back(sum.median);
    }
    series.push_back(std::move(s));
  }
  const std::string x_label = res.config.sweep ? std::string(to_string(res.config.sweep->parameter)) : "cell";
  svg::line_plot(os, series, res.config.experiment_id + ": median estimation error", x_label,
                 "median ||t_hat - t0||_2");
}

// -------------------------------------------------------------------- fit --

struct FitReport {
  Cell cell;
  std::vector<TrialResult> fits;
  double r_q_used = 0.0;
};

/// Fits every configured loss on the dataset of cell 0, trial 0.
inline FitReport run_fit(ExperimentConfig cfg, unsigned threads) {
  cfg.validate();
  FitReport out;
  out.cell = expand_cells(cfg).front();
  const bool need_rq = std::any_of(cfg.losses.begin(), cfg.losses.end(),
                                   [](const LossChoice& l) { return l.huber_auto; });
  if (cfg.complexity.r_q)
    out.r_q_used = *cfg.complexity.r_q;
  else if (need_rq)
    out.r_q_used = estimate_r_q(cfg.complexity, out.cell, cfg.master_seed, threads).value;
  cfg.holdout = 0;
  out.fits = run_trial(cfg, out.cell, 0, out.r_q_used);
  return out;
}

inline void write_fit_csv(std::ostream& os, const FitReport& f) {
  std::vector<std::string> header{"loss_kind", "gamma", "objective", "iterations", "converged",
                                  "est_error_l2", "flags"};
  for (int j = 0; j < f.cell.n; ++j) header.push_back("t_" + std::to_string(j + 1));
  csv::write_row(os, header);
  for (const auto& t : f.fits) {
    std::vector<std::string> row{t.loss_label, csv::number(detail::gamma_of(t.loss)), csv::number(t.objective),
                                 csv::number(t.iterations), csv::boolean(t.converged),
                                 csv::number(t.est_error_l2), csv::join(t.flags, ';')};
    for (int j = 0; j < f.cell.n; ++j) row.push_back(csv::number(t.t_hat[j]));
    csv::write_row(os, row);
  }
}

// ------------------------------------------------------------- complexity --

struct ComplexityRow {
  std::size_t cell = 0;
  std::string loss_label;
  LossSpec loss;
  ResolvedConstants constants;
  double noise_l2 = 0.0;
  double lprime_l2 = 0.0;
  RQEstimate rq;
  FixedPointResult rm_prime;
  double r0_value = 0.0;
  FixedPointResult rm_total;
  std::optional<FixedPointResult> kbar;  // absent when the loss is not Lipschitz
  double k_F = detail::nan;              // absent for unbounded sets
  double k_F_sqrt = detail::nan;
};

/// Fixed points per (cell, loss). Losses calibrated from data use the
/// trial-0 dataset of the cell.
inline std::vector<ComplexityRow> compute_complexity(const ExperimentConfig& cfg, unsigned threads,
                                                     std::vector<Cell>* cells_out = nullptr) {
  cfg.validate();
  const auto cells = expand_cells(cfg);
  if (cells_out) *cells_out = cells;
  const auto& cs = cfg.complexity;
  std::vector<ComplexityRow> rows;
  for (const auto& cell : cells) {
    const std::uint64_t cell_seed = derive_seed(cfg.master_seed, streams::complexity, cell.index);
    const RQEstimate rq = estimate_r_q(cs, cell, cfg.master_seed, threads);
    const double r_q_value = cs.r_q.value_or(rq.value);
    const TargetSpec target{cell.t0, cell.noise, cfg.dependent_sign};
    const Sample sample =
        sample_dataset(cell.design, target, cell.N, derive_seed(cfg.master_seed, cell.index, 0));
    const double noise_l2 = noise_moments(cell.noise).l2;

    double k_F = detail::nan;
    if (cell.set.bounded()) {
      const double diam = diameter(cell.set);
      const WidthEstimate w = gaussian_width(cell.set, diam, cs.width_reps, derive_seed(cell_seed, 500), threads);
      k_F = dvoretzky_dimension(w, diam);
    }

    for (std::size_t li = 0; li < cfg.losses.size(); ++li) {
      ComplexityRow row;
      row.cell = cell.index;
      row.loss_label = cfg.losses[li].label();
      row.loss = resolve_loss(cfg.losses[li], sample, cell.set, noise_l2, r_q_value, cfg.solver).first;
      row.constants = resolve_constants(cs, cell.design, row.loss, noise_l2);
      row.noise_l2 = noise_l2;
      row.rq = rq;
      row.k_F = k_F;
      row.k_F_sqrt = std::sqrt(k_F);

      FixedPointProblem p;
      p.set = cell.set;
      p.sample_size = cell.N;
      p.loss = row.loss;
      p.design = cell.design;
      p.noise = cell.noise;
      p.cap = cs.cap;
      p.rel_tol = cs.rel_tol;
      p.threads = threads;
      p.kind = FixedPointKind::rM_prime;
      p.kappa = row.constants.kappa;
      p.delta = cs.delta;
      p.mc_budget = cs.mc_budget;
      p.seed = derive_seed(cell_seed, 100 + li);
      row.rm_prime = solve_fixed_point(p);

      row.lprime_l2 = lprime_l2_norm(row.loss, cell.noise, cs.lprime_draws, derive_seed(cell_seed, 300 + li));
      if (cs.r0_mode == R0Mode::monte_carlo) {
        R0Sample mc;
        mc.sample = &sample;
        mc.t_star = &cell.t0;
        mc.seed = derive_seed(cell_seed, 400 + li);
        row.r0_value = r0(row.loss, cell.set, row.constants.kappa, row.lprime_l2, cell.N, cs.r0_mode, mc, cs.cap);
      } else {
        row.r0_value = r0(row.loss, cell.set, row.constants.kappa, row.lprime_l2, cell.N, cs.r0_mode);
      }
      row.rm_total = r_M_total(row.rm_prime, row.r0_value);

      const double lip = loss_lipschitz(row.loss);
      if (std::isfinite(lip)) {
        p.kind = FixedPointKind::kbarN;
        p.zeta = row.constants.zeta2;
        p.lipschitz = lip;
        p.mc_budget = cs.width_reps;
        p.seed = derive_seed(cell_seed, 200 + li);
        row.kbar = solve_fixed_point(p);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline void write_complexity_csv(std::ostream& os, const ExperimentConfig& cfg, const std::vector<Cell>& cells,
                                 const std::vector<ComplexityRow>& rows) {
  std::vector<std::string> header{"experiment_id", "sweep_param", "sweep_value", "loss_kind", "gamma", "N", "n",
                                  "alpha", "sigma_l2", "zeta1", "zeta2", "theta", "kappa", "t2", "delta"};
  for (const char* name : {"r1Q", "r2Q", "rM_prime", "rM_total", "kbarN"})
    for (const char* suffix : {"", "_lo", "_hi", "_se", "_capped"}) header.push_back(std::string(name) + suffix);
  for (const char* name : {"r_Q", "r0", "lprime_l2", "k_F", "k_F_sqrt"}) header.emplace_back(name);
  csv::write_row(os, header);

  auto fixed_point = [](std::vector<std::string>& out, const FixedPointResult* r) {
    if (r == nullptr) {
      out.insert(out.end(), 5, "NA");
      return;
    }
    out.insert(out.end(), {csv::number(r->r), csv::number(r->bracket_lo), csv::number(r->bracket_hi),
                           csv::number(r->mc_std_error), csv::boolean(r->capped)});
  };
  for (const auto& row : rows) {
    const Cell& cell = cells[row.cell];
    auto out = detail::cell_prefix(cfg, cell);
    const auto& k = row.constants;
    out.insert(out.end(), {row.loss_label, csv::number(detail::gamma_of(row.loss)), csv::number(cell.N),
                           csv::number(cell.n), csv::number(detail::alpha_of(cell)), csv::number(cell.sigma),
                           csv::number(k.zeta1), csv::number(k.zeta2), csv::number(k.theta),
                           csv::number(k.kappa), csv::number(k.t2), csv::number(cfg.complexity.delta)});
    fixed_point(out, &row.rq.r1q);
    fixed_point(out, &row.rq.r2q);
    fixed_point(out, &row.rm_prime);
    fixed_point(out, &row.rm_total);
    fixed_point(out, row.kbar ? &*row.kbar : nullptr);
    out.insert(out.end(), {csv::number(row.rq.value), csv::number(row.r0_value), csv::number(row.lprime_l2),
                           csv::number(row.k_F), csv::number(row.k_F_sqrt)});
    csv::write_row(os, out);
  }
}

// -------------------------------------------------------------- smallball --

struct SmallBallReport {
  std::string source;
  std::vector<double> kappa_grid;
  std::vector<double> curve;
  double l4_over_l2 = detail::nan;
  std::optional<SmallBallParams> certificate;
  double empirical_at_kappa0 = detail::nan;
  std::optional<SmallBallCheck> check;
  double check_threshold = detail::nan;
  double noise_mass_kappa1 = detail::nan;
};

/// Empirical small-ball curve of Z (first design coordinate, or the noise),
/// the Paley-Zygmund certificate from the exact L4/L2 ratio, and the
/// empirical lower-tail check on a design sample of size N.
inline SmallBallReport run_smallball(const ExperimentConfig& cfg) {
  cfg.validate();
  const Cell cell = expand_cells(cfg).front();
  const auto& sb = cfg.smallball;
  SmallBallReport out;
  out.source = sb.source;
  out.kappa_grid = sb.kappa_grid;
  const bool noise_source = sb.source == "noise";
  if (noise_source && cell.noise.family == NoiseFamily::none)
    throw ConfigError("smallball.source", "noise source needs a positive noise level");

  Rng rng(derive_seed(cfg.master_seed, streams::smallball, 0));
  std::vector<double> draws(static_cast<std::size_t>(sb.draws));
  Vector row(cell.n);
  for (auto& z : draws) {
    if (noise_source) {
      z = sample_noise(cell.noise, rng);
    } else {
      sample_design_row(cell.design, rng, row);
      z = row[0];
    }
  }
  out.curve = smallball_curve(draws, sb.kappa_grid);

  if (noise_source) {
    const NoiseMoments m = noise_moments(cell.noise);
    out.l4_over_l2 = m.l4 / m.l2;
  } else {
    out.l4_over_l2 = design_l4_over_l2(cell.design);
  }
  if (std::isfinite(out.l4_over_l2)) {
    out.certificate = paley_zygmund_certificate(out.l4_over_l2, sb.theta);
    const double k0 = out.certificate->kappa0;
    out.empirical_at_kappa0 = smallball_curve(draws, std::vector<double>{k0}).front();
    if (std::isfinite(design_l4_over_l2(cell.design))) {
      const SmallBallParams design_cert = paley_zygmund_certificate(design_l4_over_l2(cell.design), sb.theta);
      const Sample sample = sample_dataset(cell.design, TargetSpec{cell.t0, NoiseKind::none(), false}, cell.N,
                                           derive_seed(cfg.master_seed, streams::smallball, 2));
      out.check = empirical_smallball_check(sample, cell.set, sb.r, design_cert, sb.num_directions,
                                            derive_seed(cfg.master_seed, streams::smallball, 1));
      out.check_threshold = design_cert.eps * design_cert.kappa0 * design_cert.kappa0 / 16.0;
    }
  }
  if (cell.noise.family != NoiseFamily::none) {
    std::vector<double> noise(static_cast<std::size_t>(sb.draws));
    Rng nrng(derive_seed(cfg.master_seed, streams::smallball, 3));
    for (auto& w : noise) w = sample_noise(cell.noise, nrng);
    out.noise_mass_kappa1 = noise_smallball_mass(noise, sb.kappa1);
  }
  return out;
}

inline void write_smallball_csv(std::ostream& os, const SmallBallReport& r) {
  csv::write_row(os, {"kappa", "probability"});
  for (std::size_t i = 0; i < r.kappa_grid.size(); ++i)
    csv::write_row(os, {csv::number(r.kappa_grid[i]), csv::number(r.curve[i])});
}

inline void write_certificate_csv(std::ostream& os, const SmallBallReport& r, double theta) {
  csv::write_row(os, {"source", "l4_over_l2", "theta", "kappa0", "eps", "empirical_at_kappa0", "holds",
                      "check_min", "check_threshold", "check_pass", "noise_mass_kappa1"});
  const auto& c = r.certificate;
  std::string holds = "NA";
  if (c) holds = csv::boolean(r.empirical_at_kappa0 >= c->eps);
  csv::write_row(os, {r.source, csv::number(r.l4_over_l2), csv::number(theta),
                      csv::number(c ? c->kappa0 : detail::nan), csv::number(c ? c->eps : detail::nan),
                      csv::number(r.empirical_at_kappa0), holds,
                      csv::number(r.check ? r.check->min_value : detail::nan),
                      csv::number(r.check_threshold),
                      r.check ? csv::boolean(r.check->pass) : "NA", csv::number(r.noise_mass_kappa1)});
}

}  // namespace calerm

#endif  // CALERM_REPORT_HPP
