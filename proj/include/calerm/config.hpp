#ifndef CALERM_CONFIG_HPP
#define CALERM_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "calerm/error.hpp"
#include "calerm/experiments.hpp"
#include "json.hpp"

namespace calerm {

using Json = nlohmann::json;

namespace detail {

inline std::string join_key(std::string_view prefix, std::string_view key) {
  if (prefix.empty()) return std::string(key);
  return std::string(prefix) + "." + std::string(key);
}

// Reader over one JSON object that reports the dotted path of bad entries
// and rejects keys it was never asked about.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  bool has(const char* key) {
    seen_.emplace_back(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const Json& raw(const char* key) {
    seen_.emplace_back(key);
    return j_.at(key);
  }

  std::string key(const char* k) const { return join_key(path_, k); }

  double number(const char* k, double fallback) {
    if (!has(k)) return fallback;
    const Json& v = j_.at(k);
    if (!v.is_number()) throw ConfigError(key(k), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key(k), "must be finite");
    return d;
  }

  std::optional<double> optional_number(const char* k) {
    if (!has(k)) return std::nullopt;
    return number(k, 0.0);
  }

  long long integer(const char* k, long long fallback) {
    if (!has(k)) return fallback;
    const Json& v = j_.at(k);
    if (!v.is_number()) throw ConfigError(key(k), "must be an integer");
    const double d = v.get<double>();
    if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError(key(k), "must be an integer");
    return v.is_number_integer() ? v.get<long long>() : static_cast<long long>(d);
  }

  std::uint64_t unsigned_integer(const char* k, std::uint64_t fallback) {
    if (!has(k)) return fallback;
    const Json& v = j_.at(k);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError(key(k), "must be a nonnegative integer");
  }

  bool boolean(const char* k, bool fallback) {
    if (!has(k)) return fallback;
    const Json& v = j_.at(k);
    if (!v.is_boolean()) throw ConfigError(key(k), "must be true or false");
    return v.get<bool>();
  }

  std::string string(const char* k, std::string fallback) {
    if (!has(k)) return fallback;
    const Json& v = j_.at(k);
    if (!v.is_string()) throw ConfigError(key(k), "must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* k, std::vector<double> fallback) {
    if (!has(k)) return fallback;
    const Json& v = j_.at(k);
    if (!v.is_array()) throw ConfigError(key(k), "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(key(k), "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  // Parses an enum string with `from_string`, mapping failures to ConfigError.
  template <class E, class F>
  E choice(const char* k, E fallback, F&& from_string) {
    if (!has(k)) return fallback;
    const std::string s = string(k, "");
    try {
      return from_string(s);
    } catch (const ArgumentError& e) {
      throw ConfigError(key(k), e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const auto& s : seen_) known = known || s == it.key();
      if (!known) throw ConfigError(key(it.key().c_str()), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

inline int to_int(long long v, const std::string& key) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(key, "out of range");
  return static_cast<int>(v);
}

inline LossChoice parse_loss(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  if (r.has("huber_auto")) {
    ObjectReader a(r.raw("huber_auto"), r.key("huber_auto"));
    LossChoice c = LossChoice::auto_huber(a.number("c0", 1.0),
                                          a.choice("mode", CalibrationMode::oracle, calibration_mode_from_string));
    a.finish();
    r.finish();
    return c;
  }
  if (!r.has("kind")) throw ConfigError(r.key("kind"), "is required");
  LossSpec spec;
  spec.kind = r.choice("kind", LossKind::squared, loss_kind_from_string);
  if (spec.kind == LossKind::huber) {
    if (!r.has("gamma")) throw ConfigError(r.key("gamma"), "is required for the Huber loss");
    spec.gamma = r.number("gamma", 1.0);
    if (!(spec.gamma > 0.0)) throw ConfigError(r.key("gamma"), "must be positive");
  } else {
    r.number("gamma", 1.0);
  }
  r.finish();
  return LossChoice::of(spec);
}

inline Json loss_to_json(const LossChoice& c) {
  if (c.huber_auto)
    return {{"huber_auto", {{"c0", c.c0}, {"mode", std::string(to_string(c.mode))}}}};
  Json j{{"kind", std::string(to_string(c.fixed.kind))}};
  if (c.fixed.kind == LossKind::huber) j["gamma"] = c.fixed.gamma;
  return j;
}

}  // namespace detail

/// Parses and validates a configuration document.
inline ExperimentConfig config_from_json(const Json& doc) {
  using detail::ObjectReader;
  ExperimentConfig cfg;
  ObjectReader root(doc, "");
  cfg.experiment_id = root.string("experiment_id", cfg.experiment_id);
  cfg.kind = root.choice("experiment", cfg.kind, experiment_kind_from_string);
  cfg.master_seed = root.unsigned_integer("master_seed", 0);
  cfg.N = detail::to_int(root.integer("N", cfg.N), "N");
  cfg.trials = detail::to_int(root.integer("trials", cfg.trials), "trials");
  cfg.holdout = detail::to_int(root.integer("holdout", cfg.holdout), "holdout");
  cfg.record_runtime = root.boolean("record_runtime", false);
  cfg.margin = root.number("margin", cfg.margin);

  if (!root.has("design")) throw ConfigError("design", "is required");
  {
    ObjectReader d(root.raw("design"), "design");
    cfg.design.family = d.choice("kind", DesignFamily::gaussian_isotropic, design_family_from_string);
    if (!d.has("dim")) throw ConfigError("design.dim", "is required");
    cfg.design.dim = detail::to_int(d.integer("dim", 1), "design.dim");
    cfg.design.df = d.number("df", 5.0);
    d.finish();
    if (cfg.design.dim < 1) throw ConfigError("design.dim", "must be >= 1");
  }

  if (root.has("alpha_rule")) {
    ObjectReader a(root.raw("alpha_rule"), "alpha_rule");
    AlphaRule rule;
    rule.scale = a.number("scale", 1.0);
    rule.exponent = a.number("exponent", 0.0);
    a.finish();
    cfg.alpha_rule = rule;
  }

  if (root.has("set")) {
    ObjectReader s(root.raw("set"), "set");
    const SetKind kind = s.choice("kind", SetKind::full_space, set_kind_from_string);
    cfg.set.kind = kind;
    cfg.set.dim = detail::to_int(s.integer("dim", cfg.design.dim), "set.dim");
    cfg.set.alpha = s.number("alpha", cfg.alpha_rule ? cfg.alpha_rule->at(cfg.set.dim) : 0.0);
    cfg.set.r = s.number("r", 0.0);
    s.finish();
    if (cfg.set.has_l1() && !(cfg.set.alpha > 0.0)) throw ConfigError("set.alpha", "must be positive");
    if (cfg.set.has_l2() && !(cfg.set.r > 0.0)) throw ConfigError("set.r", "must be positive");
    if (!cfg.set.has_l1()) cfg.set.alpha = 0.0;
    if (!cfg.set.has_l2()) cfg.set.r = 0.0;
  } else {
    cfg.set = ConstraintSet::full_space(cfg.design.dim);
  }

  if (root.has("target")) {
    ObjectReader t(root.raw("target"), "target");
    if (t.has("t0")) {
      cfg.target.kind = TargetRuleKind::explicit_values;
      cfg.target.values = t.numbers("t0", {});
    } else {
      const std::string rule = t.string("rule", "first_k");
      if (rule == "first_k") {
        cfg.target.kind = TargetRuleKind::first_k;
      } else if (rule == "l1_fraction") {
        cfg.target.kind = TargetRuleKind::l1_fraction;
      } else {
        throw ConfigError("target.rule", "must be first_k or l1_fraction (or give target.t0)");
      }
      cfg.target.k = detail::to_int(t.integer("k", 1), "target.k");
      cfg.target.value = t.number("value", 1.0);
      cfg.target.fraction = t.number("fraction", 0.5);
    }
    cfg.dependent_sign = t.boolean("dependent_sign", false);
    t.finish();
  }

  if (root.has("noise")) {
    ObjectReader n(root.raw("noise"), "noise");
    cfg.noise.family = n.choice("kind", NoiseFamily::gaussian, noise_family_from_string);
    cfg.noise.sigma = n.number("sigma", cfg.noise.family == NoiseFamily::none ? 0.0 : 1.0);
    cfg.noise.df = n.number("df", 5.0);
    cfg.noise.tail_index = n.number("tail_index", 3.0);
    n.finish();
    if (cfg.noise.family == NoiseFamily::none) cfg.noise.sigma = 0.0;
  }

  if (root.has("loss") && root.has("losses"))
    throw ConfigError("losses", "give either loss or losses, not both");
  if (root.has("loss")) {
    cfg.losses = {detail::parse_loss(root.raw("loss"), "loss")};
  } else if (root.has("losses")) {
    const Json& arr = root.raw("losses");
    if (!arr.is_array() || arr.empty()) throw ConfigError("losses", "must be a non-empty array");
    cfg.losses.clear();
    for (std::size_t i = 0; i < arr.size(); ++i)
      cfg.losses.push_back(detail::parse_loss(arr[i], "losses[" + std::to_string(i) + "]"));
  }

  if (root.has("solver")) {
    ObjectReader s(root.raw("solver"), "solver");
    cfg.solver.max_iters = detail::to_int(s.integer("max_iters", cfg.solver.max_iters), "solver.max_iters");
    cfg.solver.tol = s.number("tol", cfg.solver.tol);
    cfg.solver.step_rule = s.choice("step_rule", cfg.solver.step_rule, step_rule_from_string);
    cfg.solver.backtracking_shrink = s.number("backtracking_shrink", cfg.solver.backtracking_shrink);
    cfg.solver.least_squares_fast_path = s.boolean("least_squares_fast_path", true);
    s.finish();
  }

  if (root.has("sweep")) {
    ObjectReader s(root.raw("sweep"), "sweep");
    Sweep sw;
    if (!s.has("parameter")) throw ConfigError("sweep.parameter", "is required");
    sw.parameter = s.choice("parameter", SweepParameter::sigma, sweep_parameter_from_string);
    sw.values = s.numbers("values", {});
    s.finish();
    cfg.sweep = sw;
  }

  if (root.has("complexity")) {
    ObjectReader c(root.raw("complexity"), "complexity");
    auto& cs = cfg.complexity;
    cs.zeta1 = c.optional_number("zeta1");
    cs.zeta2 = c.optional_number("zeta2");
    cs.kappa = c.optional_number("kappa");
    cs.theta = c.optional_number("theta");
    cs.t2 = c.optional_number("t2");
    cs.r_q = c.optional_number("r_q");
    cs.delta = c.number("delta", cs.delta);
    cs.mc_budget = detail::to_int(c.integer("mc_budget", cs.mc_budget), "complexity.mc_budget");
    cs.width_reps = detail::to_int(c.integer("width_reps", cs.width_reps), "complexity.width_reps");
    cs.cap = c.number("cap", cs.cap);
    cs.rel_tol = c.number("rel_tol", cs.rel_tol);
    cs.pz_theta = c.number("pz_theta", cs.pz_theta);
    cs.r0_mode = c.choice("r0_mode", cs.r0_mode, r0_mode_from_string);
    cs.lprime_draws = detail::to_int(c.integer("lprime_draws", cs.lprime_draws), "complexity.lprime_draws");
    c.finish();
  }

  if (root.has("smallball")) {
    ObjectReader s(root.raw("smallball"), "smallball");
    auto& sb = cfg.smallball;
    sb.source = s.string("source", sb.source);
    sb.draws = detail::to_int(s.integer("draws", sb.draws), "smallball.draws");
    sb.kappa_grid = s.numbers("kappa_grid", sb.kappa_grid);
    sb.theta = s.number("theta", sb.theta);
    sb.kappa1 = s.number("kappa1", sb.kappa1);
    sb.num_directions = detail::to_int(s.integer("num_directions", sb.num_directions), "smallball.num_directions");
    sb.r = s.number("r", sb.r);
    s.finish();
  }

  if (root.has("rate_constants")) {
    ObjectReader a(root.raw("rate_constants"), "rate_constants");
    cfg.rate_constants.c0 = a.number("c0", 1.0);
    cfg.rate_constants.c1 = a.number("c1", 1.0);
    cfg.rate_constants.c2 = a.number("c2", 1.0);
    a.finish();
  }

  root.finish();
  cfg.validate();
  // Materialize every cell once so that infeasible targets surface as
  // configuration errors.
  expand_cells(cfg);
  return cfg;
}

/// Full serialization; config_from_json(config_to_json(c)) == c.
inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["experiment_id"] = cfg.experiment_id;
  j["experiment"] = std::string(to_string(cfg.kind));
  j["master_seed"] = cfg.master_seed;
  j["N"] = cfg.N;
  j["trials"] = cfg.trials;
  j["holdout"] = cfg.holdout;
  j["record_runtime"] = cfg.record_runtime;
  j["margin"] = cfg.margin;
  j["design"] = {{"kind", std::string(to_string(cfg.design.family))},
                 {"dim", cfg.design.dim},
                 {"df", cfg.design.df}};
  Json set{{"kind", std::string(to_string(cfg.set.kind))}, {"dim", cfg.set.dim}};
  if (cfg.set.has_l1()) set["alpha"] = cfg.set.alpha;
  if (cfg.set.has_l2()) set["r"] = cfg.set.r;
  j["set"] = set;
  Json target;
  if (cfg.target.kind == TargetRuleKind::explicit_values) {
    target["t0"] = cfg.target.values;
  } else {
    target["rule"] = std::string(to_string(cfg.target.kind));
    target["k"] = cfg.target.k;
    target["value"] = cfg.target.value;
    target["fraction"] = cfg.target.fraction;
  }
  target["dependent_sign"] = cfg.dependent_sign;
  j["target"] = target;
  j["noise"] = {{"kind", std::string(to_string(cfg.noise.family))},
                {"sigma", cfg.noise.sigma},
                {"df", cfg.noise.df},
                {"tail_index", cfg.noise.tail_index}};
  Json losses = Json::array();
  for (const auto& l : cfg.losses) losses.push_back(detail::loss_to_json(l));
  j["losses"] = losses;
  j["solver"] = {{"max_iters", cfg.solver.max_iters},
                 {"tol", cfg.solver.tol},
                 {"step_rule", std::string(to_string(cfg.solver.step_rule))},
                 {"backtracking_shrink", cfg.solver.backtracking_shrink},
                 {"least_squares_fast_path", cfg.solver.least_squares_fast_path}};
  if (cfg.sweep)
    j["sweep"] = {{"parameter", std::string(to_string(cfg.sweep->parameter))}, {"values", cfg.sweep->values}};
  const auto& cs = cfg.complexity;
  Json c{{"delta", cs.delta},       {"mc_budget", cs.mc_budget}, {"width_reps", cs.width_reps},
         {"cap", cs.cap},           {"rel_tol", cs.rel_tol},     {"pz_theta", cs.pz_theta},
         {"r0_mode", std::string(to_string(cs.r0_mode))},        {"lprime_draws", cs.lprime_draws}};
  if (cs.zeta1) c["zeta1"] = *cs.zeta1;
  if (cs.zeta2) c["zeta2"] = *cs.zeta2;
  if (cs.kappa) c["kappa"] = *cs.kappa;
  if (cs.theta) c["theta"] = *cs.theta;
  if (cs.t2) c["t2"] = *cs.t2;
  if (cs.r_q) c["r_q"] = *cs.r_q;
  j["complexity"] = c;
  const auto& sb = cfg.smallball;
  j["smallball"] = {{"source", sb.source}, {"draws", sb.draws},   {"kappa_grid", sb.kappa_grid},
                    {"theta", sb.theta},   {"kappa1", sb.kappa1}, {"num_directions", sb.num_directions},
                    {"r", sb.r}};
  if (cfg.alpha_rule) j["alpha_rule"] = {{"scale", cfg.alpha_rule->scale}, {"exponent", cfg.alpha_rule->exponent}};
  j["rate_constants"] = {{"c0", cfg.rate_constants.c0},
                         {"c1", cfg.rate_constants.c1},
                         {"c2", cfg.rate_constants.c2}};
  return j;
}

/// Parses a JSON document from text; syntax errors become ConfigError.
inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(origin, std::string("invalid JSON: ") + e.what());
  }
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

/// Applies KEY=VALUE with a dotted KEY. VALUE is parsed as JSON when
/// possible and taken as a string otherwise.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--override", "expected KEY=VALUE, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component in override");
    if (!node->is_object()) throw ConfigError(key, "override path crosses a non-object value");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

}  // namespace calerm

#endif  // CALERM_CONFIG_HPP
