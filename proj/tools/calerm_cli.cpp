#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "calerm/calerm.hpp"

namespace {

namespace fs = std::filesystem;
using namespace calerm;

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3 };

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  std::string seed;
  unsigned threads = default_thread_count();
  std::vector<std::string> overrides;
  bool plot = false;
};

std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(origin, "expected an unsigned 64-bit integer, got '" + text + "'");
  errno = 0;
  const unsigned long long v = std::strtoull(text.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(origin, "seed out of range");
  return static_cast<std::uint64_t>(v);
}

// --seed beats the config's master_seed, which beats CALERM_SEED.
ExperimentConfig load_config(const Options& opt) {
  Json doc = load_json_file(opt.config_path);
  for (const auto& o : opt.overrides) apply_override(doc, o);
  if (!doc.is_object()) throw ConfigError("<root>", "must be an object");
  if (!opt.seed.empty()) {
    doc["master_seed"] = parse_seed(opt.seed, "--seed");
  } else if (!doc.contains("master_seed")) {
    if (const char* env = std::getenv("CALERM_SEED")) doc["master_seed"] = parse_seed(env, "CALERM_SEED");
  }
  return config_from_json(doc);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  return os;
}

void write_file(const fs::path& path, const std::string& text) {
  auto os = open_output(path);
  os << text;
  if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

template <class F>
void write_with(const fs::path& path, F&& writer) {
  std::ostringstream ss;
  writer(ss);
  write_file(path, ss.str());
}

std::string cmd_fit(const ExperimentConfig& cfg, const Options& opt, const fs::path& out) {
  const FitReport f = run_fit(cfg, opt.threads);
  write_with(out / "fit.csv", [&](std::ostream& os) { write_fit_csv(os, f); });
  double worst = 0.0;
  for (const auto& t : f.fits) worst = std::max(worst, t.est_error_l2);
  return "fit: " + std::to_string(f.fits.size()) + " loss(es), max est_error_l2 " + csv::number(worst) +
         ", wrote " + (out / "fit.csv").string();
}

std::string cmd_complexity(const ExperimentConfig& cfg, const Options& opt, const fs::path& out) {
  std::vector<Cell> cells;
  const auto rows = compute_complexity(cfg, opt.threads, &cells);
  write_with(out / "complexity.csv", [&](std::ostream& os) { write_complexity_csv(os, cfg, cells, rows); });
  int capped = 0;
  for (const auto& r : rows) capped += r.rq.r1q.capped + r.rq.r2q.capped + r.rm_prime.capped;
  return "complexity: " + std::to_string(rows.size()) + " row(s), " + std::to_string(capped) +
         " capped fixed point(s), wrote " + (out / "complexity.csv").string();
}

std::string cmd_smallball(const ExperimentConfig& cfg, const Options&, const fs::path& out) {
  const SmallBallReport r = run_smallball(cfg);
  write_with(out / "smallball.csv", [&](std::ostream& os) { write_smallball_csv(os, r); });
  write_with(out / "certificate.csv", [&](std::ostream& os) { write_certificate_csv(os, r, cfg.smallball.theta); });
  std::string line = "smallball: source " + r.source;
  if (r.certificate)
    line += ", kappa0 " + csv::number(r.certificate->kappa0) + ", eps " + csv::number(r.certificate->eps) +
            ", empirical " + csv::number(r.empirical_at_kappa0) +
            (r.empirical_at_kappa0 >= r.certificate->eps ? " (holds)" : " (fails)");
  else
    line += ", no certificate (infinite fourth moment)";
  return line;
}

std::string cmd_experiment(const ExperimentConfig& cfg, const Options& opt, const fs::path& out) {
  ExperimentResult res;
  std::string extra;
  switch (cfg.kind) {
    case ExperimentKind::trials: res = run_experiment(cfg, opt.threads); break;
    case ExperimentKind::regime_sweep: {
      res = regime_sweep(cfg, opt.threads);
      const auto med = medians_for(res, cfg.losses.front().label());
      const auto shape = check_regime_shape(cfg.sweep->values, med, 1);
      extra = ", flat " + csv::boolean(shape.flat_ok) + ", rising " + csv::boolean(shape.rising_ok);
      break;
    }
    case ExperimentKind::loss_comparison: {
      const LossComparison c = loss_comparison(cfg, opt.threads);
      write_with(out / "comparison.csv", [&](std::ostream& os) { write_comparison_csv(os, cfg, c); });
      res = c.result;
      if (!c.q99_ratio.empty()) extra = ", q99 ratio " + csv::number(c.q99_ratio.front());
      break;
    }
    case ExperimentKind::rate_fit: {
      const RateFitResult r = rate_fit(cfg, opt.threads);
      write_with(out / "rate_fit.csv", [&](std::ostream& os) { write_rate_fit_csv(os, cfg, r); });
      res = r.result;
      extra = ", slope " + csv::number(r.fits.front().slope);
      break;
    }
    case ExperimentKind::persistence: {
      const PersistenceResult p = persistence_experiment(cfg, opt.threads);
      write_with(out / "persistence.csv", [&](std::ostream& os) { write_persistence_csv(os, cfg, p); });
      res = p.result;
      break;
    }
  }
  write_with(out / "results.csv", [&](std::ostream& os) { write_results_csv(os, res); });
  write_with(out / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, res); });
  if (opt.plot) write_with(out / "summary.svg", [&](std::ostream& os) { write_summary_svg(os, res); });
  int flagged = 0;
  for (const auto& t : res.trials) flagged += !t.flags.empty();
  return "experiment " + cfg.experiment_id + ": " + std::to_string(res.trials.size()) + " row(s), " +
         std::to_string(flagged) + " flagged" + extra + ", wrote " + (out / "results.csv").string();
}

using Command = std::string (*)(const ExperimentConfig&, const Options&, const fs::path&);

int run(Command command, const Options& opt) {
  try {
    const ExperimentConfig cfg = load_config(opt);
    const fs::path out(opt.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + opt.out_dir + "': " + ec.message());
    write_file(out / "config_echo.json", config_to_json(cfg).dump(2) + "\n");
    std::cout << command(cfg, opt, out) << std::endl;
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "error: invalid parameters: " << e.what() << '\n';
    return kConfig;
  } catch (const Error& e) {
    std::cerr << "error: numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated ERM: fits, complexity estimates, small-ball diagnostics and experiments"};
  app.require_subcommand(1);
  Options opt;
  Command command = nullptr;

  auto add = [&](const char* name, const char* help, Command cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "JSON configuration file")->required();
    sub->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "master seed (overrides the config and CALERM_SEED)");
    sub->add_option("--threads", opt.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--override", opt.overrides, "KEY=VALUE with a dotted key; repeatable");
    sub->add_flag("--plot", opt.plot, "also write summary.svg (experiment only)");
    sub->callback([&command, cmd] { command = cmd; });
  };
  add("fit", "fit every configured loss on one dataset; writes fit.csv", cmd_fit);
  add("complexity", "estimate the fixed points; writes complexity.csv", cmd_complexity);
  add("smallball", "small-ball curve and certificate; writes smallball.csv and certificate.csv", cmd_smallball);
  add("experiment", "run the configured experiment; writes results.csv and summary.csv", cmd_experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return kConfig;
  }
  return run(command, opt);
}
