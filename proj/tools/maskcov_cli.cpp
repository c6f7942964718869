// maskcov: command-line driver for the simulation experiments.
//
//   maskcov metrics  --config run.cfg --out metrics.csv
//   maskcov sweep    --config run.cfg --seed 7 --jobs 4 --out sweep.csv
//   maskcov inverse  --config run.cfg --lambda 0.05
//   maskcov unbiased --config run.cfg --trials 10000
//   maskcov re-check --config run.cfg --tail-thresholds 0.5,1,2
//
// Exit status: 0 on success, 1 on numerical failure, 2 on usage or
// configuration errors.

#include "maskcov/harness/config.hpp"
#include "maskcov/harness/csv.hpp"
#include "maskcov/harness/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace mh = maskcov::harness;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::string config_path;
  std::string out = "-";
  std::optional<long long> seed;
  std::optional<long long> trials;
  std::optional<long long> jobs;

  std::string dump_dir;
  bool oracle_p = false;
  std::string estimator;
  std::string fit_out;
  bool population = false;

  std::optional<double> lambda;
  std::optional<double> c_gamma;
  std::optional<double> b1;
  std::optional<double> m_omega;
  std::optional<double> d0_bar;
  std::string sym_method;
  std::optional<double> tol;
  std::optional<long long> max_iters;

  std::string tail_thresholds;
  std::string tail_out;
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw maskcov::ConfigError("cannot write output file '" + path + "'");
  out << text;
}

template <typename T>
void override_key(mh::Config& cfg, const std::string& section, const std::string& key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_floating_point_v<T>) {
    cfg.set(section, key, mh::format_double(*v));
  } else {
    cfg.set(section, key, std::to_string(*v));
  }
}

void override_key(mh::Config& cfg, const std::string& section, const std::string& key, const std::string& v) {
  if (!v.empty()) cfg.set(section, key, v);
}

int run(const std::string& command, const Options& opt) {
  mh::Config cfg = mh::Config::load(opt.config_path);
  const std::string& section = command;
  override_key(cfg, section, "seed", opt.seed);
  override_key(cfg, section, "trials", opt.trials);
  override_key(cfg, section, "jobs", opt.jobs);

  std::ostringstream out;
  if (command == "metrics") {
    override_key(cfg, section, "dump_dir", opt.dump_dir);
    const auto rows = mh::run_metrics(mh::metrics_config_from(cfg, section));
    mh::write_metrics_csv(out, rows, cfg.entries(section));
  } else if (command == "sweep") {
    override_key(cfg, section, "dump_dir", opt.dump_dir);
    override_key(cfg, section, "estimator", opt.estimator);
    if (opt.oracle_p) cfg.set(section, "oracle_p", "true");
    const auto records = mh::run_sweep(mh::sweep_config_from(cfg, section));
    mh::write_sweep_csv(out, records, cfg.entries(section));
    if (!opt.fit_out.empty()) {
      std::ostringstream fit;
      mh::write_fit_csv(fit, mh::run_rescale_fit(records, cfg.get_double(section, "x_min", 2.0)),
                        cfg.entries(section));
      emit(opt.fit_out, fit.str());
    }
  } else if (command == "inverse") {
    override_key(cfg, section, "dump_dir", opt.dump_dir);
    override_key(cfg, section, "lambda", opt.lambda);
    override_key(cfg, section, "c_gamma", opt.c_gamma);
    override_key(cfg, section, "b1", opt.b1);
    override_key(cfg, section, "m_omega", opt.m_omega);
    override_key(cfg, section, "d0_bar", opt.d0_bar);
    override_key(cfg, section, "sym_method", opt.sym_method);
    override_key(cfg, section, "tol", opt.tol);
    override_key(cfg, section, "max_iters", opt.max_iters);
    if (opt.population) cfg.set(section, "population", "true");
    const auto records = mh::run_inverse(mh::inverse_config_from(cfg, section));
    mh::write_inverse_csv(out, records, cfg.entries(section));
  } else if (command == "unbiased") {
    const auto rows = mh::run_unbiased(mh::unbiased_config_from(cfg, section));
    mh::write_unbiased_csv(out, rows, cfg.entries(section));
  } else if (command == "re-check") {
    override_key(cfg, section, "tail_thresholds", opt.tail_thresholds);
    const auto result = mh::run_recheck(mh::recheck_config_from(cfg, section));
    mh::write_recheck_csv(out, result, cfg.entries(section));
    if (result.tail) {
      std::ostringstream tail;
      mh::write_tail_csv(tail, *result.tail, cfg.entries(section));
      const std::string path = opt.tail_out.empty() ? cfg.get_string(section, "tail_out", "") : opt.tail_out;
      if (path.empty()) {
        out << '\n' << tail.str();
      } else {
        emit(path, tail.str());
      }
    }
  }
  emit(opt.out, out.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariance estimation with missing data: simulation experiments"};
  app.name("maskcov");
  app.require_subcommand(1, 1);
  app.fallthrough();

  Options opt;
  app.add_option("--config", opt.config_path, "Configuration file")->required();
  app.add_option("--seed", opt.seed, "Root seed (overrides the config)");
  app.add_option("--out", opt.out, "Output CSV path, '-' for stdout");
  app.add_option("--trials", opt.trials, "Trials per cell (overrides the config)");
  app.add_option("--jobs", opt.jobs, "Worker threads");

  auto* metrics = app.add_subcommand("metrics", "Deterministic metrics of covariance models");
  metrics->add_option("--dump-matrices", opt.dump_dir, "Directory receiving every generated matrix as CSV");

  auto* sweep = app.add_subcommand("sweep", "Relative operator-norm error over (n, m, p)");
  sweep->add_option("--dump-estimates", opt.dump_dir, "Directory receiving the first-trial estimate per cell");
  sweep->add_flag("--oracle-p", opt.oracle_p, "Normalize b_star with the true p instead of p_hat");
  sweep->add_option("--estimator", opt.estimator, "b_star or oracle_B_tilde");
  sweep->add_option("--fit-out", opt.fit_out, "Write the log-log rescale fit to this CSV");

  auto* inverse = app.add_subcommand("inverse", "Nodewise precision estimation errors");
  inverse->add_option("--lambda", opt.lambda, "Penalty (otherwise the rate rule with --c-gamma)");
  inverse->add_option("--c-gamma", opt.c_gamma, "Constant of the penalty rule");
  inverse->add_option("--b1", opt.b1, "l1 radius (otherwise from --m-omega and --d0-bar)");
  inverse->add_option("--m-omega", opt.m_omega, "Bound on the inverse correlation norm");
  inverse->add_option("--d0-bar", opt.d0_bar, "Row sparsity bound");
  inverse->add_option("--sym-method", opt.sym_method, "Symmetrization: lp or average")
      ->check(CLI::IsMember({"lp", "exact_lp", "average"}));
  inverse->add_option("--tol", opt.tol, "Solver tolerance");
  inverse->add_option("--max-iters", opt.max_iters, "Solver iteration cap");
  inverse->add_option("--dump-estimates", opt.dump_dir, "Directory receiving the first-trial precision estimate");
  inverse->add_flag("--population", opt.population, "Use the exact covariance as input");

  app.add_subcommand("unbiased", "Monte Carlo bias z-scores of the oracle estimators");

  auto* recheck = app.add_subcommand("re-check", "Empirical RE-condition and tail checks");
  recheck->add_option("--tail-thresholds", opt.tail_thresholds, "Comma-separated tail thresholds");
  recheck->add_option("--tail-out", opt.tail_out, "Tail-check CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opt);
  } catch (const maskcov::ConfigError& e) {
    std::cerr << "maskcov: " << e.what() << '\n';
    return kExitUsage;
  } catch (const maskcov::InvalidParameter& e) {
    std::cerr << "maskcov: " << e.what() << '\n';
    return kExitUsage;
  } catch (const maskcov::DimensionError& e) {
    std::cerr << "maskcov: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "maskcov: " << e.what() << '\n';
    return kExitNumerical;
  }
}
