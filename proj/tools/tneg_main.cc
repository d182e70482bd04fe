#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tneg/experiment.h"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "worker threads (default: $TNEG_WORKERS or 1)");
}

tneg::ExperimentConfig load(const std::string& path, const Overrides& o) {
  auto cfg = tneg::load_config(path);
  if (o.seed) cfg.chain.seed = cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.workers) cfg.workers = *o.workers;
  tneg::validate_config(cfg);
  return cfg;
}

int execute(const tneg::ExperimentConfig& cfg) {
  const auto summary = tneg::run_experiment(cfg);
  std::cout << "wrote " << summary.data_path << " and " << summary.manifest_path << " in "
            << tneg::format_double(summary.wall_seconds) << " s\n";
  if (summary.n_errors > 0) {
    std::cerr << summary.n_errors << " row(s) failed; see the manifest\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal GHZ negativity simulations"};
  app.set_version_flag("--version", tneg::version_string());
  app.require_subcommand(1);

  std::string path;
  Overrides run_opts, oracle_opts;

  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", path, "JSON config or run manifest")->required();
  add_overrides(run, run_opts);

  auto* validate = app.add_subcommand("validate", "check a config and print derived quantities");
  validate->add_option("config", path, "JSON config")->required();

  auto* oracle = app.add_subcommand("oracle", "write exact fixtures for a small lattice");
  oracle->add_option("config", path, "JSON config (kind is forced to OracleFixtures)")->required();
  add_overrides(oracle, oracle_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return execute(load(path, run_opts));
    if (*validate) {
      const auto cfg = tneg::load_config(path);
      std::cout << tneg::validation_report(cfg).dump(2) << '\n';
      return 0;
    }
    if (*oracle) {
      auto cfg = load(path, oracle_opts);
      cfg.kind = tneg::ExperimentKind::OracleFixtures;
      tneg::validate_config(cfg);
      return execute(cfg);
    }
  } catch (const tneg::ConfigError& e) {
    std::cerr << "config error at " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
