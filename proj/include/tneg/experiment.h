#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tneg/estimators.h"
#include "tneg/gibbs.h"
#include "tneg/lattice.h"
#include "tneg/locc.h"

namespace tneg {

enum class ExperimentKind {
  NegativitySweep,
  FidelitySweep,
  DNdTScan,
  LoccTrials,
  RepetitionThreshold,
  OracleFixtures,
  CmiCheck,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

// Invalid configuration. `field` is a dotted path such as "lattice.L[1]".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct PartitionSpec {
  std::string preset = "half-cylinder";  // half-cylinder | single-site | block | sites
  int r = 1;                             // block edge length
  std::vector<int> sites;                // explicit region A
};

struct TripartitionSpec {
  int r = 1;
  int center = 0;
  std::vector<int> a_sites;  // when non-empty, A and B come from these lists
  std::vector<int> b_sites;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::NegativitySweep;
  std::vector<LatticeSpec> lattices;  // one task group per entry; `beta` unused
  PartitionSpec partition;
  std::optional<TripartitionSpec> tripartition;
  // Either temperatures (strictly positive) or inverse temperatures (>= 0).
  std::vector<double> grid;
  bool grid_is_temperature = true;
  ChainConfig chain;
  EstimatorOptions estimator;
  int replicas = 1;
  // DNdTScan
  double h = 0.02;
  bool richardson = false;
  // LoccTrials / RepetitionThreshold
  long n_trials = 10000;
  std::vector<int> n_bits;
  std::vector<double> p_grid;
  RepetitionDecoder decoder = RepetitionDecoder::Majority;

  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_dir = "out";

  std::vector<double> betas() const;
  std::vector<double> temperatures() const;

  // Canonical form; parse_config(to_json()) round-trips.
  nlohmann::json to_json() const;
};

// Parses and validates. Accepts either a bare config or a run manifest (whose
// "config" member is used). Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Full invariant check, including geometry. Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

// Derived quantities for each lattice: N, bonds, |A|, |boundary|, contiguity.
nlohmann::json validation_report(const ExperimentConfig& cfg);

// Default worker count from TNEG_WORKERS, else 1.
int default_workers();

// Header row of the CSV written for `kind` (empty for OracleFixtures).
std::string csv_header(ExperimentKind kind);

struct ExperimentOutput {
  std::string csv;   // empty for OracleFixtures
  std::string json;  // oracle fixtures, empty otherwise
  std::vector<std::string> errors;  // one entry per failed row
};

// Runs the experiment without touching the filesystem. Deterministic in
// (config, seed) and independent of the worker count.
ExperimentOutput run_experiment_in_memory(const ExperimentConfig& cfg);

struct RunSummary {
  std::string data_path;
  std::string manifest_path;
  std::size_t n_errors = 0;
  double wall_seconds = 0.0;
};

// Writes <output_dir>/<kind>.csv (or .json) and <output_dir>/manifest.json.
RunSummary run_experiment(const ExperimentConfig& cfg);

// Exact fixtures for one lattice/partition over the grid.
nlohmann::json oracle_fixtures(const ExperimentConfig& cfg);

std::string version_string();
std::string format_double(double x);

}  // namespace tneg
