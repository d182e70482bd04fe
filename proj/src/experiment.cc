#include "tneg/experiment.h"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "tneg/oracle.h"
#include "tneg/parallel.h"
#include "tneg/rng.h"

#ifndef TNEG_VERSION
#define TNEG_VERSION "0.1.0"
#endif

namespace tneg {

using nlohmann::json;

namespace {

constexpr const char* kKindNames[] = {"NegativitySweep", "FidelitySweep",  "DNdTScan", "LoccTrials",
                                      "RepetitionThreshold", "OracleFixtures", "CmiCheck"};

bool needs_lattice(ExperimentKind k) { return k != ExperimentKind::RepetitionThreshold; }
bool needs_grid(ExperimentKind k) { return k != ExperimentKind::RepetitionThreshold; }
bool is_exact(ExperimentKind k) { return k == ExperimentKind::OracleFixtures || k == ExperimentKind::CmiCheck; }

void reject_unknown_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
}

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "wrong type (found " + std::string(j.type_name()) + ")");
  }
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return get_as<int>(j, path);
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

std::vector<int> int_list(const json& j, const std::string& path) {
  if (j.is_number_integer()) return {get_int(j, path)};
  if (!j.is_array()) throw ConfigError(path, "expected an integer or a list of integers");
  std::vector<int> out;
  for (size_t i = 0; i < j.size(); ++i) out.push_back(get_int(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// A list of numbers or {"start", "stop", "step"}.
std::vector<double> number_grid(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array()) {
    std::vector<double> out;
    for (size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }
  if (!j.is_object()) throw ConfigError(path, "expected a list or {start, stop, step}");
  reject_unknown_keys(j, path, {"start", "stop", "step"});
  for (const char* k : {"start", "stop", "step"})
    if (!j.contains(k)) throw ConfigError(path + "." + k, "missing");
  const double start = get_number(j["start"], path + ".start");
  const double stop = get_number(j["stop"], path + ".stop");
  const double step = get_number(j["step"], path + ".step");
  if (!(step > 0.0)) throw ConfigError(path + ".step", "must be > 0");
  if (stop < start) throw ConfigError(path + ".stop", "must be >= start");
  const double count = (stop - start) / step;
  const long n = std::lround(count);
  if (std::abs(count - static_cast<double>(n)) > 1e-9 * std::max(1.0, count))
    throw ConfigError(path, "(stop - start) must be a whole number of steps");
  std::vector<double> out;
  for (long i = 0; i <= n; ++i) out.push_back(i == n ? stop : start + static_cast<double>(i) * step);
  return out;
}

std::vector<LatticeSpec> parse_lattice(const json& j) {
  if (!j.is_object()) throw ConfigError("lattice", "expected an object");
  reject_unknown_keys(j, "lattice", {"d", "L", "linear_sizes", "sizes", "boundary", "J"});
  LatticeSpec base;
  if (j.contains("boundary")) {
    try {
      base.boundary = boundary_from_string(get_as<std::string>(j["boundary"], "lattice.boundary"));
    } catch (const std::invalid_argument& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("lattice.boundary", e.what());
    }
  }
  if (j.contains("J")) base.coupling = get_number(j["J"], "lattice.J");

  std::vector<LatticeSpec> out;
  const int forms = static_cast<int>(j.contains("L")) + static_cast<int>(j.contains("linear_sizes")) +
                    static_cast<int>(j.contains("sizes"));
  if (forms != 1) throw ConfigError("lattice", "give exactly one of L (with d), linear_sizes or sizes");
  if (j.contains("L")) {
    if (!j.contains("d")) throw ConfigError("lattice.d", "required together with L");
    const int d = get_int(j["d"], "lattice.d");
    if (d < 1) throw ConfigError("lattice.d", "must be >= 1");
    for (int l : int_list(j["L"], "lattice.L")) {
      LatticeSpec s = base;
      s.linear_sizes.assign(static_cast<size_t>(d), l);
      out.push_back(s);
    }
  } else if (j.contains("linear_sizes")) {
    if (j.contains("d")) throw ConfigError("lattice.d", "only used together with L");
    LatticeSpec s = base;
    s.linear_sizes = int_list(j["linear_sizes"], "lattice.linear_sizes");
    out.push_back(s);
  } else {
    if (j.contains("d")) throw ConfigError("lattice.d", "only used together with L");
    const json& sizes = j["sizes"];
    if (!sizes.is_array()) throw ConfigError("lattice.sizes", "expected a list of shapes");
    for (size_t i = 0; i < sizes.size(); ++i) {
      LatticeSpec s = base;
      s.linear_sizes = int_list(sizes[i], "lattice.sizes[" + std::to_string(i) + "]");
      out.push_back(s);
    }
  }
  return out;
}

PartitionSpec parse_partition(const json& j) {
  PartitionSpec p;
  if (j.is_string()) {
    p.preset = j.get<std::string>();
  } else if (j.is_object()) {
    reject_unknown_keys(j, "partition", {"preset", "r", "sites"});
    if (j.contains("sites")) {
      if (j.contains("preset")) throw ConfigError("partition", "give either preset or sites");
      p.preset = "sites";
      p.sites = int_list(j["sites"], "partition.sites");
    } else if (j.contains("preset")) {
      p.preset = get_as<std::string>(j["preset"], "partition.preset");
    }
    if (j.contains("r")) p.r = get_int(j["r"], "partition.r");
  } else {
    throw ConfigError("partition", "expected a preset name or an object");
  }
  if (p.preset != "half-cylinder" && p.preset != "single-site" && p.preset != "block" && p.preset != "sites")
    throw ConfigError("partition.preset", "unknown preset '" + p.preset + "' (half-cylinder, single-site, block)");
  if (p.preset == "block" && p.r < 1) throw ConfigError("partition.r", "must be >= 1");
  return p;
}

TripartitionSpec parse_tripartition(const json& j) {
  if (!j.is_object()) throw ConfigError("tripartition", "expected an object");
  reject_unknown_keys(j, "tripartition", {"r", "center", "a", "b"});
  TripartitionSpec t;
  if (j.contains("r")) t.r = get_int(j["r"], "tripartition.r");
  if (j.contains("center")) t.center = get_int(j["center"], "tripartition.center");
  if (j.contains("a") != j.contains("b")) throw ConfigError("tripartition", "a and b must be given together");
  if (j.contains("a")) {
    t.a_sites = int_list(j["a"], "tripartition.a");
    t.b_sites = int_list(j["b"], "tripartition.b");
    if (t.a_sites.empty()) throw ConfigError("tripartition.a", "must not be empty");
  }
  if (t.r < 1) throw ConfigError("tripartition.r", "must be >= 1");
  return t;
}

void parse_chain(const json& j, ChainConfig& chain) {
  if (!j.is_object()) throw ConfigError("chain", "expected an object");
  reject_unknown_keys(j, "chain", {"thermalization", "measurement", "measure_every", "update_rule"});
  if (j.contains("update_rule")) {
    const auto name = get_as<std::string>(j["update_rule"], "chain.update_rule");
    try {
      chain = ChainConfig::defaults(update_rule_from_string(name));
      chain.auto_thermalization = true;
    } catch (const std::invalid_argument& e) {
      throw ConfigError("chain.update_rule", e.what());
    }
  }
  if (j.contains("thermalization")) {
    const json& t = j["thermalization"];
    chain.auto_thermalization = t.is_string() && t.get<std::string>() == "auto";
    if (!chain.auto_thermalization) chain.n_thermalization_sweeps = get_int(t, "chain.thermalization");
  }
  if (j.contains("measurement")) chain.n_measurement_sweeps = get_int(j["measurement"], "chain.measurement");
  if (j.contains("measure_every")) chain.measure_every = get_int(j["measure_every"], "chain.measure_every");
  try {
    chain.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("chain", e.what());
  }
}

std::uint64_t parse_seed(const json& j) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw ConfigError("seed", "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

Bipartition build_partition(const Lattice& lattice, const PartitionSpec& p) {
  if (p.preset == "sites") return from_site_list(lattice, p.sites);
  return make_partition(lattice, p.preset, p.r);
}

TripartitionABC build_tripartition(const Lattice& lattice, const TripartitionSpec& t) {
  if (!t.a_sites.empty()) return tripartition_from_lists(lattice, t.a_sites, t.b_sites, t.r);
  return ring_tripartition(lattice, t.r, t.center);
}

struct CsvWriter {
  std::ostringstream os;

  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((os << (first ? "" : ",") << cell(cells), first = false), ...);
    os << '\n';
  }

  static std::string cell(double x) { return format_double(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(long x) { return std::to_string(x); }
  static std::string cell(std::uint64_t x) { return std::to_string(x); }
  static std::string cell(bool b) { return b ? "1" : "0"; }
};

double nan() { return std::numeric_limits<double>::quiet_NaN(); }
double temperature_of(double beta) { return beta == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / beta; }

std::string shape_label(const LatticeSpec& s) {
  std::string out;
  for (size_t i = 0; i < s.linear_sizes.size(); ++i) out += (i ? "x" : "") + std::to_string(s.linear_sizes[i]);
  return out;
}

// Sweep tasks: lattice x grid point x replica, in that nesting order.
struct SweepTask {
  size_t lattice;
  size_t point;
  int replica;
};

std::vector<SweepTask> sweep_tasks(const ExperimentConfig& cfg) {
  std::vector<SweepTask> tasks;
  for (size_t l = 0; l < cfg.lattices.size(); ++l)
    for (size_t i = 0; i < cfg.grid.size(); ++i)
      for (int r = 0; r < cfg.replicas; ++r) tasks.push_back({l, i, r});
  return tasks;
}

void run_boundary_sweep(const ExperimentConfig& cfg, ExperimentOutput& out) {
  const bool negativity = cfg.kind == ExperimentKind::NegativitySweep;
  const std::string kind = negativity ? "negativity" : "fidelity";
  std::vector<Lattice> lattices;
  std::vector<Bipartition> parts;
  for (const auto& spec : cfg.lattices) {
    lattices.emplace_back(spec);
    parts.push_back(build_partition(lattices.back(), cfg.partition));
  }
  const auto betas = cfg.betas();
  const auto tasks = sweep_tasks(cfg);
  struct Row {
    double value = nan(), err = nan(), tau = nan(), n_eff = nan();
    std::uint64_t seed = 0;
    bool warn = false;
    std::string error;
  };
  std::vector<Row> rows(tasks.size());
  parallel_for(tasks.size(), cfg.workers, [&](size_t t) {
    const auto& task = tasks[t];
    const Lattice& lattice = lattices[task.lattice];
    Row& row = rows[t];
    ChainConfig chain = cfg.chain;
    chain.seed = row.seed = sweep_point_seed(cfg.seed, kind, lattice, parts[task.lattice].id(),
                                             temperature_of(betas[task.point]), static_cast<std::uint64_t>(task.replica));
    try {
      EstimatorOptions opts = cfg.estimator;
      if (!negativity) opts.mode = SamplingMode::DirectP;
      const auto est = estimate_boundary_observables(lattice, parts[task.lattice], betas[task.point], chain, opts);
      if (negativity) {
        row = {est.negativity.value, est.negativity.std_error, est.negativity.tau_int, est.negativity.n_effective,
               row.seed, est.negativity.warning, {}};
      } else {
        row = {est.fidelity.value, est.fidelity.std_error, est.fidelity.tau_int, est.fidelity.n_effective, row.seed,
               est.fidelity.warning, {}};
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  CsvWriter csv;
  csv.os << csv_header(cfg.kind) << '\n';
  for (size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const auto& spec = cfg.lattices[task.lattice];
    const Row& r = rows[t];
    const double beta = betas[task.point];
    csv.row(kind, spec.dimension(), spec.linear_sizes[0], beta, temperature_of(beta), parts[task.lattice].id(),
            r.value, r.err, r.tau, r.n_eff, r.seed, r.error.empty() ? (r.warn ? "1" : "0") : "error");
    if (!r.error.empty())
      out.errors.push_back(shape_label(spec) + " beta=" + format_double(beta) + " replica=" +
                           std::to_string(task.replica) + ": " + r.error);
  }
  out.csv = csv.os.str();
}

void run_dndt(const ExperimentConfig& cfg, ExperimentOutput& out) {
  CsvWriter csv;
  csv.os << csv_header(cfg.kind) << '\n';
  const auto temps = cfg.temperatures();
  ChainConfig chain = cfg.chain;
  chain.seed = cfg.seed;
  for (const auto& spec : cfg.lattices) {
    const Lattice lattice(spec);
    DerivativeOptions opts;
    opts.h = cfg.h;
    opts.richardson = cfg.richardson;
    opts.translation_average = cfg.estimator.translation_average;
    opts.workers = cfg.workers;
    std::vector<DerivativePoint> points;
    std::string error;
    try {
      points = dN_dT_single_site(lattice, temps, chain, opts);
    } catch (const std::exception& e) {
      error = e.what();
      out.errors.push_back(shape_label(spec) + ": " + error);
    }
    for (size_t i = 0; i < temps.size(); ++i) {
      const std::uint64_t seed = sweep_point_seed(cfg.seed, "dndt", lattice, "single-site", temps[i], 0);
      if (!error.empty()) {
        csv.row("dndt", spec.dimension(), spec.linear_sizes[0], temps[i], cfg.h, nan(), nan(), nan(), "error", seed);
        continue;
      }
      const auto& p = points[i];
      const char* flag = p.warning ? "warn" : (p.insignificant ? "insignificant" : "ok");
      csv.row("dndt", spec.dimension(), spec.linear_sizes[0], p.temperature, cfg.h, p.derivative, p.std_error,
              p.richardson, flag, seed);
    }
  }
  out.csv = csv.os.str();
}

void run_locc(const ExperimentConfig& cfg, ExperimentOutput& out) {
  std::vector<Lattice> lattices;
  std::vector<Bipartition> parts;
  for (const auto& spec : cfg.lattices) {
    lattices.emplace_back(spec);
    parts.push_back(build_partition(lattices.back(), cfg.partition));
  }
  const auto betas = cfg.betas();
  const auto tasks = sweep_tasks(cfg);
  std::vector<LoccResult> results(tasks.size());
  std::vector<std::string> errors(tasks.size());
  parallel_for(tasks.size(), cfg.workers, [&](size_t t) {
    const auto& task = tasks[t];
    ChainConfig chain = cfg.chain;
    chain.n_measurement_sweeps = static_cast<int>(cfg.n_trials * chain.measure_every);
    chain.seed = sweep_point_seed(cfg.seed, "locc", lattices[task.lattice], parts[task.lattice].id(),
                                  temperature_of(betas[task.point]), static_cast<std::uint64_t>(task.replica));
    try {
      results[t] = run_protocol_trials(lattices[task.lattice], parts[task.lattice], betas[task.point], chain);
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
  });
  CsvWriter csv;
  csv.os << csv_header(cfg.kind) << '\n';
  for (size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const auto& spec = cfg.lattices[task.lattice];
    const double beta = betas[task.point];
    if (!errors[t].empty()) {
      out.errors.push_back(shape_label(spec) + " beta=" + format_double(beta) + ": " + errors[t]);
      csv.row(beta, spec.linear_sizes[0], parts[task.lattice].id(), 0L, nan(), nan(), nan());
      continue;
    }
    const auto& r = results[t];
    csv.row(beta, spec.linear_sizes[0], parts[task.lattice].id(), r.n_trials, r.success_rate, r.std_error,
            r.fidelity_formula_value);
  }
  out.csv = csv.os.str();
}

void run_repetition(const ExperimentConfig& cfg, ExperimentOutput& out) {
  const auto results = threshold_scan(cfg.n_bits, cfg.p_grid, cfg.n_trials, cfg.decoder, cfg.seed, cfg.workers);
  CsvWriter csv;
  csv.os << csv_header(cfg.kind) << '\n';
  for (const auto& r : results)
    csv.row(r.n_bits, r.p_flip, r.n_trials, to_string(r.decoder), r.success_rate, r.std_error, r.exact_success,
            r.lower_bound);
  out.csv = csv.os.str();
}

void run_cmi(const ExperimentConfig& cfg, ExperimentOutput& out) {
  CsvWriter csv;
  csv.os << csv_header(cfg.kind) << '\n';
  const auto betas = cfg.betas();
  for (const auto& spec : cfg.lattices) {
    const Lattice lattice(spec);
    const auto tri = build_tripartition(lattice, *cfg.tripartition);
    for (double beta : betas) {
      try {
        const auto r = oracle::cmi_exact(lattice, tri, beta);
        csv.row("cmi", spec.dimension(), spec.linear_sizes[0], beta, temperature_of(beta), tri.r, r.cmi,
                r.cmi_classical, r.s_ab, r.s_bc, r.s_b, r.s_abc);
      } catch (const std::exception& e) {
        out.errors.push_back(shape_label(spec) + " beta=" + format_double(beta) + ": " + e.what());
        csv.row("cmi", spec.dimension(), spec.linear_sizes[0], beta, temperature_of(beta), tri.r, nan(), nan(), nan(),
                nan(), nan(), nan());
      }
    }
  }
  out.csv = csv.os.str();
}

std::string data_file_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::NegativitySweep: return "negativity_sweep.csv";
    case ExperimentKind::FidelitySweep: return "fidelity_sweep.csv";
    case ExperimentKind::DNdTScan: return "dndt_scan.csv";
    case ExperimentKind::LoccTrials: return "locc_trials.csv";
    case ExperimentKind::RepetitionThreshold: return "repetition_threshold.csv";
    case ExperimentKind::OracleFixtures: return "oracle_fixtures.json";
    case ExperimentKind::CmiCheck: return "cmi_check.csv";
  }
  return "out.csv";
}

json json_number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

}  // namespace

std::string to_string(ExperimentKind kind) { return kKindNames[static_cast<int>(kind)]; }

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (int i = 0; i < 7; ++i)
    if (name == kKindNames[i]) return static_cast<ExperimentKind>(i);
  std::string known;
  for (const char* k : kKindNames) known += (known.empty() ? "" : ", ") + std::string(k);
  throw std::invalid_argument("unknown experiment kind '" + name + "' (expected one of " + known + ")");
}

std::vector<double> ExperimentConfig::betas() const {
  if (!grid_is_temperature) return grid;
  std::vector<double> b;
  for (double t : grid) b.push_back(1.0 / t);
  return b;
}

std::vector<double> ExperimentConfig::temperatures() const {
  if (grid_is_temperature) return grid;
  std::vector<double> t;
  for (double b : grid) t.push_back(temperature_of(b));
  return t;
}

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  if (!lattices.empty()) {
    json sizes = json::array();
    for (const auto& s : lattices) sizes.push_back(s.linear_sizes);
    j["lattice"] = {{"sizes", sizes}, {"boundary", to_string(lattices[0].boundary)}, {"J", lattices[0].coupling}};
  }
  if (partition.preset == "sites") {
    j["partition"] = {{"sites", partition.sites}};
  } else {
    j["partition"] = {{"preset", partition.preset}, {"r", partition.r}};
  }
  if (tripartition) {
    json t = {{"r", tripartition->r}, {"center", tripartition->center}};
    if (!tripartition->a_sites.empty()) {
      t["a"] = tripartition->a_sites;
      t["b"] = tripartition->b_sites;
    }
    j["tripartition"] = t;
  }
  if (!grid.empty()) j[grid_is_temperature ? "temperatures" : "betas"] = grid;
  j["chain"] = {{"thermalization", chain.auto_thermalization ? json("auto") : json(chain.n_thermalization_sweeps)},
                {"measurement", chain.n_measurement_sweeps},
                {"measure_every", chain.measure_every},
                {"update_rule", to_string(chain.update_rule)}};
  j["estimator"] = {{"mode", to_string(estimator.mode)}, {"translation_average", estimator.translation_average}};
  j["replicas"] = replicas;
  j["h"] = h;
  j["richardson"] = richardson;
  j["n_trials"] = n_trials;
  if (!n_bits.empty()) j["n_bits"] = n_bits;
  if (!p_grid.empty()) j["p"] = p_grid;
  j["decoder"] = to_string(decoder);
  j["seed"] = seed;
  j["workers"] = workers;
  j["output"] = output_dir;
  return j;
}

ExperimentConfig parse_config(const json& input) {
  if (!input.is_object()) throw ConfigError("(root)", "expected a JSON object");
  const json& j = input.contains("config") && input.contains("config_hash") ? input["config"] : input;
  reject_unknown_keys(j, "",
                      {"kind", "lattice", "partition", "tripartition", "temperatures", "betas", "chain", "estimator",
                       "replicas", "h", "richardson", "n_trials", "n_bits", "p", "decoder", "seed", "workers",
                       "output"});
  ExperimentConfig cfg;
  if (!j.contains("kind")) throw ConfigError("kind", "missing");
  try {
    cfg.kind = experiment_kind_from_string(get_as<std::string>(j["kind"], "kind"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("kind", e.what());
  }
  cfg.workers = default_workers();
  if (j.contains("lattice")) cfg.lattices = parse_lattice(j["lattice"]);
  if (j.contains("partition")) cfg.partition = parse_partition(j["partition"]);
  if (j.contains("tripartition")) cfg.tripartition = parse_tripartition(j["tripartition"]);
  if (j.contains("temperatures") && j.contains("betas"))
    throw ConfigError("temperatures", "give either temperatures or betas, not both");
  if (j.contains("temperatures")) cfg.grid = number_grid(j["temperatures"], "temperatures");
  if (j.contains("betas")) {
    cfg.grid = number_grid(j["betas"], "betas");
    cfg.grid_is_temperature = false;
  }
  if (cfg.kind == ExperimentKind::DNdTScan) cfg.estimator.translation_average = true;
  if (j.contains("chain")) {
    cfg.chain.auto_thermalization = true;
    parse_chain(j["chain"], cfg.chain);
  } else {
    if (cfg.kind == ExperimentKind::DNdTScan) cfg.chain = ChainConfig::defaults(UpdateRule::WolffCluster);
    cfg.chain.auto_thermalization = true;
  }
  if (j.contains("estimator")) {
    const json& e = j["estimator"];
    if (!e.is_object()) throw ConfigError("estimator", "expected an object");
    reject_unknown_keys(e, "estimator", {"mode", "translation_average"});
    if (e.contains("mode")) {
      try {
        cfg.estimator.mode = sampling_mode_from_string(get_as<std::string>(e["mode"], "estimator.mode"));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::invalid_argument& ex) {
        throw ConfigError("estimator.mode", ex.what());
      }
    }
    if (e.contains("translation_average"))
      cfg.estimator.translation_average = get_as<bool>(e["translation_average"], "estimator.translation_average");
  }
  if (j.contains("replicas")) cfg.replicas = get_int(j["replicas"], "replicas");
  if (j.contains("h")) cfg.h = get_number(j["h"], "h");
  if (j.contains("richardson")) cfg.richardson = get_as<bool>(j["richardson"], "richardson");
  if (j.contains("n_trials")) {
    if (!j["n_trials"].is_number_integer()) throw ConfigError("n_trials", "expected an integer");
    cfg.n_trials = j["n_trials"].get<long>();
  }
  if (j.contains("n_bits")) cfg.n_bits = int_list(j["n_bits"], "n_bits");
  if (j.contains("p")) cfg.p_grid = number_grid(j["p"], "p");
  if (j.contains("decoder")) {
    try {
      cfg.decoder = repetition_decoder_from_string(get_as<std::string>(j["decoder"], "decoder"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError("decoder", e.what());
    }
  }
  if (j.contains("seed")) cfg.seed = parse_seed(j["seed"]);
  cfg.chain.seed = cfg.seed;
  if (j.contains("workers")) cfg.workers = get_int(j["workers"], "workers");
  if (j.contains("output")) cfg.output_dir = get_as<std::string>(j["output"], "output");
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("(file)", std::string("JSON parse error: ") + e.what());
  }
  return parse_config(j);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.workers < 1) throw ConfigError("workers", "must be >= 1");
  if (cfg.replicas < 1) throw ConfigError("replicas", "must be >= 1");
  if (needs_lattice(cfg.kind) && cfg.lattices.empty()) throw ConfigError("lattice", "missing");
  if (needs_grid(cfg.kind) && cfg.grid.empty())
    throw ConfigError("temperatures", "a temperature or beta grid is required");

  for (size_t i = 0; i < cfg.grid.size(); ++i) {
    const std::string path = std::string(cfg.grid_is_temperature ? "temperatures" : "betas") + "[" + std::to_string(i) + "]";
    const double v = cfg.grid[i];
    if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
    if (cfg.grid_is_temperature ? !(v > 0.0) : !(v >= 0.0))
      throw ConfigError(path, cfg.grid_is_temperature ? "temperatures must be > 0" : "betas must be >= 0");
    if (i > 0 && !(v > cfg.grid[i - 1])) throw ConfigError(path, "grid must be strictly increasing");
  }

  for (size_t l = 0; l < cfg.lattices.size(); ++l) {
    const std::string path = "lattice.sizes[" + std::to_string(l) + "]";
    const auto& spec = cfg.lattices[l];
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
    const Lattice lattice(spec);
    if (is_exact(cfg.kind) && lattice.num_sites() > oracle::kMaxEnumerationSites)
      throw ConfigError(path, "exact kinds enumerate all configurations; N = " + std::to_string(lattice.num_sites()) +
                                  " exceeds " + std::to_string(oracle::kMaxEnumerationSites));
    if (cfg.kind == ExperimentKind::CmiCheck) {
      if (!cfg.tripartition) throw ConfigError("tripartition", "required for CmiCheck");
      try {
        build_tripartition(lattice, *cfg.tripartition).validate(lattice);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("tripartition", e.what());
      }
      continue;
    }
    if (cfg.kind == ExperimentKind::DNdTScan) {
      if (cfg.estimator.translation_average && spec.boundary != Boundary::Periodic)
        throw ConfigError("estimator.translation_average", "requires a periodic lattice");
      continue;
    }
    Bipartition part = [&] {
      try {
        return build_partition(lattice, cfg.partition);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("partition", e.what());
      }
    }();
    if (part.size_a() == 0 || part.size_a() == lattice.num_sites())
      throw ConfigError("partition", "region A and its complement must both be non-empty");
    if (cfg.kind == ExperimentKind::LoccTrials && !is_contiguous(lattice, part))
      throw ConfigError("partition", "the recovery protocol needs A and its complement each connected");
    if (cfg.estimator.translation_average && spec.boundary != Boundary::Periodic)
      throw ConfigError("estimator.translation_average", "requires a periodic lattice");
  }

  if (cfg.estimator.mode == SamplingMode::ExplicitQ && cfg.estimator.translation_average)
    throw ConfigError("estimator", "explicit-q sampling cannot be combined with translation averaging");

  switch (cfg.kind) {
    case ExperimentKind::DNdTScan:
      if (!cfg.grid_is_temperature) throw ConfigError("temperatures", "DNdTScan takes a temperature grid");
      if (!(cfg.h > 0.0)) throw ConfigError("h", "must be > 0");
      if (!(cfg.grid.front() - cfg.h > 0.0)) throw ConfigError("h", "T - h must be positive at every grid point");
      break;
    case ExperimentKind::LoccTrials:
      if (cfg.n_trials < 1) throw ConfigError("n_trials", "must be >= 1");
      if (cfg.n_trials * cfg.chain.measure_every > std::numeric_limits<int>::max())
        throw ConfigError("n_trials", "too many trials for one chain");
      break;
    case ExperimentKind::RepetitionThreshold:
      if (cfg.n_bits.empty()) throw ConfigError("n_bits", "required");
      for (size_t i = 0; i < cfg.n_bits.size(); ++i)
        if (cfg.n_bits[i] < 1) throw ConfigError("n_bits[" + std::to_string(i) + "]", "must be >= 1");
      if (cfg.p_grid.empty()) throw ConfigError("p", "required");
      for (size_t i = 0; i < cfg.p_grid.size(); ++i)
        if (!(cfg.p_grid[i] >= 0.0 && cfg.p_grid[i] <= 1.0))
          throw ConfigError("p[" + std::to_string(i) + "]", "must lie in [0, 1]");
      if (cfg.n_trials < 1) throw ConfigError("n_trials", "must be >= 1");
      break;
    default:
      break;
  }
}

json validation_report(const ExperimentConfig& cfg) {
  validate_config(cfg);
  json report;
  report["kind"] = to_string(cfg.kind);
  report["grid_points"] = cfg.grid.size();
  json lattices = json::array();
  for (const auto& spec : cfg.lattices) {
    const Lattice lattice(spec);
    json entry = {{"linear_sizes", spec.linear_sizes},
                  {"boundary", to_string(spec.boundary)},
                  {"N", lattice.num_sites()},
                  {"bonds", lattice.num_bonds()}};
    if (cfg.kind == ExperimentKind::CmiCheck) {
      const auto tri = build_tripartition(lattice, *cfg.tripartition);
      int na = 0, nb = 0, nc = 0;
      for (int i = 0; i < lattice.num_sites(); ++i) {
        na += tri.a_mask[i];
        nb += tri.b_mask[i];
        nc += tri.c_mask[i];
      }
      entry["A"] = na;
      entry["B"] = nb;
      entry["C"] = nc;
    } else if (needs_lattice(cfg.kind)) {
      const Bipartition part = cfg.kind == ExperimentKind::DNdTScan ? single_site(lattice)
                                                                    : build_partition(lattice, cfg.partition);
      entry["partition"] = part.id();
      entry["size_A"] = part.size_a();
      entry["boundary_bonds"] = part.boundary_size();
      entry["contiguous"] = is_contiguous(lattice, part);
    }
    lattices.push_back(entry);
  }
  report["lattices"] = lattices;
  if (cfg.kind == ExperimentKind::RepetitionThreshold) report["tasks"] = cfg.n_bits.size() * cfg.p_grid.size();
  return report;
}

int default_workers() {
  const char* env = std::getenv("TNEG_WORKERS");
  if (!env || !*env) return 1;
  int w = 0;
  const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), w);
  if (ec != std::errc() || *ptr != '\0' || w < 1) throw ConfigError("TNEG_WORKERS", "expected a positive integer");
  return w;
}

std::string csv_header(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::NegativitySweep:
    case ExperimentKind::FidelitySweep:
      return "kind,d,L,beta,T,partition,value,stderr,tau_int,n_eff,seed,warn";
    case ExperimentKind::DNdTScan:
      return "kind,d,L,T,h,derivative,stderr,richardson,flag,seed";
    case ExperimentKind::LoccTrials:
      return "beta,L,partition,n_trials,success_rate,stderr,fidelity_formula_value";
    case ExperimentKind::RepetitionThreshold:
      return "n_bits,p,n_trials,decoder,success_rate,stderr,exact,lower_bound";
    case ExperimentKind::CmiCheck:
      return "kind,d,L,beta,T,r,cmi,cmi_classical,s_ab,s_bc,s_b,s_abc";
    case ExperimentKind::OracleFixtures:
      return "";
  }
  return "";
}

json oracle_fixtures(const ExperimentConfig& cfg) {
  json fixtures = json::array();
  const auto betas = cfg.betas();
  for (const auto& spec : cfg.lattices) {
    const Lattice lattice(spec);
    const Bipartition part = build_partition(lattice, cfg.partition);
    const bool contiguous = is_contiguous(lattice, part);
    json records = json::array();
    for (double beta : betas) {
      const auto spectrum = oracle::negativity_spectrum(lattice, part, beta);
      json r = {{"beta", json_number(beta)},
                {"log_z", oracle::log_partition_function(lattice, beta)},
                {"negativity", oracle::exact_negativity(lattice, part, beta)},
                {"spectrum_sum", spectrum.sum()},
                {"spectrum_negativity", spectrum.negativity()},
                {"fidelity", oracle::exact_fidelity(lattice, part, beta)}};
      if (contiguous) r["fidelity_protocol"] = oracle::exact_fidelity_protocol(lattice, part, beta);
      records.push_back(r);
    }
    fixtures.push_back({{"linear_sizes", spec.linear_sizes},
                        {"boundary", to_string(spec.boundary)},
                        {"J", spec.coupling},
                        {"partition", part.id()},
                        {"a_mask", part.a_mask()},
                        {"boundary_bonds", part.boundary_size()},
                        {"records", records}});
  }
  return {{"kind", "oracle-fixtures"}, {"fixtures", fixtures}};
}

ExperimentOutput run_experiment_in_memory(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ExperimentOutput out;
  switch (cfg.kind) {
    case ExperimentKind::NegativitySweep:
    case ExperimentKind::FidelitySweep:
      run_boundary_sweep(cfg, out);
      break;
    case ExperimentKind::DNdTScan:
      run_dndt(cfg, out);
      break;
    case ExperimentKind::LoccTrials:
      run_locc(cfg, out);
      break;
    case ExperimentKind::RepetitionThreshold:
      run_repetition(cfg, out);
      break;
    case ExperimentKind::CmiCheck:
      run_cmi(cfg, out);
      break;
    case ExperimentKind::OracleFixtures:
      out.json = oracle_fixtures(cfg).dump(2) + "\n";
      break;
  }
  return out;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentOutput out = run_experiment_in_memory(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  RunSummary summary;
  summary.data_path = (fs::path(cfg.output_dir) / data_file_name(cfg.kind)).string();
  summary.manifest_path = (fs::path(cfg.output_dir) / "manifest.json").string();
  summary.n_errors = out.errors.size();
  summary.wall_seconds = wall;
  {
    std::ofstream f(summary.data_path, std::ios::binary);
    f << (cfg.kind == ExperimentKind::OracleFixtures ? out.json : out.csv);
    if (!f) throw std::runtime_error("cannot write " + summary.data_path);
  }
  const json config = cfg.to_json();
  // Workers and output location do not affect results, so they stay out of the hash.
  json hashed = config;
  hashed.erase("workers");
  hashed.erase("output");
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(hash_string(hashed.dump())));
  const json manifest = {{"config", config},
                         {"config_hash", hash},
                         {"seed", cfg.seed},
                         {"version", version_string()},
                         {"wall_time_seconds", wall},
                         {"output", fs::path(summary.data_path).filename().string()},
                         {"errors", out.errors}};
  std::ofstream f(summary.manifest_path, std::ios::binary);
  f << manifest.dump(2) << '\n';
  if (!f) throw std::runtime_error("cannot write " + summary.manifest_path);
  return summary;
}

std::string version_string() { return TNEG_VERSION; }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace tneg
