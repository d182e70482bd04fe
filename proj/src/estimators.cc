#include "tneg/estimators.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tneg/parallel.h"

namespace tneg {

std::string to_string(SamplingMode mode) { return mode == SamplingMode::ExplicitQ ? "explicit-q" : "direct-p"; }

SamplingMode sampling_mode_from_string(const std::string& name) {
  if (name == "direct-p") return SamplingMode::DirectP;
  if (name == "explicit-q") return SamplingMode::ExplicitQ;
  throw std::invalid_argument("unknown sampling mode '" + name + "' (expected direct-p or explicit-q)");
}

BoundaryEnergyEvaluator::BoundaryEnergyEvaluator(const Lattice& lattice, const Bipartition& part,
                                                 bool all_translates)
    : coupling_(lattice.coupling()),
      n_translates_(all_translates ? lattice.num_sites() : 1),
      boundary_size_(part.boundary_size()) {
  if (all_translates && lattice.spec().boundary != Boundary::Periodic)
    throw std::invalid_argument("translation averaging requires a periodic lattice");
  const auto& bonds = lattice.bonds();
  pairs_.reserve(static_cast<size_t>(2 * n_translates_ * boundary_size_));
  for (int t = 0; t < n_translates_; ++t) {
    const auto shift = lattice.coordinates(t);
    for (int k : part.boundary_bonds()) {
      if (all_translates) {
        pairs_.push_back(lattice.translate(bonds[k].a, shift));
        pairs_.push_back(lattice.translate(bonds[k].b, shift));
      } else {
        pairs_.push_back(bonds[k].a);
        pairs_.push_back(bonds[k].b);
      }
    }
  }
}

void BoundaryEnergyEvaluator::evaluate(const SpinConfig& s, std::vector<double>& out) const {
  out.resize(n_translates_);
  const int* p = pairs_.data();
  for (int t = 0; t < n_translates_; ++t) {
    int sum = 0;
    for (int k = 0; k < boundary_size_; ++k, p += 2) sum += s[p[0]] * s[p[1]];
    out[t] = -coupling_ * sum;
  }
}

void BoundaryEnergyEvaluator::evaluate_sums(const SpinConfig& s, std::vector<int>& out) const {
  out.resize(n_translates_);
  const int* p = pairs_.data();
  for (int t = 0; t < n_translates_; ++t) {
    int sum = 0;
    for (int k = 0; k < boundary_size_; ++k, p += 2) sum += s[p[0]] * s[p[1]];
    out[t] = sum;
  }
}

BoundaryEstimates estimate_boundary_observables(const Lattice& lattice, const Bipartition& part, double beta,
                                                const ChainConfig& cfg, const EstimatorOptions& opts) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta: must be >= 0");
  cfg.validate();
  if (opts.mode == SamplingMode::ExplicitQ && opts.translation_average)
    throw std::invalid_argument("explicit-q sampling is not combined with translation averaging");

  const BoundaryEnergyEvaluator evaluator(lattice, part, opts.translation_average);
  std::vector<std::uint8_t> complement(part.a_mask().size());
  for (size_t i = 0; i < complement.size(); ++i) complement[i] = part.a_mask()[i] ? 0 : 1;
  Rng coin(derive_seed(cfg.seed, {hash_string("q-flip")}));

  // Boundary sums are integers in [-B, B]; tabulate both observables.
  const int b = evaluator.boundary_size();
  std::vector<double> neg_table(2 * b + 1), fid_table(2 * b + 1);
  for (int k = -b; k <= b; ++k) {
    const double e = -lattice.coupling() * k;
    neg_table[k + b] = negativity_observable(beta, e);
    fid_table[k + b] = fidelity_observable(beta, e);
  }

  std::vector<double> neg_samples, fid_samples;
  std::vector<int> sums;
  const auto n_meas = static_cast<size_t>(cfg.n_measurement_sweeps / cfg.measure_every);
  neg_samples.reserve(n_meas);
  fid_samples.reserve(n_meas);
  const double inv_translates = 1.0 / evaluator.num_translates();

  run_chain(lattice, beta, cfg, [&](const SpinConfig& s) {
    evaluator.evaluate_sums(s, sums);
    double fid = 0.0;
    for (int k : sums) fid += fid_table[k + b];
    fid_samples.push_back(fid * inv_translates);

    if (opts.mode == SamplingMode::ExplicitQ && coin.coin()) evaluator.evaluate_sums(flip_region(s, complement), sums);
    double neg = 0.0;
    for (int k : sums) neg += neg_table[k + b];
    neg_samples.push_back(neg * inv_translates);
  });
  if (neg_samples.empty()) throw std::invalid_argument("measure_every exceeds n_measurement_sweeps");

  const ChainStats ns = summarize(std::move(neg_samples), cfg.measure_every);
  const ChainStats fs = summarize(std::move(fid_samples), cfg.measure_every);
  BoundaryEstimates out;
  out.negativity = {beta, part.id(), ns.mean, ns.std_error, ns.n_effective, ns.tau_int, opts.mode, ns.warning()};
  out.fidelity = {beta, part.id(), fs.mean, fs.std_error, fs.n_effective, fs.tau_int, fs.warning()};
  return out;
}

NegativityEstimate estimate_negativity(const Lattice& lattice, const Bipartition& part, double beta,
                                       const ChainConfig& cfg, const EstimatorOptions& opts) {
  return estimate_boundary_observables(lattice, part, beta, cfg, opts).negativity;
}

FidelityEstimate estimate_fidelity(const Lattice& lattice, const Bipartition& part, double beta,
                                   const ChainConfig& cfg, const EstimatorOptions& opts) {
  EstimatorOptions direct = opts;
  direct.mode = SamplingMode::DirectP;
  return estimate_boundary_observables(lattice, part, beta, cfg, direct).fidelity;
}

std::uint64_t sweep_point_seed(std::uint64_t master, std::string_view kind, const Lattice& lattice,
                               const std::string& partition_id, double temperature, std::uint64_t replica) {
  std::uint64_t geometry = hash_string(to_string(lattice.spec().boundary));
  for (int l : lattice.spec().linear_sizes) geometry = splitmix64(geometry ^ static_cast<std::uint64_t>(l));
  return derive_seed(master, {hash_string(kind), geometry, hash_string(partition_id), double_bits(temperature),
                              replica});
}

namespace {

void check_temperatures(std::span<const double> temperatures) {
  if (temperatures.empty()) throw std::invalid_argument("temperatures: grid is empty");
  for (size_t i = 0; i < temperatures.size(); ++i) {
    if (!(temperatures[i] > 0.0)) throw std::invalid_argument("temperatures: must be strictly positive");
    if (i > 0 && !(temperatures[i] > temperatures[i - 1]))
      throw std::invalid_argument("temperatures: must be strictly increasing");
  }
}

}  // namespace

std::vector<NegativityEstimate> negativity_temperature_sweep(const Lattice& lattice, const Bipartition& part,
                                                             std::span<const double> temperatures,
                                                             const ChainConfig& cfg, const EstimatorOptions& opts,
                                                             int workers) {
  check_temperatures(temperatures);
  std::vector<NegativityEstimate> out(temperatures.size());
  parallel_for(temperatures.size(), workers, [&](size_t i) {
    ChainConfig point = cfg;
    point.seed = sweep_point_seed(cfg.seed, "negativity", lattice, part.id(), temperatures[i]);
    out[i] = estimate_negativity(lattice, part, 1.0 / temperatures[i], point, opts);
  });
  return out;
}

std::vector<FidelityEstimate> fidelity_temperature_sweep(const Lattice& lattice, const Bipartition& part,
                                                         std::span<const double> temperatures,
                                                         const ChainConfig& cfg, int workers) {
  check_temperatures(temperatures);
  std::vector<FidelityEstimate> out(temperatures.size());
  parallel_for(temperatures.size(), workers, [&](size_t i) {
    ChainConfig point = cfg;
    point.seed = sweep_point_seed(cfg.seed, "fidelity", lattice, part.id(), temperatures[i]);
    out[i] = estimate_fidelity(lattice, part, 1.0 / temperatures[i], point);
  });
  return out;
}

std::vector<DerivativePoint> dN_dT_single_site(const Lattice& lattice, std::span<const double> temperatures,
                                               const ChainConfig& cfg, const DerivativeOptions& opts) {
  check_temperatures(temperatures);
  if (!(opts.h > 0.0)) throw std::invalid_argument("h: finite-difference step must be > 0");
  if (!(temperatures.front() - opts.h > 0.0))
    throw std::invalid_argument("h: T - h must stay positive for every grid point");
  const Bipartition part = single_site(lattice);
  EstimatorOptions est;
  est.translation_average = opts.translation_average;

  // Offsets +h, -h and, for the Richardson cross-check, +h/2, -h/2.
  const std::vector<double> offsets = opts.richardson ? std::vector<double>{opts.h, -opts.h, 0.5 * opts.h, -0.5 * opts.h}
                                                      : std::vector<double>{opts.h, -opts.h};
  const size_t per_point = offsets.size();
  std::vector<NegativityEstimate> chains(temperatures.size() * per_point);
  parallel_for(chains.size(), opts.workers, [&](size_t task) {
    const size_t i = task / per_point;
    const size_t k = task % per_point;
    const double t = temperatures[i] + offsets[k];
    ChainConfig point = cfg;
    point.seed = sweep_point_seed(cfg.seed, "dndt", lattice, part.id(), temperatures[i], k);
    chains[task] = estimate_negativity(lattice, part, 1.0 / t, point, est);
  });

  std::vector<DerivativePoint> out(temperatures.size());
  for (size_t i = 0; i < temperatures.size(); ++i) {
    const auto* c = &chains[i * per_point];
    DerivativePoint& p = out[i];
    p.temperature = temperatures[i];
    p.n_plus = c[0].value;
    p.n_minus = c[1].value;
    const double diff_err = std::hypot(c[0].std_error, c[1].std_error);
    p.derivative = (c[0].value - c[1].value) / (2.0 * opts.h);
    p.std_error = diff_err / (2.0 * opts.h);
    p.insignificant = std::abs(c[0].value - c[1].value) < diff_err;
    p.warning = c[0].warning || c[1].warning;
    if (opts.richardson) {
      const double half = (c[2].value - c[3].value) / opts.h;
      const double half_err = std::hypot(c[2].std_error, c[3].std_error) / opts.h;
      p.richardson = (4.0 * half - p.derivative) / 3.0;
      p.richardson_error = std::hypot(4.0 * half_err, p.std_error) / 3.0;
      p.warning = p.warning || c[2].warning || c[3].warning;
    } else {
      p.richardson = std::numeric_limits<double>::quiet_NaN();
      p.richardson_error = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

}  // namespace tneg
