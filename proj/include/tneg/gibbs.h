#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tneg/lattice.h"
#include "tneg/rng.h"
#include "tneg/stats.h"

namespace tneg {

enum class UpdateRule { MetropolisSingleSpin, WolffCluster };

std::string to_string(UpdateRule rule);
UpdateRule update_rule_from_string(const std::string& name);

struct ChainConfig {
  int n_thermalization_sweeps = 1000;
  int n_measurement_sweeps = 10000;
  int measure_every = 5;
  std::uint64_t seed = 1;
  UpdateRule update_rule = UpdateRule::MetropolisSingleSpin;
  // Ignore n_thermalization_sweeps and use recommended_thermalization().
  bool auto_thermalization = false;

  void validate() const;

  // measure_every = 1 for Wolff, 5 for Metropolis; 1000 thermalization sweeps.
  static ChainConfig defaults(UpdateRule rule);
};

// Random-scan single-spin Metropolis at fixed beta. One sweep is N proposals at
// uniformly random sites (with replacement); a proposal is accepted with
// probability min{1, exp(-beta dE)}, dE evaluated from the local field.
class MetropolisKernel {
 public:
  MetropolisKernel(const Lattice& lattice, double beta);

  void sweep(SpinConfig& s, Rng& rng) const;
  bool step(SpinConfig& s, int site, Rng& rng) const;

 private:
  const Lattice& lattice_;
  int z_;                           // max coordination
  std::vector<double> acceptance_;  // indexed by sigma_i * h_i + z
};

void metropolis_sweep(const Lattice& lattice, double beta, SpinConfig& s, Rng& rng);

// Single-cluster Wolff update with bond activation probability 1 - exp(-2 beta J).
class WolffKernel {
 public:
  WolffKernel(const Lattice& lattice, double beta);

  // Grows and flips one cluster from a random seed site; returns its size.
  int flip_cluster(SpinConfig& s, Rng& rng);

 private:
  const Lattice& lattice_;
  double p_add_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
  std::vector<int> stack_;
};

int wolff_sweep(const Lattice& lattice, double beta, SpinConfig& s, Rng& rng);

// Owns one Markov chain (configuration, kernel and RNG stream). For the Wolff
// rule a "sweep" flips about N spins: during thermalization it runs clusters
// until N spins have flipped, and freeze_sweep_length() then fixes the
// number of clusters per sweep from the observed mean cluster size. A fixed
// count is required for measurements; stopping on the flipped-spin total
// samples at a state-dependent time and biases the measured law.
class GibbsChain {
 public:
  GibbsChain(const Lattice& lattice, double beta, UpdateRule rule, std::uint64_t seed);

  void sweep();
  void freeze_sweep_length();
  int clusters_per_sweep() const { return clusters_per_sweep_; }
  const SpinConfig& config() const { return config_; }
  SpinConfig& config() { return config_; }
  Rng& rng() { return rng_; }

 private:
  const Lattice& lattice_;
  UpdateRule rule_;
  SpinConfig config_;
  Rng rng_;
  MetropolisKernel metropolis_;
  WolffKernel wolff_;
  int clusters_per_sweep_ = 0;  // 0 while adaptive
  long clusters_flipped_ = 0;
  long spins_flipped_ = 0;
};

using Observable = std::function<double(const SpinConfig&)>;
using MeasurementVisitor = std::function<void(const SpinConfig&)>;

// Thermalizes from the all-up state, then calls `measure` every
// `measure_every` sweeps for n_measurement_sweeps sweeps.
void run_chain(const Lattice& lattice, double beta, const ChainConfig& cfg, const MeasurementVisitor& measure);

std::vector<ChainStats> run_chain(const Lattice& lattice, double beta, const ChainConfig& cfg,
                                  std::span<const Observable> observables);

// max(1000, 20 tau_int) with tau_int of the energy from a 2000-sweep pilot run.
int recommended_thermalization(const Lattice& lattice, double beta, UpdateRule rule, std::uint64_t seed);

}  // namespace tneg
