#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tneg/gibbs.h"
#include "tneg/lattice.h"

namespace tneg {

// DirectP samples p[sigma]; ExplicitQ flips the complement region with
// probability 1/2 after each draw, i.e. samples q[sigma] = (p[sigma] + p[sigma_A, flip(sigma_Abar)]) / 2.
// The negativity observable is flip-even, so both give the same estimator in law.
enum class SamplingMode { DirectP, ExplicitQ };

std::string to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(const std::string& name);

struct EstimatorOptions {
  SamplingMode mode = SamplingMode::DirectP;
  // Average the observable over every lattice translate of A (periodic only).
  bool translation_average = false;
};

struct NegativityEstimate {
  double beta = 0.0;
  std::string partition_id;
  double value = 0.0;
  double std_error = 0.0;
  double n_effective = 0.0;
  double tau_int = 0.0;
  SamplingMode sampling_mode = SamplingMode::DirectP;
  bool warning = false;
};

struct FidelityEstimate {
  double beta = 0.0;
  std::string partition_id;
  double value = 0.0;
  double std_error = 0.0;
  double n_effective = 0.0;
  double tau_int = 0.0;
  bool warning = false;
};

// Boundary energies of A and (optionally) all of its lattice translates.
class BoundaryEnergyEvaluator {
 public:
  BoundaryEnergyEvaluator(const Lattice& lattice, const Bipartition& part, bool all_translates);

  int num_translates() const { return n_translates_; }
  int boundary_size() const { return boundary_size_; }
  // Fills one boundary energy per translate.
  void evaluate(const SpinConfig& s, std::vector<double>& out) const;
  // Same, as integer bond sums (the energy is -J times the sum).
  void evaluate_sums(const SpinConfig& s, std::vector<int>& out) const;

 private:
  double coupling_;
  int n_translates_;
  int boundary_size_;
  std::vector<int> pairs_;  // flattened (a, b) site pairs, translate-major
};

struct BoundaryEstimates {
  NegativityEstimate negativity;
  FidelityEstimate fidelity;
};

// Negativity and fidelity from the same chain.
BoundaryEstimates estimate_boundary_observables(const Lattice& lattice, const Bipartition& part, double beta,
                                                const ChainConfig& cfg, const EstimatorOptions& opts = {});

// 1/2 <|tanh(beta H_boundary)|>.
NegativityEstimate estimate_negativity(const Lattice& lattice, const Bipartition& part, double beta,
                                       const ChainConfig& cfg, const EstimatorOptions& opts = {});

// 1/2 (1 - <tanh(beta H_boundary)>) over a p-distributed chain.
FidelityEstimate estimate_fidelity(const Lattice& lattice, const Bipartition& part, double beta,
                                   const ChainConfig& cfg, const EstimatorOptions& opts = {});

// Seed of one sweep point; depends only on the point's identity.
std::uint64_t sweep_point_seed(std::uint64_t master, std::string_view kind, const Lattice& lattice,
                               const std::string& partition_id, double temperature, std::uint64_t replica = 0);

// One independent chain per temperature (strictly positive, ascending).
std::vector<NegativityEstimate> negativity_temperature_sweep(const Lattice& lattice, const Bipartition& part,
                                                             std::span<const double> temperatures,
                                                             const ChainConfig& cfg,
                                                             const EstimatorOptions& opts = {}, int workers = 1);

std::vector<FidelityEstimate> fidelity_temperature_sweep(const Lattice& lattice, const Bipartition& part,
                                                         std::span<const double> temperatures,
                                                         const ChainConfig& cfg, int workers = 1);

struct DerivativePoint {
  double temperature = 0.0;
  double derivative = 0.0;  // (N(T+h) - N(T-h)) / 2h
  double std_error = 0.0;
  double richardson = 0.0;  // (4 D(h/2) - D(h)) / 3, NaN when not requested
  double richardson_error = 0.0;
  double n_plus = 0.0;
  double n_minus = 0.0;
  // |N(T+h) - N(T-h)| is smaller than its combined error.
  bool insignificant = false;
  bool warning = false;
};

struct DerivativeOptions {
  double h = 0.02;
  bool richardson = false;
  bool translation_average = true;
  int workers = 1;
};

// Centred finite-difference dN/dT for a single-site region A.
std::vector<DerivativePoint> dN_dT_single_site(const Lattice& lattice, std::span<const double> temperatures,
                                               const ChainConfig& cfg, const DerivativeOptions& opts = {});

// Per-sample observables. tanh is taken of beta * H_boundary directly; the
// equivalent |1 - exp(2 beta H_boundary)| form overflows.
inline double negativity_observable(double beta, double boundary_energy) {
  return 0.5 * std::abs(std::tanh(beta * boundary_energy));
}

inline double fidelity_observable(double beta, double boundary_energy) {
  return 0.5 * (1.0 - std::tanh(beta * boundary_energy));
}

}  // namespace tneg
