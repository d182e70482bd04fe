#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tneg/gibbs.h"
#include "tneg/lattice.h"
#include "tneg/stats.h"

namespace tneg {

// What the two parties learn from measuring Z_i Z_j on every bond inside A or
// inside its complement, plus the hidden boundary error vector.
struct SyndromeRecord {
  std::vector<Spin> mu;  // aligned with Bipartition::interior_bonds()
  std::vector<std::pair<int, int>> boundary_pairs;  // (i in A, facing site in complement), boundary-bond order
  std::vector<Spin> e_vector;  // e_k = sigma_i sigma_ibar; not visible to the decoder
};

SyndromeRecord measure_syndromes(const Lattice& lattice, const Bipartition& part, const SpinConfig& s);

struct DecoderTrial {
  int tau_true = 1;   // sigma_1 sigma_1bar of the first boundary pair
  int tau_guess = 1;
  double log_weight_ratio = 0.0;  // log(w(tau=+1) / w(tau=-1))
  double p_plus = 0.5;            // probability of guessing tau = +1
  bool success = false;

  double weight_ratio() const;
};

// Two-step recovery protocol for a contiguous bipartition: measure interior
// syndromes, then pick one of the two consistent domain-wall completions with
// probability proportional to its Boltzmann weight.
class LoccProtocol {
 public:
  // Throws std::invalid_argument unless A and its complement are each
  // connected through interior bonds.
  LoccProtocol(const Lattice& lattice, const Bipartition& part, double beta);

  // c_k = e_0 e_k reconstructed from the interior syndromes alone.
  std::vector<Spin> relative_errors(const SyndromeRecord& record) const;

  DecoderTrial decode(const SyndromeRecord& record, Rng& rng) const;
  DecoderTrial trial(const SpinConfig& s, Rng& rng) const;

 private:
  struct TreeEdge {
    int site;
    int parent;
    int mu_index;
  };

  const Lattice& lattice_;
  const Bipartition& part_;
  double beta_;
  std::vector<TreeEdge> tree_;  // BFS order over A, then over the complement
  std::vector<int> roots_;
};

DecoderTrial protocol_trial(const Lattice& lattice, const Bipartition& part, double beta, const SpinConfig& s,
                            Rng& rng);

struct LoccResult {
  double beta = 0.0;
  std::string partition_id;
  long n_trials = 0;
  double success_rate = 0.0;
  double std_error = 0.0;
  double fidelity_formula_value = 0.0;  // 1/2 (1 - <tanh(beta H_boundary)>) on the same samples
  double fidelity_formula_error = 0.0;
  bool warning = false;
};

// One protocol trial per measured configuration of a Gibbs chain.
LoccResult run_protocol_trials(const Lattice& lattice, const Bipartition& part, double beta, const ChainConfig& cfg);

// Maximum-likelihood decoding of a repetition code. `syndromes` holds
// e_k e_{k+1} for k = 0..n-2 (open chain) or additionally e_{n-1} e_0 (ring);
// `log_odds[i]` = log P(e_i = +1) / P(e_i = -1). Returns the guess for e_0.
// Ties are broken with a fair coin. Inconsistent ring syndromes are rejected.
int repetition_decode_ml(std::span<const Spin> syndromes, std::span<const double> log_odds, Rng& rng);

enum class RepetitionDecoder { Majority, MaximumLikelihood };

std::string to_string(RepetitionDecoder d);
RepetitionDecoder repetition_decoder_from_string(const std::string& name);

struct RepetitionResult {
  int n_bits = 0;
  double p_flip = 0.0;
  long n_trials = 0;
  RepetitionDecoder decoder = RepetitionDecoder::Majority;
  double success_rate = 0.0;
  double std_error = 0.0;
  double exact_success = 0.0;  // binomial evaluation for this decoder
  double lower_bound = 0.0;    // sum over |e| < n/2 of p_e
};

// Sum over k < n/2 of C(n, k) p^k (1 - p)^(n - k).
double repetition_lower_bound(int n_bits, double p_flip);
double repetition_exact_success(int n_bits, double p_flip, RepetitionDecoder decoder);

RepetitionResult repetition_iid(int n_bits, double p_flip, long n_trials, RepetitionDecoder decoder,
                                std::uint64_t seed);

std::vector<RepetitionResult> threshold_scan(std::span<const int> n_bits_list, std::span<const double> p_grid,
                                             long n_trials, RepetitionDecoder decoder, std::uint64_t seed,
                                             int workers = 1);

struct DomainWallStats {
  ChainStats density;        // k / |boundary|
  ChainStats at_least_half;  // indicator of k / |boundary| >= 1/2
};

DomainWallStats domain_wall_density(const Lattice& lattice, const Bipartition& part, double beta,
                                    const ChainConfig& cfg);

}  // namespace tneg
