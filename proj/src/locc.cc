#include "tneg/locc.h"

#include <cmath>
#include <stdexcept>

#include "tneg/estimators.h"
#include "tneg/parallel.h"

namespace tneg {

SyndromeRecord measure_syndromes(const Lattice& lattice, const Bipartition& part, const SpinConfig& s) {
  if (s.size() != lattice.num_sites()) throw std::invalid_argument("spin configuration size mismatch");
  const auto& bonds = lattice.bonds();
  SyndromeRecord rec;
  rec.mu.reserve(part.interior_bonds().size());
  for (int k : part.interior_bonds()) rec.mu.push_back(static_cast<Spin>(s[bonds[k].a] * s[bonds[k].b]));
  rec.boundary_pairs.reserve(part.boundary_bonds().size());
  rec.e_vector.reserve(part.boundary_bonds().size());
  for (int k : part.boundary_bonds()) {
    const auto [a, b, axis] = bonds[k];
    const auto pair = part.in_a(a) ? std::pair{a, b} : std::pair{b, a};
    rec.boundary_pairs.push_back(pair);
    rec.e_vector.push_back(static_cast<Spin>(s[pair.first] * s[pair.second]));
  }
  return rec;
}

double DecoderTrial::weight_ratio() const { return std::exp(log_weight_ratio); }

LoccProtocol::LoccProtocol(const Lattice& lattice, const Bipartition& part, double beta)
    : lattice_(lattice), part_(part), beta_(beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta: must be >= 0");
  if (part.boundary_size() == 0) throw std::invalid_argument("LOCC protocol: bipartition has no boundary bonds");

  const int n = lattice.num_sites();
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, mu index)
  const auto& bonds = lattice.bonds();
  for (int m = 0; m < static_cast<int>(part.interior_bonds().size()); ++m) {
    const Bond& b = bonds[part.interior_bonds()[m]];
    adj[b.a].push_back({b.b, m});
    adj[b.b].push_back({b.a, m});
  }
  std::vector<std::uint8_t> seen(n, 0);
  for (std::uint8_t side : {std::uint8_t{1}, std::uint8_t{0}}) {
    int root = -1;
    for (int i = 0; i < n && root < 0; ++i)
      if (part.a_mask()[i] == side) root = i;
    if (root < 0) throw std::invalid_argument("LOCC protocol: A and its complement must both be non-empty");
    roots_.push_back(root);
    seen[root] = 1;
    std::vector<int> frontier{root};
    for (size_t head = 0; head < frontier.size(); ++head) {
      const int v = frontier[head];
      for (auto [w, m] : adj[v]) {
        if (seen[w]) continue;
        seen[w] = 1;
        tree_.push_back({w, v, m});
        frontier.push_back(w);
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (!seen[i])
      throw std::invalid_argument(
          "LOCC protocol: bipartition is not contiguous (A and its complement must each be connected)");
}

std::vector<Spin> LoccProtocol::relative_errors(const SyndromeRecord& record) const {
  if (record.mu.size() != part_.interior_bonds().size())
    throw std::invalid_argument("syndrome record does not match the bipartition");
  std::vector<Spin> rel(lattice_.num_sites(), 0);
  for (int r : roots_) rel[r] = 1;
  for (const auto& e : tree_) rel[e.site] = static_cast<Spin>(rel[e.parent] * record.mu[e.mu_index]);
  std::vector<Spin> c(record.boundary_pairs.size());
  const int ref = rel[record.boundary_pairs[0].first] * rel[record.boundary_pairs[0].second];
  for (size_t k = 0; k < c.size(); ++k) {
    const auto [i, ibar] = record.boundary_pairs[k];
    c[k] = static_cast<Spin>(ref * rel[i] * rel[ibar]);
  }
  return c;
}

DecoderTrial LoccProtocol::decode(const SyndromeRecord& record, Rng& rng) const {
  const auto c = relative_errors(record);
  long sum = 0;
  for (Spin x : c) sum += x;
  DecoderTrial t;
  // Completion tau has e_k = tau c_k, so only the boundary energy differs
  // between the two candidates: log w(+)/w(-) = 2 beta J sum_k c_k.
  t.log_weight_ratio = 2.0 * beta_ * lattice_.coupling() * static_cast<double>(sum);
  t.p_plus = t.log_weight_ratio >= 0 ? 1.0 / (1.0 + std::exp(-t.log_weight_ratio))
                                     : std::exp(t.log_weight_ratio) / (1.0 + std::exp(t.log_weight_ratio));
  t.tau_guess = rng.uniform() < t.p_plus ? 1 : -1;
  t.tau_true = record.e_vector.empty() ? 1 : record.e_vector[0];
  t.success = t.tau_guess == t.tau_true;
  return t;
}

DecoderTrial LoccProtocol::trial(const SpinConfig& s, Rng& rng) const {
  return decode(measure_syndromes(lattice_, part_, s), rng);
}

DecoderTrial protocol_trial(const Lattice& lattice, const Bipartition& part, double beta, const SpinConfig& s,
                            Rng& rng) {
  return LoccProtocol(lattice, part, beta).trial(s, rng);
}

LoccResult run_protocol_trials(const Lattice& lattice, const Bipartition& part, double beta, const ChainConfig& cfg) {
  const LoccProtocol protocol(lattice, part, beta);
  Rng coin(derive_seed(cfg.seed, {hash_string("locc-coin")}));
  std::vector<double> success, formula;
  run_chain(lattice, beta, cfg, [&](const SpinConfig& s) {
    success.push_back(protocol.trial(s, coin).success ? 1.0 : 0.0);
    formula.push_back(fidelity_observable(beta, boundary_energy(lattice, part, s)));
  });
  if (success.empty()) throw std::invalid_argument("measure_every exceeds n_measurement_sweeps");
  LoccResult r;
  r.beta = beta;
  r.partition_id = part.id();
  r.n_trials = static_cast<long>(success.size());
  const ChainStats ss = summarize(std::move(success), cfg.measure_every);
  const ChainStats fs = summarize(std::move(formula), cfg.measure_every);
  r.success_rate = ss.mean;
  r.std_error = ss.std_error;
  r.fidelity_formula_value = fs.mean;
  r.fidelity_formula_error = fs.std_error;
  r.warning = ss.warning() || fs.warning();
  return r;
}

int repetition_decode_ml(std::span<const Spin> syndromes, std::span<const double> log_odds, Rng& rng) {
  const size_t n = log_odds.size();
  if (n == 0) throw std::invalid_argument("repetition decode: need at least one bit");
  if (syndromes.size() != n - 1 && !(n > 1 && syndromes.size() == n))
    throw std::invalid_argument("repetition decode: expected n-1 (chain) or n (ring) syndromes");
  std::vector<int> c(n);
  c[0] = 1;
  for (size_t k = 0; k + 1 < n; ++k) {
    if (syndromes[k] != 1 && syndromes[k] != -1) throw std::invalid_argument("repetition decode: syndromes must be +-1");
    c[k + 1] = c[k] * syndromes[k];
  }
  if (syndromes.size() == n && c[n - 1] * c[0] != syndromes[n - 1])
    throw std::invalid_argument("repetition decode: inconsistent syndromes (ring product is -1)");
  // log P(e = tau c) = const + (tau / 2) sum_i c_i log_odds_i
  double score = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (std::isnan(log_odds[i])) throw std::invalid_argument("repetition decode: NaN log-odds");
    if (std::isinf(log_odds[i])) {
      // A certain bit fixes the answer; contradicting certainties cannot occur
      // for a valid syndrome with consistent weights.
      score += c[i] * (log_odds[i] > 0 ? 1e300 : -1e300);
    } else {
      score += c[i] * log_odds[i];
    }
  }
  if (score > 0) return 1;
  if (score < 0) return -1;
  return rng.coin() ? 1 : -1;
}

std::string to_string(RepetitionDecoder d) { return d == RepetitionDecoder::Majority ? "majority" : "ml"; }

RepetitionDecoder repetition_decoder_from_string(const std::string& name) {
  if (name == "majority") return RepetitionDecoder::Majority;
  if (name == "ml") return RepetitionDecoder::MaximumLikelihood;
  throw std::invalid_argument("unknown decoder '" + name + "' (expected majority or ml)");
}

namespace {

double binomial_pmf(int n, int k, double p) {
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  const double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(log_c + k * std::log(p) + (n - k) * std::log1p(-p));
}

void check_p(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p_flip: must lie in [0, 1]");
}

}  // namespace

double repetition_lower_bound(int n_bits, double p_flip) {
  check_p(p_flip);
  double sum = 0.0;
  for (int k = 0; 2 * k < n_bits; ++k) sum += binomial_pmf(n_bits, k, p_flip);
  return sum;
}

double repetition_exact_success(int n_bits, double p_flip, RepetitionDecoder decoder) {
  check_p(p_flip);
  // ML prefers the heavier completion when p > 1/2 and ties everything at 1/2.
  const bool prefer_heavy = decoder == RepetitionDecoder::MaximumLikelihood && p_flip > 0.5;
  if (decoder == RepetitionDecoder::MaximumLikelihood && p_flip == 0.5) return 0.5;
  double sum = 0.0;
  for (int k = 0; k <= n_bits; ++k) {
    const double pk = binomial_pmf(n_bits, k, p_flip);
    if (2 * k == n_bits)
      sum += 0.5 * pk;
    else if ((2 * k < n_bits) != prefer_heavy)
      sum += pk;
  }
  return sum;
}

RepetitionResult repetition_iid(int n_bits, double p_flip, long n_trials, RepetitionDecoder decoder,
                                std::uint64_t seed) {
  check_p(p_flip);
  if (n_bits < 1) throw std::invalid_argument("n_bits: must be >= 1");
  if (n_trials < 1) throw std::invalid_argument("n_trials: must be >= 1");
  Rng rng(seed);
  std::vector<Spin> e(n_bits), syndromes(n_bits > 1 ? n_bits - 1 : 0);
  const double lo = p_flip == 0.0   ? INFINITY
                    : p_flip == 1.0 ? -INFINITY
                                    : std::log1p(-p_flip) - std::log(p_flip);
  const std::vector<double> log_odds(n_bits, lo);
  long successes = 0;
  for (long t = 0; t < n_trials; ++t) {
    for (auto& x : e) x = rng.bernoulli(p_flip) ? Spin{-1} : Spin{1};
    for (int k = 0; k + 1 < n_bits; ++k) syndromes[k] = static_cast<Spin>(e[k] * e[k + 1]);
    int guess;
    if (decoder == RepetitionDecoder::MaximumLikelihood) {
      guess = repetition_decode_ml(syndromes, log_odds, rng);
    } else {
      // Completion tau = +1 has e = c; choose the completion with fewer flips.
      int c = 1, flips_plus = 0;
      for (int k = 0; k < n_bits; ++k) {
        if (k > 0) c *= syndromes[k - 1];
        flips_plus += c < 0;
      }
      const int flips_minus = n_bits - flips_plus;
      guess = flips_plus < flips_minus ? 1 : flips_plus > flips_minus ? -1 : (rng.coin() ? 1 : -1);
    }
    successes += guess == e[0];
  }
  RepetitionResult r;
  r.n_bits = n_bits;
  r.p_flip = p_flip;
  r.n_trials = n_trials;
  r.decoder = decoder;
  r.success_rate = static_cast<double>(successes) / static_cast<double>(n_trials);
  r.std_error = std::sqrt(r.success_rate * (1.0 - r.success_rate) / static_cast<double>(n_trials));
  r.exact_success = repetition_exact_success(n_bits, p_flip, decoder);
  r.lower_bound = repetition_lower_bound(n_bits, p_flip);
  return r;
}

std::vector<RepetitionResult> threshold_scan(std::span<const int> n_bits_list, std::span<const double> p_grid,
                                             long n_trials, RepetitionDecoder decoder, std::uint64_t seed,
                                             int workers) {
  std::vector<RepetitionResult> out(n_bits_list.size() * p_grid.size());
  parallel_for(out.size(), workers, [&](size_t task) {
    const int n = n_bits_list[task / p_grid.size()];
    const double p = p_grid[task % p_grid.size()];
    const std::uint64_t s =
        derive_seed(seed, {hash_string("repetition"), static_cast<std::uint64_t>(n), double_bits(p)});
    out[task] = repetition_iid(n, p, n_trials, decoder, s);
  });
  return out;
}

DomainWallStats domain_wall_density(const Lattice& lattice, const Bipartition& part, double beta,
                                    const ChainConfig& cfg) {
  if (part.boundary_size() == 0) throw std::invalid_argument("domain wall density: empty boundary");
  const auto& bonds = lattice.bonds();
  const double inv = 1.0 / part.boundary_size();
  std::vector<double> density, half;
  run_chain(lattice, beta, cfg, [&](const SpinConfig& s) {
    int k = 0;
    for (int b : part.boundary_bonds()) k += s[bonds[b].a] != s[bonds[b].b];
    density.push_back(k * inv);
    half.push_back(2 * k >= part.boundary_size() ? 1.0 : 0.0);
  });
  if (density.empty()) throw std::invalid_argument("measure_every exceeds n_measurement_sweeps");
  return {summarize(std::move(density), cfg.measure_every), summarize(std::move(half), cfg.measure_every)};
}

}  // namespace tneg
