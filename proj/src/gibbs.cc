#include "tneg/gibbs.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tneg {

std::string to_string(UpdateRule rule) {
  return rule == UpdateRule::WolffCluster ? "wolff" : "metropolis";
}

UpdateRule update_rule_from_string(const std::string& name) {
  if (name == "metropolis") return UpdateRule::MetropolisSingleSpin;
  if (name == "wolff") return UpdateRule::WolffCluster;
  throw std::invalid_argument("unknown update rule '" + name + "' (expected metropolis or wolff)");
}

void ChainConfig::validate() const {
  if (n_thermalization_sweeps < 1) throw std::invalid_argument("n_thermalization_sweeps: must be >= 1");
  if (n_measurement_sweeps < 1) throw std::invalid_argument("n_measurement_sweeps: must be >= 1");
  if (measure_every < 1) throw std::invalid_argument("measure_every: must be >= 1");
}

ChainConfig ChainConfig::defaults(UpdateRule rule) {
  ChainConfig cfg;
  cfg.update_rule = rule;
  cfg.measure_every = rule == UpdateRule::WolffCluster ? 1 : 5;
  return cfg;
}

MetropolisKernel::MetropolisKernel(const Lattice& lattice, double beta)
    : lattice_(lattice), z_(lattice.max_coordination()), acceptance_(2 * lattice.max_coordination() + 1) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  for (int x = -z_; x <= z_; ++x) {
    // dE = 2 J sigma_i h_i
    acceptance_[x + z_] = x <= 0 ? 1.0 : std::exp(-beta * 2.0 * lattice.coupling() * x);
  }
}

bool MetropolisKernel::step(SpinConfig& s, int site, Rng& rng) const {
  int h = 0;
  for (int j : lattice_.neighbors(site)) h += s[j];
  const int x = s[site] * h;
  if (x <= 0 || rng.uniform() < acceptance_[x + z_]) {
    s[site] = static_cast<Spin>(-s[site]);
    return true;
  }
  return false;
}

void MetropolisKernel::sweep(SpinConfig& s, Rng& rng) const {
  const auto n = static_cast<std::uint32_t>(lattice_.num_sites());
  for (std::uint32_t k = 0; k < n; ++k) step(s, static_cast<int>(rng.below(n)), rng);
}

void metropolis_sweep(const Lattice& lattice, double beta, SpinConfig& s, Rng& rng) {
  MetropolisKernel(lattice, beta).sweep(s, rng);
}

WolffKernel::WolffKernel(const Lattice& lattice, double beta)
    : lattice_(lattice), p_add_(-std::expm1(-2.0 * beta * lattice.coupling())), stamp_(lattice.num_sites(), 0) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
}

int WolffKernel::flip_cluster(SpinConfig& s, Rng& rng) {
  if (++generation_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    generation_ = 1;
  }
  const int seed = static_cast<int>(rng.below(static_cast<std::uint32_t>(lattice_.num_sites())));
  const Spin orientation = s[seed];
  stamp_[seed] = generation_;
  s[seed] = static_cast<Spin>(-orientation);
  stack_.clear();
  stack_.push_back(seed);
  int size = 1;
  while (!stack_.empty()) {
    const int v = stack_.back();
    stack_.pop_back();
    for (int w : lattice_.neighbors(v)) {
      if (stamp_[w] == generation_ || s[w] != orientation) continue;
      if (rng.uniform() < p_add_) {
        stamp_[w] = generation_;
        s[w] = static_cast<Spin>(-orientation);
        stack_.push_back(w);
        ++size;
      }
    }
  }
  return size;
}

int wolff_sweep(const Lattice& lattice, double beta, SpinConfig& s, Rng& rng) {
  WolffKernel kernel(lattice, beta);
  return kernel.flip_cluster(s, rng);
}

GibbsChain::GibbsChain(const Lattice& lattice, double beta, UpdateRule rule, std::uint64_t seed)
    : lattice_(lattice),
      rule_(rule),
      config_(SpinConfig::all_up(lattice.num_sites())),
      rng_(seed),
      metropolis_(lattice, beta),
      wolff_(lattice, beta) {}

void GibbsChain::sweep() {
  if (rule_ == UpdateRule::MetropolisSingleSpin) {
    metropolis_.sweep(config_, rng_);
    return;
  }
  if (clusters_per_sweep_ > 0) {
    for (int c = 0; c < clusters_per_sweep_; ++c) wolff_.flip_cluster(config_, rng_);
    return;
  }
  int flipped = 0;
  while (flipped < lattice_.num_sites()) {
    flipped += wolff_.flip_cluster(config_, rng_);
    ++clusters_flipped_;
  }
  spins_flipped_ += flipped;
}

void GibbsChain::freeze_sweep_length() {
  if (rule_ != UpdateRule::WolffCluster || clusters_per_sweep_ > 0) return;
  if (clusters_flipped_ == 0) {
    clusters_per_sweep_ = 1;
    return;
  }
  const double mean_size = static_cast<double>(spins_flipped_) / static_cast<double>(clusters_flipped_);
  clusters_per_sweep_ = std::max(1, static_cast<int>(std::lround(lattice_.num_sites() / mean_size)));
}

void run_chain(const Lattice& lattice, double beta, const ChainConfig& cfg, const MeasurementVisitor& measure) {
  cfg.validate();
  GibbsChain chain(lattice, beta, cfg.update_rule, cfg.seed);
  const int n_therm = cfg.auto_thermalization ? recommended_thermalization(lattice, beta, cfg.update_rule, cfg.seed)
                                             : cfg.n_thermalization_sweeps;
  for (int t = 0; t < n_therm; ++t) chain.sweep();
  chain.freeze_sweep_length();
  for (int t = 1; t <= cfg.n_measurement_sweeps; ++t) {
    chain.sweep();
    if (t % cfg.measure_every == 0) measure(chain.config());
  }
}

std::vector<ChainStats> run_chain(const Lattice& lattice, double beta, const ChainConfig& cfg,
                                  std::span<const Observable> observables) {
  std::vector<std::vector<double>> series(observables.size());
  for (auto& s : series) s.reserve(static_cast<size_t>(cfg.n_measurement_sweeps / cfg.measure_every));
  run_chain(lattice, beta, cfg, [&](const SpinConfig& s) {
    for (size_t k = 0; k < observables.size(); ++k) series[k].push_back(observables[k](s));
  });
  std::vector<ChainStats> out;
  out.reserve(series.size());
  for (auto& s : series) {
    if (s.empty()) throw std::invalid_argument("run_chain: measure_every exceeds n_measurement_sweeps");
    out.push_back(summarize(std::move(s), cfg.measure_every));
  }
  return out;
}

int recommended_thermalization(const Lattice& lattice, double beta, UpdateRule rule, std::uint64_t seed) {
  ChainConfig pilot;
  pilot.update_rule = rule;
  pilot.n_thermalization_sweeps = 200;
  pilot.n_measurement_sweeps = 2000;
  pilot.measure_every = 1;
  pilot.seed = derive_seed(seed, {hash_string("pilot")});
  const Observable e = [&](const SpinConfig& s) { return energy(lattice, s); };
  const auto stats = run_chain(lattice, beta, pilot, std::span<const Observable>(&e, 1));
  return std::max(1000, static_cast<int>(std::ceil(20.0 * stats[0].tau_int)));
}

}  // namespace tneg
