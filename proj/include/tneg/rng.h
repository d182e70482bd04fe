#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace tneg {

// Stream-splitting rule: every task derives its seed by folding its identity
// words (kind, size, temperature bits, replica, ...) into the master seed with
// SplitMix64 finalisation. Streams depend only on task identity, never on
// which worker runs the task or in what order.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);
std::uint64_t hash_string(std::string_view s);  // FNV-1a, stable across platforms
std::uint64_t double_bits(double x);

// mt19937_64 with distribution code written out so that draws are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased (Lemire's multiply-shift with rejection).
  std::uint32_t below(std::uint32_t n) {
    std::uint64_t m = static_cast<std::uint64_t>(static_cast<std::uint32_t>(engine_() >> 32)) * n;
    auto low = static_cast<std::uint32_t>(m);
    if (low < n) {
      const std::uint32_t threshold = static_cast<std::uint32_t>(-n) % n;
      while (low < threshold) {
        m = static_cast<std::uint64_t>(static_cast<std::uint32_t>(engine_() >> 32)) * n;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  bool coin() { return (engine_() >> 63) != 0; }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tneg
