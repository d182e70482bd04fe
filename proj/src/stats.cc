#include "tneg/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tneg {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double error_of_mean(std::span<const double> x) {
  const size_t n = x.size();
  if (n < 2) return 0.0;
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

}  // namespace

std::vector<BinningLevel> binning_analysis(std::span<const double> samples, int min_bins) {
  std::vector<BinningLevel> levels;
  std::vector<double> bins(samples.begin(), samples.end());
  int bin_size = 1;
  while (static_cast<int>(bins.size()) >= std::max(min_bins, 2) || levels.empty()) {
    levels.push_back({bin_size, static_cast<int>(bins.size()), error_of_mean(bins)});
    if (bins.size() < 4) break;
    std::vector<double> next(bins.size() / 2);
    for (size_t i = 0; i < next.size(); ++i) next[i] = 0.5 * (bins[2 * i] + bins[2 * i + 1]);
    bins = std::move(next);
    bin_size *= 2;
  }
  return levels;
}

double jackknife_error(std::span<const double> samples, int n_blocks) {
  if (n_blocks < 2) throw std::invalid_argument("jackknife: need at least two blocks");
  const size_t block = samples.size() / static_cast<size_t>(n_blocks);
  if (block == 0) return error_of_mean(samples);
  const size_t used = block * static_cast<size_t>(n_blocks);
  const double total = std::accumulate(samples.begin(), samples.begin() + used, 0.0);
  std::vector<double> leave_one_out(n_blocks);
  for (int b = 0; b < n_blocks; ++b) {
    const auto first = samples.begin() + static_cast<std::ptrdiff_t>(b * block);
    const double block_sum = std::accumulate(first, first + static_cast<std::ptrdiff_t>(block), 0.0);
    leave_one_out[b] = (total - block_sum) / static_cast<double>(used - block);
  }
  const double m = mean_of(leave_one_out);
  double ss = 0.0;
  for (double v : leave_one_out) ss += (v - m) * (v - m);
  return std::sqrt(ss * (n_blocks - 1) / n_blocks);
}

ChainStats summarize(std::vector<double> samples, int measure_every) {
  if (samples.empty()) throw std::invalid_argument("summarize: no samples");
  ChainStats st;
  const auto n = static_cast<double>(samples.size());
  st.mean = mean_of(samples);
  // Clamp round-off so the mean always lies inside the sample range.
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  st.mean = std::clamp(st.mean, *lo, *hi);
  st.naive_error = error_of_mean(samples);

  // Levels with few bins carry 10-20% noise and taking the maximum over them
  // biases the error upward; use the well-populated levels when there are
  // at least three of them.
  auto levels = binning_analysis(samples, 128);
  if (levels.size() < 3) levels = binning_analysis(samples, 32);
  st.std_error = 0.0;
  for (const auto& lv : levels) st.std_error = std::max(st.std_error, lv.std_error);

  if (st.naive_error == 0.0) {
    st.std_error = 0.0;
    st.tau_int = 0.5 * measure_every;
    st.n_effective = n;
    st.plateau_reached = true;
  } else {
    const double ratio = (st.std_error * st.std_error) / (st.naive_error * st.naive_error);
    st.tau_int = 0.5 * ratio * measure_every;
    st.n_effective = std::min(n, n / ratio);
    if (levels.size() < 3) {
      st.plateau_reached = false;
    } else {
      const auto& last = levels.back();
      const auto& prev = levels[levels.size() - 2];
      const double rel_uncertainty = 1.0 / std::sqrt(2.0 * (last.n_bins - 1));
      st.plateau_reached = std::abs(last.std_error - prev.std_error) <= 2.0 * rel_uncertainty * last.std_error;
    }
  }
  st.jackknife_error = jackknife_error(samples, std::min<int>(64, std::max<int>(2, static_cast<int>(samples.size()))));
  st.samples = std::move(samples);
  return st;
}

}  // namespace tneg
