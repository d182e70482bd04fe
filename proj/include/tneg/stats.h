#pragma once

#include <span>
#include <vector>

namespace tneg {

struct BinningLevel {
  int bin_size;
  int n_bins;
  double std_error;
};

// Standard error of the mean at bin sizes 1, 2, 4, ... while at least
// `min_bins` bins remain.
std::vector<BinningLevel> binning_analysis(std::span<const double> samples, int min_bins = 32);

// Block-jackknife error of the mean using `n_blocks` contiguous blocks.
double jackknife_error(std::span<const double> samples, int n_blocks = 64);

// Summary of one observable's time series.
struct ChainStats {
  std::vector<double> samples;
  double mean = 0.0;
  double std_error = 0.0;        // largest binned error over usable levels
  double jackknife_error = 0.0;  // cross-check
  double naive_error = 0.0;      // assumes independent samples
  double tau_int = 0.0;          // integrated autocorrelation time, in sweeps
  double n_effective = 0.0;
  bool plateau_reached = true;

  bool warning() const { return !plateau_reached; }
};

// `measure_every` converts autocorrelation times from measurements to sweeps.
ChainStats summarize(std::vector<double> samples, int measure_every = 1);

}  // namespace tneg
