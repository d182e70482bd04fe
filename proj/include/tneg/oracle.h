#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tneg/lattice.h"

namespace tneg::oracle {

// Exhaustive enumeration limit. Basis state bit i set means spin i is down.
inline constexpr int kMaxEnumerationSites = 16;
// Dense 2^N x 2^N matrix limit.
inline constexpr int kMaxDenseSites = 10;

// -beta H[sigma] for every basis state.
std::vector<double> log_boltzmann_weights(const Lattice& lattice, double beta);

// log Z by log-sum-exp over all 2^N configurations.
double log_partition_function(const Lattice& lattice, double beta);

// Exact Boltzmann average of f.
double thermal_average(const Lattice& lattice, double beta, const std::function<double(const SpinConfig&)>& f);

// rho_beta = (1/Z) sum_sigma e^{-beta H} |psi_sigma><psi_sigma|, stored as
// its two non-zero diagonals: <sigma|rho|sigma> and <sigma|rho|flip(sigma)>.
class DensityMatrixSparse {
 public:
  static DensityMatrixSparse thermal_ghz(const Lattice& lattice, double beta);

  int num_sites() const { return n_; }
  std::uint64_t dimension() const { return std::uint64_t{1} << n_; }
  std::uint64_t flip_all(std::uint64_t basis) const { return basis ^ (dimension() - 1); }

  double element(std::uint64_t row, std::uint64_t col) const;
  double diagonal(std::uint64_t basis) const { return diag_[basis]; }
  double anti_diagonal(std::uint64_t basis) const { return anti_[basis]; }

  double trace() const;
  double hermiticity_defect() const;      // max |rho_ab - rho_ba|
  double strong_symmetry_defect() const;  // max |(U rho)_ab - rho_ab|, U = prod_j X_j
  double global_flip_expectation() const; // Tr(rho U)

  // Spectrum from the 2x2 blocks on {sigma, flip(sigma)}.
  std::vector<double> eigenvalues() const;

  // Reduced state on the sites with keep_mask set (at most 12 of them).
  Eigen::MatrixXd reduced(std::span<const std::uint8_t> keep_mask) const;

  Eigen::MatrixXd to_dense() const;

 private:
  int n_ = 0;
  std::vector<double> diag_;
  std::vector<double> anti_;
};

Eigen::MatrixXd partial_transpose(const Eigen::MatrixXd& rho, std::span<const std::uint8_t> a_mask);
std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& m);

// Analytic spectrum of the partial transpose: one pair per Z2 orbit,
// lambda_pm = (e^{-beta H[sigma]} +- e^{-beta H[sigma_A, flip(sigma_Abar)]}) / Z.
struct NegativitySpectrum {
  struct Pair {
    std::uint64_t representative;  // orbit member with site 0 up
    double plus;
    double minus;
  };
  std::vector<Pair> pairs;

  double sum() const;
  double sum_abs() const;
  double negativity() const { return 0.5 * (sum_abs() - 1.0); }
  std::vector<double> all() const;
};

NegativitySpectrum negativity_spectrum(const Lattice& lattice, const Bipartition& part, double beta);

// (1/4Z) sum_sigma |e^{-beta H[sigma]} - e^{-beta H[sigma_A, flip(sigma_Abar)]}|
double exact_negativity(const Lattice& lattice, const Bipartition& part, double beta);

// 1/2 (1 - <tanh(beta H_boundary)>) by enumeration.
double exact_fidelity(const Lattice& lattice, const Bipartition& part, double beta);

// Same quantity from the protocol itself: for every sigma, rebuild the two
// configurations consistent with its interior syndromes, weight the guess
// by their full Boltzmann weights and count the correct guesses.
double exact_fidelity_protocol(const Lattice& lattice, const Bipartition& part, double beta);

struct CmiResult {
  double cmi = 0.0;            // of rho_beta
  double cmi_classical = 0.0;  // of the classical Gibbs state
  double s_ab = 0.0;
  double s_bc = 0.0;
  double s_b = 0.0;
  double s_abc = 0.0;          // von Neumann entropy of rho_beta
  double s_abc_classical = 0.0;
};

// Shannon entropy (natural log) of the Gibbs marginal on the masked sites.
double marginal_entropy(const Lattice& lattice, double beta, std::span<const std::uint8_t> mask);

CmiResult cmi_exact(const Lattice& lattice, const TripartitionABC& tri, double beta);

// Output of maximal Z_i Z_j dephasing on every bond applied to |phi_+><phi_+|,
// |phi_+> = Z^{-1/2} sum_sigma e^{-beta H / 2} |sigma>.
Eigen::MatrixXd fdlc_output(const Lattice& lattice, double beta);

// max_ab |fdlc_output - rho_beta|. Periodic lattices with N <= 10.
double verify_fdlc(const Lattice& lattice, double beta);

// max_j || Q_j |phi_+> || with Q_j = -X_j + prod_{i in NN(j)} e^{-beta J Z_i Z_j}.
double verify_parent_hamiltonian(const Lattice& lattice, double beta);

}  // namespace tneg::oracle
