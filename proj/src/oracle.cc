#include "tneg/oracle.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tneg::oracle {

namespace {

void require_enumerable(const Lattice& lattice) {
  if (lattice.num_sites() > kMaxEnumerationSites)
    throw std::invalid_argument("oracle: " + std::to_string(lattice.num_sites()) + " sites exceeds the enumeration limit of " +
                                std::to_string(kMaxEnumerationSites));
}

void require_dense(int n) {
  if (n > kMaxDenseSites)
    throw std::invalid_argument("oracle: " + std::to_string(n) + " sites exceeds the dense-matrix limit of " +
                                std::to_string(kMaxDenseSites));
}

void require_beta(double beta) {
  if (!(beta >= 0.0) || std::isinf(beta)) throw std::invalid_argument("oracle: beta must be finite and >= 0");
}

int bits_bond_sum(const Lattice& lattice, std::uint64_t bits) {
  int sum = 0;
  for (const Bond& b : lattice.bonds()) sum += (((bits >> b.a) ^ (bits >> b.b)) & 1U) ? -1 : 1;
  return sum;
}

int bits_boundary_sum(const Lattice& lattice, const Bipartition& part, std::uint64_t bits) {
  const auto& bonds = lattice.bonds();
  int sum = 0;
  for (int k : part.boundary_bonds()) sum += (((bits >> bonds[k].a) ^ (bits >> bonds[k].b)) & 1U) ? -1 : 1;
  return sum;
}

std::uint64_t mask_bits(std::span<const std::uint8_t> mask) {
  std::uint64_t m = 0;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) m |= std::uint64_t{1} << i;
  return m;
}

// Compresses the bits selected by `mask` into a dense index.
std::uint64_t extract_bits(std::uint64_t bits, std::uint64_t mask) {
  std::uint64_t out = 0;
  int k = 0;
  for (; mask; mask &= mask - 1, ++k) {
    const int i = __builtin_ctzll(mask);
    out |= ((bits >> i) & 1U) << k;
  }
  return out;
}

double shannon(const std::vector<double>& p) {
  double s = 0.0;
  for (double x : p)
    if (x > 0.0) s -= x * std::log(x);
  return s;
}

// Normalised Boltzmann probabilities built from integer bond-sum differences
// relative to the ground state, so no large log Z is ever subtracted.
struct Gibbs {
  std::vector<int> bond_sums;
  std::vector<double> p;
  double log_z = 0.0;
};

Gibbs gibbs(const Lattice& lattice, double beta) {
  require_enumerable(lattice);
  require_beta(beta);
  const std::uint64_t dim = std::uint64_t{1} << lattice.num_sites();
  const double bj = beta * lattice.coupling();
  Gibbs g;
  g.bond_sums.resize(dim);
  for (std::uint64_t s = 0; s < dim; ++s) g.bond_sums[s] = bits_bond_sum(lattice, s);
  const int top = *std::max_element(g.bond_sums.begin(), g.bond_sums.end());
  g.p.resize(dim);
  double z = 0.0;
  for (std::uint64_t s = 0; s < dim; ++s) z += g.p[s] = std::exp(bj * (g.bond_sums[s] - top));
  for (double& x : g.p) x /= z;
  g.log_z = bj * top + std::log(z);
  return g;
}

}  // namespace

std::vector<double> log_boltzmann_weights(const Lattice& lattice, double beta) {
  require_enumerable(lattice);
  require_beta(beta);
  const std::uint64_t dim = std::uint64_t{1} << lattice.num_sites();
  std::vector<double> lw(dim);
  const double bj = beta * lattice.coupling();
  for (std::uint64_t s = 0; s < dim; ++s) lw[s] = bj * bits_bond_sum(lattice, s);
  return lw;
}

double log_partition_function(const Lattice& lattice, double beta) { return gibbs(lattice, beta).log_z; }

double thermal_average(const Lattice& lattice, double beta, const std::function<double(const SpinConfig&)>& f) {
  const Gibbs g = gibbs(lattice, beta);
  double acc = 0.0;
  for (std::uint64_t s = 0; s < g.p.size(); ++s)
    acc += g.p[s] * f(SpinConfig::from_bits(s, lattice.num_sites()));
  return acc;
}

DensityMatrixSparse DensityMatrixSparse::thermal_ghz(const Lattice& lattice, double beta) {
  const Gibbs g = gibbs(lattice, beta);
  DensityMatrixSparse rho;
  rho.n_ = lattice.num_sites();
  rho.diag_.resize(g.p.size());
  for (std::uint64_t s = 0; s < g.p.size(); ++s) rho.diag_[s] = g.p[s];
  // <sigma|rho|flip(sigma)> = (w(sigma) + w(flip sigma)) / 2Z = w(sigma) / Z.
  rho.anti_.resize(g.p.size());
  for (std::uint64_t s = 0; s < g.p.size(); ++s)
    rho.anti_[s] = 0.5 * (rho.diag_[s] + rho.diag_[rho.flip_all(s)]);
  for (std::uint64_t s = 0; s < g.p.size(); ++s) rho.diag_[s] = rho.anti_[s];
  return rho;
}

double DensityMatrixSparse::element(std::uint64_t row, std::uint64_t col) const {
  if (row >= dimension() || col >= dimension()) throw std::out_of_range("density matrix index");
  if (row == col) return diag_[row];
  if (col == flip_all(row)) return anti_[row];
  return 0.0;
}

double DensityMatrixSparse::trace() const {
  double t = 0.0;
  for (double d : diag_) t += d;
  return t;
}

double DensityMatrixSparse::hermiticity_defect() const {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < dimension(); ++s)
    worst = std::max(worst, std::abs(element(s, flip_all(s)) - element(flip_all(s), s)));
  return worst;
}

double DensityMatrixSparse::strong_symmetry_defect() const {
  // (U rho)_{ab} = rho_{flip(a), b}; only b in {a, flip(a)} can be non-zero.
  double worst = 0.0;
  for (std::uint64_t a = 0; a < dimension(); ++a) {
    worst = std::max(worst, std::abs(element(flip_all(a), a) - element(a, a)));
    worst = std::max(worst, std::abs(element(flip_all(a), flip_all(a)) - element(a, flip_all(a))));
  }
  return worst;
}

double DensityMatrixSparse::global_flip_expectation() const {
  // Tr(rho U) = sum_a rho_{a, flip(a)}
  double t = 0.0;
  for (std::uint64_t a = 0; a < dimension(); ++a) t += element(a, flip_all(a));
  return t;
}

std::vector<double> DensityMatrixSparse::eigenvalues() const {
  std::vector<double> ev;
  ev.reserve(dimension());
  for (std::uint64_t s = 0; s < dimension(); ++s) {
    if (s & 1U) continue;  // one block per orbit, representative has site 0 up
    const double d = diag_[s];
    const double d2 = diag_[flip_all(s)];
    const double off = anti_[s];
    const double mean = 0.5 * (d + d2);
    const double rad = std::hypot(0.5 * (d - d2), off);
    ev.push_back(mean + rad);
    ev.push_back(mean - rad);
  }
  return ev;
}

Eigen::MatrixXd DensityMatrixSparse::reduced(std::span<const std::uint8_t> keep_mask) const {
  if (static_cast<int>(keep_mask.size()) != n_) throw std::invalid_argument("reduced: mask size mismatch");
  const std::uint64_t keep = mask_bits(keep_mask);
  const int k = __builtin_popcountll(keep);
  if (k > 12) throw std::invalid_argument("reduced: at most 12 kept sites");
  const std::uint64_t traced = (dimension() - 1) & ~keep;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(std::int64_t{1} << k, std::int64_t{1} << k);
  for (std::uint64_t a = 0; a < dimension(); ++a) {
    const auto r = static_cast<Eigen::Index>(extract_bits(a, keep));
    out(r, r) += diag_[a];
    const std::uint64_t b = flip_all(a);
    if ((a & traced) == (b & traced)) out(r, static_cast<Eigen::Index>(extract_bits(b, keep))) += anti_[a];
  }
  return out;
}

Eigen::MatrixXd DensityMatrixSparse::to_dense() const {
  require_dense(n_);
  const auto dim = static_cast<Eigen::Index>(dimension());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (std::uint64_t a = 0; a < dimension(); ++a) {
    m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = diag_[a];
    m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(flip_all(a))) = anti_[a];
  }
  return m;
}

Eigen::MatrixXd partial_transpose(const Eigen::MatrixXd& rho, std::span<const std::uint8_t> a_mask) {
  const std::uint64_t a = mask_bits(a_mask);
  const Eigen::Index dim = rho.rows();
  Eigen::MatrixXd out(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      const auto ur = static_cast<std::uint64_t>(r), uc = static_cast<std::uint64_t>(c);
      // Swap the A-part of the row and column labels.
      const std::uint64_t r2 = (ur & ~a) | (uc & a);
      const std::uint64_t c2 = (uc & ~a) | (ur & a);
      out(r, c) = rho(static_cast<Eigen::Index>(r2), static_cast<Eigen::Index>(c2));
    }
  }
  return out;
}

std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double NegativitySpectrum::sum() const {
  double s = 0.0;
  for (const auto& p : pairs) s += p.plus + p.minus;
  return s;
}

double NegativitySpectrum::sum_abs() const {
  double s = 0.0;
  for (const auto& p : pairs) s += std::abs(p.plus) + std::abs(p.minus);
  return s;
}

std::vector<double> NegativitySpectrum::all() const {
  std::vector<double> v;
  v.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    v.push_back(p.plus);
    v.push_back(p.minus);
  }
  return v;
}

NegativitySpectrum negativity_spectrum(const Lattice& lattice, const Bipartition& part, double beta) {
  const Gibbs g = gibbs(lattice, beta);
  const std::uint64_t abar = (g.p.size() - 1) & ~mask_bits(part.a_mask());
  NegativitySpectrum spec;
  spec.pairs.reserve(g.p.size() / 2);
  for (std::uint64_t s = 0; s < g.p.size(); s += 2) {
    const double w = g.p[s];
    const double w_flip = g.p[s ^ abar];
    spec.pairs.push_back({s, w + w_flip, w - w_flip});
  }
  return spec;
}

double exact_negativity(const Lattice& lattice, const Bipartition& part, double beta) {
  const Gibbs g = gibbs(lattice, beta);
  const double bj = beta * lattice.coupling();
  const std::uint64_t abar = (g.p.size() - 1) & ~mask_bits(part.a_mask());
  double acc = 0.0;
  for (std::uint64_t s = 0; s < g.p.size(); ++s) {
    // |w - w'| = max(w, w') (1 - e^{-|log w - log w'|})
    const int gap = std::abs(g.bond_sums[s] - g.bond_sums[s ^ abar]);
    if (gap > 0) acc += std::max(g.p[s], g.p[s ^ abar]) * -std::expm1(-bj * gap);
  }
  return 0.25 * acc;
}

double exact_fidelity(const Lattice& lattice, const Bipartition& part, double beta) {
  const Gibbs g = gibbs(lattice, beta);
  const double bj = beta * lattice.coupling();
  double mean_tanh = 0.0;
  for (std::uint64_t s = 0; s < g.p.size(); ++s)
    mean_tanh += g.p[s] * std::tanh(-bj * bits_boundary_sum(lattice, part, s));
  return 0.5 * (1.0 - mean_tanh);
}

double exact_fidelity_protocol(const Lattice& lattice, const Bipartition& part, double beta) {
  const Gibbs g = gibbs(lattice, beta);
  const int n = lattice.num_sites();
  if (part.boundary_size() == 0) throw std::invalid_argument("fidelity: empty boundary");
  const auto& bonds = lattice.bonds();

  // Interior adjacency for rebuilding configurations from syndromes.
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbour, bond index)
  for (int k : part.interior_bonds()) {
    adj[bonds[k].a].push_back({bonds[k].b, k});
    adj[bonds[k].b].push_back({bonds[k].a, k});
  }
  const Bond& ref = bonds[part.boundary_bonds()[0]];
  const int one = part.in_a(ref.a) ? ref.a : ref.b;
  const int one_bar = part.in_a(ref.a) ? ref.b : ref.a;

  double fidelity = 0.0;
  std::vector<int> rel(n), queue;
  for (std::uint64_t s = 0; s < g.p.size(); ++s) {
    auto spin = [s](int i) { return ((s >> i) & 1U) ? -1 : 1; };
    // Relative signs within each side, fixed by mu_ij = sigma_i sigma_j.
    std::fill(rel.begin(), rel.end(), 0);
    for (int root : {one, one_bar}) {
      rel[root] = 1;
      queue.assign(1, root);
      for (size_t h = 0; h < queue.size(); ++h) {
        const int v = queue[h];
        for (auto [w, k] : adj[v]) {
          if (rel[w] != 0) continue;
          const int mu = spin(bonds[k].a) * spin(bonds[k].b);
          rel[w] = rel[v] * mu;
          queue.push_back(w);
        }
      }
    }
    if (std::find(rel.begin(), rel.end(), 0) != rel.end())
      throw std::invalid_argument("fidelity: bipartition is not contiguous");
    // Candidate tau: A side as rebuilt, complement multiplied by tau so that
    // sigma_1 sigma_1bar = tau.
    double log_w[2];
    for (int t = 0; t < 2; ++t) {
      const int tau = t == 0 ? 1 : -1;
      long sum = 0;
      for (const Bond& b : bonds) {
        const int sa = rel[b.a] * (part.in_a(b.a) ? 1 : tau);
        const int sb = rel[b.b] * (part.in_a(b.b) ? 1 : tau);
        sum += sa * sb;
      }
      log_w[t] = beta * lattice.coupling() * static_cast<double>(sum);
    }
    const int tau_true = spin(one) * spin(one_bar);
    const double lt = tau_true == 1 ? log_w[0] : log_w[1];
    const double lo = tau_true == 1 ? log_w[1] : log_w[0];
    const double p_correct = 1.0 / (1.0 + std::exp(lo - lt));
    fidelity += g.p[s] * p_correct;
  }
  return fidelity;
}

double marginal_entropy(const Lattice& lattice, double beta, std::span<const std::uint8_t> mask) {
  const Gibbs g = gibbs(lattice, beta);
  const std::uint64_t m = mask_bits(mask);
  std::vector<double> p(std::size_t{1} << __builtin_popcountll(m), 0.0);
  for (std::uint64_t s = 0; s < g.p.size(); ++s) p[extract_bits(s, m)] += g.p[s];
  return shannon(p);
}

CmiResult cmi_exact(const Lattice& lattice, const TripartitionABC& tri, double beta) {
  tri.validate(lattice);
  const auto n = static_cast<size_t>(lattice.num_sites());
  std::vector<std::uint8_t> ab(n), bc(n);
  for (size_t i = 0; i < n; ++i) {
    ab[i] = tri.a_mask[i] || tri.b_mask[i];
    bc[i] = tri.b_mask[i] || tri.c_mask[i];
  }
  CmiResult r;
  r.s_ab = marginal_entropy(lattice, beta, ab);
  r.s_bc = marginal_entropy(lattice, beta, bc);
  r.s_b = marginal_entropy(lattice, beta, tri.b_mask);
  std::vector<std::uint8_t> all(n, 1);
  r.s_abc_classical = marginal_entropy(lattice, beta, all);
  const auto rho = DensityMatrixSparse::thermal_ghz(lattice, beta);
  r.s_abc = shannon(rho.eigenvalues());
  r.cmi = r.s_ab + r.s_bc - r.s_b - r.s_abc;
  r.cmi_classical = r.s_ab + r.s_bc - r.s_b - r.s_abc_classical;
  return r;
}

Eigen::MatrixXd fdlc_output(const Lattice& lattice, double beta) {
  require_dense(lattice.num_sites());
  const Gibbs g = gibbs(lattice, beta);
  const auto dim = static_cast<Eigen::Index>(g.p.size());
  Eigen::VectorXd phi(dim);
  for (Eigen::Index s = 0; s < dim; ++s) phi(s) = std::sqrt(g.p[static_cast<size_t>(s)]);
  Eigen::MatrixXd rho = phi * phi.transpose();
  // rho -> (rho + ZZ rho ZZ) / 2 on each bond; ZZ is diagonal with entries +-1.
  std::vector<int> zz(static_cast<size_t>(dim));
  for (const Bond& b : lattice.bonds()) {
    for (Eigen::Index s = 0; s < dim; ++s) zz[static_cast<size_t>(s)] = (((s >> b.a) ^ (s >> b.b)) & 1) ? -1 : 1;
    for (Eigen::Index c = 0; c < dim; ++c)
      for (Eigen::Index r = 0; r < dim; ++r)
        rho(r, c) *= 0.5 * (1 + zz[static_cast<size_t>(r)] * zz[static_cast<size_t>(c)]);
  }
  return rho;
}

double verify_fdlc(const Lattice& lattice, double beta) {
  if (lattice.spec().boundary != Boundary::Periodic)
    throw std::invalid_argument("verify_fdlc: the dephasing construction needs periodic boundaries");
  const Eigen::MatrixXd out = fdlc_output(lattice, beta);
  const auto rho = DensityMatrixSparse::thermal_ghz(lattice, beta);
  double worst = 0.0;
  for (Eigen::Index c = 0; c < out.cols(); ++c)
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      worst = std::max(worst, std::abs(out(r, c) - rho.element(static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c))));
  return worst;
}

double verify_parent_hamiltonian(const Lattice& lattice, double beta) {
  const Gibbs g = gibbs(lattice, beta);
  const int n = lattice.num_sites();
  std::vector<double> phi(g.p.size());
  for (size_t s = 0; s < g.p.size(); ++s) phi[s] = std::sqrt(g.p[s]);
  const double bj = beta * lattice.coupling();
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    double norm2 = 0.0;
    for (std::uint64_t s = 0; s < g.p.size(); ++s) {
      const int sj = ((s >> j) & 1U) ? -1 : 1;
      int zz = 0;
      for (int i : lattice.neighbors(j)) zz += sj * (((s >> i) & 1U) ? -1 : 1);
      const double x_phi = phi[s ^ (std::uint64_t{1} << j)];
      const double r = -x_phi + std::exp(-bj * zz) * phi[s];
      norm2 += r * r;
    }
    worst = std::max(worst, std::sqrt(norm2));
  }
  return worst;
}

}  // namespace tneg::oracle
