#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tneg {

enum class Boundary { Periodic, Open };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& name);

// Geometry and couplings of a d-dimensional hypercubic Ising system.
struct LatticeSpec {
  std::vector<int> linear_sizes;
  Boundary boundary = Boundary::Periodic;
  double coupling = 1.0;  // J > 0, ferromagnetic
  double beta = 0.0;

  int dimension() const { return static_cast<int>(linear_sizes.size()); }
  int num_sites() const;

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

// Nearest-neighbour pair. `a` is the site the bond was generated from, `b`
// its neighbour one step along `axis`.
struct Bond {
  int a;
  int b;
  int axis;

  friend bool operator==(const Bond&, const Bond&) = default;
};

// Canonical bond list: sites in row-major order, then axes in increasing
// order. Rejects periodic lattices with any linear size < 3.
std::vector<Bond> enumerate_bonds(const LatticeSpec& spec);

using Spin = std::int8_t;

struct SpinConfig {
  std::vector<Spin> spins;

  static SpinConfig all_up(int n) { return SpinConfig{std::vector<Spin>(n, Spin{1})}; }
  static SpinConfig from_bits(std::uint64_t bits, int n);
  std::uint64_t to_bits() const;

  int size() const { return static_cast<int>(spins.size()); }
  Spin operator[](int i) const { return spins[i]; }
  Spin& operator[](int i) { return spins[i]; }

  SpinConfig global_flip() const;

  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;
};

// Immutable geometry: sites, bonds and a flat neighbour table.
class Lattice {
 public:
  explicit Lattice(LatticeSpec spec);

  const LatticeSpec& spec() const { return spec_; }
  int dimension() const { return spec_.dimension(); }
  int num_sites() const { return num_sites_; }
  double coupling() const { return spec_.coupling; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }

  std::span<const int> neighbors(int site) const {
    return {neighbor_table_.data() + neighbor_offsets_[site],
            neighbor_table_.data() + neighbor_offsets_[site + 1]};
  }
  int max_coordination() const { return max_coordination_; }

  std::vector<int> coordinates(int site) const;
  int site_index(std::span<const int> coords) const;

  // Site reached by shifting `site` by `shift` (periodic only).
  int translate(int site, std::span<const int> shift) const;

 private:
  LatticeSpec spec_;
  int num_sites_;
  std::vector<Bond> bonds_;
  std::vector<int> neighbor_offsets_;
  std::vector<int> neighbor_table_;
  int max_coordination_ = 0;
};

// Sum over bonds of sigma_i sigma_j; the energy is -J times this.
std::int64_t bond_sum(const Lattice& lattice, const SpinConfig& s);
double energy(const Lattice& lattice, const SpinConfig& s);

// Region A of a bipartition together with the derived bond split.
class Bipartition {
 public:
  Bipartition(const Lattice& lattice, std::vector<std::uint8_t> a_mask, std::string id = "custom");

  const std::vector<std::uint8_t>& a_mask() const { return a_mask_; }
  bool in_a(int site) const { return a_mask_[site] != 0; }
  const std::string& id() const { return id_; }

  // Indices into Lattice::bonds().
  const std::vector<int>& boundary_bonds() const { return boundary_bonds_; }
  const std::vector<int>& interior_bonds() const { return interior_bonds_; }
  int boundary_size() const { return static_cast<int>(boundary_bonds_.size()); }
  int size_a() const;

  Bipartition complement(const Lattice& lattice) const;

 private:
  std::vector<std::uint8_t> a_mask_;
  std::string id_;
  std::vector<int> boundary_bonds_;
  std::vector<int> interior_bonds_;
};

std::int64_t boundary_bond_sum(const Lattice& lattice, const Bipartition& part, const SpinConfig& s);
double boundary_energy(const Lattice& lattice, const Bipartition& part, const SpinConfig& s);

// Negates exactly the masked spins.
SpinConfig flip_region(const SpinConfig& s, std::span<const std::uint8_t> mask);

// True when A and its complement are each non-empty and connected through
// interior bonds.
bool is_contiguous(const Lattice& lattice, const Bipartition& part);

// Partition presets.
Bipartition half_cylinder(const Lattice& lattice);
Bipartition single_site(const Lattice& lattice, int site = 0);
Bipartition block_region(const Lattice& lattice, int r);
Bipartition from_site_list(const Lattice& lattice, std::span<const int> sites);
Bipartition make_partition(const Lattice& lattice, const std::string& preset, int block_r = 1);

struct TripartitionABC {
  std::vector<std::uint8_t> a_mask;
  std::vector<std::uint8_t> b_mask;
  std::vector<std::uint8_t> c_mask;
  int r = 0;

  // Throws std::invalid_argument if the masks overlap, miss a site, or any
  // bond joins A to C.
  void validate(const Lattice& lattice) const;
};

// A = `center`, B = sites within Chebyshev distance r of it, C = the rest.
TripartitionABC ring_tripartition(const Lattice& lattice, int r, int center = 0);
TripartitionABC tripartition_from_lists(const Lattice& lattice, std::span<const int> a,
                                        std::span<const int> b, int r = 1);

}  // namespace tneg
