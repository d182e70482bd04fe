#include "tneg/lattice.h"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace tneg {

std::string to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "open"; }

Boundary boundary_from_string(const std::string& name) {
  if (name == "periodic" || name == "Periodic") return Boundary::Periodic;
  if (name == "open" || name == "Open") return Boundary::Open;
  throw std::invalid_argument("unknown boundary '" + name + "' (expected periodic or open)");
}

int LatticeSpec::num_sites() const {
  int n = 1;
  for (int l : linear_sizes) n *= l;
  return n;
}

void LatticeSpec::validate() const {
  if (linear_sizes.empty()) throw std::invalid_argument("linear_sizes: dimension must be at least 1");
  long long n = 1;
  for (size_t k = 0; k < linear_sizes.size(); ++k) {
    const int l = linear_sizes[k];
    if (l < 1) {
      throw std::invalid_argument("linear_sizes[" + std::to_string(k) + "]: must be positive");
    }
    if (boundary == Boundary::Periodic && l < 3) {
      throw std::invalid_argument("linear_sizes[" + std::to_string(k) + "]: periodic size " +
                                  std::to_string(l) +
                                  " < 3 would wrap onto an existing bond (duplicate bonds)");
    }
    n *= l;
    if (n > (1LL << 30)) throw std::invalid_argument("linear_sizes: lattice too large");
  }
  if (!(coupling > 0.0)) throw std::invalid_argument("coupling: J must be > 0 (ferromagnetic)");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta: must be >= 0");
}

std::vector<Bond> enumerate_bonds(const LatticeSpec& spec) {
  spec.validate();
  const int d = spec.dimension();
  const int n = spec.num_sites();
  // stride[k] = product of sizes of axes after k (row-major).
  std::vector<int> stride(d, 1);
  for (int k = d - 2; k >= 0; --k) stride[k] = stride[k + 1] * spec.linear_sizes[k + 1];

  std::vector<Bond> bonds;
  bonds.reserve(static_cast<size_t>(d) * n);
  for (int site = 0; site < n; ++site) {
    for (int k = 0; k < d; ++k) {
      const int l = spec.linear_sizes[k];
      const int x = (site / stride[k]) % l;
      if (x + 1 < l) {
        bonds.push_back({site, site + stride[k], k});
      } else if (spec.boundary == Boundary::Periodic) {
        bonds.push_back({site, site - x * stride[k], k});
      }
    }
  }
  return bonds;
}

SpinConfig SpinConfig::from_bits(std::uint64_t bits, int n) {
  SpinConfig s;
  s.spins.resize(n);
  for (int i = 0; i < n; ++i) s.spins[i] = ((bits >> i) & 1U) ? Spin{-1} : Spin{1};
  return s;
}

std::uint64_t SpinConfig::to_bits() const {
  std::uint64_t bits = 0;
  for (int i = 0; i < size(); ++i)
    if (spins[i] < 0) bits |= (std::uint64_t{1} << i);
  return bits;
}

SpinConfig SpinConfig::global_flip() const {
  SpinConfig out = *this;
  for (auto& x : out.spins) x = static_cast<Spin>(-x);
  return out;
}

Lattice::Lattice(LatticeSpec spec) : spec_(std::move(spec)) {
  bonds_ = enumerate_bonds(spec_);
  num_sites_ = spec_.num_sites();
  std::vector<std::vector<int>> adj(num_sites_);
  for (const Bond& b : bonds_) {
    adj[b.a].push_back(b.b);
    adj[b.b].push_back(b.a);
  }
  neighbor_offsets_.assign(num_sites_ + 1, 0);
  for (int i = 0; i < num_sites_; ++i) {
    neighbor_offsets_[i + 1] = neighbor_offsets_[i] + static_cast<int>(adj[i].size());
    max_coordination_ = std::max(max_coordination_, static_cast<int>(adj[i].size()));
  }
  neighbor_table_.reserve(neighbor_offsets_.back());
  for (const auto& a : adj) neighbor_table_.insert(neighbor_table_.end(), a.begin(), a.end());
}

std::vector<int> Lattice::coordinates(int site) const {
  const int d = dimension();
  std::vector<int> c(d);
  for (int k = d - 1; k >= 0; --k) {
    c[k] = site % spec_.linear_sizes[k];
    site /= spec_.linear_sizes[k];
  }
  return c;
}

int Lattice::site_index(std::span<const int> coords) const {
  int idx = 0;
  for (int k = 0; k < dimension(); ++k) idx = idx * spec_.linear_sizes[k] + coords[k];
  return idx;
}

int Lattice::translate(int site, std::span<const int> shift) const {
  auto c = coordinates(site);
  for (int k = 0; k < dimension(); ++k) {
    const int l = spec_.linear_sizes[k];
    c[k] = ((c[k] + shift[k]) % l + l) % l;
  }
  return site_index(c);
}

std::int64_t bond_sum(const Lattice& lattice, const SpinConfig& s) {
  if (s.size() != lattice.num_sites()) throw std::invalid_argument("spin configuration size mismatch");
  std::int64_t sum = 0;
  for (const Bond& b : lattice.bonds()) sum += s[b.a] * s[b.b];
  return sum;
}

double energy(const Lattice& lattice, const SpinConfig& s) {
  return -lattice.coupling() * static_cast<double>(bond_sum(lattice, s));
}

Bipartition::Bipartition(const Lattice& lattice, std::vector<std::uint8_t> a_mask, std::string id)
    : a_mask_(std::move(a_mask)), id_(std::move(id)) {
  if (static_cast<int>(a_mask_.size()) != lattice.num_sites())
    throw std::invalid_argument("a_mask: length does not match site count");
  for (auto& m : a_mask_) m = m ? 1 : 0;
  const auto& bonds = lattice.bonds();
  for (int k = 0; k < static_cast<int>(bonds.size()); ++k) {
    if (a_mask_[bonds[k].a] != a_mask_[bonds[k].b])
      boundary_bonds_.push_back(k);
    else
      interior_bonds_.push_back(k);
  }
}

int Bipartition::size_a() const {
  return static_cast<int>(std::count(a_mask_.begin(), a_mask_.end(), std::uint8_t{1}));
}

Bipartition Bipartition::complement(const Lattice& lattice) const {
  std::vector<std::uint8_t> m(a_mask_.size());
  for (size_t i = 0; i < m.size(); ++i) m[i] = a_mask_[i] ? 0 : 1;
  return Bipartition(lattice, std::move(m), id_ + "-complement");
}

std::int64_t boundary_bond_sum(const Lattice& lattice, const Bipartition& part, const SpinConfig& s) {
  if (s.size() != lattice.num_sites()) throw std::invalid_argument("spin configuration size mismatch");
  const auto& bonds = lattice.bonds();
  std::int64_t sum = 0;
  for (int k : part.boundary_bonds()) sum += s[bonds[k].a] * s[bonds[k].b];
  return sum;
}

double boundary_energy(const Lattice& lattice, const Bipartition& part, const SpinConfig& s) {
  return -lattice.coupling() * static_cast<double>(boundary_bond_sum(lattice, part, s));
}

SpinConfig flip_region(const SpinConfig& s, std::span<const std::uint8_t> mask) {
  if (static_cast<int>(mask.size()) != s.size()) throw std::invalid_argument("mask size mismatch");
  SpinConfig out = s;
  for (int i = 0; i < s.size(); ++i)
    if (mask[i]) out[i] = static_cast<Spin>(-out[i]);
  return out;
}

namespace {

// Number of connected components of the sites with mask == side, using only
// bonds with both ends on that side.
int count_components(const Lattice& lattice, const std::vector<std::uint8_t>& mask, std::uint8_t side) {
  const int n = lattice.num_sites();
  std::vector<int> label(n, -1);
  std::vector<int> stack;
  int components = 0;
  for (int root = 0; root < n; ++root) {
    if (mask[root] != side || label[root] >= 0) continue;
    label[root] = components;
    stack.push_back(root);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : lattice.neighbors(v)) {
        if (mask[w] == side && label[w] < 0) {
          label[w] = components;
          stack.push_back(w);
        }
      }
    }
    ++components;
  }
  return components;
}

}  // namespace

bool is_contiguous(const Lattice& lattice, const Bipartition& part) {
  return count_components(lattice, part.a_mask(), 1) == 1 &&
         count_components(lattice, part.a_mask(), 0) == 1;
}

Bipartition half_cylinder(const Lattice& lattice) {
  const int half = lattice.spec().linear_sizes[0] / 2;
  if (half < 1) throw std::invalid_argument("half-cylinder: first linear size must be >= 2");
  std::vector<std::uint8_t> mask(lattice.num_sites());
  for (int i = 0; i < lattice.num_sites(); ++i) mask[i] = lattice.coordinates(i)[0] < half;
  return Bipartition(lattice, std::move(mask), "half-cylinder");
}

Bipartition single_site(const Lattice& lattice, int site) {
  if (site < 0 || site >= lattice.num_sites()) throw std::invalid_argument("single-site: site out of range");
  std::vector<std::uint8_t> mask(lattice.num_sites(), 0);
  mask[site] = 1;
  return Bipartition(lattice, std::move(mask), "single-site");
}

Bipartition block_region(const Lattice& lattice, int r) {
  if (r < 1) throw std::invalid_argument("block: r must be >= 1");
  for (int l : lattice.spec().linear_sizes)
    if (r > l) throw std::invalid_argument("block: r exceeds a linear size");
  std::vector<std::uint8_t> mask(lattice.num_sites());
  for (int i = 0; i < lattice.num_sites(); ++i) {
    const auto c = lattice.coordinates(i);
    mask[i] = std::all_of(c.begin(), c.end(), [r](int x) { return x < r; });
  }
  return Bipartition(lattice, std::move(mask), "block" + std::to_string(r));
}

Bipartition from_site_list(const Lattice& lattice, std::span<const int> sites) {
  std::vector<std::uint8_t> mask(lattice.num_sites(), 0);
  for (int s : sites) {
    if (s < 0 || s >= lattice.num_sites()) throw std::invalid_argument("site list: index out of range");
    mask[s] = 1;
  }
  return Bipartition(lattice, std::move(mask), "sites");
}

Bipartition make_partition(const Lattice& lattice, const std::string& preset, int block_r) {
  if (preset == "half-cylinder") return half_cylinder(lattice);
  if (preset == "single-site") return single_site(lattice);
  if (preset == "block") return block_region(lattice, block_r);
  throw std::invalid_argument("unknown partition preset '" + preset + "'");
}

void TripartitionABC::validate(const Lattice& lattice) const {
  const auto n = static_cast<size_t>(lattice.num_sites());
  if (a_mask.size() != n || b_mask.size() != n || c_mask.size() != n)
    throw std::invalid_argument("tripartition: mask length does not match site count");
  for (size_t i = 0; i < n; ++i) {
    const int count = (a_mask[i] ? 1 : 0) + (b_mask[i] ? 1 : 0) + (c_mask[i] ? 1 : 0);
    if (count != 1)
      throw std::invalid_argument("tripartition: site " + std::to_string(i) +
                                  (count == 0 ? " is in no region" : " is in more than one region"));
  }
  for (const Bond& b : lattice.bonds()) {
    if ((a_mask[b.a] && c_mask[b.b]) || (c_mask[b.a] && a_mask[b.b]))
      throw std::invalid_argument("tripartition: bond (" + std::to_string(b.a) + "," +
                                  std::to_string(b.b) + ") connects A to C; B must separate them");
  }
}

TripartitionABC ring_tripartition(const Lattice& lattice, int r, int center) {
  if (r < 1) throw std::invalid_argument("ring tripartition: r must be >= 1");
  const auto c0 = lattice.coordinates(center);
  const bool periodic = lattice.spec().boundary == Boundary::Periodic;
  TripartitionABC tri;
  tri.r = r;
  const auto n = static_cast<size_t>(lattice.num_sites());
  tri.a_mask.assign(n, 0);
  tri.b_mask.assign(n, 0);
  tri.c_mask.assign(n, 0);
  for (int i = 0; i < lattice.num_sites(); ++i) {
    const auto c = lattice.coordinates(i);
    int dist = 0;
    for (int k = 0; k < lattice.dimension(); ++k) {
      int delta = std::abs(c[k] - c0[k]);
      if (periodic) delta = std::min(delta, lattice.spec().linear_sizes[k] - delta);
      dist = std::max(dist, delta);
    }
    if (dist == 0)
      tri.a_mask[i] = 1;
    else if (dist <= r)
      tri.b_mask[i] = 1;
    else
      tri.c_mask[i] = 1;
  }
  tri.validate(lattice);
  return tri;
}

TripartitionABC tripartition_from_lists(const Lattice& lattice, std::span<const int> a,
                                        std::span<const int> b, int r) {
  const auto n = static_cast<size_t>(lattice.num_sites());
  TripartitionABC tri;
  tri.r = r;
  tri.a_mask.assign(n, 0);
  tri.b_mask.assign(n, 0);
  tri.c_mask.assign(n, 1);
  auto mark = [&](std::span<const int> sites, std::vector<std::uint8_t>& mask) {
    for (int s : sites) {
      if (s < 0 || s >= lattice.num_sites()) throw std::invalid_argument("tripartition: site out of range");
      if (mask[s] || !tri.c_mask[s]) throw std::invalid_argument("tripartition: site listed twice");
      mask[s] = 1;
      tri.c_mask[s] = 0;
    }
  };
  mark(a, tri.a_mask);
  mark(b, tri.b_mask);
  tri.validate(lattice);
  return tri;
}

}  // namespace tneg
