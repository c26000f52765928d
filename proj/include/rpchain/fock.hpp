#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rpchain/types.hpp"

namespace rpchain {

// Sites of a (sub)chain are labelled first_site, first_site+1, ...; position
// p = site − first_site. A fermion configuration is a bitmask in which
// position p sits at bit (n−1−p), so the leftmost site is the most
// significant bit and the mask doubles as the occupation-basis index.

inline bool bit_at(std::uint32_t mask, int n_sites, int pos) { return (mask >> (n_sites - 1 - pos)) & 1u; }
inline std::uint32_t bit_of(int n_sites, int pos) { return 1u << (n_sites - 1 - pos); }

/// Set of occupied sites of the full chain Λ = [−ℓ, ℓ−1].
struct FermionConfig {
  int ell = 1;
  std::uint32_t mask = 0;

  int n_sites() const { return 2 * ell; }
  bool occupied(int site) const { return bit_at(mask, n_sites(), site + ell); }
  int count() const { return std::popcount(mask); }
  std::vector<int> sites() const
  {
    std::vector<int> out;
    for (int p = 0; p < n_sites(); ++p)
      if (bit_at(mask, n_sites(), p)) out.push_back(p - ell);
    return out;
  }
  /// Occupation of Λ_L as an ℓ-bit mask (site −ℓ most significant).
  std::uint32_t left_mask() const { return mask >> ell; }
  /// Occupation of Λ_R as an ℓ-bit mask (site 0 most significant).
  std::uint32_t right_mask() const { return mask & ((1u << ell) - 1u); }

  static FermionConfig from_sites(int ell, const std::vector<int>& sites)
  {
    FermionConfig c{ell, 0};
    for (int j : sites) {
      if (j < -ell || j >= ell) throw std::out_of_range("site outside the chain");
      c.mask |= bit_of(2 * ell, j + ell);
    }
    return c;
  }
  static FermionConfig from_halves(int ell, std::uint32_t left, std::uint32_t right)
  {
    return FermionConfig{ell, (left << ell) | right};
  }
  bool operator==(const FermionConfig&) const = default;
};

/// All C(2ℓ, ℓ) half-filled configurations, ordered lexicographically by their sorted site lists.
inline std::vector<FermionConfig> enumerate_half_filled(int ell)
{
  if (ell < 1) throw std::invalid_argument("ell must be >= 1");
  if (2 * ell > 30) throw std::invalid_argument("2*ell > 30 is beyond desk scale");
  const int n = 2 * ell;
  std::vector<int> pick(ell);
  for (int k = 0; k < ell; ++k) pick[k] = k;
  std::vector<FermionConfig> out;
  while (true) {
    FermionConfig c{ell, 0};
    for (int p : pick) c.mask |= bit_of(n, p);
    out.push_back(c);
    int k = ell - 1;
    while (k >= 0 && pick[k] == n - ell + k) --k;
    if (k < 0) break;
    ++pick[k];
    for (int m = k + 1; m < ell; ++m) pick[m] = pick[m - 1] + 1;
  }
  return out;
}

/// Q̂^{(L)} = (#even − #odd) occupied sites of Λ_L, for an ℓ-bit left mask.
inline int charge_left(std::uint32_t left, int ell)
{
  int q = 0;
  for (int p = 0; p < ell; ++p)
    if (bit_at(left, ell, p)) q += ((p - ell) % 2 == 0) ? 1 : -1;
  return q;
}

/// Q̂^{(R)} = −(#even − #odd) occupied sites of Λ_R, for an ℓ-bit right mask.
inline int charge_right(std::uint32_t right, int ell)
{
  int q = 0;
  for (int p = 0; p < ell; ++p)
    if (bit_at(right, ell, p)) q += (p % 2 == 0) ? -1 : 1;
  return q;
}

/// Decomposition of the charge-balanced space into sectors q.
struct ChargeSectorTable {
  int ell = 1;
  std::vector<int> q_values;
  std::map<int, std::vector<std::uint32_t>> left_labels;  // Θ_Λ(q), ascending masks
  std::map<int, std::vector<std::uint32_t>> right_labels; // Λ_R masks with Q̂^{(R)} = q
  std::map<int, Index> offsets; // start of sector q in the charge-balanced configuration list

  int sector_of_left(std::uint32_t left) const { return charge_left(left, ell); }
};

inline ChargeSectorTable sector_decompose(int ell)
{
  ChargeSectorTable t;
  t.ell = ell;
  std::map<int, std::vector<std::uint32_t>> L, R;
  for (std::uint32_t m = 0; m < (1u << ell); ++m) {
    L[charge_left(m, ell)].push_back(m);
    R[charge_right(m, ell)].push_back(m);
  }
  Index off = 0;
  for (const auto& [q, labels] : L) {
    auto it = R.find(q);
    if (it == R.end()) continue;
    t.q_values.push_back(q);
    t.left_labels[q] = labels;
    t.right_labels[q] = it->second;
    t.offsets[q] = off;
    off += static_cast<Index>(labels.size() * it->second.size());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Phonons

enum class PhononRep { fock, grid };

struct GaussHermite {
  VecR nodes;   // ξ_k, weight function e^{-ξ²}
  VecR weights; // w_k
};

/// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the Hermite recurrence.
inline GaussHermite gauss_hermite(int n)
{
  if (n < 1) throw std::invalid_argument("gauss_hermite needs n >= 1");
  MatR J = MatR::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<MatR> es(J);
  GaussHermite gh;
  gh.nodes = es.eigenvalues();
  gh.weights.resize(n);
  const double mu0 = std::sqrt(M_PI);
  for (int k = 0; k < n; ++k) gh.weights(k) = mu0 * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
  return gh;
}

/// Normalized oscillator eigenfunctions ψ_0..ψ_{nmax} at x (mass 1, frequency ω).
inline VecR oscillator_functions(int nmax, double x, double omega)
{
  VecR psi(nmax + 1);
  const double xi = std::sqrt(omega) * x;
  psi(0) = std::pow(omega / M_PI, 0.25) * std::exp(-0.5 * xi * xi);
  if (nmax >= 1) psi(1) = std::sqrt(2.0) * xi * psi(0);
  for (int n = 1; n < nmax; ++n)
    psi(n + 1) = std::sqrt(2.0 / (n + 1)) * xi * psi(n) - std::sqrt(static_cast<double>(n) / (n + 1)) * psi(n - 1);
  return psi;
}

struct HermiteTransform {
  MatR T;          // T(n, k) = ψ_n(x_k)
  VecR x;          // node positions x_k = ξ_k / √ω
  VecR weights;    // Lebesgue quadrature weights μ_k = w_k e^{ξ_k²} / √ω
  double residual; // max |T diag(μ) Tᵀ − I|
};

inline HermiteTransform hermite_position_transform(int n_max, int grid_nodes, double omega = 1.0)
{
  if (grid_nodes < n_max + 1) throw std::invalid_argument("grid_nodes must be >= n_max + 1");
  const GaussHermite gh = gauss_hermite(grid_nodes);
  HermiteTransform h;
  h.x = gh.nodes / std::sqrt(omega);
  h.weights.resize(grid_nodes);
  h.T.resize(n_max + 1, grid_nodes);
  for (int k = 0; k < grid_nodes; ++k) {
    const double xi = gh.nodes(k);
    h.weights(k) = gh.weights(k) * std::exp(xi * xi) / std::sqrt(omega);
    h.T.col(k) = oscillator_functions(n_max, h.x(k), omega);
  }
  const MatR G = h.T * h.weights.asDiagonal() * h.T.transpose();
  h.residual = (G - MatR::Identity(n_max + 1, n_max + 1)).cwiseAbs().maxCoeff();
  return h;
}

/// Per-site phonon space: truncated Fock states or a Gauss-Hermite position grid.
struct PhononBasisSpec {
  PhononRep rep = PhononRep::fock;
  int n_max = 0;
  int nodes = 0;
  double omega = 1.0;
  int d = 1;       // per-site dimension
  VecR x;          // grid node positions
  VecR weights;    // grid cell measures μ_k

  static PhononBasisSpec fock(int n_max, double omega = 1.0)
  {
    if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
    PhononBasisSpec s;
    s.rep = PhononRep::fock;
    s.n_max = n_max;
    s.omega = omega;
    s.d = n_max + 1;
    return s;
  }
  static PhononBasisSpec grid(int nodes, double omega = 1.0)
  {
    if (nodes < 1) throw std::invalid_argument("grid needs at least one node");
    PhononBasisSpec s;
    s.rep = PhononRep::grid;
    s.nodes = nodes;
    s.n_max = nodes - 1;
    s.omega = omega;
    s.d = nodes;
    const HermiteTransform h = hermite_position_transform(0, nodes, omega);
    s.x = h.x;
    s.weights = h.weights;
    return s;
  }
  bool operator==(const PhononBasisSpec& o) const { return rep == o.rep && d == o.d && omega == o.omega; }
};

// ---------------------------------------------------------------------------
// Composite basis: fermion configuration × phonon multi-index

/// Flat index = config_slot · d^n + phonon, phonon digits with the leftmost site most significant.
struct CompositeBasis {
  int first_site = 0;
  int n_sites = 0;
  std::vector<std::uint32_t> configs; // fermion masks in index order
  std::vector<Index> slot;            // mask -> position in configs, −1 if absent
  PhononBasisSpec phonon;
  Index phonon_dim = 1;

  Index dim() const { return static_cast<Index>(configs.size()) * phonon_dim; }
  Index n_configs() const { return static_cast<Index>(configs.size()); }
  bool is_full_fock() const { return configs.size() == (std::size_t{1} << n_sites); }
  bool contains_site(int j) const { return j >= first_site && j < first_site + n_sites; }
  int pos(int site) const
  {
    if (!contains_site(site)) throw std::out_of_range("site " + std::to_string(site) + " not in basis");
    return site - first_site;
  }

  Index index_of(Index config_slot, Index phonon_index) const { return config_slot * phonon_dim + phonon_index; }
  Index index_of_mask(std::uint32_t mask, Index phonon_index) const
  {
    const Index s = slot.at(mask);
    return s < 0 ? -1 : index_of(s, phonon_index);
  }
  std::pair<Index, Index> state_of(Index i) const { return {i / phonon_dim, i % phonon_dim}; }
  std::uint32_t mask_of(Index i) const { return configs[static_cast<std::size_t>(i / phonon_dim)]; }

  int digit(Index phonon_index, int pos_) const
  {
    Index stride = 1;
    for (int p = n_sites - 1; p > pos_; --p) stride *= phonon.d;
    return static_cast<int>((phonon_index / stride) % phonon.d);
  }
  std::vector<int> digits(Index phonon_index) const
  {
    std::vector<int> out(n_sites);
    for (int p = n_sites - 1; p >= 0; --p) {
      out[p] = static_cast<int>(phonon_index % phonon.d);
      phonon_index /= phonon.d;
    }
    return out;
  }
  Index phonon_index_of(const std::vector<int>& digits_) const
  {
    Index r = 0;
    for (int v : digits_) r = r * phonon.d + v;
    return r;
  }

  static CompositeBasis make(int first_site, int n_sites, std::vector<std::uint32_t> configs, PhononBasisSpec ph)
  {
    if (n_sites < 1 || n_sites > 30) throw std::invalid_argument("unsupported number of sites");
    CompositeBasis b;
    b.first_site = first_site;
    b.n_sites = n_sites;
    b.configs = std::move(configs);
    b.phonon = std::move(ph);
    b.slot.assign(std::size_t{1} << n_sites, -1);
    for (std::size_t k = 0; k < b.configs.size(); ++k) {
      if (b.slot.at(b.configs[k]) >= 0) throw std::invalid_argument("duplicate configuration in basis");
      b.slot[b.configs[k]] = static_cast<Index>(k);
    }
    b.phonon_dim = 1;
    for (int p = 0; p < n_sites; ++p) b.phonon_dim *= b.phonon.d;
    return b;
  }

  /// Same sites and phonons with every fermion configuration.
  CompositeBasis full() const
  {
    std::vector<std::uint32_t> all(std::size_t{1} << n_sites);
    for (std::size_t m = 0; m < all.size(); ++m) all[m] = static_cast<std::uint32_t>(m);
    return make(first_site, n_sites, std::move(all), phonon);
  }
};

/// Every configuration of Λ (all fillings).
inline CompositeBasis full_basis(int ell, const PhononBasisSpec& ph)
{
  std::vector<std::uint32_t> all(std::size_t{1} << (2 * ell));
  for (std::size_t m = 0; m < all.size(); ++m) all[m] = static_cast<std::uint32_t>(m);
  return CompositeBasis::make(-ell, 2 * ell, std::move(all), ph);
}

/// Half-filled subspace in the order of enumerate_half_filled.
inline CompositeBasis half_filled_basis(int ell, const PhononBasisSpec& ph)
{
  std::vector<std::uint32_t> cfg;
  for (const auto& c : enumerate_half_filled(ell)) cfg.push_back(c.mask);
  return CompositeBasis::make(-ell, 2 * ell, std::move(cfg), ph);
}

/// Charge-balanced subspace Q̂^{(L)} = Q̂^{(R)}: the hole-particle image of half filling.
inline CompositeBasis balanced_basis(int ell, const PhononBasisSpec& ph)
{
  std::vector<std::uint32_t> cfg;
  for (std::uint32_t m = 0; m < (1u << (2 * ell)); ++m) {
    const FermionConfig c{ell, m};
    if (charge_left(c.left_mask(), ell) == charge_right(c.right_mask(), ell)) cfg.push_back(m);
  }
  return CompositeBasis::make(-ell, 2 * ell, std::move(cfg), ph);
}

/// Fock space of the left half Λ_L = [−ℓ, −1].
inline CompositeBasis left_basis(int ell, const PhononBasisSpec& ph)
{
  std::vector<std::uint32_t> all(std::size_t{1} << ell);
  for (std::size_t m = 0; m < all.size(); ++m) all[m] = static_cast<std::uint32_t>(m);
  return CompositeBasis::make(-ell, ell, std::move(all), ph);
}

/// Fock space of the right half Λ_R = [0, ℓ−1].
inline CompositeBasis right_basis(int ell, const PhononBasisSpec& ph)
{
  std::vector<std::uint32_t> all(std::size_t{1} << ell);
  for (std::size_t m = 0; m < all.size(); ++m) all[m] = static_cast<std::uint32_t>(m);
  return CompositeBasis::make(0, ell, std::move(all), ph);
}

/// Restricts a vector given on `from` to the configurations of `to` (same sites and phonons).
inline VecC restrict_vector(const VecC& v, const CompositeBasis& from, const CompositeBasis& to)
{
  VecC out = VecC::Zero(to.dim());
  for (Index s = 0; s < to.n_configs(); ++s) {
    const Index f = from.slot.at(to.configs[s]);
    if (f < 0) continue;
    out.segment(s * to.phonon_dim, to.phonon_dim) = v.segment(f * from.phonon_dim, from.phonon_dim);
  }
  return out;
}

} // namespace rpchain
