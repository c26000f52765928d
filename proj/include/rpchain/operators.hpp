#pragma once

#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "rpchain/fock.hpp"
#include "rpchain/model.hpp"
#include "rpchain/types.hpp"

namespace rpchain {

/// Sparse matrix over a CompositeBasis.
struct OperatorMatrix {
  CompositeBasis basis;
  SpMat mat;
  bool hermitian = false;
  double truncation_defect = 0.0; // max |[a,a*] − I| of the phonon truncation in force

  double hermiticity_defect() const
  {
    const double scale = max_abs(mat);
    if (scale == 0.0) return 0.0;
    return max_abs(SpMat(mat - SpMat(mat.adjoint()))) / scale;
  }
};

/// Coordinate-format dump: one "row col re im" line per stored entry.
inline void write_coo(std::ostream& os, const SpMat& m)
{
  os.precision(17);
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

// ---------------------------------------------------------------------------
// Fermion matrices on the 2^n occupation space of a (sub)chain

/// Jordan-Wigner c_p: string over the positions before p.
inline SpReal jw_annihilator(int n_sites, int pos)
{
  if (pos < 0 || pos >= n_sites) throw std::out_of_range("fermion position out of range");
  const std::uint32_t dim = 1u << n_sites;
  const std::uint32_t b = bit_of(n_sites, pos);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::uint32_t m = 0; m < dim; ++m) {
    if (!(m & b)) continue;
    const int before = std::popcount(m >> (n_sites - pos));
    trip.emplace_back(static_cast<int>(m ^ b), static_cast<int>(m), (before % 2) ? -1.0 : 1.0);
  }
  SpReal c(dim, dim);
  c.setFromTriplets(trip.begin(), trip.end());
  return c;
}

inline SpReal fermion_identity(int n_sites)
{
  SpReal I(1 << n_sites, 1 << n_sites);
  I.setIdentity();
  return I;
}

/// Diagonal matrix with entries f(mask).
template <typename F>
SpReal fermion_diagonal(int n_sites, F f)
{
  const std::uint32_t dim = 1u << n_sites;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(dim);
  for (std::uint32_t m = 0; m < dim; ++m) trip.emplace_back(static_cast<int>(m), static_cast<int>(m), f(m));
  SpReal d(dim, dim);
  d.setFromTriplets(trip.begin(), trip.end());
  return d;
}

/// ∏_{k ≠ skip} (−1)^{n_k}; pass skip = −1 for the full parity.
inline SpReal fermion_parity(int n_sites, int skip = -1)
{
  return fermion_diagonal(n_sites, [&](std::uint32_t m) {
    std::uint32_t mm = m;
    if (skip >= 0) mm &= ~bit_of(n_sites, skip);
    return (std::popcount(mm) % 2) ? -1.0 : 1.0;
  });
}

/// Family of fermion matrices for one (sub)chain, built once.
struct FermionAlgebra {
  int n_sites = 0;
  std::vector<SpReal> c;   // annihilators by position
  std::vector<SpReal> cd;  // creators
  std::vector<SpReal> n;   // number operators
  SpReal I;

  explicit FermionAlgebra(int sites) : n_sites(sites), I(fermion_identity(sites))
  {
    for (int p = 0; p < sites; ++p) {
      c.push_back(jw_annihilator(sites, p));
      cd.push_back(SpReal(c.back().transpose()));
      n.push_back(SpReal(cd[p] * c[p]));
    }
  }
  SpReal dn(int p) const { return n[p] - 0.5 * I; }
};

// ---------------------------------------------------------------------------
// Phonon matrices

struct PhononSiteOps {
  MatC a, adag, phi, pi, number;
  MatC energy; // single-site term of K (ω a*a for Fock; finite-volume oscillator for the grid)
  double ccr_defect = 0.0;
};

/// Symmetric finite-volume discretization of −½ d²/dx² on the grid cells.
/// Off-diagonal entries are ≤ 0, so e^{−βK} is entrywise nonnegative on the grid.
inline MatR finite_volume_kinetic(const VecR& x, const VecR& mu)
{
  const int n = static_cast<int>(x.size());
  MatR T = MatR::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) {
    const double c = 1.0 / (2.0 * (x(k + 1) - x(k)));
    T(k, k) += c / mu(k);
    T(k + 1, k + 1) += c / mu(k + 1);
    T(k, k + 1) -= c / std::sqrt(mu(k) * mu(k + 1));
    T(k + 1, k) = T(k, k + 1);
  }
  return T;
}

inline PhononSiteOps phonon_site_ops(const PhononBasisSpec& ph)
{
  PhononSiteOps s;
  const int d = ph.d;
  const double w = ph.omega;
  MatC aF = MatC::Zero(d, d);
  for (int k = 1; k < d; ++k) aF(k - 1, k) = std::sqrt(static_cast<double>(k));
  const cplx I(0.0, 1.0);
  if (ph.rep == PhononRep::fock) {
    s.a = aF;
    s.adag = aF.adjoint();
    s.phi = std::sqrt(1.0 / (2.0 * w)) * (s.a + s.adag);
    s.pi = I * std::sqrt(w / 2.0) * (s.adag - s.a);
    s.number = s.adag * s.a;
    s.energy = w * s.number;
  } else {
    // orthogonal change of basis from Fock states to √μ-weighted node values
    const HermiteTransform h = hermite_position_transform(d - 1, d, w);
    MatR Ts = h.T * h.weights.cwiseSqrt().asDiagonal();
    s.a = Ts.transpose().cast<cplx>() * aF * Ts.cast<cplx>();
    s.adag = s.a.adjoint();
    s.phi = ph.x.cast<cplx>().asDiagonal();
    s.pi = I * std::sqrt(w / 2.0) * (s.adag - s.a);
    s.number = s.adag * s.a;
    const MatR kin = finite_volume_kinetic(ph.x, ph.weights);
    MatR pot = (0.5 * w * w * ph.x.array().square()).matrix().asDiagonal();
    s.energy = (kin + pot - 0.5 * w * MatR::Identity(d, d)).cast<cplx>();
  }
  const MatC comm = s.a * s.adag - s.adag * s.a - MatC::Identity(d, d);
  s.ccr_defect = comm.cwiseAbs().maxCoeff();
  return s;
}

/// e^{i c φ} on one site: diagonal on the grid, spectral exponential of the truncated φ otherwise.
inline MatC phase_site(const PhononBasisSpec& ph, double c)
{
  const PhononSiteOps s = phonon_site_ops(ph);
  if (ph.rep == PhononRep::grid) {
    MatC m = MatC::Zero(ph.d, ph.d);
    for (int k = 0; k < ph.d; ++k) m(k, k) = std::exp(cplx(0.0, c * ph.x(k)));
    return m;
  }
  Eigen::SelfAdjointEigenSolver<MatR> es(s.phi.real());
  VecC e(ph.d);
  for (int k = 0; k < ph.d; ++k) e(k) = std::exp(cplx(0.0, c * es.eigenvalues()(k)));
  const MatC V = es.eigenvectors().cast<cplx>();
  return V * e.asDiagonal() * V.adjoint();
}

/// Operator on the d^n phonon space with the given single-site factors and identities elsewhere.
inline SpMat phonon_product(const CompositeBasis& b, const std::vector<std::pair<int, MatC>>& factors)
{
  SpMat P(1, 1);
  P.insert(0, 0) = 1.0;
  SpMat Id(b.phonon.d, b.phonon.d);
  Id.setIdentity();
  for (int p = 0; p < b.n_sites; ++p) {
    const MatC* f = nullptr;
    for (const auto& [q, m] : factors)
      if (q == p) {
        if (f) throw std::invalid_argument("two factors on one phonon site");
        f = &m;
      }
    SpMat next = f ? SpMat(Eigen::kroneckerProduct(P, SpMat(f->sparseView())).eval()) : SpMat(Eigen::kroneckerProduct(P, Id).eval());
    P = std::move(next);
  }
  P.prune(cplx(0.0), 0.0);
  return P;
}

inline SpMat phonon_identity(const CompositeBasis& b)
{
  SpMat I(b.phonon_dim, b.phonon_dim);
  I.setIdentity();
  return I;
}

// ---------------------------------------------------------------------------
// Assembly of fermion ⊗ phonon terms on restricted bases

/// Accumulates coeff · F ⊗ P, keeping only rows/columns whose configurations belong to the bases.
class TermAssembler {
public:
  TermAssembler(const CompositeBasis& rows, const CompositeBasis& cols) : rows_(rows), cols_(cols) {}

  void add(const SpReal& F, const SpMat& P, cplx coeff)
  {
    for (int k = 0; k < F.outerSize(); ++k)
      for (SpReal::InnerIterator it(F, k); it; ++it) {
        const Index r = rows_.slot.at(static_cast<std::size_t>(it.row()));
        const Index c = cols_.slot.at(static_cast<std::size_t>(it.col()));
        if (r < 0 || c < 0) continue;
        const cplx f = coeff * it.value();
        const Index r0 = r * rows_.phonon_dim, c0 = c * cols_.phonon_dim;
        for (int kk = 0; kk < P.outerSize(); ++kk)
          for (SpMat::InnerIterator jt(P, kk); jt; ++jt)
            trip_.emplace_back(static_cast<int>(r0 + jt.row()), static_cast<int>(c0 + jt.col()), f * jt.value());
      }
  }

  SpMat build()
  {
    SpMat m(rows_.dim(), cols_.dim());
    m.setFromTriplets(trip_.begin(), trip_.end());
    trip_.clear();
    return m;
  }

private:
  const CompositeBasis& rows_;
  const CompositeBasis& cols_;
  std::vector<Eigen::Triplet<cplx>> trip_;
};

/// F ⊗ P restricted to one basis.
inline SpMat embed(const CompositeBasis& b, const SpReal& F, const SpMat& P, cplx coeff = 1.0)
{
  TermAssembler as(b, b);
  as.add(F, P, coeff);
  return as.build();
}

inline OperatorMatrix annihilator(int j, const CompositeBasis& b)
{
  if (!b.is_full_fock()) throw std::invalid_argument("annihilator needs a basis with all fillings");
  return {b, embed(b, jw_annihilator(b.n_sites, b.pos(j)), phonon_identity(b)), false};
}

inline OperatorMatrix creator(int j, const CompositeBasis& b)
{
  OperatorMatrix c = annihilator(j, b);
  c.mat = SpMat(c.mat.adjoint());
  return c;
}

struct NumberOps {
  OperatorMatrix n, dn; // n̂_j and δn̂_j = n̂_j − 1/2
};

inline NumberOps number_ops(int j, const CompositeBasis& b)
{
  const int p = b.pos(j);
  const SpReal n = fermion_diagonal(b.n_sites, [&](std::uint32_t m) { return bit_at(m, b.n_sites, p) ? 1.0 : 0.0; });
  const SpReal dn = fermion_diagonal(b.n_sites, [&](std::uint32_t m) { return bit_at(m, b.n_sites, p) ? 0.5 : -0.5; });
  const SpMat I = phonon_identity(b);
  return {{b, embed(b, n, I), true}, {b, embed(b, dn, I), true}};
}

struct BosonOps {
  OperatorMatrix a, adag, phi, pi;
};

inline BosonOps boson_ops(int j, const CompositeBasis& b)
{
  const int p = b.pos(j);
  const PhononSiteOps s = phonon_site_ops(b.phonon);
  const SpReal I = fermion_identity(b.n_sites);
  auto mk = [&](const MatC& m, bool herm) {
    return OperatorMatrix{b, embed(b, I, phonon_product(b, {{p, m}})), herm, s.ccr_defect};
  };
  return {mk(s.a, false), mk(s.adag, false), mk(s.phi, true), mk(s.pi, true)};
}

namespace detail {

inline int wrap_pos(int pos, int n) { return ((pos % n) + n) % n; }

/// Σ_j ω a*_j a_j (or the grid oscillator) as F = 1, P = Σ_j single-site energies.
inline SpMat phonon_energy(const CompositeBasis& b, const PhononSiteOps& s)
{
  SpMat K(b.phonon_dim, b.phonon_dim);
  for (int p = 0; p < b.n_sites; ++p) K += phonon_product(b, {{p, s.energy}});
  return K;
}

inline double interaction_energy(const InteractionSpec& spec, std::uint32_t m, int n, double sign_flip)
{
  // Σ_{i,j} U(i−j) δn_i δn_j with plain site differences; sign_flip selects W instead of U
  double e = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double di = bit_at(m, n, i) ? 0.5 : -0.5;
      const double dj = bit_at(m, n, j) ? 0.5 : -0.5;
      const double u = sign_flip > 0 ? w_of(spec, i - j) : u_of(spec, i - j);
      e += u * di * dj;
    }
  return e;
}

} // namespace detail

/// H = −t Σ_j (c*_j c_{j+1} + h.c.) + Σ_{ij} U(i−j) δn̂_i δn̂_j + g Σ_j δn̂_j (a_j + a*_j) + ω Σ_j a*_j a_j
/// with c_ℓ ≡ c_{−ℓ}. On the grid, a + a* = √(2ω) φ and the phonon energy is the finite-volume oscillator.
inline OperatorMatrix build_hamiltonian(const ModelParams& par, const CompositeBasis& b)
{
  par.validate();
  const int n = b.n_sites;
  if (n != 2 * par.ell || b.first_site != -par.ell) throw std::invalid_argument("basis does not match ell");
  const FermionAlgebra fa(n);
  const PhononSiteOps s = phonon_site_ops(b.phonon);
  const SpMat Iph = phonon_identity(b);
  TermAssembler as(b, b);

  SpReal hop(1 << n, 1 << n);
  for (int p = 0; p < n; ++p) {
    const int q = detail::wrap_pos(p + 1, n);
    hop += SpReal(fa.cd[p] * fa.c[q]) + SpReal(fa.cd[q] * fa.c[p]);
  }
  as.add(hop, Iph, -par.t);
  as.add(fermion_diagonal(n, [&](std::uint32_t m) { return detail::interaction_energy(par.interaction, m, n, -1); }),
         Iph, 1.0);
  // on the grid use the exact node values so the coupling stays diagonal
  const MatC x = b.phonon.rep == PhononRep::grid ? MatC(std::sqrt(2.0 * b.phonon.omega) * s.phi) : MatC(s.a + s.adag);
  for (int p = 0; p < n; ++p) as.add(fa.dn(p), phonon_product(b, {{p, x}}), par.g);
  as.add(fa.I, detail::phonon_energy(b, s), 1.0);
  return {b, as.build(), true, s.ccr_defect};
}

/// 𝖳 + 𝖯 + K, the image of H under the polaron transform up to the constant −g²|Λ|/4ω.
inline OperatorMatrix build_polaron_hamiltonian(const ModelParams& par, const CompositeBasis& b)
{
  par.validate();
  const int n = b.n_sites;
  const FermionAlgebra fa(n);
  const PhononSiteOps s = phonon_site_ops(b.phonon);
  const double al = par.lf_alpha();
  const MatC ep = phase_site(b.phonon, al), em = phase_site(b.phonon, -al);
  TermAssembler as(b, b);
  for (int p = 0; p < n; ++p) {
    const int q = detail::wrap_pos(p + 1, n);
    // e^{−iα(φ_p − φ_q)} c*_p c_q + h.c.
    as.add(SpReal(fa.cd[p] * fa.c[q]), phonon_product(b, {{p, em}, {q, ep}}), -par.t);
    as.add(SpReal(fa.cd[q] * fa.c[p]), phonon_product(b, {{p, ep}, {q, em}}), -par.t);
  }
  as.add(fermion_diagonal(n, [&](std::uint32_t m) { return detail::interaction_energy(par.interaction, m, n, -1); }),
         phonon_identity(b), 1.0);
  as.add(fa.I, detail::phonon_energy(b, s), 1.0);
  return {b, as.build(), true, s.ccr_defect};
}

namespace detail {

/// 𝕋 + diag(m) + K, shared by the plain and field-dependent transformed Hamiltonians
/// so that both have the same sparsity pattern.
template <typename Diag>
OperatorMatrix transformed_impl(const ModelParams& par, const CompositeBasis& b, Diag diag)
{
  par.validate();
  const int n = b.n_sites;
  if (n != 2 * par.ell || b.first_site != -par.ell) throw std::invalid_argument("basis does not match ell");
  const FermionAlgebra fa(n);
  const PhononSiteOps s = phonon_site_ops(b.phonon);
  const double al = par.lf_alpha();
  const MatC ep = phase_site(b.phonon, al), em = phase_site(b.phonon, -al);
  TermAssembler as(b, b);
  for (int p = 0; p < n; ++p) {
    const int site = p + b.first_site;
    if (site % 2 != 0) continue;
    for (int eps : {1, -1}) {
      const int q = wrap_pos(p + eps, n);
      // e^{−iα(φ_j − φ_{j+ε})} c*_j c*_{j+ε} + e^{+iα(φ_j − φ_{j+ε})} c_{j+ε} c_j
      as.add(SpReal(fa.cd[p] * fa.cd[q]), phonon_product(b, {{p, em}, {q, ep}}), -par.t);
      as.add(SpReal(fa.c[q] * fa.c[p]), phonon_product(b, {{p, ep}, {q, em}}), -par.t);
    }
  }
  as.add(fermion_diagonal(n, diag), phonon_identity(b), 1.0);
  as.add(fa.I, phonon_energy(b, s), 1.0);
  return {b, as.build(), true, s.ccr_defect};
}

} // namespace detail

/// H̃ = 𝕋 − 𝕎 + K with 𝕎 = Σ_{i≠j} W(i−j) δn̂_i δn̂_j.
inline OperatorMatrix build_transformed(const ModelParams& par, const CompositeBasis& b)
{
  const int n = b.n_sites;
  return detail::transformed_impl(par, b, [&](std::uint32_t m) {
    return -detail::interaction_energy(par.interaction, m, n, +1);
  });
}

/// V̄ = |Λ|^{-1} Σ_{i≠j∈Λ} W(i−j), the constant that makes 𝕎(0) = 𝕎.
inline double mean_w(const InteractionSpec& spec, int ell)
{
  const int n = 2 * ell;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) s += w_of(spec, i - j);
  return s / n;
}

/// H̃(h) = 𝕋 − 𝕎(h) + K with
/// 𝕎(h) = −¼ Σ_{i≠j} W(i−j)[(δn̂_i − h_i − δn̂_j + h_j)² + (δn̂_i − h_{r(i)} − δn̂_j + h_{r(j)})²] + V̄|Λ|/4.
inline OperatorMatrix build_field_hamiltonian(const ModelParams& par, const std::vector<double>& h,
                                              const CompositeBasis& b)
{
  const int n = b.n_sites;
  if (static_cast<int>(h.size()) != n) throw std::invalid_argument("field vector has wrong length");
  const int ell = par.ell;
  const double vbar = mean_w(par.interaction, ell);
  auto rpos = [&](int p) { return (-1 - (p - ell)) + ell; }; // position of r(site)
  return detail::transformed_impl(par, b, [&](std::uint32_t m) {
    double w = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double di = bit_at(m, n, i) ? 0.5 : -0.5;
        const double dj = bit_at(m, n, j) ? 0.5 : -0.5;
        const double A = di - h[i] - dj + h[j];
        const double B = di - h[rpos(i)] - dj + h[rpos(j)];
        w += -0.25 * w_of(par.interaction, i - j) * (A * A + B * B);
      }
    w += vbar * n / 4.0;
    return -w;
  });
}

/// δn̂_{i_m}···δn̂_{i_1} δn̂_{r(i_1)}···δn̂_{r(i_m)} for i_k ∈ Λ_L (diagonal).
inline OperatorMatrix delta_n_string(const std::vector<int>& sites, const CompositeBasis& b)
{
  const int ell = b.n_sites / 2;
  for (int i : sites)
    if (i < -ell || i > -1) throw std::invalid_argument("string sites must lie in the left half");
  const SpReal F = fermion_diagonal(b.n_sites, [&](std::uint32_t m) {
    double v = 1.0;
    for (int i : sites) {
      v *= bit_at(m, b.n_sites, b.pos(i)) ? 0.5 : -0.5;
      v *= bit_at(m, b.n_sites, b.pos(-1 - i)) ? 0.5 : -0.5;
    }
    return v;
  });
  return {b, embed(b, F, phonon_identity(b)), true};
}

/// Diagonal of a fermion-diagonal function over the basis, one entry per flat index.
template <typename F>
VecR basis_diagonal(const CompositeBasis& b, F f)
{
  VecR d(b.dim());
  for (Index s = 0; s < b.n_configs(); ++s) d.segment(s * b.phonon_dim, b.phonon_dim).setConstant(f(b.configs[s]));
  return d;
}

/// δn̂_j as a diagonal vector over the basis.
inline VecR delta_n_diag(int j, const CompositeBasis& b)
{
  const int p = b.pos(j);
  return basis_diagonal(b, [&](std::uint32_t m) { return bit_at(m, b.n_sites, p) ? 0.5 : -0.5; });
}

} // namespace rpchain
