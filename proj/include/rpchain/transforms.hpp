#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "rpchain/fock.hpp"
#include "rpchain/model.hpp"
#include "rpchain/operators.hpp"
#include "rpchain/spectral.hpp"
#include "rpchain/types.hpp"

namespace rpchain {

// ---------------------------------------------------------------------------
// Hole-particle transform

/// U = ∏_{j odd} u_j in increasing site order, u_j = ∏_{k≠j}(−1)^{n_k} (c*_j + c_j),
/// on the fermion space of the (sub)chain starting at first_site.
inline SpReal hole_particle_fermion(int first_site, int n_sites)
{
  const FermionAlgebra fa(n_sites);
  SpReal U = fa.I;
  for (int p = 0; p < n_sites; ++p) {
    const int site = first_site + p;
    if (site % 2 == 0) continue;
    const SpReal u = fermion_parity(n_sites, p) * SpReal(fa.c[p] + fa.cd[p]);
    U = SpReal(U * u);
  }
  return U;
}

/// U_Λ on a basis containing all fillings.
inline OperatorMatrix hole_particle(const CompositeBasis& b)
{
  if (!b.is_full_fock()) throw std::invalid_argument("hole_particle needs a basis with all fillings");
  return {b, embed(b, hole_particle_fermion(b.first_site, b.n_sites), phonon_identity(b)), false};
}

/// U_Λ as a map from the half-filled basis onto the charge-balanced basis.
inline SpMat hole_particle_map(const CompositeBasis& half, const CompositeBasis& balanced)
{
  TermAssembler as(balanced, half);
  as.add(hole_particle_fermion(half.first_site, half.n_sites), phonon_identity(half), 1.0);
  return as.build();
}

/// Ω^CDW: every odd site occupied.
inline std::uint32_t cdw_mask(int ell)
{
  std::uint32_t m = 0;
  for (int j = -ell; j < ell; ++j)
    if (j % 2 != 0) m |= bit_of(2 * ell, j + ell);
  return m;
}

// ---------------------------------------------------------------------------
// Lang-Firsov transform

/// V = e^{−iπN_p/2} e^{L}, L = −i√2 ω^{−3/2} g Σ_j δn̂_j π_j, on a Fock-phonon basis.
/// L is block diagonal in the fermion configuration, so V is assembled per configuration
/// from single-site exponentials of the truncated π.
inline OperatorMatrix lang_firsov(const ModelParams& par, const CompositeBasis& b)
{
  if (b.phonon.rep != PhononRep::fock) throw std::invalid_argument("lang_firsov needs the Fock phonon basis");
  const PhononSiteOps s = phonon_site_ops(b.phonon);
  const int d = b.phonon.d;
  const double theta = std::sqrt(2.0) * std::pow(par.omega, -1.5) * par.g;
  Eigen::SelfAdjointEigenSolver<MatC> es(s.pi);
  auto exp_pi = [&](double c) { // e^{−i c π}
    VecC e(d);
    for (int k = 0; k < d; ++k) e(k) = std::exp(cplx(0.0, -c * es.eigenvalues()(k)));
    return MatC(es.eigenvectors() * e.asDiagonal() * es.eigenvectors().adjoint());
  };
  MatC rot = MatC::Zero(d, d); // e^{−iπ n/2}
  for (int k = 0; k < d; ++k) rot(k, k) = std::pow(cplx(0.0, -1.0), k);
  const MatC site_up = rot * exp_pi(theta * 0.5), site_down = rot * exp_pi(-theta * 0.5);
  TermAssembler as(b, b);
  for (Index sl = 0; sl < b.n_configs(); ++sl) {
    const std::uint32_t m = b.configs[sl];
    std::vector<std::pair<int, MatC>> f;
    for (int p = 0; p < b.n_sites; ++p) f.emplace_back(p, bit_at(m, b.n_sites, p) ? site_up : site_down);
    SpReal F(std::size_t{1} << b.n_sites, std::size_t{1} << b.n_sites);
    F.insert(m, m) = 1.0;
    as.add(F, phonon_product(b, f), 1.0);
  }
  return {b, as.build(), false, s.ccr_defect};
}

/// Indicator of flat indices whose every phonon occupation is ≤ n_max/2.
inline std::vector<Index> low_occupation_probe(const CompositeBasis& b)
{
  std::vector<Index> out;
  const int cap = b.phonon.n_max / 2;
  for (Index i = 0; i < b.dim(); ++i) {
    const auto dg = b.digits(i % b.phonon_dim);
    bool ok = true;
    for (int v : dg) ok = ok && v <= cap;
    if (ok) out.push_back(i);
  }
  return out;
}

/// max |(A − B) e_i| over probe columns i.
inline double probe_defect(const SpMat& A, const SpMat& B, const std::vector<Index>& probe)
{
  const SpMat D = A - B;
  double r = 0.0;
  for (Index i : probe)
    for (SpMat::InnerIterator it(D, static_cast<int>(i)); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

struct LangFirsovReport {
  double unitarity_defect = 0.0;      // max |V*V − I|
  double fermion_defect = 0.0;        // ‖V c_j V^{-1} − e^{iαφ_j} c_j‖ on the probe, max over j
  double boson_defect = 0.0;          // ‖V a_j V^{-1} − (i a_j − (g/ω) δn̂_j)‖ on the probe, max over j
  double ground_energy_h = 0.0;       // E0(H) + g²|Λ|/4ω on the half-filled space
  double ground_energy_polaron = 0.0; // E0(𝖳 + 𝖯 + K)
  double spectral_gap = 0.0;          // |difference of the two|
};

/// Polaron transform checks on the full Fock space of the chain at the configured n_max.
inline LangFirsovReport lang_firsov_report(const ModelParams& par)
{
  const PhononBasisSpec ph = PhononBasisSpec::fock(par.n_max, par.omega);
  const CompositeBasis full = full_basis(par.ell, ph);
  const SpMat V = lang_firsov(par, full).mat;
  const SpMat Vd = V.adjoint();
  SpMat I(full.dim(), full.dim());
  I.setIdentity();
  LangFirsovReport r;
  r.unitarity_defect = max_abs(SpMat(Vd * V - I));
  const std::vector<Index> probe = low_occupation_probe(full);
  const SpReal IF = fermion_identity(full.n_sites);
  const MatC phase = phase_site(ph, par.lf_alpha());
  for (int j = -par.ell; j < par.ell; ++j) {
    const SpMat c = annihilator(j, full).mat;
    const SpMat lhs = V * c * Vd;
    const SpMat rhs = embed(full, IF, phonon_product(full, {{full.pos(j), phase}})) * c;
    r.fermion_defect = std::max(r.fermion_defect, probe_defect(lhs, rhs, probe));
    const SpMat a = boson_ops(j, full).a.mat;
    const SpMat la = V * a * Vd;
    const SpMat ra = cplx(0.0, 1.0) * a - (par.g / par.omega) * number_ops(j, full).dn.mat;
    r.boson_defect = std::max(r.boson_defect, probe_defect(la, ra, probe));
  }
  const CompositeBasis half = half_filled_basis(par.ell, ph);
  const double shift = par.g * par.g * par.sites() / (4.0 * par.omega);
  r.ground_energy_h = ground_state(build_hamiltonian(par, half).mat).E0 + shift;
  r.ground_energy_polaron = ground_state(build_polaron_hamiltonian(par, half).mat).E0;
  r.spectral_gap = std::abs(r.ground_energy_h - r.ground_energy_polaron);
  return r;
}

// ---------------------------------------------------------------------------
// Antiunitaries as signed permutations with conjugation

/// v ↦ Σ_i sign_i · c(v_i) e_{target_i}, with c complex conjugation when `conjugate` is set.
struct AntiunitaryRep {
  std::vector<Index> target;
  std::vector<double> sign;
  bool conjugate = true;

  Index dim() const { return static_cast<Index>(target.size()); }

  VecC apply(const VecC& v) const
  {
    if (v.size() != dim()) throw std::invalid_argument("vector size does not match antiunitary");
    VecC out = VecC::Zero(dim());
    for (Index i = 0; i < dim(); ++i) out(target[i]) = sign[i] * (conjugate ? std::conj(v(i)) : v(i));
    return out;
  }

  /// ϑ A ϑ^{-1}: entry (t(r), t(c)) = s_r s_c c(A_rc).
  SpMat conjugate_op(const SpMat& A) const
  {
    if (A.rows() != dim() || A.cols() != dim()) throw std::invalid_argument("operator size does not match antiunitary");
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(A.nonZeros()));
    for (int k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it) {
        const cplx v = conjugate ? std::conj(it.value()) : it.value();
        trip.emplace_back(static_cast<int>(target[it.row()]), static_cast<int>(target[it.col()]),
                          sign[it.row()] * sign[it.col()] * v);
      }
    SpMat B(dim(), dim());
    B.setFromTriplets(trip.begin(), trip.end());
    return B;
  }

  AntiunitaryRep inverse() const
  {
    AntiunitaryRep r{std::vector<Index>(target.size()), std::vector<double>(sign.size()), conjugate};
    for (Index i = 0; i < dim(); ++i) {
      r.target[target[i]] = i;
      r.sign[target[i]] = sign[i];
    }
    return r;
  }

  /// The signed permutation matrix P (v ↦ P c(v)).
  SpReal matrix() const
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (Index i = 0; i < dim(); ++i) trip.emplace_back(static_cast<int>(target[i]), static_cast<int>(i), sign[i]);
    SpReal P(dim(), dim());
    P.setFromTriplets(trip.begin(), trip.end());
    return P;
  }
};

/// a ∘ b.
inline AntiunitaryRep compose(const AntiunitaryRep& a, const AntiunitaryRep& b)
{
  if (a.dim() != b.dim()) throw std::invalid_argument("cannot compose maps of different size");
  AntiunitaryRep r{std::vector<Index>(b.target.size()), std::vector<double>(b.sign.size()), a.conjugate != b.conjugate};
  for (Index i = 0; i < b.dim(); ++i) {
    r.target[i] = a.target[b.target[i]];
    r.sign[i] = a.sign[b.target[i]] * b.sign[i];
  }
  return r;
}

/// A real signed-permutation fermion matrix tensored with the phonon identity, as a linear rep.
inline AntiunitaryRep signed_permutation(const SpReal& F, const CompositeBasis& b)
{
  AntiunitaryRep r{std::vector<Index>(b.dim(), -1), std::vector<double>(b.dim(), 0.0), false};
  for (int k = 0; k < F.outerSize(); ++k)
    for (SpReal::InnerIterator it(F, k); it; ++it) {
      if (it.value() == 0.0) continue;
      if (std::abs(std::abs(it.value()) - 1.0) > 1e-14) throw std::invalid_argument("not a signed permutation");
      const Index from = b.slot.at(it.col()), to = b.slot.at(it.row());
      if (from < 0 || to < 0) throw std::invalid_argument("signed permutation leaves the basis");
      for (Index ph = 0; ph < b.phonon_dim; ++ph) {
        r.target[b.index_of(from, ph)] = b.index_of(to, ph);
        r.sign[b.index_of(from, ph)] = it.value();
      }
    }
  for (Index t : r.target)
    if (t < 0) throw std::invalid_argument("signed permutation is not onto");
  return r;
}

// ---------------------------------------------------------------------------
// Reflection ϑ : F_{Λ_L} → F_{Λ_R}

/// Sign tables of the b-basis: e_X = b*_{I_e}b*_{I_o}Ω_L = s(X)|X⟩ and
/// ∏ (−1)^{r(j)} c*_{r(j)} Ω_R (same order) = θs(X)|r(X)⟩, with b*_j = c*_j(−1)^{N̂} for even j
/// and (−1)^{N̂}c*_j for odd j.
struct BSignTable {
  int ell = 1;
  std::vector<double> s;        // by left mask
  std::vector<double> theta_s;  // by left mask
  std::vector<std::uint32_t> reflected; // left mask ↦ right mask of r(X)
};

inline BSignTable b_sign_table(int ell)
{
  if (ell < 1 || ell > 15) throw std::invalid_argument("unsupported ell");
  static std::map<int, BSignTable> cache;
  if (auto it = cache.find(ell); it != cache.end()) return it->second;
  BSignTable t;
  t.ell = ell;
  const std::uint32_t n = 1u << ell;
  t.s.assign(n, 1.0);
  t.theta_s.assign(n, 1.0);
  t.reflected.assign(n, 0);
  for (std::uint32_t X = 0; X < n; ++X) {
    std::vector<int> order; // I_e ascending then I_o ascending
    for (int pass = 0; pass < 2; ++pass)
      for (int p = 0; p < ell; ++p) {
        const int j = p - ell;
        if (bit_at(X, ell, p) && ((j % 2 == 0) == (pass == 0))) order.push_back(j);
      }
    std::uint32_t mL = 0, mR = 0;
    double sL = 1.0, sR = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) { // rightmost factor acts first
      const int j = *it;
      const int pl = j + ell;
      const int before = std::popcount(mL >> (ell - pl));
      const int parity = std::popcount(mL) + (j % 2 != 0 ? 1 : 0);
      sL *= ((before + parity) % 2) ? -1.0 : 1.0;
      mL |= bit_of(ell, pl);
      const int rj = -1 - j;
      const int before_r = std::popcount(mR >> (ell - rj));
      sR *= ((before_r + (rj % 2 != 0 ? 1 : 0)) % 2) ? -1.0 : 1.0;
      mR |= bit_of(ell, rj);
    }
    t.s[X] = sL;
    t.theta_s[X] = sR;
    t.reflected[X] = mR;
  }
  cache.emplace(ell, t);
  return t;
}

/// ϑ(|X⟩⊗|n⟩) = s(X)θs(X)|r(X)⟩⊗|n∘r⟩ from the left half-chain basis to the right one
/// (same index sets; the phonon digit at left position p moves to right position ℓ−1−p).
inline AntiunitaryRep reflection_antiunitary(int ell, const PhononBasisSpec& ph)
{
  if (ell % 2 == 0) throw std::invalid_argument("reflection routines require odd ell, got " + std::to_string(ell));
  const BSignTable t = b_sign_table(ell);
  const CompositeBasis L = left_basis(ell, ph), R = right_basis(ell, ph);
  AntiunitaryRep r{std::vector<Index>(L.dim()), std::vector<double>(L.dim()), true};
  for (Index sl = 0; sl < L.n_configs(); ++sl) {
    const std::uint32_t X = L.configs[sl];
    const Index tr = R.slot.at(t.reflected[X]);
    for (Index pi = 0; pi < L.phonon_dim; ++pi) {
      auto dg = L.digits(pi);
      std::reverse(dg.begin(), dg.end());
      r.target[L.index_of(sl, pi)] = R.index_of(tr, R.phonon_index_of(dg));
      r.sign[L.index_of(sl, pi)] = t.s[X] * t.theta_s[X];
    }
  }
  return r;
}

/// τ = U*_{Λ_R} ϑ U_{Λ_L} with the hole-particle maps of the half chains.
inline AntiunitaryRep tau(int ell, const PhononBasisSpec& ph)
{
  const CompositeBasis L = left_basis(ell, ph), R = right_basis(ell, ph);
  const AntiunitaryRep uL = signed_permutation(hole_particle_fermion(-ell, ell), L);
  const AntiunitaryRep uRd = signed_permutation(SpReal(hole_particle_fermion(0, ell).transpose()), R);
  return compose(uRd, compose(reflection_antiunitary(ell, ph), uL));
}

/// b_j on the left half: (−1)^{N̂} c_j for even j, c_j (−1)^{N̂} for odd j.
inline SpMat b_operator(int j, const CompositeBasis& L)
{
  const int p = L.pos(j);
  const SpReal c = jw_annihilator(L.n_sites, p), P = fermion_parity(L.n_sites);
  const SpReal b = (j % 2 == 0) ? SpReal(P * c) : SpReal(c * P);
  return embed(L, b, phonon_identity(L));
}

// ---------------------------------------------------------------------------
// Two-sided operators on F_{Λ_L} ⊗ F_{Λ_R}

/// A ⊗ B as a plain tensor product, restricted to the configurations of `target`
/// (a basis of the whole chain; its mask is (left mask << ℓ) | right mask).
inline SpMat tensor_lr(const SpMat& A, const CompositeBasis& L, const SpMat& B, const CompositeBasis& R,
                       const CompositeBasis& target)
{
  const int ell = L.n_sites;
  std::vector<Eigen::Triplet<cplx>> trip;
  auto flat = [&](Index l, Index r) -> Index {
    const auto [ls, lp] = L.state_of(l);
    const auto [rs, rp] = R.state_of(r);
    const std::uint32_t m = (L.configs[ls] << ell) | R.configs[rs];
    const Index s = target.slot.at(m);
    return s < 0 ? -1 : target.index_of(s, lp * R.phonon_dim + rp);
  };
  for (int ka = 0; ka < A.outerSize(); ++ka)
    for (SpMat::InnerIterator ia(A, ka); ia; ++ia)
      for (int kb = 0; kb < B.outerSize(); ++kb)
        for (SpMat::InnerIterator ib(B, kb); ib; ++ib) {
          const Index r = flat(ia.row(), ib.row()), c = flat(ia.col(), ib.col());
          if (r < 0 || c < 0) continue;
          trip.emplace_back(static_cast<int>(r), static_cast<int>(c), ia.value() * ib.value());
        }
  SpMat M(target.dim(), target.dim());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

inline SpMat identity_on(const CompositeBasis& b)
{
  SpMat I(b.dim(), b.dim());
  I.setIdentity();
  return I;
}

/// L(A) = A ⊗ 1.
inline SpMat lift_left(const SpMat& A, const CompositeBasis& L, const CompositeBasis& R, const CompositeBasis& target)
{
  return tensor_lr(A, L, identity_on(R), R, target);
}

/// R(B) = 1 ⊗ ϑB*ϑ^{-1}, so that under vectorization R(B) acts as M ↦ MB.
inline SpMat lift_right(const SpMat& B, const AntiunitaryRep& theta, const CompositeBasis& L, const CompositeBasis& R,
                        const CompositeBasis& target)
{
  return tensor_lr(identity_on(L), L, theta.conjugate_op(SpMat(B.adjoint())), R, target);
}

namespace detail {

/// Σ over adjacent pairs {j, j+ε} (j even, periodic in Λ) accepted by `keep` of the transformed hopping
/// −t(e^{−iα(φ_j−φ_{j+ε})}c*_j c*_{j+ε} + h.c.), on any basis whose sites contain both members.
template <typename Keep>
SpMat pair_hopping(const ModelParams& par, const CompositeBasis& b, Keep keep)
{
  const int n = b.n_sites, N = 2 * par.ell;
  const FermionAlgebra fa(n);
  const double al = par.lf_alpha();
  const MatC ep = phase_site(b.phonon, al), em = phase_site(b.phonon, -al);
  TermAssembler as(b, b);
  for (int j = -par.ell; j < par.ell; j += 1) {
    if (j % 2 != 0) continue;
    for (int eps : {1, -1}) {
      const int k = wrap_pos(j + eps + par.ell, N) - par.ell;
      if (!b.contains_site(j) || !b.contains_site(k) || !keep(j, k)) continue;
      const int p = b.pos(j), q = b.pos(k);
      as.add(SpReal(fa.cd[p] * fa.cd[q]), phonon_product(b, {{p, em}, {q, ep}}), -par.t);
      as.add(SpReal(fa.c[q] * fa.c[p]), phonon_product(b, {{p, ep}, {q, em}}), -par.t);
    }
  }
  return as.build();
}

/// Σ_{i≠j} W(i−j) δn̂_i δn̂_j over the sites of b.
inline SpMat w_energy(const InteractionSpec& spec, const CompositeBasis& b)
{
  return embed(b, fermion_diagonal(b.n_sites, [&](std::uint32_t m) { return interaction_energy(spec, m, b.n_sites, +1); }),
               phonon_identity(b));
}

} // namespace detail

/// Half-chain pieces of the transformed Hamiltonian, each on its own half-chain basis.
struct HalfChainTerms {
  CompositeBasis L, R;
  SpMat T_L, T_R, W_L, W_R, K_L, K_R;
  SpMat K; // 𝕂 = 𝕋_L − 𝕎_L + K_L
};

inline HalfChainTerms half_chain_terms(const ModelParams& par, const PhononBasisSpec& ph)
{
  HalfChainTerms h{left_basis(par.ell, ph), right_basis(par.ell, ph)};
  auto inside = [](int, int) { return true; };
  h.T_L = detail::pair_hopping(par, h.L, inside);
  h.T_R = detail::pair_hopping(par, h.R, inside);
  h.W_L = detail::w_energy(par.interaction, h.L);
  h.W_R = detail::w_energy(par.interaction, h.R);
  const PhononSiteOps s = phonon_site_ops(ph);
  h.K_L = embed(h.L, fermion_identity(h.L.n_sites), detail::phonon_energy(h.L, s));
  h.K_R = embed(h.R, fermion_identity(h.R.n_sites), detail::phonon_energy(h.R, s));
  h.K = h.T_L - h.W_L + h.K_L;
  return h;
}

/// 𝕋_{LR}: the hopping terms across the two seams, on a whole-chain basis.
inline SpMat seam_hopping(const ModelParams& par, const CompositeBasis& b)
{
  return detail::pair_hopping(par, b, [](int j, int k) { return (j < 0) != (k < 0); });
}

/// 𝕎_{LR} = 2 Σ_{i∈Λ_L, j∈Λ_R} W(i−j) δn̂_i δn̂_j, diagonal on a whole-chain basis.
inline SpMat seam_interaction(const ModelParams& par, const CompositeBasis& b)
{
  const int n = b.n_sites, ell = par.ell;
  return embed(b,
               fermion_diagonal(n,
                                [&](std::uint32_t m) {
                                  double e = 0.0;
                                  for (int i = 0; i < ell; ++i)
                                    for (int j = ell; j < n; ++j) {
                                      const double di = bit_at(m, n, i) ? 0.5 : -0.5;
                                      const double dj = bit_at(m, n, j) ? 0.5 : -0.5;
                                      e += 2.0 * w_of(par.interaction, i - j) * di * dj;
                                    }
                                  return e;
                                }),
               phonon_identity(b));
}

/// Defects (max-abs entry differences) of the half-chain decomposition identities of H̃.
struct DecompositionReport {
  double hopping_reflection = 0.0;    // 𝕋_R vs ϑ𝕋_Lϑ^{-1}
  double interaction_reflection = 0.0; // 𝕎_R vs ϑ𝕎_Lϑ^{-1}
  double seam_hopping = 0.0;           // 𝕋_LR vs its b-operator form
  double seam_interaction = 0.0;       // 𝕎_LR vs 2Σ W(i+j+1) δn̂_i ⊗ ϑδn̂_jϑ^{-1}
  double phonon_reflection = 0.0;      // K_R vs ϑK_Lϑ^{-1}
  double hamiltonian_split = 0.0;      // H̃ vs the sum of all pieces
  double max_defect() const
  {
    return std::max({hopping_reflection, interaction_reflection, seam_hopping, seam_interaction, phonon_reflection,
                     hamiltonian_split});
  }
};

/// All identities on the whole-chain Fock space with every filling.
inline DecompositionReport decomposition_report(const ModelParams& par, const PhononBasisSpec& ph)
{
  par.require_odd();
  const int ell = par.ell;
  const HalfChainTerms h = half_chain_terms(par, ph);
  const AntiunitaryRep th = reflection_antiunitary(ell, ph);
  const CompositeBasis full = full_basis(ell, ph);
  DecompositionReport r;
  r.hopping_reflection = max_abs(SpMat(h.T_R - th.conjugate_op(h.T_L)));
  r.interaction_reflection = max_abs(SpMat(h.W_R - th.conjugate_op(h.W_L)));
  r.phonon_reflection = max_abs(SpMat(h.K_R - th.conjugate_op(h.K_L)));

  const SpMat T_LR = seam_hopping(par, full);
  const double al = par.lf_alpha();
  SpMat T_b(full.dim(), full.dim());
  for (int xi : {-1, -ell}) {
    const SpMat b = b_operator(xi, h.L);
    const SpReal IF = fermion_identity(ell);
    const SpMat up = embed(h.L, IF, phonon_product(h.L, {{h.L.pos(xi), phase_site(ph, al)}}));
    const SpMat down = embed(h.L, IF, phonon_product(h.L, {{h.L.pos(xi), phase_site(ph, -al)}}));
    const SpMat cre = up * SpMat(b.adjoint()), ann = down * b;
    T_b += tensor_lr(cre, h.L, th.conjugate_op(cre), h.R, full);
    T_b += tensor_lr(ann, h.L, th.conjugate_op(ann), h.R, full);
  }
  T_b *= -par.t;
  r.seam_hopping = max_abs(SpMat(T_LR - T_b));

  const SpMat W_LR = seam_interaction(par, full);
  SpMat W_b(full.dim(), full.dim());
  for (int i = -ell; i < 0; ++i)
    for (int j = -ell; j < 0; ++j) {
      const SpMat di = number_ops(i, h.L).dn.mat, dj = number_ops(j, h.L).dn.mat;
      W_b += (2.0 * w_of(par.interaction, i + j + 1)) * tensor_lr(di, h.L, th.conjugate_op(dj), h.R, full);
    }
  r.seam_interaction = max_abs(SpMat(W_LR - W_b));

  const SpMat Ht = build_transformed(par, full).mat;
  const SpMat IL = identity_on(h.L), IR = identity_on(h.R);
  const SpMat sum = tensor_lr(SpMat(h.T_L - h.W_L + h.K_L), h.L, IR, h.R, full) +
                    tensor_lr(IL, h.L, SpMat(h.T_R - h.W_R + h.K_R), h.R, full) + T_LR - W_LR;
  r.hamiltonian_split = max_abs(SpMat(Ht - sum));
  return r;
}

// ---------------------------------------------------------------------------
// Vectorization of the charge-balanced space into sector matrices

struct SectorMatrices {
  std::vector<int> q;    // sector labels, ascending
  std::vector<MatC> blocks;

  double frobenius_sq() const
  {
    double s = 0.0;
    for (const MatC& m : blocks) s += m.squaredNorm();
    return s;
  }
};

/// Ψ_ϑ on the charge-balanced basis: the coefficient of |X,n⟩ ⊗ ϑ|Y,m⟩ becomes entry ((X,n),(Y,m))
/// of block q = Q̂^{(L)}(X), rows and columns in the occupation basis of the left half.
class VectorizationMap {
public:
  VectorizationMap(int ell, const PhononBasisSpec& ph)
      : ell_(ell), sectors_(sector_decompose(ell)), balanced_(balanced_basis(ell, ph)), left_(left_basis(ell, ph))
  {
    if (ell % 2 == 0) throw std::invalid_argument("reflection routines require odd ell, got " + std::to_string(ell));
    const BSignTable t = b_sign_table(ell);
    std::map<std::uint32_t, std::uint32_t> unreflect; // right mask ↦ Y
    for (std::uint32_t Y = 0; Y < (1u << ell); ++Y) unreflect[t.reflected[Y]] = Y;
    const Index dL = left_.phonon_dim;
    std::map<int, std::map<std::uint32_t, Index>> label_pos;
    for (int q : sectors_.q_values) {
      const auto& labs = sectors_.left_labels.at(q);
      for (std::size_t k = 0; k < labs.size(); ++k) label_pos[q][labs[k]] = static_cast<Index>(k);
      block_dim_.push_back(static_cast<Index>(labs.size()) * dL);
    }
    entries_.resize(static_cast<std::size_t>(balanced_.dim()));
    for (Index s = 0; s < balanced_.n_configs(); ++s) {
      const std::uint32_t m = balanced_.configs[s];
      const std::uint32_t X = m >> ell, y = m & ((1u << ell) - 1u);
      const std::uint32_t Y = unreflect.at(y);
      const int q = charge_left(X, ell);
      const std::size_t qi = static_cast<std::size_t>(
          std::find(sectors_.q_values.begin(), sectors_.q_values.end(), q) - sectors_.q_values.begin());
      const Index rx = label_pos[q].at(X), cy = label_pos[q].at(Y);
      const double sg = t.s[Y] * t.theta_s[Y];
      for (Index pi = 0; pi < balanced_.phonon_dim; ++pi) {
        const Index nL = pi / dL, mR = pi % dL;
        auto dg = left_.digits(mR);
        std::reverse(dg.begin(), dg.end());
        const Index mY = left_.phonon_index_of(dg);
        entries_[static_cast<std::size_t>(balanced_.index_of(s, pi))] = {qi, rx * dL + nL, cy * dL + mY, sg};
      }
    }
  }

  const CompositeBasis& balanced() const { return balanced_; }
  const CompositeBasis& left() const { return left_; }
  const ChargeSectorTable& sectors() const { return sectors_; }

  SectorMatrices vectorize(const VecC& psi) const
  {
    if (psi.size() != balanced_.dim()) throw std::invalid_argument("vector is not on the charge-balanced space");
    SectorMatrices out;
    out.q = sectors_.q_values;
    for (Index d : block_dim_) out.blocks.push_back(MatC::Zero(d, d));
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Entry& e = entries_[i];
      out.blocks[e.block](e.row, e.col) = e.sign * psi(static_cast<Index>(i));
    }
    return out;
  }

  VecC devectorize(const SectorMatrices& M) const
  {
    if (M.blocks.size() != block_dim_.size()) throw std::invalid_argument("sector count mismatch");
    VecC psi(balanced_.dim());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Entry& e = entries_[i];
      psi(static_cast<Index>(i)) = e.sign * M.blocks[e.block](e.row, e.col);
    }
    return psi;
  }

  /// Rows of the left basis (flat index) belonging to block k, in block order.
  std::vector<Index> block_rows(std::size_t k) const
  {
    std::vector<Index> rows;
    for (std::uint32_t X : sectors_.left_labels.at(sectors_.q_values[k]))
      for (Index n = 0; n < left_.phonon_dim; ++n) rows.push_back(left_.index_of_mask(X, n));
    return rows;
  }

private:
  struct Entry {
    std::size_t block = 0;
    Index row = 0, col = 0;
    double sign = 1.0;
  };
  int ell_;
  ChargeSectorTable sectors_;
  CompositeBasis balanced_, left_;
  std::vector<Index> block_dim_;
  std::vector<Entry> entries_;
};

/// Restriction of a left-half operator commuting with Q̂^{(L)} to the blocks of the vectorization.
inline std::vector<MatC> sector_blocks(const SpMat& A, const VectorizationMap& vm)
{
  std::vector<MatC> out;
  const MatC D(A);
  for (std::size_t k = 0; k < vm.sectors().q_values.size(); ++k) {
    const std::vector<Index> rows = vm.block_rows(k);
    MatC B(rows.size(), rows.size());
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t c = 0; c < rows.size(); ++c) B(a, c) = D(rows[a], rows[c]);
    out.push_back(B);
  }
  return out;
}

} // namespace rpchain
