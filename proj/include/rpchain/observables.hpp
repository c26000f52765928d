#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rpchain/fock.hpp"
#include "rpchain/model.hpp"
#include "rpchain/operators.hpp"
#include "rpchain/spectral.hpp"

namespace rpchain {

// ---------------------------------------------------------------------------
// Density correlations (all fermion-diagonal)

/// ⟨ψ, δn̂_i δn̂_j ψ⟩ for normalized ψ.
inline double correlator(const VecC& psi, const CompositeBasis& b, int i, int j)
{
  const VecR d = delta_n_diag(i, b).cwiseProduct(delta_n_diag(j, b));
  return (psi.cwiseAbs2().cwiseProduct(d)).sum();
}

inline double staggered_correlator(const VecC& psi, const CompositeBasis& b, int i, int j)
{
  return ((i - j) % 2 == 0 ? 1.0 : -1.0) * correlator(psi, b, i, j);
}

inline double density(const VecC& psi, const CompositeBasis& b, int j)
{
  return psi.cwiseAbs2().cwiseProduct(delta_n_diag(j, b)).sum();
}

/// (−1)^m ⟨δn̂_{i_m}⋯δn̂_{i_1} δn̂_{r(i_1)}⋯δn̂_{r(i_m)}⟩, i_k ∈ Λ_L.
inline double cdw_string(const VecC& psi, const CompositeBasis& b, const std::vector<int>& sites)
{
  const SpMat S = delta_n_string(sites, b).mat;
  const double sign = sites.size() % 2 ? -1.0 : 1.0;
  return sign * psi.dot(S * psi).real();
}

struct StringValue {
  std::vector<int> sites;
  double value = 0.0;
};

/// Every string of distinct left sites with 0 ≤ m ≤ m_max.
inline std::vector<StringValue> all_cdw_strings(const VecC& psi, const CompositeBasis& b, int m_max)
{
  const int ell = b.n_sites / 2;
  std::vector<StringValue> out;
  for (std::uint32_t sub = 0; sub < (1u << ell); ++sub) {
    if (std::popcount(sub) > m_max) continue;
    std::vector<int> sites;
    for (int p = 0; p < ell; ++p)
      if (sub & (1u << p)) sites.push_back(p - ell);
    out.push_back({sites, cdw_string(psi, b, sites)});
  }
  return out;
}

struct StructureFactor {
  std::vector<double> momenta;  // p = πm/ℓ
  std::vector<double> values;   // Ĝ(p) = Σ_j e^{−ipj} G(j)
  std::vector<double> G;        // G(j) = ⟨δn̂_j δn̂_0⟩ for j = −ℓ..ℓ−1
  double parseval_defect = 0.0; // |(2ℓ)^{-1} Σ_p Ĝ(p) − G(0)|
};

inline StructureFactor structure_factor(const VecC& psi, const CompositeBasis& b)
{
  const int ell = b.n_sites / 2, n = b.n_sites;
  StructureFactor s;
  for (int j = -ell; j < ell; ++j) s.G.push_back(correlator(psi, b, j, 0));
  double sum = 0.0;
  for (int m = 0; m < n; ++m) {
    const double p = M_PI * m / ell;
    cplx v = 0.0;
    for (int j = -ell; j < ell; ++j) v += std::exp(cplx(0.0, -p * j)) * s.G[j + ell];
    s.momenta.push_back(p);
    s.values.push_back(v.real());
    sum += v.real();
  }
  s.parseval_defect = std::abs(sum / n - s.G[ell]);
  return s;
}

// ---------------------------------------------------------------------------
// Field vectors over Λ, indexed by position p = j + ℓ

using FieldVector = std::vector<cplx>;

/// ⟨h|h′⟩_W = Σ_{i≠j} W(i−j)(h*_i − h*_j)(h′_i − h′_j).
inline cplx w_inner(const FieldVector& h, const FieldVector& hp, const InteractionSpec& spec)
{
  const int n = static_cast<int>(h.size());
  cplx s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) s += w_of(spec, i - j) * std::conj(h[i] - h[j]) * (hp[i] - hp[j]);
  return s;
}

/// (Rh)_j = 2 d_j h_j − 2 Σ_{i≠j} W(i−j) h_i with d_j = Σ_{i≠j} W(i−j), so ⟨h|Rh⟩ = ⟨h|h⟩_W.
inline FieldVector r_apply(const InteractionSpec& spec, const FieldVector& h)
{
  const int n = static_cast<int>(h.size());
  FieldVector out(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double d = 0.0;
    cplx s = 0.0;
    for (int i = 0; i < n; ++i)
      if (i != j) {
        d += w_of(spec, i - j);
        s += w_of(spec, i - j) * h[i];
      }
    out[j] = 2.0 * d * h[j] - 2.0 * s;
  }
  return out;
}

inline MatR r_matrix(const InteractionSpec& spec, int n)
{
  MatR R(n, n);
  for (int k = 0; k < n; ++k) {
    FieldVector e(n, 0.0);
    e[k] = 1.0;
    const FieldVector c = r_apply(spec, e);
    for (int j = 0; j < n; ++j) R(j, k) = c[j].real();
  }
  return R;
}

/// Σ_j |h_j − h_{j+1}|² with h_ℓ = h_{−ℓ}.
inline double laplacian_form(const FieldVector& h)
{
  const int n = static_cast<int>(h.size());
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += std::norm(h[j] - h[(j + 1) % n]);
  return s;
}

/// (τ̂h)_j = (−1)^j h_j.
inline FieldVector stagger(const FieldVector& h)
{
  const int n = static_cast<int>(h.size()), ell = n / 2;
  FieldVector out(h);
  for (int p = 0; p < n; ++p)
    if ((p - ell) % 2 != 0) out[p] = -out[p];
  return out;
}

/// ⟨δn̂|h⟩_W = Σ_j δn̂_j (Rh)_j as a diagonal over the basis.
inline VecC density_pairing(const InteractionSpec& spec, const FieldVector& h, const CompositeBasis& b)
{
  const FieldVector Rh = r_apply(spec, h);
  VecC d = VecC::Zero(b.dim());
  for (int p = 0; p < b.n_sites; ++p) d += Rh[p] * delta_n_diag(p + b.first_site, b).cast<cplx>();
  return d;
}

// ---------------------------------------------------------------------------
// Inequalities on the transformed Hamiltonian

struct InequalityOptions {
  EigenMethod method = EigenMethod::automatic;
  double residual_flag = 1e-6; // ground-space residual above which a verdict is unreliable
};

/// Ground state of H̃ with a degeneracy guard.
struct GroundData {
  double E0 = 0.0, gap = 0.0, norm = 0.0;
  VecC psi;
  bool degenerate = false;
};

inline GroundData transformed_ground(const ModelParams& par, const CompositeBasis& b, const InequalityOptions& opt = {})
{
  const SpMat H = build_transformed(par, b).mat;
  const EigenResult r = ground_state(H, opt.method);
  GroundData g{r.E0, r.gap, norm_bound(H), r.psi};
  g.degenerate = r.gap <= par.gap_tol * std::max(1.0, g.norm);
  return g;
}

struct MonotonicityResult {
  double E0 = 0.0, Eh = 0.0;
  bool holds = false;
};

/// E(0) ≤ E(h) for real h.
inline MonotonicityResult energy_monotonicity(const ModelParams& par, const std::vector<double>& h,
                                              const CompositeBasis& b, double E0, const InequalityOptions& opt = {})
{
  const SpMat Hh = build_field_hamiltonian(par, h, b).mat;
  const EigenResult r = ground_state(Hh, opt.method);
  MonotonicityResult m{E0, r.E0};
  m.holds = E0 <= r.E0 + 1e-9 * std::max(1.0, norm_bound(Hh));
  return m;
}

struct SusceptibilityResult {
  double lhs = 0.0, rhs = 0.0;
  double lhs_real_part = 0.0, lhs_imag_part = 0.0; // contributions of Re h and Im h
  double cross_term = 0.0;                          // lhs − the two contributions
  double ground_residual = 0.0;                     // ‖P_0⟨δn̂|h⟩_W ψ_0‖
  bool holds = false;
  bool reliable = true;
};

namespace detail {

inline double resolvent_form(const SpMat& H, const GroundData& g, const VecC& Apsi)
{
  const MatVec mv = as_matvec(H);
  const ResolventResult rr = pinv_resolvent(mv, g.E0, {g.psi}, Apsi, g.gap);
  return Apsi.dot(rr.x).real();
}

} // namespace detail

/// ⟨⟨A*(H̃ − E)^+ A⟩⟩ ≤ ⟨h|h⟩_W with A = ⟨δn̂|h⟩_W.
inline SusceptibilityResult susceptibility_bound(const ModelParams& par, const FieldVector& h, const CompositeBasis& b,
                                                 const GroundData& g, const InequalityOptions& opt = {})
{
  const SpMat H = build_transformed(par, b).mat;
  SusceptibilityResult s;
  const VecC Apsi = density_pairing(par.interaction, h, b).cwiseProduct(g.psi);
  s.ground_residual = std::abs(g.psi.dot(Apsi));
  s.reliable = s.ground_residual <= opt.residual_flag;
  s.lhs = detail::resolvent_form(H, g, Apsi);
  FieldVector hr(h.size()), hi(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    hr[k] = h[k].real();
    hi[k] = h[k].imag();
  }
  s.lhs_real_part = detail::resolvent_form(H, g, density_pairing(par.interaction, hr, b).cwiseProduct(g.psi));
  s.lhs_imag_part = detail::resolvent_form(H, g, density_pairing(par.interaction, hi, b).cwiseProduct(g.psi));
  s.cross_term = s.lhs - s.lhs_real_part - s.lhs_imag_part;
  s.rhs = w_inner(h, h, par.interaction).real();
  s.holds = s.lhs <= s.rhs + 1e-9 * std::max(1.0, std::abs(s.rhs));
  return s;
}

struct InfraredResult {
  double lhs_sq = 0.0, rhs = 0.0;
  double ground_residual = 0.0;
  bool holds = false;
  bool reliable = true;
};

/// (⟨⟨A*A⟩⟩)² ≤ (t/2)⟨h|h⟩_W Σ_j |g_j − g_{j+1}|², g = τ̂Rh, A = ⟨δn̂|h⟩_W.
inline InfraredResult infrared_bound(const ModelParams& par, const FieldVector& h, const CompositeBasis& b,
                                     const GroundData& g, const InequalityOptions& opt = {})
{
  InfraredResult r;
  const VecC Apsi = density_pairing(par.interaction, h, b).cwiseProduct(g.psi);
  r.ground_residual = std::abs(g.psi.dot(Apsi));
  r.reliable = r.ground_residual <= opt.residual_flag;
  const double aa = Apsi.squaredNorm();
  r.lhs_sq = aa * aa;
  r.rhs = 0.5 * par.t * w_inner(h, h, par.interaction).real() * laplacian_form(stagger(r_apply(par.interaction, h)));
  r.holds = r.lhs_sq <= r.rhs * (1.0 + 1e-8) + 1e-12;
  return r;
}

} // namespace rpchain
