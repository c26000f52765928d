#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "rpchain/fock.hpp"
#include "rpchain/model.hpp"
#include "rpchain/operators.hpp"
#include "rpchain/spectral.hpp"
#include "rpchain/transforms.hpp"

namespace rpchain {

/// Max-abs defects of the operator algebra at one (ℓ, n_max).
struct AlgebraReport {
  double car = 0.0;             // {c_i, c*_j} − δ_ij and {c_i, c_j}
  double ccr_below_cutoff = 0.0; // [a, a*] − 1 on occupations < n_max
  double ccr_top = 0.0;          // the same at occupation n_max (truncation, reported only)
  double delta_n_square = 0.0;   // (δn̂_j)² − 1/4
  double number_commutator = 0.0; // ‖[H, N̂]‖ / ‖H‖
  double hermiticity = 0.0;      // H and H̃
  double constant_field = 0.0;   // H̃(c·1) − H̃
  double zero_field = 0.0;       // H̃(0) − H̃
  double seconds = 0.0;
  double max_defect() const
  {
    return std::max({car, ccr_below_cutoff, delta_n_square, number_commutator, hermiticity, constant_field, zero_field});
  }
};

inline AlgebraReport algebra_suite(const ModelParams& par)
{
  const auto t0 = std::chrono::steady_clock::now();
  AlgebraReport r;
  const PhononBasisSpec ph = PhononBasisSpec::fock(par.n_max, par.omega);
  const CompositeBasis full = full_basis(par.ell, ph);
  const int n = full.n_sites;
  SpMat I(full.dim(), full.dim());
  I.setIdentity();
  std::vector<SpMat> c;
  for (int j = -par.ell; j < par.ell; ++j) c.push_back(annihilator(j, full).mat);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const SpMat cdj = c[j].adjoint();
      SpMat ac = c[i] * cdj + cdj * c[i];
      if (i == j) ac -= I;
      r.car = std::max(r.car, max_abs(ac));
      r.car = std::max(r.car, max_abs(SpMat(c[i] * c[j] + c[j] * c[i])));
    }

  const PhononSiteOps s = phonon_site_ops(ph);
  const MatC comm = s.a * s.adag - s.adag * s.a - MatC::Identity(ph.d, ph.d);
  for (int k = 0; k < ph.d; ++k)
    for (int l = 0; l < ph.d; ++l) {
      const double v = std::abs(comm(k, l));
      if (k < par.n_max && l < par.n_max) r.ccr_below_cutoff = std::max(r.ccr_below_cutoff, v);
      else r.ccr_top = std::max(r.ccr_top, v);
    }

  for (int j = -par.ell; j < par.ell; ++j) {
    const SpMat dn = number_ops(j, full).dn.mat;
    r.delta_n_square = std::max(r.delta_n_square, max_abs(SpMat(dn * dn - 0.25 * I)));
  }

  const SpMat H = build_hamiltonian(par, full).mat;
  SpMat N(full.dim(), full.dim());
  for (int j = -par.ell; j < par.ell; ++j) N += number_ops(j, full).n.mat;
  const double hs = std::max(max_abs(H), 1.0);
  r.number_commutator = max_abs(SpMat(H * N - N * H)) / hs;
  r.hermiticity = max_abs(SpMat(H - SpMat(H.adjoint()))) / hs;

  const CompositeBasis bal = balanced_basis(par.ell, ph);
  const SpMat Ht = build_transformed(par, bal).mat;
  const double ts = std::max(max_abs(Ht), 1.0);
  r.hermiticity = std::max(r.hermiticity, max_abs(SpMat(Ht - SpMat(Ht.adjoint()))) / ts);
  r.zero_field = max_abs(SpMat(build_field_hamiltonian(par, std::vector<double>(n, 0.0), bal).mat - Ht)) / ts;
  for (double c0 : {0.37, -1.25})
    r.constant_field = std::max(
        r.constant_field, max_abs(SpMat(build_field_hamiltonian(par, std::vector<double>(n, c0), bal).mat - Ht)) / ts);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Max-abs defects of the hole-particle and reflection identities.
struct TransformReport {
  double hp_unitarity = 0.0;     // U*U − 1
  double hp_annihilator = 0.0;   // U c_j U* − (c*_j odd j, c_j even j)
  double hp_density = 0.0;       // U δn̂_j U* − (−1)^j δn̂_j
  double hp_vacuum = 0.0;        // U Ω − σ ∏_{j odd, ascending} c*_j Ω with σ = (−1)^{k(k−1)/2}, k = #odd sites
  double hp_vacuum_sign = 0.0;   // σ
  bool stated_prefactor_matches = false; // σ == (−1)^{(|Λ|+2)/4} (ℓ odd)
  double theta_vacuum = 0.0;     // ϑΩ_L − Ω_R
  double theta_b = 0.0;          // ϑ b_j ϑ^{-1} − (−1)^{r(j)} c_{r(j)}
  double theta_phonon = 0.0;     // ϑ a_j ϑ^{-1} − a_{r(j)}
  double tau_density = 0.0;      // τ δn̂_j τ^{-1} + δn̂_{r(j)}
  double tau_phonon = 0.0;       // τ a_j τ^{-1} − a_{r(j)}
  double vectorization_isometry = 0.0;
  double vectorization_roundtrip = 0.0;
  double vacuum_sector_psd = 0.0; // min eigenvalue of the vacuum image (should be ≥ 0, rank one)
  DecompositionReport decomposition;
  bool reflection_checked = false; // ℓ odd
  double max_defect() const
  {
    return std::max({hp_unitarity, hp_annihilator, hp_density, hp_vacuum, theta_vacuum, theta_b, theta_phonon,
                     tau_density, tau_phonon, vectorization_isometry, vectorization_roundtrip,
                     decomposition.max_defect()});
  }
};

inline TransformReport transform_suite(const ModelParams& par, std::uint64_t seed = 1)
{
  TransformReport r;
  const PhononBasisSpec ph = PhononBasisSpec::fock(par.n_max, par.omega);
  const CompositeBasis full = full_basis(par.ell, ph);
  const SpMat U = hole_particle(full).mat;
  const SpMat Ud = U.adjoint();
  SpMat I(full.dim(), full.dim());
  I.setIdentity();
  r.hp_unitarity = max_abs(SpMat(Ud * U - I));
  for (int j = -par.ell; j < par.ell; ++j) {
    const SpMat c = annihilator(j, full).mat;
    const SpMat target = (j % 2 != 0) ? SpMat(c.adjoint()) : c;
    r.hp_annihilator = std::max(r.hp_annihilator, max_abs(SpMat(U * c * Ud - target)));
    const SpMat dn = number_ops(j, full).dn.mat;
    const double sg = (j % 2 != 0) ? -1.0 : 1.0;
    r.hp_density = std::max(r.hp_density, max_abs(SpMat(U * dn * Ud - sg * dn)));
  }
  {
    // U = u_{o_1}⋯u_{o_k} in ascending order; each u picks up the parity of the fermions already created
    const int k = par.ell;
    r.hp_vacuum_sign = (k * (k - 1) / 2) % 2 ? -1.0 : 1.0;
    VecC omega = VecC::Zero(full.dim());
    omega(full.index_of_mask(0, 0)) = 1.0;
    VecC cdw = VecC::Zero(full.dim());
    cdw(full.index_of_mask(cdw_mask(par.ell), 0)) = r.hp_vacuum_sign; // JW basis vector = ascending c* product
    r.hp_vacuum = (U * omega - cdw).cwiseAbs().maxCoeff();
    if (par.ell % 2 == 1) r.stated_prefactor_matches = r.hp_vacuum_sign == (((par.ell + 1) / 2) % 2 ? -1.0 : 1.0);
  }
  if (par.ell % 2 == 0) return r;

  r.reflection_checked = true;
  const int ell = par.ell;
  const CompositeBasis L = left_basis(ell, ph), R = right_basis(ell, ph);
  const AntiunitaryRep theta = reflection_antiunitary(ell, ph);
  const AntiunitaryRep tu = tau(ell, ph);
  VecC oL = VecC::Zero(L.dim()), oR = VecC::Zero(R.dim());
  oL(L.index_of_mask(0, 0)) = 1.0;
  oR(R.index_of_mask(0, 0)) = 1.0;
  r.theta_vacuum = (theta.apply(oL) - oR).cwiseAbs().maxCoeff();
  for (int j = -ell; j < 0; ++j) {
    const int rj = -1 - j;
    const double sg = (rj % 2 != 0) ? -1.0 : 1.0;
    const SpMat cr = annihilator(rj, R).mat;
    r.theta_b = std::max(r.theta_b, max_abs(SpMat(theta.conjugate_op(b_operator(j, L)) - sg * cr)));
    const SpMat aL = boson_ops(j, L).a.mat, aR = boson_ops(rj, R).a.mat;
    r.theta_phonon = std::max(r.theta_phonon, max_abs(SpMat(theta.conjugate_op(aL) - aR)));
    r.tau_phonon = std::max(r.tau_phonon, max_abs(SpMat(tu.conjugate_op(aL) - aR)));
    const SpMat dL = number_ops(j, L).dn.mat, dR = number_ops(rj, R).dn.mat;
    r.tau_density = std::max(r.tau_density, max_abs(SpMat(tu.conjugate_op(dL) + dR)));
  }

  const VectorizationMap vm(ell, ph);
  VecC psi = random_vector(vm.balanced().dim(), seed, 0);
  const SectorMatrices M = vm.vectorize(psi);
  r.vectorization_isometry = std::abs(M.frobenius_sq() - psi.squaredNorm()) / psi.squaredNorm();
  r.vectorization_roundtrip = (vm.devectorize(M) - psi).cwiseAbs().maxCoeff();
  VecC vac = VecC::Zero(vm.balanced().dim());
  vac(vm.balanced().index_of_mask(0, 0)) = 1.0;
  const SectorMatrices V = vm.vectorize(vac);
  r.vacuum_sector_psd = std::numeric_limits<double>::infinity();
  for (const MatC& b : V.blocks)
    if (b.size()) r.vacuum_sector_psd = std::min(r.vacuum_sector_psd, dense_eigh(b, false).values(0));
  r.decomposition = decomposition_report(par, ph);
  return r;
}

/// Polaron-transform convergence over a sequence of cutoffs at fixed physical parameters.
struct LangFirsovSequence {
  std::vector<int> n_max;
  std::vector<LangFirsovReport> reports;
  bool gap_monotone = false;      // each step reduces the lowest-eigenvalue gap
  bool boson_monotone = false;    // each step reduces the probe boson defect
  double final_gap = 0.0;
};

inline LangFirsovSequence lang_firsov_sequence(ModelParams par, const std::vector<int>& cutoffs)
{
  LangFirsovSequence s;
  s.n_max = cutoffs;
  for (int n : cutoffs) {
    par.n_max = n;
    s.reports.push_back(lang_firsov_report(par));
  }
  s.gap_monotone = s.boson_monotone = true;
  for (std::size_t k = 1; k < s.reports.size(); ++k) {
    s.gap_monotone = s.gap_monotone && s.reports[k].spectral_gap < s.reports[k - 1].spectral_gap;
    s.boson_monotone = s.boson_monotone && s.reports[k].boson_defect < s.reports[k - 1].boson_defect;
  }
  if (!s.reports.empty()) s.final_gap = s.reports.back().spectral_gap;
  return s;
}

/// Checks of the ordered product integral on small random matrix paths.
struct ProductIntegralReport {
  double constant_defect = 0.0;   // max over partitions of ‖∏e^{A ds} − e^{aA}‖ for constant A
  double nilpotent_defect = 0.0;  // A(s) = sN against e^{(Σ s_k Δs) N} = e^{(a²/2)(1 + 1/n) N}
  int paths = 0;
  int bound_holds = 0;            // paths with ‖P − 1 − ΣA ds‖ ≤ e^{Σ‖A‖ds} − 1 − Σ‖A‖ds
  double min_slack = 0.0;         // smallest (right side − left side) over the paths
  std::vector<int> cells;         // mesh sizes of the convergence fit
  std::vector<double> errors;     // distance to the finest reference product
  double order = 0.0;             // fitted log-log slope of error against mesh width
};

namespace detail {

inline double op_norm(const MatC& A) { return Eigen::JacobiSVD<MatC>(A).singularValues()(0); }

inline MatC random_matrix(Index n, std::uint64_t seed, std::uint64_t stream)
{
  const VecC v = random_vector(n * n, seed, stream);
  return Eigen::Map<const MatC>(v.data(), n, n);
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace detail

inline ProductIntegralReport product_integral_suite(std::uint64_t seed, int n_paths = 50)
{
  ProductIntegralReport r;
  const Index d = 4;
  const double a = 1.0;

  const MatC A = 0.5 * detail::random_matrix(d, seed, 0);
  const MatC eA = (a * A).exp();
  for (int n : {1, 3, 17}) {
    r.constant_defect = std::max(r.constant_defect, max_abs_dense(product_integral([&](double) { return A; }, a, n) - eA));
  }
  {
    std::vector<double> part{0.0, 0.05, 0.3, 0.31, 0.7, 1.0};
    std::vector<MatC> samples(part.size() - 1, A);
    r.constant_defect = std::max(r.constant_defect, max_abs_dense(product_integral(samples, part) - eA));
  }

  MatC N = MatC::Zero(d, d);
  N(0, 1) = 1.0;
  N(1, 2) = 2.0;
  N(2, 3) = -1.5;
  for (int n : {1, 8, 64}) {
    const MatC closed = (0.5 * a * a * (1.0 + 1.0 / n) * N).exp();
    r.nilpotent_defect =
        std::max(r.nilpotent_defect, max_abs_dense(product_integral([&](double s) { return MatC(s * N); }, a, n) - closed));
  }

  auto path = [&](std::uint64_t k) {
    const MatC A0 = 0.5 * detail::random_matrix(d, seed, 3 * k + 10), A1 = 0.5 * detail::random_matrix(d, seed, 3 * k + 11),
               A2 = 0.5 * detail::random_matrix(d, seed, 3 * k + 12);
    return [A0, A1, A2](double s) { return MatC(A0 + std::sin(3.0 * s) * A1 + s * s * A2); };
  };

  r.paths = n_paths;
  r.min_slack = std::numeric_limits<double>::infinity();
  const int cells = 64;
  for (int k = 0; k < n_paths; ++k) {
    const auto f = path(static_cast<std::uint64_t>(k));
    const MatC P = product_integral(f, a, cells);
    MatC integral = MatC::Zero(d, d);
    double S = 0.0;
    for (int c = 1; c <= cells; ++c) {
      const MatC Ak = f(a * c / cells);
      integral += Ak * (a / cells);
      S += detail::op_norm(Ak) * (a / cells);
    }
    const double lhs = detail::op_norm(P - MatC::Identity(d, d) - integral);
    const double rhs = std::exp(S) - 1.0 - S;
    const double slack = rhs - lhs;
    r.min_slack = std::min(r.min_slack, slack);
    if (slack >= -1e-12 * std::max(1.0, rhs)) ++r.bound_holds;
  }

  const auto f = path(1000);
  const MatC ref = product_integral(f, a, 16384);
  std::vector<double> widths;
  for (int n : {16, 32, 64, 128, 256}) {
    r.cells.push_back(n);
    r.errors.push_back(detail::op_norm(product_integral(f, a, n) - ref));
    widths.push_back(a / n);
  }
  r.order = detail::loglog_slope(widths, r.errors);
  return r;
}

} // namespace rpchain
