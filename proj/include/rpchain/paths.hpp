#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "rpchain/fock.hpp"
#include "rpchain/model.hpp"
#include "rpchain/operators.hpp"
#include "rpchain/spectral.hpp"
#include "rpchain/transforms.hpp"

namespace rpchain {

// ---------------------------------------------------------------------------
// Clusters and moves on the left half-chain

/// Maximal runs of consecutive occupied sites of a left-half configuration, left to right.
inline std::vector<std::vector<int>> cluster_decompose(std::uint32_t left_mask, int ell)
{
  std::vector<std::vector<int>> out;
  for (int p = 0; p < ell; ++p) {
    if (!bit_at(left_mask, ell, p)) continue;
    const int site = p - ell;
    if (!out.empty() && out.back().back() == site - 1)
      out.back().push_back(site);
    else
      out.push_back({site});
  }
  return out;
}

enum class MoveKind { pair_create, pair_annihilate, seam_create, seam_annihilate };

inline std::string to_string(MoveKind k)
{
  switch (k) {
    case MoveKind::pair_create: return "pair_create";
    case MoveKind::pair_annihilate: return "pair_annihilate";
    case MoveKind::seam_create: return "seam_create";
    case MoveKind::seam_annihilate: return "seam_annihilate";
  }
  return "?";
}

struct Move {
  MoveKind kind = MoveKind::pair_annihilate;
  int site = 0; // left member j of the pair {j, j+1}, or the seam site ξ
};

/// configs[0] is the start; configs[k+1] follows from configs[k] by moves[k].
struct ConfigPath {
  int ell = 1;
  std::vector<std::uint32_t> configs;
  std::vector<Move> moves;

  std::size_t length() const { return moves.size(); }
};

namespace detail {

inline void push_move(ConfigPath& path, MoveKind kind, int site)
{
  const int ell = path.ell;
  std::uint32_t m = path.configs.back();
  auto flip = [&](int s) { m ^= bit_of(ell, s + ell); };
  if (kind == MoveKind::pair_create || kind == MoveKind::pair_annihilate) {
    flip(site);
    flip(site + 1);
  } else {
    flip(site);
  }
  path.moves.push_back({kind, site});
  path.configs.push_back(m);
}

} // namespace detail

/// Move sequence from a left-half configuration to ∅. Clusters are handled right to left.
/// Pairs are removed from the left of each cluster; an odd cluster leaves a survivor s, which is
/// joined to the seam site −1: for even s, B*_{−1} then pair creations on s+1..−2 and pair removals
/// from s; for odd s, pair creations on s+1..−1, pair removals from s, and a terminal B_{−1}.
/// Empty creation ranges are skipped.
inline ConfigPath connect_to_vacuum(std::uint32_t left_mask, int ell)
{
  if (ell % 2 == 0) throw std::invalid_argument("reflection routines require odd ell, got " + std::to_string(ell));
  if (left_mask >= (1u << ell)) throw std::invalid_argument("configuration outside the left half");
  ConfigPath path{ell, {left_mask}, {}};
  auto clusters = cluster_decompose(left_mask, ell);
  for (auto it = clusters.rbegin(); it != clusters.rend(); ++it) {
    const std::vector<int>& c = *it;
    const int a = c.front(), b = c.back();
    int j = a;
    for (; j + 1 <= b; j += 2) detail::push_move(path, MoveKind::pair_annihilate, j);
    if (j != b) continue; // even cluster fully removed
    const int s = b;
    if (s % 2 == 0) {
      detail::push_move(path, MoveKind::seam_create, -1);
      for (int k = s + 1; k + 1 <= -2; k += 2) detail::push_move(path, MoveKind::pair_create, k);
      for (int k = s; k + 1 <= -1; k += 2) detail::push_move(path, MoveKind::pair_annihilate, k);
    } else {
      for (int k = s + 1; k + 1 <= -1; k += 2) detail::push_move(path, MoveKind::pair_create, k);
      for (int k = s; k + 1 <= -2; k += 2) detail::push_move(path, MoveKind::pair_annihilate, k);
      detail::push_move(path, MoveKind::seam_annihilate, -1);
    }
  }
  return path;
}

struct PathCheck {
  bool valid = false;
  std::string message;
};

/// Independent legality check: each step is an adjacent pair added to / removed from Λ_L, or a single
/// site added / removed at a seam site ξ ∈ {−1, −ℓ}, matching its annotation; the path ends at ∅.
inline PathCheck check_path(const ConfigPath& path)
{
  const int ell = path.ell;
  const std::uint32_t full = (1u << ell) - 1u;
  if (path.configs.size() != path.moves.size() + 1) return {false, "configs and moves have inconsistent lengths"};
  for (std::uint32_t m : path.configs)
    if (m & ~full) return {false, "configuration outside the left half"};
  for (std::size_t k = 0; k < path.moves.size(); ++k) {
    const std::uint32_t a = path.configs[k], b = path.configs[k + 1], diff = a ^ b;
    const Move& mv = path.moves[k];
    const std::string at = "step " + std::to_string(k) + ": ";
    if (mv.kind == MoveKind::pair_create || mv.kind == MoveKind::pair_annihilate) {
      if (mv.site < -ell || mv.site + 1 > -1) return {false, at + "pair outside the left half"};
      const std::uint32_t pair = bit_of(ell, mv.site + ell) | bit_of(ell, mv.site + 1 + ell);
      if (diff != pair) return {false, at + "configuration change does not match the pair"};
      const bool create = mv.kind == MoveKind::pair_create;
      if (create && (a & pair)) return {false, at + "creating on an occupied site"};
      if (!create && (a & pair) != pair) return {false, at + "removing from an empty site"};
    } else {
      if (mv.site != -1 && mv.site != -ell) return {false, at + "seam move away from the seam sites"};
      const std::uint32_t bit = bit_of(ell, mv.site + ell);
      if (diff != bit) return {false, at + "configuration change does not match the seam site"};
      const bool create = mv.kind == MoveKind::seam_create;
      if (create == bool(a & bit)) return {false, at + "seam move inconsistent with occupation"};
    }
  }
  if (path.configs.back() != 0) return {false, "path does not end at the empty configuration"};
  return {true, "ok"};
}

// ---------------------------------------------------------------------------
// Amplitudes on F_{Λ_L}

/// Precomputed half-chain data for path amplitudes.
class PathContext {
public:
  PathContext(const ModelParams& par, const PhononBasisSpec& ph)
      : par_(par), terms_(half_chain_terms(par, ph)), K_(MatC(terms_.K)), sg_(K_)
  {
    par.require_odd();
    const CompositeBasis& L = terms_.L;
    const double al = par.lf_alpha();
    const SpReal IF = fermion_identity(L.n_sites);
    for (int xi : {-1, -par.ell}) {
      const SpMat b = b_operator(xi, L);
      const SpMat up = embed(L, IF, phonon_product(L, {{L.pos(xi), phase_site(ph, al)}}));
      const SpMat down = embed(L, IF, phonon_product(L, {{L.pos(xi), phase_site(ph, -al)}}));
      seam_ann_[xi] = MatC(down * b);                // B_ξ = e^{−iαφ_ξ} b_ξ
      seam_cre_[xi] = MatC(SpMat(b.adjoint()) * up); // B*_ξ = b*_ξ e^{iαφ_ξ}
    }
  }

  const CompositeBasis& basis() const { return terms_.L; }
  const MatC& kernel() const { return K_; }
  const ModelParams& params() const { return par_; }

  /// e_X ⊗ F as a vector on F_{Λ_L}; F defaults to the phonon vacuum.
  VecC state(std::uint32_t X, const VecC& F = {}) const
  {
    const CompositeBasis& L = terms_.L;
    VecC v = VecC::Zero(L.dim());
    const Index s = L.slot.at(X);
    if (F.size() == 0)
      v(L.index_of(s, 0)) = 1.0;
    else
      v.segment(s * L.phonon_dim, L.phonon_dim) = F;
    return v;
  }

  /// E_X v: keep the components with fermion configuration X.
  VecC project(std::uint32_t X, const VecC& v) const
  {
    const CompositeBasis& L = terms_.L;
    VecC out = VecC::Zero(v.size());
    const Index s = L.slot.at(X);
    out.segment(s * L.phonon_dim, L.phonon_dim) = v.segment(s * L.phonon_dim, L.phonon_dim);
    return out;
  }

  VecC evolve(double tau, const VecC& v) const { return sg_.apply(tau, v); }

  /// τt ∫_0^1 e^{−sτ𝕂} B^♯ e^{−(1−s)τ𝕂} ds v by 10-point Gauss–Legendre.
  VecC seam_step(const Move& mv, double tau, const VecC& v) const
  {
    const MatC& B = mv.kind == MoveKind::seam_create ? seam_cre_.at(mv.site) : seam_ann_.at(mv.site);
    using GL = boost::math::quadrature::gauss<double, 10>;
    VecC acc = VecC::Zero(v.size());
    auto add = [&](double s, double w) { acc += w * evolve(s * tau, B * evolve((1.0 - s) * tau, v)); };
    const auto& x = GL::abscissa();
    const auto& w = GL::weights();
    for (std::size_t i = 0; i < x.size(); ++i) {
      add(0.5 + 0.5 * x[i], 0.5 * w[i]);
      if (x[i] != 0.0) add(0.5 - 0.5 * x[i], 0.5 * w[i]);
    }
    return (tau * par_.t) * acc;
  }

  /// C_τ applied along the path, starting from `in`; the result lies in E_{end} F_{Λ_L}.
  VecC propagate(const ConfigPath& path, double tau, const VecC& in) const
  {
    VecC v = project(path.configs.front(), in);
    for (std::size_t k = 0; k < path.moves.size(); ++k) {
      const Move& mv = path.moves[k];
      const bool seam = mv.kind == MoveKind::seam_create || mv.kind == MoveKind::seam_annihilate;
      v = project(path.configs[k + 1], seam ? seam_step(mv, tau, v) : evolve(tau, v));
    }
    return v;
  }

private:
  ModelParams par_;
  HalfChainTerms terms_;
  MatC K_;
  DenseSemigroup sg_;
  std::map<int, MatC> seam_ann_, seam_cre_;
};

struct AmplitudeValue {
  cplx value = 0.0;
  bool underflow = false; // |value| < 1e-300 while nonzero in exact arithmetic is suspected
};

/// ⟨out_config ⊗ F_out | C_τ(path) | start ⊗ F_in⟩; out_config defaults to the path end.
inline AmplitudeValue path_amplitude(const PathContext& ctx, const ConfigPath& path, double tau, const VecC& F_in = {},
                                     const VecC& F_out = {}, std::int64_t out_config = -1)
{
  const std::uint32_t out = out_config < 0 ? path.configs.back() : static_cast<std::uint32_t>(out_config);
  const VecC v = ctx.propagate(path, tau, ctx.state(path.configs.front(), F_in));
  AmplitudeValue a;
  a.value = ctx.state(out, F_out).dot(v);
  a.underflow = std::abs(a.value) < 1e-300 && v.norm() > 0.0;
  return a;
}

struct SlopeFit {
  double slope = 0.0;
  int moves = 0;
  double sign = 0.0; // sign of the real part at the smallest τ (0 when the amplitude is not real)
  std::vector<double> taus, magnitudes;
  bool matches(double tol = 0.1) const { return std::abs(slope - moves) <= tol; }
};

/// Least-squares slope of log|amplitude| against log τ.
inline SlopeFit leading_order_fit(const PathContext& ctx, const ConfigPath& path, const std::vector<double>& taus)
{
  SlopeFit f;
  f.moves = static_cast<int>(path.length());
  f.taus = taus;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  cplx last = 0.0;
  for (double t : taus) {
    const cplx a = path_amplitude(ctx, path, t).value;
    f.magnitudes.push_back(std::abs(a));
    const double x = std::log(t), y = std::log(std::max(std::abs(a), 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    last = a;
  }
  const double m = static_cast<double>(taus.size());
  f.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  if (std::abs(last.imag()) <= 1e-8 * std::abs(last)) f.sign = last.real() > 0 ? 1.0 : (last.real() < 0 ? -1.0 : 0.0);
  return f;
}

/// Left part of the charge-balanced image of a half-filled configuration.
inline std::uint32_t tilde_left(std::uint32_t half_mask, int ell)
{
  const int n = 2 * ell;
  std::uint32_t m = half_mask;
  for (int p = 0; p < n; ++p)
    if ((p - ell) % 2 != 0) m ^= bit_of(n, p);
  return m >> ell;
}

struct KeyAmplitude {
  std::uint32_t x = 0, y = 0; // half-filled configurations
  double magnitude = 0.0;
  double relative = 0.0; // magnitude / (‖v_Y‖ ‖e^{−ε𝕂}v_X‖), so roundoff sits near 1e-16
  double tau = 0.0, eps = 0.0;
};

/// ⟨v_Y | e^{−ε𝕂} | v_X⟩ with v_X the path-propagated state of the left part of X's image;
/// the largest magnitude over the (τ, ε) grid is kept for every pair.
inline std::vector<KeyAmplitude> composed_amplitudes(const PathContext& ctx, const std::vector<double>& taus,
                                                     const std::vector<double>& epsilons)
{
  const int ell = ctx.params().ell;
  const auto configs = enumerate_half_filled(ell);
  std::map<std::uint32_t, std::vector<VecC>> prop; // left part ↦ propagated vector per τ
  for (const auto& c : configs) {
    const std::uint32_t X = tilde_left(c.mask, ell);
    if (prop.count(X)) continue;
    const ConfigPath p = connect_to_vacuum(X, ell);
    for (double t : taus) prop[X].push_back(ctx.propagate(p, t, ctx.state(X)));
  }
  std::vector<KeyAmplitude> out;
  for (const auto& a : configs)
    for (const auto& b : configs) {
      KeyAmplitude k{a.mask, b.mask};
      const auto& va = prop.at(tilde_left(a.mask, ell));
      const auto& vb = prop.at(tilde_left(b.mask, ell));
      for (std::size_t i = 0; i < taus.size(); ++i)
        for (double e : epsilons) {
          const VecC ev = ctx.evolve(e, va[i]);
          const double m = std::abs(vb[i].dot(ev));
          const double rel = m / std::max(vb[i].norm() * ev.norm(), 1e-300);
          if (rel > k.relative) {
            k.relative = rel;
            k.magnitude = m;
            k.tau = taus[i];
            k.eps = e;
          }
        }
      out.push_back(k);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Dyson expansion of e^{−βH̃_0}

/// Dense data on the charge-balanced basis: G = L(𝕂) + R(𝕂) + 𝕋_LR = H̃ + 𝕎_LR,
/// P = P_0 + P_1 and the per-site projectors P_{ε,i}.
class DysonContext {
public:
  DysonContext(const ModelParams& par, const PhononBasisSpec& ph)
      : par_(par), vm_(par.ell, ph)
  {
    par.require_odd();
    const CompositeBasis& b = vm_.balanced();
    const SpMat Ht = build_transformed(par, b).mat;
    const SpMat WLR = seam_interaction(par, b);
    G_ = MatC(Ht + WLR);
    Ht_ = MatC(Ht);
    const ConditionB cb = check_condition_B(par.interaction, par.ell, true, par.tol_psd, par.tol_strict);
    w0_ = cb.min_eig;
    const int n = b.n_sites, ell = par.ell;
    for (int eps = 0; eps < 2; ++eps)
      for (int i = -ell; i < 0; ++i) {
        const int pi = b.pos(i), pr = b.pos(-1 - i);
        proj_[eps].push_back(basis_diagonal(b, [&](std::uint32_t m) {
          const bool a = bit_at(m, n, pi), c = bit_at(m, n, pr);
          return (eps == 1 ? (a && c) : (!a && !c)) ? 1.0 : 0.0;
        }));
      }
    P_ = VecR::Zero(b.dim());
    for (int eps = 0; eps < 2; ++eps)
      for (const VecR& d : proj_[eps]) P_ += d;
    sg_ = std::make_unique<DenseSemigroup>(G_);
  }

  const VectorizationMap& vectorization() const { return vm_; }
  const MatC& G() const { return G_; }
  const MatC& transformed() const { return Ht_; }
  const VecR& P() const { return P_; }
  double w0() const { return w0_; }
  /// H̃_0 = G − (w0/2)P + w0|Λ|/8, so e^{−βH̃_0} = e^{−β·shift} Σ_n D_n.
  double reference_shift() const { return w0_ * par_.sites() / 8.0; }
  /// H̃_0 as a dense matrix.
  MatC reference_hamiltonian() const
  {
    MatC H = G_ - (w0_ / 2.0) * MatC(P_.cast<cplx>().asDiagonal());
    H.diagonal().array() += reference_shift();
    return H;
  }
  const DenseSemigroup& semigroup() const { return *sg_; }

  /// e^{−s_1G} D_1 e^{−(s_2−s_1)G} D_2 ⋯ D_n e^{−(β−s_n)G} for nondecreasing s and diagonal D_k.
  MatC ordered_product(const std::vector<double>& s, const std::vector<VecR>& D, double beta) const
  {
    MatC M = sg_->matrix(s.empty() ? beta : s.front());
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double next = k + 1 < s.size() ? s[k + 1] : beta;
      if (next < s[k]) throw std::invalid_argument("times must be nondecreasing and at most beta");
      M = M * D[k].cast<cplx>().asDiagonal();
      M = M * sg_->matrix(next - s[k]);
    }
    return M;
  }

  /// P(s_1)⋯P(s_n) e^{−βG}.
  MatC integrand(const std::vector<double>& s, double beta) const
  {
    return ordered_product(s, std::vector<VecR>(s.size(), P_), beta);
  }

  /// ℙ_X(s) e^{−βG}, one time per left site (in site order).
  MatC path_projector(std::uint32_t X, const std::vector<double>& s, double beta) const
  {
    const int ell = par_.ell;
    if (static_cast<int>(s.size()) != ell) throw std::invalid_argument("one time per left site");
    std::vector<VecR> D;
    for (int p = 0; p < ell; ++p) D.push_back(proj_[bit_at(X, ell, p) ? 1 : 0][p]);
    return ordered_product(s, D, beta);
  }

  /// 𝔼_X: configurations with left part X and right part r(X).
  VecR config_projector(std::uint32_t X) const
  {
    const int ell = par_.ell;
    const std::uint32_t full = (X << ell) | b_sign_table(ell).reflected[X];
    return basis_diagonal(vm_.balanced(), [&](std::uint32_t m) { return m == full ? 1.0 : 0.0; });
  }

  /// D_n for n ≤ 2 by Gauss–Legendre on the simplex 0 ≤ s_1 ≤ ⋯ ≤ s_n ≤ β (collapsed coordinates).
  MatC dyson_term(int n, double beta, int nodes = 12) const
  {
    if (n < 0 || n > 2) throw std::invalid_argument("dyson_term integrates n <= 2");
    if (n == 0) return sg_->matrix(beta);
    const auto [x, w] = legendre(nodes);
    const double c = std::pow(w0_ / 2.0, n);
    MatC acc = MatC::Zero(G_.rows(), G_.cols());
    if (n == 1) {
      for (std::size_t i = 0; i < x.size(); ++i) acc += (0.5 * beta * w[i]) * integrand({0.5 * beta * (1 + x[i])}, beta);
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double s1 = 0.5 * beta * (1 + x[i]);
        for (std::size_t j = 0; j < x.size(); ++j) {
          const double s2 = s1 + 0.5 * (beta - s1) * (1 + x[j]);
          acc += (0.5 * beta * w[i]) * (0.5 * (beta - s1) * w[j]) * integrand({s1, s2}, beta);
        }
      }
    }
    return c * acc;
  }

private:
  static std::pair<std::vector<double>, std::vector<double>> legendre(int n)
  {
    // Golub–Welsch for Legendre polynomials
    MatR J = MatR::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<MatR> es(J);
    std::vector<double> x(n), w(n);
    for (int k = 0; k < n; ++k) {
      x[k] = es.eigenvalues()(k);
      w[k] = 2.0 * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
    }
    return {x, w};
  }

  ModelParams par_;
  VectorizationMap vm_;
  MatC G_, Ht_;
  VecR P_;
  std::vector<VecR> proj_[2];
  double w0_ = 0.0;
  std::unique_ptr<DenseSemigroup> sg_;
};

} // namespace rpchain
