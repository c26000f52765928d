#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rpchain/fock.hpp"
#include "rpchain/operators.hpp"
#include "rpchain/spectral.hpp"
#include "rpchain/transforms.hpp"
#include "rpchain/types.hpp"

namespace rpchain {

enum class ConeKind { background, reflection };

inline std::string to_string(ConeKind k) { return k == ConeKind::background ? "background" : "reflection"; }

struct ConeVerdict {
  bool member = false;
  bool strict = false;
  double worst_margin = 0.0;  // min grid coefficient or min sector eigenvalue, relative to the largest magnitude
  std::string witness;        // coordinate or sector attaining the margin
  double tol = 0.0;
  double tol_strict = 0.0;
  double hermiticity_residual = 0.0; // reflection only
  double imag_residual = 0.0;        // after phase fixing
  bool sampled = false;              // verdict from a generator sample, not exhaustive
  int samples = 0;
  std::uint64_t seed = 0;
  std::string diagnostic;
};

/// Multiplies by the conjugate phase of the largest-magnitude coefficient; returns that phase.
inline cplx phase_fix(VecC& v)
{
  Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (std::abs(v(k)) == 0.0) return 1.0;
  const cplx ph = v(k) / std::abs(v(k));
  v *= std::conj(ph);
  return ph;
}

// ---------------------------------------------------------------------------
// Background cone: nonnegative coefficients in (configuration, phonon grid) coordinates

/// Phonon coordinates of a vector converted to the √μ-weighted node values of a grid with `nodes` points.
inline VecC to_grid(const VecC& psi, const CompositeBasis& b, int nodes, CompositeBasis* grid_basis = nullptr)
{
  if (b.phonon.rep == PhononRep::grid) {
    if (grid_basis) *grid_basis = b;
    return psi;
  }
  const PhononBasisSpec gph = PhononBasisSpec::grid(nodes, b.phonon.omega);
  const CompositeBasis g = CompositeBasis::make(b.first_site, b.n_sites, b.configs, gph);
  const HermiteTransform h = hermite_position_transform(b.phonon.d - 1, nodes, b.phonon.omega);
  const MatC S = (h.weights.cwiseSqrt().asDiagonal() * h.T.transpose()).cast<cplx>(); // nodes × d
  VecC out(g.dim());
  for (Index s = 0; s < b.n_configs(); ++s) {
    // apply S on every site in turn: tensor of shape d_0 × ... × d_{n−1}
    VecC cur = psi.segment(s * b.phonon_dim, b.phonon_dim);
    std::vector<Index> shape(b.n_sites, b.phonon.d);
    for (int p = 0; p < b.n_sites; ++p) {
      Index before = 1, after = 1;
      for (int q = 0; q < p; ++q) before *= shape[q];
      for (int q = p + 1; q < b.n_sites; ++q) after *= shape[q];
      VecC next = VecC::Zero(before * nodes * after);
      for (Index i = 0; i < before; ++i)
        for (Index k = 0; k < nodes; ++k)
          for (Index a = 0; a < shape[p]; ++a) {
            const cplx f = S(k, a);
            for (Index j = 0; j < after; ++j) next((i * nodes + k) * after + j) += f * cur((i * shape[p] + a) * after + j);
          }
      cur = std::move(next);
      shape[p] = nodes;
    }
    out.segment(s * g.phonon_dim, g.phonon_dim) = cur;
  }
  if (grid_basis) *grid_basis = g;
  return out;
}

inline std::string config_label(std::uint32_t mask, int first_site, int n_sites)
{
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (int p = 0; p < n_sites; ++p)
    if (bit_at(mask, n_sites, p)) {
      os << (first ? "" : ",") << first_site + p;
      first = false;
    }
  os << '}';
  return os.str();
}

/// Coordinate-wise test of a real-structured vector; `fix_phase` applies the global phase gauge first.
inline ConeVerdict nonnegative_membership(VecC v, double tol, double tol_strict, bool fix_phase = true)
{
  ConeVerdict r;
  r.tol = tol;
  r.tol_strict = tol_strict;
  if (fix_phase) phase_fix(v);
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    r.diagnostic = "zero vector";
    return r;
  }
  r.imag_residual = v.imag().cwiseAbs().maxCoeff() / scale;
  Index k = 0;
  r.worst_margin = v.real().minCoeff(&k) / scale;
  r.witness = std::to_string(k);
  if (r.imag_residual > 1e-8) {
    r.diagnostic = "no global phase makes the vector real";
    return r;
  }
  r.member = r.worst_margin >= -tol;
  r.strict = r.worst_margin > tol_strict;
  return r;
}

/// ψ on a half-filled basis; Fock phonons are mapped to a grid with `nodes` points (≥ n_max + 1).
inline ConeVerdict background_membership(const VecC& psi, const CompositeBasis& b, double tol = 1e-10,
                                         double tol_strict = 1e-12, int nodes = 0)
{
  if (b.dim() != psi.size()) throw std::invalid_argument("vector does not match basis");
  for (std::uint32_t m : b.configs)
    if (2 * std::popcount(m) != b.n_sites) throw std::invalid_argument("background cone needs a half-filled basis");
  CompositeBasis g;
  const VecC v = to_grid(psi, b, nodes > 0 ? nodes : b.phonon.d, &g);
  ConeVerdict r = nonnegative_membership(v, tol, tol_strict);
  if (!r.witness.empty()) {
    const Index k = std::stoll(r.witness);
    const auto [slot, ph] = g.state_of(k);
    r.witness = "X=" + config_label(g.configs[slot], g.first_site, g.n_sites) + " node=" + std::to_string(ph);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reflection cone: PSD sector matrices after vectorization

/// Sector-wise PSD test of a vector on the charge-balanced space. With `fix_phase`, the vector is
/// multiplied by the conjugate phase of Σ_q tr M^{(q)} (falling back to the largest coefficient).
inline ConeVerdict reflection_membership_tilde(const VecC& psi, const VectorizationMap& vm, double tol = 1e-10,
                                               double tol_strict = 1e-12, bool fix_phase = true)
{
  ConeVerdict r;
  r.tol = tol;
  r.tol_strict = tol_strict;
  SectorMatrices M = vm.vectorize(psi);
  if (fix_phase) {
    cplx tr = 0.0;
    for (const MatC& b : M.blocks) tr += b.trace();
    cplx ph = 1.0;
    if (std::abs(tr) > 1e-12 * std::sqrt(M.frobenius_sq())) {
      ph = tr / std::abs(tr);
    } else {
      VecC v = psi;
      ph = phase_fix(v);
    }
    for (MatC& b : M.blocks) b *= std::conj(ph);
  }
  double scale = 0.0, herm = 0.0, worst = std::numeric_limits<double>::infinity();
  std::vector<double> mins;
  for (const MatC& b : M.blocks) {
    herm = std::max(herm, (b - b.adjoint()).cwiseAbs().maxCoeff());
    const HermitianEigen es = dense_eigh(MatC((b + b.adjoint()) / 2.0), false);
    scale = std::max(scale, es.values.cwiseAbs().maxCoeff());
    mins.push_back(es.values(0));
  }
  if (scale == 0.0) {
    r.diagnostic = "zero vector";
    return r;
  }
  for (std::size_t k = 0; k < mins.size(); ++k)
    if (mins[k] / scale < worst) {
      worst = mins[k] / scale;
      r.witness = "q=" + std::to_string(M.q[k]);
    }
  r.worst_margin = worst;
  r.hermiticity_residual = herm / scale;
  r.member = r.hermiticity_residual <= std::max(tol, 1e-12) && worst >= -tol;
  r.strict = r.member && worst > tol_strict;
  if (r.hermiticity_residual > std::max(tol, 1e-12)) r.diagnostic = "sector matrices are not Hermitian";
  return r;
}

/// Which map carries a half-filled state of H to the charge-balanced space before vectorizing.
enum class ReflectionFrame {
  polaron,      // U_Λ V_Λ, the frame in which H̃ acts (requires Fock phonons)
  hole_particle // U_Λ alone
};

/// ψ on the half-filled basis of H; ℓ odd.
inline ConeVerdict reflection_membership(const VecC& psi, const ModelParams& par, const CompositeBasis& half,
                                         const VectorizationMap& vm, ReflectionFrame frame = ReflectionFrame::polaron,
                                         double tol = 1e-10, double tol_strict = 1e-12)
{
  par.require_odd();
  if (psi.size() != half.dim()) throw std::invalid_argument("vector does not match basis");
  for (std::uint32_t m : half.configs)
    if (2 * std::popcount(m) != half.n_sites) throw std::invalid_argument("reflection cone needs a half-filled basis");
  VecC v = psi;
  if (frame == ReflectionFrame::polaron) v = lang_firsov(par, half).mat * v;
  return reflection_membership_tilde(hole_particle_map(half, vm.balanced()) * v, vm, tol, tol_strict);
}

// ---------------------------------------------------------------------------
// Cone models: membership of images plus generator sampling

struct ConeModel {
  ConeKind kind = ConeKind::reflection;
  Index dim = 0;
  std::function<ConeVerdict(const VecC&)> membership;              // no phase fixing
  std::function<VecC(std::uint64_t seed, std::uint64_t index)> sample; // random generator
  std::vector<VecC> exhaustive;                                     // complete generator set, when available
  std::function<VecC(const VecC&)> dual_witness;                    // member y with ⟨x,y⟩ < 0 for a non-member x
};

/// Rank-one sector generators vv*; at ℓ = 1 also the complete set e_a e_a*, (e_a+e_b)(..)*, (e_a+ie_b)(..)*.
inline ConeModel reflection_cone(const VectorizationMap& vm, double tol = 1e-8, double tol_strict = 1e-12)
{
  ConeModel c;
  c.kind = ConeKind::reflection;
  c.dim = vm.balanced().dim();
  const VectorizationMap* p = &vm;
  c.membership = [p, tol, tol_strict](const VecC& v) { return reflection_membership_tilde(v, *p, tol, tol_strict, false); };
  const SectorMatrices zero = vm.vectorize(VecC::Zero(c.dim));
  c.sample = [p, zero](std::uint64_t seed, std::uint64_t index) {
    SectorMatrices M = zero;
    const std::size_t k = static_cast<std::size_t>(index % M.blocks.size());
    const VecC v = random_vector(M.blocks[k].rows(), seed, index);
    M.blocks[k] = v * v.adjoint();
    return p->devectorize(M);
  };
  if (vm.sectors().ell == 1) {
    for (std::size_t k = 0; k < zero.blocks.size(); ++k) {
      const Index n = zero.blocks[k].rows();
      for (Index a = 0; a < n; ++a)
        for (Index b = a; b < n; ++b)
          for (int variant = 0; variant < (a == b ? 1 : 2); ++variant) {
            VecC v = VecC::Zero(n);
            v(a) = 1.0;
            if (b != a) v(b) = variant == 0 ? cplx(1.0) : cplx(0.0, 1.0);
            SectorMatrices M = zero;
            M.blocks[k] = v * v.adjoint();
            c.exhaustive.push_back(vm.devectorize(M));
          }
    }
  }
  c.dual_witness = [p, zero](const VecC& x) {
    const SectorMatrices M = p->vectorize(x);
    SectorMatrices Y = zero;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < M.blocks.size(); ++k) {
      const HermitianEigen es = dense_eigh(MatC((M.blocks[k] + M.blocks[k].adjoint()) / 2.0));
      if (es.values(0) < best) {
        best = es.values(0);
        Y = zero;
        Y.blocks[k] = es.vectors.col(0) * es.vectors.col(0).adjoint();
      }
    }
    return p->devectorize(Y);
  };
  return c;
}

/// Entrywise nonnegative cone in given real coordinates; generators are unit vectors.
inline ConeModel background_cone(Index dim, double tol = 1e-10, double tol_strict = 1e-12)
{
  ConeModel c;
  c.kind = ConeKind::background;
  c.dim = dim;
  c.membership = [tol, tol_strict](const VecC& v) { return nonnegative_membership(v, tol, tol_strict, false); };
  c.sample = [dim](std::uint64_t seed, std::uint64_t index) {
    VecC v = random_vector(dim, seed, index).cwiseAbs().cast<cplx>();
    return v;
  };
  for (Index i = 0; i < dim; ++i) c.exhaustive.push_back(VecC::Unit(dim, i));
  c.dual_witness = [dim](const VecC& x) {
    Index k = 0;
    x.real().minCoeff(&k);
    return VecC(VecC::Unit(dim, k));
  };
  return c;
}

/// Generator list: the exhaustive set when present, followed by n_samples seeded random generators.
inline std::vector<VecC> cone_generators(const ConeModel& c, int n_samples, std::uint64_t seed)
{
  std::vector<VecC> g = c.exhaustive;
  for (int i = 0; i < n_samples; ++i) g.push_back(c.sample(seed, static_cast<std::uint64_t>(i)));
  return g;
}

/// A ⊵ 0: every generator is mapped into the cone. Reports the worst relative margin.
inline ConeVerdict operator_preserves(const MatVec& A, const ConeModel& cone, int n_samples, std::uint64_t seed)
{
  ConeVerdict r;
  r.member = true;
  r.strict = true;
  r.worst_margin = std::numeric_limits<double>::infinity();
  r.sampled = cone.exhaustive.empty();
  r.seed = seed;
  const std::vector<VecC> gens = cone_generators(cone, n_samples, seed);
  r.samples = static_cast<int>(gens.size());
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const VecC img = A(gens[i]);
    if (img.cwiseAbs().maxCoeff() == 0.0) {
      r.strict = false;
      if (0.0 < r.worst_margin) {
        r.worst_margin = 0.0;
        r.witness = "generator " + std::to_string(i) + " (zero image)";
      }
      continue;
    }
    const ConeVerdict v = cone.membership(img);
    r.tol = v.tol;
    r.tol_strict = v.tol_strict;
    r.hermiticity_residual = std::max(r.hermiticity_residual, v.hermiticity_residual);
    r.member = r.member && v.member;
    r.strict = r.strict && v.strict;
    if (v.worst_margin < r.worst_margin) {
      r.worst_margin = v.worst_margin;
      r.witness = "generator " + std::to_string(i) + " " + v.witness;
    }
  }
  r.strict = r.strict && r.member;
  return r;
}

inline ConeVerdict operator_preserves(const SpMat& A, const ConeModel& cone, int n_samples, std::uint64_t seed)
{
  return operator_preserves([&A](const VecC& v) { return VecC(A * v); }, cone, n_samples, seed);
}

/// Entrywise test of a real matrix in the cone's own coordinates (background cone at small sizes).
inline ConeVerdict matrix_nonnegative(const MatR& A, double tol_strict = 0.0)
{
  ConeVerdict r;
  Index i = 0, j = 0;
  r.worst_margin = A.minCoeff(&i, &j);
  r.witness = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
  r.member = r.worst_margin >= 0.0;
  r.strict = r.worst_margin > tol_strict;
  r.tol_strict = tol_strict;
  return r;
}

// ---------------------------------------------------------------------------
// Ergodicity and improving

struct ErgodicityReport {
  bool ergodic = false;       // every sampled pair has ⟨x, e^{−βH}y⟩ > tol_strict for some β
  bool improving = false;     // every sampled e^{−βH}x is a strict member at every β
  double min_overlap = 0.0;   // min over pairs of max over β of the normalized overlap
  std::string worst_pair;
  int pairs = 0;
  std::vector<double> betas;
  std::uint64_t seed = 0;
  bool sampled = true;
};

using Semigroup = std::function<VecC(double beta, const VecC& v)>;

inline ErgodicityReport ergodicity_check(const Semigroup& S, const ConeModel& cone, const std::vector<double>& betas,
                                         int n_samples, std::uint64_t seed, double tol_strict = 1e-12)
{
  ErgodicityReport r;
  r.betas = betas;
  r.seed = seed;
  r.sampled = cone.exhaustive.empty();
  const std::vector<VecC> gens = cone_generators(cone, n_samples, seed);
  std::vector<std::vector<VecC>> images(betas.size());
  r.improving = true;
  for (std::size_t b = 0; b < betas.size(); ++b)
    for (const VecC& y : gens) {
      images[b].push_back(S(betas[b], y));
      if (betas[b] > 0.0) r.improving = r.improving && cone.membership(images[b].back()).strict;
    }
  r.min_overlap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gens.size(); ++i)
    for (std::size_t j = 0; j < gens.size(); ++j) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < betas.size(); ++b) {
        const double o = gens[i].dot(images[b][j]).real() / (gens[i].norm() * gens[j].norm());
        best = std::max(best, o);
      }
      if (best < r.min_overlap) {
        r.min_overlap = best;
        r.worst_pair = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
      }
      ++r.pairs;
    }
  r.ergodic = r.min_overlap > tol_strict;
  return r;
}

// ---------------------------------------------------------------------------
// Positive vectors in the ground space

struct GroundSection {
  VecC psi;
  ConeVerdict verdict;
  int degeneracy = 1;
  bool found = false;
};

/// Cone-membership margin of v (after phase fixing) for the margin search; it should penalize
/// vectors that no global phase makes real.
using MarginFn = std::function<double(const VecC&)>;

/// A ground-space vector in the cone. A unique ground state is phase-fixed and tested; a degenerate
/// ground space is searched by coordinate ascent of `margin` over its unit sphere (100 seeded restarts).
inline GroundSection positive_ground_section(const MatC& H, const MarginFn& margin,
                                             const std::function<ConeVerdict(const VecC&)>& verdict,
                                             double gap_tol = 1e-8, std::uint64_t seed = 7)
{
  GroundSection g;
  const HermitianEigen es = dense_eigh(H);
  const double scale = std::max(1.0, es.values.cwiseAbs().maxCoeff());
  int k = 1;
  while (k < es.values.size() && es.values(k) - es.values(0) <= gap_tol * scale) ++k;
  g.degeneracy = k;
  const MatC B = es.vectors.leftCols(k);
  VecC best;
  double best_m = -std::numeric_limits<double>::infinity();
  if (k == 1) {
    best = B.col(0);
  } else {
    for (int restart = 0; restart < 100; ++restart) {
      VecC c = random_vector(k, seed, static_cast<std::uint64_t>(restart));
      c.normalize();
      double m = margin(B * c), h = 0.5;
      while (h > 1e-10) {
        bool improved = false;
        for (int i = 0; i < k; ++i)
          for (cplx d : {cplx(h), cplx(-h), cplx(0.0, h), cplx(0.0, -h)}) {
            VecC c2 = c;
            c2(i) += d;
            c2.normalize();
            const double m2 = margin(B * c2);
            if (m2 > m) {
              m = m2;
              c = c2;
              improved = true;
            }
          }
        if (!improved) h /= 2.0;
      }
      if (m > best_m) {
        best_m = m;
        best = B * c;
      }
    }
  }
  g.psi = best;
  g.verdict = verdict(best);
  g.found = g.verdict.member;
  return g;
}

// ---------------------------------------------------------------------------
// Domination e^{−t(A−B)} ⊵ e^{−tA}

struct TrotterReport {
  ConeVerdict difference;           // e^{−t(A−B)} − e^{−tA} on generators
  std::vector<int> steps;
  std::vector<double> errors;       // ‖(e^{−tA/n}e^{tB/n})^n − e^{−t(A−B)}‖
  double order = 0.0;               // fitted convergence order in 1/n
};

/// Dense check for Hermitian A, B.
inline TrotterReport trotter_domination_check(const MatC& A, const MatC& B, const ConeModel& cone, double t,
                                              const std::vector<int>& steps, int n_samples, std::uint64_t seed)
{
  TrotterReport r;
  const MatC E1 = DenseSemigroup(A - B).matrix(t);
  const MatC E0 = DenseSemigroup(A).matrix(t);
  const MatC D = E1 - E0;
  r.difference = operator_preserves([&D](const VecC& v) { return VecC(D * v); }, cone, n_samples, seed);
  const DenseSemigroup SA(A), SB(-B);
  const double n1 = E1.norm();
  for (int n : steps) {
    const MatC step = SA.matrix(t / n) * SB.matrix(t / n);
    MatC P = MatC::Identity(A.rows(), A.cols());
    for (int i = 0; i < n; ++i) P = P * step;
    r.steps.push_back(n);
    r.errors.push_back((P - E1).norm() / n1);
  }
  if (r.steps.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(r.steps.size());
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
      const double x = std::log(1.0 / r.steps[i]), y = std::log(std::max(r.errors[i], 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    r.order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  return r;
}

} // namespace rpchain
