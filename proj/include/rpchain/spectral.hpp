#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "rpchain/types.hpp"

#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

namespace rpchain {

using MatVec = std::function<VecC(const VecC&)>;

inline MatVec as_matvec(const SpMat& H)
{
  return [&H](const VecC& v) { return VecC(H * v); };
}

/// Max absolute row sum, an upper bound on the spectral norm of a Hermitian matrix.
inline double norm_bound(const SpMat& H)
{
  VecR rows = VecR::Zero(H.rows());
  for (int k = 0; k < H.outerSize(); ++k)
    for (SpMat::InnerIterator it(H, k); it; ++it) rows(it.row()) += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

/// Deterministic complex Gaussian vector from (seed, stream).
inline VecC random_vector(Index dim, std::uint64_t seed, std::uint64_t stream = 0)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> nd(0.0, 1.0);
  VecC v(dim);
  for (Index i = 0; i < dim; ++i) {
    const double re = nd(rng);
    const double im = nd(rng);
    v(i) = cplx(re, im);
  }
  return v;
}

struct HermitianEigen {
  VecR values; // ascending
  MatC vectors; // columns, empty when not requested
};

/// Dense Hermitian eigensolve through LAPACK zheevd (divide and conquer).
inline HermitianEigen dense_eigh(const MatC& A, bool vectors = true)
{
  const Index n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("dense_eigh needs a square matrix");
  HermitianEigen r;
  r.values.resize(n);
  if (n == 0) return r;
  MatC W = A; // column major, overwritten by eigenvectors
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', static_cast<lapack_int>(n),
                                         W.data(), static_cast<lapack_int>(n), r.values.data());
  if (info != 0) throw std::runtime_error("zheevd failed with info " + std::to_string(info));
  if (vectors) r.vectors = std::move(W);
  return r;
}

struct EigenResult {
  double E0 = 0.0;
  VecC psi;
  double E1 = 0.0;
  double gap = 0.0;
  double residual = 0.0; // ‖Hψ − E0ψ‖
  int iterations = 0;
  bool converged = false;
  std::string method;
};

inline EigenResult dense_ground_state(const MatC& H)
{
  const HermitianEigen es = dense_eigh(H);
  EigenResult r;
  r.method = "dense";
  r.E0 = es.values(0);
  r.psi = es.vectors.col(0);
  r.E1 = H.rows() > 1 ? es.values(1) : r.E0;
  r.gap = r.E1 - r.E0;
  r.residual = (H * r.psi - r.E0 * r.psi).norm();
  r.converged = true;
  return r;
}

struct LanczosOptions {
  int max_krylov = 300;
  int max_restarts = 30;
  double tol = 1e-11; // residual target relative to ‖H‖
  std::uint64_t seed = 20240601;
};

struct LanczosResult {
  double value = 0.0;
  VecC vec;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline void project_out(VecC& w, const std::vector<VecC>& deflate)
{
  for (const VecC& d : deflate) w -= d * d.dot(w);
}

} // namespace detail

/// Lowest eigenpair of P H P on the complement of `deflate` (orthonormal vectors),
/// by Lanczos with full reorthogonalization and explicit restarts from the Ritz vector.
inline LanczosResult lanczos_lowest(const MatVec& H, Index dim, double norm_h, const LanczosOptions& opt = {},
                                    const std::vector<VecC>& deflate = {})
{
  LanczosResult res;
  VecC v = random_vector(dim, opt.seed);
  detail::project_out(v, deflate);
  v.normalize();
  const int mmax = static_cast<int>(std::min<Index>(opt.max_krylov, dim - static_cast<Index>(deflate.size())));
  const double scale = std::max(norm_h, 1e-300);
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    MatC V(dim, mmax + 1);
    std::vector<double> alpha, beta;
    V.col(0) = v;
    int m = 0;
    double theta = 0.0;
    VecR y;
    for (int k = 0; k < mmax; ++k) {
      VecC w = H(V.col(k));
      ++res.iterations;
      detail::project_out(w, deflate);
      const double a = V.col(k).dot(w).real();
      alpha.push_back(a);
      for (int pass = 0; pass < 2; ++pass) {
        w -= V.leftCols(k + 1) * (V.leftCols(k + 1).adjoint() * w);
        detail::project_out(w, deflate);
      }
      const double b = w.norm();
      beta.push_back(b);
      m = k + 1;
      const bool check = (m % 5 == 0) || m == mmax || b < 1e-14 * scale;
      if (check) {
        MatR T = MatR::Zero(m, m);
        for (int i = 0; i < m; ++i) {
          T(i, i) = alpha[i];
          if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<MatR> es(T);
        theta = es.eigenvalues()(0);
        y = es.eigenvectors().col(0);
        if (b * std::abs(y(m - 1)) <= 0.1 * opt.tol * scale || b < 1e-14 * scale) break;
      }
      V.col(k + 1) = w / b;
    }
    v = V.leftCols(m) * y.cast<cplx>();
    v.normalize();
    VecC hv = H(v);
    detail::project_out(hv, deflate);
    res.value = theta;
    res.vec = v;
    res.residual = (hv - theta * v).norm();
    if (res.residual <= opt.tol * scale) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

enum class EigenMethod { automatic, dense, lanczos };

/// Ground state and gap. Dense for dim ≤ 4000 unless Lanczos is requested explicitly.
inline EigenResult ground_state(const SpMat& H, EigenMethod method = EigenMethod::automatic,
                                const LanczosOptions& opt = {})
{
  const Index dim = H.rows();
  if (method == EigenMethod::dense || (method == EigenMethod::automatic && dim <= 4000))
    return dense_ground_state(MatC(H));
  const double nh = norm_bound(H);
  const MatVec mv = as_matvec(H);
  const LanczosResult g = lanczos_lowest(mv, dim, nh, opt);
  EigenResult r;
  r.method = "lanczos";
  r.E0 = g.value;
  r.psi = g.vec;
  r.iterations = g.iterations;
  r.converged = g.converged;
  r.residual = (H * r.psi - r.E0 * r.psi).norm();
  LanczosOptions o2 = opt;
  o2.seed = opt.seed + 1;
  const LanczosResult e1 = lanczos_lowest(mv, dim, nh, o2, {g.vec});
  r.E1 = e1.value;
  r.gap = r.E1 - r.E0;
  r.iterations += e1.iterations;
  r.converged = r.converged && e1.converged;
  return r;
}

// ---------------------------------------------------------------------------
// Semigroup e^{−βH}

/// Cached eigendecomposition for repeated e^{−βH} v with one dense Hermitian H.
class DenseSemigroup {
public:
  explicit DenseSemigroup(const MatC& H) : es_(dense_eigh(H)) {}
  VecC apply(double beta, const VecC& v) const
  {
    const VecR& lam = es_.values;
    const double lmin = lam(0);
    VecC c = es_.vectors.adjoint() * v;
    for (Index i = 0; i < c.size(); ++i) c(i) *= std::exp(-beta * (lam(i) - lmin));
    return std::exp(-beta * lmin) * (es_.vectors * c);
  }
  MatC matrix(double beta) const
  {
    const VecR& lam = es_.values;
    VecC e(lam.size());
    for (Index i = 0; i < lam.size(); ++i) e(i) = std::exp(-beta * lam(i));
    return es_.vectors * e.asDiagonal() * es_.vectors.adjoint();
  }
  const HermitianEigen& eig() const { return es_; }

private:
  HermitianEigen es_;
};

struct KrylovOptions {
  double tol = 1e-12; // relative a-posteriori error target
  int max_krylov = 120;
};

/// e^{−βH} v for Hermitian H by a Lanczos basis; halves β and recurses when the basis is too small.
inline VecC krylov_expm(const MatVec& H, double beta, const VecC& v, const KrylovOptions& opt = {})
{
  const double nv = v.norm();
  if (beta == 0.0 || nv == 0.0) return v;
  const Index dim = v.size();
  const int mmax = static_cast<int>(std::min<Index>(opt.max_krylov, dim));
  MatC V(dim, mmax + 1);
  V.col(0) = v / nv;
  std::vector<double> alpha, beta_;
  for (int k = 0; k < mmax; ++k) {
    VecC w = H(V.col(k));
    alpha.push_back(V.col(k).dot(w).real());
    for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(k + 1) * (V.leftCols(k + 1).adjoint() * w);
    const double b = w.norm();
    beta_.push_back(b);
    const int m = k + 1;
    const bool breakdown = b < 1e-13 * std::max(1.0, std::abs(alpha.back()));
    if (m % 4 == 0 || breakdown || m == mmax) {
      MatR T = MatR::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta_[i];
      }
      Eigen::SelfAdjointEigenSolver<MatR> es(T);
      const double lmin = es.eigenvalues()(0);
      VecR e1 = es.eigenvectors().row(0).transpose();
      for (int i = 0; i < m; ++i) e1(i) *= std::exp(-beta * (es.eigenvalues()(i) - lmin));
      const VecR u = es.eigenvectors() * e1; // e^{−β(T−lmin)} e_1
      const double err = b * std::abs(u(m - 1));
      if (breakdown || err <= opt.tol * u.norm()) return (nv * std::exp(-beta * lmin)) * (V.leftCols(m) * u.cast<cplx>());
    }
    if (m == mmax) break;
    V.col(k + 1) = w / b;
  }
  return krylov_expm(H, beta / 2, krylov_expm(H, beta / 2, v, opt), opt);
}

enum class SemigroupMethod { dense_expm, krylov };

inline VecC semigroup_apply(const SpMat& H, double beta, const VecC& v, SemigroupMethod method = SemigroupMethod::krylov,
                            const KrylovOptions& opt = {})
{
  if (beta < 0.0) throw std::invalid_argument("semigroup_apply needs beta >= 0");
  if (beta == 0.0) return v;
  if (method == SemigroupMethod::dense_expm) return DenseSemigroup(MatC(H)).apply(beta, v);
  return krylov_expm(as_matvec(H), beta, v, opt);
}

/// e^{−βH} for a real matrix with nonpositive off-diagonal entries, evaluated as
/// e^{−βc} e^{β(cI − H)} with a nonnegative Taylor series and squaring, so every entry
/// carries relative (not just absolute) accuracy.
inline MatR nonnegative_expm(const MatR& H, double beta)
{
  const Index n = H.rows();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && H(i, j) > 0.0) throw std::invalid_argument("nonnegative_expm needs nonpositive off-diagonals");
  const double c = H.diagonal().maxCoeff();
  MatR B = beta * (c * MatR::Identity(n, n) - H);
  const double nb = B.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  while (nb / std::ldexp(1.0, s) > 0.5) ++s;
  B /= std::ldexp(1.0, s);
  MatR term = MatR::Identity(n, n), sum = MatR::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = term * B / static_cast<double>(k);
    sum += term;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return std::exp(-beta * c) * sum;
}

// ---------------------------------------------------------------------------
// Pseudo-resolvent

struct ResolventResult {
  VecC x;                        // (H − E0)^+ v on the ground-space complement
  double ground_component = 0.0; // ‖P_0 v‖, projected out before solving
  int iterations = 0;
  bool ill_conditioned = false;  // gap below 1e-8
};

/// Σ_{λ > E0 + gap_tol} (λ − E0)^{-1} P_λ v by conjugate gradients on the complement of the ground space.
inline ResolventResult pinv_resolvent(const MatVec& H, double E0, const std::vector<VecC>& ground, const VecC& v,
                                      double gap = 1.0, double tol = 1e-13, int max_iter = 5000)
{
  ResolventResult r;
  VecC b = v;
  for (const VecC& g : ground) {
    const cplx c = g.dot(b);
    b -= c * g;
  }
  r.ground_component = (v - b).norm();
  r.ill_conditioned = gap < 1e-8;
  auto A = [&](const VecC& x) {
    VecC y = H(x) - E0 * x;
    detail::project_out(y, ground);
    return y;
  };
  VecC x = VecC::Zero(v.size());
  VecC res = b, p = b;
  double rr = res.squaredNorm();
  const double stop = tol * tol * std::max(b.squaredNorm(), 1e-300);
  for (int it = 0; it < max_iter && rr > stop; ++it) {
    const VecC Ap = A(p);
    const double alpha = rr / p.dot(Ap).real();
    x += alpha * p;
    res -= alpha * Ap;
    const double rr2 = res.squaredNorm();
    p = res + (rr2 / rr) * p;
    rr = rr2;
    r.iterations = it + 1;
  }
  r.x = x;
  return r;
}

/// Dense version through the full spectrum; eigenvalues within gap_tol of E0 count as ground space.
inline VecC pinv_resolvent_dense(const MatC& H, double E0, const VecC& v, double gap_tol)
{
  const HermitianEigen es = dense_eigh(H);
  VecC c = es.vectors.adjoint() * v;
  for (Index i = 0; i < c.size(); ++i) {
    const double d = es.values(i) - E0;
    c(i) = d > gap_tol ? c(i) / d : cplx(0.0);
  }
  return es.vectors * c;
}

// ---------------------------------------------------------------------------
// Strong product integration

/// ∏_{k=1}^{n} e^{A(s_k)(s_k − s_{k−1})}, ordered left to right; samples[k−1] = A(s_k).
inline MatC product_integral(const std::vector<MatC>& samples, const std::vector<double>& partition)
{
  if (partition.size() != samples.size() + 1) throw std::invalid_argument("partition needs one more point than samples");
  if (samples.empty()) throw std::invalid_argument("empty partition");
  const Index n = samples.front().rows();
  MatC P = MatC::Identity(n, n);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double ds = partition[k + 1] - partition[k];
    if (ds < 0.0) throw std::invalid_argument("partition must be nondecreasing");
    const MatC E = (samples[k] * ds).exp();
    P = P * E;
  }
  return P;
}

/// Uniform partition of [0, a] into n cells with right-endpoint samples.
inline MatC product_integral(const std::function<MatC(double)>& A, double a, int n)
{
  std::vector<double> part(n + 1);
  std::vector<MatC> samples;
  for (int k = 0; k <= n; ++k) part[k] = a * k / n;
  for (int k = 1; k <= n; ++k) samples.push_back(A(part[k]));
  return product_integral(samples, part);
}

} // namespace rpchain
