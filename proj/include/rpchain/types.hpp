#pragma once

#include <complex>
#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace rpchain {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cplx>;
using SpReal = Eigen::SparseMatrix<double>;
using Index = std::int64_t;

/// Largest absolute entry of a sparse matrix (0 for an empty matrix).
template <typename Sparse>
double max_abs(const Sparse& m)
{
  double r = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (typename Sparse::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

inline double max_abs_dense(const MatC& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

} // namespace rpchain
