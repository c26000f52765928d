#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "rpchain/interaction.hpp"
#include "rpchain/irbound.hpp"

namespace rpchain {

/// Physical and numerical configuration of a finite chain Λ = [−ℓ, ℓ−1].
struct ModelParams {
  int ell = 1;                     // half chain length
  double t = 1.0;                  // hopping
  double g = 0.0;                  // fermion-phonon coupling
  double omega = 1.0;              // phonon energy
  InteractionSpec interaction;     // U(j)
  int n_max = 2;                   // per-site phonon occupation cutoff
  int grid_nodes = 5;              // Gauss-Hermite nodes per site for position-space checks
  double tol_psd = 1e-10;          // relative to the 1-norm of the tested matrix
  double tol_strict = 1e-12;
  double gap_tol = 1e-8;           // relative to ‖H‖

  int sites() const { return 2 * ell; }
  /// α = √2 ω^{-1/2} g, the phase coefficient after the polaron transform.
  double lf_alpha() const { return std::sqrt(2.0 / omega) * g; }

  void validate() const
  {
    if (ell < 1) throw std::invalid_argument("model.ell must be >= 1");
    if (2 * ell > 30) throw std::invalid_argument("model.ell too large for bitmask indexing");
    if (!(t > 0.0)) throw std::invalid_argument("model.t must be > 0");
    if (!(omega > 0.0)) throw std::invalid_argument("model.omega must be > 0");
    if (!std::isfinite(g)) throw std::invalid_argument("model.g must be finite");
    if (n_max < 0) throw std::invalid_argument("phonon.n_max must be >= 0");
    if (grid_nodes < 1) throw std::invalid_argument("phonon.grid_nodes must be >= 1");
    if (tol_psd < 0 || tol_strict < 0 || gap_tol < 0) throw std::invalid_argument("tolerances must be >= 0");
  }

  /// Reflection-positivity routines need an odd ℓ.
  void require_odd() const
  {
    if (ell % 2 == 0) throw std::invalid_argument("reflection routines require odd ell, got " + std::to_string(ell));
  }
};

struct ConditionB {
  Eigen::MatrixXd matrix; // M_{ij} = (−1)^{i+j} U(i+j+1), i,j ∈ Λ_L
  double min_eig = 0.0;
  bool holds = false;
};

/// Condition B1 when strict is false, B2 otherwise.
inline ConditionB check_condition_B(const InteractionSpec& spec, int ell, bool strict, double tol_psd = 1e-10,
                                    double tol_strict = 1e-12)
{
  if (ell < 1) throw std::invalid_argument("ell must be >= 1");
  ConditionB r;
  r.matrix.resize(ell, ell);
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < ell; ++b) {
      const long i = a - ell, j = b - ell;
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      r.matrix(a, b) = sign * u_of(spec, i + j + 1);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.matrix, Eigen::EigenvaluesOnly);
  r.min_eig = es.eigenvalues()(0);
  const double norm1 = r.matrix.cwiseAbs().colwise().sum().maxCoeff();
  r.holds = strict ? (r.min_eig > tol_strict) : (r.min_eig >= -tol_psd * norm1);
  return r;
}

struct ConditionC {
  double c1_sum = 0.0; // Σ_{j≥0} |W(j)|, +inf when divergent
  bool c1_holds = false;
  bool c2_holds = false;
  double c2_exponent = 0.0;
  std::optional<double> c2_value;
};

inline ConditionC check_condition_C(const InteractionSpec& spec, const IRBoundOptions& opt = {})
{
  ConditionC r;
  switch (spec.kind) {
    case InteractionKind::none: r.c1_sum = 0.0; break;
    case InteractionKind::nearest: r.c1_sum = std::abs(w_of(spec, 1)); break;
    case InteractionKind::table:
      for (const auto& [j, v] : spec.table)
        if (j >= 0) r.c1_sum += std::abs(w_of(spec, j));
      break;
    case InteractionKind::power_law:
      // |W(j)| = A j^{-α}, so the sum is A ζ(α)
      r.c1_sum = spec.alpha > 1.0 ? spec.amplitude * boost::math::zeta(spec.alpha)
                                  : std::numeric_limits<double>::infinity();
      break;
  }
  r.c1_holds = std::isfinite(r.c1_sum);
  const C2Diagnostic d = c2_diagnostic(spec, opt);
  r.c2_holds = d.holds;
  r.c2_exponent = d.exponent;
  r.c2_value = d.value;
  return r;
}

} // namespace rpchain
