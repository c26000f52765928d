#include <gtest/gtest.h>

#include "rpchain/observables.hpp"

using namespace rpchain;

namespace {

ModelParams params(int ell, double g, InteractionSpec U, int n_max)
{
  ModelParams p;
  p.ell = ell;
  p.g = g;
  p.interaction = U;
  p.n_max = n_max;
  return p;
}

FieldVector random_field(int n, std::uint64_t seed, bool complex_valued)
{
  const VecC v = random_vector(n, seed, 0);
  FieldVector h(n);
  for (int k = 0; k < n; ++k) h[k] = complex_valued ? v(k) : cplx(v(k).real());
  return h;
}

} // namespace

TEST(Correlations, ProductStateOracle)
{
  const auto b = half_filled_basis(2, PhononBasisSpec::fock(0));
  const std::uint32_t m = 0b1010; // sites −2 and 0 occupied
  VecC psi = VecC::Zero(b.dim());
  psi(b.index_of_mask(m, 0)) = 1.0;
  EXPECT_EQ(density(psi, b, -2), 0.5);
  EXPECT_EQ(density(psi, b, -1), -0.5);
  EXPECT_EQ(correlator(psi, b, -2, 0), 0.25);
  EXPECT_EQ(correlator(psi, b, -2, -1), -0.25);
  EXPECT_EQ(staggered_correlator(psi, b, -2, -1), 0.25);
  EXPECT_EQ(correlator(psi, b, 1, 1), 0.25);
}

TEST(Correlations, StringsOnCdwState)
{
  // every odd site occupied: each string of m pairs equals 4^{−m}
  const int ell = 3;
  const auto b = half_filled_basis(ell, PhononBasisSpec::fock(0));
  std::uint32_t m = 0;
  for (int j = -ell; j < ell; ++j)
    if (j % 2 != 0) m |= 1u << (2 * ell - 1 - (j + ell));
  VecC psi = VecC::Zero(b.dim());
  psi(b.index_of_mask(m, 0)) = 1.0;
  for (const auto& s : all_cdw_strings(psi, b, 3)) {
    // δn̂_i δn̂_{−1−i}: i and −1−i have opposite parity, so each pair contributes −1/4
    EXPECT_DOUBLE_EQ(s.value, std::pow(0.25, static_cast<double>(s.sites.size())));
  }
  EXPECT_EQ(all_cdw_strings(psi, b, 3).size(), 8u);
  EXPECT_EQ(all_cdw_strings(psi, b, 1).size(), 4u);
}

TEST(Correlations, SumRuleAndParseval)
{
  const auto b = half_filled_basis(3, PhononBasisSpec::fock(1));
  VecC psi = random_vector(b.dim(), 4);
  psi.normalize();
  const StructureFactor s = structure_factor(psi, b);
  EXPECT_NEAR(s.G[3], 0.25, 1e-15);
  EXPECT_LE(s.parseval_defect, 1e-12);
  EXPECT_EQ(s.momenta.size(), 6u);
  EXPECT_NEAR(s.momenta[3], M_PI, 1e-15);
}

TEST(Fields, FormIdentities)
{
  const auto spec = InteractionSpec::power_law(1.5);
  const int n = 6;
  const FieldVector h = random_field(n, 1, true), hp = random_field(n, 2, true);
  const FieldVector Rhp = r_apply(spec, hp);
  cplx direct = 0.0;
  for (int k = 0; k < n; ++k) direct += std::conj(h[k]) * Rhp[k];
  EXPECT_LE(std::abs(direct - w_inner(h, hp, spec)), 1e-12);
  const MatR R = r_matrix(spec, n);
  EXPECT_LE((R - R.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(R.rowwise().sum().cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatR>(R).eigenvalues()(0), -1e-12);
  EXPECT_EQ(laplacian_form(FieldVector(n, 2.0)), 0.0);
  FieldVector alt(n);
  for (int k = 0; k < n; ++k) alt[k] = k % 2 ? -1.0 : 1.0;
  EXPECT_EQ(laplacian_form(alt), 4.0 * n);
  // ℓ = 3: position 0 is site −3 (odd)
  EXPECT_EQ(stagger(FieldVector(n, 1.0))[0], cplx(-1.0));
  EXPECT_EQ(stagger(FieldVector(n, 1.0))[1], cplx(1.0));
}

TEST(Inequalities, EnergyMonotonicityAtOne)
{
  const auto par = params(1, 0.5, InteractionSpec::power_law(1.5), 2);
  const auto b = balanced_basis(1, PhononBasisSpec::fock(2));
  const GroundData g = transformed_ground(par, b);
  ASSERT_FALSE(g.degenerate);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const FieldVector h = random_field(2, s, false);
    std::vector<double> hr;
    for (const cplx& c : h) hr.push_back(c.real());
    EXPECT_TRUE(energy_monotonicity(par, hr, b, g.E0).holds);
  }
  EXPECT_NEAR(energy_monotonicity(par, {0.3, 0.3}, b, g.E0).Eh, g.E0, 1e-12);
}

TEST(Inequalities, SusceptibilityMatchesSpectralSum)
{
  const auto par = params(3, 0.3, InteractionSpec::power_law(1.5), 0);
  const auto b = balanced_basis(3, PhononBasisSpec::fock(0));
  const GroundData g = transformed_ground(par, b);
  const HermitianEigen es = dense_eigh(MatC(build_transformed(par, b).mat));
  for (std::uint64_t s = 0; s < 5; ++s) {
    const FieldVector h = random_field(6, s + 10, true);
    const auto r = susceptibility_bound(par, h, b, g);
    const VecC Apsi = density_pairing(par.interaction, h, b).cwiseProduct(g.psi);
    double oracle = 0.0;
    for (Index k = 1; k < es.values.size(); ++k)
      oracle += std::norm(es.vectors.col(k).dot(Apsi)) / (es.values(k) - es.values(0));
    EXPECT_NEAR(r.lhs, oracle, 1e-9 * std::max(1.0, oracle));
    EXPECT_TRUE(r.holds) << r.lhs << " " << r.rhs;
  }
}

TEST(Inequalities, InfraredBoundHolds)
{
  const auto par = params(3, 0.3, InteractionSpec::power_law(1.5), 0);
  const auto b = balanced_basis(3, PhononBasisSpec::fock(0));
  const GroundData g = transformed_ground(par, b);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto r = infrared_bound(par, random_field(6, s + 20, true), b, g);
    EXPECT_TRUE(r.holds) << r.lhs_sq << " " << r.rhs;
  }
  // a constant field has ⟨δn̂|h⟩_W = 0, so both sides vanish
  const auto z = infrared_bound(par, FieldVector(6, 1.0), b, g);
  EXPECT_LE(z.lhs_sq, 1e-24);
  EXPECT_TRUE(z.holds);
}
