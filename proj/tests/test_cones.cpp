#include <gtest/gtest.h>

#include "rpchain/cones.hpp"

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

} // namespace

TEST(Nonnegative, PhaseGaugeAndMargins)
{
  VecC v(3);
  v << 1.0, 0.5, 0.25;
  const cplx ph = std::polar(1.0, 0.7);
  const auto a = nonnegative_membership(ph * v, 1e-10, 1e-12);
  EXPECT_TRUE(a.member);
  EXPECT_TRUE(a.strict);
  EXPECT_NEAR(a.worst_margin, 0.25, 1e-15);
  EXPECT_FALSE(nonnegative_membership(ph * v, 1e-10, 1e-12, false).member);
  v(2) = -0.1;
  const auto b = nonnegative_membership(v, 1e-10, 1e-12);
  EXPECT_FALSE(b.member);
  EXPECT_EQ(b.witness, "2");
  VecC w(2);
  w << 1.0, cplx(0.0, 1.0);
  const auto c = nonnegative_membership(w, 1e-10, 1e-12);
  EXPECT_FALSE(c.member);
  EXPECT_FALSE(c.diagnostic.empty());
  EXPECT_FALSE(nonnegative_membership(VecC::Zero(3), 1e-10, 1e-12).member);
}

TEST(Background, FockVacuumIsStrictlyPositive)
{
  const auto b = half_filled_basis(1, PhononBasisSpec::fock(2));
  VecC psi = VecC::Zero(b.dim());
  psi(b.index_of(0, 0)) = 1.0;
  psi(b.index_of(1, 0)) = 2.0;
  const auto v = background_membership(psi, b, 1e-10, 1e-12, 5);
  EXPECT_TRUE(v.strict);
  // one phonon on the first site is odd in its coordinate
  VecC odd = psi;
  odd(b.index_of(0, b.phonon_index_of({1, 0}))) = 0.5;
  EXPECT_FALSE(background_membership(odd, b, 1e-10, 1e-12, 5).member);
  EXPECT_THROW(background_membership(VecC::Zero(full_basis(1, PhononBasisSpec::fock(0)).dim()),
                                     full_basis(1, PhononBasisSpec::fock(0))),
               std::invalid_argument);
}

TEST(Background, MatrixNonnegative)
{
  MatR A(2, 2);
  A << 1.0, 0.0, 0.2, 3.0;
  EXPECT_TRUE(matrix_nonnegative(A).member);
  EXPECT_FALSE(matrix_nonnegative(A, 1e-12).strict);
  A(0, 1) = -1e-3;
  const auto v = matrix_nonnegative(A);
  EXPECT_FALSE(v.member);
  EXPECT_EQ(v.witness, "(0,1)");
}

TEST(Reflection, VacuumAndGenerators)
{
  const VectorizationMap vm(3, PhononBasisSpec::fock(0));
  const ConeModel cone = reflection_cone(vm);
  VecC vac = VecC::Zero(cone.dim);
  vac(vm.balanced().index_of_mask(0, 0)) = 1.0;
  const auto v = cone.membership(vac);
  EXPECT_TRUE(v.member);
  EXPECT_FALSE(v.strict);
  for (int i = 0; i < 8; ++i) {
    const VecC g = cone.sample(5, i);
    EXPECT_TRUE(cone.membership(g).member);
    EXPECT_FALSE(cone.membership(-g).member);
    // with the trace gauge the sign is absorbed
    EXPECT_TRUE(reflection_membership_tilde(-g, vm).member);
  }
}

TEST(Reflection, SelfDualityOnSamples)
{
  const VectorizationMap vm(3, PhononBasisSpec::fock(1));
  const ConeModel cone = reflection_cone(vm);
  auto member = [&](std::uint64_t s) {
    VecC x = VecC::Zero(cone.dim);
    for (int i = 0; i < 6; ++i) x += cone.sample(s, i);
    return x;
  };
  for (std::uint64_t s = 0; s < 10; ++s) EXPECT_GE(member(s).dot(member(s + 100)).real(), -1e-12);
  // a non-member has a member with negative pairing
  const VecC bad = cone.sample(1, 0) - 2.0 * cone.sample(1, 4);
  const auto vb = cone.membership(bad);
  ASSERT_FALSE(vb.member);
  const VecC y = cone.dual_witness(bad);
  EXPECT_TRUE(cone.membership(y).member);
  EXPECT_LT(bad.dot(y).real(), 0.0);
}

TEST(Reflection, ExhaustiveGeneratorsAtEllOne)
{
  const VectorizationMap vm(1, PhononBasisSpec::fock(1));
  const ConeModel cone = reflection_cone(vm);
  // blocks of size d_L = 2 in each of two sectors: 2 diagonal + 2 off-diagonal pairs → 4 per sector
  EXPECT_EQ(cone.exhaustive.size(), 8u);
  for (const VecC& g : cone.exhaustive) EXPECT_TRUE(cone.membership(g).member);
}

TEST(Reflection, CongruencePreservesCone)
{
  // M ↦ A M A* is L(A)R(A*) in the vectorized picture
  const int ell = 3;
  const auto ph = PhononBasisSpec::fock(1);
  const VectorizationMap vm(ell, ph);
  const HalfChainTerms h = half_chain_terms(params(ell, 0.3, InteractionSpec::power_law(1.5), 1), ph);
  const AntiunitaryRep th = reflection_antiunitary(ell, ph);
  const SpMat A = h.K + cplx(0.0, 0.7) * h.W_L;
  const SpMat Ad = A.adjoint();
  const SpMat C = lift_left(A, h.L, h.R, vm.balanced()) * lift_right(Ad, th, h.L, h.R, vm.balanced());
  const ConeModel cone = reflection_cone(vm);
  EXPECT_TRUE(operator_preserves(C, cone, 40, 3).member);
  // a plain left multiplication is not a congruence and leaves the cone
  EXPECT_FALSE(operator_preserves(lift_left(A, h.L, h.R, vm.balanced()), cone, 40, 3).member);
}

TEST(Reflection, TransformedSemigroupAtEllOne)
{
  const auto par = params(1, 0.5, InteractionSpec::power_law(1.5), 2);
  const auto ph = PhononBasisSpec::fock(2);
  const VectorizationMap vm(1, ph);
  const SpMat Ht = build_transformed(par, vm.balanced()).mat;
  const DenseSemigroup S{MatC(Ht)};
  const ConeModel cone = reflection_cone(vm);
  for (double beta : {0.2, 1.0}) {
    const auto v = operator_preserves([&](const VecC& x) { return S.apply(beta, x); }, cone, 20, 1);
    EXPECT_TRUE(v.member) << beta << " " << v.worst_margin;
    EXPECT_FALSE(v.sampled);
  }
}

TEST(Ergodicity, ToySemigroups)
{
  const ConeModel cone = background_cone(2);
  MatC D = MatC::Zero(2, 2);
  D(1, 1) = 1.0;
  const DenseSemigroup SD(D);
  const auto r1 = ergodicity_check([&](double b, const VecC& v) { return SD.apply(b, v); }, cone, {0.5, 1.0}, 0, 1);
  EXPECT_FALSE(r1.ergodic);
  EXPECT_FALSE(r1.improving);
  EXPECT_EQ(r1.pairs, 4);
  MatC H(2, 2);
  H << 0.0, -1.0, -1.0, 0.0;
  const DenseSemigroup SH(H);
  const auto r2 = ergodicity_check([&](double b, const VecC& v) { return SH.apply(b, v); }, cone, {0.5, 1.0}, 5, 1);
  EXPECT_TRUE(r2.ergodic);
  EXPECT_TRUE(r2.improving);
  EXPECT_FALSE(r2.sampled);
}

TEST(GroundSection, UniqueAndDegenerate)
{
  auto verdict = [](const VecC& v) { return nonnegative_membership(v, 1e-10, 1e-12); };
  auto margin = [&](const VecC& v) {
    const auto c = verdict(v);
    return c.worst_margin - c.imag_residual;
  };
  const MatC J = -MatC::Ones(3, 3);
  const auto u = positive_ground_section(J, margin, verdict);
  EXPECT_EQ(u.degeneracy, 1);
  EXPECT_TRUE(u.found);
  EXPECT_TRUE(u.verdict.strict);
  MatC D = MatC::Zero(3, 3);
  D(2, 2) = 1.0;
  const auto d = positive_ground_section(D, margin, verdict);
  EXPECT_EQ(d.degeneracy, 2);
  EXPECT_TRUE(d.found);
  EXPECT_FALSE(d.verdict.strict);
  EXPECT_NEAR(std::abs(d.psi(2)), 0.0, 1e-12);
}

TEST(Domination, TrotterOrderAndPositivity)
{
  MatC A(3, 3), B = MatC::Zero(3, 3);
  A << 1.0, -0.2, 0.0, -0.2, 2.0, -0.1, 0.0, -0.1, 0.5;
  B(0, 2) = B(2, 0) = 0.4;
  B(1, 1) = 0.3;
  const auto r = trotter_domination_check(A, B, background_cone(3), 1.0, {8, 16, 32, 64}, 5, 2);
  EXPECT_TRUE(r.difference.member);
  EXPECT_NEAR(r.order, 1.0, 0.2);
  for (std::size_t i = 1; i < r.errors.size(); ++i) EXPECT_LT(r.errors[i], r.errors[i - 1]);
}
