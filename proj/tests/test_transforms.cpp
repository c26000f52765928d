#include <gtest/gtest.h>

#include <bit>
#include <set>

#include "rpchain/suites.hpp"
#include "rpchain/transforms.hpp"

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

// (even-site count) − (odd-site count) of a mask on ℓ sites starting at first_site.
int charge(std::uint32_t m, int first_site, int ell)
{
  int q = 0;
  for (int p = 0; p < ell; ++p)
    if ((m >> (ell - 1 - p)) & 1u) q += ((first_site + p) % 2 == 0) ? 1 : -1;
  return q;
}

} // namespace

TEST(HoleParticle, IdentitiesAtOneAndThree)
{
  for (int ell : {1, 3}) {
    const auto r = transform_suite(params(ell, 0.3, InteractionSpec::nearest(1.0), 1));
    EXPECT_LE(r.hp_unitarity, 1e-12);
    EXPECT_LE(r.hp_annihilator, 1e-12);
    EXPECT_LE(r.hp_density, 1e-12);
    EXPECT_LE(r.hp_vacuum, 1e-12);
  }
}

TEST(HoleParticle, VacuumSignAndStatedPrefactor)
{
  // σ = (−1)^{k(k−1)/2} with k = ℓ odd sites: +1 at ℓ=1, −1 at ℓ=3; the stated (−1)^{(|Λ|+2)/4} gives −1, +1
  const auto r1 = transform_suite(params(1, 0.0, InteractionSpec::none_kind(), 0));
  const auto r3 = transform_suite(params(3, 0.0, InteractionSpec::none_kind(), 0));
  EXPECT_EQ(r1.hp_vacuum_sign, 1.0);
  EXPECT_EQ(r3.hp_vacuum_sign, -1.0);
  EXPECT_FALSE(r1.stated_prefactor_matches);
  EXPECT_FALSE(r3.stated_prefactor_matches);
}

TEST(HoleParticle, MapsHalfFillingOntoChargeBalance)
{
  for (int ell : {1, 2, 3}) {
    const auto ph = PhononBasisSpec::fock(0);
    const auto half = half_filled_basis(ell, ph), bal = balanced_basis(ell, ph);
    for (Index s = 0; s < bal.n_configs(); ++s) {
      const std::uint32_t m = bal.configs[s];
      // Q̂^{(R)} counts the right half with the opposite sign, since reflection swaps even and odd sites
      EXPECT_EQ(charge(m >> ell, -ell, ell), -charge(m & ((1u << ell) - 1u), 0, ell));
    }
    const MatC M = MatC(hole_particle_map(half, bal));
    ASSERT_EQ(M.rows(), M.cols());
    EXPECT_LE((M.adjoint() * M - MatC::Identity(M.rows(), M.rows())).cwiseAbs().maxCoeff(), 0.0);
    for (Index k = 0; k < M.cols(); ++k) EXPECT_EQ(M.col(k).cwiseAbs().sum(), 1.0);
  }
}

TEST(Reflection, SignTableIsSignedBijection)
{
  for (int ell : {1, 3, 5}) {
    const auto t = b_sign_table(ell);
    std::set<std::uint32_t> seen;
    for (std::uint32_t X = 0; X < (1u << ell); ++X) {
      EXPECT_EQ(std::abs(t.s[X]), 1.0);
      EXPECT_EQ(std::abs(t.theta_s[X]), 1.0);
      EXPECT_EQ(std::popcount(t.reflected[X]), std::popcount(X));
      EXPECT_TRUE(seen.insert(t.reflected[X]).second);
      // site j ↦ −1−j: left position p becomes right position ℓ−1−p
      std::uint32_t mirror = 0;
      for (int p = 0; p < ell; ++p)
        if ((X >> (ell - 1 - p)) & 1u) mirror |= 1u << p;
      EXPECT_EQ(t.reflected[X], mirror);
    }
  }
}

TEST(Reflection, AntiunitaryAlgebra)
{
  const auto th = reflection_antiunitary(3, PhononBasisSpec::fock(1));
  const VecC v = random_vector(th.dim(), 7, 0), w = random_vector(th.dim(), 7, 1);
  const cplx i(0.0, 1.0);
  EXPECT_LE((th.apply(i * v) + i * th.apply(v)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(std::abs(th.apply(v).dot(th.apply(w)) - std::conj(v.dot(w))), 0.0, 1e-12);
  EXPECT_LE((th.inverse().apply(th.apply(v)) - v).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(reflection_antiunitary(2, PhononBasisSpec::fock(0)), std::invalid_argument);
}

TEST(Reflection, IdentitiesAtOneAndThree)
{
  for (int ell : {1, 3}) {
    const auto r = transform_suite(params(ell, 0.3, InteractionSpec::power_law(1.5), 1));
    ASSERT_TRUE(r.reflection_checked);
    EXPECT_LE(r.theta_vacuum, 1e-10);
    EXPECT_LE(r.theta_b, 1e-10);
    EXPECT_LE(r.theta_phonon, 1e-10);
    EXPECT_LE(r.tau_density, 1e-10);
    EXPECT_LE(r.tau_phonon, 1e-10);
    EXPECT_LE(r.decomposition.max_defect(), 1e-10) << "ell=" << ell;
    EXPECT_LE(r.vectorization_isometry, 1e-14);
    EXPECT_LE(r.vectorization_roundtrip, 0.0);
    EXPECT_GE(r.vacuum_sector_psd, -1e-14);
  }
}

TEST(Vectorization, LiftsActAsLeftAndRightMultiplication)
{
  const int ell = 3;
  const auto ph = PhononBasisSpec::fock(1);
  const auto par = params(ell, 0.3, InteractionSpec::power_law(1.5), 1);
  const VectorizationMap vm(ell, ph);
  const HalfChainTerms h = half_chain_terms(par, ph);
  const AntiunitaryRep th = reflection_antiunitary(ell, ph);
  const SpMat A = h.K, B = h.W_L + h.K_L;
  const SpMat LA = lift_left(A, h.L, h.R, vm.balanced());
  const SpMat RB = lift_right(B, th, h.L, h.R, vm.balanced());
  const VecC psi = random_vector(vm.balanced().dim(), 3, 0);
  const SectorMatrices M = vm.vectorize(psi), MA = vm.vectorize(LA * psi), MB = vm.vectorize(RB * psi);
  const auto Ab = sector_blocks(A, vm), Bb = sector_blocks(B, vm);
  for (std::size_t k = 0; k < M.blocks.size(); ++k) {
    EXPECT_LE((MA.blocks[k] - Ab[k] * M.blocks[k]).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((MB.blocks[k] - M.blocks[k] * Bb[k]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Vectorization, VacuumIsRankOne)
{
  const VectorizationMap vm(3, PhononBasisSpec::fock(0));
  VecC vac = VecC::Zero(vm.balanced().dim());
  vac(vm.balanced().index_of_mask(0, 0)) = 1.0;
  const SectorMatrices M = vm.vectorize(vac);
  int nonzero = 0;
  for (const MatC& b : M.blocks) nonzero += static_cast<int>((b.array().abs() > 0).count());
  EXPECT_EQ(nonzero, 1);
}

TEST(LangFirsov, UnitaryAndConverging)
{
  ModelParams p = params(1, 0.5, InteractionSpec::nearest(1.0), 2);
  const auto seq = lang_firsov_sequence(p, {2, 4});
  for (const auto& r : seq.reports) EXPECT_LE(r.unitarity_defect, 1e-12);
  EXPECT_TRUE(seq.gap_monotone);
  EXPECT_TRUE(seq.boson_monotone);
  EXPECT_THROW(lang_firsov(p, full_basis(1, PhononBasisSpec::grid(3))), std::invalid_argument);
}

TEST(LangFirsov, TrivialAtZeroCoupling)
{
  // g = 0: V = e^{−iπN_p/2}, so the polaron Hamiltonian is H itself
  const auto r = lang_firsov_report(params(1, 0.0, InteractionSpec::nearest(1.0), 3));
  EXPECT_LE(r.spectral_gap, 1e-12);
  EXPECT_LE(r.fermion_defect, 1e-12);
}

TEST(Algebra, SuiteDefects)
{
  const auto r = algebra_suite(params(2, 0.4, InteractionSpec::power_law(1.5), 2));
  EXPECT_LE(r.max_defect(), 1e-12);
  EXPECT_GT(r.ccr_top, 0.5);
}
