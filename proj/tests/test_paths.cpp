#include <gtest/gtest.h>

#include "rpchain/cones.hpp"
#include "rpchain/paths.hpp"

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

std::uint32_t left_mask(int ell, std::initializer_list<int> sites)
{
  std::uint32_t m = 0;
  for (int s : sites) m |= 1u << (ell - 1 - (s + ell));
  return m;
}

} // namespace

TEST(Clusters, Examples)
{
  using V = std::vector<std::vector<int>>;
  EXPECT_EQ(cluster_decompose(left_mask(5, {-5, -4, -2}), 5), (V{{-5, -4}, {-2}}));
  EXPECT_EQ(cluster_decompose(left_mask(5, {-4, -3, -2, -1}), 5), (V{{-4, -3, -2, -1}}));
  EXPECT_EQ(cluster_decompose(left_mask(5, {-5, -3, -1}), 5), (V{{-5}, {-3}, {-1}}));
  EXPECT_TRUE(cluster_decompose(0, 3).empty());
}

TEST(Paths, EveryLeftConfigurationReachesVacuum)
{
  for (int ell : {1, 3, 5, 7})
    for (std::uint32_t X = 0; X < (1u << ell); ++X) {
      const ConfigPath p = connect_to_vacuum(X, ell);
      const PathCheck c = check_path(p);
      EXPECT_TRUE(c.valid) << "ell=" << ell << " X=" << X << ": " << c.message;
    }
  EXPECT_THROW(connect_to_vacuum(0, 2), std::invalid_argument);
  EXPECT_THROW(connect_to_vacuum(8, 3), std::invalid_argument);
}

TEST(Paths, KnownSequences)
{
  // an even cluster is removed pair by pair from its left end
  const ConfigPath even = connect_to_vacuum(left_mask(3, {-3, -2}), 3);
  ASSERT_EQ(even.length(), 1u);
  EXPECT_EQ(even.moves[0].kind, MoveKind::pair_annihilate);
  EXPECT_EQ(even.moves[0].site, -3);
  // a lone odd site next to the seam leaves through it
  const ConfigPath odd = connect_to_vacuum(left_mask(3, {-1}), 3);
  ASSERT_EQ(odd.length(), 1u);
  EXPECT_EQ(odd.moves[0].kind, MoveKind::seam_annihilate);
  // a lone even site first takes a fermion from the seam, then pairs off
  const ConfigPath ev = connect_to_vacuum(left_mask(3, {-2}), 3);
  ASSERT_EQ(ev.length(), 2u);
  EXPECT_EQ(ev.moves[0].kind, MoveKind::seam_create);
  EXPECT_EQ(ev.moves[1].kind, MoveKind::pair_annihilate);
  EXPECT_EQ(ev.moves[1].site, -2);
}

TEST(Paths, CheckerRejectsIllegalSteps)
{
  ConfigPath p = connect_to_vacuum(left_mask(3, {-3, -2}), 3);
  ConfigPath wrong_end = p;
  wrong_end.configs.back() = 1;
  EXPECT_FALSE(check_path(wrong_end).valid);
  ConfigPath wrong_site = p;
  wrong_site.moves[0].site = -2;
  EXPECT_FALSE(check_path(wrong_site).valid);
  ConfigPath interior{3, {left_mask(3, {-2}), 0}, {{MoveKind::seam_annihilate, -2}}};
  EXPECT_FALSE(check_path(interior).valid);
  ConfigPath wrong_kind{3, {left_mask(3, {-1}), 0}, {{MoveKind::seam_create, -1}}};
  EXPECT_FALSE(check_path(wrong_kind).valid);
  ConfigPath short_path{3, {left_mask(3, {-1})}, {{MoveKind::seam_annihilate, -1}}};
  EXPECT_FALSE(check_path(short_path).valid);
}

TEST(Paths, HalfFilledImagesAtOneAndThree)
{
  // site −1 is odd and flips under the hole-particle map
  EXPECT_EQ(tilde_left(0b10, 1), 0u);
  EXPECT_EQ(tilde_left(0b01, 1), 1u);
  for (int ell : {1, 3}) {
    int n = 0;
    for (const auto& c : enumerate_half_filled(ell)) {
      EXPECT_TRUE(check_path(connect_to_vacuum(tilde_left(c.mask, ell), ell)).valid);
      ++n;
    }
    EXPECT_EQ(n, ell == 1 ? 2 : 20);
  }
}

TEST(Amplitudes, FirstOrderPairMoveMatchesKernelElement)
{
  const auto par = params(3, 0.3, InteractionSpec::power_law(1.5), 1);
  const PathContext ctx(par, PhononBasisSpec::fock(1));
  const std::uint32_t X = left_mask(3, {-3, -2});
  const ConfigPath p = connect_to_vacuum(X, 3);
  const CompositeBasis& L = ctx.basis();
  const cplx k = ctx.kernel()(L.index_of_mask(0, 0), L.index_of_mask(X, 0));
  ASSERT_GT(std::abs(k), 0.1);
  for (double tau : {1e-3, 1e-4}) {
    const cplx a = path_amplitude(ctx, p, tau).value;
    EXPECT_LE(std::abs(a / tau + k), 10.0 * tau);
  }
}

TEST(Amplitudes, SlopesMatchMoveCounts)
{
  const auto par = params(3, 0.3, InteractionSpec::power_law(1.5), 1);
  const PathContext ctx(par, PhononBasisSpec::fock(1));
  for (std::uint32_t X = 1; X < 8; ++X) {
    const ConfigPath p = connect_to_vacuum(X, 3);
    const SlopeFit f = leading_order_fit(ctx, p, {1e-2, 5e-3, 2.5e-3});
    EXPECT_TRUE(f.matches(0.1)) << "X=" << X << " slope=" << f.slope << " moves=" << f.moves;
  }
}

TEST(Amplitudes, ComposedAmplitudesNonzeroAtOne)
{
  const auto par = params(1, 0.5, InteractionSpec::power_law(1.5), 2);
  const PathContext ctx(par, PhononBasisSpec::fock(2));
  const auto amps = composed_amplitudes(ctx, {1e-2}, {0.5});
  EXPECT_EQ(amps.size(), 4u);
  for (const auto& a : amps) EXPECT_GT(a.relative, 1e-6);
}

TEST(Dyson, FirstTermIsDerivativeOfSemigroup)
{
  // D_1 = (w0/2) d/dλ e^{−β(G − λP)} at λ = 0, by central differences
  const auto par = params(1, 0.5, InteractionSpec::power_law(1.5), 2);
  const DysonContext dc(par, PhononBasisSpec::fock(2));
  EXPECT_NEAR(dc.w0(), 1.0, 1e-14);
  const double beta = 0.7, h = 1e-4;
  const MatC Pd = dc.P().cast<cplx>().asDiagonal();
  const MatC plus = DenseSemigroup(MatC(dc.G() - h * Pd)).matrix(beta);
  const MatC minus = DenseSemigroup(MatC(dc.G() + h * Pd)).matrix(beta);
  const MatC fd = (dc.w0() / 2.0) * (plus - minus) / (2.0 * h);
  EXPECT_LE(max_abs_dense(dc.dyson_term(1, beta) - fd), 1e-7 * max_abs_dense(fd));
  EXPECT_LE(max_abs_dense(dc.dyson_term(0, beta) - DenseSemigroup(dc.G()).matrix(beta)), 1e-14);
  EXPECT_THROW(dc.dyson_term(3, beta), std::invalid_argument);
}

TEST(Dyson, TruncatedSeriesApproachesReference)
{
  const auto par = params(1, 0.5, InteractionSpec::power_law(1.5), 2);
  const DysonContext dc(par, PhononBasisSpec::fock(2));
  const double beta = 0.2;
  const MatC exact = DenseSemigroup(dc.reference_hamiltonian()).matrix(beta);
  const double shift = std::exp(-beta * dc.reference_shift());
  MatC partial = MatC::Zero(exact.rows(), exact.cols());
  std::vector<double> err;
  for (int n = 0; n <= 2; ++n) {
    partial += dc.dyson_term(n, beta);
    err.push_back(max_abs_dense(shift * partial - exact) / max_abs_dense(exact));
  }
  EXPECT_LT(err[1], err[0]);
  EXPECT_LT(err[2], err[1]);
  EXPECT_LE(err[2], 1e-3);
}

TEST(Dyson, ReferenceIsDominatedAtOne)
{
  // e^{−βH̃} − e^{−βH̃_0} maps the reflection cone into itself
  const auto par = params(1, 0.5, InteractionSpec::power_law(1.5), 2);
  const DysonContext dc(par, PhononBasisSpec::fock(2));
  const ConeModel cone = reflection_cone(dc.vectorization());
  for (double beta : {0.2, 1.0}) {
    const MatC D = DenseSemigroup(dc.transformed()).matrix(beta) - DenseSemigroup(dc.reference_hamiltonian()).matrix(beta);
    const auto v = operator_preserves([&](const VecC& x) { return VecC(D * x); }, cone, 10, 1);
    EXPECT_TRUE(v.member) << beta << " " << v.worst_margin;
  }
}

TEST(Dyson, PathProjectorsPartitionConfigurations)
{
  const auto par = params(3, 0.3, InteractionSpec::power_law(1.5), 0);
  const DysonContext dc(par, PhononBasisSpec::fock(0));
  // with all times at zero the product of per-site projectors is the configuration projector 𝔼_X
  const double beta = 0.3;
  const MatC E = DenseSemigroup(dc.G()).matrix(beta);
  for (std::uint32_t X = 0; X < 8; ++X) {
    const MatC lhs = dc.path_projector(X, {0.0, 0.0, 0.0}, beta);
    const MatC rhs = dc.config_projector(X).cast<cplx>().asDiagonal() * E;
    EXPECT_LE(max_abs_dense(lhs - rhs), 1e-12);
  }
  EXPECT_THROW(dc.path_projector(0, {0.0}, beta), std::invalid_argument);
}
