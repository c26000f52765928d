#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "rpchain/fock.hpp"

using namespace rpchain;

namespace {

long binomial(int n, int k)
{
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Every ℓ-subset of {−ℓ..ℓ−1} as a sorted site list, by recursion, sorted lexicographically.
std::vector<std::vector<int>> brute_subsets(int ell)
{
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::function<void(int)> rec = [&](int next) {
    if (static_cast<int>(cur.size()) == ell) {
      out.push_back(cur);
      return;
    }
    for (int j = next; j < ell; ++j) {
      cur.push_back(j);
      rec(j + 1);
      cur.pop_back();
    }
  };
  rec(-ell);
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

TEST(Enumeration, Counts)
{
  EXPECT_EQ(enumerate_half_filled(1).size(), 2u);
  EXPECT_EQ(enumerate_half_filled(3).size(), 20u);
  for (int ell = 1; ell <= 6; ++ell) {
    const auto c = enumerate_half_filled(ell);
    EXPECT_EQ(static_cast<long>(c.size()), binomial(2 * ell, ell));
    for (const auto& x : c) EXPECT_EQ(x.count(), ell);
  }
  EXPECT_THROW(enumerate_half_filled(0), std::invalid_argument);
  EXPECT_THROW(enumerate_half_filled(16), std::invalid_argument);
}

TEST(Enumeration, LexicographicOrderMatchesBruteForce)
{
  for (int ell = 1; ell <= 4; ++ell) {
    const auto c = enumerate_half_filled(ell);
    const auto ref = brute_subsets(ell);
    ASSERT_EQ(c.size(), ref.size());
    for (std::size_t k = 0; k < c.size(); ++k) EXPECT_EQ(c[k].sites(), ref[k]);
  }
  const auto l1 = enumerate_half_filled(1);
  EXPECT_EQ(l1[0].sites(), std::vector<int>{-1});
  EXPECT_EQ(l1[1].sites(), std::vector<int>{0});
  EXPECT_EQ(enumerate_half_filled(2)[0].sites(), (std::vector<int>{-2, -1}));
}

TEST(Enumeration, HalvesRoundTrip)
{
  for (const auto& c : enumerate_half_filled(3)) {
    EXPECT_EQ(FermionConfig::from_halves(3, c.left_mask(), c.right_mask()), c);
    EXPECT_EQ(FermionConfig::from_sites(3, c.sites()), c);
  }
}

TEST(Sectors, QValues)
{
  EXPECT_EQ(sector_decompose(3).q_values, (std::vector<int>{-2, -1, 0, 1}));
  EXPECT_EQ(sector_decompose(1).q_values, (std::vector<int>{-1, 0}));
}

TEST(Sectors, LabelsAndCompleteness)
{
  for (int ell = 1; ell <= 5; ++ell) {
    const auto t = sector_decompose(ell);
    long total = 0;
    std::set<std::uint32_t> seen;
    for (int q : t.q_values) {
      for (std::uint32_t x : t.left_labels.at(q)) {
        // direct count on the left half: even sites +1, odd sites −1
        int qq = 0;
        for (int p = 0; p < ell; ++p)
          if ((x >> (ell - 1 - p)) & 1u) qq += ((p - ell) % 2 == 0) ? 1 : -1;
        EXPECT_EQ(qq, q);
        EXPECT_TRUE(seen.insert(x).second);
      }
      for (std::uint32_t y : t.right_labels.at(q)) {
        int qq = 0;
        for (int p = 0; p < ell; ++p)
          if ((y >> (ell - 1 - p)) & 1u) qq -= (p % 2 == 0) ? 1 : -1;
        EXPECT_EQ(qq, q);
      }
      total += static_cast<long>(t.left_labels.at(q).size() * t.right_labels.at(q).size());
    }
    EXPECT_EQ(total, binomial(2 * ell, ell));
  }
}

TEST(Sectors, BalancedBasisHasHalfFilledSize)
{
  for (int ell = 1; ell <= 4; ++ell)
    EXPECT_EQ(balanced_basis(ell, PhononBasisSpec::fock(0)).dim(), binomial(2 * ell, ell));
}

TEST(Hermite, Orthonormality)
{
  const auto h0 = hermite_position_transform(0, 1);
  EXPECT_EQ(h0.T.rows(), 1);
  EXPECT_EQ(h0.T.cols(), 1);
  EXPECT_LE(h0.residual, 1e-14);
  for (double omega : {0.5, 1.0, 2.0}) {
    const auto h = hermite_position_transform(3, 8, omega);
    EXPECT_LE(h.residual, 1e-10);
    for (int k = 0; k < 8; ++k) EXPECT_GT(h.T(0, k), 0.0);
  }
  EXPECT_THROW(hermite_position_transform(3, 3), std::invalid_argument);
}

TEST(Hermite, VacuumIsGaussian)
{
  const double omega = 1.7;
  const auto h = hermite_position_transform(0, 6, omega);
  for (int k = 0; k < 6; ++k) {
    const double x = h.x(k);
    EXPECT_NEAR(h.T(0, k), std::pow(omega / M_PI, 0.25) * std::exp(-0.5 * omega * x * x), 1e-12);
  }
}

TEST(CompositeBasis, IndexRoundTrip)
{
  for (const auto& ph : {PhononBasisSpec::fock(2), PhononBasisSpec::grid(3)}) {
    const auto b = half_filled_basis(2, ph);
    EXPECT_EQ(b.dim(), 6 * static_cast<Index>(std::pow(ph.d, 4)));
    for (Index i = 0; i < b.dim(); ++i) {
      const auto [s, f] = b.state_of(i);
      EXPECT_EQ(b.index_of(s, f), i);
      EXPECT_EQ(b.phonon_index_of(b.digits(f)), f);
      EXPECT_EQ(b.index_of_mask(b.mask_of(i), f), i);
    }
  }
}

TEST(CompositeBasis, FullBasisDimension)
{
  const auto b = full_basis(2, PhononBasisSpec::fock(1));
  EXPECT_TRUE(b.is_full_fock());
  EXPECT_EQ(b.dim(), 16 * 16);
  EXPECT_EQ(left_basis(3, PhononBasisSpec::fock(1)).dim(), 8 * 8);
  EXPECT_EQ(right_basis(3, PhononBasisSpec::fock(0)).first_site, 0);
}

TEST(CompositeBasis, RestrictVector)
{
  const auto ph = PhononBasisSpec::fock(1);
  const auto full = full_basis(1, ph), half = half_filled_basis(1, ph);
  VecC v = VecC::Zero(full.dim());
  for (Index i = 0; i < full.dim(); ++i) v(i) = static_cast<double>(i);
  const VecC r = restrict_vector(v, full, half);
  for (Index i = 0; i < half.dim(); ++i) {
    const auto [s, f] = half.state_of(i);
    EXPECT_EQ(r(i), v(full.index_of_mask(half.configs[s], f)));
  }
}
