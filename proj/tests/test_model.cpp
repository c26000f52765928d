#include <gtest/gtest.h>

#include <cmath>

#include "rpchain/model.hpp"

using namespace rpchain;

namespace {

std::vector<InteractionSpec> all_kinds()
{
  return {InteractionSpec::none_kind(), InteractionSpec::nearest(2.0), InteractionSpec::power_law(1.5),
          InteractionSpec::power_law(0.7, 2.5), InteractionSpec::from_table({{-2, 0.3}, {2, 0.3}, {-1, 1.1}, {1, 1.1}})};
}

// Smallest eigenvalue of the Hankel matrix |i+j+1|^{-α}, i,j ∈ {−ℓ..−1}, by Jacobi rotations.
double hankel_min_eig(int ell, double alpha)
{
  std::vector<std::vector<double>> A(ell, std::vector<double>(ell));
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < ell; ++b) A[a][b] = std::pow(std::abs((a - ell) + (b - ell) + 1.0), -alpha);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < ell; ++p)
      for (int q = p + 1; q < ell; ++q) off += A[p][q] * A[p][q];
    if (off < 1e-30) break;
    for (int p = 0; p < ell; ++p)
      for (int q = p + 1; q < ell; ++q) {
        if (std::abs(A[p][q]) < 1e-300) continue;
        const double th = 0.5 * std::atan2(2 * A[p][q], A[q][q] - A[p][p]);
        const double c = std::cos(th), s = std::sin(th);
        for (int k = 0; k < ell; ++k) {
          const double akp = A[k][p], akq = A[k][q];
          A[k][p] = c * akp - s * akq;
          A[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < ell; ++k) {
          const double apk = A[p][k], aqk = A[q][k];
          A[p][k] = c * apk - s * aqk;
          A[q][k] = s * apk + c * aqk;
        }
      }
  }
  double m = A[0][0];
  for (int k = 1; k < ell; ++k) m = std::min(m, A[k][k]);
  return m;
}

} // namespace

TEST(Interaction, NearestValues)
{
  const auto s = InteractionSpec::nearest(2.0);
  EXPECT_EQ(u_of(s, -1), 2.0);
  EXPECT_EQ(u_of(s, 1), 2.0);
  EXPECT_EQ(u_of(s, 2), 0.0);
  EXPECT_EQ(w_of(s, 1), 2.0);
}

TEST(Interaction, PowerLawValues)
{
  const auto s = InteractionSpec::power_law(1.5);
  EXPECT_NEAR(u_of(s, 2), -1.0 / (2.0 * std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(u_of(s, 2), -0.35355339059327373, 1e-15);
  EXPECT_NEAR(w_of(s, 3), 1.0 / (3.0 * std::sqrt(3.0)), 1e-15);
  EXPECT_NEAR(w_of(s, 3), 0.19245008972987526, 1e-15);
  // every W(j) of the power law is positive
  for (long j = 1; j < 20; ++j) EXPECT_GT(w_of(s, j), 0.0);
}

TEST(Interaction, ZeroAtOriginAndSymmetric)
{
  for (const auto& s : all_kinds()) {
    EXPECT_EQ(u_of(s, 0), 0.0);
    EXPECT_EQ(w_of(s, 0), 0.0);
    for (long j = 1; j <= 12; ++j) {
      EXPECT_EQ(u_of(s, j), u_of(s, -j)) << to_string(s.kind) << " j=" << j;
      EXPECT_EQ(w_of(s, j), w_of(s, -j)) << to_string(s.kind) << " j=" << j;
    }
  }
}

TEST(Interaction, TableRejectsAsymmetryAndOrigin)
{
  EXPECT_THROW(InteractionSpec::from_table({{1, 1.0}, {-1, 0.5}}), std::invalid_argument);
  EXPECT_THROW(InteractionSpec::from_table({{1, 1.0}}), std::invalid_argument);
  EXPECT_THROW(InteractionSpec::from_table({{0, 1.0}}), std::invalid_argument);
  const auto s = InteractionSpec::from_table({{3, 0.25}, {-3, 0.25}});
  EXPECT_EQ(u_of(s, 3), 0.25);
  EXPECT_EQ(u_of(s, 4), 0.0);
  EXPECT_THROW(InteractionSpec::nearest(-1.0), std::invalid_argument);
  EXPECT_THROW(InteractionSpec::power_law(0.0), std::invalid_argument);
}

TEST(ModelParams, Validation)
{
  ModelParams p;
  EXPECT_NO_THROW(p.validate());
  p.t = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.omega = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.ell = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.n_max = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.ell = 2;
  EXPECT_THROW(p.require_odd(), std::invalid_argument);
  p.ell = 3;
  EXPECT_NO_THROW(p.require_odd());
  EXPECT_EQ(p.sites(), 6);
}

TEST(ConditionB, NearestNeighbour)
{
  const auto b1 = check_condition_B(InteractionSpec::nearest(1.0), 3, false);
  const auto b2 = check_condition_B(InteractionSpec::nearest(1.0), 3, true);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) EXPECT_EQ(b1.matrix(a, b), (a == 2 && b == 2) ? 1.0 : 0.0);
  EXPECT_NEAR(b1.min_eig, 0.0, 1e-15);
  EXPECT_TRUE(b1.holds);
  EXPECT_FALSE(b2.holds);
}

TEST(ConditionB, NoInteraction)
{
  const auto b1 = check_condition_B(InteractionSpec::none_kind(), 3, false);
  EXPECT_TRUE(b1.matrix.isZero(0.0));
  EXPECT_TRUE(b1.holds);
  EXPECT_FALSE(check_condition_B(InteractionSpec::none_kind(), 3, true).holds);
}

TEST(ConditionB, PowerLawSweep)
{
  for (int ell : {1, 3, 5, 7})
    for (double alpha : {0.5, 1.0, 1.5, 2.5}) {
      const auto spec = InteractionSpec::power_law(alpha);
      const auto b2 = check_condition_B(spec, ell, true);
      const auto b1 = check_condition_B(spec, ell, false);
      EXPECT_TRUE(b2.holds) << ell << " " << alpha;
      EXPECT_TRUE(!b2.holds || b1.holds);
      EXPECT_NEAR(b2.min_eig, hankel_min_eig(ell, alpha), 1e-12 * std::max(1.0, b2.matrix.norm()));
      EXPECT_GT(hankel_min_eig(ell, alpha), 0.0);
      for (int a = 0; a < ell; ++a)
        for (int b = 0; b < ell; ++b) EXPECT_EQ(b2.matrix(a, b), b2.matrix(b, a));
    }
}

TEST(ConditionB, ImplicationOnAllKinds)
{
  for (const auto& s : all_kinds())
    for (int ell : {1, 2, 3, 4, 5}) {
      const bool b2 = check_condition_B(s, ell, true).holds;
      const bool b1 = check_condition_B(s, ell, false).holds;
      EXPECT_TRUE(!b2 || b1);
    }
}

TEST(ConditionC, Classification)
{
  const auto p = check_condition_C(InteractionSpec::power_law(1.5));
  EXPECT_TRUE(p.c1_holds);
  EXPECT_NEAR(p.c1_sum, 2.6123753486854883, 1e-12); // ζ(3/2)
  EXPECT_TRUE(p.c2_holds);
  const auto n = check_condition_C(InteractionSpec::nearest(1.0));
  EXPECT_TRUE(n.c1_holds);
  EXPECT_DOUBLE_EQ(n.c1_sum, 1.0);
  EXPECT_FALSE(n.c2_holds);
  const auto d = check_condition_C(InteractionSpec::power_law(0.9));
  EXPECT_FALSE(d.c1_holds);
}
