#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "biortho/chgue.hpp"

using namespace biortho;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(WAlpha, Normalization) {
  const RealFn w0 = w_alpha(0.0, 0.0);
  for (double x : {0.0, 0.5, 3.0}) EXPECT_DOUBLE_EQ(w0(x), std::exp(-x));
  for (double alpha : {0.0, 0.5, 2.0}) {
    const QuadratureRule r = gauss_laguerre(40, alpha);
    EXPECT_NEAR(r.integrate_plain(w_alpha(alpha, 0.0)), 1.0, 1e-13);
  }
  EXPECT_NEAR(w_alpha_value(0.5, 0.7, 1.3), 0.60558316646413715985, 1e-14);
  EXPECT_THROW(w_alpha(-1.0, 0.0), DomainError);
}

TEST(WAlpha, ShiftRelation) {
  // w_{alpha+i}(x,0) = x^i w_alpha(x,0) Gamma(alpha+1)/Gamma(alpha+i+1)
  const double alpha = 0.5;
  for (int i = 1; i <= 3; ++i)
    for (double x : {0.3, 2.0, 7.0})
      EXPECT_NEAR(w_alpha_value(alpha + i, 0.0, x),
                  std::pow(x, i) * w_alpha_value(alpha, 0.0, x) * std::tgamma(alpha + 1) / std::tgamma(alpha + i + 1),
                  1e-15);
}

TEST(Pdf, SingleParticle) {
  const ChgueParams p{1.5, {0.0}};
  for (double x : {0.2, 1.0, 4.0}) {
    const double v = chgue_pdf(p, std::vector<double>{x});
    EXPECT_NEAR(v, std::pow(x, 1.5) * std::exp(-x) / std::tgamma(2.5), 1e-14);
  }
}

TEST(Pdf, NormalizedAndSymmetric) {
  const ChgueParams p{1.0, {0.5, 1.5}};
  const QuadratureRule r = gauss_laguerre(48, 1.0);
  const std::vector<QuadratureRule> rules(2, r);
  const double total =
      integrate_nd([&](std::span<const double> x) { return chgue_pdf(p, x); }, rules, Measure::Lebesgue);
  EXPECT_NEAR(total, 1.0, 1e-7);
  const std::vector<double> x{0.7, 2.3}, xs{2.3, 0.7};
  EXPECT_NEAR(chgue_pdf(p, x), chgue_pdf(p, xs), 1e-15);
  const ChgueParams ps{1.0, {1.5, 0.5}};
  EXPECT_NEAR(chgue_pdf(p, x), chgue_pdf(ps, x), 1e-15);
}

TEST(Pdf, CoincidentSourcesNeedConfluentPath) {
  EXPECT_THROW(chgue_pdf(ChgueParams{1.0, {0.4, 0.4}}, std::vector<double>{1.0, 2.0}), ConfluentError);
}

TEST(Pdf, ConfluentLimit) {
  const double beta = 0.8, eps = 1e-4, alpha = 1.0;
  const ChgueParams p{alpha, {beta + 2 * eps, beta + eps, beta}};
  const KernelData k = build_kernel(confluent_ensemble(ConfluentSpec{{beta}, Composition({3})}, alpha));
  for (const std::vector<double>& x : {std::vector<double>{0.4, 1.9, 3.1}, std::vector<double>{0.9, 2.2, 5.0}}) {
    const double generic = chgue_pdf(p, x), confluent = pdf_eval(k, x);
    EXPECT_NEAR(generic, confluent, 1e-3 * std::abs(confluent));
  }
}

TEST(Gram, ClosedFormStructure) {
  const ChgueParams p{1.0, {0.0, 0.7, 1.3}};
  const Matrix g = chgue_gram(p);
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g(1, 0), 0.0);
  EXPECT_EQ(g(2, 0), 0.0);
  const double expect = vandermonde(p.a) * std::exp(0.0 + 0.7 + 1.3);
  EXPECT_NEAR(det(g), expect, 1e-10 * std::abs(expect));
}

TEST(Gram, MatchesQuadrature) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int n = 2; n <= 4; ++n)
    for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
      ChgueParams p{alpha, {}};
      for (int i = 0; i < n; ++i) p.a.push_back(u(gen));
      const Matrix closed = chgue_gram(p), quad = quadrature_gram(chgue_ensemble(p));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) EXPECT_LE(rel(quad(i, j), closed(i, j)), 1e-8);
    }
}

TEST(Kernel, MatchesGenericPath) {
  const ChgueParams p{1.0, {0.2, 0.7, 1.3}};
  const KernelData k = build_kernel(chgue_ensemble(p));
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.05, 6.0);
  for (int t = 0; t < 5; ++t) {
    const double x = u(gen), y = u(gen);
    EXPECT_LE(rel(chgue_kernel(p, x, y), kernel_eval(k, x, y)), 1e-7) << x << " " << y;
  }
  EXPECT_NEAR(chgue_kernel(ChgueParams{1.0, {0.3, 1.1}}, 0.6, 1.9), 0.365655800339863937, 1e-13);
}

TEST(Kernel, ClosedMomentsMatchQuadrature) {
  const ChgueParams p{0.5, {0.2, 0.9, 1.6, 2.4}};
  for (double x : {0.0, 1.0, 4.0, 8.0})
    for (double y : {0.5, 3.0, 8.0}) {
      const double a = chgue_kernel(p, x, y), b = chgue_kernel_quadrature(p, x, y);
      EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(b)));
      EXPECT_NEAR(b, chgue_kernel_quadrature(p, x, y, 2 * (2 * 4 + 40)), 1e-9 * std::max(1.0, std::abs(b)));
    }
}

TEST(Kernel, StableFarIntoTheTail) {
  const ChgueParams p{1.0, {0.2, 0.7, 1.3}};
  const KernelData k = build_kernel(chgue_ensemble(p));
  for (double x : {40.0, 100.0, 200.0}) {
    const double v = chgue_kernel(p, x, x);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(rel(v, kernel_eval(k, x, x)), 1e-8) << x;
  }
}

TEST(Kernel, SmallSourcesApproachLaguerreKernel) {
  const ChgueParams p{1.0, {1e-5, 2e-5, 3e-5}};
  for (double x : {0.5, 2.0})
    for (double y : {1.0, 4.0}) EXPECT_NEAR(chgue_kernel(p, x, y), laguerre_cd_kernel(3, 1.0, x, y), 1e-4);
}

TEST(Kernel, TraceIsN) {
  const ChgueParams p{1.0, {0.2, 0.7, 1.3}};
  const QuadratureRule r = gauss_laguerre(64, 1.0);
  EXPECT_NEAR(r.integrate_plain([&](double x) { return chgue_kernel(p, x, x); }), 3.0, 1e-6);
}

TEST(Kernel, CoincidentSourcesRejected) {
  EXPECT_THROW(chgue_kernel(ChgueParams{1.0, {0.5, 0.5}}, 1.0, 2.0), ConfluentError);
  EXPECT_THROW(chgue_kernel(ChgueParams{1.0, {0.5, 0.7}}, -1.0, 2.0), DomainError);
}

TEST(TypeOne, Moments) {
  const ChgueParams p{1.0, {0.2, 0.7, 1.3}};
  const ChgueTypeOne q = chgue_type_one(p);
  const QuadratureRule r = gauss_laguerre(64, 1.0);
  for (int j = 0; j < 3; ++j)
    EXPECT_NEAR(r.integrate_plain([&](double x) { return std::pow(x, j) * q(x); }), j == 2 ? 1.0 : 0.0, 1e-9);
}

TEST(TypeOne, SeriesAgreesWithResidueSum) {
  const ChgueTypeOne q(1.0, {0.3, 1.1, 1.9});
  for (double x : {0.1, 0.8, 3.0, 9.0}) EXPECT_NEAR(q.series(x), q.residue_sum(x), 1e-13);
  EXPECT_NEAR(ChgueTypeOne(1.0, {0.3, 1.1})(0.8), -0.148674861378037924, 1e-15);
}

TEST(TypeOne, SingleSource) {
  const ChgueTypeOne q = chgue_type_one(ChgueParams{1.0, {0.7}});
  EXPECT_NEAR(q(2.0), 0.25320176312228453796, 1e-15);
}

TEST(TypeOne, CoincidentSourcesUseSeries) {
  // all equal: the divided difference becomes a derivative
  const ChgueTypeOne q = chgue_type_one(ChgueParams{1.0, {0.5, 0.5}});
  const ChgueTypeOne qn(1.0, {0.5 + 1e-4, 0.5 - 1e-4});
  for (double x : {0.5, 2.0}) EXPECT_NEAR(q(x), qn.residue_sum(x), 1e-7);
}

TEST(TypeOne, LaguerreLimit) {
  // Q -> (-1)^{N-1}/(N+alpha-1)! x^alpha e^{-x} L^alpha_{N-1}(x)
  const int n = 3;
  for (double alpha : {0.0, 1.0}) {
    const ChgueTypeOne q = chgue_type_one(ChgueParams{alpha, {1e-5, 1e-5, 1e-5}});
    for (double x : {0.5, 2.0, 5.0}) {
      const double lim = std::pow(x, alpha) * std::exp(-x) * laguerre(n - 1, alpha, x) / std::tgamma(n + alpha);
      EXPECT_NEAR(q(x), lim, 1e-4);
    }
  }
}

TEST(TypeTwo, LaguerreLimitAndMonic) {
  const LaguerreSeries p = chgue_type_two(ChgueParams{0.0, {0.0, 0.0, 0.0}});
  for (double x : {0.0, 1.0, 5.0, 10.0}) EXPECT_NEAR(p(x), -6.0 * laguerre(3, 0.0, x), 1e-12);
  const LaguerreSeries p4 = chgue_type_two(ChgueParams{0.5, {0.3, 1.2, 0.8, 2.0}});
  const std::vector<double> c = p4.monomial_coefficients();
  ASSERT_EQ(c.size(), 5u);
  EXPECT_NEAR(c.back(), 1.0, 1e-14);
}

TEST(TypeTwo, OrthogonalToEachWeight) {
  const ChgueParams p{1.0, {0.2, 0.7, 1.3}};
  const LaguerreSeries poly = chgue_type_two(p);
  const QuadratureRule r = gauss_laguerre(64, 1.0);
  for (double a : p.a) EXPECT_NEAR(r.integrate_plain([&](double x) { return w_alpha_value(1.0, a, x) * poly(x); }), 0.0, 1e-8);
}

TEST(TypeTwo, LinearApproachToLaguerreLimit) {
  double prev = 0.0;
  for (double eps : {1e-3, 5e-4, 2.5e-4}) {
    const double d = std::abs(chgue_type_two(ChgueParams{1.0, {eps, eps, eps}})(2.0) + 6.0 * laguerre(3, 1.0, 2.0));
    if (prev > 0.0) {
      EXPECT_NEAR(prev / d, 2.0, 0.05);
    }
    prev = d;
  }
}

TEST(KernelSum, KernelEqualsSumOfProducts) {
  const KernelSum two = kernel_sum_check(ChgueParams{1.0, {1.3, 0.4}}, 0.8, 2.1);
  EXPECT_NEAR(two.kernel, two.sum, 1e-7);
  const KernelSum one = kernel_sum_check(ChgueParams{1.0, {0.9}}, 0.8, 2.1);
  EXPECT_NEAR(one.sum, w_alpha_value(1.0, 0.9, 2.1) * std::exp(-0.9), 1e-15);
  EXPECT_NEAR(one.kernel, one.sum, 1e-12);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.05, 6.0);
  const ChgueParams p{1.0, {1.7, 0.9, 0.25}};
  for (int t = 0; t < 5; ++t) {
    const KernelSum ks = kernel_sum_check(p, u(gen), u(gen));
    EXPECT_LE(rel(ks.sum, ks.kernel), 1e-6);
  }
  EXPECT_THROW(kernel_sum_check(ChgueParams{1.0, {0.4, 1.3}}, 0.8, 2.1), DomainError);
}

TEST(Confluent, WeightMapping) {
  auto [ws0, c0] = confluent_weights(ConfluentSpec{{0.0}, Composition({4})}, 1.0);
  EXPECT_EQ(ws0.weights.size(), 1u);
  EXPECT_EQ(c0, Composition({4}));
  auto [ws1, c1] = confluent_weights(ConfluentSpec{{0.7}, Composition({3})}, 1.0);
  EXPECT_EQ(ws1.weights.size(), 2u);
  EXPECT_EQ(c1, Composition({2, 1}));
  EXPECT_DOUBLE_EQ(ws1.weights[1](1.5), w_alpha_value(2.0, 0.7, 1.5));
  auto [ws2, c2] = confluent_weights(ConfluentSpec{{1.2, 0.0}, Composition({2, 3})}, 0.5);
  EXPECT_EQ(c2, Composition({1, 1, 3}));
  EXPECT_THROW(confluent_weights(ConfluentSpec{{0.2, 0.7}, Composition({1, 1})}, 1.0), DomainError);
}

TEST(Confluent, GroupSources) {
  const std::vector<double> a{0.0, 0.9, 0.0, 0.9, 0.3};
  const ConfluentSpec c = group_sources(a);
  EXPECT_EQ(c.b, (std::vector<double>{0.9, 0.3, 0.0}));
  EXPECT_EQ(c.m, Composition({2, 1, 2}));
}

TEST(RankDecomposition, MatchesConfluentKernel) {
  const double alpha = 1.0;
  for (const auto& [a, r] : {std::pair{std::vector<double>{0.9, 0.0, 0.0}, 1},
                             std::pair{std::vector<double>{1.2, 0.5, 0.0, 0.0}, 2}}) {
    const ChgueParams p{alpha, a};
    const KernelData k = build_kernel(confluent_ensemble(group_sources(a), alpha));
    const RankDecomposition d = rank_decomposition(p, r, 0.5, 1.4);
    EXPECT_LE(rel(d.full, kernel_eval(k, 0.5, 1.4)), 1e-6);
    EXPECT_DOUBLE_EQ(d.full, d.unperturbed + d.correction);
  }
}

TEST(RankDecomposition, RankZeroIsLaguerreKernel) {
  const RankDecomposition d = rank_decomposition(ChgueParams{1.0, {0.0, 0.0, 0.0}}, 0, 0.5, 1.4);
  EXPECT_EQ(d.correction, 0.0);
  EXPECT_EQ(d.full, laguerre_cd_kernel(3, 1.0, 0.5, 1.4));
}

TEST(RankDecomposition, Validation) {
  EXPECT_THROW(rank_decomposition(ChgueParams{1.0, {0.5, 0.9, 0.0}}, 2, 0.5, 1.4), DomainError);
  EXPECT_THROW(rank_decomposition(ChgueParams{1.0, {0.5, 0.1, 0.0}}, 1, 0.5, 1.4), DomainError);
  EXPECT_THROW(rank_decomposition(ChgueParams{1.0, {0.5, 0.1}}, 2, 0.5, 1.4), DomainError);
}

TEST(LaguerreKernel, DiagonalBranchIsContinuous) {
  const double x = 2.0;
  EXPECT_NEAR(laguerre_cd_kernel(4, 1.0, x, x), laguerre_cd_kernel(4, 1.0, x, x + 1e-3), 2e-3);
  EXPECT_NEAR(laguerre_cd_kernel(4, 1.0, x, x + 2e-4), laguerre_cd_kernel(4, 1.0, x, x + 1e-5), 1e-3);
}
