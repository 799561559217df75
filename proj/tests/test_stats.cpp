#include <cmath>
#include <random>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "top/stats.hpp"

using namespace top;

namespace {

// Strict order unless both values have saturated at a floating-point bound.
::testing::AssertionResult Below(double lo, double hi) {
  const bool saturated = (lo >= 1.0 - 1e-14 && hi >= lo) || (hi <= 1e-300 && lo <= hi);
  if (lo < hi || saturated) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure() << lo << " is not below " << hi;
}

}  // namespace

TEST(RegIncBeta, SymmetricHalf) { EXPECT_NEAR(reg_inc_beta(0.5, 2, 2), 0.5, 1e-12); }

TEST(RegIncBeta, FullInterval) { EXPECT_DOUBLE_EQ(reg_inc_beta(1.0, 3.7, 0.2), 1.0); }

TEST(RegIncBeta, ClosedFormA1) {
  // I_x(1, b) = 1 - (1 - x)^b
  EXPECT_NEAR(reg_inc_beta(0.2, 1, 11), 1.0 - std::pow(0.8, 11), 1e-12);
  EXPECT_NEAR(reg_inc_beta(0.2, 1, 11), 0.9141006541, 1e-10);
}

TEST(RegIncBeta, DomainErrors) {
  EXPECT_THROW(reg_inc_beta(-0.1, 1, 1), DomainError);
  EXPECT_THROW(reg_inc_beta(1.1, 1, 1), DomainError);
  EXPECT_THROW(reg_inc_beta(0.5, 0, 1), DomainError);
  EXPECT_THROW(reg_inc_beta(0.5, 1, -2), DomainError);
  EXPECT_THROW(reg_inc_beta(std::nan(""), 1, 1), DomainError);
}

TEST(RegIncBeta, MatchesBoostIbeta) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::uniform_real_distribution<double> lab(std::log(0.05), std::log(300.0));
  for (int i = 0; i < 1000; ++i) {
    const double x = ux(rng), a = std::exp(lab(rng)), b = std::exp(lab(rng));
    EXPECT_NEAR(reg_inc_beta(x, a, b), boost::math::ibeta(a, b, x), 1e-10) << x << " " << a << " " << b;
  }
}

TEST(RegIncBeta, ReflectionIdentity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uab(0.01, 60.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = ux(rng), a = uab(rng), b = uab(rng);
    EXPECT_NEAR(reg_inc_beta(x, a, b) + reg_inc_beta(1.0 - x, b, a), 1.0, 1e-9);
  }
}

TEST(FutilityProb, PriorTailUniform) {
  for (double phi : {0.1, 0.3, 0.77}) EXPECT_NEAR(futility_prob(0, 0, phi, {1, 1}), phi, 1e-12);
}

TEST(FutilityProb, ClosedForms) {
  EXPECT_NEAR(futility_prob(0, 10, 0.2, {1, 1}), 1.0 - std::pow(0.8, 11), 1e-12);
  EXPECT_NEAR(futility_prob(10, 10, 0.2, {1, 1}), std::pow(0.2, 11), 1e-18);
  EXPECT_NEAR(futility_prob(10, 10, 0.2, {1, 1}), 2.048e-8, 1e-12);
}

TEST(FutilityProb, Errors) {
  EXPECT_THROW(futility_prob(3, 2, 0.2, {1, 1}), DomainError);
  EXPECT_THROW(futility_prob(-1, 2, 0.2, {1, 1}), DomainError);
  EXPECT_THROW(futility_prob(1, 2, 1.5, {1, 1}), DomainError);
  EXPECT_DOUBLE_EQ(futility_prob(1, 2, 0.0, {1, 1}), 0.0);
  EXPECT_THROW(futility_prob(1, 2, 0.2, {0, 1}), DomainError);
}

TEST(FutilityProb, MonotoneInXAndM) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double phi = 0.05 + 0.9 * u(rng);
    const BetaPrior prior{phi, 1 - phi};
    const double m = 1 + 59 * u(rng);
    const double x1 = m * u(rng), x2 = x1 + (m - x1) * (0.05 + 0.95 * u(rng));
    EXPECT_TRUE(Below(futility_prob(x2, m, phi, prior), futility_prob(x1, m, phi, prior)));
    const double x = m * u(rng), m2 = m + 0.05 + 5 * u(rng);
    EXPECT_TRUE(Below(futility_prob(x, m, phi, prior), futility_prob(x, m2, phi, prior)));
  }
}

TEST(FutilityProb, FractionalBracketing) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const int lo = 1 + static_cast<int>(u(rng) * 40);
    const double m = lo + 0.01 + 0.98 * u(rng);
    const int x = static_cast<int>(u(rng) * (lo + 1));
    const double phi = 0.1 + 0.8 * u(rng);
    const BetaPrior prior{phi, 1 - phi};
    const double f = futility_prob(x, m, phi, prior);
    EXPECT_TRUE(Below(futility_prob(x, lo, phi, prior), f));
    EXPECT_TRUE(Below(f, futility_prob(x, lo + 1, phi, prior)));
  }
}

TEST(ExcessProb, Examples) {
  EXPECT_NEAR(excess_prob(0, 0, 0.3, {1, 1}), 0.7, 1e-12);
  EXPECT_NEAR(excess_prob(5, 5, 0.3, {1, 1}), 1.0 - std::pow(0.3, 6), 1e-12);
  EXPECT_NEAR(excess_prob(5, 5, 0.3, {1, 1}), 0.999271, 1e-6);
}

TEST(ExcessProb, ComplementAndMonotone) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double phi = 0.05 + 0.9 * u(rng), m = 40 * u(rng), x = m * u(rng);
    const BetaPrior prior{0.2 + u(rng), 0.2 + u(rng)};
    EXPECT_NEAR(excess_prob(x, m, phi, prior) + futility_prob(x, m, phi, prior), 1.0, 1e-12);
    const double x2 = x + (m - x) * u(rng);
    if (x2 > x + 1e-6) {
      EXPECT_TRUE(Below(excess_prob(x, m, phi, prior), excess_prob(x2, m, phi, prior)));
    }
  }
}

TEST(Dirichlet, TwoCategoryIdentity) {
  const std::vector<double> counts{3.0, 8.5};
  const DirichletPrior prior{{0.4, 0.6}};
  const std::vector<std::size_t> subset{0};
  EXPECT_NEAR(dirichlet_marginal_tail(counts, prior, subset, 0.3), futility_prob(3.0, 11.5, 0.3, {0.4, 0.6}), 1e-14);
}

TEST(Dirichlet, FourCategoryAggregation) {
  const std::vector<double> counts{1, 2, 3, 4};
  const DirichletPrior prior{{0.25, 0.25, 0.25, 0.25}};
  const std::vector<std::size_t> subset{0, 1};
  EXPECT_NEAR(dirichlet_marginal_tail(counts, prior, subset, 0.5), boost::math::ibeta(3.5, 7.5, 0.5), 1e-12);
}

TEST(Dirichlet, RejectsEmptyFullAndDuplicateSubsets) {
  const std::vector<double> counts{1, 2, 3, 4};
  const DirichletPrior prior{{0.25, 0.25, 0.25, 0.25}};
  EXPECT_THROW(dirichlet_marginal_tail(counts, prior, std::vector<std::size_t>{0, 1, 2, 3}, 0.5), DomainError);
  EXPECT_THROW(dirichlet_marginal_tail(counts, prior, std::vector<std::size_t>{}, 0.5), DomainError);
  EXPECT_THROW(dirichlet_marginal_tail(counts, prior, std::vector<std::size_t>{1, 1}, 0.5), DomainError);
  EXPECT_THROW(dirichlet_marginal_tail(counts, prior, std::vector<std::size_t>{4}, 0.5), DomainError);
}

TEST(Dirichlet, AggregationEqualsBetaTail) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t K = 2 + static_cast<std::size_t>(u(rng) * 4);
    std::vector<double> counts(K), alpha(K);
    for (std::size_t k = 0; k < K; ++k) {
      counts[k] = 10 * u(rng);
      alpha[k] = 0.05 + u(rng);
    }
    std::vector<std::size_t> subset;
    for (std::size_t k = 0; k < K; ++k)
      if (u(rng) < 0.5) subset.push_back(k);
    if (subset.empty() || subset.size() == K) continue;
    double in_a = 0, out_a = 0, x = 0, m = 0;
    for (std::size_t k = 0; k < K; ++k) {
      m += counts[k];
      const bool in = std::find(subset.begin(), subset.end(), k) != subset.end();
      (in ? in_a : out_a) += alpha[k];
      if (in) x += counts[k];
    }
    const double phi = 0.05 + 0.9 * u(rng);
    EXPECT_NEAR(dirichlet_marginal_tail(counts, DirichletPrior{alpha}, subset, phi),
                futility_prob(x, m, phi, {in_a, out_a}), 1e-12);
  }
}

TEST(Priors, Validation) {
  EXPECT_THROW(BetaPrior({0, 1}).validate(), DomainError);
  EXPECT_THROW(DirichletPrior{{1.0}}.validate(), DomainError);
  EXPECT_THROW(DirichletPrior({{1.0, -1.0}}).validate(), DomainError);
  const auto c = BetaPrior::centered(0.2);
  EXPECT_DOUBLE_EQ(c.a0, 0.2);
  EXPECT_DOUBLE_EQ(c.b0, 0.8);
}
