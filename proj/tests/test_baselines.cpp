#include <chrono>
#include <optional>
#include <random>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "top/baselines.hpp"

using namespace top;

namespace {

double pmf(int n, double p, int x) { return boost::math::pdf(boost::math::binomial_distribution<double>(n, p), x); }

double tail_above(int n, double p, int j) {  // P(X > j)
  if (j < 0) return 1.0;
  if (j >= n) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::binomial_distribution<double>(n, p), j));
}

double reject(int n1, int r1, int n, int r, double p) {
  double s = 0;
  for (int x1 = r1 + 1; x1 <= n1; ++x1) s += pmf(n1, p, x1) * tail_above(n - n1, p, r - x1);
  return s;
}

double en0(int n1, int r1, int n, double p0) {
  const double pet = 1.0 - tail_above(n1, p0, r1);
  return n1 + (1 - pet) * (n - n1);
}

void expect_valid(const SimonDesign& d, double p0, double p1, double alpha, double beta) {
  EXPECT_LT(d.n1, d.n);
  EXPECT_LT(d.r1, d.r);
  const double a = reject(d.n1, d.r1, d.n, d.r, p0);
  EXPECT_LE(a, alpha);
  EXPECT_GE(reject(d.n1, d.r1, d.n, d.r, p1), 1 - beta);
  EXPECT_NEAR(d.type1, a, 1e-12);
  EXPECT_NEAR(d.en0, en0(d.n1, d.r1, d.n, p0), 1e-9);
  // r is the smallest final bound that keeps the type I error
  EXPECT_GT(reject(d.n1, d.r1, d.n, d.r - 1, p0), alpha);
}

}  // namespace

TEST(Simon, ReproducesPublishedSizes) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = simon_search(0.3, 0.5, 0.1, 0.1);
  const auto b = simon_search(0.45, 0.65, 0.1, 0.15);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);
  EXPECT_EQ(a.optimal.n1, 22);
  EXPECT_EQ(a.optimal.n, 46);
  EXPECT_EQ(b.optimal.n1, 20);
  EXPECT_EQ(b.optimal.n, 40);
  expect_valid(a.optimal, 0.3, 0.5, 0.1, 0.1);
  expect_valid(b.optimal, 0.45, 0.65, 0.1, 0.15);
  expect_valid(a.minimax, 0.3, 0.5, 0.1, 0.1);
  EXPECT_LE(a.minimax.n, a.optimal.n);
  EXPECT_GE(a.minimax.en0, a.optimal.en0);
  EXPECT_EQ(a.optimal.flavor, SimonFlavor::optimal);
  EXPECT_EQ(a.minimax.flavor, SimonFlavor::minimax);
  EXPECT_NEAR(simon_reject_prob(a.optimal, 0.3), a.optimal.type1, 1e-15);
}

TEST(Simon, MatchesIndependentExhaustiveSearch) {
  const double p0 = 0.1, p1 = 0.35, alpha = 0.1, beta = 0.2;
  const int n_max = 24;
  std::optional<double> best_en;
  int best_n = 1 << 30;
  for (int n = 2; n <= n_max; ++n)
    for (int n1 = 1; n1 < n; ++n1)
      for (int r1 = 0; r1 < n1; ++r1)
        for (int r = r1 + 1; r < n; ++r) {
          if (reject(n1, r1, n, r, p0) > alpha || reject(n1, r1, n, r, p1) < 1 - beta) continue;
          const double e = en0(n1, r1, n, p0);
          if (!best_en || e < *best_en) best_en = e;
          best_n = std::min(best_n, n);
        }
  ASSERT_TRUE(best_en);
  const auto got = simon_search(p0, p1, alpha, beta, n_max);
  EXPECT_NEAR(got.optimal.en0, *best_en, 1e-9);
  EXPECT_EQ(got.minimax.n, best_n);
}

TEST(Simon, Errors) {
  EXPECT_THROW(simon_search(0.5, 0.5, 0.1, 0.1), DomainError);
  EXPECT_THROW(simon_search(0.6, 0.5, 0.1, 0.1), DomainError);
  EXPECT_THROW(simon_search(0.3, 0.5, 0.0, 0.1), DomainError);
  EXPECT_THROW(simon_search(0.3, 0.35, 0.01, 0.01, 10), InfeasibleError);
}

TEST(ThallSimon, ZeroPiNeverStops) {
  const ThallSimonRule rule{0.0, 0.0, {0.3, 0.7}, {10, 20}};
  for (int n : {1, 10, 30})
    for (int x = 0; x <= n; ++x) EXPECT_EQ(ts_stop(x, n, 0, rule, 0.3), TsAction::continue_trial);
}

TEST(ThallSimon, AllRespondersContinue) {
  const BetaPrior prior{0.3, 0.7};
  for (int n : {5, 10, 20}) {
    const double bound = 1 - reg_inc_beta(0.3, prior.a0 + n, prior.b0);
    for (double pi : {0.1, 0.5, bound - 1e-9}) {
      if (pi <= 0) continue;
      EXPECT_EQ(ts_stop(n, n, 0, {0.0, pi, prior, {n}}, 0.3), TsAction::continue_trial) << n << " " << pi;
    }
  }
}

TEST(ThallSimon, ComplementOfFutility) {
  const BetaPrior prior{0.2, 0.8};
  for (double c : {0.05, 0.3, 0.7})
    for (int n : {10, 25})
      for (int x = 0; x <= n; ++x) {
        const bool stops = ts_stop(x, n, 0, {0.0, c, prior, {n}}, 0.2) == TsAction::stop;
        EXPECT_EQ(stops, futility_prob(x, n, 0.2, prior) > 1 - c) << c << " " << n << " " << x;
      }
}

TEST(ThallSimon, AgreesWithStopRuleAtEachLook) {
  const auto s = fixtures::example1();
  const auto& p = fixtures::kExample1Params;
  for (int n : s.looks) {
    const ThallSimonRule rule{0.0, 1.0 - cutoff(n, s.N, p), s.marginal_prior(0), s.looks};
    for (int x = 0; x <= n; ++x) {
      const InterimSnapshot snap{n, {{x, n, 0, static_cast<double>(n)}}};
      EXPECT_EQ(ts_stop(x, n, 0, rule, 0.2) == TsAction::stop, stop_rule(snap, s, p) == TrialAction::stop_futility)
          << n << " " << x;
    }
  }
}

TEST(ThallSimon, Errors) {
  const ThallSimonRule rule{0.0, 0.5, {0.3, 0.7}, {10}};
  EXPECT_THROW(ts_stop(3, 10, 1, rule, 0.3), DomainError);
  EXPECT_THROW(ts_stop(11, 10, 0, rule, 0.3), DomainError);
  EXPECT_THROW(ts_stop(3, 10, 0, {0.0, 1.0, {0.3, 0.7}, {10}}, 0.3), DomainError);
  EXPECT_THROW(ts_stop(3, 10, 0, {-0.1, 0.5, {0.3, 0.7}, {10}}, 0.3), DomainError);
}

TEST(BoundaryOc, EqualsExactOcForTheSameRule) {
  const auto s = fixtures::example1();
  const auto& p = fixtures::kExample1Params;
  for (double rate : {0.2, 0.3, 0.4}) {
    const std::vector<double> cells{rate, 1 - rate};
    const auto dp = exact_oc(s, p, cells);
    const auto bo = boundary_oc(s.looks, rate, [&](int n, int x) {
      return stop_rule(InterimSnapshot{n, {{x, n, 0, static_cast<double>(n)}}}, s, p) != TrialAction::continue_trial;
    });
    EXPECT_NEAR(bo.accept_prob, dp.accept_prob, 1e-12);
    EXPECT_NEAR(bo.expected_n, dp.expected_n, 1e-10);
  }
}

TEST(BoundaryOc, MatchesEnumeration) {
  const std::vector<int> looks{3, 6, 9};
  auto stops = [](int n, int x) { return x < n / 3; };
  const double p = 0.3;
  double accept = 0, en = 0;
  for (int code = 0; code < (1 << 9); ++code) {
    double prob = 1;
    for (int i = 0; i < 9; ++i) prob *= (code >> i & 1) ? p : 1 - p;
    int stopped_at = 0;
    for (int n : looks) {
      int x = 0;
      for (int i = 0; i < n; ++i) x += code >> i & 1;
      if (stops(n, x)) {
        stopped_at = n;
        break;
      }
    }
    en += prob * (stopped_at ? stopped_at : 9);
    if (!stopped_at) accept += prob;
  }
  const auto oc = boundary_oc(looks, p, stops);
  EXPECT_NEAR(oc.accept_prob, accept, 1e-12);
  EXPECT_NEAR(oc.expected_n, en, 1e-12);
}

TEST(ThallSimon, CalibrationIsGridOptimal) {
  const std::vector<int> looks{12, 24, 36, 46};
  const BetaPrior prior{0.3, 0.7};
  const auto rule = calibrate_thall_simon(0.3, 0.3, 0.5, 0.1, looks, prior);
  EXPECT_LE(ts_exact_oc(rule, 0.3, 0.3).accept_prob, 0.1);
  const double power = ts_exact_oc(rule, 0.3, 0.5).accept_prob;
  for (int i = 1; i <= 99; ++i) {
    const ThallSimonRule r{0.0, i / 100.0, prior, looks};
    if (ts_exact_oc(r, 0.3, 0.3).accept_prob <= 0.1) {
      EXPECT_LE(ts_exact_oc(r, 0.3, 0.5).accept_prob, power + 1e-12);
    }
  }
  EXPECT_THROW(calibrate_thall_simon(0.3, 0.3, 0.5, 1e-9, looks, prior), InfeasibleError);
}

TEST(Bop2, PendingAlwaysSuspends) {
  const auto t = decision_table(fixtures::example1(), fixtures::kExample1Params);
  // TOP would say Go here; BOP2 waits
  const InterimSnapshot snap{20, {{3, 11, 9, 14.0}}};
  EXPECT_EQ(decide(snap, t).action, Action::go);
  EXPECT_EQ(bop2_decide(snap, t).action, Action::suspend);
  EXPECT_EQ(bop2_decide({20, {{8, 19, 1, 19.5}}}, t).action, Action::suspend);
}

TEST(Bop2, CompleteDataMatchesTop) {
  for (const auto& [s, p] : {std::pair{fixtures::example1(), fixtures::kExample1Params},
                             std::pair{fixtures::example2(), fixtures::kExample2Params}}) {
    const auto t = decision_table(s, p);
    for (int n : s.looks)
      for (int x = 0; x <= n; ++x) {
        InterimSnapshot snap{n, {}};
        for (std::size_t k = 0; k < s.endpoints.size(); ++k)
          snap.endpoints.push_back({k == 0 ? x : n - x, n, 0, static_cast<double>(n)});
        EXPECT_EQ(bop2_decide(snap, t).action, decide(snap, t).action);
      }
  }
}
