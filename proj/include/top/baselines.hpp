#pragma once

// Comparator designs: Simon's two-stage design (exact search), Thall-Simon
// Bayesian futility monitoring, and BOP2's complete-data conduct.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "top/decision_table.hpp"
#include "top/design.hpp"
#include "top/error.hpp"
#include "top/stats.hpp"

namespace top {

enum class SimonFlavor { optimal, minimax };

inline std::string_view to_string(SimonFlavor f) { return f == SimonFlavor::optimal ? "optimal" : "minimax"; }

/// Stop after stage 1 if responses <= r1; promising iff total responses > r.
struct SimonDesign {
  int n1 = 0;
  int r1 = 0;
  int n = 0;
  int r = 0;
  SimonFlavor flavor = SimonFlavor::optimal;
  double type1 = 0.0;
  double power = 0.0;
  double pet0 = 0.0;  // probability of early termination under p0
  double en0 = 0.0;   // expected sample size under p0
};

struct SimonResult {
  SimonDesign optimal;
  SimonDesign minimax;
};

namespace detail {

// pmf[k][x] = P(Bin(k, p) = x) for k <= n_max
inline std::vector<std::vector<double>> binomial_table(int n_max, double p) {
  std::vector<std::vector<double>> t(static_cast<std::size_t>(n_max) + 1);
  t[0] = {1.0};
  for (int k = 1; k <= n_max; ++k) {
    auto& row = t[k];
    row.assign(static_cast<std::size_t>(k) + 1, 0.0);
    for (int x = 0; x < k; ++x) {
      row[x] += t[k - 1][x] * (1.0 - p);
      row[x + 1] += t[k - 1][x] * p;
    }
  }
  return t;
}

// upper[k][j] = P(Bin(k, p) > j) for j in [-1, k]; stored with offset 1
inline std::vector<std::vector<double>> upper_tail_table(const std::vector<std::vector<double>>& pmf) {
  std::vector<std::vector<double>> u(pmf.size());
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    u[k].assign(k + 2, 0.0);
    double s = 0.0;
    for (int j = static_cast<int>(k); j >= -1; --j) {
      u[k][j + 1] = s;
      if (j >= 0) s += pmf[k][j];
    }
    u[k][0] = 1.0;
  }
  return u;
}

struct SimonTables {
  std::vector<std::vector<double>> pmf, upper;
  SimonTables(int n_max, double p) : pmf(binomial_table(n_max, p)), upper(upper_tail_table(pmf)) {}

  double tail(int k, int j) const {  // P(Bin(k, p) > j)
    if (j < 0) return 1.0;
    if (j >= k) return 0.0;
    return upper[k][j + 1];
  }
  double cdf(int k, int j) const { return 1.0 - tail(k, j); }

  double reject(int n1, int r1, int n, int r) const {
    double s = 0.0;
    for (int x1 = r1 + 1; x1 <= n1; ++x1) s += pmf[n1][x1] * tail(n - n1, r - x1);
    return s;
  }
};

}  // namespace detail

/// Probability that a Simon design declares the treatment promising at rate p.
inline double simon_reject_prob(const SimonDesign& d, double p) {
  const detail::SimonTables t(d.n, p);
  return t.reject(d.n1, d.r1, d.n, d.r);
}

/// Exhaustive search over (n1, r1, n, r) with n <= n_max.
inline SimonResult simon_search(double p0, double p1, double alpha, double beta, int n_max = 100) {
  if (!(p0 > 0.0 && p0 < 1.0) || !(p1 > 0.0 && p1 < 1.0)) throw DomainError("simon_search: rates must lie in (0, 1)");
  if (!(p0 < p1)) throw DomainError("simon_search: need p0 < p1");
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
    throw DomainError("simon_search: alpha and beta must lie in (0, 1)");
  if (n_max < 2) throw DomainError("simon_search: n_max must be >= 2");

  const detail::SimonTables t0(n_max, p0), t1(n_max, p1);
  std::optional<SimonDesign> opt, mm;
  for (int n = 2; n <= n_max; ++n) {
    for (int n1 = 1; n1 < n; ++n1) {
      for (int r1 = 0; r1 < n1; ++r1) {
        const double pet0 = t0.cdf(n1, r1);
        const double en0 = n1 + (1.0 - pet0) * (n - n1);
        if (opt && mm && en0 > opt->en0 && n > mm->n) continue;
        // type I error decreases in r: find the smallest admissible r
        int lo = r1 + 1, hi = n;  // reject(.., r = n) == 0
        if (t0.reject(n1, r1, n, hi) > alpha) continue;
        while (lo < hi) {
          const int mid = (lo + hi) / 2;
          if (t0.reject(n1, r1, n, mid) <= alpha) hi = mid;
          else lo = mid + 1;
        }
        const int r = lo;
        const double power = t1.reject(n1, r1, n, r);
        if (power < 1.0 - beta) continue;
        const SimonDesign d{n1, r1, n, r, SimonFlavor::optimal, t0.reject(n1, r1, n, r), power, pet0, en0};
        if (!opt || en0 < opt->en0 - 1e-12) opt = d;
        if (!mm || n < mm->n || (n == mm->n && en0 < mm->en0 - 1e-12)) mm = d;
      }
    }
  }
  if (!opt) throw InfeasibleError("simon_search: no design with n <= " + std::to_string(n_max) + " meets alpha/beta");
  mm->flavor = SimonFlavor::minimax;
  return {*opt, *mm};
}

/// Thall-Simon futility monitoring: stop iff Pr(p > phi + delta | data) < pi_L.
struct ThallSimonRule {
  double delta = 0.0;
  double pi_L = 0.05;
  BetaPrior prior;
  std::vector<int> looks;  // last look is the final analysis

  void validate() const {
    prior.validate();
    if (!(pi_L >= 0.0 && pi_L < 1.0)) throw DomainError("Thall-Simon: pi_L must lie in [0, 1)");
    if (!(delta >= 0.0)) throw DomainError("Thall-Simon: delta must be >= 0");
  }
};

enum class TsAction { continue_trial, stop };

inline double ts_superiority_prob(int x, int n, const ThallSimonRule& rule, double phi) {
  const double target = phi + rule.delta;
  if (target >= 1.0) return 0.0;
  return 1.0 - futility_prob(x, n, target, rule.prior);
}

/// Complete data only: the design cannot use pending patients.
inline TsAction ts_stop(int x, int n, int n_pending, const ThallSimonRule& rule, double phi) {
  rule.validate();
  if (n_pending > 0) throw DomainError("Thall-Simon requires complete data at an analysis");
  if (x < 0 || x > n) throw DomainError("Thall-Simon: need 0 <= x <= n");
  return ts_superiority_prob(x, n, rule, phi) < rule.pi_L ? TsAction::stop : TsAction::continue_trial;
}

/// Accept probability and expected size of a single-endpoint boundary rule
/// over complete-data looks; `stops(n, x)` decides each look.
inline OperatingCharacteristics boundary_oc(std::span<const int> looks, double p,
                                            const std::function<bool(int, int)>& stops) {
  OperatingCharacteristics oc;
  std::vector<double> dist{1.0};
  int prev = 0;
  for (std::size_t l = 0; l < looks.size(); ++l) {
    const int n = looks[l], c = n - prev;
    const auto pmf = detail::binomial_table(c, p)[c];
    std::vector<double> next(static_cast<std::size_t>(n) + 1, 0.0);
    for (int x = 0; x <= prev; ++x)
      if (dist[x] != 0.0)
        for (int d = 0; d <= c; ++d) next[x + d] += dist[x] * pmf[d];
    double stop = 0.0;
    for (int x = 0; x <= n; ++x)
      if (next[x] != 0.0 && stops(n, x)) {
        stop += next[x];
        next[x] = 0.0;
      }
    oc.stop_prob.push_back(stop);
    if (l + 1 < looks.size()) oc.expected_n += n * stop;
    dist.swap(next);
    prev = n;
  }
  for (double m : dist) oc.accept_prob += m;
  oc.expected_n += looks.back() * (oc.accept_prob + oc.stop_prob.back());
  return oc;
}

inline OperatingCharacteristics ts_exact_oc(const ThallSimonRule& rule, double phi, double p) {
  rule.validate();
  return boundary_oc(rule.looks, p, [&](int n, int x) { return ts_superiority_prob(x, n, rule, phi) < rule.pi_L; });
}

/// pi_L on a 0.01 grid: maximize power at p1 with null accept <= alpha.
inline ThallSimonRule calibrate_thall_simon(double phi, double p0, double p1, double alpha, std::vector<int> looks,
                                            BetaPrior prior, double delta = 0.0) {
  std::optional<ThallSimonRule> best;
  double best_power = -1.0;
  for (int i = 1; i <= 99; ++i) {
    ThallSimonRule rule{delta, i / 100.0, prior, looks};
    if (ts_exact_oc(rule, phi, p0).accept_prob > alpha) continue;
    const double power = ts_exact_oc(rule, phi, p1).accept_prob;
    if (power > best_power + 1e-12) {
      best_power = power;
      best = rule;
    }
  }
  if (!best) throw InfeasibleError("Thall-Simon: no pi_L on the grid controls the type I error");
  return *best;
}

/// BOP2 conduct: any pending outcome suspends accrual; otherwise the
/// complete-data boundary from the shared table applies.
inline Decision bop2_decide(const InterimSnapshot& snap, const DecisionTable& table) {
  for (std::size_t k = 0; k < snap.endpoints.size(); ++k) {
    if (snap.endpoints[k].n_pending > 0) {
      Decision d;
      d.action = Action::suspend;
      for (std::size_t j = 0; j < snap.endpoints.size(); ++j) {
        const auto& e = snap.endpoints[j];
        d.endpoints.push_back({j < table.endpoints.size() ? table.endpoints[j].name : std::string{},
                               e.n_pending > 0 ? EndpointCall::suspend : EndpointCall::go, e.x, e.n_pending, e.tess,
                               RowKind::threshold, {}, fmt::format("{} pending; waiting for complete data", e.n_pending)});
      }
      return d;
    }
  }
  return decide(snap, table);
}

}  // namespace top
