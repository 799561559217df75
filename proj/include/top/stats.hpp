#pragma once

// Conjugate beta / Dirichlet posterior tail probabilities. Counts may be
// fractional: a pending patient contributes a partial trial through TESS.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "top/error.hpp"

namespace top {

struct BetaPrior {
  double a0 = 1.0;  // prior pseudo-responses
  double b0 = 1.0;  // prior pseudo-nonresponses

  void validate() const {
    if (!(a0 > 0.0) || !(b0 > 0.0))
      throw DomainError("BetaPrior requires a0 > 0 and b0 > 0");
  }

  /// Unit-mass prior whose mean sits on the threshold rate.
  static BetaPrior centered(double phi) { return {phi, 1.0 - phi}; }

  friend bool operator==(const BetaPrior&, const BetaPrior&) = default;
};

struct DirichletPrior {
  std::vector<double> alpha;

  void validate() const {
    if (alpha.size() < 2) throw DomainError("DirichletPrior requires K >= 2 categories");
    for (double a : alpha)
      if (!(a > 0.0)) throw DomainError("DirichletPrior requires every alpha_k > 0");
  }

  /// Total mass `mass` spread proportionally to `means`.
  static DirichletPrior centered(std::span<const double> means, double mass = 1.0) {
    DirichletPrior p;
    p.alpha.reserve(means.size());
    for (double m : means) p.alpha.push_back(mass * m);
    p.validate();
    return p;
  }

  friend bool operator==(const DirichletPrior&, const DirichletPrior&) = default;
};

namespace detail {

// Lentz evaluation of the continued fraction for I_x(a, b); caller
// guarantees x < (a + 1) / (a + b + 2) so the fraction converges fast.
inline double beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  constexpr int max_iter = 10000;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;

    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  return h;  // converged to working precision for all practical (a, b)
}

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline void check_counts(double x, double m) {
  if (!(x >= 0.0) || !(m >= 0.0)) throw DomainError("counts must be nonnegative");
  if (x > m) throw DomainError("effective events exceed effective sample size");
}

inline void check_rate(double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw DomainError("rate threshold must lie in [0, 1]");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double reg_inc_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("reg_inc_beta: x outside [0, 1]");
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("reg_inc_beta: a and b must be positive");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double log_front = a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(log_front) * detail::beta_cf(x, a, b) / a;
  // symmetry transform: I_x(a, b) = 1 - I_{1-x}(b, a)
  return 1.0 - std::exp(log_front) * detail::beta_cf(1.0 - x, b, a) / b;
}

/// Pr(p <= phi | x responses out of m effective patients).
inline double futility_prob(double x, double m, double phi, const BetaPrior& prior) {
  detail::check_counts(x, m);
  detail::check_rate(phi);
  prior.validate();
  return reg_inc_beta(phi, prior.a0 + x, prior.b0 + m - x);
}

/// Pr(p >= phi_t | x events out of m effective patients); toxicity monitor.
inline double excess_prob(double x, double m, double phi_t, const BetaPrior& prior) {
  return 1.0 - futility_prob(x, m, phi_t, prior);
}

/// Beta parameters of the marginal posterior for the mass of `subset`
/// under a Dirichlet(alpha + counts) posterior.
inline BetaPrior dirichlet_aggregate(std::span<const double> counts, const DirichletPrior& prior,
                                     std::span<const std::size_t> subset) {
  prior.validate();
  const std::size_t k = prior.alpha.size();
  if (counts.size() != k) throw DomainError("counts and prior differ in category count");
  if (subset.empty() || subset.size() >= k) throw DomainError("subset must be nonempty and proper");
  std::vector<bool> in(k, false);
  for (std::size_t s : subset) {
    if (s >= k) throw DomainError("subset index out of range");
    if (in[s]) throw DomainError("duplicate subset index");
    in[s] = true;
  }
  double inside = 0.0, outside = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(counts[i] >= 0.0)) throw DomainError("counts must be nonnegative");
    (in[i] ? inside : outside) += prior.alpha[i] + counts[i];
  }
  return {inside, outside};
}

/// Pr(sum_{k in subset} p_k <= phi | counts). Subset indices are 0-based.
inline double dirichlet_marginal_tail(std::span<const double> counts, const DirichletPrior& prior,
                                      std::span<const std::size_t> subset, double phi) {
  detail::check_rate(phi);
  const BetaPrior post = dirichlet_aggregate(counts, prior, subset);
  return reg_inc_beta(phi, post.a0, post.b0);
}

}  // namespace top
