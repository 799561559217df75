#pragma once

// Design specification, the C_n cutoff family, the interim stopping rule,
// exact complete-data operating characteristics, and (C, gamma) calibration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "top/error.hpp"
#include "top/stats.hpp"
#include "top/trial_state.hpp"

namespace top {

enum class Structure { single, co_primary, efficacy_toxicity };

inline std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::single: return "single";
    case Structure::co_primary: return "co-primary";
    case Structure::efficacy_toxicity: return "efficacy-toxicity";
  }
  return "?";
}

inline Structure structure_from(std::string_view s) {
  if (s == "single") return Structure::single;
  if (s == "co-primary" || s == "co_primary") return Structure::co_primary;
  if (s == "efficacy-toxicity" || s == "efficacy_toxicity") return Structure::efficacy_toxicity;
  throw DomainError("unknown endpoint structure '" + std::string(s) + "'");
}

enum class SuspensionMode {
  table_consistent,  // suspend when pending >= floor(n^2 / N)
  prose_literal,     // suspend when pending > n^2 / N
};

inline std::string_view to_string(SuspensionMode m) {
  return m == SuspensionMode::table_consistent ? "table-consistent" : "prose-literal";
}

inline SuspensionMode suspension_mode_from(std::string_view s) {
  if (s == "table-consistent" || s == "table_consistent") return SuspensionMode::table_consistent;
  if (s == "prose-literal" || s == "prose_literal") return SuspensionMode::prose_literal;
  throw DomainError("unknown suspension mode '" + std::string(s) + "'");
}

struct CalibrationGrid {
  std::vector<double> C;
  std::vector<double> gamma;

  /// C in {0.05, ..., 0.95}, gamma in {0, 0.25, ..., 3}.
  static CalibrationGrid standard() {
    CalibrationGrid g;
    for (int i = 1; i <= 19; ++i) g.C.push_back(0.05 * i);
    for (int i = 0; i <= 12; ++i) g.gamma.push_back(0.25 * i);
    return g;
  }

  friend bool operator==(const CalibrationGrid&, const CalibrationGrid&) = default;
};

/// C_n = 1 - C (n/N)^gamma. Optional separate curve for the toxicity monitor.
struct CutoffParams {
  double C = 0.0;
  double gamma = 0.0;
  std::optional<double> tox_C;
  std::optional<double> tox_gamma;

  void validate() const {
    auto check = [](double c, double g) {
      if (!(c >= 0.0 && c <= 1.0)) throw DomainError("cutoff parameter C must lie in [0, 1]");
      if (!(g >= 0.0)) throw DomainError("cutoff parameter gamma must be >= 0");
    };
    check(C, gamma);
    check(tox_C.value_or(C), tox_gamma.value_or(gamma));
  }

  CutoffParams for_endpoint(const EndpointDef& ep) const {
    if (!is_toxicity(ep.kind)) return {C, gamma, {}, {}};
    return {tox_C.value_or(C), tox_gamma.value_or(gamma), {}, {}};
  }

  friend bool operator==(const CutoffParams&, const CutoffParams&) = default;
};

inline double cutoff(int n, int N, const CutoffParams& params) {
  if (N < 1 || n < 1) throw DomainError("cutoff: sample sizes must be >= 1");
  if (n > N) throw DomainError("cutoff: interim size exceeds the maximum sample size");
  if (params.gamma == 0.0) return 1.0 - params.C;
  return 1.0 - params.C * std::pow(static_cast<double>(n) / N, params.gamma);
}

/// Cells of a 2x2 table over two binary indicators, ordered
/// (1,1), (1,0), (0,1), (0,0), built from marginals and a log odds ratio.
inline std::array<double, 4> joint_cells(double p1, double p2, double log_odds_ratio = 0.0) {
  if (!(p1 > 0.0 && p1 < 1.0) || !(p2 > 0.0 && p2 < 1.0))
    throw DomainError("joint_cells: marginals must lie in (0, 1)");
  double p11;
  if (log_odds_ratio == 0.0) {
    p11 = p1 * p2;
  } else {
    // Plackett: p11 solves p11 (1 - p1 - p2 + p11) = psi (p1 - p11)(p2 - p11)
    const double psi = std::exp(log_odds_ratio);
    const double a = 1.0 + (p1 + p2) * (psi - 1.0);
    p11 = (a - std::sqrt(a * a - 4.0 * psi * (psi - 1.0) * p1 * p2)) / (2.0 * (psi - 1.0));
  }
  std::array<double, 4> cells{p11, p1 - p11, p2 - p11, 1.0 - p1 - p2 + p11};
  for (double& c : cells) {
    if (c < -1e-12) throw DomainError("joint_cells: infeasible marginal/association combination");
    c = std::max(c, 0.0);
  }
  return cells;
}

struct DesignSpec {
  Structure structure = Structure::single;
  int N = 0;
  std::vector<int> looks;  // strictly increasing, last == N
  std::vector<EndpointDef> endpoints;
  std::vector<double> alternative;  // per endpoint, the promising (or acceptable) rate
  double alpha = 0.1;
  std::optional<DirichletPrior> prior;  // K = 2 (single) or 4 (joint); default centered at the null
  double null_log_odds_ratio = 0.0;
  double alt_log_odds_ratio = 0.0;
  SuspensionMode suspension = SuspensionMode::table_consistent;
  CalibrationGrid grid = CalibrationGrid::standard();

  std::size_t expected_endpoints() const { return structure == Structure::single ? 1 : 2; }

  void validate() const {
    if (N < 1) throw DomainError("design: N must be >= 1");
    if (looks.empty() || looks.back() != N) throw DomainError("design: looks must end at N");
    for (std::size_t i = 0; i < looks.size(); ++i) {
      if (looks[i] < 1) throw DomainError("design: looks must be >= 1");
      if (i > 0 && looks[i] <= looks[i - 1]) throw DomainError("design: looks must be strictly increasing");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("design: alpha must lie in (0, 1]");
    if (endpoints.size() != expected_endpoints())
      throw DomainError("design: wrong number of endpoints for structure " + std::string(to_string(structure)));
    if (alternative.size() != endpoints.size()) throw DomainError("design: one alternative rate per endpoint");
    for (std::size_t k = 0; k < endpoints.size(); ++k) {
      const auto& ep = endpoints[k];
      ep.validate();
      const bool want_tox = structure == Structure::efficacy_toxicity && k == 1;
      if (is_toxicity(ep.kind) != want_tox)
        throw DomainError("design: endpoint '" + ep.name + "' has a kind inconsistent with the structure");
      const double alt = alternative[k];
      if (!(alt > 0.0 && alt < 1.0)) throw DomainError("design: alternative rates must lie in (0, 1)");
      if (want_tox ? alt > ep.threshold : alt < ep.threshold)
        throw DomainError("design: alternative for '" + ep.name + "' is on the wrong side of the threshold");
    }
    if (prior) {
      prior->validate();
      if (prior->alpha.size() != categories()) throw DomainError("design: prior has the wrong category count");
    }
    for (double c : grid.C)
      if (!(c >= 0.0 && c <= 1.0)) throw DomainError("design: grid C values must lie in [0, 1]");
    for (double g : grid.gamma)
      if (!(g >= 0.0)) throw DomainError("design: grid gamma values must be >= 0");
    if (grid.C.empty() || grid.gamma.empty()) throw DomainError("design: empty calibration grid");
  }

  std::size_t categories() const { return structure == Structure::single ? 2 : 4; }

  std::vector<double> cells(std::span<const double> rates, double log_or) const {
    if (rates.size() != endpoints.size()) throw DomainError("design: one rate per endpoint expected");
    if (structure == Structure::single) return {rates[0], 1.0 - rates[0]};
    const auto c = joint_cells(rates[0], rates[1], log_or);
    return {c.begin(), c.end()};
  }

  std::vector<double> thresholds() const {
    std::vector<double> t;
    for (const auto& ep : endpoints) t.push_back(ep.threshold);
    return t;
  }

  DirichletPrior dirichlet_prior() const {
    if (prior) return *prior;
    const auto t = thresholds();
    const auto c = cells(t, 0.0);
    return DirichletPrior::centered(c, 1.0);
  }

  /// Category indices whose indicator for endpoint k is 1.
  std::vector<std::size_t> marginal_subset(std::size_t k) const {
    if (structure == Structure::single) return {0};
    return k == 0 ? std::vector<std::size_t>{0, 1} : std::vector<std::size_t>{0, 2};
  }

  BetaPrior marginal_prior(std::size_t k) const {
    const auto d = dirichlet_prior();
    const std::vector<double> zero(d.alpha.size(), 0.0);
    const auto subset = marginal_subset(k);
    return dirichlet_aggregate(zero, d, subset);
  }

  /// Null configurations; type I error is the largest accept probability among them.
  std::vector<std::vector<double>> null_hypotheses() const {
    const auto t = thresholds();
    if (structure != Structure::efficacy_toxicity) return {cells(t, null_log_odds_ratio)};
    const std::vector<double> ineffective{t[0], alternative[1]};
    const std::vector<double> toxic{alternative[0], t[1]};
    return {cells(ineffective, null_log_odds_ratio), cells(toxic, null_log_odds_ratio)};
  }

  std::vector<double> alternative_hypothesis() const { return cells(alternative, alt_log_odds_ratio); }

  bool is_look(int n) const { return std::find(looks.begin(), looks.end(), n) != looks.end(); }
};

enum class TrialAction { continue_trial, stop_futility, stop_toxicity };

inline std::string_view to_string(TrialAction a) {
  switch (a) {
    case TrialAction::continue_trial: return "continue";
    case TrialAction::stop_futility: return "stop-futility";
    case TrialAction::stop_toxicity: return "stop-toxicity";
  }
  return "?";
}

/// The monitored posterior probability for an endpoint: Pr(p <= phi) for
/// efficacy endpoints, Pr(p >= phi_T) for toxicity.
inline double monitored_prob(double x, double m, const EndpointDef& ep, const BetaPrior& prior) {
  return is_toxicity(ep.kind) ? excess_prob(x, m, ep.threshold, prior) : futility_prob(x, m, ep.threshold, prior);
}

namespace detail {
inline void check_snapshot(const InterimSnapshot& snap, const DesignSpec& spec) {
  if (snap.endpoints.size() != spec.endpoints.size())
    throw DomainError("snapshot has " + std::to_string(snap.endpoints.size()) + " endpoints, design has " +
                      std::to_string(spec.endpoints.size()));
  if (!spec.is_look(snap.n_enrolled))
    throw DomainError("snapshot size " + std::to_string(snap.n_enrolled) + " is not an analysis point");
  constexpr double tol = 1e-9;
  for (const auto& e : snap.endpoints) {
    if (e.x < 0 || e.x > e.n_obs || e.n_obs + e.n_pending != snap.n_enrolled || e.tess < e.n_obs - tol ||
        e.tess > snap.n_enrolled + tol)
      throw DomainError("snapshot counts are inconsistent");
  }
}

// Combine per-endpoint stop flags according to the structure.
inline TrialAction combine(Structure s, std::span<const bool> stops, std::span<const EndpointDef> eps) {
  switch (s) {
    case Structure::single:
      return stops[0] ? TrialAction::stop_futility : TrialAction::continue_trial;
    case Structure::co_primary:
      return std::all_of(stops.begin(), stops.end(), [](bool b) { return b; }) ? TrialAction::stop_futility
                                                                                : TrialAction::continue_trial;
    case Structure::efficacy_toxicity:
      for (std::size_t k = 0; k < stops.size(); ++k)
        if (stops[k] && !is_toxicity(eps[k].kind)) return TrialAction::stop_futility;
      for (std::size_t k = 0; k < stops.size(); ++k)
        if (stops[k]) return TrialAction::stop_toxicity;
      return TrialAction::continue_trial;
  }
  return TrialAction::continue_trial;
}
}  // namespace detail

/// Direct posterior evaluation of the interim rule at the snapshot's TESS.
inline TrialAction stop_rule(const InterimSnapshot& snap, const DesignSpec& spec, const CutoffParams& params) {
  detail::check_snapshot(snap, spec);
  bool stops[2] = {false, false};
  for (std::size_t k = 0; k < spec.endpoints.size(); ++k) {
    const auto& ep = spec.endpoints[k];
    const auto& e = snap.endpoints[k];
    const double cn = cutoff(snap.n_enrolled, spec.N, params.for_endpoint(ep));
    stops[k] = monitored_prob(e.x, e.tess, ep, spec.marginal_prior(k)) > cn;
  }
  return detail::combine(spec.structure, std::span<const bool>(stops, spec.endpoints.size()), spec.endpoints);
}

struct OperatingCharacteristics {
  double accept_prob = 0.0;  // probability of a final Go
  double expected_n = 0.0;
  std::vector<double> stop_prob;  // per look; the last entry is a final No go
};

/// Exact complete-data operating characteristics by dynamic programming over
/// reachable count states. For joint structures the state is the pair of
/// endpoint counts and cohort increments follow the 4-cell multinomial.
class ExactEvaluator {
 public:
  ExactEvaluator(const DesignSpec& spec, std::span<const double> cells) : spec_(spec) {
    spec_.validate();
    if (cells.size() != spec_.categories()) throw DomainError("exact_oc: wrong number of truth cells");
    double total = 0.0;
    for (double c : cells) {
      if (!(c >= 0.0)) throw DomainError("exact_oc: negative cell probability");
      total += c;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw DomainError("exact_oc: cell probabilities must sum to 1");
    cells_.assign(cells.begin(), cells.end());

    const std::size_t n_ep = spec_.endpoints.size();
    tail_.resize(spec_.looks.size());
    for (std::size_t l = 0; l < spec_.looks.size(); ++l) {
      const int n = spec_.looks[l];
      tail_[l].resize(n_ep);
      for (std::size_t k = 0; k < n_ep; ++k) {
        const auto prior = spec_.marginal_prior(k);
        tail_[l][k].resize(n + 1);
        for (int x = 0; x <= n; ++x) tail_[l][k][x] = monitored_prob(x, n, spec_.endpoints[k], prior);
      }
    }
    int prev = 0;
    for (int n : spec_.looks) {
      transitions_.push_back(increment_distribution(n - prev));
      prev = n;
    }
  }

  /// Complete-data posterior probability for endpoint k at look l with x outcomes.
  double tail(std::size_t look, std::size_t k, int x) const { return tail_[look][k][x]; }

  OperatingCharacteristics run(const CutoffParams& params) const {
    const std::size_t n_ep = spec_.endpoints.size();
    const int N = spec_.N;
    const int dim2 = n_ep == 2 ? N + 1 : 1;
    std::vector<double> dist(static_cast<std::size_t>(N + 1) * dim2, 0.0), next(dist.size());
    dist[0] = 1.0;
    OperatingCharacteristics oc;
    int prev = 0;
    for (std::size_t l = 0; l < spec_.looks.size(); ++l) {
      const int n = spec_.looks[l];
      const int c = n - prev;
      const auto& tr = transitions_[l];
      std::fill(next.begin(), next.end(), 0.0);
      for (int x1 = 0; x1 <= prev; ++x1) {
        for (int x2 = 0; x2 <= (n_ep == 2 ? prev : 0); ++x2) {
          const double mass = dist[idx(x1, x2, dim2)];
          if (mass == 0.0) continue;
          for (int d1 = 0; d1 <= c; ++d1)
            for (int d2 = 0; d2 <= (n_ep == 2 ? c : 0); ++d2)
              next[idx(x1 + d1, x2 + d2, dim2)] += mass * tr[static_cast<std::size_t>(d1) * (c + 1) + d2];
        }
      }
      double cn[2];
      for (std::size_t k = 0; k < n_ep; ++k) cn[k] = cutoff(n, N, params.for_endpoint(spec_.endpoints[k]));
      double stop_mass = 0.0;
      for (int x1 = 0; x1 <= n; ++x1) {
        for (int x2 = 0; x2 <= (n_ep == 2 ? n : 0); ++x2) {
          double& m = next[idx(x1, x2, dim2)];
          if (m == 0.0) continue;
          bool stops[2] = {tail_[l][0][x1] > cn[0], n_ep == 2 && tail_[l][1][x2] > cn[1]};
          if (detail::combine(spec_.structure, std::span<const bool>(stops, n_ep), spec_.endpoints) !=
              TrialAction::continue_trial) {
            stop_mass += m;
            m = 0.0;
          }
        }
      }
      oc.stop_prob.push_back(stop_mass);
      if (l + 1 < spec_.looks.size()) oc.expected_n += n * stop_mass;
      dist.swap(next);
      prev = n;
    }
    double accept = 0.0;
    for (double m : dist) accept += m;
    oc.accept_prob = accept;
    oc.expected_n += N * (accept + oc.stop_prob.back());
    return oc;
  }

 private:
  static std::size_t idx(int x1, int x2, int dim2) { return static_cast<std::size_t>(x1) * dim2 + x2; }

  // P(d1, d2) for a cohort of c patients; d2 is always 0 for a single endpoint.
  std::vector<double> increment_distribution(int c) const {
    const bool joint = spec_.endpoints.size() == 2;
    std::vector<double> out(static_cast<std::size_t>(c + 1) * (c + 1), 0.0);
    auto log_fact = [](int k) { return std::lgamma(k + 1.0); };
    auto term = [](double p, int k) { return k == 0 ? 0.0 : (p > 0.0 ? k * std::log(p) : -INFINITY); };
    if (!joint) {
      const double p = cells_[0], q = cells_[1];
      for (int d = 0; d <= c; ++d)
        out[static_cast<std::size_t>(d) * (c + 1)] =
            std::exp(log_fact(c) - log_fact(d) - log_fact(c - d) + term(p, d) + term(q, c - d));
      return out;
    }
    for (int d1 = 0; d1 <= c; ++d1) {
      for (int d2 = 0; d2 <= c; ++d2) {
        double s = 0.0;
        for (int a = std::max(0, d1 + d2 - c); a <= std::min(d1, d2); ++a) {
          const int b = d1 - a, e = d2 - a, f = c - d1 - d2 + a;
          s += std::exp(log_fact(c) - log_fact(a) - log_fact(b) - log_fact(e) - log_fact(f) + term(cells_[0], a) +
                        term(cells_[1], b) + term(cells_[2], e) + term(cells_[3], f));
        }
        out[static_cast<std::size_t>(d1) * (c + 1) + d2] = s;
      }
    }
    return out;
  }

  DesignSpec spec_;
  std::vector<double> cells_;
  std::vector<std::vector<std::vector<double>>> tail_;  // [look][endpoint][x]
  std::vector<std::vector<double>> transitions_;       // [look][(d1, d2)]
};

inline OperatingCharacteristics exact_oc(const DesignSpec& spec, const CutoffParams& params,
                                         std::span<const double> cells) {
  params.validate();
  return ExactEvaluator(spec, cells).run(params);
}

struct CalibrationResult {
  CutoffParams params;
  double type1 = 0.0;
  double power = 0.0;
  double en_null = 0.0;
  double en_alt = 0.0;
  int feasible = 0;  // number of grid points meeting the type I constraint
};

/// Grid search: keep pairs whose worst null accept probability <= alpha,
/// maximize power at the alternative, tie-break on smaller null E[N] then
/// smaller C (then smaller gamma).
inline CalibrationResult calibrate(const DesignSpec& spec) {
  spec.validate();
  std::vector<ExactEvaluator> nulls;
  for (const auto& h : spec.null_hypotheses()) nulls.emplace_back(spec, h);
  const ExactEvaluator alt(spec, spec.alternative_hypothesis());

  constexpr double tie = 1e-12;
  std::optional<CalibrationResult> best;
  int feasible = 0;
  for (double C : spec.grid.C) {
    for (double g : spec.grid.gamma) {
      const CutoffParams p{C, g, {}, {}};
      double type1 = 0.0, en_null = 0.0;
      for (std::size_t i = 0; i < nulls.size(); ++i) {
        const auto oc = nulls[i].run(p);
        type1 = std::max(type1, oc.accept_prob);
        if (i == 0) en_null = oc.expected_n;
      }
      if (type1 > spec.alpha) continue;
      ++feasible;
      const auto oc_alt = alt.run(p);
      const CalibrationResult cand{p, type1, oc_alt.accept_prob, en_null, oc_alt.expected_n, 0};
      bool better = !best;
      if (best) {
        if (cand.power > best->power + tie) better = true;
        else if (cand.power >= best->power - tie) {
          if (cand.en_null < best->en_null - tie) better = true;
          else if (cand.en_null <= best->en_null + tie)
            better = cand.params.C < best->params.C || (cand.params.C == best->params.C && cand.params.gamma < best->params.gamma);
        }
      }
      if (better) best = cand;
    }
  }
  if (!best)
    throw InfeasibleError("no (C, gamma) on the calibration grid keeps the type I error at or below alpha = " +
                          std::to_string(spec.alpha));
  best->feasible = feasible;
  return *best;
}

}  // namespace top
