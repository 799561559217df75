#pragma once

// Pre-tabulated go/no-go rules. For each analysis size n and outcome count x
// the interim rule "stop iff Pr(...) > C_n" reduces to a comparison of TESS
// against a single threshold m*, because the monitored posterior probability
// is monotone in the effective sample size.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "top/design.hpp"
#include "top/error.hpp"
#include "top/stats.hpp"
#include "top/trial_state.hpp"

namespace top {

enum class RowKind {
  always_stop,  // stop (futile / toxic) for every attainable TESS
  threshold,    // decision depends on TESS versus `threshold`
  always_go,    // continue for every attainable TESS
};

inline std::string_view to_string(RowKind k) {
  switch (k) {
    case RowKind::always_stop: return "always-stop";
    case RowKind::threshold: return "threshold";
    case RowKind::always_go: return "always-go";
  }
  return "?";
}

struct ThresholdResult {
  RowKind kind = RowKind::threshold;
  double value = std::numeric_limits<double>::quiet_NaN();  // m*, when kind == threshold
};

/// Solves monitored_prob(x, m) = C_n for m in [x, n]. Efficacy endpoints
/// continue iff TESS < m*; toxicity endpoints stop iff TESS < m*.
inline ThresholdResult tess_threshold(int x, int n, const DesignSpec& spec, const CutoffParams& params,
                                      std::size_t endpoint) {
  if (endpoint >= spec.endpoints.size()) throw DomainError("tess_threshold: endpoint index out of range");
  if (x < 0 || x > n) throw DomainError("tess_threshold: need 0 <= x <= n");
  const auto& ep = spec.endpoints[endpoint];
  const BetaPrior prior = spec.marginal_prior(endpoint);
  const double cn = cutoff(n, spec.N, params.for_endpoint(ep));
  const bool tox = is_toxicity(ep.kind);
  const double at_x = monitored_prob(x, x, ep, prior);
  const double at_n = monitored_prob(x, n, ep, prior);
  if (!tox) {
    if (at_n <= cn) return {RowKind::always_go};
    if (at_x > cn) return {RowKind::always_stop};
  } else {
    if (at_n > cn) return {RowKind::always_stop};
    if (at_x <= cn) return {RowKind::always_go};
  }
  auto f = [&](double m) { return monitored_prob(x, m, ep, prior) - cn; };
  auto tol = [](double a, double b) { return std::nextafter(a, b) >= b; };
  const auto [lo, hi] = boost::math::tools::bisect(f, static_cast<double>(x), static_cast<double>(n), tol);
  return {RowKind::threshold, hi};
}

/// Smallest pending count that suspends accrual at an analysis of size n.
inline int suspension_limit(int n, int N, SuspensionMode mode, bool is_final) {
  if (is_final) return 1;
  const long long sq = static_cast<long long>(n) * n;
  if (mode == SuspensionMode::table_consistent) return std::max<int>(1, static_cast<int>(sq / N));
  return static_cast<int>(sq / N) + 1;  // strictly more than n^2/N pending
}

inline bool suspension_check(int n, int N, int n_pending, bool meets_go, bool is_final,
                             SuspensionMode mode = SuspensionMode::table_consistent) {
  if (n_pending < 0 || n_pending > n) throw DomainError("suspension_check: need 0 <= pending <= n");
  if (is_final) return n_pending >= 1;
  return !meets_go && n_pending >= suspension_limit(n, N, mode, false);
}

struct TableRow {
  int x = 0;
  RowKind kind = RowKind::always_stop;
  double threshold = std::numeric_limits<double>::quiet_NaN();

  friend bool operator==(const TableRow& a, const TableRow& b) {
    return a.x == b.x && a.kind == b.kind &&
           (a.threshold == b.threshold || (std::isnan(a.threshold) && std::isnan(b.threshold)));
  }
};

struct TableBlock {
  int n = 0;
  bool is_final = false;
  int suspension_limit = 1;
  std::vector<TableRow> rows;  // one per x in [0, n]

  /// Efficacy: smallest x that is always Go. Toxicity: smallest x that always stops.
  int first_of(RowKind kind) const {
    for (const auto& r : rows)
      if (r.kind == kind) return r.x;
    return n + 1;
  }
  /// Largest x of the given kind, or -1.
  int last_of(RowKind kind) const {
    for (auto it = rows.rbegin(); it != rows.rend(); ++it)
      if (it->kind == kind) return it->x;
    return -1;
  }

  friend bool operator==(const TableBlock&, const TableBlock&) = default;
};

struct EndpointTable {
  std::string name;
  EndpointKind kind = EndpointKind::response;
  double threshold = 0.5;
  double alternative = 0.5;
  BetaPrior prior;
  std::vector<TableBlock> blocks;

  const TableBlock* block(int n) const {
    for (const auto& b : blocks)
      if (b.n == n) return &b;
    return nullptr;
  }

  friend bool operator==(const EndpointTable&, const EndpointTable&) = default;
};

struct DecisionTable {
  Structure structure = Structure::single;
  int N = 0;
  std::vector<int> looks;
  double alpha = 0.1;
  CutoffParams params;
  SuspensionMode suspension = SuspensionMode::table_consistent;
  std::vector<EndpointTable> endpoints;
  bool rounded = false;  // thresholds carry 2 decimals (loaded from a tabular file)

  friend bool operator==(const DecisionTable&, const DecisionTable&) = default;
};

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

/// Tabulates every analysis. Depends only on hypotheses, N, looks, priors and
/// cutoffs; windows and accrual never enter.
inline DecisionTable decision_table(const DesignSpec& spec, const CutoffParams& params) {
  spec.validate();
  params.validate();
  DecisionTable t;
  t.structure = spec.structure;
  t.N = spec.N;
  t.looks = spec.looks;
  t.alpha = spec.alpha;
  t.params = params;
  t.suspension = spec.suspension;
  for (std::size_t k = 0; k < spec.endpoints.size(); ++k) {
    const auto& ep = spec.endpoints[k];
    EndpointTable et{ep.name, ep.kind, ep.threshold, spec.alternative[k], spec.marginal_prior(k), {}};
    for (int n : spec.looks) {
      const bool is_final = n == spec.N;
      TableBlock b{n, is_final, suspension_limit(n, spec.N, spec.suspension, is_final), {}};
      const double cn = cutoff(n, spec.N, params.for_endpoint(ep));
      for (int x = 0; x <= n; ++x) {
        if (is_final) {
          // complete data: TESS == N
          const bool stop = monitored_prob(x, n, ep, et.prior) > cn;
          b.rows.push_back({x, stop ? RowKind::always_stop : RowKind::always_go});
          continue;
        }
        auto r = tess_threshold(x, n, spec, params, k);
        // Without suspension at least n - L + 1 outcomes are resolved, so an
        // efficacy threshold at or below n - L can never be undercut.
        if (!is_toxicity(ep.kind) && r.kind == RowKind::threshold && r.value <= n - b.suspension_limit)
          r = {RowKind::always_stop};
        b.rows.push_back({x, r.kind, r.value});
      }
      et.blocks.push_back(std::move(b));
    }
    t.endpoints.push_back(std::move(et));
  }
  return t;
}

enum class Action { go, no_go, suspend };

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::go: return "Go";
    case Action::no_go: return "NoGo";
    case Action::suspend: return "Suspend";
  }
  return "?";
}

/// Per-endpoint call: go = not futile / acceptably safe; stop = futile / toxic.
enum class EndpointCall { go, stop, suspend };

inline std::string_view to_string(EndpointCall c) {
  switch (c) {
    case EndpointCall::go: return "go";
    case EndpointCall::stop: return "stop";
    case EndpointCall::suspend: return "suspend";
  }
  return "?";
}

struct EndpointDecision {
  std::string name;
  EndpointCall call = EndpointCall::go;
  int x = 0;
  int n_pending = 0;
  double tess = 0.0;
  RowKind row = RowKind::always_go;
  std::optional<double> threshold;
  std::string rationale;
};

struct Decision {
  Action action = Action::go;
  TrialAction reason = TrialAction::continue_trial;
  std::vector<EndpointDecision> endpoints;

  /// e.g. "Go (TESS 14.00 < 15.40)".
  std::string summary() const {
    std::string out(to_string(action));
    out += " (";
    for (std::size_t k = 0; k < endpoints.size(); ++k) {
      if (k) out += "; ";
      if (endpoints.size() > 1) out += endpoints[k].name + ": ";
      out += endpoints[k].rationale;
    }
    out += ")";
    return out;
  }
};

namespace detail {

inline EndpointDecision classify(const EndpointSnapshot& e, const EndpointTable& et, const TableBlock& b) {
  EndpointDecision d{et.name, EndpointCall::go, e.x, e.n_pending, e.tess, RowKind::always_go, {}, {}};
  if (e.x < 0 || e.x > b.n) throw DomainError("outcome count outside the table block");
  const TableRow& row = b.rows.at(static_cast<std::size_t>(e.x));
  d.row = row.kind;
  const bool tox = is_toxicity(et.kind);
  if (b.is_final) {
    if (e.n_pending >= 1) {
      d.call = EndpointCall::suspend;
      d.rationale = fmt::format("{} pending at the final analysis", e.n_pending);
    } else {
      d.call = row.kind == RowKind::always_stop ? EndpointCall::stop : EndpointCall::go;
      d.rationale = fmt::format("final x={} of {}", e.x, b.n);
    }
    return d;
  }
  const bool settled = tox ? row.kind != RowKind::threshold : row.kind == RowKind::always_go;
  if (!settled && e.n_pending >= b.suspension_limit) {
    d.call = EndpointCall::suspend;
    d.rationale = fmt::format("{} pending >= {}", e.n_pending, b.suspension_limit);
    return d;
  }
  switch (row.kind) {
    case RowKind::always_go:
      d.call = EndpointCall::go;
      d.rationale = fmt::format("x={} clears the boundary", e.x);
      break;
    case RowKind::always_stop:
      d.call = EndpointCall::stop;
      d.rationale = fmt::format("x={} fails at any TESS", e.x);
      break;
    case RowKind::threshold:
      d.threshold = row.threshold;
      if (e.tess < row.threshold) {
        d.call = tox ? EndpointCall::stop : EndpointCall::go;
        d.rationale = fmt::format("TESS {:.2f} < {:.2f}", e.tess, row.threshold);
      } else {
        d.call = tox ? EndpointCall::go : EndpointCall::stop;
        d.rationale = fmt::format("TESS {:.2f} >= {:.2f}", e.tess, row.threshold);
      }
      break;
  }
  return d;
}

}  // namespace detail

/// Table lookup for an interim (or final) snapshot.
inline Decision decide(const InterimSnapshot& snap, const DecisionTable& table) {
  if (snap.endpoints.size() != table.endpoints.size())
    throw DomainError("snapshot and table differ in endpoint count");
  Decision out;
  for (std::size_t k = 0; k < table.endpoints.size(); ++k) {
    const auto& et = table.endpoints[k];
    const TableBlock* b = et.block(snap.n_enrolled);
    if (!b) throw DomainError("sample size " + std::to_string(snap.n_enrolled) + " does not match any table row");
    const auto& e = snap.endpoints[k];
    if (e.n_obs + e.n_pending != snap.n_enrolled) throw DomainError("snapshot counts are inconsistent");
    out.endpoints.push_back(detail::classify(e, et, *b));
  }
  auto any = [&](EndpointCall c, std::optional<bool> tox = {}) {
    for (std::size_t k = 0; k < out.endpoints.size(); ++k)
      if (out.endpoints[k].call == c && (!tox || is_toxicity(table.endpoints[k].kind) == *tox)) return true;
    return false;
  };
  switch (table.structure) {
    case Structure::single:
    case Structure::co_primary:
      // co-primary: one non-futile endpoint keeps the trial going
      if (any(EndpointCall::go)) out.action = Action::go;
      else if (any(EndpointCall::suspend)) out.action = Action::suspend;
      else {
        out.action = Action::no_go;
        out.reason = TrialAction::stop_futility;
      }
      break;
    case Structure::efficacy_toxicity:
      if (any(EndpointCall::stop, false)) {
        out.action = Action::no_go;
        out.reason = TrialAction::stop_futility;
      } else if (any(EndpointCall::stop, true)) {
        out.action = Action::no_go;
        out.reason = TrialAction::stop_toxicity;
      } else if (any(EndpointCall::suspend)) {
        out.action = Action::suspend;
      } else {
        out.action = Action::go;
      }
      break;
  }
  return out;
}

}  // namespace top
