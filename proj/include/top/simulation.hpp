#pragma once

// Monte Carlo trial simulator with delayed outcomes. Every design in a roster
// is run on the same latent patients for a replicate (paired comparison), and
// each replicate draws from its own generator derived from (seed, index), so
// reports do not depend on thread scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "top/baselines.hpp"
#include "top/decision_table.hpp"
#include "top/design.hpp"
#include "top/error.hpp"
#include "top/trial_state.hpp"

namespace top {

enum class DesignKind { top, bop2, simon, thall_simon };

inline std::string_view to_string(DesignKind d) {
  switch (d) {
    case DesignKind::top: return "TOP";
    case DesignKind::bop2: return "BOP2";
    case DesignKind::simon: return "Simon";
    case DesignKind::thall_simon: return "TS";
  }
  return "?";
}

inline DesignKind design_kind_from(std::string_view s) {
  if (s == "TOP" || s == "top") return DesignKind::top;
  if (s == "BOP2" || s == "bop2") return DesignKind::bop2;
  if (s == "Simon" || s == "simon") return DesignKind::simon;
  if (s == "TS" || s == "ts" || s == "thall-simon") return DesignKind::thall_simon;
  throw DomainError("unknown design '" + std::string(s) + "'");
}

enum class AccrualMode { poisson, deterministic };

struct EventTimeModel {
  enum class Family { weibull, uniform };
  Family family = Family::weibull;
  double shape = 2.0;          // Weibull shape k
  double late_fraction = 0.5;  // share of events falling in the second half of the window
};

struct SimonHypotheses {
  double p0 = 0.3;
  double p1 = 0.5;
  double alpha = 0.1;
  double beta = 0.1;
};

struct Scenario {
  std::string name;
  DesignSpec design;  // hypotheses, looks and endpoint windows for TOP / BOP2
  std::vector<double> true_rates;  // per endpoint monitored rate
  double log_odds_ratio = 0.0;
  double accrual_per_month = 2.0;
  AccrualMode accrual = AccrualMode::poisson;
  EventTimeModel event_time;
  SimonHypotheses simon;
  std::vector<DesignKind> roster{DesignKind::simon, DesignKind::thall_simon, DesignKind::bop2, DesignKind::top};
  bool simon_cap_at_n = true;  // over-run enrollment never exceeds the design maximum

  void validate() const {
    design.validate();
    if (true_rates.size() != design.endpoints.size()) throw DomainError("scenario: one true rate per endpoint");
    for (double r : true_rates)
      if (!(r > 0.0 && r < 1.0)) throw DomainError("scenario: true rates must lie in (0, 1)");
    if (!(accrual_per_month > 0.0)) throw DomainError("scenario: accrual rate must be positive");
    if (event_time.family == EventTimeModel::Family::weibull && !(event_time.shape > 0.0))
      throw DomainError("scenario: Weibull shape must be positive");
    if (!(event_time.late_fraction > 0.0 && event_time.late_fraction < 1.0))
      throw DomainError("scenario: late fraction must lie in (0, 1)");
    if (roster.empty()) throw DomainError("scenario: empty design roster");
    design.cells(true_rates, log_odds_ratio);  // throws when infeasible
  }

  /// Endpoint monitored by the single-endpoint comparators (Simon, TS).
  const EndpointDef& primary() const { return design.endpoints.front(); }
};

/// Arrival days of N patients for an accrual rate in patients per month.
template <class Rng>
std::vector<double> gen_accrual(double per_month, int N, Rng& rng, AccrualMode mode = AccrualMode::poisson) {
  if (!(per_month > 0.0)) throw DomainError("gen_accrual: rate must be positive");
  if (N < 0) throw DomainError("gen_accrual: N must be >= 0");
  const double mean_gap = kDaysPerMonth / per_month;
  std::exponential_distribution<double> gap(1.0 / mean_gap);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(N));
  double t = 0.0;
  for (int i = 0; i < N; ++i) {
    t += mode == AccrualMode::poisson ? gap(rng) : mean_gap;
    out.push_back(t);
  }
  return out;
}

/// Event-time distribution on [0, window]: a Weibull truncated to the window
/// with scale chosen so that `late_fraction` of events land after window/2,
/// or uniform on the window.
class EventTimeSampler {
 public:
  EventTimeSampler(double window_days, const EventTimeModel& model) : window_(window_days), model_(model) {
    if (window_ <= 0.0 || model_.family == EventTimeModel::Family::uniform) return;
    const double k = model_.shape;
    const double target = 1.0 - model_.late_fraction;  // P(T <= A/2 | T <= A)
    const double lower = std::pow(2.0, -k);
    if (!(target > lower && target < 1.0))
      throw DomainError("event-time model: Weibull shape " + std::to_string(k) + " cannot place " +
                        std::to_string(model_.late_fraction) + " of events in the second half of the window");
    // with u = (A / (2 scale))^k: (1 - e^-u) / (1 - e^(-2^k u)) = target
    const double two_k = std::pow(2.0, k);
    auto g = [&](double log_u) {
      const double u = std::exp(log_u);
      return -std::expm1(-u) / -std::expm1(-two_k * u) - target;
    };
    auto tol = [](double a, double b) { return std::fabs(b - a) < 1e-14; };
    const auto [lo, hi] = boost::math::tools::bisect(g, -30.0, 10.0, tol);
    const double u = std::exp(0.5 * (lo + hi));
    scale_ = window_ / (2.0 * std::pow(u, 1.0 / k));
    mass_ = -std::expm1(-std::pow(window_ / scale_, k));
  }

  double scale() const { return scale_; }

  /// Truncated CDF on [0, window].
  double cdf(double t) const {
    if (window_ <= 0.0) return 1.0;
    t = std::clamp(t, 0.0, window_);
    if (model_.family == EventTimeModel::Family::uniform) return t / window_;
    return -std::expm1(-std::pow(t / scale_, model_.shape)) / mass_;
  }

  template <class Rng>
  double operator()(Rng& rng) const {
    if (window_ <= 0.0) return 0.0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    if (model_.family == EventTimeModel::Family::uniform) return u * window_;
    const double t = scale_ * std::pow(-std::log1p(-u * mass_), 1.0 / model_.shape);
    return std::min(t, window_);
  }

 private:
  double window_;
  EventTimeModel model_;
  double scale_ = 1.0;
  double mass_ = 1.0;
};

/// Latent outcomes for the scenario's patients (arrival left at 0). The joint
/// category of the monitored indicators is drawn from the 2x2 table implied
/// by the marginals and log odds ratio.
template <class Rng>
std::vector<PatientRecord> gen_outcomes(const Scenario& sc, int n_patients, Rng& rng) {
  const auto& eps = sc.design.endpoints;
  const auto cells = sc.design.cells(sc.true_rates, sc.log_odds_ratio);
  std::vector<EventTimeSampler> samplers;
  for (const auto& ep : eps) samplers.emplace_back(ep.window_days, sc.event_time);
  std::discrete_distribution<int> category(cells.begin(), cells.end());
  std::vector<PatientRecord> out;
  out.reserve(static_cast<std::size_t>(n_patients));
  for (int i = 0; i < n_patients; ++i) {
    PatientRecord r{i + 1, 0.0, std::vector<std::optional<double>>(eps.size())};
    const int c = category(rng);
    for (std::size_t k = 0; k < eps.size(); ++k) {
      // category c over indicators: single {0: 1, 1: 0}; joint (1,1), (1,0), (0,1), (0,0)
      const bool indicator = eps.size() == 1 ? c == 0 : (k == 0 ? c < 2 : (c % 2 == 0));
      const bool event = indicator == eps[k].event_is_monitored();
      if (event) r.event_time[k] = samplers[k](rng);
    }
    out.push_back(std::move(r));
  }
  return out;
}

template <class Rng>
std::vector<PatientRecord> gen_outcomes(const Scenario& sc, Rng& rng) {
  return gen_outcomes(sc, sc.design.N, rng);
}

/// Calibrated comparators for one scenario, built once and shared by all replicates.
struct PreparedDesigns {
  CalibrationResult calibration;
  DecisionTable table;
  SimonDesign simon;
  ThallSimonRule ts;
};

inline PreparedDesigns prepare_designs(const Scenario& sc) {
  sc.validate();
  PreparedDesigns p;
  p.calibration = calibrate(sc.design);
  p.table = decision_table(sc.design, p.calibration.params);
  p.simon = simon_search(sc.simon.p0, sc.simon.p1, sc.simon.alpha, sc.simon.beta).optimal;
  const auto& ep = sc.primary();
  p.ts = calibrate_thall_simon(ep.threshold, ep.threshold, sc.design.alternative[0], sc.design.alpha, sc.design.looks,
                               sc.design.marginal_prior(0));
  return p;
}

enum class Verdict { promising, futility, toxicity };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::promising: return "promising";
    case Verdict::futility: return "not-promising (futility)";
    case Verdict::toxicity: return "not-promising (toxicity)";
  }
  return "?";
}

struct TrialResult {
  Verdict verdict = Verdict::futility;
  int n_used = 0;
  double duration_days = 0.0;  // first enrollment to final verdict
};

/// One replicate's latent data; identical for every design of the roster.
struct TrialData {
  std::vector<double> gaps;  // inter-arrival days
  std::vector<PatientRecord> patients;
};

template <class Rng>
TrialData gen_trial_data(const Scenario& sc, int n_patients, Rng& rng) {
  TrialData d;
  const auto arrivals = gen_accrual(sc.accrual_per_month, n_patients, rng, sc.accrual);
  double prev = 0.0;
  for (double a : arrivals) {
    d.gaps.push_back(a - prev);
    prev = a;
  }
  d.patients = gen_outcomes(sc, n_patients, rng);
  return d;
}

namespace detail {

inline double next_resolution(std::span<const PatientRecord> enrolled, std::span<const EndpointDef> eps, double t) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : enrolled)
    for (std::size_t k = 0; k < eps.size(); ++k) {
      const double rt = r.resolution_time(k, eps[k]);
      if (rt > t) best = std::min(best, rt);
    }
  return best;
}

inline double all_resolved(std::span<const PatientRecord> enrolled, std::span<const EndpointDef> eps, double t,
                           std::optional<std::size_t> only = {}) {
  for (const auto& r : enrolled)
    for (std::size_t k = 0; k < eps.size(); ++k)
      if (!only || *only == k) t = std::max(t, r.resolution_time(k, eps[k]));
  return t;
}

inline int count_monitored(std::span<const PatientRecord> enrolled, const EndpointDef& ep, std::size_t k) {
  int x = 0;
  for (const auto& r : enrolled) {
    const auto& e = r.event_time.at(k);
    const bool event = e && *e <= ep.window_days;
    if (event == ep.event_is_monitored()) ++x;
  }
  return x;
}

inline Verdict verdict_from(const Decision& d) {
  if (d.action == Action::go) return Verdict::promising;
  return d.reason == TrialAction::stop_toxicity ? Verdict::toxicity : Verdict::futility;
}

// Table-driven conduct for TOP (real-time, suspension rule) and BOP2
// (suspend until complete).
inline TrialResult conduct_table(const TrialData& data, const Scenario& sc, const DecisionTable& table, bool bop2) {
  const auto& eps = sc.design.endpoints;
  const auto& looks = sc.design.looks;
  std::vector<PatientRecord> enrolled;
  enrolled.reserve(looks.back());
  double release = 0.0, first = 0.0;
  std::size_t li = 0;
  for (int i = 0; i < sc.design.N; ++i) {
    PatientRecord r = data.patients[i];
    r.arrival = release + data.gaps[i];
    if (i == 0) first = r.arrival;
    release = r.arrival;
    enrolled.push_back(std::move(r));
    if (i + 1 != looks[li]) continue;

    double t = release;
    Decision d;
    for (;;) {
      if (bop2) t = all_resolved(enrolled, eps, t);
      d = decide(snapshot(std::span<const PatientRecord>(enrolled), eps, t), table);
      if (d.action != Action::suspend) break;
      t = next_resolution(enrolled, eps, t);
    }
    const bool final = i + 1 == sc.design.N;
    if (d.action == Action::no_go || final) return {verdict_from(d), i + 1, t - first};
    release = t;
    ++li;
  }
  return {Verdict::futility, sc.design.N, release - first};  // unreachable: the last look is N
}

inline TrialResult conduct_thall_simon(const TrialData& data, const Scenario& sc, const ThallSimonRule& rule) {
  const auto& eps = sc.design.endpoints;
  const EndpointDef& ep = sc.primary();
  std::vector<PatientRecord> enrolled;
  double release = 0.0, first = 0.0;
  std::size_t li = 0;
  const int N = rule.looks.back();
  for (int i = 0; i < N; ++i) {
    PatientRecord r = data.patients[i];
    r.arrival = release + data.gaps[i];
    if (i == 0) first = r.arrival;
    release = r.arrival;
    enrolled.push_back(std::move(r));
    if (i + 1 != rule.looks[li]) continue;
    const double t = all_resolved(enrolled, eps, release, std::size_t{0});
    const int x = count_monitored(enrolled, ep, 0);
    const bool stop = ts_stop(x, i + 1, 0, rule, ep.threshold) == TsAction::stop;
    if (stop) return {Verdict::futility, i + 1, t - first};
    if (i + 1 == N) return {Verdict::promising, N, t - first};
    release = t;
    ++li;
  }
  return {Verdict::futility, N, release - first};
}

// Over-run: accrual never pauses; the stage-1 look runs once the first n1
// outcomes are known, and patients keep enrolling meanwhile.
template <class Rng>
TrialResult conduct_simon(const TrialData& data, const Scenario& sc, const SimonDesign& simon, Rng& rng) {
  const auto& eps = sc.design.endpoints;
  const EndpointDef& ep = sc.primary();
  std::vector<PatientRecord> all;
  double t = 0.0;
  for (int i = 0; i < simon.n; ++i) {
    PatientRecord r = data.patients[i];
    t += data.gaps[i];
    r.arrival = t;
    all.push_back(std::move(r));
  }
  const double first = all.front().arrival;
  const std::span<const PatientRecord> stage1(all.data(), static_cast<std::size_t>(simon.n1));
  const double t1 = all_resolved(stage1, eps, 0.0, std::size_t{0});
  const int x1 = count_monitored(stage1, ep, 0);
  if (x1 <= simon.r1) {
    int enrolled = static_cast<int>(std::count_if(all.begin(), all.end(), [&](const auto& r) { return r.arrival <= t1; }));
    if (!sc.simon_cap_at_n && enrolled == simon.n) {
      // count over-run patients beyond the design maximum
      std::exponential_distribution<double> gap(sc.accrual_per_month / kDaysPerMonth);
      double a = all.back().arrival;
      for (;;) {
        a += sc.accrual == AccrualMode::poisson ? gap(rng) : kDaysPerMonth / sc.accrual_per_month;
        if (a > t1) break;
        ++enrolled;
      }
    }
    return {Verdict::futility, std::max(enrolled, simon.n1), t1 - first};
  }
  const double tn = all_resolved(all, eps, 0.0, std::size_t{0});
  const int x = count_monitored(all, ep, 0);
  return {x > simon.r ? Verdict::promising : Verdict::futility, simon.n, tn - first};
}

}  // namespace detail

inline int patients_needed(const Scenario& sc, const PreparedDesigns& p) {
  return std::max(sc.design.N, p.simon.n);
}

/// Runs one design on one replicate's data.
template <class Rng>
TrialResult run_trial(DesignKind kind, const PreparedDesigns& p, const Scenario& sc, const TrialData& data, Rng& rng) {
  switch (kind) {
    case DesignKind::top: return detail::conduct_table(data, sc, p.table, false);
    case DesignKind::bop2: return detail::conduct_table(data, sc, p.table, true);
    case DesignKind::thall_simon: return detail::conduct_thall_simon(data, sc, p.ts);
    case DesignKind::simon: return detail::conduct_simon(data, sc, p.simon, rng);
  }
  throw DomainError("run_trial: unknown design");
}

/// Generates fresh data and runs one design.
template <class Rng>
TrialResult run_trial(DesignKind kind, const PreparedDesigns& p, const Scenario& sc, Rng& rng) {
  const TrialData data = gen_trial_data(sc, patients_needed(sc, p), rng);
  return run_trial(kind, p, sc, data, rng);
}

/// Generator for replicate `index` of a run seeded with `seed`.
inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct DesignOC {
  DesignKind design = DesignKind::top;
  double accept_rate = 0.0;  // type I error or power
  double expected_n = 0.0;
  double mean_duration_months = 0.0;
  std::optional<double> accept_se;  // undefined for a single replicate
  std::optional<double> expected_n_se;
  std::optional<double> duration_se;
  double stop_futility = 0.0;
  double stop_toxicity = 0.0;
};

struct OCReport {
  std::string scenario;
  int replicates = 0;
  std::uint64_t seed = 0;
  CutoffParams params;
  SimonDesign simon;
  double ts_pi_L = 0.0;
  std::vector<DesignOC> designs;

  const DesignOC& at(DesignKind k) const {
    for (const auto& d : designs)
      if (d.design == k) return d;
    throw DomainError("design " + std::string(to_string(k)) + " is not in the report");
  }
};

/// Progress and cancellation hooks for long simulations.
struct SimulationControl {
  std::atomic<bool> cancel{false};
  std::atomic<int> completed{0};
};

class Cancelled : public std::runtime_error {
 public:
  Cancelled() : std::runtime_error("simulation cancelled") {}
};

inline OCReport operating_characteristics(const PreparedDesigns& p, const Scenario& sc, int replicates,
                                          std::uint64_t seed, unsigned threads = 0,
                                          SimulationControl* control = nullptr) {
  sc.validate();
  if (replicates < 1) throw DomainError("operating_characteristics: replicates must be >= 1");
  const std::size_t nd = sc.roster.size();
  std::vector<TrialResult> results(static_cast<std::size_t>(replicates) * nd);
  const int n_patients = patients_needed(sc, p);

  auto work = [&](int begin, int end) {
    for (int rep = begin; rep < end; ++rep) {
      if (control && control->cancel.load()) return;
      auto rng = replicate_rng(seed, static_cast<std::uint64_t>(rep));
      const TrialData data = gen_trial_data(sc, n_patients, rng);
      for (std::size_t d = 0; d < nd; ++d) {
        auto design_rng = rng;  // over-run draws must not perturb the other designs
        results[static_cast<std::size_t>(rep) * nd + d] = run_trial(sc.roster[d], p, sc, data, design_rng);
      }
      if (control) control->completed.fetch_add(1);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(replicates));
  if (threads <= 1) {
    work(0, replicates);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (replicates + static_cast<int>(threads) - 1) / static_cast<int>(threads);
    for (unsigned t = 0; t < threads; ++t) {
      const int b = static_cast<int>(t) * chunk, e = std::min(replicates, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  if (control && control->cancel.load()) throw Cancelled();

  OCReport rep{sc.name, replicates, seed, p.calibration.params, p.simon, p.ts.pi_L, {}};
  for (std::size_t d = 0; d < nd; ++d) {
    double acc = 0, acc2 = 0, n = 0, n2 = 0, dur = 0, dur2 = 0, fut = 0, tox = 0;
    for (int r = 0; r < replicates; ++r) {
      const auto& tr = results[static_cast<std::size_t>(r) * nd + d];
      const double a = tr.verdict == Verdict::promising ? 1.0 : 0.0;
      const double months = tr.duration_days / kDaysPerMonth;
      acc += a;
      acc2 += a * a;
      n += tr.n_used;
      n2 += static_cast<double>(tr.n_used) * tr.n_used;
      dur += months;
      dur2 += months * months;
      fut += tr.verdict == Verdict::futility;
      tox += tr.verdict == Verdict::toxicity;
    }
    const double R = replicates;
    auto se = [&](double s, double s2) -> std::optional<double> {
      if (replicates < 2) return std::nullopt;
      const double mean = s / R;
      const double var = std::max(0.0, (s2 - R * mean * mean) / (R - 1.0));
      return std::sqrt(var / R);
    };
    DesignOC oc;
    oc.design = sc.roster[d];
    oc.accept_rate = acc / R;
    oc.expected_n = n / R;
    oc.mean_duration_months = dur / R;
    oc.accept_se = se(acc, acc2);
    oc.expected_n_se = se(n, n2);
    oc.duration_se = se(dur, dur2);
    oc.stop_futility = fut / R;
    oc.stop_toxicity = tox / R;
    rep.designs.push_back(oc);
  }
  return rep;
}

inline OCReport operating_characteristics(const Scenario& sc, int replicates, std::uint64_t seed, unsigned threads = 0) {
  return operating_characteristics(prepare_designs(sc), sc, replicates, seed, threads);
}

/// The nine study scenarios: 1-3 single ORR, 4-6 ORR + PFS4 co-primary,
/// 7-9 ORR + DLT. Joint association defaults to independence.
inline std::vector<Scenario> scenario_presets() {
  const double days4 = 4 * kDaysPerMonth, days2 = 2 * kDaysPerMonth;
  auto single = [&](std::string name, double orr) {
    Scenario s;
    s.name = std::move(name);
    s.design.structure = Structure::single;
    s.design.N = 46;
    s.design.looks = {12, 24, 36, 46};
    s.design.endpoints = {{"ORR", days4, EndpointKind::response, 0.3}};
    s.design.alternative = {0.5};
    s.design.alpha = 0.1;
    s.true_rates = {orr};
    s.simon = {0.3, 0.5, 0.1, 0.1};
    return s;
  };
  auto coprimary = [&](std::string name, double orr, double pfs) {
    Scenario s;
    s.name = std::move(name);
    s.design.structure = Structure::co_primary;
    s.design.N = 40;
    s.design.looks = {10, 20, 30, 40};
    s.design.endpoints = {{"ORR", days2, EndpointKind::response, 0.45},
                          {"PFS4", days4, EndpointKind::progression_free, 0.30}};
    s.design.alternative = {0.65, 0.45};
    s.design.alpha = 0.1;
    s.true_rates = {orr, pfs};
    s.simon = {0.45, 0.65, 0.1, 0.15};
    return s;
  };
  auto efftox = [&](std::string name, double orr, double dlt) {
    Scenario s;
    s.name = std::move(name);
    s.design.structure = Structure::efficacy_toxicity;
    s.design.N = 46;
    s.design.looks = {12, 24, 36, 46};
    s.design.endpoints = {{"ORR", days4, EndpointKind::response, 0.3}, {"DLT", days2, EndpointKind::toxicity, 0.3}};
    s.design.alternative = {0.5, 0.15};
    s.design.alpha = 0.1;
    s.true_rates = {orr, dlt};
    s.simon = {0.3, 0.5, 0.1, 0.1};
    return s;
  };
  return {single("scenario-1", 0.2),          single("scenario-2", 0.3),          single("scenario-3", 0.5),
          coprimary("scenario-4", 0.3, 0.3),  coprimary("scenario-5", 0.4, 0.55), coprimary("scenario-6", 0.65, 0.45),
          efftox("scenario-7", 0.3, 0.3),     efftox("scenario-8", 0.45, 0.4),    efftox("scenario-9", 0.5, 0.18)};
}

}  // namespace top
