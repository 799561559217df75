#pragma once

// Patient-level bookkeeping: resolved/pending status per endpoint and the
// effective sample size (ESS / TESS) at a calendar time. All durations are
// in days.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "top/error.hpp"

namespace top {

inline constexpr double kDaysPerMonth = 30.0;

/// What the endpoint's "event" is and which rate is monitored.
enum class EndpointKind {
  response,          // event = response; monitored rate = event rate (futility)
  progression_free,  // event = progression; monitored rate = event-free at window end (futility)
  toxicity,          // event = DLT; monitored rate = event rate (excess toxicity)
};

inline std::string_view to_string(EndpointKind k) {
  switch (k) {
    case EndpointKind::response: return "response";
    case EndpointKind::progression_free: return "progression-free";
    case EndpointKind::toxicity: return "toxicity";
  }
  return "?";
}

inline EndpointKind endpoint_kind_from(std::string_view s) {
  if (s == "response") return EndpointKind::response;
  if (s == "progression-free" || s == "progression_free" || s == "pfs") return EndpointKind::progression_free;
  if (s == "toxicity" || s == "dlt") return EndpointKind::toxicity;
  throw DomainError("unknown endpoint kind '" + std::string(s) + "'");
}

inline bool is_toxicity(EndpointKind k) { return k == EndpointKind::toxicity; }

struct EndpointDef {
  std::string name;
  double window_days = 0.0;  // 0 means immediately ascertainable
  EndpointKind kind = EndpointKind::response;
  double threshold = 0.5;  // phi: futility threshold, or phi_T for toxicity

  void validate() const {
    if (name.empty()) throw DomainError("endpoint name is empty");
    if (!(window_days >= 0.0)) throw DomainError("endpoint '" + name + "': window must be >= 0");
    if (!(threshold > 0.0 && threshold < 1.0))
      throw DomainError("endpoint '" + name + "': threshold must lie in (0, 1)");
  }

  /// Whether an endpoint event counts toward the monitored rate.
  bool event_is_monitored() const { return kind != EndpointKind::progression_free; }
};

enum class Status { event, no_event, pending };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::event: return "event";
    case Status::no_event: return "no_event";
    case Status::pending: return "pending";
  }
  return "?";
}

inline Status status_from(std::string_view s) {
  if (s == "event") return Status::event;
  if (s == "no_event") return Status::no_event;
  if (s == "pending") return Status::pending;
  throw ParseError("unknown status '" + std::string(s) + "' (expected event, no_event or pending)");
}

/// One endpoint of one patient as seen at an analysis.
struct EndpointObservation {
  Status status = Status::pending;
  double follow_up_days = 0.0;  // only meaningful while pending
};

/// A patient row as entered during trial conduct (or produced by observe()).
struct ObservedPatient {
  int id = 0;
  double arrival = 0.0;
  std::vector<EndpointObservation> endpoints;
};

/// A patient with latent outcomes, used by the simulator. event_time[k] is
/// the delay from arrival to the endpoint-k event, or empty when no event
/// occurs within the window.
struct PatientRecord {
  int id = 0;
  double arrival = 0.0;
  std::vector<std::optional<double>> event_time;

  /// Calendar time at which endpoint `k` resolves.
  double resolution_time(std::size_t k, const EndpointDef& ep) const {
    const auto& e = event_time.at(k);
    if (e && *e <= ep.window_days) return arrival + *e;
    return arrival + ep.window_days;
  }

  Status status(std::size_t k, const EndpointDef& ep, double at) const {
    const auto& e = event_time.at(k);
    if (e && *e <= ep.window_days && arrival + *e <= at) return Status::event;
    if (arrival + ep.window_days <= at) return Status::no_event;
    return Status::pending;
  }

  ObservedPatient observe(std::span<const EndpointDef> endpoints, double at) const {
    ObservedPatient out{id, arrival, {}};
    out.endpoints.reserve(endpoints.size());
    for (std::size_t k = 0; k < endpoints.size(); ++k)
      out.endpoints.push_back({status(k, endpoints[k], at), std::max(0.0, at - arrival)});
    return out;
  }
};

struct EndpointSnapshot {
  int x = 0;          // monitored outcomes among resolved patients
  int n_obs = 0;      // resolved patients
  int n_pending = 0;  // pending patients
  double tess = 0.0;  // n_obs + total pending follow-up / window

  friend bool operator==(const EndpointSnapshot&, const EndpointSnapshot&) = default;
};

struct InterimSnapshot {
  int n_enrolled = 0;
  std::vector<EndpointSnapshot> endpoints;

  friend bool operator==(const InterimSnapshot&, const InterimSnapshot&) = default;
};

/// ESS of a single patient: 1 once resolved, t/A (capped at 1) while pending.
inline double ess(double follow_up_days, double window_days, bool resolved) {
  if (!(follow_up_days >= 0.0)) throw DomainError("ess: negative follow-up");
  if (resolved) return 1.0;
  if (!(window_days > 0.0)) throw DomainError("ess: pending patient needs a positive window");
  return std::min(follow_up_days / window_days, 1.0);
}

inline bool counts_toward_rate(Status s, const EndpointDef& ep) {
  if (s == Status::pending) return false;
  return (s == Status::event) == ep.event_is_monitored();
}

/// Per-patient ESS for one endpoint, in input order.
inline std::vector<double> ess_column(std::span<const ObservedPatient> patients, std::size_t k,
                                      const EndpointDef& ep) {
  std::vector<double> out;
  out.reserve(patients.size());
  for (const auto& p : patients) {
    const auto& o = p.endpoints.at(k);
    out.push_back(ess(o.follow_up_days, ep.window_days, o.status != Status::pending));
  }
  return out;
}

inline EndpointSnapshot endpoint_snapshot(std::span<const ObservedPatient> patients, std::size_t k,
                                          const EndpointDef& ep) {
  EndpointSnapshot s;
  double pending_follow_up = 0.0;
  for (const auto& p : patients) {
    const auto& o = p.endpoints.at(k);
    if (o.status == Status::pending) {
      if (!(o.follow_up_days >= 0.0)) throw DomainError("negative follow-up for patient " + std::to_string(p.id));
      ++s.n_pending;
      pending_follow_up += std::min(o.follow_up_days, ep.window_days);
    } else {
      ++s.n_obs;
      if (counts_toward_rate(o.status, ep)) ++s.x;
    }
  }
  s.tess = s.n_obs;
  if (s.n_pending > 0) {
    if (!(ep.window_days > 0.0)) throw DomainError("pending patients on an endpoint with zero window");
    s.tess += pending_follow_up / ep.window_days;
  }
  return s;
}

inline InterimSnapshot snapshot(std::span<const ObservedPatient> patients, std::span<const EndpointDef> endpoints) {
  InterimSnapshot out{static_cast<int>(patients.size()), {}};
  out.endpoints.reserve(endpoints.size());
  for (const auto& p : patients)
    if (p.endpoints.size() != endpoints.size())
      throw DomainError("patient " + std::to_string(p.id) + " has the wrong number of endpoint columns");
  for (std::size_t k = 0; k < endpoints.size(); ++k)
    out.endpoints.push_back(endpoint_snapshot(patients, k, endpoints[k]));
  return out;
}

namespace detail {
inline void check_arrivals(std::span<const PatientRecord> records, double at) {
  for (const auto& r : records)
    if (r.arrival > at) throw DomainError("patient " + std::to_string(r.id) + " arrives after the analysis time");
}
}  // namespace detail

/// TESS for endpoint `k` of latent records at calendar time `at`.
inline double tess(std::span<const PatientRecord> records, std::size_t k, const EndpointDef& ep, double at) {
  detail::check_arrivals(records, at);
  int n_obs = 0;
  double pending_follow_up = 0.0;
  for (const auto& r : records) {
    if (r.status(k, ep, at) == Status::pending)
      pending_follow_up += at - r.arrival;
    else
      ++n_obs;
  }
  return pending_follow_up > 0.0 ? n_obs + pending_follow_up / ep.window_days : n_obs;
}

inline InterimSnapshot snapshot(std::span<const PatientRecord> records, std::span<const EndpointDef> endpoints,
                                double at) {
  detail::check_arrivals(records, at);
  std::vector<ObservedPatient> observed;
  observed.reserve(records.size());
  for (const auto& r : records) observed.push_back(r.observe(endpoints, at));
  return snapshot(std::span<const ObservedPatient>(observed), endpoints);
}

}  // namespace top
