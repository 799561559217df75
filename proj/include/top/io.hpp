#pragma once

// Serialization: structured JSON for specs, params, tables, scenarios and
// reports; a tabular decision table in the printed-protocol layout; interim
// patient rows as CSV.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "top/baselines.hpp"
#include "top/decision_table.hpp"
#include "top/design.hpp"
#include "top/error.hpp"
#include "top/simulation.hpp"
#include "top/trial_state.hpp"

namespace top::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

template <class T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DomainError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DomainError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key);
}

inline void check_schema(const json& j) {
  if (!j.is_object()) throw DomainError("expected a JSON object");
  if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
    throw DomainError("unsupported schema_version " + j.at("schema_version").dump());
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view s, std::string_view what) {
  s = trim(s);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ParseError(fmt::format("{}: cannot parse '{}' as a number", what, s));
  return v;
}

inline std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  for (auto l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    out.emplace_back(l);
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

}  // namespace detail

inline json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

/// Canonical text for every structured output: two-space indent, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- design spec ----------------------------------------------------------

inline json to_json(const DesignSpec& s) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["structure"] = to_string(s.structure);
  j["N"] = s.N;
  j["looks"] = s.looks;
  j["alpha"] = s.alpha;
  j["endpoints"] = json::array();
  for (std::size_t k = 0; k < s.endpoints.size(); ++k) {
    const auto& e = s.endpoints[k];
    j["endpoints"].push_back({{"name", e.name},
                              {"kind", to_string(e.kind)},
                              {"window_days", e.window_days},
                              {"threshold", e.threshold},
                              {"alternative", k < s.alternative.size() ? json(s.alternative[k]) : json()}});
  }
  if (s.prior) j["prior"] = s.prior->alpha;
  j["null_log_odds_ratio"] = s.null_log_odds_ratio;
  j["alt_log_odds_ratio"] = s.alt_log_odds_ratio;
  j["suspension"] = to_string(s.suspension);
  if (!(s.grid == CalibrationGrid::standard())) j["grid"] = {{"C", s.grid.C}, {"gamma", s.grid.gamma}};
  return j;
}

inline DesignSpec design_from_json(const json& j) {
  detail::check_schema(j);
  DesignSpec s;
  s.structure = structure_from(detail::get<std::string>(j, "structure"));
  s.N = detail::get<int>(j, "N");
  s.looks = detail::get<std::vector<int>>(j, "looks");
  s.alpha = detail::get<double>(j, "alpha");
  const json& eps = j.contains("endpoints") ? j.at("endpoints") : json();
  if (!eps.is_array()) throw DomainError("missing field 'endpoints'");
  for (const auto& e : eps) {
    EndpointDef d;
    d.name = detail::get<std::string>(e, "name");
    d.kind = endpoint_kind_from(detail::get_or<std::string>(e, "kind", "response"));
    if (e.contains("window_months"))
      d.window_days = detail::get<double>(e, "window_months") * kDaysPerMonth;
    else
      d.window_days = detail::get_or<double>(e, "window_days", 0.0);
    d.threshold = detail::get<double>(e, "threshold");
    s.endpoints.push_back(d);
    s.alternative.push_back(detail::get<double>(e, "alternative"));
  }
  if (j.contains("prior") && !j.at("prior").is_null())
    s.prior = DirichletPrior{detail::get<std::vector<double>>(j, "prior")};
  s.null_log_odds_ratio = detail::get_or<double>(j, "null_log_odds_ratio", 0.0);
  s.alt_log_odds_ratio = detail::get_or<double>(j, "alt_log_odds_ratio", 0.0);
  s.suspension = suspension_mode_from(detail::get_or<std::string>(j, "suspension", "table-consistent"));
  if (j.contains("grid")) {
    s.grid.C = detail::get<std::vector<double>>(j.at("grid"), "C");
    s.grid.gamma = detail::get<std::vector<double>>(j.at("grid"), "gamma");
  }
  s.validate();
  return s;
}

// ---- cutoff params / calibration -----------------------------------------

inline json to_json(const CutoffParams& p) {
  json j{{"C", p.C}, {"gamma", p.gamma}};
  if (p.tox_C) j["tox_C"] = *p.tox_C;
  if (p.tox_gamma) j["tox_gamma"] = *p.tox_gamma;
  return j;
}

/// Accepts a bare params object or a calibration result carrying "params".
inline CutoffParams params_from_json(const json& j) {
  detail::check_schema(j);
  const json& p = j.contains("params") ? j.at("params") : j;
  CutoffParams out{detail::get<double>(p, "C"), detail::get<double>(p, "gamma"), {}, {}};
  if (p.contains("tox_C")) out.tox_C = detail::get<double>(p, "tox_C");
  if (p.contains("tox_gamma")) out.tox_gamma = detail::get<double>(p, "tox_gamma");
  out.validate();
  return out;
}

inline json to_json(const CalibrationResult& r, const DesignSpec& spec) {
  return {{"schema_version", kSchemaVersion},
          {"params", to_json(r.params)},
          {"type1", r.type1},
          {"power", r.power},
          {"expected_n_null", r.en_null},
          {"expected_n_alt", r.en_alt},
          {"feasible_points", r.feasible},
          {"grid_points", spec.grid.C.size() * spec.grid.gamma.size()}};
}

// ---- decision table: structured ------------------------------------------

inline json to_json(const DecisionTable& t) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["structure"] = to_string(t.structure);
  j["N"] = t.N;
  j["looks"] = t.looks;
  j["alpha"] = t.alpha;
  j["params"] = to_json(t.params);
  j["suspension"] = to_string(t.suspension);
  j["rounded"] = t.rounded;
  j["endpoints"] = json::array();
  for (const auto& e : t.endpoints) {
    json je{{"name", e.name},
            {"kind", to_string(e.kind)},
            {"threshold", e.threshold},
            {"alternative", e.alternative},
            {"prior", {{"a0", e.prior.a0}, {"b0", e.prior.b0}}},
            {"blocks", json::array()}};
    for (const auto& b : e.blocks) {
      json jb{{"n", b.n}, {"final", b.is_final}, {"suspension_limit", b.suspension_limit}, {"rows", json::array()}};
      for (const auto& r : b.rows) {
        json jr{{"x", r.x}, {"kind", to_string(r.kind)}};
        if (r.kind == RowKind::threshold) jr["threshold"] = r.threshold;
        jb["rows"].push_back(std::move(jr));
      }
      je["blocks"].push_back(std::move(jb));
    }
    j["endpoints"].push_back(std::move(je));
  }
  return j;
}

inline RowKind row_kind_from(std::string_view s) {
  if (s == "always-stop") return RowKind::always_stop;
  if (s == "threshold") return RowKind::threshold;
  if (s == "always-go") return RowKind::always_go;
  throw DomainError("unknown row kind '" + std::string(s) + "'");
}

inline DecisionTable table_from_json(const json& j) {
  detail::check_schema(j);
  DecisionTable t;
  t.structure = structure_from(detail::get<std::string>(j, "structure"));
  t.N = detail::get<int>(j, "N");
  t.looks = detail::get<std::vector<int>>(j, "looks");
  t.alpha = detail::get<double>(j, "alpha");
  t.params = params_from_json(j.at("params"));
  t.suspension = suspension_mode_from(detail::get_or<std::string>(j, "suspension", "table-consistent"));
  t.rounded = detail::get_or<bool>(j, "rounded", false);
  if (!j.contains("endpoints") || !j.at("endpoints").is_array()) throw DomainError("missing field 'endpoints'");
  for (const auto& je : j.at("endpoints")) {
    EndpointTable e;
    e.name = detail::get<std::string>(je, "name");
    e.kind = endpoint_kind_from(detail::get<std::string>(je, "kind"));
    e.threshold = detail::get<double>(je, "threshold");
    e.alternative = detail::get<double>(je, "alternative");
    e.prior = {detail::get<double>(je.at("prior"), "a0"), detail::get<double>(je.at("prior"), "b0")};
    for (const auto& jb : je.at("blocks")) {
      TableBlock b{detail::get<int>(jb, "n"), detail::get<bool>(jb, "final"), detail::get<int>(jb, "suspension_limit"), {}};
      for (const auto& jr : jb.at("rows")) {
        TableRow r{detail::get<int>(jr, "x"), row_kind_from(detail::get<std::string>(jr, "kind")), {}};
        r.threshold = r.kind == RowKind::threshold ? detail::get<double>(jr, "threshold")
                                                   : std::numeric_limits<double>::quiet_NaN();
        b.rows.push_back(r);
      }
      if (static_cast<int>(b.rows.size()) != b.n + 1) throw DomainError("table block must have one row per count");
      e.blocks.push_back(std::move(b));
    }
    t.endpoints.push_back(std::move(e));
  }
  return t;
}

// ---- decision table: tabular ---------------------------------------------

/// Action label of one tabular line.
enum class LineAction { suspend, no_go, go, go_if_tess_below, no_go_if_tess_below };

inline std::string_view to_string(LineAction a) {
  switch (a) {
    case LineAction::suspend: return "Suspend";
    case LineAction::no_go: return "NoGo";
    case LineAction::go: return "Go";
    case LineAction::go_if_tess_below: return "GoIfTESS<";
    case LineAction::no_go_if_tess_below: return "NoGoIfTESS<";
  }
  return "?";
}

inline LineAction line_action_from(std::string_view s) {
  if (s == "Suspend") return LineAction::suspend;
  if (s == "NoGo") return LineAction::no_go;
  if (s == "Go") return LineAction::go;
  if (s == "GoIfTESS<") return LineAction::go_if_tess_below;
  if (s == "NoGoIfTESS<") return LineAction::no_go_if_tess_below;
  throw ParseError("unknown action '" + std::string(s) + "'");
}

/// A closed integer range printed as "a", "<=b", ">=a" or "a-b".
struct CountRange {
  int lo = 0;
  int hi = 0;

  std::string text(int max) const {
    if (lo == hi) return std::to_string(lo);
    if (lo == 0) return "<=" + std::to_string(hi);
    if (hi == max) return ">=" + std::to_string(lo);
    return std::to_string(lo) + "-" + std::to_string(hi);
  }

  static CountRange parse(std::string_view s, int max) {
    s = detail::trim(s);
    if (s.starts_with("<=")) return {0, detail::parse_number<int>(s.substr(2), "range")};
    if (s.starts_with(">=")) return {detail::parse_number<int>(s.substr(2), "range"), max};
    if (const auto dash = s.find('-'); dash != std::string_view::npos && dash > 0)
      return {detail::parse_number<int>(s.substr(0, dash), "range"), detail::parse_number<int>(s.substr(dash + 1), "range")};
    const int v = detail::parse_number<int>(s, "range");
    return {v, v};
  }
};

struct TableLine {
  std::string endpoint;
  int n = 0;
  CountRange outcomes;
  CountRange pending;
  LineAction action = LineAction::go;
  std::optional<double> threshold;
};

/// The printed layout: per analysis, a Suspend line, then the outcome-count
/// rows grouped into runs (threshold rows stay one per count).
inline std::vector<TableLine> table_lines(const DecisionTable& t) {
  std::vector<TableLine> out;
  for (const auto& e : t.endpoints) {
    const bool tox = is_toxicity(e.kind);
    for (const auto& b : e.blocks) {
      const int n = b.n;
      if (b.is_final) {
        out.push_back({e.name, n, {0, n - 1}, {1, n}, LineAction::suspend, {}});
      } else if (!tox) {
        const int go = b.first_of(RowKind::always_go);
        if (go > 0) out.push_back({e.name, n, {0, std::min(go - 1, n)}, {b.suspension_limit, n}, LineAction::suspend, {}});
      } else {
        const int first = b.first_of(RowKind::threshold), last = b.last_of(RowKind::threshold);
        if (last >= 0) out.push_back({e.name, n, {first, last}, {b.suspension_limit, n}, LineAction::suspend, {}});
      }
      for (std::size_t i = 0; i < b.rows.size();) {
        const auto& r = b.rows[i];
        std::size_t j = i + 1;
        if (r.kind != RowKind::threshold)
          while (j < b.rows.size() && b.rows[j].kind == r.kind) ++j;
        const int lo = r.x, hi = b.rows[j - 1].x;
        const bool settled = tox ? r.kind != RowKind::threshold : r.kind == RowKind::always_go;
        CountRange pending = b.is_final ? CountRange{0, 0}
                             : settled  ? CountRange{0, n - lo}
                                        : CountRange{0, b.suspension_limit - 1};
        TableLine line{e.name, n, {lo, hi}, pending, LineAction::go, {}};
        switch (r.kind) {
          case RowKind::always_go: line.action = LineAction::go; break;
          case RowKind::always_stop: line.action = LineAction::no_go; break;
          case RowKind::threshold:
            line.action = tox ? LineAction::no_go_if_tess_below : LineAction::go_if_tess_below;
            line.threshold = r.threshold;
            break;
        }
        out.push_back(std::move(line));
        i = j;
      }
    }
  }
  return out;
}

inline std::string write_table_tsv(const DecisionTable& t) {
  std::string s;
  auto meta = [&](std::string_view k, const std::string& v) { s += fmt::format("# {}: {}\n", k, v); };
  meta("format", "top-decision-table/" + std::to_string(kSchemaVersion));
  meta("structure", std::string(to_string(t.structure)));
  meta("N", std::to_string(t.N));
  meta("looks", fmt::format("{}", fmt::join(t.looks, ",")));
  meta("alpha", fmt::format("{}", t.alpha));
  meta("C", fmt::format("{}", t.params.C));
  meta("gamma", fmt::format("{}", t.params.gamma));
  if (t.params.tox_C) meta("tox_C", fmt::format("{}", *t.params.tox_C));
  if (t.params.tox_gamma) meta("tox_gamma", fmt::format("{}", *t.params.tox_gamma));
  meta("suspension", std::string(to_string(t.suspension)));
  for (const auto& e : t.endpoints) {
    if (e.name.empty() || e.name.find_first_of(" \t=,\n") != std::string::npos)
      throw DomainError("endpoint name '" + e.name + "' cannot be written to a tabular table");
    meta("endpoint", fmt::format("name={} kind={} threshold={} alternative={} prior={},{}", e.name, to_string(e.kind),
                                 e.threshold, e.alternative, e.prior.a0, e.prior.b0));
  }
  s += "endpoint\tn\toutcomes\tpending\taction\ttess_threshold\n";
  for (const auto& l : table_lines(t)) {
    s += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", l.endpoint, l.n, l.outcomes.text(l.n), l.pending.text(l.n),
                     to_string(l.action), l.threshold ? fmt::format("{:.2f}", *l.threshold) : "");
  }
  return s;
}

/// Reads a tabular table. Thresholds carry 2 decimals and govern decisions
/// as printed.
inline DecisionTable read_table_tsv(std::string_view text) {
  DecisionTable t;
  t.rounded = true;
  std::map<std::string, std::string> meta;
  std::vector<std::string> endpoint_meta;
  std::vector<std::vector<std::string_view>> rows;
  bool header = false;
  const auto lines = detail::lines_of(text);
  for (const auto& line : lines) {
    if (line.empty()) continue;
    if (line.starts_with("#")) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string key(detail::trim(std::string_view(line).substr(1, colon - 1)));
      const std::string value(detail::trim(std::string_view(line).substr(colon + 1)));
      if (key == "endpoint") endpoint_meta.push_back(value);
      else meta[key] = value;
      continue;
    }
    if (!header) {
      if (line != "endpoint\tn\toutcomes\tpending\taction\ttess_threshold")
        throw ParseError("decision table: unexpected column header '" + line + "'");
      header = true;
      continue;
    }
    auto cols = detail::split(line, '\t');
    if (cols.size() != 6) throw ParseError("decision table: expected 6 columns in '" + line + "'");
    rows.push_back(cols);
  }
  auto need = [&](const char* k) -> const std::string& {
    const auto it = meta.find(k);
    if (it == meta.end()) throw ParseError(std::string("decision table: missing metadata '") + k + "'");
    return it->second;
  };
  if (need("format") != "top-decision-table/" + std::to_string(kSchemaVersion))
    throw ParseError("decision table: unsupported format '" + meta["format"] + "'");
  try {
    t.structure = structure_from(need("structure"));
    t.suspension = suspension_mode_from(need("suspension"));
  } catch (const DomainError& e) {
    throw ParseError(std::string("decision table: ") + e.what());
  }
  t.N = detail::parse_number<int>(need("N"), "N");
  for (auto v : detail::split(need("looks"), ',')) t.looks.push_back(detail::parse_number<int>(v, "looks"));
  t.alpha = detail::parse_number<double>(need("alpha"), "alpha");
  t.params.C = detail::parse_number<double>(need("C"), "C");
  t.params.gamma = detail::parse_number<double>(need("gamma"), "gamma");
  if (meta.count("tox_C")) t.params.tox_C = detail::parse_number<double>(meta["tox_C"], "tox_C");
  if (meta.count("tox_gamma")) t.params.tox_gamma = detail::parse_number<double>(meta["tox_gamma"], "tox_gamma");
  if (t.looks.empty() || t.looks.back() != t.N) throw ParseError("decision table: last look must equal N");

  for (const auto& em : endpoint_meta) {
    std::map<std::string, std::string> kv;
    for (auto tok : detail::split(em, ' ')) {
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos) throw ParseError("decision table: bad endpoint metadata '" + em + "'");
      kv[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
    }
    EndpointTable e;
    e.name = kv["name"];
    try {
      e.kind = endpoint_kind_from(kv["kind"]);
    } catch (const DomainError& ex) {
      throw ParseError(std::string("decision table: ") + ex.what());
    }
    e.threshold = detail::parse_number<double>(kv["threshold"], "threshold");
    e.alternative = detail::parse_number<double>(kv["alternative"], "alternative");
    const auto pr = detail::split(kv["prior"], ',');
    if (pr.size() != 2) throw ParseError("decision table: prior must be 'a0,b0'");
    e.prior = {detail::parse_number<double>(pr[0], "prior"), detail::parse_number<double>(pr[1], "prior")};
    for (int n : t.looks) {
      const bool is_final = n == t.N;
      TableBlock b{n, is_final, suspension_limit(n, t.N, t.suspension, is_final), {}};
      b.rows.resize(static_cast<std::size_t>(n) + 1);
      for (int x = 0; x <= n; ++x) b.rows[x].x = x;
      e.blocks.push_back(std::move(b));
    }
    t.endpoints.push_back(std::move(e));
  }
  if (t.endpoints.empty()) throw ParseError("decision table: no endpoints declared");

  std::vector<std::vector<std::vector<bool>>> seen(t.endpoints.size());
  for (std::size_t k = 0; k < t.endpoints.size(); ++k)
    for (const auto& b : t.endpoints[k].blocks) seen[k].emplace_back(static_cast<std::size_t>(b.n) + 1, false);
  for (const auto& cols : rows) {
    const std::string name(cols[0]);
    std::size_t k = 0;
    while (k < t.endpoints.size() && t.endpoints[k].name != name) ++k;
    if (k == t.endpoints.size()) throw ParseError("decision table: undeclared endpoint '" + name + "'");
    const int n = detail::parse_number<int>(cols[1], "n");
    auto& e = t.endpoints[k];
    const auto bi = std::find(t.looks.begin(), t.looks.end(), n) - t.looks.begin();
    if (bi == static_cast<long>(t.looks.size())) throw ParseError("decision table: n=" + std::to_string(n) + " is not a look");
    auto& b = e.blocks[bi];
    const auto outcomes = CountRange::parse(cols[2], n);
    const auto pending = CountRange::parse(cols[3], n);
    if (outcomes.lo < 0 || outcomes.hi > n || outcomes.lo > outcomes.hi)
      throw ParseError("decision table: outcome range out of bounds at n=" + std::to_string(n));
    const auto action = line_action_from(detail::trim(cols[4]));
    if (action == LineAction::suspend) {
      b.suspension_limit = pending.lo;
      continue;
    }
    RowKind kind = RowKind::always_go;
    double thr = std::numeric_limits<double>::quiet_NaN();
    if (action == LineAction::no_go) kind = RowKind::always_stop;
    if (action == LineAction::go_if_tess_below || action == LineAction::no_go_if_tess_below) {
      if ((action == LineAction::no_go_if_tess_below) != is_toxicity(e.kind))
        throw ParseError("decision table: threshold direction does not match endpoint '" + name + "'");
      kind = RowKind::threshold;
      thr = detail::parse_number<double>(cols[5], "tess_threshold");
      if (outcomes.lo != outcomes.hi) throw ParseError("decision table: a threshold row covers one count");
    }
    for (int x = outcomes.lo; x <= outcomes.hi; ++x) {
      if (seen[k][bi][x]) throw ParseError(fmt::format("decision table: {} n={} x={} listed twice", name, n, x));
      seen[k][bi][x] = true;
      b.rows[x] = {x, kind, thr};
    }
  }
  for (std::size_t k = 0; k < t.endpoints.size(); ++k)
    for (std::size_t bi = 0; bi < seen[k].size(); ++bi)
      for (std::size_t x = 0; x < seen[k][bi].size(); ++x)
        if (!seen[k][bi][x])
          throw ParseError(fmt::format("decision table: {} n={} x={} has no row", t.endpoints[k].name, t.looks[bi], x));
  return t;
}

/// Chooses the reader from the content: JSON objects start with '{'.
inline DecisionTable read_table(std::string_view text) {
  const auto s = detail::trim(text);
  if (!s.empty() && s.front() == '{') return table_from_json(parse_json(text));
  return read_table_tsv(text);
}

/// Human-readable layout mirroring a printed protocol table.
inline std::string write_table_markdown(const DecisionTable& t) {
  std::string s;
  for (const auto& e : t.endpoints) {
    const bool tox = is_toxicity(e.kind);
    const char* noun = tox ? "DLTs" : (e.kind == EndpointKind::progression_free ? "Progression-free" : "Responses");
    s += fmt::format("**{}** ({}, threshold {})\n\n", e.name, to_string(e.kind), e.threshold);
    s += fmt::format("| # Patients | # {} | # Pending | Action |\n|---|---|---|---|\n", noun);
    for (const auto& l : table_lines(t)) {
      if (l.endpoint != e.name) continue;
      std::string action;
      switch (l.action) {
        case LineAction::suspend: action = "Suspend"; break;
        case LineAction::no_go: action = "No go"; break;
        case LineAction::go: action = "Go"; break;
        case LineAction::go_if_tess_below: action = fmt::format("Go if TESS < {:.2f}", *l.threshold); break;
        case LineAction::no_go_if_tess_below: action = fmt::format("No go if TESS < {:.2f}", *l.threshold); break;
      }
      auto pretty = [](std::string r) {
        if (r.starts_with("<=")) return "≤ " + r.substr(2);
        if (r.starts_with(">=")) return "≥ " + r.substr(2);
        return r;
      };
      s += fmt::format("| {} | {} | {} | {} |\n", l.n, pretty(l.outcomes.text(l.n)), pretty(l.pending.text(l.n)), action);
    }
    s += "\n";
  }
  return s;
}

// ---- interim data ---------------------------------------------------------

struct InterimData {
  std::vector<ObservedPatient> patients;
};

/// CSV with columns id, arrival, then <name>_status and <name>_follow_up_days
/// per endpoint. Follow-up may be blank for resolved patients.
inline InterimData read_interim_csv(std::string_view text, std::span<const EndpointDef> endpoints) {
  const auto lines = detail::lines_of(text);
  std::size_t li = 0;
  while (li < lines.size() && (lines[li].empty() || lines[li].starts_with("#"))) ++li;
  if (li == lines.size()) throw ParseError("interim data: empty file");
  const auto head = detail::split(lines[li++], ',');
  std::map<std::string, std::size_t, std::less<>> col;
  for (std::size_t i = 0; i < head.size(); ++i) col[std::string(detail::trim(head[i]))] = i;
  auto index = [&](const std::string& name) {
    const auto it = col.find(name);
    if (it == col.end()) throw ParseError("interim data: missing column '" + name + "'");
    return it->second;
  };
  const std::size_t c_id = index("id");
  const std::optional<std::size_t> c_arrival = col.count("arrival") ? std::optional(col.at("arrival")) : std::nullopt;
  std::vector<std::pair<std::size_t, std::size_t>> ep_cols;
  for (const auto& ep : endpoints) ep_cols.emplace_back(index(ep.name + "_status"), index(ep.name + "_follow_up_days"));

  InterimData out;
  for (; li < lines.size(); ++li) {
    if (lines[li].empty() || lines[li].starts_with("#")) continue;
    const auto cells = detail::split(lines[li], ',');
    if (cells.size() != head.size())
      throw ParseError(fmt::format("interim data line {}: expected {} fields", li + 1, head.size()));
    ObservedPatient p;
    p.id = detail::parse_number<int>(cells[c_id], "id");
    if (c_arrival && !detail::trim(cells[*c_arrival]).empty())
      p.arrival = detail::parse_number<double>(cells[*c_arrival], "arrival");
    for (std::size_t k = 0; k < endpoints.size(); ++k) {
      EndpointObservation o;
      o.status = status_from(detail::trim(cells[ep_cols[k].first]));
      const auto fu = detail::trim(cells[ep_cols[k].second]);
      if (!fu.empty()) o.follow_up_days = detail::parse_number<double>(fu, "follow_up_days");
      else if (o.status == Status::pending) throw ParseError(fmt::format("interim data: patient {} pending without follow-up", p.id));
      if (o.follow_up_days < 0) throw ParseError(fmt::format("interim data: patient {} has negative follow-up", p.id));
      p.endpoints.push_back(o);
    }
    out.patients.push_back(std::move(p));
  }
  return out;
}

inline std::vector<EndpointDef> table_endpoints(const DecisionTable& t, std::span<const double> windows = {}) {
  std::vector<EndpointDef> out;
  for (std::size_t k = 0; k < t.endpoints.size(); ++k) {
    const auto& e = t.endpoints[k];
    out.push_back({e.name, k < windows.size() ? windows[k] : 0.0, e.kind, e.threshold});
  }
  return out;
}

inline json interim_to_json(std::span<const ObservedPatient> patients, std::span<const EndpointDef> endpoints) {
  json rows = json::array();
  for (const auto& p : patients) {
    json r{{"id", p.id}, {"arrival", p.arrival}};
    for (std::size_t k = 0; k < endpoints.size(); ++k) {
      r[endpoints[k].name + "_status"] = to_string(p.endpoints.at(k).status);
      r[endpoints[k].name + "_follow_up_days"] = p.endpoints.at(k).follow_up_days;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline InterimData interim_from_json(const json& rows, std::span<const EndpointDef> endpoints) {
  if (!rows.is_array()) throw DomainError("interim rows must be an array");
  InterimData out;
  for (const auto& r : rows) {
    ObservedPatient p;
    p.id = detail::get<int>(r, "id");
    p.arrival = detail::get_or<double>(r, "arrival", 0.0);
    for (const auto& ep : endpoints) {
      const std::string sk = ep.name + "_status", fk = ep.name + "_follow_up_days";
      EndpointObservation o;
      try {
        o.status = status_from(detail::get<std::string>(r, sk.c_str()));
      } catch (const ParseError& e) {
        throw DomainError(e.what());
      }
      o.follow_up_days = detail::get_or<double>(r, fk.c_str(), 0.0);
      if (o.status == Status::pending && !r.contains(fk))
        throw DomainError(fmt::format("patient {} pending without follow-up", p.id));
      p.endpoints.push_back(o);
    }
    out.patients.push_back(std::move(p));
  }
  return out;
}

// ---- decisions ------------------------------------------------------------

/// TESS needs the assessment windows, which the table deliberately omits;
/// callers pass endpoints carrying them.
struct DecisionReport {
  Decision decision;
  InterimSnapshot snapshot;
  std::vector<std::vector<double>> ess;  // [endpoint][patient]
  std::vector<EndpointDef> endpoints;
  std::vector<int> ids;
};

inline DecisionReport evaluate_decision(const DecisionTable& table, std::span<const EndpointDef> endpoints,
                                        std::span<const ObservedPatient> patients) {
  if (patients.empty()) throw DomainError("no patient rows");
  DecisionReport r;
  r.endpoints.assign(endpoints.begin(), endpoints.end());
  r.snapshot = snapshot(patients, endpoints);
  if (!table.endpoints.empty() && !table.endpoints.front().block(r.snapshot.n_enrolled))
    throw DomainError(fmt::format("sample size {} does not match any table row (looks: {})", r.snapshot.n_enrolled,
                                  fmt::join(table.looks, ",")));
  r.decision = decide(r.snapshot, table);
  for (std::size_t k = 0; k < endpoints.size(); ++k) r.ess.push_back(ess_column(patients, k, endpoints[k]));
  for (const auto& p : patients) r.ids.push_back(p.id);
  return r;
}

inline json to_json(const DecisionReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["action"] = to_string(r.decision.action);
  j["reason"] = to_string(r.decision.reason);
  j["summary"] = r.decision.summary();
  j["n_enrolled"] = r.snapshot.n_enrolled;
  j["endpoints"] = json::array();
  for (std::size_t k = 0; k < r.decision.endpoints.size(); ++k) {
    const auto& d = r.decision.endpoints[k];
    const auto& s = r.snapshot.endpoints[k];
    json je{{"name", d.name},
            {"call", to_string(d.call)},
            {"x", s.x},
            {"n_obs", s.n_obs},
            {"n_pending", s.n_pending},
            {"tess", s.tess},
            {"row", to_string(d.row)},
            {"threshold", d.threshold ? json(*d.threshold) : json()},
            {"rationale", d.rationale},
            {"ess", json::array()}};
    for (std::size_t i = 0; i < r.ids.size(); ++i) je["ess"].push_back({{"id", r.ids[i]}, {"ess", r.ess[k][i]}});
    j["endpoints"].push_back(std::move(je));
  }
  return j;
}

inline std::string write_decision_text(const DecisionReport& r) {
  std::string s = r.decision.summary() + "\n";
  for (std::size_t k = 0; k < r.decision.endpoints.size(); ++k) {
    const auto& d = r.decision.endpoints[k];
    const auto& e = r.snapshot.endpoints[k];
    s += fmt::format("{}\tcall={}\tx={}\tn_obs={}\tpending={}\ttess={:.2f}\tthreshold={}\n", d.name, to_string(d.call),
                     e.x, e.n_obs, e.n_pending, e.tess, d.threshold ? fmt::format("{:.2f}", *d.threshold) : "NA");
  }
  return s;
}

// ---- scenarios ------------------------------------------------------------

inline json to_json(const Scenario& s) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = s.name;
  j["design"] = to_json(s.design);
  j["true_rates"] = s.true_rates;
  j["log_odds_ratio"] = s.log_odds_ratio;
  j["accrual_per_month"] = s.accrual_per_month;
  j["accrual"] = s.accrual == AccrualMode::poisson ? "poisson" : "deterministic";
  j["event_time"] = {{"family", s.event_time.family == EventTimeModel::Family::weibull ? "weibull" : "uniform"},
                     {"shape", s.event_time.shape},
                     {"late_fraction", s.event_time.late_fraction}};
  j["simon"] = {{"p0", s.simon.p0}, {"p1", s.simon.p1}, {"alpha", s.simon.alpha}, {"beta", s.simon.beta}};
  j["simon_cap_at_n"] = s.simon_cap_at_n;
  j["designs"] = json::array();
  for (auto d : s.roster) j["designs"].push_back(to_string(d));
  return j;
}

inline std::vector<DesignKind> roster_from(std::string_view csv) {
  std::vector<DesignKind> out;
  for (auto tok : detail::split(csv, ',')) {
    tok = detail::trim(tok);
    if (!tok.empty()) out.push_back(design_kind_from(tok));
  }
  if (out.empty()) throw DomainError("empty design roster");
  return out;
}

inline Scenario scenario_from_json(const json& j) {
  detail::check_schema(j);
  Scenario s;
  s.name = detail::get_or<std::string>(j, "name", "scenario");
  if (!j.contains("design")) throw DomainError("missing field 'design'");
  s.design = design_from_json(j.at("design"));
  s.true_rates = detail::get<std::vector<double>>(j, "true_rates");
  s.log_odds_ratio = detail::get_or<double>(j, "log_odds_ratio", 0.0);
  s.accrual_per_month = detail::get_or<double>(j, "accrual_per_month", 2.0);
  const auto accrual = detail::get_or<std::string>(j, "accrual", "poisson");
  if (accrual == "poisson") s.accrual = AccrualMode::poisson;
  else if (accrual == "deterministic") s.accrual = AccrualMode::deterministic;
  else throw DomainError("unknown accrual mode '" + accrual + "'");
  if (j.contains("event_time")) {
    const auto& et = j.at("event_time");
    const auto fam = detail::get_or<std::string>(et, "family", "weibull");
    if (fam == "weibull") s.event_time.family = EventTimeModel::Family::weibull;
    else if (fam == "uniform") s.event_time.family = EventTimeModel::Family::uniform;
    else throw DomainError("unknown event-time family '" + fam + "'");
    s.event_time.shape = detail::get_or<double>(et, "shape", 2.0);
    s.event_time.late_fraction = detail::get_or<double>(et, "late_fraction", 0.5);
  }
  if (j.contains("simon")) {
    const auto& sj = j.at("simon");
    s.simon = {detail::get<double>(sj, "p0"), detail::get<double>(sj, "p1"), detail::get<double>(sj, "alpha"),
               detail::get<double>(sj, "beta")};
  } else {
    s.simon = {s.design.endpoints.front().threshold, s.design.alternative.front(), s.design.alpha, 0.1};
  }
  s.simon_cap_at_n = detail::get_or<bool>(j, "simon_cap_at_n", true);
  if (j.contains("designs")) {
    s.roster.clear();
    for (const auto& d : j.at("designs")) {
      if (!d.is_string()) throw DomainError("designs must be strings");
      s.roster.push_back(design_kind_from(d.get<std::string>()));
    }
  }
  s.validate();
  return s;
}

// ---- operating characteristics ---------------------------------------------

inline json to_json(const OCReport& r) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = r.scenario;
  j["replicates"] = r.replicates;
  j["seed"] = r.seed;
  j["top_params"] = to_json(r.params);
  j["simon"] = {{"n1", r.simon.n1}, {"r1", r.simon.r1}, {"n", r.simon.n}, {"r", r.simon.r}};
  j["ts_pi_L"] = r.ts_pi_L;
  j["designs"] = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  for (const auto& d : r.designs) {
    j["designs"].push_back({{"design", to_string(d.design)},
                            {"accept_rate", d.accept_rate},
                            {"accept_se", opt(d.accept_se)},
                            {"expected_n", d.expected_n},
                            {"expected_n_se", opt(d.expected_n_se)},
                            {"mean_duration_months", d.mean_duration_months},
                            {"duration_se", opt(d.duration_se)},
                            {"stop_futility", d.stop_futility},
                            {"stop_toxicity", d.stop_toxicity}});
  }
  return j;
}

inline std::string write_oc_tsv(const OCReport& r) {
  std::string s;
  s += fmt::format("# format: top-oc-report/{}\n", kSchemaVersion);
  s += fmt::format("# scenario: {}\n# replicates: {}\n# seed: {}\n", r.scenario, r.replicates, r.seed);
  s += fmt::format("# top_params: C={} gamma={}\n", r.params.C, r.params.gamma);
  s += fmt::format("# simon: n1={} r1={} n={} r={}\n", r.simon.n1, r.simon.r1, r.simon.n, r.simon.r);
  s += fmt::format("# ts_pi_L: {}\n", r.ts_pi_L);
  s += "design\taccept_rate\taccept_se\texpected_n\texpected_n_se\tmean_duration_months\tduration_se\tstop_futility\t"
       "stop_toxicity\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string("NA"); };
  for (const auto& d : r.designs)
    s += fmt::format("{}\t{:.6f}\t{}\t{:.6f}\t{}\t{:.6f}\t{}\t{:.6f}\t{:.6f}\n", to_string(d.design), d.accept_rate,
                     opt(d.accept_se), d.expected_n, opt(d.expected_n_se), d.mean_duration_months, opt(d.duration_se),
                     d.stop_futility, d.stop_toxicity);
  return s;
}

}  // namespace top::io
