#pragma once

// Protocol template: hypotheses, analysis schedule, cutoffs, exact
// complete-data operating characteristics and the decision table.

#include <algorithm>
#include <string>

#include <fmt/format.h>

#include "top/decision_table.hpp"
#include "top/design.hpp"
#include "top/io.hpp"

namespace top {

inline std::string protocol_markdown(const DesignSpec& spec, const CutoffParams& params, const DecisionTable& table) {
  spec.validate();
  params.validate();
  if (table.N != spec.N || table.looks != spec.looks || table.endpoints.size() != spec.endpoints.size())
    throw DomainError("report: the decision table does not belong to this design");

  std::string s;
  s += "# Phase II design: go/no-go monitoring with pending outcomes\n\n";
  s += "## Endpoints and hypotheses\n\n";
  s += "| Endpoint | Type | Assessment window (days) | Unacceptable rate | Target rate |\n|---|---|---|---|---|\n";
  for (std::size_t k = 0; k < spec.endpoints.size(); ++k) {
    const auto& e = spec.endpoints[k];
    const bool tox = is_toxicity(e.kind);
    s += fmt::format("| {} | {} | {} | {} {} | {} |\n", e.name, to_string(e.kind), e.window_days, tox ? ">=" : "<=",
                     e.threshold, spec.alternative[k]);
  }
  s += "\n";
  switch (spec.structure) {
    case Structure::single:
      s += "The trial stops for futility when the posterior probability that the rate is at or below the "
           "unacceptable rate exceeds the cutoff C_n.\n\n";
      break;
    case Structure::co_primary:
      s += "The trial stops for futility only when both endpoints are futile at the same analysis.\n\n";
      break;
    case Structure::efficacy_toxicity:
      s += "The trial stops when efficacy is futile or toxicity is excessive at an analysis.\n\n";
      break;
  }

  s += "## Schedule and cutoffs\n\n";
  s += fmt::format("- Maximum sample size: {}\n", spec.N);
  s += fmt::format("- Analyses after: {} patients\n", fmt::join(spec.looks, ", "));
  s += fmt::format("- Cutoff: C_n = 1 - {} (n/{})^{}\n", params.C, spec.N, params.gamma);
  if (params.tox_C || params.tox_gamma)
    s += fmt::format("- Toxicity cutoff: C_n = 1 - {} (n/{})^{}\n", params.tox_C.value_or(params.C), spec.N,
                     params.tox_gamma.value_or(params.gamma));
  s += fmt::format("- Accrual suspension: {}\n", to_string(spec.suspension));
  for (std::size_t k = 0; k < spec.endpoints.size(); ++k) {
    const auto p = spec.marginal_prior(k);
    s += fmt::format("- Prior for {}: Beta({}, {})\n", spec.endpoints[k].name, p.a0, p.b0);
  }
  s += "\n| n | C_n |\n|---|---|\n";
  for (int n : spec.looks) s += fmt::format("| {} | {:.4f} |\n", n, cutoff(n, spec.N, params));
  s += "\n";

  s += "## Operating characteristics (complete data)\n\n";
  s += "| Hypothesis | Cells | P(claim promising) | Expected sample size |\n|---|---|---|---|\n";
  auto row = [&](const std::string& label, const std::vector<double>& cells) {
    const auto oc = exact_oc(spec, params, cells);
    s += fmt::format("| {} | {:.4f} | {:.4f} | {:.2f} |\n", label, fmt::join(cells, ", "), oc.accept_prob, oc.expected_n);
  };
  const auto nulls = spec.null_hypotheses();
  for (std::size_t i = 0; i < nulls.size(); ++i)
    row(nulls.size() > 1 ? fmt::format("null {}", i + 1) : "null", nulls[i]);
  row("alternative", spec.alternative_hypothesis());
  s += fmt::format("\nTarget type I error: {}\n\n", spec.alpha);

  s += "## Decision table\n\n";
  s += "At each analysis count the enrolled patients, the observed outcomes among resolved patients and the "
       "pending patients, compute TESS = resolved + (total pending follow-up) / window, then read the action.\n\n";
  s += io::write_table_markdown(table);
  s += "### Machine-readable table\n\n```\n";
  s += io::write_table_tsv(table);
  s += "```\n";
  return s;
}

}  // namespace top
