#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "top/io.hpp"
#include "top/report.hpp"

using namespace top;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Data lines (no metadata) of a TSV table.
std::vector<std::string> body(const std::string& tsv) {
  std::vector<std::string> out;
  for (const auto& l : io::detail::lines_of(tsv))
    if (!l.empty() && !l.starts_with("#")) out.push_back(l);
  return out;
}

const std::string kTable1Csv = fixtures::data_path("table1.csv");

}  // namespace

TEST(SpecJson, RoundTripAndExampleFiles) {
  for (const auto& s : {fixtures::example1(), fixtures::example2(), fixtures::example3()}) {
    const auto j = io::to_json(s);
    const auto back = io::design_from_json(io::parse_json(io::dump(j)));
    EXPECT_EQ(io::dump(io::to_json(back)), io::dump(j));
  }
  const auto e1 = io::design_from_json(io::parse_json(slurp(fixtures::data_path("example1.json"))));
  EXPECT_EQ(io::dump(io::to_json(e1)), io::dump(io::to_json(fixtures::example1())));
  const auto e2 = io::design_from_json(io::parse_json(slurp(fixtures::data_path("example2.json"))));
  EXPECT_EQ(e2.structure, Structure::co_primary);
  EXPECT_EQ(e2.N, 45);
  const auto e3 = io::design_from_json(io::parse_json(slurp(fixtures::data_path("example3.json"))));
  EXPECT_EQ(e3.endpoints[1].kind, EndpointKind::toxicity);
}

TEST(SpecJson, OptionalFields) {
  auto s = fixtures::example2();
  s.prior = DirichletPrior{{0.2, 0.3, 0.1, 0.4}};
  s.alt_log_odds_ratio = 0.5;
  s.suspension = SuspensionMode::prose_literal;
  s.grid = {{0.5, 0.9}, {0.0, 1.0}};
  const auto back = io::design_from_json(io::to_json(s));
  EXPECT_EQ(back.prior->alpha, s.prior->alpha);
  EXPECT_EQ(back.alt_log_odds_ratio, 0.5);
  EXPECT_EQ(back.suspension, SuspensionMode::prose_literal);
  EXPECT_EQ(back.grid, s.grid);
  auto j = io::to_json(fixtures::example1());
  j["endpoints"][0].erase("window_days");
  j["endpoints"][0]["window_months"] = 4;
  EXPECT_DOUBLE_EQ(io::design_from_json(j).endpoints[0].window_days, 120);
}

TEST(SpecJson, Errors) {
  EXPECT_THROW(io::parse_json("{not json"), ParseError);
  auto j = io::to_json(fixtures::example1());
  j["schema_version"] = 99;
  EXPECT_THROW(io::design_from_json(j), std::exception);
  j = io::to_json(fixtures::example1());
  j.erase("N");
  EXPECT_THROW(io::design_from_json(j), std::exception);
  j = io::to_json(fixtures::example1());
  j["N"] = "forty";
  EXPECT_THROW(io::design_from_json(j), std::exception);
  j = io::to_json(fixtures::example1());
  j["looks"] = {10, 20};
  EXPECT_THROW(io::design_from_json(j), DomainError);
}

TEST(ParamsJson, RoundTripAndCalibrationOutput) {
  const CutoffParams p{0.86, 1.0, 0.7, 0.5};
  EXPECT_EQ(io::params_from_json(io::to_json(p)), p);
  const auto s = fixtures::example1();
  const auto r = calibrate(s);
  const auto j = io::to_json(r, s);
  EXPECT_EQ(io::params_from_json(j), r.params);
  EXPECT_EQ(j["grid_points"], 247);
  EXPECT_EQ(io::params_from_json(io::parse_json(slurp(fixtures::data_path("example1_params.json")))),
            fixtures::kExample1Params);
  EXPECT_THROW(io::params_from_json(io::json{{"C", 2.0}, {"gamma", 1.0}}), DomainError);
}

TEST(TableJson, RoundTripIsExact) {
  for (const auto& t : {decision_table(fixtures::example1(), fixtures::kExample1Params),
                        decision_table(fixtures::example2(), fixtures::kExample2Params),
                        decision_table(fixtures::example3(), {0.85, 0.5, {}, {}})}) {
    const auto back = io::table_from_json(io::parse_json(io::dump(io::to_json(t))));
    EXPECT_EQ(back, t);
    EXPECT_EQ(io::read_table(io::dump(io::to_json(t))), t);
  }
}

TEST(TableTsv, MatchesReferenceLayout) {
  const auto t = decision_table(fixtures::example1(), fixtures::kExample1Params);
  const auto ours = io::write_table_tsv(t);
  EXPECT_EQ(body(ours), body(slurp(fixtures::data_path("reference/example1_table.tsv"))));
  EXPECT_TRUE(ours.starts_with("# format: top-decision-table/1\n"));
}

TEST(TableTsv, RoundTripPreservesRoundedTable) {
  for (const auto& t : {decision_table(fixtures::example1(), fixtures::kExample1Params),
                        decision_table(fixtures::example2(), fixtures::kExample2Params),
                        decision_table(fixtures::example3(), {0.85, 0.5, 0.9, 1.0})}) {
    const auto text = io::write_table_tsv(t);
    const auto back = io::read_table_tsv(text);
    EXPECT_TRUE(back.rounded);
    EXPECT_EQ(io::write_table_tsv(back), text);
    EXPECT_EQ(back.params, t.params);
    for (std::size_t k = 0; k < t.endpoints.size(); ++k)
      for (std::size_t b = 0; b < t.endpoints[k].blocks.size(); ++b) {
        const auto& gb = t.endpoints[k].blocks[b];
        const auto& rb = back.endpoints[k].blocks[b];
        EXPECT_EQ(gb.suspension_limit, rb.suspension_limit);
        for (std::size_t x = 0; x < gb.rows.size(); ++x) {
          EXPECT_EQ(gb.rows[x].kind, rb.rows[x].kind);
          if (gb.rows[x].kind == RowKind::threshold) {
            EXPECT_DOUBLE_EQ(round2(gb.rows[x].threshold), rb.rows[x].threshold);
          }
        }
      }
  }
}

TEST(TableTsv, ParseErrors) {
  const auto good = io::write_table_tsv(decision_table(fixtures::example1(), fixtures::kExample1Params));
  auto replace = [&](const std::string& from, const std::string& to) {
    auto s = good;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return s.replace(at, from.size(), to);
  };
  EXPECT_THROW(io::read_table_tsv(replace("top-decision-table/1", "top-decision-table/7")), ParseError);
  EXPECT_THROW(io::read_table_tsv(replace("# N: 40\n", "")), ParseError);
  EXPECT_THROW(io::read_table_tsv(replace("ORR\t20\t2\t<=9\tGoIfTESS<\t10.15\n", "")), ParseError);  // gap
  EXPECT_THROW(io::read_table_tsv(replace("ORR\t20\t2\t", "ORR\t20\t3\t")), ParseError);            // duplicate
  EXPECT_THROW(io::read_table_tsv(replace("10.15", "ten")), ParseError);
  EXPECT_THROW(io::read_table_tsv(replace("ORR\t20\t2\t", "ORR\t25\t2\t")), ParseError);
  EXPECT_THROW(io::read_table_tsv(replace("GoIfTESS<\t10.15", "Maybe\t10.15")), ParseError);
  EXPECT_THROW(io::read_table_tsv(replace("GoIfTESS<\t10.15", "NoGoIfTESS<\t10.15")), ParseError);
  EXPECT_THROW(io::read_table_tsv(replace("tess_threshold", "threshold")), ParseError);
  EXPECT_THROW(io::read_table_tsv(replace("\tSuspend\t\n", "\tSuspend\n")), ParseError);
}

TEST(TableMarkdown, ReadableRows) {
  const auto md = io::write_table_markdown(decision_table(fixtures::example1(), fixtures::kExample1Params));
  EXPECT_NE(md.find("| 20 | 3 | ≤ 9 | Go if TESS < 15.40 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| 10 | ≤ 1 | ≥ 2 | Suspend |"), std::string::npos);
  EXPECT_NE(md.find("| 40 | ≥ 12 | 0 | Go |"), std::string::npos);
}

TEST(CountRange, Formats) {
  for (const std::string s : {"3", "<=4", ">=7", "2-5", "0"}) EXPECT_EQ(io::CountRange::parse(s, 10).text(10), s);
  EXPECT_THROW(io::CountRange::parse("x", 10), ParseError);
}

TEST(InterimCsv, Table1) {
  const auto t = io::read_table_tsv(slurp(fixtures::data_path("reference/example1_table.tsv")));
  const std::vector<double> windows{120};
  const auto eps = io::table_endpoints(t, windows);
  const auto data = io::read_interim_csv(slurp(kTable1Csv), eps);
  ASSERT_EQ(data.patients.size(), 20u);
  const auto r = io::evaluate_decision(t, eps, data.patients);
  EXPECT_EQ(r.decision.action, Action::go);
  EXPECT_NEAR(r.snapshot.endpoints[0].tess, 14.0, 1e-9);
  EXPECT_EQ(r.decision.summary(), "Go (TESS 14.00 < 15.40)");
  const auto text = io::write_decision_text(r);
  EXPECT_TRUE(text.starts_with("Go (TESS 14.00 < 15.40)\n"));
  const auto j = io::to_json(r);
  EXPECT_EQ(j["action"], "Go");
  EXPECT_EQ(j["endpoints"][0]["x"], 3);
  EXPECT_EQ(j["endpoints"][0]["n_pending"], 9);
  EXPECT_EQ(j["endpoints"][0]["ess"].size(), 20u);
}

TEST(InterimCsv, JsonRowsEquivalent) {
  const std::vector<EndpointDef> eps{{"ORR", 120, EndpointKind::response, 0.2}};
  const auto csv = io::read_interim_csv(slurp(kTable1Csv), eps);
  const auto rows = io::interim_to_json(csv.patients, eps);
  const auto back = io::interim_from_json(rows, eps);
  ASSERT_EQ(back.patients.size(), csv.patients.size());
  EXPECT_EQ(snapshot(std::span<const ObservedPatient>(back.patients), eps),
            snapshot(std::span<const ObservedPatient>(csv.patients), eps));
}

TEST(InterimCsv, Errors) {
  const std::vector<EndpointDef> eps{{"ORR", 120, EndpointKind::response, 0.2}};
  EXPECT_THROW(io::read_interim_csv("", eps), ParseError);
  EXPECT_THROW(io::read_interim_csv("id,ORR_status\n1,event\n", eps), ParseError);
  EXPECT_THROW(io::read_interim_csv("id,ORR_status,ORR_follow_up_days\n1,event\n", eps), ParseError);
  EXPECT_THROW(io::read_interim_csv("id,ORR_status,ORR_follow_up_days\n1,pending,\n", eps), ParseError);
  EXPECT_THROW(io::read_interim_csv("id,ORR_status,ORR_follow_up_days\n1,maybe,3\n", eps), ParseError);
  EXPECT_THROW(io::read_interim_csv("id,ORR_status,ORR_follow_up_days\n1,pending,-3\n", eps), ParseError);
  EXPECT_THROW(io::read_interim_csv("id,ORR_status,ORR_follow_up_days\nx,pending,3\n", eps), ParseError);
  const auto ok = io::read_interim_csv("# comment\nid,ORR_status,ORR_follow_up_days\n\n1,event,\n2,pending,30\n", eps);
  EXPECT_EQ(ok.patients.size(), 2u);
}

TEST(Decision, SizeWithoutTableRow) {
  const auto t = decision_table(fixtures::example1(), fixtures::kExample1Params);
  const std::vector<EndpointDef> eps{{"ORR", 120, EndpointKind::response, 0.2}};
  std::vector<ObservedPatient> pts;
  for (int i = 1; i <= 7; ++i) pts.push_back({i, 0, {{Status::no_event, 0}}});
  EXPECT_THROW(io::evaluate_decision(t, eps, pts), DomainError);
  EXPECT_THROW(io::evaluate_decision(t, eps, {}), DomainError);
}

TEST(ScenarioJson, RoundTrip) {
  for (auto s : scenario_presets()) {
    s.log_odds_ratio = 0.25;
    s.accrual = AccrualMode::deterministic;
    s.event_time = {EventTimeModel::Family::uniform, 1.0, 0.4};
    s.roster = {DesignKind::top, DesignKind::bop2};
    const auto back = io::scenario_from_json(io::parse_json(io::dump(io::to_json(s))));
    EXPECT_EQ(io::dump(io::to_json(back)), io::dump(io::to_json(s)));
  }
  EXPECT_EQ(io::roster_from("TOP, BOP2,Simon,TS").size(), 4u);
  EXPECT_THROW(io::roster_from(" , "), DomainError);
  EXPECT_THROW(io::roster_from("TOP,EWOC"), DomainError);
}

TEST(OcReport, TsvAndJson) {
  const auto sc = scenario_presets()[0];
  const auto p = prepare_designs(sc);
  const auto one = operating_characteristics(p, sc, 1, 5);
  const auto tsv = io::write_oc_tsv(one);
  EXPECT_NE(tsv.find("\tNA\t"), std::string::npos);
  EXPECT_TRUE(io::to_json(one)["designs"][0]["accept_se"].is_null());
  const auto many = operating_characteristics(p, sc, 50, 5);
  const auto lines = body(io::write_oc_tsv(many));
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(io::detail::split(lines[0], '\t').size(), 9u);
  EXPECT_EQ(io::to_json(many)["designs"].size(), 4u);
}

TEST(Report, EmbedsTheTableVerbatim) {
  const auto s = fixtures::example1();
  const auto t = decision_table(s, fixtures::kExample1Params);
  const auto md = protocol_markdown(s, fixtures::kExample1Params, t);
  EXPECT_NE(md.find(io::write_table_tsv(t)), std::string::npos);
  EXPECT_EQ(md, protocol_markdown(s, fixtures::kExample1Params, t));
}
