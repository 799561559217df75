// top: calibrate, tabulate, decide, simulate and report from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "top/top.hpp"

namespace fs = std::filesystem;
using top::io::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kInvalid = 3, kInfeasible = 4, kIo = 5 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a sibling temp file and rename, so a failure never leaves a partial file.
void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  const fs::path target(out);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << text;
    if (!f.flush()) {
      f.close();
      fs::remove(tmp);
      throw IoError("write failed for " + out);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot write " + out + ": " + ec.message());
  }
}

top::DesignSpec load_spec(const std::string& path) { return top::io::design_from_json(top::io::parse_json(slurp(path))); }

top::CutoffParams load_params(const std::string& path) {
  return top::io::params_from_json(top::io::parse_json(slurp(path)));
}

std::string calibration_text(const top::CalibrationResult& r) {
  return fmt::format("C\t{}\ngamma\t{}\ntype1\t{:.6f}\npower\t{:.6f}\nexpected_n_null\t{:.4f}\nexpected_n_alt\t{:.4f}\n",
                     r.params.C, r.params.gamma, r.type1, r.power, r.en_null, r.en_alt);
}

struct Options {
  std::string spec, params, table, data, format, out, designs;
  std::vector<std::string> scenarios, presets, windows;
  int replicates = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool calibrate_inline = false;
};

int run_calibrate(const Options& o) {
  const auto spec = load_spec(o.spec);
  const auto r = top::calibrate(spec);
  if (o.format == "json" || o.format.empty()) emit(o.out, top::io::dump(top::io::to_json(r, spec)));
  else if (o.format == "text") emit(o.out, calibration_text(r));
  else throw top::DomainError("calibrate: unknown format '" + o.format + "'");
  return kOk;
}

std::string render_table(const top::DecisionTable& t, const std::string& format) {
  if (format == "tsv" || format.empty()) return top::io::write_table_tsv(t);
  if (format == "json") return top::io::dump(top::io::to_json(t));
  if (format == "markdown") return top::io::write_table_markdown(t);
  throw top::DomainError("table: unknown format '" + format + "'");
}

top::CutoffParams params_for(const Options& o, const top::DesignSpec& spec) {
  if (!o.params.empty()) return load_params(o.params);
  if (o.calibrate_inline) return top::calibrate(spec).params;
  throw top::DomainError("the design is not calibrated: pass --params (from 'top calibrate') or --calibrate");
}

int run_table(const Options& o) {
  const auto spec = load_spec(o.spec);
  const auto t = top::decision_table(spec, params_for(o, spec));
  emit(o.out, render_table(t, o.format));
  return kOk;
}

int run_decide(const Options& o) {
  const auto table = top::io::read_table(slurp(o.table));
  std::vector<double> windows(table.endpoints.size(), 0.0);
  if (!o.spec.empty()) {
    const auto spec = load_spec(o.spec);
    for (std::size_t k = 0; k < table.endpoints.size(); ++k) {
      const auto it = std::find_if(spec.endpoints.begin(), spec.endpoints.end(),
                                   [&](const auto& e) { return e.name == table.endpoints[k].name; });
      if (it == spec.endpoints.end()) throw top::DomainError("spec has no endpoint '" + table.endpoints[k].name + "'");
      windows[k] = it->window_days;
    }
  }
  for (const auto& w : o.windows) {
    const auto eq = w.find('=');
    if (eq == std::string::npos) throw top::DomainError("--window expects NAME=DAYS, got '" + w + "'");
    const std::string name = w.substr(0, eq);
    std::size_t k = 0;
    while (k < table.endpoints.size() && table.endpoints[k].name != name) ++k;
    if (k == table.endpoints.size()) throw top::DomainError("table has no endpoint '" + name + "'");
    windows[k] = top::io::detail::parse_number<double>(w.substr(eq + 1), "--window");
  }
  const auto eps = top::io::table_endpoints(table, windows);
  const auto data = top::io::read_interim_csv(slurp(o.data), eps);
  const auto r = top::io::evaluate_decision(table, eps, data.patients);
  if (o.format == "json") emit(o.out, top::io::dump(top::io::to_json(r)));
  else if (o.format == "text" || o.format.empty()) emit(o.out, top::io::write_decision_text(r));
  else throw top::DomainError("decide: unknown format '" + o.format + "'");
  return kOk;
}

int run_simulate(const Options& o) {
  std::vector<top::Scenario> scenarios;
  const auto presets = top::scenario_presets();
  for (const auto& p : o.presets) {
    if (p == "all") {
      scenarios.insert(scenarios.end(), presets.begin(), presets.end());
      continue;
    }
    const int i = top::io::detail::parse_number<int>(p, "--preset");
    if (i < 1 || i > static_cast<int>(presets.size())) throw top::DomainError("--preset must be 1-9 or 'all'");
    scenarios.push_back(presets[i - 1]);
  }
  for (const auto& f : o.scenarios) scenarios.push_back(top::io::scenario_from_json(top::io::parse_json(slurp(f))));
  if (scenarios.empty()) throw top::DomainError("simulate: pass --scenario or --preset");
  if (!o.designs.empty())
    for (auto& s : scenarios) s.roster = top::io::roster_from(o.designs);

  const std::string format = o.format.empty() ? "tsv" : o.format;
  if (format != "tsv" && format != "json") throw top::DomainError("simulate: unknown format '" + format + "'");
  auto render = [&](const top::OCReport& r) {
    return format == "json" ? top::io::dump(top::io::to_json(r)) : top::io::write_oc_tsv(r);
  };

  // compute everything first so that a failure leaves no files behind
  std::vector<std::string> texts;
  for (const auto& s : scenarios) {
    s.validate();
    texts.push_back(render(top::operating_characteristics(s, o.replicates, o.seed, o.threads)));
  }
  if (scenarios.size() == 1) {
    emit(o.out, texts.front());
  } else if (o.out.empty() || o.out == "-") {
    for (const auto& t : texts) std::cout << t;
  } else {
    fs::create_directories(o.out);
    for (std::size_t i = 0; i < scenarios.size(); ++i)
      emit((fs::path(o.out) / (scenarios[i].name + "." + format)).string(), texts[i]);
  }
  return kOk;
}

int run_report(const Options& o) {
  const auto spec = load_spec(o.spec);
  const auto params = params_for(o, spec);
  const auto table = o.table.empty() ? top::decision_table(spec, params) : top::io::read_table(slurp(o.table));
  emit(o.out, top::protocol_markdown(spec, params, table));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-to-event Bayesian optimal phase II designs: calibrate, tabulate, decide, simulate, report"};
  app.require_subcommand(1);
  Options o;

  auto* cal = app.add_subcommand("calibrate", "Calibrate (C, gamma) for a design spec");
  cal->add_option("--spec", o.spec, "Design spec (JSON)")->required()->check(CLI::ExistingFile);
  cal->add_option("--format", o.format, "json (default) or text");
  cal->add_option("--out", o.out, "Output file (default stdout)");

  auto* tab = app.add_subcommand("table", "Generate the decision table");
  tab->add_option("--spec", o.spec, "Design spec (JSON)")->required()->check(CLI::ExistingFile);
  tab->add_option("--params", o.params, "Cutoff params or calibration output (JSON)")->check(CLI::ExistingFile);
  tab->add_flag("--calibrate", o.calibrate_inline, "Calibrate when --params is absent");
  tab->add_option("--format", o.format, "tsv (default), json or markdown");
  tab->add_option("--out", o.out, "Output file (default stdout)");

  auto* dec = app.add_subcommand("decide", "Interim decision from patient rows and a decision table");
  dec->add_option("--table", o.table, "Decision table (TSV or JSON)")->required()->check(CLI::ExistingFile);
  dec->add_option("--data", o.data, "Interim patient rows (CSV)")->required()->check(CLI::ExistingFile);
  dec->add_option("--spec", o.spec, "Design spec supplying assessment windows")->check(CLI::ExistingFile);
  dec->add_option("--window", o.windows, "Assessment window NAME=DAYS (repeatable)");
  dec->add_option("--format", o.format, "text (default) or json");
  dec->add_option("--out", o.out, "Output file (default stdout)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo operating characteristics");
  sim->add_option("--scenario", o.scenarios, "Scenario file(s) (JSON)")->check(CLI::ExistingFile);
  sim->add_option("--preset", o.presets, "Built-in scenario 1-9, or 'all'");
  sim->add_option("--designs", o.designs, "Comma-separated roster: TOP,BOP2,Simon,TS");
  sim->add_option("--replicates", o.replicates, "Simulated trials per scenario")->check(CLI::PositiveNumber);
  sim->add_option("--seed", o.seed, "Base seed");
  sim->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
  sim->add_option("--format", o.format, "tsv (default) or json");
  sim->add_option("--out", o.out, "Output file, or directory for several scenarios");

  auto* rep = app.add_subcommand("report", "Protocol template (markdown)");
  rep->add_option("--spec", o.spec, "Design spec (JSON)")->required()->check(CLI::ExistingFile);
  rep->add_option("--params", o.params, "Cutoff params or calibration output (JSON)")->check(CLI::ExistingFile);
  rep->add_flag("--calibrate", o.calibrate_inline, "Calibrate when --params is absent");
  rep->add_option("--table", o.table, "Decision table to embed (default: regenerate)")->check(CLI::ExistingFile);
  rep->add_option("--out", o.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*cal) return run_calibrate(o);
    if (*tab) return run_table(o);
    if (*dec) return run_decide(o);
    if (*sim) return run_simulate(o);
    if (*rep) return run_report(o);
  } catch (const top::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const top::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const top::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
