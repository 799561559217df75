#pragma once

// Transport-independent request handler for the HTTP service. Bodies are the
// same canonical JSON the CLI writes, so responses match CLI output byte for
// byte. Simulations can run synchronously or as cancellable polled jobs.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "top/design.hpp"
#include "top/error.hpp"
#include "top/io.hpp"
#include "top/simulation.hpp"

namespace top::service {

using io::json;

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct Config {
  int max_replicates = 20000;  // per request
  int max_jobs = 8;            // concurrently running simulation jobs
  unsigned threads = 0;        // simulation worker threads; 0 = hardware
};

inline Response error_response(int status, std::string_view code, std::string_view message) {
  json j{{"schema_version", io::kSchemaVersion},
         {"error", {{"status", status}, {"code", code}, {"message", message}}}};
  return {status, io::dump(j)};
}

/// Thrown by handlers for transport-level outcomes (404, 405, 429, ...).
struct HttpError : std::runtime_error {
  int status;
  std::string code;
  HttpError(int s, std::string c, const std::string& msg) : std::runtime_error(msg), status(s), code(std::move(c)) {}
};

/// Scenario from a request: either "preset" (1-9) or an inline "scenario",
/// optionally overriding the design roster with "designs".
inline Scenario scenario_from_request(const json& body) {
  Scenario sc;
  if (body.contains("preset")) {
    const auto presets = scenario_presets();
    const int i = io::detail::get<int>(body, "preset");
    if (i < 1 || i > static_cast<int>(presets.size()))
      throw DomainError("preset must be between 1 and " + std::to_string(presets.size()));
    sc = presets[i - 1];
  } else if (body.contains("scenario")) {
    sc = io::scenario_from_json(body.at("scenario"));
  } else {
    throw DomainError("request needs 'preset' or 'scenario'");
  }
  if (body.contains("designs")) {
    sc.roster.clear();
    for (const auto& d : body.at("designs")) {
      if (!d.is_string()) throw DomainError("designs must be strings");
      sc.roster.push_back(design_kind_from(d.get<std::string>()));
    }
  }
  sc.validate();
  return sc;
}

/// Endpoints with windows for a decide request: from "spec" or "windows_days".
inline std::vector<EndpointDef> decide_endpoints(const json& body, const DecisionTable& table) {
  std::vector<double> windows(table.endpoints.size(), 0.0);
  if (body.contains("spec")) {
    const auto spec = io::design_from_json(body.at("spec"));
    for (std::size_t k = 0; k < table.endpoints.size(); ++k) {
      const auto it = std::find_if(spec.endpoints.begin(), spec.endpoints.end(),
                                   [&](const auto& e) { return e.name == table.endpoints[k].name; });
      if (it == spec.endpoints.end()) throw DomainError("spec has no endpoint '" + table.endpoints[k].name + "'");
      windows[k] = it->window_days;
    }
  } else if (body.contains("windows_days")) {
    const auto& w = body.at("windows_days");
    for (std::size_t k = 0; k < table.endpoints.size(); ++k)
      windows[k] = io::detail::get_or<double>(w, table.endpoints[k].name.c_str(), 0.0);
  }
  return io::table_endpoints(table, windows);
}

class Service {
 public:
  explicit Service(Config cfg = {}) : cfg_(cfg) {}

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ~Service() {
    std::lock_guard lock(mu_);
    for (auto& [id, job] : jobs_) job->control.cancel = true;
    for (auto& [id, job] : jobs_)
      if (job->worker.joinable()) job->worker.join();
  }

  const Config& config() const { return cfg_; }

  Response handle(std::string_view method, std::string_view path, std::string_view body) {
    try {
      if (path == "/v1/health") return get_only(method, [] { return Response{200, io::dump({{"status", "ok"}})}; });
      if (path == "/v1/presets") return get_only(method, [] { return presets(); });
      if (path == "/v1/calibrate") return post_only(method, [&] { return calibrate(parse(body)); });
      if (path == "/v1/table") return post_only(method, [&] { return table(parse(body)); });
      if (path == "/v1/decide") return post_only(method, [&] { return decide(parse(body)); });
      if (path == "/v1/simulate") return post_only(method, [&] { return simulate(parse(body)); });
      if (path.starts_with("/v1/jobs/")) return job(method, path.substr(9));
      throw HttpError(404, "not_found", "no route for " + std::string(path));
    } catch (const HttpError& e) {
      return error_response(e.status, e.code, e.what());
    } catch (const ParseError& e) {
      return error_response(400, "malformed", e.what());
    } catch (const InfeasibleError& e) {
      return error_response(409, "infeasible", e.what());
    } catch (const DomainError& e) {
      return error_response(422, "invalid", e.what());
    } catch (const std::exception& e) {
      return error_response(500, "internal", e.what());
    }
  }

 private:
  struct Job {
    std::string id;
    int replicates = 0;
    SimulationControl control;
    std::mutex mu;
    std::string status = "running";
    std::string result;
    std::string error;
    std::thread worker;
  };

  static json parse(std::string_view body) {
    auto j = io::parse_json(body);
    if (!j.is_object()) throw ParseError("request body must be a JSON object");
    return j;
  }

  template <class F>
  static Response post_only(std::string_view method, F&& f) {
    if (method != "POST") throw HttpError(405, "method_not_allowed", "use POST");
    return f();
  }

  template <class F>
  static Response get_only(std::string_view method, F&& f) {
    if (method != "GET") throw HttpError(405, "method_not_allowed", "use GET");
    return f();
  }

  static Response presets() {
    json j = json::array();
    for (const auto& s : scenario_presets()) j.push_back(io::to_json(s));
    return {200, io::dump(j)};
  }

  static Response calibrate(const json& body) {
    const auto spec = io::design_from_json(body);
    return {200, io::dump(io::to_json(top::calibrate(spec), spec))};
  }

  static Response table(const json& body) {
    if (!body.contains("spec")) throw DomainError("request needs 'spec'");
    if (!body.contains("params")) throw DomainError("request needs 'params' (run /v1/calibrate first)");
    const auto spec = io::design_from_json(body.at("spec"));
    const auto params = io::params_from_json(body.at("params"));
    const auto t = decision_table(spec, params);
    const auto format = io::detail::get_or<std::string>(body, "format", "json");
    if (format == "json") return {200, io::dump(io::to_json(t))};
    if (format == "tsv") return {200, io::write_table_tsv(t), "text/tab-separated-values"};
    if (format == "markdown") return {200, io::write_table_markdown(t), "text/markdown"};
    throw DomainError("unknown format '" + format + "'");
  }

  static Response decide(const json& body) {
    if (!body.contains("table")) throw DomainError("request needs 'table'");
    const auto& jt = body.at("table");
    const DecisionTable t = jt.is_string() ? io::read_table_tsv(jt.get<std::string>()) : io::table_from_json(jt);
    const auto eps = decide_endpoints(body, t);
    io::InterimData data;
    if (body.contains("csv")) data = io::read_interim_csv(io::detail::get<std::string>(body, "csv"), eps);
    else if (body.contains("rows")) data = io::interim_from_json(body.at("rows"), eps);
    else throw DomainError("request needs 'rows' or 'csv'");
    return {200, io::dump(io::to_json(io::evaluate_decision(t, eps, data.patients)))};
  }

  Response simulate(const json& body) {
    const Scenario sc = scenario_from_request(body);
    const int replicates = io::detail::get_or<int>(body, "replicates", 1000);
    const auto seed = io::detail::get_or<std::uint64_t>(body, "seed", 1);
    if (replicates < 1) throw DomainError("replicates must be >= 1");
    if (replicates > cfg_.max_replicates)
      throw HttpError(429, "over_cap",
                      "replicates " + std::to_string(replicates) + " exceeds the cap of " + std::to_string(cfg_.max_replicates));
    const auto prepared = prepare_designs(sc);
    if (io::detail::get_or<bool>(body, "wait", false))
      return {200, io::dump(io::to_json(operating_characteristics(prepared, sc, replicates, seed, cfg_.threads)))};

    std::lock_guard lock(mu_);
    int running = 0;
    for (auto& [id, j] : jobs_) {
      std::lock_guard jl(j->mu);
      running += j->status == "running";
    }
    if (running >= cfg_.max_jobs) throw HttpError(429, "too_many_jobs", "too many simulation jobs running");
    auto job = std::make_shared<Job>();
    job->id = "job-" + std::to_string(++next_id_);
    job->replicates = replicates;
    job->worker = std::thread([job, prepared, sc, replicates, seed, threads = cfg_.threads] {
      std::string status, result, error;
      try {
        result = io::dump(io::to_json(operating_characteristics(prepared, sc, replicates, seed, threads, &job->control)));
        status = "done";
      } catch (const Cancelled&) {
        status = "cancelled";
      } catch (const std::exception& e) {
        status = "failed";
        error = e.what();
      }
      std::lock_guard jl(job->mu);
      job->status = status;
      job->result = std::move(result);
      job->error = std::move(error);
    });
    jobs_[job->id] = job;
    return {202, io::dump(job_json(*job))};
  }

  static json job_json(Job& job) {
    std::lock_guard jl(job.mu);
    json j{{"schema_version", io::kSchemaVersion},
           {"job_id", job.id},
           {"status", job.status},
           {"completed", job.control.completed.load()},
           {"replicates", job.replicates}};
    if (job.status == "done") j["result"] = json::parse(job.result);
    if (job.status == "failed") j["error"] = job.error;
    return j;
  }

  Response job(std::string_view method, std::string_view rest) {
    const bool want_result = rest.ends_with("/result");
    const std::string id(want_result ? rest.substr(0, rest.size() - 7) : rest);
    const bool remove = method == "DELETE" && !want_result;
    std::shared_ptr<Job> j;
    {
      std::lock_guard lock(mu_);
      const auto it = jobs_.find(id);
      if (it == jobs_.end()) throw HttpError(404, "not_found", "unknown job '" + id + "'");
      j = it->second;
      if (remove) jobs_.erase(it);  // only this request may join the worker
    }
    if (method == "GET" && want_result) {
      std::lock_guard jl(j->mu);
      if (j->status != "done") throw HttpError(409, "not_ready", "job " + id + " is " + j->status);
      return {200, j->result};
    }
    if (method == "GET") return {200, io::dump(job_json(*j))};
    if (remove) {
      j->control.cancel = true;
      if (j->worker.joinable()) j->worker.join();
      json out{{"schema_version", io::kSchemaVersion}, {"job_id", id}, {"status", "deleted"}};
      return {200, io::dump(out)};
    }
    throw HttpError(405, "method_not_allowed", "use GET or DELETE");
  }

  Config cfg_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::uint64_t next_id_ = 0;
};

}  // namespace top::service
