// top_server: HTTP front end for top::service::Service.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "httplib.h"
#include "top/service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"HTTP service for calibration, decision tables, interim decisions and simulation"};
  std::string host = "127.0.0.1";
  int port = 8080;
  top::service::Config cfg;
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port");
  app.add_option("--max-replicates", cfg.max_replicates, "Replicate cap per simulation request");
  app.add_option("--max-jobs", cfg.max_jobs, "Concurrently running simulation jobs");
  app.add_option("--threads", cfg.threads, "Simulation worker threads (0 = hardware)");
  CLI11_PARSE(app, argc, argv);

  top::service::Service service(cfg);
  httplib::Server server;
  auto route = [&](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, r.content_type);
  };
  server.Get(R"(/v1/.*)", route);
  server.Post(R"(/v1/.*)", route);
  server.Delete(R"(/v1/.*)", route);
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    std::cerr << "cannot bind " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}
