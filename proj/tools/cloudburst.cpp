// Command-line entry points: run, serve, report, validate.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "cloudburst/campaign.hpp"
#include "cloudburst/report.hpp"
#include "cloudburst/scenario.hpp"
#include "cloudburst/service.hpp"

namespace fs = std::filesystem;
using namespace cloudburst;

namespace {

constexpr int kDefaultPort = 8080;
constexpr const char* kPortEnv = "CLOUDBURST_PORT";

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int default_port() {
  if (const char* v = std::getenv(kPortEnv)) {
    char* end = nullptr;
    const long p = std::strtol(v, &end, 10);
    if (*v && *end == '\0' && p > 0 && p < 65536) return static_cast<int>(p);
    std::cerr << "ignoring invalid " << kPortEnv << "=" << v << "\n";
  }
  return kDefaultPort;
}

Scenario load(const std::string& path, std::optional<std::uint64_t> seed) {
  Scenario s = load_scenario(path);
  if (seed) s.seed = seed;
  return s;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  const Scenario s = load(path, seed);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  std::ofstream log(dir / "events.jsonl", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + (dir / "events.jsonl").string());
  std::vector<TimelineRow> timeline;
  const CampaignReport report = run_campaign(s, &log, &timeline);
  log.close();

  std::ofstream csv(dir / "timeline.csv", std::ios::binary);
  write_timeline_csv(csv, timeline);
  std::ofstream rep(dir / "report.json", std::ios::binary);
  rep << report.to_json().dump(2) << '\n';

  std::printf("%s: %.1f GPU-days, $%.2f, %.4f EFLOP-hours, %d jobs completed, %llu events -> %s\n",
              report.scenario.c_str(), report.total_gpu_days(), report.total_cost.usd(), report.eflop_hours(),
              report.jobs_completed, static_cast<unsigned long long>(report.events), out_dir.c_str());
  return 0;
}

int cmd_serve(const std::string& path, std::optional<int> port, double compression, const std::string& log_path) {
  const Scenario s = load(path, std::nullopt);
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + log_path);

  CampaignService service(s, &log, compression);
  httplib::Server server;
  install_control_api(server, service);
  service.start();

  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int p = port.value_or(default_port());
  std::printf("serving %s on http://0.0.0.0:%d (compression %.0f sim-s per s, log %s)\n", s.name.c_str(), p,
              compression, log_path.c_str());
  std::fflush(stdout);
  const bool ok = server.listen("0.0.0.0", p);
  g_server = nullptr;
  service.stop();
  if (!ok) {
    std::cerr << "cannot listen on port " << p << "\n";
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::cout << emit_report(in).to_json().dump(2) << '\n';
  return 0;
}

int cmd_validate(const std::string& path) {
  const Scenario s = load_scenario(path);
  int markets = 0;
  for (const Region& r : s.regions) markets += static_cast<int>(r.markets.size());
  std::printf("ok: %s, %zu providers, %zu regions, %d markets, horizon %lld s, ramp [", s.name.c_str(),
              s.providers.size(), s.regions.size(), markets, static_cast<long long>(s.horizon));
  for (std::size_t i = 0; i < s.ramp.steps.size(); ++i) std::printf("%s%d", i ? ", " : "", s.ramp.steps[i].target_gpus);
  std::printf("]\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cloudburst: multi-cloud spot GPU campaign simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  auto* run = app.add_subcommand("run", "Run a scenario to its horizon in batch mode");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory for events.jsonl, timeline.csv, report.json");

  std::optional<int> port;
  double compression = 3600.0;
  std::string log_path = "events.jsonl";
  auto* serve = app.add_subcommand("serve", "Run interactively behind the control API");
  serve->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  serve->add_option("--port", port, std::string("Listen port (default from ") + kPortEnv + ", else 8080)");
  serve->add_option("--compression", compression, "Simulated seconds per wall-clock second; 0 pauses")
      ->check(CLI::NonNegativeNumber);
  serve->add_option("--log", log_path, "Event log path");

  std::string log_in;
  auto* report = app.add_subcommand("report", "Recompute the campaign report from an event log");
  report->add_option("log", log_in, "Event log (JSON lines)")->required();

  auto* validate = app.add_subcommand("validate", "Load and validate a scenario");
  validate->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario_path, seed, out_dir);
    if (*serve) return cmd_serve(scenario_path, port, compression, log_path);
    if (*report) return cmd_report(log_in);
    if (*validate) return cmd_validate(scenario_path);
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const IntegrityError& e) {
    std::cerr << "log integrity error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
