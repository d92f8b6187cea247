#include "cloudburst/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <httplib.h>

namespace cloudburst {

using nlohmann::json;
using nlohmann::ordered_json;

CampaignService::CampaignService(Scenario scenario, std::ostream* log_sink, double compression)
    : campaign_(std::move(scenario), log_sink), compression_(compression) {
  if (!(compression >= 0.0)) throw std::invalid_argument("compression must be >= 0");
  for (const GroupRecord& g : campaign_.groups()) group_ids_.push_back(g.group.id);
  campaign_.run_until(0);
  publish();
}

CampaignService::~CampaignService() { stop(); }

void CampaignService::start() {
  std::lock_guard lock(mu_);
  if (thread_.joinable()) return;
  stop_ = false;
  thread_ = std::thread([this] { loop(); });
}

void CampaignService::stop() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  std::lock_guard lock(mu_);
  for (Pending& p : queue_) p.reply.set_value(CommandReply{false, "service stopped", campaign_.clock()});
  queue_.clear();
  campaign_.close_log();
}

std::shared_ptr<const Snapshot> CampaignService::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_;
}

bool CampaignService::has_group(const std::string& id) const {
  return std::find(group_ids_.begin(), group_ids_.end(), id) != group_ids_.end();
}

void CampaignService::set_compression(double compression) {
  if (!(compression >= 0.0)) throw std::invalid_argument("compression must be >= 0");
  std::lock_guard lock(mu_);
  compression_ = compression;
}

CommandReply CampaignService::submit(OperatorCommand cmd) {
  std::future<CommandReply> reply;
  {
    std::lock_guard lock(mu_);
    if (stop_ || !thread_.joinable()) return CommandReply{false, "service is not running", 0};
    queue_.push_back(Pending{std::move(cmd), {}});
    reply = queue_.back().reply.get_future();
  }
  cv_.notify_all();
  return reply.get();
}

void CampaignService::publish() {
  auto snap = std::make_shared<Snapshot>();
  snap->clock = campaign_.clock();
  snap->finished = campaign_.finished();
  snap->status = campaign_.status_json();
  snap->stopped = snap->status["policy"]["suspended"].get<bool>();
  snap->budget = campaign_.budget_json();
  snap->groups = campaign_.groups_json();
  snap->timeline = campaign_.timeline_json(0);
  std::lock_guard lock(mu_);
  snapshot_ = std::move(snap);
}

void CampaignService::loop() {
  using clock = std::chrono::steady_clock;
  auto last = clock::now();
  double carry = 0.0;
  for (;;) {
    std::deque<Pending> work;
    double compression;
    {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, std::chrono::milliseconds(50), [&] { return stop_ || !queue_.empty(); });
      if (stop_) return;
      work.swap(queue_);
      compression = compression_;
    }

    for (Pending& p : work) {
      CommandReply r;
      try {
        const std::size_t h = campaign_.submit_command(p.cmd);
        campaign_.run_until(campaign_.clock() + 1);
        const auto& outcome = campaign_.command_outcome(h);
        r.applied = outcome && outcome->applied;
        r.error = outcome ? outcome->error : "not applied";
        r.applied_at = campaign_.clock();
      } catch (const std::exception& e) {
        r.applied = false;
        r.error = e.what();
        r.applied_at = campaign_.clock();
      }
      publish();
      p.reply.set_value(std::move(r));
    }

    const auto now = clock::now();
    const double wall = std::chrono::duration<double>(now - last).count();
    last = now;
    if (campaign_.finished()) continue;
    carry += wall * compression;
    const auto step = static_cast<SimTime>(std::floor(carry));
    if (step > 0) {
      carry -= static_cast<double>(step);
      campaign_.run_until(campaign_.clock() + step);
      publish();
    }
  }
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, ordered_json{{"error", message}});
}

// Parses the request body as a JSON object; replies 422 and returns nullopt otherwise.
std::optional<json> body_object(const httplib::Request& req, httplib::Response& res) {
  try {
    json j = json::parse(req.body);
    if (j.is_object()) return j;
  } catch (const json::parse_error&) {
  }
  send_error(res, 422, "body must be a JSON object");
  return std::nullopt;
}

// Non-negative integer field; replies 422 and returns nullopt otherwise.
std::optional<int> count_field(const json& body, const char* key, httplib::Response& res) {
  if (body.contains(key)) {
    const json& v = body.at(key);
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0 && v.get<std::int64_t>() <= 10'000'000) {
      return static_cast<int>(v.get<std::int64_t>());
    }
  }
  send_error(res, 422, std::string("'") + key + "' must be a non-negative integer");
  return std::nullopt;
}

void reply_command(httplib::Response& res, CampaignService& service, OperatorCommand cmd) {
  const CommandReply r = service.submit(std::move(cmd));
  if (!r.applied) {
    send_error(res, 409, r.error);
    return;
  }
  send_json(res, 200, ordered_json{{"accepted", true}, {"applied_at", r.applied_at}, {"status", service.snapshot()->status}});
}

}  // namespace

void install_control_api(httplib::Server& server, CampaignService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/status", [&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, service.snapshot()->status);
  });
  server.Get("/budget", [&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, service.snapshot()->budget);
  });
  server.Get("/groups", [&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, service.snapshot()->groups);
  });
  server.Get("/timeline", [&service](const httplib::Request& req, httplib::Response& res) {
    long from = 0;
    if (req.has_param("from")) {
      const std::string v = req.get_param_value("from");
      char* end = nullptr;
      from = std::strtol(v.c_str(), &end, 10);
      if (v.empty() || *end != '\0' || from < 0) {
        send_error(res, 422, "'from' must be a non-negative integer hour");
        return;
      }
    }
    ordered_json rows = ordered_json::array();
    for (const auto& row : service.snapshot()->timeline) {
      if (row["hour"].get<long>() >= from) rows.push_back(row);
    }
    send_json(res, 200, rows);
  });

  server.Post(R"(/groups/([^/]+)/desired)", [&service](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!service.has_group(id)) {
      send_error(res, 404, "unknown group '" + id + "'");
      return;
    }
    const auto body = body_object(req, res);
    if (!body) return;
    const auto n = count_field(*body, "n", res);
    if (!n) return;
    OperatorCommand c;
    c.type = CommandType::SetGroupDesired;
    c.group = id;
    c.value = *n;
    reply_command(res, service, std::move(c));
  });

  server.Post("/target", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_object(req, res);
    if (!body) return;
    OperatorCommand c;
    if (body->contains("gpus") && body->at("gpus").is_null()) {
      c.type = CommandType::ReleaseTarget;
    } else {
      const auto gpus = count_field(*body, "gpus", res);
      if (!gpus) return;
      c.type = CommandType::SetTarget;
      c.value = *gpus;
    }
    reply_command(res, service, std::move(c));
  });

  server.Post("/emergency-stop", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_object(req, res);
    if (!body) return;
    OperatorCommand c;
    c.type = CommandType::EmergencyStop;
    if (body->contains("reason")) {
      if (!body->at("reason").is_string()) {
        send_error(res, 422, "'reason' must be a string");
        return;
      }
      c.reason = body->at("reason").get<std::string>();
    }
    reply_command(res, service, std::move(c));
  });

  server.Post("/resume", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = body_object(req, res);
    if (!body) return;
    const auto target = count_field(*body, "target", res);
    if (!target) return;
    OperatorCommand c;
    c.type = CommandType::Resume;
    c.value = *target;
    reply_command(res, service, std::move(c));
  });
}

}  // namespace cloudburst
