#pragma once

// Interactive mode: a kernel thread paced against the wall clock, a serialized
// command queue in, immutable snapshots out, and the HTTP control API on top.

#include <condition_variable>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "cloudburst/campaign.hpp"

namespace httplib {
class Server;
}

namespace cloudburst {

struct Snapshot {
  SimTime clock{0};
  bool finished{false};
  bool stopped{false};
  nlohmann::ordered_json status;
  nlohmann::ordered_json budget;
  nlohmann::ordered_json groups;
  nlohmann::ordered_json timeline;  // every row so far
};

struct CommandReply {
  bool applied{false};
  std::string error;
  SimTime applied_at{0};
};

class CampaignService {
 public:
  // compression: simulated seconds per wall-clock second; 0 pauses the clock
  // (commands still apply).
  CampaignService(Scenario scenario, std::ostream* log_sink, double compression = 3600.0);
  ~CampaignService();

  CampaignService(const CampaignService&) = delete;
  CampaignService& operator=(const CampaignService&) = delete;

  void start();
  void stop();

  std::shared_ptr<const Snapshot> snapshot() const;
  // Blocks until the kernel thread has applied the command.
  CommandReply submit(OperatorCommand cmd);

  void set_compression(double compression);
  bool has_group(const std::string& id) const;

 private:
  struct Pending {
    OperatorCommand cmd;
    std::promise<CommandReply> reply;
  };

  void loop();
  void publish();

  Campaign campaign_;
  std::vector<std::string> group_ids_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Pending> queue_;
  double compression_;
  bool stop_{false};
  std::shared_ptr<const Snapshot> snapshot_;
  std::thread thread_;
};

// Registers the control API endpoints on `server`.
void install_control_api(httplib::Server& server, CampaignService& service);

}  // namespace cloudburst
