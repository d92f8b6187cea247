#pragma once

// Declarative campaign description, loaded from a single JSON document.
// The schema is documented in docs/scenario.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudburst/model.hpp"
#include "cloudburst/policy.hpp"
#include "cloudburst/types.hpp"

namespace cloudburst {

// Parse or validation failure. `field()` names the offending JSON path,
// e.g. "providers[0].regions[1].nat_idle_timeout_s".
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct JobBatch {
  std::string community{"icecube"};
  int count{0};
  SimTime start{0};
  Duration interval{0};  // spacing between consecutive submissions
  Duration min_gpu_seconds{3600};
  Duration max_gpu_seconds{3600};
};

struct OutageWindow {
  SimTime begin{0};
  SimTime end{0};
};

struct Degradation {
  SimTime begin{0};
  SimTime end{0};
  double factor{1.0};  // job duration multiplier for jobs started inside the window
};

enum class CommandType { SetTarget, ReleaseTarget, SetGroupDesired, ReleaseGroup, EmergencyStop, Resume };

std::string_view to_string(CommandType t);

struct OperatorCommand {
  CommandType type{CommandType::SetTarget};
  SimTime at{0};
  int value{0};  // gpus / n / target, depending on type
  std::string group;
  std::string reason;

  nlohmann::ordered_json to_json() const;
};

struct Scenario {
  std::string name{"campaign"};
  std::optional<std::uint64_t> seed;
  SimTime horizon{0};
  double fp32_tflops_per_gpu{8.1};

  std::vector<InstanceType> instance_types;
  std::vector<Provider> providers;
  std::vector<Region> regions;  // flattened, in provider order

  Duration provision_latency{120};
  Duration deprovision_latency{30};
  Duration pilot_restart_delay{60};

  Duration keepalive_interval{60};
  bool log_keepalives{false};
  std::set<std::string> accepted_communities{"icecube"};

  RampPlan ramp;
  AllocationPolicy allocation;
  Duration ewma_half_life{6 * kSecondsPerHour};
  Duration control_tick{300};
  Duration accrual_interval{kSecondsPerHour};

  Money budget_total;
  std::vector<double> thresholds{0.75, 0.5, 0.25, 0.1};
  std::vector<BudgetGuard> guards;
  Duration spend_rate_window{3 * kSecondsPerDay};

  std::vector<JobBatch> workload;
  std::vector<OutageWindow> ce_outages;
  std::vector<Degradation> degradations;
  std::vector<OperatorCommand> operator_commands;

  std::optional<double> baseline_onprem_gpu_hours;

  const InstanceType& instance_type(const std::string& id) const;
  const Region& region(const std::string& id) const;

  nlohmann::ordered_json to_json() const;
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario parse_scenario_text(const std::string& text);
// Reads, parses and validates. Throws ScenarioError.
Scenario load_scenario(const std::filesystem::path& path);

// Cross-reference and positivity checks. Throws ScenarioError.
void validate(const Scenario& s);

// Merges overlapping or touching outage windows.
std::vector<OutageWindow> merge_outages(std::vector<OutageWindow> windows);

}  // namespace cloudburst
