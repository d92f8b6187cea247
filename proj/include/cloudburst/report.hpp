#pragma once

// Campaign reports, timeline export and log replay.

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudburst/budget.hpp"
#include "cloudburst/types.hpp"

namespace cloudburst {

struct Scenario;

// The event log is damaged: truncated, malformed, or its trailer disagrees
// with its contents.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProviderTotals {
  std::int64_t gpu_seconds{0};
  Money cost;
  int preemptions{0};
};

struct CampaignReport {
  std::string scenario;
  std::uint64_t seed{0};
  SimTime horizon{0};
  SimTime clock{0};

  // Billed GPU time: every instance from provisioning request until it is
  // preempted or de-provisioned (or the report clock).
  std::int64_t gpu_seconds{0};
  double tflops_per_gpu{0.0};
  Money total_cost;
  Money budget;
  std::map<std::string, ProviderTotals> per_provider;

  int instances_provisioned{0};
  int instances_preempted{0};
  int instances_deprovisioned{0};
  int pilot_drops{0};

  int jobs_submitted{0};
  int jobs_admitted{0};
  int jobs_rejected{0};
  int jobs_submission_errors{0};
  int jobs_completed{0};
  int job_preemptions{0};

  std::vector<int> shortfall_gpus;  // one sample per hour
  std::vector<Alert> alerts;
  std::uint64_t events{0};

  double total_gpu_days() const { return static_cast<double>(gpu_seconds) / kSecondsPerDay; }
  double eflop_hours() const;
  std::optional<double> blended_cost_per_gpu_day() const;

  nlohmann::ordered_json to_json() const;
};

// Recomputes the report from an event log alone. Throws IntegrityError.
CampaignReport emit_report(std::istream& log);

struct TimelineRow {
  int hour{0};  // sample taken at the end of this hour (or at the horizon)
  int live_gpus{0};
  int queued{0};
  int running{0};
  Money spend;
  double remaining_frac{1.0};
  int preemptions{0};  // instance preemptions during the hour
};

inline constexpr const char* kTimelineHeader = "hour,live_gpus,queued,running,spend_usd,remaining_frac,preemptions";

void write_timeline_csv(std::ostream& out, const std::vector<TimelineRow>& rows);
nlohmann::ordered_json timeline_row_json(const TimelineRow& row);

// Bounds on billed GPU-seconds implied by the scenario alone, ignoring the
// workload. Valid for scenarios without CE-driven operator commands.
struct Envelope {
  double lower_gpu_seconds{0.0};
  double upper_gpu_seconds{0.0};
};

Envelope analytic_envelope(const Scenario& s);

}  // namespace cloudburst
