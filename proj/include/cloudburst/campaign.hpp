#pragma once

// A running campaign: owns every piece of mutable simulation state and wires
// the provision, overlay, budget and policy modules to the kernel.

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudburst/budget.hpp"
#include "cloudburst/event_log.hpp"
#include "cloudburst/overlay.hpp"
#include "cloudburst/policy.hpp"
#include "cloudburst/provision.hpp"
#include "cloudburst/report.hpp"
#include "cloudburst/rng.hpp"
#include "cloudburst/scenario.hpp"
#include "cloudburst/simkernel.hpp"

namespace cloudburst {

struct InstanceRecord {
  Instance inst;
  std::optional<Pilot> pilot;
  std::uint32_t next_generation{0};
  bool awaiting_ce{false};  // pilot is up but cannot register while the CE is down
  bool silent{false};       // connection cannot carry traffic (CE down)
  SimTime frozen_last{0};   // last effective traffic before the silence began
  std::uint64_t drop_token{0};
  std::uint64_t keepalive_token{0};
  Money billed;
};

struct JobRecord {
  Job job;
  enum class Intake { Pending, Admitted, Rejected, SubmissionError } intake{Intake::Pending};
  SimTime finish_at{0};
  std::uint64_t run_token{0};
  std::optional<InstanceId> instance;
};

struct GroupRecord {
  ScaleGroup group;
  Duration nat_idle_timeout{240};
  std::set<std::uint32_t> live;  // live instance ids, terminating ones included
  int active{0};                 // live and not terminating
  int shortfall{0};
  std::optional<int> pinned;
  int preemptions{0};
  PreemptionEstimator estimator;
  RandomStream rng;
};

struct CommandOutcome {
  bool applied{false};
  std::string error;  // set when rejected
};

class Campaign final : public EventHandler {
 public:
  // Writes the log header immediately. `log_sink` may be null.
  explicit Campaign(Scenario scenario, std::ostream* log_sink = nullptr);

  Campaign(const Campaign&) = delete;
  Campaign& operator=(const Campaign&) = delete;

  const Scenario& scenario() const { return scenario_; }
  SimTime clock() const { return kernel_.now(); }
  SimTime horizon() const { return scenario_.horizon; }
  bool finished() const { return finished_; }

  // Advances to min(t, horizon). Reaching the horizon closes the log.
  void run_until(SimTime t);
  void run_to_end() { run_until(scenario_.horizon); }
  // Writes the log trailer at the current clock if not yet written.
  void close_log();

  // Schedules a command at max(cmd.at, clock + 1). Returns its handle.
  // Throws std::logic_error once the campaign has finished.
  std::size_t submit_command(OperatorCommand cmd);
  const std::optional<CommandOutcome>& command_outcome(std::size_t handle) const;

  // Overlapping windows merge. Throws SchedulingError when begin is in the past.
  void inject_outage(SimTime begin, SimTime end);

  // Snapshot documents served by the control API.
  nlohmann::ordered_json status_json() const;
  nlohmann::ordered_json budget_json() const;
  nlohmann::ordered_json groups_json() const;
  nlohmann::ordered_json timeline_json(int from_hour) const;

  const std::vector<TimelineRow>& timeline() const { return timeline_; }
  CampaignReport report() const;

  // Canonical text of the observable state, used for trajectory comparison.
  std::string state_digest() const;

  const BudgetLedger& ledger() const { return ledger_; }
  const std::vector<InstanceRecord>& instances() const { return instances_; }
  const std::vector<JobRecord>& jobs() const { return jobs_; }
  const std::vector<GroupRecord>& groups() const { return groups_; }
  const ComputeElement& ce() const { return ce_; }
  const PolicyState& policy_state() const { return policy_state_; }
  const Kernel& kernel() const { return kernel_; }
  const EventLog& log() const { return log_; }
  int live_gpus() const;
  int running_jobs() const { return running_jobs_; }
  int pilot_drops() const { return pilot_drops_; }

  void on_event(const Event& ev) override;
  void end_of_instant(SimTime now) override;

 private:
  void schedule_load_events();

  // event handlers
  void on_job_submitted(JobRecord& jr, SimTime now);
  void on_instance_running(InstanceRecord& ir, SimTime now);
  void on_instance_deprovisioned(InstanceRecord& ir, SimTime now);
  void on_pilot_restart(InstanceRecord& ir, std::uint64_t generation, SimTime now);
  void on_pilot_drop(InstanceRecord& ir, std::uint64_t token, SimTime now);
  void on_keepalive(InstanceRecord& ir, std::uint64_t token, SimTime now);
  void on_job_completed(JobRecord& jr, std::uint64_t token, SimTime now);
  void on_operator_command(std::size_t index, SimTime now);
  void on_outage_begin(SimTime now);
  void on_outage_end(SimTime now);

  // settle phases
  void accrue(SimTime now);
  void sample_preemptions_at(SimTime now);
  void evaluate_alerts(SimTime now);
  void evaluate_policy(SimTime now);
  void reconcile_dirty(SimTime now);
  void match(SimTime now);
  void sample_timeline(SimTime now);

  // helpers
  void start_pilot(InstanceRecord& ir, SimTime now);
  void register_pilot(InstanceRecord& ir, SimTime now);
  void touch(InstanceRecord& ir, SimTime now);  // traffic on the pilot connection
  void reschedule_drop(InstanceRecord& ir);
  void schedule_keepalive(InstanceRecord& ir, SimTime from);
  SimTime effective_last_traffic(const InstanceRecord& ir, SimTime now) const;
  bool try_complete(JobRecord& jr, SimTime now);
  void kill_pilot_on(InstanceRecord& ir, SimTime now, const char* reason);
  void end_instance(InstanceRecord& ir, InstanceState to, SimTime now);
  Money bill(InstanceRecord& ir, SimTime now);
  void request_desired(GroupRecord& g, int n, SimTime now, const char* source);
  double degradation_factor(SimTime now) const;
  Duration nat_of(const InstanceRecord& ir) const { return groups_[ir.inst.group].nat_idle_timeout; }
  bool registered(const InstanceRecord& ir) const;
  void set_idle(InstanceRecord& ir, bool idle);
  void record_spend(const GroupRecord& g, Money amount, SimTime now);

  Scenario scenario_;
  Kernel kernel_;
  EventLog log_;
  bool log_closed_{false};
  bool finished_{false};

  ComputeElement ce_;
  int outage_depth_{0};
  std::vector<GroupRecord> groups_;
  std::map<std::string, std::size_t> group_index_;
  std::vector<InstanceRecord> instances_;
  std::vector<JobRecord> jobs_;
  std::set<PilotId> idle_;  // registered idle pilots on non-terminating instances
  int running_jobs_{0};
  int pilot_drops_{0};

  BudgetLedger ledger_;
  PolicyController policy_;
  PolicyState policy_state_;

  std::vector<OperatorCommand> commands_;
  std::vector<std::optional<CommandOutcome>> outcomes_;

  bool tick_pending_{false};
  bool eval_requested_{false};
  SimTime last_tick_{0};
  std::set<std::size_t> dirty_;
  int hour_preemptions_{0};
  std::vector<TimelineRow> timeline_;
  std::vector<int> shortfall_series_;
};

// Runs a scenario to its horizon. The scenario is used as given; callers
// validate first. A non-positive horizon yields an empty report.
CampaignReport run_campaign(const Scenario& scenario, std::ostream* log_sink = nullptr,
                            std::vector<TimelineRow>* timeline = nullptr);

}  // namespace cloudburst
