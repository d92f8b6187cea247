#pragma once

// Scale-group abstraction shared by Azure VMSS, GCP instance groups and AWS
// spot fleets: an operator sets a desired count and the provider fulfils as
// many as the market's capacity allows.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cloudburst/model.hpp"
#include "cloudburst/rng.hpp"
#include "cloudburst/types.hpp"

namespace cloudburst {

enum class InstanceState { Provisioning, Running, Preempted, Deprovisioned };

std::string_view to_string(InstanceState s);
bool is_terminal(InstanceState s);
bool is_legal_transition(InstanceState from, InstanceState to);

struct Instance {
  InstanceId id{};
  std::size_t group{0};
  InstanceState state{InstanceState::Provisioning};
  SimTime started_at{0};
  std::optional<SimTime> running_at;
  std::optional<SimTime> ended_at;
  // Set once a de-provision has been requested; the instance keeps its state
  // (and keeps billing) until the de-provision latency has elapsed.
  std::optional<SimTime> terminate_at;
  int gpus{1};

  bool live() const { return !is_terminal(state); }
  bool active() const { return live() && !terminate_at; }

  // Throws std::logic_error on an illegal transition.
  void transition(InstanceState to, SimTime now);
};

struct ScaleGroup {
  std::string id;
  std::string region;
  std::string provider;
  SpotMarket market;
  int gpus_per_instance{1};
  int desired_count{0};
};

// Returns true when the desired count changed. Throws std::invalid_argument on n < 0.
bool set_desired(ScaleGroup& group, int n);

struct ReconcilePlan {
  int provision{0};
  std::vector<InstanceId> deprovision;  // youngest first
  int shortfall{0};

  bool empty() const { return provision == 0 && deprovision.empty(); }
};

// `owned` lists every live instance of the group, including ones already
// being de-provisioned (they still hold capacity).
ReconcilePlan reconcile(const ScaleGroup& group, std::span<const Instance* const> owned);

// Probability that a running instance is reclaimed within dt.
double preemption_probability(double rate_per_day, Duration dt);

// One uniform draw per running instance, in the order given. A zero-rate
// market consumes no draws.
std::vector<InstanceId> sample_preemptions(std::span<const InstanceId> running, double rate_per_day,
                                           Duration dt, RandomStream& rng);

// Returns how many groups actually changed.
int zero_all(std::span<ScaleGroup> groups);

}  // namespace cloudburst
