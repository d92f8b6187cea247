#include "cloudburst/provision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cloudburst {

std::string_view to_string(InstanceState s) {
  switch (s) {
    case InstanceState::Provisioning: return "Provisioning";
    case InstanceState::Running: return "Running";
    case InstanceState::Preempted: return "Preempted";
    case InstanceState::Deprovisioned: return "Deprovisioned";
  }
  return "?";
}

bool is_terminal(InstanceState s) {
  return s == InstanceState::Preempted || s == InstanceState::Deprovisioned;
}

bool is_legal_transition(InstanceState from, InstanceState to) {
  switch (from) {
    case InstanceState::Provisioning:
      return to == InstanceState::Running || to == InstanceState::Deprovisioned;
    case InstanceState::Running:
      return to == InstanceState::Preempted || to == InstanceState::Deprovisioned;
    default:
      return false;
  }
}

void Instance::transition(InstanceState to, SimTime now) {
  if (!is_legal_transition(state, to)) {
    throw std::logic_error("instance " + std::to_string(raw(id)) + ": illegal transition " +
                           std::string(to_string(state)) + " -> " + std::string(to_string(to)));
  }
  if (now < started_at) throw std::logic_error("instance transition before start");
  state = to;
  if (to == InstanceState::Running) {
    running_at = now;
  } else {
    ended_at = now;
  }
}

bool set_desired(ScaleGroup& group, int n) {
  if (n < 0) throw std::invalid_argument("set_desired: n must be >= 0");
  if (group.desired_count == n) return false;
  group.desired_count = n;
  return true;
}

ReconcilePlan reconcile(const ScaleGroup& group, std::span<const Instance* const> owned) {
  ReconcilePlan plan;
  std::vector<const Instance*> active;
  for (const Instance* inst : owned) {
    if (inst->active()) active.push_back(inst);
  }
  const int live = static_cast<int>(active.size());
  const int occupied = static_cast<int>(owned.size());
  const int desired = group.desired_count;

  if (live < desired) {
    const int headroom = std::max(0, group.market.capacity - occupied);
    plan.provision = std::min(desired - live, headroom);
    plan.shortfall = desired - live - plan.provision;
  } else if (live > desired) {
    std::sort(active.begin(), active.end(), [](const Instance* a, const Instance* b) {
      if (a->started_at != b->started_at) return a->started_at > b->started_at;
      return raw(a->id) > raw(b->id);
    });
    for (int i = 0; i < live - desired; ++i) plan.deprovision.push_back(active[i]->id);
  }
  return plan;
}

double preemption_probability(double rate_per_day, Duration dt) {
  if (rate_per_day <= 0.0 || dt <= 0) return 0.0;
  return -std::expm1(-rate_per_day * static_cast<double>(dt) / static_cast<double>(kSecondsPerDay));
}

std::vector<InstanceId> sample_preemptions(std::span<const InstanceId> running, double rate_per_day,
                                           Duration dt, RandomStream& rng) {
  if (dt <= 0) throw std::invalid_argument("sample_preemptions: dt must be > 0");
  std::vector<InstanceId> out;
  if (rate_per_day <= 0.0) return out;
  const double p = preemption_probability(rate_per_day, dt);
  for (InstanceId id : running) {
    if (rng.uniform() < p) out.push_back(id);
  }
  return out;
}

int zero_all(std::span<ScaleGroup> groups) {
  int changed = 0;
  for (ScaleGroup& g : groups) {
    if (set_desired(g, 0)) ++changed;
  }
  return changed;
}

}  // namespace cloudburst
