#include "cloudburst/policy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace cloudburst {

void RampPlan::validate() const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].target_gpus < 0) throw std::invalid_argument("ramp step target must be >= 0");
    if (i > 0 && steps[i].activate_at <= steps[i - 1].activate_at) {
      throw std::invalid_argument("ramp step activation times must strictly increase");
    }
  }
  if (hold_validation < 0) throw std::invalid_argument("hold_validation must be >= 0");
}

int ramp_step(const RampPlan& plan, SimTime now) {
  int target = 0;
  for (const RampStep& s : plan.steps) {
    if (s.activate_at > now) break;
    target = s.target_gpus;
  }
  return target;
}

double effective_price(const MarketOffer& offer, const AllocationPolicy& policy) {
  const double price = offer.market.spot_price_per_gpu_day;
  if (policy.mode == AllocationMode::CheapestFirst) return price;
  return price + policy.preemption_penalty * offer.observed_preemption_rate;
}

std::vector<int> allocate(int target_gpus, std::span<const MarketOffer> offers, const AllocationPolicy& policy) {
  if (target_gpus < 0) throw std::invalid_argument("allocate: target must be >= 0");
  std::vector<int> desired(offers.size(), 0);
  std::vector<std::size_t> order(offers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return effective_price(offers[a], policy) < effective_price(offers[b], policy);
  });

  std::map<std::string, int> region_left;
  int remaining = target_gpus;
  for (std::size_t i : order) {
    if (remaining <= 0) break;
    const MarketOffer& o = offers[i];
    const int gpi = std::max(1, o.gpus_per_instance);
    int gpus_allowed = remaining;
    if (policy.per_region_cap) {
      auto [it, inserted] = region_left.try_emplace(o.region, *policy.per_region_cap);
      gpus_allowed = std::min(gpus_allowed, it->second);
    }
    const int n = std::min(o.market.capacity, gpus_allowed / gpi);
    desired[i] = n;
    remaining -= n * gpi;
    if (policy.per_region_cap) region_left[o.region] -= n * gpi;
  }
  return desired;
}

void validate_guards(const std::vector<BudgetGuard>& guards) {
  for (std::size_t i = 0; i < guards.size(); ++i) {
    if (!(guards[i].fraction >= 0.0 && guards[i].fraction <= 1.0)) {
      throw std::invalid_argument("guard fraction outside [0,1]");
    }
    if (guards[i].max_gpus < 0) throw std::invalid_argument("guard max_gpus must be >= 0");
    if (i > 0 && !(guards[i - 1].fraction > guards[i].fraction)) {
      throw std::invalid_argument("guards must be sorted by fraction, descending");
    }
  }
}

std::optional<int> budget_guard(double remaining_fraction, std::span<const BudgetGuard> guards) {
  std::optional<int> cap;
  for (const BudgetGuard& g : guards) {
    if (g.fraction >= remaining_fraction) cap = cap ? std::min(*cap, g.max_gpus) : g.max_gpus;
  }
  return cap;
}

std::optional<int> budget_guard(const BudgetLedger& ledger, std::span<const BudgetGuard> guards) {
  std::optional<int> cap;
  for (const BudgetGuard& g : guards) {
    if (ledger.remaining_at_or_below(g.fraction)) cap = cap ? std::min(*cap, g.max_gpus) : g.max_gpus;
  }
  return cap;
}

void PreemptionEstimator::observe(int preemptions, double instance_days, Duration dt) {
  if (instance_days <= 0.0 || dt <= 0) return;
  const double instant = static_cast<double>(preemptions) / instance_days;
  const double alpha = 1.0 - std::exp2(-static_cast<double>(dt) / static_cast<double>(half_life_));
  rate_ += alpha * (instant - rate_);
}

PolicyController::PolicyController(RampPlan plan) : plan_(std::move(plan)) { plan_.validate(); }

int PolicyController::planned_target(SimTime now, int live_gpus) {
  if (suspended_) return 0;
  if (pinned_) return *pinned_;
  const auto& steps = plan_.steps;
  if (step_ >= 0 && !held_since_ && live_gpus >= steps[step_].target_gpus) held_since_ = now;
  while (step_ + 1 < static_cast<int>(steps.size()) && steps[step_ + 1].activate_at <= now) {
    const bool held = step_ < 0 || plan_.hold_validation == 0 ||
                      (held_since_ && now - *held_since_ >= plan_.hold_validation);
    if (!held) break;
    ++step_;
    held_since_.reset();
    if (live_gpus >= steps[step_].target_gpus) held_since_ = now;
  }
  return step_ >= 0 ? steps[step_].target_gpus : 0;
}

bool PolicyController::emergency_stop(const std::string& reason) {
  if (suspended_) return false;
  suspended_ = true;
  stop_reason_ = reason;
  pinned_.reset();
  return true;
}

void PolicyController::resume(int target, SimTime now) {
  if (target < 0) throw std::invalid_argument("resume target must be >= 0");
  plan_.steps = {RampStep{now, target}};
  step_ = -1;
  held_since_.reset();
  suspended_ = false;
  stop_reason_.clear();
  pinned_.reset();
}

}  // namespace cloudburst
