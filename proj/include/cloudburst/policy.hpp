#pragma once

// Campaign controller: staged ramp-up, price/preemption-ranked allocation of
// a global GPU target, budget guards and the emergency stop.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cloudburst/budget.hpp"
#include "cloudburst/model.hpp"
#include "cloudburst/types.hpp"

namespace cloudburst {

struct RampStep {
  SimTime activate_at{0};
  int target_gpus{0};
};

struct RampPlan {
  std::vector<RampStep> steps;
  Duration hold_validation{0};

  // Throws std::invalid_argument unless activation times strictly increase
  // and targets are non-negative.
  void validate() const;
};

// Target of the latest step with activate_at <= now; 0 before the first step.
int ramp_step(const RampPlan& plan, SimTime now);

enum class AllocationMode { CheapestFirst, Weighted };

struct AllocationPolicy {
  AllocationMode mode{AllocationMode::Weighted};
  double preemption_penalty{0.0};  // USD per (preemption/day)
  std::optional<int> per_region_cap;  // GPUs
};

struct MarketOffer {
  std::string region;
  SpotMarket market;
  int gpus_per_instance{1};
  double observed_preemption_rate{0.0};
};

double effective_price(const MarketOffer& offer, const AllocationPolicy& policy);

// Desired instance count per offer (same order as `offers`). Offers are
// filled greedily by ascending effective price, ties by position.
std::vector<int> allocate(int target_gpus, std::span<const MarketOffer> offers, const AllocationPolicy& policy);

struct BudgetGuard {
  double fraction{0.0};
  int max_gpus{0};
};

void validate_guards(const std::vector<BudgetGuard>& guards);

// Cap from the tightest guard whose fraction >= remaining fraction.
std::optional<int> budget_guard(double remaining_fraction, std::span<const BudgetGuard> guards);
// Same rule, evaluated exactly against the ledger's integer spend.
std::optional<int> budget_guard(const BudgetLedger& ledger, std::span<const BudgetGuard> guards);

// Exponentially-weighted estimate of the observed preemption rate.
class PreemptionEstimator {
 public:
  explicit PreemptionEstimator(Duration half_life = 6 * kSecondsPerHour) : half_life_(half_life) {}

  void observe(int preemptions, double instance_days, Duration dt);
  double rate() const { return rate_; }

 private:
  Duration half_life_;
  double rate_{0.0};
};

struct PolicyState {
  int ramp_target{0};
  std::optional<int> pinned_target;
  std::optional<int> guard_cap;
  int effective_target{0};
  bool suspended{false};
  std::string stop_reason;
};

// Tracks ramp progress, operator pins and stop/resume. Budget guard and
// capacity caps are applied by the caller on top of planned_target().
class PolicyController {
 public:
  explicit PolicyController(RampPlan plan);

  // Advances through ramp steps honouring hold_validation, given the GPUs
  // live at this tick.
  int planned_target(SimTime now, int live_gpus);

  // Returns false when already stopped.
  bool emergency_stop(const std::string& reason);
  // Replaces the plan with a single step at `target` from `now`.
  void resume(int target, SimTime now);

  void pin_target(int gpus) { pinned_ = gpus; }
  void release_target() { pinned_.reset(); }

  bool suspended() const { return suspended_; }
  const std::string& stop_reason() const { return stop_reason_; }
  const std::optional<int>& pinned() const { return pinned_; }
  const RampPlan& plan() const { return plan_; }

 private:
  RampPlan plan_;
  int step_{-1};
  std::optional<SimTime> held_since_;
  bool suspended_{false};
  std::string stop_reason_;
  std::optional<int> pinned_;
};

}  // namespace cloudburst
