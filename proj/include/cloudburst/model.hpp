#pragma once

// Static domain model of cloud providers, regions, spot markets and instance
// types, plus the pricing and throughput arithmetic used by the simulator.

#include <string>
#include <vector>

#include "cloudburst/types.hpp"

namespace cloudburst {

struct InstanceType {
  std::string id;
  int gpus_per_instance{1};
  std::string gpu_model{"NVIDIA T4"};
  double fp32_tflops_per_gpu{8.1};
};

struct SpotMarket {
  std::string instance_type;
  double spot_price_per_gpu_day{0.0};  // USD
  int capacity{0};                     // max simultaneously provisioned instances
  double preemption_rate{0.0};         // expected preemptions per instance per day

  // Price in integer micro-USD per GPU-day; all cost accrual goes through this.
  Money price_per_gpu_day() const { return Money::from_usd(spot_price_per_gpu_day); }
};

struct Region {
  std::string id;
  std::string provider;
  Duration nat_idle_timeout{240};
  std::vector<SpotMarket> markets;
};

struct Provider {
  std::string id;
  std::string name;
  std::vector<std::string> regions;
};

// gpu_days x 24 x TFLOPS x 1e-6; TFLOPS-hours expressed as EFLOP-hours.
// Throws std::domain_error on negative gpu_days or non-positive tflops.
double fp32_eflop_hours(double gpu_days, double tflops_per_gpu);

// Throws std::domain_error when gpu_days is not positive.
double blended_cost_per_gpu_day(double total_cost_usd, double gpu_days);

// Per-second proration of the per-day spot price, rounded half-up to the
// nearest micro-USD. Throws std::domain_error on negative seconds or gpus.
Money accrue_instance_cost(const SpotMarket& market, int gpus, Duration seconds);

}  // namespace cloudburst
