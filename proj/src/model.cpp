#include "cloudburst/model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cloudburst {

Money Money::from_usd(double usd) {
  return Money::from_micros(static_cast<std::int64_t>(std::llround(usd * 1e6)));
}

std::string Money::to_string() const {
  const std::int64_t whole = micros_ / 1000000;
  std::int64_t frac = micros_ % 1000000;
  const bool negative = micros_ < 0;
  if (frac < 0) frac = -frac;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s%lld.%06lld", (negative && whole == 0) ? "-" : "",
                static_cast<long long>(whole), static_cast<long long>(frac));
  return buf;
}

std::string to_string(PilotId id) {
  return "p" + std::to_string(raw(id.instance)) + "." + std::to_string(id.generation);
}

double fp32_eflop_hours(double gpu_days, double tflops_per_gpu) {
  if (!(gpu_days >= 0.0)) throw std::domain_error("fp32_eflop_hours: gpu_days must be >= 0");
  if (!(tflops_per_gpu > 0.0)) throw std::domain_error("fp32_eflop_hours: tflops_per_gpu must be > 0");
  return gpu_days * 24.0 * tflops_per_gpu * 1e-6;
}

double blended_cost_per_gpu_day(double total_cost_usd, double gpu_days) {
  if (!(gpu_days > 0.0)) throw std::domain_error("blended_cost_per_gpu_day: gpu_days must be > 0");
  return total_cost_usd / gpu_days;
}

Money accrue_instance_cost(const SpotMarket& market, int gpus, Duration seconds) {
  if (seconds < 0) throw std::domain_error("accrue_instance_cost: seconds must be >= 0");
  if (gpus < 0) throw std::domain_error("accrue_instance_cost: gpus must be >= 0");
  // gpus * seconds * price / 86400, half-up. 128-bit keeps multi-year spans exact.
  const __int128 numerator = static_cast<__int128>(gpus) * seconds * market.price_per_gpu_day().micros();
  const __int128 rounded = (numerator * 2 + kSecondsPerDay) / (2 * kSecondsPerDay);
  return Money::from_micros(static_cast<std::int64_t>(rounded));
}

}  // namespace cloudburst
