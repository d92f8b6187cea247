#include "cloudburst/budget.hpp"

#include <algorithm>
#include <cmath>

namespace cloudburst {

std::int64_t fraction_to_ppm(double fraction) { return std::llround(fraction * 1e6); }

void validate_thresholds(const std::vector<double>& thresholds) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double t = thresholds[i];
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("threshold outside (0,1)");
    if (i > 0 && !(thresholds[i - 1] > t)) throw std::invalid_argument("thresholds must be strictly descending");
  }
}

BudgetLedger::BudgetLedger(Money total_budget) : budget_(total_budget) {
  if (total_budget.micros() <= 0) throw std::invalid_argument("total budget must be > 0");
}

void BudgetLedger::record_spend(const SpendRecord& record) {
  if (record.amount.micros() < 0) throw std::invalid_argument("spend amount must be >= 0");
  auto it = latest_.find(record.provider);
  if (it != latest_.end() && record.at < it->second) {
    throw OrderingError("spend for provider " + record.provider + " at t=" + std::to_string(record.at) +
                        " precedes latest entry at t=" + std::to_string(it->second));
  }
  latest_[record.provider] = record.at;
  entries_.push_back(record);
  per_provider_[record.provider] += record.amount;
  spent_ += record.amount;
}

Money BudgetLedger::spent_by(const std::string& provider) const {
  auto it = per_provider_.find(provider);
  return it == per_provider_.end() ? Money{} : it->second;
}

double BudgetLedger::remaining_fraction() const {
  return static_cast<double>(budget_.micros() - spent_.micros()) / static_cast<double>(budget_.micros());
}

bool BudgetLedger::remaining_below(double threshold) const {
  const __int128 lhs = static_cast<__int128>(budget_.micros() - spent_.micros()) * 1000000;
  const __int128 rhs = static_cast<__int128>(fraction_to_ppm(threshold)) * budget_.micros();
  return lhs < rhs;
}

bool BudgetLedger::remaining_at_or_below(double fraction) const {
  const __int128 lhs = static_cast<__int128>(budget_.micros() - spent_.micros()) * 1000000;
  const __int128 rhs = static_cast<__int128>(fraction_to_ppm(fraction)) * budget_.micros();
  return lhs <= rhs;
}

BudgetAggregate BudgetLedger::aggregate() const {
  BudgetAggregate out;
  out.per_provider = per_provider_;
  out.total = spent_;
  out.budget = budget_;
  out.remaining_fraction = remaining_fraction();
  out.overspent = spent_ > budget_;
  return out;
}

std::vector<Alert> BudgetLedger::evaluate_thresholds(const std::vector<double>& thresholds, SimTime now,
                                                     Duration rate_window) {
  std::vector<Alert> fired;
  for (double t : thresholds) {
    if (fired_.contains(t) || !remaining_below(t)) continue;
    fired_.insert(t);
    fired.push_back(Alert{t, now, remaining_fraction(), spend_rate(rate_window, now)});
  }
  alerts_.insert(alerts_.end(), fired.begin(), fired.end());
  return fired;
}

double BudgetLedger::spend_rate(Duration window, SimTime now) const {
  if (window <= 0) throw std::invalid_argument("spend_rate window must be > 0");
  std::int64_t sum = 0;
  // Ordering is only guaranteed per provider, so scan everything.
  for (const SpendRecord& r : entries_) {
    if (r.at > now - window && r.at <= now) sum += r.amount.micros();
  }
  return static_cast<double>(sum) / 1e6 / (static_cast<double>(window) / static_cast<double>(kSecondsPerDay));
}

}  // namespace cloudburst
