#pragma once

// Multi-provider spend ledger: ingestion, exact aggregation, one-shot
// remaining-budget threshold alerts and trailing-window spend rate.

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cloudburst/types.hpp"

namespace cloudburst {

struct SpendRecord {
  std::string provider;
  Money amount;
  SimTime at{0};
  std::string source;  // scale group id
};

struct Alert {
  double threshold{0.0};
  SimTime at{0};
  double remaining_fraction{0.0};
  double spend_rate{0.0};  // USD/day over the ledger's rate window
};

struct BudgetAggregate {
  std::map<std::string, Money> per_provider;
  Money total;
  Money budget;
  double remaining_fraction{1.0};
  bool overspent{false};
};

class OrderingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class BudgetLedger {
 public:
  // Throws std::invalid_argument unless total_budget > 0.
  explicit BudgetLedger(Money total_budget);

  // Throws OrderingError when `record.at` precedes the provider's latest entry
  // and std::invalid_argument on a negative amount.
  void record_spend(const SpendRecord& record);

  BudgetAggregate aggregate() const;

  Money total_budget() const { return budget_; }
  Money total_spent() const { return spent_; }
  Money spent_by(const std::string& provider) const;
  double remaining_fraction() const;

  // True iff remaining fraction < threshold, evaluated exactly on integers.
  bool remaining_below(double threshold) const;
  // True iff remaining fraction <= fraction, evaluated exactly on integers.
  bool remaining_at_or_below(double fraction) const;

  // Fires one alert per newly crossed threshold. `thresholds` must be
  // strictly descending in (0, 1).
  std::vector<Alert> evaluate_thresholds(const std::vector<double>& thresholds, SimTime now, Duration rate_window);

  // USD/day over the window (now - window, now].
  double spend_rate(Duration window, SimTime now) const;

  const std::vector<SpendRecord>& entries() const { return entries_; }
  const std::vector<Alert>& alerts() const { return alerts_; }
  const std::set<double>& fired_thresholds() const { return fired_; }

 private:
  Money budget_;
  Money spent_;
  std::vector<SpendRecord> entries_;
  std::map<std::string, Money> per_provider_;
  std::map<std::string, SimTime> latest_;
  std::set<double> fired_;
  std::vector<Alert> alerts_;
};

// Threshold and guard fractions are handled in parts-per-million so that the
// comparisons against integer spend are exact.
std::int64_t fraction_to_ppm(double fraction);

void validate_thresholds(const std::vector<double>& thresholds);

}  // namespace cloudburst
