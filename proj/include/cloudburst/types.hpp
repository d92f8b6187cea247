#pragma once

// Core value types shared by every module: simulated time, money, identifiers.

#include <compare>
#include <cstdint>
#include <string>

namespace cloudburst {

// Simulated time is integer seconds since campaign start.
using SimTime = std::int64_t;
using Duration = std::int64_t;

inline constexpr Duration kSecondsPerDay = 86400;
inline constexpr Duration kSecondsPerHour = 3600;

// Money held as integer micro-USD so that ledger sums are exact.
class Money {
 public:
  constexpr Money() = default;
  static constexpr Money from_micros(std::int64_t micros) { return Money(micros); }
  static Money from_usd(double usd);

  constexpr std::int64_t micros() const { return micros_; }
  constexpr double usd() const { return static_cast<double>(micros_) / 1e6; }

  // Fixed six-decimal rendering, e.g. "58000.000000".
  std::string to_string() const;

  constexpr Money& operator+=(Money o) {
    micros_ += o.micros_;
    return *this;
  }
  constexpr Money& operator-=(Money o) {
    micros_ -= o.micros_;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return Money(a.micros_ + b.micros_); }
  friend constexpr Money operator-(Money a, Money b) { return Money(a.micros_ - b.micros_); }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  explicit constexpr Money(std::int64_t micros) : micros_(micros) {}
  std::int64_t micros_{0};
};

enum class InstanceId : std::uint32_t {};
enum class JobId : std::uint32_t {};

constexpr std::uint32_t raw(InstanceId id) { return static_cast<std::uint32_t>(id); }
constexpr std::uint32_t raw(JobId id) { return static_cast<std::uint32_t>(id); }

// A pilot is identified by the instance it runs on and a restart generation.
struct PilotId {
  InstanceId instance{};
  std::uint32_t generation{0};

  friend constexpr auto operator<=>(const PilotId&, const PilotId&) = default;
};

std::string to_string(PilotId id);

}  // namespace cloudburst
