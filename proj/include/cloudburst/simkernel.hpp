#pragma once

// Deterministic discrete-event engine. Events are totally ordered by
// (at, seq); seq comes from a monotone counter, so same-instant events are
// processed in scheduling order. After the last event of an instant the
// owner gets an end-of-instant callback, where batch phases (reconcile,
// matching, policy) run against the settled state of that instant.

#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cloudburst/types.hpp"

namespace cloudburst {

enum class EventKind {
  ReconcileRequested,
  Reconciled,
  InstanceProvisioned,
  InstanceRunning,
  InstancePreempted,
  InstanceDeprovisioned,
  PilotStarted,
  PilotKeepalive,
  PilotDead,
  JobSubmitted,
  JobAssigned,
  JobPreempted,
  JobCompleted,
  SpendAccrued,
  AlertFired,
  PolicyTick,
  OperatorCommand,
  CEOutageBegin,
  CEOutageEnd,
  DegradationBegin,
  DegradationEnd,
};

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

struct Event {
  SimTime at{0};
  std::uint64_t seq{0};
  EventKind kind{EventKind::PolicyTick};
  std::uint64_t subject{0};  // instance, job, pilot or record index, by kind
  std::uint64_t token{0};    // invalidation token for superseded events
};

class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A handler threw; the message names the offending event.
class KernelError : public std::runtime_error {
 public:
  KernelError(const Event& ev, const std::string& what);
  const Event& event() const { return event_; }

 private:
  Event event_;
};

class EventHandler {
 public:
  virtual ~EventHandler() = default;
  virtual void on_event(const Event& ev) = 0;
  virtual void end_of_instant(SimTime now) = 0;
};

struct RunSummary {
  std::uint64_t processed{0};
  SimTime clock{0};
};

class Kernel {
 public:
  SimTime now() const { return now_; }

  // Throws SchedulingError when `at` is in the past.
  std::uint64_t schedule(SimTime at, EventKind kind, std::uint64_t subject = 0, std::uint64_t token = 0);

  // Processes every event with at <= t in total order and leaves the clock at t.
  RunSummary run_until(SimTime t, EventHandler& handler);

  std::size_t pending() const { return queue_.size(); }
  std::uint64_t scheduled_total() const { return next_seq_; }
  std::uint64_t processed_total() const { return processed_; }
  std::optional<SimTime> next_event_time() const;

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  SimTime now_{0};
  std::uint64_t next_seq_{0};
  std::uint64_t processed_{0};
  bool instant_open_{false};
};

}  // namespace cloudburst
