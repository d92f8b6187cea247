#pragma once

// The OSG-style overlay: a Compute Element that admits jobs from authorised
// communities, pilots that bind provisioned instances to the job pool, FIFO
// matchmaking, and the NAT idle-timeout model for pilot connections.

#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cloudburst/types.hpp"

namespace cloudburst {

enum class PilotState { Starting, Idle, Busy, Dead };
enum class JobState { Queued, Running, Done, Failed };

std::string_view to_string(PilotState s);
std::string_view to_string(JobState s);

struct Pilot {
  PilotId id{};
  PilotState state{PilotState::Starting};
  Duration keepalive_interval{60};
  SimTime last_traffic_at{0};
  std::optional<JobId> current_job;
};

struct Job {
  JobId id{};
  std::string community;
  Duration required_gpu_seconds{0};
  Duration completed_gpu_seconds{0};
  JobState state{JobState::Queued};
  int preemption_count{0};
  SimTime submitted_at{0};
};

// FIFO ordered by enqueue time; jobs enqueued at the same instant are ordered
// by id so that same-instant re-queues are independent of processing order.
class JobQueue {
 public:
  void push(JobId id, SimTime enqueued_at);
  std::optional<JobId> pop_front();
  bool erase(JobId id);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<JobId> ids() const;

 private:
  std::set<std::pair<SimTime, std::uint32_t>> entries_;
  std::set<std::uint32_t> members_;
};

struct ComputeElement {
  std::string id{"ce"};
  std::set<std::string> accepted_communities;
  JobQueue queue;
  bool up{true};
};

// Raised when a job is submitted to a CE that is down; distinct from a
// policy rejection.
class SubmissionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Admission { Admitted, Rejected };

// Authorised jobs are queued; zero-length jobs complete on admission.
Admission ce_admit(ComputeElement& ce, Job& job, SimTime now);

// Pops head-of-queue jobs for the idle pilots, taken in ascending pilot id
// order. Callers apply the state change with start_job.
std::vector<std::pair<JobId, PilotId>> match_jobs(ComputeElement& ce, std::span<const PilotId> idle_pilots);

void start_job(Job& job, Pilot& pilot, SimTime now);

enum class Connection { Alive, Dropped };

// A keepalive refreshes the NAT mapping only if it fires strictly before the
// idle timeout. At equality the keepalive arrives too late.
constexpr bool keepalive_sustains(Duration keepalive_interval, Duration nat_idle_timeout) {
  return keepalive_interval < nat_idle_timeout;
}

// Dropped iff the connection has been idle for at least the NAT timeout.
Connection connection_drop_check(const Pilot& pilot, Duration nat_idle_timeout, SimTime now);

// When the keepalive cannot sustain the connection, the instant it will drop.
std::optional<SimTime> connection_deadline(const Pilot& pilot, Duration nat_idle_timeout);

// One heartbeat step: drops the pilot if the NAT timeout has been reached,
// otherwise sends a keepalive when one is due. Returns true if a keepalive
// was sent.
bool pilot_heartbeat_tick(Pilot& pilot, Duration nat_idle_timeout, SimTime now);

// Marks the pilot dead and returns the job it was running, if any.
std::optional<JobId> kill_pilot(Pilot& pilot);

// Preempted jobs restart from zero at the tail of the queue; never lost.
void handle_preemption(Job& job, JobQueue& queue, SimTime now);

}  // namespace cloudburst
