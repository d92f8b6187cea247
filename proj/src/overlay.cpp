#include "cloudburst/overlay.hpp"

#include <algorithm>

namespace cloudburst {

std::string_view to_string(PilotState s) {
  switch (s) {
    case PilotState::Starting: return "Starting";
    case PilotState::Idle: return "Idle";
    case PilotState::Busy: return "Busy";
    case PilotState::Dead: return "Dead";
  }
  return "?";
}

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "Queued";
    case JobState::Running: return "Running";
    case JobState::Done: return "Done";
    case JobState::Failed: return "Failed";
  }
  return "?";
}

void JobQueue::push(JobId id, SimTime enqueued_at) {
  if (!members_.insert(raw(id)).second) throw std::logic_error("job already queued");
  entries_.emplace(enqueued_at, raw(id));
}

std::optional<JobId> JobQueue::pop_front() {
  if (entries_.empty()) return std::nullopt;
  const auto id = entries_.begin()->second;
  entries_.erase(entries_.begin());
  members_.erase(id);
  return JobId{id};
}

bool JobQueue::erase(JobId id) {
  if (members_.erase(raw(id)) == 0) return false;
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->second == raw(id)) {
      entries_.erase(it);
      break;
    }
  }
  return true;
}

std::vector<JobId> JobQueue::ids() const {
  std::vector<JobId> out;
  out.reserve(entries_.size());
  for (const auto& [at, id] : entries_) out.push_back(JobId{id});
  return out;
}

Admission ce_admit(ComputeElement& ce, Job& job, SimTime now) {
  if (!ce.up) throw SubmissionError("compute element " + ce.id + " is down");
  if (!ce.accepted_communities.contains(job.community)) return Admission::Rejected;
  if (job.required_gpu_seconds <= 0) {
    job.state = JobState::Done;
    job.completed_gpu_seconds = 0;
    return Admission::Admitted;
  }
  job.state = JobState::Queued;
  ce.queue.push(job.id, now);
  return Admission::Admitted;
}

std::vector<std::pair<JobId, PilotId>> match_jobs(ComputeElement& ce, std::span<const PilotId> idle_pilots) {
  std::vector<PilotId> pilots(idle_pilots.begin(), idle_pilots.end());
  std::sort(pilots.begin(), pilots.end());
  std::vector<std::pair<JobId, PilotId>> out;
  for (const PilotId& p : pilots) {
    auto job = ce.queue.pop_front();
    if (!job) break;
    out.emplace_back(*job, p);
  }
  return out;
}

void start_job(Job& job, Pilot& pilot, SimTime now) {
  if (job.state != JobState::Queued) throw std::logic_error("start_job: job not queued");
  if (pilot.state != PilotState::Idle) throw std::logic_error("start_job: pilot not idle");
  job.state = JobState::Running;
  pilot.state = PilotState::Busy;
  pilot.current_job = job.id;
  pilot.last_traffic_at = now;
}

Connection connection_drop_check(const Pilot& pilot, Duration nat_idle_timeout, SimTime now) {
  if (pilot.state == PilotState::Dead) throw std::logic_error("connection_drop_check on dead pilot");
  return now - pilot.last_traffic_at >= nat_idle_timeout ? Connection::Dropped : Connection::Alive;
}

std::optional<SimTime> connection_deadline(const Pilot& pilot, Duration nat_idle_timeout) {
  if (keepalive_sustains(pilot.keepalive_interval, nat_idle_timeout)) return std::nullopt;
  return pilot.last_traffic_at + nat_idle_timeout;
}

bool pilot_heartbeat_tick(Pilot& pilot, Duration nat_idle_timeout, SimTime now) {
  if (pilot.state == PilotState::Dead) return false;
  if (connection_drop_check(pilot, nat_idle_timeout, now) == Connection::Dropped) {
    kill_pilot(pilot);
    return false;
  }
  if (now - pilot.last_traffic_at >= pilot.keepalive_interval) {
    pilot.last_traffic_at = now;
    return true;
  }
  return false;
}

std::optional<JobId> kill_pilot(Pilot& pilot) {
  pilot.state = PilotState::Dead;
  auto job = pilot.current_job;
  pilot.current_job.reset();
  return job;
}

void handle_preemption(Job& job, JobQueue& queue, SimTime now) {
  if (job.state != JobState::Running) throw std::logic_error("handle_preemption: job not running");
  job.state = JobState::Queued;
  job.completed_gpu_seconds = 0;
  ++job.preemption_count;
  queue.push(job.id, now);
}

}  // namespace cloudburst
