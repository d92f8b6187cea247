#include "cloudburst/simkernel.hpp"

#include <array>
#include <utility>

namespace cloudburst {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 21> kKindNames{{
    {EventKind::ReconcileRequested, "ReconcileRequested"},
    {EventKind::Reconciled, "Reconciled"},
    {EventKind::InstanceProvisioned, "InstanceProvisioned"},
    {EventKind::InstanceRunning, "InstanceRunning"},
    {EventKind::InstancePreempted, "InstancePreempted"},
    {EventKind::InstanceDeprovisioned, "InstanceDeprovisioned"},
    {EventKind::PilotStarted, "PilotStarted"},
    {EventKind::PilotKeepalive, "PilotKeepalive"},
    {EventKind::PilotDead, "PilotDead"},
    {EventKind::JobSubmitted, "JobSubmitted"},
    {EventKind::JobAssigned, "JobAssigned"},
    {EventKind::JobPreempted, "JobPreempted"},
    {EventKind::JobCompleted, "JobCompleted"},
    {EventKind::SpendAccrued, "SpendAccrued"},
    {EventKind::AlertFired, "AlertFired"},
    {EventKind::PolicyTick, "PolicyTick"},
    {EventKind::OperatorCommand, "OperatorCommand"},
    {EventKind::CEOutageBegin, "CEOutageBegin"},
    {EventKind::CEOutageEnd, "CEOutageEnd"},
    {EventKind::DegradationBegin, "DegradationBegin"},
    {EventKind::DegradationEnd, "DegradationEnd"},
}};

}  // namespace

std::string_view to_string(EventKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "Unknown";
}

EventKind event_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kKindNames) {
    if (name == s) return kind;
  }
  throw std::invalid_argument("unknown event kind: " + std::string(s));
}

KernelError::KernelError(const Event& ev, const std::string& what)
    : std::runtime_error("handler failed on " + std::string(to_string(ev.kind)) + " at t=" +
                         std::to_string(ev.at) + " seq=" + std::to_string(ev.seq) +
                         " subject=" + std::to_string(ev.subject) + ": " + what),
      event_(ev) {}

std::uint64_t Kernel::schedule(SimTime at, EventKind kind, std::uint64_t subject, std::uint64_t token) {
  if (at < now_) {
    throw SchedulingError("cannot schedule " + std::string(to_string(kind)) + " at t=" + std::to_string(at) +
                          " before current time t=" + std::to_string(now_));
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push(Event{at, seq, kind, subject, token});
  return seq;
}

std::optional<SimTime> Kernel::next_event_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().at;
}

RunSummary Kernel::run_until(SimTime t, EventHandler& handler) {
  if (t < now_) throw SchedulingError("run_until into the past");
  RunSummary summary;
  for (;;) {
    while (!queue_.empty() && queue_.top().at <= t) {
      const Event ev = queue_.top();
      if (ev.at > now_ && instant_open_) {
        // The previous instant is complete; settle it before moving on.
        instant_open_ = false;
        handler.end_of_instant(now_);
        continue;
      }
      queue_.pop();
      now_ = ev.at;
      instant_open_ = true;
      try {
        handler.on_event(ev);
      } catch (const KernelError&) {
        throw;
      } catch (const std::exception& e) {
        throw KernelError(ev, e.what());
      }
      ++processed_;
      ++summary.processed;
    }
    if (!instant_open_) break;
    instant_open_ = false;
    handler.end_of_instant(now_);
    // Settling may only schedule strictly later events, but re-check anyway.
    if (queue_.empty() || queue_.top().at > t) break;
  }
  now_ = t;
  summary.clock = t;
  return summary;
}

}  // namespace cloudburst
