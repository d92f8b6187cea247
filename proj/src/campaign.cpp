#include "cloudburst/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cloudburst {

using nlohmann::ordered_json;

namespace {

ordered_json nullable(const std::optional<int>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

Campaign::Campaign(Scenario scenario, std::ostream* log_sink)
    : scenario_(std::move(scenario)),
      log_(log_sink),
      ledger_(scenario_.budget_total),
      policy_(scenario_.ramp) {
  if (!scenario_.seed) throw std::invalid_argument("scenario has no seed");
  const std::uint64_t seed = *scenario_.seed;

  ce_.accepted_communities = scenario_.accepted_communities;
  for (const Region& r : scenario_.regions) {
    for (const SpotMarket& m : r.markets) {
      ScaleGroup g;
      g.id = r.id + ":" + m.instance_type;
      g.region = r.id;
      g.provider = r.provider;
      g.market = m;
      g.gpus_per_instance = scenario_.instance_type(m.instance_type).gpus_per_instance;
      group_index_[g.id] = groups_.size();
      groups_.push_back(GroupRecord{g, r.nat_idle_timeout, {}, 0, 0, std::nullopt, 0,
                                    PreemptionEstimator(scenario_.ewma_half_life),
                                    RandomStream(seed, "provision/" + g.id)});
    }
  }

  RandomStream workload(seed, "workload");
  for (const JobBatch& b : scenario_.workload) {
    for (int i = 0; i < b.count; ++i) {
      JobRecord jr;
      jr.job.id = JobId{static_cast<std::uint32_t>(jobs_.size())};
      jr.job.community = b.community;
      jr.job.required_gpu_seconds = workload.uniform_int(b.min_gpu_seconds, b.max_gpu_seconds);
      jr.job.submitted_at = b.start + static_cast<SimTime>(i) * b.interval;
      jobs_.push_back(std::move(jr));
    }
  }

  log_.write_header(scenario_.to_json());
  if (scenario_.horizon > 0) schedule_load_events();
}

void Campaign::schedule_load_events() {
  for (const OutageWindow& w : merge_outages(scenario_.ce_outages)) {
    kernel_.schedule(w.begin, EventKind::CEOutageBegin);
    kernel_.schedule(w.end, EventKind::CEOutageEnd);
  }
  for (std::size_t i = 0; i < scenario_.degradations.size(); ++i) {
    kernel_.schedule(scenario_.degradations[i].begin, EventKind::DegradationBegin, i);
    kernel_.schedule(scenario_.degradations[i].end, EventKind::DegradationEnd, i);
  }
  for (const JobRecord& jr : jobs_) kernel_.schedule(jr.job.submitted_at, EventKind::JobSubmitted, raw(jr.job.id));
  for (const OperatorCommand& c : scenario_.operator_commands) {
    kernel_.schedule(c.at, EventKind::OperatorCommand, commands_.size());
    commands_.push_back(c);
    outcomes_.emplace_back();
  }
  kernel_.schedule(0, EventKind::PolicyTick);
}

void Campaign::run_until(SimTime t) {
  if (finished_) return;
  t = std::max<SimTime>(0, std::min(t, scenario_.horizon));
  if (t < kernel_.now()) return;
  kernel_.run_until(t, *this);
  if (t >= scenario_.horizon) {
    finished_ = true;
    close_log();
  }
}

void Campaign::close_log() {
  if (log_closed_) return;
  log_closed_ = true;
  log_.write_trailer(kernel_.now());
}

std::size_t Campaign::submit_command(OperatorCommand cmd) {
  if (finished_) throw std::logic_error("campaign has finished");
  cmd.at = std::max(cmd.at, kernel_.now() + 1);
  if (cmd.at > scenario_.horizon) throw std::logic_error("command falls after the horizon");
  const std::size_t handle = commands_.size();
  kernel_.schedule(cmd.at, EventKind::OperatorCommand, handle);
  commands_.push_back(std::move(cmd));
  outcomes_.emplace_back();
  return handle;
}

const std::optional<CommandOutcome>& Campaign::command_outcome(std::size_t handle) const {
  return outcomes_.at(handle);
}

void Campaign::inject_outage(SimTime begin, SimTime end) {
  if (begin >= end) throw std::invalid_argument("outage must end after it begins");
  kernel_.schedule(begin, EventKind::CEOutageBegin);
  kernel_.schedule(end, EventKind::CEOutageEnd);
}

// ---------------------------------------------------------------------------
// event dispatch

void Campaign::on_event(const Event& ev) {
  switch (ev.kind) {
    case EventKind::PolicyTick: tick_pending_ = true; break;
    case EventKind::JobSubmitted: on_job_submitted(jobs_.at(ev.subject), ev.at); break;
    case EventKind::InstanceRunning: on_instance_running(instances_.at(ev.subject), ev.at); break;
    case EventKind::InstanceDeprovisioned: on_instance_deprovisioned(instances_.at(ev.subject), ev.at); break;
    case EventKind::PilotStarted: on_pilot_restart(instances_.at(ev.subject), ev.token, ev.at); break;
    case EventKind::PilotDead: on_pilot_drop(instances_.at(ev.subject), ev.token, ev.at); break;
    case EventKind::PilotKeepalive: on_keepalive(instances_.at(ev.subject), ev.token, ev.at); break;
    case EventKind::JobCompleted: on_job_completed(jobs_.at(ev.subject), ev.token, ev.at); break;
    case EventKind::OperatorCommand: on_operator_command(ev.subject, ev.at); break;
    case EventKind::CEOutageBegin:
      if (++outage_depth_ == 1) on_outage_begin(ev.at);
      break;
    case EventKind::CEOutageEnd:
      if (--outage_depth_ == 0) on_outage_end(ev.at);
      break;
    case EventKind::DegradationBegin:
    case EventKind::DegradationEnd:
      log_.append(ev.at, ev.kind, {{"index", ev.subject}, {"factor", scenario_.degradations.at(ev.subject).factor}});
      break;
    default:
      throw std::logic_error("unexpected event kind " + std::string(to_string(ev.kind)));
  }
}

void Campaign::on_job_submitted(JobRecord& jr, SimTime now) {
  std::string outcome;
  try {
    if (ce_admit(ce_, jr.job, now) == Admission::Admitted) {
      jr.intake = JobRecord::Intake::Admitted;
      outcome = "admitted";
    } else {
      jr.intake = JobRecord::Intake::Rejected;
      outcome = "rejected";
    }
  } catch (const SubmissionError&) {
    jr.intake = JobRecord::Intake::SubmissionError;
    outcome = "ce_down";
  }
  log_.append(now, EventKind::JobSubmitted,
              {{"job", raw(jr.job.id)},
               {"community", jr.job.community},
               {"gpu_seconds", jr.job.required_gpu_seconds},
               {"outcome", outcome}});
  if (jr.intake == JobRecord::Intake::Admitted && jr.job.state == JobState::Done) {
    log_.append(now, EventKind::JobCompleted, {{"job", raw(jr.job.id)}, {"pilot", nullptr}, {"gpu_seconds", 0}});
  }
}

void Campaign::on_instance_running(InstanceRecord& ir, SimTime now) {
  if (ir.inst.state != InstanceState::Provisioning || ir.inst.terminate_at) return;
  ir.inst.transition(InstanceState::Running, now);
  log_.append(now, EventKind::InstanceRunning,
              {{"instance", raw(ir.inst.id)}, {"group", groups_[ir.inst.group].group.id}});
  start_pilot(ir, now);
}

void Campaign::on_instance_deprovisioned(InstanceRecord& ir, SimTime now) {
  if (!ir.inst.live()) return;
  kill_pilot_on(ir, now, "deprovision");
  end_instance(ir, InstanceState::Deprovisioned, now);
}

void Campaign::on_pilot_restart(InstanceRecord& ir, std::uint64_t generation, SimTime now) {
  if (ir.inst.state != InstanceState::Running || ir.inst.terminate_at) return;
  if (generation != ir.next_generation) return;
  if (ir.pilot && ir.pilot->state != PilotState::Dead) return;
  start_pilot(ir, now);
}

void Campaign::on_pilot_drop(InstanceRecord& ir, std::uint64_t token, SimTime now) {
  if (token != ir.drop_token || !ir.inst.live() || !registered(ir)) return;
  // A de-provision completing at this instant takes precedence.
  if (ir.inst.terminate_at && *ir.inst.terminate_at == now) return;
  kill_pilot_on(ir, now, "nat_timeout");
  ++pilot_drops_;
  if (ir.inst.state == InstanceState::Running && !ir.inst.terminate_at) {
    kernel_.schedule(now + scenario_.pilot_restart_delay, EventKind::PilotStarted, raw(ir.inst.id),
                     ir.next_generation);
  }
}

void Campaign::on_keepalive(InstanceRecord& ir, std::uint64_t token, SimTime now) {
  if (token != ir.keepalive_token || !ir.inst.live() || !registered(ir)) return;
  const Pilot& p = *ir.pilot;
  if (!keepalive_sustains(p.keepalive_interval, nat_of(ir))) return;
  if (!ir.silent) {
    ir.pilot->last_traffic_at = now;
    log_.append(now, EventKind::PilotKeepalive, {{"pilot", to_string(p.id)}});
  }
  schedule_keepalive(ir, now);
}

void Campaign::on_job_completed(JobRecord& jr, std::uint64_t token, SimTime now) {
  if (token != jr.run_token || jr.job.state != JobState::Running) return;
  try_complete(jr, now);
}

bool Campaign::try_complete(JobRecord& jr, SimTime now) {
  if (!ce_.up) return false;
  InstanceRecord& ir = instances_.at(raw(*jr.instance));
  if (ir.inst.terminate_at && *ir.inst.terminate_at == now) return false;
  if (now - effective_last_traffic(ir, now) >= nat_of(ir)) return false;

  Pilot& p = *ir.pilot;
  jr.job.state = JobState::Done;
  jr.job.completed_gpu_seconds = jr.job.required_gpu_seconds;
  ++jr.run_token;
  jr.instance.reset();
  --running_jobs_;
  p.state = PilotState::Idle;
  p.current_job.reset();
  log_.append(now, EventKind::JobCompleted,
              {{"job", raw(jr.job.id)}, {"pilot", to_string(p.id)}, {"gpu_seconds", jr.job.required_gpu_seconds}});
  touch(ir, now);
  set_idle(ir, true);
  return true;
}

void Campaign::on_operator_command(std::size_t index, SimTime now) {
  const OperatorCommand& c = commands_.at(index);
  CommandOutcome out;
  auto reject = [&](std::string msg) {
    out.applied = false;
    out.error = std::move(msg);
  };
  if (policy_.suspended() && c.type != CommandType::Resume) {
    reject(c.type == CommandType::EmergencyStop ? "already stopped" : "campaign is stopped");
  } else {
    out.applied = true;
    switch (c.type) {
      case CommandType::EmergencyStop:
        policy_.emergency_stop(c.reason);
        for (GroupRecord& g : groups_) {
          g.pinned.reset();
          request_desired(g, 0, now, "emergency_stop");
        }
        eval_requested_ = true;
        break;
      case CommandType::Resume:
        if (!policy_.suspended()) {
          reject("campaign is not stopped");
        } else {
          policy_.resume(c.value, now);
          eval_requested_ = true;
        }
        break;
      case CommandType::SetTarget:
        policy_.pin_target(c.value);
        eval_requested_ = true;
        break;
      case CommandType::ReleaseTarget:
        policy_.release_target();
        eval_requested_ = true;
        break;
      case CommandType::SetGroupDesired:
      case CommandType::ReleaseGroup: {
        auto it = group_index_.find(c.group);
        if (it == group_index_.end()) {
          reject("unknown group");
          break;
        }
        GroupRecord& g = groups_[it->second];
        if (c.type == CommandType::SetGroupDesired) {
          g.pinned = c.value;
          request_desired(g, c.value, now, "operator");
        } else {
          g.pinned.reset();
        }
        eval_requested_ = true;
        break;
      }
    }
  }
  ordered_json fields = c.to_json();
  fields.erase("at_s");
  fields["accepted"] = out.applied;
  if (!out.applied) fields["error"] = out.error;
  log_.append(now, EventKind::OperatorCommand, std::move(fields));
  outcomes_[index] = std::move(out);
}

void Campaign::on_outage_begin(SimTime now) {
  ce_.up = false;
  log_.append(now, EventKind::CEOutageBegin, {{"ce", ce_.id}});
  for (InstanceRecord& ir : instances_) {
    if (!ir.inst.live() || !registered(ir)) continue;
    const Pilot& p = *ir.pilot;
    const Duration ki = p.keepalive_interval;
    ir.silent = true;
    if (keepalive_sustains(ki, nat_of(ir))) {
      // Keepalives at or after `now` cannot reach the CE.
      const SimTime a = p.last_traffic_at;
      ir.frozen_last = a >= now ? a : a + ((now - 1 - a) / ki) * ki;
      reschedule_drop(ir);
    } else {
      ir.frozen_last = p.last_traffic_at;
    }
  }
}

void Campaign::on_outage_end(SimTime now) {
  ce_.up = true;
  log_.append(now, EventKind::CEOutageEnd, {{"ce", ce_.id}});
  std::vector<InstanceRecord*> live;
  for (InstanceRecord& ir : instances_) {
    if (ir.inst.live()) live.push_back(&ir);
  }
  for (InstanceRecord* ir : live) {
    if (!ir->silent || !registered(*ir)) continue;
    const Duration nat = nat_of(*ir);
    if (now - ir->frozen_last >= nat) continue;  // the pending drop fires
    ir->silent = false;
    Pilot& p = *ir->pilot;
    if (keepalive_sustains(p.keepalive_interval, nat)) {
      ++ir->drop_token;
      if (now - ir->frozen_last >= p.keepalive_interval) {
        p.last_traffic_at = now;
        if (scenario_.log_keepalives) {
          log_.append(now, EventKind::PilotKeepalive, {{"pilot", to_string(p.id)}});
          schedule_keepalive(*ir, now);
        }
      }
    }
  }
  for (InstanceRecord* ir : live) {
    if (!ir->pilot || ir->pilot->state != PilotState::Busy) continue;
    JobRecord& jr = jobs_.at(raw(*ir->pilot->current_job));
    if (jr.finish_at <= now) try_complete(jr, now);
  }
  for (InstanceRecord* ir : live) {
    if (ir->awaiting_ce) register_pilot(*ir, now);
  }
}

// ---------------------------------------------------------------------------
// pilots

bool Campaign::registered(const InstanceRecord& ir) const {
  return ir.pilot && (ir.pilot->state == PilotState::Idle || ir.pilot->state == PilotState::Busy);
}

void Campaign::start_pilot(InstanceRecord& ir, SimTime now) {
  Pilot p;
  p.id = PilotId{ir.inst.id, ir.next_generation++};
  p.state = PilotState::Starting;
  p.keepalive_interval = scenario_.keepalive_interval;
  p.last_traffic_at = now;
  ir.pilot = p;
  ir.silent = false;
  if (ce_.up) {
    register_pilot(ir, now);
  } else {
    ir.awaiting_ce = true;
  }
}

void Campaign::register_pilot(InstanceRecord& ir, SimTime now) {
  ir.awaiting_ce = false;
  ir.pilot->state = PilotState::Idle;
  log_.append(now, EventKind::PilotStarted, {{"pilot", to_string(ir.pilot->id)}, {"instance", raw(ir.inst.id)}});
  touch(ir, now);
  set_idle(ir, true);
}

void Campaign::touch(InstanceRecord& ir, SimTime now) {
  ir.pilot->last_traffic_at = now;
  if (!keepalive_sustains(ir.pilot->keepalive_interval, nat_of(ir))) {
    reschedule_drop(ir);
  } else if (scenario_.log_keepalives) {
    schedule_keepalive(ir, now);
  }
}

void Campaign::reschedule_drop(InstanceRecord& ir) {
  ++ir.drop_token;
  const Duration nat = nat_of(ir);
  std::optional<SimTime> deadline;
  if (ir.silent) {
    deadline = ir.frozen_last + nat;
  } else {
    deadline = connection_deadline(*ir.pilot, nat);
  }
  if (deadline) kernel_.schedule(*deadline, EventKind::PilotDead, raw(ir.inst.id), ir.drop_token);
}

void Campaign::schedule_keepalive(InstanceRecord& ir, SimTime from) {
  ++ir.keepalive_token;
  kernel_.schedule(from + ir.pilot->keepalive_interval, EventKind::PilotKeepalive, raw(ir.inst.id),
                   ir.keepalive_token);
}

SimTime Campaign::effective_last_traffic(const InstanceRecord& ir, SimTime now) const {
  if (ir.silent) return ir.frozen_last;
  const Pilot& p = *ir.pilot;
  const SimTime a = p.last_traffic_at;
  if (!keepalive_sustains(p.keepalive_interval, nat_of(ir)) || now <= a) return a;
  return a + ((now - a) / p.keepalive_interval) * p.keepalive_interval;
}

void Campaign::set_idle(InstanceRecord& ir, bool idle) {
  if (!ir.pilot) return;
  if (idle && !ir.inst.terminate_at && ir.pilot->state == PilotState::Idle) {
    idle_.insert(ir.pilot->id);
  } else {
    idle_.erase(ir.pilot->id);
  }
}

void Campaign::kill_pilot_on(InstanceRecord& ir, SimTime now, const char* reason) {
  ir.awaiting_ce = false;
  ir.silent = false;
  ++ir.drop_token;
  ++ir.keepalive_token;
  if (!ir.pilot || ir.pilot->state == PilotState::Dead) return;
  const bool was_registered = registered(ir);
  set_idle(ir, false);
  const auto job = kill_pilot(*ir.pilot);
  if (!was_registered) return;
  log_.append(now, EventKind::PilotDead,
              {{"pilot", to_string(ir.pilot->id)}, {"instance", raw(ir.inst.id)}, {"reason", reason}});
  if (job) {
    JobRecord& jr = jobs_.at(raw(*job));
    handle_preemption(jr.job, ce_.queue, now);
    ++jr.run_token;
    jr.instance.reset();
    --running_jobs_;
    log_.append(now, EventKind::JobPreempted,
                {{"job", raw(*job)},
                 {"pilot", to_string(ir.pilot->id)},
                 {"reason", reason},
                 {"count", jr.job.preemption_count}});
  }
}

// ---------------------------------------------------------------------------
// instances and money

Money Campaign::bill(InstanceRecord& ir, SimTime now) {
  const GroupRecord& g = groups_[ir.inst.group];
  const Money total = accrue_instance_cost(g.group.market, ir.inst.gpus, now - ir.inst.started_at);
  const Money delta = total - ir.billed;
  ir.billed = total;
  return delta;
}

void Campaign::record_spend(const GroupRecord& g, Money amount, SimTime now) {
  ledger_.record_spend(SpendRecord{g.group.provider, amount, now, g.group.id});
}

void Campaign::end_instance(InstanceRecord& ir, InstanceState to, SimTime now) {
  GroupRecord& g = groups_[ir.inst.group];
  const Money charge = bill(ir, now);
  const bool was_active = ir.inst.active();
  ir.inst.transition(to, now);
  g.live.erase(raw(ir.inst.id));
  if (was_active) --g.active;
  dirty_.insert(ir.inst.group);
  record_spend(g, charge, now);
  log_.append(now, to == InstanceState::Preempted ? EventKind::InstancePreempted : EventKind::InstanceDeprovisioned,
              {{"instance", raw(ir.inst.id)},
               {"group", g.group.id},
               {"provider", g.group.provider},
               {"charge_micros", charge.micros()}});
}

void Campaign::request_desired(GroupRecord& g, int n, SimTime now, const char* source) {
  if (!set_desired(g.group, n)) return;
  log_.append(now, EventKind::ReconcileRequested, {{"group", g.group.id}, {"desired", n}, {"source", source}});
  dirty_.insert(static_cast<std::size_t>(&g - groups_.data()));
}

double Campaign::degradation_factor(SimTime now) const {
  double f = 1.0;
  bool any = false;
  for (const Degradation& d : scenario_.degradations) {
    if (d.begin <= now && now < d.end) {
      f = any ? std::max(f, d.factor) : d.factor;
      any = true;
    }
  }
  return f;
}

int Campaign::live_gpus() const {
  int n = 0;
  for (const GroupRecord& g : groups_) n += g.active * g.group.gpus_per_instance;
  return n;
}

// ---------------------------------------------------------------------------
// end-of-instant settle

void Campaign::end_of_instant(SimTime now) {
  if (tick_pending_) {
    if (now % scenario_.accrual_interval == 0 || now == scenario_.horizon) accrue(now);
    sample_preemptions_at(now);
  }
  evaluate_alerts(now);
  if (tick_pending_ || eval_requested_) evaluate_policy(now);
  reconcile_dirty(now);
  match(now);
  if (tick_pending_) {
    sample_timeline(now);
    last_tick_ = now;
    if (now < scenario_.horizon) {
      kernel_.schedule(std::min(now + scenario_.control_tick, scenario_.horizon), EventKind::PolicyTick);
    }
  }
  tick_pending_ = false;
  eval_requested_ = false;
}

void Campaign::accrue(SimTime now) {
  for (GroupRecord& g : groups_) {
    if (g.live.empty()) continue;
    Money sum;
    for (std::uint32_t id : g.live) sum += bill(instances_[id], now);
    record_spend(g, sum, now);
    log_.append(now, EventKind::SpendAccrued,
                {{"group", g.group.id},
                 {"provider", g.group.provider},
                 {"amount_micros", sum.micros()},
                 {"instances", g.live.size()}});
  }
}

void Campaign::sample_preemptions_at(SimTime now) {
  const Duration dt = now - last_tick_;
  if (dt <= 0) return;
  for (GroupRecord& g : groups_) {
    const double rate = g.group.market.preemption_rate;
    double exposure_days = 0.0;
    std::vector<std::uint32_t> victims;
    for (std::uint32_t id : g.live) {
      const Instance& inst = instances_[id].inst;
      if (inst.state != InstanceState::Running) continue;
      const Duration exposure = now - std::max(last_tick_, *inst.running_at);
      exposure_days += static_cast<double>(exposure) / kSecondsPerDay;
      if (rate <= 0.0) continue;
      if (g.rng.uniform() < preemption_probability(rate, exposure)) victims.push_back(id);
    }
    for (std::uint32_t id : victims) {
      InstanceRecord& ir = instances_[id];
      kill_pilot_on(ir, now, "preemption");
      end_instance(ir, InstanceState::Preempted, now);
      ++g.preemptions;
      ++hour_preemptions_;
    }
    g.estimator.observe(static_cast<int>(victims.size()), exposure_days, dt);
  }
}

void Campaign::evaluate_alerts(SimTime now) {
  for (const Alert& a : ledger_.evaluate_thresholds(scenario_.thresholds, now, scenario_.spend_rate_window)) {
    log_.append(now, EventKind::AlertFired,
                {{"threshold", a.threshold},
                 {"remaining_fraction", a.remaining_fraction},
                 {"spend_rate_usd_per_day", a.spend_rate}});
  }
}

void Campaign::evaluate_policy(SimTime now) {
  const int live = live_gpus();
  const int planned = policy_.planned_target(now, live);
  const std::optional<int> cap = budget_guard(ledger_, scenario_.guards);
  int capacity = 0;
  for (const GroupRecord& g : groups_) capacity += g.group.market.capacity * g.group.gpus_per_instance;
  int effective = std::min(planned, capacity);
  if (cap) effective = std::min(effective, *cap);
  effective = std::max(effective, 0);

  int pinned_gpus = 0;
  std::vector<MarketOffer> offers;
  std::vector<std::size_t> unpinned;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    const GroupRecord& g = groups_[i];
    if (g.pinned) {
      pinned_gpus += *g.pinned * g.group.gpus_per_instance;
      continue;
    }
    offers.push_back(MarketOffer{g.group.region, g.group.market, g.group.gpus_per_instance, g.estimator.rate()});
    unpinned.push_back(i);
  }
  const std::vector<int> desired = allocate(std::max(0, effective - pinned_gpus), offers, scenario_.allocation);
  for (std::size_t k = 0; k < unpinned.size(); ++k) request_desired(groups_[unpinned[k]], desired[k], now, "policy");

  policy_state_.ramp_target = planned;
  policy_state_.pinned_target = policy_.pinned();
  policy_state_.guard_cap = cap;
  policy_state_.effective_target = effective;
  policy_state_.suspended = policy_.suspended();
  policy_state_.stop_reason = policy_.stop_reason();

  log_.append(now, EventKind::PolicyTick,
              {{"planned_target", planned},
               {"pinned_target", nullable(policy_.pinned())},
               {"guard_cap", nullable(cap)},
               {"capacity_gpus", capacity},
               {"effective_target", effective},
               {"suspended", policy_.suspended()},
               {"live_gpus", live}});
}

void Campaign::reconcile_dirty(SimTime now) {
  for (std::size_t gi : dirty_) {
    GroupRecord& g = groups_[gi];
    std::vector<const Instance*> owned;
    owned.reserve(g.live.size());
    for (std::uint32_t id : g.live) owned.push_back(&instances_[id].inst);
    const ReconcilePlan plan = reconcile(g.group, owned);

    for (int k = 0; k < plan.provision; ++k) {
      InstanceRecord ir;
      ir.inst.id = InstanceId{static_cast<std::uint32_t>(instances_.size())};
      ir.inst.group = gi;
      ir.inst.started_at = now;
      ir.inst.gpus = g.group.gpus_per_instance;
      const std::uint32_t id = raw(ir.inst.id);
      instances_.push_back(std::move(ir));
      g.live.insert(id);
      ++g.active;
      kernel_.schedule(now + scenario_.provision_latency, EventKind::InstanceRunning, id);
      log_.append(now, EventKind::InstanceProvisioned,
                  {{"instance", id}, {"group", g.group.id}, {"provider", g.group.provider}, {"gpus", g.group.gpus_per_instance}});
    }
    ordered_json gone = ordered_json::array();
    for (InstanceId id : plan.deprovision) {
      InstanceRecord& ir = instances_[raw(id)];
      ir.inst.terminate_at = now + scenario_.deprovision_latency;
      --g.active;
      set_idle(ir, false);
      kernel_.schedule(*ir.inst.terminate_at, EventKind::InstanceDeprovisioned, raw(id));
      gone.push_back(raw(id));
    }
    g.shortfall = plan.shortfall;
    log_.append(now, EventKind::Reconciled,
                {{"group", g.group.id},
                 {"desired", g.group.desired_count},
                 {"provisioned", plan.provision},
                 {"deprovisioning", std::move(gone)},
                 {"shortfall", plan.shortfall}});
  }
  dirty_.clear();
}

void Campaign::match(SimTime now) {
  if (!ce_.up || ce_.queue.empty() || idle_.empty()) return;
  std::vector<PilotId> pilots;
  for (auto it = idle_.begin(); it != idle_.end() && pilots.size() < ce_.queue.size(); ++it) pilots.push_back(*it);
  const double factor = degradation_factor(now);
  for (const auto& [job, pid] : match_jobs(ce_, pilots)) {
    InstanceRecord& ir = instances_[raw(pid.instance)];
    JobRecord& jr = jobs_[raw(job)];
    start_job(jr.job, *ir.pilot, now);
    set_idle(ir, false);
    ++running_jobs_;
    ++jr.run_token;
    jr.instance = ir.inst.id;
    const Duration need = jr.job.required_gpu_seconds;
    const Duration wall = factor == 1.0 ? need : static_cast<Duration>(std::ceil(static_cast<double>(need) * factor));
    jr.finish_at = now + std::max<Duration>(wall, 1);
    kernel_.schedule(jr.finish_at, EventKind::JobCompleted, raw(job), jr.run_token);
    log_.append(now, EventKind::JobAssigned,
                {{"job", raw(job)}, {"pilot", to_string(pid)}, {"instance", raw(pid.instance)}});
    touch(ir, now);
  }
}

void Campaign::sample_timeline(SimTime now) {
  if (now <= 0 || (now % kSecondsPerHour != 0 && now != scenario_.horizon)) return;
  TimelineRow row;
  row.hour = static_cast<int>((now + kSecondsPerHour - 1) / kSecondsPerHour);
  row.live_gpus = live_gpus();
  row.queued = static_cast<int>(ce_.queue.size());
  row.running = running_jobs_;
  row.spend = ledger_.total_spent();
  row.remaining_frac = ledger_.remaining_fraction();
  row.preemptions = hour_preemptions_;
  hour_preemptions_ = 0;
  timeline_.push_back(row);
  int shortfall = 0;
  for (const GroupRecord& g : groups_) shortfall += g.shortfall * g.group.gpus_per_instance;
  shortfall_series_.push_back(shortfall);
}

// ---------------------------------------------------------------------------
// read side

CampaignReport Campaign::report() const {
  CampaignReport r;
  r.scenario = scenario_.name;
  r.seed = *scenario_.seed;
  r.horizon = scenario_.horizon;
  r.clock = kernel_.now();
  r.tflops_per_gpu = scenario_.fp32_tflops_per_gpu;
  r.budget = ledger_.total_budget();
  r.total_cost = ledger_.total_spent();
  for (const Provider& p : scenario_.providers) {
    ProviderTotals& t = r.per_provider[p.id];
    t.cost = ledger_.spent_by(p.id);
  }
  for (const GroupRecord& g : groups_) r.per_provider[g.group.provider].preemptions += g.preemptions;
  for (const InstanceRecord& ir : instances_) {
    const SimTime end = ir.inst.ended_at.value_or(r.clock);
    const std::int64_t gs = (end - ir.inst.started_at) * ir.inst.gpus;
    r.gpu_seconds += gs;
    r.per_provider[groups_[ir.inst.group].group.provider].gpu_seconds += gs;
    if (ir.inst.state == InstanceState::Preempted) ++r.instances_preempted;
    if (ir.inst.state == InstanceState::Deprovisioned) ++r.instances_deprovisioned;
  }
  r.instances_provisioned = static_cast<int>(instances_.size());
  r.pilot_drops = pilot_drops_;
  for (const JobRecord& jr : jobs_) {
    switch (jr.intake) {
      case JobRecord::Intake::Pending: continue;
      case JobRecord::Intake::Admitted: ++r.jobs_admitted; break;
      case JobRecord::Intake::Rejected: ++r.jobs_rejected; break;
      case JobRecord::Intake::SubmissionError: ++r.jobs_submission_errors; break;
    }
    ++r.jobs_submitted;
    if (jr.job.state == JobState::Done && jr.intake == JobRecord::Intake::Admitted) ++r.jobs_completed;
    r.job_preemptions += jr.job.preemption_count;
  }
  r.shortfall_gpus = shortfall_series_;
  r.alerts = ledger_.alerts();
  r.events = log_.count();
  return r;
}

nlohmann::ordered_json Campaign::status_json() const {
  int provisioning = 0, running = 0, terminating = 0, desired = 0, desired_gpus = 0;
  for (const GroupRecord& g : groups_) {
    desired += g.group.desired_count;
    desired_gpus += g.group.desired_count * g.group.gpus_per_instance;
    for (std::uint32_t id : g.live) {
      const Instance& inst = instances_[id].inst;
      if (inst.terminate_at) {
        ++terminating;
      } else if (inst.state == InstanceState::Provisioning) {
        ++provisioning;
      } else {
        ++running;
      }
    }
  }
  int done = 0;
  for (const JobRecord& jr : jobs_) {
    if (jr.intake == JobRecord::Intake::Admitted && jr.job.state == JobState::Done) ++done;
  }
  ordered_json j;
  j["clock_s"] = kernel_.now();
  j["horizon_s"] = scenario_.horizon;
  j["finished"] = finished_;
  j["ce_up"] = ce_.up;
  j["fleet"] = {{"live_gpus", live_gpus()},
                {"provisioning", provisioning},
                {"running", running},
                {"terminating", terminating},
                {"desired_instances", desired},
                {"desired_gpus", desired_gpus}};
  j["jobs"] = {{"queued", ce_.queue.size()}, {"running", running_jobs_}, {"done", done}};
  j["policy"] = {{"planned_target", policy_state_.ramp_target},
                 {"pinned_target", nullable(policy_.pinned())},
                 {"guard_cap", nullable(policy_state_.guard_cap)},
                 {"effective_target", policy_state_.effective_target},
                 {"suspended", policy_.suspended()},
                 {"stop_reason", policy_.stop_reason()}};
  j["spend_usd"] = ledger_.total_spent().usd();
  j["remaining_fraction"] = ledger_.remaining_fraction();
  return j;
}

nlohmann::ordered_json Campaign::budget_json() const {
  const BudgetAggregate agg = ledger_.aggregate();
  ordered_json j;
  ordered_json per = ordered_json::object();
  for (const Provider& p : scenario_.providers) {
    const Money m = ledger_.spent_by(p.id);
    per[p.id] = {{"spent_usd", m.usd()}, {"spent_micros", m.micros()}};
  }
  j["clock_s"] = kernel_.now();
  j["budget_usd"] = agg.budget.usd();
  j["spent_usd"] = agg.total.usd();
  j["spent_micros"] = agg.total.micros();
  j["remaining_usd"] = (agg.budget - agg.total).usd();
  j["remaining_fraction"] = agg.remaining_fraction;
  j["overspent"] = agg.overspent;
  j["per_provider"] = std::move(per);
  j["spend_rate_window_s"] = scenario_.spend_rate_window;
  j["spend_rate_usd_per_day"] = ledger_.spend_rate(scenario_.spend_rate_window, kernel_.now());
  j["thresholds"] = scenario_.thresholds;
  ordered_json alerts = ordered_json::array();
  for (const Alert& a : ledger_.alerts()) {
    alerts.push_back({{"threshold", a.threshold},
                      {"at", a.at},
                      {"remaining_fraction", a.remaining_fraction},
                      {"spend_rate_usd_per_day", a.spend_rate}});
  }
  j["alerts"] = std::move(alerts);
  return j;
}

nlohmann::ordered_json Campaign::groups_json() const {
  ordered_json arr = ordered_json::array();
  for (const GroupRecord& g : groups_) {
    arr.push_back({{"id", g.group.id},
                   {"region", g.group.region},
                   {"provider", g.group.provider},
                   {"instance_type", g.group.market.instance_type},
                   {"price_per_gpu_day", g.group.market.spot_price_per_gpu_day},
                   {"capacity", g.group.market.capacity},
                   {"desired", g.group.desired_count},
                   {"pinned", nullable(g.pinned)},
                   {"live", g.active},
                   {"live_gpus", g.active * g.group.gpus_per_instance},
                   {"terminating", static_cast<int>(g.live.size()) - g.active},
                   {"shortfall", g.shortfall},
                   {"preemptions", g.preemptions},
                   {"observed_preemption_rate", g.estimator.rate()}});
  }
  return arr;
}

nlohmann::ordered_json Campaign::timeline_json(int from_hour) const {
  ordered_json arr = ordered_json::array();
  for (const TimelineRow& row : timeline_) {
    if (row.hour >= from_hour) arr.push_back(timeline_row_json(row));
  }
  return arr;
}

std::string Campaign::state_digest() const {
  std::ostringstream out;
  const SimTime now = kernel_.now();
  out << "t=" << now << " ce=" << ce_.up << " spend=" << ledger_.total_spent().micros() << " running=" << running_jobs_
      << "\n";
  for (const GroupRecord& g : groups_) {
    out << "g " << g.group.id << " desired=" << g.group.desired_count << " active=" << g.active
        << " shortfall=" << g.shortfall << " pre=" << g.preemptions << "\n";
  }
  for (const InstanceRecord& ir : instances_) {
    const Instance& i = ir.inst;
    out << "i " << raw(i.id) << " g=" << i.group << " " << to_string(i.state) << " start=" << i.started_at
        << " term=" << (i.terminate_at ? std::to_string(*i.terminate_at) : "-")
        << " end=" << (i.ended_at ? std::to_string(*i.ended_at) : "-");
    if (ir.pilot && i.live()) {
      const Pilot& p = *ir.pilot;
      out << " pilot=" << to_string(p.id) << ":" << to_string(p.state);
      if (registered(ir)) out << ":" << effective_last_traffic(ir, now);
      if (p.current_job) out << " job=" << raw(*p.current_job);
    }
    out << "\n";
  }
  out << "q";
  for (JobId id : ce_.queue.ids()) out << " " << raw(id);
  out << "\n";
  for (const JobRecord& jr : jobs_) {
    if (jr.intake == JobRecord::Intake::Pending) continue;
    out << "j " << raw(jr.job.id) << " " << to_string(jr.job.state) << " pc=" << jr.job.preemption_count << "\n";
  }
  return out.str();
}

CampaignReport run_campaign(const Scenario& scenario, std::ostream* log_sink, std::vector<TimelineRow>* timeline) {
  Campaign c(scenario, log_sink);
  c.run_to_end();
  if (timeline) *timeline = c.timeline();
  return c.report();
}

}  // namespace cloudburst
