#include "cloudburst/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>

#include "cloudburst/event_log.hpp"
#include "cloudburst/model.hpp"
#include "cloudburst/scenario.hpp"
#include "cloudburst/simkernel.hpp"

namespace cloudburst {

using nlohmann::json;
using nlohmann::ordered_json;

double CampaignReport::eflop_hours() const { return fp32_eflop_hours(total_gpu_days(), tflops_per_gpu); }

std::optional<double> CampaignReport::blended_cost_per_gpu_day() const {
  if (gpu_seconds <= 0) return std::nullopt;
  return cloudburst::blended_cost_per_gpu_day(total_cost.usd(), total_gpu_days());
}

nlohmann::ordered_json CampaignReport::to_json() const {
  ordered_json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["horizon_s"] = horizon;
  j["clock_s"] = clock;
  j["gpu_seconds"] = gpu_seconds;
  j["total_gpu_days"] = total_gpu_days();
  j["fp32_tflops_per_gpu"] = tflops_per_gpu;
  j["eflop_hours"] = eflop_hours();
  j["total_cost_usd"] = total_cost.usd();
  j["total_cost_micros"] = total_cost.micros();
  j["budget_usd"] = budget.usd();
  const auto blended = blended_cost_per_gpu_day();
  j["blended_cost_per_gpu_day"] = blended ? ordered_json(*blended) : ordered_json(nullptr);
  ordered_json per = ordered_json::object();
  for (const auto& [id, t] : per_provider) {
    per[id] = {{"gpu_seconds", t.gpu_seconds},
               {"gpu_days", static_cast<double>(t.gpu_seconds) / kSecondsPerDay},
               {"cost_usd", t.cost.usd()},
               {"cost_micros", t.cost.micros()},
               {"preemptions", t.preemptions}};
  }
  j["per_provider"] = std::move(per);
  j["instances"] = {{"provisioned", instances_provisioned},
                    {"preempted", instances_preempted},
                    {"deprovisioned", instances_deprovisioned}};
  j["pilots"] = {{"nat_drops", pilot_drops}};
  j["jobs"] = {{"submitted", jobs_submitted},
               {"admitted", jobs_admitted},
               {"rejected", jobs_rejected},
               {"submission_errors", jobs_submission_errors},
               {"completed", jobs_completed},
               {"preemptions", job_preemptions}};
  j["shortfall_gpus"] = shortfall_gpus;
  ordered_json alerts = ordered_json::array();
  for (const Alert& a : this->alerts) {
    alerts.push_back({{"threshold", a.threshold},
                      {"at", a.at},
                      {"remaining_fraction", a.remaining_fraction},
                      {"spend_rate_usd_per_day", a.spend_rate}});
  }
  j["alerts"] = std::move(alerts);
  j["events"] = events;
  return j;
}

namespace {

struct ReplayInstance {
  SimTime start{0};
  std::optional<SimTime> end;
  int gpus{1};
  std::string provider;
};

const json& field(const json& rec, const char* key, std::size_t line) {
  if (!rec.contains(key)) {
    throw IntegrityError("line " + std::to_string(line) + ": missing field '" + key + "'");
  }
  return rec.at(key);
}

}  // namespace

CampaignReport emit_report(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  if (!std::getline(in, text)) throw IntegrityError("empty log: no header");
  ++line_no;
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IntegrityError(std::string("header is not JSON: ") + e.what());
  }
  if (!header.is_object() || header.value("schema", "") != kEventLogSchema) {
    throw IntegrityError("not a cloudburst event log");
  }
  if (header.value("version", 0) != kEventLogVersion) {
    throw IntegrityError("unsupported log version " + header.value("version", json()).dump());
  }
  Scenario sc;
  try {
    sc = parse_scenario(field(header, "scenario", line_no));
  } catch (const ScenarioError& e) {
    throw IntegrityError(std::string("header scenario: ") + e.what());
  }

  CampaignReport r;
  r.scenario = sc.name;
  r.seed = sc.seed.value_or(0);
  r.horizon = sc.horizon;
  r.tflops_per_gpu = sc.fp32_tflops_per_gpu;
  r.budget = sc.budget_total;
  for (const Provider& p : sc.providers) r.per_provider[p.id];

  std::map<std::string, int> gpus_per_group;
  std::map<std::string, int> shortfall;
  for (const Region& reg : sc.regions) {
    for (const SpotMarket& m : reg.markets) {
      const std::string id = reg.id + ":" + m.instance_type;
      gpus_per_group[id] = sc.instance_type(m.instance_type).gpus_per_instance;
      shortfall[id] = 0;
    }
  }
  std::map<std::uint64_t, ReplayInstance> instances;

  std::optional<SimTime> instant;
  auto close_instant = [&] {
    if (!instant) return;
    const SimTime t = *instant;
    if (t > 0 && (t % kSecondsPerHour == 0 || t == sc.horizon)) {
      int total = 0;
      for (const auto& [g, n] : shortfall) total += n * gpus_per_group[g];
      r.shortfall_gpus.push_back(total);
    }
  };

  std::uint64_t records = 0;
  bool trailer = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    if (trailer) throw IntegrityError("line " + std::to_string(line_no) + ": data after trailer");
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error&) {
      throw IntegrityError("line " + std::to_string(line_no) + ": malformed record (truncated log?)");
    }
    if (rec.contains("end")) {
      trailer = true;
      const auto count = field(rec, "events", line_no).get<std::uint64_t>();
      if (count != records) {
        throw IntegrityError("trailer counts " + std::to_string(count) + " events, log holds " +
                             std::to_string(records));
      }
      r.clock = field(rec, "clock", line_no).get<SimTime>();
      continue;
    }
    if (field(rec, "seq", line_no).get<std::uint64_t>() != records) {
      throw IntegrityError("line " + std::to_string(line_no) + ": sequence gap");
    }
    ++records;
    const SimTime at = field(rec, "at", line_no).get<SimTime>();
    if (instant && at < *instant) throw IntegrityError("line " + std::to_string(line_no) + ": time runs backwards");
    if (instant && at > *instant) close_instant();
    instant = at;

    EventKind kind;
    try {
      kind = event_kind_from_string(field(rec, "kind", line_no).get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw IntegrityError("line " + std::to_string(line_no) + ": " + e.what());
    }
    switch (kind) {
      case EventKind::InstanceProvisioned: {
        ReplayInstance ri;
        ri.start = at;
        ri.gpus = field(rec, "gpus", line_no).get<int>();
        ri.provider = field(rec, "provider", line_no).get<std::string>();
        instances[field(rec, "instance", line_no).get<std::uint64_t>()] = ri;
        ++r.instances_provisioned;
        break;
      }
      case EventKind::InstancePreempted:
      case EventKind::InstanceDeprovisioned: {
        auto it = instances.find(field(rec, "instance", line_no).get<std::uint64_t>());
        if (it == instances.end()) throw IntegrityError("line " + std::to_string(line_no) + ": unknown instance");
        it->second.end = at;
        const Money charge = Money::from_micros(field(rec, "charge_micros", line_no).get<std::int64_t>());
        r.total_cost += charge;
        ProviderTotals& pt = r.per_provider[it->second.provider];
        pt.cost += charge;
        if (kind == EventKind::InstancePreempted) {
          ++pt.preemptions;
          ++r.instances_preempted;
        } else {
          ++r.instances_deprovisioned;
        }
        break;
      }
      case EventKind::SpendAccrued: {
        const Money amount = Money::from_micros(field(rec, "amount_micros", line_no).get<std::int64_t>());
        r.total_cost += amount;
        r.per_provider[field(rec, "provider", line_no).get<std::string>()].cost += amount;
        break;
      }
      case EventKind::PilotDead:
        if (field(rec, "reason", line_no).get<std::string>() == "nat_timeout") ++r.pilot_drops;
        break;
      case EventKind::JobSubmitted: {
        ++r.jobs_submitted;
        const std::string outcome = field(rec, "outcome", line_no).get<std::string>();
        if (outcome == "admitted") {
          ++r.jobs_admitted;
        } else if (outcome == "rejected") {
          ++r.jobs_rejected;
        } else {
          ++r.jobs_submission_errors;
        }
        break;
      }
      case EventKind::JobCompleted: ++r.jobs_completed; break;
      case EventKind::JobPreempted: ++r.job_preemptions; break;
      case EventKind::AlertFired:
        r.alerts.push_back(Alert{field(rec, "threshold", line_no).get<double>(), at,
                                 field(rec, "remaining_fraction", line_no).get<double>(),
                                 field(rec, "spend_rate_usd_per_day", line_no).get<double>()});
        break;
      case EventKind::Reconciled:
        shortfall[field(rec, "group", line_no).get<std::string>()] = field(rec, "shortfall", line_no).get<int>();
        break;
      default: break;
    }
  }
  if (records > 0 && !trailer) throw IntegrityError("log is truncated: no trailer");
  close_instant();

  for (const auto& [id, ri] : instances) {
    const std::int64_t gs = (ri.end.value_or(r.clock) - ri.start) * ri.gpus;
    r.gpu_seconds += gs;
    r.per_provider[ri.provider].gpu_seconds += gs;
  }
  r.events = records;
  return r;
}

void write_timeline_csv(std::ostream& out, const std::vector<TimelineRow>& rows) {
  out << kTimelineHeader << '\n';
  char frac[32];
  for (const TimelineRow& row : rows) {
    std::snprintf(frac, sizeof frac, "%.6f", row.remaining_frac);
    out << row.hour << ',' << row.live_gpus << ',' << row.queued << ',' << row.running << ','
        << row.spend.to_string() << ',' << frac << ',' << row.preemptions << '\n';
  }
}

nlohmann::ordered_json timeline_row_json(const TimelineRow& row) {
  return {{"hour", row.hour},
          {"live_gpus", row.live_gpus},
          {"queued", row.queued},
          {"running", row.running},
          {"spend_usd", row.spend.usd()},
          {"remaining_frac", row.remaining_frac},
          {"preemptions", row.preemptions}};
}

// Replays the scripted target curve second by second. The policy re-reads
// its inputs at every control tick and whenever a command lands, so the
// desired fleet between evaluations is known exactly; only the budget guard
// depends on the run, and it is bracketed by its earliest possible trigger.
Envelope analytic_envelope(const Scenario& s) {
  Envelope env;
  if (s.horizon <= 0) return env;

  int capacity = 0;
  int max_gpi = 1;
  double max_price = 0.0;
  std::map<std::string, int> region_gpus;
  for (const Region& r : s.regions) {
    for (const SpotMarket& m : r.markets) {
      const int gpi = s.instance_type(m.instance_type).gpus_per_instance;
      region_gpus[r.id] += m.capacity * gpi;
      max_gpi = std::max(max_gpi, gpi);
      max_price = std::max(max_price, m.spot_price_per_gpu_day);
    }
  }
  for (const auto& [id, gpus] : region_gpus) {
    capacity += s.allocation.per_region_cap ? std::min(gpus, *s.allocation.per_region_cap) : gpus;
  }
  const int groups = [&] {
    int n = 0;
    for (const Region& r : s.regions) n += static_cast<int>(r.markets.size());
    return n;
  }();

  std::vector<OperatorCommand> cmds = s.operator_commands;
  std::stable_sort(cmds.begin(), cmds.end(), [](const auto& a, const auto& b) { return a.at < b.at; });

  RampPlan plan = s.ramp;
  bool stopped = false;
  int pin = -1;  // operator pin, -1 when none
  std::size_t next_cmd = 0;
  auto raw_target = [&](SimTime t) {
    if (stopped) return 0;
    if (pin >= 0) return pin;
    return ramp_step(plan, t);
  };

  // Guard fractions are checked against the fastest spend the upper fleet
  // could produce at the dearest price.
  std::vector<std::pair<double, int>> guards;
  for (const BudgetGuard& g : s.guards) guards.emplace_back(1.0 - g.fraction, g.max_gpus);
  std::optional<int> cap;
  double upper_spend = 0.0;
  const double budget = s.budget_total.usd();

  int desired = 0;    // fleet target between evaluations
  int tail_gpus = 0;  // GPUs still billing after a scale-down
  std::vector<std::pair<SimTime, int>> tails;
  const bool hold = s.ramp.hold_validation > 0;

  for (SimTime t = 0; t < s.horizon; ++t) {
    bool evaluate = t % s.control_tick == 0;
    while (next_cmd < cmds.size() && cmds[next_cmd].at == t) {
      const OperatorCommand& c = cmds[next_cmd++];
      switch (c.type) {
        case CommandType::EmergencyStop:
          stopped = true;
          pin = -1;
          break;
        case CommandType::Resume:
          if (stopped) {
            plan.steps = {RampStep{t, c.value}};
            stopped = false;
            pin = -1;
          }
          break;
        case CommandType::SetTarget:
          if (!stopped) pin = c.value;
          break;
        case CommandType::ReleaseTarget:
          if (!stopped) pin = -1;
          break;
        default: break;
      }
      evaluate = true;
    }
    if (evaluate) {
      int target = std::min(raw_target(t), capacity);
      const int previous = desired;
      desired = target;
      if (desired < previous) tails.emplace_back(t + s.deprovision_latency, previous - desired);
    }
    for (const auto& [frac, max_gpus] : guards) {
      if (upper_spend >= frac * budget) cap = cap ? std::min(*cap, max_gpus) : max_gpus;
    }
    tail_gpus = 0;
    for (const auto& [until, gpus] : tails) {
      if (t < until) tail_gpus += gpus;
    }
    const double upper = desired + tail_gpus;
    double lower = cap ? std::min(desired, *cap) : desired;
    if (max_gpi > 1) lower = std::max(0.0, lower - groups * (max_gpi - 1));
    if (hold) lower = 0.0;
    env.upper_gpu_seconds += upper;
    env.lower_gpu_seconds += lower;
    upper_spend += upper * max_price / kSecondsPerDay;
  }
  return env;
}

}  // namespace cloudburst
