// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// the number of failed criteria.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cloudburst/campaign.hpp"
#include "cloudburst/model.hpp"
#include "cloudburst/report.hpp"
#include "../oracle/corpus.hpp"
#include "../support/desk.hpp"

using namespace cloudburst;
using nlohmann::json;

namespace {

// Tolerances.
constexpr double kEflopPublishedValue = 3.1;
constexpr double kEflopPublishedTolerance = 0.005;  // relative, against the rounded figure
constexpr double kExactRelative = 1e-12;        // floating-point identities
constexpr double kBaselineRelative = 1e-9;      // stored baseline vs recomputed
constexpr int kOracleRandomSeeds = 40;
constexpr int kConservationRandomSeeds = 12;

struct Verdict {
  bool ok{true};
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------
// shared runs

struct ReferenceRun {
  Scenario scenario;
  std::string log;
  CampaignReport report;
  std::vector<TimelineRow> timeline;
  Money spend;
  Money accrued;  // sum of accrue_instance_cost over lifetimes
  int instances{0};
};

std::string run_log(const Scenario& s) {
  std::ostringstream out;
  Campaign c(s, &out);
  c.run_to_end();
  return out.str();
}

const ReferenceRun& reference() {
  static const ReferenceRun run = [] {
    ReferenceRun r;
    r.scenario = load_scenario(desk::scenario_path("reference.json"));
    std::ostringstream out;
    Campaign c(r.scenario, &out);
    c.run_to_end();
    r.log = out.str();
    r.report = c.report();
    r.timeline = c.timeline();
    r.spend = c.ledger().total_spent();
    for (const InstanceRecord& ir : c.instances()) {
      const SimTime end = ir.inst.ended_at.value_or(c.horizon());
      r.accrued += accrue_instance_cost(c.groups()[ir.inst.group].group.market, ir.inst.gpus, end - ir.inst.started_at);
    }
    r.instances = static_cast<int>(c.instances().size());
    return r;
  }();
  return run;
}

// Records of one kind from a large log, parsing only the matching lines.
std::vector<json> scan(const std::string& log, const std::string& kind) {
  const std::string needle = "\"kind\":\"" + kind + "\"";
  std::vector<json> out;
  std::size_t pos = 0;
  while (pos < log.size()) {
    std::size_t end = log.find('\n', pos);
    if (end == std::string::npos) end = log.size();
    const std::string_view line(log.data() + pos, end - pos);
    if (line.find(needle) != std::string_view::npos) out.push_back(json::parse(line));
    pos = end + 1;
  }
  return out;
}

std::pair<double, double> price_range(const Scenario& s) {
  double lo = 1e300, hi = 0;
  for (const Region& r : s.regions) {
    for (const SpotMarket& m : r.markets) {
      lo = std::min(lo, m.spot_price_per_gpu_day);
      hi = std::max(hi, m.spot_price_per_gpu_day);
    }
  }
  return {lo, hi};
}

// Each instance's cost is rounded half-up to the micro-USD once, so the
// blended rate may leave the price range by at most this much.
double rounding_slack(int instances, double gpu_days) { return instances * 0.5e-6 / gpu_days; }

// ---------------------------------------------------------------------------
// criteria

Verdict eflop_identity() {
  Verdict v;
  // 16000 GPU-days * 24 h * 8.1e12 FLOP/s / 1e18 = 3.1104
  const double oracle = 16000.0 * 24.0 * 8.1 / 1e6;
  const double got = fp32_eflop_hours(16000, 8.1);
  v.require(std::abs(got - 3.1104) <= kExactRelative * 3.1104, fmt("fp32_eflop_hours = %.12f, want 3.1104", got));
  v.require(std::abs(got - oracle) <= kExactRelative * oracle, "disagrees with the direct product");
  v.require(std::abs(got - kEflopPublishedValue) <= kEflopPublishedTolerance * kEflopPublishedValue,
            fmt("%.4f is not within 0.5%% of 3.1", got));
  v.detail = v.ok ? fmt("3.1104 EFLOP-h, %.2f%% from 3.1", 100.0 * (got - kEflopPublishedValue) / kEflopPublishedValue)
                  : v.detail;
  return v;
}

Verdict blended_cost() {
  Verdict v;
  const double identity = blended_cost_per_gpu_day(58000, 16000);
  v.require(std::abs(identity - 3.625) <= kExactRelative * 3.625, fmt("blended(58000, 16000) = %.12f", identity));

  auto check_campaign = [&](const std::string& name, const Scenario& s, const CampaignReport& r, int instances) {
    const auto b = r.blended_cost_per_gpu_day();
    if (!b) return;  // no GPU time, no rate
    const auto [lo, hi] = price_range(s);
    const double slack = rounding_slack(instances, r.total_gpu_days());
    v.require(*b >= lo - slack && *b <= hi + slack,
              name + ": " + fmt("blended %.6f outside [%.2f, %.2f]", *b, lo, hi));
  };

  const ReferenceRun& ref = reference();
  check_campaign("reference", ref.scenario, ref.report, ref.instances);
  const double b = ref.report.blended_cost_per_gpu_day().value_or(0);
  v.require(b > 2.9 && b <= 3.625, fmt("reference blended %.6f not in (2.9, 3.625]", b));

  std::vector<Scenario> others = oracle::edge_corpus();
  for (int seed = 1; seed <= kConservationRandomSeeds; ++seed) others.push_back(oracle::random_scenario(seed));
  for (const Scenario& s : others) {
    Campaign c(s);
    c.run_to_end();
    check_campaign(s.name, s, c.report(), static_cast<int>(c.instances().size()));
  }
  if (v.ok) v.detail = fmt("identity 3.625; reference blended %.4f USD/GPU-day", b);
  return v;
}

Verdict keepalive_regimes() {
  Verdict v;
  const Duration nat = 240;

  // keepalive 300 s: every pilot dies exactly nat seconds after its last
  // traffic, and every job it was running goes back to the queue
  {
    Scenario s = desk::keepalive_desk(300);
    s.log_keepalives = true;
    const auto lines = desk::parse_lines(run_log(s));
    std::map<std::string, SimTime> last;
    std::map<std::string, std::optional<int>> running;
    std::map<std::string, bool> dead;
    int busy_deaths = 0, requeued = 0, late = 0, completions = 0;
    for (const json& rec : lines) {
      if (!rec.contains("kind")) continue;
      const std::string kind = rec["kind"];
      const SimTime at = rec["at"];
      if (kind == "PilotStarted" || kind == "PilotKeepalive") {
        last[rec["pilot"]] = at;
        if (kind == "PilotStarted") dead[rec["pilot"]] = false;
      } else if (kind == "JobAssigned") {
        last[rec["pilot"]] = at;
        running[rec["pilot"]] = rec["job"].get<int>();
      } else if (kind == "JobCompleted") {
        ++completions;
        if (!rec["pilot"].is_null()) {
          last[rec["pilot"]] = at;
          running[rec["pilot"]].reset();
        }
      } else if (kind == "PilotDead") {
        const std::string p = rec["pilot"];
        v.require(rec["reason"] == "nat_timeout", "pilot " + p + " died of " + rec["reason"].get<std::string>());
        if (at - last[p] > nat) ++late;
        dead[p] = true;
        if (running[p]) ++busy_deaths;
      } else if (kind == "JobPreempted") {
        const std::string p = rec["pilot"];
        v.require(running[p] && *running[p] == rec["job"].get<int>(), "re-queued job was not the pilot's job");
        ++requeued;
        running[p].reset();
      }
    }
    int survivors = 0;
    for (const auto& [p, d] : dead) {
      if (!d && last[p] + nat <= s.horizon) ++survivors;
    }
    v.require(!dead.empty(), "no pilots started");
    v.require(late == 0, std::to_string(late) + " pilots outlived the NAT timeout");
    v.require(survivors == 0, std::to_string(survivors) + " pilots survived past the NAT timeout");
    v.require(busy_deaths == requeued, "busy deaths " + std::to_string(busy_deaths) + " vs re-queued " +
                                           std::to_string(requeued));
    v.require(completions == 0, std::to_string(completions) + " jobs completed on dropping connections");
    if (v.ok) v.detail = std::to_string(dead.size()) + " pilots all dropped, " + std::to_string(requeued) + " jobs re-queued";
  }

  // keepalive 60 s: no drops over one day
  {
    Scenario s = desk::keepalive_desk(60);
    v.require(s.horizon == kSecondsPerDay, "desk horizon is not one day");
    const auto lines = desk::parse_lines(run_log(s));
    const auto deaths = desk::records_of(lines, "PilotDead");
    v.require(deaths.empty(), std::to_string(deaths.size()) + " pilot deaths with a 60 s keepalive");
    v.require(desk::records_of(lines, "PilotStarted").size() == 20, "expected 20 pilots");
    if (v.ok) v.detail += "; keepalive 60 s: 20 pilots, 0 deaths in 1 day";
  }
  return v;
}

Verdict ramp_plateaus() {
  Verdict v;
  const ReferenceRun& ref = reference();
  const Scenario& s = ref.scenario;

  // the ramp stands alone until the first disturbance the policy reacts to
  SimTime cut = s.horizon;
  for (const OutageWindow& w : s.ce_outages) cut = std::min(cut, w.begin);
  for (const OperatorCommand& c : s.operator_commands) cut = std::min(cut, c.at);
  for (const json& tick : scan(ref.log, "PolicyTick")) {
    if (!tick["guard_cap"].is_null()) {
      cut = std::min(cut, tick["at"].get<SimTime>());
      break;
    }
  }

  int capacity = 0;
  for (const Region& r : s.regions) {
    for (const SpotMarket& m : r.markets) capacity += m.capacity * s.instance_type(m.instance_type).gpus_per_instance;
  }
  v.require(capacity >= s.ramp.steps.back().target_gpus, "reference capacity is not ample");

  // read the plateaus back from the CSV export
  std::ostringstream csv;
  write_timeline_csv(csv, ref.timeline);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  v.require(line == kTimelineHeader, "unexpected CSV header");
  std::map<int, int> live_at_hour;
  while (std::getline(in, line)) {
    int hour = 0, live = 0;
    std::sscanf(line.c_str(), "%d,%d", &hour, &live);
    live_at_hour[hour] = live;
  }

  std::string seen;
  for (std::size_t i = 0; i < s.ramp.steps.size(); ++i) {
    const RampStep& step = s.ramp.steps[i];
    const SimTime from = step.activate_at + s.provision_latency;
    const SimTime to = std::min(cut, i + 1 < s.ramp.steps.size() ? s.ramp.steps[i + 1].activate_at : s.horizon);
    int rows = 0;
    for (const auto& [hour, live] : live_at_hour) {
      const SimTime t = static_cast<SimTime>(hour) * kSecondsPerHour;
      if (t < from || t >= to) continue;
      ++rows;
      v.require(live == step.target_gpus, "hour " + std::to_string(hour) + ": live " + std::to_string(live) +
                                              ", plateau " + std::to_string(step.target_gpus));
    }
    v.require(rows > 0, "no timeline rows on the " + std::to_string(step.target_gpus) + " plateau");
    seen += (seen.empty() ? "" : "/") + std::to_string(step.target_gpus) + "x" + std::to_string(rows) + "h";
  }
  if (v.ok) v.detail = "plateaus " + seen;
  return v;
}

Verdict budget_alerts() {
  Verdict v;
  const ReferenceRun& ref = reference();
  const Scenario& s = ref.scenario;
  const auto alerts = scan(ref.log, "AlertFired");

  std::vector<double> fired;
  for (const json& a : alerts) fired.push_back(a["threshold"]);
  v.require(fired == s.thresholds, "fired thresholds differ from the configured list (each once, descending)");
  for (const json& a : alerts) {
    v.require(a["remaining_fraction"].get<double>() < a["threshold"].get<double>(), "alert above its threshold");
  }

  const auto guard = std::find_if(s.guards.begin(), s.guards.end(), [](const BudgetGuard& g) { return g.fraction == 0.2; });
  v.require(guard != s.guards.end() && guard->max_gpus == 1000, "reference has no 0.20 -> 1000 guard");
  const auto crossing = std::find_if(alerts.begin(), alerts.end(), [](const json& a) { return a["threshold"] == 0.2; });
  v.require(crossing != alerts.end(), "no 0.20 alert");
  if (!v.ok) return v;

  const SimTime t20 = (*crossing)["at"];
  std::optional<json> first_after;
  for (const json& tick : scan(ref.log, "PolicyTick")) {
    const SimTime at = tick["at"];
    if (at < t20) {
      v.require(tick["guard_cap"].is_null(), "guard active at t=" + std::to_string(at) + " before the 0.20 crossing");
    } else if (!first_after) {
      first_after = tick;
    }
  }
  v.require(first_after.has_value(), "no policy tick after the 0.20 crossing");
  if (!v.ok) return v;
  v.require((*first_after)["guard_cap"] == 1000, "guard cap after the crossing is " + (*first_after)["guard_cap"].dump());
  v.require((*first_after)["effective_target"] == 1000,
            "effective target after the crossing is " + (*first_after)["effective_target"].dump());
  v.require((*first_after)["planned_target"].get<int>() > 1000, "the guard did not bind");
  const SimTime t_tick = (*first_after)["at"];

  // the fleet follows within one hour
  for (const TimelineRow& row : ref.timeline) {
    const SimTime t = static_cast<SimTime>(row.hour) * kSecondsPerHour;
    if (t >= t_tick + kSecondsPerHour && t < s.horizon) {
      v.require(row.live_gpus <= 1000, "live " + std::to_string(row.live_gpus) + " at hour " + std::to_string(row.hour));
    }
  }
  if (v.ok) {
    v.detail = std::to_string(fired.size()) + " alerts once each, descending; 0.20 crossed at t=" +
               std::to_string(t20) + ", target capped 2000 -> 1000 at t=" + std::to_string(t_tick);
  }
  return v;
}

Verdict emergency_stop() {
  Verdict v;
  Scenario s = desk::base(77, kSecondsPerDay);
  s.name = "outage-stop";
  desk::add_market(s, "azure", "azure-eastus", 240, 2.9, 1500, 0.02);
  desk::add_market(s, "aws", "aws-us-east-1", 350, 3.9, 500, 0.15);
  desk::ramp(s, {{0, 2000}});
  desk::jobs(s, 4000, 0, 0, 7200, 21600);

  const SimTime B = 6 * kSecondsPerHour;
  const SimTime E = B + 2 * kSecondsPerHour;
  const Duration reaction = 600;  // stop issued ten simulated minutes in
  Campaign c(s);
  c.run_until(B - 1);
  v.require(c.live_gpus() == 2000, "fleet before the outage is " + std::to_string(c.live_gpus()));
  c.inject_outage(B, E);
  c.submit_command(desk::command(CommandType::EmergencyStop, B + reaction));

  c.run_until(B);
  const Money at_begin = c.ledger().total_spent();
  const SimTime quiet = B + reaction + s.deprovision_latency;
  c.run_until(quiet);
  std::size_t live = 0;
  for (const GroupRecord& g : c.groups()) live += g.live.size();
  v.require(live == 0, std::to_string(live) + " instances still live at outage + 10 min + latency");
  c.run_until(E);
  const Money window = c.ledger().total_spent() - at_begin;

  // the same figure from instance lifetimes
  Money recomputed;
  int billed_in_window = 0;
  for (const InstanceRecord& ir : c.instances()) {
    const SimTime end = std::min(ir.inst.ended_at.value_or(E), E);
    if (end <= B) continue;
    const SpotMarket& m = c.groups()[ir.inst.group].group.market;
    const Duration before = std::max<SimTime>(B, ir.inst.started_at) - ir.inst.started_at;
    recomputed += accrue_instance_cost(m, ir.inst.gpus, end - ir.inst.started_at) -
                  accrue_instance_cost(m, ir.inst.gpus, before);
    ++billed_in_window;
  }
  v.require(recomputed == window, "ledger window spend " + window.to_string() + " vs lifetimes " + recomputed.to_string());

  // (reaction + latency) / 86400 * 2000 * max price, in integer micro-USD,
  // plus one micro-USD per instance for the two roundings of its difference
  const std::int64_t max_price_micros = Money::from_usd(price_range(s).second).micros();
  const __int128 num = static_cast<__int128>(quiet - B) * 2000 * max_price_micros;
  const std::int64_t bound = static_cast<std::int64_t>(num / kSecondsPerDay) + billed_in_window;
  v.require(window.micros() <= bound, "window spend " + window.to_string() + " exceeds " + Money::from_micros(bound).to_string());
  if (v.ok) {
    v.detail = "0 live at +" + std::to_string(quiet - B) + " s; outage spend $" + window.to_string() + " <= $" +
               Money::from_micros(bound).to_string();
  }
  return v;
}

Verdict determinism() {
  Verdict v;
  const ReferenceRun& ref = reference();
  const std::string again = run_log(ref.scenario);
  v.require(again == ref.log, "same seed, different log bytes");
  Scenario other = ref.scenario;
  other.seed = *other.seed + 1;
  v.require(run_log(other) != ref.log, "a different seed produced the same log");
  if (v.ok) v.detail = fmt("%.1f MB log identical across runs; seed+1 differs", ref.log.size() / 1e6);
  return v;
}

Verdict oracle_equivalence() {
  Verdict v;
  std::vector<Scenario> all = oracle::edge_corpus();
  for (int seed = 1; seed <= kOracleRandomSeeds; ++seed) all.push_back(oracle::random_scenario(seed));
  std::int64_t seconds = 0;
  for (const Scenario& s : all) {
    v.require(s.horizon <= kSecondsPerDay, s.name + " longer than a day");
    const auto d = oracle::first_divergence(s);
    if (d) v.require(false, s.name + " diverges at t=" + std::to_string(d->at) + ": " + oracle::diff_line(d->engine, d->reference));
    seconds += s.horizon;
  }
  if (v.ok) v.detail = std::to_string(all.size()) + " scenarios, " + std::to_string(seconds) + " s compared state-for-state";
  return v;
}

Verdict conservation() {
  Verdict v;
  std::vector<Scenario> all = oracle::edge_corpus();
  for (int seed = 1; seed <= kConservationRandomSeeds; ++seed) all.push_back(oracle::random_scenario(100 + seed));
  std::int64_t instants = 0;
  for (const Scenario& s : all) {
    Campaign c(s);
    int total_jobs = 0;
    for (const JobBatch& b : s.workload) total_jobs += b.count;
    for (SimTime t = 0; t <= s.horizon && v.ok; ++t) {
      c.run_until(t);
      ++instants;
      for (const GroupRecord& g : c.groups()) {
        v.require(static_cast<int>(g.live.size()) <= g.group.market.capacity,
                  s.name + ": group " + g.group.id + " over capacity at t=" + std::to_string(t));
      }
      int pending = 0, queued = 0, running = 0, done = 0, refused = 0;
      for (const JobRecord& jr : c.jobs()) {
        switch (jr.intake) {
          case JobRecord::Intake::Pending: ++pending; break;
          case JobRecord::Intake::Rejected:
          case JobRecord::Intake::SubmissionError: ++refused; break;
          case JobRecord::Intake::Admitted:
            if (jr.job.state == JobState::Queued) ++queued;
            else if (jr.job.state == JobState::Running) ++running;
            else if (jr.job.state == JobState::Done) ++done;
            break;
        }
      }
      v.require(pending + queued + running + done + refused == total_jobs,
                s.name + ": job population not conserved at t=" + std::to_string(t));
      v.require(static_cast<std::size_t>(queued) == c.ce().queue.size() && running == c.running_jobs(),
                s.name + ": queue/running counters disagree with job states at t=" + std::to_string(t));
    }
    Money accrued;
    for (const InstanceRecord& ir : c.instances()) {
      const SimTime end = ir.inst.ended_at.value_or(c.horizon());
      accrued += accrue_instance_cost(c.groups()[ir.inst.group].group.market, ir.inst.gpus, end - ir.inst.started_at);
    }
    v.require(accrued == c.ledger().total_spent(),
              s.name + ": ledger " + c.ledger().total_spent().to_string() + " vs lifetimes " + accrued.to_string());
  }
  const ReferenceRun& ref = reference();
  v.require(ref.accrued == ref.spend, "reference: ledger " + ref.spend.to_string() + " vs lifetimes " + ref.accrued.to_string());
  if (v.ok) {
    v.detail = std::to_string(all.size()) + " scenarios checked at " + std::to_string(instants) +
               " instants; reference ledger $" + ref.spend.to_string() + " exact";
  }
  return v;
}

Verdict more_than_baseline() {
  Verdict v;
  const ReferenceRun& ref = reference();
  const auto stored = ref.scenario.baseline_onprem_gpu_hours;
  v.require(stored.has_value(), "reference scenario has no baseline");
  if (!v.ok) return v;
  const double analytic = analytic_envelope(ref.scenario).lower_gpu_seconds / kSecondsPerHour;
  v.require(std::abs(*stored - analytic) <= kBaselineRelative * analytic,
            fmt("stored baseline %.6f vs analytic %.6f GPU-h", *stored, analytic));
  const double cloud = static_cast<double>(ref.report.gpu_seconds) / kSecondsPerHour;
  v.require(cloud >= *stored, fmt("cloud %.1f GPU-h < baseline %.1f", cloud, *stored));
  if (v.ok) v.detail = fmt("cloud %.1f GPU-h >= baseline %.1f (x%.3f)", cloud, *stored, cloud / *stored);
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"eflop-hour identity", eflop_identity},
      {"blended cost", blended_cost},
      {"keepalive regime switch", keepalive_regimes},
      {"ramp reproduction", ramp_plateaus},
      {"budget alerts and guard", budget_alerts},
      {"emergency stop", emergency_stop},
      {"determinism", determinism},
      {"oracle equivalence", oracle_equivalence},
      {"conservation", conservation},
      {"more than baseline", more_than_baseline},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.ok = false;
      v.detail = std::string("exception: ") + e.what();
    }
    if (!v.ok) ++failed;
    std::printf("%s %2zu %s: %s\n", v.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
