#include "corpus.hpp"

#include <sstream>

#include "../support/desk.hpp"
#include "cloudburst/campaign.hpp"
#include "oracle.hpp"

namespace oracle {

using namespace cloudburst;
using desk::add_market;
using desk::command;
using desk::jobs;
using desk::ramp;

std::string diff_line(const std::string& a, const std::string& b) {
  std::istringstream x(a), y(b);
  std::string la, lb;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(x, la));
    const bool gb = static_cast<bool>(std::getline(y, lb));
    if (!ga && !gb) return "";
    if (!ga) la = "<end>";
    if (!gb) lb = "<end>";
    if (la != lb) return "engine:    " + la + "\nreference: " + lb;
  }
}

std::optional<Divergence> first_divergence(const Scenario& s) {
  Campaign engine(s, nullptr);
  FixedStep ref(s);
  for (SimTime t = 0; t <= s.horizon; ++t) {
    engine.run_until(t);
    ref.step_to(t);
    std::string a = engine.state_digest();
    std::string b = ref.digest();
    if (a != b) return Divergence{t, std::move(a), std::move(b)};
  }
  return std::nullopt;
}

std::vector<Scenario> edge_corpus() {
  std::vector<Scenario> out;

  {
    // three providers, mixed NAT timeouts, a two-GPU type, outage with a
    // stop and a resume landing on the outage end, group pins, guards
    Scenario s = desk::base(101, 12 * kSecondsPerHour);
    s.name = "mixed";
    s.instance_types.push_back(InstanceType{"t4x2", 2, "NVIDIA T4", 8.1});
    add_market(s, "azure", "azure-eastus", 240, 2.9, 6, 2.0);
    add_market(s, "gcp", "gcp-us-central1", 1200, 3.5, 5, 6.0);
    add_market(s, "aws", "aws-us-east-1", 350, 3.9, 4, 3.0, "t4x2");
    ramp(s, {{0, 4}, {3600, 10}, {7200, 18}});
    s.allocation.preemption_penalty = 0.5;
    s.ewma_half_life = 3600;
    s.control_tick = 300;
    s.accrual_interval = 600;
    s.budget_total = Money::from_usd(26);
    s.thresholds = {0.75, 0.5, 0.25};
    s.guards = {{0.4, 6}, {0.1, 0}};
    jobs(s, 80, 0, 400, 900, 4000);
    jobs(s, 2, 500, 1000, 600, 600, "other");
    jobs(s, 1, 1300, 0, 0, 0);
    s.ce_outages = {{18000, 25200}};
    s.degradations = {{7200, 10800, 1.5}};
    s.operator_commands = {command(CommandType::SetGroupDesired, 11000, 3, "gcp-us-central1:t4"),
                           command(CommandType::ReleaseGroup, 14000, 0, "gcp-us-central1:t4"),
                           command(CommandType::SetTarget, 15000, 8),
                           command(CommandType::ReleaseTarget, 16000),
                           command(CommandType::EmergencyStop, 18600),
                           command(CommandType::EmergencyStop, 19000),
                           command(CommandType::SetTarget, 20000, 4),
                           command(CommandType::Resume, 25200, 12)};
    out.push_back(s);
  }
  {
    // keepalive slower than both NAT timeouts: constant drops and restarts,
    // overlapping outages merged into one window
    Scenario s = desk::base(202, 8 * kSecondsPerHour);
    s.name = "drops";
    add_market(s, "azure", "azure-eastus", 240, 2.9, 8, 0.5);
    add_market(s, "gcp", "gcp-us-central1", 1200, 3.5, 8, 0.0);
    ramp(s, {{0, 12}});
    s.keepalive_interval = 300;
    s.pilot_restart_delay = 90;
    jobs(s, 100, 0, 200, 200, 2000);
    s.ce_outages = {{10000, 12000}, {11000, 14000}};
    out.push_back(s);
  }
  {
    // keepalive equal to one NAT timeout and one second under the other;
    // one outage shorter than the timeout, one exactly as long
    Scenario s = desk::base(303, 4 * kSecondsPerHour);
    s.name = "tie";
    add_market(s, "azure", "azure-eastus", 240, 2.9, 5, 1.0);
    add_market(s, "azure", "azure-westus2", 241, 2.9, 5, 1.0);
    ramp(s, {{0, 10}});
    s.keepalive_interval = 240;
    jobs(s, 50, 0, 150, 100, 700);
    s.ce_outages = {{3600, 3900}, {7200, 7440}};
    out.push_back(s);
  }
  {
    // one-second latencies, one-minute ticks, a per-region cap, touching
    // outages, commands on outage and tick boundaries
    Scenario s = desk::base(404, 2 * kSecondsPerHour);
    s.name = "fast";
    s.instance_types.push_back(InstanceType{"t4x2", 2, "NVIDIA T4", 8.1});
    add_market(s, "azure", "azure-eastus", 240, 2.9, 4, 4.0);
    add_market(s, "azure", "azure-eastus", 240, 3.1, 3, 4.0, "t4x2");
    add_market(s, "aws", "aws-us-east-1", 350, 3.9, 6, 8.0);
    ramp(s, {{0, 0}, {60, 6}, {600, 2}, {1200, 9}});
    s.allocation.per_region_cap = 5;
    s.provision_latency = 1;
    s.deprovision_latency = 1;
    s.pilot_restart_delay = 1;
    s.control_tick = 60;
    s.accrual_interval = 60;
    jobs(s, 40, 0, 17, 1, 300);
    s.ce_outages = {{300, 600}, {600, 900}, {2400, 2460}};
    s.degradations = {{1000, 2000, 0.5}, {1500, 2500, 2.0}};
    s.operator_commands = {command(CommandType::SetTarget, 660, 4),
                           command(CommandType::EmergencyStop, 900),
                           command(CommandType::Resume, 901, 8),
                           command(CommandType::SetGroupDesired, 2400, 2, "aws-us-east-1:t4"),
                           command(CommandType::ReleaseTarget, 3000)};
    out.push_back(s);
  }
  for (Scenario& s : out) validate(s);
  return out;
}

Scenario random_scenario(std::uint64_t seed) {
  RandomStream r(seed, "oracle-corpus");
  auto pick = [&](std::initializer_list<std::int64_t> xs) {
    return *(xs.begin() + r.uniform_int(0, static_cast<std::int64_t>(xs.size()) - 1));
  };

  Scenario s = desk::base(seed, r.uniform_int(2, 24) * kSecondsPerHour);
  s.name = "random-" + std::to_string(seed);
  s.instance_types.push_back(InstanceType{"t4x2", 2, "NVIDIA T4", 8.1});

  const char* providers[] = {"azure", "gcp", "aws"};
  const int nregions = static_cast<int>(r.uniform_int(1, 4));
  int room = 20;
  std::vector<std::string> groups;
  for (int i = 0; i < nregions && room > 0; ++i) {
    const std::string prov = providers[r.uniform_int(0, 2)];
    const std::string region = prov + "-r" + std::to_string(i);
    const Duration nat = pick({60, 120, 240, 300, 350, 1200});
    const int nm = static_cast<int>(r.uniform_int(1, 2));
    for (int m = 0; m < nm && room > 0; ++m) {
      const std::string type = m == 0 ? "t4" : "t4x2";
      const int cap = static_cast<int>(std::min<std::int64_t>(room, r.uniform_int(0, 8)));
      room -= cap;
      const double price = 2.0 + 0.1 * static_cast<double>(r.uniform_int(0, 20));
      const double rate = 0.5 * static_cast<double>(r.uniform_int(0, 16));
      add_market(s, prov, region, nat, price, cap, rate, type);
      groups.push_back(region + ":" + type);
    }
  }

  s.keepalive_interval = pick({30, 60, 239, 240, 300});
  s.provision_latency = r.uniform_int(1, 300);
  s.deprovision_latency = r.uniform_int(1, 120);
  s.pilot_restart_delay = r.uniform_int(1, 200);
  s.control_tick = pick({60, 120, 300, 600});
  s.accrual_interval = s.control_tick * r.uniform_int(1, 3);
  if (r.uniform_int(0, 1) == 1) s.allocation.mode = AllocationMode::CheapestFirst;
  s.allocation.preemption_penalty = 0.25 * static_cast<double>(r.uniform_int(0, 8));
  if (r.uniform_int(0, 3) == 0) s.allocation.per_region_cap = static_cast<int>(r.uniform_int(0, 10));
  s.ewma_half_life = r.uniform_int(600, 6 * 3600);

  const int nsteps = static_cast<int>(r.uniform_int(1, 4));
  SimTime at = 0;
  for (int i = 0; i < nsteps; ++i) {
    s.ramp.steps.push_back(RampStep{at, static_cast<int>(r.uniform_int(0, 30))});
    at += r.uniform_int(1, s.horizon / 2);
  }

  // small budgets so that thresholds and guards trip inside the horizon
  s.budget_total = Money::from_usd(static_cast<double>(r.uniform_int(1, 40)));
  s.thresholds = {0.8, 0.5, 0.2};
  if (r.uniform_int(0, 1) == 1) s.guards = {{0.5, static_cast<int>(r.uniform_int(0, 10))}, {0.2, 0}};

  const int nbatches = static_cast<int>(r.uniform_int(1, 3));
  for (int i = 0; i < nbatches; ++i) {
    const Duration lo = r.uniform_int(0, 1800);
    jobs(s, static_cast<int>(r.uniform_int(0, 60)), r.uniform_int(0, s.horizon / 2), r.uniform_int(0, 600), lo,
         lo + r.uniform_int(0, 5400), r.uniform_int(0, 9) == 0 ? "other" : "icecube");
  }

  const int noutages = static_cast<int>(r.uniform_int(0, 3));
  for (int i = 0; i < noutages; ++i) {
    const SimTime b = r.uniform_int(0, s.horizon - 1);
    s.ce_outages.push_back(OutageWindow{b, b + r.uniform_int(1, 3 * 3600)});
  }
  if (r.uniform_int(0, 2) == 0) {
    const SimTime b = r.uniform_int(0, s.horizon - 1);
    s.degradations.push_back(Degradation{b, b + r.uniform_int(1, 7200), 0.5 + 0.25 * static_cast<double>(r.uniform_int(0, 6))});
  }

  const int ncommands = static_cast<int>(r.uniform_int(0, 6));
  for (int i = 0; i < ncommands; ++i) {
    const SimTime t = r.uniform_int(0, s.horizon);
    switch (r.uniform_int(0, 5)) {
      case 0: s.operator_commands.push_back(command(CommandType::SetTarget, t, static_cast<int>(r.uniform_int(0, 25)))); break;
      case 1: s.operator_commands.push_back(command(CommandType::ReleaseTarget, t)); break;
      case 2:
        if (!groups.empty()) {
          s.operator_commands.push_back(command(CommandType::SetGroupDesired, t, static_cast<int>(r.uniform_int(0, 6)),
                                                groups[r.uniform_int(0, static_cast<std::int64_t>(groups.size()) - 1)]));
        }
        break;
      case 3:
        if (!groups.empty()) {
          s.operator_commands.push_back(command(CommandType::ReleaseGroup, t, 0,
                                                groups[r.uniform_int(0, static_cast<std::int64_t>(groups.size()) - 1)]));
        }
        break;
      case 4: s.operator_commands.push_back(command(CommandType::EmergencyStop, t)); break;
      case 5: s.operator_commands.push_back(command(CommandType::Resume, t, static_cast<int>(r.uniform_int(0, 25)))); break;
    }
  }
  validate(s);
  return s;
}

}  // namespace oracle
