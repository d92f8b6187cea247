#include "cloudburst/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace cloudburst {

using nlohmann::json;
using nlohmann::ordered_json;

ScenarioError::ScenarioError(std::string field, const std::string& message)
    : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

std::string_view to_string(CommandType t) {
  switch (t) {
    case CommandType::SetTarget: return "set_target";
    case CommandType::ReleaseTarget: return "release_target";
    case CommandType::SetGroupDesired: return "set_group_desired";
    case CommandType::ReleaseGroup: return "release_group";
    case CommandType::EmergencyStop: return "emergency_stop";
    case CommandType::Resume: return "resume";
  }
  return "?";
}

namespace {

CommandType command_from_string(const std::string& s, const std::string& path) {
  for (auto t : {CommandType::SetTarget, CommandType::ReleaseTarget, CommandType::SetGroupDesired,
                 CommandType::ReleaseGroup, CommandType::EmergencyStop, CommandType::Resume}) {
    if (to_string(t) == s) return t;
  }
  throw ScenarioError(path, "unknown command '" + s + "'");
}

template <typename T>
T convert(const json& v, const std::string& path) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ScenarioError(path, "expected boolean");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ScenarioError(path, "expected string");
    return v.get<std::string>();
  } else if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ScenarioError(path, "expected number");
    return v.get<double>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) throw ScenarioError(path, "expected non-negative integer");
    return v.get<std::uint64_t>();
  } else {
    static_assert(std::is_integral_v<T>);
    if (!v.is_number_integer()) throw ScenarioError(path, "expected integer");
    return static_cast<T>(v.get<std::int64_t>());
  }
}

// Field reader that tracks which keys were consumed so that typos in a
// scenario are reported rather than silently ignored.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ScenarioError(path_.empty() ? "<root>" : path_, "expected object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T req(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw ScenarioError(at(key), "missing required field");
    return convert<T>(j_.at(key), at(key));
  }

  template <typename T>
  T opt(const std::string& key, T fallback) {
    seen_.insert(key);
    return has(key) ? convert<T>(j_.at(key), at(key)) : fallback;
  }

  template <typename T>
  std::optional<T> maybe(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return convert<T>(j_.at(key), at(key));
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &j_.at(key) : nullptr;
  }

  const json& array(const std::string& key, bool required) {
    static const json empty = json::array();
    seen_.insert(key);
    if (!has(key)) {
      if (required) throw ScenarioError(at(key), "missing required field");
      return empty;
    }
    const json& v = j_.at(key);
    if (!v.is_array()) throw ScenarioError(at(key), "expected array");
    return v;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ScenarioError(at(key), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string idx(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

}  // namespace

nlohmann::ordered_json OperatorCommand::to_json() const {
  ordered_json j;
  j["at_s"] = at;
  j["command"] = to_string(type);
  switch (type) {
    case CommandType::SetTarget: j["gpus"] = value; break;
    case CommandType::SetGroupDesired:
      j["group"] = group;
      j["n"] = value;
      break;
    case CommandType::ReleaseGroup: j["group"] = group; break;
    case CommandType::EmergencyStop: j["reason"] = reason; break;
    case CommandType::Resume: j["target_gpus"] = value; break;
    case CommandType::ReleaseTarget: break;
  }
  return j;
}

const InstanceType& Scenario::instance_type(const std::string& id) const {
  for (const auto& t : instance_types) {
    if (t.id == id) return t;
  }
  throw ScenarioError("instance_types", "unknown instance type '" + id + "'");
}

const Region& Scenario::region(const std::string& id) const {
  for (const auto& r : regions) {
    if (r.id == id) return r;
  }
  throw ScenarioError("providers", "unknown region '" + id + "'");
}

Scenario parse_scenario(const json& doc) {
  Scenario s;
  Obj root(doc, "");
  s.name = root.opt<std::string>("name", s.name);
  s.seed = root.maybe<std::uint64_t>("seed");
  s.horizon = root.req<SimTime>("horizon_s");
  s.fp32_tflops_per_gpu = root.opt<double>("fp32_tflops_per_gpu", s.fp32_tflops_per_gpu);

  const json& types = root.array("instance_types", true);
  for (std::size_t i = 0; i < types.size(); ++i) {
    Obj o(types[i], idx("instance_types", i));
    InstanceType t;
    t.id = o.req<std::string>("id");
    t.gpus_per_instance = o.opt<int>("gpus_per_instance", 1);
    t.gpu_model = o.opt<std::string>("gpu_model", t.gpu_model);
    t.fp32_tflops_per_gpu = o.opt<double>("fp32_tflops_per_gpu", s.fp32_tflops_per_gpu);
    o.finish();
    s.instance_types.push_back(std::move(t));
  }

  const json& providers = root.array("providers", true);
  for (std::size_t p = 0; p < providers.size(); ++p) {
    const std::string ppath = idx("providers", p);
    Obj po(providers[p], ppath);
    Provider prov;
    prov.id = po.req<std::string>("id");
    prov.name = po.opt<std::string>("name", prov.id);
    const json& regions = po.array("regions", true);
    for (std::size_t r = 0; r < regions.size(); ++r) {
      const std::string rpath = ppath + "." + idx("regions", r);
      Obj ro(regions[r], rpath);
      Region reg;
      reg.id = ro.req<std::string>("id");
      reg.provider = prov.id;
      reg.nat_idle_timeout = ro.req<Duration>("nat_idle_timeout_s");
      const json& markets = ro.array("markets", true);
      for (std::size_t m = 0; m < markets.size(); ++m) {
        Obj mo(markets[m], rpath + "." + idx("markets", m));
        SpotMarket mk;
        mk.instance_type = mo.req<std::string>("instance_type");
        mk.spot_price_per_gpu_day = mo.req<double>("spot_price_per_gpu_day");
        mk.capacity = mo.req<int>("capacity");
        mk.preemption_rate = mo.opt<double>("preemption_rate_per_day", 0.0);
        mo.finish();
        reg.markets.push_back(std::move(mk));
      }
      ro.finish();
      prov.regions.push_back(reg.id);
      s.regions.push_back(std::move(reg));
    }
    po.finish();
    s.providers.push_back(std::move(prov));
  }

  if (const json* lat = root.sub("latencies")) {
    Obj o(*lat, "latencies");
    s.provision_latency = o.opt<Duration>("provision_s", s.provision_latency);
    s.deprovision_latency = o.opt<Duration>("deprovision_s", s.deprovision_latency);
    s.pilot_restart_delay = o.opt<Duration>("pilot_restart_s", s.pilot_restart_delay);
    o.finish();
  }

  if (const json* ov = root.sub("overlay")) {
    Obj o(*ov, "overlay");
    s.keepalive_interval = o.opt<Duration>("keepalive_interval_s", s.keepalive_interval);
    s.log_keepalives = o.opt<bool>("log_keepalives", s.log_keepalives);
    if (o.has("accepted_communities")) {
      const json& comms = o.array("accepted_communities", true);
      s.accepted_communities.clear();
      for (std::size_t i = 0; i < comms.size(); ++i) {
        s.accepted_communities.insert(convert<std::string>(comms[i], idx("overlay.accepted_communities", i)));
      }
    } else {
      o.sub("accepted_communities");
    }
    o.finish();
  }

  {
    const json* ramp = root.sub("ramp");
    if (!ramp) throw ScenarioError("ramp", "missing required field");
    Obj o(*ramp, "ramp");
    const json& steps = o.array("steps", true);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      Obj so(steps[i], idx("ramp.steps", i));
      RampStep st;
      st.activate_at = so.req<SimTime>("at_s");
      st.target_gpus = so.req<int>("target_gpus");
      so.finish();
      s.ramp.steps.push_back(st);
    }
    s.ramp.hold_validation = o.opt<Duration>("hold_validation_s", 0);
    o.finish();
  }

  if (const json* al = root.sub("allocation")) {
    Obj o(*al, "allocation");
    const std::string mode = o.opt<std::string>("mode", "weighted");
    if (mode == "weighted") {
      s.allocation.mode = AllocationMode::Weighted;
    } else if (mode == "cheapest_first") {
      s.allocation.mode = AllocationMode::CheapestFirst;
    } else {
      throw ScenarioError("allocation.mode", "expected 'weighted' or 'cheapest_first'");
    }
    s.allocation.preemption_penalty = o.opt<double>("preemption_penalty", 0.0);
    s.allocation.per_region_cap = o.maybe<int>("per_region_cap");
    s.ewma_half_life = o.opt<Duration>("ewma_half_life_s", s.ewma_half_life);
    o.finish();
  }

  if (const json* c = root.sub("control")) {
    Obj o(*c, "control");
    s.control_tick = o.opt<Duration>("tick_s", s.control_tick);
    s.accrual_interval = o.opt<Duration>("accrual_interval_s", s.accrual_interval);
    o.finish();
  }

  {
    const json* b = root.sub("budget");
    if (!b) throw ScenarioError("budget", "missing required field");
    Obj o(*b, "budget");
    s.budget_total = Money::from_usd(o.req<double>("total_usd"));
    if (o.has("thresholds")) {
      const json& th = o.array("thresholds", true);
      s.thresholds.clear();
      for (std::size_t i = 0; i < th.size(); ++i) s.thresholds.push_back(convert<double>(th[i], idx("budget.thresholds", i)));
    } else {
      o.sub("thresholds");
    }
    const json& guards = o.array("guards", false);
    for (std::size_t i = 0; i < guards.size(); ++i) {
      Obj go(guards[i], idx("budget.guards", i));
      BudgetGuard g;
      g.fraction = go.req<double>("fraction");
      g.max_gpus = go.req<int>("max_gpus");
      go.finish();
      s.guards.push_back(g);
    }
    s.spend_rate_window = o.opt<Duration>("spend_rate_window_s", s.spend_rate_window);
    o.finish();
  }

  const json& workload = root.array("workload", false);
  for (std::size_t i = 0; i < workload.size(); ++i) {
    const std::string wpath = idx("workload", i);
    Obj o(workload[i], wpath);
    JobBatch jb;
    jb.community = o.opt<std::string>("community", jb.community);
    jb.count = o.req<int>("count");
    jb.start = o.opt<SimTime>("start_s", 0);
    jb.interval = o.opt<Duration>("interval_s", 0);
    const json* gs = o.sub("gpu_seconds");
    if (!gs) throw ScenarioError(o.at("gpu_seconds"), "missing required field");
    if (gs->is_number_integer()) {
      jb.min_gpu_seconds = jb.max_gpu_seconds = gs->get<Duration>();
    } else {
      Obj go(*gs, o.at("gpu_seconds"));
      jb.min_gpu_seconds = go.req<Duration>("min");
      jb.max_gpu_seconds = go.req<Duration>("max");
      go.finish();
    }
    o.finish();
    s.workload.push_back(jb);
  }

  if (const json* d = root.sub("disturbances")) {
    Obj o(*d, "disturbances");
    const json& outages = o.array("ce_outages", false);
    for (std::size_t i = 0; i < outages.size(); ++i) {
      Obj oo(outages[i], idx("disturbances.ce_outages", i));
      OutageWindow w;
      w.begin = oo.req<SimTime>("begin_s");
      w.end = oo.req<SimTime>("end_s");
      oo.finish();
      s.ce_outages.push_back(w);
    }
    const json& degr = o.array("degradations", false);
    for (std::size_t i = 0; i < degr.size(); ++i) {
      Obj dd(degr[i], idx("disturbances.degradations", i));
      Degradation g;
      g.begin = dd.req<SimTime>("begin_s");
      g.end = dd.req<SimTime>("end_s");
      g.factor = dd.req<double>("factor");
      dd.finish();
      s.degradations.push_back(g);
    }
    o.finish();
  }

  const json& cmds = root.array("operator_commands", false);
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    const std::string cpath = idx("operator_commands", i);
    Obj o(cmds[i], cpath);
    OperatorCommand c;
    c.at = o.req<SimTime>("at_s");
    c.type = command_from_string(o.req<std::string>("command"), o.at("command"));
    switch (c.type) {
      case CommandType::SetTarget: c.value = o.req<int>("gpus"); break;
      case CommandType::SetGroupDesired:
        c.group = o.req<std::string>("group");
        c.value = o.req<int>("n");
        break;
      case CommandType::ReleaseGroup: c.group = o.req<std::string>("group"); break;
      case CommandType::EmergencyStop: c.reason = o.opt<std::string>("reason", ""); break;
      case CommandType::Resume: c.value = o.req<int>("target_gpus"); break;
      case CommandType::ReleaseTarget: break;
    }
    o.finish();
    s.operator_commands.push_back(std::move(c));
  }

  if (const json* b = root.sub("baseline")) {
    Obj o(*b, "baseline");
    s.baseline_onprem_gpu_hours = o.maybe<double>("onprem_gpu_hours");
    o.finish();
  }

  root.finish();
  return s;
}

Scenario parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", std::string("parse error: ") + e.what());
  }
  return parse_scenario(doc);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("", "cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Scenario s = parse_scenario_text(buf.str());
  validate(s);
  return s;
}

void validate(const Scenario& s) {
  auto fail = [](const std::string& field, const std::string& msg) { throw ScenarioError(field, msg); };

  if (!s.seed) fail("seed", "a seed is required; runs never draw wall-clock entropy");
  if (s.horizon <= 0) fail("horizon_s", "must be > 0");
  if (!(s.fp32_tflops_per_gpu > 0.0)) fail("fp32_tflops_per_gpu", "must be > 0");

  if (s.instance_types.empty()) fail("instance_types", "at least one instance type is required");
  std::set<std::string> type_ids;
  for (std::size_t i = 0; i < s.instance_types.size(); ++i) {
    const auto& t = s.instance_types[i];
    const std::string path = idx("instance_types", i);
    if (t.id.empty()) fail(path + ".id", "must not be empty");
    if (!type_ids.insert(t.id).second) fail(path + ".id", "duplicate instance type '" + t.id + "'");
    if (t.gpus_per_instance < 1) fail(path + ".gpus_per_instance", "must be >= 1");
    if (!(t.fp32_tflops_per_gpu > 0.0)) fail(path + ".fp32_tflops_per_gpu", "must be > 0");
  }

  if (s.providers.empty()) fail("providers", "at least one provider is required");
  std::set<std::string> provider_ids;
  std::set<std::string> region_ids;
  std::size_t flat = 0;
  for (std::size_t p = 0; p < s.providers.size(); ++p) {
    const auto& prov = s.providers[p];
    const std::string ppath = idx("providers", p);
    if (prov.id.empty()) fail(ppath + ".id", "must not be empty");
    if (!provider_ids.insert(prov.id).second) fail(ppath + ".id", "duplicate provider '" + prov.id + "'");
    if (prov.regions.empty()) fail(ppath + ".regions", "at least one region per provider");
    for (std::size_t r = 0; r < prov.regions.size(); ++r, ++flat) {
      const Region& reg = s.regions.at(flat);
      const std::string rpath = ppath + "." + idx("regions", r);
      if (reg.id.empty()) fail(rpath + ".id", "must not be empty");
      if (!region_ids.insert(reg.id).second) fail(rpath + ".id", "duplicate region '" + reg.id + "'");
      if (reg.nat_idle_timeout <= 0) fail(rpath + ".nat_idle_timeout_s", "must be > 0");
      if (reg.markets.empty()) fail(rpath + ".markets", "at least one market per region");
      std::set<std::string> market_types;
      for (std::size_t m = 0; m < reg.markets.size(); ++m) {
        const auto& mk = reg.markets[m];
        const std::string mpath = rpath + "." + idx("markets", m);
        if (!type_ids.contains(mk.instance_type)) {
          fail(mpath + ".instance_type", "unknown instance type '" + mk.instance_type + "'");
        }
        if (!market_types.insert(mk.instance_type).second) fail(mpath + ".instance_type", "duplicate market");
        if (!(mk.spot_price_per_gpu_day > 0.0)) fail(mpath + ".spot_price_per_gpu_day", "must be > 0");
        if (mk.capacity < 0) fail(mpath + ".capacity", "must be >= 0");
        if (!(mk.preemption_rate >= 0.0)) fail(mpath + ".preemption_rate_per_day", "must be >= 0");
      }
    }
  }

  if (s.provision_latency < 1) fail("latencies.provision_s", "must be >= 1");
  if (s.deprovision_latency < 1) fail("latencies.deprovision_s", "must be >= 1");
  if (s.pilot_restart_delay < 1) fail("latencies.pilot_restart_s", "must be >= 1");
  if (s.keepalive_interval <= 0) fail("overlay.keepalive_interval_s", "must be > 0");

  try {
    s.ramp.validate();
  } catch (const std::invalid_argument& e) {
    fail("ramp.steps", e.what());
  }
  for (std::size_t i = 0; i < s.ramp.steps.size(); ++i) {
    if (s.ramp.steps[i].activate_at < 0) fail(idx("ramp.steps", i) + ".at_s", "must be >= 0");
  }

  if (!(s.allocation.preemption_penalty >= 0.0)) fail("allocation.preemption_penalty", "must be >= 0");
  if (s.allocation.per_region_cap && *s.allocation.per_region_cap < 0) fail("allocation.per_region_cap", "must be >= 0");
  if (s.ewma_half_life <= 0) fail("allocation.ewma_half_life_s", "must be > 0");

  if (s.control_tick <= 0 || kSecondsPerHour % s.control_tick != 0) {
    fail("control.tick_s", "must be a positive divisor of 3600");
  }
  if (s.accrual_interval <= 0 || s.accrual_interval % s.control_tick != 0) {
    fail("control.accrual_interval_s", "must be a positive multiple of control.tick_s");
  }

  if (s.budget_total.micros() <= 0) fail("budget.total_usd", "must be > 0");
  try {
    validate_thresholds(s.thresholds);
  } catch (const std::invalid_argument& e) {
    fail("budget.thresholds", e.what());
  }
  try {
    validate_guards(s.guards);
  } catch (const std::invalid_argument& e) {
    fail("budget.guards", e.what());
  }
  if (s.spend_rate_window <= 0) fail("budget.spend_rate_window_s", "must be > 0");

  for (std::size_t i = 0; i < s.workload.size(); ++i) {
    const auto& jb = s.workload[i];
    const std::string path = idx("workload", i);
    if (jb.community.empty()) fail(path + ".community", "must not be empty");
    if (jb.count < 0) fail(path + ".count", "must be >= 0");
    if (jb.start < 0) fail(path + ".start_s", "must be >= 0");
    if (jb.interval < 0) fail(path + ".interval_s", "must be >= 0");
    if (jb.min_gpu_seconds < 0) fail(path + ".gpu_seconds.min", "must be >= 0");
    if (jb.max_gpu_seconds < jb.min_gpu_seconds) fail(path + ".gpu_seconds.max", "must be >= min");
  }

  for (std::size_t i = 0; i < s.ce_outages.size(); ++i) {
    const auto& w = s.ce_outages[i];
    const std::string path = idx("disturbances.ce_outages", i);
    if (w.begin < 0) fail(path + ".begin_s", "must be >= 0");
    if (w.end <= w.begin) fail(path + ".end_s", "must be > begin_s");
  }
  for (std::size_t i = 0; i < s.degradations.size(); ++i) {
    const auto& d = s.degradations[i];
    const std::string path = idx("disturbances.degradations", i);
    if (d.begin < 0) fail(path + ".begin_s", "must be >= 0");
    if (d.end <= d.begin) fail(path + ".end_s", "must be > begin_s");
    if (!(d.factor > 0.0)) fail(path + ".factor", "must be > 0");
  }

  std::set<std::string> groups;
  for (const auto& r : s.regions) {
    for (const auto& m : r.markets) groups.insert(r.id + ":" + m.instance_type);
  }
  for (std::size_t i = 0; i < s.operator_commands.size(); ++i) {
    const auto& c = s.operator_commands[i];
    const std::string path = idx("operator_commands", i);
    if (c.at < 0) fail(path + ".at_s", "must be >= 0");
    if (c.value < 0) fail(path, "value must be >= 0");
    if ((c.type == CommandType::SetGroupDesired || c.type == CommandType::ReleaseGroup) && !groups.contains(c.group)) {
      fail(path + ".group", "unknown group '" + c.group + "'");
    }
  }
}

std::vector<OutageWindow> merge_outages(std::vector<OutageWindow> windows) {
  std::sort(windows.begin(), windows.end(),
            [](const OutageWindow& a, const OutageWindow& b) { return a.begin < b.begin; });
  std::vector<OutageWindow> merged;
  for (const auto& w : windows) {
    if (!merged.empty() && w.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, w.end);
    } else {
      merged.push_back(w);
    }
  }
  return merged;
}

nlohmann::ordered_json Scenario::to_json() const {
  ordered_json j;
  j["name"] = name;
  if (seed) j["seed"] = *seed;
  j["horizon_s"] = horizon;
  j["fp32_tflops_per_gpu"] = fp32_tflops_per_gpu;
  j["instance_types"] = ordered_json::array();
  for (const auto& t : instance_types) {
    j["instance_types"].push_back({{"id", t.id},
                                   {"gpus_per_instance", t.gpus_per_instance},
                                   {"gpu_model", t.gpu_model},
                                   {"fp32_tflops_per_gpu", t.fp32_tflops_per_gpu}});
  }
  j["providers"] = ordered_json::array();
  for (const auto& p : providers) {
    ordered_json pj;
    pj["id"] = p.id;
    pj["name"] = p.name;
    pj["regions"] = ordered_json::array();
    for (const auto& rid : p.regions) {
      const Region& r = region(rid);
      ordered_json rj;
      rj["id"] = r.id;
      rj["nat_idle_timeout_s"] = r.nat_idle_timeout;
      rj["markets"] = ordered_json::array();
      for (const auto& m : r.markets) {
        rj["markets"].push_back({{"instance_type", m.instance_type},
                                 {"spot_price_per_gpu_day", m.spot_price_per_gpu_day},
                                 {"capacity", m.capacity},
                                 {"preemption_rate_per_day", m.preemption_rate}});
      }
      pj["regions"].push_back(std::move(rj));
    }
    j["providers"].push_back(std::move(pj));
  }
  j["latencies"] = {{"provision_s", provision_latency},
                    {"deprovision_s", deprovision_latency},
                    {"pilot_restart_s", pilot_restart_delay}};
  j["overlay"] = {{"keepalive_interval_s", keepalive_interval},
                  {"log_keepalives", log_keepalives},
                  {"accepted_communities", accepted_communities}};
  ordered_json ramp;
  ramp["steps"] = ordered_json::array();
  for (const auto& st : this->ramp.steps) ramp["steps"].push_back({{"at_s", st.activate_at}, {"target_gpus", st.target_gpus}});
  ramp["hold_validation_s"] = this->ramp.hold_validation;
  j["ramp"] = std::move(ramp);
  ordered_json alloc;
  alloc["mode"] = allocation.mode == AllocationMode::Weighted ? "weighted" : "cheapest_first";
  alloc["preemption_penalty"] = allocation.preemption_penalty;
  alloc["per_region_cap"] = allocation.per_region_cap ? ordered_json(*allocation.per_region_cap) : ordered_json(nullptr);
  alloc["ewma_half_life_s"] = ewma_half_life;
  j["allocation"] = std::move(alloc);
  j["control"] = {{"tick_s", control_tick}, {"accrual_interval_s", accrual_interval}};
  ordered_json budget;
  budget["total_usd"] = budget_total.usd();
  budget["thresholds"] = thresholds;
  budget["guards"] = ordered_json::array();
  for (const auto& g : guards) budget["guards"].push_back({{"fraction", g.fraction}, {"max_gpus", g.max_gpus}});
  budget["spend_rate_window_s"] = spend_rate_window;
  j["budget"] = std::move(budget);
  j["workload"] = ordered_json::array();
  for (const auto& jb : workload) {
    j["workload"].push_back({{"community", jb.community},
                             {"count", jb.count},
                             {"start_s", jb.start},
                             {"interval_s", jb.interval},
                             {"gpu_seconds", {{"min", jb.min_gpu_seconds}, {"max", jb.max_gpu_seconds}}}});
  }
  ordered_json dist;
  dist["ce_outages"] = ordered_json::array();
  for (const auto& w : ce_outages) dist["ce_outages"].push_back({{"begin_s", w.begin}, {"end_s", w.end}});
  dist["degradations"] = ordered_json::array();
  for (const auto& d : degradations) {
    dist["degradations"].push_back({{"begin_s", d.begin}, {"end_s", d.end}, {"factor", d.factor}});
  }
  j["disturbances"] = std::move(dist);
  j["operator_commands"] = ordered_json::array();
  for (const auto& c : operator_commands) j["operator_commands"].push_back(c.to_json());
  if (baseline_onprem_gpu_hours) j["baseline"] = {{"onprem_gpu_hours", *baseline_onprem_gpu_hours}};
  return j;
}

}  // namespace cloudburst
