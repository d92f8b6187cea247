#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cloudburst/provision.hpp"

using namespace cloudburst;

namespace {

ScaleGroup group(int desired, int capacity) {
  ScaleGroup g;
  g.id = "azure-eastus:t4";
  g.market = SpotMarket{"t4", 2.9, capacity, 0.0};
  g.desired_count = desired;
  return g;
}

std::vector<Instance> fleet(int n, SimTime first_start = 0) {
  std::vector<Instance> out;
  for (int i = 0; i < n; ++i) {
    Instance inst;
    inst.id = InstanceId{static_cast<std::uint32_t>(i)};
    inst.started_at = first_start + 10 * i;
    inst.state = InstanceState::Running;
    inst.running_at = inst.started_at + 120;
    out.push_back(inst);
  }
  return out;
}

std::vector<const Instance*> ptrs(const std::vector<Instance>& v) {
  std::vector<const Instance*> out;
  for (const Instance& i : v) out.push_back(&i);
  return out;
}

}  // namespace

TEST_CASE("set_desired") {
  ScaleGroup g = group(400, 3000);
  CHECK(set_desired(g, 900));
  CHECK(g.desired_count == 900);

  ScaleGroup same = group(50, 100);
  CHECK_FALSE(set_desired(same, 50));
  CHECK(same.desired_count == 50);

  ScaleGroup big = group(2000, 3000);
  CHECK(set_desired(big, 0));
  CHECK(big.desired_count == 0);

  CHECK_THROWS_AS(set_desired(g, -1), std::invalid_argument);
}

TEST_CASE("reconcile") {
  SUBCASE("simple top-up") {
    auto f = fleet(3);
    const ReconcilePlan p = reconcile(group(5, 10), ptrs(f));
    CHECK(p.provision == 2);
    CHECK(p.shortfall == 0);
    CHECK(p.deprovision.empty());
  }
  SUBCASE("capacity bound records a shortfall") {
    auto f = fleet(3);
    const ReconcilePlan p = reconcile(group(5, 4), ptrs(f));
    CHECK(p.provision == 1);
    CHECK(p.shortfall == 1);
  }
  SUBCASE("desired 0 de-provisions everything, youngest first") {
    auto f = fleet(3);
    const ReconcilePlan p = reconcile(group(0, 10), ptrs(f));
    CHECK(p.provision == 0);
    REQUIRE(p.deprovision.size() == 3);
    CHECK(raw(p.deprovision[0]) == 2);
    CHECK(raw(p.deprovision[1]) == 1);
    CHECK(raw(p.deprovision[2]) == 0);
  }
  SUBCASE("instances being de-provisioned still hold capacity") {
    auto f = fleet(4);
    f[3].terminate_at = 500;
    const ReconcilePlan p = reconcile(group(5, 4), ptrs(f));
    CHECK(p.provision == 0);
    CHECK(p.shortfall == 2);
  }
  SUBCASE("converged group is a no-op") {
    auto f = fleet(5);
    CHECK(reconcile(group(5, 5), ptrs(f)).empty());
  }
}

TEST_CASE("instance state machine") {
  Instance i;
  i.started_at = 10;
  CHECK(i.live());
  i.transition(InstanceState::Running, 130);
  CHECK(i.running_at == 130);
  CHECK_THROWS_AS(i.transition(InstanceState::Provisioning, 140), std::logic_error);
  i.transition(InstanceState::Preempted, 200);
  CHECK(i.ended_at == 200);
  CHECK_FALSE(i.live());
  CHECK_THROWS_AS(i.transition(InstanceState::Deprovisioned, 210), std::logic_error);

  Instance cancelled;
  cancelled.transition(InstanceState::Deprovisioned, 30);
  CHECK(cancelled.state == InstanceState::Deprovisioned);
}

TEST_CASE("preemption_probability") {
  CHECK(preemption_probability(0.0, 86400) == 0.0);
  CHECK(preemption_probability(2.0, 0) == 0.0);
  CHECK(preemption_probability(2.0, 86400) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-15));
  CHECK(preemption_probability(1.0, 43200) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-15));
}

TEST_CASE("sample_preemptions") {
  SUBCASE("zero rate never preempts and draws nothing") {
    std::vector<InstanceId> ids(100);
    for (std::uint32_t i = 0; i < 100; ++i) ids[i] = InstanceId{i};
    RandomStream a(1, "x"), b(1, "x");
    CHECK(sample_preemptions(ids, 0.0, 86400, a).empty());
    CHECK(a.uniform() == b.uniform());
  }
  SUBCASE("10000 instances at 2/day over a day: mean within 3 sigma of 10000(1-e^-2)") {
    std::vector<InstanceId> ids(10000);
    for (std::uint32_t i = 0; i < 10000; ++i) ids[i] = InstanceId{i};
    const double p = 1.0 - std::exp(-2.0);
    const double mean = 10000 * p;                          // 8646.6
    const double sigma = std::sqrt(10000 * p * (1.0 - p));  // 34.2
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      RandomStream rng(seed, "provision/mc");
      const double n = static_cast<double>(sample_preemptions(ids, 2.0, 86400, rng).size());
      CAPTURE(seed);
      CHECK(std::abs(n - mean) <= 3 * sigma);
    }
  }
  SUBCASE("same seed, same state: identical set") {
    std::vector<InstanceId> ids(500);
    for (std::uint32_t i = 0; i < 500; ++i) ids[i] = InstanceId{i};
    RandomStream a(42, "provision/g"), b(42, "provision/g");
    CHECK(sample_preemptions(ids, 1.5, 3600, a) == sample_preemptions(ids, 1.5, 3600, b));
  }
  SUBCASE("dt must be positive") {
    RandomStream r(1, "x");
    std::vector<InstanceId> ids{InstanceId{0}};
    CHECK_THROWS_AS(sample_preemptions(ids, 1.0, 0, r), std::invalid_argument);
  }
}

TEST_CASE("zero_all") {
  std::vector<ScaleGroup> gs{group(500, 1000), group(700, 1000), group(800, 1000)};
  CHECK(zero_all(gs) == 3);
  for (const ScaleGroup& g : gs) CHECK(g.desired_count == 0);
  CHECK(zero_all(gs) == 0);
}
