#include "doctest.h"
#include "ktrees/stats.hpp"

using namespace ktrees;
using namespace ktrees::stats;
using data::SizeBucket;

namespace {

AccuracyTable table(const std::vector<double>& lr) {
  AccuracyTable t;
  t.rows = {*clf::spec_from_short_name("LR", 0), *clf::spec_from_short_name("kn_Ct_1", 0)};
  t.cells.resize(2);
  for (std::size_t i = 0; i < lr.size(); ++i) {
    t.tasks.push_back("t" + std::to_string(i));
    t.cells[0].push_back(lr[i]);
    t.cells[1].push_back(lr[i] + 0.001);
  }
  return t;
}

}  // namespace

TEST_CASE("presets") {
  const auto p = preset_scenarios();
  REQUIRE(p.size() == 5);
  CHECK(p[0].name == "all_100");
  CHECK_FALSE(p[0].lr_cap);
  CHECK_FALSE(p[0].buckets);
  CHECK(p[2].name == "medium_98");
  CHECK(*p[2].lr_cap == 0.98);
  CHECK(*p[2].buckets == std::set{SizeBucket::Medium});
  CHECK(*p[3].buckets == std::set{SizeBucket::Medium, SizeBucket::Large});
  CHECK(parse_scenario("large_98").buckets == std::set{SizeBucket::Large});
}

TEST_CASE("custom scenario syntax") {
  const auto s = parse_scenario("0.95/small+large");
  CHECK(*s.lr_cap == 0.95);
  CHECK(*s.buckets == std::set{SizeBucket::Small, SizeBucket::Large});
  CHECK_FALSE(parse_scenario("none/all").lr_cap);
  CHECK_FALSE(parse_scenario("none/all").buckets);
  CHECK_THROWS_AS(parse_scenario("nope"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("1.5/all"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("0.9/huge"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("0.9x/all"), ConfigError);
}

TEST_CASE("cap filter drops easy tasks") {
  const auto t = table({0.5, 0.99, 0.97, 0.981, 0.6, 0.7, 0.8, 0.98});
  const Scenario s{"c", 0.98, std::nullopt};
  const auto f = scenario_filter(t, s, {});
  CHECK(f.tasks == std::vector<std::string>{"t0", "t2", "t4", "t5", "t6", "t7"});
  CHECK(f.cells[1].size() == 6);
  const auto same = scenario_filter(t, Scenario{"id", 1.0, std::nullopt}, {});
  CHECK(same.tasks == t.tasks);
  CHECK(same.cells == t.cells);
}

TEST_CASE("too few tasks and missing baseline") {
  const auto t = table({0.5, 0.6, 0.7});
  const std::map<std::string, SizeBucket> buckets{
      {"t0", SizeBucket::Small}, {"t1", SizeBucket::Medium}, {"t2", SizeBucket::Large}};
  try {
    scenario_filter(t, parse_scenario("medium_98"), buckets);
    FAIL("expected ScenarioTooSmall");
  } catch (const ScenarioTooSmall& e) {
    CHECK(e.retained() == 1);
  }
  auto no_lr = table({0.5, 0.6, 0.7, 0.8, 0.9});
  no_lr.rows[0] = *clf::spec_from_short_name("MLP", 0);
  CHECK_THROWS_AS(scenario_filter(no_lr, parse_scenario("all_100"), {}), ConfigError);
}
