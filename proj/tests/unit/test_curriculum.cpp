#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "levelup/curriculum.hpp"
#include "levelup/errors.hpp"
#include "levelup/io.hpp"

using namespace levelup;

namespace {

TransitionalSets sets_from(const std::map<int, std::vector<std::string>>& by_level) {
  TransitionalSets sets;
  sets.by_level = by_level;
  sets.series_id = "s";
  sets.pool_tag = "ref";
  int max_tau = 0;
  for (const auto& [tau, ids] : by_level) max_tau = std::max(max_tau, tau);
  sets.num_levels = max_tau;
  return sets;
}

std::vector<Problem> fake_pool(const std::vector<int>& chain_lengths) {
  std::vector<Problem> pool;
  for (std::size_t i = 0; i < chain_lengths.size(); ++i) {
    Problem p;
    p.id = "p" + std::to_string(i);
    p.features.chain_length = chain_lengths[i];
    p.features.encoded_length = 1 + 2 * chain_lengths[i];
    pool.push_back(std::move(p));
  }
  return pool;
}

std::multiset<std::string> batch_multiset(
    const std::vector<std::pair<int, std::vector<std::string>>>& batches) {
  std::multiset<std::string> flat;
  for (const auto& [stage, ids] : batches)
    for (const auto& id : ids) flat.insert(id);
  return flat;
}

OrderKind kind_of(OrderCategory category) { return OrderKind{category, {}, {}}; }

}  // namespace

TEST_SUITE_BEGIN("curriculum");

TEST_CASE("identity grouping when stages equal levels") {
  const auto sets = sets_from({{1, {"a", "b"}}, {2, {"c"}}, {3, {"d", "e", "f"}}});
  const auto schedule = build_transitional_schedule(
      sets, kind_of(OrderCategory::level_up), 3, 9, 2, 1);
  REQUIRE(schedule.stages.size() == 3);
  CHECK(schedule.stages[0].problem_ids == std::vector<std::string>{"a", "b"});
  CHECK(schedule.stages[1].problem_ids == std::vector<std::string>{"c"});
  CHECK(schedule.stages[2].problem_ids == std::vector<std::string>{"d", "e", "f"});

  const auto down = build_transitional_schedule(
      sets, kind_of(OrderCategory::level_down), 3, 9, 2, 1);
  CHECK(down.stages[0].problem_ids == std::vector<std::string>{"d", "e", "f"});
  CHECK(down.stages[2].problem_ids == std::vector<std::string>{"a", "b"});
  for (int i = 0; i < 3; ++i) CHECK(down.stages[i].stage_index == i);
}

TEST_CASE("balanced merge of equal levels") {
  std::map<int, std::vector<std::string>> by_level;
  for (int tau = 1; tau <= 4; ++tau) {
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i)
      ids.push_back("t" + std::to_string(tau) + "-" + std::to_string(i));
    by_level[tau] = ids;
  }
  const auto schedule = build_transitional_schedule(
      sets_from(by_level), kind_of(OrderCategory::level_up), 2, 10, 2, 1);
  REQUIRE(schedule.stages.size() == 2);
  CHECK(schedule.stages[0].problem_ids.size() == 20);  // levels 1+2
  CHECK(schedule.stages[1].problem_ids.size() == 20);  // levels 3+4
  CHECK(schedule.stages[0].source == "levels:1-2");
  CHECK(schedule.stages[1].source == "levels:3-4");
}

TEST_CASE("partition_balanced quota rule") {
  CHECK(partition_balanced({10, 10, 10, 10}, 2) ==
        std::vector<std::pair<int, int>>{{0, 2}, {2, 4}});
  CHECK(partition_balanced({2, 1, 3}, 3) ==
        std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}});
  CHECK(partition_balanced({5, 5, 90}, 2) ==
        std::vector<std::pair<int, int>>{{0, 2}, {2, 3}});
  CHECK(partition_balanced({90, 5, 5}, 2) ==
        std::vector<std::pair<int, int>>{{0, 1}, {1, 3}});
  CHECK_THROWS_AS(partition_balanced({1, 2}, 3), ValidationError);
}

TEST_CASE("empty levels are skipped; all-empty is an error") {
  const auto sets = sets_from({{1, {}}, {2, {"x"}}, {3, {}}, {4, {"y", "z"}}});
  const auto schedule = build_transitional_schedule(
      sets, kind_of(OrderCategory::level_up), 2, 4, 1, 1);
  REQUIRE(schedule.stages.size() == 2);
  CHECK(schedule.stages[0].problem_ids == std::vector<std::string>{"x"});
  CHECK(schedule.stages[1].problem_ids == std::vector<std::string>{"y", "z"});

  CHECK_THROWS_AS(build_transitional_schedule(sets_from({{1, {}}}),
                                              kind_of(OrderCategory::level_up),
                                              2, 4, 1, 1),
                  ValidationError);
}

TEST_CASE("level_up and level_down are stage-wise reversals") {
  const auto sets = sets_from(
      {{1, {"a", "b", "c"}}, {2, {"d"}}, {3, {"e", "f"}}, {5, {"g", "h", "i", "j"}}});
  // total steps 11 leaves a remainder, which must follow the groups
  const auto up = build_transitional_schedule(
      sets, kind_of(OrderCategory::level_up), 3, 11, 2, 9);
  const auto down = build_transitional_schedule(
      sets, kind_of(OrderCategory::level_down), 3, 11, 2, 9);
  REQUIRE(up.stages.size() == down.stages.size());
  const std::size_t n = up.stages.size();
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(up.stages[i].problem_ids == down.stages[n - 1 - i].problem_ids);
    CHECK(up.stages[i].steps == down.stages[n - 1 - i].steps);
    CHECK(up.stages[i].source == down.stages[n - 1 - i].source);
  }
  // identical batch multisets, reversed at stage granularity
  const auto up_batches = schedule_batches(up);
  const auto down_batches = schedule_batches(down);
  CHECK(batch_multiset(up_batches) == batch_multiset(down_batches));

  // per-stage batch sequences agree because streams key on the stage source
  std::map<std::string, std::vector<std::vector<std::string>>> up_by_source,
      down_by_source;
  for (const auto& [stage, ids] : up_batches)
    up_by_source[up.stages[static_cast<std::size_t>(stage)].source].push_back(ids);
  for (const auto& [stage, ids] : down_batches)
    down_by_source[down.stages[static_cast<std::size_t>(stage)].source].push_back(ids);
  CHECK(up_by_source == down_by_source);
}

TEST_CASE("stage steps differ by at most one") {
  const auto sets = sets_from({{1, {"a"}}, {2, {"b"}}, {3, {"c"}}, {4, {"d"}}});
  const auto schedule = build_transitional_schedule(
      sets, kind_of(OrderCategory::level_up), 4, 10, 3, 1);
  long lo = schedule.total_steps, hi = 0, sum = 0;
  for (const auto& stage : schedule.stages) {
    lo = std::min(lo, stage.steps);
    hi = std::max(hi, stage.steps);
    sum += stage.steps;
  }
  CHECK(hi - lo <= 1);
  CHECK(sum == 10);
}

TEST_CASE("shuffled pools every transitional problem into one stage") {
  const auto sets = sets_from({{1, {"a", "b"}}, {3, {"c"}}});
  const auto schedule = build_transitional_schedule(
      sets, kind_of(OrderCategory::shuffled), 3, 6, 2, 5);
  REQUIRE(schedule.stages.size() == 1);
  CHECK(schedule.stages[0].problem_ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(schedule.stages[0].steps == 6);
}

TEST_CASE("no leakage: schedules only contain transitional ids") {
  const auto sets = sets_from({{1, {"a", "b"}}, {2, {"c", "d", "e"}}});
  std::set<std::string> allowed;
  for (const auto& [tau, ids] : sets.by_level) allowed.insert(ids.begin(), ids.end());
  for (auto category : {OrderCategory::level_up, OrderCategory::level_down,
                        OrderCategory::shuffled}) {
    const auto schedule =
        build_transitional_schedule(sets, kind_of(category), 2, 8, 3, 17);
    for (const auto& [stage, ids] : schedule_batches(schedule))
      for (const auto& id : ids) CHECK(allowed.count(id) == 1);
  }
}

TEST_CASE("iid schedules draw uniformly") {
  const auto pool = fake_pool(std::vector<int>(10, 1));
  const auto schedule = build_iid_schedule(pool, 10, 4, 3);
  REQUIRE(schedule.stages.size() == 1);
  const auto batches = schedule_batches(schedule);
  REQUIRE(batches.size() == 10);
  for (const auto& [stage, ids] : batches) CHECK(ids.size() == 4);

  // same seed twice -> identical sequence
  const auto replay = schedule_batches(build_iid_schedule(pool, 10, 4, 3));
  CHECK(replay == batches);

  // frequency within 3 sigma of uniform over many draws
  const auto big = build_iid_schedule(pool, 2500, 4, 11);
  std::map<std::string, long> freq;
  for (const auto& [stage, ids] : schedule_batches(big))
    for (const auto& id : ids) ++freq[id];
  const double n = 10000.0, p = 0.1;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (const auto& [id, count] : freq)
    CHECK(std::abs(count - n * p) < 3.0 * sigma);
}

TEST_CASE("external stratification splits the sorted pool") {
  const auto pool = fake_pool({1, 1, 2, 2, 3, 3});
  const auto schedule = build_external_schedule(
      pool, DifficultyFeature::chain_length, Direction::ascending, 3, 6, 2, 1);
  REQUIRE(schedule.stages.size() == 3);
  for (const auto& stage : schedule.stages) CHECK(stage.problem_ids.size() == 2);
  CHECK(schedule.stages[0].source == "stratum:0:chain_length");

  const auto descending = build_external_schedule(
      pool, DifficultyFeature::chain_length, Direction::descending, 3, 6, 2, 1);
  CHECK(descending.stages[0].problem_ids == schedule.stages[2].problem_ids);

  // boundary property: max(feature, stratum j) <= min(feature, stratum j+1)
  std::map<std::string, int> value;
  for (const auto& p : pool) value[p.id] = p.features.chain_length;
  for (std::size_t s = 0; s + 1 < schedule.stages.size(); ++s) {
    int hi = 0, lo = 1 << 20;
    for (const auto& id : schedule.stages[s].problem_ids) hi = std::max(hi, value[id]);
    for (const auto& id : schedule.stages[s + 1].problem_ids) lo = std::min(lo, value[id]);
    CHECK(hi <= lo);
  }
}

TEST_CASE("external remainder goes to the earliest strata") {
  const auto pool = fake_pool({1, 2, 3, 4, 5, 6, 7});
  const auto schedule = build_external_schedule(
      pool, DifficultyFeature::chain_length, Direction::ascending, 3, 9, 1, 1);
  REQUIRE(schedule.stages.size() == 3);
  CHECK(schedule.stages[0].problem_ids.size() == 3);
  CHECK(schedule.stages[1].problem_ids.size() == 2);
  CHECK(schedule.stages[2].problem_ids.size() == 2);
}

TEST_CASE("constant features cannot stratify") {
  const auto pool = fake_pool({2, 2, 2, 2});
  CHECK_THROWS_WITH_AS(
      build_external_schedule(pool, DifficultyFeature::chain_length,
                              Direction::ascending, 2, 4, 1, 1),
      "feature: degenerate stratification: feature is constant", ValidationError);
}

TEST_CASE("schedule_batches wraps around with epoch reuse") {
  const auto sets = sets_from({{1, {"a", "b", "c"}}});
  const auto schedule = build_transitional_schedule(
      sets, kind_of(OrderCategory::level_up), 1, 2, 4, 23);
  const auto batches = schedule_batches(schedule);
  REQUIRE(batches.size() == 2);
  std::map<std::string, int> seen;
  for (const auto& [stage, ids] : batches) {
    REQUIRE(ids.size() == 4);
    for (const auto& id : ids) ++seen[id];
  }
  // 8 draws over 3 problems with epoch cycling: everything appears >= 2 times
  for (const auto& [id, count] : seen) CHECK(count >= 2);

  // replay is identical
  CHECK(schedule_batches(schedule) == batches);
}

TEST_CASE("schedule json round trips byte-identically") {
  const auto sets = sets_from({{1, {"a", "b"}}, {2, {"c"}}});
  const auto schedule = build_transitional_schedule(
      sets, kind_of(OrderCategory::level_up), 2, 7, 3, 99);
  const auto dir = std::filesystem::temp_directory_path();
  const auto path_a = dir / "levelup_schedule_a.json";
  const auto path_b = dir / "levelup_schedule_b.json";
  write_schedule_json(path_a, schedule);
  const auto loaded = read_schedule_json(path_a);
  write_schedule_json(path_b, loaded);
  CHECK(read_text_file(path_a) == read_text_file(path_b));
  CHECK(schedule_batches(loaded) == schedule_batches(schedule));
  CHECK(to_string(loaded.order_kind) == "level_up");
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
}

TEST_CASE("order kind names round trip") {
  for (const std::string name :
       {"level_up", "level_down", "shuffled", "iid",
        "external:chain_length:ascending", "external:encoded_length:descending",
        "external:hard_op_count:ascending"}) {
    CHECK(to_string(parse_order_kind(name)) == name);
  }
  CHECK_THROWS_AS(parse_order_kind("bogus"), ValidationError);
  CHECK_THROWS_AS(parse_order_kind("external:bogus:ascending"), ValidationError);
}

TEST_SUITE_END();
