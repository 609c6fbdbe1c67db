#include "levelup/curriculum.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "levelup/errors.hpp"
#include "levelup/io.hpp"
#include "levelup/rng.hpp"

namespace levelup {

namespace {

void validate_budget(long total_steps, int batch_size) {
  if (total_steps < 1) throw ValidationError("total_steps", "must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
}

// Step budgets per group: equal split, remainder to the earliest groups.
std::vector<long> split_steps(long total_steps, std::size_t groups) {
  if (total_steps < static_cast<long>(groups))
    throw ValidationError("total_steps", "need at least one step per stage");
  std::vector<long> steps(groups, total_steps / static_cast<long>(groups));
  const long remainder = total_steps % static_cast<long>(groups);
  for (long i = 0; i < remainder; ++i) steps[static_cast<std::size_t>(i)] += 1;
  return steps;
}

std::string direction_name(Direction d) {
  return d == Direction::ascending ? "ascending" : "descending";
}

}  // namespace

std::string to_string(const OrderKind& kind) {
  switch (kind.category) {
    case OrderCategory::level_up: return "level_up";
    case OrderCategory::level_down: return "level_down";
    case OrderCategory::shuffled: return "shuffled";
    case OrderCategory::iid: return "iid";
    case OrderCategory::external:
      return "external:" + std::string(to_string(kind.feature)) + ":" +
             direction_name(kind.direction);
  }
  return "iid";
}

OrderKind parse_order_kind(std::string_view name) {
  OrderKind kind;
  if (name == "level_up") {
    kind.category = OrderCategory::level_up;
  } else if (name == "level_down") {
    kind.category = OrderCategory::level_down;
  } else if (name == "shuffled") {
    kind.category = OrderCategory::shuffled;
  } else if (name == "iid") {
    kind.category = OrderCategory::iid;
  } else if (name.starts_with("external:")) {
    kind.category = OrderCategory::external;
    auto rest = name.substr(9);
    const auto colon = rest.find(':');
    const auto feature = colon == std::string_view::npos ? rest : rest.substr(0, colon);
    kind.feature = parse_difficulty_feature(feature);
    if (colon != std::string_view::npos) {
      const auto dir = rest.substr(colon + 1);
      if (dir == "ascending" || dir == "asc")
        kind.direction = Direction::ascending;
      else if (dir == "descending" || dir == "desc")
        kind.direction = Direction::descending;
      else
        throw ValidationError("order_kind", "unknown direction: " + std::string(dir));
    }
  } else {
    throw ValidationError("order_kind", "unknown kind: " + std::string(name));
  }
  return kind;
}

std::vector<std::pair<int, int>> partition_balanced(
    const std::vector<long>& counts, int groups) {
  const int n = static_cast<int>(counts.size());
  if (groups < 1) throw ValidationError("num_stages", "must be >= 1");
  if (groups > n)
    throw ValidationError("num_stages", "more groups than levels");
  long total = 0;
  for (long c : counts) total += c;

  std::vector<long> cumulative(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i)
    cumulative[static_cast<std::size_t>(i) + 1] =
        cumulative[static_cast<std::size_t>(i)] + counts[static_cast<std::size_t>(i)];

  std::vector<std::pair<int, int>> spans;  // [begin, end) level indices
  int begin = 0;
  for (int g = 1; g < groups; ++g) {
    // Close the group at the first boundary whose cumulative count reaches
    // the quota, leaving at least one level for each remaining group.
    const double quota = static_cast<double>(g) * static_cast<double>(total) /
                         static_cast<double>(groups);
    int end = begin + 1;
    const int max_end = n - (groups - g);
    while (end < max_end &&
           static_cast<double>(cumulative[static_cast<std::size_t>(end)]) < quota)
      ++end;
    spans.emplace_back(begin, end);
    begin = end;
  }
  spans.emplace_back(begin, n);
  return spans;
}

CurriculumSchedule build_transitional_schedule(const TransitionalSets& sets,
                                               const OrderKind& order,
                                               int num_stages, long total_steps,
                                               int batch_size,
                                               std::uint64_t seed) {
  validate_budget(total_steps, batch_size);
  if (order.category != OrderCategory::level_up &&
      order.category != OrderCategory::level_down &&
      order.category != OrderCategory::shuffled)
    throw ValidationError("order_kind",
                          "transitional schedules take level_up, level_down or shuffled");
  if (num_stages < 1) throw ValidationError("num_stages", "must be >= 1");

  std::vector<int> levels;
  for (const auto& [tau, ids] : sets.by_level)
    if (!ids.empty()) levels.push_back(tau);
  if (levels.empty())
    throw ValidationError("sets", "no non-empty transitional levels");

  CurriculumSchedule schedule;
  schedule.order_kind = order;
  schedule.total_steps = total_steps;
  schedule.batch_size = batch_size;
  schedule.shuffle_seed = seed;

  if (order.category == OrderCategory::shuffled) {
    Stage stage;
    stage.stage_index = 0;
    for (int tau : levels) {
      const auto& ids = sets.by_level.at(tau);
      stage.problem_ids.insert(stage.problem_ids.end(), ids.begin(), ids.end());
    }
    stage.steps = total_steps;
    stage.source = "shuffled:all";
    schedule.stages.push_back(std::move(stage));
    return schedule;
  }

  const int groups = std::min<int>(num_stages, static_cast<int>(levels.size()));
  std::vector<long> counts;
  for (int tau : levels)
    counts.push_back(static_cast<long>(sets.by_level.at(tau).size()));
  const auto spans = partition_balanced(counts, groups);
  const auto steps = split_steps(total_steps, spans.size());

  std::vector<Stage> stages;
  for (std::size_t g = 0; g < spans.size(); ++g) {
    Stage stage;
    for (int li = spans[g].first; li < spans[g].second; ++li) {
      const auto& ids = sets.by_level.at(levels[static_cast<std::size_t>(li)]);
      stage.problem_ids.insert(stage.problem_ids.end(), ids.begin(), ids.end());
    }
    stage.steps = steps[g];
    stage.source = "levels:" +
                   std::to_string(levels[static_cast<std::size_t>(spans[g].first)]) +
                   "-" +
                   std::to_string(levels[static_cast<std::size_t>(spans[g].second - 1)]);
    stages.push_back(std::move(stage));
  }
  if (order.category == OrderCategory::level_down)
    std::reverse(stages.begin(), stages.end());
  for (std::size_t i = 0; i < stages.size(); ++i)
    stages[i].stage_index = static_cast<int>(i);
  schedule.stages = std::move(stages);
  return schedule;
}

CurriculumSchedule build_iid_schedule(std::span<const Problem> pool,
                                      long total_steps, int batch_size,
                                      std::uint64_t seed) {
  validate_budget(total_steps, batch_size);
  if (pool.empty()) throw ValidationError("pool", "must be non-empty");
  CurriculumSchedule schedule;
  schedule.order_kind = OrderKind{OrderCategory::iid, {}, {}};
  schedule.total_steps = total_steps;
  schedule.batch_size = batch_size;
  schedule.shuffle_seed = seed;
  Stage stage;
  stage.stage_index = 0;
  stage.steps = total_steps;
  stage.source = "iid";
  stage.problem_ids.reserve(pool.size());
  for (const auto& p : pool) stage.problem_ids.push_back(p.id);
  schedule.stages.push_back(std::move(stage));
  return schedule;
}

CurriculumSchedule build_external_schedule(std::span<const Problem> pool,
                                           DifficultyFeature feature,
                                           Direction direction, int num_stages,
                                           long total_steps, int batch_size,
                                           std::uint64_t seed) {
  validate_budget(total_steps, batch_size);
  if (pool.empty()) throw ValidationError("pool", "must be non-empty");
  if (num_stages < 1) throw ValidationError("num_stages", "must be >= 1");

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = feature_value(pool[a], feature);
    const double fb = feature_value(pool[b], feature);
    if (fa != fb) return fa < fb;
    return pool[a].id < pool[b].id;
  });
  if (feature_value(pool[order.front()], feature) ==
      feature_value(pool[order.back()], feature))
    throw ValidationError("feature", "degenerate stratification: feature is constant");

  const int strata = std::min<int>(num_stages, static_cast<int>(pool.size()));
  const std::size_t base = pool.size() / static_cast<std::size_t>(strata);
  const std::size_t remainder = pool.size() % static_cast<std::size_t>(strata);

  std::vector<Stage> stages;
  std::size_t cursor = 0;
  for (int s = 0; s < strata; ++s) {
    const std::size_t take = base + (static_cast<std::size_t>(s) < remainder ? 1 : 0);
    Stage stage;
    for (std::size_t i = 0; i < take; ++i)
      stage.problem_ids.push_back(pool[order[cursor + i]].id);
    cursor += take;
    stage.source = "stratum:" + std::to_string(s) + ":" +
                   std::string(to_string(feature));
    stages.push_back(std::move(stage));
  }
  if (direction == Direction::descending)
    std::reverse(stages.begin(), stages.end());
  const auto steps = split_steps(total_steps, stages.size());
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].stage_index = static_cast<int>(i);
    stages[i].steps = steps[i];
  }

  CurriculumSchedule schedule;
  schedule.order_kind = OrderKind{OrderCategory::external, feature, direction};
  schedule.total_steps = total_steps;
  schedule.batch_size = batch_size;
  schedule.shuffle_seed = seed;
  schedule.stages = std::move(stages);
  return schedule;
}

std::vector<std::pair<int, std::vector<std::string>>> schedule_batches(
    const CurriculumSchedule& schedule) {
  long stage_total = 0;
  for (const auto& stage : schedule.stages) stage_total += stage.steps;
  if (stage_total != schedule.total_steps)
    throw ValidationError("schedule", "stage steps do not sum to total_steps");

  const bool uniform = schedule.order_kind.category == OrderCategory::iid;
  std::vector<std::pair<int, std::vector<std::string>>> batches;
  batches.reserve(static_cast<std::size_t>(schedule.total_steps));

  for (const auto& stage : schedule.stages) {
    if (stage.problem_ids.empty())
      throw ValidationError("schedule", "stage with no problems");
    // Streams are keyed by the stage source, not its position, so a stage
    // replays identically wherever the ordering places it.
    Rng rng(derive_seed(schedule.shuffle_seed, "stage", fnv1a64(stage.source)));
    std::vector<std::size_t> perm(stage.problem_ids.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::size_t cursor = perm.size();  // force a shuffle before first use
    for (long step = 0; step < stage.steps; ++step) {
      std::vector<std::string> batch;
      batch.reserve(static_cast<std::size_t>(schedule.batch_size));
      for (int b = 0; b < schedule.batch_size; ++b) {
        if (uniform) {
          batch.push_back(stage.problem_ids[static_cast<std::size_t>(
              rng.uniform_int(static_cast<int>(stage.problem_ids.size())))]);
        } else {
          if (cursor == perm.size()) {
            rng.shuffle(std::span<std::size_t>(perm));
            cursor = 0;
          }
          batch.push_back(stage.problem_ids[perm[cursor++]]);
        }
      }
      batches.emplace_back(stage.stage_index, std::move(batch));
    }
  }
  return batches;
}

void write_schedule_json(const std::filesystem::path& path,
                         const CurriculumSchedule& schedule) {
  nlohmann::ordered_json doc;
  doc["order_kind"] = to_string(schedule.order_kind);
  doc["total_steps"] = schedule.total_steps;
  doc["batch_size"] = schedule.batch_size;
  doc["shuffle_seed"] = schedule.shuffle_seed;
  doc["stages"] = nlohmann::ordered_json::array();
  for (const auto& stage : schedule.stages) {
    nlohmann::ordered_json s;
    s["stage_index"] = stage.stage_index;
    s["source"] = stage.source;
    s["steps"] = stage.steps;
    s["problem_ids"] = stage.problem_ids;
    doc["stages"].push_back(std::move(s));
  }
  write_text_file_atomic(path, doc.dump(2) + "\n");
}

CurriculumSchedule read_schedule_json(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad schedule file " + path.string() + ": " + e.what());
  }
  CurriculumSchedule schedule;
  try {
    schedule.order_kind = parse_order_kind(doc.at("order_kind").get<std::string>());
    schedule.total_steps = doc.at("total_steps").get<long>();
    schedule.batch_size = doc.at("batch_size").get<int>();
    schedule.shuffle_seed = doc.at("shuffle_seed").get<std::uint64_t>();
    for (const auto& s : doc.at("stages")) {
      Stage stage;
      stage.stage_index = s.at("stage_index").get<int>();
      stage.source = s.at("source").get<std::string>();
      stage.steps = s.at("steps").get<long>();
      stage.problem_ids = s.at("problem_ids").get<std::vector<std::string>>();
      schedule.stages.push_back(std::move(stage));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad schedule file " + path.string() + ": " + e.what());
  }
  return schedule;
}

}  // namespace levelup
