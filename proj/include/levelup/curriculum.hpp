#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levelup/taskgen.hpp"
#include "levelup/transitional.hpp"

// Training schedules: level-up / level-down / shuffled over transitional
// sets, i.i.d. over a full pool, and external-difficulty curricula via
// stratified sampling. Schedules are immutable once built and replay to the
// exact same batch sequence.

namespace levelup {

enum class OrderCategory { level_up, level_down, shuffled, iid, external };
enum class Direction { ascending, descending };

struct OrderKind {
  OrderCategory category = OrderCategory::iid;
  // Used only when category == external.
  DifficultyFeature feature = DifficultyFeature::chain_length;
  Direction direction = Direction::ascending;
};

std::string to_string(const OrderKind& kind);
OrderKind parse_order_kind(std::string_view name);

struct Stage {
  int stage_index = 0;
  std::vector<std::string> problem_ids;  // ordered multiset
  long steps = 0;
  std::string source;  // "levels:1-2", "stratum:0:chain_length", "iid", ...
};

struct CurriculumSchedule {
  std::vector<Stage> stages;
  OrderKind order_kind;
  long total_steps = 0;
  int batch_size = 0;
  std::uint64_t shuffle_seed = 0;
};

// Contiguous partition of per-level counts into `groups` near-equal-count
// groups (quota rule; at least one level per group).
std::vector<std::pair<int, int>> partition_balanced(
    const std::vector<long>& counts, int groups);

// Merges non-empty levels in ascending tau into num_stages contiguous groups
// of near-equal problem counts; level_up visits groups ascending, level_down
// descending, shuffled pools everything into one stage. Step budgets attach
// to groups (remainder to the lowest-tau groups) so the level_up and
// level_down schedules are stage-wise reversals of each other.
CurriculumSchedule build_transitional_schedule(const TransitionalSets& sets,
                                               const OrderKind& order,
                                               int num_stages, long total_steps,
                                               int batch_size,
                                               std::uint64_t seed);

CurriculumSchedule build_iid_schedule(std::span<const Problem> pool,
                                      long total_steps, int batch_size,
                                      std::uint64_t seed);

// Sorts the pool by the feature (ties by id), splits into num_stages
// equal-count strata (earliest strata take the remainder), ordered by
// direction.
CurriculumSchedule build_external_schedule(std::span<const Problem> pool,
                                           DifficultyFeature feature,
                                           Direction direction, int num_stages,
                                           long total_steps, int batch_size,
                                           std::uint64_t seed);

// The full batch sequence: exactly total_steps batches of batch_size ids.
// iid stages draw uniformly with replacement; all other stages cycle seeded
// shuffles of the stage's problems (reshuffled each wrap-around epoch).
std::vector<std::pair<int, std::vector<std::string>>> schedule_batches(
    const CurriculumSchedule& schedule);

void write_schedule_json(const std::filesystem::path& path,
                         const CurriculumSchedule& schedule);
CurriculumSchedule read_schedule_json(const std::filesystem::path& path);

}  // namespace levelup
