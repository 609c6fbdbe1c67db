#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "levelup/curriculum.hpp"
#include "levelup/learner.hpp"
#include "levelup/series.hpp"
#include "levelup/taskgen.hpp"
#include "levelup/transfer.hpp"
#include "levelup/transitional.hpp"

// Desk-scale experiment runners: curriculum comparisons, atomic level-up
// grids, transfer experiments and interpretability reports, all multi-seed
// and bit-reproducible from (config, master_seed).

namespace levelup {

struct ExperimentConfig {
  PoolSpec train_pool;
  PoolSpec val_pool;
  PoolSpec test_pool;
  std::optional<PoolSpec> transfer_pool;
  std::optional<PoolSpec> transfer_test_pool;

  LearnerConfig learner;        // input_dim/num_classes 0 -> derived from pools
  TrainSpec curriculum_train;   // budget tier for the compared runs
  SeriesSpec series;

  std::vector<OrderKind> schedule_menu;
  int num_stages = 3;
  // Extra stage counts to sweep (transitional kinds only); empty disables.
  std::vector<int> stage_sweep;
  int num_seeds = 5;
  EvalSpec eval;

  MatchThresholds thresholds;
  EmbedMode embed_mode = EmbedMode::feature;

  long atomic_budget_steps = 30;
  int atomic_num_seeds = 3;

  std::uint64_t master_seed = 17;
  int jobs = 1;
};

void validate(const ExperimentConfig& config);

struct RunMetrics {
  std::string schedule_kind;
  int seed_index = 0;
  std::vector<double> trajectory;  // baseline + accuracy after each stage
  double final_accuracy = 0.0;
  double wall_time_sec = 0.0;      // reporting only; kept out of metrics.csv
};

struct RunFailure {
  std::string schedule_kind;
  int seed_index = 0;
  std::string message;
};

struct AggregateEntry {
  std::string kind;
  int runs = 0;
  double mean_final = 0.0;
  double std_final = 0.0;
  double se_final = 0.0;
  double rel_improvement_over_iid = 0.0;
};

struct CorrelationEntry {
  std::string collection;  // "transitional" or "all_solved"
  std::string feature;
  std::optional<double> rho;
  std::string note;  // reason when rho is absent
};

struct InterpretabilityReport {
  LevelStats stats;
  std::vector<CorrelationEntry> correlations;
};

struct AtomicGrid {
  std::vector<int> model_levels;  // tested series indices i
  std::vector<int> train_levels;  // training levels j
  // cells[i][j]: mean/std accuracy on held-out D_{i+1}; absent if D_j empty.
  std::vector<std::vector<std::optional<double>>> mean;
  std::vector<std::vector<std::optional<double>>> stddev;
};

struct AggregateReport {
  std::vector<AggregateEntry> per_schedule;
  std::vector<RunMetrics> runs;
  std::vector<RunFailure> failures;
  double baseline_accuracy = 0.0;
  std::vector<double> series_strengths;
  InterpretabilityReport interpretability;
  std::optional<AtomicGrid> atomic;
};

// Pools, series, transitional sets and the starting checkpoint for one
// experiment; built once and shared by the runners.
struct PreparedExperiment {
  std::vector<Problem> train_pool;
  std::vector<Problem> val_pool;
  std::vector<Problem> test_pool;
  ModelSeries series;
  SolvabilityMatrix train_matrix;
  TransitionalSets train_sets;
  SolvabilityMatrix test_matrix;
  TransitionalSets test_sets;
  Checkpoint start;  // weakest series member; every compared run clones it
  LearnerConfig learner;
};

PreparedExperiment prepare_experiment(const ExperimentConfig& config);

// Trains a clone of `start` along the schedule, evaluating on the eval pool
// at the baseline and after every stage.
RunMetrics run_schedule(const Checkpoint& start,
                        const CurriculumSchedule& schedule,
                        std::span<const Problem> batch_pool,
                        std::span<const Problem> eval_pool,
                        const TrainSpec& train, const EvalSpec& eval,
                        std::uint64_t eval_seed);

// One schedule per (menu kind, seed); equal step and batch budgets across
// kinds. Writes metrics.csv, aggregate.json, interpretability.csv,
// schedules/ and schema.json under out_dir (atomically; byte-identical on
// repeat runs). Wall-clock timings go to timings.csv only.
AggregateReport run_curriculum_comparison(const ExperimentConfig& config,
                                          const std::filesystem::path& out_dir);

// Fine-tunes each tested model level i on each single training level j for a
// fixed budget and scores it on held-out D_{i+1}.
AtomicGrid run_atomic_grid(const PreparedExperiment& prepared,
                           const ExperimentConfig& config);

struct StageSweepEntry {
  int num_stages = 0;
  std::string kind;
  double mean_final = 0.0;
  double std_final = 0.0;
  int runs = 0;
};

// Repeats the transitional curricula for each stage count in
// config.stage_sweep. Reported, no ordering asserted across stage counts.
std::vector<StageSweepEntry> run_stage_sweep(const PreparedExperiment& prepared,
                                             const ExperimentConfig& config);

void write_stage_sweep_csv(const std::filesystem::path& path,
                           const std::vector<StageSweepEntry>& entries);

struct TransferReport {
  // (a) reference-pool curricula evaluated on the transfer-test pool.
  std::vector<AggregateEntry> cross_pool;
  // (b) neo-transitional curricula on the transfer pool vs its baselines.
  std::vector<AggregateEntry> neo;
  std::vector<RunMetrics> runs;
  std::vector<RunFailure> failures;
  MatchReport match;
};

TransferReport run_transfer_experiment(const ExperimentConfig& config,
                                       const std::filesystem::path& out_dir);

InterpretabilityReport report_interpretability(const TransitionalSets& sets,
                                               const SolvabilityMatrix& matrix,
                                               std::span<const Problem> pool);

// File emitters (shared by the CLI).
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<RunMetrics>& runs);
void write_timings_csv(const std::filesystem::path& path,
                       const std::vector<RunMetrics>& runs);
void write_interpretability_csv(const std::filesystem::path& path,
                                const InterpretabilityReport& report);
void write_atomic_grid_csv(const std::filesystem::path& path,
                           const AtomicGrid& grid);
void write_schema_json(const std::filesystem::path& path);

// The shipped default experiment: Tiny-tier budget on the default arithmetic
// domain; the acceptance suite runs exactly this configuration.
ExperimentConfig default_experiment_config();

}  // namespace levelup
