#include "levelup/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "levelup/errors.hpp"
#include "levelup/io.hpp"
#include "levelup/rng.hpp"
#include "levelup/stats.hpp"

namespace levelup {

namespace {

namespace fs = std::filesystem;

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::unordered_map<std::string, std::size_t> index_by_id(
    std::span<const Problem> pool) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) index.emplace(pool[i].id, i);
  return index;
}

std::vector<Problem> gather_by_id(
    std::span<const Problem> pool,
    const std::unordered_map<std::string, std::size_t>& index,
    const std::vector<std::string>& ids) {
  std::vector<Problem> batch;
  batch.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw Error("batch id not in training pool: " + id);
    batch.push_back(pool[it->second]);
  }
  return batch;
}

std::vector<Problem> level_subset(const TransitionalSets& sets, int tau,
                                  std::span<const Problem> pool) {
  std::vector<Problem> subset;
  const auto it = sets.by_level.find(tau);
  if (it == sets.by_level.end()) return subset;
  const auto index = index_by_id(pool);
  for (const auto& id : it->second) {
    const auto pi = index.find(id);
    if (pi == index.end()) throw Error("unknown problem id: " + id);
    subset.push_back(pool[pi->second]);
  }
  return subset;
}

CurriculumSchedule build_menu_schedule(const OrderKind& kind,
                                       const TransitionalSets& sets,
                                       std::span<const Problem> pool,
                                       const ExperimentConfig& config,
                                       std::uint64_t seed) {
  const long steps = config.curriculum_train.max_steps;
  const int batch = config.curriculum_train.batch_size;
  switch (kind.category) {
    case OrderCategory::level_up:
    case OrderCategory::level_down:
    case OrderCategory::shuffled:
      return build_transitional_schedule(sets, kind, config.num_stages, steps,
                                         batch, seed);
    case OrderCategory::iid:
      return build_iid_schedule(pool, steps, batch, seed);
    case OrderCategory::external:
      return build_external_schedule(pool, kind.feature, kind.direction,
                                     config.num_stages, steps, batch, seed);
  }
  throw ValidationError("order_kind", "unhandled order kind");
}

std::vector<AggregateEntry> aggregate_by_kind(const std::vector<RunMetrics>& runs,
                                              const std::string& iid_kind) {
  std::vector<std::string> kinds;
  for (const auto& run : runs)
    if (std::find(kinds.begin(), kinds.end(), run.schedule_kind) == kinds.end())
      kinds.push_back(run.schedule_kind);

  auto finals_for = [&](const std::string& kind) {
    std::vector<double> finals;
    for (const auto& run : runs)
      if (run.schedule_kind == kind) finals.push_back(run.final_accuracy);
    return finals;
  };

  double iid_mean = 0.0;
  bool have_iid = false;
  if (const auto finals = finals_for(iid_kind); !finals.empty()) {
    iid_mean = mean(finals);
    have_iid = true;
  }

  std::vector<AggregateEntry> entries;
  for (const auto& kind : kinds) {
    const auto finals = finals_for(kind);
    AggregateEntry entry;
    entry.kind = kind;
    entry.runs = static_cast<int>(finals.size());
    entry.mean_final = mean(finals);
    entry.std_final = sample_stddev(finals);
    entry.se_final = standard_error(finals);
    entry.rel_improvement_over_iid =
        have_iid && iid_mean > 0.0 ? (entry.mean_final - iid_mean) / iid_mean : 0.0;
    entries.push_back(std::move(entry));
  }
  return entries;
}

struct ScheduledRun {
  OrderKind kind;
  std::string label;
  int seed_index = 0;
  const TransitionalSets* sets = nullptr;
  std::span<const Problem> batch_pool;
  std::span<const Problem> eval_pool;
};

nlohmann::ordered_json aggregate_entries_json(
    const std::vector<AggregateEntry>& entries) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : entries)
    arr.push_back({{"kind", e.kind},
                   {"runs", e.runs},
                   {"mean_final", e.mean_final},
                   {"std_final", e.std_final},
                   {"se_final", e.se_final},
                   {"rel_improvement_over_iid", e.rel_improvement_over_iid}});
  return arr;
}

nlohmann::ordered_json correlations_json(const InterpretabilityReport& report) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : report.correlations) {
    nlohmann::ordered_json entry = {{"collection", c.collection},
                                    {"feature", c.feature}};
    if (c.rho)
      entry["rho"] = *c.rho;
    else
      entry["rho"] = nullptr;
    entry["note"] = c.note;
    arr.push_back(std::move(entry));
  }
  return arr;
}

std::string join_trajectory(const std::vector<double>& trajectory) {
  std::string out;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    if (i) out += ';';
    out += double_repr(trajectory[i]);
  }
  return out;
}

}  // namespace

void validate(const ExperimentConfig& config) {
  validate(config.train_pool);
  validate(config.val_pool);
  validate(config.test_pool);
  if (config.transfer_pool) validate(*config.transfer_pool);
  if (config.transfer_test_pool) validate(*config.transfer_test_pool);
  if (config.num_seeds < 1) throw ValidationError("num_seeds", "must be >= 1");
  if (config.num_stages < 1) throw ValidationError("num_stages", "must be >= 1");
  if (config.atomic_num_seeds < 0)
    throw ValidationError("atomic_num_seeds", "must be >= 0");
  if (config.atomic_budget_steps < 0)
    throw ValidationError("atomic_budget_steps", "must be >= 0");
  if (config.jobs < 1) throw ValidationError("jobs", "must be >= 1");
  validate(config.curriculum_train);
  validate(config.eval);
  validate(config.thresholds);
  if (config.schedule_menu.empty())
    throw ValidationError("schedule_menu", "must not be empty");
  // Pools must be disjoint by id: same tag + same seed would collide.
  auto key = [](const PoolSpec& spec) {
    return spec.pool_tag + "#" + std::to_string(spec.seed);
  };
  std::unordered_set<std::string> keys;
  std::vector<const PoolSpec*> specs = {&config.train_pool, &config.val_pool,
                                        &config.test_pool};
  if (config.transfer_pool) specs.push_back(&*config.transfer_pool);
  if (config.transfer_test_pool) specs.push_back(&*config.transfer_test_pool);
  for (const auto* spec : specs)
    if (!keys.insert(key(*spec)).second)
      throw ValidationError("pools", "pools must differ in (pool_tag, seed): " + key(*spec));
}

PreparedExperiment prepare_experiment(const ExperimentConfig& config) {
  validate(config);
  PreparedExperiment prepared;
  prepared.train_pool = generate_pool(config.train_pool);
  prepared.val_pool = generate_pool(config.val_pool);
  prepared.test_pool = generate_pool(config.test_pool);

  prepared.learner = config.learner;
  if (prepared.learner.input_dim == 0)
    prepared.learner.input_dim =
        encoded_dim(config.train_pool.modulus, config.train_pool.max_chain);
  if (prepared.learner.num_classes == 0)
    prepared.learner.num_classes = config.train_pool.modulus;

  switch (config.series.kind) {
    case SeriesKind::checkpoint: {
      const auto checkpoints = train_and_collect(prepared.learner, prepared.train_pool,
                                                 prepared.val_pool, config.series);
      prepared.series = select_by_delta(checkpoints, config.series.delta);
      break;
    }
    case SeriesKind::family:
      prepared.series = build_family_series(prepared.learner, config.series.width_list,
                                            prepared.train_pool, prepared.val_pool,
                                            config.series.base_train);
      break;
    case SeriesKind::adaptation: {
      Checkpoint base = init(prepared.learner);
      base.val_accuracy = evaluate(base, prepared.val_pool, EvalSpec{});
      const std::size_t take =
          std::min<std::size_t>(prepared.train_pool.size(),
                                static_cast<std::size_t>(config.series.adaptation_set_size));
      std::span<const Problem> adaptation(prepared.train_pool.data(), take);
      prepared.series = build_adaptation_series(base, config.series.adaptation_budgets,
                                                adaptation, prepared.val_pool,
                                                config.series.base_train);
      break;
    }
  }

  prepared.train_matrix = build_matrix(prepared.series, prepared.train_pool);
  prepared.train_sets = extract(prepared.train_matrix, config.train_pool.pool_tag);
  prepared.test_matrix = build_matrix(prepared.series, prepared.test_pool);
  prepared.test_sets = extract(prepared.test_matrix, config.test_pool.pool_tag);
  prepared.start = prepared.series.models.front();
  return prepared;
}

RunMetrics run_schedule(const Checkpoint& start,
                        const CurriculumSchedule& schedule,
                        std::span<const Problem> batch_pool,
                        std::span<const Problem> eval_pool,
                        const TrainSpec& train, const EvalSpec& eval,
                        std::uint64_t eval_seed) {
  const auto started = std::chrono::steady_clock::now();
  const auto index = index_by_id(batch_pool);
  EvalSpec seeded_eval = eval;
  seeded_eval.seed = eval_seed;

  RunMetrics metrics;
  metrics.schedule_kind = to_string(schedule.order_kind);
  metrics.trajectory.push_back(evaluate(start, eval_pool, seeded_eval));

  Checkpoint ckpt = start;
  const auto batches = schedule_batches(schedule);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    ckpt = train_step(ckpt, gather_by_id(batch_pool, index, batches[b].second), train);
    const bool stage_end =
        b + 1 == batches.size() || batches[b + 1].first != batches[b].first;
    if (stage_end)
      metrics.trajectory.push_back(evaluate(ckpt, eval_pool, seeded_eval));
  }
  metrics.final_accuracy = metrics.trajectory.back();
  metrics.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return metrics;
}

namespace {

// Shared run loop for the comparison and transfer experiments: one schedule
// per (kind, seed), executed on a bounded worker pool with per-run failure
// capture, persisted schedules and deterministic slot order.
void execute_runs(const std::vector<ScheduledRun>& planned,
                  const ExperimentConfig& config, const Checkpoint& start,
                  const fs::path& schedules_dir, std::vector<RunMetrics>& runs,
                  std::vector<RunFailure>& failures) {
  fs::create_directories(schedules_dir);
  std::vector<std::optional<RunMetrics>> slots(planned.size());
  std::vector<std::optional<RunFailure>> failure_slots(planned.size());

  parallel_for(static_cast<int>(planned.size()), config.jobs, [&](int idx) {
    const auto& task = planned[static_cast<std::size_t>(idx)];
    try {
      const std::uint64_t schedule_seed =
          derive_seed(config.master_seed, "schedule", fnv1a64(task.label),
                      static_cast<std::uint64_t>(task.seed_index));
      CurriculumSchedule schedule =
          task.sets ? build_menu_schedule(task.kind, *task.sets, task.batch_pool,
                                          config, schedule_seed)
                    : build_menu_schedule(task.kind, TransitionalSets{},
                                          task.batch_pool, config, schedule_seed);
      write_schedule_json(schedules_dir / (task.label + "_seed" +
                                           std::to_string(task.seed_index) + ".json"),
                          schedule);
      RunMetrics metrics = run_schedule(
          start, schedule, task.batch_pool, task.eval_pool, config.curriculum_train,
          config.eval,
          derive_seed(config.master_seed, "eval", fnv1a64(task.label),
                      static_cast<std::uint64_t>(task.seed_index)));
      metrics.schedule_kind = task.label;
      metrics.seed_index = task.seed_index;
      slots[static_cast<std::size_t>(idx)] = std::move(metrics);
    } catch (const std::exception& e) {
      failure_slots[static_cast<std::size_t>(idx)] =
          RunFailure{task.label, task.seed_index, e.what()};
    }
  });

  for (auto& slot : slots)
    if (slot) runs.push_back(std::move(*slot));
  for (auto& slot : failure_slots)
    if (slot) failures.push_back(std::move(*slot));
}

}  // namespace

InterpretabilityReport report_interpretability(const TransitionalSets& sets,
                                               const SolvabilityMatrix& matrix,
                                               std::span<const Problem> pool) {
  InterpretabilityReport report;
  report.stats = level_stats(sets, matrix, pool);

  struct FeatureColumn {
    const char* name;
    double LevelStatsRow::* member;
  };
  const FeatureColumn columns[] = {
      {"chain_length", &LevelStatsRow::mean_chain_length},
      {"encoded_length", &LevelStatsRow::mean_encoded_length},
      {"hard_op_count", &LevelStatsRow::mean_muls},
      {"max_operand", &LevelStatsRow::mean_max_operand},
  };

  auto correlate = [&](const std::vector<LevelStatsRow>& rows,
                       const std::string& collection) {
    std::vector<double> levels;
    for (const auto& row : rows)
      if (row.defined) levels.push_back(static_cast<double>(row.level));
    for (const auto& column : columns) {
      CorrelationEntry entry;
      entry.collection = collection;
      entry.feature = column.name;
      if (levels.size() < 3) {
        entry.note = "fewer than 3 non-empty levels";
      } else {
        std::vector<double> means;
        for (const auto& row : rows)
          if (row.defined) means.push_back(row.*(column.member));
        entry.rho = spearman(levels, means);
        if (!entry.rho) entry.note = "correlation undefined (constant series)";
      }
      report.correlations.push_back(std::move(entry));
    }
  };
  correlate(report.stats.transitional, "transitional");
  correlate(report.stats.all_solved, "all_solved");
  return report;
}

AggregateReport run_curriculum_comparison(const ExperimentConfig& config,
                                          const fs::path& out_dir) {
  const PreparedExperiment prepared = prepare_experiment(config);
  fs::create_directories(out_dir);

  std::vector<ScheduledRun> planned;
  for (const auto& kind : config.schedule_menu)
    for (int seed = 0; seed < config.num_seeds; ++seed)
      planned.push_back(ScheduledRun{kind, to_string(kind), seed,
                                     &prepared.train_sets, prepared.train_pool,
                                     prepared.test_pool});

  AggregateReport report;
  execute_runs(planned, config, prepared.start, out_dir / "schedules",
               report.runs, report.failures);
  report.per_schedule = aggregate_by_kind(report.runs, "iid");
  report.baseline_accuracy =
      evaluate(prepared.start, prepared.test_pool,
               EvalSpec{config.eval.attempts, config.eval.temperature,
                        config.eval.top_p,
                        derive_seed(config.master_seed, "baseline")});
  report.series_strengths = prepared.series.strengths;
  report.interpretability = report_interpretability(
      prepared.train_sets, prepared.train_matrix, prepared.train_pool);
  if (config.atomic_num_seeds > 0 && prepared.series.models.size() >= 3)
    report.atomic = run_atomic_grid(prepared, config);

  write_metrics_csv(out_dir / "metrics.csv", report.runs);
  write_timings_csv(out_dir / "timings.csv", report.runs);
  write_interpretability_csv(out_dir / "interpretability.csv",
                             report.interpretability);
  if (report.atomic)
    write_atomic_grid_csv(out_dir / "atomic_grid.csv", *report.atomic);
  if (!config.stage_sweep.empty())
    write_stage_sweep_csv(out_dir / "stage_sweep.csv",
                          run_stage_sweep(prepared, config));
  write_matrix_csv(out_dir / "solvability_train.csv", prepared.train_matrix);
  write_sets_json(out_dir / "transitional_train.json", prepared.train_sets);
  write_schema_json(out_dir / "schema.json");

  nlohmann::ordered_json doc;
  doc["baseline_accuracy"] = report.baseline_accuracy;
  doc["series_strengths"] = report.series_strengths;
  doc["per_schedule"] = aggregate_entries_json(report.per_schedule);
  doc["correlations"] = correlations_json(report.interpretability);
  doc["excluded_counts"] = {{"always", prepared.train_sets.excluded.always},
                            {"never", prepared.train_sets.excluded.never},
                            {"inconsistent", prepared.train_sets.excluded.inconsistent}};
  nlohmann::ordered_json level_counts = nlohmann::ordered_json::object();
  for (const auto& [tau, ids] : prepared.train_sets.by_level)
    level_counts[std::to_string(tau)] = ids.size();
  doc["transitional_level_counts"] = level_counts;
  auto failures = nlohmann::ordered_json::array();
  for (const auto& f : report.failures)
    failures.push_back({{"kind", f.schedule_kind},
                        {"seed_index", f.seed_index},
                        {"message", f.message}});
  doc["failures"] = failures;
  write_text_file_atomic(out_dir / "aggregate.json", doc.dump(2) + "\n");
  return report;
}

AtomicGrid run_atomic_grid(const PreparedExperiment& prepared,
                           const ExperimentConfig& config) {
  if (prepared.series.models.size() < 3)
    throw ValidationError("series", "atomic grid needs a series of length >= 3");
  if (config.atomic_num_seeds < 1)
    throw ValidationError("atomic_num_seeds", "must be >= 1");
  const int n = static_cast<int>(prepared.series.models.size()) - 1;

  AtomicGrid grid;
  for (int j = 1; j <= n; ++j) grid.train_levels.push_back(j);
  for (int i = 0; i < n; ++i) {
    const auto it = prepared.test_sets.by_level.find(i + 1);
    if (it != prepared.test_sets.by_level.end() && !it->second.empty())
      grid.model_levels.push_back(i);
  }
  grid.mean.assign(grid.model_levels.size(),
                   std::vector<std::optional<double>>(grid.train_levels.size()));
  grid.stddev.assign(grid.model_levels.size(),
                     std::vector<std::optional<double>>(grid.train_levels.size()));

  struct Cell {
    std::size_t row, col;
    int model_level, train_level;
  };
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < grid.model_levels.size(); ++r)
    for (std::size_t c = 0; c < grid.train_levels.size(); ++c) {
      const int j = grid.train_levels[c];
      const auto it = prepared.train_sets.by_level.find(j);
      if (it == prepared.train_sets.by_level.end() || it->second.empty())
        continue;  // absent cell, not zero
      cells.push_back(Cell{r, c, grid.model_levels[r], j});
    }

  parallel_for(static_cast<int>(cells.size()), config.jobs, [&](int idx) {
    const auto& cell = cells[static_cast<std::size_t>(idx)];
    const auto train_set =
        level_subset(prepared.train_sets, cell.train_level, prepared.train_pool);
    const auto eval_set =
        level_subset(prepared.test_sets, cell.model_level + 1, prepared.test_pool);
    const auto& model =
        prepared.series.models[static_cast<std::size_t>(cell.model_level)];

    std::vector<double> finals;
    for (int seed = 0; seed < config.atomic_num_seeds; ++seed) {
      EvalSpec eval = config.eval;
      eval.seed = derive_seed(config.master_seed, "atomic-eval",
                              static_cast<std::uint64_t>(cell.model_level),
                              static_cast<std::uint64_t>(cell.train_level),
                              static_cast<std::uint64_t>(seed));
      if (config.atomic_budget_steps == 0) {
        finals.push_back(evaluate(model, eval_set, eval));
        continue;
      }
      CurriculumSchedule schedule;
      schedule.order_kind = OrderKind{OrderCategory::shuffled, {}, {}};
      schedule.total_steps = config.atomic_budget_steps;
      schedule.batch_size = config.curriculum_train.batch_size;
      schedule.shuffle_seed = derive_seed(config.master_seed, "atomic",
                                          static_cast<std::uint64_t>(cell.model_level),
                                          static_cast<std::uint64_t>(cell.train_level),
                                          static_cast<std::uint64_t>(seed));
      Stage stage;
      stage.stage_index = 0;
      stage.steps = config.atomic_budget_steps;
      stage.source = "atomic:" + std::to_string(cell.train_level);
      for (const auto& p : train_set) stage.problem_ids.push_back(p.id);
      schedule.stages.push_back(std::move(stage));

      const auto metrics = run_schedule(model, schedule, train_set, eval_set,
                                        config.curriculum_train, config.eval,
                                        eval.seed);
      finals.push_back(metrics.final_accuracy);
    }
    grid.mean[cell.row][cell.col] = mean(finals);
    grid.stddev[cell.row][cell.col] = sample_stddev(finals);
  });
  return grid;
}

std::vector<StageSweepEntry> run_stage_sweep(const PreparedExperiment& prepared,
                                             const ExperimentConfig& config) {
  const OrderKind kinds[] = {
      OrderKind{OrderCategory::level_up, {}, {}},
      OrderKind{OrderCategory::level_down, {}, {}},
      OrderKind{OrderCategory::shuffled, {}, {}},
  };
  struct Task {
    int num_stages;
    OrderKind kind;
    int seed;
  };
  std::vector<Task> tasks;
  for (int stages : config.stage_sweep)
    for (const auto& kind : kinds)
      for (int seed = 0; seed < config.num_seeds; ++seed)
        tasks.push_back(Task{stages, kind, seed});

  std::vector<double> finals(tasks.size(), 0.0);
  parallel_for(static_cast<int>(tasks.size()), config.jobs, [&](int idx) {
    const auto& task = tasks[static_cast<std::size_t>(idx)];
    ExperimentConfig staged = config;
    staged.num_stages = task.num_stages;
    const std::uint64_t seed = derive_seed(
        config.master_seed, "stage-sweep",
        fnv1a64(to_string(task.kind)) ^ static_cast<std::uint64_t>(task.num_stages),
        static_cast<std::uint64_t>(task.seed));
    const auto schedule = build_menu_schedule(task.kind, prepared.train_sets,
                                              prepared.train_pool, staged, seed);
    const auto metrics = run_schedule(
        prepared.start, schedule, prepared.train_pool, prepared.test_pool,
        config.curriculum_train, config.eval,
        derive_seed(config.master_seed, "stage-sweep-eval",
                    static_cast<std::uint64_t>(task.num_stages),
                    static_cast<std::uint64_t>(task.seed)));
    finals[static_cast<std::size_t>(idx)] = metrics.final_accuracy;
  });

  std::vector<StageSweepEntry> entries;
  for (int stages : config.stage_sweep) {
    for (const auto& kind : kinds) {
      StageSweepEntry entry;
      entry.num_stages = stages;
      entry.kind = to_string(kind);
      std::vector<double> kind_finals;
      for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].num_stages == stages &&
            to_string(tasks[i].kind) == entry.kind)
          kind_finals.push_back(finals[i]);
      entry.runs = static_cast<int>(kind_finals.size());
      entry.mean_final = mean(kind_finals);
      entry.std_final = sample_stddev(kind_finals);
      entries.push_back(std::move(entry));
    }
  }
  return entries;
}

void write_stage_sweep_csv(const fs::path& path,
                           const std::vector<StageSweepEntry>& entries) {
  std::ostringstream out;
  out << "num_stages,schedule_kind,runs,mean_final,std_final\n";
  for (const auto& entry : entries)
    out << entry.num_stages << ',' << entry.kind << ',' << entry.runs << ','
        << double_repr(entry.mean_final) << ',' << double_repr(entry.std_final)
        << '\n';
  write_text_file_atomic(path, out.str());
}

TransferReport run_transfer_experiment(const ExperimentConfig& config,
                                       const fs::path& out_dir) {
  if (!config.transfer_pool)
    throw ValidationError("transfer_pool", "transfer experiment needs a transfer pool");
  if (!config.transfer_test_pool)
    throw ValidationError("transfer_test_pool",
                          "transfer experiment needs a transfer test pool");
  const PreparedExperiment prepared = prepare_experiment(config);
  const auto transfer_pool = generate_pool(*config.transfer_pool);
  const auto transfer_test = generate_pool(*config.transfer_test_pool);
  fs::create_directories(out_dir);

  TransferReport report;

  // (a) Reference-pool curricula scored on the transfer-test pool.
  std::vector<ScheduledRun> planned;
  const OrderKind ref_kinds[] = {
      OrderKind{OrderCategory::level_up, {}, {}},
      OrderKind{OrderCategory::level_down, {}, {}},
      OrderKind{OrderCategory::shuffled, {}, {}},
      OrderKind{OrderCategory::iid, {}, {}},
  };
  for (const auto& kind : ref_kinds)
    for (int seed = 0; seed < config.num_seeds; ++seed)
      planned.push_back(ScheduledRun{kind, "ref_" + to_string(kind), seed,
                                     &prepared.train_sets, prepared.train_pool,
                                     transfer_test});

  // (b) Neo-transitional curricula on the transfer pool.
  report.match = match_neo_transitional(
      prepared.train_sets, prepared.train_pool, transfer_pool, config.thresholds,
      config.embed_mode, &prepared.series.models.back());
  const TransitionalSets neo_sets = to_transitional_sets(report.match);
  std::vector<int> starved;
  for (const auto& [tau, ids] : prepared.train_sets.by_level) {
    if (ids.empty()) continue;
    const auto it = neo_sets.by_level.find(tau);
    if (it == neo_sets.by_level.end() || it->second.empty()) starved.push_back(tau);
  }
  if (!starved.empty()) {
    std::string levels;
    for (int tau : starved) levels += (levels.empty() ? "" : ", ") + std::to_string(tau);
    throw Error("neo matching yielded no problems for level(s) " + levels +
                "; consider relaxing thresholds (mean_min/max_min)");
  }

  const OrderKind neo_kinds[] = {
      OrderKind{OrderCategory::level_up, {}, {}},
      OrderKind{OrderCategory::level_down, {}, {}},
      OrderKind{OrderCategory::shuffled, {}, {}},
  };
  for (const auto& kind : neo_kinds)
    for (int seed = 0; seed < config.num_seeds; ++seed)
      planned.push_back(ScheduledRun{kind, "neo_" + to_string(kind), seed,
                                     &neo_sets, transfer_pool, transfer_test});
  const OrderKind target_kinds[] = {
      OrderKind{OrderCategory::iid, {}, {}},
      OrderKind{OrderCategory::external, DifficultyFeature::chain_length,
                Direction::ascending},
  };
  for (const auto& kind : target_kinds)
    for (int seed = 0; seed < config.num_seeds; ++seed)
      planned.push_back(ScheduledRun{kind, "target_" + to_string(kind), seed,
                                     nullptr, transfer_pool, transfer_test});

  execute_runs(planned, config, prepared.start, out_dir / "schedules",
               report.runs, report.failures);

  std::vector<RunMetrics> cross_runs, neo_runs;
  for (const auto& run : report.runs) {
    if (run.schedule_kind.starts_with("ref_"))
      cross_runs.push_back(run);
    else
      neo_runs.push_back(run);
  }
  report.cross_pool = aggregate_by_kind(cross_runs, "ref_iid");
  report.neo = aggregate_by_kind(neo_runs, "target_iid");

  write_metrics_csv(out_dir / "transfer_metrics.csv", report.runs);
  write_timings_csv(out_dir / "transfer_timings.csv", report.runs);
  write_match_report_json(out_dir / "neo_match.json", report.match);

  nlohmann::ordered_json doc;
  doc["cross_pool"] = aggregate_entries_json(report.cross_pool);
  doc["neo"] = aggregate_entries_json(report.neo);
  doc["neo_unmatched"] = report.match.unmatched;
  nlohmann::ordered_json level_counts = nlohmann::ordered_json::object();
  for (const auto& [tau, ids] : report.match.neo_by_level)
    level_counts[std::to_string(tau)] = ids.size();
  doc["neo_level_counts"] = level_counts;
  auto failures = nlohmann::ordered_json::array();
  for (const auto& f : report.failures)
    failures.push_back({{"kind", f.schedule_kind},
                        {"seed_index", f.seed_index},
                        {"message", f.message}});
  doc["failures"] = failures;
  write_text_file_atomic(out_dir / "transfer_aggregate.json", doc.dump(2) + "\n");
  return report;
}

void write_metrics_csv(const fs::path& path, const std::vector<RunMetrics>& runs) {
  std::ostringstream out;
  out << "schedule_kind,seed_index,final_accuracy,trajectory\n";
  for (const auto& run : runs)
    out << run.schedule_kind << ',' << run.seed_index << ','
        << double_repr(run.final_accuracy) << ','
        << join_trajectory(run.trajectory) << '\n';
  write_text_file_atomic(path, out.str());
}

void write_timings_csv(const fs::path& path, const std::vector<RunMetrics>& runs) {
  std::ostringstream out;
  out << "schedule_kind,seed_index,wall_time_sec\n";
  for (const auto& run : runs)
    out << run.schedule_kind << ',' << run.seed_index << ','
        << double_repr(run.wall_time_sec) << '\n';
  write_text_file_atomic(path, out.str());
}

void write_interpretability_csv(const fs::path& path,
                                const InterpretabilityReport& report) {
  std::ostringstream out;
  out << "collection,level,count,mean_chain_length,mean_encoded_length,"
         "mean_adds,mean_subs,mean_muls,mean_max_operand\n";
  auto emit = [&](const std::string& collection, const LevelStatsRow& row) {
    out << collection << ',' << row.level << ',' << row.count;
    const double values[] = {row.mean_chain_length, row.mean_encoded_length,
                             row.mean_adds,        row.mean_subs,
                             row.mean_muls,        row.mean_max_operand};
    for (double v : values) {
      out << ',';
      if (row.defined) out << double_repr(v);
    }
    out << '\n';
  };
  for (const auto& row : report.stats.transitional) emit("transitional", row);
  for (const auto& row : report.stats.all_solved) emit("all_solved", row);
  write_text_file_atomic(path, out.str());
}

void write_atomic_grid_csv(const fs::path& path, const AtomicGrid& grid) {
  std::ostringstream out;
  out << "model_level";
  for (int j : grid.train_levels) out << ",train_d" << j << "_mean,train_d" << j << "_std";
  out << '\n';
  for (std::size_t r = 0; r < grid.model_levels.size(); ++r) {
    out << grid.model_levels[r];
    for (std::size_t c = 0; c < grid.train_levels.size(); ++c) {
      out << ',';
      if (grid.mean[r][c]) out << double_repr(*grid.mean[r][c]);
      out << ',';
      if (grid.stddev[r][c]) out << double_repr(*grid.stddev[r][c]);
    }
    out << '\n';
  }
  write_text_file_atomic(path, out.str());
}

void write_schema_json(const fs::path& path) {
  nlohmann::ordered_json doc;
  doc["metrics.csv"] = {
      {"schedule_kind", "curriculum kind label, e.g. level_up or external:chain_length:ascending"},
      {"seed_index", "0-based run seed index"},
      {"final_accuracy", "test accuracy of the final checkpoint"},
      {"trajectory", "semicolon-joined test accuracies: baseline then after each stage"}};
  doc["timings.csv"] = {
      {"schedule_kind", "curriculum kind label"},
      {"seed_index", "0-based run seed index"},
      {"wall_time_sec", "run wall time in seconds (not reproducible; excluded from metrics.csv)"}};
  doc["interpretability.csv"] = {
      {"collection", "transitional (per level) or all_solved (per series model)"},
      {"level", "transition point tau, or model index for all_solved"},
      {"count", "problems in the collection"},
      {"mean_*", "mean ground-truth feature; empty when count is 0"}};
  doc["atomic_grid.csv"] = {
      {"model_level", "series index i of the fine-tuned model"},
      {"train_dJ_mean", "mean accuracy on held-out level i+1 after training on level J only; empty if level J is empty"},
      {"train_dJ_std", "std across atomic seeds"}};
  doc["stage_sweep.csv"] = {
      {"num_stages", "stage count the transitional curricula were rebuilt with"},
      {"schedule_kind", "level_up, level_down or shuffled"},
      {"runs", "seeds aggregated"},
      {"mean_final", "mean final test accuracy"},
      {"std_final", "std across seeds"}};
  doc["aggregate.json"] = {
      {"per_schedule", "mean/std/se of final accuracy per kind and relative improvement over iid"},
      {"correlations", "Spearman rho between level index and mean feature, per collection"},
      {"excluded_counts", "rows excluded as always/never solved or inconsistent"}};
  write_text_file_atomic(path, doc.dump(2) + "\n");
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig config;
  // Chain lengths weighted toward short chains so the learnable mass gives
  // the checkpoint series a wide accuracy span.
  const std::vector<double> lengths = {6.0, 5.0, 4.0, 3.0, 2.0, 1.0};
  config.train_pool = PoolSpec{7, 6, lengths, {1.0, 1.0, 1.0}, 4000, 11, "train"};
  config.val_pool = PoolSpec{7, 6, lengths, {1.0, 1.0, 1.0}, 800, 12, "val"};
  config.test_pool = PoolSpec{7, 6, lengths, {1.0, 1.0, 1.0}, 2000, 13, "test"};
  // Transfer pools skew toward the hard operation (distribution shift).
  config.transfer_pool =
      PoolSpec{7, 6, lengths, {1.0, 1.0, 2.0}, 3000, 31, "transfer"};
  config.transfer_test_pool =
      PoolSpec{7, 6, lengths, {1.0, 1.0, 2.0}, 1500, 32, "transfer_test"};

  config.learner.hidden_widths = {64};
  config.learner.init_scale = 0.3;
  config.learner.seed = 7;

  // Tiny budget tier scaled to this domain: 90 steps of batch 64 with weight
  // decay 1e-6; the learning rate is scaled for a small tanh net.
  config.curriculum_train = TrainSpec{0.1, 1e-6, 64, 90, 0};

  config.series.kind = SeriesKind::checkpoint;
  config.series.delta = 0.05;
  config.series.checkpoint_interval = 500;
  config.series.base_train = TrainSpec{1.0, 1e-6, 64, 12000, 21};

  config.schedule_menu = {
      OrderKind{OrderCategory::level_up, {}, {}},
      OrderKind{OrderCategory::level_down, {}, {}},
      OrderKind{OrderCategory::shuffled, {}, {}},
      OrderKind{OrderCategory::iid, {}, {}},
      OrderKind{OrderCategory::external, DifficultyFeature::chain_length,
                Direction::ascending},
      OrderKind{OrderCategory::external, DifficultyFeature::encoded_length,
                Direction::ascending},
  };
  config.num_stages = 3;
  config.num_seeds = 10;
  config.eval = EvalSpec{8, 0.0, 1.0, 0};

  config.thresholds = MatchThresholds{0.65, 0.8};
  config.embed_mode = EmbedMode::feature;
  config.atomic_budget_steps = 30;
  config.atomic_num_seeds = 3;
  config.master_seed = 17;
  config.jobs = 1;
  return config;
}

}  // namespace levelup
