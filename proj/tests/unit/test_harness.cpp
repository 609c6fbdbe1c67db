#include <doctest.h>

#include <filesystem>
#include <set>

#include "levelup/config.hpp"
#include "levelup/harness.hpp"
#include "levelup/io.hpp"
#include "levelup/stats.hpp"

using namespace levelup;

namespace {

namespace fs = std::filesystem;

// Shrunk default: same structure, desk-scale-tests budget.
ExperimentConfig tiny_config() {
  ExperimentConfig config = default_experiment_config();
  config.train_pool = PoolSpec{5, 3, {}, {1.0, 1.0, 1.0}, 500, 201, "train"};
  config.val_pool = PoolSpec{5, 3, {}, {1.0, 1.0, 1.0}, 200, 202, "val"};
  config.test_pool = PoolSpec{5, 3, {}, {1.0, 1.0, 1.0}, 300, 203, "test"};
  config.learner = LearnerConfig{0, {10}, 0, 0.5, 7};
  config.curriculum_train = TrainSpec{0.3, 1e-6, 16, 12, 0};
  config.series.kind = SeriesKind::checkpoint;
  config.series.delta = 0.03;
  config.series.checkpoint_interval = 15;
  config.series.base_train = TrainSpec{0.3, 1e-6, 16, 150, 21};
  config.num_stages = 2;
  config.num_seeds = 2;
  config.atomic_num_seeds = 0;  // grid tested separately
  config.jobs = 2;
  return config;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("prepare_experiment derives dimensions and builds valid artifacts") {
  const auto config = tiny_config();
  const auto prepared = prepare_experiment(config);
  CHECK(prepared.learner.input_dim == encoded_dim(5, 3));
  CHECK(prepared.learner.num_classes == 5);
  CHECK(validate_series(prepared.series).ok);
  CHECK(prepared.series.models.size() >= 2);
  CHECK(prepared.train_matrix.rows() == 500);
  CHECK(prepared.test_matrix.rows() == 300);
  CHECK(prepared.start.checkpoint_id == prepared.series.models.front().checkpoint_id);
  // partition property on a real matrix
  CHECK(prepared.train_sets.excluded.always + prepared.train_sets.excluded.never +
            prepared.train_sets.excluded.inconsistent +
            prepared.train_sets.transitional_count() ==
        500);
}

TEST_CASE("curriculum comparison: counts, parity, isolation, determinism") {
  const auto config = tiny_config();
  const auto out_a = fresh_dir("levelup_harness_a");
  const auto report = run_curriculum_comparison(config, out_a);

  CHECK(report.failures.empty());
  // num_seeds x menu kinds runs persisted
  CHECK(report.runs.size() == config.schedule_menu.size() *
                                  static_cast<std::size_t>(config.num_seeds));
  for (const auto& run : report.runs) {
    CHECK(run.final_accuracy == run.trajectory.back());
    CHECK(run.trajectory.size() >= 2);
  }

  // aggregation recomputes from persisted runs
  for (const auto& entry : report.per_schedule) {
    std::vector<double> finals;
    for (const auto& run : report.runs)
      if (run.schedule_kind == entry.kind) finals.push_back(run.final_accuracy);
    CHECK(entry.runs == static_cast<int>(finals.size()));
    CHECK(entry.mean_final == doctest::Approx(mean(finals)).epsilon(1e-12));
    CHECK(entry.std_final == doctest::Approx(sample_stddev(finals)).epsilon(1e-12));
  }

  // compute parity and test isolation, asserted from the persisted schedules
  const auto test_pool = generate_pool(config.test_pool);
  std::set<std::string> test_ids;
  for (const auto& p : test_pool) test_ids.insert(p.id);
  long expected_examples = -1;
  for (const auto& entry : fs::directory_iterator(out_a / "schedules")) {
    const auto schedule = read_schedule_json(entry.path());
    long examples = 0;
    for (const auto& [stage, ids] : schedule_batches(schedule)) {
      examples += static_cast<long>(ids.size());
      for (const auto& id : ids) CHECK(test_ids.count(id) == 0);
    }
    if (expected_examples < 0) expected_examples = examples;
    CHECK(examples == expected_examples);  // identical budget for every kind
  }
  CHECK(expected_examples ==
        config.curriculum_train.max_steps * config.curriculum_train.batch_size);

  // byte-identical outputs on a rerun
  const auto out_b = fresh_dir("levelup_harness_b");
  run_curriculum_comparison(config, out_b);
  CHECK(read_text_file(out_a / "metrics.csv") == read_text_file(out_b / "metrics.csv"));
  CHECK(read_text_file(out_a / "aggregate.json") ==
        read_text_file(out_b / "aggregate.json"));
  CHECK(read_text_file(out_a / "interpretability.csv") ==
        read_text_file(out_b / "interpretability.csv"));
  CHECK(fs::exists(out_a / "schema.json"));
  CHECK(fs::exists(out_a / "timings.csv"));

  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("atomic grid with budget zero is row-constant") {
  auto config = tiny_config();
  config.atomic_budget_steps = 0;
  config.atomic_num_seeds = 2;
  const auto prepared = prepare_experiment(config);
  if (prepared.series.models.size() < 3) return;  // needs an interior level
  const auto grid = run_atomic_grid(prepared, config);
  CHECK(grid.mean.size() == grid.model_levels.size());
  for (std::size_t r = 0; r < grid.model_levels.size(); ++r) {
    const int i = grid.model_levels[r];
    const auto eval_set_ids = prepared.test_sets.by_level.at(i + 1);
    REQUIRE(!eval_set_ids.empty());
    std::optional<double> reference;
    for (std::size_t c = 0; c < grid.train_levels.size(); ++c) {
      if (!grid.mean[r][c]) continue;  // absent cell (empty training level)
      CHECK(*grid.stddev[r][c] == 0.0);
      if (!reference) reference = *grid.mean[r][c];
      CHECK(*grid.mean[r][c] == doctest::Approx(*reference));
    }
  }
}

TEST_CASE("interpretability report flags degenerate correlations") {
  // constant feature: build a pool whose chains all have length 2
  PoolSpec spec{5, 3, {0.0, 1.0, 0.0}, {1.0, 1.0, 1.0}, 120, 11, "ref"};
  const auto pool = generate_pool(spec);
  std::vector<double> difficulties;
  std::vector<std::string> ids;
  for (const auto& p : pool) {
    difficulties.push_back(p.features.max_operand);  // varies, so levels exist
    ids.push_back(p.id);
  }
  std::vector<IrtLearner> learners;
  for (double a : {0.5, 1.5, 2.5, 3.5, 4.5})
    learners.push_back(IrtLearner{a, IrtLearner::Mode::deterministic, 0});
  const auto matrix = build_matrix_irt(learners, difficulties, ids);
  const auto sets = extract(matrix, "ref");
  const auto report = report_interpretability(sets, matrix, pool);

  bool found_constant = false;
  for (const auto& entry : report.correlations) {
    if (entry.collection == "transitional" && entry.feature == "chain_length") {
      CHECK_FALSE(entry.rho.has_value());
      CHECK(entry.note.find("undefined") != std::string::npos);
      found_constant = true;
    }
    if (entry.collection == "transitional" && entry.feature == "max_operand") {
      REQUIRE(entry.rho.has_value());
      CHECK(*entry.rho == doctest::Approx(1.0));  // difficulty == the feature
    }
  }
  CHECK(found_constant);
  // all-solved table has one row per series model
  CHECK(report.stats.all_solved.size() == 5);
}

TEST_CASE("interpretability omits correlations for fewer than 3 levels") {
  PoolSpec spec{5, 3, {}, {1.0, 1.0, 1.0}, 60, 13, "ref"};
  const auto pool = generate_pool(spec);
  std::vector<double> difficulties;
  std::vector<std::string> ids;
  for (const auto& p : pool) {
    difficulties.push_back(p.features.chain_length);
    ids.push_back(p.id);
  }
  std::vector<IrtLearner> learners = {IrtLearner{1.0, IrtLearner::Mode::deterministic, 0},
                                      IrtLearner{2.0, IrtLearner::Mode::deterministic, 0}};
  const auto matrix = build_matrix_irt(learners, difficulties, ids);
  const auto sets = extract(matrix, "ref");  // only tau=1 possible
  const auto report = report_interpretability(sets, matrix, pool);
  for (const auto& entry : report.correlations)
    if (entry.collection == "transitional") {
      CHECK_FALSE(entry.rho.has_value());
      CHECK(entry.note == "fewer than 3 non-empty levels");
    }
}

TEST_CASE("transfer experiment recovers duplicates and reports both sections") {
  auto config = tiny_config();
  config.num_seeds = 2;
  // transfer pool duplicates the reference pool (same generator and seed)
  PoolSpec transfer = config.train_pool;
  transfer.pool_tag = "transfer";
  config.transfer_pool = transfer;
  PoolSpec transfer_test = config.train_pool;
  transfer_test.pool_tag = "transfer_test";
  transfer_test.seed = 204;
  transfer_test.size = 200;
  config.transfer_test_pool = transfer_test;

  const auto out = fresh_dir("levelup_transfer_out");
  const auto report = run_transfer_experiment(config, out);
  CHECK(report.failures.empty());

  // recovery property: duplicated transitional problems land on their level
  const auto prepared = prepare_experiment(config);
  const auto transfer_pool = generate_pool(*config.transfer_pool);
  long recovered = 0, expected = 0;
  for (std::size_t i = 0; i < transfer_pool.size(); ++i) {
    // same index = duplicate of the reference problem
    const auto& reference_id = prepared.train_matrix.problem_ids[i];
    int tau = 0;
    for (const auto& [level, ids] : prepared.train_sets.by_level)
      for (const auto& id : ids)
        if (id == reference_id) tau = level;
    if (tau == 0) continue;
    ++expected;
    const auto it = report.match.stats.find(transfer_pool[i].id);
    if (it != report.match.stats.end() && it->second.matched &&
        it->second.level == tau)
      ++recovered;
  }
  REQUIRE(expected > 0);
  CHECK(static_cast<double>(recovered) >= 0.95 * static_cast<double>(expected));

  // both sections present with per-kind means
  std::set<std::string> cross_kinds, neo_kinds;
  for (const auto& entry : report.cross_pool) cross_kinds.insert(entry.kind);
  for (const auto& entry : report.neo) neo_kinds.insert(entry.kind);
  CHECK(cross_kinds.count("ref_level_up") == 1);
  CHECK(cross_kinds.count("ref_iid") == 1);
  CHECK(neo_kinds.count("neo_level_up") == 1);
  CHECK(neo_kinds.count("target_iid") == 1);
  CHECK(fs::exists(out / "neo_match.json"));
  CHECK(fs::exists(out / "transfer_metrics.csv"));
  fs::remove_all(out);
}

TEST_CASE("sub-run failures produce a partial report with records") {
  auto config = tiny_config();
  // hard_op_count is constant 0 when the op mix has no multiplications, so
  // this external schedule cannot stratify and the runs fail.
  config.train_pool.op_mix = {1.0, 1.0, 0.0};
  config.series.delta = 0.01;  // the addition-only domain learns more slowly
  config.schedule_menu = {
      OrderKind{OrderCategory::level_up, {}, {}},
      OrderKind{OrderCategory::external, DifficultyFeature::hard_op_count,
                Direction::ascending},
  };
  const auto out = fresh_dir("levelup_harness_fail");
  const auto report = run_curriculum_comparison(config, out);
  CHECK(report.failures.size() == static_cast<std::size_t>(config.num_seeds));
  for (const auto& failure : report.failures) {
    CHECK(failure.schedule_kind == "external:hard_op_count:ascending");
    CHECK(failure.message.find("degenerate stratification") != std::string::npos);
  }
  // the level_up runs still completed
  CHECK(report.runs.size() == static_cast<std::size_t>(config.num_seeds));
  CHECK(read_text_file(out / "aggregate.json").find("degenerate") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("stage sweep reports each stage count without asserting an ordering") {
  auto config = tiny_config();
  config.stage_sweep = {1, 2};
  config.num_seeds = 2;
  const auto out = fresh_dir("levelup_harness_sweep");
  run_curriculum_comparison(config, out);
  REQUIRE(fs::exists(out / "stage_sweep.csv"));
  const auto csv = read_text_file(out / "stage_sweep.csv");
  CHECK(csv.find("1,level_up") != std::string::npos);
  CHECK(csv.find("2,level_down") != std::string::npos);
  // 2 stage counts x 3 kinds + header
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  fs::remove_all(out);
}

TEST_CASE("app config defaults, strict keys and overrides") {
  const auto defaults = default_app_config();
  CHECK(defaults.experiment.num_seeds == 10);
  CHECK(defaults.experiment.thresholds.mean_min == 0.65);
  CHECK(defaults.experiment.thresholds.max_min == 0.8);

  nlohmann::json doc = to_json(defaults);
  const auto parsed = parse_app_config(doc);
  CHECK(to_json(parsed).dump() == to_json(defaults).dump());

  doc["bogus_section"] = 1;
  CHECK_THROWS_AS(parse_app_config(doc), ValidationError);
  doc.erase("bogus_section");
  doc["pools"]["train"]["bogus"] = 1;
  try {
    parse_app_config(doc);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "pools.train.bogus");
  }

  nlohmann::json overridden = to_json(defaults);
  apply_override(overridden, "experiment.num_seeds=3");
  apply_override(overridden, "pools.train.pool_tag=renamed");
  const auto parsed2 = parse_app_config(overridden);
  CHECK(parsed2.experiment.num_seeds == 3);
  CHECK(parsed2.experiment.train_pool.pool_tag == "renamed");
  CHECK_THROWS_AS(apply_override(overridden, "no-equals-sign"), ValidationError);

  // wrong type is rejected with the dotted path
  nlohmann::json bad = to_json(defaults);
  bad["experiment"]["num_seeds"] = "many";
  CHECK_THROWS_AS(parse_app_config(bad), ValidationError);
}

TEST_SUITE_END();
