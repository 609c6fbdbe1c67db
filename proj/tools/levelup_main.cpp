// Command-line entry point: wires the JSON config to the pipeline stages.
// Subcommands: gen, series, extract, schedule, run, transfer, report.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "levelup/config.hpp"
#include "levelup/curriculum.hpp"
#include "levelup/errors.hpp"
#include "levelup/harness.hpp"
#include "levelup/io.hpp"
#include "levelup/series.hpp"
#include "levelup/taskgen.hpp"
#include "levelup/transfer.hpp"
#include "levelup/transitional.hpp"

namespace {

namespace fs = std::filesystem;
using levelup::AppConfig;

constexpr const char* kToolVersion = "0.1.0";

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  bool verbose = false;
};

void note(const GlobalArgs& args, const std::string& message) {
  if (args.verbose) std::cerr << "levelup: " << message << "\n";
}

AppConfig load_config(const GlobalArgs& args) {
  AppConfig config = levelup::load_app_config(
      args.config_path.empty() ? fs::path{} : fs::path(args.config_path),
      args.overrides);
  if (args.seed_set) config.experiment.master_seed = args.seed;
  if (args.jobs > 0) config.experiment.jobs = args.jobs;
  return config;
}

std::string config_hash(const AppConfig& config) {
  return levelup::fnv1a64_hex(levelup::to_json(config).dump());
}

void write_manifest(const GlobalArgs& args, const AppConfig& config,
                    const std::string& command,
                    const std::map<std::string, std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  nlohmann::ordered_json doc;
  doc["tool_version"] = kToolVersion;
  doc["command"] = command;
  doc["config_hash"] = config_hash(config);
  nlohmann::ordered_json in = nlohmann::ordered_json::object();
  for (const auto& [path, hash] : inputs) in[path] = hash;
  doc["inputs"] = in;
  doc["outputs"] = outputs;
  levelup::write_text_file_atomic(fs::path(args.out_dir) / "manifest.json",
                                  doc.dump(2) + "\n");
}

std::map<std::string, std::string> hash_inputs(const std::vector<std::string>& paths) {
  std::map<std::string, std::string> hashes;
  for (const auto& path : paths)
    if (!path.empty()) hashes[path] = levelup::file_hash_hex(path);
  return hashes;
}

int cmd_gen(const GlobalArgs& args) {
  const AppConfig config = load_config(args);
  const auto& exp = config.experiment;
  std::vector<std::pair<std::string, const levelup::PoolSpec*>> pools = {
      {"train", &exp.train_pool}, {"val", &exp.val_pool}, {"test", &exp.test_pool}};
  if (exp.transfer_pool) pools.emplace_back("transfer", &*exp.transfer_pool);
  if (exp.transfer_test_pool)
    pools.emplace_back("transfer_test", &*exp.transfer_test_pool);

  std::vector<std::string> outputs;
  for (const auto& [name, spec] : pools) {
    const fs::path path = fs::path(args.out_dir) / (name + ".jsonl");
    note(args, "generating pool '" + name + "' (" + std::to_string(spec->size) +
                   " problems)");
    levelup::write_pool_jsonl(path, levelup::generate_pool(*spec));
    outputs.push_back(path.string());
  }
  write_manifest(args, config, "gen", {}, outputs);
  return 0;
}

int cmd_series(const GlobalArgs& args) {
  const AppConfig config = load_config(args);
  if (config.irt_series)
    throw levelup::ValidationError(
        "series.kind", "the irt oracle series is not trained; use it directly with extract");
  const auto prepared = levelup::prepare_experiment(config.experiment);
  const fs::path manifest = levelup::save_series(
      args.out_dir, prepared.series, levelup::to_json(config)["series"].dump());
  note(args, "series of " + std::to_string(prepared.series.models.size()) +
                 " models saved to " + manifest.string());
  write_manifest(args, config, "series", {}, {manifest.string()});
  return 0;
}

int cmd_extract(const GlobalArgs& args, const std::string& pool_path,
                const std::string& series_path) {
  const AppConfig config = load_config(args);
  const auto pool = levelup::read_pool_jsonl(pool_path);

  levelup::SolvabilityMatrix matrix;
  if (config.irt_series) {
    const auto& irt = *config.irt_series;
    std::vector<double> difficulties;
    std::vector<std::string> ids;
    for (const auto& p : pool) {
      difficulties.push_back(irt.difficulty_of(p));
      ids.push_back(p.id);
    }
    const auto learners = irt.learners();
    matrix = levelup::build_matrix_irt(learners, difficulties, ids);
  } else {
    if (series_path.empty())
      throw levelup::ValidationError("--series",
                                     "required unless series.kind is irt");
    const auto series = levelup::load_series(series_path);
    matrix = levelup::build_matrix(series, pool);
  }
  const auto sets =
      levelup::extract(matrix, pool.empty() ? "" : pool.front().pool_tag);

  const fs::path matrix_path = fs::path(args.out_dir) / "matrix.csv";
  const fs::path sets_path = fs::path(args.out_dir) / "sets.json";
  levelup::write_matrix_csv(matrix_path, matrix);
  levelup::write_sets_json(sets_path, sets);
  note(args, std::to_string(sets.transitional_count()) +
                 " transitional problems across " +
                 std::to_string(sets.by_level.size()) + " levels");
  write_manifest(args, config, "extract", hash_inputs({pool_path, series_path}),
                 {matrix_path.string(), sets_path.string()});
  return 0;
}

int cmd_schedule(const GlobalArgs& args, const std::string& sets_path,
                 const std::string& pool_path) {
  const AppConfig config = load_config(args);
  const auto& exp = config.experiment;
  const long steps = exp.curriculum_train.max_steps;
  const int batch = exp.curriculum_train.batch_size;
  const std::uint64_t seed = levelup::derive_seed(exp.master_seed, "schedule-cmd");

  levelup::CurriculumSchedule schedule;
  switch (config.schedule_kind.category) {
    case levelup::OrderCategory::level_up:
    case levelup::OrderCategory::level_down:
    case levelup::OrderCategory::shuffled: {
      if (sets_path.empty())
        throw levelup::ValidationError("--sets", "required for transitional kinds");
      const auto sets = levelup::read_sets_json(sets_path);
      schedule = levelup::build_transitional_schedule(
          sets, config.schedule_kind, config.schedule_stages, steps, batch, seed);
      break;
    }
    case levelup::OrderCategory::iid:
    case levelup::OrderCategory::external: {
      if (pool_path.empty())
        throw levelup::ValidationError("--pool", "required for iid/external kinds");
      const auto pool = levelup::read_pool_jsonl(pool_path);
      if (config.schedule_kind.category == levelup::OrderCategory::iid)
        schedule = levelup::build_iid_schedule(pool, steps, batch, seed);
      else
        schedule = levelup::build_external_schedule(
            pool, config.schedule_kind.feature, config.schedule_kind.direction,
            config.schedule_stages, steps, batch, seed);
      break;
    }
  }
  const fs::path path = fs::path(args.out_dir) / "schedule.json";
  levelup::write_schedule_json(path, schedule);
  write_manifest(args, config, "schedule", hash_inputs({sets_path, pool_path}),
                 {path.string()});
  return 0;
}

int cmd_run(const GlobalArgs& args) {
  const AppConfig config = load_config(args);
  note(args, "running curriculum comparison into " + args.out_dir);
  const auto report =
      levelup::run_curriculum_comparison(config.experiment, args.out_dir);
  std::vector<std::string> outputs = {
      (fs::path(args.out_dir) / "metrics.csv").string(),
      (fs::path(args.out_dir) / "aggregate.json").string(),
      (fs::path(args.out_dir) / "interpretability.csv").string(),
      (fs::path(args.out_dir) / "schema.json").string()};
  write_manifest(args, config, "run", {}, outputs);
  for (const auto& entry : report.per_schedule)
    std::printf("%-40s mean=%.4f std=%.4f (n=%d)\n", entry.kind.c_str(),
                entry.mean_final, entry.std_final, entry.runs);
  if (!report.failures.empty()) {
    for (const auto& failure : report.failures)
      std::fprintf(stderr, "run failed: %s seed %d: %s\n",
                   failure.schedule_kind.c_str(), failure.seed_index,
                   failure.message.c_str());
    return 1;
  }
  return 0;
}

int cmd_transfer(const GlobalArgs& args) {
  const AppConfig config = load_config(args);
  note(args, "running transfer experiment into " + args.out_dir);
  const auto report =
      levelup::run_transfer_experiment(config.experiment, args.out_dir);
  write_manifest(args, config, "transfer", {},
                 {(fs::path(args.out_dir) / "transfer_metrics.csv").string(),
                  (fs::path(args.out_dir) / "transfer_aggregate.json").string(),
                  (fs::path(args.out_dir) / "neo_match.json").string()});
  for (const auto& entry : report.cross_pool)
    std::printf("%-40s mean=%.4f std=%.4f (n=%d)\n", entry.kind.c_str(),
                entry.mean_final, entry.std_final, entry.runs);
  for (const auto& entry : report.neo)
    std::printf("%-40s mean=%.4f std=%.4f (n=%d)\n", entry.kind.c_str(),
                entry.mean_final, entry.std_final, entry.runs);
  if (!report.failures.empty()) {
    for (const auto& failure : report.failures)
      std::fprintf(stderr, "run failed: %s seed %d: %s\n",
                   failure.schedule_kind.c_str(), failure.seed_index,
                   failure.message.c_str());
    return 1;
  }
  return 0;
}

int cmd_report(const GlobalArgs& args, const std::string& pool_path,
               const std::string& matrix_path, const std::string& sets_path) {
  const AppConfig config = load_config(args);
  const auto pool = levelup::read_pool_jsonl(pool_path);
  const auto sets = levelup::read_sets_json(sets_path);
  const auto matrix = levelup::read_matrix_csv(matrix_path, sets.series_id);
  const auto report = levelup::report_interpretability(sets, matrix, pool);

  const fs::path csv_path = fs::path(args.out_dir) / "interpretability.csv";
  levelup::write_interpretability_csv(csv_path, report);
  nlohmann::ordered_json correlations = nlohmann::ordered_json::array();
  for (const auto& c : report.correlations) {
    nlohmann::ordered_json entry = {{"collection", c.collection},
                                    {"feature", c.feature}};
    if (c.rho)
      entry["rho"] = *c.rho;
    else
      entry["rho"] = nullptr;
    entry["note"] = c.note;
    correlations.push_back(std::move(entry));
  }
  const fs::path corr_path = fs::path(args.out_dir) / "correlations.json";
  levelup::write_text_file_atomic(corr_path, correlations.dump(2) + "\n");
  write_manifest(args, config, "report",
                 hash_inputs({pool_path, matrix_path, sets_path}),
                 {csv_path.string(), corr_path.string()});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transitional-problem curricula on a synthetic arithmetic domain"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs args;
  app.add_option("--config", args.config_path, "JSON config file");
  app.add_option("--out", args.out_dir, "Output directory");
  app.add_option("--seed", args.seed, "Master seed override")
      ->each([&](const std::string&) { args.seed_set = true; });
  app.add_option("--set", args.overrides,
                 "Config override as dotted.key=value (repeatable)");
  app.add_option("--jobs", args.jobs, "Worker threads for independent runs");
  app.add_flag("-v,--verbose", args.verbose, "Progress notes on stderr");

  auto* gen = app.add_subcommand("gen", "Generate problem pools");
  auto* series = app.add_subcommand("series", "Train and select a model series");
  auto* extract = app.add_subcommand("extract", "Build the solvability matrix and transitional sets");
  std::string pool_path, series_path, sets_path, matrix_path;
  extract->add_option("--pool", pool_path, "Pool JSONL file")->required();
  extract->add_option("--series", series_path, "Series manifest JSON");
  auto* schedule = app.add_subcommand("schedule", "Build a curriculum schedule");
  schedule->add_option("--sets", sets_path, "Transitional sets JSON");
  schedule->add_option("--pool", pool_path, "Pool JSONL file");
  auto* run = app.add_subcommand("run", "Run the curriculum comparison experiment");
  auto* transfer = app.add_subcommand("transfer", "Run the transfer experiment");
  auto* report = app.add_subcommand("report", "Interpretability tables from saved artifacts");
  report->add_option("--pool", pool_path, "Pool JSONL file")->required();
  report->add_option("--matrix", matrix_path, "Solvability matrix CSV")->required();
  report->add_option("--sets", sets_path, "Transitional sets JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(args);
    if (series->parsed()) return cmd_series(args);
    if (extract->parsed()) return cmd_extract(args, pool_path, series_path);
    if (schedule->parsed()) return cmd_schedule(args, sets_path, pool_path);
    if (run->parsed()) return cmd_run(args);
    if (transfer->parsed()) return cmd_transfer(args);
    if (report->parsed()) return cmd_report(args, pool_path, matrix_path, sets_path);
  } catch (const levelup::ValidationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
