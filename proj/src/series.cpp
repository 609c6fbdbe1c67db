#include "levelup/series.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "levelup/io.hpp"
#include "levelup/rng.hpp"

namespace levelup {

namespace {

std::vector<Problem> gather(std::span<const Problem> pool,
                            std::span<const int> indices) {
  std::vector<Problem> batch;
  batch.reserve(indices.size());
  for (int i : indices) batch.push_back(pool[static_cast<std::size_t>(i)]);
  return batch;
}

void strict_increase_check(const std::vector<Checkpoint>& models,
                           const char* what) {
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (!(models[i].val_accuracy > models[i - 1].val_accuracy)) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "%s not a valid series: member %zu (%s, acc=%.6f) does not "
                    "exceed member %zu (%s, acc=%.6f)",
                    what, i, models[i].checkpoint_id.c_str(), models[i].val_accuracy,
                    i - 1, models[i - 1].checkpoint_id.c_str(),
                    models[i - 1].val_accuracy);
      throw SeriesError(buf);
    }
  }
}

ModelSeries assemble(std::vector<Checkpoint> models, SeriesKind kind,
                     const std::string& series_id) {
  ModelSeries series;
  series.kind = kind;
  series.series_id = series_id;
  series.strengths.reserve(models.size());
  for (const auto& m : models) series.strengths.push_back(m.val_accuracy);
  series.models = std::move(models);
  return series;
}

}  // namespace

std::string_view to_string(SeriesKind kind) {
  switch (kind) {
    case SeriesKind::checkpoint: return "checkpoint";
    case SeriesKind::family: return "family";
    case SeriesKind::adaptation: return "adaptation";
  }
  return "checkpoint";
}

SeriesKind parse_series_kind(std::string_view name) {
  if (name == "checkpoint") return SeriesKind::checkpoint;
  if (name == "family") return SeriesKind::family;
  if (name == "adaptation") return SeriesKind::adaptation;
  throw ValidationError("series.kind", "unknown kind: " + std::string(name));
}

std::vector<int> draw_batch_indices(std::size_t pool_size, int batch_size,
                                    std::uint64_t seed, std::string_view tag,
                                    long step) {
  Rng rng(derive_seed(seed, tag, static_cast<std::uint64_t>(step)));
  std::vector<int> indices(static_cast<std::size_t>(batch_size));
  for (auto& idx : indices) idx = rng.uniform_int(static_cast<int>(pool_size));
  return indices;
}

std::vector<Checkpoint> train_and_collect(const LearnerConfig& base,
                                          std::span<const Problem> train_pool,
                                          std::span<const Problem> val_pool,
                                          const SeriesSpec& spec) {
  if (spec.kind != SeriesKind::checkpoint)
    throw ValidationError("series.kind", "train_and_collect requires checkpoint kind");
  if (spec.checkpoint_interval < 1)
    throw ValidationError("series.checkpoint_interval", "must be >= 1");
  if (train_pool.empty()) throw ValidationError("train_pool", "must be non-empty");
  if (val_pool.empty()) throw ValidationError("val_pool", "must be non-empty");
  validate(spec.base_train);

  Checkpoint current = init(base);
  std::vector<Checkpoint> collected;
  for (long step = 1; step <= spec.base_train.max_steps; ++step) {
    const auto indices = draw_batch_indices(train_pool.size(), spec.base_train.batch_size,
                                            spec.base_train.shuffle_seed, "series-step", step);
    const auto batch = gather(train_pool, indices);
    try {
      current = train_step(current, batch, spec.base_train);
    } catch (const NumericError& e) {
      Checkpoint last_good = collected.empty() ? init(base) : collected.back();
      throw TrainingDiverged(std::string("training diverged: ") + e.what(),
                             std::move(last_good));
    }
    if (step % spec.checkpoint_interval == 0) {
      Checkpoint snap = current;
      snap.val_accuracy = evaluate(snap, val_pool, EvalSpec{});
      snap.checkpoint_id = "ckpt-s" + std::to_string(snap.steps_trained);
      collected.push_back(std::move(snap));
    }
  }
  return collected;
}

ModelSeries select_by_delta(const std::vector<Checkpoint>& checkpoints,
                            double delta, const std::string& series_id) {
  if (!(delta >= 0.0)) throw ValidationError("delta", "must be >= 0");
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i].steps_trained < checkpoints[i - 1].steps_trained)
      throw ValidationError("checkpoints", "must be ordered by steps_trained");

  std::vector<Checkpoint> kept;
  for (const auto& ckpt : checkpoints) {
    if (kept.empty()) {
      kept.push_back(ckpt);
      continue;
    }
    const double last = kept.back().val_accuracy;
    if (ckpt.val_accuracy >= last + delta && ckpt.val_accuracy > last)
      kept.push_back(ckpt);
  }
  if (kept.size() < 2) {
    double max_delta = 0.0;
    for (std::size_t i = 1; i < checkpoints.size(); ++i)
      max_delta = std::max(max_delta, checkpoints[i].val_accuracy -
                                          checkpoints.front().val_accuracy);
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "series too flat: fewer than 2 checkpoints selected "
                  "(max achievable delta = %.6g)",
                  max_delta);
    throw SeriesError(buf);
  }
  return assemble(std::move(kept), SeriesKind::checkpoint, series_id);
}

ModelSeries build_family_series(const LearnerConfig& base,
                                const std::vector<int>& width_list,
                                std::span<const Problem> train_pool,
                                std::span<const Problem> val_pool,
                                const TrainSpec& train,
                                const std::string& series_id) {
  if (width_list.size() < 2)
    throw ValidationError("width_list", "need at least 2 widths");
  for (std::size_t i = 1; i < width_list.size(); ++i)
    if (width_list[i] <= width_list[i - 1])
      throw ValidationError("width_list", "widths must be strictly increasing");
  if (base.hidden_widths.empty())
    throw ValidationError("hidden_widths", "family series needs hidden layers");
  validate(train);

  std::vector<Checkpoint> members;
  for (int width : width_list) {
    LearnerConfig config = base;
    for (int& w : config.hidden_widths) w = width;
    Checkpoint ckpt = init(config);
    for (long step = 1; step <= train.max_steps; ++step) {
      const auto indices = draw_batch_indices(train_pool.size(), train.batch_size,
                                              train.shuffle_seed, "family-step", step);
      ckpt = train_step(ckpt, gather(train_pool, indices), train);
    }
    ckpt.val_accuracy = evaluate(ckpt, val_pool, EvalSpec{});
    ckpt.checkpoint_id = "family-w" + std::to_string(width);
    members.push_back(std::move(ckpt));
  }
  strict_increase_check(members, "family");
  return assemble(std::move(members), SeriesKind::family, series_id);
}

ModelSeries build_adaptation_series(const Checkpoint& base,
                                    const std::vector<long>& budgets,
                                    std::span<const Problem> adaptation_pool,
                                    std::span<const Problem> val_pool,
                                    const TrainSpec& train,
                                    const std::string& series_id) {
  if (budgets.size() < 2)
    throw ValidationError("adaptation_budgets", "need at least 2 budgets");
  if (budgets.front() < 0)
    throw ValidationError("adaptation_budgets", "budgets must be >= 0");
  for (std::size_t i = 1; i < budgets.size(); ++i)
    if (budgets[i] <= budgets[i - 1])
      throw ValidationError("adaptation_budgets", "budgets must be strictly increasing");
  if (adaptation_pool.empty())
    throw ValidationError("adaptation_pool", "must be non-empty");
  validate(train);

  std::vector<Checkpoint> members;
  Checkpoint current = base;
  long done = 0;
  for (long budget : budgets) {
    while (done < budget) {
      const auto indices = draw_batch_indices(adaptation_pool.size(), train.batch_size,
                                              train.shuffle_seed, "adapt-step", done + 1);
      current = train_step(current, gather(adaptation_pool, indices), train);
      ++done;
    }
    Checkpoint snap = current;
    snap.val_accuracy = evaluate(snap, val_pool, EvalSpec{});
    snap.checkpoint_id = "adapt-k" + std::to_string(budget);
    members.push_back(std::move(snap));
  }
  strict_increase_check(members, "adaptation");
  return assemble(std::move(members), SeriesKind::adaptation, series_id);
}

SeriesDiagnostics validate_series(const ModelSeries& series) {
  SeriesDiagnostics diag;
  auto fail = [&](const std::string& what) {
    diag.ok = false;
    diag.violations.push_back(what);
  };
  if (series.strengths.size() < 2) fail("series length must be >= 2");
  if (series.models.size() != series.strengths.size())
    fail("model count does not match strength count");
  for (std::size_t i = 1; i < series.strengths.size(); ++i) {
    if (series.strengths[i] == series.strengths[i - 1])
      fail("uniqueness violated at indices (" + std::to_string(i - 1) + ", " +
           std::to_string(i) + ")");
    else if (series.strengths[i] < series.strengths[i - 1])
      fail("ordering violated at indices (" + std::to_string(i - 1) + ", " +
           std::to_string(i) + ")");
  }
  return diag;
}

std::filesystem::path save_series(const std::filesystem::path& dir,
                                  const ModelSeries& series,
                                  const std::string& spec_echo) {
  namespace fs = std::filesystem;
  const fs::path series_dir = dir / series.series_id;
  fs::create_directories(series_dir);
  nlohmann::ordered_json manifest;
  manifest["series_id"] = series.series_id;
  manifest["kind"] = std::string(to_string(series.kind));
  manifest["strengths"] = series.strengths;
  std::vector<std::string> files;
  for (std::size_t i = 0; i < series.models.size(); ++i) {
    const std::string name = series.models[i].checkpoint_id + ".ckpt";
    save_checkpoint(series.models[i], series_dir / name);
    files.push_back(name);
  }
  manifest["checkpoints"] = files;
  if (!spec_echo.empty()) {
    try {
      manifest["spec"] = nlohmann::ordered_json::parse(spec_echo);
    } catch (const nlohmann::json::exception&) {
      manifest["spec"] = spec_echo;
    }
  }
  const fs::path manifest_path = series_dir / "manifest.json";
  write_text_file_atomic(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

ModelSeries load_series(const std::filesystem::path& manifest_path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad series manifest " + manifest_path.string() + ": " + e.what());
  }
  ModelSeries series;
  try {
    series.series_id = manifest.at("series_id").get<std::string>();
    series.kind = parse_series_kind(manifest.at("kind").get<std::string>());
    series.strengths = manifest.at("strengths").get<std::vector<double>>();
    const auto files = manifest.at("checkpoints").get<std::vector<std::string>>();
    for (const auto& name : files)
      series.models.push_back(load_checkpoint(manifest_path.parent_path() / name));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad series manifest " + manifest_path.string() + ": " + e.what());
  }
  const auto diag = validate_series(series);
  if (!diag.ok)
    throw SeriesError("loaded series is invalid: " + diag.violations.front());
  return series;
}

}  // namespace levelup
