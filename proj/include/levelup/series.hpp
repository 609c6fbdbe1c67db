#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "levelup/errors.hpp"
#include "levelup/learner.hpp"

// Model series: ordered models with strictly increasing, pairwise distinct
// strengths. Strength is held-out validation accuracy for every series kind.

namespace levelup {

enum class SeriesKind { checkpoint, family, adaptation };

std::string_view to_string(SeriesKind kind);
SeriesKind parse_series_kind(std::string_view name);

struct ModelSeries {
  std::vector<Checkpoint> models;
  std::vector<double> strengths;
  SeriesKind kind = SeriesKind::checkpoint;
  std::string series_id;
};

struct SeriesSpec {
  SeriesKind kind = SeriesKind::checkpoint;
  double delta = 0.0;                    // checkpoint kind
  std::vector<int> width_list;           // family kind
  std::vector<long> adaptation_budgets;  // adaptation kind
  int adaptation_set_size = 256;
  TrainSpec base_train;
  long checkpoint_interval = 1;
};

struct SeriesDiagnostics {
  bool ok = true;
  std::vector<std::string> violations;
};

// Training produced a non-finite loss; carries the last usable checkpoint.
class TrainingDiverged : public Error {
public:
  TrainingDiverged(const std::string& what, Checkpoint last_good)
      : Error(what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const noexcept { return last_good_; }

private:
  Checkpoint last_good_;
};

// Trains from a fresh init and snapshots a checkpoint every
// checkpoint_interval steps, each with val_accuracy from the held-out pool.
std::vector<Checkpoint> train_and_collect(const LearnerConfig& base,
                                          std::span<const Problem> train_pool,
                                          std::span<const Problem> val_pool,
                                          const SeriesSpec& spec);

// Greedy earliest-first selection: keep the first checkpoint, then every next
// one whose val_accuracy exceeds the last kept by at least delta (and
// strictly, so strengths stay pairwise distinct).
ModelSeries select_by_delta(const std::vector<Checkpoint>& checkpoints,
                            double delta,
                            const std::string& series_id = "ckpt-series");

// One model per width, all trained with identical TrainSpec and seeds; the
// resulting accuracies must strictly increase or construction fails.
ModelSeries build_family_series(const LearnerConfig& base,
                                const std::vector<int>& width_list,
                                std::span<const Problem> train_pool,
                                std::span<const Problem> val_pool,
                                const TrainSpec& train,
                                const std::string& series_id = "family-series");

// Level i = base checkpoint after budgets[i] extra steps on a fixed
// adaptation set (one shared seeded batch stream, so larger budgets extend
// smaller ones).
ModelSeries build_adaptation_series(const Checkpoint& base,
                                    const std::vector<long>& budgets,
                                    std::span<const Problem> adaptation_pool,
                                    std::span<const Problem> val_pool,
                                    const TrainSpec& train,
                                    const std::string& series_id = "adapt-series");

SeriesDiagnostics validate_series(const ModelSeries& series);

// Manifest JSON + one checkpoint file per member under dir/<series_id>/.
// spec_echo, when non-empty, is stored verbatim in the manifest.
std::filesystem::path save_series(const std::filesystem::path& dir,
                                  const ModelSeries& series,
                                  const std::string& spec_echo = {});
ModelSeries load_series(const std::filesystem::path& manifest_path);

// Seeded uniform batch of indices into a pool; shared by training loops.
std::vector<int> draw_batch_indices(std::size_t pool_size, int batch_size,
                                    std::uint64_t seed, std::string_view tag,
                                    long step);

}  // namespace levelup
