#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "levelup/learner.hpp"
#include "levelup/taskgen.hpp"
#include "levelup/transitional.hpp"

// Neo-transitional matching: assigns target-pool problems to the reference
// transitional level they most resemble, by cosine similarity of embeddings,
// subject to mean/max similarity thresholds.

namespace levelup {

enum class EmbedMode { feature, hidden };

std::string_view to_string(EmbedMode mode);
EmbedMode parse_embed_mode(std::string_view name);

struct EmbeddingVector {
  std::vector<double> values;  // unit L2 norm
  EmbedMode source = EmbedMode::feature;
};

// Per-feature mean/std fitted on the reference pool only, so target pools
// cannot leak into the standardization.
struct FeatureStandardizer {
  std::array<double, 6> mean{};
  std::array<double, 6> stddev{};

  static FeatureStandardizer fit(std::span<const Problem> reference_pool);
  std::array<double, 6> apply(const FeatureBundle& features) const;
};

double cosine(std::span<const double> u, std::span<const double> v);

// feature mode: standardized FeatureBundle concatenated with the L2-normalized
// input vector, then normalized to unit length. Ignores the problem id.
EmbeddingVector embed_feature(const Problem& problem,
                              const FeatureStandardizer& standardizer);

// hidden mode: penultimate-layer activations of the reference checkpoint.
EmbeddingVector embed_hidden(const Problem& problem, const Checkpoint& reference);

struct MatchThresholds {
  double mean_min = 0.65;
  double max_min = 0.8;
};

void validate(const MatchThresholds& thresholds);

struct MatchStats {
  int level = 0;        // best-mean level for this target
  double mean_sim = 0.0;
  double max_sim = 0.0;
  bool matched = false;
};

struct MatchReport {
  std::map<int, std::vector<std::string>> neo_by_level;
  std::map<std::string, MatchStats> stats;  // one entry per target id
  long unmatched = 0;
  std::vector<std::string> warnings;
  std::string series_id;
  std::string reference_pool_tag;
  std::string target_pool_tag;
  int num_levels = 0;
};

// Core matcher on precomputed embeddings: a target joins the passing level
// (mean >= mean_min and max >= max_min) with the highest mean similarity;
// ties go to the lowest level.
MatchReport match_embedded(
    const std::map<int, std::vector<EmbeddingVector>>& reference_by_level,
    std::span<const EmbeddingVector> target_embeddings,
    std::span<const std::string> target_ids, const MatchThresholds& thresholds);

MatchReport match_neo_transitional(const TransitionalSets& reference_sets,
                                   std::span<const Problem> reference_pool,
                                   std::span<const Problem> target_pool,
                                   const MatchThresholds& thresholds,
                                   EmbedMode mode,
                                   const Checkpoint* reference_ckpt = nullptr);

// Neo sets are directly consumable by build_transitional_schedule.
TransitionalSets to_transitional_sets(const MatchReport& report);

void write_match_report_json(const std::filesystem::path& path,
                             const MatchReport& report);
MatchReport read_match_report_json(const std::filesystem::path& path);

}  // namespace levelup
