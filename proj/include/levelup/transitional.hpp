#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "levelup/learner.hpp"
#include "levelup/series.hpp"
#include "levelup/taskgen.hpp"

// Solvability matrices and transitional-problem extraction. A problem is
// transitional at level tau when every model below tau fails it and every
// model at or above tau solves it; rows violating that monotone step shape
// are excluded as inconsistent.

namespace levelup {

struct SolvabilityMatrix {
  std::vector<std::string> problem_ids;
  std::string series_id;
  int num_models = 0;
  std::vector<std::uint8_t> bits;  // row-major, rows x num_models

  std::uint8_t at(std::size_t row, int model) const {
    return bits[row * static_cast<std::size_t>(num_models) + static_cast<std::size_t>(model)];
  }
  std::span<const std::uint8_t> row(std::size_t r) const {
    return {bits.data() + r * static_cast<std::size_t>(num_models),
            static_cast<std::size_t>(num_models)};
  }
  std::size_t rows() const { return problem_ids.size(); }
};

enum class TransitionClass { transitional, always_solved, never_solved, inconsistent };

std::string_view to_string(TransitionClass cls);

struct RowClassification {
  TransitionClass cls = TransitionClass::inconsistent;
  int tau = 0;  // set iff cls == transitional, in [1, n]
};

struct TransitionRecord {
  std::string problem_id;
  RowClassification classification;
};

struct ExcludedCounts {
  long always = 0;
  long never = 0;
  long inconsistent = 0;
};

struct TransitionalSets {
  std::map<int, std::vector<std::string>> by_level;  // tau -> problem ids
  ExcludedCounts excluded;
  std::string series_id;
  std::string pool_tag;
  int num_levels = 0;  // n, for a series of n+1 models

  long transitional_count() const {
    long total = 0;
    for (const auto& [tau, ids] : by_level) total += static_cast<long>(ids.size());
    return total;
  }
};

// Correctness mode for matrix construction. Deterministic argmax phi by
// default; the stochastic mode scores a problem correct iff avg@k >= 0.5,
// sampling 8 attempts from the 0.75-tempered top-0.95 nucleus.
struct MatrixEvalMode {
  bool stochastic = false;
  EvalSpec eval{8, 0.75, 0.95, 0};
};

SolvabilityMatrix build_matrix(const ModelSeries& series,
                               std::span<const Problem> pool,
                               const MatrixEvalMode& mode = {});

// IRT oracle variant: exact threshold learners against given difficulties.
SolvabilityMatrix build_matrix_irt(std::span<const IrtLearner> learners,
                                   std::span<const double> difficulties,
                                   std::span<const std::string> problem_ids,
                                   const std::string& series_id = "irt-series");

// Row must have length >= 2 (a series has at least 2 models).
RowClassification classify_row(std::span<const std::uint8_t> row);

TransitionalSets extract(const SolvabilityMatrix& matrix,
                         const std::string& pool_tag = "");

struct LevelStatsRow {
  int level = 0;
  long count = 0;
  bool defined = false;  // false for empty levels; means are NaN
  double mean_chain_length = 0.0;
  double mean_encoded_length = 0.0;
  double mean_adds = 0.0;
  double mean_subs = 0.0;
  double mean_muls = 0.0;
  double mean_max_operand = 0.0;
};

struct LevelStats {
  std::vector<LevelStatsRow> transitional;  // one row per level 1..n
  std::vector<LevelStatsRow> all_solved;    // one row per model 0..n
};

// Mean ground-truth features per transitional level and per all-solved set
// {p : phi_p(M_i) = 1}. Every id must resolve in the pool.
LevelStats level_stats(const TransitionalSets& sets,
                       const SolvabilityMatrix& matrix,
                       std::span<const Problem> pool);

// CSV with header problem_id,m0..mn.
void write_matrix_csv(const std::filesystem::path& path,
                      const SolvabilityMatrix& matrix);
SolvabilityMatrix read_matrix_csv(const std::filesystem::path& path,
                                  const std::string& series_id = "");

void write_sets_json(const std::filesystem::path& path,
                     const TransitionalSets& sets);
TransitionalSets read_sets_json(const std::filesystem::path& path);

}  // namespace levelup
