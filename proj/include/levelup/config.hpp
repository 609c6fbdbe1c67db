#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "levelup/harness.hpp"
#include "levelup/taskgen.hpp"

// One JSON config file drives the whole pipeline; every command reads the
// sections it needs. Unknown keys are rejected and --set overrides are
// type-checked against the defaults.

namespace levelup {

// Exact threshold-learner series, used to verify extraction end to end.
struct IrtSeriesConfig {
  std::vector<double> abilities;
  DifficultyFeature feature = DifficultyFeature::chain_length;
  double scale = 1.0;
  double offset = 0.0;

  double difficulty_of(const Problem& problem) const {
    return scale * feature_value(problem, feature) + offset;
  }
  std::vector<IrtLearner> learners() const {
    std::vector<IrtLearner> out;
    for (double a : abilities) out.push_back(IrtLearner{a, IrtLearner::Mode::deterministic, 0});
    return out;
  }
};

struct AppConfig {
  ExperimentConfig experiment;
  // Set when series.kind == "irt"; extraction then uses the oracle instead of
  // trained checkpoints.
  std::optional<IrtSeriesConfig> irt_series;
  // cmd_schedule parameters.
  OrderKind schedule_kind;
  int schedule_stages = 3;
};

AppConfig default_app_config();

// JSON echo of a config (the reverse of parse_app_config).
nlohmann::ordered_json to_json(const AppConfig& config);

// Strict parse: unknown keys raise ValidationError with the dotted path.
AppConfig parse_app_config(const nlohmann::json& doc);

AppConfig load_app_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

// Applies one "dotted.path=value" override; value parsed as JSON when
// possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace levelup
