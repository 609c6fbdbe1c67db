#include "levelup/config.hpp"

#include <set>

#include "levelup/errors.hpp"
#include "levelup/io.hpp"

namespace levelup {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!obj.is_object())
    throw ValidationError(path, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key))
      throw ValidationError(path + "." + key, "unknown key");
}

template <typename T>
void read_field(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(path + "." + key, "wrong type");
  }
}

PoolSpec parse_pool(const json& obj, const std::string& path, PoolSpec spec) {
  check_keys(obj, path,
             {"modulus", "max_chain", "chain_length_weights", "op_mix", "size",
              "seed", "pool_tag"});
  read_field(obj, path, "modulus", spec.modulus);
  read_field(obj, path, "max_chain", spec.max_chain);
  // A new max_chain invalidates inherited default weights; uniform unless
  // the config provides its own.
  if (obj.contains("max_chain") && !obj.contains("chain_length_weights"))
    spec.chain_length_weights.clear();
  read_field(obj, path, "chain_length_weights", spec.chain_length_weights);
  read_field(obj, path, "op_mix", spec.op_mix);
  read_field(obj, path, "size", spec.size);
  read_field(obj, path, "seed", spec.seed);
  read_field(obj, path, "pool_tag", spec.pool_tag);
  return spec;
}

ordered_json pool_json(const PoolSpec& spec) {
  return {{"modulus", spec.modulus},
          {"max_chain", spec.max_chain},
          {"chain_length_weights", spec.chain_length_weights},
          {"op_mix", spec.op_mix},
          {"size", spec.size},
          {"seed", spec.seed},
          {"pool_tag", spec.pool_tag}};
}

TrainSpec parse_train(const json& obj, const std::string& path, TrainSpec spec) {
  check_keys(obj, path,
             {"learning_rate", "weight_decay", "batch_size", "max_steps",
              "shuffle_seed"});
  read_field(obj, path, "learning_rate", spec.learning_rate);
  read_field(obj, path, "weight_decay", spec.weight_decay);
  read_field(obj, path, "batch_size", spec.batch_size);
  read_field(obj, path, "max_steps", spec.max_steps);
  read_field(obj, path, "shuffle_seed", spec.shuffle_seed);
  return spec;
}

ordered_json train_json(const TrainSpec& spec) {
  return {{"learning_rate", spec.learning_rate},
          {"weight_decay", spec.weight_decay},
          {"batch_size", spec.batch_size},
          {"max_steps", spec.max_steps},
          {"shuffle_seed", spec.shuffle_seed}};
}

EvalSpec parse_eval(const json& obj, const std::string& path, EvalSpec spec) {
  check_keys(obj, path, {"attempts", "temperature", "top_p", "seed"});
  read_field(obj, path, "attempts", spec.attempts);
  read_field(obj, path, "temperature", spec.temperature);
  read_field(obj, path, "top_p", spec.top_p);
  read_field(obj, path, "seed", spec.seed);
  return spec;
}

}  // namespace

AppConfig default_app_config() {
  AppConfig config;
  config.experiment = default_experiment_config();
  config.schedule_kind = OrderKind{OrderCategory::level_up, {}, {}};
  config.schedule_stages = config.experiment.num_stages;
  return config;
}

ordered_json to_json(const AppConfig& config) {
  const auto& exp = config.experiment;
  ordered_json doc;
  doc["pools"] = ordered_json::object();
  doc["pools"]["train"] = pool_json(exp.train_pool);
  doc["pools"]["val"] = pool_json(exp.val_pool);
  doc["pools"]["test"] = pool_json(exp.test_pool);
  if (exp.transfer_pool) doc["pools"]["transfer"] = pool_json(*exp.transfer_pool);
  if (exp.transfer_test_pool)
    doc["pools"]["transfer_test"] = pool_json(*exp.transfer_test_pool);

  doc["learner"] = {{"input_dim", exp.learner.input_dim},
                    {"hidden_widths", exp.learner.hidden_widths},
                    {"num_classes", exp.learner.num_classes},
                    {"init_scale", exp.learner.init_scale},
                    {"seed", exp.learner.seed}};
  doc["train"] = train_json(exp.curriculum_train);

  ordered_json series;
  if (config.irt_series) {
    series["kind"] = "irt";
    series["abilities"] = config.irt_series->abilities;
    series["difficulty"] = {{"feature", std::string(to_string(config.irt_series->feature))},
                            {"scale", config.irt_series->scale},
                            {"offset", config.irt_series->offset}};
  } else {
    series["kind"] = std::string(to_string(exp.series.kind));
    series["delta"] = exp.series.delta;
    series["interval"] = exp.series.checkpoint_interval;
    series["widths"] = exp.series.width_list;
    series["budgets"] = exp.series.adaptation_budgets;
    series["adaptation_set_size"] = exp.series.adaptation_set_size;
    series["train"] = train_json(exp.series.base_train);
  }
  doc["series"] = series;

  std::vector<std::string> kinds;
  for (const auto& kind : exp.schedule_menu) kinds.push_back(to_string(kind));
  doc["schedule"] = {{"kinds", kinds},
                     {"stages", exp.num_stages},
                     {"stage_sweep", exp.stage_sweep},
                     {"kind", to_string(config.schedule_kind)}};
  doc["experiment"] = {{"num_seeds", exp.num_seeds},
                       {"master_seed", exp.master_seed},
                       {"jobs", exp.jobs},
                       {"atomic_budget_steps", exp.atomic_budget_steps},
                       {"atomic_num_seeds", exp.atomic_num_seeds},
                       {"eval",
                        {{"attempts", exp.eval.attempts},
                         {"temperature", exp.eval.temperature},
                         {"top_p", exp.eval.top_p},
                         {"seed", exp.eval.seed}}}};
  doc["transfer"] = {{"mean_min", exp.thresholds.mean_min},
                     {"max_min", exp.thresholds.max_min},
                     {"mode", std::string(to_string(exp.embed_mode))}};
  return doc;
}

AppConfig parse_app_config(const json& doc) {
  AppConfig config = default_app_config();
  auto& exp = config.experiment;
  check_keys(doc, "config",
             {"pools", "learner", "train", "series", "schedule", "experiment",
              "transfer"});

  if (doc.contains("pools")) {
    const auto& pools = doc.at("pools");
    check_keys(pools, "pools", {"train", "val", "test", "transfer", "transfer_test"});
    if (pools.contains("train"))
      exp.train_pool = parse_pool(pools.at("train"), "pools.train", exp.train_pool);
    if (pools.contains("val"))
      exp.val_pool = parse_pool(pools.at("val"), "pools.val", exp.val_pool);
    if (pools.contains("test"))
      exp.test_pool = parse_pool(pools.at("test"), "pools.test", exp.test_pool);
    if (pools.contains("transfer"))
      exp.transfer_pool = parse_pool(pools.at("transfer"), "pools.transfer",
                                     exp.transfer_pool.value_or(PoolSpec{}));
    if (pools.contains("transfer_test"))
      exp.transfer_test_pool =
          parse_pool(pools.at("transfer_test"), "pools.transfer_test",
                     exp.transfer_test_pool.value_or(PoolSpec{}));
  }

  if (doc.contains("learner")) {
    const auto& learner = doc.at("learner");
    check_keys(learner, "learner",
               {"input_dim", "hidden_widths", "num_classes", "init_scale", "seed"});
    read_field(learner, "learner", "input_dim", exp.learner.input_dim);
    read_field(learner, "learner", "hidden_widths", exp.learner.hidden_widths);
    read_field(learner, "learner", "num_classes", exp.learner.num_classes);
    read_field(learner, "learner", "init_scale", exp.learner.init_scale);
    read_field(learner, "learner", "seed", exp.learner.seed);
  }

  if (doc.contains("train"))
    exp.curriculum_train = parse_train(doc.at("train"), "train", exp.curriculum_train);

  if (doc.contains("series")) {
    const auto& series = doc.at("series");
    check_keys(series, "series",
               {"kind", "delta", "interval", "widths", "budgets",
                "adaptation_set_size", "train", "abilities", "difficulty"});
    std::string kind = std::string(to_string(exp.series.kind));
    read_field(series, "series", "kind", kind);
    if (kind == "irt") {
      IrtSeriesConfig irt;
      read_field(series, "series", "abilities", irt.abilities);
      if (irt.abilities.size() < 2)
        throw ValidationError("series.abilities", "need at least 2 abilities");
      if (series.contains("difficulty")) {
        const auto& difficulty = series.at("difficulty");
        check_keys(difficulty, "series.difficulty", {"feature", "scale", "offset"});
        std::string feature = std::string(to_string(irt.feature));
        read_field(difficulty, "series.difficulty", "feature", feature);
        irt.feature = parse_difficulty_feature(feature);
        read_field(difficulty, "series.difficulty", "scale", irt.scale);
        read_field(difficulty, "series.difficulty", "offset", irt.offset);
      }
      config.irt_series = std::move(irt);
    } else {
      config.irt_series.reset();
      exp.series.kind = parse_series_kind(kind);
      read_field(series, "series", "delta", exp.series.delta);
      read_field(series, "series", "interval", exp.series.checkpoint_interval);
      read_field(series, "series", "widths", exp.series.width_list);
      read_field(series, "series", "budgets", exp.series.adaptation_budgets);
      read_field(series, "series", "adaptation_set_size", exp.series.adaptation_set_size);
      if (series.contains("train"))
        exp.series.base_train =
            parse_train(series.at("train"), "series.train", exp.series.base_train);
    }
  }

  if (doc.contains("schedule")) {
    const auto& schedule = doc.at("schedule");
    check_keys(schedule, "schedule", {"kinds", "stages", "stage_sweep", "kind"});
    read_field(schedule, "schedule", "stage_sweep", exp.stage_sweep);
    if (schedule.contains("kinds")) {
      std::vector<std::string> kinds;
      read_field(schedule, "schedule", "kinds", kinds);
      exp.schedule_menu.clear();
      for (const auto& name : kinds) {
        try {
          exp.schedule_menu.push_back(parse_order_kind(name));
        } catch (const ValidationError& e) {
          throw ValidationError("schedule.kinds", e.what());
        }
      }
    }
    read_field(schedule, "schedule", "stages", exp.num_stages);
    config.schedule_stages = exp.num_stages;
    if (schedule.contains("kind")) {
      std::string kind;
      read_field(schedule, "schedule", "kind", kind);
      try {
        config.schedule_kind = parse_order_kind(kind);
      } catch (const ValidationError& e) {
        throw ValidationError("schedule.kind", e.what());
      }
    }
  }

  if (doc.contains("experiment")) {
    const auto& experiment = doc.at("experiment");
    check_keys(experiment, "experiment",
               {"num_seeds", "master_seed", "jobs", "atomic_budget_steps",
                "atomic_num_seeds", "eval"});
    read_field(experiment, "experiment", "num_seeds", exp.num_seeds);
    read_field(experiment, "experiment", "master_seed", exp.master_seed);
    read_field(experiment, "experiment", "jobs", exp.jobs);
    read_field(experiment, "experiment", "atomic_budget_steps", exp.atomic_budget_steps);
    read_field(experiment, "experiment", "atomic_num_seeds", exp.atomic_num_seeds);
    if (experiment.contains("eval"))
      exp.eval = parse_eval(experiment.at("eval"), "experiment.eval", exp.eval);
  }

  if (doc.contains("transfer")) {
    const auto& transfer = doc.at("transfer");
    check_keys(transfer, "transfer", {"mean_min", "max_min", "mode"});
    read_field(transfer, "transfer", "mean_min", exp.thresholds.mean_min);
    read_field(transfer, "transfer", "max_min", exp.thresholds.max_min);
    std::string mode = std::string(to_string(exp.embed_mode));
    read_field(transfer, "transfer", "mode", mode);
    exp.embed_mode = parse_embed_mode(mode);
  }
  return config;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ValidationError("--set", "expected key=value, got: " + assignment);
  const std::string dotted = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // plain string
  }

  json* node = &doc;
  std::size_t begin = 0;
  while (true) {
    const auto dot = dotted.find('.', begin);
    const std::string key = dotted.substr(begin, dot - begin);
    if (key.empty()) throw ValidationError("--set", "empty key segment in: " + dotted);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

AppConfig load_app_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    try {
      doc = json::parse(read_text_file(path));
    } catch (const IoError& e) {
      throw ValidationError("config", e.what());
    } catch (const json::exception& e) {
      throw ValidationError("config", path.string() + ": " + e.what());
    }
  }
  for (const auto& assignment : overrides) apply_override(doc, assignment);
  return parse_app_config(doc);
}

}  // namespace levelup
