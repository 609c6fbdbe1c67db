#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "levelup/io.hpp"
#include "levelup/transitional.hpp"

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& arguments) {
  const std::string command =
      std::string(LEVELUP_CLI_PATH) + " " + arguments + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// IRT oracle config: abilities (1,2,3) with difficulty = chain_length - 0.5,
// so chains of length 1..4 have difficulties 0.5, 1.5, 2.5, 3.5.
void write_irt_config(const fs::path& path) {
  nlohmann::json doc;
  doc["pools"]["train"] = {{"modulus", 7},      {"max_chain", 4},
                           {"size", 400},       {"seed", 5},
                           {"pool_tag", "ref"}, {"op_mix", {1.0, 1.0, 1.0}}};
  doc["series"] = {{"kind", "irt"},
                   {"abilities", {1.0, 2.0, 3.0}},
                   {"difficulty",
                    {{"feature", "chain_length"}, {"scale", 1.0}, {"offset", -0.5}}}};
  std::ofstream out(path);
  out << doc.dump(2);
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("gen then extract reproduces the irt oracle end to end") {
  const auto dir = fresh_dir("levelup_cli_irt");
  const auto config = dir / "config.json";
  write_irt_config(config);

  REQUIRE(run_cli("gen --config " + config.string() + " --out " + dir.string()) == 0);
  REQUIRE(fs::exists(dir / "train.jsonl"));
  REQUIRE(fs::exists(dir / "manifest.json"));

  REQUIRE(run_cli("extract --config " + config.string() + " --out " + dir.string() +
                  " --pool " + (dir / "train.jsonl").string()) == 0);
  REQUIRE(fs::exists(dir / "sets.json"));
  REQUIRE(fs::exists(dir / "matrix.csv"));

  // oracle: length 1 (d=0.5) solved by all; lengths 2..3 transition at
  // tau = length - 1; length 4 (d=3.5) is beyond the strongest ability
  const auto pool = levelup::read_pool_jsonl(dir / "train.jsonl");
  const auto sets = levelup::read_sets_json(dir / "sets.json");
  long always = 0, never = 0;
  std::map<std::string, int> expected_level;
  for (const auto& p : pool) {
    if (p.features.chain_length == 1)
      ++always;
    else if (p.features.chain_length == 4)
      ++never;
    else
      expected_level[p.id] = p.features.chain_length - 1;
  }
  CHECK(sets.excluded.always == always);
  CHECK(sets.excluded.never == never);
  CHECK(sets.excluded.inconsistent == 0);
  long matched = 0;
  for (const auto& [tau, ids] : sets.by_level)
    for (const auto& id : ids) {
      REQUIRE(expected_level.count(id) == 1);
      CHECK(expected_level.at(id) == tau);
      ++matched;
    }
  CHECK(matched == static_cast<long>(expected_level.size()));

  // schedule from the extracted sets
  REQUIRE(run_cli("schedule --config " + config.string() + " --out " + dir.string() +
                  " --sets " + (dir / "sets.json").string() +
                  " --set schedule.kind=level_up") == 0);
  CHECK(fs::exists(dir / "schedule.json"));

  // report from the saved artifacts
  REQUIRE(run_cli("report --config " + config.string() + " --out " + dir.string() +
                  " --pool " + (dir / "train.jsonl").string() + " --matrix " +
                  (dir / "matrix.csv").string() + " --sets " +
                  (dir / "sets.json").string()) == 0);
  CHECK(fs::exists(dir / "interpretability.csv"));
  CHECK(fs::exists(dir / "correlations.json"));

  fs::remove_all(dir);
}

TEST_CASE("missing config file exits 2 without partial outputs") {
  const auto dir = fresh_dir("levelup_cli_missing");
  CHECK(run_cli("gen --config " + (dir / "nope.json").string() + " --out " +
                (dir / "out").string()) == 2);
  CHECK_FALSE(fs::exists(dir / "out"));
  fs::remove_all(dir);
}

TEST_CASE("bad config keys exit 2") {
  const auto dir = fresh_dir("levelup_cli_badkey");
  const auto config = dir / "config.json";
  {
    std::ofstream out(config);
    out << R"({"pools": {"train": {"sise": 10}}})";
  }
  CHECK(run_cli("gen --config " + config.string() + " --out " + dir.string()) == 2);
  CHECK_FALSE(fs::exists(dir / "train.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("run twice with the same config yields identical metrics") {
  const auto dir = fresh_dir("levelup_cli_run");
  const auto config = dir / "config.json";
  {
    nlohmann::json doc;
    doc["pools"]["train"] = {{"modulus", 5}, {"max_chain", 3}, {"size", 400},
                             {"seed", 201},  {"pool_tag", "train"}};
    doc["pools"]["val"] = {{"modulus", 5}, {"max_chain", 3}, {"size", 150},
                           {"seed", 202},  {"pool_tag", "val"}};
    doc["pools"]["test"] = {{"modulus", 5}, {"max_chain", 3}, {"size", 200},
                            {"seed", 203},  {"pool_tag", "test"}};
    doc["learner"] = {{"hidden_widths", {10}}, {"init_scale", 0.5}, {"seed", 7}};
    doc["train"] = {{"learning_rate", 0.3}, {"batch_size", 16}, {"max_steps", 12}};
    doc["series"] = {{"kind", "checkpoint"},
                     {"delta", 0.03},
                     {"interval", 15},
                     {"train",
                      {{"learning_rate", 0.3},
                       {"batch_size", 16},
                       {"max_steps", 150},
                       {"shuffle_seed", 21}}}};
    doc["schedule"] = {{"kinds", {"level_up", "iid"}}, {"stages", 2}};
    doc["experiment"] = {{"num_seeds", 2}, {"atomic_num_seeds", 0}, {"master_seed", 9}};
    std::ofstream out(config);
    out << doc.dump(2);
  }
  const auto out_a = dir / "a";
  const auto out_b = dir / "b";
  REQUIRE(run_cli("run --config " + config.string() + " --out " + out_a.string() +
                  " --jobs 2") == 0);
  REQUIRE(run_cli("run --config " + config.string() + " --out " + out_b.string()) == 0);
  CHECK(levelup::read_text_file(out_a / "metrics.csv") ==
        levelup::read_text_file(out_b / "metrics.csv"));
  CHECK(levelup::read_text_file(out_a / "aggregate.json") ==
        levelup::read_text_file(out_b / "aggregate.json"));
  fs::remove_all(dir);
}

TEST_CASE("gen is idempotent and byte-identical") {
  const auto dir = fresh_dir("levelup_cli_idempotent");
  const auto config = dir / "config.json";
  write_irt_config(config);
  REQUIRE(run_cli("gen --config " + config.string() + " --out " + dir.string()) == 0);
  const auto first = levelup::read_text_file(dir / "train.jsonl");
  const auto manifest_first = levelup::read_text_file(dir / "manifest.json");
  REQUIRE(run_cli("gen --config " + config.string() + " --out " + dir.string()) == 0);
  CHECK(levelup::read_text_file(dir / "train.jsonl") == first);
  CHECK(levelup::read_text_file(dir / "manifest.json") == manifest_first);
  fs::remove_all(dir);
}

TEST_SUITE_END();
