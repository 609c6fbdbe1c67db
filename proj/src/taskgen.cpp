#include "levelup/taskgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "levelup/errors.hpp"
#include "levelup/io.hpp"
#include "levelup/rng.hpp"

namespace levelup {

namespace {

int mod_step(int value, const ChainStep& step, int m) {
  switch (step.op) {
    case ChainOp::add:
      return (value + step.operand) % m;
    case ChainOp::sub:
      return ((value - step.operand) % m + m) % m;
    case ChainOp::mul:
      return (value * step.operand) % m;
  }
  return value;
}

std::string make_problem_id(const PoolSpec& spec, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%08llx-%06d", spec.pool_tag.c_str(),
                static_cast<unsigned long long>(spec.seed & 0xffffffffULL), index);
  return std::string(buf);
}

}  // namespace

int eval_chain(const ArithChain& chain, int modulus) {
  int value = ((chain.start % modulus) + modulus) % modulus;
  for (const auto& step : chain.steps) value = mod_step(value, step, modulus);
  return value;
}

void validate(const PoolSpec& spec) {
  if (spec.modulus < 2) throw ValidationError("modulus", "must be >= 2");
  if (spec.max_chain < 1) throw ValidationError("max_chain", "must be >= 1");
  if (spec.size < 1) throw ValidationError("size", "must be >= 1");
  if (spec.pool_tag.empty()) throw ValidationError("pool_tag", "must be non-empty");
  if (!spec.chain_length_weights.empty()) {
    if (static_cast<int>(spec.chain_length_weights.size()) != spec.max_chain)
      throw ValidationError("chain_length_distribution",
                            "must have one weight per length 1..max_chain");
    double total = 0.0;
    for (double w : spec.chain_length_weights) {
      if (!(w >= 0.0))
        throw ValidationError("chain_length_distribution", "weights must be non-negative");
      total += w;
    }
    if (total <= 0.0)
      throw ValidationError("chain_length_distribution", "weights must not all be zero");
  }
  double op_total = 0.0;
  for (double w : spec.op_mix) {
    if (!(w >= 0.0)) throw ValidationError("op_mix", "weights must be non-negative");
    op_total += w;
  }
  if (op_total <= 0.0) throw ValidationError("op_mix", "weights must not all be zero");
}

int encoded_dim(int modulus, int max_chain) {
  return modulus + max_chain * (3 + modulus);
}

std::vector<double> encode(const ArithChain& chain, int modulus, int max_chain) {
  if (static_cast<int>(chain.steps.size()) > max_chain)
    throw ValidationError("chain", "chain longer than max_chain");
  if (chain.start < 0 || chain.start >= modulus)
    throw ValidationError("chain", "start operand outside [0, modulus)");
  std::vector<double> input(static_cast<std::size_t>(encoded_dim(modulus, max_chain)), 0.0);
  input[static_cast<std::size_t>(chain.start)] = 1.0;
  for (std::size_t j = 0; j < chain.steps.size(); ++j) {
    const auto& step = chain.steps[j];
    if (step.operand < 0 || step.operand >= modulus)
      throw ValidationError("chain", "operand outside [0, modulus)");
    const std::size_t block = static_cast<std::size_t>(modulus) + j * (3 + static_cast<std::size_t>(modulus));
    input[block + static_cast<std::size_t>(step.op)] = 1.0;
    input[block + 3 + static_cast<std::size_t>(step.operand)] = 1.0;
  }
  return input;
}

FeatureBundle features_of(const ArithChain& chain, int modulus, int max_chain) {
  (void)modulus;
  (void)max_chain;
  FeatureBundle f;
  f.chain_length = static_cast<int>(chain.steps.size());
  f.encoded_length = 1 + 2 * f.chain_length;
  for (const auto& step : chain.steps) {
    f.op_counts[static_cast<std::size_t>(step.op)] += 1;
    f.max_operand = std::max(f.max_operand, step.operand);
  }
  return f;
}

std::vector<Problem> generate_pool(const PoolSpec& spec) {
  validate(spec);
  std::vector<double> length_weights = spec.chain_length_weights;
  if (length_weights.empty())
    length_weights.assign(static_cast<std::size_t>(spec.max_chain), 1.0);

  std::vector<Problem> pool;
  pool.reserve(static_cast<std::size_t>(spec.size));
  for (int i = 0; i < spec.size; ++i) {
    Rng rng(derive_seed(spec.seed, "problem", static_cast<std::uint64_t>(i)));
    ArithChain chain;
    const int length = 1 + rng.pick_weighted(length_weights);
    chain.start = rng.uniform_int(spec.modulus);
    chain.steps.reserve(static_cast<std::size_t>(length));
    for (int s = 0; s < length; ++s) {
      ChainStep step;
      step.op = static_cast<ChainOp>(rng.pick_weighted(spec.op_mix));
      step.operand = rng.uniform_int(spec.modulus);
      chain.steps.push_back(step);
    }
    Problem p;
    p.id = make_problem_id(spec, i);
    p.input = encode(chain, spec.modulus, spec.max_chain);
    p.target = eval_chain(chain, spec.modulus);
    p.features = features_of(chain, spec.modulus, spec.max_chain);
    p.pool_tag = spec.pool_tag;
    pool.push_back(std::move(p));
  }
  return pool;
}

int irt_solve(const IrtLearner& learner, double difficulty,
              std::string_view problem_id) {
  if (learner.mode == IrtLearner::Mode::deterministic)
    return learner.ability >= difficulty ? 1 : 0;
  const double p = 1.0 / (1.0 + std::exp(-(learner.ability - difficulty)));
  Rng rng(derive_seed(learner.noise_seed, "irt",
                      std::bit_cast<std::uint64_t>(learner.ability),
                      fnv1a64(problem_id)));
  return rng.uniform() < p ? 1 : 0;
}

std::string_view to_string(DifficultyFeature feature) {
  switch (feature) {
    case DifficultyFeature::chain_length: return "chain_length";
    case DifficultyFeature::encoded_length: return "encoded_length";
    case DifficultyFeature::hard_op_count: return "hard_op_count";
    case DifficultyFeature::max_operand: return "max_operand";
  }
  return "chain_length";
}

DifficultyFeature parse_difficulty_feature(std::string_view name) {
  if (name == "chain_length") return DifficultyFeature::chain_length;
  if (name == "encoded_length") return DifficultyFeature::encoded_length;
  if (name == "hard_op_count") return DifficultyFeature::hard_op_count;
  if (name == "max_operand") return DifficultyFeature::max_operand;
  throw ValidationError("difficulty_feature", "unknown feature: " + std::string(name));
}

double feature_value(const Problem& problem, DifficultyFeature feature) {
  switch (feature) {
    case DifficultyFeature::chain_length:
      return problem.features.chain_length;
    case DifficultyFeature::encoded_length:
      return problem.features.encoded_length;
    case DifficultyFeature::hard_op_count:
      return problem.features.op_counts[static_cast<std::size_t>(ChainOp::mul)];
    case DifficultyFeature::max_operand:
      return problem.features.max_operand;
  }
  return 0.0;
}

void write_pool_jsonl(const std::filesystem::path& path,
                      const std::vector<Problem>& pool) {
  std::ostringstream out;
  for (const auto& p : pool) {
    nlohmann::ordered_json row;
    row["id"] = p.id;
    row["input"] = p.input;
    row["target"] = p.target;
    row["features"] = {{"chain_length", p.features.chain_length},
                       {"encoded_length", p.features.encoded_length},
                       {"op_counts", p.features.op_counts},
                       {"max_operand", p.features.max_operand}};
    row["pool_tag"] = p.pool_tag;
    out << row.dump() << '\n';
  }
  write_text_file_atomic(path, out.str());
}

std::vector<Problem> read_pool_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Problem> pool;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      Problem p;
      p.id = row.at("id").get<std::string>();
      p.input = row.at("input").get<std::vector<double>>();
      p.target = row.at("target").get<int>();
      const auto& f = row.at("features");
      p.features.chain_length = f.at("chain_length").get<int>();
      p.features.encoded_length = f.at("encoded_length").get<int>();
      p.features.op_counts = f.at("op_counts").get<std::array<int, 3>>();
      p.features.max_operand = f.at("max_operand").get<int>();
      p.pool_tag = row.at("pool_tag").get<std::string>();
      pool.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": bad problem record: " + e.what());
    }
  }
  return pool;
}

}  // namespace levelup
