#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Synthetic problem pools: modular arithmetic chains with recorded
// ground-truth difficulty features, plus an exact item-response-theory
// learner family used as a verification oracle.

namespace levelup {

enum class ChainOp : int { add = 0, sub = 1, mul = 2 };

struct ChainStep {
  ChainOp op = ChainOp::add;
  int operand = 0;
};

// "start=2; +3; x2" style left-to-right chain, all arithmetic mod m.
struct ArithChain {
  int start = 0;
  std::vector<ChainStep> steps;
};

int eval_chain(const ArithChain& chain, int modulus);

struct FeatureBundle {
  int chain_length = 0;    // number of steps
  int encoded_length = 0;  // non-padding tokens: 1 + 2 * chain_length
  std::array<int, 3> op_counts{0, 0, 0};  // adds, subs, muls
  int max_operand = 0;     // largest step operand
};

struct Problem {
  std::string id;
  std::vector<double> input;  // one-hot encoding, length m + K*(3+m)
  int target = 0;             // class index in [0, m)
  FeatureBundle features;
  std::string pool_tag;
};

struct PoolSpec {
  int modulus = 7;
  int max_chain = 6;
  // Weight for chain length k at index k-1. Empty means uniform over 1..K.
  std::vector<double> chain_length_weights;
  std::array<double, 3> op_mix{1.0, 1.0, 1.0};  // (+, -, x)
  int size = 0;
  std::uint64_t seed = 0;
  std::string pool_tag = "ref";
};

// Throws ValidationError naming the offending field.
void validate(const PoolSpec& spec);

// Deterministic given the seed: same spec -> byte-identical pool.
std::vector<Problem> generate_pool(const PoolSpec& spec);

// Encoded input width for pool parameters (m, K).
int encoded_dim(int modulus, int max_chain);

// Layout: one-hot(start, m), then per step a 3-wide op one-hot followed by an
// m-wide operand one-hot; steps beyond the chain stay all-zero (padding).
std::vector<double> encode(const ArithChain& chain, int modulus, int max_chain);

FeatureBundle features_of(const ArithChain& chain, int modulus, int max_chain);

struct IrtLearner {
  enum class Mode { deterministic, logistic };
  double ability = 0.0;
  Mode mode = Mode::deterministic;
  std::uint64_t noise_seed = 0;  // logistic mode only
};

// Deterministic mode: 1 iff ability >= difficulty (ties solve).
// Logistic mode: 1 with probability sigmoid(ability - difficulty), drawn from
// a stream keyed by (noise_seed, ability, problem_id).
int irt_solve(const IrtLearner& learner, double difficulty,
              std::string_view problem_id = {});

enum class DifficultyFeature { chain_length, encoded_length, hard_op_count, max_operand };

std::string_view to_string(DifficultyFeature feature);
DifficultyFeature parse_difficulty_feature(std::string_view name);

double feature_value(const Problem& problem, DifficultyFeature feature);

// JSONL: one object per line with keys id, input, target, features, pool_tag.
void write_pool_jsonl(const std::filesystem::path& path,
                      const std::vector<Problem>& pool);
std::vector<Problem> read_pool_jsonl(const std::filesystem::path& path);

}  // namespace levelup
