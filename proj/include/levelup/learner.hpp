#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "levelup/rng.hpp"
#include "levelup/taskgen.hpp"

// A small feed-forward softmax classifier with seeded SGD training.
// Checkpoints are immutable values; training returns a new checkpoint.

namespace levelup {

struct LearnerConfig {
  int input_dim = 0;
  std::vector<int> hidden_widths;
  int num_classes = 0;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
};

void validate(const LearnerConfig& config);

struct LayerShape {
  int in = 0;
  int out = 0;
};

std::vector<LayerShape> layer_shapes(const LearnerConfig& config);
long parameter_count(const LearnerConfig& config);

struct LayerParams {
  std::vector<double> weights;  // row-major, out x in
  std::vector<double> bias;     // out
};

struct Checkpoint {
  LearnerConfig config;
  std::vector<LayerParams> layers;
  long steps_trained = 0;
  double val_accuracy = 0.0;
  std::string checkpoint_id;
};

struct PredictionDistribution {
  std::vector<double> probs;
};

struct TrainSpec {
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  int batch_size = 64;
  long max_steps = 90;
  std::uint64_t shuffle_seed = 0;
};

void validate(const TrainSpec& spec);

struct EvalSpec {
  int attempts = 8;
  double temperature = 0.0;
  double top_p = 1.0;
  std::uint64_t seed = 0;
};

void validate(const EvalSpec& spec);

// Parameters drawn from a seeded uniform distribution on
// [-init_scale, init_scale]; init_scale = 0 gives the all-zero network.
Checkpoint init(const LearnerConfig& config);

std::vector<double> forward_logits(const Checkpoint& ckpt,
                                   std::span<const double> input);
PredictionDistribution forward(const Checkpoint& ckpt,
                               std::span<const double> input);

// Mean cross-entropy -log p(target | input) over the batch.
double loss(const Checkpoint& ckpt, std::span<const Problem> batch);

// One SGD step on the mean batch gradient with decoupled per-step L2 decay:
// p <- p - lr * (grad + weight_decay * p). Functional: input unchanged.
Checkpoint train_step(const Checkpoint& ckpt, std::span<const Problem> batch,
                      const TrainSpec& spec);

// Correctness predicate: argmax of the prediction equals the target, ties
// broken toward the lowest class index.
int phi(const Checkpoint& ckpt, const Problem& problem);

int argmax_lowest(std::span<const double> values);

// One sampled answer from the top_p nucleus of the tempered distribution.
int sample_prediction(const Checkpoint& ckpt, const Problem& problem,
                      double temperature, double top_p, Rng& rng);

// Mean exact-match correctness of `attempts` samples for one problem.
// temperature = 0 degenerates to phi.
double avg_at_k(const Checkpoint& ckpt, const Problem& problem,
                const EvalSpec& spec);

// temperature = 0: mean phi over the pool. temperature > 0: mean avg@k with
// per-(problem, attempt) streams keyed by (seed, problem id, attempt).
double evaluate(const Checkpoint& ckpt, std::span<const Problem> pool,
                const EvalSpec& spec);

// Versioned little-endian binary container; round-trip is bit-exact.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace levelup
