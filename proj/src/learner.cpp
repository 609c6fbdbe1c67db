#include "levelup/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "levelup/errors.hpp"

namespace levelup {

namespace {

void check_input_dim(const Checkpoint& ckpt, std::size_t got) {
  if (static_cast<int>(got) != ckpt.config.input_dim)
    throw ValidationError("input",
                          "dimension mismatch: got " + std::to_string(got) +
                              ", expected " + std::to_string(ckpt.config.input_dim));
}

// x = W a + b
void affine(const LayerParams& layer, int in, int out,
            std::span<const double> a, std::vector<double>& x) {
  x.assign(static_cast<std::size_t>(out), 0.0);
  for (int r = 0; r < out; ++r) {
    const double* w = layer.weights.data() + static_cast<std::size_t>(r) * in;
    double acc = layer.bias[static_cast<std::size_t>(r)];
    for (int c = 0; c < in; ++c) acc += w[c] * a[static_cast<std::size_t>(c)];
    x[static_cast<std::size_t>(r)] = acc;
  }
}

struct ForwardTrace {
  // activations[0] is the input; activations[l+1] the output of layer l
  // (tanh for hidden layers, raw logits for the final layer).
  std::vector<std::vector<double>> activations;
};

ForwardTrace trace_forward(const Checkpoint& ckpt, std::span<const double> input) {
  check_input_dim(ckpt, input.size());
  const auto shapes = layer_shapes(ckpt.config);
  ForwardTrace trace;
  trace.activations.reserve(shapes.size() + 1);
  trace.activations.emplace_back(input.begin(), input.end());
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    std::vector<double> x;
    affine(ckpt.layers[l], shapes[l].in, shapes[l].out, trace.activations.back(), x);
    if (l + 1 < shapes.size())
      for (double& v : x) v = std::tanh(v);
    trace.activations.push_back(std::move(x));
  }
  return trace;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - top);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

double log_sum_exp(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - top);
  return top + std::log(total);
}

struct Gradient {
  std::vector<LayerParams> layers;  // same shapes as the checkpoint

  explicit Gradient(const LearnerConfig& config) {
    for (const auto& shape : layer_shapes(config)) {
      LayerParams g;
      g.weights.assign(static_cast<std::size_t>(shape.out) * shape.in, 0.0);
      g.bias.assign(static_cast<std::size_t>(shape.out), 0.0);
      layers.push_back(std::move(g));
    }
  }
};

// Accumulates d(mean CE)/d(params) for one example, weighted by 1/batch.
void accumulate_gradient(const Checkpoint& ckpt, const Problem& problem,
                         double weight, Gradient& grad) {
  const auto shapes = layer_shapes(ckpt.config);
  const auto trace = trace_forward(ckpt, problem.input);
  const auto& logits = trace.activations.back();
  auto delta = softmax(logits);
  delta[static_cast<std::size_t>(problem.target)] -= 1.0;
  for (double& d : delta) d *= weight;

  for (std::size_t l = shapes.size(); l-- > 0;) {
    const auto& a_in = trace.activations[l];
    auto& g = grad.layers[l];
    const int in = shapes[l].in;
    const int out = shapes[l].out;
    for (int r = 0; r < out; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      g.bias[static_cast<std::size_t>(r)] += d;
      double* gw = g.weights.data() + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) gw[c] += d * a_in[static_cast<std::size_t>(c)];
    }
    if (l == 0) break;
    // Back through the affine map and the tanh of the previous layer.
    std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
    const auto& w = ckpt.layers[l].weights;
    for (int r = 0; r < out; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      const double* wr = w.data() + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) prev[static_cast<std::size_t>(c)] += wr[c] * d;
    }
    const auto& a = trace.activations[l];  // tanh outputs of layer l-1
    for (int c = 0; c < in; ++c)
      prev[static_cast<std::size_t>(c)] *= 1.0 - a[static_cast<std::size_t>(c)] * a[static_cast<std::size_t>(c)];
    delta = std::move(prev);
  }
}

// --- binary checkpoint container ---------------------------------------

constexpr char kMagic[8] = {'L', 'V', 'L', 'U', 'P', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw IoError("truncated checkpoint file: " + path.string());
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_le<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const std::filesystem::path& path) {
  const auto len = read_le<std::uint64_t>(in, path);
  if (len > (1ULL << 20)) throw IoError("corrupt checkpoint file: " + path.string());
  std::string s(static_cast<std::size_t>(len), '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint file: " + path.string());
  return s;
}

}  // namespace

void validate(const LearnerConfig& config) {
  if (config.input_dim < 1) throw ValidationError("input_dim", "must be >= 1");
  if (config.num_classes < 1) throw ValidationError("num_classes", "must be >= 1");
  for (int w : config.hidden_widths)
    if (w < 1) throw ValidationError("hidden_widths", "all widths must be >= 1");
  if (!(config.init_scale >= 0.0))
    throw ValidationError("init_scale", "must be >= 0");
}

void validate(const TrainSpec& spec) {
  if (!(spec.learning_rate > 0.0))
    throw ValidationError("learning_rate", "must be > 0");
  if (!(spec.weight_decay >= 0.0))
    throw ValidationError("weight_decay", "must be >= 0");
  if (spec.batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
  if (spec.max_steps < 0) throw ValidationError("max_steps", "must be >= 0");
}

void validate(const EvalSpec& spec) {
  if (spec.attempts < 1) throw ValidationError("attempts", "must be >= 1");
  if (!(spec.temperature >= 0.0))
    throw ValidationError("temperature", "must be >= 0");
  if (!(spec.top_p > 0.0 && spec.top_p <= 1.0))
    throw ValidationError("top_p", "must be in (0, 1]");
}

std::vector<LayerShape> layer_shapes(const LearnerConfig& config) {
  std::vector<LayerShape> shapes;
  int in = config.input_dim;
  for (int w : config.hidden_widths) {
    shapes.push_back({in, w});
    in = w;
  }
  shapes.push_back({in, config.num_classes});
  return shapes;
}

long parameter_count(const LearnerConfig& config) {
  long count = 0;
  for (const auto& shape : layer_shapes(config))
    count += static_cast<long>(shape.in) * shape.out + shape.out;
  return count;
}

Checkpoint init(const LearnerConfig& config) {
  validate(config);
  Checkpoint ckpt;
  ckpt.config = config;
  Rng rng(derive_seed(config.seed, "init"));
  for (const auto& shape : layer_shapes(config)) {
    LayerParams layer;
    layer.weights.resize(static_cast<std::size_t>(shape.out) * shape.in);
    layer.bias.resize(static_cast<std::size_t>(shape.out));
    for (double& w : layer.weights) w = (2.0 * rng.uniform() - 1.0) * config.init_scale;
    for (double& b : layer.bias) b = (2.0 * rng.uniform() - 1.0) * config.init_scale;
    ckpt.layers.push_back(std::move(layer));
  }
  ckpt.checkpoint_id = "init";
  return ckpt;
}

std::vector<double> forward_logits(const Checkpoint& ckpt,
                                   std::span<const double> input) {
  return trace_forward(ckpt, input).activations.back();
}

PredictionDistribution forward(const Checkpoint& ckpt,
                               std::span<const double> input) {
  return PredictionDistribution{softmax(forward_logits(ckpt, input))};
}

double loss(const Checkpoint& ckpt, std::span<const Problem> batch) {
  if (batch.empty()) throw ValidationError("batch", "must be non-empty");
  double total = 0.0;
  for (const auto& problem : batch) {
    const auto logits = forward_logits(ckpt, problem.input);
    total += log_sum_exp(logits) - logits[static_cast<std::size_t>(problem.target)];
  }
  return total / static_cast<double>(batch.size());
}

Checkpoint train_step(const Checkpoint& ckpt, std::span<const Problem> batch,
                      const TrainSpec& spec) {
  if (batch.empty()) throw ValidationError("batch", "must be non-empty");
  validate(spec);
  if (static_cast<int>(batch.size()) > spec.batch_size)
    throw ValidationError("batch", "larger than the spec's batch_size");

  Gradient grad(ckpt.config);
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const auto& problem : batch)
    accumulate_gradient(ckpt, problem, weight, grad);

  for (std::size_t l = 0; l < grad.layers.size(); ++l) {
    for (double g : grad.layers[l].weights)
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient at step " +
                           std::to_string(ckpt.steps_trained) + ", layer " +
                           std::to_string(l));
    for (double g : grad.layers[l].bias)
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient at step " +
                           std::to_string(ckpt.steps_trained) + ", layer " +
                           std::to_string(l));
  }

  Checkpoint next = ckpt;
  for (std::size_t l = 0; l < next.layers.size(); ++l) {
    auto& layer = next.layers[l];
    const auto& g = grad.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i)
      layer.weights[i] -= spec.learning_rate *
                          (g.weights[i] + spec.weight_decay * layer.weights[i]);
    for (std::size_t i = 0; i < layer.bias.size(); ++i)
      layer.bias[i] -= spec.learning_rate *
                       (g.bias[i] + spec.weight_decay * layer.bias[i]);
  }
  next.steps_trained = ckpt.steps_trained + 1;
  return next;
}

int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

int phi(const Checkpoint& ckpt, const Problem& problem) {
  const auto logits = forward_logits(ckpt, problem.input);
  return argmax_lowest(logits) == problem.target ? 1 : 0;
}

int sample_prediction(const Checkpoint& ckpt, const Problem& problem,
                      double temperature, double top_p, Rng& rng) {
  const auto logits = forward_logits(ckpt, problem.input);
  if (temperature <= 0.0) return argmax_lowest(logits);

  std::vector<double> tempered(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) tempered[i] = logits[i] / temperature;
  const auto probs = softmax(tempered);

  // Nucleus: smallest prefix of classes, by descending probability (ties
  // toward the lower index), whose mass reaches top_p.
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
  });
  double kept_mass = 0.0;
  std::size_t kept = 0;
  while (kept < order.size()) {
    kept_mass += probs[static_cast<std::size_t>(order[kept])];
    ++kept;
    if (kept_mass >= top_p) break;
  }

  const double u = rng.uniform() * kept_mass;
  double cum = 0.0;
  for (std::size_t i = 0; i < kept; ++i) {
    cum += probs[static_cast<std::size_t>(order[i])];
    if (u < cum) return order[i];
  }
  return order[kept - 1];
}

double avg_at_k(const Checkpoint& ckpt, const Problem& problem,
                const EvalSpec& spec) {
  validate(spec);
  if (spec.temperature <= 0.0) return phi(ckpt, problem);
  int correct = 0;
  for (int attempt = 0; attempt < spec.attempts; ++attempt) {
    Rng rng(derive_seed(spec.seed, "eval", fnv1a64(problem.id),
                        static_cast<std::uint64_t>(attempt)));
    const int answer = sample_prediction(ckpt, problem, spec.temperature, spec.top_p, rng);
    if (answer == problem.target) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(spec.attempts);
}

double evaluate(const Checkpoint& ckpt, std::span<const Problem> pool,
                const EvalSpec& spec) {
  validate(spec);
  if (pool.empty()) throw ValidationError("pool", "must be non-empty");
  double total = 0.0;
  if (spec.temperature <= 0.0) {
    for (const auto& problem : pool) total += phi(ckpt, problem);
  } else {
    for (const auto& problem : pool) total += avg_at_k(ckpt, problem, spec);
  }
  return total / static_cast<double>(pool.size());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kVersion);
    write_string(out, ckpt.checkpoint_id);
    write_le<std::int32_t>(out, ckpt.config.input_dim);
    write_le<std::int32_t>(out, ckpt.config.num_classes);
    write_le<double>(out, ckpt.config.init_scale);
    write_le<std::uint64_t>(out, ckpt.config.seed);
    write_le<std::uint64_t>(out, ckpt.config.hidden_widths.size());
    for (int w : ckpt.config.hidden_widths) write_le<std::int32_t>(out, w);
    write_le<std::int64_t>(out, ckpt.steps_trained);
    write_le<double>(out, ckpt.val_accuracy);
    write_le<std::uint64_t>(out, ckpt.layers.size());
    for (const auto& layer : ckpt.layers) {
      write_le<std::uint64_t>(out, layer.bias.size());
      write_le<std::uint64_t>(out, layer.weights.size());
      for (double w : layer.weights) write_le<double>(out, w);
      for (double b : layer.bias) write_le<double>(out, b);
    }
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint file: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  const auto version = read_le<std::uint32_t>(in, path);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) +
                  ": " + path.string());

  Checkpoint ckpt;
  ckpt.checkpoint_id = read_string(in, path);
  ckpt.config.input_dim = read_le<std::int32_t>(in, path);
  ckpt.config.num_classes = read_le<std::int32_t>(in, path);
  ckpt.config.init_scale = read_le<double>(in, path);
  ckpt.config.seed = read_le<std::uint64_t>(in, path);
  const auto n_hidden = read_le<std::uint64_t>(in, path);
  if (n_hidden > 1024) throw IoError("corrupt checkpoint file: " + path.string());
  for (std::uint64_t i = 0; i < n_hidden; ++i)
    ckpt.config.hidden_widths.push_back(read_le<std::int32_t>(in, path));
  ckpt.steps_trained = read_le<std::int64_t>(in, path);
  ckpt.val_accuracy = read_le<double>(in, path);
  const auto n_layers = read_le<std::uint64_t>(in, path);

  const auto shapes = layer_shapes(ckpt.config);
  if (n_layers != shapes.size())
    throw IoError("corrupt checkpoint file (layer count): " + path.string());
  for (std::uint64_t l = 0; l < n_layers; ++l) {
    const auto n_bias = read_le<std::uint64_t>(in, path);
    const auto n_weights = read_le<std::uint64_t>(in, path);
    const auto& shape = shapes[static_cast<std::size_t>(l)];
    if (n_bias != static_cast<std::uint64_t>(shape.out) ||
        n_weights != static_cast<std::uint64_t>(shape.out) * static_cast<std::uint64_t>(shape.in))
      throw IoError("corrupt checkpoint file (layer shape): " + path.string());
    LayerParams layer;
    layer.weights.resize(static_cast<std::size_t>(n_weights));
    layer.bias.resize(static_cast<std::size_t>(n_bias));
    for (double& w : layer.weights) w = read_le<double>(in, path);
    for (double& b : layer.bias) b = read_le<double>(in, path);
    ckpt.layers.push_back(std::move(layer));
  }
  return ckpt;
}

}  // namespace levelup
