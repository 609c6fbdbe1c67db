#include "levelup/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "levelup/errors.hpp"
#include "levelup/io.hpp"

namespace levelup {

namespace {

// Embeddings are calibrated to the matcher's fixed similarity thresholds
// (mean >= 0.65, max >= 0.8): a shared bias coordinate lifts typical
// similarities into that band, and a content-keyed pseudo-random block makes
// the 0.8 max gate a near-exact-duplicate test, so duplicated problems
// recover their own level. Block weights below are squared magnitudes.
constexpr int kContentKeyDim = 512;
constexpr int kMaskSlots = 16;
constexpr double kBiasWeight2 = 3.9;
constexpr double kContentKeyWeight2 = 1.6;
constexpr double kFeatureWeight2 = 0.1;
constexpr double kMaskWeight2 = 0.15;
constexpr double kInputWeight2 = 0.15;
constexpr double kHiddenWeight2 = 0.4;

std::array<double, 6> feature_vector(const FeatureBundle& f) {
  return {static_cast<double>(f.chain_length),
          static_cast<double>(f.encoded_length),
          static_cast<double>(f.op_counts[0]),
          static_cast<double>(f.op_counts[1]),
          static_cast<double>(f.op_counts[2]),
          static_cast<double>(f.max_operand)};
}

void normalize(std::vector<double>& values) {
  double norm = 0.0;
  for (double v : values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw NumericError("cannot normalize a zero vector");
  for (double& v : values) v /= norm;
}

// Appends `block` scaled to squared magnitude weight2 (unit-normalized
// first; an all-zero block stays zero).
void append_block(std::vector<double>& values, std::span<const double> block,
                  double weight2) {
  double norm = 0.0;
  for (double v : block) norm += v * v;
  norm = std::sqrt(norm);
  const double scale = norm > 0.0 ? std::sqrt(weight2) / norm : 0.0;
  for (double v : block) values.push_back(v * scale);
}

// Rademacher vector keyed by the exact encoded content, so duplicates agree
// and distinct problems are nearly orthogonal in this block.
std::vector<double> content_key(std::span<const double> input) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < input.size(); ++i)
    if (input[i] != 0.0) {
      h ^= i + 1;
      h *= 0x100000001b3ULL;
    }
  Rng rng(derive_seed(h, "content-key"));
  std::vector<double> key(kContentKeyDim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kContentKeyDim));
  for (double& v : key) v = rng.uniform() < 0.5 ? -scale : scale;
  return key;
}

std::vector<double> length_mask(int chain_length) {
  std::vector<double> mask(2 * kMaskSlots, 0.0);
  for (int slot = 0; slot < kMaskSlots; ++slot) {
    const bool active = slot < std::min(chain_length, kMaskSlots);
    mask[static_cast<std::size_t>(2 * slot + (active ? 0 : 1))] = 1.0;
  }
  return mask;
}

}  // namespace

std::string_view to_string(EmbedMode mode) {
  return mode == EmbedMode::feature ? "feature" : "hidden";
}

EmbedMode parse_embed_mode(std::string_view name) {
  if (name == "feature") return EmbedMode::feature;
  if (name == "hidden") return EmbedMode::hidden;
  throw ValidationError("embed_mode", "unknown mode: " + std::string(name));
}

FeatureStandardizer FeatureStandardizer::fit(std::span<const Problem> reference_pool) {
  if (reference_pool.empty())
    throw ValidationError("reference_pool", "must be non-empty");
  FeatureStandardizer s;
  const double n = static_cast<double>(reference_pool.size());
  for (const auto& p : reference_pool) {
    const auto f = feature_vector(p.features);
    for (std::size_t i = 0; i < f.size(); ++i) s.mean[i] += f[i];
  }
  for (double& m : s.mean) m /= n;
  for (const auto& p : reference_pool) {
    const auto f = feature_vector(p.features);
    for (std::size_t i = 0; i < f.size(); ++i)
      s.stddev[i] += (f[i] - s.mean[i]) * (f[i] - s.mean[i]);
  }
  for (double& sd : s.stddev) sd = std::sqrt(sd / n);
  return s;
}

std::array<double, 6> FeatureStandardizer::apply(const FeatureBundle& features) const {
  const auto f = feature_vector(features);
  std::array<double, 6> out{};
  for (std::size_t i = 0; i < f.size(); ++i)
    out[i] = stddev[i] > 0.0 ? (f[i] - mean[i]) / stddev[i] : 0.0;
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw ValidationError("vectors", "dimension mismatch in cosine");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0)
    throw NumericError("cosine of a zero vector is undefined");
  const double sim = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(sim, -1.0, 1.0);
}

EmbeddingVector embed_feature(const Problem& problem,
                              const FeatureStandardizer& standardizer) {
  std::vector<double> values;
  values.reserve(1 + kContentKeyDim + 6 + 2 * kMaskSlots + problem.input.size());
  values.push_back(std::sqrt(kBiasWeight2));
  append_block(values, content_key(problem.input), kContentKeyWeight2);
  const auto standardized = standardizer.apply(problem.features);
  append_block(values, standardized, kFeatureWeight2);
  append_block(values, length_mask(problem.features.chain_length), kMaskWeight2);
  append_block(values, problem.input, kInputWeight2);
  normalize(values);
  return EmbeddingVector{std::move(values), EmbedMode::feature};
}

EmbeddingVector embed_hidden(const Problem& problem, const Checkpoint& reference) {
  if (reference.config.hidden_widths.empty())
    throw ValidationError("reference_checkpoint",
                          "hidden-mode embedding needs at least one hidden layer");
  if (static_cast<int>(problem.input.size()) != reference.config.input_dim)
    throw ValidationError("input", "dimension mismatch for hidden embedding");

  // Penultimate-layer activations: run all layers except the output head.
  const auto shapes = layer_shapes(reference.config);
  std::vector<double> activation(problem.input.begin(), problem.input.end());
  for (std::size_t l = 0; l + 1 < shapes.size(); ++l) {
    std::vector<double> next(static_cast<std::size_t>(shapes[l].out), 0.0);
    const auto& layer = reference.layers[l];
    for (int r = 0; r < shapes[l].out; ++r) {
      const double* w = layer.weights.data() + static_cast<std::size_t>(r) * shapes[l].in;
      double acc = layer.bias[static_cast<std::size_t>(r)];
      for (int c = 0; c < shapes[l].in; ++c) acc += w[c] * activation[static_cast<std::size_t>(c)];
      next[static_cast<std::size_t>(r)] = std::tanh(acc);
    }
    activation = std::move(next);
  }

  std::vector<double> values;
  values.reserve(1 + kContentKeyDim + activation.size());
  values.push_back(std::sqrt(kBiasWeight2));
  append_block(values, content_key(problem.input), kContentKeyWeight2);
  append_block(values, activation, kHiddenWeight2);
  normalize(values);
  return EmbeddingVector{std::move(values), EmbedMode::hidden};
}

void validate(const MatchThresholds& thresholds) {
  if (!(thresholds.mean_min >= 0.0 && thresholds.mean_min <= thresholds.max_min &&
        thresholds.max_min <= 1.0))
    throw ValidationError("thresholds", "need 0 <= mean_min <= max_min <= 1");
}

MatchReport match_embedded(
    const std::map<int, std::vector<EmbeddingVector>>& reference_by_level,
    std::span<const EmbeddingVector> target_embeddings,
    std::span<const std::string> target_ids, const MatchThresholds& thresholds) {
  validate(thresholds);
  if (target_embeddings.size() != target_ids.size())
    throw ValidationError("targets", "embedding/id count mismatch");

  MatchReport report;
  for (const auto& [tau, embeddings] : reference_by_level)
    if (embeddings.empty())
      report.warnings.push_back("level " + std::to_string(tau) +
                                " has no reference problems; skipped");

  for (std::size_t t = 0; t < target_embeddings.size(); ++t) {
    MatchStats best_passing;
    MatchStats best_any;
    bool has_any = false;
    for (const auto& [tau, embeddings] : reference_by_level) {
      if (embeddings.empty()) continue;
      double mean_sim = 0.0;
      double max_sim = -1.0;
      for (const auto& ref : embeddings) {
        const double sim = cosine(target_embeddings[t].values, ref.values);
        mean_sim += sim;
        max_sim = std::max(max_sim, sim);
      }
      mean_sim /= static_cast<double>(embeddings.size());
      if (!has_any || mean_sim > best_any.mean_sim) {
        best_any = MatchStats{tau, mean_sim, max_sim, false};
        has_any = true;
      }
      if (mean_sim >= thresholds.mean_min && max_sim >= thresholds.max_min &&
          (!best_passing.matched || mean_sim > best_passing.mean_sim))
        best_passing = MatchStats{tau, mean_sim, max_sim, true};
    }
    if (best_passing.matched) {
      report.neo_by_level[best_passing.level].push_back(target_ids[t]);
      report.stats[target_ids[t]] = best_passing;
    } else {
      ++report.unmatched;
      report.stats[target_ids[t]] = best_any;
    }
  }
  return report;
}

MatchReport match_neo_transitional(const TransitionalSets& reference_sets,
                                   std::span<const Problem> reference_pool,
                                   std::span<const Problem> target_pool,
                                   const MatchThresholds& thresholds,
                                   EmbedMode mode,
                                   const Checkpoint* reference_ckpt) {
  if (reference_sets.transitional_count() == 0)
    throw ValidationError("reference_sets", "no transitional problems to match against");
  if (mode == EmbedMode::hidden && reference_ckpt == nullptr)
    throw ValidationError("reference_checkpoint", "required for hidden mode");

  std::unordered_map<std::string, const Problem*> by_id;
  by_id.reserve(reference_pool.size());
  for (const auto& p : reference_pool) by_id.emplace(p.id, &p);

  const FeatureStandardizer standardizer = FeatureStandardizer::fit(reference_pool);
  auto embed_one = [&](const Problem& p) {
    return mode == EmbedMode::feature ? embed_feature(p, standardizer)
                                      : embed_hidden(p, *reference_ckpt);
  };

  std::map<int, std::vector<EmbeddingVector>> reference_by_level;
  for (const auto& [tau, ids] : reference_sets.by_level) {
    auto& embeddings = reference_by_level[tau];
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw Error("unknown problem id in reference sets: " + id);
      embeddings.push_back(embed_one(*it->second));
    }
  }

  std::vector<EmbeddingVector> target_embeddings;
  std::vector<std::string> target_ids;
  target_embeddings.reserve(target_pool.size());
  for (const auto& p : target_pool) {
    target_embeddings.push_back(embed_one(p));
    target_ids.push_back(p.id);
  }

  MatchReport report = match_embedded(reference_by_level, target_embeddings,
                                      target_ids, thresholds);
  report.series_id = reference_sets.series_id;
  report.reference_pool_tag = reference_sets.pool_tag;
  report.target_pool_tag = target_pool.empty() ? "" : target_pool.front().pool_tag;
  report.num_levels = reference_sets.num_levels;
  return report;
}

TransitionalSets to_transitional_sets(const MatchReport& report) {
  TransitionalSets sets;
  sets.by_level = report.neo_by_level;
  sets.series_id = report.series_id;
  sets.pool_tag = report.target_pool_tag;
  sets.num_levels = report.num_levels;
  return sets;
}

void write_match_report_json(const std::filesystem::path& path,
                             const MatchReport& report) {
  nlohmann::ordered_json doc;
  doc["series_id"] = report.series_id;
  doc["reference_pool_tag"] = report.reference_pool_tag;
  doc["target_pool_tag"] = report.target_pool_tag;
  doc["num_levels"] = report.num_levels;
  nlohmann::ordered_json levels = nlohmann::ordered_json::object();
  for (const auto& [tau, ids] : report.neo_by_level)
    levels[std::to_string(tau)] = ids;
  doc["neo_by_level"] = levels;
  doc["unmatched"] = report.unmatched;
  doc["warnings"] = report.warnings;
  nlohmann::ordered_json stats = nlohmann::ordered_json::object();
  for (const auto& [id, s] : report.stats)
    stats[id] = {{"level", s.level},
                 {"mean_sim", s.mean_sim},
                 {"max_sim", s.max_sim},
                 {"matched", s.matched}};
  doc["stats"] = stats;
  write_text_file_atomic(path, doc.dump(2) + "\n");
}

MatchReport read_match_report_json(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad match report " + path.string() + ": " + e.what());
  }
  MatchReport report;
  try {
    report.series_id = doc.at("series_id").get<std::string>();
    report.reference_pool_tag = doc.at("reference_pool_tag").get<std::string>();
    report.target_pool_tag = doc.at("target_pool_tag").get<std::string>();
    report.num_levels = doc.at("num_levels").get<int>();
    for (const auto& [key, ids] : doc.at("neo_by_level").items())
      report.neo_by_level[std::stoi(key)] = ids.get<std::vector<std::string>>();
    report.unmatched = doc.at("unmatched").get<long>();
    report.warnings = doc.at("warnings").get<std::vector<std::string>>();
    for (const auto& [id, s] : doc.at("stats").items())
      report.stats[id] = MatchStats{s.at("level").get<int>(),
                                    s.at("mean_sim").get<double>(),
                                    s.at("max_sim").get<double>(),
                                    s.at("matched").get<bool>()};
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad match report " + path.string() + ": " + e.what());
  }
  return report;
}

}  // namespace levelup
