#include <doctest.h>

#include <cmath>

#include "levelup/errors.hpp"
#include "levelup/transfer.hpp"

using namespace levelup;

namespace {

EmbeddingVector unit(std::vector<double> values) {
  double norm = 0.0;
  for (double v : values) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : values) v /= norm;
  return EmbeddingVector{std::move(values), EmbedMode::feature};
}

PoolSpec reference_spec() {
  PoolSpec spec;
  spec.modulus = 7;
  spec.max_chain = 6;
  spec.size = 400;
  spec.seed = 77;
  spec.pool_tag = "ref";
  return spec;
}

// Transitional sets keyed by chain length: level tau = problems of length tau+1.
TransitionalSets sets_by_length(const std::vector<Problem>& pool, int levels) {
  TransitionalSets sets;
  sets.series_id = "irt-series";
  sets.pool_tag = pool.front().pool_tag;
  sets.num_levels = levels;
  for (const auto& p : pool) {
    const int tau = p.features.chain_length - 1;
    if (tau >= 1 && tau <= levels) sets.by_level[tau].push_back(p.id);
  }
  return sets;
}

}  // namespace

TEST_SUITE_BEGIN("transfer");

TEST_CASE("cosine closed forms") {
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 0}) ==
        doctest::Approx(1.0));
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) ==
        doctest::Approx(0.0));
  CHECK(cosine(std::vector<double>{1, 1}, std::vector<double>{1, 0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)));
  // scale invariance for positive scaling
  CHECK(cosine(std::vector<double>{3, 3}, std::vector<double>{1, 0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}),
                  NumericError);
  CHECK_THROWS_AS(cosine(std::vector<double>{1}, std::vector<double>{1, 0}),
                  ValidationError);
}

TEST_CASE("feature embeddings are unit norm, id-blind and deterministic") {
  const auto pool = generate_pool(reference_spec());
  const auto standardizer = FeatureStandardizer::fit(pool);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto e = embed_feature(pool[i], standardizer);
    double norm = 0.0;
    for (double v : e.values) norm += v * v;
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
  }
  Problem renamed = pool[0];
  renamed.id = "different-id";
  const auto a = embed_feature(pool[0], standardizer);
  const auto b = embed_feature(renamed, standardizer);
  CHECK(a.values == b.values);
  CHECK(cosine(a.values, b.values) == doctest::Approx(1.0));
}

TEST_CASE("hidden embeddings are unit norm and representation-sensitive") {
  const auto pool = generate_pool(reference_spec());
  LearnerConfig config{encoded_dim(7, 6), {10}, 7, 0.4, 3};
  const Checkpoint ckpt = init(config);
  const auto e = embed_hidden(pool[0], ckpt);
  double norm = 0.0;
  for (double v : e.values) norm += v * v;
  CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
  CHECK(e.source == EmbedMode::hidden);

  // deterministic; duplicates agree exactly, distinct problems do not
  CHECK(embed_hidden(pool[0], ckpt).values == e.values);
  CHECK(cosine(embed_hidden(pool[1], ckpt).values, e.values) < 1.0);

  LearnerConfig no_hidden{encoded_dim(7, 6), {}, 7, 0.4, 3};
  CHECK_THROWS_AS(embed_hidden(pool[0], init(no_hidden)), ValidationError);
}

TEST_CASE("match_embedded on handmade embeddings") {
  // two levels with reference embeddings e and -e; target = e
  const auto e = unit({1, 0, 0});
  auto minus = e;
  for (double& v : minus.values) v = -v;
  std::map<int, std::vector<EmbeddingVector>> reference = {{1, {e}}, {2, {minus}}};

  const std::vector<EmbeddingVector> targets = {e};
  const std::vector<std::string> ids = {"t0"};
  const auto report = match_embedded(reference, targets, ids, MatchThresholds{0.65, 0.8});
  REQUIRE(report.neo_by_level.count(1) == 1);
  CHECK(report.neo_by_level.at(1) == std::vector<std::string>{"t0"});
  CHECK(report.neo_by_level.count(2) == 0);
  CHECK(report.unmatched == 0);
  CHECK(report.stats.at("t0").matched);
  CHECK(report.stats.at("t0").mean_sim == doctest::Approx(1.0));

  // orthogonal target matches nothing
  const std::vector<EmbeddingVector> ortho = {unit({0, 1, 0})};
  const auto miss = match_embedded(reference, ortho, ids, MatchThresholds{0.65, 0.8});
  CHECK(miss.unmatched == 1);
  CHECK(miss.neo_by_level.empty());
  CHECK_FALSE(miss.stats.at("t0").matched);

  // empty reference levels produce a warning and are skipped
  reference[3] = {};
  const auto warned = match_embedded(reference, targets, ids, MatchThresholds{0.65, 0.8});
  REQUIRE(warned.warnings.size() == 1);
  CHECK(warned.warnings[0].find("level 3") != std::string::npos);

  CHECK_THROWS_AS(match_embedded(reference, targets, ids, MatchThresholds{0.9, 0.8}),
                  ValidationError);
}

TEST_CASE("duplicate targets recover their own level") {
  const auto reference_pool = generate_pool(reference_spec());
  const auto sets = sets_by_length(reference_pool, 4);

  // same generator and seed, new tag: problems identical, ids distinct
  PoolSpec target_spec = reference_spec();
  target_spec.pool_tag = "target";
  const auto target_pool = generate_pool(target_spec);

  const auto report = match_neo_transitional(sets, reference_pool, target_pool,
                                             MatchThresholds{0.65, 0.8},
                                             EmbedMode::feature);
  // level assignment must follow the duplicate's own chain length
  long recovered = 0, transitional_targets = 0;
  for (std::size_t i = 0; i < target_pool.size(); ++i) {
    const int tau = target_pool[i].features.chain_length - 1;
    if (tau < 1 || tau > 4) continue;
    ++transitional_targets;
    const auto it = report.stats.find(target_pool[i].id);
    REQUIRE(it != report.stats.end());
    if (it->second.matched && it->second.level == tau) ++recovered;
    CHECK(it->second.max_sim == doctest::Approx(1.0));  // exact duplicate present
  }
  CHECK(recovered == transitional_targets);
}

TEST_CASE("raising mean_min never grows a level") {
  const auto reference_pool = generate_pool(reference_spec());
  const auto sets = sets_by_length(reference_pool, 4);
  PoolSpec target_spec = reference_spec();
  target_spec.pool_tag = "target";
  target_spec.seed = 78;  // different problems this time
  const auto target_pool = generate_pool(target_spec);

  const auto loose = match_neo_transitional(sets, reference_pool, target_pool,
                                            MatchThresholds{0.5, 0.8},
                                            EmbedMode::feature);
  const auto tight = match_neo_transitional(sets, reference_pool, target_pool,
                                            MatchThresholds{0.68, 0.8},
                                            EmbedMode::feature);
  for (const auto& [tau, ids] : tight.neo_by_level) {
    const auto it = loose.neo_by_level.find(tau);
    const std::size_t loose_count = it == loose.neo_by_level.end() ? 0 : it->second.size();
    CHECK(ids.size() <= loose_count);
  }
  CHECK(tight.unmatched >= loose.unmatched);
}

TEST_CASE("match report json round trip") {
  const auto reference_pool = generate_pool(reference_spec());
  const auto sets = sets_by_length(reference_pool, 4);
  PoolSpec target_spec = reference_spec();
  target_spec.pool_tag = "target";
  const auto target_pool = generate_pool(target_spec);
  const auto report = match_neo_transitional(sets, reference_pool, target_pool,
                                             MatchThresholds{0.65, 0.8},
                                             EmbedMode::feature);
  const auto path = std::filesystem::temp_directory_path() / "levelup_match.json";
  write_match_report_json(path, report);
  const auto loaded = read_match_report_json(path);
  CHECK(loaded.neo_by_level == report.neo_by_level);
  CHECK(loaded.unmatched == report.unmatched);
  CHECK(loaded.num_levels == report.num_levels);
  CHECK(loaded.stats.size() == report.stats.size());

  // neo sets feed straight into the curriculum builder
  const auto neo = to_transitional_sets(loaded);
  CHECK(neo.by_level == report.neo_by_level);
  CHECK(neo.pool_tag == "target");
  std::filesystem::remove(path);
}

TEST_SUITE_END();
