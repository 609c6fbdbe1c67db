#include "levelup/transitional.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "levelup/errors.hpp"
#include "levelup/io.hpp"

namespace levelup {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::unordered_map<std::string, std::size_t> index_by_id(
    std::span<const Problem> pool) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) index.emplace(pool[i].id, i);
  return index;
}

LevelStatsRow mean_features(int level, std::span<const Problem> pool,
                            const std::vector<std::size_t>& members) {
  LevelStatsRow row;
  row.level = level;
  row.count = static_cast<long>(members.size());
  if (members.empty()) {
    row.defined = false;
    row.mean_chain_length = row.mean_encoded_length = row.mean_adds =
        row.mean_subs = row.mean_muls = row.mean_max_operand = kNan;
    return row;
  }
  row.defined = true;
  for (std::size_t i : members) {
    const auto& f = pool[i].features;
    row.mean_chain_length += f.chain_length;
    row.mean_encoded_length += f.encoded_length;
    row.mean_adds += f.op_counts[0];
    row.mean_subs += f.op_counts[1];
    row.mean_muls += f.op_counts[2];
    row.mean_max_operand += f.max_operand;
  }
  const double n = static_cast<double>(members.size());
  row.mean_chain_length /= n;
  row.mean_encoded_length /= n;
  row.mean_adds /= n;
  row.mean_subs /= n;
  row.mean_muls /= n;
  row.mean_max_operand /= n;
  return row;
}

}  // namespace

std::string_view to_string(TransitionClass cls) {
  switch (cls) {
    case TransitionClass::transitional: return "transitional";
    case TransitionClass::always_solved: return "always_solved";
    case TransitionClass::never_solved: return "never_solved";
    case TransitionClass::inconsistent: return "inconsistent";
  }
  return "inconsistent";
}

SolvabilityMatrix build_matrix(const ModelSeries& series,
                               std::span<const Problem> pool,
                               const MatrixEvalMode& mode) {
  const auto diag = validate_series(series);
  if (!diag.ok) throw SeriesError("invalid series: " + diag.violations.front());
  if (pool.empty()) throw ValidationError("pool", "must be non-empty");
  for (const auto& model : series.models)
    if (static_cast<int>(pool.front().input.size()) != model.config.input_dim)
      throw ValidationError("pool", "encoding dimension mismatch for model " +
                                        model.checkpoint_id);

  SolvabilityMatrix matrix;
  matrix.series_id = series.series_id;
  matrix.num_models = static_cast<int>(series.models.size());
  matrix.problem_ids.reserve(pool.size());
  for (const auto& p : pool) matrix.problem_ids.push_back(p.id);
  matrix.bits.assign(pool.size() * series.models.size(), 0);
  for (std::size_t r = 0; r < pool.size(); ++r) {
    for (std::size_t i = 0; i < series.models.size(); ++i) {
      std::uint8_t bit;
      if (mode.stochastic)
        bit = avg_at_k(series.models[i], pool[r], mode.eval) >= 0.5 ? 1 : 0;
      else
        bit = static_cast<std::uint8_t>(phi(series.models[i], pool[r]));
      matrix.bits[r * series.models.size() + i] = bit;
    }
  }
  return matrix;
}

SolvabilityMatrix build_matrix_irt(std::span<const IrtLearner> learners,
                                   std::span<const double> difficulties,
                                   std::span<const std::string> problem_ids,
                                   const std::string& series_id) {
  if (learners.size() < 2)
    throw ValidationError("learners", "need at least 2 learners");
  if (difficulties.size() != problem_ids.size())
    throw ValidationError("difficulties", "size mismatch with problem ids");
  SolvabilityMatrix matrix;
  matrix.series_id = series_id;
  matrix.num_models = static_cast<int>(learners.size());
  matrix.problem_ids.assign(problem_ids.begin(), problem_ids.end());
  matrix.bits.assign(problem_ids.size() * learners.size(), 0);
  for (std::size_t r = 0; r < problem_ids.size(); ++r)
    for (std::size_t i = 0; i < learners.size(); ++i)
      matrix.bits[r * learners.size() + i] = static_cast<std::uint8_t>(
          irt_solve(learners[i], difficulties[r], problem_ids[r]));
  return matrix;
}

RowClassification classify_row(std::span<const std::uint8_t> row) {
  if (row.size() < 2)
    throw ValidationError("row", "series rows need length >= 2");
  std::size_t zeros = 0;
  while (zeros < row.size() && row[zeros] == 0) ++zeros;
  if (zeros == row.size()) return {TransitionClass::never_solved, 0};
  for (std::size_t i = zeros; i < row.size(); ++i)
    if (row[i] == 0) return {TransitionClass::inconsistent, 0};
  if (zeros == 0) return {TransitionClass::always_solved, 0};
  return {TransitionClass::transitional, static_cast<int>(zeros)};
}

TransitionalSets extract(const SolvabilityMatrix& matrix,
                         const std::string& pool_tag) {
  TransitionalSets sets;
  sets.series_id = matrix.series_id;
  sets.pool_tag = pool_tag;
  sets.num_levels = matrix.num_models - 1;
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    const auto rc = classify_row(matrix.row(r));
    switch (rc.cls) {
      case TransitionClass::transitional:
        sets.by_level[rc.tau].push_back(matrix.problem_ids[r]);
        break;
      case TransitionClass::always_solved:
        ++sets.excluded.always;
        break;
      case TransitionClass::never_solved:
        ++sets.excluded.never;
        break;
      case TransitionClass::inconsistent:
        ++sets.excluded.inconsistent;
        break;
    }
  }
  return sets;
}

LevelStats level_stats(const TransitionalSets& sets,
                       const SolvabilityMatrix& matrix,
                       std::span<const Problem> pool) {
  const auto index = index_by_id(pool);
  auto resolve = [&](const std::string& id) {
    const auto it = index.find(id);
    if (it == index.end()) throw Error("unknown problem id: " + id);
    return it->second;
  };

  LevelStats stats;
  for (int tau = 1; tau <= sets.num_levels; ++tau) {
    std::vector<std::size_t> members;
    if (const auto it = sets.by_level.find(tau); it != sets.by_level.end())
      for (const auto& id : it->second) members.push_back(resolve(id));
    stats.transitional.push_back(mean_features(tau, pool, members));
  }
  for (int i = 0; i < matrix.num_models; ++i) {
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < matrix.rows(); ++r)
      if (matrix.at(r, i) == 1) members.push_back(resolve(matrix.problem_ids[r]));
    stats.all_solved.push_back(mean_features(i, pool, members));
  }
  return stats;
}

void write_matrix_csv(const std::filesystem::path& path,
                      const SolvabilityMatrix& matrix) {
  std::ostringstream out;
  out << "problem_id";
  for (int i = 0; i < matrix.num_models; ++i) out << ",m" << i;
  out << '\n';
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    out << matrix.problem_ids[r];
    for (int i = 0; i < matrix.num_models; ++i)
      out << ',' << static_cast<int>(matrix.at(r, i));
    out << '\n';
  }
  write_text_file_atomic(path, out.str());
}

SolvabilityMatrix read_matrix_csv(const std::filesystem::path& path,
                                  const std::string& series_id) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line))
    throw IoError("empty matrix file: " + path.string());
  int num_models = 0;
  for (char c : line)
    if (c == ',') ++num_models;
  if (num_models < 2)
    throw IoError("matrix file needs at least 2 model columns: " + path.string());

  SolvabilityMatrix matrix;
  matrix.series_id = series_id;
  matrix.num_models = num_models;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    if (!std::getline(cells, cell, ','))
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad row");
    matrix.problem_ids.push_back(cell);
    for (int i = 0; i < num_models; ++i) {
      if (!std::getline(cells, cell, ',') || (cell != "0" && cell != "1"))
        throw IoError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 0/1 cell");
      matrix.bits.push_back(cell == "1" ? 1 : 0);
    }
  }
  return matrix;
}

void write_sets_json(const std::filesystem::path& path,
                     const TransitionalSets& sets) {
  nlohmann::ordered_json doc;
  doc["series_id"] = sets.series_id;
  doc["pool_tag"] = sets.pool_tag;
  doc["num_levels"] = sets.num_levels;
  nlohmann::ordered_json levels = nlohmann::ordered_json::object();
  for (const auto& [tau, ids] : sets.by_level)
    levels[std::to_string(tau)] = ids;
  doc["by_level"] = levels;
  doc["excluded_counts"] = {{"always", sets.excluded.always},
                            {"never", sets.excluded.never},
                            {"inconsistent", sets.excluded.inconsistent}};
  write_text_file_atomic(path, doc.dump(2) + "\n");
}

TransitionalSets read_sets_json(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad sets file " + path.string() + ": " + e.what());
  }
  TransitionalSets sets;
  try {
    sets.series_id = doc.at("series_id").get<std::string>();
    sets.pool_tag = doc.at("pool_tag").get<std::string>();
    sets.num_levels = doc.at("num_levels").get<int>();
    for (const auto& [key, ids] : doc.at("by_level").items())
      sets.by_level[std::stoi(key)] = ids.get<std::vector<std::string>>();
    const auto& exc = doc.at("excluded_counts");
    sets.excluded.always = exc.at("always").get<long>();
    sets.excluded.never = exc.at("never").get<long>();
    sets.excluded.inconsistent = exc.at("inconsistent").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad sets file " + path.string() + ": " + e.what());
  }
  return sets;
}

}  // namespace levelup
