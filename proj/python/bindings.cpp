#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "levelup/config.hpp"
#include "levelup/curriculum.hpp"
#include "levelup/harness.hpp"
#include "levelup/learner.hpp"
#include "levelup/series.hpp"
#include "levelup/taskgen.hpp"
#include "levelup/transfer.hpp"
#include "levelup/transitional.hpp"

namespace py = pybind11;
using namespace levelup;

PYBIND11_MODULE(_levelup, m) {
  m.doc() = "Transitional-problem curricula: pools, learners, series, "
            "extraction, schedules, transfer matching and experiment runners";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);

  // --- taskgen -----------------------------------------------------------
  py::class_<FeatureBundle>(m, "FeatureBundle")
      .def(py::init<>())
      .def_readwrite("chain_length", &FeatureBundle::chain_length)
      .def_readwrite("encoded_length", &FeatureBundle::encoded_length)
      .def_readwrite("op_counts", &FeatureBundle::op_counts)
      .def_readwrite("max_operand", &FeatureBundle::max_operand);

  py::class_<Problem>(m, "Problem")
      .def(py::init<>())
      .def_readwrite("id", &Problem::id)
      .def_readwrite("input", &Problem::input)
      .def_readwrite("target", &Problem::target)
      .def_readwrite("features", &Problem::features)
      .def_readwrite("pool_tag", &Problem::pool_tag);

  py::class_<PoolSpec>(m, "PoolSpec")
      .def(py::init<>())
      .def_readwrite("modulus", &PoolSpec::modulus)
      .def_readwrite("max_chain", &PoolSpec::max_chain)
      .def_readwrite("chain_length_weights", &PoolSpec::chain_length_weights)
      .def_readwrite("op_mix", &PoolSpec::op_mix)
      .def_readwrite("size", &PoolSpec::size)
      .def_readwrite("seed", &PoolSpec::seed)
      .def_readwrite("pool_tag", &PoolSpec::pool_tag);

  py::enum_<ChainOp>(m, "ChainOp")
      .value("add", ChainOp::add)
      .value("sub", ChainOp::sub)
      .value("mul", ChainOp::mul);

  py::class_<ChainStep>(m, "ChainStep")
      .def(py::init<ChainOp, int>(), py::arg("op"), py::arg("operand"))
      .def_readwrite("op", &ChainStep::op)
      .def_readwrite("operand", &ChainStep::operand);

  py::class_<ArithChain>(m, "ArithChain")
      .def(py::init<>())
      .def_readwrite("start", &ArithChain::start)
      .def_readwrite("steps", &ArithChain::steps);

  py::class_<IrtLearner> irt(m, "IrtLearner");
  py::enum_<IrtLearner::Mode>(irt, "Mode")
      .value("deterministic", IrtLearner::Mode::deterministic)
      .value("logistic", IrtLearner::Mode::logistic);
  irt.def(py::init<>())
      .def_readwrite("ability", &IrtLearner::ability)
      .def_readwrite("mode", &IrtLearner::mode)
      .def_readwrite("noise_seed", &IrtLearner::noise_seed);

  m.def("generate_pool", &generate_pool, py::arg("spec"));
  m.def("encoded_dim", &encoded_dim, py::arg("modulus"), py::arg("max_chain"));
  m.def("encode", &encode, py::arg("chain"), py::arg("modulus"), py::arg("max_chain"));
  m.def("eval_chain", &eval_chain, py::arg("chain"), py::arg("modulus"));
  m.def("irt_solve", &irt_solve, py::arg("learner"), py::arg("difficulty"),
        py::arg("problem_id") = std::string_view{});
  m.def("write_pool_jsonl", &write_pool_jsonl, py::arg("path"), py::arg("pool"));
  m.def("read_pool_jsonl", &read_pool_jsonl, py::arg("path"));

  // --- learner -----------------------------------------------------------
  py::class_<LearnerConfig>(m, "LearnerConfig")
      .def(py::init<>())
      .def_readwrite("input_dim", &LearnerConfig::input_dim)
      .def_readwrite("hidden_widths", &LearnerConfig::hidden_widths)
      .def_readwrite("num_classes", &LearnerConfig::num_classes)
      .def_readwrite("init_scale", &LearnerConfig::init_scale)
      .def_readwrite("seed", &LearnerConfig::seed);

  py::class_<TrainSpec>(m, "TrainSpec")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainSpec::learning_rate)
      .def_readwrite("weight_decay", &TrainSpec::weight_decay)
      .def_readwrite("batch_size", &TrainSpec::batch_size)
      .def_readwrite("max_steps", &TrainSpec::max_steps)
      .def_readwrite("shuffle_seed", &TrainSpec::shuffle_seed);

  py::class_<EvalSpec>(m, "EvalSpec")
      .def(py::init<>())
      .def_readwrite("attempts", &EvalSpec::attempts)
      .def_readwrite("temperature", &EvalSpec::temperature)
      .def_readwrite("top_p", &EvalSpec::top_p)
      .def_readwrite("seed", &EvalSpec::seed);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def(py::init<>())
      .def_readonly("config", &Checkpoint::config)
      .def_readonly("steps_trained", &Checkpoint::steps_trained)
      .def_readonly("val_accuracy", &Checkpoint::val_accuracy)
      .def_readonly("checkpoint_id", &Checkpoint::checkpoint_id);

  m.def("parameter_count", &parameter_count, py::arg("config"));
  m.def("init", &init, py::arg("config"));
  m.def(
      "forward",
      [](const Checkpoint& ckpt, const std::vector<double>& input) {
        return forward(ckpt, input).probs;
      },
      py::arg("ckpt"), py::arg("input"));
  m.def(
      "loss",
      [](const Checkpoint& ckpt, const std::vector<Problem>& batch) {
        return loss(ckpt, batch);
      },
      py::arg("ckpt"), py::arg("batch"));
  m.def(
      "train_step",
      [](const Checkpoint& ckpt, const std::vector<Problem>& batch,
         const TrainSpec& spec) { return train_step(ckpt, batch, spec); },
      py::arg("ckpt"), py::arg("batch"), py::arg("spec"));
  m.def("phi", &phi, py::arg("ckpt"), py::arg("problem"));
  m.def(
      "evaluate",
      [](const Checkpoint& ckpt, const std::vector<Problem>& pool,
         const EvalSpec& spec) { return evaluate(ckpt, pool, spec); },
      py::arg("ckpt"), py::arg("pool"), py::arg("spec") = EvalSpec{});
  m.def("save_checkpoint", &save_checkpoint, py::arg("ckpt"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  // --- series ------------------------------------------------------------
  py::enum_<SeriesKind>(m, "SeriesKind")
      .value("checkpoint", SeriesKind::checkpoint)
      .value("family", SeriesKind::family)
      .value("adaptation", SeriesKind::adaptation);

  py::class_<SeriesSpec>(m, "SeriesSpec")
      .def(py::init<>())
      .def_readwrite("kind", &SeriesSpec::kind)
      .def_readwrite("delta", &SeriesSpec::delta)
      .def_readwrite("width_list", &SeriesSpec::width_list)
      .def_readwrite("adaptation_budgets", &SeriesSpec::adaptation_budgets)
      .def_readwrite("adaptation_set_size", &SeriesSpec::adaptation_set_size)
      .def_readwrite("base_train", &SeriesSpec::base_train)
      .def_readwrite("checkpoint_interval", &SeriesSpec::checkpoint_interval);

  py::class_<ModelSeries>(m, "ModelSeries")
      .def(py::init<>())
      .def_readonly("models", &ModelSeries::models)
      .def_readonly("strengths", &ModelSeries::strengths)
      .def_readonly("kind", &ModelSeries::kind)
      .def_readonly("series_id", &ModelSeries::series_id);

  py::class_<SeriesDiagnostics>(m, "SeriesDiagnostics")
      .def_readonly("ok", &SeriesDiagnostics::ok)
      .def_readonly("violations", &SeriesDiagnostics::violations);

  m.def(
      "train_and_collect",
      [](const LearnerConfig& base, const std::vector<Problem>& train_pool,
         const std::vector<Problem>& val_pool, const SeriesSpec& spec) {
        return train_and_collect(base, train_pool, val_pool, spec);
      },
      py::arg("base"), py::arg("train_pool"), py::arg("val_pool"), py::arg("spec"));
  m.def("select_by_delta", &select_by_delta, py::arg("checkpoints"),
        py::arg("delta"), py::arg("series_id") = std::string("ckpt-series"));
  m.def(
      "build_family_series",
      [](const LearnerConfig& base, const std::vector<int>& widths,
         const std::vector<Problem>& train_pool, const std::vector<Problem>& val_pool,
         const TrainSpec& train) {
        return build_family_series(base, widths, train_pool, val_pool, train);
      },
      py::arg("base"), py::arg("width_list"), py::arg("train_pool"),
      py::arg("val_pool"), py::arg("train"));
  m.def(
      "build_adaptation_series",
      [](const Checkpoint& base, const std::vector<long>& budgets,
         const std::vector<Problem>& adaptation_pool,
         const std::vector<Problem>& val_pool, const TrainSpec& train) {
        return build_adaptation_series(base, budgets, adaptation_pool, val_pool, train);
      },
      py::arg("base"), py::arg("budgets"), py::arg("adaptation_pool"),
      py::arg("val_pool"), py::arg("train"));
  m.def("validate_series", &validate_series, py::arg("series"));

  // --- transitional ------------------------------------------------------
  py::class_<SolvabilityMatrix>(m, "SolvabilityMatrix")
      .def(py::init<>())
      .def_readonly("problem_ids", &SolvabilityMatrix::problem_ids)
      .def_readonly("series_id", &SolvabilityMatrix::series_id)
      .def_readonly("num_models", &SolvabilityMatrix::num_models)
      .def("row", [](const SolvabilityMatrix& matrix, std::size_t r) {
        const auto row = matrix.row(r);
        return std::vector<int>(row.begin(), row.end());
      });

  py::enum_<TransitionClass>(m, "TransitionClass")
      .value("transitional", TransitionClass::transitional)
      .value("always_solved", TransitionClass::always_solved)
      .value("never_solved", TransitionClass::never_solved)
      .value("inconsistent", TransitionClass::inconsistent);

  py::class_<RowClassification>(m, "RowClassification")
      .def_readonly("cls", &RowClassification::cls)
      .def_readonly("tau", &RowClassification::tau);

  py::class_<ExcludedCounts>(m, "ExcludedCounts")
      .def_readonly("always", &ExcludedCounts::always)
      .def_readonly("never", &ExcludedCounts::never)
      .def_readonly("inconsistent", &ExcludedCounts::inconsistent);

  py::class_<TransitionalSets>(m, "TransitionalSets")
      .def(py::init<>())
      .def_readwrite("by_level", &TransitionalSets::by_level)
      .def_readonly("excluded", &TransitionalSets::excluded)
      .def_readwrite("series_id", &TransitionalSets::series_id)
      .def_readwrite("pool_tag", &TransitionalSets::pool_tag)
      .def_readwrite("num_levels", &TransitionalSets::num_levels)
      .def("transitional_count", &TransitionalSets::transitional_count);

  py::class_<MatrixEvalMode>(m, "MatrixEvalMode")
      .def(py::init<>())
      .def_readwrite("stochastic", &MatrixEvalMode::stochastic)
      .def_readwrite("eval", &MatrixEvalMode::eval);

  m.def(
      "build_matrix",
      [](const ModelSeries& series, const std::vector<Problem>& pool,
         const MatrixEvalMode& mode) { return build_matrix(series, pool, mode); },
      py::arg("series"), py::arg("pool"), py::arg("mode") = MatrixEvalMode{});
  m.def(
      "build_matrix_irt",
      [](const std::vector<IrtLearner>& learners, const std::vector<double>& difficulties,
         const std::vector<std::string>& ids, const std::string& series_id) {
        return build_matrix_irt(learners, difficulties, ids, series_id);
      },
      py::arg("learners"), py::arg("difficulties"), py::arg("problem_ids"),
      py::arg("series_id") = std::string("irt-series"));
  m.def(
      "classify_row",
      [](const std::vector<int>& row) {
        std::vector<std::uint8_t> bits(row.begin(), row.end());
        return classify_row(bits);
      },
      py::arg("row"));
  m.def("extract", &extract, py::arg("matrix"), py::arg("pool_tag") = std::string());

  // --- curriculum --------------------------------------------------------
  m.def("parse_order_kind", &parse_order_kind, py::arg("name"));
  py::class_<OrderKind>(m, "OrderKind")
      .def(py::init<>())
      .def("__str__", [](const OrderKind& kind) { return to_string(kind); });

  py::class_<Stage>(m, "Stage")
      .def_readonly("stage_index", &Stage::stage_index)
      .def_readonly("problem_ids", &Stage::problem_ids)
      .def_readonly("steps", &Stage::steps)
      .def_readonly("source", &Stage::source);

  py::class_<CurriculumSchedule>(m, "CurriculumSchedule")
      .def_readonly("stages", &CurriculumSchedule::stages)
      .def_readonly("total_steps", &CurriculumSchedule::total_steps)
      .def_readonly("batch_size", &CurriculumSchedule::batch_size)
      .def_readonly("shuffle_seed", &CurriculumSchedule::shuffle_seed)
      .def_property_readonly("order_kind", [](const CurriculumSchedule& schedule) {
        return to_string(schedule.order_kind);
      });

  m.def(
      "build_transitional_schedule",
      [](const TransitionalSets& sets, const std::string& order, int num_stages,
         long total_steps, int batch_size, std::uint64_t seed) {
        return build_transitional_schedule(sets, parse_order_kind(order), num_stages,
                                           total_steps, batch_size, seed);
      },
      py::arg("sets"), py::arg("order_kind"), py::arg("num_stages"),
      py::arg("total_steps"), py::arg("batch_size"), py::arg("seed"));
  m.def(
      "build_iid_schedule",
      [](const std::vector<Problem>& pool, long total_steps, int batch_size,
         std::uint64_t seed) {
        return build_iid_schedule(pool, total_steps, batch_size, seed);
      },
      py::arg("pool"), py::arg("total_steps"), py::arg("batch_size"), py::arg("seed"));
  m.def(
      "build_external_schedule",
      [](const std::vector<Problem>& pool, const std::string& feature,
         const std::string& direction, int num_stages, long total_steps,
         int batch_size, std::uint64_t seed) {
        return build_external_schedule(
            pool, parse_difficulty_feature(feature),
            direction == "descending" ? Direction::descending : Direction::ascending,
            num_stages, total_steps, batch_size, seed);
      },
      py::arg("pool"), py::arg("feature"), py::arg("direction"), py::arg("num_stages"),
      py::arg("total_steps"), py::arg("batch_size"), py::arg("seed"));
  m.def("schedule_batches", &schedule_batches, py::arg("schedule"));

  // --- transfer ----------------------------------------------------------
  py::class_<MatchThresholds>(m, "MatchThresholds")
      .def(py::init<>())
      .def_readwrite("mean_min", &MatchThresholds::mean_min)
      .def_readwrite("max_min", &MatchThresholds::max_min);

  py::class_<MatchStats>(m, "MatchStats")
      .def_readonly("level", &MatchStats::level)
      .def_readonly("mean_sim", &MatchStats::mean_sim)
      .def_readonly("max_sim", &MatchStats::max_sim)
      .def_readonly("matched", &MatchStats::matched);

  py::class_<MatchReport>(m, "MatchReport")
      .def_readonly("neo_by_level", &MatchReport::neo_by_level)
      .def_readonly("stats", &MatchReport::stats)
      .def_readonly("unmatched", &MatchReport::unmatched)
      .def_readonly("warnings", &MatchReport::warnings);

  m.def(
      "cosine",
      [](const std::vector<double>& u, const std::vector<double>& v) {
        return cosine(u, v);
      },
      py::arg("u"), py::arg("v"));
  m.def(
      "match_neo_transitional",
      [](const TransitionalSets& sets, const std::vector<Problem>& reference_pool,
         const std::vector<Problem>& target_pool, const MatchThresholds& thresholds,
         const std::string& mode) {
        return match_neo_transitional(sets, reference_pool, target_pool, thresholds,
                                      parse_embed_mode(mode));
      },
      py::arg("reference_sets"), py::arg("reference_pool"), py::arg("target_pool"),
      py::arg("thresholds") = MatchThresholds{}, py::arg("mode") = std::string("feature"));
  m.def("to_transitional_sets", &to_transitional_sets, py::arg("report"));

  // --- harness -----------------------------------------------------------
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("train_pool", &ExperimentConfig::train_pool)
      .def_readwrite("val_pool", &ExperimentConfig::val_pool)
      .def_readwrite("test_pool", &ExperimentConfig::test_pool)
      .def_readwrite("learner", &ExperimentConfig::learner)
      .def_readwrite("curriculum_train", &ExperimentConfig::curriculum_train)
      .def_readwrite("series", &ExperimentConfig::series)
      .def_readwrite("num_stages", &ExperimentConfig::num_stages)
      .def_readwrite("num_seeds", &ExperimentConfig::num_seeds)
      .def_readwrite("eval", &ExperimentConfig::eval)
      .def_readwrite("atomic_budget_steps", &ExperimentConfig::atomic_budget_steps)
      .def_readwrite("atomic_num_seeds", &ExperimentConfig::atomic_num_seeds)
      .def_readwrite("master_seed", &ExperimentConfig::master_seed)
      .def_readwrite("jobs", &ExperimentConfig::jobs);

  py::class_<AggregateEntry>(m, "AggregateEntry")
      .def_readonly("kind", &AggregateEntry::kind)
      .def_readonly("runs", &AggregateEntry::runs)
      .def_readonly("mean_final", &AggregateEntry::mean_final)
      .def_readonly("std_final", &AggregateEntry::std_final)
      .def_readonly("se_final", &AggregateEntry::se_final)
      .def_readonly("rel_improvement_over_iid", &AggregateEntry::rel_improvement_over_iid);

  py::class_<RunMetrics>(m, "RunMetrics")
      .def_readonly("schedule_kind", &RunMetrics::schedule_kind)
      .def_readonly("seed_index", &RunMetrics::seed_index)
      .def_readonly("trajectory", &RunMetrics::trajectory)
      .def_readonly("final_accuracy", &RunMetrics::final_accuracy);

  py::class_<AggregateReport>(m, "AggregateReport")
      .def_readonly("per_schedule", &AggregateReport::per_schedule)
      .def_readonly("runs", &AggregateReport::runs)
      .def_readonly("baseline_accuracy", &AggregateReport::baseline_accuracy)
      .def_readonly("series_strengths", &AggregateReport::series_strengths);

  m.def("default_experiment_config", &default_experiment_config);
  m.def("run_curriculum_comparison", &run_curriculum_comparison, py::arg("config"),
        py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());
}
