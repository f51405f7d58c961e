// Python bindings for the core engine: action grammar, consultation FSM,
// evaluation metrics, and the benchmark/evaluation entry points.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <variant>

#include "consult/errors.hpp"
#include "consult/harness.hpp"

namespace py = pybind11;
using namespace consult;

PYBIND11_MODULE(_consult, m) {
  m.doc() = "Consultation-game engine bindings";

  py::register_exception<ConsultError>(m, "ConsultError");

  py::enum_<Phase>(m, "Phase")
      .value("Inquiry", Phase::Inquiry)
      .value("Examination", Phase::Examination)
      .value("Diagnosis", Phase::Diagnosis);

  py::enum_<TransitionKind>(m, "TransitionKind")
      .value("Stay", TransitionKind::Stay)
      .value("Progressive", TransitionKind::Progressive)
      .value("Retrospective", TransitionKind::Retrospective);

  py::class_<Action>(m, "Action")
      .def(py::init<Phase, std::string, std::string>(), py::arg("phase"),
           py::arg("category"), py::arg("utterance"))
      .def_readwrite("phase", &Action::phase)
      .def_readwrite("category", &Action::category)
      .def_readwrite("utterance", &Action::utterance)
      .def("__eq__", [](const Action& a, const Action& b) { return a == b; })
      .def("__repr__", [](const Action& a) { return "<Action " + render_action(a) + ">"; });

  py::class_<ActionTaxonomy>(m, "ActionTaxonomy")
      .def_static("default", &default_taxonomy)
      .def_static("load", &load_taxonomy, py::arg("path"))
      .def("category_names", [](const ActionTaxonomy& t, Phase phase) {
        std::vector<std::string> names;
        for (const auto& c : t.categories_for(phase)) names.push_back(c.name);
        return names;
      });

  m.def("parse_action", &parse_action, py::arg("text"), py::arg("taxonomy"));
  m.def("render_action", &render_action, py::arg("action"));

  py::class_<GoalUnmet>(m, "GoalUnmet")
      .def_readonly("blocked_from", &GoalUnmet::blocked_from)
      .def_readonly("unmet_categories", &GoalUnmet::unmet_categories);

  py::class_<ConsultationState>(m, "ConsultationState")
      .def_readonly("phase", &ConsultationState::phase)
      .def_readonly("turn", &ConsultationState::turn)
      .def_readonly("coverage", &ConsultationState::coverage)
      .def_readonly("terminated", &ConsultationState::terminated)
      .def_readonly("max_turns", &ConsultationState::max_turns)
      .def("__eq__",
           [](const ConsultationState& a, const ConsultationState& b) { return a == b; });

  m.def("initial_state", &initial_state, py::arg("max_turns"));
  m.def("classify_transition", &classify_transition, py::arg("state"), py::arg("action"));
  m.def("is_terminal", &is_terminal, py::arg("state"));
  m.def(
      "apply_action",
      [](const ConsultationState& state, const Action& action, const ActionTaxonomy& taxonomy,
         bool gating_enabled) -> py::object {
        FsmOptions options;
        options.gating_enabled = gating_enabled;
        const ApplyResult result = apply_action(state, action, taxonomy, options);
        if (std::holds_alternative<GoalUnmet>(result)) return py::cast(std::get<GoalUnmet>(result));
        return py::cast(std::get<ConsultationState>(result));
      },
      py::arg("state"), py::arg("action"), py::arg("taxonomy"), py::arg("gating_enabled") = true,
      "Returns the next ConsultationState, or GoalUnmet when the transition is gated.");

  py::class_<FiveScores>(m, "FiveScores")
      .def(py::init<int, int, int, int, int>(), py::arg("symptoms"),
           py::arg("medical_examinations"), py::arg("diagnostic_results"),
           py::arg("diagnostic_rationales"), py::arg("treatment_plan"))
      .def_readwrite("symptoms", &FiveScores::symptoms)
      .def_readwrite("medical_examinations", &FiveScores::medical_examinations)
      .def_readwrite("diagnostic_results", &FiveScores::diagnostic_results)
      .def_readwrite("diagnostic_rationales", &FiveScores::diagnostic_rationales)
      .def_readwrite("treatment_plan", &FiveScores::treatment_plan)
      .def("as_list", [](const FiveScores& s) {
        const auto a = s.as_array();
        return std::vector<int>(a.begin(), a.end());
      });

  py::class_<AspectAggregate>(m, "AspectAggregate")
      .def_readonly("mean", &AspectAggregate::mean)
      .def_readonly("stderr", &AspectAggregate::stderr_)
      .def_readonly("ci95_low", &AspectAggregate::ci95_low)
      .def_readonly("ci95_high", &AspectAggregate::ci95_high)
      .def_readonly("n", &AspectAggregate::n);

  py::class_<ScoreAggregate>(m, "ScoreAggregate")
      .def_property_readonly("aspects", [](const ScoreAggregate& s) {
        return std::vector<AspectAggregate>(s.aspects.begin(), s.aspects.end());
      });

  m.def("aggregate_scores", &aggregate_scores, py::arg("scores"));
  m.def("f1", &f1, py::arg("precision"), py::arg("recall"));

  py::class_<MatchResult>(m, "MatchResult")
      .def(py::init([](std::string case_id, std::set<std::string> predicted,
                       std::set<std::string> truth) {
             return MatchResult{std::move(case_id), std::move(predicted), std::move(truth)};
           }),
           py::arg("case_id"), py::arg("predicted_codes"), py::arg("truth_codes"))
      .def_readwrite("case_id", &MatchResult::case_id)
      .def_readwrite("predicted_codes", &MatchResult::predicted_codes)
      .def_readwrite("truth_codes", &MatchResult::truth_codes);

  py::class_<CorpusMetrics>(m, "CorpusMetrics")
      .def_readonly("micro_precision", &CorpusMetrics::micro_precision)
      .def_readonly("micro_recall", &CorpusMetrics::micro_recall)
      .def_readonly("micro_f1", &CorpusMetrics::micro_f1)
      .def_readonly("macro_precision", &CorpusMetrics::macro_precision)
      .def_readonly("macro_recall", &CorpusMetrics::macro_recall)
      .def_readonly("macro_f1", &CorpusMetrics::macro_f1)
      .def_readonly("n", &CorpusMetrics::n);

  m.def("corpus_metrics", &corpus_metrics, py::arg("results"));
  m.def("is_icd10_code", &is_icd10_code, py::arg("code"));

  py::class_<IcdIndex>(m, "IcdIndex")
      .def_static("load", &IcdIndex::load, py::arg("path"))
      .def("code_for", &IcdIndex::code_for, py::arg("term"))
      .def("canonical_for", &IcdIndex::canonical_for, py::arg("code"))
      .def("__len__", &IcdIndex::size);

  m.def(
      "extract_entities",
      [](const std::string& text, const IcdIndex& index) {
        return extract_entities(text, index);
      },
      py::arg("diagnosis_text"), py::arg("index"));

  py::class_<CaseRecord>(m, "CaseRecord")
      .def_readonly("case_id", &CaseRecord::case_id)
      .def_readonly("profile", &CaseRecord::profile)
      .def_property_readonly("diagnosis_text",
                             [](const CaseRecord& r) { return r.ground_truth.diagnosis_text; })
      .def_property_readonly("diagnosis_entities", [](const CaseRecord& r) {
        return r.ground_truth.diagnosis_entities;
      });

  m.def("load_corpus", &load_corpus, py::arg("path"));

  py::enum_<BackendMode>(m, "BackendMode")
      .value("http", BackendMode::http)
      .value("scripted", BackendMode::scripted);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("corpus_path", &RunConfig::corpus_path)
      .def_readwrite("taxonomy_path", &RunConfig::taxonomy_path)
      .def_readwrite("backend_mode", &RunConfig::backend_mode)
      .def_readwrite("base_url", &RunConfig::base_url)
      .def_readwrite("model_name", &RunConfig::model_name)
      .def_readwrite("fixture_path", &RunConfig::fixture_path)
      .def_readwrite("temperature", &RunConfig::temperature)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("max_turns", &RunConfig::max_turns)
      .def_readwrite("concurrency", &RunConfig::concurrency)
      .def_readwrite("output_dir", &RunConfig::output_dir)
      .def_readwrite("gating_enabled", &RunConfig::gating_enabled)
      .def_readwrite("prompts_dir", &RunConfig::prompts_dir);

  m.def("config_fingerprint", &config_fingerprint, py::arg("config"));

  py::class_<BenchmarkSummary>(m, "BenchmarkSummary")
      .def_readonly("total", &BenchmarkSummary::total)
      .def_readonly("succeeded", &BenchmarkSummary::succeeded)
      .def_readonly("failed_cases", &BenchmarkSummary::failed_cases);

  m.def(
      "run_benchmark",
      [](const RunConfig& config) { return run_benchmark(config); },
      py::arg("config"), py::call_guard<py::gil_scoped_release>());
}
