#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "consult/errors.hpp"
#include "consult/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartialFailure = 1;
constexpr int kExitConfigError = 2;

int cmd_run(const consult::RunConfig& config) {
  const consult::BenchmarkSummary summary = consult::run_benchmark(config);
  std::cout << "cases: " << summary.total << ", succeeded: " << summary.succeeded
            << ", failed: " << summary.failed_cases.size() << "\n";
  for (const auto& id : summary.failed_cases) std::cout << "  failed: " << id << "\n";
  std::cout << "backend requests: " << summary.usage.requests
            << ", prompt tokens: " << summary.usage.prompt_tokens
            << ", completion tokens: " << summary.usage.completion_tokens << "\n";
  std::cout << "transcripts written to " << config.output_dir << "\n";
  return summary.failed_cases.empty() ? kExitOk : kExitPartialFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic-diagnosis consultation harness"};
  app.require_subcommand(1);

  // run
  consult::RunConfig config;
  std::string backend_name = "scripted";
  bool no_gating = false;
  auto* run = app.add_subcommand("run", "Run consultations over a corpus");
  run->add_option("--corpus", config.corpus_path, "Corpus JSONL file")->required();
  run->add_option("--taxonomy", config.taxonomy_path, "Taxonomy JSON (default: built-in)");
  run->add_option("--backend", backend_name, "Backend mode: http|scripted")
      ->check(CLI::IsMember({"http", "scripted"}));
  run->add_option("--model", config.model_name, "Model name for http mode");
  run->add_option("--base-url", config.base_url, "Override CONSULT_BASE_URL");
  run->add_option("--fixture", config.fixture_path,
                  "Scripted fixture: JSON file, or directory of {case_id}.json");
  run->add_option("--max-turns", config.max_turns, "Turn cap per consultation");
  run->add_option("--concurrency", config.concurrency, "Max consultations in flight");
  run->add_option("--seed", config.seed, "Decoding seed passed to the backend");
  run->add_option("--out", config.output_dir, "Transcript output directory")->required();
  run->add_flag("--no-gating", no_gating, "Disable sub-goal gating of progressive actions");
  run->add_option("--disrupt", config.patient.disruption_rate,
                  "Patient disruption rate in [0,1]");
  run->add_option("--patient-seed", config.patient.seed, "Patient disruption RNG seed");
  run->add_option("--prompts", config.prompts_dir, "Prompt template directory");
  run->add_option("--temperature", config.temperature, "Sampling temperature");

  // evaluate
  std::string transcripts_dir, eval_corpus, icd_path, evaluator_model = "gpt-4o",
                                                      metrics_out = "metrics.json";
  std::string eval_backend = "http", eval_fixture, eval_base_url, extraction = "rule";
  bool force_mixed = false;
  auto* evaluate = app.add_subcommand("evaluate", "Score and match transcripts");
  evaluate->add_option("--transcripts", transcripts_dir, "Transcript directory")->required();
  evaluate->add_option("--corpus", eval_corpus, "Corpus JSONL file")->required();
  evaluate->add_option("--icd", icd_path, "ICD-10 index JSON")->required();
  evaluate->add_option("--evaluator", evaluator_model, "Evaluator model name");
  evaluate->add_option("--out", metrics_out, "Metrics output file");
  evaluate->add_option("--backend", eval_backend, "Evaluator backend: http|scripted")
      ->check(CLI::IsMember({"http", "scripted"}));
  evaluate->add_option("--fixture", eval_fixture, "Scripted evaluator fixture file");
  evaluate->add_option("--base-url", eval_base_url, "Override CONSULT_BASE_URL");
  evaluate->add_option("--extraction", extraction, "Entity extraction mode: rule|model")
      ->check(CLI::IsMember({"rule", "model"}));
  evaluate->add_flag("--force", force_mixed, "Allow mixed run fingerprints");

  // stats
  std::string stats_dir, stats_metrics, stats_out;
  auto* stats_cmd = app.add_subcommand("stats", "Turn and score distributions");
  stats_cmd->add_option("--transcripts", stats_dir, "Transcript directory")->required();
  stats_cmd->add_option("--metrics", stats_metrics, "Metrics document from `evaluate`");
  stats_cmd->add_option("--out", stats_out, "Machine-readable output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) {
      config.backend_mode = backend_name == "http" ? consult::BackendMode::http
                                                   : consult::BackendMode::scripted;
      config.gating_enabled = !no_gating;
      config.patient.disruption_enabled = config.patient.disruption_rate > 0.0;
      config.validate();
      return cmd_run(config);
    }
    if (evaluate->parsed()) {
      const auto corpus = consult::load_corpus(eval_corpus);
      const auto index = consult::IcdIndex::load(icd_path);
      std::unique_ptr<consult::ChatBackend> backend;
      if (eval_backend == "scripted") {
        if (eval_fixture.empty()) {
          throw consult::ConfigError("scripted evaluator requires --fixture");
        }
        backend = std::make_unique<consult::ScriptedBackend>(consult::load_fixture(eval_fixture));
      } else {
        consult::HttpBackendConfig http;
        http.base_url = eval_base_url;
        http.model_name = evaluator_model;
        backend = std::make_unique<consult::HttpBackend>(http);
      }
      consult::EvaluateOptions options;
      options.evaluator_model = evaluator_model;
      options.extraction = extraction == "model" ? consult::ExtractionMode::model
                                                 : consult::ExtractionMode::rule;
      options.allow_mixed_fingerprints = force_mixed;
      const auto outcome =
          consult::evaluate_run(transcripts_dir, corpus, index, *backend,
                                consult::PromptTemplates::defaults(), options);
      consult::write_metrics_json(outcome, metrics_out);
      std::cout << "evaluated " << outcome.cases.size() << " cases; metrics written to "
                << metrics_out << "\n";
      for (const auto& id : outcome.missing_cases) std::cout << "  missing transcript: " << id << "\n";
      for (const auto& id : outcome.failed_cases) std::cout << "  excluded: " << id << "\n";
      return outcome.failed_cases.empty() && outcome.missing_cases.empty() ? kExitOk
                                                                           : kExitPartialFailure;
    }
    if (stats_cmd->parsed()) {
      const auto doc = consult::stats(stats_dir, stats_metrics);
      std::cout << consult::render_stats_text(doc);
      if (!stats_out.empty()) consult::write_stats_json(doc, stats_out);
      return kExitOk;
    }
  } catch (const consult::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const consult::ConsultError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartialFailure;
  }
  return kExitConfigError;
}
