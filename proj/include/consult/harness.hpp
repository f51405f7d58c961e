#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "consult/agents.hpp"
#include "consult/backend.hpp"
#include "consult/case_model.hpp"
#include "consult/evaluation.hpp"
#include "consult/fsm.hpp"
#include "consult/taxonomy.hpp"

namespace consult {

enum class BackendMode { http, scripted };

std::string to_string(BackendMode m);

struct RunConfig {
  std::string corpus_path;
  std::string taxonomy_path;       // empty = built-in default taxonomy
  BackendMode backend_mode = BackendMode::scripted;
  std::string base_url;
  std::string model_name;
  std::string fixture_path;        // file, or directory of {case_id}.json
  double temperature = 0.0;
  std::int64_t seed = 0;
  int max_turns = 20;
  PatientPolicy patient;
  int concurrency = 1;
  std::string output_dir;
  bool gating_enabled = true;
  std::string prompts_dir;         // empty = built-in templates

  void validate() const;  // throws ConfigError
};

// Stable hash of everything that shapes a run; embedded in transcripts so
// mixed-run directories are detectable at evaluation time.
std::string config_fingerprint(const RunConfig& config);

enum class TerminationCause { final_diagnosis, turn_cap };

std::string to_string(TerminationCause c);

struct TranscriptTurn {
  int turn = 0;  // FSM turn after application; unchanged for goal_unmet turns
  std::string action_text;
  TransitionKind transition = TransitionKind::Stay;
  Observation observation;
  bool goal_unmet = false;
  std::vector<std::string> unmet_categories;
};

struct Transcript {
  std::string case_id;
  std::string fingerprint;
  std::vector<TranscriptTurn> turns;
  DiagnosticReport report;
  std::vector<std::string> report_missing_sections;
  TerminationCause termination = TerminationCause::turn_cap;
  int turn_count = 0;
  int max_turns = 20;
  bool gating_enabled = true;
  std::optional<double> terminal_reward_value;
  bool failed = false;          // backend failure stub
  std::string failure_reason;
};

// {case_id}.jsonl: one turn object per line, then a summary line.
void write_transcript(const Transcript& transcript, const std::string& dir);
Transcript read_transcript(const std::string& path);
std::vector<Transcript> read_transcript_dir(const std::string& dir);

// Feeds the recorded action sequence back through apply_action and checks
// that transition kinds, goal_unmet flags, and the final state match.
// Throws ValidationError on any divergence.
void replay_transcript(const Transcript& transcript, const ActionTaxonomy& taxonomy,
                       const FsmOptions& options);

Transcript run_consultation(const CaseRecord& record, const RunConfig& config,
                            const ActionTaxonomy& taxonomy, ChatBackend& backend,
                            const PromptTemplates& templates);

struct BenchmarkSummary {
  int total = 0;
  int succeeded = 0;
  std::vector<std::string> failed_cases;
  UsageTotals usage;
};

using BackendFactory = std::function<std::shared_ptr<ChatBackend>(const CaseRecord&)>;

// Runs every case with at most config.concurrency in flight, writing each
// transcript as it completes. Per-case failures are isolated.
BenchmarkSummary run_benchmark(const RunConfig& config);
BenchmarkSummary run_benchmark(const RunConfig& config, const BackendFactory& factory);

struct CaseEvaluation {
  std::string case_id;
  FiveScores scores;
  MatchResult match;
  OverlapMetrics overlap;
};

struct EvaluationOutcome {
  ScoreAggregate score_aggregate;
  CorpusMetrics metrics;
  std::vector<CaseEvaluation> cases;
  std::vector<std::string> unmatched_entities;
  std::vector<std::string> missing_cases;    // corpus cases without transcript
  std::vector<std::string> failed_cases;     // evaluator failures, excluded
  std::string evaluator_model;
};

struct EvaluateOptions {
  std::string evaluator_model;
  ExtractionMode extraction = ExtractionMode::rule;
  bool allow_mixed_fingerprints = false;
};

EvaluationOutcome evaluate_run(const std::string& transcript_dir,
                               const std::vector<CaseRecord>& corpus,
                               const IcdIndex& index, ChatBackend& evaluator,
                               const PromptTemplates& templates,
                               const EvaluateOptions& options = {});

void write_metrics_json(const EvaluationOutcome& outcome, const std::string& path);

struct StatsDocument {
  TurnHistogram turns;
  // aspect name -> bucket(low edge, width 10) -> frequency; present only
  // when a metrics document was supplied
  std::map<std::string, std::map<int, int>> score_histograms;
  bool has_scores = false;
};

StatsDocument stats(const std::string& transcript_dir,
                    const std::string& metrics_path = "");

std::string render_stats_text(const StatsDocument& doc);
void write_stats_json(const StatsDocument& doc, const std::string& path);

struct RewardWeights {
  std::array<double, 5> score_weights{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  double f1_weight = 1.0 / 6;
};

struct TerminalReward {
  double value = 0.0;
  RewardWeights weights;
};

// value = sum(w_i * aspect_i/100) + w_f1 * f1. Weights must be nonnegative.
TerminalReward terminal_reward(const FiveScores& scores, double f1_value,
                               const RewardWeights& weights = {});

}  // namespace consult
