#include "consult/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "consult/errors.hpp"
#include "json.hpp"

namespace consult {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(BackendMode m) {
  return m == BackendMode::http ? "http" : "scripted";
}

std::string to_string(TerminationCause c) {
  return c == TerminationCause::final_diagnosis ? "final_diagnosis" : "turn_cap";
}

void RunConfig::validate() const {
  if (corpus_path.empty()) throw ConfigError("corpus path is required");
  if (output_dir.empty()) throw ConfigError("output directory is required");
  if (max_turns < 3) throw ConfigError("max_turns must be >= 3");
  if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
  if (patient.disruption_rate < 0.0 || patient.disruption_rate > 1.0) {
    throw ConfigError("disruption rate must be in [0,1]");
  }
  if (backend_mode == BackendMode::scripted && fixture_path.empty()) {
    throw ConfigError("scripted backend requires a fixture path");
  }
}

std::string config_fingerprint(const RunConfig& config) {
  std::ostringstream canon;
  canon << config.corpus_path << "|" << config.taxonomy_path << "|"
        << to_string(config.backend_mode) << "|" << config.base_url << "|"
        << config.model_name << "|" << config.fixture_path << "|" << config.temperature << "|"
        << config.seed << "|" << config.max_turns << "|" << config.patient.disruption_enabled
        << "|" << config.patient.disruption_rate << "|" << config.patient.seed << "|"
        << config.gating_enabled << "|" << config.prompts_dir;
  // FNV-1a 64
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : canon.str()) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

namespace {

json turn_to_json(const TranscriptTurn& t) {
  return json{{"type", "turn"},
              {"turn", t.turn},
              {"action", t.action_text},
              {"transition", to_string(t.transition)},
              {"observation",
               {{"kind", to_string(t.observation.kind)}, {"text", t.observation.text}}},
              {"goal_unmet", t.goal_unmet},
              {"unmet", t.unmet_categories}};
}

TransitionKind transition_from_string(const std::string& s) {
  if (s == "stay") return TransitionKind::Stay;
  if (s == "progressive") return TransitionKind::Progressive;
  if (s == "retrospective") return TransitionKind::Retrospective;
  throw ValidationError("unknown transition kind: " + s);
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%FT%TZ");
  return out.str();
}

}  // namespace

void write_transcript(const Transcript& transcript, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path path = fs::path(dir) / (transcript.case_id + ".jsonl");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write transcript: " + path.string());
  for (const auto& turn : transcript.turns) {
    out << turn_to_json(turn).dump() << "\n";
  }
  json summary{{"type", "summary"},
               {"case_id", transcript.case_id},
               {"fingerprint", transcript.fingerprint},
               {"termination", to_string(transcript.termination)},
               {"turn_count", transcript.turn_count},
               {"max_turns", transcript.max_turns},
               {"gating_enabled", transcript.gating_enabled},
               {"report",
                {{"symptoms", transcript.report.symptoms},
                 {"medical_examinations", transcript.report.medical_examinations},
                 {"diagnostic_results", transcript.report.diagnostic_results},
                 {"diagnostic_rationales", transcript.report.diagnostic_rationales},
                 {"treatment_plan", transcript.report.treatment_plan}}},
               {"report_missing_sections", transcript.report_missing_sections},
               {"failed", transcript.failed},
               {"failure_reason", transcript.failure_reason},
               {"timestamp", now_iso8601()}};
  if (transcript.terminal_reward_value) {
    summary["terminal_reward"] = *transcript.terminal_reward_value;
  } else {
    summary["terminal_reward"] = nullptr;
  }
  out << summary.dump() << "\n";
}

Transcript read_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("transcript not found: " + path);
  Transcript t;
  std::string line;
  bool have_summary = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FileError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "turn") {
      TranscriptTurn turn;
      turn.turn = j.at("turn").get<int>();
      turn.action_text = j.at("action").get<std::string>();
      turn.transition = transition_from_string(j.at("transition").get<std::string>());
      turn.observation.kind = j.at("observation").at("kind").get<std::string>() == "subjective"
                                  ? ObservationKind::subjective
                                  : ObservationKind::objective;
      turn.observation.text = j.at("observation").at("text").get<std::string>();
      turn.goal_unmet = j.value("goal_unmet", false);
      turn.unmet_categories = j.value("unmet", std::vector<std::string>{});
      t.turns.push_back(std::move(turn));
    } else if (type == "summary") {
      have_summary = true;
      t.case_id = j.at("case_id").get<std::string>();
      t.fingerprint = j.value("fingerprint", "");
      t.termination = j.at("termination").get<std::string>() == "final_diagnosis"
                          ? TerminationCause::final_diagnosis
                          : TerminationCause::turn_cap;
      t.turn_count = j.at("turn_count").get<int>();
      t.max_turns = j.value("max_turns", 20);
      t.gating_enabled = j.value("gating_enabled", true);
      const auto& r = j.at("report");
      t.report.symptoms = r.value("symptoms", "");
      t.report.medical_examinations = r.value("medical_examinations", "");
      t.report.diagnostic_results = r.value("diagnostic_results", "");
      t.report.diagnostic_rationales = r.value("diagnostic_rationales", "");
      t.report.treatment_plan = r.value("treatment_plan", "");
      t.report_missing_sections = j.value("report_missing_sections", std::vector<std::string>{});
      t.failed = j.value("failed", false);
      t.failure_reason = j.value("failure_reason", "");
      if (j.contains("terminal_reward") && !j["terminal_reward"].is_null()) {
        t.terminal_reward_value = j["terminal_reward"].get<double>();
      }
    } else {
      throw FileError(path + ":" + std::to_string(line_no) + ": unknown record type");
    }
  }
  if (!have_summary) throw FileError(path + ": missing summary line");
  return t;
}

std::vector<Transcript> read_transcript_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw FileError("transcript directory not found: " + dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<Transcript> out;
  for (const auto& p : paths) out.push_back(read_transcript(p.string()));
  return out;
}

void replay_transcript(const Transcript& transcript, const ActionTaxonomy& taxonomy,
                       const FsmOptions& options) {
  ConsultationState state = initial_state(transcript.max_turns);
  for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
    const TranscriptTurn& turn = transcript.turns[i];
    const Action action = parse_action(turn.action_text, taxonomy);
    const TransitionKind kind = classify_transition(state, action);
    if (kind != turn.transition) {
      throw ValidationError(transcript.case_id + ": turn " + std::to_string(i + 1) +
                            " replays as " + to_string(kind) + ", recorded " +
                            to_string(turn.transition));
    }
    const ApplyResult result = apply_action(state, action, taxonomy, options);
    if (std::holds_alternative<GoalUnmet>(result)) {
      if (!turn.goal_unmet) {
        throw ValidationError(transcript.case_id + ": turn " + std::to_string(i + 1) +
                              " replays as goal_unmet but was recorded as applied");
      }
      continue;
    }
    if (turn.goal_unmet) {
      throw ValidationError(transcript.case_id + ": turn " + std::to_string(i + 1) +
                            " was recorded goal_unmet but replays as applied");
    }
    state = std::get<ConsultationState>(result);
    if (state.turn != turn.turn) {
      throw ValidationError(transcript.case_id + ": turn index diverged at " +
                            std::to_string(i + 1));
    }
  }
  if (state.turn != transcript.turn_count) {
    throw ValidationError(transcript.case_id + ": final turn count diverged");
  }
  const TerminationCause cause =
      state.terminated ? TerminationCause::final_diagnosis : TerminationCause::turn_cap;
  if (cause != transcript.termination) {
    throw ValidationError(transcript.case_id + ": termination cause diverged");
  }
}

Transcript run_consultation(const CaseRecord& record, const RunConfig& config,
                            const ActionTaxonomy& taxonomy, ChatBackend& backend,
                            const PromptTemplates& templates) {
  Transcript transcript;
  transcript.case_id = record.case_id;
  transcript.fingerprint = config_fingerprint(config);
  transcript.max_turns = config.max_turns;
  transcript.gating_enabled = config.gating_enabled;

  FsmOptions fsm_options;
  fsm_options.gating_enabled = config.gating_enabled;

  DoctorOptions doctor_options;
  doctor_options.model_name = config.model_name;
  doctor_options.temperature = config.temperature;
  doctor_options.seed = config.seed;

  ConsultationState state = initial_state(config.max_turns);
  MemoryBank memory;
  PatientAgent patient(config.patient, templates.disruption_sentences);
  std::optional<GoalUnmet> pending;

  try {
    // rejected turns do not advance the FSM; bound total doctor invocations
    const int iteration_cap = config.max_turns * 4;
    int iterations = 0;
    while (!is_terminal(state)) {
      if (++iterations > iteration_cap) {
        throw BackendFailure("doctor made no progress within " +
                             std::to_string(iteration_cap) + " selections");
      }
      const Action action = doctor_select_action(state, memory, taxonomy, backend, templates,
                                                 pending, doctor_options);
      const TransitionKind kind = classify_transition(state, action);
      const ApplyResult result = apply_action(state, action, taxonomy, fsm_options);

      TranscriptTurn turn;
      turn.action_text = render_action(action);
      turn.transition = kind;
      if (const auto* unmet = std::get_if<GoalUnmet>(&result)) {
        turn.turn = state.turn;
        turn.goal_unmet = true;
        turn.unmet_categories = unmet->unmet_categories;
        turn.observation = Observation{
            ObservationKind::objective,
            "Progression blocked: mandatory categories of the current phase are uncovered."};
        transcript.turns.push_back(std::move(turn));
        pending = *unmet;
        continue;
      }
      pending.reset();

      const ConsultationState next = std::get<ConsultationState>(result);
      Observation observation;
      switch (action.phase) {
        case Phase::Inquiry: observation = patient.respond(record, action); break;
        case Phase::Examination: observation = examiner_respond(record, action); break;
        case Phase::Diagnosis:
          // self-directed: the doctor reflects on its own statement
          observation = Observation{ObservationKind::objective, action.utterance};
          break;
      }
      memory_append(memory, next, action, observation);
      turn.turn = next.turn;
      turn.observation = observation;
      transcript.turns.push_back(std::move(turn));
      state = next;
    }

    transcript.turn_count = state.turn;
    transcript.termination =
        state.terminated ? TerminationCause::final_diagnosis : TerminationCause::turn_cap;
    const ComposedReport composed = compose_final_report(memory, backend, templates,
                                                         doctor_options);
    transcript.report = composed.report;
    transcript.report_missing_sections = composed.missing_sections;
  } catch (const BackendFailure& e) {
    transcript.failed = true;
    transcript.failure_reason = e.what();
    transcript.turn_count = state.turn;
    transcript.termination =
        state.terminated ? TerminationCause::final_diagnosis : TerminationCause::turn_cap;
  }
  return transcript;
}

namespace {

BackendFactory make_default_factory(const RunConfig& config) {
  if (config.backend_mode == BackendMode::http) {
    HttpBackendConfig http;
    http.base_url = config.base_url;
    http.model_name = config.model_name;
    auto shared = std::make_shared<HttpBackend>(http);
    return [shared](const CaseRecord&) { return shared; };
  }
  const std::string fixture_path = config.fixture_path;
  if (fs::is_directory(fixture_path)) {
    return [fixture_path](const CaseRecord& record) -> std::shared_ptr<ChatBackend> {
      return std::make_shared<ScriptedBackend>(
          load_fixture((fs::path(fixture_path) / (record.case_id + ".json")).string()));
    };
  }
  const ScriptedFixture fixture = load_fixture(fixture_path);
  return [fixture](const CaseRecord&) { return std::make_shared<ScriptedBackend>(fixture); };
}

}  // namespace

BenchmarkSummary run_benchmark(const RunConfig& config) {
  return run_benchmark(config, make_default_factory(config));
}

BenchmarkSummary run_benchmark(const RunConfig& config, const BackendFactory& factory) {
  config.validate();
  const std::vector<CaseRecord> corpus = load_corpus(config.corpus_path);
  const ActionTaxonomy taxonomy =
      config.taxonomy_path.empty() ? default_taxonomy() : load_taxonomy(config.taxonomy_path);
  const PromptTemplates templates = config.prompts_dir.empty()
                                        ? PromptTemplates::defaults()
                                        : PromptTemplates::load(config.prompts_dir);
  fs::create_directories(config.output_dir);

  BenchmarkSummary summary;
  summary.total = static_cast<int>(corpus.size());

  std::mutex mutex;
  std::vector<std::shared_ptr<ChatBackend>> backends_seen;
  std::atomic<std::size_t> next_case{0};

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next_case.fetch_add(1);
      if (i >= corpus.size()) return;
      const CaseRecord& record = corpus[i];
      std::shared_ptr<ChatBackend> backend;
      Transcript transcript;
      try {
        backend = factory(record);
        transcript = run_consultation(record, config, taxonomy, *backend, templates);
      } catch (const ConsultError& e) {
        transcript.case_id = record.case_id;
        transcript.fingerprint = config_fingerprint(config);
        transcript.max_turns = config.max_turns;
        transcript.gating_enabled = config.gating_enabled;
        transcript.failed = true;
        transcript.failure_reason = e.what();
      }
      write_transcript(transcript, config.output_dir);
      std::lock_guard lock(mutex);
      if (backend &&
          std::find(backends_seen.begin(), backends_seen.end(), backend) == backends_seen.end()) {
        backends_seen.push_back(backend);
      }
      if (transcript.failed) {
        summary.failed_cases.push_back(record.case_id);
      } else {
        summary.succeeded += 1;
      }
    }
  };

  const int threads_n = std::min<int>(config.concurrency, static_cast<int>(corpus.size()));
  std::vector<std::thread> threads;
  for (int i = 0; i < std::max(1, threads_n); ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::sort(summary.failed_cases.begin(), summary.failed_cases.end());
  for (const auto& backend : backends_seen) {
    const UsageTotals u = backend->usage_totals();
    summary.usage.requests += u.requests;
    summary.usage.prompt_tokens += u.prompt_tokens;
    summary.usage.completion_tokens += u.completion_tokens;
  }
  return summary;
}

EvaluationOutcome evaluate_run(const std::string& transcript_dir,
                               const std::vector<CaseRecord>& corpus, const IcdIndex& index,
                               ChatBackend& evaluator, const PromptTemplates& templates,
                               const EvaluateOptions& options) {
  EvaluationOutcome outcome;
  outcome.evaluator_model = options.evaluator_model;

  const std::vector<Transcript> transcripts = read_transcript_dir(transcript_dir);
  if (!options.allow_mixed_fingerprints) {
    for (const auto& t : transcripts) {
      if (t.fingerprint != transcripts.front().fingerprint) {
        throw ConfigError("transcript directory mixes run fingerprints (" +
                          transcripts.front().fingerprint + " vs " + t.fingerprint +
                          "); pass --force to evaluate anyway");
      }
    }
  }
  std::map<std::string, const Transcript*> by_id;
  for (const auto& t : transcripts) by_id[t.case_id] = &t;

  DoctorOptions evaluator_options;
  evaluator_options.model_name = options.evaluator_model;

  std::vector<FiveScores> all_scores;
  std::vector<MatchResult> matches;
  for (const auto& record : corpus) {
    const auto it = by_id.find(record.case_id);
    if (it == by_id.end()) {
      outcome.missing_cases.push_back(record.case_id);
      continue;
    }
    const Transcript& transcript = *it->second;
    if (transcript.failed) {
      outcome.failed_cases.push_back(record.case_id);
      continue;
    }

    CaseEvaluation ce;
    ce.case_id = record.case_id;
    try {
      ce.scores = score_report(transcript.report, record, evaluator, templates,
                               evaluator_options);
    } catch (const ConsultError&) {
      outcome.failed_cases.push_back(record.case_id);
      continue;
    }

    const NormalizeResult truth =
        normalize_to_icd(record.ground_truth.diagnosis_entities, index);
    const std::vector<std::string> predicted_entities =
        extract_entities(transcript.report.diagnostic_results, index, options.extraction,
                         &evaluator, options.evaluator_model);
    const NormalizeResult predicted = normalize_to_icd(predicted_entities, index);
    for (const auto& u : truth.unmatched) outcome.unmatched_entities.push_back(u);
    for (const auto& u : predicted.unmatched) outcome.unmatched_entities.push_back(u);

    all_scores.push_back(ce.scores);
    if (!truth.codes.empty()) {
      ce.match = MatchResult{record.case_id, predicted.codes, truth.codes};
      ce.overlap = set_overlap_metrics(predicted.codes, truth.codes);
      matches.push_back(ce.match);
    }
    outcome.cases.push_back(std::move(ce));
  }

  if (!all_scores.empty()) outcome.score_aggregate = aggregate_scores(all_scores);
  if (!matches.empty()) outcome.metrics = corpus_metrics(matches);
  return outcome;
}

void write_metrics_json(const EvaluationOutcome& outcome, const std::string& path) {
  json aspects = json::object();
  for (int i = 0; i < 5; ++i) {
    const AspectAggregate& a = outcome.score_aggregate.aspects[i];
    aspects[kReportSections[i]] = {{"mean", a.mean},
                                   {"stderr", a.stderr_},
                                   {"ci95_low", a.ci95_low},
                                   {"ci95_high", a.ci95_high},
                                   {"n", a.n}};
  }
  json cases = json::array();
  for (const auto& ce : outcome.cases) {
    cases.push_back({{"case_id", ce.case_id},
                     {"scores",
                      {{"Symptoms", ce.scores.symptoms},
                       {"Medical Examinations", ce.scores.medical_examinations},
                       {"Diagnostic Results", ce.scores.diagnostic_results},
                       {"Diagnostic Rationales", ce.scores.diagnostic_rationales},
                       {"Treatment Plan", ce.scores.treatment_plan}}},
                     {"predicted_codes", ce.match.predicted_codes},
                     {"truth_codes", ce.match.truth_codes},
                     {"precision", ce.overlap.precision},
                     {"recall", ce.overlap.recall}});
  }
  const json doc{{"score_aggregates", aspects},
                 {"match",
                  {{"micro",
                    {{"precision", outcome.metrics.micro_precision},
                     {"recall", outcome.metrics.micro_recall},
                     {"f1", outcome.metrics.micro_f1}}},
                   {"macro",
                    {{"precision", outcome.metrics.macro_precision},
                     {"recall", outcome.metrics.macro_recall},
                     {"f1", outcome.metrics.macro_f1}}},
                   {"n", outcome.metrics.n}}},
                 {"cases", cases},
                 {"unmatched_entities", outcome.unmatched_entities},
                 {"missing_cases", outcome.missing_cases},
                 {"failed_cases", outcome.failed_cases},
                 {"evaluator",
                  {{"model", outcome.evaluator_model},
                   {"dispersion", "stderr (sample sd / sqrt(n)); ci95 = mean +/- 1.96*stderr"}}}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write metrics file: " + path);
  out << doc.dump(2) << "\n";
}

StatsDocument stats(const std::string& transcript_dir, const std::string& metrics_path) {
  const std::vector<Transcript> transcripts = read_transcript_dir(transcript_dir);
  if (transcripts.empty()) throw FileError("no transcripts in " + transcript_dir);

  StatsDocument doc;
  std::vector<int> turns;
  for (const auto& t : transcripts) {
    if (!t.failed) turns.push_back(t.turn_count);
  }
  doc.turns = turn_histogram(turns);

  if (!metrics_path.empty()) {
    std::ifstream in(metrics_path);
    if (!in) throw FileError("metrics file not found: " + metrics_path);
    json metrics;
    try {
      metrics = json::parse(in);
    } catch (const json::exception& e) {
      throw FileError("malformed metrics file " + metrics_path + ": " + e.what());
    }
    for (const auto& ce : metrics.value("cases", json::array())) {
      for (const auto& [aspect, value] : ce.at("scores").items()) {
        const int score = value.get<int>();
        const int bucket = std::min(score / 10, 9) * 10;
        doc.score_histograms[aspect][bucket] += 1;
      }
    }
    doc.has_scores = true;
  }
  return doc;
}

namespace {

void render_histogram(std::ostream& out, const std::map<int, int>& freq,
                      const std::string& label) {
  out << label << "\n";
  int max_freq = 1;
  for (const auto& [_, f] : freq) max_freq = std::max(max_freq, f);
  for (const auto& [bucket, f] : freq) {
    out << "  " << std::setw(4) << bucket << " | " << std::string(f * 40 / max_freq, '#')
        << " " << f << "\n";
  }
}

}  // namespace

std::string render_stats_text(const StatsDocument& doc) {
  std::ostringstream out;
  render_histogram(out, doc.turns.frequencies, "Interaction turns (per applied doctor action)");
  out << "  mode " << doc.turns.mode << ", variance " << doc.turns.variance << ", n "
      << doc.turns.total << "\n";
  if (doc.has_scores) {
    for (const auto& [aspect, freq] : doc.score_histograms) {
      render_histogram(out, freq, aspect + " (bucket width 10)");
    }
  } else {
    out << "No metrics document supplied; score histograms omitted.\n";
  }
  return out.str();
}

void write_stats_json(const StatsDocument& doc, const std::string& path) {
  json turns = json::object();
  for (const auto& [t, f] : doc.turns.frequencies) turns[std::to_string(t)] = f;
  json scores = json::object();
  for (const auto& [aspect, freq] : doc.score_histograms) {
    json buckets = json::object();
    for (const auto& [b, f] : freq) buckets[std::to_string(b)] = f;
    scores[aspect] = buckets;
  }
  const json out_doc{{"turns",
                      {{"frequencies", turns},
                       {"mode", doc.turns.mode},
                       {"variance", doc.turns.variance},
                       {"n", doc.turns.total}}},
                     {"turn_semantics", "one turn per applied doctor action"},
                     {"score_histograms", scores}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write stats file: " + path);
  out << out_doc.dump(2) << "\n";
}

TerminalReward terminal_reward(const FiveScores& scores, double f1_value,
                               const RewardWeights& weights) {
  for (double w : weights.score_weights) {
    if (w < 0.0) throw ConfigError("reward weights must be nonnegative");
  }
  if (weights.f1_weight < 0.0) throw ConfigError("reward weights must be nonnegative");
  TerminalReward reward;
  reward.weights = weights;
  const auto aspect_values = scores.as_array();
  for (int i = 0; i < 5; ++i) {
    reward.value += weights.score_weights[i] * (aspect_values[i] / 100.0);
  }
  reward.value += weights.f1_weight * f1_value;
  return reward;
}

}  // namespace consult
