#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <regex>
#include <thread>

#include "consult/errors.hpp"
#include "consult/harness.hpp"
#include "test_util.hpp"

using namespace consult;

namespace {

RunConfig scripted_config(const std::string& fixture, const std::string& out_dir) {
  RunConfig config;
  config.corpus_path = testutil::fixture_path("corpus.jsonl");
  config.backend_mode = BackendMode::scripted;
  config.fixture_path = testutil::fixture_path(fixture);
  config.output_dir = out_dir;
  return config;
}

std::string strip_timestamps(std::string text) {
  static const std::regex ts("\"timestamp\":\"[^\"]*\"");
  return std::regex_replace(text, ts, "\"timestamp\":\"\"");
}

// Counts in-flight completions to observe the concurrency ceiling.
class CountingBackend : public ChatBackend {
 public:
  explicit CountingBackend(ScriptedFixture fixture, std::atomic<int>& in_flight,
                           std::atomic<int>& peak)
      : scripted_(std::move(fixture)), in_flight_(in_flight), peak_(peak) {}

 protected:
  ChatResponse do_complete(const ChatRequest& request) override {
    const int current = in_flight_.fetch_add(1) + 1;
    int seen = peak_.load();
    while (current > seen && !peak_.compare_exchange_weak(seen, current)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    ChatResponse response;
    try {
      response = scripted_.complete(request);
    } catch (...) {
      in_flight_.fetch_sub(1);
      throw;
    }
    in_flight_.fetch_sub(1);
    return response;
  }

 private:
  ScriptedBackend scripted_;
  std::atomic<int>& in_flight_;
  std::atomic<int>& peak_;
};

}  // namespace

TEST_CASE("minimal three-action run terminates with a final diagnosis") {
  testutil::TempDir dir;
  RunConfig config = scripted_config("doctor_full.json", dir.str());
  config.gating_enabled = false;

  const auto corpus = load_corpus(config.corpus_path);
  ScriptedBackend backend(
      {{std::nullopt, "<Inquiry>: Chief Complaint. What brings you in?"},
       {std::nullopt, "<Examination>: Physical Examination. Perform a physical examination."},
       {std::nullopt, "<Diagnosis>: Final Diagnosis. Acute appendicitis."},
       {std::nullopt,
        "Symptoms: s\nMedical Examinations: m\nDiagnostic Results: d\nDiagnostic Rationales: "
        "r\nTreatment Plan: t"}});
  const Transcript t = run_consultation(corpus[0], config, default_taxonomy(), backend,
                                        PromptTemplates::defaults());
  CHECK(!t.failed);
  CHECK(t.turn_count == 3);
  CHECK(t.termination == TerminationCause::final_diagnosis);
  CHECK(t.turns.size() == 3);
  CHECK(t.report.diagnostic_results == "d");
}

TEST_CASE("gated early progression leaves a goal_unmet turn without advancing") {
  testutil::TempDir dir;
  const RunConfig config = scripted_config("doctor_eager.json", dir.str());
  const auto corpus = load_corpus(config.corpus_path);
  ScriptedBackend backend(load_fixture(config.fixture_path));
  const Transcript t = run_consultation(corpus[0], config, default_taxonomy(), backend,
                                        PromptTemplates::defaults());
  CHECK(!t.failed);
  REQUIRE(!t.turns.empty());
  CHECK(t.turns[0].goal_unmet);
  CHECK(t.turns[0].turn == 0);
  CHECK(t.turns[0].unmet_categories ==
        std::vector<std::string>{"Chief Complaint", "History of Present Illness"});
  CHECK(t.turn_count == 3);
  CHECK(t.termination == TerminationCause::final_diagnosis);
}

TEST_CASE("runs hitting the cap terminate with turn_cap") {
  testutil::TempDir dir;
  RunConfig config = scripted_config("doctor_full.json", dir.str());
  config.max_turns = 3;
  const auto corpus = load_corpus(config.corpus_path);
  ScriptedFixture fixture;
  for (int i = 0; i < 3; ++i) {
    fixture.push_back({std::nullopt, "<Inquiry>: Chief Complaint. Anything else?"});
  }
  fixture.push_back({std::nullopt,
                     "Symptoms: s\nMedical Examinations: m\nDiagnostic Results: d\n"
                     "Diagnostic Rationales: r\nTreatment Plan: t"});
  ScriptedBackend backend(fixture);
  const Transcript t = run_consultation(corpus[0], config, default_taxonomy(), backend,
                                        PromptTemplates::defaults());
  CHECK(t.turn_count == 3);
  CHECK(t.termination == TerminationCause::turn_cap);
}

TEST_CASE("transcripts round-trip through the JSONL format and replay cleanly") {
  testutil::TempDir dir;
  const RunConfig config = scripted_config("doctor_full.json", dir.str());
  const auto corpus = load_corpus(config.corpus_path);
  ScriptedBackend backend(load_fixture(config.fixture_path));
  const Transcript t = run_consultation(corpus[0], config, default_taxonomy(), backend,
                                        PromptTemplates::defaults());
  write_transcript(t, dir.str());
  const Transcript back = read_transcript(dir.file("c1.jsonl"));
  CHECK(back.case_id == t.case_id);
  CHECK(back.turn_count == t.turn_count);
  CHECK(back.fingerprint == t.fingerprint);
  CHECK(back.turns.size() == t.turns.size());
  CHECK(back.report == t.report);

  FsmOptions options;
  options.gating_enabled = config.gating_enabled;
  replay_transcript(back, default_taxonomy(), options);

  Transcript corrupted = back;
  corrupted.turns[0].transition = TransitionKind::Progressive;
  CHECK_THROWS_AS(replay_transcript(corrupted, default_taxonomy(), options), ValidationError);
}

TEST_CASE("run_benchmark completes all cases under bounded concurrency") {
  testutil::TempDir dir;
  RunConfig config = scripted_config("doctor_full.json", dir.str());
  config.concurrency = 2;
  const BenchmarkSummary summary = run_benchmark(config);
  CHECK(summary.total == 4);
  CHECK(summary.succeeded == 4);
  CHECK(summary.failed_cases.empty());
  CHECK(summary.usage.requests == 4 * 9);
  for (const char* id : {"c1", "c2", "c3", "c4"}) {
    CHECK(std::filesystem::exists(dir.file(std::string(id) + ".jsonl")));
  }
}

TEST_CASE("a missing per-case fixture fails only that case") {
  testutil::TempDir fixtures;
  testutil::TempDir out;
  const std::string full = testutil::read_file(testutil::fixture_path("doctor_full.json"));
  for (const char* id : {"c1", "c3", "c4"}) {
    testutil::write_file(fixtures.file(std::string(id) + ".json"), full);
  }
  RunConfig config = scripted_config("doctor_full.json", out.str());
  config.fixture_path = fixtures.str();
  const BenchmarkSummary summary = run_benchmark(config);
  CHECK(summary.total == 4);
  CHECK(summary.succeeded == 3);
  CHECK(summary.failed_cases == std::vector<std::string>{"c2"});
  const Transcript failed = read_transcript(out.file("c2.jsonl"));
  CHECK(failed.failed);
  CHECK(!failed.failure_reason.empty());
}

TEST_CASE("a failing case does not alter the other transcripts") {
  testutil::TempDir out_all, out_partial, fixtures;
  const std::string full = testutil::read_file(testutil::fixture_path("doctor_full.json"));
  for (const char* id : {"c1", "c2", "c3", "c4"}) {
    testutil::write_file(fixtures.file(std::string(id) + ".json"), full);
  }
  RunConfig config = scripted_config("x", out_all.str());
  config.fixture_path = fixtures.str();
  run_benchmark(config);

  testutil::write_file(fixtures.file("c2.json"), "[]");
  config.output_dir = out_partial.str();
  const BenchmarkSummary summary = run_benchmark(config);
  CHECK(summary.failed_cases == std::vector<std::string>{"c2"});
  for (const char* id : {"c1", "c3", "c4"}) {
    const std::string name = std::string(id) + ".jsonl";
    CHECK(strip_timestamps(testutil::read_file(out_all.file(name))) ==
          strip_timestamps(testutil::read_file(out_partial.file(name))));
  }
}

TEST_CASE("the concurrency ceiling is respected") {
  testutil::TempDir dir;
  RunConfig config = scripted_config("doctor_full.json", dir.str());
  config.concurrency = 2;
  std::atomic<int> in_flight{0}, peak{0};
  const ScriptedFixture fixture = load_fixture(config.fixture_path);
  const BenchmarkSummary summary =
      run_benchmark(config, [&](const CaseRecord&) {
        return std::make_shared<CountingBackend>(fixture, in_flight, peak);
      });
  CHECK(summary.succeeded == 4);
  CHECK(peak.load() <= 2);
  CHECK(peak.load() >= 1);
}

TEST_CASE("evaluate_run produces hand-checkable metrics on synthetic cases") {
  testutil::TempDir dir;
  const RunConfig config = scripted_config("doctor_full.json", dir.str());
  run_benchmark(config);

  const auto corpus = load_corpus(config.corpus_path);
  const auto index = IcdIndex::load(testutil::data_path("icd_index.json"));
  ScriptedBackend evaluator(load_fixture(testutil::fixture_path("evaluator.json")));
  EvaluateOptions options;
  options.evaluator_model = "scripted-eval";
  const EvaluationOutcome outcome = evaluate_run(dir.str(), corpus, index, evaluator,
                                                 PromptTemplates::defaults(), options);
  REQUIRE(outcome.cases.size() == 4);
  CHECK(outcome.missing_cases.empty());
  CHECK(outcome.failed_cases.empty());
  // every report predicts "Acute appendicitis" (K35); only c1's truth matches.
  // micro: inter 1, pred 4, truth 4.
  CHECK(outcome.metrics.micro_precision == doctest::Approx(0.25));
  CHECK(outcome.metrics.micro_recall == doctest::Approx(0.25));
  CHECK(outcome.metrics.micro_f1 == doctest::Approx(0.25));
  // aspect means from the evaluator fixture
  CHECK(outcome.score_aggregate.aspects[0].mean == doctest::Approx((76 + 80 + 60 + 70) / 4.0));
  CHECK(outcome.evaluator_model == "scripted-eval");

  const std::string metrics_path = dir.file("metrics.json");
  write_metrics_json(outcome, metrics_path);
  CHECK(std::filesystem::exists(metrics_path));

  const StatsDocument doc = stats(dir.str(), metrics_path);
  CHECK(doc.turns.total == 4);
  CHECK(doc.turns.mode == 8);
  CHECK(doc.has_scores);
  CHECK(!render_stats_text(doc).empty());
}

TEST_CASE("evaluate_run reports missing transcripts and keeps going") {
  testutil::TempDir dir;
  const RunConfig config = scripted_config("doctor_full.json", dir.str());
  run_benchmark(config);
  std::filesystem::remove(dir.file("c3.jsonl"));

  const auto corpus = load_corpus(config.corpus_path);
  const auto index = IcdIndex::load(testutil::data_path("icd_index.json"));
  ScriptedFixture fixture = load_fixture(testutil::fixture_path("evaluator.json"));
  fixture.pop_back();
  ScriptedBackend evaluator(fixture);
  const EvaluationOutcome outcome = evaluate_run(dir.str(), corpus, index, evaluator,
                                                 PromptTemplates::defaults());
  CHECK(outcome.missing_cases == std::vector<std::string>{"c3"});
  CHECK(outcome.cases.size() == 3);
}

TEST_CASE("evaluate_run refuses mixed fingerprints unless forced") {
  testutil::TempDir dir;
  RunConfig config = scripted_config("doctor_full.json", dir.str());
  run_benchmark(config);
  config.max_turns = 15;  // different fingerprint
  run_benchmark(config);  // rewrites all transcripts under the new fingerprint
  // graft one stale transcript back
  RunConfig original = scripted_config("doctor_full.json", dir.str());
  const auto corpus = load_corpus(original.corpus_path);
  ScriptedBackend backend(load_fixture(original.fixture_path));
  write_transcript(run_consultation(corpus[0], original, default_taxonomy(), backend,
                                    PromptTemplates::defaults()),
                   dir.str());

  const auto index = IcdIndex::load(testutil::data_path("icd_index.json"));
  ScriptedBackend evaluator(load_fixture(testutil::fixture_path("evaluator.json")));
  CHECK_THROWS_AS(evaluate_run(dir.str(), corpus, index, evaluator,
                               PromptTemplates::defaults()),
                  ConfigError);
  EvaluateOptions forced;
  forced.allow_mixed_fingerprints = true;
  ScriptedBackend evaluator2(load_fixture(testutil::fixture_path("evaluator.json")));
  CHECK_NOTHROW(evaluate_run(dir.str(), corpus, index, evaluator2,
                             PromptTemplates::defaults(), forced));
}

TEST_CASE("config fingerprint moves with the settings") {
  RunConfig a = scripted_config("doctor_full.json", "out");
  RunConfig b = a;
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  b.max_turns = 15;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  b = a;
  b.gating_enabled = false;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
}

TEST_CASE("terminal_reward") {
  const TerminalReward full = terminal_reward(FiveScores{100, 100, 100, 100, 100}, 1.0);
  CHECK(full.value == doctest::Approx(1.0));
  CHECK(terminal_reward(FiveScores{}, 0.0).value == 0.0);

  RewardWeights no_f1;
  no_f1.f1_weight = 0.0;
  const auto a = terminal_reward(FiveScores{50, 50, 50, 50, 50}, 0.2, no_f1);
  const auto b = terminal_reward(FiveScores{50, 50, 50, 50, 50}, 0.9, no_f1);
  CHECK(a.value == doctest::Approx(b.value));

  RewardWeights negative;
  negative.f1_weight = -1.0;
  CHECK_THROWS_AS(terminal_reward(FiveScores{}, 0.0, negative), ConfigError);
}

TEST_CASE("RunConfig validation errors") {
  RunConfig config;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = scripted_config("doctor_full.json", "out");
  config.max_turns = 2;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.max_turns = 20;
  config.concurrency = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.concurrency = 1;
  config.patient.disruption_rate = 1.5;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}
