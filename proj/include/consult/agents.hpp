#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "consult/backend.hpp"
#include "consult/case_model.hpp"
#include "consult/fsm.hpp"
#include "consult/taxonomy.hpp"

namespace consult {

enum class ObservationKind { subjective, objective };

std::string to_string(ObservationKind k);

struct Observation {
  ObservationKind kind = ObservationKind::objective;
  std::string text;

  bool operator==(const Observation&) const = default;
};

enum class MemorySource { patient, examiner, doctor };

std::string to_string(MemorySource s);

struct MemoryEntry {
  int turn = 0;
  Phase phase = Phase::Inquiry;
  std::string category;
  std::string question;
  std::string answer;
  MemorySource source = MemorySource::patient;
};

// Ordered question/answer store for one consultation run.
class MemoryBank {
 public:
  // Throws ValidationError when the turn does not strictly increase.
  void append(MemoryEntry entry);

  const std::vector<MemoryEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<MemoryEntry> entries_;
};

void memory_append(MemoryBank& memory, const ConsultationState& state_after,
                   const Action& action, const Observation& observation);

// Deterministic rendering, grouped by phase in phase order.
std::string memory_context(const MemoryBank& memory);

struct DiagnosticReport {
  std::string symptoms;
  std::string medical_examinations;
  std::string diagnostic_results;
  std::string diagnostic_rationales;
  std::string treatment_plan;

  bool operator==(const DiagnosticReport&) const = default;
};

inline constexpr const char* kReportSections[] = {
    "Symptoms", "Medical Examinations", "Diagnostic Results",
    "Diagnostic Rationales", "Treatment Plan"};

struct PatientPolicy {
  bool disruption_enabled = false;
  double disruption_rate = 0.0;  // in [0, 1]
  std::uint64_t seed = 0;
};

// Prompt text is configuration; these are the placeholder-bearing templates.
// Slots: {memory} {phase} {subgoal} {action_lists} {grammar} {goal_unmet}
struct PromptTemplates {
  std::string doctor;
  std::string report;
  std::string evaluator;
  std::vector<std::string> disruption_sentences;

  static PromptTemplates defaults();
  // Reads doctor.txt / report.txt / evaluator.txt / disruptions.json from a
  // directory, keeping defaults for missing files.
  static PromptTemplates load(const std::string& dir);
};

// Record-bound patient: answers are scoped to the asked category's
// self_report entry and never contain ground truth.
class PatientAgent {
 public:
  explicit PatientAgent(PatientPolicy policy,
                        std::vector<std::string> disruption_sentences = {});

  // action.phase must be Inquiry (NonInquiryAction otherwise).
  Observation respond(const CaseRecord& record, const Action& action);

 private:
  PatientPolicy policy_;
  std::vector<std::string> sentences_;
  std::mt19937_64 rng_;
  std::size_t next_sentence_ = 0;
};

// Objective result relay. action.phase must be Examination.
Observation examiner_respond(const CaseRecord& record, const Action& action);

struct DoctorOptions {
  int parse_retries = 3;
  std::string model_name;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
};

// Hierarchical action selection: prompt = memory + phase/sub-goal + action
// lists + grammar (+ any pending GoalUnmet signal), reply parsed with
// parse_action, bounded re-prompting, deterministic fallback on exhaustion.
// Never returns an invalid action.
Action doctor_select_action(const ConsultationState& state, const MemoryBank& memory,
                            const ActionTaxonomy& taxonomy, ChatBackend& backend,
                            const PromptTemplates& templates,
                            const std::optional<GoalUnmet>& pending_goal_unmet,
                            const DoctorOptions& options = {});

// First mandatory-unvisited category of the current phase (hint as the
// utterance); else first category of the next phase.
Action fallback_action(const ConsultationState& state, const ActionTaxonomy& taxonomy);

struct ComposedReport {
  DiagnosticReport report;
  std::vector<std::string> missing_sections;  // flagged in the transcript
};

// Five fixed headings, parsed case-insensitively, bounded retries, missing
// sections left empty and flagged.
ComposedReport compose_final_report(const MemoryBank& memory, ChatBackend& backend,
                                    const PromptTemplates& templates,
                                    const DoctorOptions& options = {});

}  // namespace consult
