#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "consult/taxonomy.hpp"

namespace consult {

enum class TransitionKind { Stay, Progressive, Retrospective };

std::string to_string(TransitionKind k);

struct ConsultationState {
  Phase phase = Phase::Inquiry;
  int turn = 0;
  std::map<Phase, std::set<std::string>> coverage;  // visited canonical category names
  bool terminated = false;
  int max_turns = 20;

  bool operator==(const ConsultationState&) const = default;
};

struct SubGoalStatus {
  Phase phase = Phase::Inquiry;
  int mandatory_total = 0;
  int mandatory_visited = 0;
  bool met = false;
};

// Returned when sub-goal gating blocks a progressive action; the state is
// left untouched and the unmet names are fed back to the doctor agent.
struct GoalUnmet {
  Phase blocked_from = Phase::Inquiry;
  std::vector<std::string> unmet_categories;
};

using ApplyResult = std::variant<ConsultationState, GoalUnmet>;

struct FsmOptions {
  bool gating_enabled = true;
  // Progressive actions bypass the gate once turn >= max_turns - reserve, so
  // a final diagnosis is always reachable under the cap.
  int forced_progression_reserve = 2;
};

// Throws ConfigError when max_turns < 3 (one turn per phase is the floor).
ConsultationState initial_state(int max_turns);

// Stay / Progressive / Retrospective by phase order. State must not be terminal.
TransitionKind classify_transition(const ConsultationState& state, const Action& action);

// Deterministic transition. Progressive moves are gated on the current
// phase's sub-goal unless within the forced-progression reserve. A
// Final Diagnosis action terminates the consultation.
// Throws ActionAfterTermination; unknown categories throw UnknownCategory.
ApplyResult apply_action(const ConsultationState& state, const Action& action,
                         const ActionTaxonomy& taxonomy, const FsmOptions& options = {});

SubGoalStatus subgoal_status(const ConsultationState& state, Phase phase,
                             const ActionTaxonomy& taxonomy);

// Terminated flag or cap exhaustion.
bool is_terminal(const ConsultationState& state);

// Category whose visit flips `terminated`.
inline constexpr const char* kFinalDiagnosisCategory = "Final Diagnosis";

}  // namespace consult
