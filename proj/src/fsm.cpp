#include "consult/fsm.hpp"

#include "consult/case_model.hpp"
#include "consult/errors.hpp"

namespace consult {

std::string to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::Stay: return "stay";
    case TransitionKind::Progressive: return "progressive";
    case TransitionKind::Retrospective: return "retrospective";
  }
  return "stay";
}

ConsultationState initial_state(int max_turns) {
  if (max_turns < 3) {
    throw ConfigError("max_turns must be >= 3, got " + std::to_string(max_turns));
  }
  ConsultationState state;
  state.max_turns = max_turns;
  return state;
}

TransitionKind classify_transition(const ConsultationState& state, const Action& action) {
  if (action.phase == state.phase) return TransitionKind::Stay;
  return static_cast<int>(action.phase) > static_cast<int>(state.phase)
             ? TransitionKind::Progressive
             : TransitionKind::Retrospective;
}

SubGoalStatus subgoal_status(const ConsultationState& state, Phase phase,
                             const ActionTaxonomy& taxonomy) {
  SubGoalStatus status;
  status.phase = phase;
  const auto it = state.coverage.find(phase);
  for (const auto& cat : taxonomy.mandatory_for(phase)) {
    ++status.mandatory_total;
    if (it != state.coverage.end() && it->second.count(cat.name) > 0) {
      ++status.mandatory_visited;
    }
  }
  status.met = status.mandatory_visited == status.mandatory_total;
  return status;
}

ApplyResult apply_action(const ConsultationState& state, const Action& action,
                         const ActionTaxonomy& taxonomy, const FsmOptions& options) {
  if (state.terminated) throw ActionAfterTermination();
  const ActionCategory* cat = taxonomy.find(action.phase, action.category);
  if (cat == nullptr) throw UnknownCategory(to_string(action.phase), action.category);

  const TransitionKind kind = classify_transition(state, action);
  if (kind == TransitionKind::Progressive && options.gating_enabled) {
    const bool forced = state.turn >= state.max_turns - options.forced_progression_reserve;
    const SubGoalStatus status = subgoal_status(state, state.phase, taxonomy);
    if (!status.met && !forced) {
      GoalUnmet unmet;
      unmet.blocked_from = state.phase;
      const auto it = state.coverage.find(state.phase);
      for (const auto& c : taxonomy.mandatory_for(state.phase)) {
        if (it == state.coverage.end() || it->second.count(c.name) == 0) {
          unmet.unmet_categories.push_back(c.name);
        }
      }
      return unmet;
    }
  }

  ConsultationState next = state;
  next.turn = state.turn + 1;
  next.phase = action.phase;
  next.coverage[action.phase].insert(cat->name);
  if (action.phase == Phase::Diagnosis && fold_key(cat->name) == fold_key(kFinalDiagnosisCategory)) {
    next.terminated = true;
  }
  return next;
}

bool is_terminal(const ConsultationState& state) {
  return state.terminated || state.turn >= state.max_turns;
}

}  // namespace consult
