#pragma once

#include <string>
#include <vector>

namespace consult {

// The three consultation phases, totally ordered.
enum class Phase { Inquiry = 0, Examination = 1, Diagnosis = 2 };

inline constexpr Phase kAllPhases[] = {Phase::Inquiry, Phase::Examination, Phase::Diagnosis};

std::string to_string(Phase p);
// Case-insensitive; throws UnknownPhase.
Phase phase_from_string(const std::string& s);

struct ActionCategory {
  std::string name;
  Phase phase = Phase::Inquiry;
  bool mandatory = false;
  std::string hint;
};

class ActionTaxonomy {
 public:
  ActionTaxonomy() = default;
  explicit ActionTaxonomy(std::vector<ActionCategory> categories);

  // File order, filtered by phase. Never empty for a valid taxonomy.
  std::vector<ActionCategory> categories_for(Phase phase) const;
  std::vector<ActionCategory> mandatory_for(Phase phase) const;

  // Case-insensitive lookup within one phase; nullptr when absent.
  const ActionCategory* find(Phase phase, const std::string& name) const;

  const std::vector<ActionCategory>& categories() const { return categories_; }

 private:
  void check_invariants() const;
  std::vector<ActionCategory> categories_;
};

// {"phases": [{"name", "categories": [{"name", "mandatory", "hint"}...]}...]}
ActionTaxonomy load_taxonomy(const std::string& path);

// The taxonomy shipped in data/taxonomy.json, compiled in so the engine
// works without a data directory.
ActionTaxonomy default_taxonomy();

// One doctor move: `<Phase>: Category. utterance`
struct Action {
  Phase phase = Phase::Inquiry;
  std::string category;  // canonical name from the taxonomy
  std::string utterance;

  bool operator==(const Action&) const = default;
};

// Strict grammar `<PhaseName>: CategoryName. utterance`. Phase and category
// matched case-insensitively; the stored category is the taxonomy's canonical
// spelling. Throws MalformedAction / UnknownPhase / UnknownCategory.
Action parse_action(const std::string& text, const ActionTaxonomy& taxonomy);

// Canonical surface form; parse_action(render_action(a)) == a.
std::string render_action(const Action& action);

}  // namespace consult
