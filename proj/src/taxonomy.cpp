#include "consult/taxonomy.hpp"

#include <fstream>
#include <set>

#include "consult/case_model.hpp"
#include "consult/errors.hpp"
#include "json.hpp"

namespace consult {

using nlohmann::json;

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Inquiry: return "Inquiry";
    case Phase::Examination: return "Examination";
    case Phase::Diagnosis: return "Diagnosis";
  }
  return "Inquiry";
}

Phase phase_from_string(const std::string& s) {
  const std::string key = fold_key(s);
  if (key == "inquiry") return Phase::Inquiry;
  if (key == "examination") return Phase::Examination;
  if (key == "diagnosis") return Phase::Diagnosis;
  throw UnknownPhase(s);
}

ActionTaxonomy::ActionTaxonomy(std::vector<ActionCategory> categories)
    : categories_(std::move(categories)) {
  check_invariants();
}

void ActionTaxonomy::check_invariants() const {
  for (Phase phase : kAllPhases) {
    std::set<std::string> names;
    bool any = false;
    bool mandatory = false;
    for (const auto& c : categories_) {
      if (c.phase != phase) continue;
      any = true;
      mandatory = mandatory || c.mandatory;
      if (c.name.empty()) throw ValidationError("taxonomy: empty category name");
      if (!names.insert(fold_key(c.name)).second) {
        throw ValidationError("taxonomy: duplicate category \"" + c.name + "\" under phase " +
                              to_string(phase));
      }
    }
    if (!any) throw ValidationError("taxonomy: phase " + to_string(phase) + " has no categories");
    if (!mandatory) {
      throw ValidationError("taxonomy: phase " + to_string(phase) +
                            " has no mandatory category");
    }
  }
}

std::vector<ActionCategory> ActionTaxonomy::categories_for(Phase phase) const {
  std::vector<ActionCategory> out;
  for (const auto& c : categories_) {
    if (c.phase == phase) out.push_back(c);
  }
  return out;
}

std::vector<ActionCategory> ActionTaxonomy::mandatory_for(Phase phase) const {
  std::vector<ActionCategory> out;
  for (const auto& c : categories_) {
    if (c.phase == phase && c.mandatory) out.push_back(c);
  }
  return out;
}

const ActionCategory* ActionTaxonomy::find(Phase phase, const std::string& name) const {
  const std::string key = fold_key(name);
  for (const auto& c : categories_) {
    if (c.phase == phase && fold_key(c.name) == key) return &c;
  }
  return nullptr;
}

ActionTaxonomy load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("taxonomy file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FileError("malformed taxonomy file " + path + ": " + e.what());
  }
  std::vector<ActionCategory> categories;
  try {
    for (const auto& p : j.at("phases")) {
      const Phase phase = phase_from_string(p.at("name").get<std::string>());
      for (const auto& c : p.at("categories")) {
        ActionCategory cat;
        cat.name = c.at("name").get<std::string>();
        cat.phase = phase;
        cat.mandatory = c.value("mandatory", false);
        cat.hint = c.value("hint", "");
        categories.push_back(std::move(cat));
      }
    }
  } catch (const json::exception& e) {
    throw FileError("malformed taxonomy file " + path + ": " + e.what());
  }
  return ActionTaxonomy(std::move(categories));
}

ActionTaxonomy default_taxonomy() {
  auto cat = [](const char* name, Phase phase, bool mandatory, const char* hint) {
    return ActionCategory{name, phase, mandatory, hint};
  };
  return ActionTaxonomy({
      cat("Chief Complaint", Phase::Inquiry, true,
          "Ask what brings the patient in today and the primary symptom."),
      cat("History of Present Illness", Phase::Inquiry, true,
          "Ask about onset, duration, severity, and evolution of the symptom."),
      cat("Past Medical History", Phase::Inquiry, false,
          "Ask about prior diagnoses, surgeries, and hospitalizations."),
      cat("Personal and Family History", Phase::Inquiry, false,
          "Ask about lifestyle, occupation, and familial conditions."),
      cat("Medication and Allergy History", Phase::Inquiry, false,
          "Ask about current medications and known allergies."),
      cat("Physical Examination", Phase::Examination, true,
          "Perform a focused physical examination of the affected system."),
      cat("Laboratory Tests", Phase::Examination, false,
          "Order blood, urine, or other laboratory analyses."),
      cat("Imaging Examination", Phase::Examination, false,
          "Order radiography, CT, MRI, or ultrasound as indicated."),
      cat("ECG", Phase::Examination, false,
          "Order an electrocardiogram when cardiac involvement is suspected."),
      cat("Preliminary Diagnosis", Phase::Diagnosis, true,
          "State the most likely diagnosis given the collected findings."),
      cat("Differential Diagnosis", Phase::Diagnosis, false,
          "List plausible alternative diagnoses to rule out."),
      cat("Final Diagnosis", Phase::Diagnosis, true,
          "Commit to the final diagnosis of the patient's condition."),
      cat("Diagnostic Rationale", Phase::Diagnosis, true,
          "Explain the reasoning linking findings to the diagnosis."),
      cat("Treatment Plan", Phase::Diagnosis, true,
          "Propose treatment and follow-up for the diagnosed condition."),
  });
}

Action parse_action(const std::string& text, const ActionTaxonomy& taxonomy) {
  const auto lt = text.find('<');
  const auto gt = text.find('>', lt == std::string::npos ? 0 : lt);
  if (lt == std::string::npos || gt == std::string::npos) {
    throw MalformedAction("action lacks a <Phase>: head: " + text);
  }
  if (text.find_first_not_of(" \t\r\n") != lt) {
    throw MalformedAction("action lacks a <Phase>: head: " + text);
  }
  const auto colon = text.find(':', gt);
  if (colon == std::string::npos || text.find_first_not_of(" \t", gt + 1) != colon) {
    throw MalformedAction("action lacks a <Phase>: head: " + text);
  }

  const Phase phase = phase_from_string(text.substr(lt + 1, gt - lt - 1));

  const auto dot = text.find('.', colon + 1);
  if (dot == std::string::npos) {
    throw MalformedAction("action lacks a category/utterance separator: " + text);
  }
  const std::string category_raw = text.substr(colon + 1, dot - colon - 1);
  std::string utterance = text.substr(dot + 1);
  const auto ub = utterance.find_first_not_of(" \t\r\n");
  if (ub == std::string::npos) {
    throw MalformedAction("action has an empty utterance: " + text);
  }
  const auto ue = utterance.find_last_not_of(" \t\r\n");
  utterance = utterance.substr(ub, ue - ub + 1);

  const ActionCategory* cat = taxonomy.find(phase, category_raw);
  if (cat == nullptr) {
    // trimmed form for the error message
    throw UnknownCategory(to_string(phase), fold_key(category_raw));
  }
  return Action{phase, cat->name, utterance};
}

std::string render_action(const Action& action) {
  return "<" + to_string(action.phase) + ">: " + action.category + ". " + action.utterance;
}

}  // namespace consult
