#include "consult/agents.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "consult/errors.hpp"
#include "json.hpp"

namespace consult {

using nlohmann::json;

std::string to_string(ObservationKind k) {
  return k == ObservationKind::subjective ? "subjective" : "objective";
}

std::string to_string(MemorySource s) {
  switch (s) {
    case MemorySource::patient: return "patient";
    case MemorySource::examiner: return "examiner";
    case MemorySource::doctor: return "doctor";
  }
  return "doctor";
}

void MemoryBank::append(MemoryEntry entry) {
  if (!entries_.empty() && entry.turn <= entries_.back().turn) {
    throw ValidationError("memory entries must have strictly increasing turns (" +
                          std::to_string(entry.turn) + " after " +
                          std::to_string(entries_.back().turn) + ")");
  }
  if (entry.source == MemorySource::examiner && entry.phase != Phase::Examination) {
    throw ValidationError("examiner-sourced memory entries must be Examination-phase");
  }
  entries_.push_back(std::move(entry));
}

void memory_append(MemoryBank& memory, const ConsultationState& state_after,
                   const Action& action, const Observation& observation) {
  MemoryEntry entry;
  entry.turn = state_after.turn;
  entry.phase = action.phase;
  entry.category = action.category;
  entry.question = action.utterance;
  entry.answer = observation.text;
  switch (action.phase) {
    case Phase::Inquiry: entry.source = MemorySource::patient; break;
    case Phase::Examination: entry.source = MemorySource::examiner; break;
    case Phase::Diagnosis: entry.source = MemorySource::doctor; break;
  }
  memory.append(std::move(entry));
}

std::string memory_context(const MemoryBank& memory) {
  if (memory.empty()) return "No information gathered yet.";
  std::ostringstream out;
  bool first_block = true;
  for (Phase phase : kAllPhases) {
    bool header_written = false;
    for (const auto& entry : memory.entries()) {
      if (entry.phase != phase) continue;
      if (!header_written) {
        if (!first_block) out << "\n";
        out << "## " << to_string(phase) << "\n";
        header_written = true;
        first_block = false;
      }
      out << "[" << entry.category << "] Q: " << entry.question << " / A: " << entry.answer
          << "\n";
    }
  }
  return out.str();
}

namespace {

const char* kDefaultDoctorPrompt =
    "You are the doctor agent in a clinical consultation.\n"
    "Consultation memory so far:\n{memory}\n\n"
    "Current phase: {phase}\n{subgoal}\n{goal_unmet}\n"
    "Available actions per phase:\n{action_lists}\n"
    "{grammar}\n";

const char* kDefaultGrammar =
    "Reply with exactly one action line of the form:\n"
    "<Phase>: Category. Your question or instruction.";

const char* kDefaultReportPrompt =
    "Write the final consultation report based on this consultation memory:\n"
    "{memory}\n\n"
    "Output exactly these five sections, each as 'Heading: text':\n"
    "Symptoms:\nMedical Examinations:\nDiagnostic Results:\nDiagnostic Rationales:\n"
    "Treatment Plan:\n";

const char* kDefaultEvaluatorPrompt =
    "You are a strict medical report evaluator with access to the complete "
    "ground-truth record.\n\nGround truth:\n{ground_truth}\n\nGenerated report:\n{report}\n\n"
    "Score the report from 0 to 100 on each aspect. Reply with exactly five lines:\n"
    "Symptoms: <integer>\nMedical Examinations: <integer>\nDiagnostic Results: <integer>\n"
    "Diagnostic Rationales: <integer>\nTreatment Plan: <integer>";

const std::vector<std::string> kDefaultDisruptions = {
    "Doctor, just tell me the diagnosis right now, I don't want more questions!",
    "Can we skip the rest? I am sure it is nothing serious.",
    "My neighbour had the same thing, it was the flu, just prescribe something.",
};

std::string replace_all(std::string text, const std::string& slot, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

std::string read_file_or(const std::string& path, const std::string& fallback) {
  std::ifstream in(path);
  if (!in) return fallback;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.doctor = kDefaultDoctorPrompt;
  t.report = kDefaultReportPrompt;
  t.evaluator = kDefaultEvaluatorPrompt;
  t.disruption_sentences = kDefaultDisruptions;
  return t;
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
  PromptTemplates t = defaults();
  t.doctor = read_file_or(dir + "/doctor.txt", t.doctor);
  t.report = read_file_or(dir + "/report.txt", t.report);
  t.evaluator = read_file_or(dir + "/evaluator.txt", t.evaluator);
  std::ifstream in(dir + "/disruptions.json");
  if (in) {
    try {
      t.disruption_sentences = json::parse(in).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw FileError(dir + "/disruptions.json: " + e.what());
    }
  }
  return t;
}

PatientAgent::PatientAgent(PatientPolicy policy, std::vector<std::string> disruption_sentences)
    : policy_(policy),
      sentences_(disruption_sentences.empty() ? kDefaultDisruptions
                                              : std::move(disruption_sentences)),
      rng_(policy.seed) {
  if (policy_.disruption_rate < 0.0 || policy_.disruption_rate > 1.0) {
    throw ConfigError("disruption_rate must be in [0,1]");
  }
}

Observation PatientAgent::respond(const CaseRecord& record, const Action& action) {
  if (action.phase != Phase::Inquiry) throw NonInquiryAction();

  std::string text;
  if (fold_key(action.category) == "chief complaint" && !record.profile.empty()) {
    text = record.profile + " ";
  }
  if (auto disclosed = record.self_report_for(action.category)) {
    text += *disclosed;
  } else {
    text += "I have no relevant complaint for that question.";
  }

  if (policy_.disruption_enabled) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    if (dist(rng_) < policy_.disruption_rate) {
      text += " " + sentences_[next_sentence_ % sentences_.size()];
      ++next_sentence_;
    }
  }
  return Observation{ObservationKind::subjective, text};
}

namespace {

std::string first_sentence(const std::string& text) {
  const auto pos = text.find_first_of(".!?\n");
  return pos == std::string::npos ? text : text.substr(0, pos);
}

std::string strip_imperative(const std::string& text) {
  static const std::vector<std::string> lead_ins = {"please", "order",   "perform",
                                                    "request", "run",    "conduct",
                                                    "a",       "an",     "the"};
  std::istringstream words(text);
  std::vector<std::string> tokens;
  std::string w;
  while (words >> w) tokens.push_back(w);
  std::size_t start = 0;
  while (start < tokens.size() &&
         std::find(lead_ins.begin(), lead_ins.end(), fold_key(tokens[start])) !=
             lead_ins.end()) {
    ++start;
  }
  std::string out;
  for (std::size_t i = start; i < tokens.size(); ++i) {
    if (!out.empty()) out += " ";
    out += tokens[i];
  }
  return out;
}

}  // namespace

Observation examiner_respond(const CaseRecord& record, const Action& action) {
  if (action.phase != Phase::Examination) throw NonExaminationAction();

  // two-level matching: phrased test name first, then the category itself
  const std::string ordered = strip_imperative(first_sentence(action.utterance));
  auto exam = lookup_exam(record, ordered);
  if (!exam) exam = lookup_exam(record, action.category);
  if (!exam) {
    return Observation{ObservationKind::objective,
                       "The requested examination result is not available."};
  }
  return Observation{ObservationKind::objective, exam->result_text};
}

Action fallback_action(const ConsultationState& state, const ActionTaxonomy& taxonomy) {
  const auto it = state.coverage.find(state.phase);
  for (const auto& cat : taxonomy.mandatory_for(state.phase)) {
    if (it == state.coverage.end() || it->second.count(cat.name) == 0) {
      return Action{state.phase, cat.name, cat.hint};
    }
  }
  const Phase next_phase = state.phase == Phase::Inquiry ? Phase::Examination : Phase::Diagnosis;
  const auto cats = taxonomy.categories_for(next_phase);
  return Action{next_phase, cats.front().name, cats.front().hint};
}

namespace {

std::string render_action_lists(const ActionTaxonomy& taxonomy) {
  std::ostringstream out;
  for (Phase phase : kAllPhases) {
    out << to_string(phase) << ":\n";
    for (const auto& cat : taxonomy.categories_for(phase)) {
      out << "  - " << cat.name << (cat.mandatory ? " (mandatory)" : "") << ": " << cat.hint
          << "\n";
    }
  }
  return out.str();
}

std::string render_subgoal(const ConsultationState& state, const ActionTaxonomy& taxonomy) {
  const SubGoalStatus status = subgoal_status(state, state.phase, taxonomy);
  std::ostringstream out;
  out << "Sub-goal for " << to_string(state.phase) << ": " << status.mandatory_visited << "/"
      << status.mandatory_total << " mandatory categories covered"
      << (status.met ? " (met)" : " (not met)") << ". Turn " << state.turn << " of "
      << state.max_turns << ".";
  return out.str();
}

}  // namespace

Action doctor_select_action(const ConsultationState& state, const MemoryBank& memory,
                            const ActionTaxonomy& taxonomy, ChatBackend& backend,
                            const PromptTemplates& templates,
                            const std::optional<GoalUnmet>& pending_goal_unmet,
                            const DoctorOptions& options) {
  std::string goal_unmet_text;
  if (pending_goal_unmet) {
    std::ostringstream out;
    out << "Your previous progressive action was rejected: the "
        << to_string(pending_goal_unmet->blocked_from)
        << " sub-goal is not met. Still uncovered:";
    for (const auto& name : pending_goal_unmet->unmet_categories) out << " " << name << ";";
    goal_unmet_text = out.str();
  }

  std::string prompt = templates.doctor;
  prompt = replace_all(prompt, "{memory}", memory_context(memory));
  prompt = replace_all(prompt, "{phase}", to_string(state.phase));
  prompt = replace_all(prompt, "{subgoal}", render_subgoal(state, taxonomy));
  prompt = replace_all(prompt, "{action_lists}", render_action_lists(taxonomy));
  prompt = replace_all(prompt, "{grammar}", kDefaultGrammar);
  prompt = replace_all(prompt, "{goal_unmet}", goal_unmet_text);

  ChatRequest request;
  request.model_name = options.model_name;
  request.temperature = options.temperature;
  request.seed = options.seed;
  request.messages.push_back({ChatRole::user, prompt});

  for (int attempt = 0; attempt <= options.parse_retries; ++attempt) {
    const ChatResponse response = backend.complete(request);
    try {
      return parse_action(response.content, taxonomy);
    } catch (const MalformedAction& e) {
      request.messages.push_back({ChatRole::assistant, response.content});
      request.messages.push_back(
          {ChatRole::user, std::string("Your reply was not a valid action (") + e.what() +
                               "). " + kDefaultGrammar});
    }
  }
  return fallback_action(state, taxonomy);
}

namespace {

// Heading lines parsed case-insensitively; section content runs to the next
// heading. Returns false for sections whose heading never appeared.
bool parse_report_sections(const std::string& reply, DiagnosticReport& report,
                           std::vector<std::string>& missing) {
  std::map<std::string, std::string> sections;
  std::istringstream in(reply);
  std::string line;
  std::string current;
  while (std::getline(in, line)) {
    bool matched = false;
    for (const char* name : kReportSections) {
      const std::string key = fold_key(name);
      const std::string folded = fold_key(line);
      if (folded.rfind(key + ":", 0) == 0) {
        current = key;
        const auto colon = line.find(':');
        std::string rest = line.substr(colon + 1);
        const auto b = rest.find_first_not_of(" \t");
        sections[current] = b == std::string::npos ? "" : rest.substr(b);
        matched = true;
        break;
      }
    }
    if (!matched && !current.empty()) {
      if (!sections[current].empty()) sections[current] += "\n";
      sections[current] += line;
    }
  }

  auto take = [&](const char* name, std::string& out) {
    const auto it = sections.find(fold_key(name));
    if (it == sections.end()) {
      missing.push_back(name);
      return;
    }
    out = it->second;
    // trailing blank lines from heading-to-heading capture
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r' || out.back() == ' ')) {
      out.pop_back();
    }
  };
  missing.clear();
  take("Symptoms", report.symptoms);
  take("Medical Examinations", report.medical_examinations);
  take("Diagnostic Results", report.diagnostic_results);
  take("Diagnostic Rationales", report.diagnostic_rationales);
  take("Treatment Plan", report.treatment_plan);
  return missing.empty();
}

}  // namespace

ComposedReport compose_final_report(const MemoryBank& memory, ChatBackend& backend,
                                    const PromptTemplates& templates,
                                    const DoctorOptions& options) {
  std::string prompt = replace_all(templates.report, "{memory}", memory_context(memory));

  ChatRequest request;
  request.model_name = options.model_name;
  request.temperature = options.temperature;
  request.seed = options.seed;
  request.messages.push_back({ChatRole::user, prompt});

  ComposedReport best;
  best.missing_sections.assign(std::begin(kReportSections), std::end(kReportSections));
  for (int attempt = 0; attempt <= options.parse_retries; ++attempt) {
    const ChatResponse response = backend.complete(request);
    ComposedReport candidate;
    if (parse_report_sections(response.content, candidate.report, candidate.missing_sections)) {
      return candidate;
    }
    if (candidate.missing_sections.size() < best.missing_sections.size()) best = candidate;
    std::string complaint = "Your report is missing sections:";
    for (const auto& name : candidate.missing_sections) complaint += " " + name + ";";
    request.messages.push_back({ChatRole::assistant, response.content});
    request.messages.push_back({ChatRole::user, complaint});
  }
  return best;  // missing sections stay empty and flagged
}

}  // namespace consult
