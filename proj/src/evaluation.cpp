#include "consult/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "consult/errors.hpp"
#include "json.hpp"

namespace consult {

using nlohmann::json;

ScoreAggregate aggregate_scores(const std::vector<FiveScores>& scores) {
  if (scores.empty()) throw ValidationError("aggregate_scores needs at least one score set");
  ScoreAggregate agg;
  const int n = static_cast<int>(scores.size());
  for (int aspect = 0; aspect < 5; ++aspect) {
    double sum = 0.0;
    for (const auto& s : scores) sum += s.as_array()[aspect];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& s : scores) {
      const double d = s.as_array()[aspect] - mean;
      sq += d * d;
    }
    const double sd = n > 1 ? std::sqrt(sq / (n - 1)) : 0.0;
    AspectAggregate& a = agg.aspects[aspect];
    a.mean = mean;
    a.stderr_ = sd / std::sqrt(static_cast<double>(n));
    a.ci95_low = mean - 1.96 * a.stderr_;
    a.ci95_high = mean + 1.96 * a.stderr_;
    a.n = n;
  }
  return agg;
}

bool is_icd10_code(const std::string& code) {
  static const std::regex shape("[A-Z][0-9]{2}(\\.[0-9A-Za-z]+)?");
  return std::regex_match(code, shape);
}

IcdIndex::IcdIndex(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (!is_icd10_code(e.code)) {
      throw ValidationError("not an ICD-10 code: " + e.code);
    }
    if (e.canonical.empty()) throw ValidationError("ICD entry " + e.code + " lacks a canonical term");
    term_to_code_[fold_key(e.canonical)] = e.code;
    for (const auto& syn : e.synonyms) term_to_code_[fold_key(syn)] = e.code;
    code_to_canon_.emplace(e.code, e.canonical);
  }
}

std::optional<std::string> IcdIndex::code_for(const std::string& term) const {
  const auto it = term_to_code_.find(fold_key(term));
  if (it == term_to_code_.end()) return std::nullopt;
  return it->second;
}

bool IcdIndex::contains_term(const std::string& term) const {
  return term_to_code_.count(fold_key(term)) > 0;
}

std::optional<std::string> IcdIndex::canonical_for(const std::string& code) const {
  const auto it = code_to_canon_.find(code);
  if (it == code_to_canon_.end()) return std::nullopt;
  return it->second;
}

IcdIndex IcdIndex::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("ICD index file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FileError("malformed ICD index " + path + ": " + e.what());
  }
  std::vector<Entry> entries;
  for (const auto& c : j.at("codes")) {
    Entry e;
    e.code = c.at("code").get<std::string>();
    e.canonical = c.at("canonical").get<std::string>();
    e.synonyms = c.value("synonyms", std::vector<std::string>{});
    entries.push_back(std::move(e));
  }
  return IcdIndex(std::move(entries));
}

namespace {

std::vector<std::string> split_segments(const std::string& text) {
  std::vector<std::string> segments;
  std::string current;
  for (char c : text) {
    if (c == '.' || c == ';' || c == ',' || c == '\n' || c == ':') {
      segments.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  segments.push_back(current);
  return segments;
}

std::vector<std::string> dedup_folded(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    const std::string folded = fold_key(item);
    if (folded.empty()) continue;
    if (std::find(out.begin(), out.end(), folded) == out.end()) out.push_back(folded);
  }
  return out;
}

}  // namespace

std::vector<std::string> extract_entities(const std::string& diagnosis_text,
                                          const IcdIndex& index, ExtractionMode mode,
                                          ChatBackend* backend,
                                          const std::string& model_name) {
  if (mode == ExtractionMode::model) {
    if (backend == nullptr) throw ConfigError("model extraction mode requires a backend");
    ChatRequest request;
    request.model_name = model_name;
    request.messages.push_back(
        {ChatRole::user,
         "List the disease entities named in the following diagnosis text, one per line, "
         "nothing else:\n" +
             diagnosis_text});
    const ChatResponse response = backend->complete(request);
    std::vector<std::string> lines;
    std::istringstream in(response.content);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return dedup_folded(lines);
  }

  std::vector<std::string> hits;
  for (const auto& segment : split_segments(diagnosis_text)) {
    const std::string folded = fold_key(segment);
    if (!folded.empty() && index.contains_term(folded)) hits.push_back(folded);
  }
  return dedup_folded(hits);
}

NormalizeResult normalize_to_icd(const std::vector<std::string>& entities,
                                 const IcdIndex& index) {
  NormalizeResult result;
  for (const auto& entity : entities) {
    if (auto code = index.code_for(entity)) {
      result.codes.insert(*code);
    } else {
      result.unmatched.push_back(fold_key(entity));
    }
  }
  return result;
}

std::size_t MatchResult::intersection_size() const {
  std::size_t count = 0;
  for (const auto& code : predicted_codes) count += truth_codes.count(code);
  return count;
}

OverlapMetrics set_overlap_metrics(const std::set<std::string>& predicted,
                                   const std::set<std::string>& truth) {
  if (truth.empty()) throw ValidationError("truth code set must be nonempty");
  std::size_t inter = 0;
  for (const auto& code : predicted) inter += truth.count(code);
  OverlapMetrics m;
  m.precision = predicted.empty() ? 0.0 : static_cast<double>(inter) / predicted.size();
  m.recall = static_cast<double>(inter) / truth.size();
  return m;
}

double f1(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

CorpusMetrics corpus_metrics(const std::vector<MatchResult>& results) {
  if (results.empty()) throw ValidationError("corpus_metrics needs at least one result");
  CorpusMetrics m;
  m.n = static_cast<int>(results.size());
  std::size_t inter_sum = 0, pred_sum = 0, truth_sum = 0;
  double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
  for (const auto& r : results) {
    const std::size_t inter = r.intersection_size();
    inter_sum += inter;
    pred_sum += r.predicted_codes.size();
    truth_sum += r.truth_codes.size();
    const double p =
        r.predicted_codes.empty() ? 0.0 : static_cast<double>(inter) / r.predicted_codes.size();
    const double rec =
        r.truth_codes.empty() ? 0.0 : static_cast<double>(inter) / r.truth_codes.size();
    macro_p += p;
    macro_r += rec;
    macro_f += f1(p, rec);
  }
  m.micro_precision = pred_sum == 0 ? 0.0 : static_cast<double>(inter_sum) / pred_sum;
  m.micro_recall = truth_sum == 0 ? 0.0 : static_cast<double>(inter_sum) / truth_sum;
  m.micro_f1 = f1(m.micro_precision, m.micro_recall);
  m.macro_precision = macro_p / m.n;
  m.macro_recall = macro_r / m.n;
  m.macro_f1 = macro_f / m.n;
  return m;
}

TurnHistogram turn_histogram(const std::vector<int>& turn_counts) {
  TurnHistogram h;
  h.total = static_cast<int>(turn_counts.size());
  if (turn_counts.empty()) return h;
  for (int t : turn_counts) h.frequencies[t] += 1;
  int best = 0;
  for (const auto& [turns, freq] : h.frequencies) {
    if (freq > best) {
      best = freq;
      h.mode = turns;
    }
  }
  double mean = 0.0;
  for (int t : turn_counts) mean += t;
  mean /= h.total;
  for (int t : turn_counts) h.variance += (t - mean) * (t - mean);
  h.variance /= h.total;
  return h;
}

namespace {

std::string render_ground_truth(const CaseRecord& record) {
  std::ostringstream out;
  out << "Profile: " << record.profile << "\n";
  for (const auto& [category, text] : record.self_report) {
    out << category << ": " << text << "\n";
  }
  for (const auto& exam : record.examinations) {
    out << "Examination " << exam.test_name << ": " << exam.result_text << "\n";
  }
  out << "Diagnosis: " << record.ground_truth.diagnosis_text << "\n";
  out << "Rationale: " << record.ground_truth.rationale_text << "\n";
  out << "Treatment: " << record.ground_truth.treatment_text << "\n";
  return out.str();
}

std::string render_report(const DiagnosticReport& report) {
  std::ostringstream out;
  out << "Symptoms: " << report.symptoms << "\n"
      << "Medical Examinations: " << report.medical_examinations << "\n"
      << "Diagnostic Results: " << report.diagnostic_results << "\n"
      << "Diagnostic Rationales: " << report.diagnostic_rationales << "\n"
      << "Treatment Plan: " << report.treatment_plan << "\n";
  return out.str();
}

std::string replace_slot(std::string text, const std::string& slot, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

// Strict five-line "Aspect: integer" grammar, all values in [0,100].
bool parse_scores(const std::string& reply, FiveScores& scores) {
  std::map<std::string, int> values;
  std::istringstream in(reply);
  std::string line;
  static const std::regex line_shape("\\s*([A-Za-z ]+?)\\s*:\\s*(-?[0-9]+)\\s*");
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::smatch m;
    if (!std::regex_match(line, m, line_shape)) return false;
    values[fold_key(m[1].str())] = std::stoi(m[2].str());
  }
  auto take = [&](const char* name, int& out) {
    const auto it = values.find(fold_key(name));
    if (it == values.end() || it->second < 0 || it->second > 100) return false;
    out = it->second;
    return true;
  };
  return values.size() == 5 && take("Symptoms", scores.symptoms) &&
         take("Medical Examinations", scores.medical_examinations) &&
         take("Diagnostic Results", scores.diagnostic_results) &&
         take("Diagnostic Rationales", scores.diagnostic_rationales) &&
         take("Treatment Plan", scores.treatment_plan);
}

}  // namespace

FiveScores score_report(const DiagnosticReport& report, const CaseRecord& record,
                        ChatBackend& backend, const PromptTemplates& templates,
                        const DoctorOptions& options) {
  std::string prompt = templates.evaluator;
  prompt = replace_slot(prompt, "{ground_truth}", render_ground_truth(record));
  prompt = replace_slot(prompt, "{report}", render_report(report));

  ChatRequest request;
  request.model_name = options.model_name;
  request.temperature = options.temperature;
  request.seed = options.seed;
  request.messages.push_back({ChatRole::user, prompt});

  for (int attempt = 0; attempt <= options.parse_retries; ++attempt) {
    const ChatResponse response = backend.complete(request);
    FiveScores scores;
    if (parse_scores(response.content, scores)) return scores;
    request.messages.push_back({ChatRole::assistant, response.content});
    request.messages.push_back(
        {ChatRole::user,
         "Invalid reply. Respond with exactly five lines 'Aspect: integer', each value in "
         "[0,100]."});
  }
  throw EvaluatorParseFailure("evaluator did not produce parseable scores for case " +
                              record.case_id);
}

}  // namespace consult
