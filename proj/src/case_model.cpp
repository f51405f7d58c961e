#include "consult/case_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "consult/errors.hpp"
#include "json.hpp"

namespace consult {

using nlohmann::json;

std::string to_string(ExamModality m) {
  switch (m) {
    case ExamModality::imaging: return "imaging";
    case ExamModality::ecg: return "ecg";
    case ExamModality::laboratory: return "laboratory";
    case ExamModality::physical: return "physical";
    case ExamModality::other: return "other";
  }
  return "other";
}

ExamModality exam_modality_from_string(const std::string& s) {
  if (s == "imaging") return ExamModality::imaging;
  if (s == "ecg") return ExamModality::ecg;
  if (s == "laboratory") return ExamModality::laboratory;
  if (s == "physical") return ExamModality::physical;
  if (s == "other") return ExamModality::other;
  throw ValidationError("unknown examination modality: " + s);
}

std::string fold_key(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(begin, end - begin + 1);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<std::string> CaseRecord::self_report_for(const std::string& category) const {
  const std::string key = fold_key(category);
  for (const auto& [name, text] : self_report) {
    if (fold_key(name) == key) return text;
  }
  return std::nullopt;
}

std::vector<std::string> validate_case(const CaseRecord& record) {
  std::vector<std::string> violations;
  if (record.case_id.empty()) violations.push_back("case_id: empty");
  if (!record.self_report_for("Chief Complaint")) {
    violations.push_back("self_report: missing \"Chief Complaint\" entry");
  }
  std::set<std::string> seen;
  for (const auto& exam : record.examinations) {
    if (exam.test_name.empty()) {
      violations.push_back("examinations.test_name: empty");
      continue;
    }
    if (exam.result_text.empty()) {
      violations.push_back("examinations[" + exam.test_name + "].result_text: empty");
    }
    const std::string key = fold_key(exam.test_name);
    if (!seen.insert(key).second) {
      violations.push_back("examinations: duplicate test name \"" + exam.test_name + "\"");
    }
  }
  if (record.ground_truth.diagnosis_entities.empty()) {
    violations.push_back("ground_truth.diagnosis_entities: empty");
  }
  for (const auto& entity : record.ground_truth.diagnosis_entities) {
    if (entity.empty()) {
      violations.push_back("ground_truth.diagnosis_entities: empty entry");
      break;
    }
  }
  return violations;
}

namespace {

CaseRecord case_from_json(const json& j) {
  CaseRecord record;
  record.case_id = j.at("case_id").get<std::string>();
  record.profile = j.value("profile", "");
  if (j.contains("self_report")) {
    for (const auto& [key, value] : j.at("self_report").items()) {
      record.self_report.emplace_back(key, value.get<std::string>());
    }
  }
  for (const auto& e : j.value("examinations", json::array())) {
    ExamResult exam;
    exam.test_name = e.at("test_name").get<std::string>();
    exam.modality = exam_modality_from_string(e.value("modality", "other"));
    exam.result_text = e.at("result_text").get<std::string>();
    record.examinations.push_back(std::move(exam));
  }
  const auto& gt = j.at("ground_truth");
  record.ground_truth.diagnosis_text = gt.value("diagnosis_text", "");
  record.ground_truth.diagnosis_entities =
      gt.value("diagnosis_entities", std::vector<std::string>{});
  record.ground_truth.rationale_text = gt.value("rationale_text", "");
  record.ground_truth.treatment_text = gt.value("treatment_text", "");
  return record;
}

json case_to_json(const CaseRecord& record) {
  json j;
  j["case_id"] = record.case_id;
  j["profile"] = record.profile;
  json sr = json::object();
  for (const auto& [key, value] : record.self_report) sr[key] = value;
  j["self_report"] = sr;
  json exams = json::array();
  for (const auto& e : record.examinations) {
    exams.push_back({{"test_name", e.test_name},
                     {"modality", to_string(e.modality)},
                     {"result_text", e.result_text}});
  }
  j["examinations"] = exams;
  j["ground_truth"] = {{"diagnosis_text", record.ground_truth.diagnosis_text},
                       {"diagnosis_entities", record.ground_truth.diagnosis_entities},
                       {"rationale_text", record.ground_truth.rationale_text},
                       {"treatment_text", record.ground_truth.treatment_text}};
  return j;
}

}  // namespace

std::vector<CaseRecord> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("corpus file not found: " + path);

  std::vector<CaseRecord> corpus;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FileError(path + ":" + std::to_string(line_no) + ": malformed case: " + e.what());
    }
    CaseRecord record;
    try {
      record = case_from_json(j);
    } catch (const json::exception& e) {
      throw FileError(path + ":" + std::to_string(line_no) + ": malformed case: " + e.what());
    }
    if (!ids.insert(record.case_id).second) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": duplicate case_id \"" +
                            record.case_id + "\"");
    }
    auto violations = validate_case(record);
    if (!violations.empty()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": case \"" << record.case_id << "\" invalid:";
      for (const auto& v : violations) msg << " " << v << ";";
      throw ValidationError(msg.str());
    }
    corpus.push_back(std::move(record));
  }
  return corpus;
}

void save_corpus(const std::vector<CaseRecord>& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write corpus file: " + path);
  for (const auto& record : corpus) {
    out << case_to_json(record).dump() << "\n";
  }
}

std::optional<ExamResult> lookup_exam(const CaseRecord& record, const std::string& test_name) {
  const std::string key = fold_key(test_name);
  for (const auto& exam : record.examinations) {
    if (fold_key(exam.test_name) == key) return exam;
  }
  return std::nullopt;
}

}  // namespace consult
