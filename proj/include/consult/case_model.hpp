#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace consult {

enum class ExamModality { imaging, ecg, laboratory, physical, other };

std::string to_string(ExamModality m);
ExamModality exam_modality_from_string(const std::string& s);

struct ExamResult {
  std::string test_name;
  ExamModality modality = ExamModality::other;
  std::string result_text;
};

struct GroundTruth {
  std::string diagnosis_text;
  std::vector<std::string> diagnosis_entities;
  std::string rationale_text;
  std::string treatment_text;
};

// One patient case. Immutable after load; safe to share across runs.
struct CaseRecord {
  std::string case_id;
  std::string profile;
  // inquiry-category name -> disclosed text; insertion order preserved
  std::vector<std::pair<std::string, std::string>> self_report;
  std::vector<ExamResult> examinations;
  GroundTruth ground_truth;

  std::optional<std::string> self_report_for(const std::string& category) const;
};

// Case-fold + trim, the canonical key form used for all name matching.
std::string fold_key(const std::string& s);

// Empty list iff all CaseRecord invariants hold; each violation names the field.
std::vector<std::string> validate_case(const CaseRecord& record);

// JSON Lines corpus, one case object per line. Throws FileError on missing
// file or malformed line (message carries the line number), ValidationError
// on invariant violations or duplicate case_id.
std::vector<CaseRecord> load_corpus(const std::string& path);

// Inverse of load_corpus for round-trip checks and fixture generation.
void save_corpus(const std::vector<CaseRecord>& corpus, const std::string& path);

// Unique ExamResult whose test_name matches after case-folding and trimming;
// nullopt when absent. No fuzzy matching.
std::optional<ExamResult> lookup_exam(const CaseRecord& record, const std::string& test_name);

}  // namespace consult
