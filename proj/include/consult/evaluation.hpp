#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "consult/agents.hpp"
#include "consult/backend.hpp"
#include "consult/case_model.hpp"

namespace consult {

// Rubric scores, one integer in [0,100] per report aspect.
struct FiveScores {
  int symptoms = 0;
  int medical_examinations = 0;
  int diagnostic_results = 0;
  int diagnostic_rationales = 0;
  int treatment_plan = 0;

  std::array<int, 5> as_array() const {
    return {symptoms, medical_examinations, diagnostic_results, diagnostic_rationales,
            treatment_plan};
  }
  bool operator==(const FiveScores&) const = default;
};

struct AspectAggregate {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample sd / sqrt(n)
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  int n = 0;
};

struct ScoreAggregate {
  std::array<AspectAggregate, 5> aspects;  // kReportSections order
};

ScoreAggregate aggregate_scores(const std::vector<FiveScores>& scores);

// Surface term (case-folded) -> ICD-10 code, synonyms collapsing to one code.
class IcdIndex {
 public:
  struct Entry {
    std::string code;       // letter, two digits, optional dot-suffix
    std::string canonical;
    std::vector<std::string> synonyms;
  };

  IcdIndex() = default;
  explicit IcdIndex(std::vector<Entry> entries);

  std::optional<std::string> code_for(const std::string& term) const;
  bool contains_term(const std::string& term) const;
  std::optional<std::string> canonical_for(const std::string& code) const;
  std::size_t size() const { return entries_.size(); }

  // {"codes": [{"code", "canonical", "synonyms": [...]}, ...]}
  static IcdIndex load(const std::string& path);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::string> term_to_code_;   // folded term -> code
  std::map<std::string, std::string> code_to_canon_;
};

bool is_icd10_code(const std::string& code);

enum class ExtractionMode { rule, model };

// Rule mode: split on sentence/semicolon/comma/numbered-list boundaries and
// keep segments known to the index. Model mode: backend lists entities one
// per line. Output is case-folded and deduplicated, order preserved.
std::vector<std::string> extract_entities(const std::string& diagnosis_text,
                                          const IcdIndex& index,
                                          ExtractionMode mode = ExtractionMode::rule,
                                          ChatBackend* backend = nullptr,
                                          const std::string& model_name = "");

struct NormalizeResult {
  std::set<std::string> codes;
  std::vector<std::string> unmatched;
};

NormalizeResult normalize_to_icd(const std::vector<std::string>& entities,
                                 const IcdIndex& index);

struct MatchResult {
  std::string case_id;
  std::set<std::string> predicted_codes;
  std::set<std::string> truth_codes;

  std::size_t intersection_size() const;
};

struct OverlapMetrics {
  double precision = 0.0;
  double recall = 0.0;
};

// precision = |inter|/|pred| (0 when pred empty); recall = |inter|/|truth|.
// Throws ValidationError on empty truth.
OverlapMetrics set_overlap_metrics(const std::set<std::string>& predicted,
                                   const std::set<std::string>& truth);

// Harmonic mean; 0 when both inputs are 0. Scale-agnostic (percent or fraction).
double f1(double precision, double recall);

struct CorpusMetrics {
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double micro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  int n = 0;
};

CorpusMetrics corpus_metrics(const std::vector<MatchResult>& results);

struct TurnHistogram {
  std::map<int, int> frequencies;
  int mode = 0;
  double variance = 0.0;
  int total = 0;
};

TurnHistogram turn_histogram(const std::vector<int>& turn_counts);

// Evaluator agent: prompt carries the complete ground truth and the report;
// reply must match the five-line "Aspect: integer" grammar, values in
// [0,100], bounded retries, then EvaluatorParseFailure.
FiveScores score_report(const DiagnosticReport& report, const CaseRecord& record,
                        ChatBackend& backend, const PromptTemplates& templates,
                        const DoctorOptions& options = {});

}  // namespace consult
