#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>

#include "consult/case_model.hpp"
#include "consult/errors.hpp"
#include "test_util.hpp"

using namespace consult;

TEST_CASE("load_corpus reads well-formed cases in file order") {
  const auto corpus = load_corpus(testutil::fixture_path("corpus.jsonl"));
  REQUIRE(corpus.size() == 4);
  CHECK(corpus[0].case_id == "c1");
  CHECK(corpus[1].case_id == "c2");
  CHECK(corpus[2].case_id == "c3");
  CHECK(corpus[3].case_id == "c4");
  for (const auto& record : corpus) CHECK(validate_case(record).empty());
}

TEST_CASE("load_corpus rejects duplicate case ids") {
  testutil::TempDir dir;
  const std::string line =
      R"({"case_id":"c1","self_report":{"Chief Complaint":"x"},"ground_truth":{"diagnosis_entities":["a"]}})";
  testutil::write_file(dir.file("dup.jsonl"), line + "\n" + line + "\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.file("dup.jsonl")),
                       doctest::Contains("duplicate case_id \"c1\""), ValidationError);
}

TEST_CASE("load_corpus rejects a case missing Chief Complaint") {
  testutil::TempDir dir;
  testutil::write_file(
      dir.file("bad.jsonl"),
      R"({"case_id":"c9","self_report":{"Other":"x"},"ground_truth":{"diagnosis_entities":["a"]}})"
      "\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.file("bad.jsonl")), doctest::Contains("Chief Complaint"),
                       ValidationError);
}

TEST_CASE("load_corpus reports the offending line for malformed documents") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("broken.jsonl"), "{not json\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir.file("broken.jsonl")), doctest::Contains(":1:"),
                       FileError);
  CHECK_THROWS_AS(load_corpus(dir.file("absent.jsonl")), FileError);
}

TEST_CASE("validate_case") {
  auto record = testutil::sample_record();
  CHECK(validate_case(record).empty());

  SUBCASE("empty diagnosis entities") {
    record.ground_truth.diagnosis_entities.clear();
    const auto violations = validate_case(record);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("ground_truth.diagnosis_entities") != std::string::npos);
  }
  SUBCASE("duplicate examination names, case-insensitive") {
    record.examinations.push_back({"ecg ", ExamModality::ecg, "Also normal."});
    const auto violations = validate_case(record);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("duplicate") != std::string::npos);
  }
}

TEST_CASE("lookup_exam matches after case-folding and trimming") {
  const auto record = testutil::sample_record();
  const auto hit = lookup_exam(record, "ecg ");
  REQUIRE(hit.has_value());
  CHECK(hit->test_name == "ECG");
  CHECK(!lookup_exam(record, "MRI").has_value());

  CaseRecord empty_exams = record;
  empty_exams.examinations.clear();
  CHECK(!lookup_exam(empty_exams, "ECG").has_value());
}

TEST_CASE("corpus round-trips through save and load") {
  const auto corpus = load_corpus(testutil::fixture_path("corpus.jsonl"));
  testutil::TempDir dir;
  save_corpus(corpus, dir.file("copy.jsonl"));
  const auto reloaded = load_corpus(dir.file("copy.jsonl"));
  REQUIRE(reloaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(reloaded[i].case_id == corpus[i].case_id);
    CHECK(reloaded[i].profile == corpus[i].profile);
    CHECK(reloaded[i].self_report == corpus[i].self_report);
    REQUIRE(reloaded[i].examinations.size() == corpus[i].examinations.size());
    for (std::size_t k = 0; k < corpus[i].examinations.size(); ++k) {
      CHECK(reloaded[i].examinations[k].test_name == corpus[i].examinations[k].test_name);
      CHECK(reloaded[i].examinations[k].result_text == corpus[i].examinations[k].result_text);
    }
    CHECK(reloaded[i].ground_truth.diagnosis_entities ==
          corpus[i].ground_truth.diagnosis_entities);
  }
}

TEST_CASE("lookup_exam misses exactly the names absent from the case") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> pool = {"ECG",  "MRI",  "CT",   "Blood Panel",
                                         "Urinalysis", "Biopsy", "X-Ray", "Ultrasound"};
  for (int trial = 0; trial < 200; ++trial) {
    CaseRecord record = testutil::sample_record();
    record.examinations.clear();
    std::set<std::string> present;
    for (const auto& name : pool) {
      if (rng() % 2 == 0) {
        record.examinations.push_back({name, ExamModality::other, "result"});
        present.insert(fold_key(name));
      }
    }
    for (const auto& name : pool) {
      CHECK(lookup_exam(record, name).has_value() == (present.count(fold_key(name)) > 0));
    }
  }
}
