#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "consult/errors.hpp"
#include "consult/taxonomy.hpp"
#include "test_util.hpp"

using namespace consult;

TEST_CASE("shipped taxonomy file matches invariants and the built-in default") {
  const auto from_file = load_taxonomy(testutil::data_path("taxonomy.json"));
  const auto builtin = default_taxonomy();
  REQUIRE(from_file.categories().size() == builtin.categories().size());
  for (std::size_t i = 0; i < builtin.categories().size(); ++i) {
    CHECK(from_file.categories()[i].name == builtin.categories()[i].name);
    CHECK(from_file.categories()[i].phase == builtin.categories()[i].phase);
    CHECK(from_file.categories()[i].mandatory == builtin.categories()[i].mandatory);
  }
  const auto inquiry = from_file.categories_for(Phase::Inquiry);
  REQUIRE(!inquiry.empty());
  CHECK(inquiry.front().name == "Chief Complaint");
  CHECK(inquiry.front().mandatory);
}

TEST_CASE("load_taxonomy rejects an empty phase") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("t.json"), R"({"phases":[
    {"name":"Inquiry","categories":[{"name":"Chief Complaint","mandatory":true}]},
    {"name":"Examination","categories":[{"name":"Physical Examination","mandatory":true}]},
    {"name":"Diagnosis","categories":[]}]})");
  CHECK_THROWS_WITH_AS(load_taxonomy(dir.file("t.json")), doctest::Contains("Diagnosis"),
                       ValidationError);
}

TEST_CASE("load_taxonomy rejects duplicate categories within a phase") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("t.json"), R"({"phases":[
    {"name":"Inquiry","categories":[{"name":"Chief Complaint","mandatory":true},
                                    {"name":"chief complaint","mandatory":false}]},
    {"name":"Examination","categories":[{"name":"Physical Examination","mandatory":true}]},
    {"name":"Diagnosis","categories":[{"name":"Final Diagnosis","mandatory":true}]}]})");
  CHECK_THROWS_WITH_AS(load_taxonomy(dir.file("t.json")), doctest::Contains("duplicate"),
                       ValidationError);
}

TEST_CASE("categories_for preserves file order and phase") {
  const auto taxonomy = default_taxonomy();
  for (Phase phase : kAllPhases) {
    const auto cats = taxonomy.categories_for(phase);
    CHECK(!cats.empty());
    for (const auto& c : cats) CHECK(c.phase == phase);
  }
  CHECK(taxonomy.categories_for(Phase::Inquiry).size() == 5);
  CHECK(taxonomy.categories_for(Phase::Examination).size() == 4);
  CHECK(taxonomy.categories_for(Phase::Diagnosis).size() == 5);
}

TEST_CASE("parse_action accepts the canonical surface form") {
  const auto taxonomy = default_taxonomy();
  const Action a = parse_action("<Inquiry>: Chief Complaint. Do you feel headache?", taxonomy);
  CHECK(a.phase == Phase::Inquiry);
  CHECK(a.category == "Chief Complaint");
  CHECK(a.utterance == "Do you feel headache?");

  // case-insensitive phase and category
  const Action b = parse_action("<inquiry>: chief complaint. Any pain?", taxonomy);
  CHECK(b.phase == Phase::Inquiry);
  CHECK(b.category == "Chief Complaint");
}

TEST_CASE("parse_action error taxonomy") {
  const auto taxonomy = default_taxonomy();
  CHECK_THROWS_AS(parse_action("<Dance>: Chief Complaint. hi", taxonomy), UnknownPhase);
  CHECK_THROWS_AS(parse_action("<Inquiry>: Chief Complaint", taxonomy), MalformedAction);
  CHECK_THROWS_AS(parse_action("Chief Complaint. hi", taxonomy), MalformedAction);
  CHECK_THROWS_AS(parse_action("<Inquiry>: Chief Complaint.   ", taxonomy), MalformedAction);
  try {
    parse_action("<Examination>: MRI Scan. Order an MRI.", taxonomy);
    FAIL("expected UnknownCategory");
  } catch (const UnknownCategory& e) {
    CHECK(e.phase_name == "Examination");
    CHECK(e.category_name == "mri scan");
  }
}

TEST_CASE("render_action is the parser's inverse") {
  const auto taxonomy = default_taxonomy();
  const Action a{Phase::Examination, "Laboratory Tests", "Order a complete blood count."};
  CHECK(render_action(a) == "<Examination>: Laboratory Tests. Order a complete blood count.");
  CHECK(parse_action(render_action(a), taxonomy) == a);
}

TEST_CASE("parser never accepts a category under the wrong phase") {
  const auto taxonomy = default_taxonomy();
  for (Phase phase : kAllPhases) {
    for (const auto& cat : taxonomy.categories()) {
      const std::string text = "<" + to_string(phase) + ">: " + cat.name + ". hello.";
      if (cat.phase == phase) {
        CHECK(parse_action(text, taxonomy).category == cat.name);
      } else {
        CHECK_THROWS_AS(parse_action(text, taxonomy), UnknownCategory);
      }
    }
  }
}

TEST_CASE("round-trip over random valid actions") {
  const auto taxonomy = default_taxonomy();
  std::mt19937_64 rng(11);
  const std::vector<std::string> utterances = {
      "Do you feel headache?", "Order a complete blood count.", "It hurts when I breathe",
      "Check reflexes; note asymmetry.", "x"};
  for (int i = 0; i < 500; ++i) {
    const auto& cat = taxonomy.categories()[rng() % taxonomy.categories().size()];
    const Action a{cat.phase, cat.name, utterances[rng() % utterances.size()]};
    const std::string rendered = render_action(a);
    CHECK(parse_action(rendered, taxonomy) == a);
    // reparse of a re-render is stable
    CHECK(render_action(parse_action(rendered, taxonomy)) == rendered);
  }
}
