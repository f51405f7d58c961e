import os

import pytest

consult = pytest.importorskip("consult")

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
FIXTURES = os.path.join(ROOT, "tests", "fixtures")
DATA = os.path.join(ROOT, "data")


def test_action_round_trip():
    taxonomy = consult.ActionTaxonomy.default()
    action = consult.parse_action(
        "<Inquiry>: Chief Complaint. Do you feel headache?", taxonomy
    )
    assert action.phase == consult.Phase.Inquiry
    assert action.category == "Chief Complaint"
    assert consult.parse_action(consult.render_action(action), taxonomy) == action


def test_malformed_action_raises():
    taxonomy = consult.ActionTaxonomy.default()
    with pytest.raises(consult.ConsultError):
        consult.parse_action("not an action", taxonomy)


def test_fsm_gating():
    taxonomy = consult.ActionTaxonomy.default()
    state = consult.initial_state(20)
    blocked = consult.apply_action(
        state,
        consult.Action(consult.Phase.Diagnosis, "Final Diagnosis", "Flu."),
        taxonomy,
    )
    assert isinstance(blocked, consult.GoalUnmet)
    assert "Chief Complaint" in blocked.unmet_categories

    for category in ("Chief Complaint", "History of Present Illness"):
        action = consult.Action(consult.Phase.Inquiry, category, "Tell me.")
        state = consult.apply_action(state, action, taxonomy)
    assert state.turn == 2
    assert not consult.is_terminal(state)


def test_f1_and_metrics():
    assert abs(consult.f1(33.41, 50.61) - 40.25) < 0.02
    results = [
        consult.MatchResult("a", {"X", "Y"}, {"X", "Z"}),
        consult.MatchResult("b", {"Q"}, {"R", "S"}),
    ]
    metrics = consult.corpus_metrics(results)
    assert metrics.micro_precision == pytest.approx(1 / 3)
    assert metrics.micro_recall == pytest.approx(1 / 4)


def test_icd_index_and_extraction():
    index = consult.IcdIndex.load(os.path.join(DATA, "icd_index.json"))
    assert index.code_for("acute appendicitis") == "K35"
    entities = consult.extract_entities("1. Acute appendicitis; 2. Gout", index)
    assert entities == ["acute appendicitis", "gout"]


def test_scripted_benchmark(tmp_path):
    config = consult.RunConfig()
    config.corpus_path = os.path.join(FIXTURES, "corpus.jsonl")
    config.backend_mode = consult.BackendMode.scripted
    config.fixture_path = os.path.join(FIXTURES, "doctor_full.json")
    config.output_dir = str(tmp_path)
    config.concurrency = 2
    summary = consult.run_benchmark(config)
    assert summary.total == 4
    assert summary.succeeded == 4
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "c1.jsonl",
        "c2.jsonl",
        "c3.jsonl",
        "c4.jsonl",
    ]
