"""Consultation-game engine: action grammar, phase FSM, metrics, and harness."""

from ._consult import (  # noqa: F401
    Action,
    ActionTaxonomy,
    AspectAggregate,
    BackendMode,
    BenchmarkSummary,
    CaseRecord,
    ConsultError,
    ConsultationState,
    CorpusMetrics,
    FiveScores,
    GoalUnmet,
    IcdIndex,
    MatchResult,
    Phase,
    RunConfig,
    ScoreAggregate,
    TransitionKind,
    aggregate_scores,
    apply_action,
    classify_transition,
    config_fingerprint,
    corpus_metrics,
    extract_entities,
    f1,
    initial_state,
    is_icd10_code,
    is_terminal,
    load_corpus,
    parse_action,
    render_action,
    run_benchmark,
)

__all__ = [name for name in dir() if not name.startswith("_")]
