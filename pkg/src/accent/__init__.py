"""Reference-free event commonsense scoring for dialogue responses."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Dialogue,
    EventRelationTuple,
    Locality,
    Relation,
    RelationSpec,
    ScoredResponse,
    ScoredTuple,
    Utterance,
    default_relation_specs,
    normalize_event,
    truncate_history,
)
from .pipeline import PipelineConfig, score_corpus, score_response  # noqa: E402

__all__ = [
    "Dialogue", "EventRelationTuple", "Locality", "Relation", "RelationSpec", "ScoredResponse",
    "ScoredTuple", "Utterance", "default_relation_specs", "normalize_event", "truncate_history",
    "PipelineConfig", "score_corpus", "score_response",
]
