"""End-to-end scoring: extract tuples, test each one, average."""

from __future__ import annotations

import enum
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import fmean
from typing import Optional, Sequence, Union

from .backends import Embedder, Generator
from .compatibility import CompatibilityConfig, clamp_score, max_similarity, query_tails
from .core import Dialogue, Locality, ScoredResponse, ScoredTuple
from .errors import AccentError, BackendError, ContractViolation
from .extraction import ExtractionConfig, extract_tuples


class LocalityPolicy(str, enum.Enum):
    ScoreAll = "ScoreAll"
    SingleOnly = "SingleOnly"
    PairOnly = "PairOnly"


@dataclass(frozen=True)
class PipelineConfig:
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    compatibility: CompatibilityConfig = field(default_factory=CompatibilityConfig)
    fallback_score: float = 0.5
    locality_policy: LocalityPolicy = LocalityPolicy.ScoreAll

    def __post_init__(self):
        if not 0.0 <= self.fallback_score <= 1.0:
            raise ContractViolation("fallback_score must lie in [0, 1]")
        object.__setattr__(self, "locality_policy", LocalityPolicy(self.locality_policy))


def _apply_policy(tuples, policy):
    if policy == LocalityPolicy.SingleOnly:
        return [t for t in tuples if t.locality == Locality.Single]
    if policy == LocalityPolicy.PairOnly:
        return [t for t in tuples if t.locality == Locality.Pair]
    return list(tuples)


def score_tuples(tuples, cskb: Generator, embedder: Embedder, config: CompatibilityConfig) -> list[ScoredTuple]:
    scored = []
    for tup in tuples:
        tails = query_tails(tup.head, tup.relation, cskb, config)
        sim, best = max_similarity(tup.tail, tails, embedder)
        scored.append(ScoredTuple(tup, clamp_score(sim, config), tails[best], tuple(tails)))
    return scored


def score_response(dialogue: Dialogue, extractor: Generator, cskb: Generator, embedder: Embedder,
                   config: Optional[PipelineConfig] = None) -> ScoredResponse:
    config = config or PipelineConfig()
    try:
        tuples = _apply_policy(extract_tuples(dialogue, extractor, config.extraction), config.locality_policy)
        if not tuples:
            return ScoredResponse(dialogue.id, config.fallback_score, (), True, dialogue.system)
        scored = score_tuples(tuples, cskb, embedder, config.compatibility)
    except BackendError as exc:
        exc.dialogue_id = dialogue.id
        exc.args = (f"dialogue {dialogue.id}: {exc.args[0] if exc.args else exc}",)
        raise
    return ScoredResponse(dialogue.id, fmean(s.score for s in scored), tuple(scored), False, dialogue.system)


@dataclass(frozen=True)
class FailedSample:
    dialogue_id: str
    error: str


@dataclass
class CorpusResult:
    entries: list[Union[ScoredResponse, FailedSample]]

    @property
    def scored(self) -> list[ScoredResponse]:
        return [e for e in self.entries if isinstance(e, ScoredResponse)]

    @property
    def failures(self) -> list[FailedSample]:
        return [e for e in self.entries if isinstance(e, FailedSample)]

    def summary(self) -> dict:
        scored = self.scored
        return {
            "n": len(self.entries),
            "scored": len(scored),
            "failures": len(self.failures),
            "mean_score": fmean(s.score for s in scored) if scored else None,
            "fallback_rate": (sum(s.used_fallback for s in scored) / len(scored)) if scored else None,
        }


class _Serialized:
    """Lock-guarded proxy for a backend that is not safe to share."""

    concurrency_safe = True

    def __init__(self, backend):
        self._backend = backend
        self._lock = threading.Lock()

    def __getattr__(self, name):
        attr = getattr(self._backend, name)
        if not callable(attr):
            return attr

        def call(*args, **kwargs):
            with self._lock:
                return attr(*args, **kwargs)

        return call


def _shareable(backend):
    return backend if getattr(backend, "concurrency_safe", False) else _Serialized(backend)


def score_corpus(dialogues: Sequence[Dialogue], extractor: Generator, cskb: Generator, embedder: Embedder,
                 config: Optional[PipelineConfig] = None, parallelism: int = 1) -> CorpusResult:
    """Score every dialogue, keeping input order and isolating failures."""
    if parallelism < 1:
        raise ContractViolation("parallelism must be >= 1")
    config = config or PipelineConfig()

    def one(d, ext, kb, emb):
        try:
            return score_response(d, ext, kb, emb, config)
        except AccentError as exc:
            return FailedSample(d.id, str(exc))

    if parallelism == 1:
        return CorpusResult([one(d, extractor, cskb, embedder) for d in dialogues])
    ext, kb, emb = _shareable(extractor), _shareable(cskb), _shareable(embedder)
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        entries = list(pool.map(lambda d: one(d, ext, kb, emb), dialogues))
    return CorpusResult(entries)


def scored_response_to_json(entry: Union[ScoredResponse, FailedSample]) -> dict:
    if isinstance(entry, FailedSample):
        return {"id": entry.dialogue_id, "error": entry.error}
    out = {
        "id": entry.dialogue_id,
        "score": entry.score,
        "fallback": entry.used_fallback,
        "tuples": [
            {
                "head": s.tuple.head,
                "relation": s.tuple.relation.value,
                "tail": s.tuple.tail,
                "locality": s.tuple.locality.value if s.tuple.locality else None,
                "score": s.score,
                "best_tail": s.best_generated_tail,
            }
            for s in entry.tuples
        ],
    }
    if entry.system is not None:
        out["system"] = entry.system
    return out


def dumps_scored(entry) -> str:
    return json.dumps(scored_response_to_json(entry), sort_keys=True, ensure_ascii=False)
