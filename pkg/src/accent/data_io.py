"""JSONL loading, validation and corpus filtering."""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Iterable, Iterator, Optional, Sequence

from .core import DEFAULT_MAX_HISTORY, Dialogue, EventRelationTuple, Relation, Utterance, truncate_history
from .errors import AccentError, ContractViolation, LoadError
from .metrics import SUBSET_RELATIONS
from .search import StaticCSKB

HEADER_KEY = "__header__"


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, non-ASCII kept as UTF-8."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)``; blank lines and header records are skipped."""
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot open: {exc.strerror or exc}", path=path) from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(f"invalid JSON ({exc.msg})", lineno, path) from None
            if not isinstance(obj, dict):
                raise LoadError("expected a JSON object", lineno, path)
            if HEADER_KEY in obj:
                continue
            yield lineno, obj


def _require(obj, key, kind, lineno, path):
    if key not in obj:
        raise LoadError(f"missing required field {key!r}", lineno, path)
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise LoadError(f"field {key!r} has the wrong type", lineno, path)
    return value


def _utterance(obj, lineno, path):
    if not isinstance(obj, dict):
        raise LoadError("utterance must be an object", lineno, path)
    speaker = _require(obj, "speaker", str, lineno, path)
    text = _require(obj, "text", str, lineno, path)
    try:
        return Utterance(speaker, text)
    except ContractViolation as exc:
        raise LoadError(str(exc), lineno, path) from None


def dialogue_from_json(obj, lineno=None, path=None) -> Dialogue:
    did = _require(obj, "id", str, lineno, path)
    history = _require(obj, "history", list, lineno, path)
    response = _require(obj, "response", dict, lineno, path)
    for key in ("system", "source"):
        if obj.get(key) is not None and not isinstance(obj[key], str):
            raise LoadError(f"field {key!r} has the wrong type", lineno, path)
    return Dialogue(
        did,
        tuple(_utterance(u, lineno, path) for u in history),
        _utterance(response, lineno, path),
        obj.get("system"),
        obj.get("source"),
    )


def dialogue_to_json(d: Dialogue) -> dict:
    out = {
        "id": d.id,
        "history": [{"speaker": u.speaker, "text": u.text} for u in d.history],
        "response": {"speaker": d.response.speaker, "text": d.response.text},
    }
    if d.system is not None:
        out["system"] = d.system
    if d.source is not None:
        out["source"] = d.source
    return out


def load_dialogues(path) -> list[Dialogue]:
    seen = {}
    out = []
    for lineno, obj in iter_jsonl(path):
        d = dialogue_from_json(obj, lineno, path)
        if d.id in seen:
            raise LoadError(f"duplicate id {d.id!r} (first on line {seen[d.id]})", lineno, path)
        seen[d.id] = lineno
        out.append(d)
    return out


def save_jsonl(path, records: Iterable[dict], header: Optional[dict] = None):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        if header is not None:
            fh.write(dumps({HEADER_KEY: header}) + "\n")
        for rec in records:
            fh.write(dumps(rec) + "\n")


def save_dialogues(path, dialogues: Iterable[Dialogue], header: Optional[dict] = None):
    save_jsonl(path, (dialogue_to_json(d) for d in dialogues), header)


@dataclass(frozen=True)
class Annotation:
    """Human scores for one sample; joined to its dialogue by ``id``."""

    id: str
    scores: tuple[float, ...]

    @property
    def mean(self) -> float:
        return fmean(self.scores)


def load_annotations(path) -> list[Annotation]:
    out = []
    for lineno, obj in iter_jsonl(path):
        aid = _require(obj, "id", str, lineno, path)
        scores = _require(obj, "scores", list, lineno, path)
        if not scores:
            raise LoadError("scores must be non-empty", lineno, path)
        for s in scores:
            if isinstance(s, bool) or not isinstance(s, (int, float)):
                raise LoadError("scores must be numbers", lineno, path)
            if not 1 <= s <= 5:
                raise LoadError(f"score {s} outside [1, 5]", lineno, path)
        out.append(Annotation(aid, tuple(float(s) for s in scores)))
    return out


def _tuple(obj, lineno, path, with_locality=True):
    head = _require(obj, "head", str, lineno, path)
    rel = _require(obj, "relation", str, lineno, path)
    tail = _require(obj, "tail", str, lineno, path)
    locality = obj.get("locality") if with_locality else None
    if locality is not None and locality not in ("Single", "Pair", "External"):
        raise LoadError(f"unknown locality {locality!r}", lineno, path)
    if rel not in SUBSET_RELATIONS:
        raise LoadError(f"unknown relation {rel!r}", lineno, path)
    try:
        return EventRelationTuple(head, Relation(rel), tail, locality)
    except AccentError as exc:
        raise LoadError(str(exc), lineno, path) from None


def tuple_to_json(tup: EventRelationTuple, sample_id: Optional[str] = None) -> dict:
    out = {"head": tup.head, "relation": tup.relation.value, "tail": tup.tail}
    if sample_id is not None:
        out["id"] = sample_id
    if tup.locality is not None:
        out["locality"] = tup.locality.value
    return out


def load_gold_tuples(path) -> dict[str, list[EventRelationTuple]]:
    """Tuples grouped by sample id, in file order."""
    out = defaultdict(list)
    for lineno, obj in iter_jsonl(path):
        sid = _require(obj, "id", str, lineno, path)
        out[sid].append(_tuple(obj, lineno, path))
    return dict(out)


def load_kb(path) -> StaticCSKB:
    return StaticCSKB(_tuple(obj, lineno, path, with_locality=False) for lineno, obj in iter_jsonl(path))


@dataclass(frozen=True)
class LabeledTriple:
    """A benchmark triple. ``relation`` stays a plain string because the
    benchmark carries relations beyond the twelve scored ones."""

    head: str
    relation: str
    tail: str
    label: int

    @property
    def in_subset(self) -> bool:
        return self.relation in SUBSET_RELATIONS


def load_labeled_triples(path, strict: bool = False) -> list[LabeledTriple]:
    """Load benchmark triples; ``strict`` rejects relations outside the twelve."""
    out = []
    for lineno, obj in iter_jsonl(path):
        head = _require(obj, "head", str, lineno, path)
        rel = _require(obj, "relation", str, lineno, path)
        tail = _require(obj, "tail", str, lineno, path)
        label = obj.get("label")
        if label not in (0, 1) or isinstance(label, bool):
            raise LoadError("label must be 0 or 1", lineno, path)
        if not head.strip() or not tail.strip():
            raise LoadError("head and tail must be non-empty", lineno, path)
        if strict and rel not in SUBSET_RELATIONS:
            raise LoadError(f"unknown relation {rel!r}", lineno, path)
        out.append(LabeledTriple(head, rel, tail, int(label)))
    return out


@dataclass(frozen=True)
class CorpusFilterConfig:
    min_response_words: int = 5
    require_non_interrogative: bool = True
    max_history: int = DEFAULT_MAX_HISTORY
    blocklist: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.min_response_words < 1:
            raise ContractViolation("min_response_words must be >= 1")
        if self.max_history < 1:
            raise ContractViolation("max_history must be >= 1")
        object.__setattr__(self, "blocklist", frozenset(self.blocklist))


_SENTENCE_END = re.compile(r"(?<=[.!?])(?:\s+|$)")


def split_sentences(text: str) -> list[str]:
    return [s for s in (p.strip() for p in _SENTENCE_END.split(text.strip())) if s]


def rejection_reason(d: Dialogue, config: CorpusFilterConfig) -> Optional[str]:
    if d.id in config.blocklist:
        return "blocklisted"
    if config.require_non_interrogative and all(s.endswith("?") for s in split_sentences(d.response.text)):
        return "all_interrogative"
    if len(d.response.text.split()) < config.min_response_words:
        return "min_words"
    return None


def filter_corpus(dialogues: Sequence[Dialogue], config: Optional[CorpusFilterConfig] = None):
    """Split dialogues into ``(kept, rejected)``; rejected holds ``(dialogue, reason)``.

    Kept dialogues have their history truncated to ``config.max_history``.
    """
    config = config or CorpusFilterConfig()
    kept, rejected = [], []
    for d in dialogues:
        reason = rejection_reason(d, config)
        if reason is None:
            kept.append(Dialogue(d.id, tuple(truncate_history(d.history, config.max_history)),
                                 d.response, d.system, d.source))
        else:
            rejected.append((d, reason))
    return kept, rejected


@dataclass(frozen=True)
class AnnotatedSample:
    dialogue: Dialogue
    rater_scores: tuple[float, ...]
    gold_tuples: Optional[tuple[EventRelationTuple, ...]] = None

    def __post_init__(self):
        if any(not 1 <= s <= 5 for s in self.rater_scores):
            raise ContractViolation("rater scores must lie in [1, 5]")

    @property
    def mean_score(self) -> float:
        return fmean(self.rater_scores)


def join_annotations(dialogues: Sequence[Dialogue], annotations: Sequence[Annotation],
                     gold: Optional[dict] = None) -> list[AnnotatedSample]:
    """Attach human scores (and gold tuples, if given) to dialogues by id.

    Dialogues without an annotation are dropped.
    """
    by_id = {a.id: a for a in annotations}
    out = []
    for d in dialogues:
        if d.id not in by_id:
            continue
        tuples = tuple(gold.get(d.id, ())) if gold is not None else None
        out.append(AnnotatedSample(d, by_id[d.id].scores, tuples))
    return out
