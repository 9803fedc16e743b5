"""Joint event-relation extraction with a prompted seq2seq model.

For every relation the extractor sees the relation's prompt followed by
the dialogue and answers either ``event1: {head}; event2: {tail}`` or
``None``.
"""

from __future__ import annotations

import enum
import json
import logging
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .backends import DEFAULT_MAX_OUTPUT_TOKENS, GenerationRequest, Generator
from .core import (
    DEFAULT_MAX_HISTORY,
    Dialogue,
    EventRelationTuple,
    Locality,
    Relation,
    RelationSpec,
    default_relation_specs,
    truncate_history,
)
from .errors import BackendError, ContractViolation
from .text import content_words

log = logging.getLogger(__name__)

# Documented fine-tuning defaults for the external extractor training script.
TRAIN_EPOCHS = 50
TRAIN_BATCH_SIZE = 4
TRAIN_LEARNING_RATE = 5e-5
DEFAULT_NEGATIVES_PER_RELATION = 5


@dataclass(frozen=True)
class ExtractionConfig:
    """``speaker_labels`` relabels the serialized turns, counted backwards from
    the response, which always carries the last label. ``None`` keeps each
    utterance's own speaker tag."""

    relation_specs: tuple[RelationSpec, ...] = field(default_factory=lambda: tuple(default_relation_specs()))
    max_history: int = DEFAULT_MAX_HISTORY
    speaker_labels: Optional[tuple[str, ...]] = ("A", "B")
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    line_template: str = "{speaker}: {text}"

    def __post_init__(self):
        object.__setattr__(self, "relation_specs", tuple(self.relation_specs))
        if self.speaker_labels is not None:
            object.__setattr__(self, "speaker_labels", tuple(self.speaker_labels))
            if not self.speaker_labels:
                raise ContractViolation("speaker_labels must be non-empty or None")
        if self.max_history < 1:
            raise ContractViolation("max_history must be >= 1")
        relations = [s.relation for s in self.relation_specs]
        if sorted(relations) != sorted(Relation) or len(relations) != len(Relation):
            raise ContractViolation("relation_specs must hold exactly one spec per relation")


@dataclass(frozen=True)
class FormatError:
    """Generation output that is neither a well-formed pair nor ``None``."""

    raw: str


_PAIR = re.compile(
    r"^\s*event1\s*:\s*(?P<head>[^;\n]*?)\s*;\s*event2\s*:\s*(?P<tail>[^\n]*?)\s*$",
    re.IGNORECASE,
)


def render_extraction_output(head: str, tail: str) -> str:
    return f"event1: {head}; event2: {tail}"


def parse_extraction_output(raw: str) -> Union[tuple[str, str], None, FormatError]:
    """Parse one generated sequence.

    Returns ``(head, tail)`` for a well-formed pair, ``None`` when the model
    declined, and a :class:`FormatError` for anything else.
    """
    if raw is None:
        return FormatError("")
    if raw.strip().casefold() == "none":
        return None
    m = _PAIR.match(raw)
    if not m or not m.group("head") or not m.group("tail"):
        return FormatError(raw)
    return m.group("head"), m.group("tail")


def serialize_dialogue(dialogue: Dialogue, config: ExtractionConfig) -> str:
    turns = truncate_history(dialogue.history, config.max_history) + [dialogue.response]
    labels = config.speaker_labels
    lines = []
    for i, utt in enumerate(turns):
        if labels is None:
            speaker = utt.speaker
        else:
            speaker = labels[(len(labels) - len(turns) + i) % len(labels)]
        lines.append(config.line_template.format(speaker=speaker, text=" ".join(utt.text.split())))
    return "\n".join(lines)


def build_extraction_input(dialogue: Dialogue, spec: RelationSpec, config: ExtractionConfig) -> str:
    return f"{spec.prompt} {serialize_dialogue(dialogue, config)}"


def _matches(event: str, utterance_words: set[str], threshold: float) -> bool:
    words = content_words(event)
    if not words:
        return False
    return len(words & utterance_words) / len(words) >= threshold


def classify_locality(tup: EventRelationTuple, dialogue: Dialogue, threshold: float = 0.5) -> Locality:
    """Decide whether a tuple's events come from the response alone or span
    the response and the previous utterance, by content-word overlap."""
    if not 0 < threshold <= 1:
        raise ContractViolation("threshold must be in (0, 1]")
    response = content_words(dialogue.response.text)
    head_in_resp = _matches(tup.head, response, threshold)
    tail_in_resp = _matches(tup.tail, response, threshold)
    if head_in_resp and tail_in_resp:
        return Locality.Single
    if dialogue.previous is not None:
        previous = content_words(dialogue.previous.text)
        if (head_in_resp and _matches(tup.tail, previous, threshold)) or (
            tail_in_resp and _matches(tup.head, previous, threshold)
        ):
            return Locality.Pair
    return Locality.External


def extract_tuples(dialogue: Dialogue, generator: Generator, config: Optional[ExtractionConfig] = None) -> list[EventRelationTuple]:
    config = config or ExtractionConfig()
    tuples = []
    for spec in config.relation_specs:
        request = GenerationRequest(
            build_extraction_input(dialogue, spec, config),
            num_return_sequences=1,
            max_output_tokens=config.max_output_tokens,
        )
        try:
            result = generator.generate(request)
        except BackendError as exc:
            exc.relation = spec.relation
            exc.args = (f"{spec.relation}: {exc.args[0] if exc.args else exc}",)
            raise
        if not result.sequences:
            continue
        parsed = parse_extraction_output(result.sequences[0])
        if parsed is None or isinstance(parsed, FormatError):
            if isinstance(parsed, FormatError):
                log.debug("discarding malformed %s output for %s: %r", spec.relation, dialogue.id, parsed.raw)
            continue
        head, tail = parsed
        tup = EventRelationTuple(head, spec.relation, tail)
        tuples.append(EventRelationTuple(head, spec.relation, tail, classify_locality(tup, dialogue)))
    return tuples


class LocalityFilter(str, enum.Enum):
    SingleOnly = "SingleOnly"
    PairOnly = "PairOnly"
    Both = "Both"


@dataclass(frozen=True)
class TrainingExample:
    source_text: str
    target_text: str
    relation: Relation
    is_negative: bool

    def __post_init__(self):
        if self.is_negative != (self.target_text == "None"):
            raise ContractViolation("negative examples must target 'None' and only they may")

    def to_json(self) -> dict:
        return {"source": self.source_text, "target": self.target_text,
                "relation": self.relation.value, "negative": self.is_negative}


@dataclass
class TrainingSet:
    examples: list[TrainingExample]
    # relation -> how many negatives were requested but unavailable
    shortfall: dict[Relation, int]

    @property
    def warnings(self) -> int:
        return sum(1 for v in self.shortfall.values() if v)

    def counts(self) -> dict[Relation, int]:
        out = {r: 0 for r in Relation}
        for ex in self.examples:
            out[ex.relation] += 1
        return out


def _keep(tup, dialogue, locality_filter):
    if locality_filter in (None, LocalityFilter.Both):
        return True
    loc = tup.locality or classify_locality(tup, dialogue)
    if locality_filter == LocalityFilter.SingleOnly:
        return loc == Locality.Single
    return loc == Locality.Pair


def prepare_training_examples(
    samples: Sequence[tuple[Dialogue, Sequence[EventRelationTuple]]],
    config: Optional[ExtractionConfig] = None,
    negatives_per_relation: int = DEFAULT_NEGATIVES_PER_RELATION,
    locality_filter: Optional[LocalityFilter] = None,
    seed: int = 0,
) -> TrainingSet:
    """Build extractor fine-tuning data from gold tuples.

    Each surviving gold tuple becomes a positive example. For every
    relation, ``negatives_per_relation`` dialogues without any gold tuple of
    that relation are drawn with a seeded RNG and given the target ``None``.
    """
    if negatives_per_relation < 0:
        raise ContractViolation("negatives_per_relation must be >= 0")
    config = config or ExtractionConfig()
    if locality_filter is not None:
        locality_filter = LocalityFilter(locality_filter)
    examples = []
    shortfall = {}
    for spec in config.relation_specs:
        rel = spec.relation
        lacking = []
        for dialogue, gold in samples:
            matching = [t for t in gold if t.relation == rel]
            if not matching:
                lacking.append(dialogue)
            for tup in matching:
                if _keep(tup, dialogue, locality_filter):
                    examples.append(TrainingExample(
                        build_extraction_input(dialogue, spec, config),
                        render_extraction_output(tup.head, tup.tail), rel, False))
        rng = random.Random(f"{seed}:{rel.value}")
        n = min(negatives_per_relation, len(lacking))
        shortfall[rel] = negatives_per_relation - n
        if shortfall[rel]:
            log.warning("only %d negatives available for %s (wanted %d)", n, rel, negatives_per_relation)
        for dialogue in rng.sample(lacking, n):
            examples.append(TrainingExample(build_extraction_input(dialogue, spec, config), "None", rel, True))
    return TrainingSet(examples, shortfall)


def dump_training_examples(examples: Iterable[TrainingExample]) -> str:
    return "".join(json.dumps(ex.to_json(), sort_keys=True, ensure_ascii=False) + "\n" for ex in examples)
