"""Domain types and small pure helpers used by every other module."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .errors import ContractViolation, EmptyEvent

DEFAULT_MAX_HISTORY = 4
PROMPT_STEM = "Extract event1 and event2 from the text where"


class Relation(str, enum.Enum):
    """The twelve ATOMIC-2020 relations scored by the metric.

    Declaration order is the fixed iteration order used by extraction.
    """

    xIntent = "xIntent"
    xWant = "xWant"
    oWant = "oWant"
    xReact = "xReact"
    oReact = "oReact"
    xNeed = "xNeed"
    xAttr = "xAttr"
    xEffect = "xEffect"
    oEffect = "oEffect"
    HinderedBy = "HinderedBy"
    IsAfter = "IsAfter"
    HasSubEvent = "HasSubEvent"

    def __str__(self):
        return self.value


RELATIONS = tuple(Relation)


def parse_relation(name: str) -> Relation:
    try:
        return Relation(name)
    except ValueError:
        raise ContractViolation(f"unknown relation {name!r}") from None


class Locality(str, enum.Enum):
    Single = "Single"
    Pair = "Pair"
    External = "External"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RelationSpec:
    relation: Relation
    prompt: str
    query_phrase: str


# (relation, semantic meaning, prompt suffix)
_PROMPT_TABLE = {
    Relation.xIntent: ("because PersonX wanted", "event2 shows PersonX's intent for event1."),
    Relation.xWant: ("as a result, PersonX wants", "event2 shows what PersonX wants after event1 happens."),
    Relation.oWant: ("as a result, Y or others wants", "event2 shows what PersonY wants after event1 happens."),
    Relation.xReact: ("as a result, PersonX feels", "event2 shows how PersonX reacts to event1."),
    Relation.oReact: ("as a result, Y or others feels", "event2 shows how PersonY reacts to event1."),
    Relation.xNeed: ("but before, PersonX needed", "event2 needs to be true for event1 to take place."),
    Relation.xAttr: ("X is seen as", "event2 shows how PersonX is viewed as after event1."),
    Relation.xEffect: ("as a result, PersonX will", "event2 shows the effect of event1 on PersonX."),
    Relation.oEffect: ("as a result, Y or others will", "event2 shows the effect of event1 on PersonY."),
    Relation.HinderedBy: ("can be hindered by", "event1 fails to happen because event2."),
    Relation.IsAfter: ("happens after", "event1 happens after event2."),
    Relation.HasSubEvent: ("includes the event/action", "event1 includes event2."),
}


def default_relation_specs() -> list[RelationSpec]:
    """Return the extraction prompt for every relation, in ``Relation`` order."""
    return [
        RelationSpec(rel, f"{PROMPT_STEM} {_PROMPT_TABLE[rel][1]}", _PROMPT_TABLE[rel][0])
        for rel in RELATIONS
    ]


@dataclass(frozen=True)
class Utterance:
    speaker: str
    text: str

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise ContractViolation("utterance text must be non-empty")


@dataclass(frozen=True)
class Dialogue:
    """A dialogue history ``u_0..u_{n-1}`` and the response ``u_n`` being scored.

    The history is not truncated on construction; raw corpora often carry
    longer contexts and truncation happens at filtering or serialization time.
    """

    id: str
    history: tuple[Utterance, ...]
    response: Utterance
    system: Optional[str] = None
    source: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))

    @property
    def previous(self) -> Optional[Utterance]:
        return self.history[-1] if self.history else None


@dataclass(frozen=True)
class EventRelationTuple:
    head: str
    relation: Relation
    tail: str
    locality: Optional[Locality] = None

    def __post_init__(self):
        for name in ("head", "tail"):
            text = getattr(self, name)
            if not isinstance(text, str) or not text.strip():
                raise EmptyEvent(f"tuple {name} must be non-empty")
            if "\n" in text or "\r" in text:
                raise ContractViolation(f"tuple {name} contains a newline")
        if not isinstance(self.relation, Relation):
            object.__setattr__(self, "relation", parse_relation(self.relation))
        if self.locality is not None and not isinstance(self.locality, Locality):
            object.__setattr__(self, "locality", Locality(self.locality))


@dataclass(frozen=True)
class ScoredTuple:
    tuple: EventRelationTuple
    score: float
    best_generated_tail: str
    candidate_tails: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScoredResponse:
    dialogue_id: str
    score: float
    tuples: tuple[ScoredTuple, ...] = ()
    used_fallback: bool = False
    system: Optional[str] = None


def truncate_history(history: Sequence[Utterance], max_history: int = DEFAULT_MAX_HISTORY) -> list[Utterance]:
    if max_history < 1:
        raise ContractViolation("max_history must be >= 1")
    return list(history[-max_history:])


FIRST_PERSON = ("i", "me", "my", "mine", "we", "our")
SECOND_PERSON = ("you", "your")

DEFAULT_SPEAKER_MAP = {"first": "PersonX", "second": "PersonY"}

_PRONOUN_CLASSES = {"first": FIRST_PERSON, "second": SECOND_PERSON}


def _substitution_table(speaker_map: Mapping[str, str]) -> dict[str, str]:
    table = {}
    for key, variable in speaker_map.items():
        words = _PRONOUN_CLASSES.get(key, (key,))
        for word in words:
            table[word.lower()] = variable
    return table


def normalize_event(raw: str, speaker_map: Optional[Mapping[str, str]] = None) -> str:
    """Replace tokens referring to people with Person variables.

    ``speaker_map`` maps a pronoun class (``"first"``, ``"second"``) or any
    other literal token, e.g. a name or third-person pronoun, to the variable
    it stands for. Classes absent from the map keep their default variable.
    Verbs are not re-inflected.
    """
    if raw is None or not raw.strip():
        raise EmptyEvent("event text is empty")
    mapping = dict(DEFAULT_SPEAKER_MAP)
    if speaker_map:
        mapping.update(speaker_map)
    table = _substitution_table(mapping)

    def sub(match):
        return table.get(match.group(0).lower(), match.group(0))

    pattern = r"\b(?:" + "|".join(re.escape(w) for w in sorted(table, key=len, reverse=True)) + r")\b"
    text = re.sub(pattern, sub, raw, flags=re.IGNORECASE)
    return " ".join(text.split())
