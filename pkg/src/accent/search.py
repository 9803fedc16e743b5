"""Keyword-search baseline over a static commonsense knowledge base.

A concept set of nouns, verbs and adjectives is built from the utterances,
and every stored tuple whose head and tail both mention a concept is
returned.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .core import EventRelationTuple
from .text import CONTENT_TAGS, STOPWORDS, content_words, default_tagger, lemmatize, tokenize

Tagger = Callable[[list[str]], list[tuple[str, str]]]
Lemmatizer = Callable[[str], str]


@dataclass(frozen=True)
class ConceptSet:
    words: frozenset[str]

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(sorted(self.words))


def build_concept_set(utterances: Sequence[str], tagger: Tagger = default_tagger,
                      stopwords: Iterable[str] = STOPWORDS, lemmatizer: Lemmatizer = lemmatize) -> ConceptSet:
    stop = frozenset(w.lower() for w in stopwords)
    words = set()
    for utt in utterances:
        for tok, tag in tagger(tokenize(utt or "")):
            if tag not in CONTENT_TAGS or tok in stop:
                continue
            lemma = lemmatizer(tok).lower()
            if lemma and lemma not in stop:
                words.add(lemma)
    return ConceptSet(frozenset(words))


class StaticCSKB:
    """An immutable tuple store with per-side inverted indexes."""

    def __init__(self, tuples: Iterable[EventRelationTuple], lemmatizer: Lemmatizer = lemmatize,
                 stopwords: Iterable[str] = STOPWORDS):
        self.tuples = tuple(tuples)
        self._lemmatizer = lemmatizer
        self._stopwords = frozenset(stopwords)
        self.head_index: dict[str, set[int]] = defaultdict(set)
        self.tail_index: dict[str, set[int]] = defaultdict(set)
        for i, tup in enumerate(self.tuples):
            self._add(i, tup)
        self.head_index = dict(self.head_index)
        self.tail_index = dict(self.tail_index)

    def _words(self, text):
        return content_words(text, self._stopwords, self._lemmatizer)

    def _add(self, i, tup):
        for w in self._words(tup.head):
            self.head_index[w].add(i)
        for w in self._words(tup.tail):
            self.tail_index[w].add(i)

    @property
    def index(self) -> dict[str, set[int]]:
        """Combined word -> tuple ids map over heads and tails."""
        merged = {w: set(ids) for w, ids in self.head_index.items()}
        for w, ids in self.tail_index.items():
            merged.setdefault(w, set()).update(ids)
        return merged

    def extended(self, extra: Iterable[EventRelationTuple]) -> "StaticCSKB":
        """Return a new store with ``extra`` appended, indexing only the new tuples."""
        new = object.__new__(StaticCSKB)
        new._lemmatizer, new._stopwords = self._lemmatizer, self._stopwords
        new.head_index = defaultdict(set, {w: set(ids) for w, ids in self.head_index.items()})
        new.tail_index = defaultdict(set, {w: set(ids) for w, ids in self.tail_index.items()})
        extra = tuple(extra)
        for offset, tup in enumerate(extra):
            new._add(len(self.tuples) + offset, tup)
        new.tuples = self.tuples + extra
        new.head_index, new.tail_index = dict(new.head_index), dict(new.tail_index)
        return new

    def __len__(self):
        return len(self.tuples)


def search_tuples(kb: StaticCSKB, concepts: ConceptSet) -> list[EventRelationTuple]:
    heads, tails = set(), set()
    for w in concepts.words:
        heads |= kb.head_index.get(w, set())
        tails |= kb.tail_index.get(w, set())
    return [kb.tuples[i] for i in sorted(heads & tails)]
