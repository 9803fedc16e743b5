"""Evaluation metrics for the three experimental setups.

Correlation with human judgments, extraction quality and tuple-level AUC,
plus inter-annotator agreement and system-level ranking.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .backends import cosine
from .core import Relation, ScoredResponse
from .errors import ContractViolation, DegenerateInput

SUBSET_RELATIONS = frozenset(r.value for r in Relation)


def _pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractViolation("x and y must be 1-d and of equal length")
    if len(x) < 2:
        raise DegenerateInput("need at least two observations")
    return x, y


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInput("zero variance")
    return max(-1.0, min(1.0, float(dx @ dy) / (sx * sy)))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _pair(x, y)
    return pearson(average_ranks(x), average_ranks(y))


def iaa(rater_matrix: Sequence[Sequence[float]]) -> float:
    """Spearman between every annotation and the mean of the other
    annotations of the same sample, pooled over all samples."""
    annotations, others = [], []
    for i, scores in enumerate(rater_matrix):
        if len(scores) < 2:
            raise DegenerateInput(f"sample {i} has fewer than two ratings")
        total = float(sum(scores))
        for s in scores:
            annotations.append(float(s))
            others.append((total - s) / (len(scores) - 1))
    return spearman(annotations, others)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def _presence(per_sample) -> dict:
    return {sid: {str(t.relation) for t in tuples} for sid, tuples in per_sample.items()}


def extraction_f1(predicted: Mapping[str, Sequence], gold: Mapping[str, Sequence],
                  relations: Iterable[str] = SUBSET_RELATIONS) -> PRF:
    """Micro P/R/F1 over (sample, relation) presence cells.

    Samples present on only one side count as having no tuples on the other.
    """
    relations = set(relations)
    pred = _presence(predicted)
    ref = _presence(gold)
    tp = fp = fn = 0
    for sid in set(pred) | set(ref):
        p = pred.get(sid, set()) & relations
        g = ref.get(sid, set()) & relations
        tp += len(p & g)
        fp += len(p - g)
        fn += len(g - p)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1)


def tuple_to_text(tup) -> str:
    return f"{tup.head} {tup.tail}"


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu2(candidate: str, references: Sequence[str]) -> float:
    """Sentence BLEU with uniform unigram/bigram weights.

    Tokens are lowercased whitespace splits. When no candidate bigram
    matches, the bigram precision is add-one smoothed so short events are
    not zeroed out.
    """
    cand = candidate.lower().split() if candidate else []
    if not cand:
        raise DegenerateInput("candidate is empty")
    refs = [r.lower().split() for r in references]
    if not refs:
        raise ContractViolation("at least one reference is required")
    precisions = []
    for n in (1, 2):
        counts = _ngrams(cand, n)
        max_ref = Counter()
        for r in refs:
            for gram, c in _ngrams(r, n).items():
                max_ref[gram] = max(max_ref[gram], c)
        matched = sum(min(c, max_ref[g]) for g, c in counts.items())
        total = sum(counts.values())
        if n == 2 and matched == 0:
            matched, total = matched + 1, total + 1
        precisions.append(matched / total if total else 0.0)
    if min(precisions) == 0.0:
        return 0.0
    c = len(cand)
    r = min((abs(len(ref) - c), len(ref)) for ref in refs)[1]
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(0.5 * math.log(precisions[0]) + 0.5 * math.log(precisions[1]))


def embedding_similarity_eval(predicted: Sequence[str], gold: Sequence[str], embedder) -> float:
    if len(predicted) != len(gold):
        raise ContractViolation("predicted and gold must be aligned")
    if not predicted:
        raise DegenerateInput("no pairs to compare")
    sims = [max(0.0, cosine(embedder.embed(p), embedder.embed(g))) for p, g in zip(predicted, gold)]
    return fmean(sims)


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC; ties between a positive and a negative count one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ContractViolation("scores and labels must be aligned")
    if not set(np.unique(y).tolist()) <= {0, 1}:
        raise ContractViolation("labels must be 0 or 1")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInput("both classes must be present")
    rank_sum = float(average_ranks(s)[y == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def grouped_auc(triples: Sequence[tuple], relation_subset: Optional[Iterable] = None) -> float:
    """AUC over ``(labeled_triple, score)`` pairs whose relation is in the subset."""
    if relation_subset is not None:
        subset = {str(r) for r in relation_subset}
        triples = [(t, s) for t, s in triples if str(t.relation) in subset]
    if not triples:
        raise DegenerateInput("no triples left after relation filter")
    return roc_auc([s for _, s in triples], [t.label for t, _ in triples])


def system_ranking(scored: Sequence[ScoredResponse]) -> list[tuple[str, float]]:
    by_system = defaultdict(list)
    for r in scored:
        if r.system is None:
            raise ContractViolation(f"response {r.dialogue_id} has no system tag")
        by_system[r.system].append(r.score)
    means = [(name, fmean(v)) for name, v in by_system.items()]
    return sorted(means, key=lambda item: (-item[1], item[0]))
