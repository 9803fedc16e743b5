"""Compatibility test of a tuple against a dynamic commonsense knowledge base.

The knowledge-base model is asked for tails given ``{head} {relation} [GEN]``;
the tuple's score is the best cosine similarity between its own tail and
any of the beam outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .backends import DEFAULT_MAX_OUTPUT_TOKENS, Embedder, GenerationRequest, Generator, cosine
from .core import Relation
from .errors import ContractViolation, EmptyGeneration

DEFAULT_QUERY_TEMPLATE = "{h} {r} [GEN]"


@dataclass(frozen=True)
class CompatibilityConfig:
    beam_size: int = 10
    clamp_floor: float = 0.0
    query_template: str = DEFAULT_QUERY_TEMPLATE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self):
        if self.beam_size < 1:
            raise ContractViolation("beam_size must be >= 1")
        if not -1.0 <= self.clamp_floor <= 1.0:
            raise ContractViolation("clamp_floor must lie in [-1, 1]")


def build_cskb_query(head: str, relation, config: Optional[CompatibilityConfig] = None) -> str:
    config = config or CompatibilityConfig()
    rel = relation.value if isinstance(relation, Relation) else str(relation)
    return " ".join(config.query_template.format(h=" ".join(head.split()), r=rel).split())


def query_tails(head: str, relation, generator: Generator, config: Optional[CompatibilityConfig] = None) -> list[str]:
    config = config or CompatibilityConfig()
    request = GenerationRequest(
        build_cskb_query(head, relation, config),
        num_return_sequences=config.beam_size,
        max_output_tokens=config.max_output_tokens,
    )
    result = generator.generate(request)
    tails = [s.strip() for s in result.sequences[: config.beam_size] if s and s.strip()]
    if not tails:
        raise EmptyGeneration(f"no tails generated for {request.input_text!r}")
    return tails


def max_similarity(tail: str, candidate_tails: Sequence[str], embedder: Embedder) -> tuple[float, int]:
    """Raw best cosine between ``tail`` and the candidates, with its index.

    The first candidate wins ties.
    """
    if not candidate_tails:
        raise ContractViolation("candidate_tails must be non-empty")
    target = embedder.embed(tail)
    best, best_i = -math.inf, -1
    for i, cand in enumerate(candidate_tails):
        sim = cosine(target, embedder.embed(cand))
        if sim > best:
            best, best_i = sim, i
    return best, best_i


def clamp_score(similarity: float, config: Optional[CompatibilityConfig] = None) -> float:
    floor = (config or CompatibilityConfig()).clamp_floor
    return min(1.0, max(0.0, floor, similarity))


def compatibility_score(tail: str, candidate_tails: Sequence[str], embedder: Embedder,
                        config: Optional[CompatibilityConfig] = None) -> float:
    sim, _ = max_similarity(tail, candidate_tails, embedder)
    return clamp_score(sim, config)


def neural_loss_score(loss: float) -> float:
    """Map a generation loss to (0, 1] as ``exp(-loss)``."""
    if loss is None or math.isnan(loss) or loss < 0:
        raise ContractViolation("loss must be a non-negative number")
    return math.exp(-loss)


def neural_tuple_score(head: str, relation, tail: str, scorer, config: Optional[CompatibilityConfig] = None) -> float:
    """Score a tuple by the knowledge-base model's loss on ``tail``.

    ``scorer`` needs a ``loss(source, target)`` method; the tail is never
    decoded.
    """
    return neural_loss_score(scorer.loss(build_cskb_query(head, relation, config), tail))
