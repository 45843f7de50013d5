"""Downstream pipelines: statement verification, context pruning, poison flags."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Sequence

from .ablation import AblationVector, ablate, restrict
from .errors import EmptySelection
from .providers.base import Prompt, ScoredContinuation, ScoredGenerationProvider
from .segmentation import SourcePartition
from .surrogate import AttributionResult, attribute, top_k

YES_NO_PROMPT_TEMPLATE = (
    "Context: {context}\n\n"
    'Can we conclude that "{statement}"? Please respond with just yes or no.'
)

_YES_NO_SLOTS = re.compile(r"\{context\}|\{statement\}")


def fill_yes_no_prompt(context: str, statement: str) -> str:
    return _YES_NO_SLOTS.sub(
        lambda m: context if m.group() == "{context}" else statement,
        YES_NO_PROMPT_TEMPLATE,
    )


@dataclass(frozen=True)
class VerificationResult:
    """Two-way renormalized probability of the model answering yes."""

    score: float
    used_source_indices: tuple[int, ...]
    merged_statement: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")

    def to_json_dict(self) -> dict:
        return {
            "score": self.score,
            "usedSourceIndices": list(self.used_source_indices),
            "mergedStatement": self.merged_statement,
        }


@dataclass(frozen=True)
class PoisonFlagReport:
    """Highest-scoring sources flagged for manual inspection."""

    flagged: tuple[int, ...]
    k: int

    def to_json_dict(self) -> dict:
        return {
            "flagged": list(self.flagged),
            "k": self.k,
            "ranks": {str(idx): rank + 1 for rank, idx in enumerate(self.flagged)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def select_top_k_vector(
    partition: SourcePartition, scores: Sequence[float], k: int
) -> AblationVector:
    """Inclusion vector for the top-k sources, widened to whole groups.

    When the partition carries groups (documents), any group containing a
    top-k source contributes all of its members, so the model sees complete
    documents; ungrouped sources stay as-is.
    """
    selected = set(top_k(scores, k))
    if partition.groups:
        for group in partition.groups:
            if selected.intersection(group.member_indices):
                selected.update(group.member_indices)
    return AblationVector.from_included(partition.d, sorted(selected))


def verify_statement(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    scores: Sequence[float],
    k: int,
    question: str,
    answer: str,
    max_tokens: int = 64,
    seed: int | None = None,
) -> VerificationResult:
    """Ask the model whether its own answer follows from its top-k sources.

    Merges the question/answer into a self-contained statement, prunes the
    context to the top-k sources (whole documents when grouped), then scores
    the forced continuations "yes" and "no" and renormalizes over the pair,
    making the score independent of mass assigned to other tokens.
    """
    if k < 1:
        raise EmptySelection("verification needs k >= 1 sources")
    merged = provider.merge_question_answer(question, answer, max_tokens=max_tokens, seed=seed)
    vector = select_top_k_vector(partition, scores, k)
    pruned_context = ablate(partition, vector)
    prompt = fill_yes_no_prompt(pruned_context, merged)
    log_yes = provider.score_forced(prompt, [], ["yes"]).total_log_prob
    log_no = provider.score_forced(prompt, [], ["no"]).total_log_prob
    score = 1.0 / (1.0 + math.exp(log_no - log_yes))
    return VerificationResult(
        score=score,
        used_source_indices=tuple(vector.included_indices()),
        merged_statement=merged,
    )


@dataclass(frozen=True)
class PruneResult:
    first_response: ScoredContinuation
    new_response: ScoredContinuation
    pruned_partition: SourcePartition
    pruned_context: str
    attribution: AttributionResult


def prune_and_regenerate(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    k: int,
    n: int = 32,
    lam: float = 0.01,
    seed: int = 0,
    max_tokens: int = 256,
    max_in_flight: int = 8,
) -> PruneResult:
    """Generate, attribute the whole response, keep top-k sources, regenerate."""
    if k < 1:
        raise EmptySelection("pruning needs k >= 1 sources")
    full_prompt = Prompt(ablate(partition, AblationVector.ones(partition.d)), query, template)
    first = provider.generate(full_prompt, max_tokens=max_tokens, seed=seed)
    result = attribute(
        provider, partition, template, query, list(first.tokens),
        n=n, lam=lam, seed=seed, max_in_flight=max_in_flight,
    )
    vector = select_top_k_vector(partition, result.weights, k)
    pruned_context = ablate(partition, vector)
    pruned_partition = restrict(partition, vector)
    new_prompt = Prompt(pruned_context, query, template)
    new_response = provider.generate(new_prompt, max_tokens=max_tokens, seed=seed)
    return PruneResult(
        first_response=first,
        new_response=new_response,
        pruned_partition=pruned_partition,
        pruned_context=pruned_context,
        attribution=result,
    )


def detect_poison(scores: Sequence[float], k: int) -> PoisonFlagReport:
    """Flag the k highest-scoring sources for manual inspection."""
    if k < 1:
        raise EmptySelection("poison scan needs k >= 1 flags")
    return PoisonFlagReport(flagged=tuple(top_k(scores, k)), k=k)
