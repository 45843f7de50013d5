"""Attribution-quality metrics and the leave-one-out baseline.

Evaluation ablations always come from the "eval" sampler stream, disjoint by
construction from the "fit" stream used to train the surrogate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._concurrency import map_bounded
from .ablation import AblationVector, ablate, sample_ablations
from .errors import DegenerateRanks, UndefinedWeight
from .providers.base import Prompt, ScoredGenerationProvider
from .segmentation import SourcePartition, StatementSpan
from .surrogate import top_k

DEFAULT_K_LIST = (1, 3, 5)
DEFAULT_LDS_ABLATIONS = 64


@dataclass(frozen=True)
class EvalReport:
    """Metrics for one attributed statement."""

    method: str
    top_k_drops: dict[int, float]
    lds: float
    m_eval_ablations: int
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not -1.0 <= self.lds <= 1.0:
            raise ValueError(f"lds must lie in [-1, 1], got {self.lds}")

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "topKDrops": {str(k): v for k, v in sorted(self.top_k_drops.items())},
            "lds": self.lds,
            "mEvalAblations": self.m_eval_ablations,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _statement_log_prob(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    response_tokens: Sequence[str],
    statement: StatementSpan,
    vector: AblationVector,
) -> float:
    prompt = Prompt(ablate(partition, vector), query, template)
    prefix = list(response_tokens[: statement.token_start])
    continuation = list(response_tokens[statement.token_start : statement.token_end])
    return provider.score_forced(prompt, prefix, continuation).total_log_prob


def top_k_drop(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    response_tokens: Sequence[str],
    statement: StatementSpan,
    scores: Sequence[float],
    k: int,
) -> float:
    """Log-probability lost when the k highest-scoring sources are removed."""
    if len(scores) != partition.d:
        raise ValueError("one score per source required")
    if k == 0:
        return 0.0
    ablated = AblationVector.excluding(partition.d, top_k(scores, k))
    args = (provider, partition, template, query, response_tokens, statement)
    original = _statement_log_prob(*args, AblationVector.ones(partition.d))
    dropped = _statement_log_prob(*args, ablated)
    return original - dropped


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation with tie-averaged ranks (Pearson over ranks)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 3:
        raise ValueError("need two equal-length vectors with at least 3 entries")
    if np.isnan(xs).any() or np.isnan(ys).any():
        raise ValueError("inputs must not contain NaNs")

    def tied_ranks(values: np.ndarray) -> np.ndarray:
        order = np.argsort(values, kind="stable")
        ranks = np.empty(len(values), dtype=np.float64)
        i = 0
        while i < len(values):
            j = i
            while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
                j += 1
            ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
        return ranks

    rx, ry = tied_ranks(xs), tied_ranks(ys)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        raise DegenerateRanks("rank correlation undefined for a constant vector")
    return float(rx @ ry) / denom


def lds(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    response_tokens: Sequence[str],
    statement: StatementSpan,
    scores: Sequence[float],
    m: int = DEFAULT_LDS_ABLATIONS,
    seed: int = 0,
    max_in_flight: int = 8,
) -> float:
    """Spearman correlation between predicted and actual ablation effects.

    Predicted effect of v is <scores, v>; the actual value is the statement's
    log-probability under Ablate(C, v) (rank-equivalent to the probability).
    """
    if m < 3:
        raise ValueError("m must be >= 3")
    if len(scores) != partition.d:
        raise ValueError("one score per source required")
    sample = sample_ablations(partition.d, m, seed, stream="eval")
    scores = np.asarray(scores, dtype=np.float64)
    predicted = [float(scores @ v.as_array()) for v in sample.vectors]
    actual = map_bounded(
        lambda i: _statement_log_prob(
            provider, partition, template, query, response_tokens, statement, sample.vectors[i]
        ),
        m,
        max_in_flight,
    )
    return spearman(actual, predicted)


def leave_one_out(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    response_tokens: Sequence[str],
    statement: StatementSpan,
    max_in_flight: int = 8,
) -> np.ndarray:
    """Score each source by the drop from ablating it alone (d + 1 calls)."""
    args = (provider, partition, template, query, response_tokens, statement)
    full = _statement_log_prob(*args, AblationVector.ones(partition.d))
    singles = map_bounded(
        lambda j: _statement_log_prob(*args, AblationVector.excluding(partition.d, [j])),
        partition.d,
        max_in_flight,
    )
    return np.array([full - dropped for dropped in singles])


def shap_kernel_weight(vector: AblationVector) -> float:
    """Similarity-kernel weight (d - 1) / (C(d, s) * s * (d - s)), s = |v|.

    Uses log-gamma arithmetic so large d does not overflow the binomial.
    """
    d = vector.d
    s = vector.size
    if s == 0 or s == d:
        raise UndefinedWeight(f"weight undefined for |v| = {s} with d = {d}")
    log_binom = math.lgamma(d + 1) - math.lgamma(s + 1) - math.lgamma(d - s + 1)
    return math.exp(math.log(d - 1) - log_binom - math.log(s) - math.log(d - s))


def relevant_source_count(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    response_tokens: Sequence[str],
    statement: StatementSpan,
    delta: float = 2.0,
    max_in_flight: int = 8,
) -> int:
    """Sources whose single ablation moves the probability by a factor >= delta."""
    if delta <= 1.0:
        raise ValueError("delta must be > 1")
    loo = leave_one_out(
        provider, partition, template, query, response_tokens, statement, max_in_flight
    )
    return int(np.sum(np.abs(loo) >= math.log(delta)))


def evaluate_method(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    response_tokens: Sequence[str],
    statement: StatementSpan,
    scores: Sequence[float],
    method: str,
    k_list: Sequence[int] = DEFAULT_K_LIST,
    lds_m: int = DEFAULT_LDS_ABLATIONS,
    seed: int = 0,
    max_in_flight: int = 8,
) -> EvalReport:
    """Bundle top-k drops and LDS for one scored statement."""
    drops = {
        k: top_k_drop(
            provider, partition, template, query, response_tokens, statement, scores, k
        )
        for k in k_list
    }
    rho = lds(
        provider, partition, template, query, response_tokens, statement, scores,
        m=lds_m, seed=seed, max_in_flight=max_in_flight,
    )
    return EvalReport(method=method, top_k_drops=drops, lds=rho, m_eval_ablations=lds_m)
