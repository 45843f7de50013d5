"""Sparse linear surrogate fitting: the attribution engine's core loop.

Collect (ablation vector, logit-probability) pairs, fit an L1-regularized
linear model by cyclic coordinate descent, and read the weights off as
per-source attribution scores. The objective is

    (1 / (2n)) * ||y - M w - b 1||^2 + lam * ||w||_1

with an unpenalized intercept and no feature standardization: mask columns
are homogeneous 0/1, and the weights must stay interpretable as per-source
effects on the logit-probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._concurrency import map_bounded
from .ablation import ablate, sample_ablations
from .errors import AbortedAfterRetries, NonFinite, ProviderUnavailable
from .providers.base import Prompt, ScoredContinuation, ScoredGenerationProvider
from .segmentation import SourcePartition, StatementSpan, whole_response_statement

RESULT_SCHEMA_VERSION = 1
_LOGIT_CLAMP_HIGH = math.log((1.0 - 1e-9) / 1e-9)


def logit_of_log_prob(log_prob: float) -> float:
    """sigma^-1(exp(L)) = L - log(1 - e^L), computed stably.

    Below L = -30 the correction term is under 1e-13, so L itself is
    returned; above L = -1e-9 the probability is clamped to 1 - 1e-9 to keep
    the output finite. Non-finite inputs (including -inf: the surrogate
    needs finite targets) are rejected.
    """
    log_prob = float(log_prob)
    if math.isnan(log_prob) or math.isinf(log_prob):
        raise NonFinite(f"log-probability must be finite, got {log_prob}")
    if log_prob < -30.0:
        return log_prob
    if log_prob > -1e-9:
        return _LOGIT_CLAMP_HIGH
    return log_prob - math.log(-math.expm1(log_prob))


@dataclass(frozen=True)
class SurrogateDataset:
    """Ablation masks paired with logit-scaled statement log-probabilities."""

    masks: np.ndarray
    targets: np.ndarray
    statement: StatementSpan
    n_ablations: int
    seed: int
    sampler_id: str

    def __post_init__(self):
        if self.masks.shape[0] != self.targets.shape[0]:
            raise ValueError("one target per mask row required")
        if not np.all(np.isfinite(self.targets)):
            raise NonFinite("targets must be finite")


@dataclass(frozen=True)
class AttributionResult:
    """Fitted surrogate weights; the weights are the attribution scores."""

    weights: tuple[float, ...]
    intercept: float
    lam: float
    n_ablations: int
    seed: int
    held_out_rmse: float | None = None

    @property
    def d(self) -> int:
        return len(self.weights)

    def scores(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    def to_json_dict(self) -> dict:
        return {
            "version": RESULT_SCHEMA_VERSION,
            "weights": list(self.weights),
            "intercept": self.intercept,
            "lambda": self.lam,
            "nAblations": self.n_ablations,
            "seed": self.seed,
            "heldOutRmse": self.held_out_rmse,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json_dict(cls, data: dict) -> "AttributionResult":
        return cls(
            weights=tuple(float(w) for w in data["weights"]),
            intercept=float(data["intercept"]),
            lam=float(data["lambda"]),
            n_ablations=int(data["nAblations"]),
            seed=int(data["seed"]),
            held_out_rmse=None if data.get("heldOutRmse") is None else float(data["heldOutRmse"]),
        )


def lasso_objective(masks, targets, weights, intercept, lam: float) -> float:
    masks = np.asarray(masks, dtype=np.float64)
    residual = np.asarray(targets, dtype=np.float64) - masks @ weights - intercept
    return float((residual @ residual) / (2 * masks.shape[0]) + lam * np.abs(weights).sum())


def lasso_fit(
    masks,
    targets,
    lam: float,
    max_sweeps: int = 10000,
    tol: float = 1e-7,
    on_sweep: Callable[[int, float], None] | None = None,
) -> tuple[np.ndarray, float]:
    """Cyclic coordinate descent with soft-thresholding.

    The intercept is updated in closed form each sweep and never penalized.
    Constant (all-equal) columns get weight zero. Converges when the largest
    coordinate change in a sweep drops below ``tol``.
    """
    M = np.asfortranarray(np.asarray(masks, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)
    if M.ndim != 2 or y.ndim != 1 or M.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: masks {M.shape}, targets {y.shape}")
    if M.shape[0] < 1:
        raise ValueError("need at least one row")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(y))):
        raise NonFinite("masks and targets must be finite")
    n, d = M.shape
    active = [j for j in range(d) if M[:, j].min() != M[:, j].max()]
    columns = {j: M[:, j] for j in active}
    col_sq = {j: float(columns[j] @ columns[j]) / n for j in active}
    w = np.zeros(d)
    b = float(y.mean())
    r = y - b
    for sweep in range(max_sweeps):
        max_delta = 0.0
        delta_b = float(r.mean())
        b += delta_b
        r -= delta_b
        max_delta = abs(delta_b)
        for j in active:
            col = columns[j]
            rho = float(col @ r) / n + col_sq[j] * w[j]
            if rho > lam:
                new_wj = (rho - lam) / col_sq[j]
            elif rho < -lam:
                new_wj = (rho + lam) / col_sq[j]
            else:
                new_wj = 0.0
            if new_wj != w[j]:
                r += col * (w[j] - new_wj)
                delta = abs(new_wj - w[j])
                if delta > max_delta:
                    max_delta = delta
                w[j] = new_wj
        if on_sweep is not None:
            on_sweep(sweep, lasso_objective(M, y, w, b, lam))
        if max_delta < tol:
            break
    return w, b


def top_k(scores: Sequence[float], k: int) -> list[int]:
    """Indices of the k largest scores, descending; ties break by index."""
    if k < 0:
        raise ValueError("k must be >= 0")
    order = sorted(range(len(scores)), key=lambda j: (-float(scores[j]), j))
    return order[: min(k, len(scores))]


def collect_dataset(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    response_tokens: Sequence[str],
    statement: StatementSpan,
    n: int,
    seed: int,
    max_in_flight: int = 8,
    on_progress: Callable[[int, int], None] | None = None,
    retries: int = 3,
) -> SurrogateDataset:
    """Score the statement under n sampled ablations.

    The response prefix is always the original response's tokens, never
    regenerated, so every row conditions on the same left context. Row order
    matches sampling order regardless of call completion order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    sample = sample_ablations(partition.d, n, seed, stream="fit")
    prefix = list(response_tokens[: statement.token_start])
    continuation = list(response_tokens[statement.token_start : statement.token_end])

    def score_one(i: int) -> ScoredContinuation:
        prompt = Prompt(ablate(partition, sample.vectors[i]), query, template)
        failure: Exception | None = None
        for _ in range(max(1, retries)):
            try:
                return provider.score_forced(prompt, prefix, continuation)
            except ProviderUnavailable as exc:
                failure = exc
        raise AbortedAfterRetries(i, failure)

    scored = map_bounded(score_one, n, max_in_flight, on_progress)
    targets = np.array([logit_of_log_prob(s.total_log_prob) for s in scored])
    return SurrogateDataset(
        masks=sample.matrix(),
        targets=targets,
        statement=statement,
        n_ablations=n,
        seed=seed,
        sampler_id=sample.sampler_id,
    )


def attribute(
    provider: ScoredGenerationProvider,
    partition: SourcePartition,
    template: str,
    query: str,
    response_tokens: Sequence[str],
    statement: StatementSpan | None = None,
    n: int = 32,
    lam: float = 0.01,
    seed: int = 0,
    holdout_fraction: float = 0.0,
    max_in_flight: int = 8,
    on_progress: Callable[[int, int], None] | None = None,
) -> AttributionResult:
    """End-to-end attribution of a statement (default: the whole response)."""
    if statement is None:
        statement = whole_response_statement("".join(response_tokens), response_tokens)
    dataset = collect_dataset(
        provider, partition, template, query, response_tokens, statement,
        n=n, seed=seed, max_in_flight=max_in_flight, on_progress=on_progress,
    )
    held_out_rmse = None
    fit_masks, fit_targets = dataset.masks, dataset.targets
    if holdout_fraction > 0.0:
        n_held = int(round(holdout_fraction * n))
        if not 1 <= n_held < n:
            raise ValueError(f"holdout fraction {holdout_fraction} leaves no fit or eval rows")
        fit_masks, fit_targets = dataset.masks[:-n_held], dataset.targets[:-n_held]
        held_masks, held_targets = dataset.masks[-n_held:], dataset.targets[-n_held:]
    weights, intercept = lasso_fit(fit_masks, fit_targets, lam)
    if holdout_fraction > 0.0:
        predicted = held_masks @ weights + intercept
        held_out_rmse = float(np.sqrt(np.mean((predicted - held_targets) ** 2)))
    return AttributionResult(
        weights=tuple(float(v) for v in weights),
        intercept=float(intercept),
        lam=lam,
        n_ablations=n,
        seed=seed,
        held_out_rmse=held_out_rmse,
    )
