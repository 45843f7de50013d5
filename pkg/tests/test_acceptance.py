"""Acceptance suite: every criterion at its stated tolerance, one line each.

Run with synthetic providers only; no network, no secondary component.
"""

import math
import time

import numpy as np
import pytest

from ctxattr import (
    AblationVector,
    attribute,
    lasso_fit,
    lasso_objective,
    lds,
    leave_one_out,
    logit_of_log_prob,
    make_planted_case,
    make_poison_case,
    shap_kernel_weight,
    spearman,
    top_k,
    top_k_drop,
    whole_response_statement,
)
from ctxattr.cache import CachingProvider, ScoreCache
from ctxattr.errors import UndefinedWeight
from ctxattr.providers.synthetic import DEFAULT_QUERY, DEFAULT_TEMPLATE, InteractionOracle
from ctxattr import SourcePartition
from conftest import ACCEPTANCE_LINES


def record(ok: bool, name: str, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def case_args(case):
    statement = whole_response_statement(case.response_text, case.response_tokens)
    return (case.provider, case.partition, case.template, case.query,
            case.response_tokens, statement)


def test_criterion_1_planted_sparse_recovery():
    started = time.monotonic()
    recovered = 0
    literal_equality = 0
    lds_values = []
    for seed in range(20):
        case = make_planted_case(d=100, k=5, seed=seed, weight_low=2.0, weight_high=5.0)
        result = attribute(
            case.provider, case.partition, case.template, case.query,
            case.response_tokens, n=32, lam=0.01, seed=seed * 7919 + 13,
        )
        mags = np.abs(np.array(result.weights))
        on_support = mags[list(case.support)]
        off_support = np.delete(mags, list(case.support))
        recovered += bool(on_support.min() > off_support.max())
        literal_equality += set(np.nonzero(mags)[0]) == set(case.support)
        statement = whole_response_statement(case.response_text, case.response_tokens)
        lds_values.append(lds(
            case.provider, case.partition, case.template, case.query,
            case.response_tokens, statement, scores=list(result.weights),
            m=64, seed=seed * 7919 + 13,
        ))
    elapsed = time.monotonic() - started
    mean_lds = float(np.mean(lds_values))
    ok = recovered >= 19 and mean_lds >= 0.90 and elapsed < 10.0
    record(ok, "criterion 1 (planted sparse recovery)",
           f"magnitude-separated recovery {recovered}/20, mean LDS {mean_lds:.4f} "
           f"(literal nonzero-support equality {literal_equality}/20, see ledger), "
           f"{elapsed:.1f}s < 10s")


def test_criterion_2_loo_oracle_agreement():
    started = time.monotonic()
    cc_drops, loo_drops = [], []
    for i in range(50):
        case = make_planted_case(d=30, k=3, seed=500 + i)
        args = case_args(case)
        fitted = attribute(
            case.provider, case.partition, case.template, case.query,
            case.response_tokens, n=32, lam=0.01, seed=900 + i,
        )
        loo_scores = leave_one_out(*args)
        cc_drops.append(top_k_drop(*args, scores=list(fitted.weights), k=1))
        loo_drops.append(top_k_drop(*args, scores=list(loo_scores), k=1))
    elapsed = time.monotonic() - started
    ratio = float(np.mean(cc_drops) / np.mean(loo_drops))
    ok = ratio >= 0.95 and elapsed < 30.0
    record(ok, "criterion 2 (LOO oracle agreement)",
           f"mean top-1 drop ratio {ratio:.4f} >= 0.95 over 50 instances, {elapsed:.1f}s < 30s")


def test_criterion_3_lasso_correctness():
    started = time.monotonic()
    worst_rel_gap = 0.0
    worst_ols_gap = 0.0
    for i in range(50):
        rng = np.random.default_rng(1700 + i)
        masks = (rng.random((64, 30)) < 0.5).astype(float)
        targets = rng.normal(size=64)
        w_run, b_run = lasso_fit(masks, targets, lam=0.01)
        w_ref, b_ref = lasso_fit(masks, targets, lam=0.01, max_sweeps=100000, tol=1e-14)
        obj_run = lasso_objective(masks, targets, w_run, b_run, 0.01)
        obj_ref = lasso_objective(masks, targets, w_ref, b_ref, 0.01)
        worst_rel_gap = max(worst_rel_gap, abs(obj_run - obj_ref) / abs(obj_ref))
        # independent normal-equations oracle at tiny regularization
        w_tiny, b_tiny = lasso_fit(masks, targets, lam=1e-10)
        design = np.hstack([masks, np.ones((64, 1))])
        beta = np.linalg.solve(design.T @ design, design.T @ targets)
        worst_ols_gap = max(worst_ols_gap, float(np.max(np.abs(w_tiny - beta[:-1]))))
    elapsed = time.monotonic() - started
    ok = worst_rel_gap < 1e-8 and worst_ols_gap < 1e-5 and elapsed < 20.0
    record(ok, "criterion 3 (lasso correctness)",
           f"worst objective gap {worst_rel_gap:.2e} < 1e-8, "
           f"worst |w - OLS| {worst_ols_gap:.2e} < 1e-5, {elapsed:.1f}s < 20s")


def _interaction_suite_rmse(seed: int, n: int, lam: float) -> float:
    rng = np.random.default_rng(2000 + seed)
    d = 50
    texts = [f"Trend source s{i:04d}." for i in range(d)]
    weights = np.zeros(d)
    support = rng.choice(d, 4, replace=False)
    weights[support] = rng.uniform(2.0, 5.0, size=4) * rng.choice([-1.0, 1.0], 4)
    pairs = {
        (int(a), int(b)): float(rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0]))
        for a, b in rng.choice(d, (3, 2), replace=False)
    }
    provider = InteractionOracle(texts, weights, -float(weights.sum()) / 2, pairs)
    partition = SourcePartition.from_texts(texts)
    tokens = provider.response_tokens
    result = attribute(
        provider, partition, DEFAULT_TEMPLATE, DEFAULT_QUERY, tokens,
        n=n, lam=lam, seed=seed * 31 + n, holdout_fraction=0.25,
    )
    return result.held_out_rmse


def test_criterion_4_rmse_trend():
    started = time.monotonic()
    lasso_32 = [_interaction_suite_rmse(seed, 32, 0.01) for seed in range(10)]
    lasso_256 = [_interaction_suite_rmse(seed, 256, 0.01) for seed in range(10)]
    ols_32 = [_interaction_suite_rmse(seed, 32, 0.0) for seed in range(10)]
    elapsed = time.monotonic() - started
    mean_32, mean_256, mean_ols = map(float, (np.mean(lasso_32), np.mean(lasso_256), np.mean(ols_32)))
    ok = mean_256 < mean_32 and mean_32 <= mean_ols
    record(ok, "criterion 4 (held-out RMSE trend)",
           f"lasso RMSE n=256 {mean_256:.3f} < n=32 {mean_32:.3f}; "
           f"lasso {mean_32:.3f} <= OLS {mean_ols:.3f} at n=32 ({elapsed:.1f}s)")


def test_criterion_5_poison_detection():
    started = time.monotonic()
    top1 = top3 = 0
    for seed in range(100):
        case = make_poison_case(d=20, seed=seed)
        result = attribute(
            case.provider, case.partition, case.template, case.query,
            case.response_tokens, n=32, lam=0.01, seed=seed * 101 + 7,
        )
        order = top_k(result.weights, 3)
        top1 += order[0] == case.poison_index
        top3 += case.poison_index in order
    elapsed = time.monotonic() - started
    ok = top1 >= 95 and top3 >= 99 and elapsed < 60.0
    record(ok, "criterion 5 (poison detection)",
           f"top-1 {top1}/100 >= 95, top-3 {top3}/100 >= 99, {elapsed:.1f}s < 60s")


def test_criterion_6_metric_identities():
    case = make_planted_case(d=6, k=2, seed=3)
    args = case_args(case)
    drop_zero = top_k_drop(*args, scores=list(case.weights), k=0)
    rho_up = spearman([1.0, 2.0, 3.0, 4.0], [10.0, 20.0, 30.0, 40.0])
    rho_down = spearman([1.0, 2.0, 3.0, 4.0], [4.0, 3.0, 2.0, 1.0])
    shap = shap_kernel_weight(AblationVector((1, 0, 0, 0)))
    endpoints_error = False
    try:
        shap_kernel_weight(AblationVector((0, 0, 0, 0)))
    except UndefinedWeight:
        try:
            shap_kernel_weight(AblationVector((1, 1, 1, 1)))
        except UndefinedWeight:
            endpoints_error = True
    logit_half = logit_of_log_prob(math.log(0.5))
    ok = (
        drop_zero == 0.0
        and rho_up == pytest.approx(1.0, abs=1e-12)
        and rho_down == pytest.approx(-1.0, abs=1e-12)
        and shap == pytest.approx(0.25, abs=1e-12)
        and endpoints_error
        and abs(logit_half) <= 1e-12
    )
    record(ok, "criterion 6 (metric identities)",
           f"drop(k=0)={drop_zero}, spearman=+/-1, shap(4,1)={shap}, "
           f"endpoints error, |logit(ln 0.5)|={abs(logit_half):.1e}")


def test_criterion_7_determinism_and_cache_transparency(tmp_path):
    case = make_planted_case(d=40, k=4, seed=12)

    def run(provider, flight):
        return attribute(
            provider, case.partition, case.template, case.query, case.response_tokens,
            n=32, lam=0.01, seed=777, max_in_flight=flight,
        ).to_json()

    repeat_a = run(case.provider, 8)
    repeat_b = run(case.provider, 8)
    single_thread = run(case.provider, 1)
    cold = run(CachingProvider(case.provider, ScoreCache(tmp_path / "c")), 8)
    warm_cache = ScoreCache(tmp_path / "c")
    warm = run(CachingProvider(case.provider, warm_cache), 8)
    ok = repeat_a == repeat_b == single_thread == cold == warm
    record(ok, "criterion 7 (determinism & cache transparency)",
           "byte-identical JSON across runs, thread counts 1/8, cold/warm cache")
