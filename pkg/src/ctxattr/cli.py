"""Command-line shell: attribute | eval | verify | prune | poison-scan | serve.

Exit codes: 0 success, 2 provider failure, 3 bad input. Machine-readable
JSON goes to stdout; human-readable tables and aggregates go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .applications import detect_poison, prune_and_regenerate, verify_statement
from .cache import CachingProvider, ScoreCache
from .config import load_config
from .errors import (
    AbortedAfterRetries,
    ContextTooLong,
    CtxAttrError,
    DegenerateRanks,
    ProviderUnavailable,
    TokenizationMismatch,
)
from .metrics import evaluate_method, leave_one_out
from .providers import (
    PlantedCase,
    RemoteConfig,
    RemoteProvider,
    make_planted_case,
    make_poison_case,
)
from .providers.base import Prompt, ScoredGenerationProvider
from .providers.remote import FieldAdapter
from .providers.synthetic import DEFAULT_TEMPLATE
from .segmentation import (
    SourcePartition,
    select_statement,
    token_spans,
    whole_response_statement,
)
from .surrogate import attribute, top_k

EXIT_OK = 0
EXIT_PROVIDER = 2
EXIT_BAD_INPUT = 3

_PROVIDER_FAILURES = (ProviderUnavailable, ContextTooLong, TokenizationMismatch, AbortedAfterRetries)


class BadInput(CtxAttrError):
    """CLI-level validation failure (exit code 3)."""


@dataclass
class ResolvedTask:
    """Everything a verb needs: provider plus the strings to attribute."""

    provider: ScoredGenerationProvider
    partition: SourcePartition
    template: str
    query: str
    response_tokens: list[str]
    case: PlantedCase | None = None


def _parse_planted_spec(spec: str) -> dict[str, int]:
    params: dict[str, int] = {}
    if spec:
        for item in spec.split(","):
            if "=" not in item:
                raise BadInput(f"bad provider parameter {item!r}; expected name=value")
            key, value = item.split("=", 1)
            try:
                params[key.strip()] = int(value)
            except ValueError as exc:
                raise BadInput(f"provider parameter {key!r} must be an integer") from exc
    return params


def build_provider(args) -> tuple[ScoredGenerationProvider, PlantedCase | None]:
    spec = args.provider
    if spec is None:
        raise BadInput("--provider is required (URL, planted:SPEC, or poison:SPEC)")
    case = None
    if spec.startswith("planted:") or spec == "planted":
        params = _parse_planted_spec(spec.partition(":")[2])
        d = params.pop("d", 10)
        k = params.pop("k", 2)
        seed = params.pop("seed", args.seed)
        if params:
            raise BadInput(f"unknown planted parameters: {sorted(params)}")
        case = make_planted_case(d, k, seed)
        provider: ScoredGenerationProvider = case.provider
    elif spec.startswith("poison:") or spec == "poison":
        params = _parse_planted_spec(spec.partition(":")[2])
        d = params.pop("d", 20)
        seed = params.pop("seed", args.seed)
        if params:
            raise BadInput(f"unknown poison parameters: {sorted(params)}")
        case = make_poison_case(d, seed)
        provider = case.provider
    elif spec.startswith("http://") or spec.startswith("https://"):
        adapter = FieldAdapter.from_file(args.adapter) if getattr(args, "adapter", None) else FieldAdapter()
        config = load_config(flags={"provider_url": spec})
        provider = RemoteProvider(RemoteConfig(
            base_url=spec,
            api_key=config.provider_key,
            timeout_ms=config.provider_timeout_ms,
            adapter=adapter,
        ))
    else:
        raise BadInput(f"unrecognized provider {spec!r}")
    if getattr(args, "cache", None):
        provider = CachingProvider(provider, ScoreCache(args.cache))
    return provider, case


def _read_text_file(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise BadInput(f"cannot read {what} file {path!r}: {exc}") from exc


def resolve_task(args) -> ResolvedTask:
    provider, case = build_provider(args)
    if case is not None:
        # planted fixtures carry their own context/template/query/response
        return ResolvedTask(
            provider=provider,
            partition=case.partition,
            template=case.template,
            query=getattr(args, "query", None) or case.query,
            response_tokens=list(case.response_tokens),
            case=case,
        )
    if not getattr(args, "context", None):
        raise BadInput("--context FILE is required for remote providers")
    if not getattr(args, "query", None):
        raise BadInput("--query is required for remote providers")
    context_text = _read_text_file(args.context, "context")
    granularity = getattr(args, "granularity", "sentence")
    partition = (
        SourcePartition.from_words(context_text)
        if granularity == "word"
        else SourcePartition.from_sentences(context_text)
    )
    template = (
        _read_text_file(args.template, "template") if getattr(args, "template", None) else DEFAULT_TEMPLATE
    )
    if getattr(args, "response", None):
        response_text = _read_text_file(args.response, "response")
        response_tokens = provider.tokenize_response(response_text)
    else:
        prompt = Prompt(context_text, args.query, template)
        response_tokens = list(
            provider.generate(prompt, max_tokens=args.max_tokens, seed=args.seed).tokens
        )
    return ResolvedTask(provider, partition, template, args.query, response_tokens)


def _statement_for(args, task: ResolvedTask):
    raw = getattr(args, "statement", None)
    response_text = "".join(task.response_tokens)
    if raw is None:
        return whole_response_statement(response_text, task.response_tokens)
    try:
        start_text, end_text = raw.split(":", 1)
        start, end = int(start_text), int(end_text)
    except ValueError as exc:
        raise BadInput(f"--statement must be START:END, got {raw!r}") from exc
    spans = token_spans(response_text, task.response_tokens)
    return select_statement(response_text, spans, start, end)


def _print_ranked_table(task: ResolvedTask, weights, k: int, out=None) -> None:
    out = out if out is not None else sys.stderr
    print(f"{'rank':>4}  {'source':>6}  {'score':>12}  text", file=out)
    for rank, idx in enumerate(top_k(weights, k), start=1):
        text = task.partition.sources[idx].text
        if len(text) > 60:
            text = text[:57] + "..."
        print(f"{rank:>4}  {idx:>6}  {weights[idx]:>12.6f}  {text}", file=out)


def cmd_attribute(args) -> int:
    if args.num_ablations < 1:
        raise BadInput("n must be >= 1")
    task = resolve_task(args)
    statement = _statement_for(args, task)
    result = attribute(
        task.provider, task.partition, task.template, task.query, task.response_tokens,
        statement=statement, n=args.num_ablations, lam=args.alpha, seed=args.seed,
        holdout_fraction=args.holdout_fraction, max_in_flight=args.max_in_flight,
    )
    print(result.to_json())
    _print_ranked_table(task, result.weights, args.top_k or min(5, task.partition.d))
    return EXIT_OK


def cmd_eval(args) -> int:
    methods = [m for m in (args.methods or "").split(",") if m]
    if not methods:
        raise BadInput("--methods must list at least one of: contextcite, loo")
    unknown = set(methods) - {"contextcite", "loo"}
    if unknown:
        raise BadInput(f"unknown methods: {sorted(unknown)}")
    if args.num_ablations < 1:
        raise BadInput("n must be >= 1")
    k_list = [int(k) for k in args.k_list.split(",") if k]
    totals: dict[str, dict] = {m: {"lds": [], "drops": {k: [] for k in k_list}} for m in methods}
    for trial in range(args.trials):
        case = make_planted_case(args.suite_d, args.suite_k, args.seed + trial)
        task = ResolvedTask(
            case.provider, case.partition, case.template, case.query, list(case.response_tokens), case
        )
        statement = whole_response_statement("".join(task.response_tokens), task.response_tokens)
        for method in methods:
            if method == "contextcite":
                scores = list(attribute(
                    task.provider, task.partition, task.template, task.query,
                    task.response_tokens, statement=statement,
                    n=args.num_ablations, lam=args.alpha, seed=args.seed + trial,
                    max_in_flight=args.max_in_flight,
                ).weights)
            else:
                scores = list(leave_one_out(
                    task.provider, task.partition, task.template, task.query,
                    task.response_tokens, statement, max_in_flight=args.max_in_flight,
                ))
            try:
                report = evaluate_method(
                    task.provider, task.partition, task.template, task.query,
                    task.response_tokens, statement, scores, method,
                    k_list=k_list, lds_m=args.lds_m, seed=args.seed + trial,
                    max_in_flight=args.max_in_flight,
                )
            except DegenerateRanks as exc:
                raise BadInput(f"degenerate eval ranks on trial {trial}: {exc}") from exc
            line = {"trial": trial, "statement": 0, **report.to_json_dict()}
            print(json.dumps(line, sort_keys=True))
            totals[method]["lds"].append(report.lds)
            for k in k_list:
                totals[method]["drops"][k].append(report.top_k_drops[k])
    for method in methods:
        drops = "  ".join(
            f"top-{k}={np.mean(totals[method]['drops'][k]):.4f}" for k in k_list
        )
        print(
            f"[{method}] mean LDS={np.mean(totals[method]['lds']):.4f}  {drops}",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.top_k is None or args.top_k < 1:
        raise BadInput("--top-k must be >= 1")
    task = resolve_task(args)
    question = args.question or task.query
    answer = args.answer or "".join(task.response_tokens)
    statement = whole_response_statement("".join(task.response_tokens), task.response_tokens)
    result = attribute(
        task.provider, task.partition, task.template, task.query, task.response_tokens,
        statement=statement, n=args.num_ablations, lam=args.alpha, seed=args.seed,
        max_in_flight=args.max_in_flight,
    )
    verdict = verify_statement(
        task.provider, task.partition, result.weights, args.top_k, question, answer,
    )
    print(json.dumps(verdict.to_json_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def cmd_prune(args) -> int:
    if args.top_k is None or args.top_k < 1:
        raise BadInput("--top-k must be >= 1")
    task = resolve_task(args)
    result = prune_and_regenerate(
        task.provider, task.partition, task.template, task.query, args.top_k,
        n=args.num_ablations, lam=args.alpha, seed=args.seed,
        max_tokens=args.max_tokens, max_in_flight=args.max_in_flight,
    )
    payload = {
        "firstResponse": result.first_response.text,
        "newResponse": result.new_response.text,
        "prunedContext": result.pruned_context,
        "prunedSourceCount": result.pruned_partition.d,
        "attribution": result.attribution.to_json_dict(),
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_poison_scan(args) -> int:
    if args.top_k is None or args.top_k < 1:
        raise BadInput("--top-k must be >= 1")
    task = resolve_task(args)
    result = attribute(
        task.provider, task.partition, task.template, task.query, task.response_tokens,
        n=args.num_ablations, lam=args.alpha, seed=args.seed,
        max_in_flight=args.max_in_flight,
    )
    report = detect_poison(result.weights, args.top_k)
    payload = report.to_json_dict()
    payload["scores"] = list(result.weights)
    print(json.dumps(payload, sort_keys=True, indent=2))
    _print_ranked_table(task, result.weights, args.top_k)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import create_app  # deferred: uvicorn/fastapi are heavier imports
    import uvicorn

    config = load_config(
        flags={
            "port": args.port,
            "provider_url": args.provider if args.provider and args.provider.startswith("http") else None,
            "cache_dir": args.cache,
            "max_in_flight": args.max_in_flight,
            "static_dir": args.static_dir,
        },
        config_file=args.config,
    )
    provider = None
    if args.provider and not args.provider.startswith("http"):
        provider, _ = build_provider(args)
    app = create_app(config, provider=provider)
    uvicorn.run(app, host=args.host, port=config.port)
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", help="URL, planted:d=..,k=.., or poison:d=..")
    parser.add_argument("--adapter", help="JSON field-adapter file for remote providers")
    parser.add_argument("--cache", help="cache directory for provider calls")
    parser.add_argument("--context", help="context text file")
    parser.add_argument("--query", help="query string")
    parser.add_argument("--template", help="prompt template file with {context} and {query}")
    parser.add_argument("--response", help="response text file (generated when absent)")
    parser.add_argument("--granularity", choices=["sentence", "word"], default="sentence")
    parser.add_argument("--num-ablations", type=int, default=32)
    parser.add_argument("--alpha", type=float, default=0.01, help="L1 regularization strength")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-tokens", type=int, default=256)
    parser.add_argument("--max-in-flight", type=int, default=8)
    parser.add_argument("--top-k", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxattr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attribute", help="attribute a statement to context sources")
    _add_common(p)
    p.add_argument("--statement", help="character range START:END within the response")
    p.add_argument("--holdout-fraction", type=float, default=0.0)
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("eval", help="score attribution methods on a planted suite")
    _add_common(p)
    p.add_argument("--methods", default="contextcite,loo")
    p.add_argument("--k-list", default="1,3,5")
    p.add_argument("--lds-m", type=int, default=64)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--suite-d", type=int, default=30)
    p.add_argument("--suite-k", type=int, default=3)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="verify a statement against its top-k sources")
    _add_common(p)
    p.add_argument("--question")
    p.add_argument("--answer")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("prune", help="prune the context to top-k sources and regenerate")
    _add_common(p)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("poison-scan", help="flag the highest-scoring sources")
    _add_common(p)
    p.set_defaults(func=cmd_poison_scan)

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_common(p)
    p.add_argument("--port", type=int)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--static-dir", help="directory with the UI bundle")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; normalize to the bad-input code
        return EXIT_BAD_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except BadInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except _PROVIDER_FAILURES as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except CtxAttrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
