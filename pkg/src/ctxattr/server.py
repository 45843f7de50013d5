"""HTTP service exposing generation, attribution jobs, and the pipelines.

All bodies are JSON. Errors use a uniform ``{code, message}`` envelope:
400 for validation problems, 404 for unknown jobs, 502 for provider
failures. Attribution runs asynchronously through the job API because a
single request may issue dozens of provider calls.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .applications import detect_poison, prune_and_regenerate, verify_statement
from .cache import CachingProvider, ScoreCache
from .config import ServiceConfig
from .errors import (
    AbortedAfterRetries,
    ContextTooLong,
    CtxAttrError,
    ProviderUnavailable,
    TokenizationMismatch,
)
from .jobs import JobRegistry
from .providers.base import Prompt, ScoredGenerationProvider
from .providers.remote import RemoteConfig, RemoteProvider
from .providers.synthetic import DEFAULT_TEMPLATE
from .segmentation import (
    SourcePartition,
    select_statement,
    token_spans,
    whole_response_statement,
)
from .surrogate import attribute

_PROVIDER_FAILURES = (ProviderUnavailable, ContextTooLong, TokenizationMismatch, AbortedAfterRetries)


def _envelope(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


class StatementRange(BaseModel):
    charStart: int
    charEnd: int


class GenerateRequest(BaseModel):
    context: str
    query: str
    template: str = DEFAULT_TEMPLATE
    maxTokens: int = Field(default=256, ge=1)
    seed: int | None = None


class AttributeRequest(BaseModel):
    context: str
    query: str
    response: str | None = None
    statement: StatementRange | None = None
    n: int = Field(default=32, ge=1)
    alpha: float = Field(default=0.01, ge=0.0)
    seed: int = 0
    granularity: str = "sentence"
    template: str = DEFAULT_TEMPLATE
    maxTokens: int = Field(default=256, ge=1)


class VerifyRequest(BaseModel):
    context: str
    query: str
    answer: str | None = None
    k: int = Field(ge=1)
    n: int = Field(default=32, ge=1)
    alpha: float = Field(default=0.01, ge=0.0)
    seed: int = 0
    granularity: str = "sentence"
    template: str = DEFAULT_TEMPLATE
    maxTokens: int = Field(default=256, ge=1)


class PruneRequest(BaseModel):
    context: str
    query: str
    k: int = Field(ge=1)
    n: int = Field(default=32, ge=1)
    alpha: float = Field(default=0.01, ge=0.0)
    seed: int = 0
    granularity: str = "sentence"
    template: str = DEFAULT_TEMPLATE
    maxTokens: int = Field(default=256, ge=1)


def _partition_for(context: str, granularity: str) -> SourcePartition:
    if granularity == "word":
        return SourcePartition.from_words(context)
    if granularity == "sentence":
        return SourcePartition.from_sentences(context)
    raise CtxAttrError(f"unknown granularity {granularity!r}")


def _span_dict(span) -> dict:
    return {
        "index": span.index,
        "charStart": span.char_start,
        "charEnd": span.char_end,
        "text": span.text,
        "trailingSeparator": span.trailing_separator,
    }


def create_app(
    config: ServiceConfig | None = None,
    provider: ScoredGenerationProvider | None = None,
) -> FastAPI:
    config = config or ServiceConfig()
    cache = ScoreCache(config.cache_dir) if config.cache_dir else None
    if provider is None and config.provider_url:
        provider = RemoteProvider(RemoteConfig(
            base_url=config.provider_url,
            api_key=config.provider_key,
            timeout_ms=config.provider_timeout_ms,
        ))
    if provider is not None and cache is not None:
        provider = CachingProvider(provider, cache)

    app = FastAPI(title="ctxattr", version="0.1.0")
    app.state.config = config
    app.state.cache = cache
    app.state.provider = provider
    app.state.jobs = JobRegistry(max_workers=4)

    def active_provider() -> ScoredGenerationProvider:
        if app.state.provider is None:
            raise ProviderUnavailable("no provider configured (set provider_url)")
        return app.state.provider

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _envelope(400, "bad_request", str(exc.errors()))

    @app.exception_handler(CtxAttrError)
    async def on_package_error(request: Request, exc: CtxAttrError):
        if isinstance(exc, _PROVIDER_FAILURES):
            return _envelope(502, "provider_unavailable", str(exc))
        return _envelope(400, "bad_request", str(exc))

    @app.exception_handler(ValueError)
    async def on_value_error(request: Request, exc: ValueError):
        return _envelope(400, "bad_request", str(exc))

    if config.service_token:
        @app.middleware("http")
        async def check_token(request: Request, call_next):
            if request.url.path.startswith("/v1/"):
                expected = f"Bearer {config.service_token}"
                if request.headers.get("Authorization") != expected:
                    return _envelope(401, "unauthorized", "missing or invalid bearer token")
            return await call_next(request)

    @app.get("/v1/partitions")
    def preview_partition(context: str, granularity: str = "sentence") -> dict:
        partition = _partition_for(context, granularity)
        return {
            "granularity": partition.granularity.value,
            "d": partition.d,
            "sources": [_span_dict(s) for s in partition.sources],
        }

    @app.post("/v1/generate")
    def generate(body: GenerateRequest) -> dict:
        prompt = Prompt(body.context, body.query, body.template)
        scored = active_provider().generate(prompt, max_tokens=body.maxTokens, seed=body.seed)
        return {
            "response": scored.text,
            "tokens": list(scored.tokens),
            "tokenLogProbs": list(scored.token_log_probs),
        }

    @app.post("/v1/attribute")
    def submit_attribution(body: AttributeRequest) -> dict:
        provider = active_provider()
        partition = _partition_for(body.context, body.granularity)

        def work(progress):
            if body.response is None:
                prompt = Prompt(body.context, body.query, body.template)
                tokens = list(provider.generate(prompt, max_tokens=body.maxTokens, seed=body.seed).tokens)
            else:
                tokens = provider.tokenize_response(body.response)
            response_text = "".join(tokens)
            if body.statement is None:
                statement = whole_response_statement(response_text, tokens)
            else:
                statement = select_statement(
                    response_text, token_spans(response_text, tokens),
                    body.statement.charStart, body.statement.charEnd,
                )
            result = attribute(
                provider, partition, body.template, body.query, tokens,
                statement=statement, n=body.n, lam=body.alpha, seed=body.seed,
                max_in_flight=config.max_in_flight, on_progress=progress,
            )
            return {
                "attribution": result.to_json_dict(),
                "response": response_text,
                "statement": {
                    "tokenStart": statement.token_start,
                    "tokenEnd": statement.token_end,
                    "charStart": statement.char_start,
                    "charEnd": statement.char_end,
                },
            }

        job_id = app.state.jobs.submit(work, total=body.n)
        return {"jobId": job_id}

    @app.get("/v1/jobs/{job_id}")
    def job_status(job_id: str):
        record = app.state.jobs.get(job_id)
        if record is None:
            return _envelope(404, "not_found", f"unknown job {job_id!r}")
        return record.to_json_dict()

    @app.post("/v1/verify")
    def verify(body: VerifyRequest) -> dict:
        provider = active_provider()
        partition = _partition_for(body.context, body.granularity)
        if body.answer is None:
            prompt = Prompt(body.context, body.query, body.template)
            answer = provider.generate(prompt, max_tokens=body.maxTokens, seed=body.seed).text
        else:
            answer = body.answer
        tokens = provider.tokenize_response(answer)
        result = attribute(
            provider, partition, body.template, body.query, tokens,
            n=body.n, lam=body.alpha, seed=body.seed, max_in_flight=config.max_in_flight,
        )
        verdict = verify_statement(
            provider, partition, result.weights, body.k, body.query, answer,
        )
        payload = verdict.to_json_dict()
        payload["attribution"] = result.to_json_dict()
        return payload

    @app.post("/v1/prune")
    def prune(body: PruneRequest) -> dict:
        provider = active_provider()
        partition = _partition_for(body.context, body.granularity)
        result = prune_and_regenerate(
            provider, partition, body.template, body.query, body.k,
            n=body.n, lam=body.alpha, seed=body.seed,
            max_tokens=body.maxTokens, max_in_flight=config.max_in_flight,
        )
        return {
            "firstResponse": result.first_response.text,
            "newResponse": result.new_response.text,
            "prunedContext": result.pruned_context,
            "prunedSources": [_span_dict(s) for s in result.pruned_partition.sources],
            "attribution": result.attribution.to_json_dict(),
        }

    @app.post("/v1/poison-scan")
    def poison_scan(body: PruneRequest) -> dict:
        provider = active_provider()
        partition = _partition_for(body.context, body.granularity)
        prompt = Prompt(body.context, body.query, body.template)
        tokens = list(provider.generate(prompt, max_tokens=body.maxTokens, seed=body.seed).tokens)
        result = attribute(
            provider, partition, body.template, body.query, tokens,
            n=body.n, lam=body.alpha, seed=body.seed, max_in_flight=config.max_in_flight,
        )
        report = detect_poison(result.weights, body.k)
        payload = report.to_json_dict()
        payload["scores"] = list(result.weights)
        payload["response"] = "".join(tokens)
        return payload

    @app.get("/v1/cache/stats")
    def cache_stats() -> dict:
        if app.state.cache is None:
            return {"hits": 0, "misses": 0, "entries": 0, "enabled": False}
        return {**app.state.cache.stats(), "enabled": True}

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app
