"""Remote completions-style provider: echo scoring over HTTP.

The wire contract is minimal: POST a JSON body carrying the full prompt
text, the forced continuation text, and a flag requesting per-token
log-probs; the endpoint answers with token strings and their log-probs.
Deployments disagree on field names, so the mapping lives in a
:class:`FieldAdapter` that can be loaded from a JSON adapter file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import requests

from ..errors import ContextTooLong, ProviderUnavailable, TokenizationMismatch
from .base import ScoredContinuation, ScoredGenerationProvider, rendered

Transport = Callable[[str, dict, dict, float], tuple[int, Any]]


@dataclass(frozen=True)
class FieldAdapter:
    """Maps canonical request/response fields onto a deployment's names.

    Response paths are dot-separated (e.g. ``"choices.0.logprobs.tokens"``).
    """

    prompt_field: str = "prompt"
    continuation_field: str = "continuation"
    logprobs_field: str = "logprobs"
    max_tokens_field: str = "max_tokens"
    seed_field: str = "seed"
    tokens_path: str = "tokens"
    token_logprobs_path: str = "token_logprobs"
    text_path: str = "text"

    @classmethod
    def from_file(cls, path: str) -> "FieldAdapter":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass(frozen=True)
class RemoteConfig:
    base_url: str
    api_key: str | None = None
    timeout_ms: int = 30000
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    score_path: str = "/v1/score"
    generate_path: str = "/v1/generate"
    adapter: FieldAdapter = field(default_factory=FieldAdapter)

    @classmethod
    def from_env(cls, env=os.environ, adapter_file: str | None = None) -> "RemoteConfig":
        url = env.get("PROVIDER_URL")
        if not url:
            raise ProviderUnavailable("PROVIDER_URL is not set")
        cfg = cls(
            base_url=url,
            api_key=env.get("PROVIDER_KEY"),
            timeout_ms=int(env.get("PROVIDER_TIMEOUT_MS", "30000")),
        )
        if adapter_file:
            cfg = replace(cfg, adapter=FieldAdapter.from_file(adapter_file))
        return cfg


def _requests_transport(url: str, body: dict, headers: dict, timeout_s: float):
    resp = requests.post(url, json=body, headers=headers, timeout=timeout_s)
    try:
        data = resp.json()
    except ValueError:
        data = {"error": resp.text}
    return resp.status_code, data


def _dig(data: Any, path: str) -> Any:
    node = data
    for part in path.split("."):
        if isinstance(node, list):
            node = node[int(part)]
        elif isinstance(node, dict):
            node = node[part]
        else:
            raise KeyError(path)
    return node


class RemoteProvider(ScoredGenerationProvider):
    """Scores forced continuations against a remote logprob endpoint."""

    def __init__(self, config: RemoteConfig, transport: Transport | None = None):
        self.config = config
        self._transport = transport or _requests_transport

    @property
    def provider_id(self) -> str:
        return f"remote:{self.config.base_url}"

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            scheme = self.config.auth_scheme
            value = f"{scheme} {self.config.api_key}" if scheme else self.config.api_key
            headers[self.config.auth_header] = value
        return headers

    def _post(self, path: str, body: dict) -> Any:
        url = self.config.base_url.rstrip("/") + path
        try:
            status, data = self._transport(url, body, self._headers(), self.config.timeout_ms / 1000.0)
        except requests.RequestException as exc:
            raise ProviderUnavailable(f"POST {url} failed: {exc}") from exc
        if status >= 500:
            raise ProviderUnavailable(f"POST {url} returned {status}: {data}")
        if status >= 400:
            message = str(data)
            if "context" in message.lower() and ("long" in message.lower() or "length" in message.lower()):
                raise ContextTooLong(message)
            raise ProviderUnavailable(f"POST {url} returned {status}: {data}")
        return data

    def _parse_continuation(self, data: Any) -> ScoredContinuation:
        adapter = self.config.adapter
        try:
            tokens = list(_dig(data, adapter.tokens_path))
            log_probs = list(_dig(data, adapter.token_logprobs_path))
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"response missing token log-probs: {exc}") from exc
        return ScoredContinuation.from_token_log_probs(tokens, log_probs)

    def generate(self, prompt, max_tokens: int = 256, seed: int | None = None) -> ScoredContinuation:
        adapter = self.config.adapter
        body = {
            adapter.prompt_field: rendered(prompt),
            adapter.max_tokens_field: max_tokens,
            adapter.logprobs_field: True,
        }
        if seed is not None:
            body[adapter.seed_field] = seed
        return self._parse_continuation(self._post(self.config.generate_path, body))

    def score_forced(self, prompt, prefix, continuation) -> ScoredContinuation:
        if not continuation:
            raise ValueError("continuation must be non-empty")
        adapter = self.config.adapter
        continuation_text = "".join(continuation)
        body = {
            adapter.prompt_field: rendered(prompt) + "".join(prefix),
            adapter.continuation_field: continuation_text,
            adapter.logprobs_field: True,
        }
        scored = self._parse_continuation(self._post(self.config.score_path, body))
        if scored.text != continuation_text:
            raise TokenizationMismatch(
                "endpoint could not force the requested tokens: "
                f"{scored.text!r} != {continuation_text!r}"
            )
        return scored
