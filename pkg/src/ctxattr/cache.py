"""Append-only provider-call cache keyed by content hash.

Each cache directory holds JSONL segment files; a record is one JSON object
per line. Corrupt lines are skipped with a warning and never fail a run.
Values are deterministic functions of the key, so concurrent writers with
last-writer-wins semantics are benign.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .providers.base import ScoredContinuation, ScoredGenerationProvider, rendered

logger = logging.getLogger(__name__)


def cache_key(provider_id: str, prompt_text: str, prefix, continuation) -> str:
    payload = json.dumps(
        [provider_id, prompt_text, list(prefix), list(continuation)],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheRecord:
    key: str
    total_log_prob: float
    token_log_probs: tuple[float, ...]
    tokens: tuple[str, ...]
    created_at: float

    def to_json_dict(self) -> dict:
        return {
            "key": self.key,
            "totalLogProb": self.total_log_prob,
            "tokenLogProbs": list(self.token_log_probs),
            "tokens": list(self.tokens),
            "createdAt": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CacheRecord":
        return cls(
            key=data["key"],
            total_log_prob=float(data["totalLogProb"]),
            token_log_probs=tuple(float(v) for v in data["tokenLogProbs"]),
            tokens=tuple(data["tokens"]),
            created_at=float(data["createdAt"]),
        )

    def continuation(self) -> ScoredContinuation:
        return ScoredContinuation(self.tokens, self.token_log_probs, self.total_log_prob)


class ScoreCache:
    """In-memory index over append-only JSONL segments."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._records: dict[str, CacheRecord] = {}
        self._lock = threading.Lock()
        self._segment_path = self.directory / f"segment-{int(time.time() * 1000)}-{os.getpid()}.jsonl"
        self._segment_file = None
        self.hits = 0
        self.misses = 0
        self._load()

    def _load(self) -> None:
        for segment in sorted(self.directory.glob("segment-*.jsonl")):
            with open(segment, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = CacheRecord.from_json_dict(json.loads(line))
                    except (ValueError, KeyError, TypeError) as exc:
                        logger.warning("skipping corrupt cache line %s:%d: %s", segment, line_no, exc)
                        continue
                    self._records[record.key] = record

    def get(self, key: str) -> CacheRecord | None:
        with self._lock:
            record = self._records.get(key)
            if record is None:
                self.misses += 1
            else:
                self.hits += 1
            return record

    def put(self, record: CacheRecord) -> None:
        with self._lock:
            self._records[record.key] = record
            if self._segment_file is None:
                self._segment_file = open(self._segment_path, "a", encoding="utf-8")
            self._segment_file.write(json.dumps(record.to_json_dict(), sort_keys=True) + "\n")
            self._segment_file.flush()

    def stats(self) -> dict:
        with self._lock:
            return {"hits": self.hits, "misses": self.misses, "entries": len(self._records)}

    def close(self) -> None:
        with self._lock:
            if self._segment_file is not None:
                self._segment_file.close()
                self._segment_file = None


class CachingProvider(ScoredGenerationProvider):
    """Memoizes score_forced calls; replay is bit-identical to the first call."""

    def __init__(self, inner: ScoredGenerationProvider, cache: ScoreCache):
        self.inner = inner
        self.cache = cache

    @property
    def provider_id(self) -> str:
        return self.inner.provider_id

    def generate(self, prompt, max_tokens: int = 256, seed: int | None = None) -> ScoredContinuation:
        return self.inner.generate(prompt, max_tokens=max_tokens, seed=seed)

    def score_forced(self, prompt, prefix, continuation) -> ScoredContinuation:
        key = cache_key(self.provider_id, rendered(prompt), prefix, continuation)
        record = self.cache.get(key)
        if record is not None:
            return record.continuation()
        scored = self.inner.score_forced(prompt, prefix, continuation)
        self.cache.put(CacheRecord(
            key=key,
            total_log_prob=scored.total_log_prob,
            token_log_probs=scored.token_log_probs,
            tokens=scored.tokens,
            created_at=time.time(),
        ))
        return scored

    def tokenize_response(self, text: str) -> list[str]:
        return self.inner.tokenize_response(text)

    def merge_question_answer(self, question, answer, max_tokens: int = 64, seed=None) -> str:
        return self.inner.merge_question_answer(question, answer, max_tokens=max_tokens, seed=seed)
