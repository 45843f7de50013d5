import json
import threading
import time

import pytest

from ctxattr import attribute, make_planted_case
from ctxattr.cache import CacheRecord, CachingProvider, ScoreCache, cache_key
from ctxattr.providers.synthetic import PlantedLinearOracle


def run_attribution(case, provider, seed=11, n=16, flight=4):
    return attribute(
        provider, case.partition, case.template, case.query, case.response_tokens,
        n=n, seed=seed, max_in_flight=flight,
    )


class TestCacheKey:
    def test_stable_and_sensitive(self):
        a = cache_key("p", "prompt", ["x "], ["y."])
        assert a == cache_key("p", "prompt", ["x "], ["y."])
        assert a != cache_key("p", "prompt2", ["x "], ["y."])
        assert a != cache_key("q", "prompt", ["x "], ["y."])
        assert a != cache_key("p", "prompt", [], ["x ", "y."])
        assert len(a) == 64  # sha-256 hex


class TestScoreCache:
    def test_cold_then_warm_bit_identical(self, tmp_path):
        case = make_planted_case(d=12, k=3, seed=2)
        cold = run_attribution(case, CachingProvider(case.provider, ScoreCache(tmp_path)))
        fresh_case = make_planted_case(d=12, k=3, seed=2)
        counted = fresh_case.provider
        warm_cache = ScoreCache(tmp_path)
        warm = run_attribution(fresh_case, CachingProvider(counted, warm_cache))
        assert cold.to_json() == warm.to_json()
        assert counted.call_count == 0  # every score came from disk
        assert warm_cache.stats()["hits"] == 16

    def test_replayed_records_round_trip(self, tmp_path):
        cache = ScoreCache(tmp_path)
        record = CacheRecord("k1", -2.0, (-1.0, -1.0), ("a ", "b."), time.time())
        cache.put(record)
        reloaded = ScoreCache(tmp_path)
        got = reloaded.get("k1")
        assert got == record
        scored = got.continuation()
        assert scored.total_log_prob == -2.0
        assert scored.text == "a b."

    def test_corrupt_lines_are_skipped(self, tmp_path, caplog):
        cache = ScoreCache(tmp_path)
        cache.put(CacheRecord("good", -1.0, (-1.0,), ("x",), 0.0))
        cache.close()
        segment = next(tmp_path.glob("segment-*.jsonl"))
        with open(segment, "a", encoding="utf-8") as fh:
            fh.write("{not json at all\n")
            fh.write(json.dumps({"key": "missing-fields"}) + "\n")
        with caplog.at_level("WARNING"):
            reloaded = ScoreCache(tmp_path)
        assert reloaded.get("good") is not None
        assert reloaded.stats()["entries"] == 1
        assert any("corrupt" in message for message in caplog.messages)

    def test_stats_counts(self, tmp_path):
        cache = ScoreCache(tmp_path)
        assert cache.get("nope") is None
        cache.put(CacheRecord("yes", -1.0, (-1.0,), ("t",), 0.0))
        assert cache.get("yes") is not None
        stats = cache.stats()
        assert stats == {"hits": 1, "misses": 1, "entries": 1}


class ConcurrencyCountingOracle(PlantedLinearOracle):
    """Counts how many score calls overlap in time."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0

    def score_forced(self, prompt, prefix, continuation):
        with self._lock:
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        time.sleep(0.005)
        try:
            return super().score_forced(prompt, prefix, continuation)
        finally:
            with self._lock:
                self.in_flight -= 1


class TestConcurrencyBound:
    @pytest.mark.parametrize("limit", [1, 3])
    def test_at_most_p_calls_in_flight(self, limit):
        case = make_planted_case(d=10, k=2, seed=6)
        counting = ConcurrencyCountingOracle(
            [s.text for s in case.partition.sources], case.weights, case.intercept
        )
        run_attribution(case, counting, n=24, flight=limit)
        assert 1 <= counting.max_in_flight <= limit
