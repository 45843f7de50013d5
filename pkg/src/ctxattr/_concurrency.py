"""Bounded-concurrency scheduler shared by all provider-bound loops."""

from __future__ import annotations

from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from typing import Callable, TypeVar

T = TypeVar("T")


def map_bounded(
    fn: Callable[[int], T],
    count: int,
    max_in_flight: int = 8,
    on_progress: Callable[[int, int], None] | None = None,
) -> list[T]:
    """Run fn(0..count-1) with at most max_in_flight calls in flight.

    Results come back ordered by index regardless of completion order; the
    first failure propagates after in-flight work is drained.
    """
    if count == 0:
        return []
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    results: dict[int, T] = {}
    done_count = 0
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        pending = {pool.submit(fn, i): i for i in range(count)}
        while pending:
            finished, _ = wait(pending, return_when=FIRST_COMPLETED)
            for future in finished:
                index = pending.pop(future)
                results[index] = future.result()
                done_count += 1
                if on_progress is not None:
                    on_progress(done_count, count)
    return [results[i] for i in range(count)]
