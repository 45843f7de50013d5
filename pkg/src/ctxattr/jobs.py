"""Asynchronous attribution jobs with monotone progress."""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable

_TRANSITIONS = {
    "queued": {"running"},
    "running": {"done", "failed"},
    "done": set(),
    "failed": set(),
}


class JobStatus(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


@dataclass
class JobRecord:
    job_id: str
    status: JobStatus = JobStatus.QUEUED
    completed: int = 0
    total: int = 0
    result: Any = None
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "jobId": self.job_id,
            "status": self.status.value,
            "progress": {"completed": self.completed, "total": self.total},
            "result": self.result,
            "error": self.error,
        }


class JobRegistry:
    """Runs submitted callables on a pool and tracks their progress."""

    def __init__(self, max_workers: int = 4):
        self._executor = ThreadPoolExecutor(max_workers=max_workers)
        self._jobs: dict[str, JobRecord] = {}
        self._lock = threading.Lock()

    def submit(self, work: Callable[[Callable[[int, int], None]], Any], total: int = 0) -> str:
        """Start a job; ``work`` receives a progress(completed, total) callback."""
        job_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._jobs[job_id] = JobRecord(job_id=job_id, total=total)

        def progress(completed: int, total_now: int) -> None:
            with self._lock:
                record = self._jobs[job_id]
                # progress is monotone: laggard callbacks never move it backwards
                record.completed = max(record.completed, completed)
                record.total = total_now

        def run() -> None:
            self._transition(job_id, JobStatus.RUNNING)
            try:
                result = work(progress)
            except Exception as exc:  # noqa: BLE001 - job boundary
                with self._lock:
                    record = self._jobs[job_id]
                    record.error = f"{type(exc).__name__}: {exc}"
                self._transition(job_id, JobStatus.FAILED)
                return
            with self._lock:
                self._jobs[job_id].result = result
            self._transition(job_id, JobStatus.DONE)

        self._executor.submit(run)
        return job_id

    def _transition(self, job_id: str, status: JobStatus) -> None:
        with self._lock:
            record = self._jobs[job_id]
            if status.value not in _TRANSITIONS[record.status.value]:
                raise RuntimeError(f"illegal transition {record.status.value} -> {status.value}")
            record.status = status

    def get(self, job_id: str) -> JobRecord | None:
        with self._lock:
            return self._jobs.get(job_id)

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)
