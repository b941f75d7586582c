"""Background job execution with a bounded worker pool.

Jobs move queued -> running -> done | failed and never change state again.
Failures capture the error message instead of crashing the service.
"""

from __future__ import annotations

import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .errors import OverseecError


class UnknownJobError(OverseecError):
    """No job exists under the given id."""


class JobState(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


_FINAL = (JobState.DONE, JobState.FAILED)


@dataclass
class Job:
    id: str
    kind: str
    state: JobState = JobState.QUEUED
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    error: str | None = None
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "state": self.state.value,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "error": self.error,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


class JobRegistry:
    """Submits callables to a worker pool and tracks their lifecycle."""

    def __init__(self, workers: int = 2):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()

    def submit(self, kind: str, fn: Callable[[], dict[str, Any]], inputs: dict | None = None) -> Job:
        """Queue fn; its returned dict becomes the job's outputs."""
        job = Job(id=uuid.uuid4().hex, kind=kind, inputs=dict(inputs or {}))
        with self._lock:
            self._jobs[job.id] = job
        self._pool.submit(self._run, job.id, fn)
        return job

    def _transition(self, job_id: str, state: JobState, *, outputs: dict | None = None,
                    error: str | None = None) -> None:
        with self._lock:
            job = self._jobs[job_id]
            if job.state in _FINAL:
                return
            job.state = state
            job.updated_at = time.time()
            if outputs is not None:
                job.outputs = outputs
            if error is not None:
                job.error = error

    def _run(self, job_id: str, fn: Callable[[], dict[str, Any]]) -> None:
        self._transition(job_id, JobState.RUNNING)
        try:
            outputs = fn()
        except Exception as exc:  # noqa: BLE001 - job failures must not kill the worker
            self._transition(job_id, JobState.FAILED, error=f"{type(exc).__name__}: {exc}")
            return
        self._transition(job_id, JobState.DONE, outputs=outputs or {})

    def get(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise UnknownJobError(f"no job {job_id}")
            return self._jobs[job_id]

    def wait(self, job_id: str, timeout: float = 60.0, poll: float = 0.02) -> Job:
        """Block until the job reaches a final state (mainly for tests and the CLI)."""
        deadline = time.monotonic() + timeout
        while True:
            job = self.get(job_id)
            if job.state in _FINAL:
                return job
            if time.monotonic() > deadline:
                raise TimeoutError(f"job {job_id} still {job.state.value} after {timeout}s")
            time.sleep(poll)

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)
