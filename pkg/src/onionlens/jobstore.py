"""Persistent scan-job records.

One JSON file per job plus an index file listing ids in creation order,
all written atomically (temp file + rename). State only moves forward:
queued -> crawling -> classifying -> done, with failed reachable from
any non-terminal state. On restart, queued jobs are re-runnable and
jobs caught mid-flight are marked failed("interrupted").
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import SchemaError

STATES = ("queued", "crawling", "classifying", "done", "failed")
_ORDER = {s: i for i, s in enumerate(("queued", "crawling", "classifying", "done"))}
TERMINAL = ("done", "failed")


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class ScanJob:
    id: str
    url: str
    state: str = "queued"
    submitted_at: str = field(default_factory=_now)
    finished_at: str | None = None
    report: dict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "url": self.url,
            "state": self.state,
            "submitted_at": self.submitted_at,
            "finished_at": self.finished_at,
            "report": self.report,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ScanJob":
        try:
            job = cls(id=str(raw["id"]), url=str(raw["url"]), state=str(raw["state"]),
                      submitted_at=str(raw["submitted_at"]),
                      finished_at=raw.get("finished_at"),
                      report=raw.get("report"), error=raw.get("error"))
        except KeyError as exc:
            raise SchemaError(f"job record missing field {exc}") from exc
        if job.state not in STATES:
            raise SchemaError(f"job {job.id}: unknown state {job.state!r}")
        return job


def _atomic_write(path: str, payload: dict) -> None:
    tmp = f"{path}.tmp.{os.getpid()}.{threading.get_ident()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


class JobStore:
    """Directory-backed job records, safe across threads in one process."""

    def __init__(self, root: str):
        self.root = root
        self.jobs_dir = os.path.join(root, "jobs")
        self.index_path = os.path.join(root, "index.json")
        os.makedirs(self.jobs_dir, exist_ok=True)
        self._lock = threading.RLock()
        if not os.path.isfile(self.index_path):
            _atomic_write(self.index_path, {"ids": []})

    # -- internals ---------------------------------------------------------

    def _job_path(self, job_id: str) -> str:
        # ids are uuid4 hex strings; reject anything path-like
        if not job_id.replace("-", "").isalnum():
            raise SchemaError(f"malformed job id {job_id!r}")
        return os.path.join(self.jobs_dir, f"{job_id}.json")

    def _read_index(self) -> list[str]:
        with open(self.index_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        ids = raw.get("ids")
        if not isinstance(ids, list):
            raise SchemaError("job index is malformed")
        return [str(i) for i in ids]

    def _write(self, job: ScanJob) -> None:
        _atomic_write(self._job_path(job.id), job.to_dict())

    # -- public API --------------------------------------------------------

    def create(self, url: str) -> ScanJob:
        with self._lock:
            job = ScanJob(id=str(uuid.uuid4()), url=url)
            self._write(job)
            ids = self._read_index()
            ids.append(job.id)
            _atomic_write(self.index_path, {"ids": ids})
            return job

    def get(self, job_id: str) -> ScanJob | None:
        try:
            path = self._job_path(job_id)
        except SchemaError:
            return None
        if not os.path.isfile(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return ScanJob.from_dict(json.load(fh))

    def update(self, job_id: str, state: str, *, report: dict | None = None,
               error: str | None = None) -> ScanJob:
        """Advance a job's state; invalid transitions raise ValueError."""
        if state not in STATES:
            raise ValueError(f"unknown state {state!r}")
        with self._lock:
            job = self.get(job_id)
            if job is None:
                raise KeyError(job_id)
            if job.state in TERMINAL:
                raise ValueError(f"job {job_id} is already {job.state}")
            if state == "failed":
                if not error:
                    raise ValueError("failed state requires an error message")
                job.error = error
                job.finished_at = _now()
            else:
                if _ORDER[state] <= _ORDER[job.state]:
                    raise ValueError(f"cannot move {job.state} -> {state}")
                if state == "done":
                    if report is None:
                        raise ValueError("done state requires a report")
                    job.report = report
                    job.finished_at = _now()
            job.state = state
            self._write(job)
            return job

    def list(self, offset: int = 0, limit: int = 20) -> tuple[int, list[ScanJob]]:
        """Newest-first page of jobs plus the total count."""
        if offset < 0 or limit < 0:
            raise ValueError("offset and limit must be non-negative")
        with self._lock:
            ids = self._read_index()
        newest_first = list(reversed(ids))
        page = []
        for job_id in newest_first[offset:offset + limit]:
            job = self.get(job_id)
            if job is not None:
                page.append(job)
        return len(newest_first), page

    def recover(self) -> list[ScanJob]:
        """Reconcile after restart; returns jobs to re-enqueue.

        Queued jobs come back for execution; jobs that were mid-scan
        when the process died become failed("interrupted").
        """
        requeue: list[ScanJob] = []
        with self._lock:
            for job_id in self._read_index():
                job = self.get(job_id)
                if job is None:
                    continue
                if job.state == "queued":
                    requeue.append(job)
                elif job.state in ("crawling", "classifying"):
                    self.update(job.id, "failed", error="interrupted")
        return requeue
