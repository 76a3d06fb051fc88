"""HTTP scan service.

A small FastAPI app over the job store and the scan pipeline: submit a
URL, poll the job, read the report. Artifacts load in a background
thread at startup; until they are ready (or if loading failed) health
and submissions answer 503. Completed jobs survive restarts via the
job store.
"""

from __future__ import annotations

import contextlib
import queue
import threading

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import pipeline
from .config import PipelineConfig
from .errors import NonOnionHost, ValidationError
from .harvester import _check_host, normalize_url
from .jobstore import JobStore
from .model import model_info

API_PREFIX = "/api/v1"


class ScanRequest(BaseModel):
    url: str


class _ServiceState:
    def __init__(self, config: PipelineConfig, store: JobStore):
        self.config = config
        self.store = store
        self.artifacts: pipeline.Artifacts | None = None
        self.load_error: str | None = None
        self.queue: "queue.Queue[str | None]" = queue.Queue()
        self.threads: list[threading.Thread] = []
        self.ready = threading.Event()

    @property
    def loading(self) -> bool:
        return self.artifacts is None and self.load_error is None


def _worker(state: _ServiceState) -> None:
    while True:
        job_id = state.queue.get()
        if job_id is None:
            return
        job = state.store.get(job_id)
        if job is None or job.state != "queued":
            continue

        def on_phase(phase: str, _id=job_id) -> None:
            state.store.update(_id, phase)

        try:
            report = pipeline.scan(job.url, state.config, state.artifacts, on_phase=on_phase)
            state.store.update(job_id, "done", report=report.to_dict())
        except Exception as exc:  # noqa: BLE001 - job-level failure, recorded
            with contextlib.suppress(ValueError, KeyError):
                state.store.update(job_id, "failed", error=str(exc))


def create_app(config: PipelineConfig, loader=None) -> FastAPI:
    """Build the service app. `loader` overrides artifact loading in tests."""
    if not config.job_store_path:
        raise ValidationError("job_store_path", "required for the service")
    store = JobStore(config.job_store_path)
    state = _ServiceState(config, store)
    if loader is not None:
        pipeline_load = loader
    else:
        pipeline_load = pipeline.load_artifacts

    def _load(state=state):
        try:
            state.artifacts = pipeline_load(state.config)
        except Exception as exc:  # noqa: BLE001 - surfaced via health
            state.load_error = str(exc)
            return
        for job in state.store.recover():
            state.queue.put(job.id)
        for i in range(state.config.scan_workers):
            t = threading.Thread(target=_worker, args=(state,),
                                 name=f"scan-worker-{i}", daemon=True)
            t.start()
            state.threads.append(t)
        state.ready.set()

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        t = threading.Thread(target=_load, name="artifact-loader", daemon=True)
        t.start()
        yield
        for _ in state.threads:
            state.queue.put(None)
        for worker in state.threads:
            worker.join(timeout=10)

    app = FastAPI(title="onionlens", lifespan=lifespan)
    app.state.service = state

    @app.get(API_PREFIX + "/health")
    def health():
        if state.loading:
            return JSONResponse(status_code=503, content={"status": "loading"})
        if state.load_error:
            return JSONResponse(status_code=503,
                                content={"status": "error", "error": state.load_error})
        info = model_info(state.artifacts.model)
        total, _ = store.list(0, 0)
        return {
            "status": "ok",
            "model": {
                "total_params": info["total_params"],
                "trainable_params": info["trainable_params"],
                "class_order": info["class_order"],
            },
            "jobs": total,
        }

    @app.post(API_PREFIX + "/scans", status_code=202)
    def submit(req: ScanRequest):
        if state.loading or state.load_error:
            raise HTTPException(status_code=503, detail="model loading")
        try:
            url = normalize_url(req.url)
            _check_host(url, state.config)
        except (ValidationError, NonOnionHost) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        job = store.create(url)
        state.queue.put(job.id)
        return {"id": job.id, "state": job.state}

    @app.get(API_PREFIX + "/scans/{job_id}")
    def get_scan(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no such job {job_id!r}")
        return job.to_dict()

    @app.get(API_PREFIX + "/scans")
    def list_scans(offset: int = 0, limit: int = 20):
        if offset < 0 or limit < 0:
            raise HTTPException(status_code=400, detail="offset/limit must be non-negative")
        total, jobs = store.list(offset, limit)
        summaries = []
        for job in jobs:
            summary = {
                "id": job.id,
                "url": job.url,
                "state": job.state,
                "submitted_at": job.submitted_at,
                "finished_at": job.finished_at,
                "activity": (job.report or {}).get("activity"),
                "error": job.error,
            }
            summaries.append(summary)
        return {"total": total, "offset": offset, "limit": limit, "jobs": summaries}

    return app
