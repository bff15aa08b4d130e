"""HTTP JSON service: the real-time deployment mode and the backend for the
review panel. Thin layer over a Toolchain; every number in a response comes
from the pipeline, never recomputed here.

Routes (all under /v1, errors as {"error": code, "detail": text}):
    POST /v1/predict            run the pipeline on submitted source
    POST /v1/feedback           record a vote and move the source vector
    GET  /v1/functions/{id}     stored record, current vector, vote summary
    POST /v1/scan               start an asynchronous batch scan
    GET  /v1/scan/{id}          scan progress or finished report
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import (
    CoincidentVectors,
    MissingPrerequisite,
    NoLeaves,
    UnknownFunction,
    UnparsableSource,
)
from .pipeline import Toolchain, ToolchainConfig


class PredictRequest(BaseModel):
    source: str
    module_id: str | None = None
    include_all: bool = False


class FeedbackRequest(BaseModel):
    source_fn: str
    target_fn: str
    polarity: str


class ScanRequest(BaseModel):
    component: str = ""


def error_response(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


def create_app(toolchain: Toolchain) -> FastAPI:
    app = FastAPI(title="vulnvec", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[toolchain.config.cors_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.toolchain = toolchain
    app.state.write_lock = threading.Lock()
    app.state.scan_jobs: dict[str, dict] = {}
    app.state.executor = ThreadPoolExecutor(max_workers=2)

    @app.exception_handler(UnparsableSource)
    async def unparsable(request: Request, exc):
        return error_response(400, "unparsable_source", str(exc))

    @app.exception_handler(NoLeaves)
    async def no_leaves(request: Request, exc):
        return error_response(400, "unparsable_source", str(exc))

    @app.exception_handler(UnknownFunction)
    async def unknown_function(request: Request, exc):
        return error_response(404, "unknown_function", str(exc))

    @app.exception_handler(MissingPrerequisite)
    async def not_loaded(request: Request, exc):
        return error_response(503, "models_not_loaded", str(exc))

    @app.exception_handler(CoincidentVectors)
    async def coincident(request: Request, exc):
        return error_response(409, "coincident_vectors", str(exc))

    @app.post("/v1/predict")
    def predict(request: PredictRequest):
        tc: Toolchain = app.state.toolchain
        if not tc.ready_for_predict:
            return error_response(503, "models_not_loaded", "train and load models first")
        with app.state.write_lock:  # submissions are persisted
            return tc.predict_source(
                request.source, request.module_id, request.include_all
            )

    @app.post("/v1/feedback")
    def feedback(request: FeedbackRequest):
        if request.polarity not in ("+", "-"):
            return error_response(400, "bad_polarity", "polarity must be '+' or '-'")
        tc: Toolchain = app.state.toolchain
        with app.state.write_lock:
            return tc.record_feedback(
                request.source_fn, request.target_fn, request.polarity
            )

    @app.get("/v1/functions/{fn_id}")
    def get_function(fn_id: str):
        tc: Toolchain = app.state.toolchain
        if tc.embedding is None:
            return error_response(503, "models_not_loaded", "store has no embedding model")
        return tc.get_function(fn_id)

    @app.post("/v1/scan")
    def start_scan(request: ScanRequest):
        tc: Toolchain = app.state.toolchain
        if not tc.ready_for_predict:
            return error_response(503, "models_not_loaded", "train and load models first")
        report_id = uuid.uuid4().hex[:12]
        job = {"status": "running", "progress": 0.0, "component": request.component}
        app.state.scan_jobs[report_id] = job

        def run():
            def progress(done, total):
                job["progress"] = done / total if total else 1.0

            try:
                rows = tc.scan(request.component, progress=progress)
                with app.state.write_lock:
                    tc.store.save_text(
                        f"reports/{report_id}.jsonl",
                        "".join(json.dumps(r) + "\n" for r in rows),
                    )
                job["rows"] = rows
                job["progress"] = 1.0
                job["status"] = "complete"
            except Exception as exc:  # surfaced on poll
                job["status"] = "failed"
                job["detail"] = str(exc)

        app.state.executor.submit(run)
        return {"report_id": report_id, "status": "running"}

    @app.get("/v1/scan/{report_id}")
    def get_scan(report_id: str):
        job = app.state.scan_jobs.get(report_id)
        if job is None:
            return error_response(404, "unknown_report", f"no scan {report_id!r}")
        if job["status"] == "running":
            return {"status": "running", "progress": job["progress"]}
        if job["status"] == "failed":
            return error_response(500, "scan_failed", job.get("detail", ""))
        return {"status": "complete", "rows": job["rows"]}

    return app


def serve(store_root: str, config: ToolchainConfig) -> None:
    import uvicorn

    toolchain = Toolchain.load(store_root, config)
    app = create_app(toolchain)
    uvicorn.run(app, host="127.0.0.1", port=config.port)
