"""Detection web service: POST /v1/detect and GET /v1/health.

Requests carry either a raw snippet (split server-side into context plus a
trailing block window) or an explicit context/block pair. The model is
immutable and shared; a hot swap replaces the whole state object between
requests.
"""

from __future__ import annotations

import statistics
import time

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from evd import __version__
from evd.classifier import ModelParams, detect, load_model

DEFAULT_MAX_SNIPPET_BYTES = 64 * 1024
DEFAULT_BLOCK_LINES = 10


class DetectRequest(BaseModel):
    language: str = "javascript"
    snippet: str | None = None
    context: str | None = None
    block: str | None = None
    threshold_override: float | None = Field(default=None, ge=0.0, le=1.0)
    client_id: str | None = None
    log_snippet: bool = False  # telemetry stays metadata-only unless opted in


class DetectResponse(BaseModel):
    verdict: str
    score: float
    cwe: str | None = None
    model_version: str
    elapsed_ms: float


def split_snippet(snippet: str, block_lines: int = DEFAULT_BLOCK_LINES) -> tuple[str, str]:
    """Trailing-window split: the last ``block_lines`` lines become the block."""
    lines = snippet.splitlines(keepends=True)
    if len(lines) <= block_lines:
        return "", snippet
    cut = len(lines) - block_lines
    return "".join(lines[:cut]), "".join(lines[cut:])


class ServiceState:
    def __init__(
        self,
        params: ModelParams,
        threshold: float,
        max_snippet_bytes: int = DEFAULT_MAX_SNIPPET_BYTES,
        block_lines: int = DEFAULT_BLOCK_LINES,
    ):
        self.params = params
        self.threshold = threshold
        self.max_snippet_bytes = max_snippet_bytes
        self.block_lines = block_lines
        self.started = time.time()
        self.request_count = 0
        self.latencies_ms: list[float] = []


def create_app(
    params: ModelParams | None = None,
    model_path: str | None = None,
    threshold: float = 0.5,
    max_snippet_bytes: int = DEFAULT_MAX_SNIPPET_BYTES,
    block_lines: int = DEFAULT_BLOCK_LINES,
) -> FastAPI:
    if params is None and model_path is not None:
        params = load_model(model_path)
    app = FastAPI(title="edit-time vulnerability detection", version=__version__)
    app.state.detector = (
        ServiceState(params, threshold, max_snippet_bytes, block_lines)
        if params is not None
        else None
    )

    @app.post("/v1/detect", response_model=DetectResponse)
    def handle_detect(request: DetectRequest) -> DetectResponse:
        state: ServiceState | None = app.state.detector
        if state is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        if request.snippet is not None:
            if len(request.snippet.encode("utf-8")) > state.max_snippet_bytes:
                raise HTTPException(
                    status_code=413,
                    detail=f"snippet exceeds {state.max_snippet_bytes} bytes",
                )
            context, block = split_snippet(request.snippet, state.block_lines)
        elif request.context is not None or request.block is not None:
            context = request.context or ""
            block = request.block or ""
        else:
            raise HTTPException(status_code=422, detail="snippet or context/block required")

        threshold = (
            request.threshold_override
            if request.threshold_override is not None
            else state.threshold
        )
        started = time.perf_counter()
        result = detect(state.params, context, block, threshold)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        state.request_count += 1
        state.latencies_ms.append(elapsed_ms)
        if len(state.latencies_ms) > 10000:
            del state.latencies_ms[: len(state.latencies_ms) - 10000]
        return DetectResponse(
            verdict=result.verdict,
            score=result.score,
            cwe=result.cwe,
            model_version=f"{__version__}/fmt{state.params.version}",
            elapsed_ms=elapsed_ms,
        )

    @app.get("/v1/health")
    def handle_health() -> dict:
        state: ServiceState | None = app.state.detector
        if state is None:
            return {"status": "degraded", "detail": "model not loaded"}
        lat = sorted(state.latencies_ms)
        return {
            "status": "ok",
            "model_version": f"{__version__}/fmt{state.params.version}",
            "uptime_seconds": time.time() - state.started,
            "request_count": state.request_count,
            "p50_ms": statistics.median(lat) if lat else None,
            "p95_ms": lat[int(0.95 * (len(lat) - 1))] if lat else None,
            "threshold": state.threshold,
        }

    return app
