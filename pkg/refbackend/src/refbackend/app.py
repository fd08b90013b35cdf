"""FastAPI application serving /v1/segment and /v1/inpaint.

Models load at application startup (checkpoint-backed adapters verify and
load their weights then, or refuse to serve). A bounded job semaphore
keeps the model stacks from oversubscribing; requests beyond capacity get
a retriable 503.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .config import ServerConfig
from .models import build_inpainter, build_segmenter
from .wire import (
    InpaintReply,
    InpaintRequest,
    MalformedInput,
    PROTOCOL_VERSION,
    SegmentReply,
    SegmentRequest,
    VERSION_HEADER,
    array_to_mask,
    decode_image,
    encode_image,
    mask_to_array,
)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"message": message}},
        headers={VERSION_HEADER: PROTOCOL_VERSION},
    )


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    segmenter = build_segmenter(config.segmenter)
    inpainter = build_inpainter(config.inpainter)
    jobs = threading.BoundedSemaphore(config.max_jobs)

    app = FastAPI(title="rve-refbackend", version=PROTOCOL_VERSION)
    app.state.config = config
    app.state.jobs = jobs

    class _Overloaded(Exception):
        pass

    @contextmanager
    def job_slot():
        if not jobs.acquire(blocking=False):
            raise _Overloaded()
        try:
            yield
        finally:
            jobs.release()

    @app.middleware("http")
    async def echo_protocol_version(request: Request, call_next):
        response = await call_next(request)
        response.headers[VERSION_HEADER] = PROTOCOL_VERSION
        return response

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return _error(400, f"malformed request: {exc.errors()[:3]}")

    @app.exception_handler(MalformedInput)
    async def malformed_body(request: Request, exc: MalformedInput):
        return _error(400, str(exc))

    @app.exception_handler(_Overloaded)
    async def overloaded(request: Request, exc: _Overloaded):
        return _error(503, "over capacity, retry later")

    @app.exception_handler(Exception)
    async def model_failure(request: Request, exc: Exception):
        return _error(500, f"model failure: {exc}")

    @app.post("/v1/segment")
    def serve_segment(req: SegmentRequest) -> SegmentReply:
        if req.granularity <= 0:
            raise MalformedInput("granularity must be > 0")
        image = decode_image(req.image)
        with job_slot():
            masks = segmenter.segment(image, req.granularity)
        return SegmentReply(masks=[array_to_mask(m) for m in masks])

    @app.post("/v1/inpaint")
    def serve_inpaint(req: InpaintRequest) -> InpaintReply:
        image = decode_image(req.image)
        mask = mask_to_array(req.mask)
        if mask.shape != image.shape[:2]:
            raise MalformedInput(
                f"mask is {mask.shape[1]}x{mask.shape[0]}, image is "
                f"{image.shape[1]}x{image.shape[0]}"
            )
        if not req.prompt.strip():
            raise MalformedInput("prompt must be nonempty")
        with job_slot():
            out = inpainter.inpaint(image, mask, req.prompt, req.seed, req.steps)
        if out.shape != image.shape:
            raise RuntimeError("inpainter returned wrong dimensions")
        return InpaintReply(image=encode_image(out))

    return app
