"""One adapter server = one capability behind the wire protocol.

The endpoint answers 503 until its engine has finished loading; protocol
violations are 400s with {"error", "detail"} bodies, matching the mock
servers bit for bit, so orchestrators cannot tell an adapter from a mock.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Any, Callable

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .engines import AdapterConfig, EngineLoadError, load_engine
from .wire import (
    PROTOCOL_VERSION,
    ChatRequest,
    ChatResponse,
    FillRequest,
    GenerateRequest,
    HealthResponse,
    ImageResponse,
    InpaintRequest,
    SegmentRequest,
    SegmentResponse,
    decode_image,
    decode_rle,
    encode_image,
)


def _error(status: int, code: str, detail: str | None = None) -> JSONResponse:
    return JSONResponse({"error": code, "detail": detail}, status_code=status)


def create_adapter_app(
    config: AdapterConfig,
    engine_factory: Callable[[], Any] | None = None,
) -> FastAPI:
    factory = engine_factory if engine_factory is not None else (lambda: load_engine(config))
    state: dict[str, Any] = {"engine": None, "error": None}

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        def load() -> None:
            try:
                state["engine"] = factory()
            except Exception as exc:
                state["error"] = str(exc)

        thread = threading.Thread(target=load, daemon=True)
        thread.start()
        yield

    app = FastAPI(title=f"{config.capability} adapter", lifespan=lifespan)
    app.state.engine_state = state

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_request", str(exc.errors()[:3]))

    def guard(version: str) -> JSONResponse | None:
        if version != PROTOCOL_VERSION:
            return _error(
                400, "unsupported_protocol_version",
                f"server speaks {PROTOCOL_VERSION!r}, request had {version!r}",
            )
        if state["error"] is not None:
            return _error(503, "engine_failed", state["error"])
        if state["engine"] is None:
            return _error(503, "loading", "engine is still loading")
        return None

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            capability=config.capability, protocol_version=PROTOCOL_VERSION
        )

    capability = config.capability

    if capability == "chat":

        @app.post("/v1/chat", response_model=ChatResponse)
        def chat(req: ChatRequest):
            if bad := guard(req.protocol_version):
                return bad
            image = decode_image(req.image) if req.image is not None else None
            transcript = [(t.role, t.text) for t in req.transcript]
            text = state["engine"].chat(image, transcript, req.message)
            return ChatResponse(request_id=req.request_id, text=text)

    if capability == "segment":

        @app.post("/v1/segment", response_model=SegmentResponse)
        def segment(req: SegmentRequest):
            if bad := guard(req.protocol_version):
                return bad
            image = decode_image(req.image)
            prompt = req.prompt.model_dump()
            if prompt["kind"] == "scribble":
                scribble = decode_rle(req.prompt.mask)  # type: ignore[union-attr]
                if scribble.shape != image.shape[:2]:
                    return _error(400, "invalid_request", "scribble dims mismatch")
                prompt["mask"] = scribble
            mask, label = state["engine"].segment(image, prompt)
            return SegmentResponse(request_id=req.request_id, mask=mask, label=label)

    if capability == "generate":

        @app.post("/v1/generate", response_model=ImageResponse)
        def generate(req: GenerateRequest):
            if bad := guard(req.protocol_version):
                return bad
            grounding = req.grounding.model_dump() if req.grounding else None
            if grounding and len(grounding["concepts"]) != len(grounding["boxes"]):
                return _error(400, "invalid_request", "concept/box count mismatch")
            arr = state["engine"].generate(req.caption, grounding, req.width, req.height)
            return ImageResponse(request_id=req.request_id, image=encode_image(arr))

    if capability == "inpaint":

        @app.post("/v1/inpaint", response_model=ImageResponse)
        def inpaint(req: InpaintRequest):
            if bad := guard(req.protocol_version):
                return bad
            image = decode_image(req.image)
            grounding = req.grounding.model_dump() if req.grounding else None
            mask = decode_rle(req.mask) if req.mask is not None else None
            if grounding and len(grounding["concepts"]) != len(grounding["boxes"]):
                return _error(400, "invalid_request", "concept/box count mismatch")
            if grounding is None and (mask is None or not req.prompt):
                return _error(400, "invalid_request", "need grounding or mask+prompt")
            if grounding is not None and (mask is not None or req.prompt is not None):
                return _error(400, "invalid_request", "grounding xor mask+prompt")
            if mask is not None and mask.shape != image.shape[:2]:
                return _error(400, "invalid_request", "mask dims mismatch")
            arr = state["engine"].inpaint(image, grounding, mask, req.prompt)
            if arr.shape[:2] != image.shape[:2]:
                return _error(500, "engine_error", "engine changed image dims")
            return ImageResponse(request_id=req.request_id, image=encode_image(arr))

    if capability == "fill":

        @app.post("/v1/fill", response_model=ImageResponse)
        def fill(req: FillRequest):
            if bad := guard(req.protocol_version):
                return bad
            image = decode_image(req.image)
            hole = decode_rle(req.mask)
            if hole.shape != image.shape[:2]:
                return _error(400, "invalid_request", "mask dims mismatch")
            if not hole.any():
                return _error(400, "invalid_request", "empty hole")
            arr = state["engine"].fill(image, hole)
            if (arr[:, :, 3] != 255).any():
                return _error(500, "engine_error", "fill left hole pixels")
            return ImageResponse(request_id=req.request_id, image=encode_image(arr))

    return app


def wait_until_ready(app: FastAPI, timeout_s: float = 600.0) -> None:
    """Block until the engine loaded; raise on load failure."""
    import time

    state = app.state.engine_state
    deadline = time.monotonic() + timeout_s
    while state["engine"] is None:
        if state["error"] is not None:
            raise EngineLoadError(state["error"])
        if time.monotonic() > deadline:
            raise EngineLoadError("engine load timed out")
        time.sleep(0.05)
