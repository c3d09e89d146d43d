"""FastAPI servers exposing the mock capabilities over the wire protocol.

One app can serve a single capability (standalone mode, one port per
capability) or all five at once, which is how tests and --mock serving
wire everything to a single base URL.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..errors import NoObjectFound, VisloopError
from ..geometry import BoundingBox, GroundingSpec, Point
from ..image import CanvasImage
from ..protocol import (
    PROTOCOL_VERSION,
    ChatRequest,
    ChatResponse,
    FillRequest,
    GenerateRequest,
    GroundingJson,
    HealthResponse,
    ImageResponse,
    InpaintRequest,
    RleJson,
    SegmentRequest,
    SegmentResponse,
)
from ..raster import RleMask
from .backends import MockBackends
from .scenes import SceneRegistry


def _error(status: int, code: str, detail: str | None = None) -> JSONResponse:
    return JSONResponse({"error": code, "detail": detail}, status_code=status)


def _decode_image(b64: str) -> CanvasImage:
    return CanvasImage.from_b64_png(b64)


def _decode_rle(obj: RleJson) -> RleMask:
    return RleMask.from_json(obj.model_dump())


def _decode_grounding(obj: GroundingJson | None) -> GroundingSpec | None:
    if obj is None:
        return None
    return GroundingSpec(
        tuple(obj.concepts), tuple(BoundingBox(*b) for b in obj.boxes)
    )


def create_mock_app(
    registry: SceneRegistry | None = None,
    capability: str | None = None,
    fixtures_dir: Path | None = None,
) -> FastAPI:
    """Mock capability server; `capability` limits which endpoint exists."""
    registry = registry or SceneRegistry()
    if fixtures_dir is not None:
        registry.load_dir(fixtures_dir)
    impl = MockBackends(registry)
    app = FastAPI(title="mock capability server")

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_request", str(exc.errors()[:3]))

    @app.exception_handler(VisloopError)
    async def on_domain_error(request: Request, exc: VisloopError):
        if isinstance(exc, NoObjectFound):
            return _error(404, "no_object_found", str(exc))
        return _error(400, "invalid_request", f"{exc.code}: {exc}")

    def check_version(version: str) -> JSONResponse | None:
        if version != PROTOCOL_VERSION:
            return _error(
                400, "unsupported_protocol_version",
                f"server speaks {PROTOCOL_VERSION!r}, request had {version!r}",
            )
        return None

    enabled = (
        {"chat", "segment", "generate", "inpaint", "fill"}
        if capability is None
        else {capability}
    )

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            capability=capability or "all", protocol_version=PROTOCOL_VERSION
        )

    if "chat" in enabled:

        @app.post("/v1/chat", response_model=ChatResponse)
        def chat(req: ChatRequest):
            if bad := check_version(req.protocol_version):
                return bad
            image = _decode_image(req.image) if req.image is not None else None
            transcript = tuple((t.role, t.text) for t in req.transcript)
            text = impl.chat(image, transcript, req.message)
            return ChatResponse(request_id=req.request_id, text=text)

    if "segment" in enabled:

        @app.post("/v1/segment", response_model=SegmentResponse)
        def segment(req: SegmentRequest):
            if bad := check_version(req.protocol_version):
                return bad
            image = _decode_image(req.image)
            kind = req.prompt.kind
            kwargs: dict = {}
            if kind == "scribble":
                kwargs["scribble"] = _decode_rle(req.prompt.mask)
            elif kind == "text":
                kwargs["text"] = req.prompt.text
            elif kind == "boxes":
                kwargs["boxes"] = tuple(BoundingBox(*b) for b in req.prompt.boxes)
            else:
                kwargs["points"] = tuple(Point(x, y) for x, y in req.prompt.points)
            mask, label = impl.segment(image, **kwargs)
            return SegmentResponse(
                request_id=req.request_id, mask=RleJson(**mask.to_json()), label=label
            )

    if "generate" in enabled:

        @app.post("/v1/generate", response_model=ImageResponse)
        def generate(req: GenerateRequest):
            if bad := check_version(req.protocol_version):
                return bad
            image = impl.generate(
                req.caption, _decode_grounding(req.grounding), req.width, req.height
            )
            return ImageResponse(request_id=req.request_id, image=image.to_b64_png())

    if "inpaint" in enabled:

        @app.post("/v1/inpaint", response_model=ImageResponse)
        def inpaint(req: InpaintRequest):
            if bad := check_version(req.protocol_version):
                return bad
            image = impl.inpaint(
                _decode_image(req.image),
                grounding=_decode_grounding(req.grounding),
                mask=_decode_rle(req.mask) if req.mask is not None else None,
                prompt=req.prompt,
            )
            return ImageResponse(request_id=req.request_id, image=image.to_b64_png())

    if "fill" in enabled:

        @app.post("/v1/fill", response_model=ImageResponse)
        def fill(req: FillRequest):
            if bad := check_version(req.protocol_version):
                return bad
            image = impl.fill(_decode_image(req.image), _decode_rle(req.mask))
            return ImageResponse(request_id=req.request_id, image=image.to_b64_png())

    return app
