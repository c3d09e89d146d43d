"""The operator-facing HTTP service.

Exactly one engine command runs per request; a second command arriving
while a session is busy gets 409 rather than queueing. Reads serialize
behind the same per-session lock so they never observe a half-committed
command. Every accepted command is persisted before the response leaves.
"""

from __future__ import annotations

import contextlib
from pathlib import Path
from typing import Any, Iterator

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import commands as cmd
from ..capabilities import Backends
from ..commands import command_from_json
from ..engine import execute, undo
from ..errors import (
    BackendError,
    InvalidCommand,
    InvalidGeometry,
    NoImage,
    NothingToUndo,
    UnknownMask,
    VisloopError,
)
from ..gateway import GatewayBackends
from ..image import CanvasImage, downscale_to_fit
from ..mocks import MockBackends
from .config import ServiceConfig
from .replay import load_bundled_registry
from .schemas import (
    CommandResponse,
    CreateSessionResponse,
    HistoryEntryView,
    HistoryResponse,
    ImageUploadRequest,
    MaskView,
    SessionListResponse,
    SessionSummary,
)
from .store import (
    DamagedSession,
    SessionRuntime,
    SessionStore,
    SessionStoreFull,
    UnknownSession,
)

# Uploads beyond this multiple of max_image_side are refused outright
# rather than downscaled.
HARD_UPLOAD_FACTOR = 4


def _error(status: int, code: str, detail: str | None = None, **extra: Any) -> JSONResponse:
    body: dict[str, Any] = {"error": code, "detail": detail}
    body.update(extra)
    return JSONResponse(body, status_code=status)


def build_backends(config: ServiceConfig) -> Backends:
    if config.mock_mode:
        registry = load_bundled_registry()
        if config.mock_fixtures_dir is not None:
            registry.load_dir(config.mock_fixtures_dir)
        return MockBackends(registry)
    return GatewayBackends(config.backends)


def create_app(
    config: ServiceConfig,
    backends: Backends | None = None,
    console_dir: Path | None = None,
) -> FastAPI:
    config.data_dir.mkdir(parents=True, exist_ok=True)
    store = SessionStore(config.data_dir, max_sessions=config.max_sessions)
    engine_backends = backends if backends is not None else build_backends(config)

    app = FastAPI(title="visloop session service")
    app.state.store = store
    app.state.backends = engine_backends
    app.state.config = config

    @app.exception_handler(VisloopError)
    async def on_domain_error(request: Request, exc: VisloopError):
        return _error(400, exc.code, str(exc))

    class _Busy(Exception):
        def __init__(self, session_id: str) -> None:
            self.session_id = session_id

    @contextlib.contextmanager
    def session_locked(session_id: str, wait: bool) -> Iterator[SessionRuntime]:
        runtime = store.get(session_id)
        if wait:
            runtime.lock.acquire()
        elif not runtime.lock.acquire(blocking=False):
            raise _Busy(session_id)
        try:
            yield runtime
        finally:
            runtime.lock.release()

    @app.exception_handler(UnknownSession)
    async def on_missing(request: Request, exc: UnknownSession):
        return _error(404, exc.code, str(exc))

    @app.exception_handler(_Busy)
    async def on_busy(request: Request, exc: _Busy):
        return _error(
            409, "session_busy",
            f"another command is in flight on {exc.session_id}",
        )

    @app.exception_handler(DamagedSession)
    async def on_damaged(request: Request, exc: DamagedSession):
        return _error(410, "damaged_session", str(exc))

    @app.exception_handler(SessionStoreFull)
    async def on_full(request: Request, exc: SessionStoreFull):
        return _error(429, "too_many_sessions", str(exc))

    # -- session lifecycle -------------------------------------------------

    @app.get("/api/health")
    def health() -> dict[str, Any]:
        return {"status": "ok", "mock_mode": config.mock_mode}

    @app.post("/api/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session():
        runtime = store.create()
        return CreateSessionResponse(session_id=runtime.session.id)

    @app.get("/api/sessions", response_model=SessionListResponse)
    def list_sessions():
        return SessionListResponse(sessions=store.list_summaries())

    @app.get("/api/sessions/{session_id}", response_model=SessionSummary)
    def get_session(session_id: str):
        with session_locked(session_id, wait=True) as runtime:
            return SessionSummary.from_session(runtime.session)

    @app.delete("/api/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        with session_locked(session_id, wait=False):
            store.delete(session_id)
        return Response(status_code=204)

    # -- commands ------------------------------------------------------------

    def _run_command(runtime: SessionRuntime, command: cmd.Command) -> JSONResponse | CommandResponse:
        session = runtime.session
        try:
            entry = execute(
                session, command, engine_backends, generate_size=config.generate_size
            )
        except NoImage as exc:
            return _error(400, exc.code, str(exc))
        except UnknownMask as exc:
            return _error(404, exc.code, str(exc))
        except NothingToUndo as exc:
            return _error(409, exc.code, str(exc))
        except (InvalidCommand, InvalidGeometry) as exc:
            return _error(400, exc.code, str(exc))
        except BackendError as exc:
            store.save(runtime)  # failed entry is part of history
            failed = session.history[-1] if session.history else None
            return _error(
                502, exc.code, str(exc),
                entry=HistoryEntryView.from_entry(failed).model_dump() if failed else None,
            )
        store.save(runtime)
        return CommandResponse(
            entry=HistoryEntryView.from_entry(entry) if entry else None,
            canvas=session.canvas.to_b64_png() if session.canvas else None,
            canvas_hash=session.canvas_hash,
            masks=[MaskView.from_mask(m) for m in session.pending_masks.values()],
            transcript=list(session.transcript),
        )

    @app.post("/api/sessions/{session_id}/image", response_model=SessionSummary)
    def upload_image(session_id: str, body: ImageUploadRequest):
        image = CanvasImage.from_b64_png(body.image)
        if max(image.dims) > config.max_image_side * HARD_UPLOAD_FACTOR:
            return _error(
                413, "image_too_large",
                f"longest side {max(image.dims)} exceeds hard cap "
                f"{config.max_image_side * HARD_UPLOAD_FACTOR}",
            )
        image = downscale_to_fit(image, config.max_image_side)
        with session_locked(session_id, wait=False) as runtime:
            result = _run_command(runtime, cmd.SetImage(image))
            if isinstance(result, JSONResponse):
                return result
            return SessionSummary.from_session(runtime.session)

    @app.post("/api/sessions/{session_id}/command", response_model=CommandResponse)
    def run_command(session_id: str, body: dict[str, Any]):
        try:
            command = command_from_json(body)
        except VisloopError as exc:
            return _error(400, exc.code, str(exc))
        if isinstance(command, cmd.SetImage):
            if max(command.image.dims) > config.max_image_side * HARD_UPLOAD_FACTOR:
                return _error(413, "image_too_large", "image exceeds hard cap")
            command = cmd.SetImage(downscale_to_fit(command.image, config.max_image_side))
        with session_locked(session_id, wait=False) as runtime:
            return _run_command(runtime, command)

    @app.post("/api/sessions/{session_id}/undo", response_model=SessionSummary)
    def undo_session(session_id: str):
        with session_locked(session_id, wait=False) as runtime:
            try:
                undo(runtime.session)
            except NothingToUndo as exc:
                return _error(409, exc.code, str(exc))
            store.save(runtime)
            return SessionSummary.from_session(runtime.session)

    # -- reads ---------------------------------------------------------------

    @app.get("/api/sessions/{session_id}/history", response_model=HistoryResponse)
    def get_history(session_id: str):
        with session_locked(session_id, wait=True) as runtime:
            return HistoryResponse(
                session_id=session_id,
                entries=[HistoryEntryView.from_entry(e) for e in runtime.session.history],
            )

    @app.get("/api/sessions/{session_id}/canvas")
    def get_canvas(session_id: str):
        with session_locked(session_id, wait=True) as runtime:
            canvas = runtime.session.canvas
            if canvas is None:
                return _error(404, "no_canvas", "session has no image yet")
            return Response(content=canvas.to_png_bytes(), media_type="image/png")

    # -- export / import -------------------------------------------------------

    @app.get("/api/sessions/{session_id}/export")
    def export_session(session_id: str):
        with session_locked(session_id, wait=True) as runtime:
            payload = store.export_zip(runtime)
        return Response(
            content=payload,
            media_type="application/zip",
            headers={"Content-Disposition": f'attachment; filename="{session_id}.zip"'},
        )

    @app.post("/api/sessions/import", response_model=CreateSessionResponse, status_code=201)
    async def import_session(request: Request):
        payload = await request.body()
        runtime = store.import_zip(payload)
        return CreateSessionResponse(session_id=runtime.session.id)

    if console_dir is not None and Path(console_dir).exists():
        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app
