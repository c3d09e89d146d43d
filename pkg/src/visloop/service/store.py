"""Session registry with per-session locking and on-disk persistence.

Layout: data_dir/sessions/{id}/manifest.json plus images/{seq}.png for
every image-mutating history entry. The manifest is rewritten atomically
(temp file, then rename) after each command, so a crash between requests
loses at most the command that was in flight. Sessions whose manifest no
longer parses are listed as damaged rather than hidden.
"""

from __future__ import annotations

import io
import json
import shutil
import threading
import uuid
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..commands import IMAGE_MUTATING
from ..engine import (
    HistoryEntry,
    SegmentMask,
    Session,
    SessionState,
    SnapshotStore,
)
from ..errors import InvalidCommand, VisloopError
from ..image import CanvasImage

MANIFEST_FORMAT = 1


class SessionStoreFull(VisloopError):
    code = "too_many_sessions"


class DamagedSession(VisloopError):
    code = "damaged_session"


class UnknownSession(VisloopError):
    code = "unknown_session"


@dataclass
class SessionRuntime:
    session: Session
    directory: Path
    lock: threading.Lock = field(default_factory=threading.Lock)
    # seq -> canvas hash, for every persisted image-mutating entry
    image_hashes: dict[int, str] = field(default_factory=dict)
    canvas_seq: int | None = None


class SessionStore:
    def __init__(
        self,
        data_dir: Path,
        max_sessions: int = 256,
        snapshot_slots: int = 16,
    ) -> None:
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.max_sessions = max_sessions
        self.snapshot_slots = snapshot_slots
        self._registry: dict[str, SessionRuntime] = {}
        self._damaged: dict[str, str] = {}  # id -> reason
        self._registry_lock = threading.Lock()
        self._load_existing()

    # -- lifecycle ---------------------------------------------------------

    def create(self) -> SessionRuntime:
        with self._registry_lock:
            if len(self._registry) >= self.max_sessions:
                raise SessionStoreFull(f"limit of {self.max_sessions} sessions reached")
            session_id = f"s-{uuid.uuid4().hex[:12]}"
            directory = self.sessions_dir / session_id
            runtime = SessionRuntime(
                session=self._new_session(session_id, directory), directory=directory
            )
            self._registry[session_id] = runtime
        self.save(runtime)
        return runtime

    def _new_session(self, session_id: str, directory: Path) -> Session:
        def loader(digest: str) -> CanvasImage | None:
            rt = self._registry.get(session_id)
            if rt is None:
                return None
            return _load_image_by_hash(rt, digest)

        return Session(
            id=session_id,
            snapshots=SnapshotStore(memory_slots=self.snapshot_slots, loader=loader),
        )

    def get(self, session_id: str) -> SessionRuntime:
        if session_id in self._damaged:
            raise DamagedSession(self._damaged[session_id])
        runtime = self._registry.get(session_id)
        if runtime is None:
            raise UnknownSession(f"no session {session_id!r}")
        return runtime

    def delete(self, session_id: str) -> None:
        with self._registry_lock:
            self._registry.pop(session_id, None)
            self._damaged.pop(session_id, None)
        directory = self.sessions_dir / session_id
        if directory.exists():
            shutil.rmtree(directory)

    def list_summaries(self) -> list[dict[str, Any]]:
        out = []
        for session_id, runtime in sorted(self._registry.items()):
            s = runtime.session
            out.append(
                {
                    "session_id": session_id,
                    "state": s.state.value,
                    "revision": s.revision,
                    "canvas_hash": s.canvas_hash,
                    "damaged": False,
                }
            )
        for session_id, reason in sorted(self._damaged.items()):
            out.append(
                {
                    "session_id": session_id,
                    "state": None,
                    "revision": None,
                    "canvas_hash": None,
                    "damaged": True,
                    "reason": reason,
                }
            )
        return out

    # -- persistence ---------------------------------------------------------

    def save(self, runtime: SessionRuntime) -> None:
        session = runtime.session
        directory = runtime.directory
        images_dir = directory / "images"
        images_dir.mkdir(parents=True, exist_ok=True)

        # Persist the canvas of any image-mutating entry not yet on disk.
        live: dict[int, str] = {}
        for entry in session.history:
            if entry.status != "ok" or entry.command["type"] not in IMAGE_MUTATING:
                continue
            assert entry.canvas_hash_after is not None
            live[entry.seq] = entry.canvas_hash_after
        for seq, digest in live.items():
            if runtime.image_hashes.get(seq) == digest:
                continue
            image = (
                session.canvas
                if session.canvas is not None and session.canvas.content_hash == digest
                else session.snapshots.get(digest)
            )
            tmp = images_dir / f"{seq}.png.tmp"
            tmp.write_bytes(image.to_png_bytes())
            tmp.rename(images_dir / f"{seq}.png")
        # Prune image files for popped (undone) entries.
        for seq in list(runtime.image_hashes):
            if seq not in live:
                (images_dir / f"{seq}.png").unlink(missing_ok=True)
        runtime.image_hashes = live
        runtime.canvas_seq = max(live) if live else None

        manifest = {
            "format": MANIFEST_FORMAT,
            "id": session.id,
            "state": session.state.value,
            "mask_counter": session.mask_counter,
            "canvas_seq": runtime.canvas_seq,
            "canvas_hash": session.canvas_hash,
            "transcript": [[role, text] for role, text in session.transcript],
            "pending_masks": [m.to_json() for m in session.pending_masks.values()],
            "history": [e.to_json() for e in session.history],
            "undo_stash": {
                str(seq): [m.to_json() for m in masks.values()]
                for seq, masks in session.undo_stash.items()
            },
            "images": {str(seq): digest for seq, digest in live.items()},
        }
        tmp = directory / "manifest.json.tmp"
        tmp.write_text(json.dumps(manifest))
        tmp.rename(directory / "manifest.json")

    def _load_existing(self) -> None:
        for directory in sorted(self.sessions_dir.iterdir()):
            if not directory.is_dir():
                continue
            session_id = directory.name
            try:
                runtime = self._load_session(session_id, directory)
                self._registry[session_id] = runtime
            except Exception as exc:
                self._damaged[session_id] = f"{type(exc).__name__}: {exc}"

    def _load_session(self, session_id: str, directory: Path) -> SessionRuntime:
        manifest = json.loads((directory / "manifest.json").read_text())
        if manifest.get("format") != MANIFEST_FORMAT:
            raise InvalidCommand(f"unknown manifest format {manifest.get('format')!r}")
        if manifest["id"] != session_id:
            raise InvalidCommand(
                f"manifest id {manifest['id']!r} does not match directory"
            )
        session = self._new_session(session_id, directory)
        session.state = SessionState(manifest["state"])
        session.mask_counter = int(manifest["mask_counter"])
        session.transcript = [tuple(t) for t in manifest["transcript"]]
        session.history = [HistoryEntry.from_json(e) for e in manifest["history"]]
        session.pending_masks = {
            m["id"]: SegmentMask.from_json(m) for m in manifest["pending_masks"]
        }
        session.undo_stash = {
            int(seq): {m["id"]: SegmentMask.from_json(m) for m in masks}
            for seq, masks in manifest.get("undo_stash", {}).items()
        }
        image_hashes = {int(seq): d for seq, d in manifest["images"].items()}
        runtime = SessionRuntime(
            session=session, directory=directory, image_hashes=image_hashes,
            canvas_seq=manifest.get("canvas_seq"),
        )
        if manifest["canvas_seq"] is not None:
            path = directory / "images" / f"{manifest['canvas_seq']}.png"
            canvas = CanvasImage.from_png_bytes(path.read_bytes())
            if canvas.content_hash != manifest["canvas_hash"]:
                raise InvalidCommand("canvas image does not match manifest hash")
            session.canvas = canvas
        if (session.canvas is None) != (session.state is SessionState.NEED_IMAGE):
            raise InvalidCommand("state/canvas mismatch in manifest")
        return runtime

    # -- export / import -----------------------------------------------------

    def export_zip(self, runtime: SessionRuntime) -> bytes:
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            base = runtime.directory
            zf.write(base / "manifest.json", "manifest.json")
            images = base / "images"
            if images.exists():
                for path in sorted(images.iterdir()):
                    zf.write(path, f"images/{path.name}")
        return buf.getvalue()

    def import_zip(self, payload: bytes) -> SessionRuntime:
        try:
            zf = zipfile.ZipFile(io.BytesIO(payload))
            manifest = json.loads(zf.read("manifest.json"))
        except (zipfile.BadZipFile, KeyError, ValueError) as exc:
            raise InvalidCommand(f"not a session archive: {exc}") from exc
        with self._registry_lock:
            if len(self._registry) >= self.max_sessions:
                raise SessionStoreFull(f"limit of {self.max_sessions} sessions reached")
            session_id = f"s-{uuid.uuid4().hex[:12]}"
            directory = self.sessions_dir / session_id
            directory.mkdir(parents=True)
            manifest["id"] = session_id
            (directory / "manifest.json").write_text(json.dumps(manifest))
            for name in zf.namelist():
                if name.startswith("images/") and not name.endswith("/"):
                    target = directory / "images" / Path(name).name
                    target.parent.mkdir(exist_ok=True)
                    target.write_bytes(zf.read(name))
            try:
                runtime = self._load_session(session_id, directory)
            except Exception as exc:
                shutil.rmtree(directory)
                raise InvalidCommand(f"archive failed to load: {exc}") from exc
            self._registry[session_id] = runtime
        return runtime


def _load_image_by_hash(runtime: SessionRuntime, digest: str) -> CanvasImage | None:
    for seq, known in runtime.image_hashes.items():
        if known == digest:
            path = runtime.directory / "images" / f"{seq}.png"
            if path.exists():
                return CanvasImage.from_png_bytes(path.read_bytes())
    return None
