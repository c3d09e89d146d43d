"""The session state machine: command validation, backend planning, commit
into an append-only history, and snapshot-backed undo.

A session starts without an image and only set_image / generate_image are
legal until one exists. Every executed command appends exactly one history
entry (undo instead pops); a command that fails mid-flight on a backend
records a failed entry and leaves canvas, masks and transcript untouched.
Commands against one session must be serialized by the caller; distinct
sessions are fully independent.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import commands as cmd
from .capabilities import Backends
from .commands import Command, command_summary, command_type
from .errors import (
    BackendError,
    InvalidGeometry,
    NoImage,
    NothingToUndo,
    ProtocolError,
    UnknownMask,
)
from .geometry import round_half_up
from .image import CanvasImage
from .raster import (
    RleMask,
    cut_region,
    decode_rle,
    encode_rle,
    fill_hole_fallback,
    paste_patch,
    rasterize_stroke,
)

DEFAULT_GENERATE_SIZE = (512, 512)


class SessionState(str, Enum):
    NEED_IMAGE = "need_image"
    READY = "ready"


class MaskSource(str, Enum):
    STROKE = "stroke"
    TEXT = "text"
    MANUAL = "manual"


@dataclass(frozen=True)
class SegmentMask:
    id: str
    rle: RleMask
    label: str | None
    source: MaskSource

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "label": self.label,
            "source": self.source.value,
            "rle": self.rle.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SegmentMask:
        return cls(
            obj["id"], RleMask.from_json(obj["rle"]), obj.get("label"),
            MaskSource(obj["source"]),
        )


@dataclass(frozen=True)
class BackendCall:
    capability: str
    duration_s: float
    status: str  # "ok" | "failed"


@dataclass
class HistoryEntry:
    seq: int
    command: dict[str, Any]
    backend_calls: list[BackendCall]
    canvas_hash_before: str | None
    canvas_hash_after: str | None
    masks_after: list[str]
    timestamp: float
    status: str = "ok"
    error: str | None = None

    def fingerprint(self) -> dict[str, Any]:
        """Deterministic view: everything except wall-clock data."""
        return {
            "seq": self.seq,
            "command": self.command,
            "calls": [(c.capability, c.status) for c in self.backend_calls],
            "before": self.canvas_hash_before,
            "after": self.canvas_hash_after,
            "masks_after": self.masks_after,
            "status": self.status,
            "error": self.error,
        }

    def to_json(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "command": self.command,
            "backend_calls": [
                {"capability": c.capability, "duration_s": c.duration_s, "status": c.status}
                for c in self.backend_calls
            ],
            "canvas_hash_before": self.canvas_hash_before,
            "canvas_hash_after": self.canvas_hash_after,
            "masks_after": self.masks_after,
            "timestamp": self.timestamp,
            "status": self.status,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> HistoryEntry:
        return cls(
            seq=obj["seq"],
            command=obj["command"],
            backend_calls=[
                BackendCall(c["capability"], c["duration_s"], c["status"])
                for c in obj["backend_calls"]
            ],
            canvas_hash_before=obj["canvas_hash_before"],
            canvas_hash_after=obj["canvas_hash_after"],
            masks_after=list(obj["masks_after"]),
            timestamp=obj["timestamp"],
            status=obj["status"],
            error=obj.get("error"),
        )


class SnapshotStore:
    """Canvas snapshots for undo, keyed by content hash.

    The most recent `memory_slots` images stay in memory; older ones spill
    to `spill_dir` as content-addressed PNGs when a directory is given,
    otherwise they are simply retained (test-scale sessions). A `loader`
    hook lets persisted sessions pull canvases back from their image log.
    """

    def __init__(
        self,
        memory_slots: int = 16,
        spill_dir: Path | None = None,
        loader: Callable[[str], CanvasImage | None] | None = None,
    ) -> None:
        self._slots = memory_slots
        self._spill_dir = Path(spill_dir) if spill_dir else None
        self._loader = loader
        self._memory: dict[str, CanvasImage] = {}  # insertion order = LRU

    def put(self, image: CanvasImage) -> None:
        self._memory.pop(image.content_hash, None)
        self._memory[image.content_hash] = image
        while len(self._memory) > self._slots:
            digest, evicted = next(iter(self._memory.items()))
            if self._spill_dir is not None:
                self._spill_dir.mkdir(parents=True, exist_ok=True)
                path = self._spill_dir / f"{digest}.png"
                if not path.exists():
                    tmp = path.with_suffix(".tmp")
                    tmp.write_bytes(evicted.to_png_bytes())
                    tmp.rename(path)
            elif self._loader is None:
                break  # nowhere to put it; retain in memory
            del self._memory[digest]

    def get(self, digest: str) -> CanvasImage:
        if digest in self._memory:
            image = self._memory.pop(digest)
            self._memory[digest] = image
            return image
        if self._spill_dir is not None:
            path = self._spill_dir / f"{digest}.png"
            if path.exists():
                return CanvasImage.from_png_bytes(path.read_bytes())
        if self._loader is not None:
            image = self._loader(digest)
            if image is not None:
                return image
        raise KeyError(f"no snapshot for {digest}")


@dataclass
class Session:
    id: str
    state: SessionState = SessionState.NEED_IMAGE
    canvas: CanvasImage | None = None
    pending_masks: dict[str, SegmentMask] = field(default_factory=dict)
    transcript: list[tuple[str, str]] = field(default_factory=list)
    history: list[HistoryEntry] = field(default_factory=list)
    snapshots: SnapshotStore = field(default_factory=SnapshotStore)
    mask_counter: int = 0
    # seq of an image-mutating entry -> pending_masks just before it ran
    undo_stash: dict[int, dict[str, SegmentMask]] = field(default_factory=dict)

    @property
    def revision(self) -> int:
        return len(self.history)

    @property
    def canvas_hash(self) -> str | None:
        return self.canvas.content_hash if self.canvas is not None else None

    def next_mask_id(self) -> str:
        self.mask_counter += 1
        return f"m{self.mask_counter}"


def new_session(session_id: str | None = None,
                snapshots: SnapshotStore | None = None) -> Session:
    return Session(
        id=session_id or f"s-{uuid.uuid4().hex[:12]}",
        snapshots=snapshots or SnapshotStore(),
    )


def execute(
    session: Session,
    command: Command,
    backends: Backends,
    generate_size: tuple[int, int] = DEFAULT_GENERATE_SIZE,
) -> HistoryEntry | None:
    """Run one command against the session.

    Returns the appended history entry, or None for undo (which pops
    instead). Precondition violations raise before anything is recorded;
    backend failures append a status="failed" entry and re-raise.
    """
    ctype = command_type(command)
    if session.state is SessionState.NEED_IMAGE and ctype not in (
        "set_image",
        "generate_image",
    ):
        raise NoImage(f"{ctype} requires an image; upload or generate one first")

    if isinstance(command, cmd.Undo):
        undo(session)
        return None

    if isinstance(command, (cmd.RemoveObject, cmd.MoveObject, cmd.ReplaceObject)):
        if command.mask_id not in session.pending_masks:
            raise UnknownMask(f"no pending mask {command.mask_id!r}")

    calls: list[BackendCall] = []

    def call(capability: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except BackendError:
            calls.append(BackendCall(capability, time.perf_counter() - t0, "failed"))
            raise
        calls.append(BackendCall(capability, time.perf_counter() - t0, "ok"))
        return result

    before_hash = session.canvas_hash
    try:
        plan = _run(session, command, backends, call, generate_size)
    except BackendError as exc:
        entry = HistoryEntry(
            seq=len(session.history) + 1,
            command=command_summary(command),
            backend_calls=calls,
            canvas_hash_before=before_hash,
            canvas_hash_after=before_hash,
            masks_after=list(session.pending_masks),
            timestamp=time.time(),
            status="failed",
            error=exc.code,
        )
        session.history.append(entry)
        raise

    seq = len(session.history) + 1
    if ctype in cmd.IMAGE_MUTATING:
        session.undo_stash[seq] = dict(session.pending_masks)
        if session.canvas is not None:
            session.snapshots.put(session.canvas)
    plan(session)
    entry = HistoryEntry(
        seq=seq,
        command=command_summary(command),
        backend_calls=calls,
        canvas_hash_before=before_hash,
        canvas_hash_after=session.canvas_hash,
        masks_after=list(session.pending_masks),
        timestamp=time.time(),
    )
    session.history.append(entry)
    return entry


def _validate_image_response(image: CanvasImage, dims: tuple[int, int] | None) -> CanvasImage:
    if dims is not None and image.dims != dims:
        raise ProtocolError(f"backend returned {image.dims}, expected {dims}")
    return image


def _run(
    session: Session,
    command: Command,
    backends: Backends,
    call,
    generate_size: tuple[int, int],
) -> Callable[[Session], None]:
    """Execute the command's backend work and return the commit closure.

    Nothing in here may mutate the session: all state changes happen in
    the returned closure, so a backend failure leaves no trace beyond the
    failed history entry.
    """
    canvas = session.canvas

    if isinstance(command, cmd.SetImage):
        image = command.image

        def commit(s: Session) -> None:
            s.canvas = image
            s.pending_masks.clear()
            s.state = SessionState.READY

        return commit

    if isinstance(command, cmd.GenerateImage):
        w, h = generate_size
        image = _validate_image_response(
            call("generate", backends.generate, command.caption, command.grounding, w, h),
            (w, h),
        )

        def commit(s: Session) -> None:
            s.canvas = image
            s.pending_masks.clear()
            s.state = SessionState.READY

        return commit

    if isinstance(command, cmd.Chat):
        reply = call(
            "chat", backends.chat, canvas, tuple(session.transcript), command.text
        )
        if not isinstance(reply, str) or not reply:
            raise ProtocolError("chat backend returned an empty reply")
        message = command.text

        def commit(s: Session) -> None:
            s.transcript.append(("user", message))
            s.transcript.append(("assistant", reply))

        return commit

    if isinstance(command, cmd.SegmentByStroke):
        assert canvas is not None
        union = np.zeros((canvas.height, canvas.width), dtype=np.bool_)
        for stroke in command.strokes:
            union |= decode_rle(rasterize_stroke(stroke, canvas.dims))
        if not union.any():
            raise InvalidGeometry("strokes rasterized to an empty scribble")
        rle, label = call(
            "segment", backends.segment, canvas, scribble=encode_rle(union)
        )
        return _commit_mask(canvas, rle, label, MaskSource.STROKE)

    if isinstance(command, cmd.SegmentByText):
        assert canvas is not None
        rle, label = call("segment", backends.segment, canvas, text=command.text.text)
        return _commit_mask(canvas, rle, label, MaskSource.TEXT)

    if isinstance(command, cmd.RemoveObject):
        assert canvas is not None
        mask = session.pending_masks[command.mask_id]
        _, holed = cut_region(canvas, mask.rle)
        filled = _fill(backends, call, holed, mask.rle)
        mask_id = command.mask_id

        def commit(s: Session) -> None:
            s.canvas = filled
            del s.pending_masks[mask_id]

        return commit

    if isinstance(command, cmd.MoveObject):
        assert canvas is not None
        mask = session.pending_masks[command.mask_id]
        patch, holed = cut_region(canvas, mask.rle)
        filled = _fill(backends, call, holed, mask.rle)
        offset = (
            round_half_up(command.dx * canvas.width),
            round_half_up(command.dy * canvas.height),
        )
        moved = paste_patch(filled, patch, offset)
        mask_id = command.mask_id

        def commit(s: Session) -> None:
            s.canvas = moved
            del s.pending_masks[mask_id]

        return commit

    if isinstance(command, cmd.ReplaceObject):
        assert canvas is not None
        mask = session.pending_masks[command.mask_id]
        image = _validate_image_response(
            call("inpaint", backends.inpaint, canvas, mask=mask.rle, prompt=command.prompt),
            canvas.dims,
        )
        mask_id = command.mask_id

        def commit(s: Session) -> None:
            s.canvas = image
            del s.pending_masks[mask_id]

        return commit

    if isinstance(command, cmd.InpaintObjects):
        assert canvas is not None
        image = _validate_image_response(
            call("inpaint", backends.inpaint, canvas, grounding=command.grounding),
            canvas.dims,
        )

        def commit(s: Session) -> None:
            s.canvas = image

        return commit

    if isinstance(command, cmd.ClearMasks):

        def commit(s: Session) -> None:
            s.pending_masks.clear()

        return commit

    raise AssertionError(f"unhandled command {command!r}")


def _fill(backends: Backends, call, holed: CanvasImage, hole: RleMask) -> CanvasImage:
    if backends.fill_enabled:
        return _validate_image_response(
            call("fill", backends.fill, holed, hole), holed.dims
        )
    return fill_hole_fallback(holed, hole)


def _commit_mask(
    canvas: CanvasImage,
    rle: RleMask,
    label: str | None,
    source: MaskSource,
) -> Callable[[Session], None]:
    if (rle.width, rle.height) != canvas.dims:
        raise ProtocolError(
            f"segment backend returned {rle.width}x{rle.height} mask for "
            f"{canvas.width}x{canvas.height} canvas"
        )
    if rle.area == 0:
        raise ProtocolError("segment backend returned an empty mask")

    def commit(s: Session) -> None:
        mask_id = s.next_mask_id()
        s.pending_masks[mask_id] = SegmentMask(mask_id, rle, label, source)

    return commit


def undo(session: Session) -> Session:
    """Pop history back through the most recent image-mutating entry and
    restore its before-canvas and before-masks. The transcript is a record
    of the collaboration and stays. The first image is the floor: there is
    no undoing into the imageless state."""
    idx = None
    for i in range(len(session.history) - 1, -1, -1):
        entry = session.history[i]
        if entry.status == "ok" and entry.command["type"] in cmd.IMAGE_MUTATING:
            idx = i
            break
    if idx is None or session.history[idx].canvas_hash_before is None:
        raise NothingToUndo("no image-mutating step left to undo")
    target = session.history[idx]
    restored = session.snapshots.get(target.canvas_hash_before)
    session.canvas = restored
    session.pending_masks = dict(session.undo_stash.get(target.seq, {}))
    del session.history[idx:]
    for seq in [s for s in session.undo_stash if s >= target.seq]:
        del session.undo_stash[seq]
    return session


def verify_hash_chain(history: list[HistoryEntry]) -> None:
    """Raise AssertionError if seqs gap or the canvas hash chain is broken."""
    prev_after: str | None = None
    for i, entry in enumerate(history):
        assert entry.seq == i + 1, f"seq gap at {entry.seq} (index {i})"
        if i > 0:
            assert entry.canvas_hash_before == prev_after, (
                f"hash chain broken at seq {entry.seq}: "
                f"{entry.canvas_hash_before} != {prev_after}"
            )
        prev_after = entry.canvas_hash_after
