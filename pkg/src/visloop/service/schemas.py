"""Request/response models for the operator-facing HTTP API."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel

from ..engine import HistoryEntry, SegmentMask, Session
from ..raster import mask_bbox


class CreateSessionResponse(BaseModel):
    session_id: str


class ImageUploadRequest(BaseModel):
    image: str  # base64 PNG


class MaskView(BaseModel):
    id: str
    label: str | None
    source: str
    area: int
    bbox_px: tuple[int, int, int, int]
    rle: dict[str, Any]

    @classmethod
    def from_mask(cls, mask: SegmentMask) -> MaskView:
        return cls(
            id=mask.id,
            label=mask.label,
            source=mask.source.value,
            area=mask.rle.area,
            bbox_px=mask_bbox(mask.rle),
            rle=mask.rle.to_json(),
        )


class BackendCallView(BaseModel):
    capability: str
    duration_s: float
    status: str


class HistoryEntryView(BaseModel):
    seq: int
    command: dict[str, Any]
    backend_calls: list[BackendCallView]
    canvas_hash_before: str | None
    canvas_hash_after: str | None
    masks_after: list[str]
    timestamp: float
    status: str
    error: str | None

    @classmethod
    def from_entry(cls, entry: HistoryEntry) -> HistoryEntryView:
        return cls(**entry.to_json())


class SessionSummary(BaseModel):
    session_id: str
    state: str
    revision: int
    canvas_hash: str | None
    width: int | None
    height: int | None
    transcript: list[tuple[str, str]]
    masks: list[MaskView]

    @classmethod
    def from_session(cls, session: Session) -> SessionSummary:
        return cls(
            session_id=session.id,
            state=session.state.value,
            revision=session.revision,
            canvas_hash=session.canvas_hash,
            width=session.canvas.width if session.canvas else None,
            height=session.canvas.height if session.canvas else None,
            transcript=list(session.transcript),
            masks=[MaskView.from_mask(m) for m in session.pending_masks.values()],
        )


class CommandResponse(BaseModel):
    entry: HistoryEntryView | None
    canvas: str | None  # base64 PNG of the current canvas
    canvas_hash: str | None
    masks: list[MaskView]
    transcript: list[tuple[str, str]]


class HistoryResponse(BaseModel):
    session_id: str
    entries: list[HistoryEntryView]


class SessionListResponse(BaseModel):
    sessions: list[dict[str, Any]]


class ErrorResponse(BaseModel):
    error: str
    detail: str | None = None
