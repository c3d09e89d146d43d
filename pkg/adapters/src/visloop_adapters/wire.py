"""Wire protocol version "1", as this package speaks it.

Deliberately self-contained (no dependency on the orchestrator package):
the protocol is the contract, not any client library. Images travel as
base64 PNG, masks as row-major run-length counts starting with a possibly
zero background run, coordinates normalized to [0,1].
"""

from __future__ import annotations

import base64
import io
from typing import Annotated, Literal, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

PROTOCOL_VERSION = "1"

CAPABILITIES = ("chat", "segment", "generate", "inpaint", "fill")


class WireModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TranscriptTurn(WireModel):
    role: Literal["user", "assistant"]
    text: str


class RleJson(WireModel):
    w: int = Field(ge=1)
    h: int = Field(ge=1)
    counts: list[int]


class GroundingJson(WireModel):
    concepts: list[str] = Field(min_length=1)
    boxes: list[tuple[float, float, float, float]] = Field(min_length=1)


class ChatRequest(WireModel):
    protocol_version: str
    request_id: str
    image: str | None
    transcript: list[TranscriptTurn]
    message: str = Field(min_length=1)


class ChatResponse(WireModel):
    request_id: str
    text: str = Field(min_length=1)


class ScribblePrompt(WireModel):
    kind: Literal["scribble"]
    mask: RleJson


class TextPrompt(WireModel):
    kind: Literal["text"]
    text: str = Field(min_length=1)


class BoxesPrompt(WireModel):
    kind: Literal["boxes"]
    boxes: list[tuple[float, float, float, float]] = Field(min_length=1)


class PointsPrompt(WireModel):
    kind: Literal["points"]
    points: list[tuple[float, float]] = Field(min_length=1)


SegmentPrompt = Annotated[
    Union[ScribblePrompt, TextPrompt, BoxesPrompt, PointsPrompt],
    Field(discriminator="kind"),
]


class SegmentRequest(WireModel):
    protocol_version: str
    request_id: str
    image: str
    prompt: SegmentPrompt


class SegmentResponse(WireModel):
    request_id: str
    mask: RleJson
    label: str | None = None


class GenerateRequest(WireModel):
    protocol_version: str
    request_id: str
    caption: str = Field(min_length=1)
    grounding: GroundingJson | None
    width: int = Field(ge=1)
    height: int = Field(ge=1)


class ImageResponse(WireModel):
    request_id: str
    image: str


class InpaintRequest(WireModel):
    protocol_version: str
    request_id: str
    image: str
    grounding: GroundingJson | None = None
    mask: RleJson | None = None
    prompt: str | None = None


class FillRequest(WireModel):
    protocol_version: str
    request_id: str
    image: str
    mask: RleJson


class HealthResponse(WireModel):
    capability: str
    protocol_version: str


REQUEST_MODELS = {
    "chat": ChatRequest,
    "segment": SegmentRequest,
    "generate": GenerateRequest,
    "inpaint": InpaintRequest,
    "fill": FillRequest,
}

RESPONSE_MODELS = {
    "chat": ChatResponse,
    "segment": SegmentResponse,
    "generate": ImageResponse,
    "inpaint": ImageResponse,
    "fill": ImageResponse,
}


# -- payload codecs -----------------------------------------------------------


def decode_image(b64: str) -> np.ndarray:
    """base64 PNG -> (h, w, 4) uint8 array."""
    img = Image.open(io.BytesIO(base64.b64decode(b64))).convert("RGBA")
    return np.asarray(img, dtype=np.uint8)


def encode_image(arr: np.ndarray) -> str:
    img = Image.fromarray(arr, mode="RGBA")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_rle(obj: RleJson) -> np.ndarray:
    if any(c < 0 for c in obj.counts) or sum(obj.counts) != obj.w * obj.h:
        raise ValueError("malformed RLE counts")
    flat = np.zeros(obj.w * obj.h, dtype=np.bool_)
    pos = 0
    value = False
    for run in obj.counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(obj.h, obj.w)


def encode_rle(bitmap: np.ndarray) -> RleJson:
    h, w = bitmap.shape
    flat = bitmap.ravel()
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    counts = [int(c) for c in np.diff(edges)]
    if flat[0]:
        counts = [0] + counts
    return RleJson(w=w, h=h, counts=counts)
