"""Capability wire protocol, version "1".

All five capability services speak JSON over POST {base}/v1/<capability>:
images as base64 PNG, masks as {"w","h","counts"} run-length objects,
coordinates normalized. Every request carries protocol_version and a
request_id the response must echo. Errors come back as HTTP 4xx with
{"error": code, "detail": str}.
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field

PROTOCOL_VERSION = "1"


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


class ErrorBody(WireModel):
    error: str
    detail: str | None = None


CAPABILITIES = ("chat", "segment", "generate", "inpaint", "fill")

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
