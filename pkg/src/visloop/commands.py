"""Session commands and their canonical JSON form.

The same JSON schema is used by scenario-script steps and the HTTP
command endpoint, keyed by a "type" discriminator. Parsing is strict:
unknown types or malformed payloads raise InvalidCommand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

from .errors import InvalidCommand
from .geometry import (
    DEFAULT_BRUSH_RADIUS,
    BoundingBox,
    GroundingSpec,
    Point,
    ReferringText,
    Stroke,
)
from .image import CanvasImage


@dataclass(frozen=True)
class SetImage:
    image: CanvasImage


@dataclass(frozen=True)
class GenerateImage:
    caption: str
    grounding: GroundingSpec | None = None

    def __post_init__(self) -> None:
        if not self.caption.strip():
            raise InvalidCommand("generate_image needs a nonempty caption")


@dataclass(frozen=True)
class Chat:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise InvalidCommand("chat needs a nonempty message")


@dataclass(frozen=True)
class SegmentByStroke:
    strokes: tuple[Stroke, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "strokes", tuple(self.strokes))
        if not self.strokes:
            raise InvalidCommand("segment_by_stroke needs at least one stroke")


@dataclass(frozen=True)
class SegmentByText:
    text: ReferringText


@dataclass(frozen=True)
class RemoveObject:
    mask_id: str


@dataclass(frozen=True)
class MoveObject:
    mask_id: str
    dx: float
    dy: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise InvalidCommand("move offsets must be finite")


@dataclass(frozen=True)
class ReplaceObject:
    mask_id: str
    prompt: str

    def __post_init__(self) -> None:
        if not self.prompt.strip():
            raise InvalidCommand("replace_object needs a nonempty prompt")


@dataclass(frozen=True)
class InpaintObjects:
    grounding: GroundingSpec


@dataclass(frozen=True)
class ClearMasks:
    pass


@dataclass(frozen=True)
class Undo:
    pass


Command = Union[
    SetImage,
    GenerateImage,
    Chat,
    SegmentByStroke,
    SegmentByText,
    RemoveObject,
    MoveObject,
    ReplaceObject,
    InpaintObjects,
    ClearMasks,
    Undo,
]

COMMAND_TYPES: dict[type, str] = {
    SetImage: "set_image",
    GenerateImage: "generate_image",
    Chat: "chat",
    SegmentByStroke: "segment_by_stroke",
    SegmentByText: "segment_by_text",
    RemoveObject: "remove_object",
    MoveObject: "move_object",
    ReplaceObject: "replace_object",
    InpaintObjects: "inpaint_objects",
    ClearMasks: "clear_masks",
    Undo: "undo",
}

#: Commands that replace the canvas when they succeed.
IMAGE_MUTATING = {"set_image", "generate_image", "remove_object", "move_object",
                  "replace_object", "inpaint_objects"}


def command_type(command: Command) -> str:
    return COMMAND_TYPES[type(command)]


def _grounding_to_json(spec: GroundingSpec | None) -> Any:
    if spec is None:
        return None
    return {
        "concepts": list(spec.concepts),
        "boxes": [list(b.as_tuple()) for b in spec.boxes],
    }


def _grounding_from_json(obj: Any) -> GroundingSpec | None:
    if obj is None:
        return None
    try:
        boxes = tuple(BoundingBox(*map(float, b)) for b in obj["boxes"])
        return GroundingSpec(tuple(obj["concepts"]), boxes)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidCommand(f"bad grounding payload: {exc}") from exc


def _stroke_to_json(stroke: Stroke) -> dict[str, Any]:
    return {
        "points": [[p.x, p.y] for p in stroke.points],
        "brush_radius": stroke.brush_radius,
    }


def _stroke_from_json(obj: Any) -> Stroke:
    try:
        pts = tuple(Point(float(x), float(y)) for x, y in obj["points"])
        return Stroke(pts, float(obj.get("brush_radius", DEFAULT_BRUSH_RADIUS)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidCommand(f"bad stroke payload: {exc}") from exc


def command_to_json(command: Command) -> dict[str, Any]:
    """Canonical JSON for a command, embedding images as base64 PNG."""
    t = command_type(command)
    if isinstance(command, SetImage):
        return {"type": t, "image": command.image.to_b64_png()}
    if isinstance(command, GenerateImage):
        return {"type": t, "caption": command.caption,
                "grounding": _grounding_to_json(command.grounding)}
    if isinstance(command, Chat):
        return {"type": t, "text": command.text}
    if isinstance(command, SegmentByStroke):
        return {"type": t, "strokes": [_stroke_to_json(s) for s in command.strokes]}
    if isinstance(command, SegmentByText):
        return {"type": t, "text": command.text.text}
    if isinstance(command, RemoveObject):
        return {"type": t, "mask_id": command.mask_id}
    if isinstance(command, MoveObject):
        return {"type": t, "mask_id": command.mask_id, "dx": command.dx, "dy": command.dy}
    if isinstance(command, ReplaceObject):
        return {"type": t, "mask_id": command.mask_id, "prompt": command.prompt}
    if isinstance(command, InpaintObjects):
        return {"type": t, "grounding": _grounding_to_json(command.grounding)}
    return {"type": t}


def command_from_json(obj: Any) -> Command:
    """Parse a command-variant object; raises InvalidCommand on anything off."""
    if not isinstance(obj, dict) or not isinstance(obj.get("type"), str):
        raise InvalidCommand("command must be an object with a string 'type'")
    t = obj["type"]
    try:
        if t == "set_image":
            return SetImage(CanvasImage.from_b64_png(obj["image"]))
        if t == "generate_image":
            return GenerateImage(str(obj["caption"]),
                                 _grounding_from_json(obj.get("grounding")))
        if t == "chat":
            return Chat(str(obj["text"]))
        if t == "segment_by_stroke":
            return SegmentByStroke(tuple(_stroke_from_json(s) for s in obj["strokes"]))
        if t == "segment_by_text":
            return SegmentByText(ReferringText(str(obj["text"])))
        if t == "remove_object":
            return RemoveObject(str(obj["mask_id"]))
        if t == "move_object":
            return MoveObject(str(obj["mask_id"]), float(obj["dx"]), float(obj["dy"]))
        if t == "replace_object":
            return ReplaceObject(str(obj["mask_id"]), str(obj["prompt"]))
        if t == "inpaint_objects":
            grounding = _grounding_from_json(obj.get("grounding"))
            if grounding is None:
                raise InvalidCommand("inpaint_objects needs a grounding")
            return InpaintObjects(grounding)
        if t == "clear_masks":
            return ClearMasks()
        if t == "undo":
            return Undo()
    except InvalidCommand:
        raise
    except Exception as exc:
        raise InvalidCommand(f"bad {t} payload: {exc}") from exc
    raise InvalidCommand(f"unknown command type {t!r}")


def command_summary(command: Command) -> dict[str, Any]:
    """Compact description stored in history entries; image payloads become
    hashes and stroke geometry a count."""
    if isinstance(command, SetImage):
        return {"type": "set_image", "image_hash": command.image.content_hash}
    if isinstance(command, SegmentByStroke):
        return {"type": "segment_by_stroke", "strokes": len(command.strokes)}
    return command_to_json(command)
