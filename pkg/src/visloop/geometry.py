"""Visual-prompt value types and coordinate conventions.

All coordinates are normalized floats in [0, 1] with the origin at the
top-left corner, x growing rightward and y downward. Pixel-space boxes are
half-open integer rectangles (x0, y0, x1, y1) with x1/y1 exclusive.
Everything here is an immutable value; equality is structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConceptBoxMismatch, EmptyInstruction, InvalidGeometry

#: Minimum normalized side length a stroke-derived box is expanded to.
MIN_BOX_SIDE = 0.01

#: Default stroke brush radius, normalized against the longer image side.
DEFAULT_BRUSH_RADIUS = 0.004


def round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise InvalidGeometry(f"point ({self.x}, {self.y}) outside [0,1]")


@dataclass(frozen=True)
class Stroke:
    """Freehand polyline prompt; a single point is a click."""

    points: tuple[Point, ...]
    brush_radius: float = DEFAULT_BRUSH_RADIUS

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise InvalidGeometry("stroke needs at least one point")
        if self.brush_radius <= 0:
            raise InvalidGeometry("brush_radius must be positive")


@dataclass(frozen=True)
class BoundingBox:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise InvalidGeometry(
                f"box ({self.x0}, {self.y0}, {self.x1}, {self.y1}) is degenerate or outside [0,1]"
            )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class ReferringText:
    """Natural-language phrase naming the object to segment."""

    text: str

    def __post_init__(self) -> None:
        if not self.text or self.text != self.text.strip():
            raise InvalidGeometry("referring text must be nonempty and trimmed")


@dataclass(frozen=True)
class GroundingSpec:
    """Concepts bound one-to-one, in order, to boxes."""

    concepts: tuple[str, ...]
    boxes: tuple[BoundingBox, ...]
    caption: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "concepts", tuple(self.concepts))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if len(self.concepts) != len(self.boxes):
            raise ConceptBoxMismatch(
                f"{len(self.concepts)} concepts vs {len(self.boxes)} boxes"
            )
        if not self.concepts:
            raise ConceptBoxMismatch("grounding needs at least one concept/box pair")
        for c in self.concepts:
            if not c.strip() or c != c.strip():
                raise InvalidGeometry(f"concept {c!r} not a trimmed nonempty string")

    def __len__(self) -> int:
        return len(self.concepts)


def parse_grounding_instruction(text: str) -> list[str]:
    """Split a grounding instruction on ';', trimming and dropping empties.

    The semicolon is the only separator; anything else (commas included)
    stays inside the concept verbatim.
    """
    concepts = [seg.strip() for seg in text.split(";")]
    concepts = [c for c in concepts if c]
    if not concepts:
        raise EmptyInstruction(f"no concepts in {text!r}")
    return concepts


def bind_concepts_to_boxes(
    concepts: list[str], boxes: list[BoundingBox], caption: str | None = None
) -> GroundingSpec:
    """Pair concepts[i] with boxes[i]; counts must match exactly."""
    if not concepts or not boxes:
        raise ConceptBoxMismatch("both concepts and boxes must be nonempty")
    if len(concepts) != len(boxes):
        raise ConceptBoxMismatch(f"{len(concepts)} concepts vs {len(boxes)} boxes")
    return GroundingSpec(tuple(concepts), tuple(boxes), caption)


def stroke_min_bbox(stroke: Stroke) -> BoundingBox:
    """Smallest box around a stroke, dilated by its brush radius.

    Each side is expanded symmetrically to at least MIN_BOX_SIDE (a single
    click yields a usable box), then the box is shifted, not shrunk, back
    into [0,1]; only a box wider than the canvas itself gets clipped.
    """
    xs = [p.x for p in stroke.points]
    ys = [p.y for p in stroke.points]
    r = stroke.brush_radius
    spans = []
    for lo, hi in ((min(xs) - r, max(xs) + r), (min(ys) - r, max(ys) + r)):
        side = hi - lo
        if side < MIN_BOX_SIDE:
            center = (lo + hi) / 2.0
            lo, hi = center - MIN_BOX_SIDE / 2.0, center + MIN_BOX_SIDE / 2.0
            side = MIN_BOX_SIDE
        if side >= 1.0:
            lo, hi = 0.0, 1.0
        elif lo < 0.0:
            hi -= lo
            lo = 0.0
        elif hi > 1.0:
            lo -= hi - 1.0
            hi = 1.0
        spans.append((lo, hi))
    (x0, x1), (y0, y1) = spans
    return BoundingBox(x0, y0, x1, y1)


PixelBox = tuple[int, int, int, int]


def normalize_box(box_px: PixelBox, dims: tuple[int, int]) -> BoundingBox:
    w, h = dims
    if w < 1 or h < 1:
        raise InvalidGeometry(f"bad dims {dims}")
    x0, y0, x1, y1 = box_px
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise InvalidGeometry(f"pixel box {box_px} outside {w}x{h} image")
    return BoundingBox(x0 / w, y0 / h, x1 / w, y1 / h)


def denormalize_box(box: BoundingBox, dims: tuple[int, int]) -> PixelBox:
    w, h = dims
    if w < 1 or h < 1:
        raise InvalidGeometry(f"bad dims {dims}")
    return (
        round_half_up(box.x0 * w),
        round_half_up(box.y0 * h),
        round_half_up(box.x1 * w),
        round_half_up(box.y1 * h),
    )
