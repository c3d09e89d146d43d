"""Interface the workflow engine drives: chat, segment, generate, inpaint,
fill. Implemented by the HTTP gateway (real or mock servers) and by the
in-process mocks; the engine cannot tell them apart."""

from __future__ import annotations

from typing import Protocol, runtime_checkable

from .geometry import BoundingBox, GroundingSpec, Point
from .image import CanvasImage
from .raster import RleMask


@runtime_checkable
class Backends(Protocol):
    @property
    def fill_enabled(self) -> bool: ...

    def chat(
        self,
        image: CanvasImage | None,
        transcript: tuple[tuple[str, str], ...],
        message: str,
    ) -> str: ...

    def segment(
        self,
        image: CanvasImage,
        *,
        scribble: RleMask | None = None,
        text: str | None = None,
        boxes: tuple[BoundingBox, ...] | None = None,
        points: tuple[Point, ...] | None = None,
    ) -> tuple[RleMask, str | None]: ...

    def generate(
        self,
        caption: str,
        grounding: GroundingSpec | None,
        width: int,
        height: int,
    ) -> CanvasImage: ...

    def inpaint(
        self,
        image: CanvasImage,
        *,
        grounding: GroundingSpec | None = None,
        mask: RleMask | None = None,
        prompt: str | None = None,
    ) -> CanvasImage: ...

    def fill(self, image: CanvasImage, hole: RleMask) -> CanvasImage: ...
