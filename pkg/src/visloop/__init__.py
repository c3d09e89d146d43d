"""Multi-turn visual editing sessions over pluggable model backends."""

from .commands import (
    Chat,
    ClearMasks,
    Command,
    GenerateImage,
    InpaintObjects,
    MoveObject,
    RemoveObject,
    ReplaceObject,
    SegmentByStroke,
    SegmentByText,
    SetImage,
    Undo,
)
from .engine import Session, execute, new_session, undo
from .geometry import BoundingBox, GroundingSpec, Point, ReferringText, Stroke
from .image import CanvasImage
from .raster import RleMask

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "CanvasImage",
    "Chat",
    "ClearMasks",
    "Command",
    "GenerateImage",
    "GroundingSpec",
    "InpaintObjects",
    "MoveObject",
    "Point",
    "ReferringText",
    "RemoveObject",
    "ReplaceObject",
    "RleMask",
    "SegmentByStroke",
    "SegmentByText",
    "Session",
    "SetImage",
    "Stroke",
    "Undo",
    "execute",
    "new_session",
    "undo",
    "__version__",
]
