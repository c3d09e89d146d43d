"""RGBA8 canvas images: an immutable buffer plus a 64-bit content digest.

PNG is the only codec (lossless, so digest chains survive a round trip
through disk or the wire). The numpy bridge is how the raster operations
see pixels; the bytes buffer is row-major RGBA.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from PIL import Image

from .errors import InvalidGeometry
from .geometry import round_half_up
from .hashing import content_digest


@dataclass(frozen=True, eq=False)
class CanvasImage:
    width: int
    height: int
    pixels: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise InvalidGeometry(f"bad image dims {self.width}x{self.height}")
        if len(self.pixels) != self.width * self.height * 4:
            raise InvalidGeometry(
                f"buffer length {len(self.pixels)} != {self.width}x{self.height}x4"
            )

    @cached_property
    def content_hash(self) -> str:
        return content_digest(self.pixels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CanvasImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.pixels == other.pixels
        )

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.content_hash))

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> CanvasImage:
        """Build from an (h, w, 4) uint8 array."""
        if arr.ndim != 3 or arr.shape[2] != 4 or arr.dtype != np.uint8:
            raise InvalidGeometry(f"expected (h, w, 4) uint8 array, got {arr.shape} {arr.dtype}")
        h, w = arr.shape[:2]
        return cls(w, h, np.ascontiguousarray(arr).tobytes())

    def to_array(self) -> np.ndarray:
        """Writable (h, w, 4) uint8 copy."""
        arr = np.frombuffer(self.pixels, dtype=np.uint8)
        return arr.reshape(self.height, self.width, 4).copy()

    @classmethod
    def solid(cls, width: int, height: int, rgba: tuple[int, int, int, int]) -> CanvasImage:
        arr = np.empty((height, width, 4), dtype=np.uint8)
        arr[:, :] = rgba
        return cls.from_array(arr)

    @classmethod
    def from_png_bytes(cls, data: bytes) -> CanvasImage:
        try:
            img = Image.open(io.BytesIO(data))
            img = img.convert("RGBA")
        except Exception as exc:
            raise InvalidGeometry(f"not a decodable image: {exc}") from exc
        return cls.from_array(np.asarray(img, dtype=np.uint8))

    def to_png_bytes(self) -> bytes:
        img = Image.frombytes("RGBA", (self.width, self.height), self.pixels)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_b64_png(cls, data: str) -> CanvasImage:
        try:
            raw = base64.b64decode(data, validate=True)
        except Exception as exc:
            raise InvalidGeometry(f"bad base64 image payload: {exc}") from exc
        return cls.from_png_bytes(raw)

    def to_b64_png(self) -> str:
        return base64.b64encode(self.to_png_bytes()).decode("ascii")


def downscale_to_fit(image: CanvasImage, max_side: int) -> CanvasImage:
    """Nearest-neighbor downscale so the longer side equals max_side.

    Sampling index for output i is floor(i * src / dst); deterministic
    across platforms. Images already within bounds pass through untouched.
    """
    long_side = max(image.width, image.height)
    if long_side <= max_side:
        return image
    if image.width >= image.height:
        new_w = max_side
        new_h = max(1, round_half_up(image.height * max_side / image.width))
    else:
        new_h = max_side
        new_w = max(1, round_half_up(image.width * max_side / image.height))
    arr = image.to_array()
    rows = (np.arange(new_h) * image.height) // new_h
    cols = (np.arange(new_w) * image.width) // new_w
    return CanvasImage.from_array(arr[rows[:, None], cols[None, :]])
