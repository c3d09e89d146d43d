"""Pixel-level operations: stroke rasterization, RLE masks, cut/paste
editing, and the deterministic fallback background fill.

Masks travel as row-major run-length encodings alternating background and
foreground counts, starting with a (possibly zero) background run. That
layout is part of the wire protocol, so encode/decode are specified
bit-exactly and validated hard.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import EmptyMask, HoleCoversEverything, InvalidGeometry, MalformedRle
from .geometry import PixelBox, Stroke
from .image import CanvasImage


@dataclass(frozen=True)
class RleMask:
    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(self.counts))
        _validate_counts(self.width, self.height, self.counts)

    @property
    def area(self) -> int:
        """Foreground pixel count."""
        return sum(self.counts[1::2])

    def to_json(self) -> dict[str, Any]:
        return {"w": self.width, "h": self.height, "counts": list(self.counts)}

    @classmethod
    def from_json(cls, obj: Any) -> RleMask:
        if (
            not isinstance(obj, dict)
            or not isinstance(obj.get("w"), int)
            or not isinstance(obj.get("h"), int)
            or not isinstance(obj.get("counts"), list)
            or not all(isinstance(c, int) and not isinstance(c, bool) for c in obj["counts"])
        ):
            raise MalformedRle(f"bad RLE JSON shape: {obj!r:.120}")
        return cls(obj["w"], obj["h"], tuple(obj["counts"]))


def _validate_counts(width: int, height: int, counts: tuple[int, ...]) -> None:
    if width < 1 or height < 1:
        raise MalformedRle(f"bad mask dims {width}x{height}")
    if not counts:
        raise MalformedRle("empty counts")
    if any(c < 0 for c in counts):
        raise MalformedRle("negative run length")
    # A zero is tolerated only as the leading background run.
    for i in range(1, len(counts)):
        if counts[i] == 0 and counts[i - 1] == 0:
            raise MalformedRle("consecutive zero runs")
    if counts[0] == 0 and len(counts) == 1:
        raise MalformedRle("single zero run")
    if sum(counts) != width * height:
        raise MalformedRle(f"runs sum to {sum(counts)}, expected {width * height}")


@dataclass(frozen=True)
class Patch:
    """Pixels lifted off a canvas: tight pixel bbox, RGBA crop, object mask."""

    bbox_px: PixelBox
    pixels: bytes = field(repr=False)
    mask: RleMask

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.bbox_px
        if (x1 - x0, y1 - y0) != (self.mask.width, self.mask.height):
            raise InvalidGeometry("patch mask dims disagree with bbox")
        if len(self.pixels) != (x1 - x0) * (y1 - y0) * 4:
            raise InvalidGeometry("patch buffer length disagrees with bbox")


def encode_rle(bitmap: np.ndarray) -> RleMask:
    """Encode an (h, w) boolean bitmap row-major, background run first."""
    if bitmap.ndim != 2 or bitmap.dtype != np.bool_:
        raise InvalidGeometry(f"expected 2D bool bitmap, got {bitmap.shape} {bitmap.dtype}")
    h, w = bitmap.shape
    flat = bitmap.ravel()
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs = [0] + runs
    return RleMask(w, h, tuple(int(r) for r in runs))


def decode_rle(mask: RleMask) -> np.ndarray:
    """Decode to an (h, w) boolean bitmap; inverse of encode_rle."""
    flat = np.zeros(mask.width * mask.height, dtype=np.bool_)
    pos = 0
    value = False
    for run in mask.counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(mask.height, mask.width)


def mask_from_bitmap(bitmap: np.ndarray) -> RleMask:
    return encode_rle(np.asarray(bitmap, dtype=np.bool_))


def rasterize_stroke(stroke: Stroke, dims: tuple[int, int]) -> RleMask:
    """Mark every pixel whose center lies within brush_radius of the polyline.

    Stroke coordinates map to continuous pixel space as (x*w, y*h); the
    radius denormalizes against the longer side. Pixel (col, row) has its
    center at (col+0.5, row+0.5). The distance test is inclusive.
    """
    w, h = dims
    if w < 1 or h < 1:
        raise InvalidGeometry(f"bad dims {dims}")
    pts = [(p.x * w, p.y * h) for p in stroke.points]
    radius = stroke.brush_radius * max(w, h)

    cx = np.arange(w, dtype=np.float64) + 0.5
    cy = np.arange(h, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(cx, cy)
    best = np.full((h, w), np.inf)
    segments = list(zip(pts, pts[1:])) if len(pts) > 1 else [(pts[0], pts[0])]
    for (ax, ay), (bx, by) in segments:
        dx, dy = bx - ax, by - ay
        seg_len2 = dx * dx + dy * dy
        if seg_len2 == 0.0:
            d2 = (gx - ax) ** 2 + (gy - ay) ** 2
        else:
            t = np.clip(((gx - ax) * dx + (gy - ay) * dy) / seg_len2, 0.0, 1.0)
            d2 = (gx - (ax + t * dx)) ** 2 + (gy - (ay + t * dy)) ** 2
        np.minimum(best, d2, out=best)
    return encode_rle(best <= radius * radius)


def mask_area(mask: RleMask) -> int:
    return mask.area


def mask_bbox(mask: RleMask) -> PixelBox:
    """Tight half-open pixel box around the foreground."""
    bitmap = decode_rle(mask)
    rows = np.flatnonzero(bitmap.any(axis=1))
    cols = np.flatnonzero(bitmap.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground")
    return (int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def mask_iou(a: RleMask, b: RleMask) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise InvalidGeometry("IoU requires equal mask dims")
    ba, bb = decode_rle(a), decode_rle(b)
    union = int(np.count_nonzero(ba | bb))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(ba & bb)) / union


def cut_region(image: CanvasImage, mask: RleMask) -> tuple[Patch, CanvasImage]:
    """Lift the masked pixels into a Patch, leaving alpha-0 holes behind.

    Hole pixels keep their RGB so the cut is purely an alpha marking;
    pasting the patch back at zero offset restores the image bit-exactly.
    """
    if (mask.width, mask.height) != image.dims:
        raise InvalidGeometry("mask dims must match image dims")
    if mask.area == 0:
        raise EmptyMask("cannot cut an empty mask")
    bitmap = decode_rle(mask)
    x0, y0, x1, y1 = mask_bbox(mask)
    arr = image.to_array()
    patch_pixels = arr[y0:y1, x0:x1].copy()
    patch_mask = encode_rle(bitmap[y0:y1, x0:x1])
    patch = Patch((x0, y0, x1, y1), np.ascontiguousarray(patch_pixels).tobytes(), patch_mask)
    arr[bitmap, 3] = 0
    return patch, CanvasImage.from_array(arr)


def paste_patch(image: CanvasImage, patch: Patch, offset_px: tuple[int, int]) -> CanvasImage:
    """Write the patch's foreground pixels at bbox origin + offset.

    Regions falling outside the canvas are clipped away; background patch
    pixels are never written.
    """
    dx, dy = offset_px
    x0, y0, x1, y1 = patch.bbox_px
    px0, py0 = x0 + dx, y0 + dy
    pw, ph = x1 - x0, y1 - y0
    # Destination intersected with the canvas, in patch-local coordinates.
    lx0, ly0 = max(0, -px0), max(0, -py0)
    lx1, ly1 = min(pw, image.width - px0), min(ph, image.height - py0)
    if lx0 >= lx1 or ly0 >= ly1:
        return image
    arr = image.to_array()
    patch_arr = np.frombuffer(patch.pixels, dtype=np.uint8).reshape(ph, pw, 4)
    fg = decode_rle(patch.mask)[ly0:ly1, lx0:lx1]
    dest = arr[py0 + ly0 : py0 + ly1, px0 + lx0 : px0 + lx1]
    dest[fg] = patch_arr[ly0:ly1, lx0:lx1][fg]
    return CanvasImage.from_array(arr)


def fill_hole_fallback(image: CanvasImage, hole: RleMask) -> CanvasImage:
    """Deterministic background fill: BFS inward from the hole boundary.

    Hole pixels are grouped by 4-connected BFS distance from the non-hole
    region; layers fill in distance order, row-major within a layer, each
    pixel taking the round-half-up mean RGB of its already-resolved
    4-neighbors (earlier pixels of the same layer count). Alpha is forced
    to 255 on filled pixels; everything else is untouched. No perceptual
    ambition, just the same bytes on every run.
    """
    if (hole.width, hole.height) != image.dims:
        raise InvalidGeometry("hole dims must match image dims")
    w, h = image.dims
    hole_map = decode_rle(hole)
    if hole_map.all():
        raise HoleCoversEverything("no resolved pixel to grow from")
    if hole.area == 0:
        return image
    arr = image.to_array()
    resolved = ~hole_map

    # Multi-source BFS: distance of each hole pixel to the non-hole region.
    # Seeding only the resolved pixels that touch a hole keeps the queue small.
    dist = np.full((h, w), -1, dtype=np.int32)
    dist[resolved] = 0
    touches_hole = np.zeros((h, w), dtype=np.bool_)
    touches_hole[:-1] |= hole_map[1:]
    touches_hole[1:] |= hole_map[:-1]
    touches_hole[:, :-1] |= hole_map[:, 1:]
    touches_hole[:, 1:] |= hole_map[:, :-1]
    frontier: deque[tuple[int, int]] = deque(
        (int(r), int(c)) for r, c in np.argwhere(resolved & touches_hole)
    )
    layers: dict[int, list[tuple[int, int]]] = {}
    while frontier:
        r, c = frontier.popleft()
        d = dist[r, c] + 1
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and dist[nr, nc] < 0:
                dist[nr, nc] = d
                layers.setdefault(d, []).append((nr, nc))
                frontier.append((nr, nc))

    for d in sorted(layers):
        for r, c in sorted(layers[d]):
            sums = [0, 0, 0]
            n = 0
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < h and 0 <= nc < w and resolved[nr, nc]:
                    px = arr[nr, nc]
                    sums[0] += int(px[0])
                    sums[1] += int(px[1])
                    sums[2] += int(px[2])
                    n += 1
            # BFS layering guarantees at least one resolved neighbor.
            arr[r, c, 0] = (2 * sums[0] + n) // (2 * n)
            arr[r, c, 1] = (2 * sums[1] + n) // (2 * n)
            arr[r, c, 2] = (2 * sums[2] + n) // (2 * n)
            arr[r, c, 3] = 255
            resolved[r, c] = True
    return CanvasImage.from_array(arr)
