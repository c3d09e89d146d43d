"""Deterministic in-process capability implementations.

Everything here is a pure function of (request, scene registry): no hidden
state, so whole-session replays reproduce bit for bit. Colors derive from
FNV-1a-64 so any independent implementation paints the same bytes.

Segmentation resolves prompts in this order:
  text   -> named object of the manifest registered for this exact image;
            else any registered manifest's object of that name, matched by
            color against the current (possibly edited) image; else pixels
            matching the FNV color of the text (finds regions previously
            painted by generate/inpaint for that concept).
  stroke/points -> 4-connected same-color component under the prompt
            centroid.
  boxes  -> known object rectangle with maximum IoU against the first box.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ..errors import NoObjectFound, ProtocolError
from ..geometry import BoundingBox, GroundingSpec, Point, denormalize_box
from ..hashing import fnv_color
from ..image import CanvasImage
from ..raster import RleMask, decode_rle, encode_rle, fill_hole_fallback
from .scenes import SceneManifest, SceneRegistry


def _paint_grounding(arr: np.ndarray, grounding: GroundingSpec) -> None:
    h, w = arr.shape[:2]
    for concept, box in zip(grounding.concepts, grounding.boxes):
        x0, y0, x1, y1 = denormalize_box(box, (w, h))
        arr[y0:y1, x0:x1, :3] = fnv_color(concept)
        arr[y0:y1, x0:x1, 3] = 255


def _color_match_bitmap(image: CanvasImage, color: tuple[int, int, int]) -> np.ndarray:
    arr = image.to_array()
    return (
        (arr[:, :, 0] == color[0])
        & (arr[:, :, 1] == color[1])
        & (arr[:, :, 2] == color[2])
    )


def _flood_fill_component(image: CanvasImage, seed: tuple[int, int]) -> np.ndarray:
    """4-connected component of pixels sharing the seed's exact RGBA."""
    arr = image.to_array()
    h, w = arr.shape[:2]
    r0, c0 = seed
    target = arr[r0, c0].copy()
    same = (arr == target).all(axis=2)
    out = np.zeros((h, w), dtype=np.bool_)
    queue: deque[tuple[int, int]] = deque([(r0, c0)])
    out[r0, c0] = True
    while queue:
        r, c = queue.popleft()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and same[nr, nc] and not out[nr, nc]:
                out[nr, nc] = True
                queue.append((nr, nc))
    return out


def _rect_bitmap(box: BoundingBox, dims: tuple[int, int]) -> np.ndarray:
    w, h = dims
    x0, y0, x1, y1 = denormalize_box(box, dims)
    out = np.zeros((h, w), dtype=np.bool_)
    out[y0:y1, x0:x1] = True
    return out


def _box_iou_px(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(0, ix1 - ix0) * max(0, iy1 - iy0)
    if inter == 0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


class MockBackends:
    """In-process implementation of all five capabilities."""

    def __init__(self, registry: SceneRegistry | None = None,
                 fill_capability: bool = True) -> None:
        self.registry = registry or SceneRegistry()
        self._fill_capability = fill_capability

    @property
    def fill_enabled(self) -> bool:
        return self._fill_capability

    # -- chat ------------------------------------------------------------

    def chat(
        self,
        image: CanvasImage | None,
        transcript: tuple[tuple[str, str], ...],
        message: str,
    ) -> str:
        if not message:
            raise ProtocolError("empty chat message")
        n = len(transcript)
        manifest = (
            self.registry.manifest_for_hash(image.content_hash) if image else None
        )
        if manifest is None:
            return f"MOCK[n={n}] unknown image"
        names = ", ".join(o.name for o in manifest.objects)
        return f"MOCK[n={n}] objects={len(manifest.objects)}: {names}"

    # -- segment ---------------------------------------------------------

    def segment(
        self,
        image: CanvasImage,
        *,
        scribble: RleMask | None = None,
        text: str | None = None,
        boxes: tuple[BoundingBox, ...] | None = None,
        points: tuple[Point, ...] | None = None,
    ) -> tuple[RleMask, str | None]:
        prompts = [p for p in (scribble, text, boxes, points) if p is not None]
        if len(prompts) != 1:
            raise ProtocolError("segment needs exactly one prompt kind")
        manifest = self.registry.manifest_for_hash(image.content_hash)

        if text is not None:
            return self._segment_text(image, text, manifest)
        if boxes is not None:
            return self._segment_box(image, boxes[0], manifest)
        if scribble is not None:
            if (scribble.width, scribble.height) != image.dims:
                raise ProtocolError("scribble dims must match the image")
            if scribble.area == 0:
                raise NoObjectFound("empty scribble")
            fg = np.argwhere(decode_rle(scribble))
            seed = self._clamp_seed(fg.mean(axis=0), image)
        else:
            assert points is not None
            mx = sum(p.x for p in points) / len(points)
            my = sum(p.y for p in points) / len(points)
            seed = (
                min(image.height - 1, int(my * image.height)),
                min(image.width - 1, int(mx * image.width)),
            )
        component = _flood_fill_component(image, seed)
        label = self._label_for_color(image, seed, manifest)
        return encode_rle(component), label

    @staticmethod
    def _clamp_seed(mean_rc: np.ndarray, image: CanvasImage) -> tuple[int, int]:
        r = min(image.height - 1, max(0, int(np.floor(mean_rc[0] + 0.5))))
        c = min(image.width - 1, max(0, int(np.floor(mean_rc[1] + 0.5))))
        return r, c

    def _label_for_color(
        self,
        image: CanvasImage,
        seed: tuple[int, int],
        manifest: SceneManifest | None,
    ) -> str | None:
        rgb = tuple(int(v) for v in image.to_array()[seed[0], seed[1], :3])
        candidates = list(manifest.objects) if manifest else []
        candidates += [o for _, o in self.registry.all_objects()]
        for obj in candidates:
            if obj.color == rgb:
                return obj.name
        return None

    def _segment_text(
        self, image: CanvasImage, text: str, manifest: SceneManifest | None
    ) -> tuple[RleMask, str | None]:
        if manifest is not None:
            obj = manifest.find(text)
            if obj is not None:
                bitmap = _rect_bitmap(obj.region, image.dims)
                return encode_rle(bitmap), obj.name
        obj = self.registry.find_object(text)
        if obj is not None:
            bitmap = _color_match_bitmap(image, obj.color)
            if bitmap.any():
                return encode_rle(bitmap), obj.name
        bitmap = _color_match_bitmap(image, fnv_color(text))
        if bitmap.any():
            return encode_rle(bitmap), text
        raise NoObjectFound(f"nothing matches {text!r}")

    def _segment_box(
        self, image: CanvasImage, box: BoundingBox, manifest: SceneManifest | None
    ) -> tuple[RleMask, str | None]:
        box_px = denormalize_box(box, image.dims)
        candidates = list(manifest.objects) if manifest else []
        candidates += [o for _, o in self.registry.all_objects()]
        best, best_iou = None, 0.0
        for obj in candidates:
            iou = _box_iou_px(box_px, denormalize_box(obj.region, image.dims))
            if iou > best_iou:
                best, best_iou = obj, iou
        if best is None:
            raise NoObjectFound("no object overlaps the box")
        if manifest is not None and manifest.find(best.name) is best:
            bitmap = _rect_bitmap(best.region, image.dims)
        else:
            bitmap = _color_match_bitmap(image, best.color)
        if not bitmap.any():
            raise NoObjectFound(f"object {best.name!r} not visible")
        return encode_rle(bitmap), best.name

    # -- generate / inpaint / fill ----------------------------------------

    def generate(
        self,
        caption: str,
        grounding: GroundingSpec | None,
        width: int,
        height: int,
    ) -> CanvasImage:
        if not caption:
            raise ProtocolError("empty caption")
        arr = np.empty((height, width, 4), dtype=np.uint8)
        arr[:, :, :3] = fnv_color(caption)
        arr[:, :, 3] = 255
        if grounding is not None:
            _paint_grounding(arr, grounding)
        return CanvasImage.from_array(arr)

    def inpaint(
        self,
        image: CanvasImage,
        *,
        grounding: GroundingSpec | None = None,
        mask: RleMask | None = None,
        prompt: str | None = None,
    ) -> CanvasImage:
        if grounding is not None and (mask is not None or prompt is not None):
            raise ProtocolError("inpaint takes grounding or mask+prompt, not both")
        if grounding is None and (mask is None or not prompt):
            raise ProtocolError("inpaint needs grounding or mask+prompt")
        arr = image.to_array()
        if grounding is not None:
            _paint_grounding(arr, grounding)
        else:
            assert mask is not None and prompt is not None
            if (mask.width, mask.height) != image.dims:
                raise ProtocolError("inpaint mask dims must match the image")
            fg = decode_rle(mask)
            arr[fg, :3] = fnv_color(prompt)
            arr[fg, 3] = 255
        return CanvasImage.from_array(arr)

    def fill(self, image: CanvasImage, hole: RleMask) -> CanvasImage:
        if (hole.width, hole.height) != image.dims:
            raise ProtocolError("fill mask dims must match the image")
        if hole.area == 0:
            raise ProtocolError("fill needs a nonempty hole")
        return fill_hole_fallback(image, hole)
