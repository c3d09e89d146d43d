"""Synthetic scenes the mock backends treat as ground truth.

A manifest describes a flat-colored background with named, flat-colored
rectangular objects painted over it in order. Rendering a manifest and
registering the result lets the mocks "recognize" that image later by its
content hash. Fixture discipline: distinct colors per object and no
overlaps, so an object's visible region equals its rectangle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..errors import InvalidGeometry
from ..geometry import BoundingBox, denormalize_box
from ..image import CanvasImage

Rgb = tuple[int, int, int]


def _check_rgb(color: Iterable[int]) -> Rgb:
    rgb = tuple(int(c) for c in color)
    if len(rgb) != 3 or any(not 0 <= c <= 255 for c in rgb):
        raise InvalidGeometry(f"bad RGB triple {color!r}")
    return rgb  # type: ignore[return-value]


@dataclass(frozen=True)
class SceneObject:
    name: str
    region: BoundingBox
    color: Rgb

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise InvalidGeometry("scene object needs a name")
        object.__setattr__(self, "color", _check_rgb(self.color))


@dataclass(frozen=True)
class SceneManifest:
    background_color: Rgb
    objects: tuple[SceneObject, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "background_color", _check_rgb(self.background_color))
        object.__setattr__(self, "objects", tuple(self.objects))
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise InvalidGeometry(f"duplicate object names in manifest: {names}")

    def find(self, name: str) -> SceneObject | None:
        """First case-insensitive name match, manifest order."""
        wanted = name.casefold()
        for obj in self.objects:
            if obj.name.casefold() == wanted:
                return obj
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "background_color": list(self.background_color),
            "objects": [
                {"name": o.name, "box": list(o.region.as_tuple()), "color": list(o.color)}
                for o in self.objects
            ],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SceneManifest:
        return cls(
            _check_rgb(obj["background_color"]),
            tuple(
                SceneObject(o["name"], BoundingBox(*o["box"]), _check_rgb(o["color"]))
                for o in obj.get("objects", [])
            ),
        )


def render_scene(manifest: SceneManifest, width: int, height: int) -> CanvasImage:
    """Paint background then each object rectangle, in manifest order."""
    arr = np.empty((height, width, 4), dtype=np.uint8)
    arr[:, :, :3] = manifest.background_color
    arr[:, :, 3] = 255
    for obj in manifest.objects:
        x0, y0, x1, y1 = denormalize_box(obj.region, (width, height))
        arr[y0:y1, x0:x1, :3] = obj.color
    return CanvasImage.from_array(arr)


@dataclass(frozen=True)
class SceneFixture:
    name: str
    width: int
    height: int
    manifest: SceneManifest

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> SceneFixture:
        return cls(
            name=str(obj["name"]),
            width=int(obj.get("width", 512)),
            height=int(obj.get("height", 512)),
            manifest=SceneManifest.from_json(obj),
        )

    def to_json(self) -> dict[str, Any]:
        out = {"name": self.name, "width": self.width, "height": self.height}
        out.update(self.manifest.to_json())
        return out


class SceneRegistry:
    """Rendered scenes keyed by image content hash, in registration order."""

    def __init__(self) -> None:
        self._by_hash: dict[str, SceneManifest] = {}
        self._by_name: dict[str, tuple[SceneFixture, CanvasImage]] = {}

    def register(self, fixture: SceneFixture) -> CanvasImage:
        image = render_scene(fixture.manifest, fixture.width, fixture.height)
        self._by_hash[image.content_hash] = fixture.manifest
        self._by_name[fixture.name] = (fixture, image)
        return image

    def register_manifest(
        self, name: str, manifest: SceneManifest, width: int, height: int
    ) -> CanvasImage:
        return self.register(SceneFixture(name, width, height, manifest))

    def load_dir(self, fixtures_dir: Path) -> int:
        count = 0
        for path in sorted(Path(fixtures_dir).glob("*.json")):
            self.register(SceneFixture.from_json(json.loads(path.read_text())))
            count += 1
        return count

    def manifest_for_hash(self, digest: str) -> SceneManifest | None:
        return self._by_hash.get(digest)

    def scene_image(self, name: str) -> CanvasImage | None:
        entry = self._by_name.get(name)
        return entry[1] if entry else None

    def find_object(
        self, name: str, preferred: SceneManifest | None = None
    ) -> SceneObject | None:
        """Case-insensitive object lookup: the preferred manifest first,
        then every registered manifest in registration order."""
        if preferred is not None:
            hit = preferred.find(name)
            if hit is not None:
                return hit
        for manifest in self._by_hash.values():
            hit = manifest.find(name)
            if hit is not None:
                return hit
        return None

    def all_objects(self) -> list[tuple[SceneManifest, SceneObject]]:
        return [(m, o) for m in self._by_hash.values() for o in m.objects]
