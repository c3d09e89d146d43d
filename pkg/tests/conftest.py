from __future__ import annotations

import random

import numpy as np
import pytest

from visloop.image import CanvasImage
from visloop.raster import RleMask, encode_rle


def random_image(rng: random.Random, w: int, h: int, opaque: bool = True) -> CanvasImage:
    arr = np.array(
        [rng.randrange(256) for _ in range(w * h * 4)], dtype=np.uint8
    ).reshape(h, w, 4)
    if opaque:
        arr[:, :, 3] = 255
    return CanvasImage.from_array(arr)


def random_bitmap(rng: random.Random, w: int, h: int, density: float = 0.5) -> np.ndarray:
    flat = np.array([rng.random() < density for _ in range(w * h)], dtype=np.bool_)
    return flat.reshape(h, w)


def random_mask(rng: random.Random, w: int, h: int, density: float = 0.5) -> RleMask:
    return encode_rle(random_bitmap(rng, w, h, density))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)
