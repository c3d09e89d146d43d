from __future__ import annotations

import functools
import random

import numpy as np
import pytest

from visloop.errors import NoObjectFound, ProtocolError
from visloop.geometry import BoundingBox, GroundingSpec, Point, Stroke
from visloop.hashing import fnv1a64, fnv_color
from visloop.image import CanvasImage
from visloop.mocks import MockBackends, SceneManifest, SceneObject, SceneRegistry, render_scene
from visloop.mocks.scenes import SceneFixture
from visloop.raster import decode_rle, encode_rle, mask_area, rasterize_stroke


def fnv1a64_oracle(data: bytes) -> int:
    """Independent route: reduce over bytes instead of a loop."""
    return functools.reduce(
        lambda h, b: ((h ^ b) * 0x100000001B3) % (1 << 64), data, 0xCBF29CE484222325
    )


def flood_oracle(image: CanvasImage, seed: tuple[int, int]) -> np.ndarray:
    """Naive set-based connectivity: grow until fixpoint."""
    arr = image.to_array()
    h, w = arr.shape[:2]
    target = tuple(arr[seed[0], seed[1]])
    component = {seed}
    while True:
        grown = set(component)
        for r, c in component:
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < h and 0 <= nc < w and tuple(arr[nr, nc]) == target:
                    grown.add((nr, nc))
        if grown == component:
            break
        component = grown
    out = np.zeros((h, w), dtype=np.bool_)
    for r, c in component:
        out[r, c] = True
    return out


def simple_scene(w=32, h=32) -> tuple[SceneRegistry, CanvasImage]:
    registry = SceneRegistry()
    manifest = SceneManifest(
        (10, 10, 10),
        (
            SceneObject("boat", BoundingBox(0.125, 0.125, 0.5, 0.5), (200, 40, 40)),
            SceneObject("tree", BoundingBox(0.625, 0.625, 0.875, 0.875), (40, 200, 40)),
        ),
    )
    image = registry.register(SceneFixture("simple", w, h, manifest))
    return registry, image


class TestFnv:
    def test_published_vectors(self):
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64("a") == 0xAF63DC4C8601EC8C
        assert fnv1a64("foobar") == 0x85944171F73967E8

    def test_matches_independent_route(self):
        rng = random.Random(5)
        for _ in range(50):
            data = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 40)))
            assert fnv1a64(data) == fnv1a64_oracle(data)

    def test_color_split_is_big_endian_low_24(self):
        for text in ("boat", "sunset scene", "Halloween ghost"):
            v = fnv1a64_oracle(text.encode()) & 0xFFFFFF
            assert fnv_color(text) == ((v >> 16) & 0xFF, (v >> 8) & 0xFF, v & 0xFF)


class TestScenes:
    def test_render_paints_in_order(self):
        manifest = SceneManifest(
            (0, 0, 0),
            (
                SceneObject("under", BoundingBox(0.0, 0.0, 0.5, 0.5), (1, 1, 1)),
                SceneObject("over", BoundingBox(0.25, 0.25, 0.75, 0.75), (2, 2, 2)),
            ),
        )
        arr = render_scene(manifest, 8, 8).to_array()
        assert tuple(arr[0, 0, :3]) == (1, 1, 1)
        assert tuple(arr[3, 3, :3]) == (2, 2, 2)  # overlap goes to the later object
        assert tuple(arr[7, 7, :3]) == (0, 0, 0)

    def test_duplicate_names_rejected(self):
        with pytest.raises(Exception):
            SceneManifest(
                (0, 0, 0),
                (
                    SceneObject("x", BoundingBox(0.0, 0.0, 0.5, 0.5), (1, 1, 1)),
                    SceneObject("x", BoundingBox(0.5, 0.5, 1.0, 1.0), (2, 2, 2)),
                ),
            )

    def test_registry_recognizes_rendered_image(self):
        registry, image = simple_scene()
        assert registry.manifest_for_hash(image.content_hash) is not None
        assert registry.manifest_for_hash("0" * 16) is None


class TestMockChat:
    def test_known_image_template(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        assert mb.chat(image, (), "hello") == "MOCK[n=0] objects=2: boat, tree"

    def test_turn_counting(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        transcript = (("user", "a"), ("assistant", "b"), ("user", "c"), ("assistant", "d"))
        assert mb.chat(image, transcript, "next") == "MOCK[n=4] objects=2: boat, tree"

    def test_unknown_image(self):
        registry, _ = simple_scene()
        mb = MockBackends(registry)
        other = CanvasImage.solid(8, 8, (1, 2, 3, 255))
        assert mb.chat(other, (), "hi") == "MOCK[n=0] unknown image"
        assert mb.chat(None, (), "hi") == "MOCK[n=0] unknown image"


class TestMockSegment:
    def test_text_lookup(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        mask, label = mb.segment(image, text="boat")
        assert label == "boat"
        # 32x32, box (0.125..0.5) -> pixels [4,16) x [4,16)
        assert mask_area(mask) == 12 * 12
        assert decode_rle(mask)[4, 4] and not decode_rle(mask)[2, 2]

    def test_text_lookup_case_insensitive(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        _, label = mb.segment(image, text="BOAT")
        assert label == "boat"

    def test_text_absent(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        with pytest.raises(NoObjectFound):
            mb.segment(image, text="zebra")

    def test_text_on_edited_image_color_match(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        arr = image.to_array()
        arr[0, 0] = (7, 7, 7, 255)  # any edit unregisters the hash
        edited = CanvasImage.from_array(arr)
        mask, label = mb.segment(edited, text="tree")
        assert label == "tree"
        assert mask_area(mask) == 8 * 8

    def test_text_finds_generated_concepts_via_fnv(self):
        registry, _ = simple_scene()
        mb = MockBackends(registry)
        spec = GroundingSpec(("white goose",), (BoundingBox(0.25, 0.25, 0.75, 0.75),))
        generated = mb.generate("a lake", spec, 16, 16)
        mask, label = mb.segment(generated, text="white goose")
        assert label == "white goose"
        assert mask_area(mask) == 8 * 8

    def test_scribble_flood_fill(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        stroke = Stroke((Point(0.3, 0.3),), brush_radius=0.05)
        scribble = rasterize_stroke(stroke, image.dims)
        mask, label = mb.segment(image, scribble=scribble)
        assert label == "boat"
        assert mask_area(mask) == 12 * 12

    def test_scribble_background_component(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        stroke = Stroke((Point(0.95, 0.05),), brush_radius=0.03)
        mask, label = mb.segment(
            image, scribble=rasterize_stroke(stroke, image.dims)
        )
        assert label is None  # background is not a named object
        assert decode_rle(mask)[1, 30]

    def test_flood_fill_matches_oracle_on_random_scenes(self):
        rng = random.Random(77)
        for _ in range(50):
            w, h = rng.randint(6, 24), rng.randint(6, 24)
            registry = SceneRegistry()
            objects = []
            for i in range(rng.randint(0, 3)):
                x0, y0 = rng.uniform(0, 0.6), rng.uniform(0, 0.6)
                objects.append(
                    SceneObject(
                        f"o{i}",
                        BoundingBox(x0, y0, x0 + rng.uniform(0.2, 0.4), y0 + rng.uniform(0.2, 0.4)),
                        (rng.randrange(256), rng.randrange(256), rng.randrange(256)),
                    )
                )
            manifest = SceneManifest(
                (rng.randrange(256), rng.randrange(256), rng.randrange(256)),
                tuple(objects),
            )
            image = registry.register(SceneFixture("r", w, h, manifest))
            seed = (rng.randrange(h), rng.randrange(w))
            from visloop.mocks.backends import _flood_fill_component

            got = _flood_fill_component(image, seed)
            assert np.array_equal(got, flood_oracle(image, seed))

    def test_points_prompt(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        mask, label = mb.segment(image, points=(Point(0.7, 0.7),))
        assert label == "tree"

    def test_box_prompt_max_iou(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        mask, label = mb.segment(image, boxes=(BoundingBox(0.1, 0.1, 0.55, 0.55),))
        assert label == "boat"
        with pytest.raises(NoObjectFound):
            # tiny corner box overlapping nothing
            mb.segment(image, boxes=(BoundingBox(0.95, 0.01, 0.99, 0.05),))

    def test_exactly_one_prompt(self):
        registry, image = simple_scene()
        mb = MockBackends(registry)
        with pytest.raises(ProtocolError):
            mb.segment(image, text="boat", points=(Point(0.5, 0.5),))
        with pytest.raises(ProtocolError):
            mb.segment(image)


class TestMockGenerate:
    def test_deterministic(self):
        mb = MockBackends()
        spec = GroundingSpec(("x",), (BoundingBox(0.25, 0.25, 0.5, 0.5),))
        a = mb.generate("caption", spec, 32, 32)
        b = mb.generate("caption", spec, 32, 32)
        assert a.content_hash == b.content_hash

    def test_background_is_caption_color(self):
        mb = MockBackends()
        img = mb.generate("x", None, 8, 8)
        assert tuple(img.to_array()[0, 0, :3]) == fnv_color("x")

    def test_grounding_changes_exactly_the_box(self):
        mb = MockBackends()
        plain = mb.generate("x", None, 16, 16).to_array()
        spec = GroundingSpec(("y",), (BoundingBox(0.25, 0.25, 0.75, 0.75),))
        grounded = mb.generate("x", spec, 16, 16).to_array()
        diff = (plain != grounded).any(axis=2)
        want = np.zeros((16, 16), dtype=np.bool_)
        want[4:12, 4:12] = True
        assert np.array_equal(diff, want)

    def test_concept_colors_pinned(self):
        # values computed with the independent FNV route above
        assert fnv_color("boat") == (215, 167, 123)
        mb = MockBackends()
        spec = GroundingSpec(("boat",), (BoundingBox(0.0, 0.0, 0.5, 0.5),))
        img = mb.generate("sea", spec, 8, 8)
        assert tuple(img.to_array()[0, 0, :3]) == (215, 167, 123)


class TestMockInpaint:
    def test_outside_pixels_untouched(self, rng):
        from conftest import random_image

        mb = MockBackends()
        img = random_image(rng, 16, 16)
        spec = GroundingSpec(("hat",), (BoundingBox(0.25, 0.25, 0.5, 0.5),))
        out = mb.inpaint(img, grounding=spec).to_array()
        before = img.to_array()
        box = np.zeros((16, 16), dtype=np.bool_)
        box[4:8, 4:8] = True
        assert np.array_equal(out[~box], before[~box])
        assert (out[box][:, :3] == fnv_color("hat")).all()

    def test_mask_prompt_recolors_mask_area_pixels(self, rng):
        from conftest import random_bitmap, random_image

        mb = MockBackends()
        img = random_image(rng, 12, 12)
        bitmap = random_bitmap(rng, 12, 12, 0.3)
        bitmap[0, 0] = True
        mask = encode_rle(bitmap)
        out = mb.inpaint(img, mask=mask, prompt="sunset scene").to_array()
        changed = (out[:, :, :3] != fnv_color("sunset scene")).any(axis=2)
        assert not changed[bitmap].any()
        assert np.array_equal(out[~bitmap], img.to_array()[~bitmap])

    def test_disjoint_single_concept_inpaints_commute(self):
        mb = MockBackends()
        base = mb.generate("bg", None, 20, 20)
        s1 = GroundingSpec(("a",), (BoundingBox(0.1, 0.1, 0.3, 0.3),))
        s2 = GroundingSpec(("b",), (BoundingBox(0.6, 0.6, 0.9, 0.9),))
        ab = mb.inpaint(mb.inpaint(base, grounding=s1), grounding=s2)
        ba = mb.inpaint(mb.inpaint(base, grounding=s2), grounding=s1)
        assert ab == ba

    def test_grounding_xor_mask_prompt(self):
        mb = MockBackends()
        img = CanvasImage.solid(4, 4, (0, 0, 0, 255))
        with pytest.raises(ProtocolError):
            mb.inpaint(img)
        spec = GroundingSpec(("a",), (BoundingBox(0.1, 0.1, 0.3, 0.3),))
        bitmap = np.ones((4, 4), dtype=np.bool_)
        with pytest.raises(ProtocolError):
            mb.inpaint(img, grounding=spec, mask=encode_rle(bitmap), prompt="x")


class TestMockFill:
    def test_same_algorithm_as_local_fallback(self, rng):
        from conftest import random_bitmap, random_image
        from visloop.raster import fill_hole_fallback

        mb = MockBackends()
        img = random_image(rng, 10, 10)
        bitmap = random_bitmap(rng, 10, 10, 0.3)
        bitmap[0, 0] = True
        bitmap[5, 5] = False
        mask = encode_rle(bitmap)
        assert mb.fill(img, mask) == fill_hole_fallback(img, mask)
