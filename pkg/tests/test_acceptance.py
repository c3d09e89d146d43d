"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line and asserting its runtime budget. Everything runs against
the deterministic mocks; no GPU, no network beyond loopback."""

from __future__ import annotations

import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from visloop import commands as cmd
from visloop.engine import execute, new_session, undo, verify_hash_chain
from visloop.errors import BackendError, BackendUnavailable, NoImage, NothingToUndo
from visloop.geometry import (
    BoundingBox,
    GroundingSpec,
    ReferringText,
    denormalize_box,
    normalize_box,
    parse_grounding_instruction,
)
from visloop.image import CanvasImage
from visloop.mocks import MockBackends, SceneManifest, SceneObject, SceneRegistry
from visloop.mocks.scenes import SceneFixture
from visloop.mocks.server import create_mock_app
from visloop.protocol import RESPONSE_MODELS
from visloop.raster import (
    cut_region,
    decode_rle,
    encode_rle,
    fill_hole_fallback,
    paste_patch,
)
from visloop.service.app import create_app
from visloop.service.config import ServiceConfig
from visloop.service.replay import (
    bundled_golden_path,
    bundled_script_path,
    check_golden,
    mock_backends_with_fixtures,
    replay_script,
)


@contextmanager
def criterion(name: str, budget_s: float | None = None):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    elapsed = time.perf_counter() - t0
    if budget_s is not None:
        assert elapsed < budget_s, f"{name} took {elapsed:.1f}s, budget {budget_s}s"
    print(f"[PASS] {name} ({elapsed:.2f}s)")


def acceptance_scene():
    registry = SceneRegistry()
    manifest = SceneManifest(
        (8, 8, 8),
        (
            SceneObject("boat", BoundingBox(0.125, 0.125, 0.5, 0.5), (200, 40, 40)),
            SceneObject("tree", BoundingBox(0.625, 0.625, 0.875, 0.875), (40, 200, 40)),
        ),
    )
    image = registry.register(SceneFixture("acc", 24, 24, manifest))
    return registry, image


def test_geometry_and_codec_properties():
    with criterion("geometry/codec properties", budget_s=10.0):
        gen = np.random.default_rng(1234)
        # RLE encode/decode identity on 1000 random bitmaps up to 256x256
        for _ in range(1000):
            w = int(gen.integers(1, 257))
            h = int(gen.integers(1, 257))
            bitmap = gen.random((h, w)) < gen.random()
            assert np.array_equal(decode_rle(encode_rle(bitmap)), bitmap)

        # cut/paste zero-offset identity, bit exact, on 100 random pairs
        for _ in range(100):
            w = int(gen.integers(1, 65))
            h = int(gen.integers(1, 65))
            arr = gen.integers(0, 256, size=(h, w, 4), dtype=np.uint8)
            arr[:, :, 3] = 255
            image = CanvasImage.from_array(arr)
            bitmap = gen.random((h, w)) < 0.4
            if not bitmap.any():
                bitmap[0, 0] = True
            patch, holed = cut_region(image, encode_rle(bitmap))
            assert paste_patch(holed, patch, (0, 0)) == image

        # normalize/denormalize within half a pixel on 1000 random boxes
        rng = random.Random(99)
        for _ in range(1000):
            w, h = rng.randint(1, 4096), rng.randint(1, 4096)
            x0 = rng.randint(0, w - 1)
            x1 = rng.randint(x0 + 1, w)
            y0 = rng.randint(0, h - 1)
            y1 = rng.randint(y0 + 1, h)
            back = denormalize_box(normalize_box((x0, y0, x1, y1), (w, h)), (w, h))
            assert all(abs(a - b) <= 0.5 for a, b in zip(back, (x0, y0, x1, y1)))

        # grounding parse/join idempotence
        samples = [
            "boat; lake; mountains", "white goose", "a; ; b ;", "x;;y",
            " spaced ; concepts here ", "comma, stays; verbatim",
        ]
        for text in samples:
            concepts = parse_grounding_instruction(text)
            assert parse_grounding_instruction("; ".join(concepts)) == concepts


def test_fallback_fill():
    with criterion("fallback fill", budget_s=10.0):
        # constant image: any hole fills back to the constant, exactly
        image = CanvasImage.solid(20, 16, (123, 45, 67, 255))
        hole = np.zeros((16, 20), dtype=np.bool_)
        hole[4:12, 5:15] = True
        assert fill_hole_fallback(image, encode_rle(hole)) == image

        # single pixel: rounded mean of its four neighbors
        arr = np.zeros((3, 3, 4), dtype=np.uint8)
        arr[:, :, 3] = 255
        arr[0, 1, 2] = 9
        arr[2, 1, 2] = 10
        arr[1, 0, 2] = 10
        arr[1, 2, 2] = 10
        one = np.zeros((3, 3), dtype=np.bool_)
        one[1, 1] = True
        out = fill_hole_fallback(CanvasImage.from_array(arr), encode_rle(one))
        assert out.to_array()[1, 1, 2] == 10  # mean 9.75 rounds to 10

        # oracle equivalence on 50 random two-color scenes
        from test_fill import oracle_fill

        rng = random.Random(31337)
        for _ in range(50):
            w, h = rng.randint(6, 32), rng.randint(6, 32)
            arr = np.zeros((h, w, 4), dtype=np.uint8)
            arr[:, :, 3] = 255
            split = rng.randint(1, h - 1)
            arr[:split, :, :3] = [rng.randrange(256) for _ in range(3)]
            arr[split:, :, :3] = [rng.randrange(256) for _ in range(3)]
            image = CanvasImage.from_array(arr)
            hole = np.zeros((h, w), dtype=np.bool_)
            y0, x0 = rng.randint(0, h - 2), rng.randint(0, w - 2)
            hole[y0 : rng.randint(y0 + 1, h), x0 : rng.randint(x0 + 1, w)] = True
            if hole.all():
                hole[0, 0] = False
            got = fill_hole_fallback(image, encode_rle(hole))
            assert got == oracle_fill(image, hole)


class FlakyBackends:
    """Mock backends with seeded random outages on every capability."""

    def __init__(self, inner: MockBackends, rng: random.Random, p_fail: float = 0.2):
        self.inner = inner
        self.rng = rng
        self.p_fail = p_fail

    @property
    def fill_enabled(self):
        return self.inner.fill_enabled

    def _roll(self, capability):
        if self.rng.random() < self.p_fail:
            raise BackendUnavailable(f"injected outage: {capability}")

    def chat(self, *a, **kw):
        self._roll("chat")
        return self.inner.chat(*a, **kw)

    def segment(self, *a, **kw):
        self._roll("segment")
        return self.inner.segment(*a, **kw)

    def generate(self, *a, **kw):
        self._roll("generate")
        return self.inner.generate(*a, **kw)

    def inpaint(self, *a, **kw):
        self._roll("inpaint")
        return self.inner.inpaint(*a, **kw)

    def fill(self, *a, **kw):
        self._roll("fill")
        return self.inner.fill(*a, **kw)


def test_state_machine_randomized():
    with criterion("state machine over randomized sequences", budget_s=20.0):
        registry, image = acceptance_scene()
        for seed in range(200):
            rng = random.Random(10_000 + seed)
            backends = FlakyBackends(MockBackends(registry), rng)
            session = new_session()

            # NoImage gating before any image exists
            with pytest.raises(NoImage):
                execute(session, cmd.Chat("too early"), backends)
            assert session.history == []

            execute(session, cmd.SetImage(image), backends.inner)

            undo_canvas_stack: list[CanvasImage | None] = [None]
            undo_mask_stack: list[dict] = [{}]
            for step in range(rng.randint(4, 10)):
                roll = rng.random()
                canvas_before = session.canvas
                masks_before = dict(session.pending_masks)
                mutating_snapshot = (canvas_before, masks_before)
                try:
                    if roll < 0.2:
                        execute(session, cmd.Chat(f"m{step}"), backends)
                    elif roll < 0.45:
                        name = rng.choice(["boat", "tree", "ghost"])
                        execute(session, cmd.SegmentByText(ReferringText(name)), backends)
                    elif roll < 0.6 and session.pending_masks:
                        mask_id = rng.choice(list(session.pending_masks))
                        execute(session, cmd.RemoveObject(mask_id), backends)
                        undo_canvas_stack.append(mutating_snapshot[0])
                        undo_mask_stack.append(mutating_snapshot[1])
                    elif roll < 0.8:
                        x0, y0 = rng.uniform(0, 0.6), rng.uniform(0, 0.6)
                        spec = GroundingSpec(
                            (rng.choice(["boat", "hat", "web"]),),
                            (BoundingBox(x0, y0, x0 + 0.25, y0 + 0.25),),
                        )
                        execute(session, cmd.InpaintObjects(spec), backends)
                        undo_canvas_stack.append(mutating_snapshot[0])
                        undo_mask_stack.append(mutating_snapshot[1])
                    elif roll < 0.9:
                        try:
                            undo(session)
                            expected_canvas = undo_canvas_stack.pop()
                            expected_masks = undo_mask_stack.pop()
                            assert expected_canvas is not None
                            assert session.canvas == expected_canvas
                            assert session.canvas.pixels == expected_canvas.pixels
                            assert set(session.pending_masks) == set(expected_masks)
                        except NothingToUndo:
                            assert undo_canvas_stack[-1] is None
                    else:
                        execute(session, cmd.ClearMasks(), backends)
                except BackendError:
                    # failed calls never mutate
                    assert session.canvas is canvas_before
                    assert session.pending_masks == masks_before
                    assert session.history[-1].status == "failed"
                verify_hash_chain(session.history)
            assert session.revision == len(session.history)


def test_protocol_conformance():
    with criterion("protocol conformance", budget_s=20.0):
        import test_protocol as tp

        registry, image = tp.tiny_scene()
        client = TestClient(create_mock_app(registry))
        requests = tp.wire_requests(image)
        for capability, body in requests.items():
            # schema validation
            resp = client.post(f"/v1/{capability}", json=body)
            assert resp.status_code == 200
            RESPONSE_MODELS[capability].model_validate(resp.json())
            # unknown protocol_version rejected
            bad = client.post(f"/v1/{capability}", json=dict(body, protocol_version="0"))
            assert bad.status_code == 400
            assert bad.json()["error"] == "unsupported_protocol_version"
            # golden request/response match (dict equality: key order free)
            golden = json.loads((tp.WIRE_DIR / f"{capability}.json").read_text())
            assert body == golden["request"]
            assert resp.json() == golden["response"]


def test_scenario_replay_case_study():
    with criterion("case-study scenario replay", budget_s=30.0):
        runs = []
        for _ in range(2):
            backends = mock_backends_with_fixtures()
            report = replay_script(
                bundled_script_path("case_study"), backends, registry=backends.registry
            )
            assert all(step.status == "ok" for step in report.steps)
            assert len(report.steps) >= 9
            runs.append(json.dumps(report.to_json(), sort_keys=True))
        assert runs[0] == runs[1], "two consecutive replays differ"
        golden = json.loads(bundled_golden_path("case_study").read_text())
        final = replay_script(
            bundled_script_path("case_study"),
            (b := mock_backends_with_fixtures()),
            registry=b.registry,
        )
        check_golden(final, golden)
        assert final.ok, final.golden_mismatches


def _isolation_commands(session_index: int) -> list[dict]:
    rng = random.Random(777 + session_index)
    commands: list[dict] = []
    for i in range(19):
        roll = rng.random()
        if roll < 0.3:
            commands.append({"type": "chat", "text": f"s{session_index} msg {i}"})
        elif roll < 0.5:
            commands.append({"type": "segment_by_text", "text": rng.choice(["boat", "tree"])})
        elif roll < 0.65:
            commands.append({"type": "remove_object", "mask_id": f"m{rng.randint(1, 3)}"})
        elif roll < 0.85:
            x0, y0 = rng.uniform(0, 0.6), rng.uniform(0, 0.6)
            commands.append({
                "type": "inpaint_objects",
                "grounding": {
                    "concepts": [f"s{session_index}c{i}"],
                    "boxes": [[x0, y0, x0 + 0.3, y0 + 0.3]],
                },
            })
        else:
            commands.append({"type": "undo"})
    return commands


def _final_state(client: TestClient, sid: str) -> dict:
    summary = client.get(f"/api/sessions/{sid}").json()
    history = client.get(f"/api/sessions/{sid}/history").json()["entries"]
    stable_history = [
        {
            "seq": e["seq"],
            "command": e["command"],
            "before": e["canvas_hash_before"],
            "after": e["canvas_hash_after"],
            "masks_after": e["masks_after"],
            "status": e["status"],
            "error": e["error"],
        }
        for e in history
    ]
    return {
        "canvas_hash": summary["canvas_hash"],
        "transcript": summary["transcript"],
        "masks": summary["masks"],
        "history": stable_history,
    }


def test_concurrent_session_isolation(tmp_path):
    with criterion("8 concurrent sessions x 20 commands isolation", budget_s=30.0):
        registry, image = acceptance_scene()
        n_sessions = 8

        def run_all(data_dir, concurrent: bool) -> list[dict]:
            config = ServiceConfig(
                data_dir=data_dir, generate_width=24, generate_height=24
            )
            client = TestClient(create_app(config, backends=MockBackends(registry)))
            sids = []
            for _ in range(n_sessions):
                sids.append(client.post("/api/sessions").json()["session_id"])

            def drive(index: int) -> dict:
                sid = sids[index]
                resp = client.post(
                    f"/api/sessions/{sid}/image", json={"image": image.to_b64_png()}
                )
                assert resp.status_code == 200
                for body in _isolation_commands(index):
                    if body["type"] == "undo":
                        client.post(f"/api/sessions/{sid}/undo")
                    else:
                        # 404s (stale mask ids) and 502s (object no longer
                        # present) are deterministic outcomes of the script
                        r = client.post(f"/api/sessions/{sid}/command", json=body)
                        assert r.status_code in (200, 404, 502), r.text
                return _final_state(client, sid)

            if concurrent:
                with ThreadPoolExecutor(max_workers=n_sessions) as pool:
                    return list(pool.map(drive, range(n_sessions)))
            return [drive(i) for i in range(n_sessions)]

        serial = run_all(tmp_path / "serial", concurrent=False)
        concurrent = run_all(tmp_path / "conc", concurrent=True)
        for i in range(n_sessions):
            assert concurrent[i] == serial[i], f"session {i} diverged"
        # zero cross-session contamination: all eight end states distinct
        hashes = [s["canvas_hash"] for s in serial]
        transcripts = [tuple(map(tuple, s["transcript"])) for s in serial]
        assert len(set(transcripts)) == n_sessions


def test_persistence_equivalence(tmp_path):
    with criterion("persistence: save/load + export/import on 100 commands",
                   budget_s=30.0):
        from test_persistence import drive_random_session, session_state

        from visloop.service.store import SessionStore

        registry, image = acceptance_scene()
        backends = MockBackends(registry)

        store = SessionStore(tmp_path / "a")
        runtime = drive_random_session(store, backends, image, 100, seed=2024)
        original = runtime.session
        verify_hash_chain(original.history)

        # save -> load equivalence
        reloaded = SessionStore(tmp_path / "a")
        twin = reloaded.get(original.id).session
        assert session_state(twin) == session_state(original)

        # export -> import on a clean data dir: identical hash chain
        payload = store.export_zip(runtime)
        clean = SessionStore(tmp_path / "b")
        imported = clean.import_zip(payload).session
        chain = lambda s: [(e.canvas_hash_before, e.canvas_hash_after) for e in s.history]
        assert chain(imported) == chain(original)
        state_a, state_b = session_state(original), session_state(imported)
        assert state_a["canvas"] == state_b["canvas"]
        assert state_a["transcript"] == state_b["transcript"]
        assert state_a["history"] == state_b["history"]
