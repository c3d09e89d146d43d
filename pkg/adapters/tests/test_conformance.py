"""Protocol conformance for the adapters: the same checks the mock
capability servers pass, run against every adapter with stub engines
(model quality is out of scope; weights never load in CI)."""

from __future__ import annotations

import base64
import io
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from visloop_adapters.engines import AdapterConfig, EngineLoadError, load_engine
from visloop_adapters.server import create_adapter_app, wait_until_ready
from visloop_adapters.wire import (
    CAPABILITIES,
    PROTOCOL_VERSION,
    RESPONSE_MODELS,
    decode_image,
    decode_rle,
    encode_rle,
)
from visloop_adapters.wire import RleJson


def sample_image_b64(w=16, h=12) -> str:
    arr = np.zeros((h, w, 4), dtype=np.uint8)
    arr[:, :, 0] = 200
    arr[:, :, 3] = 255
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGBA").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def sample_request(capability: str) -> dict:
    image = sample_image_b64()
    base = {"protocol_version": PROTOCOL_VERSION, "request_id": f"req-{capability}"}
    if capability == "chat":
        return {**base, "image": image, "transcript": [], "message": "hello"}
    if capability == "segment":
        return {**base, "image": image, "prompt": {"kind": "text", "text": "thing"}}
    if capability == "generate":
        return {**base, "caption": "a thing", "grounding": None, "width": 16, "height": 12}
    if capability == "inpaint":
        return {
            **base, "image": image, "grounding": None,
            "mask": {"w": 16, "h": 12, "counts": [0, 16, 176]}, "prompt": "thing",
        }
    return {**base, "image": image, "mask": {"w": 16, "h": 12, "counts": [0, 16, 176]}}


@pytest.fixture(params=CAPABILITIES)
def adapter(request):
    capability = request.param
    config = AdapterConfig(capability=capability, checkpoint="stub:")
    app = create_adapter_app(config)
    with TestClient(app) as client:
        wait_until_ready(app, timeout_s=10)
        yield capability, client


class TestConformance:
    def test_health(self, adapter):
        capability, client = adapter
        assert client.get("/v1/health").json() == {
            "capability": capability,
            "protocol_version": "1",
        }

    def test_valid_request_matches_schema_and_echoes_id(self, adapter):
        capability, client = adapter
        body = sample_request(capability)
        resp = client.post(f"/v1/{capability}", json=body)
        assert resp.status_code == 200, resp.text
        parsed = RESPONSE_MODELS[capability].model_validate(resp.json())
        assert parsed.request_id == body["request_id"]

    def test_unknown_protocol_version_rejected(self, adapter):
        capability, client = adapter
        body = dict(sample_request(capability), protocol_version="2")
        resp = client.post(f"/v1/{capability}", json=body)
        assert resp.status_code == 400
        assert resp.json()["error"] == "unsupported_protocol_version"

    def test_malformed_body_400_with_error_shape(self, adapter):
        capability, client = adapter
        resp = client.post(f"/v1/{capability}", json={"nope": 1})
        assert resp.status_code == 400
        body = resp.json()
        assert body["error"] == "invalid_request" and "detail" in body

    def test_other_capabilities_not_served(self, adapter):
        capability, client = adapter
        for other in CAPABILITIES:
            if other != capability:
                resp = client.post(f"/v1/{other}", json=sample_request(other))
                assert resp.status_code == 404


class TestResponses:
    def test_segment_mask_dims_match_image(self):
        config = AdapterConfig(capability="segment", checkpoint="stub:")
        app = create_adapter_app(config)
        with TestClient(app) as client:
            wait_until_ready(app)
            resp = client.post("/v1/segment", json=sample_request("segment"))
            mask = resp.json()["mask"]
            assert (mask["w"], mask["h"]) == (16, 12)
            assert sum(mask["counts"]) == 16 * 12
            bitmap = decode_rle(RleJson(**mask))
            assert bitmap.any()

    def test_generate_respects_requested_dims(self):
        config = AdapterConfig(capability="generate", checkpoint="stub:")
        app = create_adapter_app(config)
        with TestClient(app) as client:
            wait_until_ready(app)
            resp = client.post("/v1/generate", json=sample_request("generate"))
            arr = decode_image(resp.json()["image"])
            assert arr.shape == (12, 16, 4)

    def test_inpaint_keeps_dims_and_validates_xor(self):
        config = AdapterConfig(capability="inpaint", checkpoint="stub:")
        app = create_adapter_app(config)
        with TestClient(app) as client:
            wait_until_ready(app)
            good = sample_request("inpaint")
            resp = client.post("/v1/inpaint", json=good)
            assert decode_image(resp.json()["image"]).shape == (12, 16, 4)
            bad = dict(good, grounding={"concepts": ["x"], "boxes": [[0.1, 0.1, 0.5, 0.5]]})
            assert client.post("/v1/inpaint", json=bad).status_code == 400
            neither = dict(good, mask=None, prompt=None)
            assert client.post("/v1/inpaint", json=neither).status_code == 400
            mismatched = dict(
                good, mask=None, prompt=None,
                grounding={"concepts": ["x", "y"], "boxes": [[0.1, 0.1, 0.5, 0.5]]},
            )
            assert client.post("/v1/inpaint", json=mismatched).status_code == 400

    def test_fill_output_fully_opaque(self):
        config = AdapterConfig(capability="fill", checkpoint="stub:")
        app = create_adapter_app(config)
        with TestClient(app) as client:
            wait_until_ready(app)
            resp = client.post("/v1/fill", json=sample_request("fill"))
            arr = decode_image(resp.json()["image"])
            assert (arr[:, :, 3] == 255).all()

    def test_fill_rejects_empty_hole(self):
        config = AdapterConfig(capability="fill", checkpoint="stub:")
        app = create_adapter_app(config)
        with TestClient(app) as client:
            wait_until_ready(app)
            body = dict(sample_request("fill"), mask={"w": 16, "h": 12, "counts": [192]})
            assert client.post("/v1/fill", json=body).status_code == 400


class TestLifecycle:
    def test_503_while_loading(self):
        config = AdapterConfig(capability="chat", checkpoint="stub:")

        def slow_factory():
            time.sleep(0.4)
            return load_engine(config)

        app = create_adapter_app(config, engine_factory=slow_factory)
        with TestClient(app) as client:
            resp = client.post("/v1/chat", json=sample_request("chat"))
            assert resp.status_code == 503
            assert resp.json()["error"] == "loading"
            # health answers during loading
            assert client.get("/v1/health").status_code == 200
            wait_until_ready(app, timeout_s=10)
            assert client.post("/v1/chat", json=sample_request("chat")).status_code == 200

    def test_load_failure_surfaces_as_503_engine_failed(self):
        config = AdapterConfig(capability="chat", checkpoint="stub:")

        def broken_factory():
            raise EngineLoadError("weights not found at /nonexistent")

        app = create_adapter_app(config, engine_factory=broken_factory)
        with TestClient(app) as client:
            deadline = time.time() + 5
            while time.time() < deadline:
                resp = client.post("/v1/chat", json=sample_request("chat"))
                if resp.json().get("error") == "engine_failed":
                    break
                time.sleep(0.02)
            assert resp.status_code == 503
            assert resp.json()["error"] == "engine_failed"

    def test_missing_weights_fail_startup(self):
        config = AdapterConfig(
            capability="chat", checkpoint="/no/such/checkpoint", device="cpu"
        )
        with pytest.raises(EngineLoadError):
            load_engine(config)

    def test_segment_has_no_builtin_loader(self):
        config = AdapterConfig(capability="segment", checkpoint="some-id")
        with pytest.raises(EngineLoadError, match="custom:"):
            load_engine(config)

    def test_custom_engine_plug_in(self):
        config = AdapterConfig(
            capability="fill",
            checkpoint="custom:visloop_adapters.engines:StubFillEngine",
        )
        engine = load_engine(config)
        arr = np.zeros((4, 4, 4), dtype=np.uint8)
        hole = np.zeros((4, 4), dtype=np.bool_)
        hole[1, 1] = True
        assert (engine.fill(arr, hole)[:, :, 3] == 255).all()

    def test_unknown_capability_rejected(self):
        with pytest.raises(EngineLoadError):
            AdapterConfig(capability="teleport", checkpoint="stub:")


class TestRoundtrips:
    def test_rle_codec_roundtrip(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            h, w = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            bitmap = rng.random((h, w)) < 0.5
            assert np.array_equal(decode_rle(encode_rle(bitmap)), bitmap)

    def test_image_codec_roundtrip(self):
        from visloop_adapters.wire import encode_image

        rng = np.random.default_rng(8)
        arr = rng.integers(0, 256, size=(9, 7, 4), dtype=np.uint8)
        assert np.array_equal(decode_image(encode_image(arr)), arr)
