"""Typed clients for the capability services.

One deployment runs each capability as its own web service; the gateway
holds per-capability base URLs and speaks protocol version "1". Calls are
stateless and side-effect free on the client: safe to share across
threads, retries strictly opt-in.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from typing import Any

import httpx
from pydantic import ValidationError

from .capabilities import Backends
from .errors import (
    BackendTimeout,
    BackendUnavailable,
    FillUnavailable,
    InvalidCommand,
    MalformedRle,
    NoObjectFound,
    ProtocolError,
)
from .geometry import BoundingBox, GroundingSpec, Point
from .image import CanvasImage
from .protocol import (
    PROTOCOL_VERSION,
    ChatResponse,
    ImageResponse,
    SegmentResponse,
)
from .raster import RleMask

DEFAULT_TIMEOUT_S = 120.0


@dataclass(frozen=True)
class CapabilityEndpoint:
    base_url: str
    timeout_s: float = DEFAULT_TIMEOUT_S
    max_retries: int = 0
    enabled: bool = True
    bearer_token: str | None = None

    def __post_init__(self) -> None:
        if self.enabled and not self.base_url.startswith(("http://", "https://")):
            raise InvalidCommand(f"capability base_url must be absolute: {self.base_url!r}")
        if self.timeout_s <= 0:
            raise InvalidCommand("timeout must be positive")

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> CapabilityEndpoint:
        return cls(
            base_url=obj["base_url"],
            timeout_s=float(obj.get("timeout_s", DEFAULT_TIMEOUT_S)),
            max_retries=int(obj.get("max_retries", 0)),
            enabled=bool(obj.get("enabled", True)),
            bearer_token=obj.get("bearer_token"),
        )


@dataclass(frozen=True)
class BackendConfig:
    chat: CapabilityEndpoint | None = None
    segment: CapabilityEndpoint | None = None
    generate: CapabilityEndpoint | None = None
    inpaint: CapabilityEndpoint | None = None
    fill: CapabilityEndpoint | None = None

    @classmethod
    def single_base(cls, base_url: str, **kwargs: Any) -> BackendConfig:
        """Every capability behind one base URL (the combined mock server)."""
        ep = CapabilityEndpoint(base_url, **kwargs)
        return cls(chat=ep, segment=ep, generate=ep, inpaint=ep, fill=ep)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> BackendConfig:
        fields: dict[str, CapabilityEndpoint | None] = {}
        for name in ("chat", "segment", "generate", "inpaint", "fill"):
            raw = obj.get(name)
            fields[name] = CapabilityEndpoint.from_json(raw) if raw else None
        return cls(**fields)


class CapabilityClient:
    """POSTs one capability's requests and normalizes transport failures."""

    def __init__(
        self,
        capability: str,
        endpoint: CapabilityEndpoint,
        client: httpx.Client | None = None,
    ) -> None:
        self.capability = capability
        self.endpoint = endpoint
        self._client = client

    def _headers(self) -> dict[str, str]:
        if self.endpoint.bearer_token:
            return {"Authorization": f"Bearer {self.endpoint.bearer_token}"}
        return {}

    def post(self, body: dict[str, Any]) -> dict[str, Any]:
        url = f"{self.endpoint.base_url.rstrip('/')}/v1/{self.capability}"
        attempts = self.endpoint.max_retries + 1
        last_exc: Exception | None = None
        for _ in range(attempts):
            try:
                return self._one_post(url, body)
            except (BackendUnavailable, BackendTimeout) as exc:
                last_exc = exc
        assert last_exc is not None
        raise last_exc

    def _one_post(self, url: str, body: dict[str, Any]) -> dict[str, Any]:
        try:
            if self._client is not None:
                # Injected clients (in-process test transports) own their timeouts.
                resp = self._client.post(url, json=body, headers=self._headers())
            else:
                resp = httpx.post(
                    url, json=body, headers=self._headers(),
                    timeout=self.endpoint.timeout_s,
                )
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"{self.capability}: {exc}") from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"{self.capability}: {exc}") from exc
        if resp.status_code >= 500:
            raise BackendUnavailable(
                f"{self.capability} returned {resp.status_code}"
            )
        try:
            data = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{self.capability}: non-JSON response") from exc
        if resp.status_code >= 400:
            code = data.get("error", "http_error") if isinstance(data, dict) else "http_error"
            detail = data.get("detail") if isinstance(data, dict) else None
            if code == "no_object_found":
                raise NoObjectFound(detail or code)
            raise ProtocolError(f"{self.capability}: {code} ({detail})")
        if not isinstance(data, dict):
            raise ProtocolError(f"{self.capability}: response is not an object")
        return data

    def health(self) -> dict[str, Any]:
        url = f"{self.endpoint.base_url.rstrip('/')}/v1/health"
        try:
            if self._client is not None:
                resp = self._client.get(url)
            else:
                resp = httpx.get(url, timeout=self.endpoint.timeout_s)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from exc
        return resp.json()


def _new_request_id() -> str:
    return uuid.uuid4().hex


class GatewayBackends(Backends):
    """Capability interface implementation backed by web services."""

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self._clients: dict[str, CapabilityClient] = {}
        for name in ("chat", "segment", "generate", "inpaint", "fill"):
            endpoint = getattr(config, name)
            if endpoint is not None and endpoint.enabled:
                self._clients[name] = CapabilityClient(name, endpoint, client)

    def _client_for(self, capability: str) -> CapabilityClient:
        client = self._clients.get(capability)
        if client is None:
            if capability == "fill":
                raise FillUnavailable("fill capability not configured")
            raise BackendUnavailable(f"{capability} capability not configured")
        return client

    @property
    def fill_enabled(self) -> bool:
        return "fill" in self._clients

    @staticmethod
    def _check_echo(sent_id: str, data: dict[str, Any], capability: str) -> None:
        if data.get("request_id") != sent_id:
            raise ProtocolError(f"{capability} did not echo request_id")

    def chat(
        self,
        image: CanvasImage | None,
        transcript: tuple[tuple[str, str], ...],
        message: str,
    ) -> str:
        if not message:
            raise InvalidCommand("chat message must be nonempty")
        rid = _new_request_id()
        body = {
            "protocol_version": PROTOCOL_VERSION,
            "request_id": rid,
            "image": image.to_b64_png() if image is not None else None,
            "transcript": [{"role": r, "text": t} for r, t in transcript],
            "message": message,
        }
        data = self._client_for("chat").post(body)
        try:
            parsed = ChatResponse.model_validate(data)
        except ValidationError as exc:
            raise ProtocolError(f"chat response malformed: {exc}") from exc
        self._check_echo(rid, data, "chat")
        return parsed.text

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
            raise InvalidCommand("segment needs exactly one prompt kind")
        if scribble is not None:
            prompt: dict[str, Any] = {"kind": "scribble", "mask": scribble.to_json()}
        elif text is not None:
            prompt = {"kind": "text", "text": text}
        elif boxes is not None:
            prompt = {"kind": "boxes", "boxes": [list(b.as_tuple()) for b in boxes]}
        else:
            assert points is not None
            prompt = {"kind": "points", "points": [[p.x, p.y] for p in points]}
        rid = _new_request_id()
        body = {
            "protocol_version": PROTOCOL_VERSION,
            "request_id": rid,
            "image": image.to_b64_png(),
            "prompt": prompt,
        }
        data = self._client_for("segment").post(body)
        try:
            parsed = SegmentResponse.model_validate(data)
            mask = RleMask.from_json(parsed.mask.model_dump())
        except (ValidationError, MalformedRle) as exc:
            raise ProtocolError(f"segment response malformed: {exc}") from exc
        self._check_echo(rid, data, "segment")
        return mask, parsed.label

    def generate(
        self,
        caption: str,
        grounding: GroundingSpec | None,
        width: int,
        height: int,
    ) -> CanvasImage:
        if not caption:
            raise InvalidCommand("caption must be nonempty")
        rid = _new_request_id()
        body = {
            "protocol_version": PROTOCOL_VERSION,
            "request_id": rid,
            "caption": caption,
            "grounding": _grounding_json(grounding),
            "width": width,
            "height": height,
        }
        return self._image_call("generate", rid, body)

    def inpaint(
        self,
        image: CanvasImage,
        *,
        grounding: GroundingSpec | None = None,
        mask: RleMask | None = None,
        prompt: str | None = None,
    ) -> CanvasImage:
        if grounding is None and (mask is None or not prompt):
            raise InvalidCommand("inpaint needs grounding or mask+prompt")
        rid = _new_request_id()
        body = {
            "protocol_version": PROTOCOL_VERSION,
            "request_id": rid,
            "image": image.to_b64_png(),
            "grounding": _grounding_json(grounding),
            "mask": mask.to_json() if mask is not None else None,
            "prompt": prompt,
        }
        return self._image_call("inpaint", rid, body)

    def fill(self, image: CanvasImage, hole: RleMask) -> CanvasImage:
        if not self.fill_enabled:
            raise FillUnavailable("fill capability not configured")
        if hole.area == 0:
            raise InvalidCommand("fill needs a nonempty hole")
        rid = _new_request_id()
        body = {
            "protocol_version": PROTOCOL_VERSION,
            "request_id": rid,
            "image": image.to_b64_png(),
            "mask": hole.to_json(),
        }
        return self._image_call("fill", rid, body)

    def _image_call(self, capability: str, rid: str, body: dict[str, Any]) -> CanvasImage:
        data = self._client_for(capability).post(body)
        try:
            parsed = ImageResponse.model_validate(data)
            image = CanvasImage.from_b64_png(parsed.image)
        except ValidationError as exc:
            raise ProtocolError(f"{capability} response malformed: {exc}") from exc
        except Exception as exc:
            raise ProtocolError(f"{capability} returned an undecodable image") from exc
        self._check_echo(rid, data, capability)
        return image

    def health(self) -> dict[str, dict[str, Any]]:
        return {name: client.health() for name, client in self._clients.items()}


def _grounding_json(spec: GroundingSpec | None) -> dict[str, Any] | None:
    if spec is None:
        return None
    return {
        "concepts": list(spec.concepts),
        "boxes": [list(b.as_tuple()) for b in spec.boxes],
    }
