"""Inference engines behind the adapter servers.

An engine is a plain object with one callable per capability it serves;
the server owns all protocol concerns. Real checkpoints load lazily (the
heavyweight stacks import only when asked for) and loading failures
surface at startup, per the one-process-per-capability deployment.

`stub:` checkpoints return fixed deterministic outputs so the protocol
layer can be conformance-tested on machines with no weights or GPU; they
make no claim about model quality, which is out of scope here.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .wire import RleJson, encode_rle


class EngineLoadError(RuntimeError):
    """Checkpoint missing or the capability has no built-in loader."""


@dataclass
class AdapterConfig:
    capability: str
    checkpoint: str
    device: str = "cpu"
    output_width: int = 512
    output_height: int = 512

    def __post_init__(self) -> None:
        if self.capability not in ("chat", "segment", "generate", "inpaint", "fill"):
            raise EngineLoadError(f"unknown capability {self.capability!r}")


# -- stub engines (deterministic, weight-free) --------------------------------


class StubChatEngine:
    def chat(self, image: np.ndarray | None, transcript: list[tuple[str, str]],
             message: str) -> str:
        seen = "with image" if image is not None else "no image"
        return f"STUB chat ({seen}, {len(transcript)} prior turns): {message}"


class StubSegmentEngine:
    def segment(self, image: np.ndarray, prompt: dict[str, Any]) -> tuple[RleJson, str | None]:
        h, w = image.shape[:2]
        bitmap = np.zeros((h, w), dtype=np.bool_)
        bitmap[h // 4 : max(h // 4 + 1, 3 * h // 4), w // 4 : max(w // 4 + 1, 3 * w // 4)] = True
        return encode_rle(bitmap), None


class StubGenerateEngine:
    def generate(self, caption: str, grounding: dict[str, Any] | None,
                 width: int, height: int) -> np.ndarray:
        arr = np.full((height, width, 4), 128, dtype=np.uint8)
        arr[:, :, 3] = 255
        return arr


class StubInpaintEngine:
    def inpaint(self, image: np.ndarray, grounding: dict[str, Any] | None,
                mask: np.ndarray | None, prompt: str | None) -> np.ndarray:
        return image.copy()


class StubFillEngine:
    def fill(self, image: np.ndarray, hole: np.ndarray) -> np.ndarray:
        out = image.copy()
        out[:, :, 3] = 255
        return out


_STUBS: dict[str, Callable[[], Any]] = {
    "chat": StubChatEngine,
    "segment": StubSegmentEngine,
    "generate": StubGenerateEngine,
    "inpaint": StubInpaintEngine,
    "fill": StubFillEngine,
}


# -- real checkpoint loaders ---------------------------------------------------


class LlavaChatEngine:
    """Visual chat via a transformers image-text-to-text checkpoint."""

    def __init__(self, checkpoint: str, device: str) -> None:
        try:
            from transformers import pipeline
        except ImportError as exc:
            raise EngineLoadError(f"transformers not installed: {exc}") from exc
        try:
            self._pipe = pipeline(
                "image-text-to-text", model=checkpoint, device=device
            )
        except Exception as exc:
            raise EngineLoadError(f"cannot load chat checkpoint {checkpoint!r}: {exc}") from exc

    def chat(self, image, transcript, message: str) -> str:
        from PIL import Image

        content: list[dict[str, Any]] = []
        if image is not None:
            content.append({"type": "image", "image": Image.fromarray(image)})
        content.append({"type": "text", "text": message})
        messages = [
            {"role": role, "content": [{"type": "text", "text": text}]}
            for role, text in transcript
        ]
        messages.append({"role": "user", "content": content})
        out = self._pipe(text=messages, max_new_tokens=512)
        reply = out[0]["generated_text"][-1]["content"]
        return reply or "(empty reply)"


class GligenGenerateEngine:
    """Grounded text-to-image via a diffusers GLIGEN checkpoint."""

    def __init__(self, checkpoint: str, device: str) -> None:
        try:
            import torch
            from diffusers import StableDiffusionGLIGENPipeline
        except ImportError as exc:
            raise EngineLoadError(f"diffusers/torch not installed: {exc}") from exc
        try:
            self._pipe = StableDiffusionGLIGENPipeline.from_pretrained(
                checkpoint, torch_dtype=torch.float32
            ).to(device)
        except Exception as exc:
            raise EngineLoadError(
                f"cannot load generate checkpoint {checkpoint!r}: {exc}"
            ) from exc

    def generate(self, caption, grounding, width, height) -> np.ndarray:
        kwargs: dict[str, Any] = {"prompt": caption, "width": width, "height": height}
        if grounding:
            kwargs["gligen_phrases"] = grounding["concepts"]
            kwargs["gligen_boxes"] = grounding["boxes"]
        image = self._pipe(**kwargs).images[0].convert("RGBA")
        return np.asarray(image, dtype=np.uint8)

    def inpaint(self, image: np.ndarray, grounding, mask, prompt) -> np.ndarray:
        from PIL import Image

        pil = Image.fromarray(image).convert("RGB")
        if grounding:
            phrases, boxes = grounding["concepts"], grounding["boxes"]
            caption = "; ".join(phrases)
        else:
            # mask+prompt becomes a grounded replacement of the mask's bbox
            ys, xs = np.nonzero(mask)
            h, w = mask.shape
            boxes = [[xs.min() / w, ys.min() / h, (xs.max() + 1) / w, (ys.max() + 1) / h]]
            phrases, caption = [prompt], prompt
        out = self._pipe(
            prompt=caption,
            gligen_phrases=phrases,
            gligen_boxes=boxes,
            gligen_inpaint_image=pil,
            width=pil.width,
            height=pil.height,
        ).images[0]
        return np.asarray(out.convert("RGBA"), dtype=np.uint8)


def _load_custom(spec: str) -> Any:
    """"module.path:factory" -> whatever the factory returns."""
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise EngineLoadError(f"custom engine spec {spec!r} must be module:factory")
    try:
        module = importlib.import_module(module_name)
        return getattr(module, attr)()
    except Exception as exc:
        raise EngineLoadError(f"cannot load custom engine {spec!r}: {exc}") from exc


def load_engine(config: AdapterConfig) -> Any:
    """Resolve a checkpoint reference to an engine object.

    "stub:" -> deterministic stub; "custom:module:factory" -> user plug-in
    (segmentation and background filling have no mainstream hub package, so
    real deployments bring their own); anything else -> the built-in loader
    for that capability.
    """
    ref = config.checkpoint
    if ref == "stub:" or ref.startswith("stub:"):
        return _STUBS[config.capability]()
    if ref.startswith("custom:"):
        return _load_custom(ref[len("custom:"):])
    if config.capability == "chat":
        return LlavaChatEngine(ref, config.device)
    if config.capability in ("generate", "inpaint"):
        return GligenGenerateEngine(ref, config.device)
    raise EngineLoadError(
        f"no built-in loader for capability {config.capability!r}; "
        f"use checkpoint 'custom:module:factory' to plug one in"
    )
