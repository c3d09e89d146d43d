"""Scenario-script replay: run a recorded command sequence against a set
of backends and report per-step status and canvas hashes.

Script format: {"name": str, "steps": [ {command-variant object}, ... ]}.
A set_image step may reference a registered scene by name instead of
embedding pixels: {"type": "set_image", "scene": "lake_scenery"}; the
scene is rendered from its manifest fixture at replay time.

Reports are deterministic: two replays of the same script against the
mock backends serialize identically (timings are kept out of the
canonical form and surface only in verbose output).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Any

from ..capabilities import Backends
from ..commands import Command, command_from_json
from ..engine import execute, new_session
from ..errors import VisloopError
from ..mocks import MockBackends, SceneRegistry
from .. import commands as cmd


@dataclass
class ReplayStep:
    index: int
    command_type: str
    status: str  # "ok" or an error code
    canvas_hash: str | None
    mask_ids: list[str]
    transcript_len: int
    duration_s: float = field(default=0.0)

    def to_json(self, include_timings: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {
            "index": self.index,
            "command_type": self.command_type,
            "status": self.status,
            "canvas_hash": self.canvas_hash,
            "mask_ids": self.mask_ids,
            "transcript_len": self.transcript_len,
        }
        if include_timings:
            out["duration_s"] = self.duration_s
        return out


@dataclass
class ReplayReport:
    name: str
    steps: list[ReplayStep]
    final_canvas_hash: str | None
    golden_mismatches: list[str] = field(default_factory=list)
    golden_checked: bool = False

    @property
    def ok(self) -> bool:
        steps_ok = all(s.status == "ok" for s in self.steps)
        return steps_ok and not self.golden_mismatches

    def to_json(self, include_timings: bool = False) -> dict[str, Any]:
        return {
            "name": self.name,
            "ok": self.ok,
            "steps": [s.to_json(include_timings) for s in self.steps],
            "final_canvas_hash": self.final_canvas_hash,
            "golden_checked": self.golden_checked,
            "golden_mismatches": self.golden_mismatches,
        }

    def golden(self) -> dict[str, Any]:
        """The pinnable shape of this run."""
        return {
            "script": self.name,
            "steps": len(self.steps),
            "step_hashes": [s.canvas_hash for s in self.steps],
            "final_canvas_hash": self.final_canvas_hash,
        }


def load_script(source: Path | dict[str, Any]) -> tuple[str, list[dict[str, Any]]]:
    obj = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    name = obj.get("name")
    steps = obj.get("steps")
    if not isinstance(name, str) or not isinstance(steps, list):
        raise VisloopError("script must have a name and a steps list")
    return name, steps


def _resolve_step(
    step: dict[str, Any], registry: SceneRegistry | None
) -> Command:
    if step.get("type") == "set_image" and "scene" in step:
        if registry is None:
            raise VisloopError(f"step references scene {step['scene']!r} but no fixtures loaded")
        image = registry.scene_image(step["scene"])
        if image is None:
            raise VisloopError(f"unknown scene fixture {step['scene']!r}")
        return cmd.SetImage(image)
    return command_from_json(step)


def replay_script(
    source: Path | dict[str, Any],
    backends: Backends,
    registry: SceneRegistry | None = None,
    generate_size: tuple[int, int] = (512, 512),
) -> ReplayReport:
    name, steps = load_script(source)
    session = new_session()
    report_steps: list[ReplayStep] = []
    for index, raw in enumerate(steps, start=1):
        t0 = time.perf_counter()
        ctype = raw.get("type", "?") if isinstance(raw, dict) else "?"
        try:
            command = _resolve_step(raw, registry)
            execute(session, command, backends, generate_size=generate_size)
            status = "ok"
        except VisloopError as exc:
            status = exc.code
        report_steps.append(
            ReplayStep(
                index=index,
                command_type=ctype,
                status=status,
                canvas_hash=session.canvas_hash,
                mask_ids=list(session.pending_masks),
                transcript_len=len(session.transcript),
                duration_s=time.perf_counter() - t0,
            )
        )
    return ReplayReport(
        name=name, steps=report_steps, final_canvas_hash=session.canvas_hash
    )


def check_golden(report: ReplayReport, golden: dict[str, Any]) -> ReplayReport:
    report.golden_checked = True
    mism = report.golden_mismatches
    if golden.get("script") != report.name:
        mism.append(f"script name {report.name!r} != golden {golden.get('script')!r}")
    if golden.get("steps") != len(report.steps):
        mism.append(f"step count {len(report.steps)} != golden {golden.get('steps')}")
    if golden.get("final_canvas_hash") != report.final_canvas_hash:
        mism.append(
            f"final hash {report.final_canvas_hash} != golden "
            f"{golden.get('final_canvas_hash')}"
        )
    for i, (got, want) in enumerate(
        zip([s.canvas_hash for s in report.steps], golden.get("step_hashes", [])),
        start=1,
    ):
        if got != want:
            mism.append(f"step {i} hash {got} != golden {want}")
    return report


# -- bundled fixtures ---------------------------------------------------------


def fixtures_root() -> Path:
    return Path(str(files("visloop") / "fixtures"))


def load_bundled_registry() -> SceneRegistry:
    registry = SceneRegistry()
    scenes = fixtures_root() / "scenes"
    if scenes.exists():
        registry.load_dir(scenes)
    return registry


def bundled_script_path(name: str) -> Path:
    return fixtures_root() / "scripts" / f"{name}.json"


def bundled_golden_path(name: str) -> Path:
    return fixtures_root() / "golden" / f"{name}.json"


def list_bundled_scripts() -> list[str]:
    scripts = fixtures_root() / "scripts"
    if not scripts.exists():
        return []
    return sorted(p.stem for p in scripts.glob("*.json"))


def mock_backends_with_fixtures() -> MockBackends:
    return MockBackends(load_bundled_registry())
