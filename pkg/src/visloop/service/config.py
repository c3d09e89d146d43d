"""Service configuration: JSON file, env overrides for port and data dir."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import InvalidCommand
from ..gateway import BackendConfig

ENV_PORT = "VISLOOP_PORT"
ENV_DATA_DIR = "VISLOOP_DATA_DIR"


@dataclass
class ServiceConfig:
    data_dir: Path
    host: str = "127.0.0.1"
    port: int = 8800
    backends: BackendConfig = field(default_factory=BackendConfig)
    mock_mode: bool = False
    mock_fixtures_dir: Path | None = None
    max_sessions: int = 256
    max_image_side: int = 2048
    generate_width: int = 512
    generate_height: int = 512

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        if self.max_image_side < 64:
            raise InvalidCommand("max_image_side must be at least 64")
        if self.max_sessions < 1:
            raise InvalidCommand("max_sessions must be positive")

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> ServiceConfig:
        return cls(
            data_dir=Path(obj["data_dir"]),
            host=obj.get("host", "127.0.0.1"),
            port=int(obj.get("port", 8800)),
            backends=BackendConfig.from_json(obj.get("backends", {})),
            mock_mode=bool(obj.get("mock_mode", False)),
            mock_fixtures_dir=(
                Path(obj["mock_fixtures_dir"]) if obj.get("mock_fixtures_dir") else None
            ),
            max_sessions=int(obj.get("max_sessions", 256)),
            max_image_side=int(obj.get("max_image_side", 2048)),
            generate_width=int(obj.get("generate_width", 512)),
            generate_height=int(obj.get("generate_height", 512)),
        )

    @classmethod
    def from_file(cls, path: Path) -> ServiceConfig:
        config = cls.from_json(json.loads(Path(path).read_text()))
        return config.with_env_overrides()

    def with_env_overrides(self) -> ServiceConfig:
        if ENV_PORT in os.environ:
            self.port = int(os.environ[ENV_PORT])
        if ENV_DATA_DIR in os.environ:
            self.data_dir = Path(os.environ[ENV_DATA_DIR])
        return self

    @property
    def generate_size(self) -> tuple[int, int]:
        return (self.generate_width, self.generate_height)
