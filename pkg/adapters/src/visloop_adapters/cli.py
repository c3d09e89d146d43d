"""`visloop-adapter --capability segment --checkpoint <ref> --port N`

One process per capability. Checkpoint references: a model hub id or path
for the built-in loaders, "custom:module:factory" for user plug-ins, or
"stub:" for the deterministic no-weights engine.
"""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .engines import AdapterConfig, EngineLoadError, load_engine
from .server import create_adapter_app
from .wire import CAPABILITIES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="visloop-adapter")
    parser.add_argument("--capability", required=True, choices=CAPABILITIES)
    parser.add_argument("--checkpoint", required=True,
                        help="hub id / path, 'custom:module:factory', or 'stub:'")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--port", type=int, default=8901)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--lazy-load", action="store_true",
                        help="bind the port first and answer 503 until loaded")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = AdapterConfig(
        capability=args.capability, checkpoint=args.checkpoint, device=args.device
    )
    if args.lazy_load:
        app = create_adapter_app(config)
    else:
        # fail fast on missing weights before binding the port
        try:
            engine = load_engine(config)
        except EngineLoadError as exc:
            print(f"adapter startup failed: {exc}", file=sys.stderr)
            return 1
        app = create_adapter_app(config, engine_factory=lambda: engine)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
