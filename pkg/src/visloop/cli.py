"""Command line entry points.

`serve` runs the session service; `replay` executes a scenario script
locally against mock or remote backends; `export-session`/`import-session`
are thin HTTP clients against a running service; `mock-backend` serves one
(or all) mock capabilities on a port.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx
import uvicorn

from .gateway import BackendConfig, GatewayBackends
from .mocks.server import create_mock_app
from .service.app import create_app
from .service.config import ENV_DATA_DIR, ENV_PORT, ServiceConfig
from .service.replay import (
    bundled_golden_path,
    bundled_script_path,
    check_golden,
    list_bundled_scripts,
    load_bundled_registry,
    mock_backends_with_fixtures,
    replay_script,
)


def _cmd_serve(args: argparse.Namespace) -> int:
    if args.config:
        config = ServiceConfig.from_file(Path(args.config))
    else:
        config = ServiceConfig(
            data_dir=Path(os.environ.get(ENV_DATA_DIR, "visloop-data")),
            port=int(os.environ.get(ENV_PORT, 8800)),
        ).with_env_overrides()
    if args.mock:
        config.mock_mode = True
    if args.port is not None:
        config.port = args.port
    if args.data_dir is not None:
        config.data_dir = Path(args.data_dir)
    console = Path(args.console) if args.console else None
    app = create_app(config, console_dir=console)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def _resolve_script(ref: str) -> Path:
    path = Path(ref)
    if path.exists():
        return path
    bundled = bundled_script_path(ref)
    if bundled.exists():
        return bundled
    raise SystemExit(
        f"no script at {ref!r}; bundled scripts: {', '.join(list_bundled_scripts())}"
    )


def _cmd_replay(args: argparse.Namespace) -> int:
    script = _resolve_script(args.script)
    if args.mock:
        backends = mock_backends_with_fixtures()
        registry = backends.registry
    elif args.backends:
        cfg = BackendConfig.from_json(json.loads(Path(args.backends).read_text()))
        backends = GatewayBackends(cfg)
        registry = load_bundled_registry()
    else:
        raise SystemExit("replay needs --mock or --backends CONFIG")
    report = replay_script(script, backends, registry=registry)
    if args.golden:
        golden_path = Path(args.golden)
    else:
        candidate = bundled_golden_path(script.stem)
        golden_path = candidate if candidate.exists() else None
    if golden_path is not None:
        check_golden(report, json.loads(golden_path.read_text()))
    if args.emit_golden:
        Path(args.emit_golden).write_text(json.dumps(report.golden(), indent=2) + "\n")
    print(json.dumps(report.to_json(include_timings=args.timings), indent=2))
    return 0 if report.ok else 1


def _cmd_export_session(args: argparse.Namespace) -> int:
    url = f"{args.url.rstrip('/')}/api/sessions/{args.session}/export"
    resp = httpx.get(url, timeout=60)
    if resp.status_code != 200:
        print(f"export failed: {resp.status_code} {resp.text}", file=sys.stderr)
        return 1
    Path(args.out).write_bytes(resp.content)
    print(f"wrote {args.out} ({len(resp.content)} bytes)")
    return 0


def _cmd_import_session(args: argparse.Namespace) -> int:
    url = f"{args.url.rstrip('/')}/api/sessions/import"
    payload = Path(args.file).read_bytes()
    resp = httpx.post(
        url, content=payload, headers={"Content-Type": "application/zip"}, timeout=60
    )
    if resp.status_code not in (200, 201):
        print(f"import failed: {resp.status_code} {resp.text}", file=sys.stderr)
        return 1
    print(resp.json()["session_id"])
    return 0


def _cmd_mock_backend(args: argparse.Namespace) -> int:
    registry = load_bundled_registry() if args.bundled_fixtures else None
    app = create_mock_app(
        registry=registry,
        capability=args.capability,
        fixtures_dir=Path(args.fixtures) if args.fixtures else None,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="visloop")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--config", help="service config JSON")
    p.add_argument("--mock", action="store_true", help="use in-process mock backends")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir")
    p.add_argument("--console", help="directory with the built web console")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("replay", help="replay a scenario script")
    p.add_argument("--script", required=True, help="path or bundled script name")
    p.add_argument("--mock", action="store_true")
    p.add_argument("--backends", help="BackendConfig JSON for real services")
    p.add_argument("--golden", help="golden JSON to compare against")
    p.add_argument("--emit-golden", help="write this run's golden JSON here")
    p.add_argument("--timings", action="store_true", help="include step timings")
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("export-session", help="download a session archive")
    p.add_argument("--url", default="http://127.0.0.1:8800")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_export_session)

    p = sub.add_parser("import-session", help="upload a session archive")
    p.add_argument("--url", default="http://127.0.0.1:8800")
    p.add_argument("--file", required=True)
    p.set_defaults(fn=_cmd_import_session)

    p = sub.add_parser("mock-backend", help="serve mock capabilities")
    p.add_argument("--capability", choices=["chat", "segment", "generate", "inpaint", "fill"],
                   help="single capability; default serves all five")
    p.add_argument("--port", type=int, default=8900)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--fixtures", help="directory of scene manifest JSON files")
    p.add_argument("--bundled-fixtures", action="store_true",
                   help="also register the scenes bundled with the package")
    p.set_defaults(fn=_cmd_mock_backend)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
