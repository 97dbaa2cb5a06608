"""Command line entry: generate / plan / validate / serve-mock.

Exit codes: 0 ok, 1 user error (config problems, infeasible scenario),
2 system error (unwritable output, backend unreachable).  The
SYNTHSAT_BACKEND_URL environment variable overrides the configured
synthesis backend.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import parse_config, with_backend
from .errors import (
    FatalIoError,
    InfeasiblePlacement,
    InvalidConfig,
    ParseError,
    SynthSatError,
    ValidationError,
)

EXIT_OK = 0
EXIT_USER = 1
EXIT_SYSTEM = 2

BACKEND_ENV_VAR = "SYNTHSAT_BACKEND_URL"


def _load_config(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USER)
    try:
        cfg = parse_config(text)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USER)
    except ValidationError as exc:
        print("error: invalid config:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        raise SystemExit(EXIT_USER)
    override = os.environ.get(BACKEND_ENV_VAR)
    if override:
        cfg = with_backend(cfg, override)
    return cfg


def _cmd_validate(args) -> int:
    _load_config(args.config)
    print("config ok")
    return EXIT_OK


def _cmd_plan(args) -> int:
    from .pipeline import describe_scenario

    cfg = _load_config(args.config)
    sys.stdout.write(describe_scenario(cfg))
    return EXIT_OK


def _cmd_generate(args) -> int:
    from .pipeline import run_scenario

    cfg = _load_config(args.config)
    try:
        doc = run_scenario(cfg)
    except (InvalidConfig, InfeasiblePlacement) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except FatalIoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYSTEM
    ok = doc["event_count"] - doc["failed_count"]
    print(f"events: {ok} ok, {doc['failed_count']} failed")
    print(f"manifest: {os.path.join(cfg.output.directory, 'manifest.json')}")
    print(f"manifest digest: {doc['manifest_digest']}")
    for rec in doc["events"]:
        if rec.get("status") != "ok":
            print(f"  failed [{rec['index']}]: {rec.get('error')}", file=sys.stderr)
    return EXIT_OK


def _cmd_serve_mock(args) -> int:
    from .mock_backend import serve_mock

    try:
        serve_mock(args.port, args.host)
    except KeyboardInterrupt:
        pass
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYSTEM
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthsat",
        description="Synthetic overhead imagery scenario pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run a scenario and write the product tree")
    p.add_argument("config", help="scenario config file")
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("plan", help="describe what a scenario would produce")
    p.add_argument("config", help="scenario config file")
    p.set_defaults(fn=_cmd_plan)

    p = sub.add_parser("validate", help="parse and validate a scenario config")
    p.add_argument("config", help="scenario config file")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("serve-mock", help="serve the deterministic mock backend")
    p.add_argument("--port", type=int, default=8641)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=_cmd_serve_mock)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except SynthSatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYSTEM


if __name__ == "__main__":
    sys.exit(main())
