"""Command line client.

Runs the same drivers the HTTP service exposes, either in process
(default) or against a running server via --server. Reports go to stdout
or --out as canonical JSON or flattened CSV.

Exit codes: 0 on success, 1 when a report contains failed checks, 2 for
configuration problems, 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import sys
import time

from .config import ExperimentConfig, default_config, load_config_file
from .errors import ConfigError, DitherlabError
from .pipeline import (
    run_estimate_report,
    run_pipeline,
    run_quantize_demo,
    run_region_report,
    run_sw_report,
)
from .report import RunReport, canonical_json, csv_text
from .verify import run_verification_suite

_RUNNERS = {
    "region": run_region_report,
    "quantize-demo": run_quantize_demo,
    "sw-sim": run_sw_report,
    "estimate": run_estimate_report,
    "pipeline": run_pipeline,
}

_COMMANDS = ["region", "quantize-demo", "sw-sim", "estimate", "pipeline", "selftest"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ditherlab",
        description="Dithered quantization, universal binning and post-estimation "
        "experiments on correlated pair sources.",
    )
    parser.add_argument(
        "--server",
        metavar="URL",
        help="run against an HTTP service instead of in process",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub = subparsers.add_parser(name, help=f"run the {name} driver")
        sub.add_argument("--config", metavar="PATH", help="INI configuration file")
        sub.add_argument("--seed", type=int, help="override the configured seed")
        sub.add_argument("--threads", type=int, help="override the configured threads")
        sub.add_argument("--trials", type=int, help="override the configured trials")
        sub.add_argument("--out", metavar="PATH", help="write the report to a file")
        sub.add_argument(
            "--format",
            choices=["json", "csv"],
            default="json",
            help="report format (default json)",
        )
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config_file(args.config) if args.config else default_config()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.trials is not None:
        overrides["trials"] = args.trials
    return config.with_overrides(**overrides) if overrides else config


def _run_remote(server: str, command: str, config: ExperimentConfig) -> dict:
    import httpx

    from .service.models import model_from_config

    url = server.rstrip("/") + "/" + command
    if command == "selftest":
        response = httpx.post(url, timeout=600.0)
    else:
        body = model_from_config(config).model_dump()
        response = httpx.post(url, json=body, timeout=600.0)
    if response.status_code == 400:
        raise ConfigError(response.json()["error"]["message"])
    if response.status_code != 200:
        raise DitherlabError(f"server returned {response.status_code}: {response.text}")
    return response.json()


def _render(payload: dict, fmt: str) -> str:
    return canonical_json(payload) if fmt == "json" else csv_text(payload)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    try:
        config = _load(args)
        if args.server:
            payload = _run_remote(args.server, args.command, config)
        elif args.command == "selftest":
            payload = run_verification_suite().payload
        else:
            payload = _RUNNERS[args.command](config).payload
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except DitherlabError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3
    except Exception as err:  # noqa: BLE001  (map anything unexpected to exit 3)
        print(f"unexpected error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3

    _emit(_render(payload, args.format), args.out)
    elapsed = time.monotonic() - started
    print(f"elapsed {elapsed:.2f}s", file=sys.stderr)

    failed = RunReport(payload=payload).failed_checks()
    if failed or payload.get("passed") is False:
        for name in failed:
            print(f"check failed: {name}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
