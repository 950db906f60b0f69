"""Command-line entry point: ``python -m leakage_sim.main <command>``."""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .config import ENGINE_ALIASES, RunConfig, run_config
from .services.scenario_service import ScenarioService, list_scenarios
from .services.verification import VerificationSuite
from .utils.cli import build_parser, count, key_value, seed_value
from .utils.io import write_scan

logger = logging.getLogger(__name__)

ENGINE_CHOICES = ("trajectory", "density", "both", *ENGINE_ALIASES)
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("scenario", help="Scenario name (see `list`)")
    parser.add_argument("--config", type=Path, default=None, help="TOML file with run keys and a [noise] table")
    parser.add_argument("--shots", type=count, default=None, help="Trajectory shots per experiment")
    parser.add_argument("--seed", type=seed_value, default=None, help="Master seed")
    parser.add_argument("--engine", choices=ENGINE_CHOICES, default=None, help="Execution engine")
    parser.add_argument("--workers", type=count, default=None, help="Parallel workers for trajectory shots")
    parser.add_argument(
        "--processes",
        dest="parallelism",
        action="store_const",
        const="process",
        default=None,
        help="Run trajectory chunks in worker processes instead of threads",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        type=key_value,
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Noise-model override; repeatable",
    )
    parser.add_argument("--progress", action="store_true", help="Show progress bars")


def create_parser() -> argparse.ArgumentParser:
    parser = build_parser("Leakage-aware neutral-atom circuit simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", action="store_true", help="Only warnings and errors")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("list", help="Print scenario names", formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    run = commands.add_parser("run", help="Run one scenario", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_run_arguments(run)
    run.add_argument("--out", type=Path, default=None, help="Results JSON path")
    run.add_argument("--shot-log", type=Path, default=None, help="Raw shot-record path (trajectory runs)")

    verify = commands.add_parser(
        "verify", help="Run the acceptance suite", formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    verify.add_argument("--config", type=Path, default=None, help="TOML file with run keys and a [noise] table")
    verify.add_argument("--only", action="append", default=[], metavar="CHECK", help="Run only the named check(s)")
    verify.add_argument("--shots-scale", type=float, default=1.0, help="Multiplier on every sampled shot count")

    emit = commands.add_parser(
        "emit-scan", help="Write a scenario's phase scans as CSV", formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    _add_run_arguments(emit)
    emit.add_argument("--out-dir", type=Path, default=Path("scans"), help="Directory for the CSV files")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _base_config(path: Optional[Path]) -> RunConfig:
    return RunConfig.from_toml(path) if path is not None else run_config


def build_config(args: argparse.Namespace) -> RunConfig:
    """Layer command-line flags over the TOML file (or the environment defaults)."""
    base = _base_config(getattr(args, "config", None))
    data: Dict[str, Any] = base.model_dump()
    data["noise"] = base.noise.with_overrides(dict(getattr(args, "overrides", []) or []))
    for name in ("scenario", "shots", "seed", "engine", "workers", "parallelism"):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    data["output"] = getattr(args, "out", None)
    data["shot_log"] = getattr(args, "shot_log", None)
    return RunConfig(**data)


def _print_metrics(document) -> None:
    for result in document.scenarios:
        print(f"{result.name} [{result.engine}, shots={result.shots}]")
        for name, value in sorted(result.metrics.items()):
            print(f"  {name} = {value:.6g}")
        outside = [c for c in result.comparisons if not c.within_bound]
        if result.comparisons:
            print(f"  engine comparison: {len(result.comparisons) - len(outside)}/{len(result.comparisons)} within bound")


def _series_filename(scenario: str, series: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]+", "_", f"{scenario}_{series}") + ".csv"


# ------------------------------------------------------------------ #
# Commands
# ------------------------------------------------------------------ #
def _cmd_list(args: argparse.Namespace) -> int:
    for name, summary in list_scenarios().items():
        print(f"{name:20s} {summary}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = build_config(args)
    document = ScenarioService(config, progress=args.progress).run()
    _print_metrics(document)
    return 0


def _cmd_emit_scan(args: argparse.Namespace) -> int:
    config = build_config(args)
    document = ScenarioService(config, progress=args.progress).run()
    written: List[Path] = []
    for result in document.scenarios:
        for series, scan in result.scans.items():
            name = series if len(document.scenarios) == 1 else f"{result.engine}_{series}"
            written.append(write_scan(scan, args.out_dir / _series_filename(result.name, name), result.name))
    if not written:
        logger.warning("Scenario %s produced no phase scans.", config.scenario)
        return 1
    for path in written:
        print(path)
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    suite = VerificationSuite(_base_config(args.config), shots_scale=args.shots_scale)
    results = suite.run(args.only or None)
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        details = ", ".join(f"{k}={v:.6g}" for k, v in result.details.items())
        print(f"{status} {result.name:20s} {result.seconds:7.1f}s  {details}{'  ' + result.message if result.message else ''}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


COMMANDS = {"list": _cmd_list, "run": _cmd_run, "emit-scan": _cmd_emit_scan, "verify": _cmd_verify}


def cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    _configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 1


def main() -> int:
    return cli(sys.argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
