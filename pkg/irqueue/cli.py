"""Command-line harness: ``run``, ``explore``, ``fuzz`` and ``check``.

Exit status is 0 on success with zero failures, 1 when an invariant fails and
2 on usage, parse or file errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from irqueue.core.config import load_app_config, section
from irqueue.core.storage import save_report, write_jsonl
from irqueue.services.driver import DEFAULT_MAX_STEPS, LivelockSuspected, ScheduleError, UsageError
from irqueue.services.explorer import DEFAULT_MAX_FAILURES_KEPT, explore
from irqueue.services.fuzzer import fuzz
from irqueue.services.reporting import (
    compact_schedule,
    format_exploration_summary,
    format_fuzz_summary,
    format_run_summary,
)
from irqueue.services.runner import check_trace, run_scenario
from irqueue.services.scenario_parser import ScenarioError, load_scenario, load_schedule

logger = logging.getLogger("irqueue")

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irqueue",
        description="Interrupt-reentrant queue simulator: run, explore, fuzz and check preemption schedules.",
    )
    parser.add_argument("--config", type=Path, default=None, help="YAML config (default: config/app.yaml)")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log more (repeatable)")
    sub = parser.add_subparsers(dest="command", metavar="{run,explore,fuzz,check}")
    sub.required = True

    run = sub.add_parser("run", help="run one schedule and drain")
    run.add_argument("scenario", type=Path)
    run.add_argument("--schedule", type=Path, default=None, help="schedule file (default: the scenario's own)")
    run.add_argument("--trace", type=Path, default=None, help="write the JSONL trace here")
    run.add_argument("--report", type=Path, default=None, help="write the JSON report here")

    exp = sub.add_parser("explore", help="enumerate every legal schedule")
    exp.add_argument("scenario", type=Path)
    exp.add_argument("--max-steps", type=int, default=None, help="livelock bound per schedule")
    exp.add_argument("--report", type=Path, default=None)

    fz = sub.add_parser("fuzz", help="run seeded random schedules")
    fz.add_argument("scenario", type=Path)
    fz.add_argument("--seed", type=int, required=True)
    fz.add_argument("--iters", type=int, default=None)
    fz.add_argument("--workers", type=int, default=None, help="process pool size")
    fz.add_argument("--max-steps", type=int, default=None)
    fz.add_argument("--report", type=Path, default=None)

    chk = sub.add_parser("check", help="replay a trace and re-verify it")
    chk.add_argument("trace", type=Path)
    return parser


def _setup_logging(app_cfg: Dict[str, Any], verbose: int) -> None:
    level_name = str(section(app_cfg, "logging").get("level", "WARNING")).upper()
    level = getattr(logging, level_name, logging.WARNING)
    if verbose:
        level = logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _levels(app_cfg: Dict[str, Any]) -> Optional[int]:
    value = section(app_cfg, "simulation").get("level_count")
    return int(value) if value is not None else None


def _cmd_run(args: argparse.Namespace, app_cfg: Dict[str, Any]) -> int:
    scenario = load_scenario(args.scenario, default_levels=_levels(app_cfg))
    schedule = load_schedule(args.schedule) if args.schedule else None
    max_steps = int(section(app_cfg, "simulation").get("max_steps", DEFAULT_MAX_STEPS))
    try:
        trace, report = run_scenario(scenario, schedule, max_steps=max_steps)
    except LivelockSuspected as exc:
        print(f"livelock suspected after {exc.steps} steps")
        print(f"reproducer: {compact_schedule(str(c) for c in exc.choices)}")
        return EXIT_FAILURES
    if args.trace:
        write_jsonl(args.trace, trace.jsonl_records())
        logger.info(f"trace written to {args.trace}")
    if args.report:
        save_report(args.report, report)
    sys.stdout.write(format_run_summary(report))
    return EXIT_FAILURES if report.failures else EXIT_OK


def _cmd_explore(args: argparse.Namespace, app_cfg: Dict[str, Any]) -> int:
    scenario = load_scenario(args.scenario, default_levels=_levels(app_cfg))
    cfg = section(app_cfg, "exploration")
    max_steps = args.max_steps if args.max_steps is not None else int(cfg.get("max_steps", DEFAULT_MAX_STEPS))
    if max_steps < 1:
        raise ValueError("--max-steps must be positive")
    report = explore(
        scenario,
        max_steps=max_steps,
        max_failures_kept=int(cfg.get("max_failures_kept", DEFAULT_MAX_FAILURES_KEPT)),
    )
    if args.report:
        save_report(args.report, report)
    sys.stdout.write(format_exploration_summary(report))
    return EXIT_FAILURES if report.failures or report.livelock_suspects else EXIT_OK


def _cmd_fuzz(args: argparse.Namespace, app_cfg: Dict[str, Any]) -> int:
    scenario = load_scenario(args.scenario, default_levels=_levels(app_cfg))
    cfg = section(app_cfg, "fuzz")
    max_steps = args.max_steps
    if max_steps is None:
        max_steps = int(section(app_cfg, "simulation").get("max_steps", DEFAULT_MAX_STEPS))
    report = fuzz(
        scenario,
        args.seed,
        args.iters if args.iters is not None else int(cfg.get("iterations", 1000)),
        max_steps=max_steps,
        batch_size=int(cfg.get("batch_size", 500)),
        max_workers=args.workers if args.workers is not None else int(cfg.get("max_workers", 1)),
        max_failures_kept=int(section(app_cfg, "exploration").get("max_failures_kept", DEFAULT_MAX_FAILURES_KEPT)),
    )
    if args.report:
        save_report(args.report, report)
    sys.stdout.write(format_fuzz_summary(report))
    return EXIT_FAILURES if report.failures or report.livelock_suspects else EXIT_OK


def _cmd_check(args: argparse.Namespace, app_cfg: Dict[str, Any]) -> int:
    max_steps = int(section(app_cfg, "simulation").get("max_steps", DEFAULT_MAX_STEPS))
    result = check_trace(args.trace, max_steps=max_steps)
    for mismatch in result.mismatches:
        print(f"mismatch: {mismatch}")
    print(f"records: {len(result.trace.records) + 1}")
    print(f"failures: {len(result.failures)}")
    for failure in result.failures:
        print(f"  {failure.property.value}: {failure.detail}")
    print("ok" if result.ok else "FAILED")
    return EXIT_OK if result.ok else EXIT_FAILURES


_COMMANDS = {
    "run": _cmd_run,
    "explore": _cmd_explore,
    "fuzz": _cmd_fuzz,
    "check": _cmd_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        app_cfg = load_app_config(args.config)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        print(f"irqueue: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _setup_logging(app_cfg, args.verbose)

    try:
        return _COMMANDS[args.command](args, app_cfg)
    except (ScenarioError, ScheduleError, UsageError, ValueError, OSError) as exc:
        print(f"irqueue: {exc}", file=sys.stderr)
        return EXIT_USAGE
