from __future__ import annotations

from typing import Iterable, List, Union

from irqueue.models.schemas import (
    ExplorationReport,
    FailureCase,
    FuzzReport,
    InvariantFailure,
    LivelockSuspect,
    ReorderSummary,
    RunReport,
)


def compact_schedule(schedule: Iterable[str]) -> str:
    """``advance advance start 1`` -> ``advance 2, start 1``."""
    parts: List[str] = []
    run = 0
    for entry in schedule:
        if entry == "advance":
            run += 1
            continue
        if run:
            parts.append("advance" if run == 1 else f"advance {run}")
            run = 0
        parts.append(entry)
    if run:
        parts.append("advance" if run == 1 else f"advance {run}")
    return ", ".join(parts) or "(empty)"


def _failure_lines(failures: Iterable[InvariantFailure], indent: str = "  ") -> List[str]:
    lines = []
    for failure in failures:
        where = f" (seq {failure.seq})" if failure.seq is not None else ""
        lines.append(f"{indent}{failure.property.value}{where}: {failure.detail}")
    return lines


def _histogram(histogram: dict) -> str:
    return " ".join(f"{k}:{v}" for k, v in histogram.items()) or "-"


def format_run_summary(report: RunReport) -> str:
    lines = [f"scenario: {report.scenario}", f"steps: {report.steps}"]
    for queue, chain in report.quiescent_chains.items():
        lines.append(f"quiescent {queue}: {' -> '.join(chain)}")
    for queue in report.dequeued:
        order = report.dequeued[queue] + report.drained[queue]
        lines.append(f"drain {queue}: {' '.join(order) or '(empty)'}")
    lines.append(f"max_V_steps: {report.max_v_steps}")
    lines.append(f"stalls_observed: {report.stalls_observed}")
    if report.reorder.entries:
        lines.append("reorder (node queue arrival completion dequeue displacement arrival_displacement):")
        for e in report.reorder.entries:
            lines.append(
                f"  {e.node} {e.queue} {e.arrival_rank} {e.completion_rank} {e.dequeue_rank} "
                f"{e.displacement:+d} {e.arrival_displacement:+d}"
            )
    lines.append(f"max_displacement: {report.reorder.max_displacement}")
    lines.append(f"max_arrival_displacement: {report.reorder.max_arrival_displacement}")
    lines.append(f"failures: {len(report.failures)}")
    lines.extend(_failure_lines(report.failures))
    if report.failures:
        lines.append(f"reproducer: {compact_schedule(report.schedule)}")
    return "\n".join(lines) + "\n"


def _reorder_lines(reorder: ReorderSummary) -> List[str]:
    return [
        f"max_displacement: {reorder.max_displacement}",
        f"max_arrival_displacement: {reorder.max_arrival_displacement}",
        f"displacement_histogram: {_histogram(reorder.histogram)}",
        f"arrival_histogram: {_histogram(reorder.arrival_histogram)}",
    ]


def _case_lines(cases: List[FailureCase], suspects: List[LivelockSuspect]) -> List[str]:
    lines = []
    for case in cases:
        origin = f" seed={case.seed} index={case.index}" if case.seed is not None else ""
        lines.append(f"failing schedule{origin}: {compact_schedule(case.schedule)}")
        lines.extend(_failure_lines(case.failures))
    for suspect in suspects:
        origin = f" seed={suspect.seed} index={suspect.index}" if suspect.seed is not None else ""
        lines.append(f"livelock suspect{origin} after {suspect.steps} steps: {compact_schedule(suspect.schedule)}")
    return lines


def _common_lines(report: Union[ExplorationReport, FuzzReport]) -> List[str]:
    return [
        f"failures: {report.failures}",
        f"livelock_suspects: {len(report.livelock_suspects)}",
        f"max_V_steps: {report.max_v_steps}",
        f"max_P_steps: {report.max_p_steps}",
        f"stalls_observed: {report.stalls_observed}",
        f"isolated_frames: {report.isolated_frames}",
        f"paths: {_histogram(dict(sorted(report.paths.items())))}",
    ]


def format_exploration_summary(report: ExplorationReport) -> str:
    lines = [f"scenario: {report.scenario}", f"schedules_visited: {report.schedules_visited}"]
    lines.extend(_common_lines(report))
    if report.stall_witness is not None:
        lines.append(f"stall_witness: {compact_schedule(report.stall_witness)}")
    lines.extend(_reorder_lines(report.reorder))
    lines.append(f"digest: {report.digest}")
    lines.extend(_case_lines(report.failure_cases, report.livelock_suspects))
    return "\n".join(lines) + "\n"


def format_fuzz_summary(report: FuzzReport) -> str:
    lines = [f"scenario: {report.scenario}", f"seed: {report.seed}", f"iterations: {report.iterations}"]
    lines.extend(_common_lines(report))
    lines.extend(_reorder_lines(report.reorder))
    lines.append(f"digest: {report.digest}")
    lines.extend(_case_lines(report.failure_cases, report.livelock_suspects))
    return "\n".join(lines) + "\n"
