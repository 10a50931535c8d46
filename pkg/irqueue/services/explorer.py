"""Exhaustive depth-first enumeration of legal preemption schedules.

Each schedule is replayed from a fresh memory image, so no state is ever
copied. After a run, the last boundary with an untried choice is bumped and
everything after it is discarded; every leaf of the schedule tree is visited
exactly once. No partial-order reduction is applied.
"""
from __future__ import annotations

import hashlib
import logging
from typing import List, Optional, Union

from irqueue.models.schemas import ExplorationReport, FailureCase, FuzzReport, LivelockSuspect, Scenario
from irqueue.queue.frames import OpKind
from irqueue.services.driver import DEFAULT_MAX_STEPS, Driver, LivelockSuspected, Trace
from irqueue.services.reorder import measure_reorder

logger = logging.getLogger(__name__)

DEFAULT_MAX_FAILURES_KEPT = 20

Report = Union[ExplorationReport, FuzzReport]


def absorb_trace(
    report: Report,
    trace: Trace,
    digest: "hashlib._Hash",
    max_failures_kept: int,
    seed: Optional[int] = None,
    index: Optional[int] = None,
) -> None:
    """Fold one completed schedule into an exploration or fuzz report."""
    schedule = [str(c) for c in trace.schedule]
    digest.update(" ".join(schedule).encode())
    for qid in sorted(trace.memory.queues):
        digest.update(b"|" + " ".join(trace.labels(trace.dequeue_order(qid))).encode())
    digest.update(b"\n")

    report.max_v_steps = max(report.max_v_steps, trace.max_steps_of(OpKind.V))
    report.max_p_steps = max(report.max_p_steps, trace.max_steps_of(OpKind.P))
    report.stalls_observed += trace.stalls
    report.isolated_frames += trace.isolated_frames
    for pc, hits in trace.paths.items():
        report.paths[pc] = report.paths.get(pc, 0) + hits
    if trace.stalls and isinstance(report, ExplorationReport) and report.stall_witness is None:
        report.stall_witness = schedule

    if trace.failures:
        report.failures += 1
        if len(report.failure_cases) < max_failures_kept:
            report.failure_cases.append(
                FailureCase(schedule=schedule, failures=trace.failures, seed=seed, index=index)
            )
        return
    report.reorder.absorb(measure_reorder(trace))


def absorb_livelock(
    report: Report,
    exc: LivelockSuspected,
    digest: "hashlib._Hash",
    max_failures_kept: int,
    seed: Optional[int] = None,
    index: Optional[int] = None,
) -> None:
    schedule = [str(c) for c in exc.choices]
    digest.update(("livelock " + " ".join(schedule) + "\n").encode())
    logger.warning(f"livelock suspect after {exc.steps} steps: {' '.join(schedule)}")
    if len(report.livelock_suspects) < max_failures_kept:
        report.livelock_suspects.append(LivelockSuspect(schedule=schedule, steps=exc.steps, seed=seed, index=index))


def _backtrack(branching: List[tuple]) -> Optional[List[int]]:
    position = len(branching) - 1
    while position >= 0 and branching[position][0] + 1 >= branching[position][1]:
        position -= 1
    if position < 0:
        return None
    return [pick for pick, _ in branching[:position]] + [branching[position][0] + 1]


def explore(
    scenario: Scenario,
    max_steps: int = DEFAULT_MAX_STEPS,
    max_failures_kept: int = DEFAULT_MAX_FAILURES_KEPT,
) -> ExplorationReport:
    report = ExplorationReport(scenario=scenario.name)
    digest = hashlib.sha256()
    prefix: List[int] = []
    logger.info(f"exploring {scenario.name}: {len(scenario.ops)} ops over {scenario.level_count} levels")

    while prefix is not None:
        driver = Driver(scenario, max_steps=max_steps)
        forced = prefix
        try:
            driver.run(chooser=lambda position, legal: forced[position] if position < len(forced) else 0)
            trace = driver.settle()
        except LivelockSuspected as exc:
            absorb_livelock(report, exc, digest, max_failures_kept)
        else:
            absorb_trace(report, trace, digest, max_failures_kept)
        report.schedules_visited += 1
        if report.schedules_visited % 10000 == 0:
            logger.info(f"{scenario.name}: {report.schedules_visited} schedules visited")
        prefix = _backtrack(driver.branching)

    report.digest = digest.hexdigest()
    logger.info(
        f"explored {scenario.name}: {report.schedules_visited} schedules, "
        f"{report.failures} failing, max V steps {report.max_v_steps}"
    )
    return report
