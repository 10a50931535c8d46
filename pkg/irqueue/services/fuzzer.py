"""Seeded random schedule generation.

Iteration ``i`` of seed ``s`` draws every choice from its own
``random.Random(f"{s}:{i}")``, so any failing iteration replays from
``(seed, index)`` alone. Iterations run in batches, optionally on a process
pool; batches are merged in index order, so the report does not depend on the
worker count.
"""
from __future__ import annotations

import hashlib
import logging
import random
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Dict, List, Tuple

from irqueue.models.schemas import FuzzReport, Scenario
from irqueue.services.driver import DEFAULT_MAX_STEPS, LivelockSuspected, Trace, simulate
from irqueue.services.explorer import DEFAULT_MAX_FAILURES_KEPT, absorb_livelock, absorb_trace

logger = logging.getLogger(__name__)


def _chunk(start: int, stop: int, size: int) -> List[Tuple[int, int]]:
    return [(i, min(i + size, stop)) for i in range(start, stop, size)]


def replay_iteration(scenario: Scenario, seed: int, index: int, *, record: bool = False,
                     max_steps: int = DEFAULT_MAX_STEPS) -> Trace:
    rng = random.Random(f"{seed}:{index}")
    return simulate(
        scenario,
        chooser=lambda position, legal: rng.randrange(len(legal)),
        record=record,
        max_steps=max_steps,
    )


def _run_batch(
    scenario: Scenario,
    seed: int,
    start: int,
    stop: int,
    max_steps: int,
    max_failures_kept: int,
) -> Tuple[FuzzReport, str]:
    report = FuzzReport(scenario=scenario.name, seed=seed, iterations=stop - start)
    digest = hashlib.sha256()
    for index in range(start, stop):
        try:
            trace = replay_iteration(scenario, seed, index, max_steps=max_steps)
        except LivelockSuspected as exc:
            absorb_livelock(report, exc, digest, max_failures_kept, seed=seed, index=index)
        else:
            absorb_trace(report, trace, digest, max_failures_kept, seed=seed, index=index)
    return report, digest.hexdigest()


def _merge(total: FuzzReport, part: FuzzReport, max_failures_kept: int) -> None:
    total.failures += part.failures
    room = max_failures_kept - len(total.failure_cases)
    total.failure_cases.extend(part.failure_cases[: max(room, 0)])
    room = max_failures_kept - len(total.livelock_suspects)
    total.livelock_suspects.extend(part.livelock_suspects[: max(room, 0)])
    total.max_v_steps = max(total.max_v_steps, part.max_v_steps)
    total.max_p_steps = max(total.max_p_steps, part.max_p_steps)
    total.stalls_observed += part.stalls_observed
    total.isolated_frames += part.isolated_frames
    for pc, hits in part.paths.items():
        total.paths[pc] = total.paths.get(pc, 0) + hits
    total.reorder.absorb(part.reorder)


def fuzz(
    scenario: Scenario,
    seed: int,
    iterations: int,
    *,
    max_steps: int = DEFAULT_MAX_STEPS,
    batch_size: int = 500,
    max_workers: int = 1,
    max_failures_kept: int = DEFAULT_MAX_FAILURES_KEPT,
) -> FuzzReport:
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    batches = _chunk(0, iterations, batch_size)
    results: Dict[int, Tuple[FuzzReport, str]] = {}

    if max_workers <= 1 or len(batches) == 1:
        for batch_idx, (start, stop) in enumerate(batches):
            results[batch_idx] = _run_batch(scenario, seed, start, stop, max_steps, max_failures_kept)
            logger.info(f"fuzz batch {batch_idx + 1}/{len(batches)} done")
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as executor:
            futures = {
                executor.submit(_run_batch, scenario, seed, start, stop, max_steps, max_failures_kept): batch_idx
                for batch_idx, (start, stop) in enumerate(batches)
            }
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                logger.info(f"fuzz batch {futures[future] + 1}/{len(batches)} done")

    report = FuzzReport(scenario=scenario.name, seed=seed, iterations=iterations)
    digest = hashlib.sha256()
    for batch_idx in range(len(batches)):
        part, part_digest = results[batch_idx]
        _merge(report, part, max_failures_kept)
        digest.update(part_digest.encode())
    report.digest = digest.hexdigest()
    return report
