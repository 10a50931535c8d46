from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from irqueue.core.storage import iter_jsonl
from irqueue.models.schemas import (
    SENTINEL,
    TRACE_RECORD,
    Choice,
    InvariantFailure,
    ReorderReport,
    RunReport,
    Scenario,
    TraceHeader,
)
from irqueue.queue.frames import OpKind
from irqueue.queue.memory import HEAD, LEVEL_NODE, LEVEL_QUEUE, NEXT, TAIL, WRITE
from irqueue.services.driver import DEFAULT_MAX_STEPS, Trace, UsageError, run_schedule
from irqueue.services.reorder import measure_reorder

logger = logging.getLogger(__name__)


def chain_labels(trace: Trace, qid: int) -> List[str]:
    sentinel = trace.memory.queues[qid].sentinel
    return [SENTINEL if n == sentinel else trace.label(n) for n in trace.quiescent_chains.get(qid, [])]


def build_run_report(trace: Trace) -> RunReport:
    try:
        reorder = measure_reorder(trace)
    except UsageError as exc:
        logger.warning(f"reorder not measured: {exc}")
        reorder = ReorderReport()
    queues = sorted(trace.memory.queues)
    return RunReport(
        scenario=trace.scenario.name,
        schedule=[str(c) for c in trace.schedule],
        dequeued={trace.queue_name(q): trace.labels(trace.dequeued[q]) for q in queues},
        drained={trace.queue_name(q): trace.labels(trace.drained[q]) for q in queues},
        quiescent_chains={trace.queue_name(q): chain_labels(trace, q) for q in queues},
        steps=trace.steps,
        max_v_steps=trace.max_steps_of(OpKind.V),
        stalls_observed=trace.stalls,
        failures=trace.failures,
        reorder=reorder,
    )


def run_scenario(
    scenario: Scenario,
    schedule: Optional[Sequence[Choice]] = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Tuple[Trace, RunReport]:
    """Run ``schedule`` (the scenario's own one when omitted) and report on it."""
    if schedule is None:
        schedule = scenario.explicit_schedule()
    trace = run_schedule(scenario, schedule, max_steps=max_steps)
    logger.info(f"{scenario.name}: {trace.steps} steps, {len(trace.failures)} failures")
    return trace, build_run_report(trace)


# ─── check ───


@dataclass
class CheckResult:
    trace: Trace
    mismatches: List[str] = field(default_factory=list)

    @property
    def failures(self) -> List[InvariantFailure]:
        return self.trace.failures

    @property
    def ok(self) -> bool:
        return not self.mismatches and not self.failures


def _apply_write(snapshot: Dict[str, Any], record: Dict[str, Any]) -> None:
    cell, target, value = record["cell"], record["target"], record["value"]
    cells: Optional[Dict[str, Any]]
    if cell == NEXT:
        cells, key = snapshot["nodes"], target
    elif cell in (HEAD, TAIL):
        cells, key = snapshot["queues"].get(target), cell
    elif cell in (LEVEL_QUEUE, LEVEL_NODE):
        table = snapshot["table"]
        level = int(target) if target.isdigit() else len(table)
        cells = table[level] if level < len(table) else None
        key = "queue" if cell == LEVEL_QUEUE else "node"
    else:
        raise ValueError(f"unknown cell kind {cell!r}")
    if cells is None or key not in cells:
        raise ValueError(f"write to unknown {cell} target {target!r}")
    cells[key] = value


def _replay(initial: Dict[str, Any], located: Iterable[Tuple[str, Dict[str, Any]]]) -> Dict[str, Any]:
    snapshot = copy.deepcopy(initial)
    for where, record in located:
        if record.get("type") == "step" and record.get("access") == WRITE:
            try:
                _apply_write(snapshot, record)
            except ValueError as exc:
                raise ValueError(f"{where}: {exc}") from None
    return snapshot


def replay_writes(initial: Dict[str, Any], records: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Apply every recorded write, in order, to a copy of ``initial``."""
    return _replay(initial, ((f"record {idx}", record) for idx, record in enumerate(records, start=1)))


def _load_trace(path: Path) -> Tuple[TraceHeader, List[Tuple[int, Dict[str, Any]]]]:
    lines = list(iter_jsonl(path))
    if not lines or lines[0][1].get("type") != "header":
        raise ValueError(f"{path}: first record is not a trace header")
    lineno, raw = lines[0]
    try:
        header = TraceHeader.model_validate(raw)
    except ValidationError as exc:
        raise ValueError(f"{path}:{lineno}: bad trace header ({exc.errors()[0]['msg']})") from None

    body: List[Tuple[int, Dict[str, Any]]] = []
    for lineno, raw in lines[1:]:
        try:
            record = TRACE_RECORD.validate_python(raw)
        except ValidationError as exc:
            error = exc.errors()[0]
            where = ".".join(str(part) for part in error["loc"]) or "record"
            raise ValueError(f"{path}:{lineno}: bad trace record ({where}: {error['msg']})") from None
        body.append((lineno, record.model_dump(mode="json")))
    return header, body


def check_trace(path: Path, max_steps: int = DEFAULT_MAX_STEPS) -> CheckResult:
    """Re-run a recorded trace and compare it record by record.

    The recorded writes are also replayed onto the recorded initial snapshot and
    must land on the recorded final snapshot. A malformed file raises
    ``ValueError`` naming the offending line.
    """
    header, body = _load_trace(path)
    schedule = [Choice.parse(entry) for entry in header.schedule]
    trace = run_schedule(header.scenario, schedule, max_steps=max_steps)
    result = CheckResult(trace=trace)

    initial = header.initial.model_dump(mode="json")
    if trace.initial != initial:
        result.mismatches.append("initial snapshot differs from the scenario's")

    recorded = [record for _, record in body]
    produced = [r.model_dump(mode="json") for r in trace.records]
    for (lineno, want), got in zip(body, produced):
        if want != got:
            result.mismatches.append(f"line {lineno}: recorded {want} but replay produced {got}")
            break
    if len(recorded) != len(produced):
        result.mismatches.append(f"recorded {len(recorded)} records but replay produced {len(produced)}")

    finals = [r["snapshot"] for r in recorded if r["type"] == "snapshot" and r["phase"] == "final"]
    if not finals:
        result.mismatches.append("trace has no final snapshot")
    elif _replay(initial, ((f"{path}:{lineno}", record) for lineno, record in body)) != finals[-1]:
        result.mismatches.append("recorded writes do not reproduce the final snapshot")
    return result
