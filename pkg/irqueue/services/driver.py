"""Deterministic single-CPU interrupt-preemption scheduler.

At every step boundary the driver either advances the running (topmost) frame
or starts the next pending op of a level strictly above every frame in flight.
A started frame performs its first step immediately, so preemption only ever
lands between two steps of a frame. Higher frames always finish before lower
ones resume.
"""
from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel

from irqueue.models.schemas import (
    ADVANCE,
    SENTINEL,
    START,
    Choice,
    FrameRecord,
    InvariantFailure,
    MemorySnapshot,
    Scenario,
    SnapshotRecord,
    StepRecord,
    TraceHeader,
)
from irqueue.queue.frames import OpFrame, OpKind
from irqueue.queue.memory import Access, NodeId, QueueId, QueueState, SharedMemory, build_memory
from irqueue.queue.procedures import P_EMPTY, PATH_PCS
from irqueue.services.invariants import InvariantMonitor

logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 10000

Chooser = Callable[[int, List[Choice]], int]


class ScheduleError(ValueError):
    def __init__(self, index: int, message: str):
        super().__init__(f"schedule step {index}: {message}")
        self.index = index


class UsageError(RuntimeError):
    pass


class LivelockSuspected(RuntimeError):
    def __init__(self, steps: int, choices: List[Choice]):
        super().__init__(f"no quiescence after {steps} steps")
        self.steps = steps
        self.choices = list(choices)


@dataclass
class FrameInfo:
    frame_id: int
    kind: OpKind
    level: int
    queue: QueueId
    op: Optional[int]
    source: str
    nodes: List[NodeId] = field(default_factory=list)
    start_seq: int = -1
    finish_seq: int = -1
    steps: int = 0
    result: Optional[int] = None
    done: bool = False


@dataclass
class Trace:
    """Everything one scheduled run produced.

    ``records`` is empty unless the driver was recording.
    """

    scenario: Scenario
    schedule: List[Choice]
    memory: SharedMemory
    steps: int
    frames: List[FrameInfo]
    init_nodes: Dict[QueueId, List[NodeId]]
    dequeued: Dict[QueueId, List[NodeId]]
    drained: Dict[QueueId, List[NodeId]]
    quiescent_chains: Dict[QueueId, List[NodeId]]
    failures: List[InvariantFailure]
    stalls: int
    isolated_frames: int
    paths: Dict[str, int] = field(default_factory=dict)
    initial: Optional[dict] = None
    quiescent: Optional[dict] = None
    final: Optional[dict] = None
    records: List[BaseModel] = field(default_factory=list)

    def label(self, node: Optional[NodeId]) -> Optional[str]:
        return self.memory.arena.label(node)

    def labels(self, nodes: Sequence[NodeId]) -> List[str]:
        return [self.memory.arena.labels[n] for n in nodes]

    def queue_name(self, qid: QueueId) -> str:
        return self.memory.queues[qid].name

    def dequeue_order(self, qid: QueueId) -> List[NodeId]:
        return self.dequeued[qid] + self.drained[qid]

    def max_steps_of(self, kind: OpKind) -> int:
        return max((f.steps for f in self.frames if f.kind is kind and f.source == "op"), default=0)

    def jsonl_records(self) -> List[BaseModel]:
        header = TraceHeader(
            scenario=self.scenario,
            schedule=[str(c) for c in self.schedule],
            initial=MemorySnapshot.model_validate(self.initial),
        )
        return [header, *self.records]


def build_scenario_memory(scenario: Scenario) -> Tuple[SharedMemory, Dict[str, QueueState], Dict[QueueId, List[NodeId]], List[List[NodeId]]]:
    """Fresh memory for ``scenario``: queues, pre-built init chains and pre-linked V chains."""
    labels = scenario.node_labels()
    sentinels = sum(1 for q in scenario.queues if not q.self_sentinel)
    memory = build_memory(len(labels) + sentinels, scenario.level_count)
    queues = {q.name: memory.init_queue(q.name, q.self_sentinel) for q in scenario.queues}
    for label in labels:
        memory.arena.alloc(label)

    init_nodes: Dict[QueueId, List[NodeId]] = {}
    for spec in scenario.queues:
        queue = queues[spec.name]
        chain = [queue.sentinel if label == SENTINEL else memory.arena.node(label) for label in spec.init]
        init_nodes[queue.queue_id] = [n for n in chain if n != queue.sentinel]
        if chain:
            memory.link(chain)
            memory.head[queue.queue_id] = chain[0]
            memory.tail[queue.queue_id] = chain[-1]

    op_nodes: List[List[NodeId]] = []
    for op in scenario.ops:
        chain = [memory.arena.node(label) for label in op.nodes]
        memory.link(chain)
        op_nodes.append(chain)
    return memory, queues, init_nodes, op_nodes


class Driver:
    def __init__(self, scenario: Scenario, *, record: bool = False, max_steps: int = DEFAULT_MAX_STEPS):
        self.scenario = scenario
        self.record = record
        self.max_steps = max_steps
        self.memory, self.queues, self.init_nodes, self.op_nodes = build_scenario_memory(scenario)
        self._queue_by_id = {q.queue_id: q for q in self.queues.values()}

        self.pending: Dict[int, Deque[int]] = {}
        for idx, op in enumerate(scenario.ops):
            self.pending.setdefault(op.level, deque()).append(idx)
        self._levels = sorted(self.pending)

        self.seq = 0
        self.stack: List[Tuple[OpFrame, FrameInfo]] = []
        self.frames: List[FrameInfo] = []
        self.op_frames: Dict[int, FrameInfo] = {}
        self.node_op: Dict[NodeId, int] = {n: idx for idx, chain in enumerate(self.op_nodes) for n in chain}
        self.choices: List[Choice] = []
        self.branching: List[Tuple[int, int]] = []
        self.dequeued: Dict[QueueId, List[NodeId]] = {qid: [] for qid in self._queue_by_id}
        self.drained: Dict[QueueId, List[NodeId]] = {qid: [] for qid in self._queue_by_id}
        self.quiescent_chains: Dict[QueueId, List[NodeId]] = {}
        self.stalls = 0
        self.paths: Counter = Counter()
        self.records: List[BaseModel] = []
        self.initial = self.memory.snapshot() if record else None
        self.quiescent: Optional[dict] = None
        self.settled = False
        self.monitor = InvariantMonitor(self)

    # ─── state ───

    @property
    def is_quiescent(self) -> bool:
        return not self.stack

    @property
    def finished(self) -> bool:
        return not self.stack and not any(self.pending.values())

    def legal_choices(self) -> List[Choice]:
        choices: List[Choice] = []
        floor = -1
        if self.stack:
            choices.append(Choice(ADVANCE))
            floor = self.stack[-1][0].level
        for level in self._levels:
            queue = self.pending[level]
            if level > floor and queue:
                choices.append(Choice(START, queue[0]))
        return choices

    # ─── execution ───

    def apply(self, choice: Choice, index: Optional[int] = None) -> None:
        legal = self.legal_choices()
        if choice not in legal:
            where = len(self.choices) if index is None else index
            raise ScheduleError(where, f"'{choice}' is not legal here (legal: {', '.join(map(str, legal)) or 'none'})")
        self._take(choice, legal.index(choice), len(legal))

    def run(self, schedule: Sequence[Choice] = (), chooser: Optional[Chooser] = None) -> None:
        """Drive the scenario to quiescence.

        ``schedule`` is followed first; past its end ``chooser`` picks an index
        into the legal choices, defaulting to the first one (advance, or the
        lowest pending level).
        """
        position = 0
        while not self.finished:
            legal = self.legal_choices()
            if position < len(schedule):
                choice = schedule[position]
                if choice not in legal:
                    raise ScheduleError(
                        position, f"'{choice}' is not legal here (legal: {', '.join(map(str, legal))})"
                    )
                pick = legal.index(choice)
            elif chooser is not None:
                pick = chooser(position, legal)
            else:
                pick = 0
            self._take(legal[pick], pick, len(legal))
            position += 1

    def _take(self, choice: Choice, pick: int, width: int) -> None:
        self.choices.append(choice)
        self.branching.append((pick, width))
        if choice.action == ADVANCE:
            frame, info = self.stack[-1]
        else:
            op_idx = self.pending[self.scenario.ops[choice.op].level].popleft()
            frame, info = self._start(op_idx)
        self._step(frame, info)

    def _start(self, op_idx: Optional[int], queue: Optional[QueueState] = None) -> Tuple[OpFrame, FrameInfo]:
        if op_idx is None:
            kind, level, source, nodes, n = OpKind.P, 0, "drain", [], None
        else:
            op = self.scenario.ops[op_idx]
            queue = self.queues[op.queue]
            kind, level, source, nodes, n = op.kind, op.level, "op", self.op_nodes[op_idx], op.n
        frame_id = len(self.frames)
        frame = OpFrame(
            self.memory,
            kind,
            level,
            queue,
            arg_node=nodes[0] if nodes else None,
            n=n,
            frame_id=frame_id,
        )
        info = FrameInfo(
            frame_id=frame_id,
            kind=kind,
            level=level,
            queue=queue.queue_id,
            op=op_idx,
            source=source,
            nodes=list(nodes),
            start_seq=self.seq,
        )
        self.frames.append(info)
        if op_idx is not None:
            self.op_frames[op_idx] = info
        self.stack.append((frame, info))
        if self.record:
            self.records.append(self._frame_record("start", info))
        return frame, info

    def _step(self, frame: OpFrame, info: FrameInfo) -> None:
        if self.seq >= self.max_steps:
            raise LivelockSuspected(self.seq, self.choices)
        seq = self.seq
        access = frame.step()
        self.seq += 1
        if self.record:
            self.records.append(self._step_record(seq, frame, access))
        if info.source == "op" and access.pc in PATH_PCS:
            self.paths[access.pc] += 1
        self.monitor.on_step(seq, frame, info, access)
        if frame.done:
            self._finish(frame, info, seq)

    def _finish(self, frame: OpFrame, info: FrameInfo, seq: int) -> None:
        self.stack.pop()
        info.done = True
        info.finish_seq = seq
        info.steps = frame.steps
        info.result = frame.result
        if info.kind is OpKind.P:
            target = self.drained if info.source == "drain" else self.dequeued
            if frame.result is not None:
                target[info.queue].append(frame.result)
            elif info.source == "op":
                self.paths[P_EMPTY] += 1
        elif info.kind is OpKind.V and self._stalled(info):
            self.stalls += 1
            logger.debug(f"stall: frame {info.frame_id} finished unreachable behind a suspended lower level")
        self.monitor.on_finish(frame, info)
        if self.record:
            self.records.append(self._frame_record("finish", info))

    def _stalled(self, info: FrameInfo) -> bool:
        if not any(other.queue == info.queue and other.kind is not OpKind.PEEK for _, other in self.stack):
            return False
        reachable = set(self.memory.chain(self.memory.head[info.queue]))
        return any(node not in reachable for node in info.nodes)

    # ─── quiescence ───

    def settle(self) -> Trace:
        """Check the quiescent state, drain every queue, run the final checks."""
        if not self.finished:
            raise UsageError("settle() before every op has completed")
        if not self.settled:
            self.settled = True
            self.quiescent_chains = {
                qid: self.memory.chain(self.memory.head[qid]) for qid in self._queue_by_id
            }
            self.monitor.on_quiescent()
            if self.record:
                self.quiescent = self.memory.snapshot()
                self.records.append(self._snapshot_record("quiescent", self.quiescent))
            for queue in self._queue_by_id.values():
                self.drain(queue)
            self.monitor.on_drained()
            if self.record:
                self.records.append(self._snapshot_record("final", self.memory.snapshot()))
        return self.trace()

    def drain(self, queue: QueueState) -> List[NodeId]:
        """Dequeue at level 0 until two consecutive empty results."""
        if not self.is_quiescent:
            raise UsageError("drain() needs quiescence: frames are still in flight")
        drained: List[NodeId] = []
        empties = 0
        while empties < 2:
            frame, info = self._start(None, queue)
            while not info.done:
                self._step(frame, info)
            if info.result is None:
                empties += 1
            else:
                empties = 0
                drained.append(info.result)
        return drained

    def trace(self) -> Trace:
        return Trace(
            scenario=self.scenario,
            schedule=list(self.choices),
            memory=self.memory,
            steps=self.seq,
            frames=self.frames,
            init_nodes=self.init_nodes,
            dequeued=self.dequeued,
            drained=self.drained,
            quiescent_chains=self.quiescent_chains,
            failures=list(self.monitor.failures),
            stalls=self.stalls,
            isolated_frames=self.monitor.isolated_frames,
            paths=dict(self.paths),
            initial=self.initial,
            quiescent=self.quiescent,
            final=self.memory.snapshot() if self.record else None,
            records=self.records,
        )

    # ─── records ───

    def _step_record(self, seq: int, frame: OpFrame, access: Access) -> StepRecord:
        return StepRecord(
            seq=seq,
            frame=frame.frame_id,
            level=frame.level,
            pc=access.pc,
            cell=access.cell.kind,
            target=self.memory.describe(access.cell),
            access=access.op,
            value=self.memory.render(access.cell, access.value),
        )

    def _frame_record(self, event: str, info: FrameInfo) -> FrameRecord:
        return FrameRecord(
            type=event,
            seq=info.start_seq if event == "start" else info.finish_seq,
            frame=info.frame_id,
            kind=info.kind,
            level=info.level,
            queue=self._queue_by_id[info.queue].name,
            op=info.op,
            source=info.source,
            steps=info.steps,
            result=self._render_result(info) if event == "finish" else None,
        )

    def _render_result(self, info: FrameInfo) -> Optional[str]:
        if info.result is None:
            return None
        if info.kind is OpKind.PEEK:
            return str(info.result)
        return self.memory.arena.label(info.result)

    @staticmethod
    def _snapshot_record(phase: str, snapshot: dict) -> SnapshotRecord:
        return SnapshotRecord(phase=phase, snapshot=MemorySnapshot.model_validate(snapshot))


def simulate(
    scenario: Scenario,
    schedule: Sequence[Choice] = (),
    *,
    chooser: Optional[Chooser] = None,
    record: bool = False,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Trace:
    driver = Driver(scenario, record=record, max_steps=max_steps)
    driver.run(schedule, chooser)
    return driver.settle()


def run_schedule(scenario: Scenario, schedule: Sequence[Choice], max_steps: int = DEFAULT_MAX_STEPS) -> Trace:
    """Replay ``schedule`` (defaults past its end) and return the recorded trace."""
    return simulate(scenario, schedule, record=True, max_steps=max_steps)
