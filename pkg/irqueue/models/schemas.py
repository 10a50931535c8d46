from __future__ import annotations

import re
from enum import Enum
from typing import Annotated, Dict, List, Literal, NamedTuple, Optional, Union

from pydantic import BaseModel, Field, TypeAdapter, model_validator

from irqueue.queue.frames import OpKind
from irqueue.queue.memory import DEFAULT_LEVEL_COUNT

LABEL_RE = re.compile(r"^[A-Za-z0-9_]+$")
SENTINEL = "sentinel"

ADVANCE = "advance"
START = "start"


class Choice(NamedTuple):
    action: str
    op: Optional[int] = None

    def __str__(self) -> str:
        return ADVANCE if self.action == ADVANCE else f"{START} {self.op}"

    @classmethod
    def parse(cls, text: str) -> "Choice":
        parts = text.split()
        if parts == [ADVANCE]:
            return cls(ADVANCE)
        if len(parts) == 2 and parts[0] == START and parts[1].isdigit():
            return cls(START, int(parts[1]))
        raise ValueError(f"bad schedule choice {text!r} (expected 'advance' or 'start <op>')")


# ─── Scenario Models ───


class QueueSpec(BaseModel):
    name: str
    self_sentinel: bool = False
    init: List[str] = Field(default_factory=list)


class OpSpec(BaseModel):
    kind: OpKind
    level: int
    queue: str
    nodes: List[str] = Field(default_factory=list)
    n: Optional[int] = None

    def __str__(self) -> str:
        if self.kind is OpKind.V:
            arg = ",".join(self.nodes)
        elif self.kind is OpKind.PEEK:
            arg = str(self.n)
        else:
            arg = ""
        return f"{self.kind.value}({arg})@{self.level}"


class Scenario(BaseModel):
    name: str = "scenario"
    level_count: int = DEFAULT_LEVEL_COUNT
    queues: List[QueueSpec] = Field(default_factory=lambda: [QueueSpec(name="q0")])
    ops: List[OpSpec] = Field(default_factory=list)
    schedule: Optional[List[str]] = None

    @model_validator(mode="after")
    def _check_rules(self) -> "Scenario":
        if self.level_count < 1:
            raise ValueError("level_count must be at least 1")
        if not self.queues:
            raise ValueError("at least one queue is required")

        names = [q.name for q in self.queues]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate queue names: {names}")
        labels: List[str] = []
        for queue in self.queues:
            if not LABEL_RE.match(queue.name):
                raise ValueError(f"bad queue name {queue.name!r}")
            if queue.init:
                if queue.init.count(SENTINEL) != 1:
                    raise ValueError(f"init chain of {queue.name} must contain '{SENTINEL}' exactly once")
                labels.extend(label for label in queue.init if label != SENTINEL)

        for idx, op in enumerate(self.ops):
            if not 0 <= op.level < self.level_count:
                raise ValueError(f"op {idx}: level {op.level} outside [0, {self.level_count})")
            if op.queue not in names:
                raise ValueError(f"op {idx}: unknown queue {op.queue!r}")
            if op.kind is OpKind.P and op.level != 0:
                raise ValueError(
                    f"op {idx}: P must run at level 0 (single reader below every interrupt), got level {op.level}"
                )
            if op.kind is OpKind.V and not op.nodes:
                raise ValueError(f"op {idx}: V needs at least one node")
            if op.kind is not OpKind.V and op.nodes:
                raise ValueError(f"op {idx}: only V takes nodes")
            if op.kind is OpKind.PEEK and (op.n is None or op.n < 1):
                raise ValueError(f"op {idx}: PEEK needs a positive n")
            labels.extend(op.nodes)

        for label in labels:
            if label == SENTINEL or not LABEL_RE.match(label):
                raise ValueError(f"bad node label {label!r}")
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise ValueError(f"nodes enqueued more than once: {duplicates}")

        for idx, text in enumerate(self.schedule or []):
            choice = Choice.parse(text)
            if choice.op is not None and choice.op >= len(self.ops):
                raise ValueError(f"schedule step {idx}: no op {choice.op}")
        return self

    def node_labels(self) -> List[str]:
        labels = [label for q in self.queues for label in q.init if label != SENTINEL]
        labels.extend(label for op in self.ops for label in op.nodes)
        return labels

    def explicit_schedule(self) -> List[Choice]:
        return [Choice.parse(text) for text in self.schedule or []]


# ─── Trace Records ───


class QueueCells(BaseModel):
    head: Optional[str] = None
    tail: Optional[str] = None


class TableEntry(BaseModel):
    queue: Optional[str] = None
    node: Optional[str] = None


class MemorySnapshot(BaseModel):
    nodes: Dict[str, Optional[str]]
    queues: Dict[str, QueueCells]
    table: List[TableEntry]


class TraceHeader(BaseModel):
    type: Literal["header"] = "header"
    version: int = 1
    scenario: Scenario
    schedule: List[str]
    initial: MemorySnapshot


class StepRecord(BaseModel):
    type: Literal["step"] = "step"
    seq: int
    frame: int
    level: int
    pc: str
    cell: str
    target: str
    access: Literal["R", "W"]
    value: Optional[str] = None


class FrameRecord(BaseModel):
    type: Literal["start", "finish"]
    seq: int
    frame: int
    kind: OpKind
    level: int
    queue: str
    op: Optional[int] = None
    source: Literal["op", "drain"] = "op"
    steps: int = 0
    result: Optional[str] = None


class SnapshotRecord(BaseModel):
    type: Literal["snapshot"] = "snapshot"
    phase: Literal["quiescent", "final"]
    snapshot: MemorySnapshot


TRACE_RECORD = TypeAdapter(
    Annotated[Union[StepRecord, FrameRecord, SnapshotRecord], Field(discriminator="type")]
)


# ─── Invariants ───


class Property(str, Enum):
    CONSERVATION = "conservation"
    EVENTUAL_DELIVERY = "eventual_delivery"
    COMPLETED_BEFORE_VISIBLE = "completed_before_visible"
    TAIL_MONOTONICITY = "tail_monotonicity"
    HEAD_BOUNDEDNESS = "head_boundedness"
    TABLE_WRITE_ORDERING = "table_write_ordering"
    V_HEAD_PURITY = "v_head_purity"
    P_TAIL_PURITY = "p_tail_purity"
    PEEK_WRITE_FREEDOM = "peek_write_freedom"
    EMPTY_CONTRACT = "empty_contract"
    ISOLATED_FIFO = "isolated_fifo"
    CONSISTENCY = "consistency"


class InvariantFailure(BaseModel):
    property: Property
    detail: str
    seq: Optional[int] = None
    frame: Optional[int] = None


# ─── Reports ───


class ReorderEntry(BaseModel):
    node: str
    queue: str
    arrival_rank: int
    completion_rank: int
    dequeue_rank: int
    displacement: int
    arrival_displacement: int


class ReorderReport(BaseModel):
    entries: List[ReorderEntry] = Field(default_factory=list)
    max_displacement: int = 0
    max_arrival_displacement: int = 0
    histogram: Dict[str, int] = Field(default_factory=dict)
    arrival_histogram: Dict[str, int] = Field(default_factory=dict)


class ReorderSummary(BaseModel):
    max_displacement: int = 0
    max_arrival_displacement: int = 0
    histogram: Dict[str, int] = Field(default_factory=dict)
    arrival_histogram: Dict[str, int] = Field(default_factory=dict)

    def absorb(self, report: ReorderReport) -> None:
        self.max_displacement = max(self.max_displacement, report.max_displacement)
        self.max_arrival_displacement = max(self.max_arrival_displacement, report.max_arrival_displacement)
        for target, source in ((self.histogram, report.histogram), (self.arrival_histogram, report.arrival_histogram)):
            for key, value in source.items():
                target[key] = target.get(key, 0) + value
        self.histogram = dict(sorted(self.histogram.items(), key=lambda kv: int(kv[0])))
        self.arrival_histogram = dict(sorted(self.arrival_histogram.items(), key=lambda kv: int(kv[0])))


class FailureCase(BaseModel):
    schedule: List[str]
    failures: List[InvariantFailure]
    seed: Optional[int] = None
    index: Optional[int] = None


class LivelockSuspect(BaseModel):
    schedule: List[str]
    steps: int
    seed: Optional[int] = None
    index: Optional[int] = None


class RunReport(BaseModel):
    scenario: str
    schedule: List[str]
    dequeued: Dict[str, List[str]]
    drained: Dict[str, List[str]]
    quiescent_chains: Dict[str, List[str]]
    steps: int
    max_v_steps: int
    stalls_observed: int
    failures: List[InvariantFailure]
    reorder: ReorderReport


class ExplorationReport(BaseModel):
    scenario: str
    schedules_visited: int = 0
    failures: int = 0
    failure_cases: List[FailureCase] = Field(default_factory=list)
    livelock_suspects: List[LivelockSuspect] = Field(default_factory=list)
    max_v_steps: int = 0
    max_p_steps: int = 0
    stalls_observed: int = 0
    stall_witness: Optional[List[str]] = None
    isolated_frames: int = 0
    paths: Dict[str, int] = Field(default_factory=dict)
    reorder: ReorderSummary = Field(default_factory=ReorderSummary)
    digest: str = ""


class FuzzReport(BaseModel):
    scenario: str
    seed: int
    iterations: int
    failures: int = 0
    failure_cases: List[FailureCase] = Field(default_factory=list)
    livelock_suspects: List[LivelockSuspect] = Field(default_factory=list)
    max_v_steps: int = 0
    max_p_steps: int = 0
    stalls_observed: int = 0
    isolated_frames: int = 0
    paths: Dict[str, int] = Field(default_factory=dict)
    reorder: ReorderSummary = Field(default_factory=ReorderSummary)
    digest: str = ""
