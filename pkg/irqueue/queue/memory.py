"""Shared-memory model: node arena, per-level table and queue head/tail cells.

A cell is one word the algorithm may touch concurrently: a node's ``next``, a
queue's ``head`` or ``tail``, or one side of a level-table entry. Nodes are
arena indices; ``None`` is the null reference.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

NodeId = int
QueueId = int

NEXT = "next"
HEAD = "head"
TAIL = "tail"
LEVEL_QUEUE = "lq"
LEVEL_NODE = "ln"

READ = "R"
WRITE = "W"

DEFAULT_LEVEL_COUNT = 16


class ArenaExhausted(RuntimeError):
    pass


class Cell(NamedTuple):
    kind: str
    key: int

    @classmethod
    def next(cls, node: NodeId) -> "Cell":
        return cls(NEXT, node)

    @classmethod
    def head(cls, queue: QueueId) -> "Cell":
        return cls(HEAD, queue)

    @classmethod
    def tail(cls, queue: QueueId) -> "Cell":
        return cls(TAIL, queue)

    @classmethod
    def level_queue(cls, level: int) -> "Cell":
        return cls(LEVEL_QUEUE, level)

    @classmethod
    def level_node(cls, level: int) -> "Cell":
        return cls(LEVEL_NODE, level)


class Access(NamedTuple):
    """One atomic step: ``value`` is the value written, or the value read once performed."""

    pc: str
    cell: Cell
    op: str
    value: Optional[int]


class Arena:
    """Fixed pool of nodes. Embedded nodes (a queue acting as its own sentinel)
    live past the allocatable capacity and are never counted against it."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("arena capacity must be non-negative")
        self.capacity = capacity
        self.allocated = 0
        self.labels: List[str] = []
        self.next: List[Optional[NodeId]] = []
        self._by_label: Dict[str, NodeId] = {}

    def __len__(self) -> int:
        return len(self.labels)

    def alloc(self, label: str) -> NodeId:
        if self.allocated >= self.capacity:
            raise ArenaExhausted(f"arena exhausted ({self.capacity} nodes) allocating {label!r}")
        self.allocated += 1
        return self._add(label)

    def embed(self, label: str) -> NodeId:
        return self._add(label)

    def _add(self, label: str) -> NodeId:
        if label in self._by_label:
            raise ValueError(f"duplicate node label {label!r}")
        node = len(self.labels)
        self.labels.append(label)
        self.next.append(None)
        self._by_label[label] = node
        return node

    def node(self, label: str) -> NodeId:
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"unknown node label {label!r}") from None

    def label(self, node: Optional[NodeId]) -> Optional[str]:
        return None if node is None else self.labels[node]


class LevelTable:
    """The global interrupt level table: a (queue, node) pair per level."""

    def __init__(self, level_count: int = DEFAULT_LEVEL_COUNT):
        if level_count < 1:
            raise ValueError("level_count must be at least 1")
        self.queue: List[Optional[QueueId]] = [None] * level_count
        self.node: List[Optional[NodeId]] = [None] * level_count

    @property
    def level_count(self) -> int:
        return len(self.queue)


@dataclass(frozen=True)
class QueueState:
    queue_id: QueueId
    name: str
    sentinel: NodeId
    self_sentinel: bool = False


class SharedMemory:
    """Every preemptible cell, addressed by :class:`Cell`.

    Writes are visible to the next read immediately; nothing is buffered or
    reordered.
    """

    def __init__(self, arena: Arena, table: LevelTable):
        self.arena = arena
        self.table = table
        self.queues: Dict[QueueId, QueueState] = {}
        self.head: Dict[QueueId, Optional[NodeId]] = {}
        self.tail: Dict[QueueId, Optional[NodeId]] = {}
        self._cells: Dict[str, Any] = {
            NEXT: arena.next,
            HEAD: self.head,
            TAIL: self.tail,
            LEVEL_QUEUE: table.queue,
            LEVEL_NODE: table.node,
        }

    @property
    def level_count(self) -> int:
        return self.table.level_count

    def read(self, cell: Cell) -> Optional[int]:
        return self._cells[cell.kind][cell.key]

    def write(self, cell: Cell, value: Optional[int]) -> Optional[int]:
        cells = self._cells[cell.kind]
        prior = cells[cell.key]
        cells[cell.key] = value
        return prior

    def init_queue(self, name: Optional[str] = None, use_self_sentinel: bool = False) -> QueueState:
        queue_id = len(self.queues)
        name = name or f"q{queue_id}"
        if any(q.name == name for q in self.queues.values()):
            raise ValueError(f"duplicate queue name {name!r}")
        label = f"{name}.sentinel"
        sentinel = self.arena.embed(label) if use_self_sentinel else self.arena.alloc(label)
        queue = QueueState(queue_id=queue_id, name=name, sentinel=sentinel, self_sentinel=use_self_sentinel)
        self.queues[queue_id] = queue
        self.arena.next[sentinel] = None
        self.head[queue_id] = sentinel
        self.tail[queue_id] = sentinel
        return queue

    # Helpers below bypass the step model; setup and checking only.

    def link(self, nodes: List[NodeId]) -> None:
        for node, successor in zip(nodes, nodes[1:]):
            self.arena.next[node] = successor
        if nodes:
            self.arena.next[nodes[-1]] = None

    def chain(self, start: Optional[NodeId], limit: Optional[int] = None) -> List[NodeId]:
        """Nodes from ``start`` along ``next``; stops at null, a repeat, or ``limit``."""
        limit = len(self.arena) if limit is None else limit
        nodes: List[NodeId] = []
        seen = set()
        node = start
        while node is not None and node not in seen and len(nodes) < limit:
            seen.add(node)
            nodes.append(node)
            node = self.arena.next[node]
        return nodes

    def reachable(self, start: Optional[NodeId], target: NodeId) -> bool:
        return target in self.chain(start)

    def state(self) -> Tuple[Any, ...]:
        return (
            tuple(self.arena.next),
            tuple(sorted(self.head.items())),
            tuple(sorted(self.tail.items())),
            tuple(self.table.queue),
            tuple(self.table.node),
        )

    def describe(self, cell: Cell) -> str:
        if cell.kind == NEXT:
            return self.arena.labels[cell.key]
        if cell.kind in (HEAD, TAIL):
            return self.queues[cell.key].name
        return str(cell.key)

    def render(self, cell: Cell, value: Optional[int]) -> Optional[str]:
        if value is None:
            return None
        if cell.kind == LEVEL_QUEUE:
            return self.queues[value].name
        return self.arena.labels[value]

    def snapshot(self) -> Dict[str, Any]:
        labels = self.arena.labels
        return {
            "nodes": {labels[n]: self.arena.label(nxt) for n, nxt in enumerate(self.arena.next)},
            "queues": {
                q.name: {
                    "head": self.arena.label(self.head[q.queue_id]),
                    "tail": self.arena.label(self.tail[q.queue_id]),
                }
                for q in self.queues.values()
            },
            "table": [
                {
                    "queue": None if qid is None else self.queues[qid].name,
                    "node": self.arena.label(node),
                }
                for qid, node in zip(self.table.queue, self.table.node)
            ],
        }


def build_memory(capacity: int, level_count: int = DEFAULT_LEVEL_COUNT) -> SharedMemory:
    return SharedMemory(Arena(capacity), LevelTable(level_count))
