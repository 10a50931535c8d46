from __future__ import annotations

from enum import Enum
from typing import Any, Dict, Optional

from irqueue.queue import procedures
from irqueue.queue.memory import READ, Access, NodeId, QueueState, SharedMemory


class OpKind(str, Enum):
    V = "V"
    P = "P"
    PEEK = "PEEK"


class OpFrame:
    """A suspended V, P or peek execution.

    ``pc`` names the step the frame performs next. ``step()`` executes exactly
    one shared-memory access; the frame is ``done`` as soon as its last access
    has executed.
    """

    def __init__(
        self,
        memory: SharedMemory,
        kind: OpKind,
        level: int,
        queue: QueueState,
        arg_node: Optional[NodeId] = None,
        n: Optional[int] = None,
        frame_id: int = 0,
    ):
        if not 0 <= level < memory.level_count:
            raise ValueError(f"level {level} outside [0, {memory.level_count})")
        if kind is OpKind.V and arg_node is None:
            raise ValueError("V needs a node to enqueue")
        if kind is OpKind.PEEK and n is not None and n < 1:
            raise ValueError("peek_n needs a positive n")
        self.memory = memory
        self.frame_id = frame_id
        self.kind = OpKind(kind)
        self.level = level
        self.queue = queue.queue_id
        self.sentinel = queue.sentinel
        self.arg_node = arg_node
        self.walk_limit = len(memory.arena)
        self.locals: Dict[str, Any] = {}
        self.steps = 0
        self.result: Optional[int] = None
        self.done = False

        if self.kind is OpKind.V:
            self._gen = procedures.v_enqueue(self, arg_node)
        elif self.kind is OpKind.P:
            self._gen = procedures.p_dequeue(self)
        else:
            self._gen = procedures.peek_n(self, n)
        self._pending: Optional[Access] = None
        self._resume(None)

    @property
    def pc(self) -> Optional[str]:
        return None if self._pending is None else self._pending.pc

    @property
    def recycling(self) -> bool:
        return bool(self.locals.get("recycling"))

    def _resume(self, value: Optional[int]) -> None:
        try:
            self._pending = self._gen.send(value)
        except StopIteration as stop:
            self._pending = None
            self.result = stop.value
            self.done = True

    def step(self) -> Access:
        """Perform the pending access; returns it with the value read or written."""
        if self._pending is None:
            raise RuntimeError(f"frame {self.frame_id} already complete")
        access = self._pending
        if access.op == READ:
            value = self.memory.read(access.cell)
            access = access._replace(value=value)
        else:
            self.memory.write(access.cell, access.value)
            value = None
        self.steps += 1
        self._resume(value)
        return access

    def run(self, limit: Optional[int] = None) -> Optional[int]:
        """Run to completion without preemption and return the result."""
        while not self.done:
            if limit is not None and self.steps >= limit:
                raise RuntimeError(f"frame {self.frame_id} exceeded {limit} steps")
            self.step()
        return self.result

    def __repr__(self) -> str:
        return f"OpFrame({self.kind.value}@{self.level} q{self.queue} pc={self.pc} steps={self.steps})"


def enqueue(memory: SharedMemory, queue: QueueState, node: NodeId, level: int = 0) -> None:
    OpFrame(memory, OpKind.V, level, queue, arg_node=node).run()


def dequeue(memory: SharedMemory, queue: QueueState) -> Optional[NodeId]:
    return OpFrame(memory, OpKind.P, 0, queue).run()


def peek(memory: SharedMemory, queue: QueueState, n: int, level: int = 0) -> int:
    return OpFrame(memory, OpKind.PEEK, level, queue, n=n).run() or 0


def count(memory: SharedMemory, queue: QueueState, level: int = 0) -> int:
    return OpFrame(memory, OpKind.PEEK, level, queue).run() or 0
