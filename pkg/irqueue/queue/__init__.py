"""The interrupt-reentrant multiwriter/single-reader queue over an explicit
shared-memory model.

Every procedure is a resumable frame whose shared-memory accesses are single
atomic steps. The model is a single logical CPU: frames are advanced by one
driver, one step at a time, and a higher interrupt level always runs to
completion before a lower one resumes. It is not safe for true parallel
execution across CPUs and makes no attempt to model weak memory ordering.
"""
from irqueue.queue.consistency import Violation, check_consistency
from irqueue.queue.frames import OpFrame, OpKind, dequeue, enqueue, peek, count
from irqueue.queue.memory import (
    Arena,
    ArenaExhausted,
    Cell,
    LevelTable,
    QueueState,
    SharedMemory,
    build_memory,
)

__all__ = [
    "Arena",
    "ArenaExhausted",
    "Cell",
    "LevelTable",
    "OpFrame",
    "OpKind",
    "QueueState",
    "SharedMemory",
    "Violation",
    "build_memory",
    "check_consistency",
    "count",
    "dequeue",
    "enqueue",
    "peek",
]
