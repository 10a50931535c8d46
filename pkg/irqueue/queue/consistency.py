"""Detection of the fatal queue states.

Results are authoritative only at quiescence. Called while frames are in
flight, every violation is flagged ``advisory``: the algorithm's transient
states legitimately break quiescent invariants.
"""
from __future__ import annotations

from collections import Counter
from enum import Enum
from typing import Dict, Iterable, List, Optional

from pydantic import BaseModel

from irqueue.queue.memory import NodeId, QueueId, SharedMemory


class ViolationCode(str, Enum):
    SENTINEL_SELF_LOOP = "sentinel_self_loop"
    CYCLE = "cycle"
    LOST_SENTINEL = "lost_sentinel"
    NULL_HEAD_TAIL = "null_head_tail"
    TABLE_QUEUE_WITHOUT_NODE = "table_queue_without_node"
    SHARED_NODE = "shared_node"
    MERGED_CHAIN = "merged_chain"
    TAIL_UNREACHABLE = "tail_unreachable"
    TAIL_NOT_LAST = "tail_not_last"


class Violation(BaseModel):
    code: ViolationCode
    detail: str
    queue: Optional[str] = None
    node: Optional[str] = None
    level: Optional[int] = None
    advisory: bool = False


def check_consistency(
    memory: SharedMemory,
    *,
    recycling: Iterable[QueueId] = (),
    advisory: bool = False,
) -> List[Violation]:
    """Report every fatal state present in ``memory``.

    ``recycling`` names queues whose single reader is mid-way through sentinel
    recycling; their sentinel may legitimately be unreachable.
    """
    recycling = set(recycling)
    labels = memory.arena.labels
    nexts = memory.arena.next
    violations: List[Violation] = []
    owner: Dict[NodeId, QueueId] = {}

    def report(code: ViolationCode, detail: str, **kwargs) -> None:
        violations.append(Violation(code=code, detail=detail, advisory=advisory, **kwargs))

    for queue in memory.queues.values():
        qid = queue.queue_id
        head = memory.head.get(qid)
        tail = memory.tail.get(qid)
        if head is None or tail is None:
            report(
                ViolationCode.NULL_HEAD_TAIL,
                f"{queue.name}: head={labels[head] if head is not None else None} "
                f"tail={labels[tail] if tail is not None else None}",
                queue=queue.name,
            )
            continue

        sentinel = queue.sentinel
        if nexts[sentinel] == sentinel:
            report(
                ViolationCode.SENTINEL_SELF_LOOP,
                f"{queue.name}: sentinel points to itself",
                queue=queue.name,
                node=labels[sentinel],
            )
            continue

        walk: List[NodeId] = []
        seen = set()
        node: Optional[NodeId] = head
        while node is not None:
            if node in seen:
                report(
                    ViolationCode.CYCLE,
                    f"{queue.name}: chain from head revisits {labels[node]}",
                    queue=queue.name,
                    node=labels[node],
                )
                break
            seen.add(node)
            walk.append(node)
            node = nexts[node]

        for node in walk:
            other = owner.setdefault(node, qid)
            if other != qid:
                report(
                    ViolationCode.SHARED_NODE,
                    f"{labels[node]} is reachable from {memory.queues[other].name} and {queue.name}",
                    queue=queue.name,
                    node=labels[node],
                )

        if sentinel not in seen and qid not in recycling:
            report(
                ViolationCode.LOST_SENTINEL,
                f"{queue.name}: sentinel unreachable from head",
                queue=queue.name,
                node=labels[sentinel],
            )
        if tail not in seen:
            report(
                ViolationCode.TAIL_UNREACHABLE,
                f"{queue.name}: tail {labels[tail]} unreachable from head",
                queue=queue.name,
                node=labels[tail],
            )
        elif nexts[tail] is not None:
            report(
                ViolationCode.TAIL_NOT_LAST,
                f"{queue.name}: tail {labels[tail]} is followed by {labels[nexts[tail]]}",
                queue=queue.name,
                node=labels[tail],
            )

    table = memory.table
    for level, (qid, node) in enumerate(zip(table.queue, table.node)):
        if qid is not None and node is None:
            report(
                ViolationCode.TABLE_QUEUE_WITHOUT_NODE,
                f"level {level}: queue entry without node entry",
                level=level,
            )

    indegree = Counter(successor for successor in nexts if successor is not None)
    for node, refs in sorted(indegree.items()):
        if refs > 1:
            report(
                ViolationCode.MERGED_CHAIN,
                f"{labels[node]} is referenced by {refs} nodes",
                node=labels[node],
            )
    return violations
