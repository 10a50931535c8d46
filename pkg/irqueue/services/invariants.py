from __future__ import annotations

from collections import Counter
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

from irqueue.models.schemas import InvariantFailure, Property
from irqueue.queue.consistency import check_consistency
from irqueue.queue.frames import OpFrame, OpKind
from irqueue.queue.memory import HEAD, LEVEL_NODE, LEVEL_QUEUE, TAIL, WRITE, Access, NodeId, QueueId

if TYPE_CHECKING:
    from irqueue.services.driver import Driver, FrameInfo

_NOT_V = ("P.", "peek.")


class InvariantMonitor:
    def __init__(self, driver: "Driver"):
        self.driver = driver
        self.memory = driver.memory
        self.failures: List[InvariantFailure] = []
        self.isolated_frames = 0
        self._head: Dict[QueueId, Optional[NodeId]] = dict(self.memory.head)
        self._tail: Dict[QueueId, Optional[NodeId]] = dict(self.memory.tail)
        # (P frame, recycle number) -> [first seq, last seq] of its inline V
        self._recycles: Dict[Tuple[int, int], List[int]] = {}
        self._recycle_queue: Dict[Tuple[int, int], QueueId] = {}

    def fail(self, prop: Property, detail: str, seq: Optional[int] = None, frame: Optional[int] = None) -> None:
        self.failures.append(InvariantFailure(property=prop, detail=detail, seq=seq, frame=frame))

    # ─── per step ───

    def on_step(self, seq: int, frame: OpFrame, info: "FrameInfo", access: Access) -> None:
        cell = access.cell
        in_v = not access.pc.startswith(_NOT_V)
        writes = access.op == WRITE

        if frame.kind is OpKind.PEEK and writes:
            self.fail(Property.PEEK_WRITE_FREEDOM, f"peek wrote {cell.kind}[{cell.key}]", seq, frame.frame_id)

        if in_v and frame.kind is OpKind.P:
            key = (frame.frame_id, frame.locals.get("recycles", 0))
            span = self._recycles.setdefault(key, [seq, seq])
            span[1] = seq
            self._recycle_queue[key] = frame.queue

        if cell.kind == HEAD:
            if in_v:
                self.fail(Property.V_HEAD_PURITY, f"{access.pc} touched the head", seq, frame.frame_id)
            if writes:
                if self._head[cell.key] == frame.locals.get("observed_tail"):
                    self.fail(
                        Property.HEAD_BOUNDEDNESS,
                        f"{access.pc} advanced the head past the tail it observed",
                        seq,
                        frame.frame_id,
                    )
                self._head[cell.key] = access.value
        elif cell.kind == TAIL and writes:
            if not in_v:
                self.fail(Property.P_TAIL_PURITY, f"{access.pc} wrote the tail", seq, frame.frame_id)
            old = self._tail[cell.key]
            if access.value != old and not self.memory.reachable(old, access.value):
                self.fail(
                    Property.TAIL_MONOTONICITY,
                    f"tail moved from {self.memory.arena.label(old)} to "
                    f"{self.memory.arena.label(access.value)}, which is not chained from it",
                    seq,
                    frame.frame_id,
                )
            self._tail[cell.key] = access.value
        elif writes and cell.kind in (LEVEL_QUEUE, LEVEL_NODE):
            table = self.memory.table
            if table.queue[cell.key] is not None and table.node[cell.key] is None:
                self.fail(
                    Property.TABLE_WRITE_ORDERING,
                    f"level {cell.key} has a queue entry without a node entry",
                    seq,
                    frame.frame_id,
                )

    def on_finish(self, frame: OpFrame, info: "FrameInfo") -> None:
        if frame.kind is not OpKind.P:
            return
        labels = self.memory.arena.labels
        if frame.result is None:
            observed = frame.locals.get("empty")
            if observed is None or not (observed[0] == observed[1] or observed[2] is None):
                self.fail(
                    Property.EMPTY_CONTRACT,
                    "P returned null although head != tail and head.next != null",
                    info.finish_seq,
                    frame.frame_id,
                )
            return
        node = frame.result
        if node == frame.sentinel:
            self.fail(Property.CONSERVATION, "P returned the sentinel", info.finish_seq, frame.frame_id)
            return
        op_idx = self.driver.node_op.get(node)
        if op_idx is not None:
            owner = self.driver.op_frames.get(op_idx)
            if owner is None or not owner.done:
                self.fail(
                    Property.COMPLETED_BEFORE_VISIBLE,
                    f"P returned {labels[node]} before its enqueue completed",
                    info.finish_seq,
                    frame.frame_id,
                )

    # ─── quiescence ───

    def _consistency(self, phase: str) -> None:
        for violation in check_consistency(self.memory):
            self.fail(Property.CONSISTENCY, f"{phase}: {violation.code.value}: {violation.detail}")

    def on_quiescent(self) -> None:
        self._consistency("quiescent")

    def on_drained(self) -> None:
        self._consistency("drained")
        driver = self.driver
        labels = self.memory.arena.labels
        for queue in driver.queues.values():
            qid = queue.queue_id
            enqueued = list(driver.init_nodes[qid])
            for idx, op in enumerate(driver.scenario.ops):
                if op.kind is OpKind.V and driver.queues[op.queue].queue_id == qid:
                    enqueued.extend(driver.op_nodes[idx])
            delivered = driver.dequeued[qid] + driver.drained[qid]
            remaining = [n for n in self.memory.chain(self.memory.head[qid]) if n != queue.sentinel]
            if Counter(enqueued) != Counter(delivered) + Counter(remaining):
                self.fail(
                    Property.CONSERVATION,
                    f"{queue.name}: enqueued {sorted(labels[n] for n in enqueued)} but delivered "
                    f"{[labels[n] for n in delivered]} with {[labels[n] for n in remaining]} left",
                )
            head, tail = self.memory.head[qid], self.memory.tail[qid]
            if remaining or Counter(delivered) != Counter(enqueued) or not head == tail == queue.sentinel:
                self.fail(
                    Property.EVENTUAL_DELIVERY,
                    f"{queue.name}: drain left head={self.memory.arena.label(head)} "
                    f"tail={self.memory.arena.label(tail)} remaining={[labels[n] for n in remaining]}",
                )
        self._check_isolated_fifo()

    def _check_isolated_fifo(self) -> None:
        driver = self.driver
        labels = self.memory.arena.labels
        enqueues = [f for f in driver.frames if f.kind is OpKind.V and f.source == "op"]
        spans: List[Tuple[int, int, QueueId, object]] = [
            (f.start_seq, f.finish_seq, f.queue, ("frame", f.frame_id)) for f in enqueues
        ]
        spans.extend(
            (first, last, self._recycle_queue[key], ("recycle", key)) for key, (first, last) in self._recycles.items()
        )
        for frame in enqueues:
            isolated = not any(
                queue == frame.queue and owner != ("frame", frame.frame_id) and first <= frame.finish_seq and last >= frame.start_seq
                for first, last, queue, owner in spans
            )
            if not isolated:
                continue
            self.isolated_frames += 1
            order = driver.dequeued[frame.queue] + driver.drained[frame.queue]
            rank = {node: idx for idx, node in enumerate(order)}
            earlier = list(driver.init_nodes[frame.queue])
            for other in enqueues:
                if other.queue == frame.queue and other.finish_seq < frame.start_seq:
                    earlier.extend(other.nodes)
            ours = [rank[n] for n in frame.nodes if n in rank]
            theirs = [(rank[n], n) for n in earlier if n in rank]
            if ours and theirs and max(theirs)[0] > min(ours):
                self.fail(
                    Property.ISOLATED_FIFO,
                    f"{labels[max(theirs)[1]]} completed before isolated frame {frame.frame_id} "
                    f"({','.join(labels[n] for n in frame.nodes)}) but was dequeued after it",
                    frame=frame.frame_id,
                )
