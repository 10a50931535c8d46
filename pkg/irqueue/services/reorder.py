from __future__ import annotations

from collections import Counter
from typing import Dict, List

from irqueue.models.schemas import ReorderEntry, ReorderReport
from irqueue.queue.frames import OpKind
from irqueue.queue.memory import NodeId
from irqueue.services.driver import Trace, UsageError


def _histogram(values: List[int]) -> Dict[str, int]:
    counts = Counter(abs(v) for v in values)
    return {str(k): counts[k] for k in sorted(counts)}


def measure_reorder(trace: Trace) -> ReorderReport:
    """Rank every enqueued node by arrival, by enqueue completion and by dequeue.

    Arrival order is frame start order, completion order is frame finish order;
    nodes of one chain keep their chain order and pre-built queue contents rank
    first. Displacement is dequeue rank minus the basis rank, per queue.
    """
    entries: List[ReorderEntry] = []
    for qid, queue in trace.memory.queues.items():
        enqueues = [f for f in trace.frames if f.kind is OpKind.V and f.source == "op" and f.queue == qid]
        initial = trace.init_nodes[qid]
        arrival: List[NodeId] = initial + [n for f in sorted(enqueues, key=lambda f: f.start_seq) for n in f.nodes]
        completion: List[NodeId] = initial + [
            n for f in sorted(enqueues, key=lambda f: f.finish_seq) for n in f.nodes
        ]
        order = trace.dequeue_order(qid)
        if sorted(order) != sorted(arrival):
            missing = sorted(set(trace.labels(arrival)) - set(trace.labels(order)))
            raise UsageError(f"{queue.name}: trace is not drained (missing {missing})")

        arrival_rank = {n: i for i, n in enumerate(arrival)}
        completion_rank = {n: i for i, n in enumerate(completion)}
        for rank, node in enumerate(order):
            entries.append(
                ReorderEntry(
                    node=trace.label(node),
                    queue=queue.name,
                    arrival_rank=arrival_rank[node],
                    completion_rank=completion_rank[node],
                    dequeue_rank=rank,
                    displacement=rank - completion_rank[node],
                    arrival_displacement=rank - arrival_rank[node],
                )
            )

    displacements = [e.displacement for e in entries]
    arrivals = [e.arrival_displacement for e in entries]
    return ReorderReport(
        entries=entries,
        max_displacement=max((abs(d) for d in displacements), default=0),
        max_arrival_displacement=max((abs(d) for d in arrivals), default=0),
        histogram=_histogram(displacements),
        arrival_histogram=_histogram(arrivals),
    )
