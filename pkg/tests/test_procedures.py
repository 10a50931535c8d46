from types import SimpleNamespace

import pytest

from irqueue.queue.frames import OpFrame, OpKind, count, dequeue, enqueue, peek
from irqueue.queue.memory import READ, build_memory
from irqueue.queue.procedures import NO_LEVEL, find_anchor, follow, previous_interrupt_level


def drive(memory, gen):
    """Run a step generator to completion, performing its accesses."""
    try:
        access = gen.send(None)
        while True:
            if access.op == READ:
                access = gen.send(memory.read(access.cell))
            else:
                memory.write(access.cell, access.value)
                access = gen.send(None)
    except StopIteration as stop:
        return stop.value


def context(memory, queue):
    return SimpleNamespace(queue=queue.queue_id, sentinel=queue.sentinel, locals={}, walk_limit=len(memory.arena))


@pytest.fixture
def setup():
    memory = build_memory(8, level_count=6)
    queue = memory.init_queue()
    nodes = {label: memory.arena.alloc(label) for label in "ABCDE"}
    return memory, queue, nodes


def test_follow(setup):
    memory, queue, n = setup
    frame = context(memory, queue)
    assert drive(memory, follow(frame, n["A"])) == n["A"]
    memory.link([n["A"], n["B"], n["C"]])
    assert drive(memory, follow(frame, n["A"])) == n["C"]


def test_previous_interrupt_level(setup):
    memory, queue, _ = setup
    other = memory.init_queue("q1")
    frame = context(memory, queue)
    assert drive(memory, previous_interrupt_level(frame, 5)) == NO_LEVEL
    memory.table.queue[1] = queue.queue_id
    assert drive(memory, previous_interrupt_level(frame, 3)) == 1
    memory.table.queue[1] = None
    memory.table.queue[2] = other.queue_id
    memory.table.queue[0] = queue.queue_id
    assert drive(memory, previous_interrupt_level(frame, 3)) == 0


def test_find_anchor_on_the_tail(setup):
    memory, queue, n = setup
    frame = context(memory, queue)
    memory.link([queue.sentinel, n["A"]])
    memory.tail[queue.queue_id] = queue.sentinel
    assert drive(memory, find_anchor(frame, 1, n["A"])) == queue.sentinel


def test_find_anchor_unlinked_node_is_none(setup):
    memory, queue, n = setup
    frame = context(memory, queue)
    memory.table.node[0] = n["A"]
    memory.table.queue[0] = queue.queue_id
    assert drive(memory, find_anchor(frame, 1, n["A"])) is None


def test_find_anchor_mid_chain_of_a_lower_level(setup):
    memory, queue, n = setup
    frame = context(memory, queue)
    # level 0 is publishing the unreachable chain B -> C -> D
    memory.link([n["B"], n["C"], n["D"]])
    memory.table.node[0] = n["B"]
    memory.table.queue[0] = queue.queue_id
    anchor = drive(memory, find_anchor(frame, 1, n["D"]))
    assert anchor == n["C"]
    assert [m for m in range(len(memory.arena)) if memory.arena.next[m] == n["D"]] == [anchor]


def test_solo_enqueue_steps_in_textual_order(setup):
    memory, queue, n = setup
    frame = OpFrame(memory, OpKind.V, 1, queue, arg_node=n["A"])
    accesses = []
    while not frame.done:
        access = frame.step()
        accesses.append((access.pc, access.cell.kind, access.op))
    assert accesses == [
        ("V.set_level_node", "ln", "W"),
        ("V.set_level_queue", "lq", "W"),
        ("previous_level.test", "lq", "R"),
        ("V.read_tail", "tail", "R"),
        ("follow.test", "next", "R"),
        ("V.link", "next", "W"),
        ("follow.test", "next", "R"),
        ("V.set_level_last", "ln", "W"),
        ("V.update_tail", "tail", "W"),
        ("V.clear_level_queue", "lq", "W"),
        ("V.clear_level_node", "ln", "W"),
    ]
    assert frame.steps == 11
    assert memory.chain(queue.sentinel) == [queue.sentinel, n["A"]]
    assert memory.tail[queue.queue_id] == n["A"]
    assert memory.table.queue == [None] * 6
    assert memory.table.node == [None] * 6


def test_frame_is_done_exactly_at_its_last_step(setup):
    memory, queue, n = setup
    frame = OpFrame(memory, OpKind.V, 0, queue, arg_node=n["A"])
    while frame.steps < 9:
        frame.step()
    assert not frame.done
    frame.step()
    assert frame.done
    with pytest.raises(RuntimeError):
        frame.step()


def test_serial_enqueues_then_dequeues(setup):
    memory, queue, n = setup
    for label in "ABC":
        enqueue(memory, queue, n[label])
    assert memory.chain(queue.sentinel) == [queue.sentinel, n["A"], n["B"], n["C"]]
    assert memory.tail[queue.queue_id] == n["C"]
    assert [dequeue(memory, queue) for _ in range(4)] == [n["A"], n["B"], n["C"], None]
    assert memory.head[queue.queue_id] == memory.tail[queue.queue_id] == queue.sentinel


def test_chain_enqueue(setup):
    memory, queue, n = setup
    memory.link([n["A"], n["B"]])
    enqueue(memory, queue, n["A"])
    assert memory.chain(queue.sentinel) == [queue.sentinel, n["A"], n["B"]]
    assert memory.tail[queue.queue_id] == n["B"]


def test_dequeue_empty_queue(setup):
    memory, queue, _ = setup
    assert dequeue(memory, queue) is None


def test_dequeue_in_front_of_the_sentinel(setup):
    memory, queue, n = setup
    memory.link([n["A"], queue.sentinel])
    memory.head[queue.queue_id] = n["A"]
    assert dequeue(memory, queue) == n["A"]
    assert memory.arena.next[n["A"]] is None
    assert dequeue(memory, queue) is None


def test_dequeue_single_real_entry_is_unavailable(setup):
    memory, queue, n = setup
    # sentinel lost behind a stall: head is a real node and the only entry
    memory.head[queue.queue_id] = memory.tail[queue.queue_id] = n["A"]
    assert dequeue(memory, queue) is None


@pytest.mark.parametrize(
    "chain, expected",
    [
        (["sentinel"], 0),
        (["sentinel", "A", "B"], 2),
        (["A", "sentinel", "B"], 2),
        (["A", "sentinel"], 1),
    ],
)
def test_peek_counts_what_dequeue_returns(setup, chain, expected):
    memory, queue, n = setup
    nodes = [queue.sentinel if label == "sentinel" else n[label] for label in chain]
    memory.link(nodes)
    memory.head[queue.queue_id], memory.tail[queue.queue_id] = nodes[0], nodes[-1]
    before = memory.state()
    assert peek(memory, queue, 8) == expected
    assert count(memory, queue) == expected
    assert memory.state() == before

    returned = 0
    while dequeue(memory, queue) is not None:
        returned += 1
    assert returned == expected


def test_peek_stops_at_n(setup):
    memory, queue, n = setup
    for label in "ABC":
        enqueue(memory, queue, n[label])
    assert peek(memory, queue, 2) == 2
    assert peek(memory, queue, 1) == 1


def test_frame_validation(setup):
    memory, queue, n = setup
    with pytest.raises(ValueError):
        OpFrame(memory, OpKind.V, 6, queue, arg_node=n["A"])
    with pytest.raises(ValueError):
        OpFrame(memory, OpKind.V, 0, queue)
    with pytest.raises(ValueError):
        OpFrame(memory, OpKind.PEEK, 0, queue, n=0)


def run_accesses(frame):
    accesses = []
    while not frame.done:
        access = frame.step()
        accesses.append(f"{access.pc} {access.cell.kind} {access.op}")
    return accesses


def state(memory, queue):
    """Chain from the head and the tail, by label."""
    def name(node):
        return "sentinel" if node == queue.sentinel else memory.arena.labels[node]

    qid = queue.queue_id
    return [name(node) for node in memory.chain(memory.head[qid])], name(memory.tail[qid])


P_LOOP_HEAD = ["P.test_head head R", "P.test_tail tail R", "P.read_head head R", "P.test_next next R", "P.check_sentinel head R"]
P_TAKE = ["P.take.read_head head R", "P.take.read_next next R", "P.take.advance_head head W", "P.take.clear_next next W"]
V_CLEAR = ["V.clear_level_queue lq W", "V.clear_level_node ln W"]


def test_dequeue_empty_steps(setup):
    memory, queue, _ = setup
    frame = OpFrame(memory, OpKind.P, 0, queue)
    assert run_accesses(frame) == ["P.test_head head R", "P.test_tail tail R"]
    assert frame.result is None
    assert frame.locals["empty"] == (queue.sentinel, queue.sentinel, None)


def test_dequeue_take_steps(setup):
    memory, queue, n = setup
    memory.link([n["A"], queue.sentinel])
    memory.head[queue.queue_id] = n["A"]
    frame = OpFrame(memory, OpKind.P, 0, queue)
    assert run_accesses(frame) == P_LOOP_HEAD + P_TAKE
    assert frame.result == n["A"]
    assert state(memory, queue) == (["sentinel"], "sentinel")


def test_dequeue_recycle_steps(setup):
    memory, queue, n = setup
    memory.link([queue.sentinel, n["A"]])
    memory.tail[queue.queue_id] = n["A"]
    frame = OpFrame(memory, OpKind.P, 0, queue)
    recycle = [
        "P.recycle.read_head head R",
        "P.recycle.read_next next R",
        "P.recycle.advance_head head W",
        "P.recycle.clear_sentinel next W",
    ]
    # the sentinel goes back in through V at level 0, which has no table to scan
    inline_enqueue = [
        "V.set_level_node ln W",
        "V.set_level_queue lq W",
        "V.read_tail tail R",
        "follow.test next R",
        "V.link next W",
        "follow.test next R",
        "V.set_level_last ln W",
        "V.update_tail tail W",
    ] + V_CLEAR
    assert run_accesses(frame) == P_LOOP_HEAD + recycle + inline_enqueue + P_LOOP_HEAD + P_TAKE
    assert frame.steps == 28
    assert frame.result == n["A"]
    assert frame.locals["recycles"] == 1
    assert state(memory, queue) == (["sentinel"], "sentinel")


def test_stalled_enqueue_steps(setup):
    memory, queue, n = setup
    # level 0 has published E but not linked it yet
    memory.table.queue[0] = queue.queue_id
    memory.table.node[0] = n["E"]
    frame = OpFrame(memory, OpKind.V, 1, queue, arg_node=n["B"])
    assert run_accesses(frame) == [
        "V.set_level_node ln W",
        "V.set_level_queue lq W",
        "previous_level.test lq R",
        "V.prev_node ln R",
        "V.prev_is_tail tail R",
        "find_anchor.tail tail R",
        "find_anchor.test next R",
        "find_anchor.advance next R",
        "V.stalled.chain next R",
        "V.stalled.link next W",
        "follow.test next R",
        "V.stalled.relink next W",
    ] + V_CLEAR
    assert frame.locals["anchor"] is None
    assert memory.chain(n["E"]) == [n["E"], n["B"]]
    assert state(memory, queue) == (["sentinel"], "sentinel")


def test_anchored_enqueue_steps(setup):
    memory, queue, n = setup
    # level 0 linked E behind the sentinel but has not moved the tail
    memory.table.queue[0] = queue.queue_id
    memory.table.node[0] = n["E"]
    memory.link([queue.sentinel, n["E"]])
    frame = OpFrame(memory, OpKind.V, 1, queue, arg_node=n["B"])
    assert run_accesses(frame) == [
        "V.set_level_node ln W",
        "V.set_level_queue lq W",
        "previous_level.test lq R",
        "V.prev_node ln R",
        "V.prev_is_tail tail R",
        "find_anchor.tail tail R",
        "find_anchor.test next R",
        "V.anchored.chain next R",
        "V.anchored.link next W",
        "follow.test next R",
        "V.anchored.relink next W",
        "V.anchored.tail tail R",
        "V.anchored.set_level_last ln W",
        "V.anchored.update_tail tail W",
    ] + V_CLEAR
    assert frame.locals["anchor"] == queue.sentinel
    assert state(memory, queue) == (["sentinel", "B", "E"], "B")


def test_enqueue_behind_a_lower_level_that_is_the_tail(setup):
    memory, queue, n = setup
    # level 0 finished linking and moved the tail, its entries still set
    memory.table.queue[0] = queue.queue_id
    memory.table.node[0] = n["E"]
    memory.link([queue.sentinel, n["E"]])
    memory.tail[queue.queue_id] = n["E"]
    frame = OpFrame(memory, OpKind.V, 1, queue, arg_node=n["B"])
    assert run_accesses(frame) == [
        "V.set_level_node ln W",
        "V.set_level_queue lq W",
        "previous_level.test lq R",
        "V.prev_node ln R",
        "V.prev_is_tail tail R",
        "V.clear_prev_queue lq W",
        "V.read_tail tail R",
        "follow.test next R",
        "V.link next W",
        "follow.test next R",
        "V.set_level_last ln W",
        "V.update_tail tail W",
    ] + V_CLEAR
    assert memory.table.queue[0] is None
    assert memory.table.node[0] == n["E"]
    assert state(memory, queue) == (["sentinel", "E", "B"], "B")


def test_follow_steps_over_a_chain(setup):
    memory, queue, n = setup
    memory.link([n["A"], n["B"], n["C"]])
    gen = follow(context(memory, queue), n["A"])
    seen = []
    try:
        access = gen.send(None)
        while True:
            seen.append((access.pc, memory.arena.labels[access.cell.key]))
            access = gen.send(memory.read(access.cell))
    except StopIteration as stop:
        assert stop.value == n["C"]
    assert seen == [
        ("follow.test", "A"),
        ("follow.advance", "A"),
        ("follow.test", "B"),
        ("follow.advance", "B"),
        ("follow.test", "C"),
    ]


def test_find_anchor_steps_along_a_level_chain(setup):
    memory, queue, n = setup
    memory.link([n["B"], n["C"], n["D"]])
    memory.table.node[0] = n["B"]
    memory.table.queue[0] = queue.queue_id
    gen = find_anchor(context(memory, queue), 1, n["D"])
    seen = []
    try:
        access = gen.send(None)
        while True:
            seen.append(f"{access.pc} {access.cell.kind} {access.op}")
            access = gen.send(memory.read(access.cell))
    except StopIteration as stop:
        assert stop.value == n["C"]
    assert seen == [
        "previous_level.test lq R",
        "find_anchor.level_node ln R",
        "find_anchor.test next R",
        "find_anchor.advance next R",
        "find_anchor.test next R",
    ]


def test_serial_queue_states(setup):
    memory, queue, n = setup
    expected = [
        (["sentinel", "A"], "A"),
        (["sentinel", "A", "B"], "B"),
        (["sentinel", "A", "B", "C"], "C"),
    ]
    for label, after in zip("ABC", expected):
        enqueue(memory, queue, n[label])
        assert state(memory, queue) == after

    frame = OpFrame(memory, OpKind.P, 0, queue)
    while not (frame.locals.get("recycles") == 1 and not frame.recycling):
        frame.step()
    # the sentinel has been recycled behind C; A is not taken yet
    assert frame.pc == "P.test_head"
    assert state(memory, queue) == (["A", "B", "C", "sentinel"], "sentinel")
    assert frame.run() == n["A"]
    assert state(memory, queue) == (["B", "C", "sentinel"], "sentinel")

    assert dequeue(memory, queue) == n["B"]
    assert state(memory, queue) == (["C", "sentinel"], "sentinel")
    assert dequeue(memory, queue) == n["C"]
    assert state(memory, queue) == (["sentinel"], "sentinel")
    assert dequeue(memory, queue) is None
