"""V, P and their helpers as step generators.

Each generator yields one :class:`Access` per shared-cell touch (reads carry
``None`` and receive the value read through ``send``) and returns the
procedure's result. Every textual occurrence of a shared cell is one step;
locals are private to the frame and never preemption-visible.
"""
from __future__ import annotations

from typing import TYPE_CHECKING, Generator, Optional

from irqueue.queue.memory import READ, WRITE, Access, Cell, NodeId

if TYPE_CHECKING:
    from irqueue.queue.frames import OpFrame

Steps = Generator[Access, Optional[int], Optional[int]]

NO_LEVEL = -1

# Steps that commit to one branch of V or P; counted per run.
V_PATHS = ("V.read_tail", "V.stalled.link", "V.anchored.link", "V.clear_prev_queue")
P_EMPTY = "P.empty"
P_PATHS = (P_EMPTY, "P.take.advance_head", "P.recycle.advance_head")
PATH_PCS = frozenset(V_PATHS + P_PATHS)


def _read(pc: str, cell: Cell) -> Steps:
    value = yield Access(pc, cell, READ, None)
    return value


def _write(pc: str, cell: Cell, value: Optional[int]) -> Steps:
    yield Access(pc, cell, WRITE, value)
    return None


def follow(frame: "OpFrame", chain: NodeId) -> Steps:
    # follow a chain to its last node, which may just be itself
    while (yield from _read("follow.test", Cell.next(chain))) is not None:
        successor = yield from _read("follow.advance", Cell.next(chain))
        if successor is None:
            break
        chain = successor
    return chain


def previous_interrupt_level(frame: "OpFrame", level: int) -> Steps:
    # are there any lower interrupt levels that were also working on the same queue?
    level -= 1
    while level >= 0:
        if (yield from _read("previous_level.test", Cell.level_queue(level))) == frame.queue:
            return level
        level -= 1
    return NO_LEVEL


def find_anchor(frame: "OpFrame", level: int, node: NodeId) -> Steps:
    # which node (reachable from the level chains or queue tail) references a given node?
    while True:
        level = yield from previous_interrupt_level(frame, level)
        if level < 0:
            chain = yield from _read("find_anchor.tail", Cell.tail(frame.queue))
        else:
            chain = yield from _read("find_anchor.level_node", Cell.level_node(level))
        while chain is not None:
            if (yield from _read("find_anchor.test", Cell.next(chain))) == node:
                return chain
            chain = yield from _read("find_anchor.advance", Cell.next(chain))
        if level < 0:
            return None


def v_enqueue(frame: "OpFrame", node: NodeId) -> Steps:
    """Enqueue the chain starting at ``node`` (put, write)."""
    level = frame.level
    queue = frame.queue
    scope = frame.locals

    yield from _write("V.set_level_node", Cell.level_node(level), node)
    yield from _write("V.set_level_queue", Cell.level_queue(level), queue)
    # interrupts now append to our level; the table can be examined in peace
    prev_level = yield from previous_interrupt_level(frame, level)
    prev = None
    while prev_level != NO_LEVEL:
        scope["prev_level"] = prev_level
        prev = yield from _read("V.prev_node", Cell.level_node(prev_level))
        scope["prev"] = prev
        if (yield from _read("V.prev_is_tail", Cell.tail(queue))) == prev:
            # clear the queue entry of that level, but not its node
            yield from _write("V.clear_prev_queue", Cell.level_queue(prev_level), None)
            prev_level = yield from previous_interrupt_level(frame, prev_level)
        else:
            break
    scope["prev_level"] = prev_level

    if prev_level == NO_LEVEL:
        # no lower level is active: catch the tail and link ourselves to its end
        tail = yield from _read("V.read_tail", Cell.tail(queue))
        end = yield from follow(frame, tail)
        yield from _write("V.link", Cell.next(end), node)
        last = yield from follow(frame, node)
        scope["last"] = last
        yield from _write("V.set_level_last", Cell.level_node(level), last)
        yield from _write("V.update_tail", Cell.tail(queue), last)
    else:
        anchor = yield from find_anchor(frame, prev_level, prev)
        scope["anchor"] = anchor
        if anchor is None:
            # stalled: splice in front of the lower level's chain
            chain = yield from _read("V.stalled.chain", Cell.next(prev))
            scope["chain"] = chain
            yield from _write("V.stalled.link", Cell.next(prev), node)
            last = yield from follow(frame, node)
            scope["last"] = last
            yield from _write("V.stalled.relink", Cell.next(last), chain)
            # the lower level's continuation will catch our nodes
        else:
            # anchored: replace the chain following the anchor node
            chain = yield from _read("V.anchored.chain", Cell.next(anchor))
            scope["chain"] = chain
            yield from _write("V.anchored.link", Cell.next(anchor), node)
            last = yield from follow(frame, node)
            scope["last"] = last
            yield from _write("V.anchored.relink", Cell.next(last), chain)
            if anchor == (yield from _read("V.anchored.tail", Cell.tail(queue))):
                yield from _write("V.anchored.set_level_last", Cell.level_node(level), last)
                yield from _write("V.anchored.update_tail", Cell.tail(queue), last)

    # the tail may move past us while the entries are cleared
    yield from _write("V.clear_level_queue", Cell.level_queue(level), None)
    yield from _write("V.clear_level_node", Cell.level_node(level), None)
    return None


def p_dequeue(frame: "OpFrame") -> Steps:
    """Dequeue one node (get, read); ``None`` when only one entry is visible."""
    queue = frame.queue
    sentinel = frame.sentinel
    scope = frame.locals
    head_cell = Cell.head(queue)

    while True:
        # the last queue entry can never be removed
        head = yield from _read("P.test_head", head_cell)
        tail = yield from _read("P.test_tail", Cell.tail(queue))
        scope["observed_tail"] = tail
        if head == tail:
            scope["empty"] = (head, tail, None)
            return None
        head = yield from _read("P.read_head", head_cell)
        successor = yield from _read("P.test_next", Cell.next(head))
        if successor is None:
            scope["empty"] = (head, tail, successor)
            return None
        if (yield from _read("P.check_sentinel", head_cell)) == sentinel:
            head = yield from _read("P.recycle.read_head", head_cell)
            successor = yield from _read("P.recycle.read_next", Cell.next(head))
            yield from _write("P.recycle.advance_head", head_cell, successor)
            yield from _write("P.recycle.clear_sentinel", Cell.next(sentinel), None)
            scope["recycling"] = True
            scope["recycles"] = scope.get("recycles", 0) + 1
            yield from v_enqueue(frame, sentinel)
            scope["recycling"] = False
        else:
            node = yield from _read("P.take.read_head", head_cell)
            scope["node"] = node
            successor = yield from _read("P.take.read_next", Cell.next(node))
            yield from _write("P.take.advance_head", head_cell, successor)
            yield from _write("P.take.clear_next", Cell.next(node), None)
            return node


def peek_n(frame: "OpFrame", n: Optional[int]) -> Steps:
    """Count available non-sentinel nodes, up to ``n``, without writing anything.

    The sentinel is skipped, never recycled. A non-sentinel tail counts only
    once the walk has passed the sentinel: otherwise it is the single entry P
    refuses to remove.
    """
    sentinel = frame.sentinel
    node = yield from _read("peek.read_head", Cell.head(frame.queue))
    tail = yield from _read("peek.read_tail", Cell.tail(frame.queue))
    count = 0
    passed_sentinel = False
    hops = 0
    while node is not None and (n is None or count < n):
        if node == sentinel:
            passed_sentinel = True
        elif node != tail or passed_sentinel:
            count += 1
        if node == tail or hops >= frame.walk_limit:
            break
        node = yield from _read("peek.advance", Cell.next(node))
        hops += 1
    return count
