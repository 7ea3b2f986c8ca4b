"""Exhaustive breadth-first exploration of game configurations.

States are stored as (robot, diff) where diff is the symmetric difference
between the current box set and the start configuration's.  Thickened
all-movable gadgets have thousands of boxes of which only a handful ever
move, so the diff form keeps both memory and hashing cheap.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field

from .catalog import GadgetDef
from .core import Cell, Level, Move, State, Variant, fast_moves, with_robot

DEFAULT_CAP = 10**6

NodeKey = tuple[Cell, frozenset]


class CapExceeded(RuntimeError):
    """The state cap was reached before the question was decided."""


@dataclass
class TransitionSystem:
    """BFS closure of the legal-move relation from one start state."""

    level: Level
    variant: Variant
    base_boxes: frozenset[Cell]
    nodes: list[NodeKey] = field(default_factory=list)
    index: dict[NodeKey, int] = field(default_factory=dict)
    edges: list[tuple[int, Move, int]] = field(default_factory=list)
    initial: int = 0
    truncated: bool = False
    stats: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.nodes)

    def state(self, i: int) -> State:
        robot, diff = self.nodes[i]
        return State(robot, self.base_boxes.symmetric_difference(diff))

    def states(self):
        return (self.state(i) for i in range(len(self.nodes)))

    def state_hash(self, i: int) -> str:
        robot, diff = self.nodes[i]
        boxes = sorted(self.base_boxes.symmetric_difference(diff))
        blob = repr((robot, boxes)).encode()
        return hashlib.sha1(blob).hexdigest()[:12]

    def dump(self) -> str:
        """Line records: N <hash> <robot> <boxes...> then E <from> <move> <to>."""
        out = []
        for i in range(len(self.nodes)):
            s = self.state(i)
            cells = " ".join(f"{x},{y}" for x, y in sorted(s.boxes))
            out.append(f"N {self.state_hash(i)} {s.robot[0]},{s.robot[1]} {cells}".rstrip())
        for src, move, dst in self.edges:
            out.append(f"E {self.state_hash(src)} {move} {self.state_hash(dst)}")
        if self.truncated:
            out.append("# truncated")
        return "\n".join(out) + "\n"


def _toggle(boxes: set, old: frozenset, new: frozenset) -> None:
    for c in old.symmetric_difference(new):
        if c in boxes:
            boxes.remove(c)
        else:
            boxes.add(c)


def explore(level: Level, variant: Variant, initial: State,
            max_states: int = DEFAULT_CAP) -> TransitionSystem:
    """Breadth-first closure from initial, truncated at max_states nodes."""
    if max_states < 1:
        raise ValueError("max_states must be >= 1")
    base = initial.boxes
    ts = TransitionSystem(level, variant, base)
    start: NodeKey = (initial.robot, frozenset())
    ts.nodes.append(start)
    ts.index[start] = 0
    queue: deque[int] = deque([0])
    boxes = set(base)
    cur_diff: frozenset = frozenset()
    frontier_peak = 1
    while queue:
        frontier_peak = max(frontier_peak, len(queue))
        i = queue.popleft()
        robot, diff = ts.nodes[i]
        _toggle(boxes, cur_diff, diff)
        cur_diff = diff
        for move, robot2, removed, added in fast_moves(level, robot, boxes, variant):
            diff2 = diff.symmetric_difference(removed + added)
            key = (robot2, diff2)
            j = ts.index.get(key)
            if j is None:
                if len(ts.nodes) >= max_states:
                    ts.truncated = True
                    continue
                j = len(ts.nodes)
                ts.nodes.append(key)
                ts.index[key] = j
                queue.append(j)
            ts.edges.append((i, move, j))
    ts.stats = {"explored": len(ts.nodes), "frontier_peak": frontier_peak}
    return ts


def solve(level: Level, variant: Variant,
          max_states: int = DEFAULT_CAP) -> list[Move] | None:
    """Shortest witness path to the goal, or None if exhaustively unsolvable.

    Ties between equal-length witnesses break by the deterministic move
    enumeration order.  Raises CapExceeded when the cap cuts the search
    before the answer is known.
    """
    if level.goal is None:
        raise ValueError("level has no goal")
    initial = level.initial_state()
    if initial.robot == level.goal:
        return []
    base = initial.boxes
    start: NodeKey = (initial.robot, frozenset())
    index: dict[NodeKey, int] = {start: 0}
    nodes: list[NodeKey] = [start]
    parent: list[tuple[int, Move]] = [(-1, Move("up"))]
    queue: deque[int] = deque([0])
    boxes = set(base)
    cur_diff: frozenset = frozenset()
    truncated = False
    while queue:
        i = queue.popleft()
        robot, diff = nodes[i]
        _toggle(boxes, cur_diff, diff)
        cur_diff = diff
        for move, robot2, removed, added in fast_moves(level, robot, boxes, variant):
            diff2 = diff.symmetric_difference(removed + added)
            key = (robot2, diff2)
            if key in index:
                continue
            if len(nodes) >= max_states:
                truncated = True
                continue
            j = len(nodes)
            index[key] = j
            nodes.append(key)
            parent.append((i, move))
            if robot2 == level.goal:
                path = []
                while j != 0:
                    j, m = parent[j][0], parent[j][1]
                    path.append(m)
                return path[::-1]
            queue.append(j)
    if truncated:
        raise CapExceeded(f"no witness within {max_states} states")
    return None


def movable_blocks(gadget: GadgetDef, entry: str, variant: Variant,
                   max_states: int = DEFAULT_CAP) -> frozenset[Cell]:
    """Initial box cells that move in some reachable configuration.

    entry is a port label, or "all" for the union over every port.  The
    robot is placed directly on the entry port cell; the exterior is not
    modelled here.
    """
    labels = sorted(gadget.ports) if entry == "all" else [entry]
    moved: set[Cell] = set()
    base = gadget.level.boxes
    for label in labels:
        port = gadget.ports[label]
        if port.cell in base:
            continue  # port plugged: no entry possible
        level = with_robot(gadget.level, port.cell)
        ts = explore(level, variant, level.initial_state(), max_states)
        if ts.truncated:
            raise CapExceeded(f"exploration from port {label} hit {max_states}")
        for _, diff in ts.nodes:
            moved.update(diff & base)
    return frozenset(moved)
