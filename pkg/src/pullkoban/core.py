"""Boards, move rules and the level file format for pull/push block games.

Coordinates are (x, y) with x growing rightward and y growing upward, so
(0, 0) is the bottom-left cell of a level.  Text grids are written top row
first and are converted on parse.  Everything outside the stored rectangle
counts as a fixed wall (closed world).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

Cell = tuple[int, int]

# Deterministic enumeration order for moves: directions first, then the
# number of pulled boxes ascending.
DIRECTION_ORDER = ("up", "down", "left", "right")
DIRECTIONS: dict[str, Cell] = {
    "up": (0, 1),
    "down": (0, -1),
    "left": (-1, 0),
    "right": (1, 0),
}

MODES = ("push", "pull", "pushpush", "pullpull")

WALL, BOX, ROBOT, GOAL, FLOOR = "#", "$", "@", "G", "."
PORT_LABELS = "ABCD"


class IllegalMove(ValueError):
    """Raised when apply_move is given a move that legal_moves rejects."""


class LevelFormatError(ValueError):
    """Malformed level text; carries a 1-based line/column position."""

    def __init__(self, code: str, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{code} at line {line}, col {col}: {message}")
        self.code = code
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Variant:
    """Move semantics: one of push/pull/pushpush/pullpull with a capacity.

    capacity is the maximum number of boxes moved at once; None stands for
    unbounded (written ``*``).  The fixed-obstacle suffix ("-F") is not part
    of the variant: it is a property of the level (whether fixedWalls is
    nonempty).
    """

    mode: str
    capacity: int | None = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be >= 1 or None (unbounded)")

    @property
    def pulls(self) -> bool:
        return self.mode in ("pull", "pullpull")

    @property
    def slides(self) -> bool:
        return self.mode in ("pushpush", "pullpull")

    def cap(self) -> float:
        return float("inf") if self.capacity is None else self.capacity

    @classmethod
    def parse(cls, text: str) -> "Variant":
        """Parse a ``mode:k`` spec such as ``pull:1`` or ``push:*``."""
        mode, _, k = text.strip().lower().partition(":")
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r} in variant spec {text!r}")
        if k in ("", "1"):
            return cls(mode, 1)
        if k == "*":
            return cls(mode, None)
        if not k.isdigit() or int(k) < 1:
            raise ValueError(f"bad capacity {k!r} in variant spec {text!r}")
        return cls(mode, int(k))

    def spec(self) -> str:
        return f"{self.mode}:{'*' if self.capacity is None else self.capacity}"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.spec()


@dataclass(frozen=True)
class Level:
    """A rectangular board: fixed walls, initial boxes, optional robot/goal."""

    width: int
    height: int
    walls: frozenset[Cell]
    boxes: frozenset[Cell]
    robot: Cell | None = None
    goal: Cell | None = None
    name: str | None = None

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def is_wall(self, c: Cell) -> bool:
        """Closed world: cells outside the rectangle are fixed walls."""
        return c in self.walls or not self.in_bounds(c)

    def initial_state(self) -> "State":
        if self.robot is None:
            raise ValueError("level has no robot")
        return State(self.robot, self.boxes)

    def check(self) -> None:
        """Raise ValueError on any violated level invariant."""
        if self.width < 1 or self.height < 1:
            raise ValueError("level dimensions must be positive")
        for c in sorted(self.walls | self.boxes):
            if not self.in_bounds(c):
                raise ValueError(f"cell {c} out of bounds")
        if self.walls & self.boxes:
            raise ValueError("walls and boxes overlap")
        if self.robot is not None:
            if not self.in_bounds(self.robot):
                raise ValueError("robot out of bounds")
            if self.robot in self.walls or self.robot in self.boxes:
                raise ValueError("robot on an occupied cell")
        if self.goal is not None:
            if not self.in_bounds(self.goal):
                raise ValueError("goal out of bounds")
            if self.goal in self.walls:
                raise ValueError("goal on a fixed wall")


@dataclass(frozen=True)
class State:
    """A game configuration: robot position plus the set of box cells.

    Boxes are interchangeable, so the set of cells is the canonical form.
    """

    robot: Cell
    boxes: frozenset[Cell]

    def check(self, level: Level) -> None:
        if len(self.boxes) != len(level.boxes):
            raise ValueError("box count changed")
        if self.robot in self.boxes or level.is_wall(self.robot):
            raise ValueError("robot on an occupied cell")
        for c in self.boxes:
            if level.is_wall(c):
                raise ValueError(f"box on wall at {c}")


@dataclass(frozen=True, order=True)
class Move:
    """One move: a direction plus the number of boxes dragged (pulls only).

    Push-family moves always carry pulled=0; the pushed chain is implied by
    occupancy rather than chosen.
    """

    direction: str
    pulled: int = 0

    def __str__(self) -> str:
        return f"{self.direction}/{self.pulled}"

    @classmethod
    def parse(cls, text: str) -> "Move":
        d, _, j = text.partition("/")
        if d not in DIRECTIONS:
            raise ValueError(f"bad direction {d!r}")
        return cls(d, int(j) if j else 0)


# ---------------------------------------------------------------------------
# Move semantics


def _chain_length(level: Level, boxes, start: Cell, d: Cell, limit: float) -> int:
    """Length of the contiguous box chain at start, start+d, ... capped."""
    n = 0
    c = start
    while n < limit and c in boxes:
        n += 1
        c = (c[0] + d[0], c[1] + d[1])
    return n


def fast_moves(level: Level, robot: Cell, boxes, variant: Variant):
    """Successor moves as (Move, robot', removed, added) tuples.

    ``boxes`` is any set-like with membership; removed/added are the box
    cells vacated/filled by the move (at most ``pulled`` cells each, already
    net of overlaps).  This is the single source of truth for the rules; the
    public legal_moves wraps it in States.
    """
    out = []
    cap = variant.cap()
    for name in DIRECTION_ORDER:
        d = DIRECTIONS[name]
        ahead = (robot[0] + d[0], robot[1] + d[1])
        free_ahead = not level.is_wall(ahead) and ahead not in boxes
        if variant.pulls:
            if not free_ahead:
                continue
            behind = (robot[0] - d[0], robot[1] - d[1])
            chain = _chain_length(level, boxes, behind, (-d[0], -d[1]), cap)
            for j in range(chain + 1):
                if j == 0:
                    # walking is a unit step in every pull variant; only a
                    # move that drags boxes slides
                    out.append((Move(name, 0), ahead, (), ()))
                elif variant.mode == "pull":
                    tail = (robot[0] - j * d[0], robot[1] - j * d[1])
                    out.append((Move(name, j), ahead, (tail,), (robot,)))
                else:  # pullpull: the pull slides until the robot is blocked
                    r = robot
                    nxt = ahead
                    while not level.is_wall(nxt) and nxt not in boxes:
                        # cells the chain occupies never block the robot:
                        # they trail strictly behind it
                        r = nxt
                        nxt = (r[0] + d[0], r[1] + d[1])
                    old = [
                        (robot[0] - i * d[0], robot[1] - i * d[1])
                        for i in range(1, j + 1)
                    ]
                    new = [
                        (r[0] - i * d[0], r[1] - i * d[1])
                        for i in range(1, j + 1)
                    ]
                    removed = tuple(sorted(set(old) - set(new)))
                    added = tuple(sorted(set(new) - set(old)))
                    out.append((Move(name, j), r, removed, added))
        else:
            if free_ahead:
                out.append((Move(name, 0), ahead, (), ()))
                continue
            if ahead not in boxes:
                continue  # wall
            chain = _chain_length(level, boxes, ahead, d, float("inf"))
            if chain > cap:
                continue  # too heavy: the move is blocked
            far = (
                robot[0] + (chain + 1) * d[0],
                robot[1] + (chain + 1) * d[1],
            )
            if level.is_wall(far) or far in boxes:
                continue
            if variant.mode == "push":
                out.append((Move(name, 0), ahead, (ahead,), (far,)))
            else:  # pushpush: the chain slides until the lead box hits
                r, lead = ahead, far
                nxt = (lead[0] + d[0], lead[1] + d[1])
                while not level.is_wall(nxt) and nxt not in boxes:
                    r = (r[0] + d[0], r[1] + d[1])
                    lead = nxt
                    nxt = (lead[0] + d[0], lead[1] + d[1])
                old = [
                    (robot[0] + i * d[0], robot[1] + i * d[1])
                    for i in range(1, chain + 1)
                ]
                new = [
                    (lead[0] - i * d[0], lead[1] - i * d[1])
                    for i in range(chain)
                ]
                removed = tuple(sorted(set(old) - set(new)))
                added = tuple(sorted(set(new) - set(old)))
                out.append((Move(name, 0), r, removed, added))
    return out


def legal_moves(level: Level, state: State, variant: Variant) -> list[tuple[Move, State]]:
    """Exactly the legal successor set, deduplicated, in deterministic order."""
    result = []
    seen = set()
    for move, robot2, removed, added in fast_moves(level, state.robot, state.boxes, variant):
        boxes2 = state.boxes
        if removed or added:
            boxes2 = boxes2.difference(removed).union(added)
        key = (move, robot2, boxes2)
        if key in seen:
            continue
        seen.add(key)
        result.append((move, State(robot2, boxes2)))
    return result


def apply_move(level: Level, state: State, move: Move, variant: Variant) -> State:
    """Apply one legal move; raise IllegalMove if it is not in legal_moves."""
    for m, s in legal_moves(level, state, variant):
        if m == move:
            return s
    raise IllegalMove(f"{move} is not legal in {variant.spec()} from {state.robot}")


def is_solved(level: Level, state: State) -> bool:
    """Path version: the game is solved when the robot stands on the goal."""
    return level.goal is not None and state.robot == level.goal


# ---------------------------------------------------------------------------
# Level file format
#
# Header lines:  ; key = value     (keys: variant, k, name, port)
# Grid chars:    '#' wall, '$' box, '@' robot, 'G' goal, '.'/' ' floor,
#                'A'-'D' port-labelled floor cells (gadget files only).


@dataclass
class ParsedLevel:
    """A level plus the annotations the grid and headers carried."""

    level: Level
    headers: dict[str, str] = field(default_factory=dict)
    grid_ports: dict[str, Cell] = field(default_factory=dict)
    port_headers: dict[str, tuple[Cell, str]] = field(default_factory=dict)

    def variant(self) -> Variant | None:
        if "variant" not in self.headers:
            return None
        mode = self.headers["variant"].lower()
        k = self.headers.get("k", "1")
        return Variant.parse(f"{mode}:{k}")


def parse_level_text(text: str) -> ParsedLevel:
    headers: dict[str, str] = {}
    port_headers: dict[str, tuple[Cell, str]] = {}
    grid_lines: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith(";"):
            body = raw[1:].strip()
            key, eq, value = body.partition("=")
            if not eq:
                raise LevelFormatError("BadHeader", f"expected 'key = value' in {raw!r}", lineno, 1)
            key = key.strip().lower()
            value = value.strip()
            if key.startswith("port"):
                label = key.split()[-1].upper()
                if label not in PORT_LABELS:
                    raise LevelFormatError("UnknownPortLabel", f"port label {label!r}", lineno, 1)
                parts = [p.strip() for p in value.split(",")]
                if len(parts) != 3 or parts[2] not in DIRECTIONS:
                    raise LevelFormatError("BadPort", f"expected 'x,y,dir' in {raw!r}", lineno, 1)
                try:
                    cell = (int(parts[0]), int(parts[1]))
                except ValueError:
                    raise LevelFormatError("BadPort", f"bad coordinates in {raw!r}", lineno, 1) from None
                if label in port_headers:
                    raise LevelFormatError("DuplicatePort", f"port {label} declared twice", lineno, 1)
                port_headers[label] = (cell, parts[2])
            else:
                headers[key] = value
        elif raw.strip() == "" and not grid_lines:
            continue  # leading blanks
        else:
            grid_lines.append((lineno, raw))
    while grid_lines and grid_lines[-1][1].strip() == "":
        grid_lines.pop()
    if not grid_lines:
        raise LevelFormatError("EmptyGrid", "no grid lines", 0, 0)

    height = len(grid_lines)
    width = max(len(line) for _, line in grid_lines)
    walls, boxes = set(), set()
    robot = goal = None
    grid_ports: dict[str, Cell] = {}
    for row, (lineno, line) in enumerate(grid_lines):
        y = height - 1 - row
        for x in range(width):
            ch = line[x] if x < len(line) else " "
            cell = (x, y)
            if ch == WALL:
                walls.add(cell)
            elif ch == BOX:
                boxes.add(cell)
            elif ch == ROBOT:
                if robot is not None:
                    raise LevelFormatError("DuplicateRobot", "second '@'", lineno, x + 1)
                robot = cell
            elif ch == GOAL:
                if goal is not None:
                    raise LevelFormatError("DuplicateGoal", "second 'G'", lineno, x + 1)
                goal = cell
            elif ch in PORT_LABELS:
                if ch in grid_ports:
                    raise LevelFormatError("DuplicatePort", f"second {ch!r}", lineno, x + 1)
                grid_ports[ch] = cell
            elif ch not in (FLOOR, " "):
                raise LevelFormatError("BadCharacter", f"{ch!r}", lineno, x + 1)

    level = Level(width, height, frozenset(walls), frozenset(boxes), robot, goal,
                  headers.get("name"))
    level.check()
    for label, (cell, _d) in port_headers.items():
        if not level.in_bounds(cell):
            raise LevelFormatError("OutOfBoundsAnnotation", f"port {label} at {cell}", 0, 0)
        if cell in level.walls or cell in level.boxes:
            raise LevelFormatError("BadPort", f"port {label} cell {cell} is occupied", 0, 0)
    return ParsedLevel(level, headers, grid_ports, port_headers)


def parse_level(text: str) -> Level:
    """Parse level text; raises LevelFormatError with line/column on errors."""
    return parse_level_text(text).level


def render_level(level: Level, ports: dict[str, Cell] | None = None,
                 headers: dict[str, str] | None = None,
                 state: State | None = None) -> str:
    """Render back to the text format (floor normalised to '.')."""
    lines = []
    for key, value in (headers or {}).items():
        lines.append(f"; {key} = {value}")
    robot = state.robot if state is not None else level.robot
    boxes = state.boxes if state is not None else level.boxes
    port_at = {cell: label for label, cell in (ports or {}).items()}
    for y in range(level.height - 1, -1, -1):
        row = []
        for x in range(level.width):
            c = (x, y)
            if c in level.walls:
                row.append(WALL)
            elif c in boxes:
                row.append(BOX)
            elif c == robot:
                row.append(ROBOT)
            elif c == level.goal:
                row.append(GOAL)
            elif c in port_at:
                row.append(port_at[c])
            else:
                row.append(FLOOR)
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


def with_robot(level: Level, robot: Cell, goal: Cell | None = None) -> Level:
    """A copy of the level with robot (and optionally goal) placed."""
    lvl = replace(level, robot=robot, goal=goal if goal is not None else level.goal)
    lvl.check()
    return lvl
