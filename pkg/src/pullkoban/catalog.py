"""Gadget catalog: grids, ports, contracts and the all-movable transform.

Grid gadgets live as .lvl files next to this module; composite gadgets
(fork3 and the three junction kinds) are wirings of grid gadgets and are
checked at the automaton level.  Contracts state which port-to-port
traversals each gadget must allow or block; the verifier is the arbiter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from .core import (
    Cell,
    DIRECTIONS,
    Level,
    LevelFormatError,
    parse_level_text,
    render_level,
)

GRID_GADGETS = (
    "one-way",
    "fork2",
    "branch",
    "xor",
    "nand",
    "one-way-annotated",
    "fork2-annotated",
    "branch-annotated",
)
COMPOSITE_GADGETS = ("fork3", "color-choose", "consistency", "coloring")
ELEMENTARY = ("one-way", "fork2", "branch")

# dimension / box-count constants the transcriptions must match
EXPECTED_SHAPE = {
    "one-way": (10, 9, 1),
    "fork2": (12, 8, 2),
    "branch": (10, 8, 2),
    "one-way-annotated": (10, 9, 73),
    "fork2-annotated": (12, 9, 85),
    "branch-annotated": (12, 9, 89),
}


class UnknownGadget(KeyError):
    pass


@dataclass(frozen=True)
class Port:
    cell: Cell
    inward: str  # direction from the port cell into the gadget

    @property
    def outward(self) -> str:
        dx, dy = DIRECTIONS[self.inward]
        for name, d in DIRECTIONS.items():
            if d == (-dx, -dy):
                return name
        raise AssertionError


@dataclass(frozen=True)
class GadgetDef:
    """A level fragment with labelled boundary ports (no robot, no goal)."""

    name: str
    level: Level
    ports: dict[str, Port]
    tags: frozenset[str] = frozenset()

    def port_cells(self) -> dict[str, Cell]:
        return {label: p.cell for label, p in self.ports.items()}

    def render(self) -> str:
        return render_level(self.level, ports=self.port_cells())


@dataclass(frozen=True)
class CompositeDef:
    """A gadget built by wiring instances of other gadgets together.

    members: (instance name, gadget kind) pairs.  nets: each net is a tuple
    of (instance, port) endpoints.  external: composite port label -> net
    index.  Kinds may reference other composites; flatten() resolves to grid
    gadgets only.
    """

    name: str
    members: tuple[tuple[str, str], ...]
    nets: tuple[tuple[tuple[str, str], ...], ...]
    external: dict[str, int]
    tags: frozenset[str] = frozenset(("composite",))

    def flatten(self) -> "CompositeDef":
        members: list[tuple[str, str]] = []
        nets = [list(endpoints) for endpoints in self.nets]
        for inst, kind in self.members:
            try:
                sub = builtin_gadget(kind)
            except UnknownGadget:
                sub = None  # leaf kind supplied by the caller
            if not isinstance(sub, CompositeDef):
                members.append((inst, kind))
                continue
            sub = sub.flatten()
            members.extend((f"{inst}.{si}", sk) for si, sk in sub.members)
            # each external label of the sub must own a distinct sub-net;
            # that sub-net is spliced into the parent net wired to the label
            target: dict[int, int] = {}
            for label, sni in sorted(sub.external.items()):
                assert sni not in target, "sub-net exposed twice"
                for pni, net in enumerate(nets):
                    if (inst, label) in net:
                        net.remove((inst, label))
                        target[sni] = pni
                        break
            for sni, endpoints in enumerate(sub.nets):
                renamed = [(f"{inst}.{si}", sp) for si, sp in endpoints]
                if sni in target:
                    nets[target[sni]].extend(renamed)
                else:
                    nets.append(renamed)
        return CompositeDef(
            self.name,
            tuple(members),
            tuple(tuple(n) for n in nets),
            dict(self.external),
            self.tags,
        )


Gadget = GadgetDef | CompositeDef


def parse_gadget(text: str, name: str | None = None) -> GadgetDef:
    parsed = parse_level_text(text)
    level = parsed.level
    if level.robot is not None:
        raise LevelFormatError("RobotInGadget", "gadget levels carry no robot")
    if level.goal is not None:
        raise LevelFormatError("GoalInGadget", "gadget levels carry no goal")
    ports: dict[str, Port] = {}
    for label, (cell, inward) in sorted(parsed.port_headers.items()):
        if label in parsed.grid_ports and parsed.grid_ports[label] != cell:
            raise LevelFormatError(
                "PortMismatch", f"port {label} grid/header cells disagree"
            )
        ports[label] = Port(cell, inward)
    for label, cell in sorted(parsed.grid_ports.items()):
        if label not in ports:
            raise LevelFormatError("BadPort", f"grid port {label} has no header line")
    if len(ports) < 2:
        raise LevelFormatError("BadPort", "gadgets need at least two ports")
    gname = name or parsed.headers.get("name") or "gadget"
    return GadgetDef(gname, level, ports)


def _load_grid(name: str) -> GadgetDef:
    data = resources.files(__package__).joinpath(f"gadgets/{name}.lvl").read_text()
    tags = {"annotated-variant"} if name.endswith("-annotated") else {"elementary"}
    if name in ("xor", "nand"):
        tags = {"composite"}  # built from branch + one-way pieces
    g = parse_gadget(data, name)
    return GadgetDef(g.name, g.level, g.ports, frozenset(tags))


def _fork3() -> CompositeDef:
    # two cascaded fork2 gadgets: the first B keeps its label, the first C
    # feeds the second fork whose exits become C and D
    return CompositeDef(
        "fork3",
        members=(("f1", "fork2"), ("f2", "fork2")),
        nets=(
            (("f1", "A"),),
            (("f1", "B"),),
            (("f1", "C"), ("f2", "A")),
            (("f2", "B"),),
            (("f2", "C"),),
        ),
        external={"A": 0, "B": 1, "C": 3, "D": 4},
    )


def _color_choose() -> CompositeDef:
    # fork3 picks a track; one-ways make the decision entry-only
    return CompositeDef(
        "color-choose",
        members=(
            ("fork", "fork3"),
            ("ow1", "one-way"),
            ("ow2", "one-way"),
            ("ow3", "one-way"),
        ),
        nets=(
            (("fork", "A"),),
            (("fork", "B"), ("ow1", "A")),
            (("fork", "C"), ("ow2", "A")),
            (("fork", "D"), ("ow3", "A")),
            (("ow1", "B"),),
            (("ow2", "B"),),
            (("ow3", "B"),),
        ),
        external={"IN": 0, "OUT1": 4, "OUT2": 5, "OUT3": 6},
    )


def junction_couplings(kind: str) -> tuple[tuple[int, int], ...]:
    """Coupled (track of first bundle, track of second bundle) pairs.

    A coloring junction forbids equal labels across the two directions of an
    edge, so it couples same-label pairs; a consistency junction forbids
    unequal labels across two visits, so it couples all unequal pairs.
    """
    if kind == "coloring":
        return ((1, 1), (2, 2), (3, 3))
    if kind == "consistency":
        return ((1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2))
    raise UnknownGadget(kind)


def synthesize_junction(kind: str, prefix: str = "") -> CompositeDef:
    """Build a junction as a planar wiring of NANDs plus XOR crossings.

    Two three-track bundles pass through: bundle one enters at A1..A3 and
    leaves at B1..B3, bundle two enters at C1..C3 and leaves at D1..D3.
    Each coupled pair shares one NAND (first bundle on its A-B path, second
    on C-D).  To reach its NAND a wire is bubbled to the bundle boundary by
    swapping with wires of its own bundle; every swap is an XOR crossing.
    Same-bundle wires are never both used in one run (each tour arc is
    traversed once), which is exactly what an XOR crossing permits.
    """
    members: list[tuple[str, str]] = []
    nets: list[list[tuple[str, str]]] = []
    external: dict[str, int] = {}

    # stack order of the six wires; p wires occupy 0-2, q wires 3-5
    stack = ["p1", "p2", "p3", "q1", "q2", "q3"]
    dangling: dict[str, int] = {}

    def new_net(*endpoints: tuple[str, str]) -> int:
        nets.append(list(endpoints))
        return len(nets) - 1

    for i, wire in enumerate(("p1", "p2", "p3")):
        dangling[wire] = new_net()
        external[f"A{i + 1}"] = dangling[wire]
    for i, wire in enumerate(("q1", "q2", "q3")):
        dangling[wire] = new_net()
        external[f"C{i + 1}"] = dangling[wire]

    counter = [0]

    def add(kind_: str, wire_a: str, wire_b: str) -> None:
        """Thread wire_a through ports A->B and wire_b through C->D."""
        counter[0] += 1
        inst = f"{prefix}{kind_}{counter[0]}"
        members.append((inst, kind_))
        nets[dangling[wire_a]].append((inst, "A"))
        dangling[wire_a] = new_net((inst, "B"))
        nets[dangling[wire_b]].append((inst, "C"))
        dangling[wire_b] = new_net((inst, "D"))

    def swap(i: int) -> None:
        a, b = stack[i], stack[i + 1]
        add("xor", a, b)
        stack[i], stack[i + 1] = b, a

    def bubble(wire: str, target: int) -> None:
        pos = stack.index(wire)
        while pos < target:
            swap(pos)
            pos += 1
        while pos > target:
            swap(pos - 1)
            pos -= 1

    for pi, qj in junction_couplings(kind):
        p, q = f"p{pi}", f"q{qj}"
        bubble(p, 2)
        bubble(q, 3)
        add("nand", p, q)
        bubble(q, 3 + qj - 1)
        bubble(p, pi - 1)

    for i, wire in enumerate(("p1", "p2", "p3")):
        external[f"B{i + 1}"] = dangling[wire]
    for i, wire in enumerate(("q1", "q2", "q3")):
        external[f"D{i + 1}"] = dangling[wire]

    return CompositeDef(
        kind,
        tuple(members),
        tuple(tuple(n) for n in nets),
        external,
    )


_CACHE: dict[str, Gadget] = {}


def builtin_gadget(name: str) -> Gadget:
    """The catalog entry for ``name``; raises UnknownGadget otherwise."""
    if name not in _CACHE:
        if name in GRID_GADGETS:
            _CACHE[name] = _load_grid(name)
        elif name == "fork3":
            _CACHE[name] = _fork3()
        elif name == "color-choose":
            _CACHE[name] = _color_choose()
        elif name in ("consistency", "coloring"):
            _CACHE[name] = synthesize_junction(name)
        else:
            raise UnknownGadget(name)
    return _CACHE[name]


def catalog_names() -> tuple[str, ...]:
    return GRID_GADGETS + COMPOSITE_GADGETS


# ---------------------------------------------------------------------------
# Validation


@dataclass
class ValidationReport:
    gadget: str
    violations: list[str] = field(default_factory=list)
    info: dict[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_gadget(g: GadgetDef) -> ValidationReport:
    report = ValidationReport(g.name)
    level = g.level
    report.info["width"] = level.width
    report.info["height"] = level.height
    report.info["boxes"] = len(level.boxes)
    try:
        level.check()
    except ValueError as e:
        report.violations.append(f"LevelInvariant: {e}")
    if level.robot is not None:
        report.violations.append("RobotInGadget")
    if level.goal is not None:
        report.violations.append("GoalInGadget")
    if len(g.ports) < 2:
        report.violations.append("TooFewPorts")
    for label, port in sorted(g.ports.items()):
        x, y = port.cell
        if not level.in_bounds(port.cell):
            report.violations.append(f"PortOutOfBounds: {label}")
            continue
        if port.cell in level.walls or port.cell in level.boxes:
            report.violations.append(f"PortOccupied: {label}")
        if x not in (0, level.width - 1) and y not in (0, level.height - 1):
            report.violations.append(f"PortNotOnPerimeter: {label}")
        dx, dy = DIRECTIONS[port.inward]
        inside = (x + dx, y + dy)
        if not level.in_bounds(inside):
            report.violations.append(f"PortInwardLeavesLevel: {label}")
        elif inside in level.walls:
            report.violations.append(f"PortSealed: {label}")
    expected = EXPECTED_SHAPE.get(g.name)
    if expected is not None:
        w, h, nboxes = expected
        if (level.width, level.height) != (w, h):
            report.violations.append(f"UnexpectedSize: {level.width}x{level.height} != {w}x{h}")
        if len(level.boxes) != nboxes:
            if len(level.boxes) < nboxes:
                report.violations.append("MissingBox")
            else:
                report.violations.append("ExtraBox")
    return report


# ---------------------------------------------------------------------------
# Wall thickening (the all-movable transform)


def interior_cells(level: Level) -> frozenset[Cell]:
    """Non-wall cells: floor plus cells occupied by boxes."""
    return frozenset(
        (x, y)
        for x in range(level.width)
        for y in range(level.height)
        if (x, y) not in level.walls
    )


def thicken(g: GadgetDef, t: int | None = None) -> GadgetDef:
    """Replace fixed walls by movable boxes, backed by t extra box layers.

    t defaults to one more than the interior cell count, which makes the box
    wall deeper than any sequence of pulls the robot could perform from
    inside.  Ports become one-wide corridors through the thickened wall.
    """
    interior = interior_cells(g.level)
    if t is None:
        t = len(interior) + 1
    if t < 1:
        raise ValueError("thickness must be >= 1")
    w2 = g.level.width + 2 * t
    h2 = g.level.height + 2 * t

    def shift(c: Cell) -> Cell:
        return (c[0] + t, c[1] + t)

    corridors: set[Cell] = set()
    ports2: dict[str, Port] = {}
    for label, port in sorted(g.ports.items()):
        dx, dy = DIRECTIONS[port.outward]
        cells = [
            (port.cell[0] + t + i * dx, port.cell[1] + t + i * dy)
            for i in range(1, t + 1)
        ]
        corridors.update(cells)
        ports2[label] = Port(cells[-1], port.inward)

    floor = {shift(c) for c in interior if c not in g.level.boxes} | corridors
    boxes = {
        (x, y)
        for x in range(w2)
        for y in range(h2)
        if (x, y) not in floor
    }
    level2 = Level(w2, h2, frozenset(), frozenset(boxes))
    level2.check()
    return GadgetDef(
        f"{g.name}-thick",
        level2,
        ports2,
        g.tags | {"all-movable"},
    )


# ---------------------------------------------------------------------------
# Movable-block reference data: the marked cells of the annotated figures.

ANNOTATED_MOVABLE: dict[str, frozenset[Cell]] = {
    "one-way-annotated": frozenset({
        (6, 7), (5, 6), (2, 4), (5, 4), (7, 4), (8, 4), (1, 3), (5, 3),
        (8, 3), (4, 2), (8, 2), (5, 1), (6, 1), (7, 1),
    }),
    "fork2-annotated": frozenset({
        (5, 7), (6, 7), (5, 6), (6, 6), (3, 5), (4, 5), (7, 5), (8, 5),
        (4, 4), (7, 4), (1, 3), (4, 3), (7, 3), (10, 3), (2, 2), (4, 2),
        (6, 2), (7, 2), (9, 2), (4, 1), (6, 1), (7, 1),
    }),
    "branch-annotated": frozenset({
        (3, 7), (5, 7), (1, 6), (2, 6), (3, 6), (4, 6), (5, 6), (6, 6),
        (7, 6), (6, 5), (7, 5), (8, 5), (1, 4), (2, 4), (7, 4), (9, 4),
        (10, 4), (1, 3), (2, 3), (3, 3), (4, 3), (5, 3), (6, 3), (9, 3),
        (3, 2), (5, 2), (6, 2), (7, 1), (8, 1), (9, 1),
    }),
}


# ---------------------------------------------------------------------------
# Contracts


@dataclass(frozen=True)
class Clause:
    """One traversal obligation, evaluated against a port automaton.

    kind: "required"       - some state reached by exactly the context
                             sequence enables the pair
          "forbidden-now"  - no state reached by the context enables it
          "forbidden-ever" - no continuation after the context ever
                             realizes it (checked over the full closure)
          "forbidden-via"  - like forbidden-ever, but only continuations
                             entering through the ports in `via` count
                             (e.g. "cannot be undone entering from B or C")
    context: the (in, out) traversal sequence leading to the checked states;
    empty means the initial configuration.
    """

    kind: str
    context: tuple[tuple[str, str], ...]
    pair: tuple[str, str]
    via: tuple[str, ...] | None = None

    def ident(self) -> str:
        ctx = "+".join(f"{a}>{b}" for a, b in self.context) or "init"
        scope = f"|{''.join(self.via)}" if self.via else ""
        return f"{self.kind}[{ctx}{scope}]{self.pair[0]}>{self.pair[1]}"


@dataclass(frozen=True)
class SpecContract:
    gadget: str
    clauses: tuple[Clause, ...]


def _req(pair, *context):
    return Clause("required", tuple(context), pair)


def _now(pair, *context):
    return Clause("forbidden-now", tuple(context), pair)


def _ever(pair, *context):
    return Clause("forbidden-ever", tuple(context), pair)


def _via(ports, pair, *context):
    return Clause("forbidden-via", tuple(context), pair, tuple(ports))


def _junction_contract(kind: str) -> SpecContract:
    labels = [f"{side}{i}" for side in "ABCD" for i in (1, 2, 3)]
    allowed = {(f"A{i}", f"B{i}") for i in (1, 2, 3)}
    allowed |= {(f"C{i}", f"D{i}") for i in (1, 2, 3)}
    clauses: list[Clause] = []
    for i in (1, 2, 3):
        clauses.append(_req((f"A{i}", f"B{i}")))
        clauses.append(_req((f"C{i}", f"D{i}")))
    if kind == "coloring":
        for i in (1, 2, 3):
            clauses.append(_ever((f"C{i}", f"D{i}"), (f"A{i}", f"B{i}")))
            for j in (1, 2, 3):
                if j != i:
                    clauses.append(_req((f"C{j}", f"D{j}"), (f"A{i}", f"B{i}")))
    else:  # consistency
        for i in (1, 2, 3):
            clauses.append(_req((f"C{i}", f"D{i}"), (f"A{i}", f"B{i}")))
            for j in (1, 2, 3):
                if j != i:
                    clauses.append(_ever((f"C{j}", f"D{j}"), (f"A{i}", f"B{i}")))
    for a in labels:
        for b in labels:
            if a != b and (a, b) not in allowed:
                clauses.append(_ever((a, b)))
    return SpecContract(kind, tuple(clauses))


def _contracts() -> dict[str, SpecContract]:
    c: dict[str, SpecContract] = {}
    c["one-way"] = SpecContract("one-way", (
        _req(("A", "B")),
        _ever(("B", "A")),
        _req(("A", "B"), ("A", "B")),
    ))
    # The choice made at A persists (re-entering A yields the same exit)
    # and a re-entry from the chosen exit cannot reach an unchosen exit.
    # Longer play sequences can walk the committed box back (drag it down
    # the entry column over several sessions), so the no-undo clauses bind
    # the next traversal, which is how the gadget is passed in a full
    # construction: the decision point is crossed once, behind one-ways.
    c["fork2"] = SpecContract("fork2", (
        _req(("A", "B")),
        _req(("A", "C")),
        _now(("B", "A")),
        _now(("B", "C")),
        _now(("C", "A")),
        _now(("C", "B")),
        _req(("A", "B"), ("A", "B")),
        _req(("A", "C"), ("A", "C")),
        _now(("B", "C"), ("A", "B")),
        _now(("C", "B"), ("A", "C")),
    ))
    c["fork3"] = SpecContract("fork3", (
        _req(("A", "B")),
        _req(("A", "C")),
        _req(("A", "D")),
        *[_now((p, q)) for p in "BCD" for q in "ABCD" if p != q],
        *[_req(("A", x), ("A", x)) for x in "BCD"],
        *[
            _now((x, y), ("A", x))
            for x in "BCD"
            for y in "BCD"
            if x != y
        ],
    ))
    c["branch"] = SpecContract("branch", (
        _req(("A", "B")),
        _req(("B", "A")),
        _req(("B", "C")),
        _now(("C", "A")),
        _now(("C", "B")),
        _ever(("A", "C"), ("A", "B")),
        _ever(("B", "C"), ("A", "B")),
        _req(("A", "B"), ("A", "B")),
    ))
    c["xor"] = SpecContract("xor", (
        _req(("A", "B")),
        _req(("C", "D")),
        _ever(("A", "C")),
        _ever(("A", "D")),
        _ever(("C", "A")),
        _ever(("C", "B")),
        _ever(("C", "D"), ("A", "B")),
        _req(("A", "B"), ("A", "B")),
        _ever(("A", "B"), ("C", "D")),
        _req(("C", "D"), ("C", "D")),
        *[_ever((p, q)) for p in "BD" for q in "ABCD" if p != q],
    ))
    c["nand"] = SpecContract("nand", (
        _req(("A", "B")),
        _req(("C", "D")),
        _ever(("A", "C")),
        _ever(("A", "D")),
        _ever(("C", "A")),
        _ever(("C", "B")),
        _ever(("C", "D"), ("A", "B")),
        _ever(("A", "B"), ("C", "D")),
        *[_ever((p, q)) for p in "BD" for q in "ABCD" if p != q],
    ))
    c["color-choose"] = SpecContract("color-choose", (
        *[_req(("IN", f"OUT{i}")) for i in (1, 2, 3)],
        *[_req(("IN", f"OUT{i}"), ("IN", f"OUT{i}")) for i in (1, 2, 3)],
        *[
            _ever((f"OUT{i}", out))
            for i in (1, 2, 3)
            for out in ("IN", "OUT1", "OUT2", "OUT3")
            if out != f"OUT{i}"
        ],
    ))
    c["consistency"] = _junction_contract("consistency")
    c["coloring"] = _junction_contract("coloring")
    return c


CONTRACTS = _contracts()


def contract_for(name: str) -> SpecContract:
    base = name[:-6] if name.endswith("-thick") else name
    if base.endswith("-annotated"):
        base = base[: -len("-annotated")]
    if base not in CONTRACTS:
        raise UnknownGadget(name)
    return CONTRACTS[base]
