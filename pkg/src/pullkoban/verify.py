"""Port-behavior automata and contract checking.

A gadget's observable behavior is the set of (entry port, exit port)
traversals it admits in each box configuration.  port_behavior builds that
automaton by exhaustive search: the robot enters from an abstract OUTSIDE
location, moves inside under the variant's rules, and exits through a port;
box configurations seen with the robot OUTSIDE are the automaton states.
Contracts are then decided on the finite automaton, so "never possible"
means checked over the whole reachable space, not sampled.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field

from . import catalog
from .catalog import (
    ANNOTATED_MOVABLE,
    Clause,
    CompositeDef,
    GadgetDef,
    SpecContract,
    builtin_gadget,
    contract_for,
    thicken,
)
from .core import DIRECTIONS, Cell, Level, Move, State, Variant, fast_moves
from .search import CapExceeded, DEFAULT_CAP, movable_blocks

Pair = tuple[str, str]
Transition = tuple[int, str, str, int]


@dataclass
class PortAutomaton:
    """Finite transition system over traversal events of one gadget."""

    gadget: str
    variant: Variant
    ports: tuple[str, ...]
    configs: list[object]
    initial: int
    transitions: list[Transition]
    witnesses: dict[Transition, tuple]
    truncated: bool = False
    base_boxes: frozenset | None = None
    stats: dict[str, int] = field(default_factory=dict)

    def adjacency(self) -> dict[int, list[Transition]]:
        adj: dict[int, list[Transition]] = defaultdict(list)
        for t in self.transitions:
            adj[t[0]].append(t)
        return adj

    def pairs(self) -> frozenset[Pair]:
        return frozenset((p, q) for _, p, q, _ in self.transitions)

    def describe(self) -> str:
        lines = [f"# automaton {self.gadget} {self.variant.spec()}"]
        for i in range(len(self.configs)):
            mark = "*" if i == self.initial else " "
            lines.append(f"S{mark} {i}")
        for s, p, q, t in sorted(self.transitions):
            lines.append(f"T {s} {p}>{q} {t}")
        if self.truncated:
            lines.append("# truncated")
        return "\n".join(lines) + "\n"


def _exit_effects(level: Level, boxes, robot: Cell, inward: str, variant: Variant):
    """Box effects of stepping off the grid from a port cell.

    Pull variants may drag up to capacity boxes one cell toward the port as
    the robot leaves; slides cannot continue outside, so the exit is always
    a unit step.  Yields (j, removed, added).
    """
    yield 0, (), ()
    if not variant.pulls:
        return
    dx, dy = DIRECTIONS[inward]
    j = 0
    c = (robot[0] + dx, robot[1] + dy)
    while j < variant.cap() and c in boxes:
        j += 1
        yield j, ((robot[0] + j * dx, robot[1] + j * dy),), (robot,)
        c = (c[0] + dx, c[1] + dy)


def port_behavior(gadget: GadgetDef, variant: Variant,
                  max_states: int = DEFAULT_CAP) -> PortAutomaton:
    """Exhaustively derive the traversal automaton of a grid gadget."""
    level = gadget.level
    base = level.boxes
    ports = {label: p for label, p in sorted(gadget.ports.items())}
    port_cells = {p.cell: label for label, p in ports.items()}

    configs: list[frozenset] = [frozenset()]
    config_index: dict[frozenset, int] = {frozenset(): 0}
    transitions: list[Transition] = []
    seen_transitions: set[Transition] = set()
    witnesses: dict[Transition, tuple] = {}
    work: deque[int] = deque([0])
    budget = max_states
    truncated = False
    boxes = set(base)
    boxes_diff: frozenset = frozenset()

    def switch(diff: frozenset) -> None:
        nonlocal boxes_diff
        for c in boxes_diff.symmetric_difference(diff):
            if c in boxes:
                boxes.remove(c)
            else:
                boxes.add(c)
        boxes_diff = diff

    while work and not truncated:
        ci = work.popleft()
        cdiff = configs[ci]
        for label, port in ports.items():
            switch(cdiff)
            if port.cell in boxes:
                continue  # plugged port: not enterable
            start = (port.cell, cdiff)
            parent: dict = {start: None}
            queue: deque = deque([start])
            while queue:
                if budget <= 0:
                    truncated = True
                    break
                node = queue.popleft()
                budget -= 1
                robot, diff = node
                switch(diff)
                out_label = port_cells.get(robot)
                if out_label is not None:
                    outport = ports[out_label]
                    for j, removed, added in _exit_effects(
                        level, boxes, robot, outport.inward, variant
                    ):
                        diff2 = diff.symmetric_difference(removed + added)
                        cj = config_index.get(diff2)
                        if cj is None:
                            cj = len(configs)
                            configs.append(diff2)
                            config_index[diff2] = cj
                            work.append(cj)
                        t = (ci, label, out_label, cj)
                        if t not in seen_transitions:
                            seen_transitions.add(t)
                            transitions.append(t)
                            steps = []
                            n = node
                            while parent[n] is not None:
                                n, mv = parent[n]
                                steps.append(("move", mv))
                            steps.append(("enter", label))
                            steps.reverse()
                            steps.append(("exit", out_label, j))
                            witnesses[t] = tuple(steps)
                for move, robot2, removed, added in fast_moves(level, robot, boxes, variant):
                    diff2 = diff.symmetric_difference(removed + added)
                    nxt = (robot2, diff2)
                    if nxt not in parent:
                        parent[nxt] = (node, move)
                        queue.append(nxt)
    return PortAutomaton(
        gadget.name,
        variant,
        tuple(ports),
        configs,
        0,
        transitions,
        witnesses,
        truncated,
        base,
        {"configs": len(configs), "budget_left": max(budget, 0)},
    )


def composite_behavior(comp: CompositeDef, variant: Variant,
                       member_automata: dict[str, PortAutomaton],
                       max_states: int = DEFAULT_CAP) -> PortAutomaton:
    """Traversal automaton of a wired composite, from member automata.

    The robot's position is abstracted to the net it stands on; crossing a
    member gadget applies one transition of that member's automaton.  This
    is sound for traversal properties because a robot parked inside a
    member can only ever come out through one of that member's own ports.
    Member automata are quotiented first: product states multiply fast.
    """
    member_automata = {k: minimize(a) for k, a in member_automata.items()}
    comp = comp.flatten()
    members = list(comp.members)
    kind_of = dict(members)
    order = {inst: i for i, (inst, _) in enumerate(members)}
    for inst, kind in members:
        if member_automata[kind].truncated:
            raise CapExceeded(f"member automaton {kind} is truncated")
    net_of: dict[tuple[str, str], int] = {}
    for ni, endpoints in enumerate(comp.nets):
        for ep in endpoints:
            assert ep not in net_of, f"port {ep} wired twice"
            net_of[ep] = ni
    exit_label = {ni: label for label, ni in sorted(comp.external.items())}

    initial = tuple(member_automata[kind].initial for _, kind in members)
    configs: list[tuple] = [initial]
    config_index: dict[tuple, int] = {initial: 0}
    transitions: list[Transition] = []
    seen: set[Transition] = set()
    witnesses: dict[Transition, tuple] = {}
    work: deque[int] = deque([0])
    budget = max_states
    truncated = False

    adjacency = {
        kind: member_automata[kind].adjacency() for kind in set(kind_of.values())
    }

    while work and not truncated:
        ci = work.popleft()
        cfg = configs[ci]
        for label, start_net in sorted(comp.external.items()):
            start = (start_net, cfg)
            parent: dict = {start: None}
            queue: deque = deque([start])
            while queue:
                if budget <= 0:
                    truncated = True
                    break
                node = queue.popleft()
                budget -= 1
                net, mcfg = node
                out = exit_label.get(net)
                if out is not None:
                    cj = config_index.get(mcfg)
                    if cj is None:
                        cj = len(configs)
                        configs.append(mcfg)
                        config_index[mcfg] = cj
                        work.append(cj)
                    t = (ci, label, out, cj)
                    if t not in seen:
                        seen.add(t)
                        transitions.append(t)
                        steps = []
                        n = node
                        while parent[n] is not None:
                            n, via = parent[n]
                            steps.append(via)
                        steps.append(("enter", label))
                        steps.reverse()
                        steps.append(("exit", out))
                        witnesses[t] = tuple(steps)
                for inst, port in sorted(comp.nets[net]):
                    kind = kind_of[inst]
                    idx = order[inst]
                    for s, p, q, s2 in adjacency[kind].get(mcfg[idx], ()):
                        if p != port:
                            continue
                        dest = net_of[(inst, q)]
                        cfg2 = mcfg if s2 == s else (
                            mcfg[:idx] + (s2,) + mcfg[idx + 1:]
                        )
                        nxt = (dest, cfg2)
                        if nxt not in parent:
                            parent[nxt] = (node, ("via", inst, p, q))
                            queue.append(nxt)
    return PortAutomaton(
        comp.name,
        variant,
        tuple(sorted(comp.external)),
        configs,
        0,
        transitions,
        witnesses,
        truncated,
        None,
        {"configs": len(configs), "budget_left": max(budget, 0)},
    )


_BEHAVIOR_CACHE: dict[tuple, PortAutomaton] = {}


def behavior(name: str, variant: Variant, thick: bool = False,
             max_states: int = DEFAULT_CAP) -> PortAutomaton:
    """Cached automaton for a catalog gadget, optionally wall-thickened."""
    key = (name, variant.spec(), thick, max_states)
    if key in _BEHAVIOR_CACHE:
        return _BEHAVIOR_CACHE[key]
    g = builtin_gadget(name)
    if isinstance(g, GadgetDef):
        if thick:
            g = thicken(g)
        auto = port_behavior(g, variant, max_states)
    else:
        flat = g.flatten()
        kinds = sorted({kind for _, kind in flat.members})
        member = {k: behavior(k, variant, thick, max_states) for k in kinds}
        auto = composite_behavior(flat, variant, member, max_states)
        if thick:
            auto.gadget = f"{auto.gadget}-thick"
    _BEHAVIOR_CACHE[key] = auto
    return auto


# ---------------------------------------------------------------------------
# Bisimulation quotient


def minimize(a: PortAutomaton) -> PortAutomaton:
    """Quotient by strong bisimulation over (in, out) labelled transitions."""
    n = len(a.configs)
    adj = a.adjacency()
    block = [0] * n
    while True:
        groups: dict[tuple, list[int]] = {}
        for s in range(n):
            sig = (
                block[s],
                frozenset((p, q, block[t]) for _, p, q, t in adj.get(s, ())),
            )
            groups.setdefault(sig, []).append(s)
        if len(groups) == len(set(block)):
            break
        ordered = sorted(groups.values(), key=min)
        for bid, states in enumerate(ordered):
            for s in states:
                block[s] = bid
    ids = sorted(set(block), key=lambda b: min(s for s in range(n) if block[s] == b))
    remap = {b: i for i, b in enumerate(ids)}
    blocks = [remap[b] for b in block]
    reps: dict[int, int] = {}
    for s in range(n):
        reps.setdefault(blocks[s], s)
    q_transitions: list[Transition] = []
    q_witnesses: dict[Transition, tuple] = {}
    for t in sorted(a.transitions):
        s, p, q, d = t
        qt = (blocks[s], p, q, blocks[d])
        if qt not in q_witnesses:
            q_transitions.append(qt)
            q_witnesses[qt] = a.witnesses.get(t, ())
    return PortAutomaton(
        a.gadget,
        a.variant,
        a.ports,
        [a.configs[reps[i]] for i in range(len(ids))],
        blocks[a.initial],
        q_transitions,
        q_witnesses,
        a.truncated,
        a.base_boxes,
        dict(a.stats),
    )


def traversal_realizable(a: PortAutomaton, sequence: tuple[Pair, ...]) -> bool:
    """Whether some play realizes the exact traversal sequence from start."""
    states = {a.initial}
    adj = a.adjacency()
    for pair in sequence:
        states = {
            t for s in states for (_, p, q, t) in adj.get(s, ()) if (p, q) == pair
        }
        if not states:
            return False
    return True


def isomorphic(a: PortAutomaton, b: PortAutomaton) -> bool:
    """Exact isomorphism of (usually minimized) traversal automata."""
    if len(a.configs) != len(b.configs) or len(a.transitions) != len(b.transitions):
        return False
    if a.ports != b.ports:
        return False
    ta = {(s, p, q, t) for s, p, q, t in a.transitions}
    tb = {(s, p, q, t) for s, p, q, t in b.transitions}

    def signature(trans, n):
        sig = [defaultdict(int) for _ in range(n)]
        for s, p, q, t in trans:
            sig[s][("out", p, q)] += 1
            sig[t][("in", p, q)] += 1
        return [frozenset(d.items()) for d in sig]

    n = len(a.configs)
    sa, sb = signature(ta, n), signature(tb, n)
    if sorted(sa) != sorted(sb):
        return False
    candidates = [
        [v for v in range(n) if sb[v] == sa[u]] for u in range(n)
    ]
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def consistent(u, v):
        for s, p, q, t in a.transitions:
            if s == u and t in mapping and (v, p, q, mapping[t]) not in tb:
                return False
            if t == u and s in mapping and (mapping[s], p, q, v) not in tb:
                return False
            if s == u and t == u and (v, p, q, v) not in tb:
                return False
        return True

    def assign(u):
        if u == n:
            return True
        for v in candidates[u]:
            if v in used:
                continue
            if u == a.initial and v != b.initial:
                continue
            if not consistent(u, v):
                continue
            mapping[u] = v
            used.add(v)
            if assign(u + 1):
                return True
            del mapping[u]
            used.remove(v)
        return False

    return assign(0)


# ---------------------------------------------------------------------------
# Contract checking


@dataclass
class ClauseResult:
    clause: Clause
    passed: bool
    detail: str = ""


@dataclass
class VerificationReport:
    gadget: str
    variant: Variant
    results: list[ClauseResult]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        out = []
        for r in self.results:
            status = "PASS" if r.passed else "FAIL"
            tail = f" {r.detail}" if r.detail else ""
            out.append(
                f"CLAUSE {self.gadget} {self.variant.spec()} {r.clause.ident()} {status}{tail}"
            )
        return out


def _states_after(a: PortAutomaton, context: tuple[Pair, ...]) -> set[int]:
    states = {a.initial}
    adj = a.adjacency()
    for pair in context:
        states = {
            t for s in states for (_, p, q, t) in adj.get(s, ()) if (p, q) == pair
        }
    return states


def _closure(a: PortAutomaton, states: set[int],
             via: tuple[str, ...] | None = None) -> set[int]:
    adj = a.adjacency()
    seen = set(states)
    queue = deque(states)
    while queue:
        s = queue.popleft()
        for _, p, _, t in adj.get(s, ()):
            if via is not None and p not in via:
                continue
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def _trace_to_pair(a: PortAutomaton, context: tuple[Pair, ...],
                   pair: Pair, via: tuple[str, ...] | None = None) -> str:
    """A label trace showing the forbidden pair being realized."""
    reached = _states_after(a, context)
    adj = a.adjacency()
    parent: dict[int, tuple[int, Pair] | None] = {s: None for s in reached}
    queue = deque(reached)
    while queue:
        s = queue.popleft()
        for _, p, q, t in adj.get(s, ()):
            if via is not None and p not in via:
                continue
            if (p, q) == pair:
                labels = []
                cur = s
                while parent[cur] is not None:
                    cur, lab = parent[cur]
                    labels.append(lab)
                labels.reverse()
                trace = list(context) + labels + [pair]
                return "+".join(f"{x}>{y}" for x, y in trace)
            if t not in parent:
                parent[t] = (s, (p, q))
                queue.append(t)
    return ""


def check_contract(a: PortAutomaton, contract: SpecContract) -> VerificationReport:
    results: list[ClauseResult] = []
    for clause in contract.clauses:
        reached = _states_after(a, clause.context)
        adj = a.adjacency()
        enabled_in = {
            s for s in reached for (_, p, q, _) in adj.get(s, ())
            if (p, q) == clause.pair
        }
        if clause.kind == "required":
            if not reached:
                results.append(ClauseResult(clause, False, "context-unrealizable"))
            elif enabled_in:
                results.append(ClauseResult(clause, True))
            else:
                results.append(ClauseResult(clause, False, "not-enabled"))
            continue
        if a.truncated:
            results.append(ClauseResult(clause, False, "truncated-exploration"))
            continue
        if clause.kind == "forbidden-now":
            if enabled_in:
                results.append(
                    ClauseResult(clause, False, _trace_to_pair(a, clause.context, clause.pair))
                )
            else:
                results.append(ClauseResult(clause, True))
            continue
        # forbidden-ever / forbidden-via: nothing reachable from the context
        # (via the allowed entry ports, if scoped) realizes the pair
        via = clause.via if clause.kind == "forbidden-via" else None
        closure = _closure(a, reached, via)
        hit = any(
            (p, q) == clause.pair
            for s in closure
            for (_, p, q, _) in adj.get(s, ())
        )
        if hit:
            results.append(
                ClauseResult(
                    clause, False, _trace_to_pair(a, clause.context, clause.pair, via)
                )
            )
        else:
            results.append(ClauseResult(clause, True))
    return VerificationReport(contract.gadget, a.variant, results)


def verify_gadget(name: str, variant: Variant, thick: bool = False,
                  max_states: int = DEFAULT_CAP) -> VerificationReport:
    auto = behavior(name, variant, thick, max_states)
    report = check_contract(auto, contract_for(name))
    if thick:
        report.gadget = f"{name}-thick"
    return report


# ---------------------------------------------------------------------------
# Witness replay (conformance of the automaton with the concrete grid)


def replay_witness(gadget: GadgetDef, variant: Variant, auto: PortAutomaton,
                   transition: Transition) -> bool:
    """Re-run a stored witness through the move rules and check the result."""
    from .core import apply_move, with_robot

    witness = auto.witnesses[transition]
    src, p, q, dst = transition
    diff = auto.configs[src]
    boxes = set(gadget.level.boxes.symmetric_difference(diff))
    robot = None
    for step in witness:
        if step[0] == "enter":
            cell = gadget.ports[step[1]].cell
            assert step[1] == p and cell not in boxes
            robot = cell
        elif step[0] == "move":
            level = with_robot(gadget.level, robot)
            state = apply_move(level, State(robot, frozenset(boxes)), step[1], variant)
            robot = state.robot
            boxes = set(state.boxes)
        else:
            assert step[0] == "exit" and step[1] == q
            port = gadget.ports[step[1]]
            assert robot == port.cell
            j = step[2]
            if j:
                dx, dy = DIRECTIONS[port.inward]
                tail = (robot[0] + j * dx, robot[1] + j * dy)
                boxes.remove(tail)
                boxes.add(robot)
            robot = None
    final = frozenset(boxes).symmetric_difference(gadget.level.boxes)
    return final == auto.configs[dst]


# ---------------------------------------------------------------------------
# Theorem battery

CONTRACT_GADGETS = (
    "branch",
    "color-choose",
    "coloring",
    "consistency",
    "fork2",
    "fork3",
    "nand",
    "one-way",
    "xor",
)

THEOREM_VARIANTS = {
    "thm1": [Variant("pull", 1)],
    "thm2": [Variant("pull", 2), Variant("pull", 3), Variant("pull", None)],
    "thm3": [Variant("pullpull", 1), Variant("pullpull", 2), Variant("pullpull", 3)],
    "thm4": [Variant("pull", 1)],
}


def battery_cells() -> list[tuple[str, str, str]]:
    """All (theorem, gadget, variant-spec) battery jobs."""
    cells = []
    for g in CONTRACT_GADGETS:
        cells.append(("thm1", g, "pull:1"))
        for v in THEOREM_VARIANTS["thm3"]:
            cells.append(("thm3", g, v.spec()))
        cells.append(("thm4", g, "pull:1"))
    for g in catalog.ELEMENTARY:
        for v in THEOREM_VARIANTS["thm2"]:
            cells.append(("thm2", g, v.spec()))
    for g in sorted(ANNOTATED_MOVABLE):
        cells.append(("thm4-movable", g, "pull:1"))
    return sorted(cells)


def run_battery_cell(cell: tuple[str, str, str],
                     max_states: int = DEFAULT_CAP) -> list[str]:
    thm, gadget, vspec = cell
    variant = Variant.parse(vspec)
    rows: list[str] = []
    if thm == "thm4-movable":
        g = builtin_gadget(gadget)
        computed = movable_blocks(g, "all", variant, max_states)
        expected = ANNOTATED_MOVABLE[gadget]
        ok = computed == expected
        detail = ""
        if not ok:
            extra = sorted(computed - expected)
            missing = sorted(expected - computed)
            detail = f" extra={extra} missing={missing}"
        rows.append(
            f"MOVABLE {thm} {gadget} {vspec} matches-transcription "
            f"{'PASS' if ok else 'FAIL'}{detail}"
        )
        return rows
    thick = thm == "thm4"
    report = verify_gadget(gadget, variant, thick, max_states)
    for line in report.lines():
        rows.append(f"{line.split(' ', 1)[0]} {thm} {line.split(' ', 1)[1]}")
    if thm == "thm2":
        ref = minimize(behavior(gadget, Variant("pull", 1), False, max_states))
        cur = minimize(behavior(gadget, variant, False, max_states))
        ok = isomorphic(ref, cur)
        rows.append(f"ISO {thm} {gadget} {vspec} vs pull:1 {'PASS' if ok else 'FAIL'}")
    if thm == "thm3":
        ref = behavior(gadget, Variant("pull", 1), False, max_states)
        cur = behavior(gadget, variant, False, max_states)
        ok = cur.pairs() <= ref.pairs()
        rows.append(
            f"PAIRS {thm} {gadget} {vspec} subset-of pull:1 {'PASS' if ok else 'FAIL'}"
        )
    return rows


def theorem_battery(max_states: int = DEFAULT_CAP, jobs: int = 1) -> list[str]:
    """The full Theorems 1-4 verification matrix, as sorted report rows."""
    cells = battery_cells()
    rows: list[str] = []
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_battery_worker, [(c, max_states) for c in cells]):
                rows.extend(part)
    else:
        for cell in cells:
            rows.extend(run_battery_cell(cell, max_states))
    return sorted(rows)


def _battery_worker(args: tuple[tuple[str, str, str], int]) -> list[str]:
    return run_battery_cell(*args)
