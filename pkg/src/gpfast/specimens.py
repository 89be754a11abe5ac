"""Shipped example programs and independent reference oracles."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional

from .commands import Program
from .frontend import parse_program
from .interpreter import (
    DashedPathMonitor,
    Interpreter,
    Outcome,
    RedEdgeMonitor,
    RootCountMonitor,
    RunStats,
    capture_node_label,
)
from .store import HostGraph, Mark

NAMES = (
    "is-discrete",
    "is-connected-old",
    "is-connected",
    "is-dag",
    "bellman-ford",
    "transitive-closure",
)


class PreconditionError(ValueError):
    """The input graph violates a program's input specification."""


@lru_cache(maxsize=None)
def source(name: str) -> str:
    if name not in NAMES:
        raise KeyError(f"unknown specimen {name!r}; choose from {', '.join(NAMES)}")
    return resources.files("gpfast.programs").joinpath(f"{name}.gpr").read_text()


def load(name: str) -> Program:
    """Parse a specimen afresh (rules carry per-run counters)."""
    return parse_program(source(name))


# ----------------------------------------------------------------- oracles


def oracle_connected(g: HostGraph) -> bool:
    """Undirected connectivity by union-find; the empty graph is connected."""
    parent = {nid: nid for nid in g.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in g.edges.values():
        a, b = find(e.source.id), find(e.target.id)
        if a != b:
            parent[a] = b
    return len({find(x) for x in parent}) <= 1


def oracle_acyclic(g: HostGraph) -> bool:
    """Kahn peeling; a loop is a cycle."""
    indeg = {nid: 0 for nid in g.nodes}
    succ: dict = {nid: [] for nid in g.nodes}
    for e in g.edges.values():
        if e.source is e.target:
            return False
        indeg[e.target.id] += 1
        succ[e.source.id].append(e.target.id)
    queue = deque(n for n, d in indeg.items() if d == 0)
    seen = 0
    while queue:
        n = queue.popleft()
        seen += 1
        for t in succ[n]:
            indeg[t] -= 1
            if indeg[t] == 0:
                queue.append(t)
    return seen == len(indeg)


@dataclass
class BFResult:
    distances: dict  # node id -> int, or None when unreachable
    negative_cycle: bool


def oracle_bellman_ford(g: HostGraph, source_id: int) -> BFResult:
    """Textbook relaxation: n-1 rounds plus a detection round."""
    inf = None
    dist = {nid: inf for nid in g.nodes}
    dist[source_id] = 0
    edges = [(e.source.id, e.target.id, _weight(e.label)) for e in g.edges.values()]
    for _ in range(len(dist) - 1):
        changed = False
        for u, v, w in edges:
            if dist[u] is not None and (dist[v] is None or dist[u] + w < dist[v]):
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            break
    negative = any(
        dist[u] is not None and (dist[v] is None or dist[u] + w < dist[v]) for u, v, w in edges
    )
    return BFResult(dist, negative)


def _weight(label: tuple) -> int:
    if len(label) != 1 or type(label[0]) is not int:
        raise PreconditionError(f"edge label {label!r} is not an integer")
    return label[0]


# -------------------------------------------------------------- validators


def validate_dfs_input(g: HostGraph) -> None:
    """Grey unrooted nodes and unmarked edges."""
    for n in g.nodes.values():
        if n.mark != Mark.GREY:
            raise PreconditionError(f"node {n.id} is not grey")
        if n.rooted:
            raise PreconditionError(f"node {n.id} is rooted")
    for e in g.edges.values():
        if e.mark != Mark.NONE:
            raise PreconditionError(f"edge {e.id} is marked")


def validate_bf_input(g: HostGraph) -> int:
    """Check the shortest-path input conditions; returns the root id."""
    roots = list(g.root_nodes())
    if len(roots) != 1:
        raise PreconditionError(f"expected exactly one root, found {len(roots)}")
    for n in g.nodes.values():
        if n.mark != Mark.GREY:
            raise PreconditionError(f"node {n.id} is not grey")
    for e in g.edges.values():
        if e.mark != Mark.NONE:
            raise PreconditionError(f"edge {e.id} is marked")
        if e.source is e.target:
            raise PreconditionError(f"edge {e.id} is a loop")
        _weight(e.label)
    return roots[0]


def validate_discrete_input(g: HostGraph) -> None:
    for n in g.nodes.values():
        if n.mark != Mark.NONE or n.rooted:
            raise PreconditionError(f"node {n.id} is marked or rooted")


# ------------------------------------------------------------------ checks


def same_up_to_marks(before: HostGraph, after: HostGraph) -> bool:
    """Identical ids, labels, sources and targets, ignoring marks and roots."""
    if set(before.nodes) != set(after.nodes) or set(before.edges) != set(after.edges):
        return False
    for nid, n in before.nodes.items():
        if after.nodes[nid].label != n.label:
            return False
    for eid, e in before.edges.items():
        f = after.edges[eid]
        if (f.source.id, f.target.id, f.label) != (e.source.id, e.target.id, e.label):
            return False
    return True


def monitors_for(name: str) -> list:
    if name == "is-dag":
        return [RootCountMonitor(1), RedEdgeMonitor(1)]
    if name == "is-connected":
        return [RootCountMonitor(1), RedEdgeMonitor(1), DashedPathMonitor()]
    return []


def hooks_for(name: str) -> list:
    if name == "bellman-ford":
        return [capture_node_label(("set_counter", "count"), Mark.GREEN, "counter")]
    return []


@dataclass
class Verdict:
    passed: bool
    outcome: Outcome
    stats: RunStats
    expected: str
    detail: str = ""
    violations: list = field(default_factory=list)


def check_program(name: str, g: HostGraph, monitors: bool = False,
                  program: Optional[Program] = None, interp: Optional[Interpreter] = None) -> Verdict:
    """Run a specimen on ``g`` (consumed) and compare with its oracle."""
    if name in ("is-connected", "is-connected-old", "is-dag"):
        validate_dfs_input(g)
    elif name == "bellman-ford":
        root = validate_bf_input(g)
    elif name == "is-discrete":
        validate_discrete_input(g)
    before = g.copy()
    if interp is None:
        interp = Interpreter(program or load(name), monitors=monitors_for(name) if monitors else (),
                             hooks=hooks_for(name))
    outcome, stats = interp.run(g)
    detail = ""
    if name in ("is-connected", "is-connected-old", "is-dag"):
        want = oracle_connected(before) if name != "is-dag" else oracle_acyclic(before)
        expected = "graph" if want else "fail"
        passed = outcome.kind == expected
        if passed and outcome.kind == "graph" and not same_up_to_marks(before, g):
            passed, detail = False, "output differs from input beyond marks"
    elif name == "is-discrete":
        expected = "graph" if not before.edges else "fail"
        passed = outcome.kind == expected
    elif name == "bellman-ford":
        bf = oracle_bellman_ford(before, root)
        expected = "fail" if bf.negative_cycle else "graph"
        passed = outcome.kind == expected
        if passed and outcome.kind == "graph":
            detail = _check_bf_output(before, g, bf)
            passed = not detail
    elif name == "transitive-closure":
        expected = "graph"
        passed = outcome.kind == "graph"
        if passed:
            detail = _check_closure(before, g)
            passed = not detail
    else:
        raise KeyError(name)
    if stats.violations:
        passed = False
        detail = detail or stats.violations[0]
    elif not passed and not detail:
        detail = f"expected {expected}, got {outcome.kind}"
    return Verdict(passed, outcome, stats, expected, detail, list(stats.violations))


def _check_bf_output(before: HostGraph, after: HostGraph, bf: BFResult) -> str:
    if set(after.edges) != set(before.edges):
        return "edge set changed"
    for e in after.edges.values():
        if e.mark != Mark.BLUE:
            return f"edge {e.id} is not blue"
    expected_missing = Counter()
    for nid, n in before.nodes.items():
        d = bf.distances[nid]
        want = n.label + ((d,) if d is not None else ("f",))
        if nid in after.nodes:
            got = after.nodes[nid]
            if got.label != want:
                return f"node {nid}: label {got.label!r}, expected {want!r}"
            if n.indeg + n.outdeg == 0 and got.mark != Mark.GREY:
                return f"isolated node {nid} is not grey"
        else:
            if n.indeg + n.outdeg:
                return f"non-isolated node {nid} disappeared"
            expected_missing[want] += 1
    extra = [n for nid, n in after.nodes.items() if nid not in before.nodes]
    for n in extra:
        if n.mark != Mark.GREY or n.indeg + n.outdeg:
            return f"recreated node {n.id} is not an isolated grey node"
    if Counter(n.label for n in extra) != expected_missing:
        return "isolated node labels do not match"
    if any(n.mark == Mark.GREEN for n in after.nodes.values()):
        return "counter node left behind"
    return ""


def _check_closure(before: HostGraph, after: HostGraph) -> str:
    succ: dict = {nid: set() for nid in before.nodes}
    for e in before.edges.values():
        succ[e.source.id].add(e.target.id)
    have = {(e.source.id, e.target.id) for e in after.edges.values()}
    for u in before.nodes:
        seen, stack = set(), list(succ[u])
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(succ[v])
        for w in seen:
            if w != u and (u, w) not in have:
                return f"missing closure edge {u}->{w}"
    return ""


_DFS_FIXED = (
    ("empty", "[ | ]"),
    ("single", "[ (1, empty # grey) | ]"),
    ("loop", "[ (1, empty # grey) | (1, 1, 1, empty) ]"),
    ("two isolated", "[ (1, empty # grey) (2, empty # grey) | ]"),
    ("path", "[ (1, 1 # grey) (2, 2 # grey) (3, 3 # grey) | (1, 1, 2, empty) (2, 3, 2, empty) ]"),
    ("triangle", "[ (1, empty # grey) (2, empty # grey) (3, empty # grey) |"
     " (1, 1, 2, empty) (2, 2, 3, empty) (3, 3, 1, empty) ]"),
    ("diamond", "[ (1, empty # grey) (2, empty # grey) (3, empty # grey) (4, empty # grey) |"
     " (1, 1, 2, empty) (2, 1, 3, empty) (3, 2, 4, empty) (4, 3, 4, empty) ]"),
)

_FIXED = {
    "is-discrete": (
        ("empty", "[ | ]"),
        ("three nodes", "[ (1, empty) (2, 1) (3, \"a\") | ]"),
        ("one edge", "[ (1, empty) (2, empty) | (1, 1, 2, empty) ]"),
        ("loop", "[ (1, empty) | (1, 1, 1, empty) ]"),
    ),
    "is-connected": _DFS_FIXED,
    "is-connected-old": _DFS_FIXED,
    "is-dag": _DFS_FIXED,
    "transitive-closure": _DFS_FIXED,
    "bellman-ford": (
        ("single edge", "[ (1(R), empty # grey) (2, empty # grey) | (1, 1, 2, 5) ]"),
        ("unreachable", "[ (1(R), empty # grey) (2, empty # grey) (3, empty # grey) | (1, 1, 2, 3) ]"),
        ("negative cycle", "[ (1(R), empty # grey) (2, empty # grey) (3, empty # grey) |"
         " (1, 1, 2, 1) (2, 2, 3, -2) (3, 3, 2, 1) ]"),
        ("shortcut", "[ (1(R), empty # grey) (2, empty # grey) (3, empty # grey) |"
         " (1, 1, 2, 4) (2, 1, 3, 1) (3, 3, 2, -2) ]"),
        ("root only", "[ (1(R), 7 # grey) | ]"),
    ),
}


def fixed_inputs(name: str) -> tuple:
    """Small hand-written ``(title, host text)`` inputs for ``name``."""
    if name not in NAMES:
        raise KeyError(name)
    return _FIXED[name]


def random_input(name: str, seed: int, max_n: int = 40) -> HostGraph:
    """A seeded random graph satisfying ``name``'s input requirements."""
    from . import bench

    if name in ("is-connected", "is-connected-old", "is-dag"):
        return bench.random_dfs_graph(seed, max_n=max_n, max_m=2 * max_n)
    if name == "transitive-closure":
        return bench.random_dfs_graph(seed, max_n=min(max_n, 12), max_m=2 * min(max_n, 12), loops=False)
    if name == "bellman-ford":
        return bench.random_bf_graph(seed, max_n=max_n)
    if name == "is-discrete":
        import random

        rng = random.Random(seed)
        g = HostGraph()
        ids = [g.add_node(bench.random_label(rng), Mark.NONE) for _ in range(rng.randint(0, max_n))]
        if ids and rng.random() < 0.5:
            g.add_edge(rng.choice(ids), rng.choice(ids))
        return g
    raise KeyError(name)
