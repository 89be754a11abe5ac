"""Rules, search plans, rooted matching and rule application.

A rule is compiled once into a chain of closures in continuation-passing
style: each plan step enumerates host candidates for one left-hand item and
calls the next step, so backtracking is plain recursion bounded by the size
of the left-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from . import labels as L
from .labels import LabelError
from .store import ANY_EDGE_ROWS, ANY_NODE_BUCKETS, EDGE_ROW, IN, LOOP, NODE_BUCKET, OUT, HostGraph, Mark


class RuleError(Exception):
    """A rule is malformed."""


@dataclass(frozen=True)
class RuleNode:
    id: str
    label: object = L.Empty()
    mark: Mark = Mark.NONE
    rooted: bool = False


@dataclass(frozen=True)
class RuleEdge:
    id: str
    source: str
    target: str
    label: object = L.Empty()
    mark: Mark = Mark.NONE
    bidirectional: bool = False


@dataclass(frozen=True)
class RuleGraph:
    nodes: tuple = ()
    edges: tuple = ()

    def node(self, nid: str) -> Optional[RuleNode]:
        for n in self.nodes:
            if n.id == nid:
                return n
        return None

    def edge(self, eid: str) -> Optional[RuleEdge]:
        for e in self.edges:
            if e.id == eid:
                return e
        return None


@dataclass
class Match:
    """Result of a successful match: host ids plus the assignment."""

    node_map: dict
    edge_map: dict
    alpha: dict
    node_attempts: int = 0
    edge_attempts: int = 0

    @property
    def attempts(self) -> int:
        return self.node_attempts + self.edge_attempts


@dataclass(frozen=True)
class PlanStep:
    kind: str  # bind-root, bind-node-by-mark, extend-edge, bind-loop, check
    item: str
    via: Optional[str] = None
    orientation: Optional[str] = None
    fresh: bool = True

    def __str__(self) -> str:
        if self.kind == "extend-edge":
            return f"{self.kind}({self.item} from {self.via}, {self.orientation})"
        if self.kind == "bind-loop":
            return f"{self.kind}({self.item} at {self.via})"
        return f"{self.kind}({self.item})"


class Rule:
    """A compiled rule ``<L <- K -> R, c>``.

    ``stats`` holds ``[calls, successes, node_attempts, edge_attempts]`` and
    is reset by the interpreter at the start of every run.
    """

    __slots__ = (
        "name", "decls", "lhs", "rhs", "condition", "interface", "plan", "stats",
        "_find", "_apply", "_nb", "_eb", "_alpha", "_lnodes", "_ledges",
    )

    def __init__(self, name: str, decls: dict, lhs: RuleGraph, rhs: RuleGraph, condition=None):
        self.name = name
        self.decls = dict(decls)
        self.lhs = lhs
        self.rhs = rhs
        self.condition = condition
        self.stats = [0, 0, 0, 0]
        self._validate()
        self.interface = tuple(n.id for n in lhs.nodes if rhs.node(n.id) is not None)
        self._lnodes = {n.id: i for i, n in enumerate(lhs.nodes)}
        self._ledges = {e.id: i for i, e in enumerate(lhs.edges)}
        self._nb: list = [None] * len(lhs.nodes)
        self._eb: list = [None] * len(lhs.edges)
        self._alpha: dict = {}
        self.plan, self._find = self._compile_plan()
        self._apply = self._compile_apply()

    def __repr__(self) -> str:
        return f"<Rule {self.name}>"

    # ------------------------------------------------------------ checks

    def _validate(self) -> None:
        lhs, rhs = self.lhs, self.rhs
        for graph, side in ((lhs, "left"), (rhs, "right")):
            ids = [n.id for n in graph.nodes]
            if len(set(ids)) != len(ids):
                raise RuleError(f"{self.name}: duplicate node id on the {side}-hand side")
            eids = [e.id for e in graph.edges]
            if len(set(eids)) != len(eids):
                raise RuleError(f"{self.name}: duplicate edge id on the {side}-hand side")
            for n in graph.nodes:
                if n.mark == Mark.DASHED:
                    raise RuleError(f"{self.name}: dashed is not a node mark (node {n.id})")
            for e in graph.edges:
                if e.mark == Mark.GREY:
                    raise RuleError(f"{self.name}: grey is not an edge mark (edge {e.id})")
                if graph.node(e.source) is None or graph.node(e.target) is None:
                    raise RuleError(f"{self.name}: edge {e.id} has an unknown endpoint")
                if e.bidirectional and e.source == e.target:
                    raise RuleError(f"{self.name}: loop {e.id} cannot be bidirectional")
        for name, t in self.decls.items():
            if t not in L.TYPES:
                raise RuleError(f"{self.name}: unknown type {t} for {name}")
        lvars = set()
        for item in lhs.nodes + lhs.edges:
            self._check_typed(item.label)
            if not L.is_simple(item.label):
                raise RuleError(f"{self.name}: left-hand label of {item.id} is not simple")
            lvars |= L.variables(item.label)
        lnode_ids = {n.id for n in lhs.nodes}
        for item in rhs.nodes + rhs.edges:
            self._check_typed(item.label)
            extra = L.variables(item.label) - lvars
            if extra:
                raise RuleError(f"{self.name}: variable {sorted(extra)[0]} on the right-hand side does not occur on the left")
            bad = L.node_refs(item.label) - lnode_ids
            if bad:
                raise RuleError(f"{self.name}: degree of unknown left-hand node {sorted(bad)[0]}")
        if self.condition is not None:
            try:
                L.check_condition(self.condition)
            except LabelError as exc:
                raise RuleError(f"{self.name}: {exc}") from None
            extra = L.variables(self.condition) - lvars
            if extra:
                raise RuleError(f"{self.name}: condition variable {sorted(extra)[0]} does not occur on the left")
            bad = L.node_refs(self.condition) - lnode_ids
            if bad:
                raise RuleError(f"{self.name}: condition refers to unknown node {sorted(bad)[0]}")
        for n in rhs.nodes:
            ln = lhs.node(n.id)
            if n.mark == Mark.ANY and (ln is None or ln.mark != Mark.ANY):
                raise RuleError(f"{self.name}: right-hand node {n.id} is marked any without a matching any on the left")
        for e in rhs.edges:
            le = lhs.edge(e.id)
            preserved = le is not None and {le.source, le.target} == {e.source, e.target}
            if le is not None and not preserved:
                raise RuleError(f"{self.name}: edge {e.id} changes its endpoints")
            if le is not None and (le.source, le.target) != (e.source, e.target) and not le.bidirectional:
                raise RuleError(f"{self.name}: edge {e.id} changes direction")
            if e.mark == Mark.ANY and (le is None or le.mark != Mark.ANY):
                raise RuleError(f"{self.name}: right-hand edge {e.id} is marked any without a matching any on the left")
            if e.bidirectional and (le is None or not le.bidirectional):
                raise RuleError(f"{self.name}: new edge {e.id} cannot be bidirectional")
            if le is not None and le.bidirectional and not e.bidirectional:
                raise RuleError(f"{self.name}: preserved edge {e.id} must stay bidirectional")
            for end in (e.source, e.target):
                if rhs.node(end) is None:
                    raise RuleError(f"{self.name}: edge {e.id} has an unknown endpoint")

    def _check_typed(self, e) -> None:
        for name in L.variables(e):
            if name not in self.decls:
                raise RuleError(f"{self.name}: undeclared variable {name}")
        try:
            _retype(e, self.decls)
            L.check_expr(e)
        except LabelError as exc:
            raise RuleError(f"{self.name}: {exc}") from None

    # ------------------------------------------------------------- plan

    def _compile_plan(self):
        lhs = self.lhs
        nodes, edges = lhs.nodes, lhs.edges
        nidx = {n.id: i for i, n in enumerate(nodes)}
        plan: list = []
        bound: set = set()
        done_edges: set = set()

        def explore(queue: list) -> None:
            while queue:
                u = queue.pop(0)
                for ei, e in enumerate(edges):
                    if ei in done_edges or u not in (e.source, e.target):
                        continue
                    done_edges.add(ei)
                    if e.source == e.target:
                        plan.append(PlanStep("bind-loop", e.id, u))
                        continue
                    other = e.target if e.source == u else e.source
                    if e.bidirectional:
                        orient = "both"
                    else:
                        orient = "out" if e.source == u else "in"
                    plan.append(PlanStep("extend-edge", e.id, u, orient, other not in bound))
                    if other not in bound:
                        bound.add(other)
                        queue.append(other)

        for n in nodes:
            if n.rooted:
                plan.append(PlanStep("bind-root", n.id))
                bound.add(n.id)
        explore([n.id for n in nodes if n.rooted])
        for n in nodes:
            if n.id not in bound:
                plan.append(PlanStep("bind-node-by-mark", n.id))
                bound.add(n.id)
                explore([n.id])
        plan.append(PlanStep("check", "dangling+condition"))

        # build closures back to front
        k = self._final_step(nidx)
        for step in reversed(plan[:-1]):
            if step.kind == "bind-root":
                k = self._root_step(nidx[step.item], k)
            elif step.kind == "bind-node-by-mark":
                k = self._scan_step(nidx[step.item], k)
            elif step.kind == "bind-loop":
                k = self._loop_step(self._ledges[step.item], nidx[step.via], k)
            else:
                e = edges[self._ledges[step.item]]
                other = e.target if step.via == e.source else e.source
                k = self._edge_step(self._ledges[step.item], nidx[step.via], nidx[other], step.orientation, not step.fresh, k)
        return tuple(plan), k

    def _node_test(self, i: int):
        n = self.lhs.nodes[i]
        return int(n.mark), L.compile_unifier(n.label)

    def _root_step(self, i: int, k: Callable) -> Callable:
        mark, unify = self._node_test(i)
        nb, a, stats = self._nb, self._alpha, self.stats
        is_any = mark == Mark.ANY

        def bind_root(g):
            h = g._rhead
            while h is not None:
                stats[2] += 1
                if not h.matched and (h.mark != 0 if is_any else h.mark == mark):
                    got = unify(h.label, a)
                    if got is not None:
                        nb[i] = h
                        h.matched = True
                        if k(g):
                            h.matched = False
                            return True
                        h.matched = False
                        for name in got:
                            del a[name]
                h = h.rnext
            return False

        return bind_root

    def _scan_step(self, i: int, k: Callable) -> Callable:
        mark, unify = self._node_test(i)
        nb, a, stats = self._nb, self._alpha, self.stats
        rooted = self.lhs.nodes[i].rooted
        is_any = mark == Mark.ANY
        buckets = ANY_NODE_BUCKETS if is_any else (NODE_BUCKET[mark],)

        def try_node(g, h):
            if h.matched or (rooted and not h.rooted):
                return False
            got = unify(h.label, a)
            if got is None:
                return False
            nb[i] = h
            h.matched = True
            if k(g):
                h.matched = False
                return True
            h.matched = False
            for name in got:
                del a[name]
            return False

        def bind_by_mark(g):
            if g._legacy:
                for h in g._slots:
                    if h is None:
                        continue
                    stats[2] += 1
                    if (h.mark != 0 if is_any else h.mark == mark) and try_node(g, h):
                        return True
                return False
            for b in buckets:
                h = g._bhead[b]
                while h is not None:
                    stats[2] += 1
                    if try_node(g, h):
                        return True
                    h = h.bnext
            return False

        return bind_by_mark

    def _edge_test(self, ei: int):
        e = self.lhs.edges[ei]
        rows = ANY_EDGE_ROWS if e.mark == Mark.ANY else (EDGE_ROW[e.mark],)
        return rows, L.compile_unifier(e.label)

    def _loop_step(self, ei: int, ui: int, k: Callable) -> Callable:
        rows, unify = self._edge_test(ei)
        cells_idx = [2 * (r * 3 + LOOP) for r in rows]
        nb, eb, a, stats = self._nb, self._eb, self._alpha, self.stats

        def bind_loop(g):
            cells = nb[ui].cells
            for c in cells_idx:
                e = cells[c]
                while e is not None:
                    stats[3] += 1
                    if not e.matched:
                        got = unify(e.label, a)
                        if got is not None:
                            eb[ei] = e
                            e.matched = True
                            if k(g):
                                e.matched = False
                                return True
                            e.matched = False
                            for name in got:
                                del a[name]
                    e = e.snext
            return False

        return bind_loop

    def _edge_step(self, ei, ui, vi, orient, to_bound, k) -> Callable:
        rows, unify = self._edge_test(ei)
        cells_idx = []
        if orient in ("out", "both"):
            cells_idx += [(2 * (r * 3 + OUT), True) for r in rows]
        if orient in ("in", "both"):
            cells_idx += [(2 * (r * 3 + IN), False) for r in rows]
        nb, eb, a, stats = self._nb, self._eb, self._alpha, self.stats
        vmark, vunify = self._node_test(vi)
        v_any = vmark == Mark.ANY

        if to_bound:
            def extend_to_bound(g):
                cells = nb[ui].cells
                want = nb[vi]
                for c, is_out in cells_idx:
                    e = cells[c]
                    while e is not None:
                        stats[3] += 1
                        if not e.matched and (e.target if is_out else e.source) is want:
                            got = unify(e.label, a)
                            if got is not None:
                                eb[ei] = e
                                e.matched = True
                                if k(g):
                                    e.matched = False
                                    return True
                                e.matched = False
                                for name in got:
                                    del a[name]
                        e = e.snext if is_out else e.tnext
                return False

            return extend_to_bound

        def extend(g):
            cells = nb[ui].cells
            for c, is_out in cells_idx:
                e = cells[c]
                while e is not None:
                    stats[3] += 1
                    if not e.matched:
                        h = e.target if is_out else e.source
                        if not h.matched and (h.mark != 0 if v_any else h.mark == vmark):
                            got = unify(e.label, a)
                            if got is not None:
                                got2 = vunify(h.label, a)
                                if got2 is not None:
                                    eb[ei] = e
                                    nb[vi] = h
                                    e.matched = True
                                    h.matched = True
                                    if k(g):
                                        e.matched = False
                                        h.matched = False
                                        return True
                                    e.matched = False
                                    h.matched = False
                                    for name in got2:
                                        del a[name]
                                for name in got:
                                    del a[name]
                    e = e.snext if is_out else e.tnext
            return False

        return extend

    def _final_step(self, nidx: dict) -> Callable:
        lhs = self.lhs
        nb = self._nb
        deleted = [i for i, n in enumerate(lhs.nodes) if self.rhs.node(n.id) is None]
        needs = []
        for i in deleted:
            nid = lhs.nodes[i].id
            inc = sum((e.source == nid) + (e.target == nid) for e in lhs.edges)
            needs.append((i, inc))
        cond = None
        if self.condition is not None:
            cond = L.compile_condition(self.condition, nidx)
        a = self._alpha

        if not needs and cond is None:
            return lambda g: True

        def final(g):
            for i, inc in needs:
                h = nb[i]
                if h.indeg + h.outdeg != inc:
                    return False
            if cond is not None and not cond(a, nb):
                return False
            return True

        return final

    # ------------------------------------------------------------ apply

    def _compile_apply(self) -> Callable:
        lhs, rhs = self.lhs, self.rhs
        lnodes = self._lnodes
        nb, eb, a = self._nb, self._eb, self._alpha
        evals = []  # closures evaluated before any mutation

        def slot(fn) -> int:
            evals.append(fn)
            return len(evals) - 1

        preserved_edges = []
        del_edges = []
        for ei, le in enumerate(lhs.edges):
            re = rhs.edge(le.id)
            if re is None:
                del_edges.append(ei)
                continue
            lab = None if re.label == le.label else slot(L.compile_list(re.label, lnodes))
            mark = None if re.mark == Mark.ANY or re.mark == le.mark else int(re.mark)
            if lab is not None or mark is not None:
                preserved_edges.append((ei, lab, mark))
        del_nodes = [i for i, n in enumerate(lhs.nodes) if rhs.node(n.id) is None]
        updates = []
        for i, ln in enumerate(lhs.nodes):
            rn = rhs.node(ln.id)
            if rn is None:
                continue
            lab = None if rn.label == ln.label else slot(L.compile_list(rn.label, lnodes))
            mark = None if rn.mark == Mark.ANY or rn.mark == ln.mark else int(rn.mark)
            if rn.rooted:
                root = True
            elif ln.rooted:
                root = False
            else:
                root = None
            if lab is not None or mark is not None or root is not None:
                updates.append((i, lab, mark, root))
        new_nodes = []
        new_pos = {}
        for rn in rhs.nodes:
            if rn.id in lnodes:
                continue
            new_pos[rn.id] = len(new_nodes)
            new_nodes.append((slot(L.compile_list(rn.label, lnodes)), int(rn.mark), rn.rooted))
        new_edges = []
        for re in rhs.edges:
            if lhs.edge(re.id) is not None:
                continue
            ends = []
            for end in (re.source, re.target):
                ends.append((True, lnodes[end]) if end in lnodes else (False, new_pos[end]))
            new_edges.append((ends[0], ends[1], slot(L.compile_list(re.label, lnodes)), int(re.mark)))

        def apply(g: HostGraph) -> None:
            vals = [f(a, nb) for f in evals]
            for ei in del_edges:
                g._delete_edge(eb[ei])
            for i in del_nodes:
                g._delete_node(nb[i])
            for i, lab, mark, root in updates:
                h = nb[i]
                if lab is not None:
                    v = vals[lab]
                    if v != h.label:
                        g._set_node_label(h, v)
                if mark is not None:
                    g._set_node_mark(h, mark)
                if root is not None:
                    g._set_root(h, root)
            created = [g._add_node(vals[lab], mark, rooted) for lab, mark, rooted in new_nodes]
            for ei, lab, mark in preserved_edges:
                e = eb[ei]
                if lab is not None:
                    v = vals[lab]
                    if v != e.label:
                        g._set_edge_label(e, v)
                if mark is not None:
                    g._set_edge_mark(e, mark)
            for (s_old, s), (t_old, t), lab, mark in new_edges:
                src = nb[s] if s_old else created[s]
                tgt = nb[t] if t_old else created[t]
                g._add_edge(src, tgt, vals[lab], mark)

        return apply

    # ---------------------------------------------------------- entry points

    def apply_once(self, g: HostGraph) -> bool:
        """Find a match and apply it; returns whether the rule applied."""
        stats = self.stats
        stats[0] += 1
        self._alpha.clear()
        if self._find(g):
            self._apply(g)
            stats[1] += 1
            return True
        return False

    def matches(self, g: HostGraph) -> bool:
        """Match without applying."""
        self._alpha.clear()
        return self._find(g)

    def find_match(self, g: HostGraph) -> Optional[Match]:
        before = (self.stats[2], self.stats[3])
        self._alpha.clear()
        ok = self._find(g)
        na, ea = self.stats[2] - before[0], self.stats[3] - before[1]
        if not ok:
            return None
        return Match(
            {n.id: self._nb[i].id for i, n in enumerate(self.lhs.nodes)},
            {e.id: self._eb[i].id for i, e in enumerate(self.lhs.edges)},
            dict(self._alpha), na, ea,
        )

    def apply_match(self, g: HostGraph, m: Match) -> None:
        """Apply the rule at a match previously returned by ``find_match``."""
        for i, n in enumerate(self.lhs.nodes):
            self._nb[i] = g.node(m.node_map[n.id])
        for i, e in enumerate(self.lhs.edges):
            self._eb[i] = g.edge(m.edge_map[e.id])
        self._alpha.clear()
        self._alpha.update(m.alpha)
        self._apply(g)

    def reset_stats(self) -> None:
        self.stats[:] = [0, 0, 0, 0]


def check_dangling(g: HostGraph, rule: Rule, m: Match) -> bool:
    """Whether deleting the match's non-interface nodes leaves no dangling edge.

    Compares host degrees with the number of matched incidences, so the cost
    depends only on the rule.
    """
    for n in rule.lhs.nodes:
        if rule.rhs.node(n.id) is not None:
            continue
        h = g.node(m.node_map[n.id])
        inc = sum((e.source == n.id) + (e.target == n.id) for e in rule.lhs.edges)
        if h.indeg + h.outdeg != inc:
            return False
    return True


def _retype(e, decls: dict) -> None:
    """Verify every Var in ``e`` carries its declared type."""
    for sub in _walk(e):
        if isinstance(sub, L.Var) and decls.get(sub.name) != sub.type:
            raise LabelError(f"variable {sub.name} used with type {sub.type}, declared {decls.get(sub.name)}")


def _walk(e):
    yield e
    if isinstance(e, L.Concat):
        for item in e.items:
            yield from _walk(item)
    elif isinstance(e, (L.StrCat, L.BinOp)):
        yield from _walk(e.left)
        yield from _walk(e.right)
    elif isinstance(e, L.Neg):
        yield from _walk(e.operand)
    elif isinstance(e, L.Length):
        yield e.var
