"""Command-language interpreter.

Commands are compiled into closures ``f(g) -> status`` with status one of
SUCCESS, FAIL or BREAK.  Copy semantics for ``if``/``try`` conditions and
failed loop iterations come from the journal, so no graph is ever copied.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import commands as C
from .journal import Journal
from .labels import GPRuntimeError
from .store import HostGraph, Mark

FAIL, SUCCESS, BREAK = 0, 1, 2

DEFAULT_STEP_LIMIT = 10**9
DEFAULT_WALL_LIMIT = 600.0


class _Timeout(Exception):
    pass


@dataclass
class Outcome:
    """Result of a run: ``graph``, ``fail``, ``runtime_error`` or ``timeout``."""

    kind: str
    graph: Optional[HostGraph] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.kind == "graph"


@dataclass
class RuleStat:
    calls: int = 0
    successes: int = 0
    node_attempts: int = 0
    edge_attempts: int = 0

    @property
    def failures(self) -> int:
        return self.calls - self.successes

    @property
    def attempts(self) -> int:
        return self.node_attempts + self.edge_attempts


@dataclass
class LoopStat:
    entered: int = 0
    succeeded: int = 0
    broke: int = 0
    failed: int = 0


@dataclass
class RunStats:
    rules: dict = field(default_factory=dict)
    loops: dict = field(default_factory=dict)
    applications: int = 0
    rule_calls: int = 0
    wall_time: float = 0.0
    rollbacks: int = 0
    violations: list = field(default_factory=list)
    captures: dict = field(default_factory=dict)
    monitor_checks: int = 0

    def rule(self, name: str) -> RuleStat:
        return self.rules.get(name, RuleStat())

    def report(self) -> str:
        """Flat ``key = value`` block."""
        lines = [
            f"wall_time_s = {self.wall_time:.6f}",
            f"rule_calls = {self.rule_calls}",
            f"applications = {self.applications}",
            f"rollbacks = {self.rollbacks}",
            f"monitor_checks = {self.monitor_checks}",
            f"monitor_violations = {len(self.violations)}",
        ]
        for name, s in self.rules.items():
            lines.append(
                f"rule.{name} = calls:{s.calls} successes:{s.successes} "
                f"failures:{s.failures} attempts:{s.attempts}"
            )
        for text, s in self.loops.items():
            lines.append(
                f"loop.{text} = entered:{s.entered} succeeded:{s.succeeded} broke:{s.broke} failed:{s.failed}"
            )
        for v in self.violations[:20]:
            lines.append(f"violation = {v}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = ["rule,calls,successes,failures,attempts"]
        for name, s in self.rules.items():
            rows.append(f"{name},{s.calls},{s.successes},{s.failures},{s.attempts}")
        return "\n".join(rows) + "\n"


class Interpreter:
    """Runs one program; compiled command closures are reused across runs."""

    def __init__(
        self,
        program: C.Program,
        step_limit: int = DEFAULT_STEP_LIMIT,
        wall_limit: float = DEFAULT_WALL_LIMIT,
        monitors=(),
        hooks=(),
    ):
        self.program = program
        self.step_limit = step_limit
        self.wall_limit = wall_limit
        self.monitors = list(monitors)
        self.hooks = list(hooks)
        self.journal: Optional[Journal] = None
        self.calls = 0
        self.spins = 0
        self._deadline = 0.0
        self._violations: list = []
        self._captures: dict = {}
        self._loop_stats: dict = {}
        self._proc_cache: dict = {}
        self._main = self.compile(program.main)

    # ------------------------------------------------------------ compile

    def compile(self, c) -> Callable:
        if isinstance(c, C.RuleSetCall):
            return self._compile_call(c)
        if isinstance(c, C.ProcCall):
            return self._compile_proc(c.proc)
        if isinstance(c, C.Seq):
            fs = [self.compile(x) for x in c.items]

            def seq(g):
                for f in fs:
                    r = f(g)
                    if r != SUCCESS:
                        return r
                return SUCCESS

            return seq
        if isinstance(c, C.Loop):
            return self._compile_loop(c)
        if isinstance(c, C.OrCmd):
            # left-biased choice: the right branch is never taken
            return self.compile(c.left)
        if isinstance(c, C.If):
            return self._compile_if(c)
        if isinstance(c, C.Try):
            return self._compile_try(c)
        if isinstance(c, C.Break):
            return lambda g: BREAK
        if isinstance(c, C.Skip):
            return lambda g: SUCCESS
        if isinstance(c, C.Fail):
            return lambda g: FAIL
        raise TypeError(f"not a command: {c!r}")

    def _compile_proc(self, p: C.Procedure) -> Callable:
        key = id(p)
        if key not in self._proc_cache:
            cell: list = []
            self._proc_cache[key] = lambda g: cell[0](g)
            cell.append(self.compile(p.body))
        return self._proc_cache[key]

    def _rule_hook(self, g: HostGraph, rule) -> None:
        self._checks += len(self.monitors)
        for m in self.monitors:
            msg = m(g, rule)
            if msg:
                self._violations.append(f"after {rule.name}: {msg}")
        for h in self.hooks:
            h(g, rule, self._captures)

    def _compile_call(self, c: C.RuleSetCall) -> Callable:
        rules = c.rules
        interp = self

        def tick():
            n = interp.calls = interp.calls + 1
            if n > interp.step_limit:
                raise _Timeout(f"step limit {interp.step_limit} reached")
            if not n & 1023 and time.perf_counter() > interp._deadline:
                raise _Timeout(f"wall limit {interp.wall_limit}s reached")

        if not rules:
            return lambda g: FAIL
        if len(rules) == 1:
            r = rules[0]
            apply_once = r.apply_once

            def call_one(g):
                n = interp.calls = interp.calls + 1
                if n > interp.step_limit or not n & 1023:
                    interp.calls = n - 1
                    tick()
                if apply_once(g):
                    if interp.monitors or interp.hooks:
                        interp._rule_hook(g, r)
                    return SUCCESS
                return FAIL

            return call_one

        def call_set(g):
            for r in rules:
                tick()
                if r.apply_once(g):
                    if interp.monitors or interp.hooks:
                        interp._rule_hook(g, r)
                    return SUCCESS
            return FAIL

        return call_set

    def _compile_loop(self, c: C.Loop) -> Callable:
        body = self.compile(c.body)
        text = C.format_command(c)
        key, k = text, 1
        while key in self._loop_stats:
            k += 1
            key = f"{text}#{k}"
        ls = self._loop_stats[key] = LoopStat()
        interp = self

        def loop(g):
            j = interp.journal
            while True:
                # rule-free bodies such as skip! never reach the per-call check
                interp.spins += 1
                if not interp.spins & 1023 and time.perf_counter() > interp._deadline:
                    raise _Timeout(f"wall limit {interp.wall_limit}s reached")
                j.push()
                ls.entered += 1
                r = body(g)
                if r == SUCCESS:
                    j.commit()
                    ls.succeeded += 1
                elif r == BREAK:
                    j.commit()
                    ls.broke += 1
                    return SUCCESS
                else:
                    j.rollback()
                    ls.failed += 1
                    return SUCCESS

        return loop

    def _compile_if(self, c: C.If) -> Callable:
        cond = self.compile(c.cond)
        then = self.compile(c.then) if c.then is not None else (lambda g: SUCCESS)
        orelse = self.compile(c.orelse) if c.orelse is not None else (lambda g: SUCCESS)
        interp = self

        def if_(g):
            j = interp.journal
            j.push()
            r = cond(g)
            j.rollback()
            return then(g) if r == SUCCESS else orelse(g)

        return if_

    def _compile_try(self, c: C.Try) -> Callable:
        cond = self.compile(c.cond)
        then = self.compile(c.then) if c.then is not None else (lambda g: SUCCESS)
        orelse = self.compile(c.orelse) if c.orelse is not None else (lambda g: SUCCESS)
        interp = self

        def try_(g):
            j = interp.journal
            j.push()
            r = cond(g)
            if r == SUCCESS:
                j.commit()
                return then(g)
            j.rollback()
            return orelse(g)

        return try_

    # ---------------------------------------------------------------- run

    def _reset(self, g: HostGraph) -> None:
        for r in self.program.all_rules():
            r.reset_stats()
        for ls in self._loop_stats.values():
            ls.entered = ls.succeeded = ls.broke = ls.failed = 0
        self.calls = 0
        self.spins = 0
        self._violations = []
        self._checks = 0
        self._captures = {}
        self.journal = Journal(g)

    def run(self, g: HostGraph):
        """Execute ``Main`` on ``g`` in place; returns ``(Outcome, RunStats)``."""
        self._reset(g)
        self._deadline = time.perf_counter() + self.wall_limit
        t0 = time.perf_counter()
        try:
            r = self._main(g)
            outcome = Outcome("graph", g) if r != FAIL else Outcome("fail")
        except GPRuntimeError as exc:
            self.journal.unwind(0)
            outcome = Outcome("runtime_error", message=str(exc))
        except _Timeout as exc:
            self.journal.unwind(0)
            outcome = Outcome("timeout", message=str(exc))
        elapsed = time.perf_counter() - t0
        stats = self._collect(elapsed)
        # drop the graph reference so it is not freed inside the next timed run
        self.journal = None
        return outcome, stats

    def execute(self, command, g: HostGraph) -> int:
        """Run a single command on ``g`` under the current journal.

        The caller owns frame management; used to test rollback fidelity.
        """
        if self.journal is None or self.journal.graph is not g:
            self._reset(g)
        self._deadline = time.perf_counter() + self.wall_limit
        return self.compile(command)(g)

    def trial(self, command, g: HostGraph) -> str:
        """Run ``command`` inside a journal frame, then roll everything back.

        Returns the outcome kind the command reached before the rollback.
        """
        self._reset(g)
        self._deadline = time.perf_counter() + self.wall_limit
        self.journal.push()
        try:
            kind = "graph" if self.compile(command)(g) != FAIL else "fail"
        except GPRuntimeError:
            kind = "runtime_error"
        except _Timeout:
            kind = "timeout"
        self.journal.unwind(0)
        self.journal = None
        return kind

    def _collect(self, elapsed: float) -> RunStats:
        stats = RunStats()
        for r in self.program.all_rules():
            calls, succ, na, ea = r.stats
            name = r.name
            if name in stats.rules:
                s = stats.rules[name]
                s.calls += calls
                s.successes += succ
                s.node_attempts += na
                s.edge_attempts += ea
            else:
                stats.rules[name] = RuleStat(calls, succ, na, ea)
            stats.applications += succ
            stats.rule_calls += calls
        for key, ls in self._loop_stats.items():
            stats.loops[key] = LoopStat(ls.entered, ls.succeeded, ls.broke, ls.failed)
        stats.wall_time = elapsed
        stats.rollbacks = self.journal.rollbacks
        stats.violations = self._violations
        stats.captures = self._captures
        stats.monitor_checks = self._checks
        return stats


def run(program: C.Program, g: HostGraph, step_limit: int = DEFAULT_STEP_LIMIT,
        wall_limit: float = DEFAULT_WALL_LIMIT, monitors=(), hooks=()):
    """Convenience wrapper: compile and run ``program`` once."""
    return Interpreter(program, step_limit, wall_limit, monitors, hooks).run(g)


# ---------------------------------------------------------------- monitors


class RootCountMonitor:
    """At most ``limit`` root nodes."""

    __slots__ = ("limit",)

    def __init__(self, limit: int = 1):
        self.limit = limit

    def __call__(self, g: HostGraph, rule) -> Optional[str]:
        n = sum(1 for _ in g.root_nodes())
        if n > self.limit:
            return f"{n} root nodes"
        return None


class RedEdgeMonitor:
    """At most ``limit`` red edges."""

    __slots__ = ("limit",)

    def __init__(self, limit: int = 1):
        self.limit = limit

    def __call__(self, g: HostGraph, rule) -> Optional[str]:
        n = sum(1 for e in g.edges.values() if e.mark == Mark.RED)
        if n > self.limit:
            return f"{n} red edges"
        return None


class DashedPathMonitor:
    """Dashed edges form a simple path of blue nodes ending at the root.

    Edges are taken undirected because the traversal follows edges in
    either direction.
    """

    __slots__ = ()

    def __call__(self, g: HostGraph, rule) -> Optional[str]:
        adj: dict = {}
        count = 0
        for e in g.edges.values():
            if e.mark != Mark.DASHED:
                continue
            count += 1
            if e.source is e.target:
                return f"dashed loop at node {e.source.id}"
            adj.setdefault(e.source.id, []).append(e.target.id)
            adj.setdefault(e.target.id, []).append(e.source.id)
        roots = list(g.root_nodes())
        if not count:
            return None
        if len(roots) != 1:
            return f"dashed path with {len(roots)} roots"
        root = roots[0]
        if root not in adj:
            return "root is not on the dashed path"
        if len(adj[root]) != 1:
            return "root is not an endpoint of the dashed path"
        for nid, nbrs in adj.items():
            if len(nbrs) > 2:
                return f"dashed branching at node {nid}"
            if g.nodes[nid].mark != Mark.BLUE:
                return f"node {nid} on the dashed path is not blue"
        # walk from the root; a simple path visits every node once
        seen = {root}
        prev, cur = None, root
        while True:
            nxt = [x for x in adj[cur] if x != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            if cur in seen:
                return "dashed edges form a cycle"
            seen.add(cur)
        if len(seen) != len(adj) or count != len(adj) - 1:
            return "dashed edges are not a single path"
        return None


def capture_node_label(rule_names, mark: Mark, key: str):
    """Hook recording the label of the first node with ``mark`` after any of ``rule_names``."""
    names = (rule_names,) if isinstance(rule_names, str) else tuple(rule_names)

    def hook(g: HostGraph, rule, captures: dict) -> None:
        if rule.name in names:
            n = g.first_node(mark)
            if n is not None:
                captures[key] = n.label

    return hook
