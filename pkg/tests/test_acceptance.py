"""End-to-end acceptance checks.

Each test records one PASS/FAIL line through the ``criterion`` fixture; the
lines are repeated in the terminal summary.  The scaling checks take most of
the wall time (about 25 minutes on one core).
"""

import random
import time

import pytest

from gpfast.bench import (
    GraphClass,
    fit_scaling,
    generate,
    param_for_nm,
    param_for_total,
    random_bf_graph,
    random_dfs_graph,
    run_benchmark,
)
from gpfast.commands import format_command
from gpfast.frontend import parse_command, parse_program, print_host_graph
from gpfast.interpreter import Interpreter
from gpfast.specimens import (
    check_program,
    hooks_for,
    load,
    monitors_for,
    oracle_acyclic,
    oracle_connected,
    random_input,
)
from gpfast.store import BUCKET_MARK, ROW_MARK, HostGraph, Mark

from shadow import run_mutations

DFS_CORPUS = range(500)
BF_CORPUS = range(300)


def dfs_graph(seed):
    return random_dfs_graph(seed, max_n=40, max_m=80)


def skeleton(g):
    """Ids, labels and incidences; everything except marks and roots."""
    return ({nid: n.label for nid, n in g.nodes.items()},
            {eid: (e.source.id, e.target.id, e.label) for eid, e in g.edges.items()})


def _oracle_run(name, oracle):
    interp = Interpreter(load(name))
    agree, fails, loops, bad = 0, 0, 0, []
    t0 = time.perf_counter()
    for seed in DFS_CORPUS:
        g = dfs_graph(seed)
        before = skeleton(g)
        want = oracle(g)
        loops += any(e.source is e.target for e in g.edges.values())
        outcome, _ = interp.run(g)
        ok = outcome.kind == ("graph" if want else "fail")
        if ok and outcome.kind == "graph":
            ok = skeleton(g) == before
        agree += ok
        fails += outcome.kind == "fail"
        if not ok:
            bad.append(seed)
    dt = time.perf_counter() - t0
    return agree, fails, loops, bad, dt


def test_connectivity_matches_oracle(criterion):
    agree, fails, _, bad, dt = _oracle_run("is-connected", oracle_connected)
    ok = agree == len(DFS_CORPUS) and dt < 60
    criterion(1, ok, f"is-connected {agree}/{len(DFS_CORPUS)} agree ({fails} disconnected), "
                     f"outputs equal inputs up to marks, {dt:.1f} s (limit 60 s); mismatches {bad[:5]}")
    assert ok


def test_acyclicity_matches_oracle(criterion):
    agree, fails, loops, bad, dt = _oracle_run("is-dag", oracle_acyclic)
    ok = agree == len(DFS_CORPUS) and loops > 0
    criterion(2, ok, f"is-dag {agree}/{len(DFS_CORPUS)} agree ({fails} cyclic, {loops} graphs with loops), "
                     f"{dt:.1f} s; mismatches {bad[:5]}")
    assert ok


def test_shortest_paths_match_oracle(criterion):
    interp = Interpreter(load("bellman-ford"), hooks=hooks_for("bellman-ford"))
    agree, negative, bad = 0, 0, []
    for seed in BF_CORPUS:
        v = check_program("bellman-ford", random_bf_graph(seed, max_n=30, lo=-10, hi=10), interp=interp)
        agree += v.passed
        negative += v.expected == "fail"
        if not v.passed:
            bad.append((seed, v.detail))
    ok = agree == len(BF_CORPUS)
    criterion(3, ok, f"bellman-ford {agree}/{len(BF_CORPUS)} agree ({negative} with a reachable negative cycle); "
                     f"mismatches {bad[:3]}")
    assert ok


def test_dfs_count_bounds(criterion):
    interp = Interpreter(load("is-connected"))
    worst = {"init": 0, "back": 0, "next_edge": 0, "match": 0}
    broken = {k: 0 for k in worst}
    graphs = [(f"seed {s}", dfs_graph(s)) for s in DFS_CORPUS]
    graphs += [(f"star {m}", generate(GraphClass("star", m))) for m in (10, 100, 1000, 10**4, 10**5)]
    for _, g in graphs:
        m = g.num_edges
        _, stats = interp.run(g)
        calls = {k: stats.rule(k).calls for k in worst}
        excess = {"init": calls["init"] - 1, "match": calls["match"] - 1,
                  "back": calls["back"] - (m + 1), "next_edge": calls["next_edge"] - 2 * m}
        for k, d in excess.items():
            worst[k] = max(worst[k], d) if k in ("back", "next_edge") else max(worst[k], abs(d))
            broken[k] += d > 0 if k in ("back", "next_edge") else d != 0
    ok = not any(broken.values())
    criterion(4, ok, f"{len(graphs)} graphs; init=1 and match=1 violated on {broken['init']}/{broken['match']}; "
                     f"back <= m+1 violated on {broken['back']} (max excess {worst['back']}); "
                     f"next_edge <= 2m violated on {broken['next_edge']} (max excess {worst['next_edge']})")
    assert ok


def test_bellman_ford_rounds(criterion):
    interp = Interpreter(load("bellman-ford"), hooks=hooks_for("bellman-ford"))
    bad = []
    for seed in BF_CORPUS:
        g = random_bf_graph(seed, max_n=30, lo=-10, hi=10)
        n = g.num_nodes
        _, stats = interp.run(g)
        body = next(s for text, s in stats.loops.items() if text.startswith("(decrement"))
        got = (stats.rule("decrement").successes, body.succeeded, stats.captures.get("counter"))
        if got != (n - 1, n - 1, (n - 1,)):
            bad.append((seed, n, got))
    ok = not bad
    criterion(5, ok, f"{len(BF_CORPUS)} graphs: decrement successes, completed relaxation rounds and "
                     f"counter label all equal n-1; mismatches {bad[:3]}")
    assert ok


def test_invariant_monitors(criterion):
    summary = []
    ok = True
    for name in ("is-dag", "is-connected"):
        program = load(name)
        mons = monitors_for(name)
        interp = Interpreter(program, monitors=mons)
        checks, apps, violations, wrong = 0, 0, [], 0
        for seed in range(150):
            v = check_program(name, random_dfs_graph(seed, max_n=20, max_m=40), interp=interp)
            checks += v.stats.monitor_checks
            apps += v.stats.applications
            violations += v.violations
            wrong += not v.passed
        good = not violations and not wrong and checks >= apps * len(mons) > 0
        ok &= good
        summary.append(f"{name}: 150 inputs, {len(mons)} monitors, {checks} scans, "
                       f"{len(violations)} violations")
    criterion(6, ok, "; ".join(summary))
    assert ok


# ------------------------------------------------------------------ scaling

SHAPES = ("list", "cycle", "grid", "tree", "star", "complete")
TOTALS = (20_000, 40_000, 80_000, 160_000, 320_000)


def _fits(table, x="size"):
    return {name: fit_scaling(rows, x) for name, rows in table.series().items()}


def _describe(fits):
    return ", ".join(f"{k} {f.slope:.2f}/{f.max_ratio:.2f}" if f else f"{k} n/a" for k, f in fits.items())


def test_linear_scaling(criterion):
    parts, ok = [], True
    for name in ("is-connected", "is-dag"):
        classes = [GraphClass(k, param_for_total(k, t)) for k in SHAPES for t in TOTALS]
        fits = _fits(run_benchmark(name, classes, reps=5))
        ok &= all(f is not None and f.slope <= 1.25 and f.max_ratio <= 2.6 for f in fits.values())
        parts.append(f"{name} [{_describe(fits)}]")
    criterion(7, ok, "slope/max doubling ratio, limits 1.25/2.6: " + "; ".join(parts))
    assert ok


def test_discrete_mode_comparison(criterion):
    sizes = (1000, 2000, 4000, 8000, 16000)
    classes = [GraphClass("discrete", s) for s in sizes]
    fast = _fits(run_benchmark("is-discrete", classes, reps=3))["discrete"]
    slow = _fits(run_benchmark("is-discrete", classes, reps=3, legacy=True))["discrete"]
    ok = fast is not None and slow is not None and fast.slope <= 1.25 and slow.slope >= 1.7
    criterion(8, ok, f"is-discrete on {sizes[0]}..{sizes[-1]} nodes: bucketed slope {fast.slope:.2f} "
                     f"(limit 1.25), legacy slope {slow.slope:.2f} (needs >= 1.7)")
    assert ok


def test_bellman_ford_scaling(criterion):
    nms = (5_000, 10_000, 20_000, 40_000)
    weights = ("uniform", -100, 100)
    classes = [GraphClass(k, param_for_nm(k, nm), True, weights, seed=1) for k in SHAPES for nm in nms]
    table = run_benchmark("bellman-ford", classes, reps=3)
    fits = _fits(table, "nm")
    alt = run_benchmark("bellman-ford", [GraphClass("cycle", param_for_nm("cycle", nm), True, ("alternating",))
                                         for nm in nms], reps=3, name="alternating")
    alt_fit = fit_scaling(alt.rows, "nm")
    alt_failed = all(r.outcome == "fail" for r in alt.rows)
    ok = all(f is not None and f.slope <= 1.25 for f in fits.values())
    ok &= alt_fit is not None and alt_fit.slope <= 1.25 and alt_failed
    outcomes = {name: rows[-1].outcome for name, rows in table.series().items()}
    criterion(9, ok, f"slope vs n*m, limit 1.25: [{_describe(fits)}]; outcomes {outcomes}; alternating cycle "
                     f"slope {alt_fit.slope:.2f}, all runs failed: {alt_failed}")
    assert ok


# ---------------------------------------------------------- store and journal


def _spread_graph(total):
    """About ``total`` elements: nodes over every node mark, edges over every edge mark."""
    g = HostGraph()
    node_marks, edge_marks = list(BUCKET_MARK), list(ROW_MARK)
    n = total // 2
    ids = [g.add_node((), node_marks[i % len(node_marks)]) for i in range(n)]
    hub = ids[0]
    for i in range(total - n):
        t = ids[1 + i % (n - 1)]
        k = i % 3
        s, t = (hub, t) if k == 0 else (t, hub) if k == 1 else (hub, hub)
        g.add_edge(s, t, (), edge_marks[i % len(edge_marks)])
    return g, hub, node_marks, edge_marks


def test_constant_time_first_element(criterion):
    worst, probes = 0, 0
    for total in (10**3, 10**4, 10**5, 10**6):
        g, hub, node_marks, edge_marks = _spread_graph(total)
        for m in node_marks:
            before = g.inspections
            g.first_node(m)
            worst = max(worst, g.inspections - before)
            probes += 1
        for nid in (hub, hub + 1):
            for m in edge_marks:
                for o in ("in", "out", "loop"):
                    before = g.inspections
                    g.first_edge(nid, m, o)
                    worst = max(worst, g.inspections - before)
                    probes += 1
        del g
    ok = worst <= 1
    criterion(10, ok, f"{probes} first-element probes on graphs of 1e3..1e6 elements, "
                      f"max inspections {worst} (limit 1)")
    assert ok


def test_store_matches_shadow(criterion):
    t0 = time.perf_counter()
    queries = run_mutations(11, 10_000, full_every=1)
    queries += run_mutations(12, 10_000)
    queries += run_mutations(13, 10_000, with_journal=False)
    criterion(11, True, f"3 sequences of 10^4 mutations (one compared in full after every step), "
                        f"{queries} queries agreed, {time.perf_counter() - t0:.0f} s")


RULES = parse_program("""Main = skip
grey_red(x: list) [ (1, x # grey) | ] => [ (1, x # red) | ]
red_blue(x: list) [ (1, x # red) | ] => [ (1, x # blue) | ]
add(x: list) [ | ] => [ (1, 0 # grey) | ]
drop(x: list) [ (1, x) | ] => [ | ]
link(x, y: list) [ (1, x # any) (2, y) | ] => [ (1, x # any) (2, y) | (e1, 1, 2, 7 # red) ]
unlink(x, y, z: list) [ (1, x) (2, y) | (e1, 1, 2, z # red) ] => [ (1, x) (2, y) | ]
relabel(x: list; i: int) [ (1, x:i # any) | ] => [ (1, x:i + 1 # any) | ] where i < 9
root(x: list) [ (1, x # blue) | ] => [ (1(R), x # blue) | ]
hop(x, y, z: list) [ (1(R), x) (2, y) | (e1, 1, 2, z) ] => [ (1, x) (2(R), y) | (e1, 1, 2, z # dashed) ]
halve(i: int) [ (1, i # green) | ] => [ (1, 10 / i # green) | ]
""")
NAMES = ["grey_red", "red_blue", "add", "drop", "link", "unlink", "relabel", "root", "hop", "halve"]


def random_command(rng, depth=0):
    r = rng.random()
    if depth > 2 or r < 0.35:
        return rng.choice(NAMES + ["skip", "fail", "{" + ", ".join(rng.sample(NAMES, 2)) + "}"])
    a = random_command(rng, depth + 1)
    b = random_command(rng, depth + 1)
    if r < 0.5:
        return f"{a}; {b}"
    if r < 0.6:
        return f"({a} or {b})"
    if r < 0.75:
        return f"({a})!"
    if r < 0.87:
        return f"(try ({a}) then ({b}) else ({random_command(rng, depth + 1)}))"
    return f"(if ({a}) then ({b}))"


def random_host(rng):
    g = HostGraph()
    marks = [Mark.NONE, Mark.GREY, Mark.RED, Mark.GREEN, Mark.BLUE]
    ids = [g.add_node((rng.randint(0, 3),) * rng.randint(0, 2), rng.choice(marks), rng.random() < 0.15)
           for _ in range(rng.randint(0, 8))]
    for _ in range(rng.randint(0, 10)) if ids else ():
        g.add_edge(rng.choice(ids), rng.choice(ids), (rng.randint(0, 2),),
                   rng.choice([Mark.NONE, Mark.RED, Mark.DASHED, Mark.BLUE]))
    return g


def test_rollback_fidelity(criterion):
    rng = random.Random(2024)
    interp = Interpreter(RULES, step_limit=3000, wall_limit=0.2)
    specimens = {name: Interpreter(load(name), step_limit=10**5)
                 for name in ("is-connected", "is-dag", "bellman-ford", "is-discrete")}
    kinds, bad = {}, []
    for k in range(1000):
        if k % 4 == 3:
            name = rng.choice(sorted(specimens))
            it = specimens[name]
            g = random_input(name, rng.randrange(10**6), 15)
            command, text = it.program.main, name
        else:
            it = interp
            g = random_host(rng)
            text = random_command(rng)
            command = parse_command(text, RULES)
        before = print_host_graph(g)
        kind = it.trial(command, g)
        kinds[kind] = kinds.get(kind, 0) + 1
        if print_host_graph(g) != before:
            bad.append(text if isinstance(text, str) else format_command(command))
    ok = not bad and len(kinds) >= 3
    criterion(12, ok, f"1000 trials, outcomes before rollback {dict(sorted(kinds.items()))}, "
                      f"{len(bad)} prints differed")
    assert ok
