import random

import pytest

from gpfast import labels as L
from gpfast.frontend import ParseError, parse_host_graph, parse_program, print_host_graph
from gpfast.rules import RuleError, check_dangling
from gpfast.store import HostGraph, Mark

from naive_match import naive_match_exists

RULES = """
Main = skip

rooted_step(x, y, z: list)
  [ (1(R), x # red) (2, y # any) | (e1, 1, 2, z) ]
  => [ (1, x # red) (2(R), y # any) | (e1, 1, 2, z # dashed) ]

either_way(x, y: list; i: int)
  [ (1(R), x) (2, y:i # grey) | (e1(B), 1, 2, i) ]
  => [ (1(R), x) (2, y:i # grey) | (e1(B), 1, 2, i # blue) ]

loopy(x: list; a: atom)
  [ (1, x:a # blue) | (e1, 1, 1, a) ]
  => [ (1, x # blue) | ]

pair(x, y: list)
  [ (1, x # grey) (2, x # grey) | ]
  => [ (1, x # grey) (2, x # red) | ]
  where indeg(1) > 0 and not edge(2, 1)

delete_leaf(x, y, z: list)
  [ (1, x) (2, y # green) | (e1, 1, 2, z) ]
  => [ (1, x) | ]

triangle(x, y, w: list)
  [ (1, x) (2, y) (3, w) | (e1, 1, 2, empty) (e2, 2, 3, empty) (e3, 3, 1, empty) ]
  => [ (1, x) (2, y) (3, w) | (e1, 1, 2, empty) (e2, 2, 3, empty) (e3, 3, 1, empty) ]

bump(x: list; i, j: int)
  [ (1, i:x # any) (2, j) | (e1, 1, 2, empty # any) ]
  => [ (1, i + j:x # any) (2, j) (3, "new" # green) | (e1, 1, 2, empty # any) (e2, 3, 2, i * 2) ]
  where i < j or length(x) = 0
"""

PROG = parse_program(RULES)


def random_host(seed):
    rng = random.Random(seed)
    g = HostGraph()
    node_marks = [Mark.NONE, Mark.GREY, Mark.RED, Mark.GREEN, Mark.BLUE]
    edge_marks = [Mark.NONE, Mark.RED, Mark.DASHED, Mark.BLUE]
    labels = [(), (1,), (2,), (1, 2), ("a",), (1, "a"), (3, 1)]
    node_marks = node_marks + [Mark.NONE] * 3
    ids = [g.add_node(rng.choice(labels), rng.choice(node_marks), rng.random() < 0.3)
           for _ in range(rng.randint(1, 5))]
    for _ in range(rng.randint(0, 8)):
        lab = () if rng.random() < 0.5 else rng.choice(labels[:4])
        g.add_edge(rng.choice(ids), rng.choice(ids), lab, rng.choice(edge_marks[:2] * 2 + edge_marks))
    return g


def plant(rule, g, rng):
    """Add a random instance of the rule's left graph to ``g``."""
    values = {"int": lambda: rng.randint(0, 3), "atom": lambda: rng.choice([1, "a"]),
              "string": lambda: rng.choice(["", "a"]), "char": lambda: "a",
              "list": lambda: rng.choice([(), (1,), ("a", 2)])}
    alpha = {name: values[t]() for name, t in rule.decls.items()}
    concrete = [Mark.RED, Mark.GREEN, Mark.BLUE, Mark.GREY]
    ids = {}
    for n in rule.lhs.nodes:
        mark = rng.choice(concrete) if n.mark == Mark.ANY else n.mark
        ids[n.id] = g.add_node(L.evaluate(n.label, alpha), mark, n.rooted)
    for e in rule.lhs.edges:
        mark = rng.choice([Mark.RED, Mark.BLUE, Mark.DASHED]) if e.mark == Mark.ANY else e.mark
        s, t = ids[e.source], ids[e.target]
        if e.bidirectional and rng.random() < 0.5:
            s, t = t, s
        g.add_edge(s, t, L.evaluate(e.label, alpha), mark)


@pytest.mark.parametrize("name", [r.name for r in PROG.all_rules()])
def test_matching_agrees_with_exhaustive_search(name):
    rule = PROG.rule(name)
    found = 0
    for seed in range(1000):
        g = random_host(seed)
        if seed % 3 == 0:
            plant(rule, g, random.Random(seed))
        got = rule.matches(g)
        assert got == naive_match_exists(rule, g), (name, seed, print_host_graph(g))
        found += got
        assert all(not n.matched for n in g.nodes.values())
        assert all(not e.matched for e in g.edges.values())
    assert found > 0  # the corpus exercises the positive case too


def test_apply_rooted_step():
    g = parse_host_graph("[ (1(R), 0 # red) (2, 5 # blue) | (1, 1, 2, 7) ]")
    assert PROG.rule("rooted_step").apply_once(g)
    assert print_host_graph(g) == "[ (1, 0 # red) (2(R), 5 # blue) | (e1, 1, 2, 7 # dashed) ]"


def test_apply_bidirectional_matches_reversed_edge():
    g = parse_host_graph("[ (1(R), empty) (2, 4 # grey) | (1, 2, 1, 4) ]")
    rule = PROG.rule("either_way")
    assert rule.apply_once(g)
    assert g.edges[1].mark == Mark.BLUE
    assert (g.edges[1].source.id, g.edges[1].target.id) == (2, 1)


def test_apply_creates_items_with_fresh_ids():
    g = parse_host_graph("[ (1, 2 # red) (2, 3) | (1, 1, 2, empty # blue) ]")
    assert PROG.rule("bump").apply_once(g)
    assert print_host_graph(g) == (
        '[ (1, 5 # red) (2, 3) (3, "new" # green) | (e1, 1, 2, empty # blue) (e2, 3, 2, 4) ]'
    )


def test_apply_deletes_loop_and_relabels():
    g = parse_host_graph('[ (1, 9:"a" # blue) | (1, 1, 1, "a") ]')
    assert PROG.rule("loopy").apply_once(g)
    assert print_host_graph(g) == "[ (1, 9 # blue) | ]"


def test_dangling_condition_blocks_deletion():
    g = parse_host_graph("[ (1, empty) (2, empty # green) (3, empty) | (1, 1, 2, empty) (2, 3, 2, empty) ]")
    rule = PROG.rule("delete_leaf")
    assert not rule.matches(g)
    g.delete_edge(2)
    m = rule.find_match(g)
    assert m is not None and check_dangling(g, rule, m)
    rule.apply_match(g, m)
    assert g.num_nodes == 2 and g.num_edges == 0


def test_condition_uses_degrees_and_edges():
    rule = PROG.rule("pair")
    g = parse_host_graph("[ (1, 1 # grey) (2, 1 # grey) | ]")
    assert not rule.matches(g)
    g.add_edge(2, 1)
    # 1 is the only node with an in-edge, and that edge runs 2 -> 1
    assert rule.find_match(g) is None
    g.add_node((1,), Mark.GREY)
    g.add_edge(3, 2)
    assert rule.matches(g)


def test_failed_match_leaves_graph_untouched():
    g = parse_host_graph("[ (1, empty) (2, empty) | (1, 1, 2, empty) ]")
    before = print_host_graph(g)
    assert not PROG.rule("triangle").apply_once(g)
    assert print_host_graph(g) == before


def test_stats_count_calls_and_attempts():
    rule = PROG.rule("rooted_step")
    rule.reset_stats()
    g = parse_host_graph("[ (1(R), 0 # red) (2, 5 # blue) (3, 1 # grey) | (1, 1, 2, 7) (2, 1, 3, 7) ]")
    rule.apply_once(g)
    rule.apply_once(g)
    calls, succ, na, ea = rule.stats
    assert (calls, succ) == (2, 1)
    assert na == 2 and ea >= 1


def test_plan_starts_from_roots():
    plan = PROG.rule("rooted_step").plan
    assert plan[0].kind == "bind-root"
    assert plan[1].kind == "extend-edge" and plan[1].orientation == "out"
    both = PROG.rule("either_way").plan
    assert both[1].orientation == "both"


class TestValidation:
    def test_any_on_right_needs_any_on_left(self):
        with pytest.raises((RuleError, ParseError)):
            parse_program("Main = r\nr(x: list) [ (1, x) | ] => [ (1, x # any) | ]")

    def test_unknown_variable_on_right(self):
        with pytest.raises((RuleError, ParseError)):
            parse_program("Main = r\nr(x: list) [ (1, x) | ] => [ (1, y) | ]")

    def test_non_simple_left_label(self):
        with pytest.raises((RuleError, ParseError)):
            parse_program("Main = r\nr(x, y: list) [ (1, x:y) | ] => [ (1, x) | ]")

    def test_preserved_edge_must_keep_endpoints(self):
        with pytest.raises((RuleError, ParseError)):
            parse_program(
                "Main = r\nr() [ (1, empty) (2, empty) | (e1, 1, 2, empty) ]"
                " => [ (1, empty) (2, empty) | (e1, 2, 1, empty) ]"
            )
