import random

from gpfast.frontend import parse_command, parse_host_graph, parse_program, print_host_graph
from gpfast.interpreter import (
    FAIL,
    SUCCESS,
    DashedPathMonitor,
    Interpreter,
    RedEdgeMonitor,
    RootCountMonitor,
    run,
)
from gpfast.store import Mark

RULES = """
grey_to_red(x: list)
  [ (1, x # grey) | ]
  => [ (1, x # red) | ]

red_to_blue(x: list)
  [ (1, x # red) | ]
  => [ (1, x # blue) | ]

add_grey()
  [ | ]
  => [ (1, empty # grey) | ]

drop(x: list)
  [ (1, x) | ]
  => [ | ]

inc(i: int)
  [ (1, i # green) | ]
  => [ (1, i + 1 # green) | ]
  where i < 5

halve(i: int)
  [ (1, i # green) | ]
  => [ (1, 100 / i # green) | ]

red_any(x: list)
  [ (1, x # red) | ]
  => [ (1, x # red) | ]
"""


def prog(main):
    return parse_program(f"Main = {main}\n{RULES}")


def host(text):
    return parse_host_graph(text)


GREYS = "[ (1, empty # grey) (2, empty # grey) (3, empty # grey) | ]"


def execute(main, text):
    g = host(text)
    outcome, stats = run(prog(main), g)
    return outcome, stats, g


class TestControl:
    def test_loop_runs_to_exhaustion(self):
        outcome, stats, g = execute("grey_to_red!", GREYS)
        assert outcome.kind == "graph"
        assert print_host_graph(g).count("# red") == 3
        assert stats.rule("grey_to_red").calls == 4

    def test_failing_sequence_in_loop_is_undone(self):
        # each iteration mutates and then fails, so every step is rolled back
        outcome, _, g = execute("(grey_to_red; fail)!", GREYS)
        assert outcome.kind == "graph"
        assert print_host_graph(g) == GREYS

    def test_sequence_fail_makes_program_fail(self):
        outcome, _, _ = execute("grey_to_red; red_any; drop; red_any", "[ (1, empty # grey) | ]")
        assert outcome.kind == "fail"

    def test_if_always_discards_condition_effects(self):
        outcome, _, g = execute("if grey_to_red then add_grey else drop", "[ (1, empty # grey) | ]")
        assert print_host_graph(g) == "[ (1, empty # grey) (2, empty # grey) | ]"
        outcome, _, g = execute("if red_any then skip else add_grey", "[ (1, empty # grey) | ]")
        assert g.num_nodes == 2

    def test_try_keeps_condition_effects(self):
        _, _, g = execute("try grey_to_red then red_to_blue", "[ (1, empty # grey) | ]")
        assert print_host_graph(g) == "[ (1, empty # blue) | ]"
        _, _, g = execute("try red_any else add_grey", "[ (1, empty # grey) | ]")
        assert g.num_nodes == 2

    def test_or_is_left_biased(self):
        _, _, g = execute("grey_to_red or drop", "[ (1, empty # grey) | ]")
        assert print_host_graph(g) == "[ (1, empty # red) | ]"

    def test_break_exits_innermost_loop_keeping_effects(self):
        outcome, stats, g = execute("(grey_to_red; break)!", GREYS)
        assert outcome.kind == "graph"
        assert print_host_graph(g).count("# red") == 1
        loop = next(iter(stats.loops.values()))
        assert (loop.entered, loop.broke) == (1, 1)

    def test_rule_set_tries_in_order_of_declaration_list(self):
        _, _, g = execute("{red_any, grey_to_red}", "[ (1, empty # grey) | ]")
        assert print_host_graph(g) == "[ (1, empty # red) | ]"

    def test_skip_and_fail(self):
        assert execute("skip", "[ | ]")[0].kind == "graph"
        assert execute("fail", "[ | ]")[0].kind == "fail"

    def test_condition_bounds_loop(self):
        _, stats, g = execute("inc!", "[ (1, 0 # green) | ]")
        assert g.nodes[1].label == (5,)
        assert stats.rule("inc").successes == 5


class TestAbnormalExits:
    def test_runtime_error_unwinds(self):
        g = host("[ (1, 0 # green) (2, empty # grey) | ]")
        outcome, _ = run(prog("(grey_to_red; halve)!"), g)
        assert outcome.kind == "runtime_error"
        assert "division by zero" in outcome.message
        assert print_host_graph(g) == "[ (1, 0 # green) (2, empty # grey) | ]"

    def test_step_limit_is_a_timeout(self):
        g = host("[ | ]")
        outcome, stats = run(prog("add_grey!"), g, step_limit=50)
        assert outcome.kind == "timeout"
        assert stats.rule_calls == 50

    def test_wall_limit_is_a_timeout(self):
        g = host("[ | ]")
        outcome, stats = run(prog("(add_grey; grey_to_red)!"), g, wall_limit=0.05)
        assert outcome.kind == "timeout"
        assert 0.05 <= stats.wall_time < 1.0


class TestMonitors:
    def test_root_and_red_monitors_flag_violations(self):
        p = parse_program("""Main = mk!
        mk(x: list) [ (1, x # grey) | ] => [ (1(R), x # blue) (2, 0 # red) | (e1, 1, 2, empty # red) ]
        """)
        g = host("[ (1, empty # grey) (2, empty # grey) | ]")
        _, stats = Interpreter(p, monitors=[RootCountMonitor(1), RedEdgeMonitor(1)]).run(g)
        assert any("root" in v for v in stats.violations)
        assert any("red edges" in v for v in stats.violations)
        assert stats.monitor_checks > 0

    def test_dashed_path_monitor(self):
        good = host("[ (1, empty # blue) (2(R), empty # blue) | (1, 1, 2, empty # dashed) ]")
        assert DashedPathMonitor()(good, None) is None
        bad = host("[ (1, empty # blue) (2(R), empty # blue) (3, empty # blue) |"
                   " (1, 1, 2, empty # dashed) (2, 3, 2, empty # dashed) ]")
        assert DashedPathMonitor()(bad, None) is not None


class TestStats:
    def test_report_and_csv(self):
        _, stats, _ = execute("grey_to_red!", GREYS)
        text = stats.report()
        assert "rule.grey_to_red = calls:4 successes:3" in text
        assert stats.to_csv().splitlines()[0].startswith("rule,calls")

    def test_interpreter_is_reusable(self):
        it = Interpreter(prog("grey_to_red!"))
        for _ in range(3):
            outcome, stats = it.run(host(GREYS))
            assert stats.rule("grey_to_red").calls == 4


COMMANDS = [
    "grey_to_red", "grey_to_red!", "(grey_to_red; red_to_blue)!", "add_grey; drop; fail",
    "try grey_to_red then drop else add_grey", "if red_any then drop", "{drop, add_grey}",
    "(grey_to_red or add_grey); red_to_blue", "(drop; add_grey; grey_to_red)!", "inc!; halve",
    "(grey_to_red; try red_any then break)!", "drop!", "(add_grey; grey_to_red)!",
]


def random_graph(rng):
    g = parse_host_graph("[ | ]")
    marks = [Mark.NONE, Mark.GREY, Mark.RED, Mark.GREEN, Mark.BLUE]
    for _ in range(rng.randint(0, 6)):
        g.add_node((rng.randint(0, 3),), rng.choice(marks), rng.random() < 0.2)
    ids = list(g.nodes)
    for _ in range(rng.randint(0, 4)) if ids else ():
        g.add_edge(rng.choice(ids), rng.choice(ids))
    return g


def test_rollback_restores_graph_exactly():
    rng = random.Random(5)
    p = prog("skip")
    it = Interpreter(p, step_limit=2000)
    kinds = set()
    for k in range(200):
        g = random_graph(rng)
        before = print_host_graph(g)
        kinds.add(it.trial(parse_command(rng.choice(COMMANDS), p), g))
        assert print_host_graph(g) == before, k
        g.check_invariants()
    assert {"graph", "fail", "timeout"} <= kinds


def test_constants():
    assert (FAIL, SUCCESS) == (0, 1)


def test_rule_free_loop_hits_wall_limit():
    outcome, _ = run(prog("skip!"), host("[ | ]"), wall_limit=0.05)
    assert outcome.kind == "timeout"
