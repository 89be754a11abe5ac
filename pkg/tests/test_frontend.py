import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpfast.commands import Loop, OrCmd, Seq, Try, format_command
from gpfast.frontend import (
    ParseError,
    parse_command,
    parse_host_graph,
    parse_program,
    print_host_graph,
    tokenize,
)
from gpfast.specimens import NAMES, source
from gpfast.store import HostGraph, Mark

RULE = "r(x: list) [ (1, x) | ] => [ (1, x) | ]\n"


class TestHostFormat:
    def test_empty_graph(self):
        assert print_host_graph(parse_host_graph("[ | ]")) == "[ | ]"

    def test_round_trip_keeps_ids_marks_roots(self):
        text = '[ (1, 1:2:"a" # red) (5(R), empty) | (e3, 1, 5, -4 # dashed) ]'
        assert print_host_graph(parse_host_graph(text)) == text

    def test_long_graphs_print_one_item_per_line(self):
        g = HostGraph()
        for _ in range(20):
            g.add_node()
        lines = print_host_graph(g).splitlines()
        assert lines[0] == "[" and lines[-1] == "]" and len(lines) == 23

    def test_comments_and_whitespace(self):
        g = parse_host_graph("// two nodes\n[ (1, empty)\n (2, 3 # grey) | ]")
        assert g.num_nodes == 2 and g.get_mark(2) == Mark.GREY

    @pytest.mark.parametrize("text, where", [
        ("[ (1, x) | ]", (1, 7)),
        ("[ (1, 1) | (1, 1, 9, empty) ]", (1, 19)),
        ("[ (1, 1) (1, 2) | ]", None),
        ("[ (1, 1 # dashed) | ]", None),
        ("[ (1, 1)", None),
    ])
    def test_errors_have_positions(self, text, where):
        with pytest.raises(ParseError) as info:
            parse_host_graph(text)
        if where:
            assert (info.value.line, info.value.col) == where

    def test_integer_out_of_range(self):
        with pytest.raises(ParseError):
            parse_host_graph("[ (1, 9223372036854775808) | ]")

    def test_tokenizer_marks_root_and_bidirectional(self):
        kinds = [t.text for t in tokenize("(1(R), x) (e1(B), 1, 2, y)")]
        assert "(R)" in kinds and "(B)" in kinds


atoms = st.one_of(st.integers(-2**63, 2**63 - 1), st.text("ab c_\\", max_size=4))


@st.composite
def host_graphs(draw):
    g = HostGraph()
    ids = []
    for _ in range(draw(st.integers(0, 20))):
        label = tuple(draw(st.lists(atoms, max_size=3)))
        mark = draw(st.sampled_from([Mark.NONE, Mark.GREY, Mark.RED, Mark.GREEN, Mark.BLUE]))
        ids.append(g.add_node(label, mark, draw(st.booleans())))
    if ids:
        for _ in range(draw(st.integers(0, 20))):
            s, t = draw(st.sampled_from(ids)), draw(st.sampled_from(ids))
            mark = draw(st.sampled_from([Mark.NONE, Mark.DASHED, Mark.RED, Mark.GREEN, Mark.BLUE]))
            g.add_edge(s, t, tuple(draw(st.lists(atoms, max_size=2))), mark)
    for nid in draw(st.lists(st.sampled_from(ids), max_size=3, unique=True)) if ids else ():
        if not g.in_degree(nid) and not g.out_degree(nid):
            g.delete_node(nid)
    return g


@settings(max_examples=200, deadline=None)
@given(host_graphs())
def test_print_parse_round_trip(g):
    text = print_host_graph(g)
    h = parse_host_graph(text)
    assert print_host_graph(h) == text
    h.check_invariants()


class TestPrograms:
    @pytest.mark.parametrize("name", NAMES)
    def test_specimens_parse(self, name):
        prog = parse_program(source(name))
        assert prog.main is not None and prog.all_rules()

    @pytest.mark.parametrize("name", NAMES)
    def test_procedure_bodies_round_trip(self, name):
        prog = parse_program(source(name))
        for p in [prog.main_proc, *prog.procs.values()]:
            text = format_command(p.body)
            assert format_command(parse_command(text, prog, in_loop=True, proc=p)) == text

    def test_precedence(self):
        prog = parse_program("Main = skip\n" + RULE)
        c = parse_command("r; r or r!", prog)
        assert isinstance(c, Seq)
        assert isinstance(c.items[1], OrCmd) and isinstance(c.items[1].right, Loop)

    def test_try_condition_is_a_single_command(self):
        prog = parse_program("Main = skip\n" + RULE)
        c = parse_command("(try r; try r else r)!", prog)
        body = c.body
        assert isinstance(c, Loop) and isinstance(body, Seq)
        assert isinstance(body.items[0], Try) and body.items[0].orelse is None
        assert isinstance(body.items[1], Try) and body.items[1].orelse is not None

    def test_local_declarations_are_scoped(self):
        prog = parse_program("Main = P; r\nP = [ q(x: list) [ (1, x) | ] => [ | ] ] q\n" + RULE)
        assert {r.name for r in prog.all_rules()} == {"r", "q"}
        with pytest.raises(ParseError):
            parse_program("Main = P; q\nP = [ q(x: list) [ (1, x) | ] => [ | ] ] q\n")

    @pytest.mark.parametrize("text, message", [
        ("Main = A\nA = B\nB = A", "recursive"),
        ("Main = break", "outside a loop"),
        ("Main = (if break then skip)!", "inside a condition"),
        ("Main = foo", "unknown"),
        (RULE, "Main"),
        ("Main = r\n" + RULE + RULE, "duplicate"),
    ])
    def test_static_errors(self, text, message):
        with pytest.raises(ParseError, match=message):
            parse_program(text)

    def test_error_position(self):
        with pytest.raises(ParseError) as info:
            parse_program("Main = r\n\nr(x: list)\n  [ (1, x | ] => [ | ]")
        assert info.value.line == 4
