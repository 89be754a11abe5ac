"""Parsers and printers for host graphs and rule programs."""

from __future__ import annotations

import re
from typing import Optional

from . import commands as C
from . import labels as L
from .rules import Rule, RuleEdge, RuleError, RuleGraph, RuleNode
from .store import ConstraintError, HostGraph, Mark, check_atom


class ParseError(Exception):
    """Syntax or static-check error with a source location."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<str>"[^"\n]*")
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=>|!=|<=|>=|\(R\)|\(B\)|[\[\]\(\)\{\}|,:;#=<>+\-*/.!])
    """,
    re.VERBOSE,
)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(text: str) -> list:
    out = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            out.append(Token(kind, tok, line, pos - line_start + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            got = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, got {got!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected identifier, got {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def item_id(self) -> Token:
        if self.tok.kind not in ("ident", "int"):
            raise self.error(f"expected an item identifier, got {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def mark(self, allowed) -> Mark:
        t = self.ident()
        try:
            m = Mark.parse(t.text)
        except ValueError:
            raise self.error(f"unknown mark {t.text!r}", t) from None
        if m not in allowed:
            raise self.error(f"mark {t.text} is not allowed here", t)
        return m


# ------------------------------------------------------------ host graphs

_NODE_MARKS = (Mark.RED, Mark.GREEN, Mark.BLUE, Mark.GREY)
_EDGE_MARKS = (Mark.RED, Mark.GREEN, Mark.BLUE, Mark.DASHED)


def _host_list(p: _Parser) -> tuple:
    if p.accept("empty"):
        return ()
    items = [_host_atom(p)]
    while p.accept(":"):
        items.append(_host_atom(p))
    return tuple(items)


def _host_atom(p: _Parser):
    t = p.tok
    neg = False
    if t.text == "-" and t.kind == "op":
        neg = True
        p.i += 1
        t = p.tok
    if t.kind == "int":
        p.i += 1
        v = -int(t.text) if neg else int(t.text)
        try:
            return check_atom(v)
        except ConstraintError as exc:
            raise p.error(str(exc), t) from None
    if t.kind == "str" and not neg:
        p.i += 1
        return t.text[1:-1]
    raise p.error(f"expected an atom, got {t.text or 'end of input'!r}")


def parse_host_graph(text: str, legacy: bool = False) -> HostGraph:
    """Build a host graph from text.

    Numeric node ids (and ``e<k>`` edge ids) listed in increasing order keep
    their values as store ids; any other id gets the next fresh store id.
    """
    p = _Parser(text)
    g = HostGraph(legacy=legacy)
    symbols: dict = {}
    edge_names: set = set()
    p.expect("[")
    while p.at("("):
        p.expect("(")
        t = p.item_id()
        if t.text in symbols:
            raise p.error(f"duplicate node id {t.text}", t)
        rooted = p.accept("(R)")
        p.expect(",")
        label = _host_list(p)
        mark = Mark.NONE
        if p.accept("#"):
            mark = p.mark(_NODE_MARKS)
        p.expect(")")
        if t.kind == "int" and int(t.text) >= g._next_node:
            g._next_node = int(t.text)
        symbols[t.text] = g.add_node(label, mark, rooted)
    p.expect("|")
    while p.at("("):
        p.expect("(")
        t = p.item_id()
        if t.text in edge_names:
            raise p.error(f"duplicate edge id {t.text}", t)
        edge_names.add(t.text)
        p.expect(",")
        ends = []
        for _ in range(2):
            s = p.item_id()
            if s.text not in symbols:
                raise p.error(f"edge endpoint {s.text} is not a node", s)
            ends.append(symbols[s.text])
            p.expect(",")
        label = _host_list(p)
        mark = Mark.NONE
        if p.accept("#"):
            mark = p.mark(_EDGE_MARKS)
        p.expect(")")
        m = re.fullmatch(r"e(\d+)", t.text)
        if m and int(m.group(1)) >= g._next_edge:
            g._next_edge = int(m.group(1))
        g.add_edge(ends[0], ends[1], label, mark)
    p.expect("]")
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return g


def format_atom(a) -> str:
    return str(a) if type(a) is int else f'"{a}"'


def format_list(value: tuple) -> str:
    if not value:
        return "empty"
    return ":".join(format_atom(a) for a in value)


def _node_text(n) -> str:
    mark = "" if n.mark == Mark.NONE else f" # {Mark(n.mark).keyword}"
    return f"({n.id}{'(R)' if n.rooted else ''}, {format_list(n.label)}{mark})"


def _edge_text(e) -> str:
    mark = "" if e.mark == Mark.NONE else f" # {Mark(e.mark).keyword}"
    return f"(e{e.id}, {e.source.id}, {e.target.id}, {format_list(e.label)}{mark})"


SINGLE_LINE_LIMIT = 16


def print_host_graph(g: HostGraph) -> str:
    """Canonical text: nodes sorted by id, then edges sorted by id."""
    nodes = [_node_text(g.nodes[k]) for k in sorted(g.nodes)]
    edges = [_edge_text(g.edges[k]) for k in sorted(g.edges)]
    if len(nodes) + len(edges) <= SINGLE_LINE_LIMIT:
        left = " ".join(nodes)
        right = " ".join(edges)
        return f"[ {left + ' ' if left else ''}| {right + ' ' if right else ''}]"
    lines = ["["]
    lines += ["  " + s for s in nodes]
    lines.append("|")
    lines += ["  " + s for s in edges]
    lines.append("]")
    return "\n".join(lines)


# ---------------------------------------------------------------- programs


class _ProgramParser(_Parser):
    # --- expressions

    def expr(self, decls: dict):
        items = [self.cat_expr(decls)]
        while self.accept(":"):
            items.append(self.cat_expr(decls))
        if len(items) == 1:
            return items[0]
        flat = []
        for it in items:
            if isinstance(it, L.Empty):
                continue
            flat.extend(it.items if isinstance(it, L.Concat) else [it])
        if not flat:
            return L.Empty()
        return flat[0] if len(flat) == 1 else L.Concat(tuple(flat))

    def cat_expr(self, decls):
        e = self.add_expr(decls)
        while self.at("."):
            t = self.tok
            self.i += 1
            e = L.StrCat(e, self.add_expr(decls))
            self._typed(e, t)
        return e

    def add_expr(self, decls):
        e = self.mul_expr(decls)
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            t = self.tok
            self.i += 1
            e = L.BinOp(t.text, e, self.mul_expr(decls))
            self._typed(e, t)
        return e

    def mul_expr(self, decls):
        e = self.unary(decls)
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            t = self.tok
            self.i += 1
            e = L.BinOp(t.text, e, self.unary(decls))
            self._typed(e, t)
        return e

    def unary(self, decls):
        if self.at("-"):
            t = self.tok
            self.i += 1
            if self.tok.kind == "int":
                v = -int(self.tok.text)
                self.i += 1
                return self._int_lit(v, t)
            e = L.Neg(self.unary(decls))
            self._typed(e, t)
            return e
        return self.primary(decls)

    def _int_lit(self, v: int, t: Token):
        try:
            check_atom(v)
        except ConstraintError as exc:
            raise self.error(str(exc), t) from None
        return L.IntLit(v)

    def _typed(self, e, t: Token):
        try:
            L.check_expr(e)
        except L.LabelError as exc:
            raise self.error(str(exc), t) from None

    def primary(self, decls):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return self._int_lit(int(t.text), t)
        if t.kind == "str":
            self.i += 1
            try:
                check_atom(t.text[1:-1])
            except ConstraintError as exc:
                raise self.error(str(exc), t) from None
            return L.StrLit(t.text[1:-1])
        if self.accept("("):
            e = self.expr(decls)
            self.expect(")")
            return e
        if t.kind == "ident":
            if t.text == "empty":
                self.i += 1
                return L.Empty()
            if t.text in ("indeg", "outdeg") and self.peek().text == "(":
                self.i += 2
                node = self.item_id().text
                self.expect(")")
                return L.Degree(t.text, node)
            if t.text == "length" and self.peek().text == "(":
                self.i += 2
                v = self.var(decls)
                self.expect(")")
                return L.Length(v)
            return self.var(decls)
        raise self.error(f"expected an expression, got {t.text or 'end of input'!r}")

    def var(self, decls) -> L.Var:
        t = self.ident()
        if t.text not in decls:
            raise self.error(f"undeclared variable {t.text}", t)
        return L.Var(t.text, decls[t.text])

    # --- conditions

    def cond(self, decls):
        c = self.and_cond(decls)
        while self.accept("or"):
            c = L.Or(c, self.and_cond(decls))
        return c

    def and_cond(self, decls):
        c = self.not_cond(decls)
        while self.accept("and"):
            c = L.And(c, self.not_cond(decls))
        return c

    def not_cond(self, decls):
        if self.accept("not"):
            return L.Not(self.not_cond(decls))
        return self.atom_cond(decls)

    def atom_cond(self, decls):
        t = self.tok
        if t.kind == "ident" and t.text in ("int", "char", "string", "atom") and self.peek().text == "(":
            self.i += 2
            v = self.var(decls)
            self.expect(")")
            return L.TypeTest(t.text, v)
        if t.kind == "ident" and t.text == "edge" and self.peek().text == "(":
            self.i += 2
            src = self.item_id().text
            self.expect(",")
            tgt = self.item_id().text
            label, mark = None, None
            if self.accept(","):
                label = self.expr(decls)
                if self.accept("#"):
                    mark = self.mark((Mark.RED, Mark.GREEN, Mark.BLUE, Mark.DASHED, Mark.ANY))
            self.expect(")")
            return L.EdgePred(src, tgt, label, mark)
        if self.at("("):
            save = self.i
            self.i += 1
            try:
                c = self.cond(decls)
                self.expect(")")
                if not self._at_relop():
                    return c
            except ParseError:
                pass
            self.i = save
        left = self.expr(decls)
        op = self.tok
        if not self._at_relop():
            raise self.error(f"expected a comparison, got {op.text or 'end of input'!r}")
        self.i += 1
        right = self.expr(decls)
        if op.text in ("=", "!="):
            return L.Eq(left, right, op.text == "!=")
        c = L.Cmp(op.text, left, right)
        try:
            L.check_condition(c)
        except L.LabelError as exc:
            raise self.error(str(exc), op) from None
        return c

    def _at_relop(self) -> bool:
        return self.tok.kind == "op" and self.tok.text in ("=", "!=", "<", "<=", ">", ">=")

    # --- rules

    def rule(self) -> Rule:
        name_tok = self.ident()
        decls: dict = {}
        self.expect("(")
        if not self.at(")"):
            while True:
                names = [self.ident()]
                while self.accept(","):
                    names.append(self.ident())
                self.expect(":")
                tt = self.ident()
                if tt.text not in L.TYPES:
                    raise self.error(f"unknown type {tt.text}", tt)
                for n in names:
                    if n.text in decls:
                        raise self.error(f"variable {n.text} declared twice", n)
                    decls[n.text] = tt.text
                if not self.accept(";"):
                    break
        self.expect(")")
        lhs = self.rule_graph(decls)
        self.expect("=>")
        rhs = self.rule_graph(decls)
        cond = None
        if self.accept("where"):
            cond = self.cond(decls)
        try:
            return Rule(name_tok.text, decls, lhs, rhs, cond)
        except RuleError as exc:
            raise self.error(str(exc), name_tok) from None

    def rule_graph(self, decls) -> RuleGraph:
        self.expect("[")
        nodes, edges = [], []
        while self.at("("):
            self.expect("(")
            nid = self.item_id().text
            rooted = self.accept("(R)")
            self.expect(",")
            label = self.expr(decls)
            mark = Mark.NONE
            if self.accept("#"):
                mark = self.mark((Mark.RED, Mark.GREEN, Mark.BLUE, Mark.GREY, Mark.ANY))
            self.expect(")")
            nodes.append(RuleNode(nid, label, mark, rooted))
        self.expect("|")
        while self.at("("):
            self.expect("(")
            eid = self.item_id().text
            bidi = self.accept("(B)")
            self.expect(",")
            src = self.item_id().text
            self.expect(",")
            tgt = self.item_id().text
            self.expect(",")
            label = self.expr(decls)
            mark = Mark.NONE
            if self.accept("#"):
                mark = self.mark((Mark.RED, Mark.GREEN, Mark.BLUE, Mark.DASHED, Mark.ANY))
            self.expect(")")
            edges.append(RuleEdge(eid, src, tgt, label, mark, bidi))
        self.expect("]")
        return RuleGraph(tuple(nodes), tuple(edges))

    # --- commands

    def comseq(self):
        items = [self.or_cmd()]
        while self.accept(";"):
            items.append(self.or_cmd())
        return items[0] if len(items) == 1 else C.Seq(tuple(items))

    def or_cmd(self):
        c = self.postfix()
        while self.accept("or"):
            c = C.OrCmd(c, self.postfix())
        return c

    def postfix(self):
        t = self.tok
        if t.kind == "ident" and t.text in ("if", "try"):
            self.i += 1
            cond = self.postfix()
            then = orelse = None
            if self.accept("then"):
                then = self.postfix()
            if self.accept("else"):
                orelse = self.postfix()
            if t.text == "if" and then is None:
                raise self.error("if needs a then branch", t)
            node = C.If(cond, then, orelse) if t.text == "if" else C.Try(cond, then, orelse)
            self._locs[id(node)] = t
            return node
        c = self.primary_cmd()
        while self.at("!"):
            self.i += 1
            c = C.Loop(c)
        return c

    def primary_cmd(self):
        t = self.tok
        if self.accept("("):
            c = self.comseq()
            self.expect(")")
            return c
        if self.accept("{"):
            names = []
            if not self.at("}"):
                names.append(self.ident())
                while self.accept(","):
                    names.append(self.ident())
            self.expect("}")
            node = C.RuleSetCall(tuple(n.text for n in names))
            self._locs[id(node)] = t
            self._name_locs[id(node)] = names
            return node
        if t.kind == "ident":
            if t.text in _RESERVED:
                if t.text == "skip":
                    self.i += 1
                    return C.Skip()
                if t.text == "fail":
                    self.i += 1
                    return C.Fail()
                if t.text == "break":
                    self.i += 1
                    node = C.Break()
                    self._locs[id(node)] = t
                    return node
                raise self.error(f"unexpected keyword {t.text!r}")
            self.i += 1
            node = C.ProcCall(t.text) if t.text[0].isupper() else C.RuleSetCall((t.text,))
            self._locs[id(node)] = t
            self._name_locs[id(node)] = [t]
            return node
        raise self.error(f"expected a command, got {t.text or 'end of input'!r}")

    # --- declarations

    def declarations(self, until: str):
        rules, procs = {}, {}
        while not self.at(until) and self.tok.kind != "eof":
            t = self.tok
            if t.kind != "ident":
                raise self.error(f"expected a declaration, got {t.text!r}")
            if t.text[0].isupper():
                self.i += 1
                self.expect("=")
                local_rules, local_procs = {}, {}
                if self.accept("["):
                    local_rules, local_procs = self.declarations("]")
                    self.expect("]")
                body = self.comseq()
                if t.text in procs or t.text in rules:
                    raise self.error(f"duplicate declaration of {t.text}", t)
                procs[t.text] = C.Procedure(t.text, body, local_rules, local_procs)
                self._locs[id(procs[t.text])] = t
            else:
                r = self.rule()
                if r.name in rules or r.name in procs:
                    raise self.error(f"duplicate declaration of {r.name}", t)
                rules[r.name] = r
        return rules, procs

    def program(self) -> C.Program:
        self._locs: dict = {}
        self._name_locs: dict = {}
        rules, procs = self.declarations("")
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        if "Main" not in procs:
            raise ParseError("program has no Main declaration", self.tok.line, self.tok.col)
        main = procs["Main"]
        self._resolve(main.body, [(rules, procs)], main)
        for p in procs.values():
            if p is not main:
                self._resolve_proc(p, [(rules, procs)])
        self._check_recursion(procs)
        self._check_breaks(main.body, in_loop=False, in_cond=False, stack=())
        prog = C.Program(rules, {k: v for k, v in procs.items() if k != "Main"}, main.body)
        prog.main_proc = main
        return prog

    def _resolve_proc(self, p: C.Procedure, scopes: list):
        if getattr(p, "_resolved", False):
            return
        p._resolved = True
        self._resolve(p.body, scopes + [(p.rules, p.procs)], p)
        for q in p.procs.values():
            self._resolve_proc(q, scopes + [(p.rules, p.procs)])

    def _lookup(self, name: str, scopes: list, kind: str):
        for rules, procs in reversed(scopes):
            table = rules if kind == "rule" else procs
            if name in table:
                return table[name]
        return None

    def _resolve(self, c, scopes: list, owner):
        if isinstance(c, C.RuleSetCall):
            rs = []
            for n, tok in zip(c.names, self._name_locs.get(id(c), [])):
                r = self._lookup(n, scopes, "rule")
                if r is None:
                    raise ParseError(f"unknown rule {n}", tok.line, tok.col)
                rs.append(r)
            c.rules = tuple(rs)
        elif isinstance(c, C.ProcCall):
            p = self._lookup(c.name, scopes, "proc")
            if p is None:
                t = self._locs.get(id(c))
                raise ParseError(f"unknown procedure {c.name}", t.line if t else 0, t.col if t else 0)
            c.proc = p
            if c.name == "Main":
                t = self._locs.get(id(c))
                raise ParseError("Main cannot be called", t.line if t else 0, t.col if t else 0)
        elif isinstance(c, C.Seq):
            for x in c.items:
                self._resolve(x, scopes, owner)
        elif isinstance(c, C.Loop):
            self._resolve(c.body, scopes, owner)
        elif isinstance(c, C.OrCmd):
            self._resolve(c.left, scopes, owner)
            self._resolve(c.right, scopes, owner)
        elif isinstance(c, (C.If, C.Try)):
            for x in (c.cond, c.then, c.orelse):
                if x is not None:
                    self._resolve(x, scopes, owner)

    def _calls(self, c, out: list):
        if isinstance(c, C.ProcCall):
            out.append(c.proc)
        elif isinstance(c, C.Seq):
            for x in c.items:
                self._calls(x, out)
        elif isinstance(c, C.Loop):
            self._calls(c.body, out)
        elif isinstance(c, C.OrCmd):
            self._calls(c.left, out)
            self._calls(c.right, out)
        elif isinstance(c, (C.If, C.Try)):
            for x in (c.cond, c.then, c.orelse):
                if x is not None:
                    self._calls(x, out)

    def _check_recursion(self, procs: dict):
        state: dict = {}

        def visit(p, path):
            s = state.get(id(p))
            if s == "done":
                return
            if s == "active":
                t = self._locs.get(id(p))
                cycle = " -> ".join(q.name for q in path + [p])
                raise ParseError(f"recursive procedure: {cycle}", t.line if t else 0, t.col if t else 0)
            state[id(p)] = "active"
            callees: list = []
            self._calls(p.body, callees)
            for q in callees:
                visit(q, path + [p])
            state[id(p)] = "done"

        for p in procs.values():
            visit(p, [])

    def _check_breaks(self, c, in_loop: bool, in_cond: bool, stack: tuple):
        if isinstance(c, C.Break):
            t = self._locs.get(id(c))
            if in_cond:
                raise ParseError("break inside a condition", t.line if t else 0, t.col if t else 0)
            if not in_loop:
                raise ParseError("break outside a loop", t.line if t else 0, t.col if t else 0)
        elif isinstance(c, C.ProcCall):
            if c.proc in stack:
                return
            self._check_breaks(c.proc.body, in_loop, in_cond, stack + (c.proc,))
        elif isinstance(c, C.Seq):
            for x in c.items:
                self._check_breaks(x, in_loop, in_cond, stack)
        elif isinstance(c, C.Loop):
            self._check_breaks(c.body, True, False, stack)
        elif isinstance(c, C.OrCmd):
            self._check_breaks(c.left, in_loop, in_cond, stack)
            self._check_breaks(c.right, in_loop, in_cond, stack)
        elif isinstance(c, (C.If, C.Try)):
            self._check_breaks(c.cond, in_loop, True, stack)
            for x in (c.then, c.orelse):
                if x is not None:
                    self._check_breaks(x, in_loop, in_cond, stack)


_RESERVED = {"if", "then", "else", "try", "or", "skip", "fail", "break", "where", "and", "not"}


def parse_program(text: str) -> C.Program:
    """Parse and statically check a program."""
    p = _ProgramParser(text)
    prog = p.program()
    prog.source = text
    return prog


def parse_command(text: str, program: C.Program, in_loop: bool = False,
                  proc: Optional[C.Procedure] = None) -> object:
    """Parse a command sequence against the declarations of ``program``.

    ``proc`` adds that procedure's local declarations to the scope;
    ``in_loop`` allows a top-level ``break``.
    """
    p = _ProgramParser(text)
    p._locs, p._name_locs = {}, {}
    c = p.comseq()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    scopes = [(program.rules, program.procs)]
    if proc is not None:
        scopes.append((proc.rules, proc.procs))
    p._resolve(c, scopes, None)
    p._check_breaks(c, in_loop, False, ())
    return c
