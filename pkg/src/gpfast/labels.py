"""Rule label expressions, conditions, evaluation and unification.

Expressions are small frozen dataclass trees.  Before use they are compiled
into closures ``f(alpha, nb)`` where ``alpha`` maps variable names to bound
values and ``nb`` is the list of host node records bound to the rule's left
nodes (indexed by position).  List variables are bound to tuples of atoms,
every other variable to a bare atom.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

from .store import INT_MAX, INT_MIN, EDGE_ROW, IN, LOOP, OUT, Mark


class LabelError(Exception):
    """Static error in a label expression or condition."""


class GPRuntimeError(Exception):
    """Evaluation failure at run time: overflow or division by zero."""


TYPES = ("list", "atom", "int", "string", "char")
_SUPERTYPES = {
    "char": {"char", "string", "atom", "list"},
    "string": {"string", "atom", "list"},
    "int": {"int", "atom", "list"},
    "atom": {"atom", "list"},
    "list": {"list"},
}


def is_subtype(t: str, sup: str) -> bool:
    return sup in _SUPERTYPES[t]


# ------------------------------------------------------------------ AST


@dataclass(frozen=True)
class Var:
    name: str
    type: str


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class Concat:
    items: tuple


@dataclass(frozen=True)
class StrCat:
    left: object
    right: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Degree:
    kind: str  # "indeg" or "outdeg"
    node: str


@dataclass(frozen=True)
class Length:
    var: Var


Expr = Union[Var, IntLit, StrLit, Empty, Concat, StrCat, BinOp, Neg, Degree, Length]


@dataclass(frozen=True)
class TypeTest:
    type: str
    var: Var


@dataclass(frozen=True)
class Eq:
    left: object
    right: object
    negate: bool = False


@dataclass(frozen=True)
class Cmp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class EdgePred:
    source: str
    target: str
    label: object = None
    mark: Optional[Mark] = None


@dataclass(frozen=True)
class Not:
    operand: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


Condition = Union[TypeTest, Eq, Cmp, EdgePred, Not, And, Or]


# ------------------------------------------------------------- analysis


def type_of(e) -> str:
    """Most specific static type of an expression."""
    if isinstance(e, Var):
        return e.type
    if isinstance(e, (IntLit, BinOp, Neg, Degree, Length)):
        return "int"
    if isinstance(e, StrLit):
        return "char" if len(e.value) == 1 else "string"
    if isinstance(e, StrCat):
        return "string"
    return "list"


def variables(e) -> set:
    """Names of all variables occurring in an expression or condition."""
    out: set = set()
    _collect(e, out, "vars")
    return out


def node_refs(e) -> set:
    """Rule node ids referenced by degree operators or edge predicates."""
    out: set = set()
    _collect(e, out, "nodes")
    return out


def _collect(e, out: set, what: str) -> None:
    if e is None:
        return
    if isinstance(e, Var):
        if what == "vars":
            out.add(e.name)
    elif isinstance(e, Degree):
        if what == "nodes":
            out.add(e.node)
    elif isinstance(e, EdgePred):
        if what == "nodes":
            out.update((e.source, e.target))
        _collect(e.label, out, what)
    elif isinstance(e, Length):
        _collect(e.var, out, what)
    elif isinstance(e, Concat):
        for item in e.items:
            _collect(item, out, what)
    elif isinstance(e, (StrCat, BinOp, Cmp, And, Or)):
        _collect(e.left, out, what)
        _collect(e.right, out, what)
    elif isinstance(e, Eq):
        _collect(e.left, out, what)
        _collect(e.right, out, what)
    elif isinstance(e, (Neg, Not)):
        _collect(e.operand, out, what)
    elif isinstance(e, TypeTest):
        _collect(e.var, out, what)


def check_expr(e) -> None:
    """Static type check; raises LabelError on ill-typed expressions."""
    if isinstance(e, Concat):
        for item in e.items:
            check_expr(item)
    elif isinstance(e, (BinOp, Neg)):
        for sub in (e.left, e.right) if isinstance(e, BinOp) else (e.operand,):
            check_expr(sub)
            if type_of(sub) != "int":
                raise LabelError(f"arithmetic operand must be an integer, got {type_of(sub)}")
    elif isinstance(e, StrCat):
        for sub in (e.left, e.right):
            check_expr(sub)
            if not is_subtype(type_of(sub), "string"):
                raise LabelError(f"string concatenation operand must be a string, got {type_of(sub)}")
    elif isinstance(e, Length):
        pass


def check_condition(c) -> None:
    if isinstance(c, (And, Or)):
        check_condition(c.left)
        check_condition(c.right)
    elif isinstance(c, Not):
        check_condition(c.operand)
    elif isinstance(c, Eq):
        check_expr(c.left)
        check_expr(c.right)
    elif isinstance(c, Cmp):
        for sub in (c.left, c.right):
            check_expr(sub)
            if type_of(sub) != "int":
                raise LabelError("comparison operands must be integers")
    elif isinstance(c, EdgePred):
        if c.label is not None:
            check_expr(c.label)
    elif isinstance(c, TypeTest):
        if c.type not in ("int", "char", "string", "atom"):
            raise LabelError(f"unknown type test {c.type}")


def is_simple(e) -> bool:
    """True if ``e`` may appear on a left-hand side."""
    items = _flatten(e)
    list_vars = 0
    for item in items:
        if isinstance(item, Var):
            if item.type == "list":
                list_vars += 1
        elif isinstance(item, StrCat):
            pieces = _str_pieces(item)
            if pieces is None:
                return False
            if sum(1 for p in pieces if isinstance(p, Var) and p.type == "string") > 1:
                return False
        elif not isinstance(item, (IntLit, StrLit)):
            return False
    return list_vars <= 1


def _flatten(e) -> list:
    if isinstance(e, Empty):
        return []
    if isinstance(e, Concat):
        out = []
        for item in e.items:
            out.extend(_flatten(item))
        return out
    return [e]


def _str_pieces(e) -> Optional[list]:
    if isinstance(e, StrCat):
        left, right = _str_pieces(e.left), _str_pieces(e.right)
        if left is None or right is None:
            return None
        return left + right
    if isinstance(e, StrLit) or (isinstance(e, Var) and e.type in ("string", "char")):
        return [e]
    return None


# ----------------------------------------------------------- evaluation


def _checked(v: int) -> int:
    if v < INT_MIN or v > INT_MAX:
        raise GPRuntimeError(f"integer overflow: {v}")
    return v


def _div(a: int, b: int) -> int:
    if b == 0:
        raise GPRuntimeError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _as_int(v, name: str) -> int:
    if type(v) is int:
        return v
    if type(v) is tuple and len(v) == 1 and type(v[0]) is int:
        return v[0]
    raise GPRuntimeError(f"variable {name} is not bound to an integer")


def _as_str(v, name: str) -> str:
    if type(v) is str:
        return v
    if type(v) is tuple and len(v) == 1 and type(v[0]) is str:
        return v[0]
    raise GPRuntimeError(f"variable {name} is not bound to a string")


def compile_int(e, node_pos: dict) -> Callable:
    if isinstance(e, IntLit):
        v = e.value
        return lambda a, nb: v
    if isinstance(e, Var):
        name = e.name
        if e.type == "int":
            return lambda a, nb: a[name]
        return lambda a, nb: _as_int(a[name], name)
    if isinstance(e, Neg):
        f = compile_int(e.operand, node_pos)
        return lambda a, nb: _checked(-f(a, nb))
    if isinstance(e, BinOp):
        f, g = compile_int(e.left, node_pos), compile_int(e.right, node_pos)
        op = e.op
        if op == "+":
            return lambda a, nb: _checked(f(a, nb) + g(a, nb))
        if op == "-":
            return lambda a, nb: _checked(f(a, nb) - g(a, nb))
        if op == "*":
            return lambda a, nb: _checked(f(a, nb) * g(a, nb))
        if op == "/":
            return lambda a, nb: _checked(_div(f(a, nb), g(a, nb)))
        raise LabelError(f"unknown operator {op}")
    if isinstance(e, Degree):
        i = _node_index(node_pos, e.node)
        if e.kind == "indeg":
            return lambda a, nb: nb[i].indeg
        return lambda a, nb: nb[i].outdeg
    if isinstance(e, Length):
        name = e.var.name

        def length(a, nb):
            v = a[name]
            if type(v) is tuple:
                return len(v)
            if type(v) is str:
                return len(v)
            return 1

        return length
    raise LabelError(f"not an integer expression: {e!r}")


def compile_str(e, node_pos: dict) -> Callable:
    if isinstance(e, StrLit):
        v = e.value
        return lambda a, nb: v
    if isinstance(e, Var):
        name = e.name
        if e.type in ("string", "char"):
            return lambda a, nb: a[name]
        return lambda a, nb: _as_str(a[name], name)
    if isinstance(e, StrCat):
        f, g = compile_str(e.left, node_pos), compile_str(e.right, node_pos)
        return lambda a, nb: f(a, nb) + g(a, nb)
    raise LabelError(f"not a string expression: {e!r}")


def _node_index(node_pos: dict, node: str) -> int:
    try:
        return node_pos[node]
    except KeyError:
        raise LabelError(f"unknown node {node} in expression") from None


def _compile_atom(e, node_pos: dict) -> Callable:
    t = type_of(e)
    if t == "int":
        return compile_int(e, node_pos)
    if t in ("string", "char"):
        return compile_str(e, node_pos)
    if isinstance(e, Var):  # atom-typed
        name = e.name
        return lambda a, nb: a[name]
    raise LabelError(f"not an atom expression: {e!r}")


def compile_list(e, node_pos: dict) -> Callable:
    """Compile ``e`` into a closure producing a host label tuple."""
    if isinstance(e, Empty):
        return lambda a, nb: ()
    if isinstance(e, Var) and e.type == "list":
        name = e.name
        return lambda a, nb: a[name]
    if isinstance(e, IntLit):
        v = (e.value,)
        return lambda a, nb: v
    if isinstance(e, StrLit):
        v = (e.value,)
        return lambda a, nb: v
    if not isinstance(e, Concat):
        f = _compile_atom(e, node_pos)
        return lambda a, nb: (f(a, nb),)
    parts = []
    for item in _flatten(e):
        if isinstance(item, Var) and item.type == "list":
            parts.append((True, compile_list(item, node_pos)))
        else:
            parts.append((False, _compile_atom(item, node_pos)))
    if len(parts) == 2 and parts[0][0] and not parts[1][0]:
        f, g = parts[0][1], parts[1][1]
        return lambda a, nb: f(a, nb) + (g(a, nb),)
    if all(not is_list for is_list, _ in parts):
        fs = [f for _, f in parts]
        return lambda a, nb: tuple([f(a, nb) for f in fs])

    def concat(a, nb):
        out = []
        for is_list, f in parts:
            if is_list:
                out.extend(f(a, nb))
            else:
                out.append(f(a, nb))
        return tuple(out)

    return concat


def evaluate(e, alpha: dict, nodes: Optional[dict] = None):
    """Evaluate an expression to a host label tuple.

    ``nodes`` maps rule node ids to host node records (for degree operators).
    """
    nodes = nodes or {}
    pos = {k: i for i, k in enumerate(nodes)}
    return compile_list(e, pos)(alpha, list(nodes.values()))


# ------------------------------------------------------------ conditions


_CMP = {
    "<": lambda x, y: x < y,
    "<=": lambda x, y: x <= y,
    ">": lambda x, y: x > y,
    ">=": lambda x, y: x >= y,
}


def _satisfies(v, t: str) -> bool:
    if type(v) is tuple:
        if len(v) != 1:
            return False
        v = v[0]
    if t == "atom":
        return True
    if t == "int":
        return type(v) is int
    if t == "string":
        return type(v) is str
    return type(v) is str and len(v) == 1


def compile_condition(c, node_pos: dict) -> Callable:
    """Compile a condition into ``f(alpha, nb) -> bool``."""
    if isinstance(c, And):
        f, g = compile_condition(c.left, node_pos), compile_condition(c.right, node_pos)
        return lambda a, nb: f(a, nb) and g(a, nb)
    if isinstance(c, Or):
        f, g = compile_condition(c.left, node_pos), compile_condition(c.right, node_pos)
        return lambda a, nb: f(a, nb) or g(a, nb)
    if isinstance(c, Not):
        f = compile_condition(c.operand, node_pos)
        return lambda a, nb: not f(a, nb)
    if isinstance(c, TypeTest):
        name, t = c.var.name, c.type
        return lambda a, nb: _satisfies(a[name], t)
    if isinstance(c, Eq):
        f, g = compile_list(c.left, node_pos), compile_list(c.right, node_pos)
        if c.negate:
            return lambda a, nb: f(a, nb) != g(a, nb)
        return lambda a, nb: f(a, nb) == g(a, nb)
    if isinstance(c, Cmp):
        f, g = compile_int(c.left, node_pos), compile_int(c.right, node_pos)
        op = _CMP[c.op]
        return lambda a, nb: op(f(a, nb), g(a, nb))
    if isinstance(c, EdgePred):
        return _compile_edge_pred(c, node_pos)
    raise LabelError(f"not a condition: {c!r}")


def _compile_edge_pred(c: EdgePred, node_pos: dict) -> Callable:
    i, j = _node_index(node_pos, c.source), _node_index(node_pos, c.target)
    label = None if c.label is None else compile_list(c.label, node_pos)
    if label is None and c.mark is None:
        rows = range(5)  # no label given: any edge at all
    else:
        mark = Mark.NONE if c.mark is None else c.mark
        rows = range(1, 5) if mark == Mark.ANY else (EDGE_ROW[mark],)

    def pred(a, nb):
        src, tgt = nb[i], nb[j]
        want = None if label is None else label(a, nb)
        cells = src.cells
        if src is tgt:
            for row in rows:
                e = cells[2 * (row * 3 + LOOP)]
                while e is not None:
                    if want is None or e.label == want:
                        return True
                    e = e.snext
            return False
        # walk the shorter side
        if src.outdeg <= tgt.indeg:
            for row in rows:
                e = cells[2 * (row * 3 + OUT)]
                while e is not None:
                    if e.target is tgt and (want is None or e.label == want):
                        return True
                    e = e.snext
        else:
            tcells = tgt.cells
            for row in rows:
                e = tcells[2 * (row * 3 + IN)]
                while e is not None:
                    if e.source is src and (want is None or e.label == want):
                        return True
                    e = e.tnext
        return False

    return pred


# ------------------------------------------------------------ unification


def _atom_ok(v, t: str) -> bool:
    if t == "int":
        return type(v) is int
    if t == "string":
        return type(v) is str
    if t == "char":
        return type(v) is str and len(v) == 1
    return True


def _compile_item(item) -> Callable:
    """Matcher for one atom position: ``m(atom, alpha, bound) -> bool``."""
    if isinstance(item, (IntLit, StrLit)):
        lit = item.value
        lt = type(lit)
        return lambda v, a, bound: v == lit and type(v) is lt
    if isinstance(item, Var):
        name, t = item.name, item.type

        def var(v, a, bound):
            if name in a:
                old = a[name]
                return old == v and type(old) is type(v)
            if not _atom_ok(v, t):
                return False
            a[name] = v
            bound.append(name)
            return True

        return var
    pieces = _str_pieces(item)
    if pieces is None:
        raise LabelError(f"left-hand label is not simple: {item!r}")
    return _compile_str_pattern(pieces)


def _compile_str_pattern(pieces: list) -> Callable:
    # left pieces up to the string variable, then right pieces
    split = next((k for k, p in enumerate(pieces) if isinstance(p, Var) and p.type == "string"), None)
    head = pieces if split is None else pieces[:split]
    tail = [] if split is None else pieces[split + 1:]
    mid = None if split is None else pieces[split].name

    def consume(piece, s: str, pos: int, a, bound):
        """Match a fixed-width piece at ``pos``; returns the new position or -1."""
        if isinstance(piece, StrLit):
            return pos + len(piece.value) if s.startswith(piece.value, pos) else -1
        if pos >= len(s):
            return -1
        ch = s[pos]
        name = piece.name
        if name in a:
            return pos + 1 if a[name] == ch else -1
        a[name] = ch
        bound.append(name)
        return pos + 1

    def width(piece) -> int:
        return len(piece.value) if isinstance(piece, StrLit) else 1

    tail_width = sum(width(p) for p in tail)

    def match(v, a, bound):
        if type(v) is not str:
            return False
        pos = 0
        for p in head:
            pos = consume(p, v, pos, a, bound)
            if pos < 0:
                return False
        if mid is None:
            return pos == len(v)
        end = len(v) - tail_width
        if end < pos:
            return False
        rest = end
        for p in tail:
            rest = consume(p, v, rest, a, bound)
            if rest < 0:
                return False
        middle = v[pos:end]
        if mid in a:
            return a[mid] == middle
        a[mid] = middle
        bound.append(mid)
        return True

    return match


def compile_unifier(e) -> Callable:
    """Compile a simple left label into ``u(label, alpha) -> bound names | None``.

    On success the returned list names the variables newly bound in
    ``alpha``; on mismatch ``alpha`` is left unchanged and None is returned.
    """
    if not is_simple(e):
        raise LabelError(f"left-hand label is not simple: {e!r}")
    items = _flatten(e)
    lpos = next((k for k, it in enumerate(items) if isinstance(it, Var) and it.type == "list"), None)

    if lpos is not None and len(items) == 1:
        name = items[0].name

        def bare(label, a):
            if name in a:
                return [] if a[name] == label else None
            a[name] = label
            return [name]

        return bare

    if not items:
        return lambda label, a: [] if not label else None

    if lpos is None:
        ms = [_compile_item(it) for it in items]
        k = len(ms)
        if k == 1:
            m0 = ms[0]

            def single(label, a):
                if len(label) != 1:
                    return None
                bound: list = []
                if m0(label[0], a, bound):
                    return bound
                for b in bound:
                    del a[b]
                return None

            return single

        def fixed(label, a):
            if len(label) != k:
                return None
            bound: list = []
            for m, v in zip(ms, label):
                if not m(v, a, bound):
                    for b in bound:
                        del a[b]
                    return None
            return bound

        return fixed

    head = [_compile_item(it) for it in items[:lpos]]
    tail = [_compile_item(it) for it in items[lpos + 1:]]
    lname = items[lpos].name
    nh, nt = len(head), len(tail)

    def general(label, a):
        n = len(label)
        if n < nh + nt:
            return None
        bound: list = []
        ok = True
        for k, m in enumerate(head):
            if not m(label[k], a, bound):
                ok = False
                break
        if ok:
            for k, m in enumerate(tail):
                if not m(label[n - nt + k], a, bound):
                    ok = False
                    break
        if ok:
            middle = label[nh:n - nt]
            if lname in a:
                ok = a[lname] == middle
            else:
                a[lname] = middle
                bound.append(lname)
        if ok:
            return bound
        for b in bound:
            del a[b]
        return None

    return general


def unify(e, label: tuple, alpha: Optional[dict] = None) -> Optional[dict]:
    """Unify a simple rule label with a host label; returns the extended
    assignment or None on mismatch."""
    a = dict(alpha or {})
    return a if compile_unifier(e)(label, a) is not None else None


def mark_matches(rule_mark: int, host_mark: int) -> bool:
    if rule_mark == Mark.ANY:
        return host_mark != Mark.NONE
    return rule_mark == host_mark
