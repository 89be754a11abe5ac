"""Command-language syntax tree."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(eq=False)
class RuleSetCall:
    names: tuple
    rules: tuple = ()  # resolved Rule objects, filled in by the frontend


@dataclass(eq=False)
class ProcCall:
    name: str
    proc: Optional["Procedure"] = None


@dataclass(eq=False)
class If:
    cond: object
    then: Optional[object] = None
    orelse: Optional[object] = None


@dataclass(eq=False)
class Try:
    cond: object
    then: Optional[object] = None
    orelse: Optional[object] = None


@dataclass(eq=False)
class Seq:
    items: tuple


@dataclass(eq=False)
class Loop:
    body: object


@dataclass(eq=False)
class OrCmd:
    left: object
    right: object


@dataclass(eq=False)
class Break:
    pass


@dataclass(eq=False)
class Skip:
    pass


@dataclass(eq=False)
class Fail:
    pass


@dataclass(eq=False)
class Procedure:
    name: str
    body: object
    rules: dict = field(default_factory=dict)
    procs: dict = field(default_factory=dict)


@dataclass(eq=False)
class Program:
    """A parsed program: global rules and procedures plus ``Main``."""

    rules: dict
    procs: dict
    main: object
    source: str = ""

    def all_rules(self) -> list:
        """Every rule declared anywhere in the program, in declaration order."""
        out = list(self.rules.values())
        seen = set()
        stack = list(self.procs.values())
        while stack:
            p = stack.pop(0)
            if id(p) in seen:
                continue
            seen.add(id(p))
            out.extend(p.rules.values())
            stack.extend(p.procs.values())
        return out

    def rule(self, name: str):
        for r in self.all_rules():
            if r.name == name:
                return r
        raise KeyError(name)


def format_command(c) -> str:
    """Render a command so that it parses back to the same tree."""
    if isinstance(c, RuleSetCall):
        if len(c.names) == 1:
            return c.names[0]
        return "{" + ", ".join(c.names) + "}"
    if isinstance(c, ProcCall):
        return c.name
    if isinstance(c, Seq):
        return "; ".join(_wrap_seq_item(x) for x in c.items)
    if isinstance(c, Loop):
        return _atomic(c.body) + "!"
    if isinstance(c, OrCmd):
        return f"{_wrap_or(c.left)} or {_wrap_or(c.right)}"
    if isinstance(c, (If, Try)):
        kw = "if" if isinstance(c, If) else "try"
        out = f"{kw} {_atomic(c.cond)}"
        if c.then is not None:
            out += f" then {_atomic(c.then)}"
        if c.orelse is not None:
            out += f" else {_atomic(c.orelse)}"
        return out
    if isinstance(c, Break):
        return "break"
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, Fail):
        return "fail"
    raise TypeError(f"not a command: {c!r}")


def _atomic(c) -> str:
    if isinstance(c, (Seq, OrCmd, If, Try)):
        return f"({format_command(c)})"
    return format_command(c)


def _wrap_or(c) -> str:
    if isinstance(c, (Seq, OrCmd, If, Try)):
        return f"({format_command(c)})"
    return format_command(c)


def _wrap_seq_item(c) -> str:
    if isinstance(c, Seq):
        return f"({format_command(c)})"
    return format_command(c)
