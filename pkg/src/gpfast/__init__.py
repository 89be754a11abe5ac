"""Fast rooted graph-program runtime with mark-indexed host graphs."""

from .commands import Program, format_command
from .frontend import ParseError, parse_host_graph, parse_program, print_host_graph
from .interpreter import Interpreter, Outcome, RunStats, run
from .journal import Journal
from .labels import GPRuntimeError
from .rules import Match, Rule
from .store import ConstraintError, HostGraph, Mark, NotFoundError

__all__ = [
    "ConstraintError", "GPRuntimeError", "HostGraph", "Interpreter", "Journal", "Mark",
    "Match", "NotFoundError", "Outcome", "ParseError", "Program", "Rule", "RunStats",
    "format_command", "parse_host_graph", "parse_program", "print_host_graph", "run",
]
