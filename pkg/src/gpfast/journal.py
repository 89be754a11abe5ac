"""Reversible mutation log giving copy semantics without copying."""

from __future__ import annotations

from .store import HostGraph


class Journal:
    """Stack of frames over a graph's mutation log.

    While at least one frame is open, every store mutation appends its
    inverse to the graph's log; a frame is just the log length at push time.
    """

    __slots__ = ("graph", "_frames", "rollbacks")

    def __init__(self, graph: HostGraph):
        self.graph = graph
        self._frames: list[int] = []
        self.rollbacks = 0

    @property
    def depth(self) -> int:
        return len(self._frames)

    def push(self) -> None:
        g = self.graph
        if g._log is None:
            g._log = []
        self._frames.append(len(g._log))

    def commit(self) -> None:
        """Close the innermost frame, keeping its effects."""
        self._frames.pop()
        if not self._frames:
            self.graph._log = None

    def rollback(self) -> None:
        """Close the innermost frame, undoing its effects."""
        start = self._frames.pop()
        self.graph._undo_to(start)
        self.rollbacks += 1
        if not self._frames:
            self.graph._log = None

    def unwind(self, depth: int) -> None:
        """Roll back every frame above ``depth`` (used on abnormal exits)."""
        while len(self._frames) > depth:
            start = self._frames.pop()
            self.graph._undo_to(start)
        if not self._frames:
            self.graph._log = None

    def pending(self) -> int:
        """Number of logged inverse operations in open frames."""
        log = self.graph._log
        return 0 if log is None else len(log)
