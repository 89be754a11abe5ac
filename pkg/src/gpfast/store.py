"""Mark-indexed host graph store.

Nodes live in one intrusive doubly-linked bucket per mark and rooted nodes
additionally in a root list.  Every node owns a 5x3 array of edge lists
(edge mark x {in, out, loop}), so the first node of a given mark, the first
root, and the first incident edge of a given mark and orientation are all
reachable in constant time.  All mutations are O(1) and can be logged to a
journal for exact rollback.
"""

from __future__ import annotations

from enum import IntEnum
from typing import Iterator, Optional, Sequence, Union


class GraphError(Exception):
    """Base class for store errors."""


class ConstraintError(GraphError):
    """An operation would violate a store invariant."""


class NotFoundError(GraphError, KeyError):
    """Unknown node or edge id."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "not found"


class Mark(IntEnum):
    NONE = 0
    RED = 1
    GREEN = 2
    BLUE = 3
    GREY = 4
    DASHED = 5
    ANY = 6

    @classmethod
    def parse(cls, text: str) -> "Mark":
        try:
            return _MARK_NAMES[text]
        except KeyError:
            raise ValueError(f"unknown mark {text!r}") from None

    @property
    def keyword(self) -> str:
        return self.name.lower()


_MARK_NAMES = {m.name.lower(): m for m in Mark}

IN, OUT, LOOP = 0, 1, 2
_ORIENTATIONS = {"in": IN, "out": OUT, "loop": LOOP, IN: IN, OUT: OUT, LOOP: LOOP}

# Mark -> bucket index (none, grey, red, green, blue); None for edge-only marks.
NODE_BUCKET = (0, 2, 3, 4, 1, None, None)
BUCKET_MARK = (Mark.NONE, Mark.GREY, Mark.RED, Mark.GREEN, Mark.BLUE)
# Mark -> edge row (none, dashed, red, green, blue); None for node-only marks.
EDGE_ROW = (0, 2, 3, 4, None, 1, None)
ROW_MARK = (Mark.NONE, Mark.DASHED, Mark.RED, Mark.GREEN, Mark.BLUE)
# Fixed candidate order for `any`.
ANY_NODE_BUCKETS = (2, 3, 4, 1)
ANY_EDGE_ROWS = (2, 3, 4, 1)

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

Atom = Union[int, str]
HostValue = tuple

# Read-only stand-in for the cell array of a node without incident edges.
_NO_CELLS = (None,) * 30


def cell_index(row: int, orientation: int) -> int:
    """Position of a cell's head in a node's ``cells`` array (tail is +1)."""
    return 2 * (row * 3 + orientation)


def check_atom(atom) -> Atom:
    if type(atom) is int:
        if not INT_MIN <= atom <= INT_MAX:
            raise ConstraintError(f"integer {atom} does not fit in 64 bits")
        return atom
    if type(atom) is str:
        for ch in atom:
            if not (" " <= ch <= "~") or ch == '"':
                raise ConstraintError(f"illegal character {ch!r} in string atom")
        return atom
    raise ConstraintError(f"not a host atom: {atom!r}")


def host_value(value) -> HostValue:
    """Normalise an int, str or sequence of atoms into a host label tuple."""
    if isinstance(value, tuple) and all(type(a) in (int, str) for a in value):
        for a in value:
            check_atom(a)
        return value
    if type(value) in (int, str):
        return (check_atom(value),)
    if isinstance(value, (list, tuple)):
        return tuple(check_atom(a) for a in value)
    raise ConstraintError(f"not a host label: {value!r}")


class NodeRecord:
    __slots__ = (
        "id", "label", "mark", "rooted", "indeg", "outdeg", "matched",
        "bprev", "bnext", "rprev", "rnext", "cells", "slot",
    )

    def __init__(self, nid: int, label: HostValue, mark: int, rooted: bool):
        self.id = nid
        self.label = label
        self.mark = mark
        self.rooted = rooted
        self.indeg = 0
        self.outdeg = 0
        self.matched = False
        self.bprev = self.bnext = None
        self.rprev = self.rnext = None
        self.cells = _NO_CELLS
        self.slot = -1

    def __repr__(self) -> str:
        return f"<node {self.id} {self.label!r} {Mark(self.mark).keyword}{' R' if self.rooted else ''}>"


class EdgeRecord:
    __slots__ = (
        "id", "source", "target", "label", "mark", "matched",
        "sprev", "snext", "tprev", "tnext",
    )

    def __init__(self, eid: int, source: NodeRecord, target: NodeRecord, label: HostValue, mark: int):
        self.id = eid
        self.source = source
        self.target = target
        self.label = label
        self.mark = mark
        self.matched = False
        self.sprev = self.snext = None
        self.tprev = self.tnext = None

    def __repr__(self) -> str:
        return f"<edge {self.id} {self.source.id}->{self.target.id} {self.label!r} {Mark(self.mark).keyword}>"


# journal entry tags
_J_ADD_NODE, _J_DEL_NODE, _J_ADD_EDGE, _J_DEL_EDGE = 0, 1, 2, 3
_J_NODE_LABEL, _J_NODE_MARK, _J_NODE_ROOT, _J_EDGE_LABEL, _J_EDGE_MARK = 4, 5, 6, 7, 8


class HostGraph:
    """Labelled directed multigraph with mark buckets and per-node edge cells.

    Public methods speak in integer ids; the underscore-prefixed record
    methods are the fast path used by the matcher and rule applier.
    """

    def __init__(self, legacy: bool = False):
        self.nodes: dict[int, NodeRecord] = {}
        self.edges: dict[int, EdgeRecord] = {}
        self._bhead: list = [None] * 5
        self._btail: list = [None] * 5
        self._bsize = [0] * 5
        self._rhead: Optional[NodeRecord] = None
        self._rtail: Optional[NodeRecord] = None
        self._nroots = 0
        self._next_node = 1
        self._next_edge = 1
        self._log: Optional[list] = None
        self._legacy = legacy
        self._slots: list = []
        self._free: list[int] = []
        self.inspections = 0

    # ------------------------------------------------------------------ mode

    @property
    def legacy(self) -> bool:
        return self._legacy

    def set_legacy_mode(self, enabled: bool) -> None:
        """Switch between bucketed node lookup and the single node list."""
        if self.nodes or self.edges:
            raise ConstraintError("store mode can only be changed on an empty graph")
        self._legacy = bool(enabled)
        self._slots = []
        self._free = []

    # ---------------------------------------------------------- list helpers

    def _bucket_append(self, n: NodeRecord) -> None:
        b = NODE_BUCKET[n.mark]
        tail = self._btail[b]
        n.bnext = None
        n.bprev = tail
        if tail is None:
            self._bhead[b] = n
        else:
            tail.bnext = n
        self._btail[b] = n
        self._bsize[b] += 1

    def _bucket_insert_after(self, n: NodeRecord, prev: Optional[NodeRecord]) -> None:
        b = NODE_BUCKET[n.mark]
        if prev is None:
            nxt = self._bhead[b]
            self._bhead[b] = n
        else:
            nxt = prev.bnext
            prev.bnext = n
        n.bprev = prev
        n.bnext = nxt
        if nxt is None:
            self._btail[b] = n
        else:
            nxt.bprev = n
        self._bsize[b] += 1

    def _bucket_unlink(self, n: NodeRecord) -> Optional[NodeRecord]:
        b = NODE_BUCKET[n.mark]
        prev, nxt = n.bprev, n.bnext
        if prev is None:
            self._bhead[b] = nxt
        else:
            prev.bnext = nxt
        if nxt is None:
            self._btail[b] = prev
        else:
            nxt.bprev = prev
        n.bprev = n.bnext = None
        self._bsize[b] -= 1
        return prev

    def _root_insert_after(self, n: NodeRecord, prev: Optional[NodeRecord]) -> None:
        if prev is None:
            nxt = self._rhead
            self._rhead = n
        else:
            nxt = prev.rnext
            prev.rnext = n
        n.rprev = prev
        n.rnext = nxt
        if nxt is None:
            self._rtail = n
        else:
            nxt.rprev = n
        self._nroots += 1

    def _root_unlink(self, n: NodeRecord) -> Optional[NodeRecord]:
        prev, nxt = n.rprev, n.rnext
        if prev is None:
            self._rhead = nxt
        else:
            prev.rnext = nxt
        if nxt is None:
            self._rtail = prev
        else:
            nxt.rprev = prev
        n.rprev = n.rnext = None
        self._nroots -= 1
        return prev

    @staticmethod
    def _cells_of(n: NodeRecord) -> list:
        cells = n.cells
        if cells is _NO_CELLS:
            cells = n.cells = [None] * 30
        return cells

    def _link_edge_after(self, e: EdgeRecord, sprev, tprev) -> None:
        """Insert ``e`` into its cells after the given predecessors (None = head)."""
        src, tgt = e.source, e.target
        row = EDGE_ROW[e.mark]
        if src is tgt:
            c = 2 * (row * 3 + LOOP)
            cells = self._cells_of(src)
            nxt = cells[c] if sprev is None else sprev.snext
            if sprev is None:
                cells[c] = e
            else:
                sprev.snext = e
            e.sprev, e.snext = sprev, nxt
            if nxt is None:
                cells[c + 1] = e
            else:
                nxt.sprev = e
            src.indeg += 1
            src.outdeg += 1
            return
        c = 2 * (row * 3 + OUT)
        cells = self._cells_of(src)
        nxt = cells[c] if sprev is None else sprev.snext
        if sprev is None:
            cells[c] = e
        else:
            sprev.snext = e
        e.sprev, e.snext = sprev, nxt
        if nxt is None:
            cells[c + 1] = e
        else:
            nxt.sprev = e
        src.outdeg += 1
        c = 2 * (row * 3 + IN)
        cells = self._cells_of(tgt)
        nxt = cells[c] if tprev is None else tprev.tnext
        if tprev is None:
            cells[c] = e
        else:
            tprev.tnext = e
        e.tprev, e.tnext = tprev, nxt
        if nxt is None:
            cells[c + 1] = e
        else:
            nxt.tprev = e
        tgt.indeg += 1

    def _link_edge_tail(self, e: EdgeRecord) -> None:
        src, tgt = e.source, e.target
        row = EDGE_ROW[e.mark]
        if src is tgt:
            c = 2 * (row * 3 + LOOP)
            cells = self._cells_of(src)
            tail = cells[c + 1]
            e.sprev, e.snext = tail, None
            if tail is None:
                cells[c] = e
            else:
                tail.snext = e
            cells[c + 1] = e
            src.indeg += 1
            src.outdeg += 1
            return
        c = 2 * (row * 3 + OUT)
        cells = self._cells_of(src)
        tail = cells[c + 1]
        e.sprev, e.snext = tail, None
        if tail is None:
            cells[c] = e
        else:
            tail.snext = e
        cells[c + 1] = e
        src.outdeg += 1
        c = 2 * (row * 3 + IN)
        cells = self._cells_of(tgt)
        tail = cells[c + 1]
        e.tprev, e.tnext = tail, None
        if tail is None:
            cells[c] = e
        else:
            tail.tnext = e
        cells[c + 1] = e
        tgt.indeg += 1

    def _unlink_edge(self, e: EdgeRecord):
        """Remove ``e`` from its cells; returns its former predecessors."""
        src, tgt = e.source, e.target
        row = EDGE_ROW[e.mark]
        sprev, snext = e.sprev, e.snext
        if src is tgt:
            c = 2 * (row * 3 + LOOP)
            cells = src.cells
            if sprev is None:
                cells[c] = snext
            else:
                sprev.snext = snext
            if snext is None:
                cells[c + 1] = sprev
            else:
                snext.sprev = sprev
            e.sprev = e.snext = None
            src.indeg -= 1
            src.outdeg -= 1
            return sprev, None
        c = 2 * (row * 3 + OUT)
        cells = src.cells
        if sprev is None:
            cells[c] = snext
        else:
            sprev.snext = snext
        if snext is None:
            cells[c + 1] = sprev
        else:
            snext.sprev = sprev
        src.outdeg -= 1
        tprev, tnext = e.tprev, e.tnext
        c = 2 * (row * 3 + IN)
        cells = tgt.cells
        if tprev is None:
            cells[c] = tnext
        else:
            tprev.tnext = tnext
        if tnext is None:
            cells[c + 1] = tprev
        else:
            tnext.tprev = tprev
        tgt.indeg -= 1
        e.sprev = e.snext = e.tprev = e.tnext = None
        return sprev, tprev

    # ------------------------------------------------------ record mutators

    def _add_node(self, label: HostValue, mark: int, rooted: bool) -> NodeRecord:
        nid = self._next_node
        self._next_node = nid + 1
        n = NodeRecord(nid, label, mark, rooted)
        self.nodes[nid] = n
        self._bucket_append(n)
        if rooted:
            self._root_insert_after(n, self._rtail)
        reused = False
        if self._legacy:
            if self._free:
                n.slot = self._free.pop()
                self._slots[n.slot] = n
                reused = True
            else:
                n.slot = len(self._slots)
                self._slots.append(n)
        if self._log is not None:
            self._log.append((_J_ADD_NODE, n, reused))
        return n

    def _delete_node(self, n: NodeRecord) -> None:
        if n.indeg or n.outdeg:
            raise ConstraintError(f"node {n.id} still has incident edges")
        del self.nodes[n.id]
        bprev = self._bucket_unlink(n)
        rprev = self._root_unlink(n) if n.rooted else None
        if self._legacy:
            self._slots[n.slot] = None
            self._free.append(n.slot)
        if self._log is not None:
            self._log.append((_J_DEL_NODE, n, bprev, rprev))

    def _add_edge(self, src: NodeRecord, tgt: NodeRecord, label: HostValue, mark: int) -> EdgeRecord:
        eid = self._next_edge
        self._next_edge = eid + 1
        e = EdgeRecord(eid, src, tgt, label, mark)
        self.edges[eid] = e
        self._link_edge_tail(e)
        if self._log is not None:
            self._log.append((_J_ADD_EDGE, e))
        return e

    def _delete_edge(self, e: EdgeRecord) -> None:
        del self.edges[e.id]
        sprev, tprev = self._unlink_edge(e)
        if self._log is not None:
            self._log.append((_J_DEL_EDGE, e, sprev, tprev))

    def _set_node_label(self, n: NodeRecord, label: HostValue) -> None:
        if self._log is not None:
            self._log.append((_J_NODE_LABEL, n, n.label))
        n.label = label

    def _set_node_mark(self, n: NodeRecord, mark: int) -> None:
        if n.mark == mark:
            return
        bprev = self._bucket_unlink(n)
        if self._log is not None:
            self._log.append((_J_NODE_MARK, n, n.mark, bprev))
        n.mark = mark
        self._bucket_append(n)

    def _set_root(self, n: NodeRecord, rooted: bool) -> None:
        if n.rooted == rooted:
            return
        if rooted:
            self._root_insert_after(n, self._rtail)
            rprev = None
        else:
            rprev = self._root_unlink(n)
        n.rooted = rooted
        if self._log is not None:
            self._log.append((_J_NODE_ROOT, n, not rooted, rprev))

    def _set_edge_label(self, e: EdgeRecord, label: HostValue) -> None:
        if self._log is not None:
            self._log.append((_J_EDGE_LABEL, e, e.label))
        e.label = label

    def _set_edge_mark(self, e: EdgeRecord, mark: int) -> None:
        if e.mark == mark:
            return
        sprev, tprev = self._unlink_edge(e)
        if self._log is not None:
            self._log.append((_J_EDGE_MARK, e, e.mark, sprev, tprev))
        e.mark = mark
        self._link_edge_tail(e)

    # ----------------------------------------------------------------- undo

    def _undo_to(self, start: int) -> None:
        """Revert logged mutations down to log position ``start``."""
        log = self._log
        self._log = None
        try:
            while len(log) > start:
                entry = log.pop()
                tag = entry[0]
                if tag == _J_ADD_NODE:
                    n = entry[1]
                    del self.nodes[n.id]
                    self._bucket_unlink(n)
                    if n.rooted:
                        self._root_unlink(n)
                    if self._legacy:
                        if entry[2]:
                            self._slots[n.slot] = None
                            self._free.append(n.slot)
                        else:
                            self._slots.pop()
                    self._next_node -= 1
                elif tag == _J_DEL_NODE:
                    n = entry[1]
                    self.nodes[n.id] = n
                    self._bucket_insert_after(n, entry[2])
                    if n.rooted:
                        self._root_insert_after(n, entry[3])
                    if self._legacy:
                        self._free.pop()
                        self._slots[n.slot] = n
                elif tag == _J_ADD_EDGE:
                    e = entry[1]
                    del self.edges[e.id]
                    self._unlink_edge(e)
                    self._next_edge -= 1
                elif tag == _J_DEL_EDGE:
                    e = entry[1]
                    self.edges[e.id] = e
                    self._link_edge_after(e, entry[2], entry[3])
                elif tag == _J_NODE_LABEL:
                    entry[1].label = entry[2]
                elif tag == _J_NODE_MARK:
                    n = entry[1]
                    self._bucket_unlink(n)
                    n.mark = entry[2]
                    self._bucket_insert_after(n, entry[3])
                elif tag == _J_NODE_ROOT:
                    n = entry[1]
                    if entry[2]:
                        self._root_insert_after(n, entry[3])
                    else:
                        self._root_unlink(n)
                    n.rooted = entry[2]
                elif tag == _J_EDGE_LABEL:
                    entry[1].label = entry[2]
                else:
                    e = entry[1]
                    self._unlink_edge(e)
                    e.mark = entry[2]
                    self._link_edge_after(e, entry[3], entry[4])
        finally:
            self._log = log

    # ------------------------------------------------------------ public API

    def _node(self, nid: int) -> NodeRecord:
        try:
            return self.nodes[nid]
        except KeyError:
            raise NotFoundError(f"no node {nid}") from None

    def _edge(self, eid: int) -> EdgeRecord:
        try:
            return self.edges[eid]
        except KeyError:
            raise NotFoundError(f"no edge {eid}") from None

    @staticmethod
    def _node_mark(mark) -> int:
        mark = Mark(mark)
        if NODE_BUCKET[mark] is None:
            raise ConstraintError(f"mark {mark.keyword} is not legal on host nodes")
        return int(mark)

    @staticmethod
    def _edge_mark(mark) -> int:
        mark = Mark(mark)
        if EDGE_ROW[mark] is None:
            raise ConstraintError(f"mark {mark.keyword} is not legal on host edges")
        return int(mark)

    def add_node(self, label=(), mark=Mark.NONE, rooted: bool = False) -> int:
        return self._add_node(host_value(label), self._node_mark(mark), bool(rooted)).id

    def delete_node(self, nid: int) -> None:
        self._delete_node(self._node(nid))

    def add_edge(self, source: int, target: int, label=(), mark=Mark.NONE) -> int:
        src, tgt = self._node(source), self._node(target)
        return self._add_edge(src, tgt, host_value(label), self._edge_mark(mark)).id

    def delete_edge(self, eid: int) -> None:
        self._delete_edge(self._edge(eid))

    def update_node(self, nid: int, label=None, mark=None, rooted: Optional[bool] = None) -> None:
        n = self._node(nid)
        if mark is not None:
            mark = self._node_mark(mark)
        if label is not None:
            label = host_value(label)
            if label != n.label:
                self._set_node_label(n, label)
        if mark is not None:
            self._set_node_mark(n, mark)
        if rooted is not None:
            self._set_root(n, bool(rooted))

    def update_edge(self, eid: int, label=None, mark=None) -> None:
        e = self._edge(eid)
        if mark is not None:
            mark = self._edge_mark(mark)
        if label is not None:
            label = host_value(label)
            if label != e.label:
                self._set_edge_label(e, label)
        if mark is not None:
            self._set_edge_mark(e, mark)

    # first/next primitives (instrumented)

    def first_node(self, mark) -> Optional[NodeRecord]:
        mark = int(mark)
        if self._legacy:
            return self._scan_slots(0, mark)
        b = NODE_BUCKET[mark]
        if b is None:
            raise ConstraintError(f"mark {Mark(mark).keyword} is not a node mark")
        n = self._bhead[b]
        if n is not None:
            self.inspections += 1
        return n

    def next_node(self, n: NodeRecord, mark) -> Optional[NodeRecord]:
        if self._legacy:
            return self._scan_slots(n.slot + 1, int(mark))
        n = n.bnext
        if n is not None:
            self.inspections += 1
        return n

    def _scan_slots(self, start: int, mark: int) -> Optional[NodeRecord]:
        slots = self._slots
        for i in range(start, len(slots)):
            n = slots[i]
            if n is None:
                continue
            self.inspections += 1
            if n.mark == mark:
                return n
        return None

    def first_edge(self, nid: int, mark, orientation) -> Optional[EdgeRecord]:
        n = self._node(nid)
        o = _ORIENTATIONS[orientation]
        row = EDGE_ROW[int(mark)]
        if row is None:
            raise ConstraintError(f"mark {Mark(mark).keyword} is not an edge mark")
        e = n.cells[cell_index(row, o)]
        if e is not None:
            self.inspections += 1
        return e

    # cursors

    def nodes_with_mark(self, mark) -> Iterator[int]:
        mark = Mark(mark)
        if mark == Mark.ANY:
            raise ConstraintError("`any` is not a host mark")
        n = self.first_node(mark)
        while n is not None:
            yield n.id
            n = self.next_node(n, mark)

    def root_nodes(self) -> Iterator[int]:
        n = self._rhead
        while n is not None:
            yield n.id
            n = n.rnext

    def incident_edges(self, nid: int, mark, orientation) -> Iterator[int]:
        n = self._node(nid)
        o = _ORIENTATIONS[orientation]
        mark = Mark(mark)
        if mark == Mark.ANY:
            rows: Sequence[int] = ANY_EDGE_ROWS
        else:
            row = EDGE_ROW[mark]
            if row is None:
                raise ConstraintError(f"mark {mark.keyword} is not an edge mark")
            rows = (row,)
        for row in rows:
            e = n.cells[cell_index(row, o)]
            while e is not None:
                yield e.id
                e = e.tnext if o == IN else e.snext

    # inspection

    def node(self, nid: int) -> NodeRecord:
        return self._node(nid)

    def edge(self, eid: int) -> EdgeRecord:
        return self._edge(eid)

    def inspect(self, item_id: int, kind: str = "node") -> dict:
        if kind == "node":
            n = self._node(item_id)
            return {
                "id": n.id, "label": n.label, "mark": Mark(n.mark), "rooted": n.rooted,
                "indegree": n.indeg, "outdegree": n.outdeg,
            }
        e = self._edge(item_id)
        return {
            "id": e.id, "label": e.label, "mark": Mark(e.mark),
            "source": e.source.id, "target": e.target.id,
        }

    def in_degree(self, nid: int) -> int:
        return self._node(nid).indeg

    def out_degree(self, nid: int) -> int:
        return self._node(nid).outdeg

    def get_mark(self, nid: int) -> Mark:
        return Mark(self._node(nid).mark)

    def is_rooted(self, nid: int) -> bool:
        return self._node(nid).rooted

    def source(self, eid: int) -> int:
        return self._edge(eid).source.id

    def target(self, eid: int) -> int:
        return self._edge(eid).target.id

    # matched flags

    def _item(self, item_id: int, kind: str):
        return self._node(item_id) if kind == "node" else self._edge(item_id)

    def set_matched(self, item_id: int, kind: str = "node") -> None:
        self._item(item_id, kind).matched = True

    def clear_matched(self, item_id: int, kind: str = "node") -> None:
        self._item(item_id, kind).matched = False

    def is_matched(self, item_id: int, kind: str = "node") -> bool:
        return self._item(item_id, kind).matched

    # sizes

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_roots(self) -> int:
        return self._nroots

    def bucket_size(self, mark) -> int:
        return self._bsize[NODE_BUCKET[int(mark)]]

    def __len__(self) -> int:
        return len(self.nodes) + len(self.edges)

    def __repr__(self) -> str:
        return f"<HostGraph {len(self.nodes)} nodes, {len(self.edges)} edges>"

    def copy(self) -> "HostGraph":
        """Structural copy with identical ids and list orders."""
        g = HostGraph(legacy=self._legacy)
        mapping = {}
        for n in sorted(self.nodes.values(), key=lambda r: r.id):
            g._next_node = n.id
            mapping[n.id] = g._add_node(n.label, n.mark, False)
        g._next_node = self._next_node
        # replay bucket and root orders
        g._bhead = [None] * 5
        g._btail = [None] * 5
        g._bsize = [0] * 5
        for b in range(5):
            n = self._bhead[b]
            while n is not None:
                g._bucket_append(mapping[n.id])
                n = n.bnext
        n = self._rhead
        while n is not None:
            m = mapping[n.id]
            m.rooted = True
            g._root_insert_after(m, g._rtail)
            n = n.rnext
        if self._legacy:
            g._slots = [None if s is None else mapping[s.id] for s in self._slots]
            for i, m in enumerate(g._slots):
                if m is not None:
                    m.slot = i
            g._free = list(self._free)
        # edges: replay every cell in order
        new_edges = {}
        for e in self.edges.values():
            new_edges[e.id] = EdgeRecord(e.id, mapping[e.source.id], mapping[e.target.id], e.label, e.mark)
        g.edges = dict(sorted(new_edges.items()))
        for n in self.nodes.values():
            m = mapping[n.id]
            for c in range(15):
                e = n.cells[2 * c]
                orient = c % 3
                while e is not None:
                    ne = new_edges[e.id]
                    cells = g._cells_of(m)
                    if orient == IN:
                        tail = cells[2 * c + 1]
                        ne.tprev = tail
                        if tail is None:
                            cells[2 * c] = ne
                        else:
                            tail.tnext = ne
                        cells[2 * c + 1] = ne
                        m.indeg += 1
                        e = e.tnext
                    else:
                        tail = cells[2 * c + 1]
                        ne.sprev = tail
                        if tail is None:
                            cells[2 * c] = ne
                        else:
                            tail.snext = ne
                        cells[2 * c + 1] = ne
                        m.outdeg += 1
                        if orient == LOOP:
                            m.indeg += 1
                        e = e.snext
        g._next_edge = self._next_edge
        return g

    def check_invariants(self) -> None:
        """Full O(n+m) consistency scan; raises AssertionError on breakage."""
        seen = set()
        for b in range(5):
            count = 0
            n = self._bhead[b]
            prev = None
            while n is not None:
                assert n.bprev is prev, f"broken bucket link at node {n.id}"
                assert NODE_BUCKET[n.mark] == b, f"node {n.id} in wrong bucket"
                assert n.id not in seen
                assert self.nodes.get(n.id) is n
                seen.add(n.id)
                count += 1
                prev, n = n, n.bnext
            assert self._btail[b] is prev
            assert self._bsize[b] == count
        assert seen == set(self.nodes), "bucket partition does not cover all nodes"
        roots = []
        n = self._rhead
        while n is not None:
            roots.append(n.id)
            n = n.rnext
        assert len(roots) == len(set(roots)) == self._nroots
        assert set(roots) == {n.id for n in self.nodes.values() if n.rooted}
        indeg = {nid: 0 for nid in self.nodes}
        outdeg = {nid: 0 for nid in self.nodes}
        for e in self.edges.values():
            assert self.nodes.get(e.source.id) is e.source, f"edge {e.id} has a dead source"
            assert self.nodes.get(e.target.id) is e.target, f"edge {e.id} has a dead target"
            outdeg[e.source.id] += 1
            indeg[e.target.id] += 1
        members = {}
        for n in self.nodes.values():
            assert n.indeg == indeg[n.id] and n.outdeg == outdeg[n.id], f"degree mismatch at node {n.id}"
            for row in range(5):
                for o in (IN, OUT, LOOP):
                    c = cell_index(row, o)
                    e = n.cells[c]
                    prev = None
                    while e is not None:
                        assert EDGE_ROW[e.mark] == row
                        if o == IN:
                            assert e.target is n and e.source is not n and e.tprev is prev
                            prev, e = e, e.tnext
                        else:
                            assert e.source is n and (e.target is n) == (o == LOOP) and e.sprev is prev
                            prev, e = e, e.snext
                        members[prev.id] = members.get(prev.id, 0) + 1
                    assert n.cells[c + 1] is prev
        for e in self.edges.values():
            assert members.get(e.id) == (1 if e.source is e.target else 2), f"edge {e.id} cell membership"
