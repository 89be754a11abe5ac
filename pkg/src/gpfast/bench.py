"""Graph generators, benchmark harness, scaling fits and result emitters."""

from __future__ import annotations

import gc
import json
import math
import random
import statistics
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .commands import Program
from .interpreter import Interpreter
from .store import HostGraph, Mark

KINDS = ("list", "cycle", "grid", "tree", "star", "complete", "discrete")
RNG_ALGORITHM = "python random.Random (Mersenne Twister), seeded per graph"


class GenerationError(ValueError):
    """Invalid generator parameters."""


@dataclass(frozen=True)
class GraphClass:
    """A generator family.

    ``size`` is the number of edges for stars and the number of nodes for
    every other kind.  ``weights`` is None, ``("uniform", lo, hi)`` or
    ``("alternating",)``.
    """

    kind: str
    size: int
    rooted: bool = False
    weights: Optional[tuple] = None
    seed: int = 0

    def label(self) -> str:
        return f"{'rooted-' if self.rooted else ''}{self.kind}"


def counts(kind: str, size: int, rooted: bool = False) -> tuple:
    """``(n, m)`` produced by ``generate`` for the given parameters."""
    if kind == "star":
        return size + 1, size
    if kind == "list" or kind == "tree":
        return size, max(size - 1, 0)
    if kind == "cycle":
        return size, size
    if kind == "grid":
        k = math.isqrt(size)
        return size, 2 * k * (k - 1)
    if kind == "complete":
        return size, size * size if not rooted else size * (size - 1)
    if kind == "discrete":
        return size, 0
    raise GenerationError(f"unknown graph kind {kind!r}")


def param_for_total(kind: str, total: int, rooted: bool = False) -> int:
    """Generator size whose node+edge count is close to ``total``."""
    if kind in ("list", "tree"):
        return max(1, (total + 1) // 2)
    if kind == "cycle":
        return max(1, total // 2)
    if kind == "star":
        return max(1, (total - 1) // 2)
    if kind == "grid":
        k = max(1, round((1 + math.sqrt(1 + 3 * total)) / 3))
        return k * k
    if kind == "complete":
        n = max(1, round(math.sqrt(total)))
        return n
    if kind == "discrete":
        return total
    raise GenerationError(f"unknown graph kind {kind!r}")


def param_for_nm(kind: str, nm: int) -> int:
    """Generator size whose node count times edge count is close to ``nm``."""
    if kind in ("list", "tree", "cycle", "star"):
        return max(2, round(math.sqrt(nm)))
    if kind == "grid":
        k = max(2, round((nm / 2) ** 0.25))
        return k * k
    if kind == "complete":
        return max(2, round(nm ** (1 / 3)))
    raise GenerationError(f"no n*m sizing for {kind!r}")


def _weights(cls: GraphClass, m: int, rng: random.Random) -> list:
    if cls.weights is None:
        return [()] * m
    kind = cls.weights[0]
    if kind == "alternating":
        return [(-2,) if i % 2 == 0 else (1,) for i in range(m)]
    if kind == "uniform":
        lo, hi = cls.weights[1], cls.weights[2]
        if lo > hi:
            raise GenerationError("empty weight interval")
        ws = [rng.randint(lo, hi) for _ in range(m)]
        if cls.kind == "cycle" and hi >= 0:
            # random cycles must not admit a negative cycle
            while sum(ws) < 0:
                ws = [rng.randint(lo, hi) for _ in range(m)]
        return [(w,) for w in ws]
    raise GenerationError(f"unknown weight scheme {kind!r}")


def generate(cls: GraphClass, legacy: bool = False) -> HostGraph:
    """Build a graph of the class; deterministic for a fixed seed."""
    kind, size = cls.kind, cls.size
    if size < 0:
        raise GenerationError("size must be non-negative")
    if kind not in KINDS:
        raise GenerationError(f"unknown graph kind {kind!r}")
    if kind == "grid" and math.isqrt(size) ** 2 != size:
        raise GenerationError("grid size must be a perfect square")
    if cls.rooted and kind == "discrete":
        raise GenerationError("discrete graphs have no rooted variant")
    rng = random.Random(cls.seed)
    g = HostGraph(legacy=legacy)
    if kind == "discrete":
        for _ in range(size):
            g.add_node((), Mark.NONE)
        return g
    pairs: list = []
    if kind == "star":
        n = size + 1
        for i in range(size):
            pairs.append((0, i + 1) if i % 2 == 0 else (i + 1, 0))
    else:
        n = size
        if kind == "list":
            pairs = [(i, i + 1) for i in range(n - 1)]
        elif kind == "cycle":
            pairs = [(i, (i + 1) % n) for i in range(n)]
        elif kind == "tree":
            pairs = [((i - 1) // 2, i) for i in range(1, n)]
        elif kind == "grid":
            k = math.isqrt(n)
            for r in range(k):
                for c in range(k):
                    v = r * k + c
                    if c + 1 < k:
                        pairs.append((v, v + 1))
                    if r + 1 < k:
                        pairs.append((v, v + k))
        elif kind == "complete":
            pairs = [(i, j) for i in range(n) for j in range(n) if cls.rooted is False or i != j]
    ids = [g.add_node((), Mark.GREY, rooted=cls.rooted and i == 0) for i in range(n)]
    for (s, t), w in zip(pairs, _weights(cls, len(pairs), rng)):
        g.add_edge(ids[s], ids[t], w)
    return g


# ------------------------------------------------------------ random corpora


def random_label(rng: random.Random) -> tuple:
    r = rng.random()
    if r < 0.5:
        return ()
    if r < 0.8:
        return (rng.randint(-5, 5),)
    return (rng.randint(0, 3), rng.choice("abc"))


def random_dfs_graph(seed: int, max_n: int = 40, max_m: int = 80, min_n: int = 1,
                     loops: bool = True) -> HostGraph:
    """Random grey multigraph with unmarked edges and random labels."""
    rng = random.Random(seed)
    n = rng.randint(min_n, max_n)
    m = rng.randint(0, max_m) if n else 0
    if rng.random() < 0.3:
        m = min(m, max(n - 1, 0) + rng.randint(0, 2))  # sparse, often a forest
    g = HostGraph()
    ids = [g.add_node(random_label(rng), Mark.GREY) for _ in range(n)]
    for _ in range(m):
        s, t = rng.choice(ids), rng.choice(ids)
        if s == t and not loops:
            continue
        g.add_edge(s, t, random_label(rng))
    return g


def random_bf_graph(seed: int, max_n: int = 30, lo: int = -10, hi: int = 10) -> HostGraph:
    """Random loop-free rooted digraph with integer weights in [lo, hi]."""
    rng = random.Random(seed)
    n = rng.randint(1, max_n)
    m = rng.randint(0, 3 * n) if n > 1 else 0
    g = HostGraph()
    ids = [g.add_node(random_label(rng), Mark.GREY, rooted=(i == 0)) for i in range(n)]
    for _ in range(m):
        s, t = rng.sample(ids, 2)
        g.add_edge(s, t, (rng.randint(lo, hi),))
    return g


# ----------------------------------------------------------------- harness


@dataclass
class BenchRow:
    series: str
    param: int
    n: int
    m: int
    size: int
    reps: int
    time_ms: float
    calls: int
    outcome: str
    timed_out: bool = False

    @property
    def nm(self) -> int:
        return self.n * self.m


@dataclass
class BenchTable:
    program: str
    mode: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def series(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out.setdefault(r.series, []).append(r)
        return out


def run_benchmark(program: Union[str, Program], classes: Sequence[GraphClass], reps: int = 5,
                  legacy: bool = False, wall_limit: float = 600.0, warmup: bool = True,
                  name: Optional[str] = None) -> BenchTable:
    """Time ``program`` on each class (one series per class label).

    Generation is untimed; only the interpreter run is measured, with the
    garbage collector paused.  One warmup run per series is discarded.
    """
    if isinstance(program, str):
        from .specimens import load

        name = name or program
        program = load(program)
    interp = Interpreter(program, wall_limit=wall_limit)
    table = BenchTable(name or "program", "legacy" if legacy else "bucketed")
    table.meta = {"rng": RNG_ALGORITHM, "reps": reps, "wall_limit": wall_limit}
    warmed: set = set()
    for cls in classes:
        series = cls.label()
        if warmup and series not in warmed:
            warmed.add(series)
            interp.run(generate(cls, legacy))
        times, outcome, calls = [], "", 0
        timed_out = False
        for _ in range(reps):
            g = generate(cls, legacy)
            gc.collect()
            gc.disable()
            try:
                t0 = time.perf_counter()
                res, stats = interp.run(g)
                dt = time.perf_counter() - t0
            finally:
                gc.enable()
            times.append(dt)
            outcome, calls = res.kind, stats.rule_calls
            if res.kind == "timeout":
                timed_out = True
                break
        n, m = counts(cls.kind, cls.size, cls.rooted)
        table.rows.append(BenchRow(series, cls.size, n, m, n + m, len(times),
                                   statistics.median(times) * 1000.0, calls, outcome, timed_out))
    return table


@dataclass
class ScalingFit:
    slope: float
    max_ratio: float
    ratios: list


def fit_scaling(rows: Sequence, x: str = "size") -> Optional[ScalingFit]:
    """Least-squares slope of log(time) against log(x).

    Also reports the per-doubling growth ratio between adjacent rows,
    normalised to an exact doubling of ``x``.  Needs at least 4 usable rows.
    """
    pts = []
    for r in rows:
        xv = getattr(r, x) if not isinstance(r, tuple) else r[0]
        t = r.time_ms if not isinstance(r, tuple) else r[1]
        if t <= 0 or xv <= 0:
            warnings.warn(f"skipping degenerate row x={xv} time={t}")
            continue
        pts.append((float(xv), float(t)))
    if len(pts) < 4:
        return None
    pts.sort()
    lx = [math.log(p[0]) for p in pts]
    ly = [math.log(p[1]) for p in pts]
    mx, my = statistics.fmean(lx), statistics.fmean(ly)
    sxx = sum((a - mx) ** 2 for a in lx)
    if sxx == 0:
        return None
    slope = sum((a - mx) * (b - my) for a, b in zip(lx, ly)) / sxx
    ratios = []
    for (x1, t1), (x2, t2) in zip(pts, pts[1:]):
        if x2 > x1:
            ratios.append((t2 / t1) ** (1.0 / math.log2(x2 / x1)))
    return ScalingFit(slope, max(ratios) if ratios else float("nan"), ratios)


# ------------------------------------------------------------------- emit


def emit_csv(rows: Sequence[BenchRow], path) -> Path:
    path = Path(path)
    lines = ["size,time_ms,calls"]
    lines += [f"{r.size},{r.time_ms!r},{r.calls}" for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_dat(rows: Sequence[BenchRow], path, x: str = "size") -> Path:
    """Two whitespace-separated columns ``n time`` as plotted per series."""
    path = Path(path)
    lines = ["n time"] + [f"{getattr(r, x)} {r.time_ms!r}" for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_dat(path) -> list:
    out = []
    for line in Path(path).read_text().splitlines()[1:]:
        if line.strip():
            a, b = line.split()
            out.append((int(a), float(b)))
    return out


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def emit_svg(table: BenchTable, path, x: str = "size") -> Path:
    """Log-log plot with one polyline per series and a dashed fitted line."""
    path = Path(path)
    w, h, pad = 640, 420, 60
    series = table.series()
    pts = [(getattr(r, x), r.time_ms) for rs in series.values() for r in rs if r.time_ms > 0 and getattr(r, x) > 0]
    if not pts:
        raise ValueError("nothing to plot")
    lx = [math.log10(p[0]) for p in pts]
    ly = [math.log10(p[1]) for p in pts]
    x0, x1 = min(lx), max(lx) if max(lx) > min(lx) else min(lx) + 1
    y0, y1 = min(ly), max(ly) if max(ly) > min(ly) else min(ly) + 1

    def sx(v):
        return pad + (math.log10(v) - x0) / (x1 - x0) * (w - 2 * pad)

    def sy(v):
        return h - pad - (math.log10(v) - y0) / (y1 - y0) * (h - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>',
        f'<text x="{w / 2}" y="{h - 15}" text-anchor="middle" font-size="13">{x} (log)</text>',
        f'<text x="15" y="{h / 2}" transform="rotate(-90 15 {h / 2})" text-anchor="middle" font-size="13">time ms (log)</text>',
        f'<text x="{w / 2}" y="25" text-anchor="middle" font-size="14">{table.program} ({table.mode})</text>',
    ]
    for k, (name, rs) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        good = [r for r in rs if r.time_ms > 0 and getattr(r, x) > 0]
        if not good:
            continue
        coords = " ".join(f"{sx(getattr(r, x)):.1f},{sy(r.time_ms):.1f}" for r in good)
        parts.append(f'<polyline class="series" points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for r in good:
            parts.append(f'<circle cx="{sx(getattr(r, x)):.1f}" cy="{sy(r.time_ms):.1f}" r="3" fill="{color}"/>')
        fit = fit_scaling(good, x)
        if fit is not None:
            xa, xb = getattr(good[0], x), getattr(good[-1], x)
            mid = statistics.fmean(math.log10(r.time_ms) - fit.slope * math.log10(getattr(r, x)) for r in good)
            ya, yb = 10 ** (mid + fit.slope * math.log10(xa)), 10 ** (mid + fit.slope * math.log10(xb))
            parts.append(
                f'<line class="fit" x1="{sx(xa):.1f}" y1="{sy(ya):.1f}" x2="{sx(xb):.1f}" y2="{sy(yb):.1f}" '
                f'stroke="{color}" stroke-dasharray="4 3"/>'
            )
        label = name + (f" slope {fit.slope:.2f}" if fit else " slope n/a")
        parts.append(f'<text x="{w - pad - 150}" y="{pad + 16 * k}" font-size="12" fill="{color}">{label}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path


def emit_manifest(table: BenchTable, path, classes: Sequence[GraphClass] = ()) -> Path:
    path = Path(path)
    doc = {
        "program": table.program,
        "mode": table.mode,
        "meta": table.meta,
        "classes": [asdict(c) for c in classes],
        "rows": [asdict(r) for r in table.rows],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def summary(table: BenchTable, x: str = "size") -> str:
    lines = []
    for name, rs in table.series().items():
        fit = fit_scaling(rs, x)
        if fit is None:
            lines.append(f"{name}: slope n/a ({len(rs)} rows)")
        else:
            lines.append(f"{name}: slope {fit.slope:.3f}, max doubling ratio {fit.max_ratio:.3f}")
    return "\n".join(lines)
