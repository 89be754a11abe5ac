"""Command-line interface: ``gpfast run|check|gen|bench``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench as B
from . import specimens as S
from .frontend import ParseError, parse_host_graph, parse_program, print_host_graph
from .interpreter import DEFAULT_STEP_LIMIT, DEFAULT_WALL_LIMIT, Interpreter
from .store import HostGraph

EXIT_OK, EXIT_FAIL, EXIT_RUNTIME, EXIT_TIMEOUT, EXIT_USAGE = 0, 1, 2, 3, 64
EXIT_CODES = {"graph": EXIT_OK, "fail": EXIT_FAIL, "runtime_error": EXIT_RUNTIME, "timeout": EXIT_TIMEOUT}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------- helpers


def parse_class(spec: str, size: int, weights: str | None = None, seed: int = 0) -> B.GraphClass:
    """``rooted-complete`` + ``uniform:-100:100:seed7`` -> GraphClass."""
    rooted = spec.startswith("rooted-")
    kind = spec[len("rooted-"):] if rooted else spec
    if kind == "binary-tree":
        kind = "tree"
    if kind not in B.KINDS:
        raise UsageError(f"unknown graph class {spec!r}; choose from {', '.join(B.KINDS)}")
    w = None
    if weights:
        parts = weights.split(":")
        if parts[0] == "alternating" and len(parts) == 1:
            w = ("alternating",)
        elif parts[0] == "uniform" and len(parts) in (3, 4):
            try:
                w = ("uniform", int(parts[1]), int(parts[2]))
                if len(parts) == 4:
                    if not parts[3].startswith("seed"):
                        raise ValueError
                    seed = int(parts[3][4:])
            except ValueError:
                raise UsageError(f"bad weight spec {weights!r}") from None
        else:
            raise UsageError(f"bad weight spec {weights!r}; use uniform:LO:HI[:seedN] or alternating")
    return B.GraphClass(kind, size, rooted, w, seed)


def _load_program(ref: str):
    if ref in S.NAMES:
        return S.load(ref)
    path = Path(ref)
    if not path.exists():
        raise UsageError(f"no specimen or file named {ref!r}")
    return parse_program(path.read_text())


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _input_graph(args) -> HostGraph:
    legacy = args.mode == "legacy"
    if (args.input is None) == (args.gen is None):
        raise UsageError("give exactly one input source: a host file or --gen CLASS:SIZE")
    if args.gen is not None:
        spec, _, size = args.gen.rpartition(":")
        if not spec or not size.isdigit():
            raise UsageError(f"bad generator spec {args.gen!r}; use CLASS:SIZE")
        cls = parse_class(spec, int(size), args.weights, args.seed)
        return B.generate(cls, legacy)
    text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text()
    return parse_host_graph(text, legacy)


# ---------------------------------------------------------- subcommands


def cmd_run(args) -> int:
    program = _load_program(args.program)
    g = _input_graph(args)
    name = args.program if args.program in S.NAMES else None
    monitors = S.monitors_for(name) if args.monitors and name else []
    hooks = S.hooks_for(name) if name else []
    interp = Interpreter(program, args.step_limit, args.wall_limit, monitors, hooks)
    outcome, stats = interp.run(g)
    if outcome.kind == "graph":
        _write(print_host_graph(g), args.out)
    else:
        print(f"{outcome.kind}{': ' + outcome.message if outcome.message else ''}", file=sys.stderr)
    if args.stats:
        print(stats.report(), file=sys.stderr)
    for v in stats.violations:
        print(f"monitor violation: {v}", file=sys.stderr)
    return EXIT_CODES[outcome.kind]


def cmd_check(args) -> int:
    name = args.program
    if name not in S.NAMES:
        raise UsageError(f"unknown specimen {name!r}; choose from {', '.join(S.NAMES)}")
    legacy = args.mode == "legacy"
    cases = [(f"fixed {t}", lambda x=x: parse_host_graph(x, legacy)) for t, x in S.fixed_inputs(name)]
    for path in args.input or ():
        cases.append((f"file {path}", lambda p=path: parse_host_graph(Path(p).read_text(), legacy)))
    for k in range(args.cases):
        seed = args.seed + k
        cases.append((f"seed {seed}", lambda s=seed: _relegacy(S.random_input(name, s, args.max_n), legacy)))
    program = S.load(name)
    interp = Interpreter(program, args.step_limit, args.wall_limit,
                         S.monitors_for(name) if args.monitors else (), S.hooks_for(name))
    passed = failed = skipped = evaluations = 0
    for title, make in cases:
        g = make()
        try:
            v = S.check_program(name, g, interp=interp)
        except S.PreconditionError as exc:
            skipped += 1
            print(f"skip {title}: precondition: {exc}")
            continue
        evaluations += v.stats.monitor_checks
        if v.passed:
            passed += 1
        else:
            failed += 1
            print(f"FAIL {title}: {v.detail}")
    line = f"{name}: {passed} passed, {failed} failed, {skipped} skipped"
    if args.monitors:
        line += f", {evaluations} monitor evaluations"
    print(line)
    return EXIT_OK if failed == 0 else EXIT_FAIL


def _relegacy(g: HostGraph, legacy: bool) -> HostGraph:
    return parse_host_graph(print_host_graph(g), True) if legacy else g


def cmd_gen(args) -> int:
    cls = parse_class(args.cls, args.size, args.weights, args.seed)
    try:
        g = B.generate(cls, args.mode == "legacy")
    except B.GenerationError as exc:
        raise UsageError(str(exc)) from None
    _write(print_host_graph(g), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    program = _load_program(args.program)
    name = args.program if args.program in S.NAMES else Path(args.program).stem
    classes = []
    for spec in args.classes.split(","):
        cls = parse_class(spec.strip(), 1, args.weights, args.seed)
        for target in args.sizes:
            if args.size_by == "param":
                size = target
            elif args.size_by == "nm":
                size = B.param_for_nm(cls.kind, target)
            else:
                size = B.param_for_total(cls.kind, target, cls.rooted)
            classes.append(B.GraphClass(cls.kind, size, cls.rooted, cls.weights, cls.seed))
    legacy = args.mode == "legacy"
    table = B.run_benchmark(program, classes, reps=args.reps, legacy=legacy,
                            wall_limit=args.wall_limit, name=name)
    table.meta.update({"seed": args.seed, "step_limit": args.step_limit, "size_by": args.size_by})
    x = "nm" if args.size_by == "nm" else "size"
    out = Path(args.out or "results")
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{name}-{table.mode}"
    for series, rows in table.series().items():
        B.emit_csv(rows, out / f"{stem}-{series}.csv")
        B.emit_dat(rows, out / f"{stem}-{series}.dat", x=x)
    B.emit_svg(table, out / f"{stem}.svg", x=x)
    B.emit_manifest(table, out / f"{stem}-manifest.json", classes)
    text = B.summary(table, x)
    (out / f"{stem}-summary.txt").write_text(text + "\n")
    for r in table.rows:
        flag = " TIMEOUT" if r.timed_out else ""
        print(f"{r.series:18} n={r.n:<8} m={r.m:<9} {r.time_ms:10.2f} ms  calls={r.calls}{flag}")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gpfast", description="Run and measure rooted graph programs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, limits=True):
        sp.add_argument("--mode", choices=("bucketed", "legacy"), default="bucketed",
                        help="host-graph storage: mark buckets (default) or one node list")
        sp.add_argument("--seed", type=int, default=0, help="seed for generated inputs")
        if limits:
            sp.add_argument("--step-limit", type=int, default=DEFAULT_STEP_LIMIT,
                            help="maximum rule calls per run (timeout when exceeded)")
            sp.add_argument("--wall-limit", type=float, default=DEFAULT_WALL_LIMIT,
                            help="wall-clock seconds per run (timeout when exceeded)")
        sp.add_argument("--out", help="write output here instead of stdout (a directory for bench)")

    r = sub.add_parser("run", help="run a program on one host graph",
                       description="Exit 0 with the output graph, 1 on failure, 2 on a runtime "
                                   "error, 3 on timeout, 64 on usage errors.")
    r.add_argument("program", help="specimen name or program file")
    r.add_argument("input", nargs="?", help="host graph file, or - for stdin")
    r.add_argument("--gen", metavar="CLASS:SIZE", help="generate the input instead, e.g. grid:9")
    r.add_argument("--weights", help="edge weights for --gen: uniform:LO:HI[:seedN] or alternating")
    r.add_argument("--stats", action="store_true", help="print run statistics to stderr")
    r.add_argument("--monitors", action="store_true", help="evaluate the specimen's invariant monitors")
    common(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="compare a specimen with its oracle on seeded inputs")
    c.add_argument("program", help="specimen name")
    c.add_argument("--input", action="append", help="extra host graph file (repeatable)")
    c.add_argument("--cases", type=int, default=100, help="number of random inputs")
    c.add_argument("--max-n", type=int, default=40, help="largest random node count")
    c.add_argument("--monitors", action="store_true", help="evaluate invariant monitors")
    common(c)
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("gen", help="write a generated host graph")
    g.add_argument("cls", metavar="class", help="list, cycle, grid, tree, star, complete, discrete; "
                                                "prefix rooted- for rooted variants")
    g.add_argument("size", type=int, help="node count (edge count for stars)")
    g.add_argument("--weights", help="uniform:LO:HI[:seedN] or alternating")
    common(g, limits=False)
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="time a program over graph classes and sizes")
    b.add_argument("program", help="specimen name or program file")
    b.add_argument("--classes", default="list,cycle,grid,tree,star,complete",
                   help="comma-separated classes")
    b.add_argument("--sizes", type=lambda s: [int(x) for x in s.split(",")],
                   default=[20000, 40000, 80000, 160000, 320000], help="comma-separated sizes")
    b.add_argument("--size-by", choices=("total", "nm", "param"), default="total",
                   help="sizes are node+edge totals, n*m products or raw generator sizes")
    b.add_argument("--reps", type=int, default=5, help="timed repetitions per cell")
    b.add_argument("--weights", help="uniform:LO:HI[:seedN] or alternating")
    common(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParseError, OSError, KeyError, B.GenerationError) as exc:
        print(f"gpfast: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
