"""Command line front end.

Exit codes: 0 success (finite overall bound, or no counterexample),
1 input error, 2 unbounded or unknown, 3 counterexample found.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

from . import bounds as B
from . import sizebounds as S
from .analysis import AnalysisConfig, analyze, json_report, text_report
from .interpreter import DEFAULT_FUEL, Scheduler, check_bounds, run, to_dot
from .invariants import strengthen
from .parser import ParseError, load
from .smt import ENV_SOLVER, ENV_TIMEOUT, SolverError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNBOUNDED = 2
EXIT_COUNTEREXAMPLE = 3


@dataclass(frozen=True)
class CliConfig:
    command: str
    path: str
    smt: str | None = None
    timeout: float | None = None
    seed: int = 0
    fuel: int = DEFAULT_FUEL
    value_range: int = 16
    trials: int = 100
    seeds: tuple = (0, 1, 2)
    fmt: str = "text"


def _parse_init(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"expected name=value, got {part!r}")
        out[name.strip()] = int(val)
    return out


def _load(path: str):
    try:
        return load(path)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def _config(args) -> AnalysisConfig:
    if args.smt:
        os.environ[ENV_SOLVER] = args.smt
    if args.timeout is not None:
        os.environ[ENV_TIMEOUT] = str(args.timeout)
    return AnalysisConfig(backend="auto" if args.smt else "internal")


def cmd_analyze(args) -> int:
    prog = _load(args.path)
    if prog is None:
        return EXIT_INPUT
    try:
        res = analyze(prog, _config(args))
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.format == "json":
        sys.stdout.write(json_report(res))
    elif args.format == "dot":
        sys.stdout.write(S.to_dot(S.build_rvg(res.state.program)))
    else:
        sys.stdout.write(text_report(res))
    return EXIT_OK if B.is_finite(res.overall) else EXIT_UNBOUNDED


def cmd_run(args) -> int:
    prog = _load(args.path)
    if prog is None:
        return EXIT_INPUT
    try:
        init = _parse_init(args.init or "")
        sched = Scheduler(args.strategy, args.seed, args.fuel)
        res = run(prog, init, sched)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for tid, n in res.edge_counts.items():
        print(f"{tid}: {n}")
    print(f"total: {res.total}")
    if res.exhausted:
        print("exhausted: fuel ran out")
    if args.dot is not None:
        text = to_dot(res.tree)
        if args.dot == "-":
            sys.stdout.write(text)
        else:
            with open(args.dot, "w", encoding="utf-8") as fh:
                fh.write(text)
    return EXIT_OK


def cmd_check(args) -> int:
    prog = _load(args.path)
    if prog is None:
        return EXIT_INPUT
    res = analyze(prog, _config(args))
    rb = dict(res.rb)
    for tid in args.inject or []:
        if tid not in rb:
            print(f"error: unknown transition {tid}", file=sys.stderr)
            return EXIT_INPUT
        rb[tid] = B.ZERO
    seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
    cex = check_bounds(prog, rb, res.sb, trials=args.trials, value_range=args.range,
                       seeds=seeds or (0,), seed=args.seed, fuel=args.fuel)
    if cex is not None:
        print(f"counterexample: {cex}")
        return EXIT_COUNTEREXAMPLE
    print(f"ok: {args.trials} initial states, seeds {','.join(map(str, seeds))}")
    return EXIT_OK


def cmd_graph(args) -> int:
    prog = _load(args.path)
    if prog is None:
        return EXIT_INPUT
    sys.stdout.write(S.to_dot(S.build_rvg(strengthen(prog))))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rhobound",
                                 description="Runtime and size bounds for integer programs with calls.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, solver=True):
        p.add_argument("path")
        if solver:
            p.add_argument("--smt", default=os.environ.get(ENV_SOLVER),
                           help=f"external SMT-LIB2 solver command (default ${ENV_SOLVER})")
            p.add_argument("--timeout", type=float, default=None, help="solver timeout in seconds")

    p = sub.add_parser("analyze", help="infer bounds and print WORST_CASE")
    common(p)
    p.add_argument("--format", choices=("text", "json", "dot"), default="text")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="evaluate from an initial state")
    common(p, solver=False)
    p.add_argument("--init", default="", help="initial values, e.g. a=0,x=2,y=0")
    p.add_argument("--strategy", choices=("first", "random"), default="first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument("--dot", nargs="?", const="-", default=None,
                   help="write the evaluation tree as DOT (stdout if no file given)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="fuzz the inferred bounds against concrete runs")
    common(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--range", type=int, default=16)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fuel", type=int, default=20_000)
    p.add_argument("--inject", action="append", metavar="TRANSITION",
                   help="debug: replace a runtime bound by 0 to test the checker")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("graph", help="print the result variable graph as DOT")
    common(p, solver=False)
    p.set_defaults(func=cmd_graph)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
