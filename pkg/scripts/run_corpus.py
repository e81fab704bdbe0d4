#!/usr/bin/env python3
"""Analyze and fuzz-check every bundled program; prints one row per file."""
import argparse
import sys
import time
from pathlib import Path

from rhobound import load
from rhobound.analysis import analyze, worst_case_line
from rhobound.interpreter import check_bounds

CORPUS = Path(__file__).resolve().parents[1] / "src" / "rhobound" / "corpus"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--range", type=int, default=16)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("files", nargs="*", type=Path)
    args = ap.parse_args()
    seeds = tuple(int(s) for s in args.seeds.split(","))
    files = args.files or sorted(CORPUS.glob("*.koat"))
    bad = 0
    print(f"{'program':<18} {'result':<24} {'analyze':>8} {'check':>8}  verdict")
    for path in files:
        prog = load(path)
        t0 = time.perf_counter()
        res = analyze(prog)
        t1 = time.perf_counter()
        cex = check_bounds(prog, res.rb, res.sb, trials=args.trials, value_range=args.range, seeds=seeds)
        t2 = time.perf_counter()
        bad += cex is not None
        verdict = "ok" if cex is None else f"counterexample: {cex}"
        print(f"{path.stem:<18} {worst_case_line(res):<24} {t1 - t0:>7.2f}s {t2 - t1:>7.2f}s  {verdict}",
              flush=True)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
