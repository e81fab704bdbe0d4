"""Interval invariants per location, used to strengthen guards.

A forward dataflow over transitions and call edges. Each variable carries
an interval whose ends may be infinite (``None``). Only sign and constant
facts (``v = c``, ``v >= c`` with ``c >= 0``, ``v <= c`` with ``c <= 0``)
are turned back into guard atoms, which keeps the guards small.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from math import ceil, floor

from .its import Constraint, Polynomial, Program, ge, is_call_symbol, le

WIDEN_AFTER = 3


@dataclass(frozen=True)
class Interval:
    lo: int | None = None
    hi: int | None = None

    @property
    def empty(self) -> bool:
        return self.lo is not None and self.hi is not None and self.lo > self.hi

    def join(self, other: "Interval") -> "Interval":
        if self.empty:
            return other
        if other.empty:
            return self
        lo = None if self.lo is None or other.lo is None else min(self.lo, other.lo)
        hi = None if self.hi is None or other.hi is None else max(self.hi, other.hi)
        return Interval(lo, hi)

    def meet(self, other: "Interval") -> "Interval":
        lo = other.lo if self.lo is None else self.lo if other.lo is None else max(self.lo, other.lo)
        hi = other.hi if self.hi is None else self.hi if other.hi is None else min(self.hi, other.hi)
        return Interval(lo, hi)

    def widen(self, new: "Interval") -> "Interval":
        lo = self.lo if self.lo is not None and new.lo is not None and new.lo >= self.lo else None
        hi = self.hi if self.hi is not None and new.hi is not None and new.hi <= self.hi else None
        return Interval(lo, hi)

    def __add__(self, other: "Interval") -> "Interval":
        lo = None if self.lo is None or other.lo is None else self.lo + other.lo
        hi = None if self.hi is None or other.hi is None else self.hi + other.hi
        return Interval(lo, hi)

    def __mul__(self, other: "Interval") -> "Interval":
        a_ends = (-INF if self.lo is None else self.lo, INF if self.hi is None else self.hi)
        b_ends = (-INF if other.lo is None else other.lo, INF if other.hi is None else other.hi)
        prods = [_xmul(a, b) for a in a_ends for b in b_ends]
        lo, hi = min(prods), max(prods)
        return Interval(None if lo == -INF else int(lo), None if hi == INF else int(hi))


TOP = Interval()
INF = float("inf")


def _xmul(a, b):
    if a == 0 or b == 0:
        return 0
    return a * b


def eval_interval(p: Polynomial, env: dict) -> Interval:
    out = Interval(0, 0)
    for mono, c in p.items():
        term = Interval(c, c) if c == int(c) else _frac_interval(c)
        for v, k in mono:
            iv = TOP if is_call_symbol(v) else env.get(v, TOP)
            for _ in range(k):
                term = term * iv
        out = out + term
    return out


def _frac_interval(c) -> Interval:
    return Interval(floor(c), ceil(c))


def refine(guard: Constraint, env: dict) -> dict | None:
    """Tighten intervals by guard atoms in a single variable; None if infeasible."""
    env = dict(env)
    for _ in range(2):
        for atom in guard.atoms:
            n = atom.normal()  # the atom holds iff n > 0
            xs = list(n.indeterminates())
            if len(xs) != 1 or not n.is_linear():
                continue
            v = xs[0]
            a = n.coeff(v)
            # a*v + d > 0 over the integers means a*v >= 1 - d
            lim = Fraction(1 - n.constant()) / a
            if a > 0:
                env[v] = env.get(v, TOP).meet(Interval(ceil(lim), None))
            else:
                env[v] = env.get(v, TOP).meet(Interval(None, floor(lim)))
            if env[v].empty:
                return None
    return env


def infer(prog: Program, widen_after: int = WIDEN_AFTER) -> dict:
    """Location -> {variable: Interval}; locations never reached map to None."""
    state: dict = {loc: None for loc in prog.locations}
    state[prog.initial] = {v: TOP for v in prog.variables}
    visits = {loc: 0 for loc in prog.locations}
    work = [prog.initial]
    while work:
        loc = work.pop(0)
        env = state[loc]
        if env is None:
            continue
        for t in prog.outgoing(loc):
            g = refine(t.guard, env)
            if g is None:
                continue
            targets = [(t.target, {v: eval_interval(p, g) for v, p in t.eta})]
            for cid in sorted(t.calls(), key=lambda c: int(c[1:])):
                c = prog.call(cid)
                targets.append((c.target, {v: eval_interval(p, g) for v, p in c.zeta}))
            for tgt, new in targets:
                old = state[tgt]
                if old is None:
                    merged = new
                else:
                    merged = {v: old[v].join(new[v]) for v in prog.variables}
                    if visits[tgt] >= widen_after:
                        merged = {v: old[v].widen(merged[v]) for v in prog.variables}
                if merged != old:
                    state[tgt] = merged
                    visits[tgt] += 1
                    if tgt not in work:
                        work.append(tgt)
    return state


def facts(env: dict | None, variables) -> Constraint:
    if env is None:
        return Constraint(())
    atoms = []
    for v in variables:
        iv = env[v]
        x = Polynomial.var(v)
        if iv.lo is not None and iv.lo == iv.hi:
            atoms += [ge(x, iv.lo), le(x, iv.lo)]
            continue
        if iv.lo is not None and iv.lo >= 0:
            atoms.append(ge(x, iv.lo))
        if iv.hi is not None and iv.hi <= 0:
            atoms.append(le(x, iv.hi))
    return Constraint(tuple(atoms))


def strengthen(prog: Program, inv: dict | None = None) -> Program:
    """Same program with each guard conjoined with its source invariant."""
    inv = infer(prog) if inv is None else inv
    ts = []
    for t in prog.transitions:
        extra = facts(inv[t.source], prog.variables)
        atoms = list(t.guard.atoms) + [a for a in extra.atoms if a not in t.guard.atoms]
        ts.append(replace(t, guard=Constraint(tuple(atoms))))
    return replace(prog, transitions=tuple(ts))
