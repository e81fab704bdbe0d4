"""Triangular weakly non-linear self-loops: closed forms and runtime bounds.

A loop ``while φ do x ← η(x)`` is twn when, for some ordering of the
variables, ``η(x_i) = a_i·x_i + p_i`` with ``p_i`` over earlier variables.
Closed forms are poly-exponential: ``Σ p_j · n^a_j · b_j^n`` with rational
polynomial coefficients over the initial values.

The constants of the bounds are derived by exact dominance checks between
summands (see ``_poly_constant`` and ``_log_constants``); every bound is
a sound over-approximation once the loop provably terminates.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from graphlib import CycleError, TopologicalSorter
from math import lcm

from . import bounds as B
from .its import Atom, Constraint, Polynomial, Transition
from .smt import entails

MAX_CONST = 1 << 16


@dataclass(frozen=True)
class PolyExp:
    """Σ coeff·n^a·b^n keyed by (b, a); 0^0 is 1."""

    terms: tuple  # (((b, a), Polynomial), ...) sorted by (b, a) ascending

    @staticmethod
    def make(d: dict) -> "PolyExp":
        return PolyExp(tuple(sorted(((k, p) for k, p in d.items() if not p.is_zero()),
                                    key=lambda kv: kv[0])))

    @staticmethod
    def const(p: Polynomial) -> "PolyExp":
        return PolyExp.make({(1, 0): p})

    def as_dict(self) -> dict:
        return dict(self.terms)

    def __add__(self, other: "PolyExp") -> "PolyExp":
        d = self.as_dict()
        for k, p in other.terms:
            d[k] = d.get(k, Polynomial()) + p
        return PolyExp.make(d)

    def scale(self, c) -> "PolyExp":
        return PolyExp.make({k: p * c for k, p in self.terms})

    def __mul__(self, other: "PolyExp") -> "PolyExp":
        d: dict = {}
        for (b1, a1), p1 in self.terms:
            for (b2, a2), p2 in other.terms:
                k = (b1 * b2, a1 + a2)
                d[k] = d.get(k, Polynomial()) + p1 * p2
        return PolyExp.make(d)

    def eval(self, env, n: int):
        total = Fraction(0)
        for (b, a), p in self.terms:
            total += Fraction(p.eval(env)) * (n ** a) * (b ** n)
        return total

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (b, a), p in self.terms:
            f = [f"({p})"]
            if a:
                f.append("n" if a == 1 else f"n^{a}")
            if b != 1:
                f.append(f"{b}^n" if b >= 0 else f"({b})^n")
            parts.append("*".join(f))
        return " + ".join(parts)


@dataclass(frozen=True)
class TwnLoop:
    variables: tuple  # in triangular order
    guard: Constraint
    update: tuple  # ((var, Polynomial), ...) in triangular order
    factors: tuple  # ((var, a_i), ...)


def as_twn(t: Transition, extra: Constraint | None = None) -> TwnLoop | None:
    """Recognize a self-loop with a twn update; ``extra`` adds invariant atoms."""
    if t.source != t.target or t.calls():
        return None
    upd = dict(t.eta)
    deps = {}
    factors = {}
    for v, p in upd.items():
        if p.degree_in(v) > 1:
            return None
        own = Polynomial({m: c for m, c in p.items() if dict(m).get(v) == 1})
        # own part must be exactly a_i * v
        if not own.is_zero() and (len(own.terms) != 1 or own.terms.get(((v, 1),)) is None):
            return None
        factors[v] = own.coeff(v)
        deps[v] = {u for u in (p - own).indeterminates() if u != v}
    try:
        order = tuple(TopologicalSorter(deps).static_order())
    except CycleError:
        return None
    order = tuple(v for v in order if v in upd)
    guard = t.guard if extra is None else t.guard.conj(extra)
    return TwnLoop(order, guard, tuple((v, upd[v]) for v in order),
                   tuple((v, factors[v]) for v in order))


def _solve(mat: list, rhs: list) -> list:
    """Gaussian elimination over Fractions for a square nonsingular system."""
    n = len(mat)
    m = [list(map(Fraction, row)) + [Fraction(r)] for row, r in zip(mat, rhs)]
    for col in range(n):
        piv = next(i for i in range(col, n) if m[i][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        pv = m[col][col]
        m[col] = [v / pv for v in m[col]]
        for i in range(n):
            if i != col and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[col])]
    return [m[i][n] for i in range(n)]


def _binom(n: int, k: int) -> int:
    from math import comb

    return comb(n, k)


def _particular(a: int, b: int, e: int) -> list:
    """Coefficients u_d of P with b·P(n+1) − a·P(n) = n^e (b ≠ 0)."""
    deg = e + 1 if b == a else e
    size = deg + 1
    # unknowns u_0..u_deg; equations for coefficients of n^0..n^deg
    mat = [[Fraction(0)] * size for _ in range(size)]
    rhs = [Fraction(0)] * size
    for d in range(size):
        # b*(n+1)^d − a*n^d = Σ_k b*C(d,k) n^k − a n^d
        for k in range(d + 1):
            mat[k][d] += b * _binom(d, k)
        mat[d][d] -= a
    rhs[e] = Fraction(1)
    if b == a:
        # u_0 is free; pin it to 0 and drop the (now trivial) top equation
        mat[deg] = [Fraction(1)] + [Fraction(0)] * deg
        rhs[deg] = Fraction(0)
    return _solve(mat, rhs)


def _shift(pe: PolyExp) -> PolyExp | None:
    """q(n−1) for n ≥ 1 written with a correction at n = 0; None if not representable."""
    d: dict = {}
    at_zero = Polynomial()
    for (b, a), p in pe.terms:
        if b == 0:
            return None
        # p (n−1)^a b^(n−1) = (p/b) Σ_k C(a,k) n^k (−1)^(a−k) b^n
        for k in range(a + 1):
            coef = Fraction(_binom(a, k) * (-1) ** (a - k), b)
            d[(b, k)] = d.get((b, k), Polynomial()) + p * coef
        at_zero = at_zero + p * Fraction((-1) ** a, b)
    d[(0, 0)] = d.get((0, 0), Polynomial()) - at_zero
    return PolyExp.make(d)


def closed_form(loop: TwnLoop) -> dict | None:
    """Closed form of every variable after n iterations."""
    cl: dict = {}
    factors = dict(loop.factors)
    for v, p in loop.update:
        a = factors[v]
        rest = p - Polynomial.var(v) * a if a else p
        q = _apply(rest, cl)
        if a == 0:
            shifted = _shift(q)
            if shifted is None:
                return None
            cl[v] = PolyExp.make({(0, 0): Polynomial.var(v)}) + shifted
            continue
        d: dict = {}
        k0 = Polynomial.var(v)
        for (b, e), coef in q.terms:
            if b == 0:
                if e > 0:
                    continue
                # p·δ(n=0) is matched by −(p/a)·0^n
                d[(0, 0)] = d.get((0, 0), Polynomial()) - coef * Fraction(1, a)
                k0 = k0 + coef * Fraction(1, a)
                continue
            us = _particular(a, b, e)
            for deg, u in enumerate(us):
                if u:
                    d[(b, deg)] = d.get((b, deg), Polynomial()) + coef * u
            k0 = k0 - coef * us[0]
        d[(a, 0)] = d.get((a, 0), Polynomial()) + k0
        cl[v] = PolyExp.make(d)
    return cl


def _apply(p: Polynomial, cl: dict) -> PolyExp:
    out = PolyExp.make({})
    for mono, c in p.items():
        term = PolyExp.const(Polynomial.const(c))
        for v, e in mono:
            for _ in range(e):
                term = term * cl[v]
        out = out + term
    return out


def iterate(loop: TwnLoop, env: dict, n: int) -> dict:
    state = dict(env)
    for _ in range(n):
        state = {v: p.eval(state) for v, p in loop.update}
    return state


def guard_polyexp(loop: TwnLoop, cl: dict | None = None) -> list:
    """[(atom, PolyExp of rhs − lhs)] with summands sorted by (b, a) ascending."""
    cl = cl if cl is not None else closed_form(loop)
    out = []
    for atom in loop.guard.atoms:
        out.append((atom, _apply(atom.rhs - atom.lhs, cl)))
    return out


@dataclass(frozen=True)
class _Witness:
    atom: Atom
    pe: PolyExp
    lead_scale: int  # L with L·p_k <= −1 under the guard


def _denominator(p: Polynomial) -> int:
    return lcm(*(Fraction(c).denominator for _, c in p.items())) if not p.is_zero() else 1


def _dominating(pe: PolyExp) -> bool:
    """The last summand dominates every other one in absolute growth."""
    (bk, ak), _ = pe.terms[-1]
    if bk < 1:
        return False
    return all((abs(b), a) < (bk, ak) for (b, a), _ in pe.terms[:-1])


def _witnesses(loop: TwnLoop, pes: list) -> list:
    out = []
    for atom, pe in pes:
        if not pe.terms or not _dominating(pe):
            continue
        lead = pe.terms[-1][1]
        scale = _denominator(lead)
        scaled = Polynomial({m: int(c * scale) for m, c in lead.items()})
        if not scaled.is_linear():
            continue
        # guard ⊨ scale·p_k ≤ −1, i.e. scale·p_k < 0 over the integers
        if entails(loop.guard, Atom(scaled, Polynomial.const(0)), backend="internal") == "yes":
            out.append(_Witness(atom, pe, scale))
    return out


def twn_terminates(loop: TwnLoop) -> str:
    """yes | no | unknown; never an unsound yes."""
    cl = closed_form(loop)
    if cl is None:
        return "unknown"
    pes = guard_polyexp(loop, cl)
    if _witnesses(loop, pes):
        return "yes"
    # every atom constant in n and the guard satisfiable: runs forever
    if all(all(k == (1, 0) for k, _ in pe.terms) for _, pe in pes):
        from .smt import satisfiable

        if satisfiable(loop.guard) == "sat":
            return "no"
    return "unknown"


def _ceil_poly(p: Polynomial) -> B.Bound:
    """Natural-coefficient over-approximation of |p| for rational p."""
    return B.Poly(Polynomial({m: -((-abs(Fraction(c))) // 1) for m, c in p.items()}))


def _lower_sum(pe: PolyExp) -> B.Bound:
    return B.bsum(*[_ceil_poly(p) for _, p in pe.terms[:-1]]) if len(pe.terms) > 1 else B.ZERO


def _scan_first_good(good, grows) -> int | None:
    """Smallest c >= 1 with good(n) for all n >= c.

    ``grows(n)`` must be monotone in n and imply good(m) >= good(n) for m >= n.
    """
    last_bad = 0
    for n in range(1, MAX_CONST + 1):
        ok = good(n)
        if not ok:
            last_bad = n
        elif grows(n):
            return last_bad + 1
    return None


def _poly_constant(w: _Witness) -> int | None:
    """c with n^{a_k} b_k^n >= n · n^{a_j} |b_j|^n for all n >= c and j < k."""
    (bk, ak), _ = w.pe.terms[-1]
    c = 1
    for (b, a), _ in w.pe.terms[:-1]:
        b = abs(b)
        if b == 0:
            continue
        e = ak - a - 1

        def good(n, b=b, e=e):
            return bk ** n * n ** max(e, 0) >= b ** n * n ** max(-e, 0)

        def grows(n, b=b, e=e):
            # ratio R(n+1)/R(n) >= 1 from n on
            if e >= 0:
                return bk >= b
            return bk * n ** (-e) >= b * (n + 1) ** (-e)

        cj = _scan_first_good(good, grows)
        if cj is None:
            return None
        c = max(c, cj)
    return c


def _log_constants(w: _Witness) -> tuple | None:
    """(c', c) with n^{a_k} b_k^n >= n^{a_j}|b_j|^n · 2^{(n−c)/c'} for all n >= 1."""
    (bk, ak), _ = w.pe.terms[-1]
    lower = [(abs(b), a) for (b, a), _ in w.pe.terms[:-1] if b != 0]
    if any(b >= bk for b, _ in lower):
        return None
    cprime = 1
    for b, a in lower:
        k = 1
        strict = a > ak
        while True:
            lhs, rhs = bk ** k, 2 * b ** k
            if lhs > rhs or (lhs == rhs and not strict):
                break
            k += 1
            if k > 64:
                return None
        cprime = max(cprime, k)
    c = 1
    for b, a in lower:
        e = cprime * (a - ak)

        def deficit(n, b=b, e=e):
            # D(n) = |b|^{c'n} 2^n n^e / b_k^{c'n}
            return Fraction(b ** (cprime * n) * 2 ** n, bk ** (cprime * n)) * Fraction(n) ** e

        best = Fraction(0)
        n = 1
        while n <= MAX_CONST:
            d = deficit(n)
            best = max(best, d)
            if deficit(n + 1) <= d and n > abs(e):
                break
            n += 1
        else:
            return None
        need = 0
        while Fraction(2) ** need < best:
            need += 1
        c = max(c, need)
    return cprime, c


@dataclass(frozen=True)
class TwnBounds:
    poly: B.Bound | None
    log: B.Bound | None
    witness: _Witness | None
    constants: dict


def twn_bounds(loop: TwnLoop) -> TwnBounds:
    cl = closed_form(loop)
    if cl is None:
        return TwnBounds(None, None, None, {})
    pes = guard_polyexp(loop, cl)
    ws = _witnesses(loop, pes)
    if not ws:
        return TwnBounds(None, None, None, {})
    best_poly, best_log, best_w, consts = None, None, None, {}
    mx = B.bmax(*[_lower_sum(pe) for _, pe in pes]) if pes else B.ZERO
    for w in ws:
        c = _poly_constant(w)
        if c is None:
            continue
        scale = B.Const(2 * w.lead_scale)
        poly = B.bsum(B.bprod(scale, mx), c)
        log = None
        lc = _log_constants(w)
        if lc is not None:
            cprime, clog = lc
            extra = cprime * B.ceil_log(2, w.lead_scale)
            log = B.bsum(B.bprod(cprime, B.blog(2, mx)), clog + extra)
        if best_w is None:
            best_poly, best_log, best_w = poly, log, w
            consts = {"c_poly": c, **({"c_prime": lc[0], "c_log": lc[1]} if lc else {})}
    return TwnBounds(best_poly, best_log, best_w, consts)


def twn_poly_bound(loop: TwnLoop) -> B.Bound | None:
    return twn_bounds(loop).poly


def twn_log_bound(loop: TwnLoop) -> B.Bound | None:
    return twn_bounds(loop).log


def count_iterations(loop: TwnLoop, env: dict, fuel: int = 100_000) -> int | None:
    state = dict(env)
    n = 0
    while loop.guard.holds(state):
        n += 1
        if n > fuel:
            return None
        state = {v: p.eval(state) for v, p in loop.update}
    return n


def validate_bound(loop: TwnLoop, bound: B.Bound, samples: int = 300, value_range: int = 64,
                   seed: int = 0) -> bool:
    """Oracle check of a loop bound on random states satisfying the guard."""
    import random

    rng = random.Random(seed)
    for _ in range(samples):
        env = {v: rng.randint(-value_range, value_range) for v in loop.variables}
        if not loop.guard.holds(env):
            continue
        n = count_iterations(loop, env)
        if n is None:
            return False
        val = B.eval_bound(bound, {v: abs(x) for v, x in env.items()})
        if val is not B.OMEGA and n > val:
            return False
    return True
