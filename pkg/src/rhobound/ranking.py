"""Linear ranking functions and function-call ranking triples via Farkas' lemma.

A subprogram is a set of transition ids. Templates assign an affine
polynomial to each source location of the subprogram and 0 elsewhere. Every
required implication ``guard ⟹ conclusion >= 0`` is turned into linear
constraints on template coefficients and nonnegative multipliers, solved
with the exact simplex, and the multipliers are kept as a certificate that
can be replayed independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import lcm

from . import bounds as B
from .its import Atom, Constraint, Polynomial, Program, ceil_poly, funs, trans_of
from .smt import Result, entails, simplex

FUNCS = ("d", "tf", "f")
CONST = "__const"


@dataclass(frozen=True)
class Subprogram:
    transitions: frozenset
    locations: frozenset
    rec_calls: frozenset
    rec_transitions: frozenset
    nfc: int


def recursive_parts(prog: Program, tids) -> Subprogram:
    tids = frozenset(tids)
    if not tids:
        raise ValueError("subprogram must be nonempty")
    locs = frozenset(prog.transition(t).source for t in tids)
    loc_calls = funs(prog, locs)
    trans = [prog.transition(t) for t in sorted(tids, key=_tid_key)]
    rec_calls = funs(prog, trans) & loc_calls
    rec_trans = tids & trans_of(prog, loc_calls)
    nfc = 0
    for t in trans:
        nfc = max(nfc, sum(1 for c in t.calls() if prog.call(c).target in locs))
    return Subprogram(tids, locs, rec_calls, rec_trans, nfc)


def _tid_key(tid: str):
    return (len(tid), tid)


@dataclass(frozen=True)
class LinearRF:
    values: tuple  # ((location, Polynomial), ...), sorted by location

    def at(self, loc: str) -> Polynomial:
        return dict(self.values).get(loc, Polynomial())

    def __str__(self) -> str:
        return ", ".join(f"{loc}: {p}" for loc, p in self.values)


@dataclass(frozen=True)
class RankingTriple:
    rd: LinearRF
    rtf: LinearRF
    rf: LinearRF

    def get(self, name: str) -> LinearRF:
        return {"d": self.rd, "tf": self.rtf, "f": self.rf}[name]


@dataclass
class Certificate:
    """Farkas multipliers, one list per implication label."""

    multipliers: dict = field(default_factory=dict)


# --- implications -----------------------------------------------------------

@dataclass(frozen=True)
class Implication:
    label: str
    guard: Constraint
    func: str
    lhs_loc: str  # r(lhs_loc) - r(rhs_loc)∘subst - delta >= 0
    rhs_loc: str | None
    subst: tuple  # ((var, Polynomial), ...) with fresh variables for calls
    delta: int


def _linear_guard(guard: Constraint) -> Constraint:
    """Drop non-linear atoms; a weaker premise keeps every implication sound."""
    return Constraint(tuple(a for a in guard.atoms if a.lhs.is_linear() and a.rhs.is_linear()))


def _over_approx_update(prog: Program, t) -> tuple:
    """Linear update; non-linear or call-dependent entries become fresh variables."""
    out = []
    for v, p in t.eta:
        if p.is_linear() and not funs(prog, p):
            out.append((v, p))
        else:
            out.append((v, Polynomial.var(f"_fresh_{t.id}_{v}")))
    return tuple(out)


def implications(prog: Program, sub: Subprogram, t: str, rho: bool = True) -> list:
    """All conditions a (triple of) ranking function(s) must satisfy."""
    funcs = FUNCS if rho else ("d",)
    out = []
    t_is_rec = t in sub.rec_transitions
    for tid in sorted(sub.transitions, key=_tid_key):
        tr = prog.transition(tid)
        g = _linear_guard(tr.guard)
        upd = _over_approx_update(prog, tr)
        for fn in funcs:
            if fn == "d" and t_is_rec:
                continue
            strict = (fn == "d" and tid == t) or (fn == "tf" and tid in sub.rec_transitions)
            out.append(Implication(f"{fn}:{tid}", g, fn, tr.source, tr.target, upd, 1 if strict else 0))
            if strict:
                out.append(Implication(f"{fn}:{tid}:pos", g, fn, tr.source, None, (), 1))
        if rho:
            for cid in sorted(tr.calls() & sub.rec_calls, key=lambda c: int(c[1:])):
                call = prog.call(cid)
                for fn in funcs:
                    if fn == "d" and t_is_rec:
                        continue
                    strict = fn == "f"
                    out.append(Implication(f"{fn}:{tid}:{cid}", g, fn, tr.source, call.target,
                                           call.zeta, 1 if strict else 0))
                    if strict:
                        out.append(Implication(f"{fn}:{tid}:{cid}:pos", g, fn, tr.source, None, (), 1))
    return out


def _conclusion(imp: Implication, template) -> dict:
    """Coefficient map var -> expression for r(src) - r(tgt)∘subst - delta; key 1 is the constant."""
    out: dict = {}

    def add(key, e):
        out[key] = out.get(key, Polynomial()) + e

    lhs = template(imp.func, imp.lhs_loc)
    for k, e in lhs.items():
        add(k, e)
    if imp.rhs_loc is not None:
        rhs = template(imp.func, imp.rhs_loc)
        sub = dict(imp.subst)
        for k, e in rhs.items():
            if k == 1:
                add(1, -e)
                continue
            p = sub.get(k, Polynomial.var(k))
            for mono, c in p.items():
                key = mono[0][0] if mono else 1
                add(key, -(e * c))
    add(1, Polynomial.const(-imp.delta))
    return out


def _guard_rows(g: Constraint):
    """Rows (coeff map, bound) meaning coeffs·x <= bound, from p < q as p - q + 1 <= 0."""
    rows = []
    for a in g.atoms:
        d = a.lhs - a.rhs
        rows.append((d.linear_coeffs(), -(d.constant() + 1)))
    return rows


@lru_cache(maxsize=4096)
def _guard_feasible(g: Constraint) -> bool:
    from .smt import satisfiable

    return satisfiable(g) != "unsat"


# --- synthesis --------------------------------------------------------------

class _LP:
    def __init__(self):
        self.names: list = []
        self.free: dict = {}
        self.eqs: list = []
        self.les: list = []

    def var(self, name: str, free: bool) -> Polynomial:
        if name not in self.free:
            self.names.append(name)
            self.free[name] = free
        return Polynomial.var(name)

    def solve(self, objective: Polynomial, extra_les=()) -> Result:
        idx = {v: i for i, v in enumerate(self.names)}

        def row(p):
            r = [Fraction(0)] * len(self.names)
            for v, c in p.linear_coeffs().items():
                r[idx[v]] = Fraction(c)
            return r, -Fraction(p.constant())

        a_eq, b_eq, a_ub, b_ub = [], [], [], []
        for p in self.eqs:
            r, b = row(p)
            a_eq.append(r)
            b_eq.append(b)
        for p in list(self.les) + list(extra_les):
            r, b = row(p)
            a_ub.append(r)
            b_ub.append(b)
        c, _ = row(objective)
        res = simplex(c, a_ub, b_ub, a_eq, b_eq, free=[self.free[v] for v in self.names])
        if res.status != "optimal":
            return Result("unsat" if res.status == "infeasible" else "unknown")
        return Result("sat", dict(zip(self.names, res.x)), res.value)


def _synthesize(prog: Program, sub: Subprogram, t: str, rho: bool):
    if t not in sub.transitions:
        raise ValueError(f"{t} is not part of the subprogram")
    funcs = FUNCS if rho else ("d",)
    variables = prog.variables
    lp = _LP()
    locs = sorted(sub.locations)

    def cname(fn, loc, v):
        return f"c_{fn}_{loc}_{v}"

    t_is_rec = t in sub.rec_transitions
    for fn in funcs:
        if fn == "d" and t_is_rec:
            continue
        for loc in locs:
            for v in list(variables) + [CONST]:
                lp.var(cname(fn, loc, v), True)

    def template(fn, loc) -> dict:
        if loc not in sub.locations or (fn == "d" and t_is_rec):
            return {}
        out = {v: Polynomial.var(cname(fn, loc, v)) for v in variables}
        out[1] = Polynomial.var(cname(fn, loc, CONST))
        return out

    imps = [i for i in implications(prog, sub, t, rho) if _guard_feasible(i.guard)]
    for k, imp in enumerate(imps):
        concl = _conclusion(imp, template)
        rows = _guard_rows(imp.guard)
        lams = [lp.var(f"lam_{k}_{i}", False) for i in range(len(rows))]
        keys = set(concl) - {1}
        for r, _ in rows:
            keys |= set(r)
        for u in sorted(keys, key=str):
            e = concl.get(u, Polynomial())
            for lam, (r, _) in zip(lams, rows):
                if r.get(u):
                    e = e + lam * r[u]
            if not e.is_zero():
                lp.eqs.append(e)
        e0 = -concl.get(1, Polynomial())
        for lam, (_, b) in zip(lams, rows):
            if b:
                e0 = e0 + lam * b
        if not e0.is_const() or e0.constant() > 0:
            lp.les.append(e0)
    # lexicographic objective: variable coefficients first, then constants
    abs_var, abs_const = Polynomial(), Polynomial()
    for name in list(lp.names):
        if not name.startswith("c_"):
            continue
        a = lp.var("abs_" + name, False)
        c = Polynomial.var(name)
        lp.les.append(c - a)
        lp.les.append(-c - a)
        if name.endswith(CONST):
            abs_const = abs_const + a
        else:
            abs_var = abs_var + a
    first = lp.solve(abs_var)
    if first.status != "sat":
        return None
    second = lp.solve(abs_const, extra_les=[abs_var - first.objective])
    res = second if second.status == "sat" else first
    model = res.model

    rfs = {}
    for fn in FUNCS:
        vals = []
        if fn in funcs and not (fn == "d" and t_is_rec):
            polys = {}
            for loc in locs:
                p = Polynomial({((v, 1),): model[cname(fn, loc, v)] for v in variables})
                polys[loc] = p + model[cname(fn, loc, CONST)]
            den = 1
            for p in polys.values():
                for _, c in p.items():
                    den = lcm(den, Fraction(c).denominator)
            vals = [(loc, Polynomial({m: c * den for m, c in polys[loc].items()})) for loc in locs]
            scale = den
        else:
            scale = 1
        rfs[fn] = (LinearRF(tuple(vals)), scale)
    cert = Certificate()
    for k, imp in enumerate(imps):
        n = len(_guard_rows(imp.guard))
        scale = rfs[imp.func][1]
        cert.multipliers[imp.label] = [model[f"lam_{k}_{i}"] * scale for i in range(n)]
    return {fn: rfs[fn][0] for fn in FUNCS}, cert


def synthesize_rf(prog: Program, tids, t: str, with_certificate: bool = False):
    """Linear ranking function for ``t`` w.r.t. the subprogram, or None."""
    sub = recursive_parts(prog, tids)
    if sub.rec_calls:
        raise ValueError("subprogram has recursive calls; use synthesize_rho_rf")
    out = _synthesize(prog, sub, t, rho=False)
    if out is None:
        return None
    rfs, cert = out
    return (rfs["d"], cert) if with_certificate else rfs["d"]


def synthesize_rho_rf(prog: Program, tids, t: str, with_certificate: bool = False):
    """Function-call ranking triple for ``t`` w.r.t. the subprogram, or None."""
    sub = recursive_parts(prog, tids)
    out = _synthesize(prog, sub, t, rho=True)
    if out is None:
        return None
    rfs, cert = out
    triple = RankingTriple(rfs["d"], rfs["tf"], rfs["f"])
    return (triple, cert) if with_certificate else triple


# --- local bounds -----------------------------------------------------------

def local_bound_from_rf(rf: LinearRF, loc: str) -> B.Bound:
    return ceil_poly(rf.at(loc))


def local_bound_from_rho_rf(triple: RankingTriple, loc: str, nfc: int) -> B.Bound:
    d = ceil_poly(triple.rd.at(loc))
    tf = ceil_poly(triple.rtf.at(loc))
    f = ceil_poly(triple.rf.at(loc))
    inner = B.bsum(1, B.bprod(1 + nfc, d))
    return B.bsum(d, B.bprod(f, inner, B.bpow(B.bprod(nfc, tf), f)))


@lru_cache(maxsize=None)
def recurrence_oracle(n0: int, n1: int, n2: int, nfc: int) -> int:
    if n1 == 0 or n2 == 0 or nfc == 0:
        return n0
    return 1 + n0 + recurrence_oracle(n0, n1 - 1, n2, nfc) + nfc * recurrence_oracle(n0, n1, n2 - 1, nfc)


def recurrence_closed_form(n0: int, n1: int, n2: int, nfc: int) -> int:
    return n0 + n2 * (1 + (1 + nfc) * n0) * (nfc * n1) ** n2


# --- independent checks -----------------------------------------------------

def _template_from(rf_map: dict):
    def template(fn, loc):
        rf = rf_map.get(fn)
        if rf is None:
            return {}
        p = rf.at(loc)
        out = {k: Polynomial.const(c) for k, c in p.linear_coeffs().items()}
        out[1] = Polynomial.const(p.constant())
        return out

    return template


def _concrete(imp: Implication, template) -> dict:
    return {k: e.constant() for k, e in _conclusion(imp, template).items()}


def replay_certificate(prog: Program, tids, t: str, rf_map: dict, cert: Certificate,
                       rho: bool = True) -> bool:
    """Exact Farkas replay: λ >= 0, λ·A = -E and λ·b <= E0 for every implication."""
    sub = recursive_parts(prog, tids)
    template = _template_from(rf_map)
    for imp in implications(prog, sub, t, rho):
        if not _guard_feasible(imp.guard):
            continue
        lams = cert.multipliers.get(imp.label)
        rows = _guard_rows(imp.guard)
        if lams is None or len(lams) != len(rows) or any(l < 0 for l in lams):
            return False
        concl = _concrete(imp, template)
        keys = (set(concl) - {1}) | {u for r, _ in rows for u in r}
        for u in keys:
            if concl.get(u, 0) + sum(l * r.get(u, 0) for l, (r, _) in zip(lams, rows)) != 0:
                return False
        if sum(l * b for l, (_, b) in zip(lams, rows)) > concl.get(1, 0):
            return False
    return True


def verify(prog: Program, tids, t: str, rf_map: dict, rho: bool = True) -> bool:
    """Check every implication with a separate entailment query."""
    sub = recursive_parts(prog, tids)
    template = _template_from(rf_map)
    for imp in implications(prog, sub, t, rho):
        concl = _concrete(imp, template)
        p = Polynomial({((k, 1),) if k != 1 else (): c for k, c in concl.items()})
        # conclusion p >= 0 as the atom -1 < p
        if entails(imp.guard if imp.guard.atoms else Constraint(), Atom(Polynomial.const(-1), p),
                   backend="internal") != "yes":
            if _guard_feasible(imp.guard):
                return False
    return True


def as_map(obj) -> dict:
    if isinstance(obj, RankingTriple):
        return {"d": obj.rd, "tf": obj.rtf, "f": obj.rf}
    return {"d": obj}
