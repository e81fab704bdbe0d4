"""Intermediate representation for integer transition systems with calls.

Polynomials are immutable and canonical: the term map never stores a zero
coefficient and monomials are sorted tuples of ``(indeterminate, exponent)``.
Indeterminates are plain strings; call symbols share the namespace with
program variables (call ids start with ``ρ`` so they never clash).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

Monomial = tuple  # tuple[tuple[str, int], ...], sorted by name

IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_']*$")


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    exps = dict(m1)
    for v, e in m2:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


def _mono_str(m: Monomial, names: Mapping[str, str] | None = None) -> str:
    parts = []
    for v, e in m:
        v = names.get(v, v) if names else v
        parts.append(v if e == 1 else f"{v}^{e}")
    return "*".join(parts)


class Polynomial:
    """Multivariate polynomial with integer (or Fraction) coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, int] | None = None):
        clean = {}
        if terms:
            for m, c in terms.items():
                if c != 0:
                    if isinstance(c, Fraction) and c.denominator == 1:
                        c = c.numerator
                    clean[m] = c
        self._terms = dict(sorted(clean.items(), key=lambda kv: _mono_key(kv[0])))
        self._hash = None

    # construction helpers
    @staticmethod
    def const(c) -> "Polynomial":
        return Polynomial({(): c})

    @staticmethod
    def var(name: str) -> "Polynomial":
        return Polynomial({((name, 1),): 1})

    @staticmethod
    def zero() -> "Polynomial":
        return Polynomial()

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Polynomial.const(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._terms.items()))
        return self._hash

    def __add__(self, other) -> "Polynomial":
        other = _coerce(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return _coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        other = _coerce(other)
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative exponent")
        result = Polynomial.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def is_zero(self) -> bool:
        return not self._terms

    def is_const(self) -> bool:
        return all(m == () for m in self._terms)

    def constant(self):
        return self._terms.get((), 0)

    def indeterminates(self) -> frozenset:
        return frozenset(v for m in self._terms for v, _ in m)

    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(e for _, e in m) for m in self._terms)

    def degree_in(self, v: str) -> int:
        return max((dict(m).get(v, 0) for m in self._terms), default=0)

    def is_linear(self) -> bool:
        return self.degree() <= 1

    def coeff(self, v: str):
        """Coefficient of the linear monomial ``v``."""
        return self._terms.get(((v, 1),), 0)

    def linear_coeffs(self) -> dict:
        """Map variable -> coefficient; requires degree <= 1."""
        if not self.is_linear():
            raise ValueError(f"not linear: {self}")
        return {m[0][0]: c for m, c in self._terms.items() if m}

    def eval(self, env: Mapping[str, int]):
        total = 0
        for m, c in self._terms.items():
            val = c
            for v, e in m:
                try:
                    val *= env[v] ** e
                except KeyError:
                    raise KeyError(f"no binding for {v!r}") from None
            total += val
        return total

    def subst(self, mapping: Mapping[str, "Polynomial"]) -> "Polynomial":
        """Substitute indeterminates by polynomials; unmapped ones stay."""
        out = Polynomial()
        for m, c in self._terms.items():
            term = Polynomial.const(c)
            rest = []
            for v, e in m:
                if v in mapping:
                    term = term * (_coerce(mapping[v]) ** e)
                else:
                    rest.append((v, e))
            if rest:
                term = term * Polynomial({tuple(rest): 1})
            out = out + term
        return out

    def abs_coeffs(self) -> "Polynomial":
        return Polynomial({m: abs(c) for m, c in self._terms.items()})

    def __repr__(self) -> str:
        return f"Polynomial({self})"

    def __str__(self) -> str:
        return self.to_str()

    def to_str(self, names: Mapping[str, str] | None = None) -> str:
        """Render, optionally renaming indeterminates."""
        if not self._terms:
            return "0"
        out = ""
        for i, (m, c) in enumerate(self._terms.items()):
            neg = c < 0
            a = -c if neg else c
            ms = _mono_str(m, names)
            if not ms:
                body = str(a)
            elif a == 1:
                body = ms
            else:
                body = f"{a}*{ms}"
            if i == 0:
                out = ("-" if neg else "") + body
            else:
                out += (" - " if neg else " + ") + body
        return out


def _mono_key(m: Monomial):
    # constant term last, higher degree first, then lexicographic
    return (-sum(e for _, e in m), m) if m else (1, ())


def _coerce(x) -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    if isinstance(x, (int, Fraction)):
        return Polynomial.const(x)
    raise TypeError(f"cannot coerce {type(x).__name__} to Polynomial")


def poly_eval(p: Polynomial, env: Mapping[str, int]):
    return p.eval(env)


@dataclass(frozen=True)
class Atom:
    """``lhs < rhs``."""

    lhs: Polynomial
    rhs: Polynomial

    def holds(self, env: Mapping[str, int]) -> bool:
        return self.lhs.eval(env) < self.rhs.eval(env)

    def normal(self) -> Polynomial:
        """``rhs - lhs``; the atom holds iff this is positive."""
        return self.rhs - self.lhs

    def __str__(self) -> str:
        return f"{self.lhs} < {self.rhs}"


@dataclass(frozen=True)
class Constraint:
    atoms: tuple = ()

    def holds(self, env: Mapping[str, int]) -> bool:
        return all(a.holds(env) for a in self.atoms)

    def conj(self, other: "Constraint") -> "Constraint":
        return Constraint(self.atoms + tuple(a for a in other.atoms if a not in self.atoms))

    def subst(self, mapping: Mapping[str, Polynomial]) -> "Constraint":
        return Constraint(tuple(Atom(a.lhs.subst(mapping), a.rhs.subst(mapping)) for a in self.atoms))

    def indeterminates(self) -> frozenset:
        out = set()
        for a in self.atoms:
            out |= a.lhs.indeterminates() | a.rhs.indeterminates()
        return frozenset(out)

    def __str__(self) -> str:
        return " && ".join(str(a) for a in self.atoms) if self.atoms else "true"


TRUE = Constraint()


def constraint_eval(phi: Constraint, env: Mapping[str, int]) -> bool:
    return phi.holds(env)


# sugar; every form ends up as strict "<" atoms over the integers
def lt(p, q) -> Atom:
    return Atom(_coerce(p), _coerce(q))


def le(p, q) -> Atom:
    return Atom(_coerce(p), _coerce(q) + 1)


def ge(p, q) -> Atom:
    return Atom(_coerce(q), _coerce(p) + 1)


def gt(p, q) -> Atom:
    return Atom(_coerce(q), _coerce(p))


def eq(p, q) -> tuple:
    return (le(p, q), ge(p, q))


@dataclass(frozen=True)
class FunctionCall:
    id: str
    target: str
    zeta: tuple  # ((var, Polynomial), ...) in variable order

    @property
    def args(self) -> dict:
        return dict(self.zeta)

    def __str__(self) -> str:
        return f"{self.target}({', '.join(str(p) for _, p in self.zeta)})"


@dataclass(frozen=True)
class Transition:
    id: str
    source: str
    target: str
    guard: Constraint
    eta: tuple  # ((var, Polynomial over V ∪ F), ...) in variable order

    @property
    def update(self) -> dict:
        return dict(self.eta)

    def calls(self) -> frozenset:
        out = set()
        for _, p in self.eta:
            out |= {v for v in p.indeterminates() if is_call_symbol(v)}
        return frozenset(out)

    def __str__(self) -> str:
        return self.id


def is_call_symbol(name: str) -> bool:
    return name.startswith("ρ")


@dataclass(frozen=True)
class Program:
    variables: tuple
    locations: tuple
    initial: str
    returns: tuple  # ((location, return variable), ...)
    calls: tuple  # FunctionCall, in id order
    transitions: tuple  # Transition, in id order
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {
            "t": {t.id: t for t in self.transitions},
            "c": {c.id: c for c in self.calls},
            "ret": dict(self.returns),
        })

    def transition(self, tid: str) -> Transition:
        return self._index["t"][tid]

    def call(self, cid: str) -> FunctionCall:
        return self._index["c"][cid]

    @property
    def return_var(self) -> dict:
        return dict(self._index["ret"])

    @property
    def omega(self) -> frozenset:
        return frozenset(self._index["ret"])

    def initial_transitions(self) -> tuple:
        return tuple(t for t in self.transitions if t.source == self.initial)

    def outgoing(self, loc: str) -> tuple:
        return tuple(t for t in self.transitions if t.source == loc)

    def incoming(self, loc: str) -> tuple:
        return tuple(t for t in self.transitions if t.target == loc)


def ceil_poly(p: Polynomial):
    """Over-approximation with absolute coefficients, as a Bound."""
    from .bounds import from_polynomial

    return from_polynomial(p.abs_coeffs())


def funs(prog: Program, x) -> frozenset:
    """Call ids occurring in a polynomial, transition(s), or targeting a location set."""
    if isinstance(x, Polynomial):
        return frozenset(v for v in x.indeterminates() if is_call_symbol(v))
    if isinstance(x, Transition):
        return x.calls()
    items = list(x)
    if not items:
        return frozenset()
    if isinstance(items[0], Transition):
        out = set()
        for t in items:
            out |= t.calls()
        return frozenset(out)
    locs = set(items)
    return frozenset(c.id for c in prog.calls if c.target in locs)


def trans_of(prog: Program, rho) -> frozenset:
    """Ids of transitions whose update mentions the call(s)."""
    ids = {rho} if isinstance(rho, str) else set(rho)
    return frozenset(t.id for t in prog.transitions if t.calls() & ids)


def locations_of(prog: Program, tids: Iterable[str]) -> frozenset:
    """Source locations of a transition subset."""
    return frozenset(prog.transition(t).source for t in tids)


def validate(prog: Program) -> list:
    """Return diagnostics; an empty list means the program is well formed."""
    diags = []
    locs = set(prog.locations)
    vars_ = list(prog.variables)
    if len(set(vars_)) != len(vars_):
        diags.append("duplicate variable names")
    for v in vars_:
        if not IDENT_RE.match(v):
            diags.append(f"bad variable name {v!r}")
    if prog.initial not in locs:
        diags.append(f"initial location {prog.initial} not declared")
    ret = prog.return_var
    for loc, v in prog.returns:
        if loc not in locs:
            diags.append(f"return location {loc} not declared")
        if v not in vars_:
            diags.append(f"return variable {v} of {loc} not declared")
    if prog.initial in ret:
        diags.append(f"initial location {prog.initial} is a return location")
    call_ids = {c.id for c in prog.calls}
    for c in prog.calls:
        if c.target not in locs:
            diags.append(f"{c.id}: unknown target {c.target}")
        if c.target == prog.initial:
            diags.append(f"{c.id}: call targets initial location")
        if [v for v, _ in c.zeta] != vars_:
            diags.append(f"{c.id}: argument map not total on variables")
        for _, p in c.zeta:
            if funs(prog, p):
                diags.append(f"{c.id}: nested call in arguments")
            if not p.indeterminates() <= set(vars_):
                diags.append(f"{c.id}: unknown indeterminate in arguments")
    for t in prog.transitions:
        if t.source not in locs or t.target not in locs:
            diags.append(f"{t.id}: unknown location")
        if t.source in ret:
            diags.append(f"{t.id}: source in Ω")
        if t.target == prog.initial:
            diags.append(f"{t.id}: targets initial location")
        if [v for v, _ in t.eta] != vars_:
            diags.append(f"{t.id}: update not total on variables")
        for _, p in t.eta:
            extra = p.indeterminates() - set(vars_)
            unknown = {s for s in extra if s not in call_ids}
            if unknown:
                diags.append(f"{t.id}: unknown indeterminates {sorted(unknown)}")
        if not t.guard.indeterminates() <= set(vars_):
            diags.append(f"{t.id}: guard mentions non-variables")
    return diags


def make_state(prog: Program, values) -> dict:
    if isinstance(values, Mapping):
        missing = set(prog.variables) - set(values)
        if missing:
            raise ValueError(f"state not total, missing {sorted(missing)}")
        return {v: int(values[v]) for v in prog.variables}
    values = list(values)
    if len(values) != len(prog.variables):
        raise ValueError("state arity mismatch")
    return dict(zip(prog.variables, (int(x) for x in values)))
