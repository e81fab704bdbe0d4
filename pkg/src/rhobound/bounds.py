"""Symbolic bound expressions over the naturals extended with ω.

Every bound denotes a weakly monotone map from nonnegative variable values
to ``N ∪ {ω}``. Polynomial sub-expressions with natural coefficients are kept
in a single :class:`Poly` node so sums and products of them fold exactly.

Conventions: ``0·ω = 0``, ``0^0 = 1``, ``log_k(ω) = ω``, and
``Log(k, b)`` evaluates to ``ceil(log_k(max(1, b)))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .its import Polynomial


class _OmegaValue:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "ω"

    def __reduce__(self):
        return (_OmegaValue, ())


OMEGA = _OmegaValue()


def is_omega(v) -> bool:
    return v is OMEGA


def o_add(a, b):
    if a is OMEGA or b is OMEGA:
        return OMEGA
    return a + b


def o_mul(a, b):
    if a == 0 or b == 0:
        return 0
    if a is OMEGA or b is OMEGA:
        return OMEGA
    return a * b


def o_max(a, b):
    if a is OMEGA or b is OMEGA:
        return OMEGA
    return a if a >= b else b


def o_le(a, b) -> bool:
    if b is OMEGA:
        return True
    if a is OMEGA:
        return False
    return a <= b


def o_pow(base, exp, cap=None):
    if exp == 0:
        return 1
    if base == 0 or base == 1:
        return base
    if base is OMEGA or exp is OMEGA:
        return OMEGA
    if cap is not None and exp * (base.bit_length() - 1) > cap.bit_length():
        return cap
    return base ** exp


def ceil_log(k: Fraction, x) -> int:
    """Smallest n >= 0 with k^n >= max(1, x)."""
    if x is OMEGA:
        return OMEGA
    x = max(1, x)
    k = Fraction(k)
    p, q = k.numerator, k.denominator
    n, pn, qn = 0, 1, 1
    while pn < x * qn:
        n += 1
        pn *= p
        qn *= q
    return n


class Bound:
    """Base class; use the factory functions below to build bounds."""

    __slots__ = ()

    def __add__(self, other):
        return Sum((self, _lift(other)))

    __radd__ = __add__

    def __mul__(self, other):
        return Prod((self, _lift(other)))

    __rmul__ = __mul__

    def eval(self, env: Mapping[str, int], cap=None):
        return eval_bound(self, env, cap)

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, eq=True)
class Poly(Bound):
    p: Polynomial

    def __post_init__(self):
        for _, c in self.p.items():
            if c < 0 or (isinstance(c, Fraction) and c.denominator != 1):
                raise ValueError(f"polynomial bound needs natural coefficients: {self.p}")


@dataclass(frozen=True, eq=True)
class Omega(Bound):
    pass


@dataclass(frozen=True, eq=True)
class Sum(Bound):
    args: tuple


@dataclass(frozen=True, eq=True)
class Prod(Bound):
    args: tuple


@dataclass(frozen=True, eq=True)
class Max(Bound):
    args: tuple


@dataclass(frozen=True, eq=True)
class Pow(Bound):
    base: Bound
    exp: Bound


@dataclass(frozen=True, eq=True)
class Log(Bound):
    k: Fraction
    arg: Bound


def Const(n) -> Bound:
    if n is OMEGA:
        return Omega()
    if n < 0:
        raise ValueError("negative constant")
    return Poly(Polynomial.const(int(n)))


def Var(name: str) -> Bound:
    return Poly(Polynomial.var(name))


W = Omega()
ZERO = Const(0)
ONE = Const(1)


def from_polynomial(p: Polynomial) -> Bound:
    return Poly(p)


def _lift(x) -> Bound:
    if isinstance(x, Bound):
        return x
    if isinstance(x, int):
        return Const(x)
    if x is OMEGA:
        return W
    if isinstance(x, Polynomial):
        return Poly(x)
    raise TypeError(f"cannot make a bound from {x!r}")


def bsum(*args) -> Bound:
    return simplify(Sum(tuple(_lift(a) for a in args)))


def bprod(*args) -> Bound:
    return simplify(Prod(tuple(_lift(a) for a in args)))


def bmax(*args) -> Bound:
    """Max of the given bounds; the max over nothing is ω."""
    if not args:
        return W
    return simplify(Max(tuple(_lift(a) for a in args)))


def bpow(base, exp) -> Bound:
    """base^exp; a base that may be 0 under a varying exponent is lifted to max{1, base}."""
    base, exp = simplify(_lift(base)), simplify(_lift(exp))
    # 0^0 = 1 > 0 = 0^1, so without the lift the power would not be monotone
    if (variables(exp) or contains_omega(exp)) and _lower_const(base) == 0:
        base = simplify(Max((ONE, base)))
    return simplify(Pow(base, exp))


def blog(k, arg) -> Bound:
    return simplify(Log(Fraction(k), _lift(arg)))


# --- evaluation -----------------------------------------------------------

def eval_bound(b: Bound, env: Mapping[str, int], cap=None):
    """Evaluate at a nonnegative valuation. With ``cap``, results saturate."""
    v = _eval(b, env, cap)
    if cap is not None and v is not OMEGA and v > cap:
        return cap
    return v


def _eval(b: Bound, env, cap):
    if isinstance(b, Poly):
        for name in b.p.indeterminates():
            if env[name] < 0:
                raise ValueError(f"negative value for {name}")
        v = b.p.eval(env)
    elif isinstance(b, Omega):
        return OMEGA
    elif isinstance(b, Sum):
        v = 0
        for a in b.args:
            v = o_add(v, _eval(a, env, cap))
    elif isinstance(b, Prod):
        v = 1
        vals = [_eval(a, env, cap) for a in b.args]
        if any(x == 0 for x in vals):
            return 0
        for x in vals:
            v = o_mul(v, x)
    elif isinstance(b, Max):
        v = 0
        for a in b.args:
            v = o_max(v, _eval(a, env, cap))
    elif isinstance(b, Pow):
        e = _eval(b.exp, env, cap)
        if e == 0:
            return 1
        v = o_pow(_eval(b.base, env, cap), e, cap)
    elif isinstance(b, Log):
        v = ceil_log(b.k, _eval(b.arg, env, cap))
    else:
        raise TypeError(type(b))
    if cap is not None and v is not OMEGA and v > cap:
        return cap
    return v


# --- substitution ---------------------------------------------------------

def subst(b: Bound, m: Mapping[str, Bound]) -> Bound:
    """Simultaneous substitution of variables by bounds."""
    if not m:
        return b
    return simplify(_subst(b, {k: _lift(v) for k, v in m.items()}))


def _subst(b: Bound, m) -> Bound:
    if isinstance(b, Poly):
        hit = b.p.indeterminates() & set(m)
        if not hit:
            return b
        if all(isinstance(m[v], Poly) for v in hit):
            return Poly(b.p.subst({v: m[v].p for v in hit}))
        terms = []
        for mono, c in b.p.items():
            factors = [Const(c)]
            for v, e in mono:
                base = m.get(v, Var(v))
                factors.append(base if e == 1 else Pow(base, Const(e)))
            terms.append(Prod(tuple(factors)))
        return Sum(tuple(terms))
    if isinstance(b, Omega):
        return b
    if isinstance(b, (Sum, Prod, Max)):
        return type(b)(tuple(_subst(a, m) for a in b.args))
    if isinstance(b, Pow):
        return Pow(_subst(b.base, m), _subst(b.exp, m))
    if isinstance(b, Log):
        return Log(b.k, _subst(b.arg, m))
    raise TypeError(type(b))


def variables(b: Bound) -> frozenset:
    if isinstance(b, Poly):
        return b.p.indeterminates()
    if isinstance(b, Omega):
        return frozenset()
    if isinstance(b, (Sum, Prod, Max)):
        out = frozenset()
        for a in b.args:
            out |= variables(a)
        return out
    if isinstance(b, Pow):
        return variables(b.base) | variables(b.exp)
    if isinstance(b, Log):
        return variables(b.arg)
    raise TypeError(type(b))


def contains_omega(b: Bound) -> bool:
    if isinstance(b, Omega):
        return True
    if isinstance(b, (Sum, Prod, Max)):
        return any(contains_omega(a) for a in b.args)
    if isinstance(b, Pow):
        return contains_omega(b.base) or contains_omega(b.exp)
    if isinstance(b, Log):
        return contains_omega(b.arg)
    return False


def is_finite(b: Bound) -> bool:
    """Conservative: true when no ω occurs anywhere in the expression."""
    return not contains_omega(b)


# --- simplification -------------------------------------------------------

def _key(b: Bound) -> tuple:
    order = {Poly: 0, Prod: 1, Pow: 2, Log: 3, Max: 4, Sum: 5, Omega: 6}
    return (order[type(b)], render(b))


def _const_of(b: Bound):
    if isinstance(b, Poly) and b.p.is_const():
        return b.p.constant()
    return None


def _poly_dominates(p: Polynomial, q: Polynomial) -> bool:
    """Coefficientwise p >= q, hence p >= q on all natural inputs."""
    pt = p.terms
    return all(pt.get(mono, 0) >= c for mono, c in q.items())


def simplify(b: Bound) -> Bound:
    """Normal form preserving the value pointwise; idempotent."""
    if isinstance(b, (Poly, Omega)):
        return b
    if isinstance(b, Sum):
        return _simp_sum([simplify(a) for a in b.args])
    if isinstance(b, Prod):
        return _simp_prod([simplify(a) for a in b.args])
    if isinstance(b, Max):
        return _simp_max([simplify(a) for a in b.args])
    if isinstance(b, Pow):
        return _simp_pow(simplify(b.base), simplify(b.exp))
    if isinstance(b, Log):
        return _simp_log(b.k, simplify(b.arg))
    raise TypeError(type(b))


def _split_coeff(b: Bound):
    """(natural coefficient, core) with b = coefficient * core."""
    if isinstance(b, Prod):
        c = _const_of(b.args[0])
        if c is not None:
            rest = b.args[1:]
            return c, rest[0] if len(rest) == 1 else Prod(rest)
    return 1, b


def _simp_sum(args) -> Bound:
    flat = []
    for a in args:
        flat.extend(a.args if isinstance(a, Sum) else [a])
    poly = Polynomial()
    others: dict = {}
    for a in flat:
        if isinstance(a, Omega):
            return W
        if isinstance(a, Poly):
            poly = poly + a.p
            continue
        c, core = _split_coeff(a)
        others[core] = others.get(core, 0) + c
    terms = []
    for core, c in sorted(others.items(), key=lambda kv: _key(kv[0])):
        terms.append(core if c == 1 else _simp_prod([Const(c), core]))
    if not poly.is_zero() or not terms:
        terms.insert(0, Poly(poly))
    if len(terms) == 1:
        return terms[0]
    return Sum(tuple(terms))


def _simp_prod(args) -> Bound:
    flat = []
    for a in args:
        flat.extend(a.args if isinstance(a, Prod) else [a])
    poly = Polynomial.const(1)
    others = []
    has_omega = False
    for a in flat:
        if isinstance(a, Poly):
            poly = poly * a.p
        elif isinstance(a, Omega):
            has_omega = True
        else:
            others.append(a)
    if poly.is_zero():
        return ZERO
    # distribute over sums so polynomial-like products stay canonical
    for i, a in enumerate(others):
        if isinstance(a, Sum):
            rest = others[:i] + others[i + 1:]
            extra = [W] if has_omega else []
            return _simp_sum([
                _simp_prod([Poly(poly), t] + rest + extra) for t in a.args
            ])
    if has_omega:
        if not others and poly.is_const():
            return W
        others.append(W)
    # merge powers with identical base: b^e1 * b^e2 = b^(e1+e2)
    merged: dict = {}
    order = []
    for a in others:
        base, exp = (a.base, a.exp) if isinstance(a, Pow) else (a, ONE)
        if base in merged:
            merged[base] = _simp_sum([merged[base], exp])
        else:
            merged[base] = exp
            order.append(base)
    others = []
    for base in order:
        exp = merged[base]
        others.append(base if exp == ONE else _simp_pow(base, exp))
    others = [o for o in others if o != ONE]
    flat2 = []
    for o in others:
        if isinstance(o, Poly):
            poly = poly * o.p
        else:
            flat2.append(o)
    others = sorted(flat2, key=_key)
    if not others:
        return Poly(poly)
    if poly == Polynomial.const(1):
        return others[0] if len(others) == 1 else Prod(tuple(others))
    return Prod((Poly(poly),) + tuple(others))


def _simp_max(args) -> Bound:
    flat = []
    for a in args:
        flat.extend(a.args if isinstance(a, Max) else [a])
    if any(isinstance(a, Omega) for a in flat):
        return W
    uniq = []
    for a in flat:
        if a not in uniq:
            uniq.append(a)
    polys = [a.p for a in uniq if isinstance(a, Poly)]
    others = [a for a in uniq if not isinstance(a, Poly)]
    kept = []
    for i, p in enumerate(polys):
        dominated = False
        for j, q in enumerate(polys):
            if i != j and _poly_dominates(q, p) and (q != p or j < i):
                dominated = True
                break
        if not dominated:
            kept.append(p)
    # a constant 0 never matters; drop constants below an unbounded operand
    kept = [p for p in kept if not p.is_zero()]
    items = [Poly(p) for p in kept] + others
    # drop operands another operand structurally dominates
    pruned = []
    for i, a in enumerate(items):
        if any(j != i and _geq(b, a) and (not _geq(a, b) or j < i) for j, b in enumerate(items)):
            continue
        pruned.append(a)
    items = pruned
    if not items:
        return ZERO
    # a constant is absorbed by an operand whose value is always at least it
    consts = [a for a in items if _const_of(a) is not None]
    if consts and len(items) > 1:
        c = _const_of(consts[0])
        for a in items:
            if a is consts[0]:
                continue
            if _lower_const(a) >= c:
                items = [x for x in items if x is not consts[0]]
                break
    items = sorted(items, key=_key)
    if len(items) == 1:
        return items[0]
    return Max(tuple(items))


def _geq(b: Bound, a: Bound) -> bool:
    """Conservative structural check that b >= a on all natural inputs."""
    if a == b:
        return True
    if isinstance(a, Poly) and a.p.is_zero():
        return True
    if isinstance(b, Poly) and isinstance(a, Poly):
        return _poly_dominates(b.p, a.p)
    if isinstance(b, Sum):
        if any(_geq(t, a) for t in b.args):
            return True
        if isinstance(a, Sum) and len(a.args) <= len(b.args):
            rest = list(b.args)
            for t in a.args:
                hit = next((r for r in rest if _geq(r, t)), None)
                if hit is None:
                    return False
                rest.remove(hit)
            return True
        return False
    if isinstance(b, Max):
        return any(_geq(t, a) for t in b.args)
    return False


def _lower_const(b: Bound) -> int:
    """A natural number the bound never goes below."""
    if isinstance(b, Poly):
        return b.p.constant()
    if isinstance(b, Omega):
        return 0
    if isinstance(b, Sum):
        return sum(_lower_const(a) for a in b.args)
    if isinstance(b, Prod):
        out = 1
        for a in b.args:
            out *= _lower_const(a)
        return out
    if isinstance(b, Max):
        return max(_lower_const(a) for a in b.args)
    if isinstance(b, Pow):
        e = _lower_const(b.exp)
        lb = _lower_const(b.base)
        if lb == 0:
            return 0  # 0^0 = 1 but 0^1 = 0
        return lb ** e if e <= 64 else 0
    if isinstance(b, Log):
        return ceil_log(b.k, _lower_const(b.arg))
    return 0


def _simp_pow(base: Bound, exp: Bound) -> Bound:
    ce = _const_of(exp)
    cb = _const_of(base)
    if ce == 0:
        return ONE
    if ce == 1:
        return base
    if cb == 1:
        return ONE
    if isinstance(exp, Omega):
        if cb == 0:
            return ZERO
        if cb is not None:
            return W
    if isinstance(base, Omega):
        if ce is not None:
            return W
        return Pow(base, exp)
    if cb is not None and ce is not None:
        return Const(cb ** ce)
    if isinstance(base, Poly) and ce is not None and ce <= 8:
        return Poly(base.p ** ce)
    if isinstance(base, Pow):
        return _simp_pow(base.base, _simp_prod([base.exp, exp]))
    return Pow(base, exp)


def _simp_log(k: Fraction, arg: Bound) -> Bound:
    if isinstance(arg, Omega):
        return W
    c = _const_of(arg)
    if c is not None:
        return Const(ceil_log(k, c))
    return Log(Fraction(k), arg)


# --- rendering ------------------------------------------------------------

def _fmt_k(k: Fraction) -> str:
    k = Fraction(k)
    return str(k.numerator) if k.denominator == 1 else f"({k})"


def render(b: Bound) -> str:
    if isinstance(b, Poly):
        return str(b.p)
    if isinstance(b, Omega):
        return "ω"
    if isinstance(b, Sum):
        head, consts, rest = [], [], []
        for a in b.args:
            if isinstance(a, Poly):
                nonconst = Polynomial({m: c for m, c in a.p.items() if m})
                if not nonconst.is_zero():
                    head.append(str(nonconst))
                if a.p.constant():
                    consts.append(str(a.p.constant()))
            else:
                rest.append(render(a))
        return " + ".join(head + rest + consts)
    if isinstance(b, Prod):
        return "*".join(_atomic(a, prod=True) for a in b.args)
    if isinstance(b, Max):
        return "max{" + ", ".join(render(a) for a in b.args) + "}"
    if isinstance(b, Pow):
        return f"{_atomic(b.base)}^{_atomic(b.exp)}"
    if isinstance(b, Log):
        return f"log{_fmt_k(b.k)}({render(b.arg)})"
    raise TypeError(type(b))


def _atomic(b: Bound, prod: bool = False) -> str:
    s = render(b)
    if isinstance(b, Poly):
        terms = list(b.p.items())
        bare_const = len(terms) == 1 and not terms[0][0]
        simple = bare_const or len(terms) == 1 and (prod or (terms[0][1] == 1 and len(terms[0][0]) <= 1
                                                             and all(e == 1 for _, e in terms[0][0])))
        return s if simple else f"({s})"
    if isinstance(b, Sum) or (isinstance(b, (Prod, Pow)) and not prod):
        return f"({s})"
    return s


# --- asymptotic classification --------------------------------------------

@dataclass(frozen=True, order=True)
class Growth:
    """Growth envelope exp(·)? · n^deg · log(n)^logdeg; ``omega`` beats all."""

    omega: bool = False
    exp: bool = False
    deg: int = 0
    logdeg: int = 0

    def times(self, other: "Growth") -> "Growth":
        return Growth(self.omega or other.omega, self.exp or other.exp,
                      self.deg + other.deg, self.logdeg + other.logdeg)

    def scale(self, k: int) -> "Growth":
        return Growth(self.omega, self.exp, self.deg * k, self.logdeg * k)


G_CONST = Growth()
G_LOG = Growth(logdeg=1)
G_OMEGA = Growth(omega=True)
G_EXP = Growth(exp=True)


def growth(b: Bound) -> Growth:
    if isinstance(b, Poly):
        return Growth(deg=b.p.degree())
    if isinstance(b, Omega):
        return G_OMEGA
    if isinstance(b, (Sum, Max)):
        return max(growth(a) for a in b.args)
    if isinstance(b, Prod):
        g = G_CONST
        for a in b.args:
            g = g.times(growth(a))
        return g
    if isinstance(b, Pow):
        ge, gb = growth(b.exp), growth(b.base)
        if ge.omega or gb.omega:
            return G_OMEGA
        if ge == G_CONST:
            k = _upper_const(b.exp)
            return gb.scale(k) if k is not None else G_EXP
        if gb == G_CONST and _upper_const(b.base) in (0, 1):
            return G_CONST
        return G_EXP
    if isinstance(b, Log):
        return log_growth(b.arg)
    raise TypeError(type(b))


def log_growth(b: Bound) -> Growth:
    """Envelope of log(b)."""
    if isinstance(b, Poly):
        return G_CONST if b.p.is_const() else G_LOG
    if isinstance(b, Omega):
        return G_OMEGA
    if isinstance(b, (Sum, Max, Prod)):
        return max(log_growth(a) for a in b.args)
    if isinstance(b, Pow):
        return growth(b.exp).times(log_growth(b.base)) if log_growth(b.base) != G_CONST else (
            growth(b.exp) if _upper_const(b.base) not in (0, 1) else G_CONST)
    if isinstance(b, Log):
        return G_LOG if log_growth(b.arg) != G_CONST else G_CONST
    raise TypeError(type(b))


def _upper_const(b: Bound):
    """Value of a variable-free bound, else None."""
    if variables(b) or contains_omega(b):
        return None
    return eval_bound(b, {})


@dataclass(frozen=True)
class AsymptoticClass:
    kind: str  # Const | Log | Poly | PolyLog | Exp | Omega
    degree: int = 0

    def __str__(self) -> str:
        if self.kind in ("Poly", "PolyLog"):
            return f"{self.kind}({self.degree})"
        return self.kind

    def big_o(self) -> str:
        """Rendering used in ``WORST_CASE`` lines; PolyLog rounds up a degree."""
        if self.kind == "Const":
            return "1"
        if self.kind == "Log":
            return "log(n)"
        if self.kind in ("Poly", "PolyLog"):
            d = self.degree + (1 if self.kind == "PolyLog" else 0)
            return "n" if d == 1 else f"n^{d}"
        if self.kind == "Exp":
            return "EXP"
        return "?"

    @property
    def rank(self) -> tuple:
        order = {"Const": 0, "Log": 1, "Poly": 2, "PolyLog": 2, "Exp": 4, "Omega": 5}
        return (order[self.kind], self.degree, self.kind == "PolyLog")


def asymptotic_class(b: Bound) -> AsymptoticClass:
    g = growth(simplify(b))
    if g.omega:
        return AsymptoticClass("Omega")
    if g.exp:
        return AsymptoticClass("Exp")
    if g.deg == 0:
        if g.logdeg == 0:
            return AsymptoticClass("Const")
        if g.logdeg == 1:
            return AsymptoticClass("Log")
        # log^k n for k >= 2 is reported under the next polynomial class
        return AsymptoticClass("Poly", 1)
    if g.logdeg == 0:
        return AsymptoticClass("Poly", g.deg)
    return AsymptoticClass("PolyLog", g.deg)
