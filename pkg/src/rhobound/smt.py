"""Constraint solving: exact rational simplex, integer branch and bound,
SMT-LIB2 serialization and an optional external solver process.

Every model, whatever backend produced it, is replayed with exact
arithmetic before it is reported as ``sat``.
"""
from __future__ import annotations

import itertools
import math
import os
import shlex
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .its import Atom, Constraint, Polynomial

ENV_SOLVER = "RHOBOUND_SMT"
ENV_TIMEOUT = "RHOBOUND_SMT_TIMEOUT"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Assertion:
    """``poly op 0`` with op in ``<=``, ``<``, ``=``."""

    poly: Polynomial
    op: str = "<="

    def holds(self, env: Mapping[str, Fraction]) -> bool:
        v = self.poly.eval(env)
        return v <= 0 if self.op == "<=" else v < 0 if self.op == "<" else v == 0


@dataclass
class Query:
    variables: dict = field(default_factory=dict)  # name -> "Int" | "Real"
    assertions: list = field(default_factory=list)
    minimize: Polynomial | None = None

    def declare(self, name: str, sort: str = "Int") -> Polynomial:
        self.variables[name] = sort
        return Polynomial.var(name)

    def add(self, poly: Polynomial, op: str = "<=") -> None:
        for v in poly.indeterminates():
            self.variables.setdefault(v, "Int")
        self.assertions.append(Assertion(poly, op))

    def is_linear(self) -> bool:
        return all(a.poly.is_linear() for a in self.assertions)

    def replay(self, model: Mapping[str, Fraction]) -> bool:
        if set(self.variables) - set(model):
            return False
        for v, s in self.variables.items():
            if s == "Int" and Fraction(model[v]).denominator != 1:
                return False
        return all(a.holds(model) for a in self.assertions)


@dataclass(frozen=True)
class Result:
    status: str  # sat | unsat | unknown
    model: dict | None = None
    objective: Fraction | None = None


# --- exact simplex --------------------------------------------------------

@dataclass(frozen=True)
class LPResult:
    status: str  # optimal | infeasible | unbounded
    x: tuple | None = None
    value: Fraction | None = None


def simplex(c: Sequence, a_ub: Sequence = (), b_ub: Sequence = (),
            a_eq: Sequence = (), b_eq: Sequence = (), free: Sequence[bool] | None = None,
            max_iter: int = 20000) -> LPResult:
    """Minimize c·x s.t. a_ub x <= b_ub, a_eq x = b_eq, x >= 0 unless free.

    Dense two-phase tableau with Bland's rule, all in Fractions.
    """
    n = len(c)
    free = list(free) if free is not None else [False] * n
    # column map: each original var -> (plus col, minus col or None)
    cols = []
    ncols = 0
    for j in range(n):
        if free[j]:
            cols.append((ncols, ncols + 1))
            ncols += 2
        else:
            cols.append((ncols, None))
            ncols += 1

    def expand(row):
        out = [Fraction(0)] * ncols
        for j, v in enumerate(row):
            if v:
                p, m = cols[j]
                out[p] = Fraction(v)
                if m is not None:
                    out[m] = -Fraction(v)
        return out

    rows, rhs = [], []
    n_slack = len(a_ub)
    for i, (r, b) in enumerate(zip(a_ub, b_ub)):
        e = expand(r) + [Fraction(0)] * n_slack
        e[ncols + i] = Fraction(1)
        rows.append(e)
        rhs.append(Fraction(b))
    for r, b in zip(a_eq, b_eq):
        rows.append(expand(r) + [Fraction(0)] * n_slack)
        rhs.append(Fraction(b))
    total = ncols + n_slack
    m = len(rows)
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
    # artificial variables for every row
    tab = [rows[i] + [Fraction(1) if k == i else Fraction(0) for k in range(m)] + [rhs[i]]
           for i in range(m)]
    basis = [total + i for i in range(m)]
    width = total + m

    def pivot(r, col, obj):
        pv = tab[r][col]
        if pv != 1:
            tab[r] = [v / pv if v else v for v in tab[r]]
        ri = tab[r]
        nz = [j for j, v in enumerate(ri) if v]
        for row in tab + [obj]:
            if row is ri:
                continue
            f = row[col]
            if f:
                for j in nz:
                    row[j] -= f * ri[j]
        basis[r] = col

    def run(cost, allowed):
        # obj holds reduced costs; its last entry is minus the objective value
        obj = list(cost) + [Fraction(0)]
        for i in range(m):
            cb = cost[basis[i]]
            if cb:
                obj = [a - cb * b for a, b in zip(obj, tab[i])]
        it = 0
        while True:
            it += 1
            if it > max_iter:
                raise SolverError("simplex iteration limit")
            entering = next((j for j in range(width) if allowed[j] and obj[j] < 0), None)
            if entering is None:
                return "optimal"
            best, leave = None, None
            for i in range(m):
                a = tab[i][entering]
                if a > 0:
                    ratio = tab[i][-1] / a
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        best, leave = ratio, i
            if leave is None:
                return "unbounded"
            pivot(leave, entering, obj)

    # phase 1
    cost1 = [Fraction(0)] * total + [Fraction(1)] * m
    run(cost1, [True] * width)
    if sum(tab[i][-1] for i in range(m) if basis[i] >= total) != 0:
        return LPResult("infeasible")
    # drive artificial variables out of the basis
    for i in range(m):
        if basis[i] >= total:
            for j in range(total):
                if tab[i][j] != 0:
                    pivot(i, j, [Fraction(0)] * (width + 1))
                    break
    cost2 = expand(c) + [Fraction(0)] * n_slack + [Fraction(0)] * m
    allowed = [True] * total + [False] * m
    status = run(cost2, allowed)
    if status == "unbounded":
        return LPResult("unbounded")
    val = [Fraction(0)] * width
    for i in range(m):
        val[basis[i]] = tab[i][-1]
    x = []
    for p, mcol in cols:
        x.append(val[p] - (val[mcol] if mcol is not None else 0))
    obj = sum(Fraction(ci) * xi for ci, xi in zip(c, x))
    return LPResult("optimal", tuple(x), obj)


# --- internal backend -----------------------------------------------------

def _linear_rows(q: Query, names: list, strict_eps: str | None):
    idx = {v: i for i, v in enumerate(names)}
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for asr in q.assertions:
        p = asr.poly
        row = [Fraction(0)] * len(names)
        for v, c in p.linear_coeffs().items():
            row[idx[v]] = Fraction(c)
        const = Fraction(p.constant())
        if asr.op == "=":
            a_eq.append(row)
            b_eq.append(-const)
        elif asr.op == "<=":
            a_ub.append(row)
            b_ub.append(-const)
        else:
            ints = all(q.variables.get(v) == "Int" for v in p.indeterminates()) and \
                all(Fraction(c).denominator == 1 for _, c in p.items())
            if ints:
                a_ub.append(row)
                b_ub.append(-const - 1)
            else:
                row = list(row)
                row[idx[strict_eps]] = Fraction(1)
                a_ub.append(row)
                b_ub.append(-const)
    return a_ub, b_ub, a_eq, b_eq


def _solve_linear(q: Query, extra_ub=(), node_limit: int = 400) -> Result:
    names = sorted(q.variables)
    eps = "__eps"
    need_eps = any(a.op == "<" for a in q.assertions)
    if need_eps:
        names = names + [eps]
    idx = {v: i for i, v in enumerate(names)}
    a_ub, b_ub, a_eq, b_eq = _linear_rows(q, names, eps if need_eps else None)
    ints = [v for v in names if q.variables.get(v) == "Int"]

    def lp(bounds):
        au, bu = list(a_ub), list(b_ub)
        for v, lo, hi in bounds:
            row = [Fraction(0)] * len(names)
            if hi is not None:
                row[idx[v]] = Fraction(1)
                au.append(row)
                bu.append(Fraction(hi))
            if lo is not None:
                row2 = [Fraction(0)] * len(names)
                row2[idx[v]] = Fraction(-1)
                au.append(row2)
                bu.append(Fraction(-lo))
        c = [Fraction(0)] * len(names)
        if need_eps:
            row = [Fraction(0)] * len(names)
            row[idx[eps]] = Fraction(1)
            au.append(row)
            bu.append(Fraction(1))
            c[idx[eps]] = Fraction(-1)
        elif q.minimize is not None:
            for v, k in q.minimize.linear_coeffs().items():
                c[idx[v]] = Fraction(k)
        res = simplex(c, au, bu, a_eq, b_eq, free=[True] * len(names))
        if res.status == "optimal" and need_eps and res.x[idx[eps]] <= 0:
            return LPResult("infeasible")
        return res

    # branch and bound on integer variables, depth first
    stack = [()]
    nodes = 0
    saw_unbounded = False
    while stack:
        bounds = stack.pop()
        nodes += 1
        if nodes > node_limit:
            return Result("unknown")
        res = lp(list(extra_ub) + list(bounds))
        if res.status == "infeasible":
            continue
        if res.status == "unbounded":
            saw_unbounded = True
            continue
        frac = next((v for v in ints if res.x[idx[v]].denominator != 1), None)
        if frac is None:
            model = {v: res.x[idx[v]] for v in q.variables}
            if q.replay(model):
                obj = q.minimize.eval(model) if q.minimize is not None else None
                return Result("sat", model, obj)
            return Result("unknown")
        val = res.x[idx[frac]]
        stack.append(bounds + ((frac, None, math.floor(val)),))
        stack.append(bounds + ((frac, math.ceil(val), None),))
    return Result("unknown" if saw_unbounded else "unsat")


def _solve_grid(q: Query, values=range(-2, 3), max_vars: int = 6) -> Result:
    names = sorted(q.variables)
    if len(names) > max_vars:
        return Result("unknown")
    for combo in itertools.product(values, repeat=len(names)):
        model = dict(zip(names, (Fraction(v) for v in combo)))
        if q.replay(model):
            return Result("sat", model)
    return Result("unknown")


# --- SMT-LIB2 -------------------------------------------------------------

def _sym(name: str) -> str:
    if all(ch.isalnum() or ch in "_'" for ch in name) and name.isascii() and not name[0].isdigit():
        return name.replace("'", "_p")
    return "|" + name.replace("|", "_") + "|"


def _num(c) -> str:
    c = Fraction(c)
    body = str(abs(c.numerator)) if c.denominator == 1 else f"(/ {abs(c.numerator)} {c.denominator})"
    return f"(- {body})" if c < 0 else body


def _term(p: Polynomial) -> str:
    parts = []
    for mono, c in p.items():
        factors = []
        for v, e in mono:
            factors.extend([_sym(v)] * e)
        if not factors:
            parts.append(_num(c))
        elif c == 1:
            parts.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
        else:
            parts.append(f"(* {_num(c)} {' '.join(factors)})")
    if not parts:
        return "0"
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def to_smtlib(q: Query) -> str:
    logic = "QF_LIA" if q.is_linear() else "QF_NIA"
    if any(s == "Real" for s in q.variables.values()):
        logic = "QF_LRA" if q.is_linear() else "QF_NRA"
        if any(s == "Int" for s in q.variables.values()):
            logic = "QF_AUFLIRA" if q.is_linear() else "ALL"
    lines = [f"(set-logic {logic})", "(set-option :produce-models true)"]
    for v in sorted(q.variables):
        lines.append(f"(declare-fun {_sym(v)} () {q.variables[v]})")
    for a in q.assertions:
        lines.append(f"(assert ({a.op} {_term(a.poly)} 0))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def _sexp_tokens(text: str):
    buf = ""
    in_bar = False
    for ch in text:
        if in_bar:
            buf += ch
            if ch == "|":
                in_bar = False
            continue
        if ch == "|":
            in_bar = True
            buf += ch
        elif ch in "()":
            if buf:
                yield buf
                buf = ""
            yield ch
        elif ch.isspace():
            if buf:
                yield buf
                buf = ""
        else:
            buf += ch
    if buf:
        yield buf


def parse_sexp(text: str):
    stack = [[]]
    for tok in _sexp_tokens(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SolverError("unbalanced reply")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SolverError("unbalanced reply")
    return stack[0]


def _value(e) -> Fraction:
    if isinstance(e, str):
        if "." in e:
            return Fraction(e)
        return Fraction(int(e))
    head = e[0]
    if head == "-" and len(e) == 2:
        return -_value(e[1])
    if head == "/":
        return _value(e[1]) / _value(e[2])
    raise SolverError(f"cannot read value {e!r}")


def parse_model(reply_items: list, q: Query) -> dict:
    back = {_sym(v): v for v in q.variables}
    model = {}
    body = reply_items
    if body and body[0] == "model":
        body = body[1:]
    for item in body:
        if isinstance(item, list) and item and item[0] == "define-fun":
            name = item[1]
            if name in back:
                model[back[name]] = _value(item[4])
    return model


def default_command() -> str | None:
    return os.environ.get(ENV_SOLVER) or None


def solve_external(q: Query, command: str, timeout: float | None = None) -> Result:
    text = to_smtlib(q)
    argv = shlex.split(command)
    try:
        proc = subprocess.run(argv, input=text, capture_output=True, text=True,
                              timeout=timeout)
    except FileNotFoundError as exc:
        raise SolverError(f"solver not found: {command}") from exc
    except subprocess.TimeoutExpired:
        return Result("unknown")
    out = proc.stdout.strip()
    items = parse_sexp(out)
    if not items:
        raise SolverError(f"empty reply from {command}: {proc.stderr[:200]}")
    status = items[0]
    if status == "unsat":
        return Result("unsat")
    if status != "sat":
        return Result("unknown")
    model = parse_model(items[1] if len(items) > 1 else [], q)
    # unconstrained variables may be omitted by the solver
    for v in q.variables:
        model.setdefault(v, Fraction(0))
    if not q.replay(model):
        return Result("unknown")
    return Result("sat", model)


def solve(q: Query, backend: str = "auto", command: str | None = None,
          timeout: float | None = None) -> Result:
    """Decide a query. ``auto`` uses the external solver when one is configured."""
    command = command or default_command()
    if timeout is None and os.environ.get(ENV_TIMEOUT):
        timeout = float(os.environ[ENV_TIMEOUT])
    if backend == "external" or (backend == "auto" and command):
        if not command:
            raise SolverError("no external solver configured")
        res = solve_external(q, command, timeout)
        if res.status != "unknown" or backend == "external":
            return res
    if q.is_linear():
        return _solve_linear(q)
    return _solve_grid(q)


def constraint_assertions(phi: Constraint) -> list:
    """Integer-normalized ``p - q + 1 <= 0`` for each atom ``p < q``."""
    return [Assertion(a.lhs - a.rhs + 1, "<=") for a in phi.atoms]


def entails(phi: Constraint, psi: Atom, backend: str = "auto",
            command: str | None = None, timeout: float | None = None) -> str:
    """``yes`` iff phi ∧ ¬psi has no integer solution."""
    if not all(a.lhs.is_linear() and a.rhs.is_linear() for a in phi.atoms + (psi,)):
        return "unknown"
    q = Query()
    for a in phi.atoms:
        q.add(a.lhs - a.rhs + 1)
    # ¬(l < r) is r <= l
    q.add(psi.rhs - psi.lhs)
    res = solve(q, backend, command, timeout)
    return {"unsat": "yes", "sat": "no"}.get(res.status, "unknown")


def satisfiable(phi: Constraint) -> str:
    """sat | unsat | unknown over the integers, linear atoms only."""
    if not all(a.lhs.is_linear() and a.rhs.is_linear() for a in phi.atoms):
        return "unknown"
    q = Query()
    for a in phi.atoms:
        q.add(a.lhs - a.rhs + 1)
    return solve(q, backend="internal").status
