"""Size bounds: local bounds, the result variable graph and SCC lifting.

A result variable is a pair ``(item, var)`` where ``item`` is a transition
id or a call id. Local size bounds are polynomials over variables and call
symbols with natural coefficients; a call symbol stands for the absolute
value returned by that call. Global size bounds are ``Bound`` expressions
over the absolute initial values.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import ceil
from typing import Callable, Mapping

import networkx as nx

from . import bounds as B
from .its import Atom, Constraint, Polynomial, Program, funs, is_call_symbol, trans_of
from .smt import entails

MAX_SIGN_SPLIT = 4
MAX_CONST_TRIES = 8


def item_key(item: str):
    """Transitions before calls, then numerically."""
    digits = "".join(ch for ch in item if ch.isdigit())
    return (1 if is_call_symbol(item) else 0, int(digits) if digits else 0, item)


def rv_key(alpha: tuple):
    return item_key(alpha[0]) + (alpha[1],)


# --- local size bounds ----------------------------------------------------

def context_guard(prog: Program, item: str) -> Constraint:
    """Guard of a transition, or the guards of the transitions holding a call."""
    if is_call_symbol(item):
        g = Constraint(())
        for tid in sorted(trans_of(prog, item), key=item_key):
            g = g.conj(prog.transition(tid).guard)
        return g
    return prog.transition(item).guard


def _update(prog: Program, item: str, v: str) -> Polynomial:
    if is_call_symbol(item):
        return prog.call(item).args[v]
    return prog.transition(item).update[v]


def _candidates(p: Polynomial):
    """Tightenings of ⌈p⌉, smallest first: negative terms dropped, constant lowered."""
    neg = [m for m, c in p.items() if m and c < 0]
    c0 = abs(p.constant())
    consts = sorted(set(range(0, min(int(ceil(c0)), MAX_CONST_TRIES) + 1)) | {ceil(c0)})
    base = {m: abs(c) for m, c in p.items() if m}
    out = []
    for k in range(len(neg) + 1):
        for drop in itertools.combinations(neg, k):
            terms = {m: c for m, c in base.items() if m not in drop}
            for c in consts:
                q = dict(terms)
                if c:
                    q[()] = c
                out.append(Polynomial(q))
    out.sort(key=lambda q: (sum(c for _, c in q.items()), len(q.terms)))
    return out


def _certified(guard: Constraint, p: Polynomial, q: Polynomial, backend: str) -> bool:
    """guard ⟹ |p| <= q(|w1|, ...) via a case split on the signs of the w_i."""
    ws = sorted(p.indeterminates() | q.indeterminates())
    if len(ws) > MAX_SIGN_SPLIT:
        return False
    lin = Constraint(tuple(a for a in guard.atoms if a.lhs.is_linear() and a.rhs.is_linear()))
    for signs in itertools.product((1, -1), repeat=len(ws)):
        case = []
        for w, s in zip(ws, signs):
            x = Polynomial.var(w)
            case.append(Atom(Polynomial.const(-1), x) if s > 0 else Atom(x, Polynomial.const(0)))
        phi = lin.conj(Constraint(tuple(case)))
        qs = q.subst({w: Polynomial.var(w) * s for w, s in zip(ws, signs)})
        for lhs in (p, -p):
            # lhs <= qs  is  lhs < qs + 1
            if entails(phi, Atom(lhs, qs + 1), backend=backend) != "yes":
                return False
    return True


def local_size_bound(prog: Program, item: str, v: str, backend: str = "internal") -> Polynomial:
    p = _update(prog, item, v)
    base = p.abs_coeffs()
    if not p.is_linear() or base == p:
        return base
    guard = context_guard(prog, item)
    for q in _candidates(p):
        if q == base:
            break
        if _certified(guard, p, q, backend):
            return q
    return base


def local_size_bounds(prog: Program, backend: str = "internal") -> dict:
    out = {}
    for item in items(prog):
        for v in prog.variables:
            out[(item, v)] = local_size_bound(prog, item, v, backend)
    return out


def items(prog: Program) -> list:
    return [t.id for t in prog.transitions] + [c.id for c in prog.calls]


# --- predecessors ---------------------------------------------------------

def pre(prog: Program, item: str) -> frozenset:
    if is_call_symbol(item):
        out = set()
        for tid in trans_of(prog, item):
            out |= pre(prog, tid)
        return frozenset(out)
    src = prog.transition(item).source
    ts = {t.id for t in prog.transitions if t.target == src}
    cs = {c.id for c in prog.calls if c.target == src}
    return frozenset(ts | cs)


def reachable(prog: Program, loc: str) -> frozenset:
    """Locations reachable from loc along transitions of the same frame."""
    seen = {loc}
    todo = [loc]
    while todo:
        cur = todo.pop()
        for t in prog.outgoing(cur):
            if t.target not in seen:
                seen.add(t.target)
                todo.append(t.target)
    return frozenset(seen)


def pre_omega(prog: Program, tid: str, rho: str) -> frozenset:
    if rho not in prog.transition(tid).calls():
        raise ValueError(f"{rho} does not occur in {tid}")
    locs = reachable(prog, prog.call(rho).target)
    ret = prog.return_var
    return frozenset((t.id, ret[t.target]) for t in prog.transitions
                     if t.target in ret and t.target in locs)


def return_vars(prog: Program, rho: str) -> frozenset:
    ret = prog.return_var
    return frozenset(ret[loc] for loc in reachable(prog, prog.call(rho).target) if loc in ret)


# --- result variable graph ------------------------------------------------

@dataclass
class RVG:
    nodes: list
    rv_edges: set
    omega_edges: set
    graph: nx.DiGraph = field(repr=False, default=None)

    def preds(self, alpha) -> set:
        return {a for a, b in self.rv_edges if b == alpha}

    def omega_preds(self, alpha) -> set:
        return {a for a, b in self.omega_edges if b == alpha}


def build_rvg(prog: Program, sloc: Mapping | None = None) -> RVG:
    sloc = local_size_bounds(prog) if sloc is None else sloc
    nodes = sorted(sloc, key=rv_key)
    rv_edges = set()
    omega_edges = set()
    pres = {it: pre(prog, it) for it in items(prog)}
    for (item, v) in nodes:
        active = [w for w in sloc[(item, v)].indeterminates() if not is_call_symbol(w)]
        for prev in pres[item]:
            for w in active:
                rv_edges.add(((prev, w), (item, v)))
        if not is_call_symbol(item):
            t = prog.transition(item)
            for rho in funs(prog, t.update[v]):
                for beta in pre_omega(prog, t.id, rho):
                    omega_edges.add((beta, (item, v)))
    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    g.add_edges_from(rv_edges)
    g.add_edges_from(omega_edges)
    return RVG(nodes, rv_edges, omega_edges, g)


def sccs(rvg: RVG) -> list:
    """SCCs in topological order, ties broken by the smallest member."""
    cond = nx.condensation(rvg.graph)
    members = cond.graph["mapping"]
    groups: dict = {}
    for node, c in members.items():
        groups.setdefault(c, []).append(node)
    for c in groups:
        groups[c].sort(key=rv_key)
    order = nx.lexicographical_topological_sort(cond, key=lambda c: rv_key(groups[c][0]))
    return [groups[c] for c in order]


def is_trivial(rvg: RVG, comp: list) -> bool:
    return len(comp) == 1 and not rvg.graph.has_edge(comp[0], comp[0])


def to_dot(rvg: RVG) -> str:
    def name(a):
        return f'"{a[0]},{a[1]}"'

    lines = ["digraph rvg {"]
    for a in rvg.nodes:
        lines.append(f"  {name(a)};")
    for a, b in sorted(rvg.rv_edges, key=lambda e: (rv_key(e[0]), rv_key(e[1]))):
        lines.append(f"  {name(a)} -> {name(b)};")
    for a, b in sorted(rvg.omega_edges, key=lambda e: (rv_key(e[0]), rv_key(e[1]))):
        lines.append(f"  {name(a)} -> {name(b)} [style=dashed, color=red];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- decomposition --------------------------------------------------------

@dataclass(frozen=True)
class SlocDecomposition:
    scale: Polynomial  # over variables, natural coefficients
    add: int
    residual: frozenset

    def bound(self) -> Polynomial:
        inner = Polynomial.const(self.add)
        for w in self.residual:
            inner = inner + Polynomial.var(w)
        return self.scale * inner


def _dominates(big: Polynomial, small: Polynomial) -> bool:
    diff = big - small
    return all(c >= 0 for _, c in diff.items())


def _linear_decomposition(p: Polynomial) -> SlocDecomposition | None:
    if not p.is_linear():
        return None
    coeffs = {w: c for w, c in p.linear_coeffs().items() if c}
    s = max([1] + [ceil(c) for c in coeffs.values()])
    e = ceil(p.constant() / s)
    return SlocDecomposition(Polynomial.const(s), e, frozenset(coeffs))


def _common_monomial(p: Polynomial) -> Polynomial:
    monos = [dict(m) for m, _ in p.items()]
    if not monos:
        return Polynomial.const(1)
    common = None
    for m in monos:
        vs = {w: k for w, k in m.items() if not is_call_symbol(w)}
        common = vs if common is None else {w: min(k, vs[w]) for w, k in common.items() if w in vs}
    g = Polynomial.const(1)
    for w, k in common.items():
        g = g * Polynomial.var(w) ** k
    return g


def _divide(p: Polynomial, g: Polynomial) -> Polynomial:
    ((gm, _),) = g.items()
    gd = dict(gm)
    terms = {}
    for m, c in p.items():
        md = dict(m)
        for w, k in gd.items():
            md[w] -= k
        terms[tuple(sorted((w, k) for w, k in md.items() if k))] = c
    return Polynomial(terms)


def decompose_sloc(p: Polynomial) -> SlocDecomposition | None:
    """s and e with p <= s * (e + sum of the remaining active arguments)."""
    d = _linear_decomposition(p)
    if d is None:
        g = _common_monomial(p)
        if g == Polynomial.const(1):
            return None
        q = _divide(p, g)
        inner = _linear_decomposition(q)
        if inner is None or inner.residual & g.indeterminates():
            return None
        d = SlocDecomposition(g * inner.scale, inner.add, inner.residual)
    if d.residual != p.indeterminates() - d.scale.indeterminates():
        return None
    if not _dominates(d.bound(), p):
        return None
    return d


# --- lifting --------------------------------------------------------------

@dataclass
class SizeContext:
    program: Program
    sloc: dict
    rvg: RVG
    components: list
    pres: dict
    omega: dict  # (tid, rho) -> pre_omega


def prepare(prog: Program, backend: str = "internal") -> SizeContext:
    sloc = local_size_bounds(prog, backend)
    rvg = build_rvg(prog, sloc)
    pres = {it: pre(prog, it) for it in items(prog)}
    omega = {}
    for t in prog.transitions:
        for rho in t.calls():
            omega[(t.id, rho)] = pre_omega(prog, t.id, rho)
    return SizeContext(prog, sloc, rvg, sccs(rvg), pres, omega)


def _poly_bound(p: Polynomial) -> B.Bound:
    return B.from_polynomial(p)


def _vars_subst(ctx: SizeContext, prev: str, sb: Mapping) -> dict:
    return {v: sb.get((prev, v), B.W) for v in ctx.program.variables}


def size_trivial(ctx: SizeContext, alpha: tuple, sb: Mapping) -> B.Bound:
    item, _ = alpha
    base = _poly_bound(ctx.sloc[alpha])
    prevs = ctx.pres[item]
    if not prevs:
        return base
    return B.bmax(*(B.subst(base, _vars_subst(ctx, p, sb)) for p in sorted(prevs, key=item_key)))


def size_trivial_call(ctx: SizeContext, alpha: tuple, sb: Mapping) -> B.Bound:
    tid, x = alpha
    calls = sorted(funs(ctx.program, ctx.program.transition(tid).update[x]), key=item_key)
    if any(not ctx.omega[(tid, rho)] for rho in calls):
        return B.ZERO
    base = _poly_bound(ctx.sloc[alpha])
    # a monotone bound: substituting each call by the max over its returns
    # equals the max over all combinations of returning transitions
    call_map = {rho: B.bmax(*(sb.get(beta, B.W) for beta in sorted(ctx.omega[(tid, rho)], key=rv_key)))
                for rho in calls}
    prevs = ctx.pres[tid]
    if not prevs:
        return B.subst(base, call_map)
    # program variables first, calls second
    outs = [B.subst(B.subst(base, _vars_subst(ctx, p, sb)), call_map)
            for p in sorted(prevs, key=item_key)]
    return B.bmax(*outs)


def runtime_of(prog: Program, item: str, rb: Mapping) -> B.Bound:
    if is_call_symbol(item):
        return B.bsum(*(rb.get(t, B.W) for t in sorted(trans_of(prog, item), key=item_key)))
    return rb.get(item, B.W)


def size_nontrivial(ctx: SizeContext, comp: list, sb: Mapping, rb: Mapping,
                    exponent: Callable | None = None) -> tuple:
    """(bound for every member, 'additive' or 'scaled')."""
    prog = ctx.program
    members = set(comp)
    scales = []
    total = []
    additive = True
    for alpha in comp:
        item, _ = alpha
        p = ctx.sloc[alpha]
        d = decompose_sloc(p)
        if d is None:
            return B.W, "undecomposable"
        preds = ctx.rvg.preds(alpha)
        opreds = ctx.rvg.omega_preds(alpha)
        v_alpha = {v for (_, v) in preds & members}
        f_alpha = {v for (_, v) in opreds & members}

        def init(v):
            return B.bmax(*(sb.get(a, B.W) for a in sorted(preds - members, key=rv_key) if a[1] == v))

        def init_omega(v):
            return B.bmax(*(sb.get(a, B.W) for a in sorted(opreds - members, key=rv_key) if a[1] == v))

        rb_alpha = runtime_of(prog, item, rb)
        act = p.indeterminates()
        act_v = {w for w in act if not is_call_symbol(w)}
        act_f = sorted((w for w in act if is_call_symbol(w)), key=item_key)
        extra = [B.Const(d.add)]
        inner_calls = 0  # each call occurrence feeding back from C adds one copy
        for v in sorted(act_v - v_alpha - d.scale.indeterminates()):
            extra.append(init(v))
        for rho in act_f:
            rv = return_vars(prog, rho)
            if len(rv) != 1:
                return B.W, "ambiguous return variable"
            (v_rho,) = rv
            if v_rho not in f_alpha:
                extra.append(init_omega(v_rho))
            else:
                inner_calls += 1
        add = B.bprod(rb_alpha, B.bsum(*extra))
        total.append(add)
        # inflow from outside C; none means every value arrives through another member
        for v in sorted(v_alpha):
            outside = any(a[1] == v for a in preds - members)
            total.append(init(v) if outside else B.ZERO)
        for v in sorted(f_alpha):
            outside = any(a[1] == v for a in opreds - members)
            total.append(init_omega(v) if outside else B.ZERO)
        width = len(v_alpha) + max(len(f_alpha), inner_calls)
        if d.scale == Polynomial.const(1) and width <= 1:
            continue
        additive = False
        s_bound = _poly_bound(d.scale)
        prev_items = sorted({a[0] for a in preds}, key=item_key)
        factor = B.bmax(B.ONE, *(B.subst(s_bound, _vars_subst(ctx, it, sb)) for it in prev_items))
        exp = rb_alpha
        if exponent is not None:
            refined = exponent(comp, alpha, sb)
            if refined is not None and B.is_finite(refined):
                exp = refined
        scales.append(B.bpow(B.bprod(factor, B.Const(width)), exp))
    out = B.bprod(*scales, B.bsum(*total)) if scales else B.bsum(*total)
    return out, "additive" if additive else "scaled"


def size_bounds(ctx: SizeContext, rb: Mapping, exponent: Callable | None = None) -> tuple:
    """Global size bounds for every result variable, with the rule used for each."""
    sb: dict = {}
    how: dict = {}
    prog = ctx.program
    for comp in ctx.components:
        if is_trivial(ctx.rvg, comp):
            alpha = comp[0]
            item, x = alpha
            if is_call_symbol(item) or not funs(prog, prog.transition(item).update[x]):
                sb[alpha] = size_trivial(ctx, alpha, sb)
                how[alpha] = "trivial"
            else:
                sb[alpha] = size_trivial_call(ctx, alpha, sb)
                how[alpha] = "trivial-call"
            continue
        bound, kind = size_nontrivial(ctx, comp, sb, rb, exponent)
        for alpha in comp:
            sb[alpha] = bound
            how[alpha] = f"scc-{kind}"
    return sb, how
