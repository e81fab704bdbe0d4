import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from rhobound import bounds as B
from rhobound import sizebounds as S
from rhobound.analysis import AnalysisConfig, analyze
from rhobound.invariants import strengthen
from rhobound.its import Polynomial

from conftest import CORPUS
from rhobound import load

GRID = [dict(zip("axy", v)) for v in itertools.product(range(7), repeat=3)]


def same(b1, b2, grid=GRID):
    return all(B.eval_bound(b1, e) == B.eval_bound(b2, e) for e in grid)


@pytest.fixture(scope="module")
def sfacsum(facsum):
    return strengthen(facsum)


@pytest.fixture(scope="module")
def ctx(sfacsum):
    return S.prepare(sfacsum)


def test_local_size_bounds(sfacsum):
    sl = S.local_size_bounds(sfacsum)
    assert str(sl[("t4", "a")]) == "1"
    assert str(sl[("t1", "y")]) == "y + ρ1"
    assert str(sl[("t5", "a")]) in ("a*ρ2", "ρ2*a")
    assert str(sl[("ρ1", "a")]) == "x"
    # a - 1 under a > 0 is bounded by a
    assert str(sl[("ρ2", "a")]) == "a"


def test_pre_and_pre_omega(sfacsum):
    assert S.pre(sfacsum, "t1") == {"t0", "t1"}
    assert S.pre(sfacsum, "ρ1") == {"t0", "t1"}
    assert S.pre(sfacsum, "t0") == frozenset()
    assert S.pre_omega(sfacsum, "t5", "ρ2") == {("t4", "a"), ("t5", "a")}


def test_rvg_edges(ctx):
    rvg = ctx.rvg
    assert (("t1", "x"), ("ρ1", "a")) in rvg.rv_edges
    assert (("ρ1", "a"), ("t4", "a")) not in rvg.rv_edges
    assert (("t4", "a"), ("t1", "y")) in rvg.omega_edges
    assert (("t5", "a"), ("t1", "y")) in rvg.omega_edges


def test_rvg_dot(sfacsum):
    text = S.to_dot(S.build_rvg(sfacsum))
    assert '"t5,a" -> "t1,y" [style=dashed, color=red]' in text
    assert text == S.to_dot(S.build_rvg(strengthen(load(CORPUS / "facsum.koat"))))
    free = S.to_dot(S.build_rvg(strengthen(load(CORPUS / "free_nested.koat"))))
    assert "dashed" not in free


@pytest.mark.parametrize("poly, scale, add, residual", [
    (Polynomial.var("a") * Polynomial.var("ρ2"), "a", 0, {"ρ2"}),
    (Polynomial.var("y") + Polynomial.var("ρ1"), "1", 0, {"y", "ρ1"}),
    (Polynomial.var("x") * 2, "2", 0, {"x"}),
    (Polynomial.var("x") * 2 + 5, "2", 3, {"x"}),
])
def test_decompose_examples(poly, scale, add, residual):
    d = S.decompose_sloc(poly)
    assert str(d.scale) == scale and d.add == add and set(d.residual) == residual


def test_decompose_rejects():
    x, y = Polynomial.var("x"), Polynomial.var("y")
    assert S.decompose_sloc(x * x + y) is None


names = ["x", "y", "z", "ρ1"]


@st.composite
def nonneg_poly(draw):
    p = Polynomial.const(draw(st.integers(0, 4)))
    for _ in range(draw(st.integers(1, 3))):
        mono = Polynomial.const(draw(st.integers(1, 3)))
        for v in draw(st.lists(st.sampled_from(names), min_size=1, max_size=3)):
            mono = mono * Polynomial.var(v)
        p = p + mono
    return p


@settings(max_examples=300, deadline=None)
@given(nonneg_poly())
def test_decomposition_sound(p):
    d = S.decompose_sloc(p)
    if d is None:
        return
    q = d.scale * (sum((Polynomial.var(v) for v in d.residual), Polynomial()) + d.add)
    rng = random.Random(hash(str(p)) & 0xFFFF)
    for _ in range(1000):
        env = {v: rng.randint(0, 9) for v in names}
        assert p.eval(env) <= q.eval(env)


def test_trivial_examples(facsum_result):
    sb = facsum_result.state.sb
    x = B.Var("x")
    assert sb[("t0", "x")] == x
    assert sb[("t4", "a")] == B.ONE
    assert sb[("ρ1", "a")] == x
    assert sb[("t1", "x")] == x


def test_call_substitution_order():
    prog = strengthen(load(CORPUS / "facsum_assign.koat"))
    res = analyze(prog)
    ctx = S.prepare(res.state.program)
    sb = dict(res.state.sb)
    # make the variable sizes at the predecessors differ from the initial ones
    x2 = B.bprod(2, B.Var("x"))
    sb[("t0", "x")] = x2
    sb[("t1", "x")] = x2
    alpha = ("t1", "y")
    right = S.size_trivial_call(ctx, alpha, sb)
    want = B.bmax(sb[("t4", "a")], sb[("t5", "a")])
    assert same(right, want)
    base = B.from_polynomial(ctx.sloc[alpha])
    calls = {"ρ1": want}
    swapped = B.bmax(*(B.subst(B.subst(base, calls), S._vars_subst(ctx, p, sb))
                       for p in sorted(ctx.pres["t1"])))
    assert not same(right, swapped)
    # with the real size bounds the call result is x^x
    xx = B.Pow(B.Var("x"), B.Var("x"))
    assert same(res.state.sb[alpha], xx)


def test_additive_scc_matches_sum_formula(facsum_result):
    st_ = facsum_result.state
    sb, rb = st_.sb, st_.rb
    assert st_.sb_rule[("t1", "y")] == "scc-additive"
    # RB(t1) * (largest returned value) + incoming y
    formula = B.bsum(B.bprod(rb["t1"], B.bmax(sb[("t4", "a")], sb[("t5", "a")])), sb[("t0", "y")])
    assert same(sb[("t1", "y")], formula)


def test_scaled_scc_unrefined(facsum):
    res = analyze(facsum, AnalysisConfig(refine_scale=False))
    x = B.Var("x")
    assert same(res.state.sb[("t5", "a")], B.Pow(x, B.bprod(x, x)))


def test_repeated_call_counts_twice():
    # r <- @g(n-1) + @g(n-2) doubles per level, so the scale must not be 1
    res = analyze(load(CORPUS / "fib.koat"))
    assert res.state.sb_rule[("t2", "r")] == "scc-scaled"
    env = {"n": 10, "r": 0}
    assert B.eval_bound(res.state.sb[("t0", "r")], env, 1 << 64) >= 55
