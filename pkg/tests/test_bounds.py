"""Bound algebra: conventions plus randomized invariants (1000 cases each)."""
import math
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from rhobound import bounds as B
from rhobound.its import Polynomial

VARS = ("x", "y", "z")


def _bounds(factory: bool = False):
    """Random bound trees, built raw or through the public factories."""
    if factory:
        mk_sum, mk_prod, mk_max = (lambda xs: B.bsum(*xs)), (lambda xs: B.bprod(*xs)), (lambda xs: B.bmax(*xs))
        mk_pow, mk_log = (lambda b, e: B.bpow(b, e)), (lambda k, a: B.blog(k, a))
    else:
        mk_sum, mk_prod, mk_max = (lambda xs: B.Sum(tuple(xs))), (lambda xs: B.Prod(tuple(xs))), (lambda xs: B.Max(tuple(xs)))
        mk_pow, mk_log = B.Pow, (lambda k, a: B.Log(Fraction(k), a))
    leaf = st.one_of(
        st.integers(0, 5).map(B.Const),
        st.sampled_from(VARS).map(B.Var),
    )

    def grow(children):
        return st.one_of(
            st.lists(children, min_size=2, max_size=3).map(mk_sum),
            st.lists(children, min_size=2, max_size=3).map(mk_prod),
            st.lists(children, min_size=2, max_size=3).map(mk_max),
            st.tuples(children, st.integers(0, 3).map(B.Const)).map(lambda p: mk_pow(*p)),
            st.tuples(children, st.sampled_from(VARS).map(B.Var)).map(lambda p: mk_pow(*p)),
            st.tuples(st.sampled_from([2, 3, Fraction(3, 2)]), children).map(lambda p: mk_log(*p)),
        )

    return st.recursive(leaf, grow, max_leaves=6)


envs = st.fixed_dictionaries({v: st.integers(0, 4) for v in VARS})
CAP = 1 << 4096


def ev(b, env):
    return B.eval_bound(b, env, CAP)


def test_conventions():
    assert ev(B.bprod(B.ZERO, B.W), {}) == 0
    assert ev(B.Pow(B.Var("x"), B.Var("y")), {"x": 0, "y": 0}) == 1
    assert ev(B.Pow(B.Var("x"), B.Var("y")), {"x": 0, "y": 1}) == 0
    assert ev(B.blog(2, B.Var("x")), {"x": 0}) == 0
    assert ev(B.blog(2, B.Var("x")), {"x": 9}) == 4
    assert B.eval_bound(B.bmax(), {}) is B.OMEGA
    assert B.eval_bound(B.bsum(B.ONE, B.W), {}) is B.OMEGA
    # raw powers keep 0^0 = 1; the factory lifts a zero base
    assert ev(B.Pow(B.ZERO, B.Var("x")), {"x": 1}) == 0
    assert ev(B.bpow(B.Var("y"), B.Var("x")), {"x": 1, "y": 0}) == 1


def test_simplify_examples():
    x, y = B.Var("x"), B.Var("y")
    assert B.simplify(B.Max((y, B.bsum(y, x)))) == B.bsum(y, x)
    assert B.render(B.bsum(x, x)) == "2*x"
    assert B.asymptotic_class(B.bprod(x, x)).big_o() == "n^2"
    assert B.asymptotic_class(B.bpow(2, x)).kind == "Exp"
    assert B.asymptotic_class(B.blog(2, x)).kind == "Log"
    assert B.asymptotic_class(B.W).kind == "Omega"
    assert B.asymptotic_class(B.bsum(B.bprod(x, x), B.bprod(x, B.blog(2, x)))).big_o() == "n^2"


@settings(max_examples=1000, deadline=None)
@given(_bounds(factory=True), envs, envs)
def test_monotone(b, e1, e2):
    lo = {v: min(e1[v], e2[v]) for v in VARS}
    hi = {v: max(e1[v], e2[v]) for v in VARS}
    assert ev(b, lo) <= ev(b, hi)


@settings(max_examples=1000, deadline=None)
@given(_bounds(), envs)
def test_simplify_sound(b, env):
    assert ev(B.simplify(b), env) == ev(b, env)


@settings(max_examples=1000, deadline=None)
@given(_bounds(), _bounds(), envs)
def test_subst_commutes_with_eval(b, c, env):
    sub = B.subst(b, {"x": c})
    inner = dict(env, x=ev(c, env))
    if inner["x"] >= CAP:
        return
    assert ev(sub, env) == ev(b, inner)


@settings(max_examples=1000, deadline=None)
@given(st.sampled_from([2, 3, 10, Fraction(3, 2)]), st.integers(0, 10**6))
def test_log_rounding(k, x):
    n = B.ceil_log(Fraction(k), x)
    assert Fraction(k) ** n >= max(1, x)
    assert n == 0 or Fraction(k) ** (n - 1) < max(1, x)
    if k == 2 and x >= 1:
        assert n == math.ceil(math.log2(x)) or Fraction(2) ** n >= x


def test_poly_rejects_negative():
    import pytest

    with pytest.raises(ValueError):
        B.Poly(Polynomial.var("x") * -1)
