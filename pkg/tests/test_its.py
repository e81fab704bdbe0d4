from hypothesis import given, settings, strategies as st

from rhobound.its import (Constraint, Polynomial, eq, funs, ge, gt, le, locations_of, lt,
                          trans_of, validate)

x, y = Polynomial.var("x"), Polynomial.var("y")
ints = st.integers(-20, 20)


@settings(max_examples=300)
@given(ints, ints, ints)
def test_ring_laws(a, b, c):
    env = {"x": a, "y": b}
    p = x * x + 3 * y - c
    q = x - y * 2
    assert (p * q).eval(env) == p.eval(env) * q.eval(env)
    assert (p + q).eval(env) == p.eval(env) + q.eval(env)
    assert (p - p).is_zero()
    assert (p ** 2).eval(env) == p.eval(env) ** 2


@settings(max_examples=300)
@given(ints, ints)
def test_sugar(a, b):
    env = {"x": a, "y": b}
    assert lt(x, y).holds(env) == (a < b)
    assert le(x, y).holds(env) == (a <= b)
    assert ge(x, y).holds(env) == (a >= b)
    assert gt(x, y).holds(env) == (a > b)
    assert Constraint(eq(x, y)).holds(env) == (a == b)


def test_empty_constraint_is_true():
    assert Constraint().holds({})


def test_facsum_structure(facsum):
    assert validate(facsum) == []
    assert facsum.initial == "l0"
    assert facsum.return_var == {"f2": "a"}
    assert funs(facsum, facsum.transition("t1")) == {"ρ1"}
    assert funs(facsum, facsum.transition("t5")) == {"ρ2"}
    assert funs(facsum, ["f1"]) == {"ρ1", "ρ2"}
    assert trans_of(facsum, {"ρ1", "ρ2"}) == {"t1", "t5"}
    assert locations_of(facsum, ["t4", "t5"]) == {"f1"}
