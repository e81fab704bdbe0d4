import random

import pytest
from hypothesis import given, settings, strategies as st

from rhobound.interpreter import Scheduler, run
from rhobound.invariants import Interval, TOP, eval_interval, facts, infer, strengthen
from rhobound.its import Polynomial

from conftest import corpus_files
from rhobound import load

end = st.one_of(st.none(), st.integers(-10, 10))


@st.composite
def interval_and_member(draw):
    lo, hi = draw(end), draw(end)
    if lo is not None and hi is not None and lo > hi:
        lo, hi = hi, lo
    a = draw(st.integers(-30, 30).filter(lambda v: (lo is None or v >= lo) and (hi is None or v <= hi)))
    return Interval(lo, hi), a


def member(iv, v):
    return (iv.lo is None or v >= iv.lo) and (iv.hi is None or v <= iv.hi)


@settings(max_examples=500)
@given(interval_and_member(), interval_and_member())
def test_arithmetic_contains(p, q):
    (i, a), (j, b) = p, q
    assert member(i + j, a + b)
    assert member(i * j, a * b)
    assert member(i.join(j), a) and member(i.join(j), b)
    assert member(i.widen(i.join(j)), b)


def test_eval_interval():
    x = Polynomial.var("x")
    assert eval_interval(x * 3, {"x": Interval(1, None)}) == Interval(3, None)
    assert eval_interval(x - 1, {"x": Interval(1, None)}) == Interval(0, None)
    assert eval_interval(x * x, {"x": TOP}) == TOP  # intervals do not know x*x >= 0


def test_facsum_facts(facsum):
    inv = infer(facsum)
    assert inv["l2"]["x"].lo == 1
    assert inv["f1"]["a"].lo == 0
    assert inv["f1"]["x"].lo == 1
    assert "x" in str(facts(inv["l2"], facsum.variables))


@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_invariants_hold_on_runs(path):
    prog = load(path)
    inv = infer(prog)
    rng = random.Random(1)
    for _ in range(30):
        sigma = {v: rng.randint(-8, 8) for v in prog.variables}
        res = run(prog, sigma, Scheduler(fuel=3000))
        for n in res.tree.nodes:
            if n.state is None:
                continue
            env = inv[n.location]
            assert env is not None, f"{n.location} reached but marked unreachable"
            for v, val in n.state.items():
                assert member(env[v], val)


def test_strengthen_keeps_semantics(facsum):
    s = strengthen(facsum)
    assert [t.id for t in s.transitions] == [t.id for t in facsum.transitions]
    for sigma in ({"a": 0, "x": 3, "y": 1}, {"a": 2, "x": -1, "y": 7}):
        assert run(s, sigma).edge_counts == run(facsum, sigma).edge_counts
