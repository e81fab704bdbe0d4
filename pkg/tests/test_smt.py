import itertools
import sys
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rhobound.its import Constraint, Polynomial, ge, gt, le, lt
from rhobound.smt import (Query, SolverError, entails, parse_model, parse_sexp, satisfiable,
                          simplex, solve, to_smtlib)

x, y = Polynomial.var("x"), Polynomial.var("y")
BOX = range(-4, 5)


def test_simplex_small():
    # minimize -x - y s.t. x + 2y <= 4, 3x + y <= 6
    res = simplex([-1, -1], [[1, 2], [3, 1]], [4, 6])
    assert res.status == "optimal"
    assert res.value == Fraction(-14, 5)
    assert simplex([1], [[-1]], [-1], free=[True]).value == 1
    assert simplex([-1], [], []).status == "unbounded"
    assert simplex([0], [[1], [-1]], [1, -2]).status == "infeasible"


rows = st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-6, 6)),
                min_size=1, max_size=4)


@settings(max_examples=200, deadline=None)
@given(rows, st.integers(-3, 3), st.integers(-3, 3))
def test_simplex_against_grid(cons, c1, c2):
    # box |x|,|y| <= 4 keeps the LP bounded
    a = [[p, q] for p, q, _ in cons] + [[1, 0], [-1, 0], [0, 1], [0, -1]]
    b = [r for *_, r in cons] + [4, 4, 4, 4]
    res = simplex([c1, c2], a, b, free=[True, True])
    feasible = [(u, v) for u, v in itertools.product(BOX, BOX)
                if all(p * u + q * v <= r for p, q, r in cons)]
    if res.status == "infeasible":
        assert not feasible
        return
    assert res.status == "optimal"
    u, v = res.x
    assert all(p * u + q * v <= r for p, q, r in cons)
    assert all(res.value <= c1 * s + c2 * t for s, t in feasible)


@settings(max_examples=200, deadline=None)
@given(rows)
def test_integer_solve_against_grid(cons):
    q = Query()
    for p, r, c in cons:
        q.add(x * p + y * r - c)
    for v in (x, y):
        q.add(v - 4)
        q.add(-v - 4)
    res = solve(q, backend="internal")
    grid = [(u, v) for u, v in itertools.product(BOX, BOX)
            if all(p * u + r * v <= c for p, r, c in cons)]
    if res.status == "sat":
        assert q.replay(res.model)
    elif res.status == "unsat":
        assert not grid


def test_entails():
    phi = Constraint((gt(x, 0), lt(x, y)))
    assert entails(phi, gt(y, 1), backend="internal") == "yes"
    assert entails(phi, gt(y, 2), backend="internal") == "no"
    assert entails(Constraint((gt(x * x, 0),)), gt(x, 0), backend="internal") == "unknown"
    assert satisfiable(Constraint((gt(x, 0), lt(x, 1)))) == "unsat"
    assert satisfiable(Constraint((ge(x, 0), le(x, 0)))) == "sat"


def test_smtlib_text():
    q = Query()
    q.add(x - y + 1)
    q.declare("ρ1")
    text = to_smtlib(q)
    assert "(set-logic QF_LIA)" in text
    assert "(declare-fun x () Int)" in text
    assert "(check-sat)" in text
    assert "|ρ1|" in text


def test_parse_model():
    q = Query()
    q.add(x - y)
    reply = parse_sexp("sat (model (define-fun x () Int (- 3)) (define-fun y () Real (/ 1 2)))")
    assert reply[0] == "sat"
    assert parse_model(reply[1], q) == {"x": -3, "y": Fraction(1, 2)}
    with pytest.raises(SolverError):
        parse_sexp("(model")


@pytest.fixture
def fake_solver(tmp_path):
    def make(reply: str) -> str:
        script = tmp_path / "solver.py"
        script.write_text(f"import sys\nsys.stdin.read()\nprint({reply!r})\n")
        return f"{sys.executable} {script}"
    return make


def test_external_solver_round_trip(fake_solver):
    q = Query()
    q.add(x - 5)  # x <= 5
    good = fake_solver("sat\n(model (define-fun x () Int 2))")
    assert solve(q, backend="external", command=good).model == {"x": 2}
    # a model that does not replay is not trusted
    bad = fake_solver("sat\n(model (define-fun x () Int 9))")
    assert solve(q, backend="external", command=bad).status == "unknown"
    # auto falls back to the internal engine when the solver gives up
    unknown = fake_solver("unknown")
    assert solve(q, backend="auto", command=unknown).status == "sat"
    assert solve(q, backend="external", command=fake_solver("unsat")).status == "unsat"


def test_missing_solver():
    q = Query()
    q.add(x)
    with pytest.raises(SolverError):
        solve(q, backend="external", command="no-such-solver-binary")


def test_timeout(tmp_path):
    script = tmp_path / "slow.py"
    script.write_text("import time\ntime.sleep(5)\n")
    q = Query()
    q.add(x)
    assert solve(q, backend="external", command=f"{sys.executable} {script}",
                 timeout=0.3).status == "unknown"
