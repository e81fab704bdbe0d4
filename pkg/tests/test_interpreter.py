"""Evaluation trees, checked against a separate big-step re-simulation."""
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from rhobound import bounds as B
from rhobound.interpreter import Scheduler, check_bounds, check_run, run, to_dot
from rhobound.its import is_call_symbol

from conftest import corpus_files
from rhobound import load


def big_step(prog, loc, state, counts, depth=0, budget=None):
    """Independent recursive evaluator: first enabled transition, calls evaluated eagerly.

    Returns the final (location, state), or None when some callee never returns."""
    budget = budget if budget is not None else [20_000]
    ret = prog.return_var
    while True:
        enabled = [t for t in prog.outgoing(loc) if t.guard.holds(state)]
        if not enabled:
            return loc, state
        budget[0] -= 1
        if budget[0] < 0:
            raise RuntimeError("out of budget")
        t = enabled[0]
        counts[t.id] += 1
        env = dict(state)
        stuck = False
        for cid in sorted(t.calls(), key=lambda c: int(c[1:])):
            c = prog.call(cid)
            sub = {v: p.eval(state) for v, p in c.zeta}
            end = big_step(prog, c.target, sub, counts, depth + 1, budget)
            if end is None or end[0] not in ret:
                stuck = True
                continue
            env[cid] = end[1][ret[end[0]]]
        if stuck:
            return None
        state = {v: p.eval(env) for v, p in t.eta}
        loc = t.target


def configs(res):
    return {n.config() for n in res.tree.nodes}


def test_facsum_run_from_small_state(facsum):
    res = run(facsum, {"a": 0, "x": 2, "y": 0})
    cs = configs(res)
    assert ("f1", (2, 2, 0)) in cs
    assert ("f2", (2, 2, 0)) in cs
    assert ("f2", (1, 2, 0)) in cs
    # the pending state after the first t1 step, once both callees returned
    first_t1 = next(n for n in res.tree.nodes if n.label == "t1")
    assert first_t1.location == "l1" and first_t1.state == {"a": 0, "x": 1, "y": 2}
    assert not res.exhausted
    counts = Counter()
    big_step(facsum, facsum.initial, {"a": 0, "x": 2, "y": 0}, counts)
    assert res.total == sum(counts.values()) == 12
    assert {k: v for k, v in res.edge_counts.items() if v} == dict(counts)


def test_only_t_edges_are_counted(facsum):
    res = run(facsum, {"a": 0, "x": 2, "y": 0})
    kinds = Counter(kind for *_, kind in res.tree.edges())
    assert kinds["t"] == res.total
    assert kinds["call"] == sum(res.call_counts.values()) == 5


TERMINATING = [p for p in corpus_files() if p.stem not in ("nonterm",)]


@pytest.mark.parametrize("path", TERMINATING, ids=lambda p: p.stem)
def test_matches_big_step(path):
    prog = load(path)
    for vals in [(-1, 0, 2), (3, 1, 0), (2, 2, 2), (4, 0, 5)]:
        sigma = dict(zip(prog.variables, vals + (0,) * len(prog.variables)))
        counts = Counter()
        try:
            big_step(prog, prog.initial, sigma, counts)
        except RuntimeError:
            continue
        res = run(prog, sigma)
        assert {k: v for k, v in res.edge_counts.items() if v} == dict(counts)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 4), st.integers(-3, 4), st.integers(-3, 20), st.integers(0, 10**6))
def test_schedule_independent_counts(facsum, a, x, y, seed):
    # every guard in the example is deterministic, so the interleaving cannot matter
    sigma = {"a": a, "x": x, "y": y}
    first = run(facsum, sigma)
    rnd = run(facsum, sigma, Scheduler("random", seed))
    assert first.edge_counts == rnd.edge_counts


def test_nonterminating_runs_out_of_fuel():
    prog = load(TERMINATING[0].parent / "nonterm.koat")
    res = run(prog, {"x": 1}, Scheduler(fuel=50))
    assert res.exhausted and res.total == 50


def test_check_run_flags_violation(facsum):
    res = run(facsum, {"a": 0, "x": 2, "y": 0})
    rb = {t.id: B.W for t in facsum.transitions}
    assert check_run(facsum, res, rb, {}) is None
    rb["t3"] = B.ONE
    cex = check_run(facsum, res, rb, {})
    assert cex.item == "t3" and cex.observed == 3
    assert check_bounds(facsum, rb, {}, trials=20, value_range=4) is not None


def test_dot_lists_configurations(facsum):
    text = to_dot(run(facsum, {"a": 0, "x": 2, "y": 0}).tree)
    assert text.startswith("digraph")
    assert "f2 (2,2,0)" in text
    assert "style=dashed" in text


def test_rejects_partial_state(facsum):
    with pytest.raises(ValueError):
        run(facsum, {"x": 1})
