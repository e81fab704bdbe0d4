import itertools
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from rhobound import bounds as B
from rhobound import ranking as R
from rhobound.interpreter import Scheduler, run
from rhobound.invariants import strengthen
from rhobound.its import Polynomial

from conftest import corpus_files
from rhobound import load


def restricted_count(prog, tprime, start, sigma, t, fuel=5000):
    """Occurrences of t when only T' (and the returns of its calls) may run."""
    sub = replace(prog, initial=start,
                  transitions=tuple(tr for tr in prog.transitions if tr.id in tprime))
    res = run(sub, sigma, Scheduler(fuel=fuel))
    return None if res.exhausted else res.edge_counts.get(t, 0)


def test_subprogram_parts(facsum):
    sub = R.recursive_parts(facsum, {"t4", "t5"})
    assert sub.locations == {"f1"}
    assert sub.rec_calls == {"ρ2"}
    assert sub.rec_transitions == {"t5"}
    assert sub.nfc == 1
    assert R.recursive_parts(facsum, {"t1"}).rec_calls == frozenset()
    with pytest.raises(ValueError):
        R.recursive_parts(facsum, set())


def test_rho_rf_fac(facsum):
    prog = strengthen(facsum)
    triple = R.synthesize_rho_rf(prog, {"t4", "t5"}, "t5")
    assert triple is not None
    assert B.render(R.local_bound_from_rf(triple.rf, "f1")) == "a"
    assert B.render(R.local_bound_from_rf(triple.rd, "f1")) == "0"
    # the whole local bound, with nfc = 1, also simplifies to a
    assert B.render(R.local_bound_from_rho_rf(triple, "f1", 1)) == "a"


def test_rf_first_loop(facsum):
    rf = R.synthesize_rf(strengthen(facsum), {"t1"}, "t1")
    assert B.render(R.local_bound_from_rf(rf, "l1")) == "x"
    with pytest.raises(ValueError):
        R.synthesize_rf(facsum, {"t4", "t5"}, "t5")


def test_no_rf_for_divergent_loop():
    prog = load(corpus_files()[0].parent / "nonterm.koat")
    assert R.synthesize_rf(prog, {"t1"}, "t1") is None


def test_no_rf_for_exponential_loop(facsum):
    # t3 needs a logarithmic bound, no linear function decreases on it
    assert R.synthesize_rf(strengthen(facsum), {"t3"}, "t3") is None


def test_recurrence_closed_form():
    for n0, n1, n2, nfc in itertools.product(range(9), range(9), range(9), range(4)):
        val = R.recurrence_oracle(n0, n1, n2, nfc)
        assert val <= R.recurrence_closed_form(n0, n1, n2, nfc)
        if nfc == 1:
            assert val <= n0 + n2 * (1 + 2 * n0) * n1 ** n2


def _cases():
    out = []
    for path in corpus_files():
        prog = strengthen(load(path))
        for t in prog.transitions:
            if t.source == prog.initial:
                continue
            for tprime in ({t.id}, {u.id for u in prog.transitions
                                    if u.source == t.source or u.target == t.source} - {u.id for u in prog.initial_transitions()}):
                out.append((path.stem, prog, frozenset(tprime), t.id))
    return out


CASES = _cases()


@pytest.mark.parametrize("name,prog,tprime,t", CASES,
                         ids=[f"{c[0]}-{c[3]}-{'+'.join(sorted(c[2]))}" for c in CASES])
def test_certificates_replay(name, prog, tprime, t):
    sub = R.recursive_parts(prog, tprime)
    if sub.rec_calls:
        out = R.synthesize_rho_rf(prog, tprime, t, with_certificate=True)
    else:
        out = R.synthesize_rf(prog, tprime, t, with_certificate=True)
    if out is None:
        return
    obj, cert = out
    m = R.as_map(obj)
    rho = bool(sub.rec_calls)
    assert R.replay_certificate(prog, tprime, t, m, cert, rho)
    assert R.verify(prog, tprime, t, m, rho)
    # semantic check of the local bound from random states at T' locations
    rng = random.Random(0)
    for _ in range(40):
        start = rng.choice(sorted(sub.locations))
        sigma = {v: rng.randint(-6, 6) for v in prog.variables}
        n = restricted_count(prog, tprime, start, sigma, t)
        if n is None:
            continue
        bound = R.local_bound_from_rho_rf(obj, start, sub.nfc) if rho else R.local_bound_from_rf(obj, start)
        assert n <= B.eval_bound(bound, {v: abs(x) for v, x in sigma.items()})


def test_mutated_coefficient_is_rejected(facsum):
    prog = strengthen(facsum)
    triple, cert = R.synthesize_rho_rf(prog, {"t4", "t5"}, "t5", with_certificate=True)
    m = R.as_map(triple)
    assert R.replay_certificate(prog, {"t4", "t5"}, "t5", m, cert)
    bad = dict(m)
    bad["f"] = R.LinearRF(tuple((loc, p * 2) for loc, p in triple.rf.values))
    assert not R.replay_certificate(prog, {"t4", "t5"}, "t5", bad, cert)
    zero = dict(m)
    zero["f"] = R.LinearRF(tuple((loc, Polynomial()) for loc, _ in triple.rf.values))
    assert not R.replay_certificate(prog, {"t4", "t5"}, "t5", zero, cert)
    assert not R.verify(prog, {"t4", "t5"}, "t5", zero)

    rf, cert1 = R.synthesize_rf(prog, {"t1"}, "t1", with_certificate=True)
    mutated = {"d": R.LinearRF(tuple((loc, p + Polynomial.var("y")) for loc, p in rf.values))}
    assert not R.replay_certificate(prog, {"t1"}, "t1", mutated, cert1, rho=False)
