import json

import pytest

from rhobound import bounds as B
from rhobound.analysis import (AnalysisConfig, AnalysisState, analyze, entry_sets, json_report,
                               lift_runtime, location_sccs, pointwise_le, prove_termination,
                               text_report, worst_case_line)
from rhobound.interpreter import check_bounds
from rhobound.invariants import strengthen

from conftest import CORPUS
from rhobound import load

x = B.Var("x")


def test_entry_sets(facsum):
    es = entry_sets(facsum, {"t4", "t5"})
    assert es.direct == frozenset() and es.calling == {"t1"}
    es = entry_sets(facsum, {"t1"})
    assert es.direct == {"t0"} and es.calling == frozenset()
    with pytest.raises(ValueError):
        entry_sets(facsum, {"t0"})


def test_lift_fac_bound(facsum):
    # one entry through t1 calling f1 with a := x
    st = AnalysisState(facsum, {"t1": x}, sb={("ρ1", v): B.Var(v) if v != "a" else x for v in "axy"})
    lifted = lift_runtime(facsum, st, {"t4", "t5"}, {"f1": B.Var("a")})
    assert B.render(B.simplify(lifted)) == "x^2"


def test_location_sccs(facsum):
    groups = location_sccs(facsum)
    assert groups[0] == ["l0"]
    assert ["f1"] in groups and ["l1"] in groups


def test_facsum_runtime(facsum_result):
    rb = facsum_result.rb
    assert rb["t0"] == B.ONE
    assert B.render(rb["t1"]) == "x"
    assert B.render(rb["t2"]) == "1"
    assert B.render(rb["t5"]) == "x^2"
    assert worst_case_line(facsum_result) == "WORST_CASE(?, O(n^2))"
    assert facsum_result.blocking == []


def test_facsum_bounds_are_sound(facsum, facsum_result):
    assert check_bounds(facsum, facsum_result.rb, facsum_result.sb, trials=30, value_range=8) is None


@pytest.mark.parametrize("name, big_o", [
    ("fac", "n"), ("fib", "EXP"), ("facsum_assign", "n^2"), ("insertion", "n^2"),
    ("twn_log", "log(n)"), ("free_const", "1"), ("free_countdown", "n"),
    ("free_nested", "n^2"), ("free_sequential", "n"), ("free_doubling", "EXP"),
])
def test_corpus_classes(name, big_o):
    res = analyze(load(CORPUS / f"{name}.koat"))
    assert res.asymptotic.big_o() == big_o


def test_nonterminating():
    prog = load(CORPUS / "nonterm.koat")
    res = analyze(prog)
    assert res.rb["t1"] == B.W
    assert worst_case_line(res) == "WORST_CASE(?, ?)"
    assert res.blocking == ["t1"]
    assert prove_termination(prog) == "unknown"


def test_prove_termination(facsum):
    assert prove_termination(facsum) == "terminating"


def test_reports(facsum_result):
    doc = json.loads(json_report(facsum_result))
    assert doc["worst_case"] == "WORST_CASE(?, O(n^2))"
    assert {r["transition"] for r in doc["runtime"]} == {f"t{i}" for i in range(6)}
    text = text_report(facsum_result)
    assert text.splitlines()[0] == "WORST_CASE(?, O(n^2))"
    assert "RB(t5) = x^2" in text


def test_deterministic(facsum, facsum_result):
    again = analyze(facsum)
    assert text_report(again).split("Time:")[0] == text_report(facsum_result).split("Time:")[0]


def test_pointwise_le():
    samples = [{"x": v} for v in range(10)]
    assert pointwise_le(x, B.bprod(x, x), samples)
    assert not pointwise_le(B.bsum(x, 1), x, samples)
    assert pointwise_le(x, B.W, samples)


def test_without_invariants_still_sound(facsum):
    res = analyze(facsum, AnalysisConfig(use_invariants=False))
    assert check_bounds(facsum, res.rb, res.sb, trials=20, value_range=6) is None
