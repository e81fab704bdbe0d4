import json
import subprocess
import sys

import pytest

from rhobound.cli import EXIT_COUNTEREXAMPLE, EXIT_INPUT, EXIT_OK, EXIT_UNBOUNDED, main

from conftest import CORPUS

FACSUM = str(CORPUS / "facsum.koat")


def test_analyze_ok(capsys):
    assert main(["analyze", FACSUM]) == EXIT_OK
    assert capsys.readouterr().out.startswith("WORST_CASE(?, O(n^2))")


def test_analyze_json(capsys):
    assert main(["analyze", FACSUM, "--format", "json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["class"] == "n^2"


def test_empty_rules(tmp_path, capsys):
    f = tmp_path / "empty.koat"
    f.write_text("(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n)\n")
    assert main(["analyze", str(f)]) == EXIT_INPUT
    assert "no RULES" in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["analyze", "/nonexistent/file.koat"]) == EXIT_INPUT


def test_unbounded(capsys):
    assert main(["analyze", str(CORPUS / "nonterm.koat")]) == EXIT_UNBOUNDED
    assert "WORST_CASE(?, ?)" in capsys.readouterr().out


def test_check_and_inject(capsys):
    assert main(["check", FACSUM, "--trials", "20", "--range", "6"]) == EXIT_OK
    assert main(["check", FACSUM, "--trials", "20", "--range", "6", "--inject", "t1"]) == EXIT_COUNTEREXAMPLE
    assert "RB(t1) violated" in capsys.readouterr().out
    assert main(["check", FACSUM, "--inject", "t99"]) == EXIT_INPUT


def test_run_dot(capsys):
    assert main(["run", FACSUM, "--init", "a=0,x=2,y=0", "--dot"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "total: 12" in out
    assert "f2 (2,2,0)" in out


def test_run_bad_init(capsys):
    assert main(["run", FACSUM, "--init", "a=0,x"]) == EXIT_INPUT
    assert main(["run", FACSUM, "--init", "a=0"]) == EXIT_INPUT


def test_graph_is_stable():
    cmd = [sys.executable, "-m", "rhobound", "graph", FACSUM]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second
    assert b'"t5,a" -> "t1,y" [style=dashed, color=red]' in first


def test_graph_call_free(capsys):
    assert main(["graph", str(CORPUS / "free_nested.koat")]) == EXIT_OK
    assert "dashed" not in capsys.readouterr().out


def test_missing_solver_is_input_error(capsys, monkeypatch):
    # the flag is exported through the environment; let monkeypatch restore it
    monkeypatch.delenv("RHOBOUND_SMT", raising=False)
    monkeypatch.delenv("RHOBOUND_SMT_TIMEOUT", raising=False)
    assert main(["analyze", FACSUM, "--smt", "no-such-solver-binary"]) == EXIT_INPUT
