#!/usr/bin/env python3
"""Print one PASS/FAIL line per acceptance criterion."""
import runpy
import sys
from pathlib import Path

if __name__ == "__main__":
    path = Path(__file__).resolve().parents[1] / "tests" / "test_acceptance.py"
    sys.exit(runpy.run_path(str(path))["main"]())
