"""Runtime and size bounds for integer transition systems with calls."""
from .analysis import AnalysisConfig, analyze, prove_termination
from .bounds import asymptotic_class, render
from .interpreter import check_bounds, run
from .parser import ParseError, load, parse, pretty_print

__all__ = [
    "AnalysisConfig", "ParseError", "analyze", "asymptotic_class", "check_bounds",
    "load", "parse", "pretty_print", "prove_termination", "render", "run",
]
