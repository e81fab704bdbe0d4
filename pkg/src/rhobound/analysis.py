"""Alternating runtime/size bound inference over a whole program."""
from __future__ import annotations

import itertools
import json
import random
import time
from dataclasses import dataclass, field
from typing import Mapping

import networkx as nx

from . import bounds as B
from . import ranking, twn
from . import sizebounds as S
from .interpreter import EVAL_CAP
from .invariants import strengthen
from .its import Program, funs, locations_of, trans_of


@dataclass(frozen=True)
class AnalysisConfig:
    sweeps: int = 5
    backend: str = "internal"
    refine_scale: bool = True  # size-bound exponents from local runtime bounds
    use_invariants: bool = True
    techniques: tuple = ("twn", "rf", "rho-rf")
    compare_samples: int = 200
    seed: int = 0


@dataclass(frozen=True)
class EntrySets:
    direct: frozenset  # transitions entering a location of the subprogram
    calling: frozenset  # transitions whose calls target a location of the subprogram


@dataclass(frozen=True)
class LocalBound:
    subprogram: frozenset
    technique: str
    bounds: tuple  # ((location, Bound), ...)
    witness: object = None

    def at(self, loc: str) -> B.Bound:
        return dict(self.bounds).get(loc, B.ZERO)


@dataclass
class AnalysisState:
    program: Program
    rb: dict
    sb: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    sb_rule: dict = field(default_factory=dict)
    local: dict = field(default_factory=dict)  # tid -> [LocalBound]


@dataclass
class AnalysisResult:
    state: AnalysisState
    overall: B.Bound
    asymptotic: B.AsymptoticClass
    seconds: float
    blocking: list

    @property
    def rb(self) -> dict:
        return self.state.rb

    @property
    def sb(self) -> dict:
        return self.state.sb


# --- entry sets and lifting ---------------------------------------------------

def entry_sets(prog: Program, tprime) -> EntrySets:
    tprime = frozenset(tprime)
    if not tprime:
        raise ValueError("subprogram must be nonempty")
    initial = {t.id for t in prog.initial_transitions()}
    if tprime & initial:
        raise ValueError("subprogram contains an initial transition")
    locs = locations_of(prog, tprime)
    loc_calls = funs(prog, locs)
    direct = frozenset(t.id for t in prog.transitions if t.id not in tprime and t.target in locs)
    calling = frozenset(t.id for t in prog.transitions
                        if t.id not in tprime and t.calls() & loc_calls)
    return EntrySets(direct, calling)


def _entry_points(prog: Program, tprime) -> list:
    """(runtime item, size item, entry location) for every way into the subprogram."""
    es = entry_sets(prog, tprime)
    locs = locations_of(prog, tprime)
    out = []
    for r in sorted(es.direct, key=S.item_key):
        out.append((r, r, prog.transition(r).target))
    for r in sorted(es.calling, key=S.item_key):
        for rho in sorted(prog.transition(r).calls(), key=S.item_key):
            c = prog.call(rho)
            if c.target in locs:
                out.append((r, rho, c.target))
    return out


def _at_entry(prog: Program, local: B.Bound, size_item: str, sb: Mapping) -> B.Bound:
    return B.subst(local, {v: sb.get((size_item, v), B.W) for v in prog.variables})


def lift_runtime(prog: Program, state: AnalysisState, tprime, rtloc: Mapping) -> B.Bound:
    terms = []
    for r, size_item, loc in _entry_points(prog, tprime):
        local = rtloc.get(loc, B.ZERO)
        terms.append(B.bprod(state.rb.get(r, B.W), _at_entry(prog, local, size_item, state.sb)))
    return B.bsum(*terms)


def overall_rc(state: AnalysisState) -> B.Bound:
    ids = sorted(state.rb, key=S.item_key)
    return B.bsum(*(state.rb[t] for t in ids))


# --- local bounds -------------------------------------------------------------

def location_sccs(prog: Program) -> list:
    """Location SCCs in topological order; call edges count as edges."""
    g = nx.DiGraph()
    g.add_nodes_from(prog.locations)
    for t in prog.transitions:
        g.add_edge(t.source, t.target)
        for rho in t.calls():
            g.add_edge(t.source, prog.call(rho).target)
    cond = nx.condensation(g)
    groups: dict = {}
    for node, c in cond.graph["mapping"].items():
        groups.setdefault(c, []).append(node)
    pos = {loc: i for i, loc in enumerate(prog.locations)}
    order = nx.lexicographical_topological_sort(cond, key=lambda c: min(pos[l] for l in groups[c]))
    return [sorted(groups[c], key=pos.get) for c in order]


def _candidates(prog: Program, group: list) -> list:
    if len(group) == 1:
        return [frozenset(group)]
    return [frozenset(group)] + [frozenset([t]) for t in group]


def local_bound(prog: Program, tprime: frozenset, t: str, technique: str) -> LocalBound | None:
    sub = ranking.recursive_parts(prog, tprime)
    if technique == "twn":
        if len(tprime) != 1:
            return None
        loop = twn.as_twn(prog.transition(t))
        if loop is None:
            return None
        tb = twn.twn_bounds(loop)
        b = tb.log if tb.log is not None else tb.poly
        if b is None:
            return None
        return LocalBound(tprime, "twn", ((prog.transition(t).source, b),), tb)
    if technique == "rf":
        if sub.rec_calls:
            return None
        rf = ranking.synthesize_rf(prog, tprime, t)
        if rf is None:
            return None
        return LocalBound(tprime, "rf", tuple((loc, ranking.local_bound_from_rf(rf, loc))
                                              for loc in sorted(sub.locations)), rf)
    if technique == "rho-rf":
        if not sub.rec_calls:
            return None
        triple = ranking.synthesize_rho_rf(prog, tprime, t)
        if triple is None:
            return None
        return LocalBound(tprime, "rho-rf",
                          tuple((loc, ranking.local_bound_from_rho_rf(triple, loc, sub.nfc))
                                for loc in sorted(sub.locations)), triple)
    raise ValueError(f"unknown technique {technique}")


# --- comparing bounds ---------------------------------------------------------

def _samples(prog: Program, cfg: AnalysisConfig) -> list:
    vs = list(prog.variables)
    grid = list(itertools.product(range(0, 5), repeat=len(vs)))
    if len(grid) > cfg.compare_samples:
        rng = random.Random(cfg.seed)
        grid = [tuple(rng.randint(0, 12) for _ in vs) for _ in range(cfg.compare_samples)]
    return [dict(zip(vs, g)) for g in grid]


def pointwise_le(a: B.Bound, b: B.Bound, samples: list) -> bool:
    for env in samples:
        x = B.eval_bound(a, env, EVAL_CAP)
        y = B.eval_bound(b, env, EVAL_CAP)
        if not B.o_le(x, y):
            return False
    return True


def _better(new: B.Bound, old: B.Bound, samples: list) -> bool:
    if not B.is_finite(new):
        return False
    if not B.is_finite(old):
        return True
    return new != old and pointwise_le(new, old, samples) and not pointwise_le(old, new, samples)


# --- the driver ---------------------------------------------------------------

def _exponent_hook(prog: Program, state: AnalysisState):
    """Lifted local bound of the SCC's transition, valid when the SCC stays inside it."""

    def hook(comp, alpha, sb):
        item = alpha[0]
        tids = sorted(trans_of(prog, item), key=S.item_key) if item.startswith("ρ") else [item]
        if len(tids) != 1:
            return None
        comp_items = {a[0] for a in comp}
        for lb in state.local.get(tids[0], []):
            sub = ranking.recursive_parts(prog, lb.subprogram)
            if not comp_items <= set(lb.subprogram) | set(sub.rec_calls):
                continue
            parts = [_at_entry(prog, lb.at(loc), size_item, sb)
                     for _, size_item, loc in _entry_points(prog, lb.subprogram)]
            out = B.bmax(*parts)
            if B.is_finite(out):
                return out
        return None

    return hook


def _refresh_sizes(ctx, state: AnalysisState, cfg: AnalysisConfig) -> None:
    hook = _exponent_hook(ctx.program, state) if cfg.refine_scale else None
    state.sb, state.sb_rule = S.size_bounds(ctx, state.rb, hook)


def analyze(program: Program, cfg: AnalysisConfig | None = None) -> AnalysisResult:
    cfg = cfg or AnalysisConfig()
    start = time.perf_counter()
    prog = strengthen(program) if cfg.use_invariants else program
    initial = {t.id for t in prog.initial_transitions()}
    rb = {t.id: (B.ONE if t.id in initial else B.W) for t in prog.transitions}
    state = AnalysisState(prog, rb)
    state.provenance = {t: ("initial" if t in initial else "none") for t in rb}
    ctx = S.prepare(prog, cfg.backend)
    _refresh_sizes(ctx, state, cfg)
    samples = _samples(prog, cfg)
    groups = []
    for scc in location_sccs(prog):
        members = set(scc)
        ts = [t.id for t in prog.transitions if t.source in members and t.id not in initial]
        if ts:
            groups.append(sorted(ts, key=S.item_key))
    found: dict = {}
    for _ in range(cfg.sweeps):
        changed = False
        for group in groups:
            for t in group:
                for tprime in _candidates(prog, group):
                    if t not in tprime:
                        continue
                    key = (t, tprime)
                    if key not in found:
                        found[key] = [lb for tech in cfg.techniques
                                      if (lb := local_bound(prog, tprime, t, tech)) is not None]
                        state.local.setdefault(t, []).extend(found[key])
                    for lb in found[key]:
                        lifted = B.simplify(lift_runtime(prog, state, tprime, dict(lb.bounds)))
                        if _better(lifted, state.rb[t], samples):
                            state.rb[t] = lifted
                            state.provenance[t] = f"{lb.technique} on {{{', '.join(sorted(tprime, key=S.item_key))}}}"
                            changed = True
                            _refresh_sizes(ctx, state, cfg)
        if not changed:
            break
    overall = B.simplify(overall_rc(state))
    blocking = [t for t in sorted(state.rb, key=S.item_key) if not B.is_finite(state.rb[t])]
    return AnalysisResult(state, overall, B.asymptotic_class(overall),
                          time.perf_counter() - start, blocking)


def prove_termination(program: Program, cfg: AnalysisConfig | None = None) -> str:
    """'terminating' when every transition gets a finite runtime bound."""
    cfg = cfg or AnalysisConfig()
    res = analyze(program, AnalysisConfig(**{**cfg.__dict__, "sweeps": max(cfg.sweeps, 1)}))
    return "terminating" if not res.blocking else "unknown"


# --- reports ------------------------------------------------------------------

def worst_case_line(res: AnalysisResult) -> str:
    cls = res.asymptotic
    if cls.kind == "Omega":
        return "WORST_CASE(?, ?)"
    return f"WORST_CASE(?, O({cls.big_o()}))"


def text_report(res: AnalysisResult) -> str:
    st = res.state
    lines = [worst_case_line(res), "", "Runtime bounds:"]
    for t in sorted(st.rb, key=S.item_key):
        lines.append(f"  RB({t}) = {B.render(st.rb[t])}    [{st.provenance[t]}]")
    lines.append("")
    lines.append("Size bounds:")
    for alpha in sorted(st.sb, key=S.rv_key):
        lines.append(f"  SB({alpha[0]},{alpha[1]}) = {B.render(st.sb[alpha])}    [{st.sb_rule[alpha]}]")
    lines.append("")
    lines.append(f"Overall: {B.render(res.overall)}")
    lines.append(f"Class: {res.asymptotic.big_o()}")
    if res.blocking:
        lines.append(f"Unbounded: {', '.join(res.blocking)}")
    lines.append(f"Time: {res.seconds:.2f}s")
    return "\n".join(lines) + "\n"


def json_report(res: AnalysisResult) -> str:
    st = res.state
    doc = {
        "worst_case": worst_case_line(res),
        "overall": B.render(res.overall),
        "class": res.asymptotic.big_o(),
        "runtime": [{"transition": t, "bound": B.render(st.rb[t]), "rule": st.provenance[t]}
                    for t in sorted(st.rb, key=S.item_key)],
        "size": [{"item": a[0], "variable": a[1], "bound": B.render(st.sb[a]), "rule": st.sb_rule[a]}
                 for a in sorted(st.sb, key=S.rv_key)],
        "unbounded": res.blocking,
        "seconds": round(res.seconds, 3),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
