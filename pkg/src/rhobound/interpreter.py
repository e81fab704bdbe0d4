"""Concrete evaluation trees and the runtime/size soundness oracle.

A run grows an evaluation tree. A transition step appends a child along
the current frame; when the update mentions calls, the child state stays
undefined (``None``) and every call spawns a new frame. Once all callee
frames reach a return location, the undefined state is filled in
(eager instantiation). Only transition-labelled edges count as steps.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping

from .bounds import OMEGA, eval_bound
from .its import Program, Transition, make_state

DEFAULT_FUEL = 100_000
EVAL_CAP = 1 << (1 << 20)


@dataclass
class Node:
    id: int
    location: str
    state: dict | None  # None is the undefined state ⊥
    parent: int | None = None
    label: str | None = None  # transition or call id of the incoming edge
    frame: int = 0  # id of the first node of this node's frame chain

    def config(self) -> tuple:
        vals = None if self.state is None else tuple(self.state.values())
        return (self.location, vals)


@dataclass
class EvalTree:
    program: Program
    nodes: list = field(default_factory=list)
    t_child: dict = field(default_factory=dict)  # node -> child via transition
    call_children: dict = field(default_factory=dict)  # node -> [(call id, child)]
    tip: dict = field(default_factory=dict)  # frame root -> last node of chain
    waiting: dict = field(default_factory=dict)  # frame root -> ⊥ node that called it

    @staticmethod
    def start(program: Program, state: Mapping[str, int]) -> "EvalTree":
        tree = EvalTree(program)
        tree._add(program.initial, make_state(program, state), None, None, None)
        return tree

    def _add(self, loc, state, parent, label, frame) -> Node:
        n = Node(len(self.nodes), loc, state, parent, label)
        n.frame = n.id if frame is None else frame
        self.nodes.append(n)
        self.tip[n.frame] = n.id
        return n

    @property
    def root(self) -> Node:
        return self.nodes[0]

    def leaves(self) -> list:
        return [n for n in self.nodes if n.id not in self.t_child and n.id not in self.call_children]

    def edges(self):
        """(parent, label, child, kind) with kind 't' or 'call'."""
        for n in self.nodes[1:]:
            kind = "call" if n.frame == n.id else "t"
            yield self.nodes[n.parent], n.label, n, kind

    def step_t(self, node_id: int, t: Transition) -> Node:
        leaf = self.nodes[node_id]
        if node_id in self.t_child:
            raise ValueError("node already has a transition successor")
        if leaf.state is None:
            raise ValueError("cannot step from an undefined state")
        if t.source != leaf.location:
            raise ValueError(f"{t.id} does not start at {leaf.location}")
        if not t.guard.holds(leaf.state):
            raise ValueError(f"guard of {t.id} does not hold")
        sigma = leaf.state
        calls = sorted(t.calls(), key=_call_order)
        if not calls:
            new = {v: p.eval(sigma) for v, p in t.eta}
            child = self._add(t.target, new, node_id, t.id, leaf.frame)
            self.t_child[node_id] = child.id
            return child
        child = self._add(t.target, None, node_id, t.id, leaf.frame)
        self.t_child[node_id] = child.id
        kids = []
        for cid in calls:
            c = self.program.call(cid)
            st = {v: p.eval(sigma) for v, p in c.zeta}
            k = self._add(c.target, st, node_id, cid, None)
            self.waiting[k.id] = child.id
            kids.append((cid, k.id))
        self.call_children[node_id] = kids
        return child

    def returned_value(self, frame_root: int):
        """Return value of a finished callee frame, or None if still running."""
        end = self.nodes[self.tip[frame_root]]
        ret = self.program.return_var
        if end.location in ret and end.state is not None:
            return end.state[ret[end.location]]
        return None

    def step_eps(self, node_id: int) -> bool:
        """Instantiate a ⊥ node once every callee frame has returned."""
        node = self.nodes[node_id]
        if node.state is not None:
            raise ValueError("node state is already defined")
        parent = self.nodes[node.parent]
        kids = self.call_children.get(parent.id)
        if not kids:
            raise ValueError("node was not produced by a calling transition")
        results = {}
        for cid, k in kids:
            val = self.returned_value(k)
            if val is None:
                return False
            results[cid] = val
        t = self.program.transition(node.label)
        env = dict(parent.state)
        env.update(results)
        node.state = {v: p.eval(env) for v, p in t.eta}
        return True


def _call_order(cid: str) -> int:
    return int(cid[1:])


@dataclass(frozen=True)
class Scheduler:
    strategy: str = "first"  # "first" or "random"
    seed: int = 0
    fuel: int = DEFAULT_FUEL


@dataclass
class RunResult:
    tree: EvalTree
    edge_counts: dict
    call_counts: dict
    exhausted: bool

    @property
    def total(self) -> int:
        return sum(self.edge_counts.values())


def run(program: Program, state, sched: Scheduler | None = None) -> RunResult:
    sched = sched or Scheduler()
    rng = random.Random(sched.seed)
    tree = EvalTree.start(program, state)
    edge_counts = {t.id: 0 for t in program.transitions}
    call_counts = {c.id: 0 for c in program.calls}
    outgoing = {loc: program.outgoing(loc) for loc in program.locations}
    ret = program.return_var
    # frames whose tip is defined and not yet known to be stuck
    active = [0]
    steps = 0
    exhausted = False
    while active:
        if steps >= sched.fuel:
            exhausted = True
            break
        if sched.strategy == "random":
            idx = rng.randrange(len(active))
        else:
            idx = len(active) - 1
        frame = active[idx]
        tip = tree.nodes[tree.tip[frame]]
        enabled = [t for t in outgoing[tip.location] if t.guard.holds(tip.state)]
        if not enabled:
            active.pop(idx)
            continue
        t = rng.choice(enabled) if sched.strategy == "random" else enabled[0]
        child = tree.step_t(tip.id, t)
        steps += 1
        edge_counts[t.id] += 1
        for cid, k in tree.call_children.get(tip.id, []):
            call_counts[cid] += 1
        if child.state is None:
            active.pop(idx)
            for _, k in tree.call_children[tip.id]:
                active.append(k)
            continue
        # frame finished: propagate returns upwards while callers become ready
        node = child
        while node.location in ret and node.state is not None and node.frame in tree.waiting:
            if node.frame in active:
                active.remove(node.frame)
            pending = tree.nodes[tree.waiting[node.frame]]
            if not tree.step_eps(pending.id):
                break
            node = pending
            if node.location not in ret:
                active.append(node.frame)
    return RunResult(tree, edge_counts, call_counts, exhausted)


@dataclass(frozen=True)
class Counterexample:
    initial: dict
    item: str  # transition or call id
    variable: str | None  # None for a runtime violation
    observed: int
    bound: object
    seed: int

    def __str__(self) -> str:
        what = f"RB({self.item})" if self.variable is None else f"SB({self.item},{self.variable})"
        return (f"{what} violated from {self.initial} (seed {self.seed}): "
                f"observed {self.observed} > {self.bound}")


def check_run(program: Program, res: RunResult, rb: Mapping, sb: Mapping, seed: int = 0):
    """First bound violated by one finished run, or None."""
    sigma0 = res.tree.root.state
    absenv = {v: abs(x) for v, x in sigma0.items()}
    cache = {}

    def bound_val(key, b):
        if key not in cache:
            cache[key] = eval_bound(b, absenv, EVAL_CAP)
        return cache[key]

    for tid, n in res.edge_counts.items():
        b = rb.get(tid)
        if b is None:
            continue
        val = bound_val(("rb", tid), b)
        if val is not OMEGA and n > val:
            return Counterexample(dict(sigma0), tid, None, n, val, seed)
    if sb:
        for _, label, child, _ in res.tree.edges():
            if child.state is None:
                continue
            for v, x in child.state.items():
                b = sb.get((label, v))
                if b is None:
                    continue
                val = bound_val(("sb", label, v), b)
                if val is not OMEGA and abs(x) > val:
                    return Counterexample(dict(sigma0), label, v, abs(x), val, seed)
    return None


def check_bounds(program: Program, rb: Mapping, sb: Mapping, trials: int = 100,
                 value_range: int = 16, seeds=(0, 1, 2), seed: int = 0,
                 fuel: int = 20_000):
    """Fuzz the bounds against concrete runs; returns a Counterexample or None."""
    rng = random.Random(seed)
    for _ in range(trials):
        sigma0 = {v: rng.randint(-value_range, value_range) for v in program.variables}
        for s in seeds:
            strategy = "first" if s == seeds[0] else "random"
            res = run(program, sigma0, Scheduler(strategy, s, fuel))
            cex = check_run(program, res, rb, sb, s)
            if cex:
                return cex
    return None


def to_dot(tree: EvalTree) -> str:
    lines = ["digraph evaltree {", "  node [shape=box];"]
    for n in tree.nodes:
        if n.state is None:
            label = f"{n.location} ⊥"
        else:
            label = f"{n.location} ({','.join(str(x) for x in n.state.values())})"
        lines.append(f'  n{n.id} [label="{label}"];')
    for parent, label, child, kind in tree.edges():
        style = "" if kind == "t" else ", style=dashed"
        lines.append(f'  n{parent.id} -> n{child.id} [label="{label}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
