"""Reader and printer for the ``.koat``-style program format.

Example::

    (GOAL COMPLEXITY)
    (STARTTERM (FUNCTIONSYMBOLS l0))
    (VAR a x y)
    (RETURN f2 a)
    (RULES
      l0(a,x,y) -> l1(a,x,y)
      l1(a,x,y) -> l1(a, x-1, y + @f1(x,x,y)) :|: x > 0
    )

``@f(e1,...,ed)`` inside a right-hand side is a function call whose
argument map follows the VAR order. Guards use ``<, <=, =, !=, >=, >`` joined
by ``&&``; a ``!=`` atom splits its rule into two transitions.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .its import (
    Atom,
    Constraint,
    FunctionCall,
    Polynomial,
    Program,
    Transition,
    is_call_symbol,
    validate,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan | None = None):
        self.message = message
        self.span = span
        super().__init__(f"{span}: {message}" if span else message)


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_'.]*)
  | (?P<op>->|:\|:|&&|<=|>=|!=|==|[-+*^(),<>=@])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan


def tokenize(text: str, file: str = "<input>") -> list:
    toks = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", SourceSpan(file, line, col))
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            toks.append(Token(kind, chunk, SourceSpan(file, line, col)))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    toks.append(Token("eof", "", SourceSpan(file, line, col)))
    return toks


class _Parser:
    def __init__(self, text: str, file: str):
        self.file = file
        self.toks = tokenize(text, file)
        self.i = 0
        self.variables: list = []
        self.initial: str | None = None
        self.returns: list = []
        self.extra_locations: list = []
        self.rules: list = []  # (source, target, guard atoms, ne pairs, rhs exprs, span)

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            shown = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {shown!r}", t.span)
        return self.next()

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected identifier, found {t.text or 'end of input'!r}", t.span)
        self.next()
        return t.text

    # top level
    def parse(self):
        while self.peek().kind != "eof":
            self.expect("(")
            kw = self.ident()
            if kw == "GOAL":
                self.ident()
                self.expect(")")
            elif kw == "STARTTERM":
                self.expect("(")
                if self.ident() != "FUNCTIONSYMBOLS":
                    raise ParseError("expected FUNCTIONSYMBOLS", self.toks[self.i - 1].span)
                self.initial = self.ident()
                self.expect(")")
                self.expect(")")
            elif kw == "VAR":
                while self.peek().kind == "ident":
                    self.variables.append(self.ident())
                self.expect(")")
            elif kw == "RETURN":
                span = self.peek().span
                loc = self.ident()
                var = self.ident()
                self.returns.append((loc, var, span))
                self.expect(")")
            elif kw == "LOCATIONS":
                while self.peek().kind == "ident":
                    self.extra_locations.append(self.ident())
                self.expect(")")
            elif kw == "RULES":
                while self.peek().text != ")":
                    if self.peek().kind == "eof":
                        raise ParseError("expected ')' closing RULES", self.peek().span)
                    self.rule()
                self.expect(")")
            else:
                raise ParseError(f"unknown section {kw}", self.toks[self.i - 1].span)

    def rule(self):
        span = self.peek().span
        src = self.ident()
        self.expect("(")
        params = []
        if self.peek().text != ")":
            params.append(self.ident())
            while self.peek().text == ",":
                self.next()
                params.append(self.ident())
        self.expect(")")
        if len(params) != len(self.variables):
            raise ParseError(f"{src} expects {len(self.variables)} arguments, got {len(params)}", span)
        if len(set(params)) != len(params):
            raise ParseError("repeated parameter on left-hand side", span)
        self.scope = dict(zip(params, self.variables))
        self.expect("->")
        tgt = self.ident()
        self.expect("(")
        rhs = []
        if self.peek().text != ")":
            rhs.append(self.expr(allow_calls=True))
            while self.peek().text == ",":
                self.next()
                rhs.append(self.expr(allow_calls=True))
        self.expect(")")
        if len(rhs) != len(self.variables):
            raise ParseError(f"{tgt} expects {len(self.variables)} arguments, got {len(rhs)}", span)
        atoms, nes = [], []
        if self.peek().text == ":|:":
            self.next()
            self.guard_atom(atoms, nes)
            while self.peek().text == "&&":
                self.next()
                self.guard_atom(atoms, nes)
        self.rules.append((src, tgt, atoms, nes, rhs, span))

    def guard_atom(self, atoms: list, nes: list):
        if self.peek().kind == "ident" and self.peek().text in ("TRUE", "true"):
            self.next()
            return
        lhs = self.expr(allow_calls=False)
        op = self.next()
        rhs = self.expr(allow_calls=False)
        if op.text == "<":
            atoms.append(Atom(lhs, rhs))
        elif op.text == "<=":
            atoms.append(Atom(lhs, rhs + 1))
        elif op.text == ">":
            atoms.append(Atom(rhs, lhs))
        elif op.text == ">=":
            atoms.append(Atom(rhs, lhs + 1))
        elif op.text in ("=", "=="):
            atoms.append(Atom(lhs, rhs + 1))
            atoms.append(Atom(rhs, lhs + 1))
        elif op.text == "!=":
            nes.append((Atom(lhs, rhs), Atom(rhs, lhs)))
        else:
            raise ParseError(f"expected comparison, found {op.text!r}", op.span)

    # expressions; calls are returned as ("call", target, args) placeholders
    def expr(self, allow_calls: bool):
        p = self.term(allow_calls)
        while self.peek().text in ("+", "-"):
            op = self.next().text
            q = self.term(allow_calls)
            p = _combine(p, q, op)
        return p

    def term(self, allow_calls: bool):
        p = self.unary(allow_calls)
        while self.peek().text == "*":
            self.next()
            p = _combine(p, self.unary(allow_calls), "*")
        return p

    def unary(self, allow_calls: bool):
        if self.peek().text == "-":
            self.next()
            return _combine(_Expr.const(0), self.unary(allow_calls), "-")
        if self.peek().text == "+":
            self.next()
            return self.unary(allow_calls)
        base = self.atom(allow_calls)
        if self.peek().text == "^":
            self.next()
            t = self.next()
            if t.kind != "num":
                raise ParseError("exponent must be a natural number", t.span)
            base = base.power(int(t.text))
        return base

    def atom(self, allow_calls: bool):
        t = self.peek()
        if t.kind == "num":
            self.next()
            return _Expr.const(int(t.text))
        if t.kind == "ident":
            self.next()
            if t.text not in self.scope:
                raise ParseError(f"undeclared variable {t.text}", t.span)
            return _Expr.var(self.scope[t.text])
        if t.text == "(":
            self.next()
            e = self.expr(allow_calls)
            self.expect(")")
            return e
        if t.text == "@":
            if not allow_calls:
                raise ParseError("function call not allowed here", t.span)
            self.next()
            target = self.ident()
            self.expect("(")
            args = []
            if self.peek().text != ")":
                args.append(self.expr(allow_calls=False))
                while self.peek().text == ",":
                    self.next()
                    args.append(self.expr(allow_calls=False))
            self.expect(")")
            if len(args) != len(self.variables):
                raise ParseError(f"call to {target} needs {len(self.variables)} arguments", t.span)
            return _Expr.call(target, tuple(args), t.span)
        raise ParseError(f"unexpected token {t.text or 'end of input'!r}", t.span)


class _Expr:
    """Polynomial over variables and call placeholders ``#k``."""

    def __init__(self, poly: Polynomial, calls: list):
        self.poly = poly
        self.calls = calls  # [(placeholder, target, args, span)]

    @staticmethod
    def const(c: int) -> "_Expr":
        return _Expr(Polynomial.const(c), [])

    @staticmethod
    def var(v: str) -> "_Expr":
        return _Expr(Polynomial.var(v), [])

    @staticmethod
    def call(target: str, args: tuple, span) -> "_Expr":
        ph = f"#call{id(args)}"
        return _Expr(Polynomial.var(ph), [(ph, target, args, span)])

    def power(self, k: int) -> "_Expr":
        return _Expr(self.poly ** k, self.calls)

    def __add__(self, other):  # for rhs + 1 in guards
        return _Expr(self.poly + _as_poly(other), self.calls)


def _as_poly(x):
    return x.poly if isinstance(x, _Expr) else x


def _combine(p: _Expr, q: _Expr, op: str) -> _Expr:
    if op == "+":
        poly = p.poly + q.poly
    elif op == "-":
        poly = p.poly - q.poly
    else:
        poly = p.poly * q.poly
    return _Expr(poly, p.calls + q.calls)


def _guard_poly(e) -> Polynomial:
    return e.poly if isinstance(e, _Expr) else e


def parse(text: str, file: str = "<input>") -> Program:
    """Parse program text; raises :class:`ParseError` with a source span."""
    ps = _Parser(text, file)
    ps.parse()
    if not ps.rules:
        raise ParseError("no RULES", SourceSpan(file, 1, 1))
    if ps.initial is None:
        # without STARTTERM the first rule's source is the start location
        ps.initial = ps.rules[0][0]
    variables = tuple(ps.variables)
    locations = [ps.initial]

    def add_loc(loc):
        if loc not in locations:
            locations.append(loc)

    transitions, calls = [], []
    for src, tgt, atoms, nes, rhs, span in ps.rules:
        atoms = [Atom(_guard_poly(a.lhs), _guard_poly(a.rhs)) for a in atoms]
        nes = [tuple(Atom(_guard_poly(a.lhs), _guard_poly(a.rhs)) for a in pair) for pair in nes]
        branches = [[]]
        for pair in nes:
            branches = [b + [a] for b in branches for a in pair]
        for extra in branches:
            add_loc(src)
            add_loc(tgt)
            tid = f"t{len(transitions)}"
            rename = {}
            # a call multiplied away (e.g. 0*@f(x)) is never evaluated, so it gets no id
            alive = set()
            for e in rhs:
                alive |= e.poly.indeterminates()
            for e in rhs:
                for ph, target, args, cspan in e.calls:
                    for a in args:
                        if a.calls:
                            raise ParseError("nested function calls are not supported", cspan)
                    if ph not in alive:
                        continue
                    cid = f"ρ{len(calls) + 1}"
                    rename[ph] = Polynomial.var(cid)
                    calls.append(FunctionCall(cid, target, tuple(zip(variables, (a.poly for a in args)))))
                    add_loc(target)
            eta = tuple((v, e.poly.subst(rename)) for v, e in zip(variables, rhs))
            transitions.append(Transition(tid, src, tgt, Constraint(tuple(atoms + extra)), eta))
    seen_ret = set()
    for loc, var, span in ps.returns:
        if loc in seen_ret:
            raise ParseError(f"duplicate RETURN for {loc}", span)
        if var not in variables:
            raise ParseError(f"undeclared return variable {var}", span)
        seen_ret.add(loc)
        add_loc(loc)
    for loc in ps.extra_locations:
        add_loc(loc)
    prog = Program(
        variables=variables,
        locations=tuple(locations),
        initial=ps.initial,
        returns=tuple((loc, var) for loc, var, _ in ps.returns),
        calls=tuple(calls),
        transitions=tuple(transitions),
    )
    diags = validate(prog)
    if diags:
        raise ParseError("; ".join(diags), SourceSpan(file, 1, 1))
    return prog


def load(path) -> Program:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


def _render_poly(p: Polynomial, prog: Program) -> str:
    names = {}
    for v in p.indeterminates():
        if is_call_symbol(v):
            c = prog.call(v)
            names[v] = f"@{c.target}({', '.join(str(q) for _, q in c.zeta)})"
    return p.to_str(names)


def pretty_print(prog: Program) -> str:
    lines = [
        "(GOAL COMPLEXITY)",
        f"(STARTTERM (FUNCTIONSYMBOLS {prog.initial}))",
        f"(VAR {' '.join(prog.variables)})",
    ]
    for loc, var in prog.returns:
        lines.append(f"(RETURN {loc} {var})")
    mentioned = {prog.initial} | {loc for loc, _ in prog.returns}
    for t in prog.transitions:
        mentioned |= {t.source, t.target}
    mentioned |= {c.target for c in prog.calls}
    extra = [loc for loc in prog.locations if loc not in mentioned]
    if extra:
        lines.append(f"(LOCATIONS {' '.join(extra)})")
    lines.append("(RULES")
    params = ",".join(prog.variables)
    for t in prog.transitions:
        rhs = ", ".join(_render_poly(p, prog) for _, p in t.eta)
        rule = f"  {t.source}({params}) -> {t.target}({rhs})"
        if t.guard.atoms:
            rule += " :|: " + " && ".join(f"{a.lhs} < {a.rhs}" for a in t.guard.atoms)
        lines.append(rule)
    lines.append(")")
    return "\n".join(lines) + "\n"
