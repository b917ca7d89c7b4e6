"""CTL syntax, parser and explicit-state model checker.

The core grammar has ``AX``, ``EX``, ``A[_ R _]`` and ``E[_ R _]`` as its only
temporal operators.  Until, eventually and globally exist in the concrete
syntax and are desugared while parsing:

    A[f U g] = !E[!f R !g]      AF f = A[true U f]     AG f = A[false R f]
    E[f U g] = !A[!f R !g]      EF f = E[true U f]     EG f = E[false R f]

``AU``/``EU`` nodes exist as well, but only the positive-normal-form rewrite
in :mod:`symrepair.repair` produces them.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Union

from .kripke import KripkeStructure, SubStructure


class Formula:
    __slots__ = ()

    def children(self) -> tuple["Formula", ...]:
        return ()

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Bool(Formula):
    value: bool


TRUE = Bool(True)
FALSE = Bool(False)


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    lhs: Formula
    rhs: Formula

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class Or(Formula):
    lhs: Formula
    rhs: Formula

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class AX(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class EX(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class AR(Formula):
    """``A[lhs R rhs]``: on all paths rhs holds up to and including the first lhs-state."""

    lhs: Formula
    rhs: Formula

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class ER(Formula):
    lhs: Formula
    rhs: Formula

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class AU(Formula):
    lhs: Formula
    rhs: Formula

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class EU(Formula):
    lhs: Formula
    rhs: Formula

    def children(self):
        return (self.lhs, self.rhs)


MODAL = (AX, EX, AR, ER, AU, EU)


def conj(*fs: Formula) -> Formula:
    if not fs:
        return TRUE
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def disj(*fs: Formula) -> Formula:
    if not fs:
        return FALSE
    out = fs[0]
    for f in fs[1:]:
        out = Or(out, f)
    return out


# sugar, exactly as the abbreviations are defined
def a_until(f, g):
    return Not(ER(Not(f), Not(g)))


def e_until(f, g):
    return Not(AR(Not(f), Not(g)))


def af(f):
    return a_until(TRUE, f)


def ef(f):
    return e_until(TRUE, f)


def ag(f):
    return AR(FALSE, f)


def eg(f):
    return ER(FALSE, f)


def subformulas(f: Formula) -> list[Formula]:
    """Distinct subformulas, children before parents."""
    seen: dict[Formula, None] = {}

    def walk(g):
        if g in seen:
            return
        for c in g.children():
            walk(c)
        seen[g] = None

    walk(f)
    return list(seen)


def propositions(f: Formula) -> set[str]:
    return {g.name for g in subformulas(f) if isinstance(g, Prop)}


def is_propositional(f: Formula) -> bool:
    return not any(isinstance(g, MODAL) for g in subformulas(f))


def depth(f: Formula) -> int:
    kids = f.children()
    return 1 + max((depth(c) for c in kids), default=0) if kids else 0


def max_prop_subformulae(f: Formula) -> set[Formula]:
    """Maximal subformulas free of temporal operators."""
    if is_propositional(f):
        return {f}
    out: set[Formula] = set()
    for c in f.children():
        out |= max_prop_subformulae(c)
    return out


# ---------------------------------------------------------------- printing

def to_text(f: Formula) -> str:
    """Concrete syntax that :func:`parse_formula` reads back to the same tree."""
    if isinstance(f, Bool):
        return "true" if f.value else "false"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, Not):
        return "!" + _atomic_text(f.arg)
    if isinstance(f, And):
        return f"({to_text(f.lhs)} & {to_text(f.rhs)})"
    if isinstance(f, Or):
        return f"({to_text(f.lhs)} | {to_text(f.rhs)})"
    if isinstance(f, AX):
        return "AX " + _atomic_text(f.arg)
    if isinstance(f, EX):
        return "EX " + _atomic_text(f.arg)
    op = {AR: ("A", "R"), ER: ("E", "R"), AU: ("A", "U"), EU: ("E", "U")}[type(f)]
    return f"{op[0]}[{to_text(f.lhs)} {op[1]} {to_text(f.rhs)}]"


def _atomic_text(f):
    text = to_text(f)
    if isinstance(f, (And, Or)):
        return text
    if isinstance(f, (Not, AX, EX)):
        return "(" + text + ")"
    return text


# ----------------------------------------------------------------- parsing

class CtlSyntaxError(ValueError):
    def __init__(self, message, text, pos):
        super().__init__(f"{message} at position {pos}: {text[:pos]}>>>{text[pos:]}")
        self.pos = pos


KEYWORDS = {"true", "false", "AX", "EX", "AF", "EF", "AG", "EG", "A", "E", "R", "U"}

_TOKEN = re.compile(r"\s*(?:(?P<op>->|<->|[!&|()\[\]~])|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<bad>\S))")


def _tokenize(text):
    tokens = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            break
        if m.group("bad"):
            raise CtlSyntaxError(f"unexpected character {m.group('bad')!r}", text, m.start("bad"))
        kind = "op" if m.group("op") else "ident"
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    if text[pos:].strip():
        raise CtlSyntaxError("unexpected input", text, pos)
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value or kind == "eof":
            raise CtlSyntaxError(f"expected {value!r}", self.text, pos)

    def error(self, message):
        raise CtlSyntaxError(message, self.text, self.peek()[2])

    def parse(self):
        f = self.iff()
        if self.peek()[0] != "eof":
            self.error("trailing input")
        return f

    def iff(self):
        f = self.implies()
        while self.peek()[1] == "<->":
            self.take()
            g = self.implies()
            f = And(Or(Not(f), g), Or(f, Not(g)))
        return f

    def implies(self):
        f = self.disjunction()
        if self.peek()[1] == "->":
            self.take()
            return Or(Not(f), self.implies())
        return f

    def disjunction(self):
        f = self.conjunction()
        while self.peek()[1] == "|":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self):
        f = self.unary()
        while self.peek()[1] == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self):
        kind, val, pos = self.peek()
        if val in ("!", "~"):
            self.take()
            return Not(self.unary())
        unary_ops = {"AX": AX, "EX": EX, "AF": af, "EF": ef, "AG": ag, "EG": eg}
        if kind == "ident" and val in unary_ops:
            self.take()
            return unary_ops[val](self.unary())
        return self.atom()

    def atom(self):
        kind, val, pos = self.take()
        if kind == "eof":
            raise CtlSyntaxError("unexpected end of formula", self.text, pos)
        if val == "(":
            f = self.iff()
            self.expect(")")
            return f
        if kind == "ident":
            if val == "true":
                return TRUE
            if val == "false":
                return FALSE
            if val in ("A", "E"):
                self.expect("[")
                lhs = self.iff()
                k2, op, p2 = self.take()
                if op not in ("R", "U"):
                    raise CtlSyntaxError("expected 'R' or 'U'", self.text, p2)
                rhs = self.iff()
                self.expect("]")
                if op == "R":
                    return (AR if val == "A" else ER)(lhs, rhs)
                return (a_until if val == "A" else e_until)(lhs, rhs)
            if val in KEYWORDS:
                raise CtlSyntaxError(f"keyword {val!r} used as a proposition", self.text, pos)
            return Prop(val)
        raise CtlSyntaxError(f"unexpected {val!r}", self.text, pos)


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()


# ----------------------------------------------------------------- checking

class CheckError(ValueError):
    pass


Model = Union[KripkeStructure, SubStructure]


@dataclass(frozen=True)
class SatSet:
    formula: Formula
    holds: dict

    def __getitem__(self, s):
        return self.holds[s]

    def states(self) -> list[str]:
        return [s for s, v in self.holds.items() if v]

    def to_dict(self) -> dict:
        return dict(self.holds)


class _Graph:
    """States, successor and predecessor lists of a structure or substructure."""

    def __init__(self, m: Model):
        if isinstance(m, SubStructure):
            parent = m.parent
            self.states = parent.sort_states(m.states)
            keep = m.transitions
            self.succ = {s: [t for t in parent.successors(s) if (s, t) in keep] for s in self.states}
            self.pred = {s: [u for u in parent.predecessors(s) if (u, s) in keep] for s in self.states}
            self.labels = parent.labels
            self.ap = parent.ap
            self.initial = parent.sort_states(m.initial)
        else:
            self.states = list(m.states)
            self.succ = {s: list(m.successors(s)) for s in self.states}
            self.pred = {s: list(m.predecessors(s)) for s in self.states}
            self.labels = m.labels
            self.ap = m.ap
            self.initial = m.sorted_initial()


def _graph_for(m: Model, f: Formula) -> _Graph:
    g = _Graph(m)
    if not g.states:
        raise CheckError("cannot check a formula on an empty structure")
    dead = [s for s in g.states if not g.succ[s]]
    if dead:
        raise CheckError(f"structure is not total: {dead} have no successors")
    unknown = propositions(f) - set(g.ap)
    if unknown:
        raise CheckError(f"unknown propositions {sorted(unknown)}")
    return g


def check(m: Model, f: Formula) -> SatSet:
    """Label every state of ``m`` with the truth value of ``f``."""
    g = _graph_for(m, f)
    sat = _evaluate(g, f)
    return SatSet(f, {s: s in sat[f] for s in g.states})


def models(m: Model, f: Formula) -> bool:
    g = _graph_for(m, f)
    if not g.initial:
        warnings.warn("structure has no initial states; verdict is vacuously true", stacklevel=2)
        return True
    sat = _evaluate(g, f)[f]
    return all(s in sat for s in g.initial)


def failing_initial_states(m: Model, f: Formula) -> list[str]:
    g = _graph_for(m, f)
    sat = _evaluate(g, f)[f]
    return [s for s in g.initial if s not in sat]


def _evaluate(g: _Graph, f: Formula) -> dict[Formula, set[str]]:
    sat: dict[Formula, set[str]] = {}
    every = set(g.states)
    for h in subformulas(f):
        if isinstance(h, Bool):
            sat[h] = set(every) if h.value else set()
        elif isinstance(h, Prop):
            sat[h] = {s for s in g.states if h.name in g.labels[s]}
        elif isinstance(h, Not):
            sat[h] = every - sat[h.arg]
        elif isinstance(h, And):
            sat[h] = sat[h.lhs] & sat[h.rhs]
        elif isinstance(h, Or):
            sat[h] = sat[h.lhs] | sat[h.rhs]
        elif isinstance(h, AX):
            arg = sat[h.arg]
            sat[h] = {s for s in g.states if all(t in arg for t in g.succ[s])}
        elif isinstance(h, EX):
            arg = sat[h.arg]
            sat[h] = {s for s in g.states if any(t in arg for t in g.succ[s])}
        elif isinstance(h, AR):
            sat[h] = _release_all(g, sat[h.lhs], sat[h.rhs])
        elif isinstance(h, ER):
            sat[h] = _release_some(g, sat[h.lhs], sat[h.rhs])
        elif isinstance(h, AU):
            sat[h] = _until_all(g, sat[h.lhs], sat[h.rhs])
        elif isinstance(h, EU):
            sat[h] = _until_some(g, sat[h.lhs], sat[h.rhs])
        else:
            raise TypeError(f"not a CTL formula: {h!r}")
    return sat


def _release_all(g, phi, psi):
    # greatest Z with Z <= psi and Z <= phi | AX Z
    z = set(psi)
    work = [s for s in g.states if s not in z]
    while work:
        t = work.pop()
        for s in g.pred[t]:
            if s in z and s not in phi:
                z.discard(s)
                work.append(s)
    return z


def _release_some(g, phi, psi):
    # greatest Z with Z <= psi and Z <= phi | EX Z
    z = set(psi)
    count = {s: sum(1 for t in g.succ[s] if t in z) for s in g.states}
    work = [s for s in g.states if s in z and s not in phi and count[s] == 0]
    for s in work:
        z.discard(s)
    while work:
        t = work.pop()
        for s in g.pred[t]:
            count[s] -= 1
            if s in z and s not in phi and count[s] == 0:
                z.discard(s)
                work.append(s)
    return z


def _until_some(g, phi, psi):
    z = set(psi)
    work = list(z)
    while work:
        t = work.pop()
        for s in g.pred[t]:
            if s not in z and s in phi:
                z.add(s)
                work.append(s)
    return z


def _until_all(g, phi, psi):
    z = set(psi)
    missing = {s: len(g.succ[s]) for s in g.states}
    work = list(z)
    while work:
        t = work.pop()
        for s in g.pred[t]:
            if s in z:
                continue
            missing[s] -= 1
            if missing[s] == 0 and s in phi:
                z.add(s)
                work.append(s)
    return z
