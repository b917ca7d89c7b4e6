"""Guarded-command concurrent programs.

A program is a set of processes, each a set of actions ``(from, guard ->
assignment, to)`` over its own local states, plus shared variables.  Every
local state fixes the truth values of the propositions its process owns.
Execution interleaves: each global step moves exactly one process.
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

from .ctl import (FALSE, TRUE, And, Bool, Formula, Not, Or, Prop, models)
from .kripke import BoundExceeded, KripkeStructure, SubStructure
from .symmetry import (DEFAULT_GROUP_BOUND, SymmetryGroup, check_g_bisimulation,
                       closure)

DEFAULT_STATE_BOUND = 200_000


class ProgramError(ValueError):
    pass


class DeadEndError(ProgramError):
    pass


class VerificationError(RuntimeError):
    pass


# ------------------------------------------------------------------ guards

@dataclass(frozen=True)
class SharedEq(Formula):
    """Guard atom ``var = value`` on a shared variable."""

    var: str
    value: str

    def __str__(self):
        return guard_text(self)


def guard_text(g: Formula) -> str:
    if isinstance(g, Bool):
        return "true" if g.value else "false"
    if isinstance(g, Prop):
        return g.name
    if isinstance(g, SharedEq):
        return f"{g.var} = {g.value}"
    if isinstance(g, Not):
        inner = guard_text(g.arg)
        return "!" + (f"({inner})" if isinstance(g.arg, (And, Or, SharedEq)) else inner)
    if isinstance(g, And):
        return " & ".join(_guard_operand(c, Or) for c in _flatten(g, And))
    if isinstance(g, Or):
        return " | ".join(guard_text(c) for c in _flatten(g, Or))
    raise ProgramError(f"not a guard: {g!r}")


def _guard_operand(g, weaker):
    text = guard_text(g)
    return f"({text})" if isinstance(g, weaker) else text


def _flatten(g, op):
    if isinstance(g, op):
        return _flatten(g.lhs, op) + _flatten(g.rhs, op)
    return [g]


def eval_guard(g: Formula, props: frozenset[str], shared: dict[str, str]) -> bool:
    if isinstance(g, Bool):
        return g.value
    if isinstance(g, Prop):
        return g.name in props
    if isinstance(g, SharedEq):
        return shared[g.var] == g.value
    if isinstance(g, Not):
        return not eval_guard(g.arg, props, shared)
    if isinstance(g, And):
        return eval_guard(g.lhs, props, shared) and eval_guard(g.rhs, props, shared)
    if isinstance(g, Or):
        return eval_guard(g.lhs, props, shared) or eval_guard(g.rhs, props, shared)
    raise ProgramError(f"not a guard: {g!r}")


def guard_symbols(g: Formula) -> tuple[set[str], set[str]]:
    """(propositions, shared variables) a guard reads."""
    props, shared = set(), set()
    stack = [g]
    while stack:
        h = stack.pop()
        if isinstance(h, Prop):
            props.add(h.name)
        elif isinstance(h, SharedEq):
            shared.add(h.var)
        else:
            stack.extend(h.children())
    return props, shared


def _and_all(parts: Sequence[Formula]) -> Formula:
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def _or_all(parts: Sequence[Formula]) -> Formula:
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


# ------------------------------------------------------------ program model

@dataclass(frozen=True)
class SharedVarDecl:
    name: str
    domain: tuple[str, ...]
    initial: str


@dataclass(frozen=True)
class LocalState:
    name: str
    props: frozenset[str]


@dataclass(frozen=True)
class Action:
    process: int
    source: str
    guard: Formula
    assign: tuple[tuple[str, str], ...]
    target: str

    def __str__(self):
        return action_text(self)


@dataclass(frozen=True)
class Process:
    index: int
    locals: tuple[LocalState, ...]
    initial: str
    actions: tuple[Action, ...]

    @property
    def ap(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for loc in self.locals:
            for p in sorted(loc.props):
                seen[p] = None
        return tuple(seen)

    def local(self, name: str) -> LocalState:
        for loc in self.locals:
            if loc.name == name:
                return loc
        raise ProgramError(f"process {self.index} has no local state {name!r}")

    def position(self, name: str) -> int:
        for k, loc in enumerate(self.locals):
            if loc.name == name:
                return k
        raise ProgramError(f"process {self.index} has no local state {name!r}")


class GlobalState(NamedTuple):
    locals: tuple[str, ...]
    shared: tuple[str, ...]


@dataclass(frozen=True)
class ConcurrentProgram:
    processes: tuple[Process, ...]
    shared: tuple[SharedVarDecl, ...] = ()

    def __post_init__(self):
        self.validate()

    @property
    def ap(self) -> tuple[str, ...]:
        return tuple(itertools.chain.from_iterable(p.ap for p in self.processes))

    def process(self, index: int) -> Process:
        for p in self.processes:
            if p.index == index:
                return p
        raise ProgramError(f"no process {index}")

    def position_of(self, index: int) -> int:
        for k, p in enumerate(self.processes):
            if p.index == index:
                return k
        raise ProgramError(f"no process {index}")

    def validate(self) -> None:
        if not self.processes:
            raise ProgramError("a program needs at least one process")
        indices = [p.index for p in self.processes]
        if len(set(indices)) != len(indices):
            raise ProgramError("duplicate process indices")
        owner: dict[str, int] = {}
        for p in self.processes:
            for q in p.ap:
                if q in owner:
                    raise ProgramError(f"proposition {q!r} owned by processes {owner[q]} and {p.index}")
                owner[q] = p.index
        shared = {v.name: v for v in self.shared}
        if len(shared) != len(self.shared):
            raise ProgramError("duplicate shared variable")
        for v in self.shared:
            if v.initial not in v.domain:
                raise ProgramError(f"initial value of {v.name!r} is outside its domain")
            if v.name in owner:
                raise ProgramError(f"{v.name!r} is both a proposition and a shared variable")
        for p in self.processes:
            names = [loc.name for loc in p.locals]
            if len(set(names)) != len(names):
                raise ProgramError(f"process {p.index} declares a local state twice")
            if p.initial not in names:
                raise ProgramError(f"process {p.index}: unknown initial local state {p.initial!r}")
            for a in p.actions:
                if a.process != p.index:
                    raise ProgramError(f"action {a} filed under process {p.index}")
                if a.source not in names or a.target not in names:
                    raise ProgramError(f"process {p.index}: action {a} uses an unknown local state")
                props, svars = guard_symbols(a.guard)
                if props - set(owner):
                    raise ProgramError(f"guard of {a} reads unknown propositions {sorted(props - set(owner))}")
                if svars - set(shared):
                    raise ProgramError(f"guard of {a} reads unknown variables {sorted(svars - set(shared))}")
                for x, val in a.assign:
                    if x not in shared:
                        raise ProgramError(f"action {a} assigns non-shared {x!r}")
                    if val not in shared[x].domain:
                        raise ProgramError(f"action {a} assigns {x!r} a value outside its domain")

    def initial_state(self) -> GlobalState:
        return GlobalState(tuple(p.initial for p in self.processes),
                           tuple(v.initial for v in self.shared))

    def state_labels(self, s: GlobalState) -> frozenset[str]:
        out: set[str] = set()
        for p, loc in zip(self.processes, s.locals):
            out |= p.local(loc).props
        return frozenset(out)

    def shared_env(self, s: GlobalState) -> dict[str, str]:
        return {v.name: val for v, val in zip(self.shared, s.shared)}

    def state_name(self, s: GlobalState) -> str:
        single = all(len(loc.name) == 1 for p in self.processes for loc in p.locals)
        name = ("" if single else ",").join(s.locals)
        if self.shared:
            name += "[" + ",".join(f"{v.name}={val}" for v, val in zip(self.shared, s.shared)) + "]"
        return name

    def successors(self, s: GlobalState) -> list[tuple[int, GlobalState]]:
        """(process index, successor) pairs in process then action order."""
        props = self.state_labels(s)
        env = self.shared_env(s)
        out = []
        for k, p in enumerate(self.processes):
            for a in p.actions:
                if a.source != s.locals[k] or not eval_guard(a.guard, props, env):
                    continue
                locs = list(s.locals)
                locs[k] = a.target
                vals = dict(env)
                vals.update(a.assign)
                t = GlobalState(tuple(locs), tuple(vals[v.name] for v in self.shared))
                out.append((p.index, t))
        return out

    def with_actions(self, actions: Iterable[Action]) -> "ConcurrentProgram":
        per: dict[int, list[Action]] = {p.index: [] for p in self.processes}
        for a in actions:
            if a not in per[a.process]:
                per[a.process].append(a)
        procs = tuple(Process(p.index, p.locals, p.initial, tuple(per[p.index])) for p in self.processes)
        return ConcurrentProgram(procs, self.shared)

    def all_actions(self) -> list[Action]:
        return [a for p in self.processes for a in p.actions]


# -------------------------------------------------------------- text format

def action_text(a: Action) -> str:
    text = f"action {a.source} -> {a.target} when {guard_text(a.guard)}"
    if a.assign:
        text += " do " + ", ".join(f"{x} := {v}" for x, v in a.assign)
    return text


def format_program(p: ConcurrentProgram) -> str:
    lines = []
    if p.shared:
        lines.append("shared")
        for v in p.shared:
            lines.append(f"  var {v.name} : {{{', '.join(v.domain)}}} = {v.initial}")
    for proc in p.processes:
        lines.append(f"process {proc.index}")
        for loc in proc.locals:
            props = " ".join(q for q in proc.ap if q in loc.props)
            lines.append(f"  local {loc.name} {{ {props} }}" if props else f"  local {loc.name} {{ }}")
        lines.append(f"  init {proc.initial}")
        for a in proc.actions:
            lines.append("  " + action_text(a))
    return "\n".join(lines) + "\n"


_GUARD_TOKEN = re.compile(r"\s*(?:(?P<op>[!&|()=~])|(?P<word>[A-Za-z0-9_]+)|(?P<bad>\S))")


class _GuardParser:
    def __init__(self, text, line_no):
        self.text = text
        self.line_no = line_no
        self.tokens = []
        pos = 0
        for m in _GUARD_TOKEN.finditer(text):
            if m.group("bad"):
                self.fail(f"unexpected character {m.group('bad')!r}")
            self.tokens.append(m.group("op") or m.group("word"))
            pos = m.end()
        if text[pos:].strip():
            self.fail("unexpected trailing input")
        self.i = 0

    def fail(self, msg):
        raise ProgramError(f"line {self.line_no}: {msg} in guard {self.text!r}")

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end")
        self.i += 1
        return tok

    def parse(self):
        g = self.disj()
        if self.peek() is not None:
            self.fail(f"unexpected {self.peek()!r}")
        return g

    def disj(self):
        g = self.conj()
        while self.peek() == "|":
            self.take()
            g = Or(g, self.conj())
        return g

    def conj(self):
        g = self.unary()
        while self.peek() == "&":
            self.take()
            g = And(g, self.unary())
        return g

    def unary(self):
        if self.peek() in ("!", "~"):
            self.take()
            return Not(self.unary())
        tok = self.take()
        if tok == "(":
            g = self.disj()
            if self.take() != ")":
                self.fail("expected ')'")
            return g
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            self.fail(f"unexpected {tok!r}")
        if self.peek() == "=":
            self.take()
            return SharedEq(tok, self.take())
        return Prop(tok)


def parse_guard(text: str, line_no: int = 0) -> Formula:
    return _GuardParser(text, line_no).parse()


_ACTION = re.compile(r"action\s+(\S+)\s*->\s*(\S+)(?:\s+when\s+(.*?))?(?:\s+do\s+(.*))?$")


def parse_program(text: str) -> ConcurrentProgram:
    shared: list[SharedVarDecl] = []
    procs: list[dict] = []
    section = None
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()[0]
        if head == "shared":
            section = "shared"
            continue
        if head == "process":
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise ProgramError(f"line {line_no}: expected 'process <index>'")
            procs.append({"index": int(parts[1]), "locals": [], "init": None, "actions": []})
            section = "process"
            continue
        if section == "shared" and head == "var":
            m = re.fullmatch(r"var\s+([A-Za-z_]\w*)\s*:\s*\{([^}]*)\}\s*=\s*(\w+)", line)
            if not m:
                raise ProgramError(f"line {line_no}: expected 'var <name> : {{v1, v2, ...}} = <v>'")
            domain = tuple(v.strip() for v in m.group(2).split(",") if v.strip())
            shared.append(SharedVarDecl(m.group(1), domain, m.group(3)))
            continue
        if section != "process":
            raise ProgramError(f"line {line_no}: {head!r} outside a process section")
        proc = procs[-1]
        if head == "local":
            m = re.fullmatch(r"local\s+(\w+)\s*\{([^}]*)\}", line)
            if not m:
                raise ProgramError(f"line {line_no}: expected 'local <name> {{ props }}'")
            proc["locals"].append(LocalState(m.group(1), frozenset(m.group(2).split())))
        elif head == "init":
            parts = line.split()
            if len(parts) != 2:
                raise ProgramError(f"line {line_no}: expected 'init <local>'")
            proc["init"] = parts[1]
        elif head == "action":
            m = _ACTION.fullmatch(line)
            if not m:
                raise ProgramError(f"line {line_no}: expected 'action <from> -> <to> when <guard> do <assignments>'")
            guard = parse_guard(m.group(3), line_no) if m.group(3) else TRUE
            assign = []
            if m.group(4) and m.group(4).strip() != "skip":
                for part in m.group(4).split(","):
                    am = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*:=\s*(\w+)\s*", part)
                    if not am:
                        raise ProgramError(f"line {line_no}: bad assignment {part.strip()!r}")
                    assign.append((am.group(1), am.group(2)))
            proc["actions"].append(Action(proc["index"], m.group(1), guard, tuple(assign), m.group(2)))
        else:
            raise ProgramError(f"line {line_no}: unknown directive {head!r}")
    processes = []
    for proc in sorted(procs, key=lambda d: d["index"]):
        if proc["init"] is None:
            raise ProgramError(f"process {proc['index']} has no init line")
        processes.append(Process(proc["index"], tuple(proc["locals"]), proc["init"], tuple(proc["actions"])))
    return ConcurrentProgram(tuple(processes), tuple(shared))


def load_program(path) -> ConcurrentProgram:
    with open(path) as fh:
        return parse_program(fh.read())


# ------------------------------------------------------- index symmetries

@dataclass(frozen=True)
class IndexPermutation:
    """Process ``k`` (by position) is sent to position ``pi[k]``."""

    pi: tuple[int, ...]
    shared_action: tuple[tuple[tuple[str, str], ...], ...] = ()

    def shared_map(self, j: int) -> dict[str, str]:
        if not self.shared_action:
            return {}
        return dict(self.shared_action[j])


class Renaming:
    """Structural correspondence between the processes of a program."""

    def __init__(self, program: ConcurrentProgram):
        self.program = program
        procs = program.processes
        self.owner = {q: k for k, p in enumerate(procs) for q in p.ap}
        self.prop_pos: list[dict[str, frozenset[int]]] = []
        for p in procs:
            sig = {q: frozenset(i for i, loc in enumerate(p.locals) if q in loc.props) for q in p.ap}
            self.prop_pos.append(sig)

    def prop_map(self, k: int, j: int) -> dict[str, str]:
        src, dst = self.prop_pos[k], self.prop_pos[j]
        by_sig_dst: dict[frozenset[int], list[str]] = {}
        for q, sig in dst.items():
            by_sig_dst.setdefault(sig, []).append(q)
        out = {}
        for q, sig in src.items():
            cands = by_sig_dst.get(sig, [])
            if len(cands) != 1:
                raise ProgramError(
                    f"processes {self.program.processes[k].index} and {self.program.processes[j].index} "
                    "have no unique proposition correspondence")
            out[q] = cands[0]
        if len(set(out.values())) != len(dst):
            raise ProgramError("proposition sets of the processes differ in size")
        return out

    def local_map(self, k: int, j: int) -> dict[str, str]:
        a, b = self.program.processes[k], self.program.processes[j]
        if len(a.locals) != len(b.locals):
            raise ProgramError(f"processes {a.index} and {b.index} have different local state counts")
        return {x.name: y.name for x, y in zip(a.locals, b.locals)}


def _check_perm(program: ConcurrentProgram, g: IndexPermutation) -> None:
    n = len(program.processes)
    if sorted(g.pi) != list(range(n)):
        raise ProgramError(f"{g.pi} is not a permutation of the {n} process positions")
    if g.shared_action:
        if len(g.shared_action) != len(program.shared):
            raise ProgramError("shared action must give one value permutation per shared variable")
        for v, perm in zip(program.shared, g.shared_action):
            mp = dict(perm)
            if sorted(mp) != sorted(v.domain) or sorted(mp.values()) != sorted(v.domain):
                raise ProgramError(f"shared action on {v.name!r} is not a permutation of its domain")


def apply_to_state(program: ConcurrentProgram, g: IndexPermutation, s: GlobalState,
                   renaming: Renaming | None = None) -> GlobalState:
    renaming = renaming or Renaming(program)
    locs = [""] * len(s.locals)
    for k, loc in enumerate(s.locals):
        locs[g.pi[k]] = renaming.local_map(k, g.pi[k])[loc]
    shared = tuple(g.shared_map(j).get(v, v) for j, v in enumerate(s.shared))
    return GlobalState(tuple(locs), shared)


def apply_to_guard(program: ConcurrentProgram, g: IndexPermutation, guard: Formula,
                   renaming: Renaming) -> Formula:
    shared_pos = {v.name: j for j, v in enumerate(program.shared)}

    def walk(h):
        if isinstance(h, Prop):
            k = renaming.owner[h.name]
            return Prop(renaming.prop_map(k, g.pi[k])[h.name])
        if isinstance(h, SharedEq):
            return SharedEq(h.var, g.shared_map(shared_pos[h.var]).get(h.value, h.value))
        if isinstance(h, Not):
            return Not(walk(h.arg))
        if isinstance(h, And):
            return And(walk(h.lhs), walk(h.rhs))
        if isinstance(h, Or):
            return Or(walk(h.lhs), walk(h.rhs))
        return h

    return walk(guard)


def normalize_guard(program: ConcurrentProgram, guard: Formula) -> Formula:
    """Canonical operand order for ``&``/``|`` chains: literals in proposition
    order (shared variables last), compound operands after them by text."""
    order = {q: i for i, q in enumerate(program.ap)}
    shared = {v.name: len(order) + i for i, v in enumerate(program.shared)}

    def key(h):
        if isinstance(h, Prop):
            return (0, order.get(h.name, -1), 0, "")
        if isinstance(h, Not) and isinstance(h.arg, Prop):
            return (0, order.get(h.arg.name, -1), 1, "")
        if isinstance(h, SharedEq):
            return (0, shared.get(h.var, -1), 0, h.value)
        return (1, 0, 0, guard_text(h))

    def walk(h):
        for op, build in ((And, _and_all), (Or, _or_all)):
            if isinstance(h, op):
                parts = sorted((walk(x) for x in _flatten(h, op)), key=key)
                return build(parts)
        if isinstance(h, Not):
            return Not(walk(h.arg))
        return h

    return walk(guard)


def apply_to_action(program: ConcurrentProgram, g: IndexPermutation, a: Action,
                    renaming: Renaming | None = None) -> Action:
    renaming = renaming or Renaming(program)
    k = program.position_of(a.process)
    j = g.pi[k]
    lm = renaming.local_map(k, j)
    shared_pos = {v.name: i for i, v in enumerate(program.shared)}
    assign = tuple((x, g.shared_map(shared_pos[x]).get(v, v)) for x, v in a.assign)
    guard = normalize_guard(program, apply_to_guard(program, g, a.guard, renaming))
    return Action(program.processes[j].index, lm[a.source], guard, assign, lm[a.target])


def _compose(g: IndexPermutation, h: IndexPermutation) -> IndexPermutation:
    """g after h."""
    pi = tuple(g.pi[h.pi[k]] for k in range(len(h.pi)))
    if not g.shared_action and not h.shared_action:
        return IndexPermutation(pi)
    n = max(len(g.shared_action), len(h.shared_action))
    shared = []
    for j in range(n):
        gm = g.shared_map(j)
        hm = h.shared_map(j)
        keys = sorted(set(gm) | set(hm))
        shared.append(tuple((v, gm.get(hm.get(v, v), hm.get(v, v))) for v in keys))
    return IndexPermutation(pi, tuple(shared))


def _normalize(g: IndexPermutation) -> IndexPermutation:
    if g.shared_action and all(a == b for perm in g.shared_action for a, b in perm):
        return IndexPermutation(g.pi)
    if g.shared_action:
        return IndexPermutation(g.pi, tuple(tuple(sorted(p)) for p in g.shared_action))
    return g


def check_isomorphic(program: ConcurrentProgram, g: IndexPermutation) -> None:
    """Raise unless ``g`` maps the program's actions onto themselves."""
    _check_perm(program, g)
    renaming = Renaming(program)
    for k, p in enumerate(program.processes):
        j = g.pi[k]
        q = program.processes[j]
        lm = renaming.local_map(k, j)
        pm = renaming.prop_map(k, j)
        if lm[p.initial] != q.initial:
            raise ProgramError(f"processes {p.index} and {q.index} start in different local states")
        for loc in p.locals:
            if frozenset(pm[x] for x in loc.props) != q.local(lm[loc.name]).props:
                raise ProgramError(f"local state {loc.name} of process {p.index} does not match")
    for v, j in zip(program.shared, range(len(program.shared))):
        if g.shared_map(j).get(v.initial, v.initial) != v.initial:
            raise ProgramError(f"shared action moves the initial value of {v.name!r}")
    mapped = {apply_to_action(program, g, a, renaming) for a in program.all_actions()}
    own = {Action(a.process, a.source, normalize_guard(program, a.guard), a.assign, a.target)
           for a in program.all_actions()}
    if mapped != own:
        raise ProgramError(f"processes are not isomorphic under {g.pi}")


def index_group_action(program: ConcurrentProgram, g: IndexPermutation) -> Callable[[GlobalState], GlobalState]:
    """The state-mapping on global states induced by ``g``."""
    check_isomorphic(program, g)
    renaming = Renaming(program)
    return lambda s: apply_to_state(program, g, s, renaming)


class IndexGroup:
    """A group of process-index permutations acting on a program.

    The full symmetric group on identical processes is handled without
    materializing its elements: canonical forms are sorted position vectors.
    """

    def __init__(self, program: ConcurrentProgram, generators: Sequence[IndexPermutation] = (),
                 full: bool = False, bound: int = DEFAULT_GROUP_BOUND):
        self.program = program
        self.full = full
        self.bound = bound
        self.renaming = Renaming(program)
        n = len(program.processes)
        if full:
            generators = [IndexPermutation(tuple([1, 0] + list(range(2, n))))] if n > 1 else []
            if n > 2:
                generators.append(IndexPermutation(tuple(list(range(1, n)) + [0])))
        self.generators = [_normalize(g) for g in generators]
        for g in self.generators:
            check_isomorphic(program, g)
        self._elements: list[IndexPermutation] | None = None
        self._positions = [{loc.name: i for i, loc in enumerate(p.locals)} for p in program.processes]
        self._shared_pos = [{v: i for i, v in enumerate(d.domain)} for d in program.shared]

    @property
    def elements(self) -> list[IndexPermutation]:
        if self._elements is None:
            identity = IndexPermutation(tuple(range(len(self.program.processes))))
            self._elements = closure(self.generators, lambda g, a: _normalize(_compose(g, a)),
                                     identity, self.bound)
        return self._elements

    def __len__(self):
        return len(self.elements)

    def apply(self, g: IndexPermutation, s: GlobalState) -> GlobalState:
        return apply_to_state(self.program, g, s, self.renaming)

    def apply_action(self, g: IndexPermutation, a: Action) -> Action:
        return apply_to_action(self.program, g, a, self.renaming)

    def encode(self, s: GlobalState) -> tuple:
        return (tuple(self._positions[k][loc] for k, loc in enumerate(s.locals)),
                tuple(self._shared_pos[j][v] for j, v in enumerate(s.shared)))

    def canonical(self, s: GlobalState) -> GlobalState:
        if self.full:
            pos, _ = self.encode(s)
            order = sorted(pos)
            locs = tuple(self.program.processes[k].locals[i].name for k, i in enumerate(order))
            return GlobalState(locs, s.shared)
        return min((self.apply(g, s) for g in self.elements), key=self.encode)


def trivial_index_group(program: ConcurrentProgram) -> IndexGroup:
    return IndexGroup(program, [])


def full_index_group(program: ConcurrentProgram) -> IndexGroup:
    g = IndexGroup(program, full=True)
    return g


# ------------------------------------------------------------ state spaces

@dataclass(frozen=True, eq=False)
class StateSpace:
    """A generated state graph together with its program-level provenance.

    ``moves[(s, t)]`` lists the (process, actual successor) pairs behind the
    edge; in a reduced graph ``t`` is the canonical form of each successor.
    """

    program: ConcurrentProgram
    structure: KripkeStructure
    states: dict
    moves: dict
    group: IndexGroup | None = field(default=None, repr=False)
    deadlocks: tuple = ()

    def canonical_name(self, s: GlobalState) -> str:
        g = self.group
        return self.program.state_name(g.canonical(s) if g is not None else s)

    def transition_labels(self) -> dict:
        return {e: tuple(sorted({i for i, _ in mv})) for e, mv in self.moves.items()}


def _explore(program: ConcurrentProgram, canon, bound: int, allow_deadlock: bool) -> StateSpace:
    init = canon(program.initial_state())
    name = program.state_name
    order = [init]
    seen = {init}
    moves: dict[tuple[str, str], list] = {}
    queue = deque([init])
    dead = []
    while queue:
        s = queue.popleft()
        succ = program.successors(s)
        if not succ:
            dead.append(name(s))
        for i, t in succ:
            ct = canon(t)
            if ct not in seen:
                seen.add(ct)
                order.append(ct)
                queue.append(ct)
                if len(order) > bound:
                    raise BoundExceeded(f"more than {bound} reachable states")
            mv = moves.setdefault((name(s), name(ct)), [])
            if (i, t) not in mv:
                mv.append((i, t))
    if dead and not allow_deadlock:
        raise ProgramError(f"global state graph is not total: dead states {dead}")
    structure = KripkeStructure(
        states=tuple(name(s) for s in order),
        initial=frozenset([name(init)]),
        transitions=frozenset(moves),
        ap=program.ap,
        labels={name(s): program.state_labels(s) for s in order},
    )
    return StateSpace(program, structure, {name(s): s for s in order},
                      {e: tuple(v) for e, v in moves.items()}, deadlocks=tuple(dead))


def global_structure(program: ConcurrentProgram, bound: int = DEFAULT_STATE_BOUND,
                     allow_deadlock: bool = False) -> StateSpace:
    return _explore(program, lambda s: s, bound, allow_deadlock)


def reduced_structure(program: ConcurrentProgram, group: IndexGroup,
                      bound: int = DEFAULT_STATE_BOUND, allow_deadlock: bool = False) -> StateSpace:
    """Symmetry-reduced state graph built directly from the program.

    Only canonical states are ever stored; each successor is canonicalized as
    soon as it is generated.
    """
    space = _explore(program, group.canonical, bound, allow_deadlock)
    return StateSpace(space.program, space.structure, space.states, space.moves, group, space.deadlocks)


def induced_group(space: StateSpace, group: IndexGroup) -> SymmetryGroup:
    """The index group as a group of state-mappings of a full global graph."""
    m = space.structure
    name = space.program.state_name
    elements = []
    for g in group.elements:
        elements.append(tuple(m.index(name(group.apply(g, space.states[s])) ) for s in m.states))
    return SymmetryGroup(m, tuple(elements))


# -------------------------------------------------------------- extraction

def extract_action(space: StateSpace, s: str, process: int, target: GlobalState) -> Action:
    """The action that takes ``process`` along the move ``s -> target`` and nothing else."""
    program = space.program
    src = space.states[s]
    k = program.position_of(process)
    own = set(program.processes[k].ap)
    labels = program.state_labels(src)
    conjuncts: list[Formula] = []
    for q in program.ap:
        if q in own:
            continue
        conjuncts.append(Prop(q) if q in labels else Not(Prop(q)))
    for v, val in zip(program.shared, src.shared):
        conjuncts.append(SharedEq(v.name, val))
    assign = tuple((v.name, new) for v, old, new in zip(program.shared, src.shared, target.shared)
                   if new != old)
    return Action(process, src.locals[k], _and_all(conjuncts), assign, target.locals[k])


def extract_program(nprime: SubStructure, space: StateSpace) -> ConcurrentProgram:
    if nprime.parent is not space.structure:
        raise ProgramError("substructure does not belong to this state space")
    if nprime.is_empty():
        raise ProgramError("cannot extract a program from the empty substructure")
    actions = []
    for e in nprime.sorted_transitions():
        if e not in space.moves:
            raise ProgramError(f"transition {e} carries no process label")
        for i, t in space.moves[e]:
            a = extract_action(space, e[0], i, t)
            if a not in actions:
                actions.append(a)
    return space.program.with_actions(actions)


def _dead_ends(program: ConcurrentProgram) -> list[tuple[int, str]]:
    space = global_structure(program, allow_deadlock=True)
    dead = []
    for k, p in enumerate(program.processes):
        reached = {st.locals[k] for st in space.states.values()}
        has_out = {a.source for a in p.actions}
        for loc in p.locals:
            if loc.name in reached and loc.name not in has_out:
                dead.append((k, loc.name))
    return dead


def close_dead_ends(program: ConcurrentProgram, group: IndexGroup, mode: str = "minimal") -> ConcurrentProgram:
    """Add group images of the action set until no reachable local state is a dead end.

    ``full`` closes the action set under the whole group instead.
    """
    actions = program.all_actions()
    if mode == "full":
        closed = list(actions)
        for g in group.elements:
            for a in actions:
                b = group.apply_action(g, a)
                if b not in closed:
                    closed.append(b)
        return program.with_actions(closed)
    if mode != "minimal":
        raise ValueError(f"unknown closure mode {mode!r}")
    current = program
    while True:
        dead = _dead_ends(current)
        if not dead:
            return current
        k, loc = dead[0]
        index = current.processes[k].index
        acts = current.all_actions()
        for g in group.elements:
            image = [group.apply_action(g, a) for a in acts]
            if any(b.process == index and b.source == loc for b in image):
                current = current.with_actions(acts + image)
                break
        else:
            raise DeadEndError(f"no group element gives process {index} an action from {loc!r}")


def _literals(g: Formula) -> list[Formula] | None:
    parts = _flatten(g, And)
    if all(isinstance(p, (Prop, SharedEq, Bool)) or (isinstance(p, Not) and isinstance(p.arg, Prop))
           for p in parts):
        return [p for p in parts if p != TRUE]
    return None


def _drop_implied(program: ConcurrentProgram, lits: list[Formula]) -> list[Formula]:
    # !Q is implied by a positive R of the same process when no local state has both
    owner = {q: k for k, p in enumerate(program.processes) for q in p.ap}
    positives = [p.name for p in lits if isinstance(p, Prop)]
    out = []
    for lit in lits:
        if isinstance(lit, Not):
            q = lit.arg.name
            k = owner[q]
            proc = program.processes[k]
            if any(owner[r] == k and all(q not in loc.props for loc in proc.locals if r in loc.props)
                   for r in positives):
                continue
        out.append(lit)
    return out


def simplify_guards(program: ConcurrentProgram) -> ConcurrentProgram:
    """Merge actions that differ only in their guard and shorten guards.

    Merged guards keep the literals common to all merged guards; literals
    implied by local-state exclusivity are dropped.  If a merge would change
    the reachable behaviour, the exact disjunction is kept for that action.
    """
    reference = global_structure(program, allow_deadlock=True).structure
    groups: dict[tuple, list[Action]] = {}
    for a in program.all_actions():
        groups.setdefault((a.process, a.source, a.target, a.assign), []).append(a)

    def exact(members):
        parts = []
        for a in members:
            lits = _literals(a.guard)
            parts.append(_and_all(_drop_implied(program, lits)) if lits is not None else a.guard)
        return _or_all(parts)

    merged = []
    for key, members in groups.items():
        lit_lists = [_literals(a.guard) for a in members]
        if all(ls is not None for ls in lit_lists):
            common = [x for x in lit_lists[0] if all(x in ls for ls in lit_lists[1:])]
            guard = _and_all(_drop_implied(program, common))
        else:
            guard = exact(members)
        merged.append((key, members, guard))

    def build(choices):
        return program.with_actions(Action(k[0], k[1], g, k[3], k[2]) for k, _, g in choices)

    candidate = build(merged)
    if _same_graph(global_structure(candidate, allow_deadlock=True).structure, reference):
        return candidate
    # fall back action by action
    safe = []
    for key, members, guard in merged:
        trial = [(k, m, g if k == key else exact(m)) for k, m, g in merged]
        ok = _same_graph(global_structure(build(trial), allow_deadlock=True).structure, reference)
        safe.append((key, members, guard if ok else exact(members)))
    return build(safe)


def _same_graph(a: KripkeStructure, b: KripkeStructure) -> bool:
    return set(a.states) == set(b.states) and a.transitions == b.transitions and a.initial == b.initial


# ------------------------------------------------------------ verification

@dataclass
class VerificationReport:
    states: int
    models_ok: bool
    bisimulation_ok: bool
    initial_forward: bool
    initial_backward: bool
    failing: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.models_ok and self.bisimulation_ok and self.initial_forward and self.initial_backward

    def lines(self) -> list[str]:
        def mark(b):
            return "PASS" if b else "FAIL"
        return [
            f"generated structure: {self.states} states",
            f"{mark(self.models_ok)} extracted program satisfies the formula",
            f"{mark(self.bisimulation_ok)} G-bisimulation between program and repaired structure",
            f"{mark(self.initial_forward)} every program initial state related to a repaired initial state",
            f"{mark(self.initial_backward)} every repaired initial state related to a program initial state",
        ]


def _largest_relation(m, mbar, rel: set) -> set:
    succ = {s: list(m.successors(s)) for s in m.states}
    succ_bar: dict[str, list[str]] = {s: [] for s in mbar.states}
    for s, t in mbar.sorted_transitions():
        succ_bar[s].append(t)
    changed = True
    while changed:
        changed = False
        for s, t in sorted(rel):
            fwd = all(any((s2, t2) in rel for t2 in succ_bar[t]) for s2 in succ[s])
            back = all(any((s2, t2) in rel for s2 in succ[s]) for t2 in succ_bar[t])
            if not (fwd and back):
                rel.discard((s, t))
                changed = True
    return rel


def verify_extracted(prog_hat: ConcurrentProgram, nprime: SubStructure, space: StateSpace,
                     f: Formula) -> VerificationReport:
    """Regenerate the extracted program's global graph and compare it with ``nprime``.

    Checks that the graph satisfies ``f`` and that the largest orbit-respecting
    bisimulation between the two relates their initial states in both
    directions.
    """
    mp = global_structure(prog_hat, allow_deadlock=True)
    m2 = mp.structure
    if mp.deadlocks:
        return VerificationReport(len(m2.states), False, False, False, False, list(mp.deadlocks))
    models_ok = models(m2, f)
    group = space.group
    canon = (lambda st: group.canonical(st)) if group is not None else (lambda st: st)
    name = prog_hat.state_name
    theta = {s: name(canon(st)) for s, st in mp.states.items()}
    for s in nprime.states:
        theta.setdefault(s, name(canon(space.states[s])))
    by_orbit: dict[str, list[str]] = {}
    for t in nprime.sorted_states():
        by_orbit.setdefault(theta[t], []).append(t)
    rel = {(s, t) for s in m2.states for t in by_orbit.get(theta[s], [])}
    rel = _largest_relation(m2, nprime, rel)
    bisim = check_g_bisimulation(m2, nprime, rel, theta, strict=False)
    fwd = all(any((s, t) in rel for t in nprime.initial) for s in m2.initial)
    back = all(any((s, t) in rel for s in m2.initial) for t in nprime.initial)
    related = {s for s, _ in rel}
    failing = [s for s in m2.states if s not in related]
    return VerificationReport(len(m2.states), models_ok, bisim and not failing, fwd, back, failing)


# ---------------------------------------------------------------- pipeline

@dataclass(frozen=True, eq=False)
class ProgramRepair:
    space: StateSpace
    repaired: SubStructure
    extracted: ConcurrentProgram
    program: ConcurrentProgram
    report: VerificationReport


def repair_program(program: ConcurrentProgram, group: IndexGroup, f: Formula,
                   closure_mode: str = "minimal", simplify: bool = False,
                   bound: int = DEFAULT_STATE_BOUND, **repair_kwargs) -> ProgramRepair | None:
    """Reduce, repair, extract; ``None`` when the reduced graph has no repair.

    Raises ``VerificationError`` if the final program fails re-verification.
    """
    from .repair import repair

    space = reduced_structure(program, group, bound)
    nprime = repair(space.structure, f, **repair_kwargs)
    if nprime is None:
        return None
    extracted = extract_program(nprime, space)
    final = close_dead_ends(extracted, group, closure_mode)
    if simplify:
        final = simplify_guards(final)
    report = verify_extracted(final, nprime, space, f)
    if not report.ok:
        raise VerificationError("; ".join(report.lines()))
    return ProgramRepair(space, nprime, extracted, final, report)
