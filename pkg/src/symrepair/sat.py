"""A small CDCL SAT solver and DIMACS CNF reader/writer.

Watched literals, first-UIP clause learning, non-chronological
backjumping, activity-based branching and phase saving.  Branching ties are
broken by variable index and the default phase is ``True``, so a run is fully
deterministic.
"""

from __future__ import annotations

import heapq
import os
import shlex
import subprocess
import tempfile
from typing import Hashable, Iterable, Sequence


class CNF:
    """Clauses over variables 1..num_vars, with optional names for variables."""

    def __init__(self):
        self.num_vars = 0
        self.clauses: list[list[int]] = []
        self.names: dict[int, Hashable] = {}
        self._by_name: dict[Hashable, int] = {}

    def new_var(self, name: Hashable | None = None) -> int:
        self.num_vars += 1
        if name is not None:
            if name in self._by_name:
                raise KeyError(f"variable {name!r} already exists")
            self.names[self.num_vars] = name
            self._by_name[name] = self.num_vars
        return self.num_vars

    def var(self, name: Hashable) -> int:
        return self._by_name[name]

    def get(self, name: Hashable) -> int | None:
        return self._by_name.get(name)

    def add(self, clause: Iterable[int]) -> None:
        clause = list(clause)
        for lit in clause:
            if lit == 0 or abs(lit) > self.num_vars:
                raise ValueError(f"literal {lit} out of range")
        self.clauses.append(clause)

    def to_dimacs(self, name_fmt=repr) -> str:
        lines = [f"c var {v} {name_fmt(n)}" for v, n in sorted(self.names.items())]
        lines.append(f"p cnf {self.num_vars} {len(self.clauses)}")
        lines.extend(" ".join(map(str, c)) + " 0" for c in self.clauses)
        return "\n".join(lines) + "\n"

    def solve(self, **kwargs) -> dict[int, bool] | None:
        return solve(self.num_vars, self.clauses, **kwargs)


def parse_dimacs(text: str) -> CNF:
    cnf = CNF()
    declared = None
    pending: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad problem line: {raw!r}")
            declared = int(parts[2])
            cnf.num_vars = declared
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                cnf.add(pending)
                pending = []
            else:
                if declared is None:
                    raise ValueError("clause before problem line")
                pending.append(lit)
    if pending:
        cnf.add(pending)
    return cnf


def parse_model(text: str, num_vars: int) -> dict[int, bool] | None:
    """Read solver output in the usual ``s``/``v`` line format."""
    status = None
    model: dict[int, bool] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("s "):
            status = line[2:].strip()
        elif line.startswith("v "):
            for tok in line[2:].split():
                lit = int(tok)
                if lit:
                    model[abs(lit)] = lit > 0
    if status == "UNSATISFIABLE":
        return None
    if status != "SATISFIABLE":
        raise RuntimeError(f"solver reported no usable status ({status!r})")
    for v in range(1, num_vars + 1):
        model.setdefault(v, False)
    return model


def solve_external(cnf: CNF, command: str) -> dict[int, bool] | None:
    """Run an external DIMACS solver.

    ``{}`` in ``command`` is replaced by a path to the instance; otherwise the
    instance is written to the solver's stdin.
    """
    text = cnf.to_dimacs()
    if "{}" in command:
        fd, path = tempfile.mkstemp(suffix=".cnf")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            args = [a.replace("{}", path) for a in shlex.split(command)]
            proc = subprocess.run(args, capture_output=True, text=True)
        finally:
            os.unlink(path)
    else:
        proc = subprocess.run(shlex.split(command), input=text, capture_output=True, text=True)
    return parse_model(proc.stdout, cnf.num_vars)


def format_model(model: dict[int, bool] | None) -> str:
    if model is None:
        return "s UNSATISFIABLE\n"
    lits = [str(v if model[v] else -v) for v in sorted(model)]
    return "s SATISFIABLE\nv " + " ".join(lits) + " 0\n"


class _Solver:
    def __init__(self, num_vars: int, phase: bool):
        n = num_vars
        self.n = n
        self.value = [0] * (n + 1)  # 1 true, -1 false, 0 unassigned
        self.level = [0] * (n + 1)
        self.reason: list[int | None] = [None] * (n + 1)
        self.saved = [1 if phase else -1] * (n + 1)
        self.activity = [0.0] * (n + 1)
        self.bump = 1.0
        self.heap = [(0.0, v) for v in range(1, n + 1)]
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0

    def lit_value(self, lit: int) -> int:
        v = self.value[abs(lit)]
        return v if lit > 0 else -v

    def enqueue(self, lit: int, reason: int | None) -> bool:
        val = self.lit_value(lit)
        if val:
            return val > 0
        v = abs(lit)
        self.value[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)
        return True

    def attach(self, clause: list[int]) -> int:
        ci = len(self.clauses)
        self.clauses.append(clause)
        self.watches.setdefault(clause[0], []).append(ci)
        self.watches.setdefault(clause[1], []).append(ci)
        return ci

    def propagate(self) -> int | None:
        clauses = self.clauses
        while self.qhead < len(self.trail):
            false_lit = -self.trail[self.qhead]
            self.qhead += 1
            ws = self.watches.get(false_lit)
            if not ws:
                continue
            keep = []
            conflict = None
            i = 0
            while i < len(ws):
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                if self.lit_value(c[0]) > 0:
                    keep.append(ci)
                    continue
                for k in range(2, len(c)):
                    if self.lit_value(c[k]) >= 0:
                        c[1], c[k] = c[k], c[1]
                        self.watches.setdefault(c[1], []).append(ci)
                        break
                else:
                    keep.append(ci)
                    if self.lit_value(c[0]) < 0:
                        conflict = ci
                        keep.extend(ws[i:])
                        break
                    self.enqueue(c[0], ci)
            self.watches[false_lit] = keep
            if conflict is not None:
                return conflict
        return None

    def analyze(self, conflict: int) -> tuple[list[int], int]:
        seen = [False] * (self.n + 1)
        learnt = [0]
        counter = 0
        p = None
        idx = len(self.trail) - 1
        current = len(self.trail_lim)
        ci = conflict
        while True:
            for q in self.clauses[ci]:
                if q == p:
                    continue
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self.bump_var(v)
                    if self.level[v] >= current:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            seen[abs(p)] = False
            counter -= 1
            if counter == 0:
                break
            ci = self.reason[abs(p)]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda k: self.level[abs(learnt[k])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def bump_var(self, v: int) -> None:
        self.activity[v] += self.bump
        if self.activity[v] > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.bump *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.n + 1) if not self.value[u]]
            heapq.heapify(self.heap)
        else:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        for lit in reversed(self.trail[start:]):
            v = abs(lit)
            self.saved[v] = self.value[v]
            self.value[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def pick_branch(self) -> int | None:
        while self.heap:
            neg_act, v = heapq.heappop(self.heap)
            if not self.value[v] and -neg_act == self.activity[v]:
                return v if self.saved[v] > 0 else -v
        return None


def solve(num_vars: int, clauses: Sequence[Sequence[int]], phase: bool = True,
          max_conflicts: int | None = None) -> dict[int, bool] | None:
    """Return a satisfying assignment ``{var: bool}`` or ``None`` if unsatisfiable."""
    s = _Solver(num_vars, phase)
    units = []
    for raw in clauses:
        lits = list(dict.fromkeys(raw))
        if any(-lit in lits for lit in lits):
            continue
        if not lits:
            return None
        if len(lits) == 1:
            units.append(lits[0])
        else:
            s.attach(lits)
    for lit in units:
        if not s.enqueue(lit, None):
            return None
    if s.propagate() is not None:
        return None
    conflicts = 0
    restart_at = 100
    since_restart = 0
    while True:
        conflict = s.propagate()
        if conflict is not None:
            conflicts += 1
            since_restart += 1
            if not s.trail_lim:
                return None
            if max_conflicts is not None and conflicts > max_conflicts:
                raise RuntimeError("conflict budget exhausted")
            learnt, back = s.analyze(conflict)
            s.cancel_until(back)
            if len(learnt) == 1:
                s.enqueue(learnt[0], None)
            else:
                ci = s.attach(learnt)
                s.enqueue(learnt[0], ci)
            s.bump *= 1.05
            continue
        if since_restart >= restart_at:
            since_restart = 0
            restart_at = int(restart_at * 1.5)
            s.cancel_until(0)
            continue
        lit = s.pick_branch()
        if lit is None:
            return {v: s.value[v] > 0 for v in range(1, num_vars + 1)}
        s.trail_lim.append(len(s.trail))
        s.enqueue(lit, None)
