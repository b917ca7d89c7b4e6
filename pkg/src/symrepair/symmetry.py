"""Groups of state-mappings, representative maps and quotient structures.

Groups are small here, so they are materialized element by element.  An
element is stored as a tuple of state indices (the image of state ``i`` of the
carrier is ``states[g[i]]``); the public API speaks in state names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .ctl import Formula, check, max_prop_subformulae
from .kripke import (BoundExceeded, KripkeStructure, StructureError,
                     SubStructure, Transition, is_substructure)

DEFAULT_GROUP_BOUND = 10_080


class SymmetryError(ValueError):
    pass


def is_state_mapping(m: KripkeStructure, f: Mapping[str, str]) -> bool:
    """True iff ``f`` preserves initial states and transitions of ``m``."""
    states = set(m.states)
    if set(f) != states or set(f.values()) != states:
        raise SymmetryError("mapping is not a bijection on the states of the structure")
    if {f[s] for s in m.initial} != set(m.initial):
        return False
    image = {(f[s], f[t]) for s, t in m.transitions}
    # f is a bijection, so equal cardinality makes the inclusion an equivalence
    return image == set(m.transitions)


def closure(gens: Iterable, compose: Callable, identity, bound: int = DEFAULT_GROUP_BOUND) -> list:
    """Finite group generated by ``gens``, identity first, then in BFS order."""
    gens = list(gens)
    elements = [identity]
    seen = {identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                b = compose(g, a)
                if b not in seen:
                    seen.add(b)
                    elements.append(b)
                    nxt.append(b)
                    if len(elements) > bound:
                        raise BoundExceeded(f"group closure exceeds {bound} elements")
        frontier = nxt
    return elements


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    carrier: KripkeStructure
    elements: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        for g in self.elements:
            yield self.as_mapping(g)

    def as_mapping(self, g) -> dict[str, str]:
        states = self.carrier.states
        return {states[i]: states[j] for i, j in enumerate(g)}

    def image(self, g, s: str) -> str:
        m = self.carrier
        return m.states[g[m.index(s)]]

    def orbit(self, s: str) -> list[str]:
        m = self.carrier
        i = m.index(s)
        return m.sort_states({m.states[g[i]] for g in self.elements})


def _to_tuple(m: KripkeStructure, f: Mapping[str, str]) -> tuple[int, ...]:
    return tuple(m.index(f[s]) for s in m.states)


def group_closure(m: KripkeStructure, gens: Sequence[Mapping[str, str]],
                  bound: int = DEFAULT_GROUP_BOUND) -> SymmetryGroup:
    for f in gens:
        if not is_state_mapping(m, f):
            raise SymmetryError(f"generator {dict(f)} is not a state-mapping")
    identity = tuple(range(len(m.states)))
    tuples = [_to_tuple(m, f) for f in gens]
    elements = closure(tuples, lambda g, a: tuple(g[i] for i in a), identity, bound)
    return SymmetryGroup(m, tuple(elements))


def trivial_group(m: KripkeStructure) -> SymmetryGroup:
    return SymmetryGroup(m, (tuple(range(len(m.states))),))


def orbits(g: SymmetryGroup, m: KripkeStructure | None = None) -> list[list[str]]:
    m = m or g.carrier
    if m is not g.carrier:
        raise SymmetryError("group does not act on this structure")
    seen = set()
    out = []
    for s in m.states:
        if s not in seen:
            orb = g.orbit(s)
            seen.update(orb)
            out.append(orb)
    return out


RepresentativeMap = dict  # state name -> representative state name


def canonical_representative_map(g: SymmetryGroup, m: KripkeStructure | None = None) -> RepresentativeMap:
    m = m or g.carrier
    theta = {}
    for orb in orbits(g, m):
        for s in orb:
            theta[s] = orb[0]
    validate_representative_map(theta, g)
    return theta


def validate_representative_map(theta: Mapping[str, str], g: SymmetryGroup) -> None:
    m = g.carrier
    if set(theta) != set(m.states):
        raise SymmetryError("representative map must be defined on every state")
    for orb in orbits(g):
        reps = {theta[s] for s in orb}
        if len(reps) != 1:
            raise SymmetryError(f"representative map does not respect orbit {orb}")
        (rep,) = reps
        if rep not in orb:
            # rep outside the orbit breaks separation or idempotence
            raise SymmetryError(f"representative {rep!r} lies outside orbit {orb}")
    for s in m.states:
        if theta[theta[s]] != theta[s]:
            raise SymmetryError(f"representative map is not idempotent at {s!r}")


@dataclass(frozen=True, eq=False)
class QuotientResult:
    quotient: KripkeStructure
    theta: dict
    source: KripkeStructure
    group: SymmetryGroup = field(repr=False)

    def preimage(self, rep: str) -> list[str]:
        return self.source.sort_states(s for s, r in self.theta.items() if r == rep)


def quotient(m: KripkeStructure, g: SymmetryGroup, theta: Mapping[str, str] | None = None) -> QuotientResult:
    if g.carrier is not m:
        raise SymmetryError("group does not act on this structure")
    theta = dict(theta) if theta is not None else canonical_representative_map(g, m)
    validate_representative_map(theta, g)
    reps = m.sort_states(set(theta.values()))
    qm = KripkeStructure(
        states=tuple(reps),
        initial=frozenset(theta[s] for s in m.initial),
        transitions=frozenset((theta[s], theta[t]) for s, t in m.transitions),
        ap=m.ap,
        labels={r: m.labels[r] for r in reps},
    )
    return QuotientResult(qm, theta, m, g)


def _images(g: SymmetryGroup, transitions: Iterable[Transition]) -> set[Transition]:
    out = set()
    for s, t in transitions:
        for e in g.elements:
            out.add((g.image(e, s), g.image(e, t)))
    return out


def is_g_closed(n: SubStructure, g: SymmetryGroup) -> bool:
    if n.parent is not g.carrier:
        raise SymmetryError("group does not act on the parent of this substructure")
    for e in g.elements:
        if any(g.image(e, s) not in n.states for s in n.states):
            return False
        if any((g.image(e, s), g.image(e, t)) not in n.transitions for s, t in n.transitions):
            return False
    return True


def is_g_invariant(m: KripkeStructure, g: SymmetryGroup, f: Formula) -> bool:
    """Every maximal propositional subformula has orbit-constant truth value."""
    for p in max_prop_subformulae(f):
        holds = check(m, p).holds
        for s in m.states:
            if any(holds[g.image(e, s)] != holds[s] for e in g.elements):
                return False
    return True


def quotient_substructure(n: SubStructure, qr: QuotientResult) -> SubStructure:
    if n.parent is not qr.source:
        raise SymmetryError("substructure is not under the quotiented structure")
    if not is_g_closed(n, qr.group):
        raise SymmetryError("quotient map is only defined on G-closed substructures")
    th = qr.theta
    return SubStructure(qr.quotient,
                        frozenset(th[s] for s in n.states),
                        frozenset((th[s], th[t]) for s, t in n.transitions))


def lift_maximal(nbar: SubStructure, qr: QuotientResult) -> SubStructure:
    """Largest G-closed substructure whose quotient is ``nbar``."""
    if not is_substructure(nbar, qr.quotient):
        raise StructureError("argument is not a substructure of the quotient")
    th = qr.theta
    states = frozenset(s for s in qr.source.states if th[s] in nbar.states)
    transitions = frozenset(e for e in qr.source.transitions if (th[e[0]], th[e[1]]) in nbar.transitions)
    return SubStructure(qr.source, states, transitions)


def lift_minimal(nbar: SubStructure, qr: QuotientResult) -> SubStructure:
    """A G-closed preimage of ``nbar`` using one witnessing transition orbit per quotient edge."""
    if not is_substructure(nbar, qr.quotient):
        raise StructureError("argument is not a substructure of the quotient")
    m = qr.source
    th = qr.theta
    states = frozenset(s for s in m.states if th[s] in nbar.states)
    witnesses = {}
    for e in m.sorted_transitions():
        key = (th[e[0]], th[e[1]])
        if key in nbar.transitions and key not in witnesses:
            witnesses[key] = e
    transitions = frozenset(_images(qr.group, witnesses.values()))
    return SubStructure(m, states, transitions)


def is_g_maximal(n: SubStructure, qr: QuotientResult) -> bool:
    return lift_maximal(quotient_substructure(n, qr), qr) == n


def check_g_bisimulation(m, mbar, rel: Iterable[tuple[str, str]], theta: Mapping[str, str],
                         g: SymmetryGroup | None = None, strict: bool = True) -> bool:
    """Check the three G-bisimulation clauses for ``rel`` between ``m`` and ``mbar``.

    ``strict`` demands ``t == theta[s]`` for every related pair; otherwise the
    pair only has to lie in one orbit (``theta[s] == theta[t]``, or an explicit
    group element when ``g`` is given).
    """
    rel = set(rel)
    succ = _successor_table(m)
    succ_bar = _successor_table(mbar)
    for s, t in rel:
        if s not in succ or t not in succ_bar:
            return False
        if strict:
            if theta.get(s) != t:
                return False
        elif g is not None:
            if not any(g.image(e, s) == t for e in g.elements):
                return False
        elif theta.get(s) != theta.get(t):
            return False
        for s2 in succ[s]:
            if not any((s2, t2) in rel for t2 in succ_bar[t]):
                return False
        for t2 in succ_bar[t]:
            if not any((s2, t2) in rel for s2 in succ[s]):
                return False
    return True


def _successor_table(m) -> dict[str, list[str]]:
    if isinstance(m, SubStructure):
        table = {s: [] for s in m.states}
        for s, t in m.sorted_transitions():
            table[s].append(t)
        return table
    return {s: list(m.successors(s)) for s in m.states}


def project_path(path: Sequence[str], qr: QuotientResult) -> list[str]:
    return [qr.theta[s] for s in path]


def cover_path(qpath: Sequence[str], start: str, qr: QuotientResult) -> list[str]:
    """A path of the source through ``start`` whose image is ``qpath``.

    Built step by step: a witness transition for each quotient edge is moved
    onto the current end of the path by a group element.
    """
    g = qr.group
    m = qr.source
    th = qr.theta
    if th[start] != qpath[0]:
        raise SymmetryError("start state does not project to the first quotient state")
    path = [start]
    for a, b in zip(qpath, qpath[1:]):
        cur = path[-1]
        for s, t in m.sorted_transitions():
            if th[s] != a or th[t] != b:
                continue
            for e in g.elements:
                if g.image(e, s) == cur:
                    path.append(g.image(e, t))
                    break
            else:
                continue
            break
        else:
            raise SymmetryError(f"quotient edge ({a!r}, {b!r}) has no preimage")
    return path
