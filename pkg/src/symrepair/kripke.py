"""Kripke structures and the lattice of their substructures.

States are identified by their names.  A structure keeps its states in a
fixed order (the order they were declared in), and every set-valued output
is emitted in that order so results are reproducible.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

Transition = tuple[str, str]


class StructureError(ValueError):
    """Raised for malformed structures or mismatched substructures."""


class BoundExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class KripkeStructure:
    states: tuple[str, ...]
    initial: frozenset[str]
    transitions: frozenset[Transition]
    ap: tuple[str, ...]
    labels: Mapping[str, frozenset[str]]
    _index: dict = field(init=False, repr=False, compare=False)
    _succ: dict = field(init=False, repr=False, compare=False)
    _pred: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {s: i for i, s in enumerate(self.states)}
        succ = {s: [] for s in self.states}
        pred = {s: [] for s in self.states}
        for s, t in sorted(self.transitions, key=lambda e: (index.get(e[0], -1), index.get(e[1], -1))):
            if s in succ:
                succ[s].append(t)
            if t in pred:
                pred[t].append(s)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_succ", {s: tuple(v) for s, v in succ.items()})
        object.__setattr__(self, "_pred", {s: tuple(v) for s, v in pred.items()})

    @classmethod
    def build(cls, states, initial, transitions, labels, ap=None) -> "KripkeStructure":
        """Convenience constructor accepting plain iterables."""
        states = tuple(states)
        labels = {s: frozenset(labels.get(s, ())) for s in states}
        if ap is None:
            seen = []
            for s in states:
                for p in sorted(labels[s]):
                    if p not in seen:
                        seen.append(p)
            ap = seen
        return cls(
            states=states,
            initial=frozenset(initial),
            transitions=frozenset((s, t) for s, t in transitions),
            ap=tuple(ap),
            labels=labels,
        )

    def index(self, s: str) -> int:
        return self._index[s]

    def successors(self, s: str) -> tuple[str, ...]:
        return self._succ[s]

    def predecessors(self, s: str) -> tuple[str, ...]:
        return self._pred[s]

    def sort_states(self, states: Iterable[str]) -> list[str]:
        return sorted(states, key=self._index.__getitem__)

    def sort_transitions(self, transitions: Iterable[Transition]) -> list[Transition]:
        idx = self._index
        return sorted(transitions, key=lambda e: (idx[e[0]], idx[e[1]]))

    def sorted_transitions(self) -> list[Transition]:
        return self.sort_transitions(self.transitions)

    def sorted_initial(self) -> list[str]:
        return self.sort_states(self.initial)

    def full(self) -> "SubStructure":
        return SubStructure(self, frozenset(self.states), self.transitions)

    def empty(self) -> "SubStructure":
        return SubStructure(self, frozenset(), frozenset())

    def __len__(self):
        return len(self.states)

    def __repr__(self):
        return (f"KripkeStructure({len(self.states)} states, "
                f"{len(self.transitions)} transitions, initial={self.sorted_initial()})")

    def to_dict(self) -> dict:
        ap_index = {p: i for i, p in enumerate(self.ap)}
        return {
            "states": list(self.states),
            "initial": self.sorted_initial(),
            "ap": list(self.ap),
            "labels": {s: sorted(self.labels[s], key=lambda p: (ap_index.get(p, len(ap_index)), p))
                       for s in self.states},
            "transitions": [list(e) for e in self.sorted_transitions()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "KripkeStructure":
        try:
            states = list(data["states"])
            transitions = [tuple(e) for e in data["transitions"]]
            initial = data["initial"]
            labels = data.get("labels", {})
        except KeyError as exc:
            raise StructureError(f"structure file is missing key {exc}") from None
        if len(set(states)) != len(states):
            raise StructureError("duplicate state names")
        for e in transitions:
            if len(e) != 2:
                raise StructureError(f"transition {list(e)} is not a pair")
        return cls.build(states, initial, transitions, labels, data.get("ap"))

    @classmethod
    def from_json(cls, text: str) -> "KripkeStructure":
        return cls.from_dict(json.loads(text))


def load_structure(path, validate=True) -> KripkeStructure:
    with open(path) as fh:
        m = KripkeStructure.from_json(fh.read())
    if validate:
        report = validate_structure(m)
        if report:
            raise StructureError("; ".join(report))
    return m


def validate_structure(m: KripkeStructure) -> list[str]:
    """Return one message per violated structure invariant (empty if valid)."""
    problems = []
    states = set(m.states)
    if not states:
        problems.append("states: must be nonempty")
    if not m.initial:
        problems.append("initial: must be nonempty")
    for s in sorted(m.initial - states):
        problems.append(f"initial: {s!r} is not a state")
    for s, t in sorted(m.transitions):
        if s not in states or t not in states:
            problems.append(f"transitions: ({s!r}, {t!r}) refers to an unknown state")
    for s in m.states:
        if not m.successors(s):
            problems.append(f"totality: state {s!r} has no outgoing transition")
    if set(m.labels) != states:
        extra = sorted(set(m.labels) - states)
        missing = m.sort_states(states - set(m.labels))
        problems.append(f"labels: defined for {extra} (unknown) / missing for {missing}")
    ap = set(m.ap)
    for s in m.states:
        bad = sorted(set(m.labels.get(s, ())) - ap)
        if bad:
            problems.append(f"labels: state {s!r} carries propositions {bad} outside ap")
    reach = reachable(m, m.initial & states, m.transitions)
    for s in m.states:
        if s not in reach:
            problems.append(f"reachability: state {s!r} is unreachable from the initial states")
    return problems


def reachable(m: KripkeStructure, sources, transitions) -> set[str]:
    succ: dict[str, list[str]] = {}
    for s, t in transitions:
        succ.setdefault(s, []).append(t)
    seen = set(sources)
    stack = list(seen)
    while stack:
        s = stack.pop()
        for t in succ.get(s, ()):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


@dataclass(frozen=True)
class SubStructure:
    """A (states, transitions) pair under a parent structure.

    Initial states and labels are never stored; they are derived from the
    parent by restriction.
    """

    parent: KripkeStructure = field(compare=False, hash=False, repr=False)
    states: frozenset[str]
    transitions: frozenset[Transition]

    @property
    def initial(self) -> frozenset[str]:
        return self.parent.initial & self.states

    @property
    def labels(self) -> dict[str, frozenset[str]]:
        return {s: self.parent.labels[s] for s in self.parent.sort_states(self.states)}

    @property
    def ap(self) -> tuple[str, ...]:
        return self.parent.ap

    def is_empty(self) -> bool:
        return not self.states and not self.transitions

    def is_total(self) -> bool:
        sources = {s for s, _ in self.transitions}
        return self.states <= sources

    def __le__(self, other: "SubStructure") -> bool:
        _same_parent(self, other)
        return self.states <= other.states and self.transitions <= other.transitions

    def __lt__(self, other: "SubStructure") -> bool:
        return self <= other and self != other

    def __or__(self, other):
        return join(self, other)

    def __and__(self, other):
        return meet(self, other)

    def sorted_states(self) -> list[str]:
        return self.parent.sort_states(self.states)

    def sorted_transitions(self) -> list[Transition]:
        return self.parent.sort_transitions(self.transitions)

    def __repr__(self):
        return f"SubStructure(states={self.sorted_states()}, transitions={self.sorted_transitions()})"

    def reachable_part(self) -> "SubStructure":
        """Restriction to what the kept initial states can reach (total if self is)."""
        if not self.initial:
            return self
        keep = frozenset(reachable(self.parent, self.initial, self.transitions))
        return SubStructure(self.parent, self.states & keep,
                            frozenset(e for e in self.transitions if e[0] in keep))

    def as_structure(self, prune_unreachable=False) -> KripkeStructure:
        """View this substructure as a standalone structure.

        The view is not validated: it may have no initial states or contain
        states that are unreachable from them.
        """
        states = self.states
        transitions = self.transitions
        if prune_unreachable:
            keep = reachable(self.parent, self.initial, transitions)
            dropped = states - keep
            if dropped:
                warnings.warn(f"pruning unreachable states {self.parent.sort_states(dropped)}",
                              stacklevel=2)
            states = states & keep
            transitions = frozenset(e for e in transitions if e[0] in states)
        order = self.parent.sort_states(states)
        return KripkeStructure(
            states=tuple(order),
            initial=self.parent.initial & states,
            transitions=frozenset(transitions),
            ap=self.parent.ap,
            labels={s: self.parent.labels[s] for s in order},
        )

    def to_dict(self) -> dict:
        return {
            "states": self.sorted_states(),
            "transitions": [list(e) for e in self.sorted_transitions()],
        }


def substructure_from_dict(parent: KripkeStructure, data: dict) -> SubStructure:
    n = SubStructure(parent, frozenset(data["states"]),
                     frozenset(tuple(e) for e in data["transitions"]))
    if not is_substructure(n, parent):
        raise StructureError("not a substructure of the given structure")
    return n


def _same_parent(n: SubStructure, n2: SubStructure):
    if n.parent is not n2.parent:
        raise StructureError("substructures belong to different parent structures")


def is_substructure(n: SubStructure, m: KripkeStructure) -> bool:
    if n.parent is not m:
        raise StructureError("substructure parent is not the given structure")
    if not n.states <= set(m.states):
        return False
    if not n.transitions <= m.transitions:
        return False
    if any(s not in n.states or t not in n.states for s, t in n.transitions):
        return False
    return n.is_empty() or n.is_total()


def prune_to_total(states, transitions, parent: KripkeStructure) -> SubStructure:
    """Largest total-or-empty substructure below (states, transitions)."""
    states = set(states)
    transitions = {e for e in transitions if e[0] in states and e[1] in states}
    out_count = dict.fromkeys(states, 0)
    preds: dict[str, list[str]] = {s: [] for s in states}
    for s, t in transitions:
        out_count[s] += 1
        preds[t].append(s)
    dead = [s for s in states if out_count[s] == 0]
    removed = set()
    while dead:
        t = dead.pop()
        if t in removed:
            continue
        removed.add(t)
        for s in preds[t]:
            if s in removed:
                continue
            out_count[s] -= 1
            if out_count[s] == 0:
                dead.append(s)
    kept = frozenset(states - removed)
    kept_tr = frozenset(e for e in transitions if e[0] in kept and e[1] in kept)
    return SubStructure(parent, kept, kept_tr)


def join(n: SubStructure, n2: SubStructure) -> SubStructure:
    _same_parent(n, n2)
    return SubStructure(n.parent, n.states | n2.states, n.transitions | n2.transitions)


def meet(n: SubStructure, n2: SubStructure) -> SubStructure:
    _same_parent(n, n2)
    return prune_to_total(n.states & n2.states, n.transitions & n2.transitions, n.parent)


def join_all(subs: Iterable[SubStructure], parent: KripkeStructure) -> SubStructure:
    result = parent.empty()
    for n in subs:
        result = join(result, n)
    return result


def generated(m: KripkeStructure, s_prime) -> SubStructure:
    """The largest substructure whose states lie in ``s_prime``."""
    s_prime = set(s_prime)
    unknown = s_prime - set(m.states)
    if unknown:
        raise StructureError(f"unknown states {sorted(unknown)}")
    inner = [e for e in m.transitions if e[0] in s_prime and e[1] in s_prime]
    return prune_to_total(s_prime, inner, m)


def enumerate_substructures(m: KripkeStructure, bound: int = 20) -> Iterator[SubStructure]:
    """Yield every substructure of ``m`` exactly once, the empty one first.

    Order: state subsets by increasing size (then by state order), and for a
    given state set, transition sets in lexicographic product order.
    """
    if len(m.transitions) > bound:
        raise BoundExceeded(f"{len(m.transitions)} transitions exceed the enumeration bound {bound}")
    yield m.empty()
    n = len(m.states)
    for size in range(1, n + 1):
        for combo in itertools.combinations(m.states, size):
            chosen = set(combo)
            choices = []
            for s in combo:
                out = [(s, t) for t in m.successors(s) if t in chosen]
                if not out:
                    break
                subsets = []
                for k in range(len(out), 0, -1):
                    subsets.extend(itertools.combinations(out, k))
                choices.append(subsets)
            else:
                states = frozenset(combo)
                for pick in itertools.product(*choices):
                    yield SubStructure(m, states, frozenset(itertools.chain.from_iterable(pick)))
