"""Deliberately naive reference implementations used as test oracles."""

import itertools

from symrepair.ctl import AR, AU, AX, ER, EU, EX, And, Bool, Not, Or, Prop
from symrepair.kripke import SubStructure


def graph(m):
    """(states, succ, labels) for a structure or substructure."""
    if isinstance(m, SubStructure):
        states = set(m.states)
        succ = {s: {t for (u, t) in m.transitions if u == s} for s in states}
        labels = {s: m.parent.labels[s] for s in states}
    else:
        states = set(m.states)
        succ = {s: {t for (u, t) in m.transitions if u == s} for s in states}
        labels = dict(m.labels)
    return states, succ, labels


def naive_check(m, f):
    """Set of states satisfying ``f`` by Kleene iteration of the fixpoint equations."""
    states, succ, labels = graph(m)

    def ev(h):
        if isinstance(h, Bool):
            return set(states) if h.value else set()
        if isinstance(h, Prop):
            return {s for s in states if h.name in labels[s]}
        if isinstance(h, Not):
            return states - ev(h.arg)
        if isinstance(h, And):
            return ev(h.lhs) & ev(h.rhs)
        if isinstance(h, Or):
            return ev(h.lhs) | ev(h.rhs)
        if isinstance(h, AX):
            a = ev(h.arg)
            return {s for s in states if succ[s] <= a}
        if isinstance(h, EX):
            a = ev(h.arg)
            return {s for s in states if succ[s] & a}
        phi, psi = ev(h.lhs), ev(h.rhs)
        if isinstance(h, (AR, ER)):
            z = set(states)
            quant = all if isinstance(h, AR) else any
            while True:
                nz = {s for s in states if s in psi and (s in phi or quant(t in z for t in succ[s]))}
                if nz == z:
                    return z
                z = nz
        quant = all if isinstance(h, AU) else any
        z = set()
        while True:
            nz = {s for s in states if s in psi or (s in phi and quant(t in z for t in succ[s]))}
            if nz == z:
                return z
            z = nz

    return ev(f)


def brute_sat(num_vars, clauses):
    for bits in itertools.product([False, True], repeat=num_vars):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False


def union_find_orbits(states, mappings):
    parent = {s: s for s in states}

    def find(s):
        while parent[s] != s:
            s = parent[s]
        return s

    for f in mappings:
        for s, t in f.items():
            a, b = find(s), find(t)
            if a != b:
                parent[a] = b
    groups = {}
    for s in states:
        groups.setdefault(find(s), set()).add(s)
    return sorted(frozenset(g) for g in groups.values())


def all_substructures(m):
    """Every total-or-empty substructure, by filtering all subsets (no cleverness)."""
    edges = sorted(m.transitions)
    out = []
    for r in range(len(m.states) + 1):
        for states in itertools.combinations(m.states, r):
            inner = [e for e in edges if e[0] in states and e[1] in states]
            for mask in range(1 << len(inner)):
                ts = frozenset(e for i, e in enumerate(inner) if mask >> i & 1)
                if all(any(e[0] == s for e in ts) for s in states):
                    out.append(SubStructure(m, frozenset(states), ts))
    return out
