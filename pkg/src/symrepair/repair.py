"""Subtractive model repair.

A repair keeps a nonempty, total substructure that satisfies the formula.
The search is a satisfiability problem over deletion variables: one "keep"
variable per state and per transition, one "sat" variable per (state,
subformula), and unary rank counters that make least fixpoints (the until
operators) well founded.  Every answer is re-checked with the model checker
before it is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import sat
from .ctl import (AR, AU, AX, ER, EU, EX, And, Bool, Formula, Not, Or, Prop,
                  check, models, propositions, subformulas, to_text)
from .kripke import (KripkeStructure, StructureError, SubStructure,
                     enumerate_substructures, is_substructure)
from .symmetry import (QuotientResult, SymmetryGroup, is_g_closed,
                       is_g_invariant, is_g_maximal, lift_maximal, quotient)


class RepairError(RuntimeError):
    """The encoding produced an answer the model checker rejects."""


class NotInvariantError(ValueError):
    pass


def to_pnf(f: Formula, negate: bool = False) -> Formula:
    """Push negations down to propositions."""
    if isinstance(f, Bool):
        return Bool(f.value != negate)
    if isinstance(f, Prop):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return to_pnf(f.arg, not negate)
    if isinstance(f, And):
        op = Or if negate else And
        return op(to_pnf(f.lhs, negate), to_pnf(f.rhs, negate))
    if isinstance(f, Or):
        op = And if negate else Or
        return op(to_pnf(f.lhs, negate), to_pnf(f.rhs, negate))
    if isinstance(f, AX):
        return (EX if negate else AX)(to_pnf(f.arg, negate))
    if isinstance(f, EX):
        return (AX if negate else EX)(to_pnf(f.arg, negate))
    dual = {AR: EU, ER: AU, AU: ER, EU: AR}
    op = dual[type(f)] if negate else type(f)
    return op(to_pnf(f.lhs, negate), to_pnf(f.rhs, negate))


def is_pnf(f: Formula) -> bool:
    return all(isinstance(g.arg, Prop) for g in subformulas(f) if isinstance(g, Not))


@dataclass(frozen=True)
class RepairOptions:
    require_initial: bool = True
    maximize_retained: bool = False


@dataclass(frozen=True, eq=False)
class RepairProblem:
    structure: KripkeStructure
    formula: Formula
    options: RepairOptions = RepairOptions()

    def __post_init__(self):
        unknown = propositions(self.formula) - set(self.structure.ap)
        if unknown:
            raise StructureError(f"formula uses propositions {sorted(unknown)} not in the structure")


@dataclass
class DeletionModel:
    keep_state: dict
    keep_transition: dict
    sat: dict = field(default_factory=dict)
    rank: dict = field(default_factory=dict)

    def substructure(self, m: KripkeStructure) -> SubStructure:
        return SubStructure(
            m,
            frozenset(s for s, k in self.keep_state.items() if k),
            frozenset(e for e, k in self.keep_transition.items() if k),
        )


class CnfInstance(sat.CNF):
    def __init__(self, problem: RepairProblem):
        super().__init__()
        self.problem = problem
        self.subformulas: list[Formula] = []

    def decode(self, model: dict[int, bool]) -> DeletionModel:
        m = self.problem.structure
        ks = {s: model[self.var(("keep", s))] for s in m.states}
        kt = {e: model[self.var(("keep", *e))] for e in m.sorted_transitions()}
        y = {}
        ranks = {}
        n = len(m.states)
        for j, f in enumerate(self.subformulas):
            for s in m.states:
                y[s, f] = model[self.var(("sat", s, j))]
                if isinstance(f, (EU, AU)):
                    ranks[s, f] = next((i for i in range(n) if model[self.var(("rank", s, j, i))]), None)
        return DeletionModel(ks, kt, y, ranks)


def _name(key) -> str:
    return " ".join(str(k) for k in key)


def encode(problem: RepairProblem) -> CnfInstance:
    f = problem.formula
    if not is_pnf(f):
        raise ValueError("formula must be in positive normal form (see to_pnf)")
    m = problem.structure
    cnf = CnfInstance(problem)
    keep = {s: cnf.new_var(("keep", s)) for s in m.states}
    keep_t = {e: cnf.new_var(("keep", *e)) for e in m.sorted_transitions()}

    # structural part
    for (s, t), v in keep_t.items():
        cnf.add([-v, keep[s]])
        cnf.add([-v, keep[t]])
    for s in m.states:
        cnf.add([-keep[s]] + [keep_t[s, t] for t in m.successors(s)])
    anchor = m.sorted_initial() if problem.options.require_initial else list(m.states)
    cnf.add([keep[s] for s in anchor])

    subs = subformulas(f)
    cnf.subformulas = subs
    index = {g: j for j, g in enumerate(subs)}
    y = {(s, j): cnf.new_var(("sat", s, j)) for j in range(len(subs)) for s in m.states}
    n = len(m.states)

    for j, g in enumerate(subs):
        for s in m.states:
            v = y[s, j]
            succ = m.successors(s)
            if isinstance(g, Bool):
                if not g.value:
                    cnf.add([-v])
            elif isinstance(g, Prop):
                if g.name not in m.labels[s]:
                    cnf.add([-v])
            elif isinstance(g, Not):
                if g.arg.name in m.labels[s]:
                    cnf.add([-v])
            elif isinstance(g, And):
                cnf.add([-v, y[s, index[g.lhs]]])
                cnf.add([-v, y[s, index[g.rhs]]])
            elif isinstance(g, Or):
                cnf.add([-v, y[s, index[g.lhs]], y[s, index[g.rhs]]])
            elif isinstance(g, AX):
                a = index[g.arg]
                for t in succ:
                    cnf.add([-v, -keep_t[s, t], y[t, a]])
            elif isinstance(g, EX):
                a = index[g.arg]
                witnesses = []
                for t in succ:
                    w = cnf.new_var(("witness", s, t, j))
                    cnf.add([-w, keep_t[s, t]])
                    cnf.add([-w, y[t, a]])
                    witnesses.append(w)
                cnf.add([-v] + witnesses)
            elif isinstance(g, AR):
                lhs, rhs = index[g.lhs], index[g.rhs]
                cnf.add([-v, y[s, rhs]])
                for t in succ:
                    cnf.add([-v, y[s, lhs], -keep_t[s, t], y[t, j]])
            elif isinstance(g, ER):
                lhs, rhs = index[g.lhs], index[g.rhs]
                cnf.add([-v, y[s, rhs]])
                witnesses = []
                for t in succ:
                    w = cnf.new_var(("witness", s, t, j))
                    cnf.add([-w, keep_t[s, t]])
                    cnf.add([-w, y[t, j]])
                    witnesses.append(w)
                cnf.add([-v, y[s, lhs]] + witnesses)
            elif isinstance(g, (EU, AU)):
                pass  # rank variables need every state's counter first
            else:
                raise TypeError(f"unsupported node {g!r}")

        if isinstance(g, (EU, AU)):
            _encode_until(cnf, m, g, j, index, y, keep_t, n)

    for s in m.sorted_initial():
        cnf.add([-keep[s], y[s, index[f]]])
    return cnf


def _encode_until(cnf, m, g, j, index, y, keep_t, n):
    # rank[s, i] means: g holds at s, witnessed within i steps
    lhs, rhs = index[g.lhs], index[g.rhs]
    rank = {(s, i): cnf.new_var(("rank", s, j, i)) for s in m.states for i in range(n)}
    for s in m.states:
        cnf.add([-y[s, j], rank[s, n - 1]])
        for i in range(n - 1):
            cnf.add([-rank[s, i], rank[s, i + 1]])
        cnf.add([-rank[s, 0], y[s, rhs]])
        for i in range(1, n):
            r = rank[s, i]
            cnf.add([-r, y[s, rhs], y[s, lhs]])
            if isinstance(g, EU):
                witnesses = []
                for t in m.successors(s):
                    w = cnf.new_var(("witness", s, t, j, i))
                    cnf.add([-w, keep_t[s, t]])
                    cnf.add([-w, rank[t, i - 1]])
                    witnesses.append(w)
                cnf.add([-r, y[s, rhs]] + witnesses)
            else:
                for t in m.successors(s):
                    cnf.add([-r, y[s, rhs], -keep_t[s, t], rank[t, i - 1]])


def at_least(cnf: sat.CNF, lits: list[int], k: int) -> None:
    """Add clauses forcing at least ``k`` of ``lits`` true (totalizer, one direction)."""
    if k <= 0:
        return
    if k > len(lits):
        cnf.add([])
        return

    def build(xs):
        if len(xs) == 1:
            return [xs[0]]
        a = build(xs[: len(xs) // 2])
        b = build(xs[len(xs) // 2:])
        out = [cnf.new_var() for _ in range(len(a) + len(b))]
        # out[r-1] -> (a has >= i+1) or (b has >= k+1) whenever i + k + 1 = r
        for i in range(len(a) + 1):
            for kk in range(len(b) + 1):
                r = i + kk + 1
                if r > len(out):
                    continue
                clause = [-out[r - 1]]
                if i < len(a):
                    clause.append(a[i])
                if kk < len(b):
                    clause.append(b[kk])
                cnf.add(clause)
        return out

    outputs = build(list(lits))
    cnf.add([outputs[k - 1]])


def sat_solve(cnf: sat.CNF, external: str | None = None) -> dict[int, bool] | None:
    if external:
        return sat.solve_external(cnf, external)
    return cnf.solve()


def _verify(n: SubStructure, m: KripkeStructure, f: Formula, require_initial: bool) -> None:
    if not is_substructure(n, m) or n.is_empty():
        raise RepairError(f"decoded result is not a nonempty substructure: {n}")
    if require_initial and not n.initial:
        raise RepairError("decoded result keeps no initial state")
    if n.initial and not models(n, f):
        raise RepairError(f"decoded result does not satisfy {to_text(f)}")
    if not n.initial and not all(check(n, f).holds.values()):
        raise RepairError(f"decoded result does not satisfy {to_text(f)}")


def repair(m: KripkeStructure, f: Formula, require_initial: bool = True,
           maximize_retained: bool = False, external: str | None = None,
           emit_cnf: str | None = None) -> SubStructure | None:
    """A nonempty total substructure of ``m`` satisfying ``f``, or ``None``.

    Without ``require_initial`` the result only has to be nonempty; if it then
    keeps no initial state every kept state satisfies ``f``.
    """
    options = RepairOptions(require_initial, maximize_retained)
    problem = RepairProblem(m, to_pnf(f), options)
    cnf = encode(problem)
    if not require_initial:
        # with no initial state kept, "n |= f" is read as f holding everywhere
        j = cnf.subformulas.index(problem.formula)
        for s in m.states:
            cnf.add([-cnf.var(("keep", s)), cnf.var(("sat", s, j))])
    if emit_cnf:
        with open(emit_cnf, "w") as fh:
            fh.write(cnf.to_dimacs(name_fmt=_name))
    model = sat_solve(cnf, external)
    if model is None:
        return None
    best = cnf.decode(model).substructure(m)
    _verify(best, m, f, require_initial)
    if maximize_retained:
        kept_vars = [cnf.var(("keep", *e)) for e in m.sorted_transitions()]
        while True:
            count = len(best.transitions)
            if count == len(kept_vars):
                break
            stronger = sat.CNF()
            stronger.num_vars = cnf.num_vars
            stronger.clauses = [list(c) for c in cnf.clauses]
            at_least(stronger, kept_vars, count + 1)
            model = sat_solve(stronger, external)
            if model is None:
                break
            best = cnf.decode(model).substructure(m)
            _verify(best, m, f, require_initial)
    # states no kept initial state can reach are dead weight
    return best.reachable_part()


def brute_force_repair(m: KripkeStructure, f: Formula, require_initial: bool = True,
                       bound: int = 20) -> SubStructure | None:
    """Exhaustive oracle: a repair keeping the most transitions.

    Ties go to the earliest substructure in enumeration order.
    """
    candidates = [n for n in enumerate_substructures(m, bound) if not n.is_empty()]
    # stable sort keeps enumeration order among equal sizes
    candidates.sort(key=lambda n: -len(n.transitions))
    for n in candidates:
        if n.initial:
            ok = models(n, f)
        elif require_initial:
            continue
        else:
            ok = all(check(n, f).holds.values())
        if ok:
            return n
    return None


@dataclass(frozen=True, eq=False)
class QuotientRepair:
    quotient: QuotientResult
    quotient_repair: SubStructure
    lifted: SubStructure


def repair_via_quotient(m: KripkeStructure, g: SymmetryGroup, f: Formula, theta=None,
                        **kwargs) -> QuotientRepair | None:
    """Repair the quotient of ``m`` and lift the result to a G-maximal substructure.

    Returns ``None`` when the quotient has no repair, i.e. no symmetric
    repair of ``m`` exists.
    """
    if not is_g_invariant(m, g, f):
        raise NotInvariantError(f"{to_text(f)} is not invariant under the group")
    qr = quotient(m, g, theta)
    nbar = repair(qr.quotient, f, **kwargs)
    if nbar is None:
        return None
    lifted = lift_maximal(nbar, qr)
    if not models(lifted, f):
        raise RepairError("lifted repair does not satisfy the formula")
    if not (is_g_closed(lifted, g) and is_g_maximal(lifted, qr)):
        raise RepairError("lifted repair is not G-maximal")
    return QuotientRepair(qr, nbar, lifted)
