import pytest
from hypothesis import assume, given, settings

from strategies import formulas, structures
from symrepair import fixtures as fx
from symrepair.ctl import EU, FALSE, TRUE, check, models, parse_formula, subformulas
from symrepair.kripke import KripkeStructure, StructureError, is_substructure
from symrepair.programs import full_index_group, reduced_structure
from symrepair.repair import (NotInvariantError, RepairOptions, RepairProblem, brute_force_repair, encode,
                              is_pnf, repair, repair_via_quotient, sat_solve, to_pnf)
from symrepair.symmetry import group_closure, is_g_closed, is_g_maximal, quotient

MUTEX = parse_formula("AG !(c1 & c2)")


def asymmetric_witness():
    """Two mirror-image branches that must be cut differently."""
    edges = [("x", "z1"), ("x", "z2"), ("z1", "a"), ("z1", "b"), ("z2", "a"), ("z2", "b"), ("a", "a"), ("b", "b")]
    m = KripkeStructure.build(["x", "z1", "z2", "a", "b"], ["x"], edges, {"a": ["p"], "b": ["q"]}, ap=["p", "q"])
    g = group_closure(m, [{"x": "x", "z1": "z2", "z2": "z1", "a": "a", "b": "b"}])
    return m, g, parse_formula("EX AX p & EX AX q")


def test_pnf_shapes():
    assert to_pnf(parse_formula("!AX p")) == parse_formula("EX !p")
    assert to_pnf(parse_formula("!(p & !q)")) == parse_formula("!p | q")
    assert to_pnf(FALSE, negate=True) == TRUE
    f = to_pnf(parse_formula("AF p"))
    assert is_pnf(f) and any(isinstance(g, EU) for g in subformulas(to_pnf(parse_formula("EF p"))))
    assert not is_pnf(parse_formula("!AX p"))
    with pytest.raises(ValueError):
        encode(RepairProblem(fx.box(), parse_formula("!AX true")))


@settings(max_examples=150, deadline=None)
@given(structures(), formulas(depth=4))
def test_pnf_preserves_meaning(pair, f):
    m, _ = pair
    g = to_pnf(f)
    assert is_pnf(g)
    assert check(m, g).holds == check(m, f).holds


def test_problem_rejects_unknown_propositions():
    with pytest.raises(StructureError):
        RepairProblem(fx.box(), parse_formula("p"))
    assert RepairOptions() == RepairOptions(True, False)


def test_mutex2_repair():
    m = fx.mutex2()
    n = repair(m, MUTEX)
    assert is_substructure(n, m) and "CC" not in n.states and models(n, MUTEX)


def test_mutex2_maximal_repair_drops_only_cc():
    m = fx.mutex2()
    n = repair(m, MUTEX, maximize_retained=True)
    assert set(m.states) - n.states == {"CC"}
    assert m.transitions - n.transitions == {("CT", "CC"), ("TC", "CC"), ("CC", "CN"), ("CC", "NC")}
    oracle = brute_force_repair(m, MUTEX)
    # the oracle also keeps CC and its out-edges, which nothing reaches any more
    assert len(oracle.transitions) == 16 and len(n.transitions) == 14
    assert oracle.reachable_part() == n


def test_already_satisfied_keeps_everything():
    m = fx.mutex2()
    f = parse_formula("AG (n1 | t1 | c1)")
    assert repair(m, f, maximize_retained=True) == m.full()


def test_false_has_no_repair():
    m = fx.box()
    assert repair(m, FALSE) is None
    assert brute_force_repair(m, FALSE) is None


def test_initial_state_requirement():
    # the only initial state can never satisfy p, but b can on its own
    m = KripkeStructure.build(["a", "b"], ["a"], [("a", "b"), ("b", "b")], {"b": ["p"]})
    f = parse_formula("p")
    assert repair(m, f) is None
    n = repair(m, f, require_initial=False)
    assert n.states == frozenset({"b"}) and not n.initial
    assert brute_force_repair(m, f, require_initial=False).states == frozenset({"b"})


def test_three_mutex_quotient_repair():
    p = fx.mutex_program(3)
    space = reduced_structure(p, full_index_group(p))
    f = fx.mutex_spec(3)
    n = repair(space.structure, f, maximize_retained=True)
    assert n.sorted_states() == ["NNN", "NNC"]
    assert n.sorted_transitions() == [("NNN", "NNC"), ("NNC", "NNN")]


def test_emit_cnf(tmp_path):
    out = tmp_path / "m.cnf"
    repair(fx.mutex2(), MUTEX, emit_cnf=str(out))
    text = out.read_text()
    assert "p cnf" in text and "c var 1 keep NN" in text


def test_brute_force_bound():
    from symrepair.kripke import BoundExceeded
    with pytest.raises(BoundExceeded):
        brute_force_repair(fx.mutex2(), MUTEX, bound=5)


def test_repair_via_quotient_mutex2():
    m = fx.mutex2()
    g = group_closure(m, [fx.MUTEX2_SWAP])
    result = repair_via_quotient(m, g, MUTEX, maximize_retained=True)
    assert result.quotient_repair.sorted_states() == ["NN", "TN", "TT", "CN", "CT"]
    lifted = result.lifted
    assert "CC" not in lifted.states and models(lifted, MUTEX)
    assert is_g_closed(lifted, g) and is_g_maximal(lifted, quotient(m, g))


def test_repair_via_quotient_needs_invariance():
    m = fx.mutex2()
    g = group_closure(m, [fx.MUTEX2_SWAP])
    with pytest.raises(NotInvariantError):
        repair_via_quotient(m, g, parse_formula("AG (t1 -> AF c1)"))


def test_repairable_without_a_symmetric_repair():
    m, g, f = asymmetric_witness()
    n = repair(m, f)
    assert n is not None and models(n, f)
    assert repair_via_quotient(m, g, f) is None
    assert brute_force_repair(m, f) is not None


@settings(max_examples=150, deadline=None)
@given(structures(max_states=3, max_transitions=6), formulas(depth=3))
def test_agrees_with_brute_force(pair, f):
    m, _ = pair
    fast = repair(m, f)
    slow = brute_force_repair(m, f)
    assert (fast is None) == (slow is None)
    if fast is not None:
        assert is_substructure(fast, m) and fast.initial and models(fast, f)


@settings(max_examples=100, deadline=None)
@given(structures(max_states=4, max_transitions=8), formulas(depth=3))
def test_decoded_truth_values_are_sound(pair, f):
    m, _ = pair
    problem = RepairProblem(m, to_pnf(f))
    cnf = encode(problem)
    model = sat_solve(cnf)
    assume(model is not None)
    decoded = cnf.decode(model)
    n = decoded.substructure(m)
    assert is_substructure(n, m)
    sat = {g: check(n, g).holds for g in cnf.subformulas}
    for (s, g), v in decoded.sat.items():
        if v and s in n.states:
            assert sat[g][s]
    for (s, g), r in decoded.rank.items():
        if decoded.sat[s, g] and s in n.states:
            assert r is not None and r < len(m.states)


@settings(max_examples=60, deadline=None)
@given(structures(max_states=4, max_transitions=8, symmetric=True), formulas(depth=3))
def test_symmetric_repairs_lift(pair, f):
    m, sigma = pair
    g = group_closure(m, [sigma])
    from symrepair.symmetry import is_g_invariant
    assume(is_g_invariant(m, g, f))
    result = repair_via_quotient(m, g, f)
    if result is not None:
        assert models(result.lifted, f)
        assert is_g_closed(result.lifted, g)
        assert repair(m, f) is not None
