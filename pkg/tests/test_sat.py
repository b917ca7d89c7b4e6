import sys
import textwrap

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_sat
from symrepair import sat
from symrepair.repair import at_least


def clauses_strategy(max_vars=8, max_clauses=30):
    lit = st.integers(1, max_vars).flatmap(lambda v: st.sampled_from([v, -v]))
    return st.lists(st.lists(lit, min_size=1, max_size=4), max_size=max_clauses)


def satisfies(model, clauses):
    return all(any(model[abs(l)] == (l > 0) for l in c) for c in clauses)


@settings(max_examples=300, deadline=None)
@given(clauses_strategy())
def test_solver_agrees_with_brute_force(clauses):
    model = sat.solve(8, clauses)
    assert (model is not None) == brute_sat(8, clauses)
    if model is not None:
        assert satisfies(model, clauses)


def pigeonhole(n):
    # n + 1 pigeons, n holes
    var = lambda p, h: p * n + h + 1
    clauses = [[var(p, h) for h in range(n)] for p in range(n + 1)]
    for h in range(n):
        for p in range(n + 1):
            for r in range(p + 1, n + 1):
                clauses.append([-var(p, h), -var(r, h)])
    return (n + 1) * n, clauses


def test_pigeonhole_unsat():
    nv, clauses = pigeonhole(5)
    assert sat.solve(nv, clauses) is None


def test_deterministic():
    nv, clauses = pigeonhole(4)
    clauses = clauses[1:]
    assert sat.solve(nv, clauses) == sat.solve(nv, clauses)


def test_empty_and_trivial():
    assert sat.solve(0, []) == {}
    assert sat.solve(1, [[]]) is None
    assert sat.solve(2, [[1, -1]]) == {1: True, 2: True}
    assert sat.solve(1, [[1], [-1]]) is None


def test_conflict_budget():
    nv, clauses = pigeonhole(6)
    with pytest.raises(RuntimeError):
        sat.solve(nv, clauses, max_conflicts=3)


def test_dimacs_round_trip():
    cnf = sat.CNF()
    a, b = cnf.new_var("a"), cnf.new_var(("keep", "s", "t"))
    cnf.new_var()
    cnf.add([a, -b])
    cnf.add([3])
    text = cnf.to_dimacs()
    assert "c var 1 'a'" in text and "p cnf 3 2" in text
    back = sat.parse_dimacs(text)
    assert back.num_vars == 3 and back.clauses == [[1, -2], [3]]
    assert cnf.var("a") == 1 and cnf.get("nope") is None
    with pytest.raises(ValueError):
        cnf.add([4])
    with pytest.raises(KeyError):
        cnf.new_var("a")


def test_parse_dimacs_errors():
    with pytest.raises(ValueError):
        sat.parse_dimacs("1 2 0\n")
    with pytest.raises(ValueError):
        sat.parse_dimacs("p dnf 2 1\n")


def test_model_text_round_trip():
    model = {1: True, 2: False, 3: True}
    assert sat.parse_model(sat.format_model(model), 3) == model
    assert sat.parse_model(sat.format_model(None), 3) is None
    assert sat.parse_model("s SATISFIABLE\nv 1 0\n", 2) == {1: True, 2: False}
    with pytest.raises(RuntimeError):
        sat.parse_model("c nothing\n", 1)


@pytest.fixture
def solver_script(tmp_path):
    script = tmp_path / "solver.py"
    script.write_text(textwrap.dedent("""
        import sys
        from symrepair import sat
        text = open(sys.argv[1]).read() if len(sys.argv) > 1 else sys.stdin.read()
        cnf = sat.parse_dimacs(text)
        sys.stdout.write(sat.format_model(cnf.solve()))
    """))
    return f"{sys.executable} {script}"


def test_external_solver_by_file_and_stdin(solver_script):
    cnf = sat.CNF()
    x, y = cnf.new_var(), cnf.new_var()
    cnf.add([x, y])
    cnf.add([-x])
    assert sat.solve_external(cnf, solver_script + " {}") == {1: False, 2: True}
    assert sat.solve_external(cnf, solver_script) == {1: False, 2: True}
    cnf.add([-y])
    assert sat.solve_external(cnf, solver_script + " {}") is None


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 7), st.data())
def test_at_least_is_exact(n, data):
    k = data.draw(st.integers(0, n + 1))
    fixed = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    cnf = sat.CNF()
    xs = [cnf.new_var() for _ in range(n)]
    at_least(cnf, xs, k)
    for x, v in zip(xs, fixed):
        cnf.add([x if v else -x])
    assert (cnf.solve() is not None) == (sum(fixed) >= k)
