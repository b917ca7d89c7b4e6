import pytest
from hypothesis import given, settings

from strategies import symmetric_programs
from symrepair import fixtures as fx
from symrepair.ctl import TRUE, Not, Prop, models, parse_formula
from symrepair.kripke import BoundExceeded, SubStructure
from symrepair.programs import (Action, DeadEndError, GlobalState, IndexGroup, IndexPermutation, ProgramError,
                                SharedEq, close_dead_ends, extract_action, extract_program, format_program,
                                full_index_group, global_structure, guard_text, index_group_action,
                                induced_group, parse_guard, parse_program, reduced_structure, repair_program,
                                simplify_guards, trivial_index_group, verify_extracted)
from symrepair.repair import repair
from symrepair.symmetry import is_state_mapping, quotient

TOKEN_RING = """
# two processes passing a token through a shared variable
shared
  var turn : {1, 2} = 1
process 1
  local N { n1 }
  local C { c1 }
  init N
  action N -> C when turn = 1
  action C -> N when true do turn := 2
process 2
  local N { n2 }
  local C { c2 }
  init N
  action N -> C when turn = 2
  action C -> N when true do turn := 1
"""


LOCK = """
shared
  var lock : {0, 1} = 0
process 1
  local N { n1 }
  local C { c1 }
  init N
  action N -> C when lock = 0 do lock := 1
  action C -> N when true do lock := 0
process 2
  local N { n2 }
  local C { c2 }
  init N
  action N -> C when lock = 0 do lock := 1
  action C -> N when true do lock := 0
"""


def swap2(p):
    return IndexGroup(p, [IndexPermutation((1, 0))])


def test_format_parse_round_trip():
    for text in (fx.mutex_program_text(3), fx.mutex_program_text(2, trying=True), TOKEN_RING):
        p = parse_program(text)
        assert parse_program(format_program(p)) == p
        assert format_program(parse_program(format_program(p))) == format_program(p)


def test_parsed_shape():
    p = parse_program(TOKEN_RING)
    assert [v.name for v in p.shared] == ["turn"] and p.shared[0].domain == ("1", "2")
    a = p.process(1).actions[1]
    assert a.assign == (("turn", "2"),) and a.guard == TRUE
    assert p.process(2).actions[0].guard == SharedEq("turn", "2")
    assert p.ap == ("n1", "c1", "n2", "c2")


def test_guard_syntax():
    g = parse_guard("!a & (b | x = 1)")
    assert guard_text(g) == "!a & (b | x = 1)"
    assert parse_guard(guard_text(g)) == g
    with pytest.raises(ProgramError):
        parse_guard("a &")
    with pytest.raises(ProgramError):
        parse_guard("a $ b")


@pytest.mark.parametrize("text", [
    "local N { n1 }",
    "process x",
    "process 1\n  local N { n1 }",
    "process 1\n  local N { n1 }\n  init Q",
    "process 1\n  local N { n1 }\n  init N\n  action N -> Q",
    "process 1\n  local N { n1 }\n  init N\nprocess 2\n  local N { n1 }\n  init N",
    "process 1\n  local N { n1 }\n  init N\n  action N -> N when zz",
    "process 1\n  local N { n1 }\n  init N\n  action N -> N do y := 1",
    "shared\n  var x : {0} = 3\nprocess 1\n  local N { }\n  init N",
    "shared\n  var x : {0,1} = 0\nprocess 1\n  local N { }\n  init N\n  action N -> N do x := 7",
    "process 1\n  local N { n1 }\n  init N\n  frobnicate",
    "process 1\n  local N { n1 }\n  local N { c1 }\n  init N",
])
def test_program_errors(text):
    with pytest.raises(ProgramError):
        parse_program(text)


def test_three_mutex_cube():
    space = global_structure(fx.mutex_program(3))
    m = space.structure
    assert len(m.states) == 8 and len(m.transitions) == 24
    assert m.sorted_initial() == ["NNN"]
    assert space.moves[("NNN", "CNN")] == ((1, GlobalState(("C", "N", "N"), ())),)


def test_single_process_self_loop():
    p = parse_program("process 1\n  local A { a }\n  init A\n  action A -> A when true\n")
    m = global_structure(p).structure
    assert m.states == ("A",) and m.transitions == frozenset({("A", "A")})


def test_two_mutex_matches_fixture():
    m = global_structure(fx.mutex_program(2, trying=True)).structure
    ref = fx.mutex2()
    assert set(m.states) == set(ref.states)
    assert m.transitions == ref.transitions
    assert all(m.labels[s] == ref.labels[s] for s in m.states)


def test_token_ring_states():
    space = global_structure(parse_program(TOKEN_RING))
    assert space.structure.states == ("NN[turn=1]", "CN[turn=1]", "NN[turn=2]", "NC[turn=2]")


def test_deadlock_and_bound():
    p = parse_program("process 1\n  local A { a }\n  local B { b }\n  init A\n  action A -> B when true\n")
    with pytest.raises(ProgramError, match="dead"):
        global_structure(p)
    assert global_structure(p, allow_deadlock=True).deadlocks == ("B",)
    with pytest.raises(BoundExceeded):
        global_structure(fx.mutex_program(6), bound=10)


def test_mutex2_swap_action():
    p = fx.mutex_program(2, trying=True)
    space = global_structure(p)
    g = index_group_action(p, IndexPermutation((1, 0)))
    mapping = {s: p.state_name(g(st)) for s, st in space.states.items()}
    assert mapping["TN"] == "NT" and mapping["CN"] == "NC" and mapping["CT"] == "TC"
    assert all(mapping[s] == s for s in ("NN", "TT", "CC"))
    assert is_state_mapping(space.structure, mapping)
    ident = index_group_action(p, IndexPermutation((0, 1)))
    assert all(ident(st) == st for st in space.states.values())


def test_three_mutex_transposition_group():
    p = fx.mutex_program(3)
    space = global_structure(p)
    g = IndexGroup(p, [IndexPermutation((1, 0, 2)), IndexPermutation((0, 2, 1))])
    assert len(g) == 6
    sg = induced_group(space, g)
    assert all(is_state_mapping(space.structure, f) for f in sg)


def test_token_ring_is_not_symmetric():
    # swapping the values of turn moves the initial state
    p = parse_program(TOKEN_RING)
    with pytest.raises(ProgramError, match="initial"):
        IndexGroup(p, [IndexPermutation((1, 0), ((("1", "2"), ("2", "1")),))])
    with pytest.raises(ProgramError):
        IndexGroup(p, [IndexPermutation((1, 0))])


def test_lock_program():
    p = parse_program(LOCK)
    assert global_structure(p).structure.states == ("NN[lock=0]", "CN[lock=1]", "NC[lock=1]")
    g = IndexGroup(p, [IndexPermutation((1, 0), ((("0", "0"), ("1", "1")),))])
    assert len(g) == 2
    assert reduced_structure(p, g).structure.states == ("NN[lock=0]", "NC[lock=1]")


def test_non_isomorphic_processes():
    text = fx.mutex_program_text(2).replace("action C -> N when true", "action C -> N when n1", 1)
    p = parse_program(text)
    with pytest.raises(ProgramError):
        index_group_action(p, IndexPermutation((1, 0)))
    with pytest.raises(ProgramError):
        index_group_action(fx.mutex_program(2), IndexPermutation((0, 0)))


def test_reduced_counts():
    p2 = fx.mutex_program(2, trying=True)
    assert len(reduced_structure(p2, swap2(p2)).structure.states) == 6
    for n in range(2, 8):
        p = fx.mutex_program(n)
        assert len(reduced_structure(p, full_index_group(p)).structure.states) == n + 1
    p3 = fx.mutex_program(3)
    assert reduced_structure(p3, trivial_index_group(p3)).structure.to_json() == \
        global_structure(p3).structure.to_json()


def assert_reduced_is_quotient(p, g):
    space = global_structure(p, allow_deadlock=True)
    red = reduced_structure(p, g, allow_deadlock=True)
    theta = {s: red.canonical_name(st) for s, st in space.states.items()}
    q = quotient(space.structure, induced_group(space, g), theta).quotient
    assert set(red.structure.states) == set(q.states)
    assert red.structure.transitions == q.transitions
    assert red.structure.initial == q.initial
    assert all(red.structure.labels[r] == q.labels[r] for r in q.states)
    # under the default first-in-state-order map the result is isomorphic
    q0 = quotient(space.structure, induced_group(space, g))
    assert len(q0.quotient.states) == len(q.states) and len(q0.quotient.transitions) == len(q.transitions)


def test_reduced_is_quotient_on_fixtures():
    p2 = fx.mutex_program(2, trying=True)
    assert_reduced_is_quotient(p2, swap2(p2))
    for n in (2, 3, 4):
        p = fx.mutex_program(n, trying=True)
        assert_reduced_is_quotient(p, full_index_group(p))
    p = parse_program(LOCK)
    assert_reduced_is_quotient(p, swap2(p))


@settings(max_examples=60, deadline=None)
@given(symmetric_programs())
def test_random_programs(text):
    p = parse_program(text)
    space = global_structure(p, allow_deadlock=True)
    for (s, t), moves in space.moves.items():
        a, b = space.states[s], space.states[t]
        changed = [k for k in range(len(a.locals)) if a.locals[k] != b.locals[k]]
        assert len(changed) <= 1
        assert all(p.position_of(i) in changed or not changed for i, _ in moves)
    for name, st in space.states.items():
        for k, proc in enumerate(p.processes):
            own = set(proc.ap) & space.structure.labels[name]
            assert own == proc.local(st.locals[k]).props
    full = full_index_group(p)
    assert_reduced_is_quotient(p, full)
    # the sorted-vector shortcut must agree with an explicit minimum over the elements
    explicit = IndexGroup(p, full.generators)
    for st in space.states.values():
        assert full.canonical(st) == explicit.canonical(st)


def test_extract_action_guard():
    p = fx.mutex_program(3)
    space = global_structure(p)
    a = extract_action(space, "NNN", 1, GlobalState(("C", "N", "N"), ()))
    assert a.source == "N" and a.target == "C" and a.process == 1 and a.assign == ()
    assert guard_text(a.guard) == "n2 & !c2 & n3 & !c3"


def test_extract_action_shared_and_single_process():
    p = parse_program(TOKEN_RING)
    space = global_structure(p)
    (move,) = space.moves[("CN[turn=1]", "NN[turn=2]")]
    a = extract_action(space, "CN[turn=1]", *move)
    assert a.assign == (("turn", "2"),)
    assert guard_text(a.guard) == "n2 & !c2 & turn = 1"
    single = parse_program("process 1\n  local A { a }\n  init A\n  action A -> A when true\n")
    sp = global_structure(single)
    assert extract_action(sp, "A", 1, GlobalState(("A",), ())).guard == TRUE


def test_extract_errors():
    p = fx.mutex_program(2)
    space = global_structure(p)
    with pytest.raises(ProgramError):
        extract_program(space.structure.empty(), space)
    other = global_structure(p).structure
    with pytest.raises(ProgramError):
        extract_program(other.full(), space)


def test_extract_unrepaired_reproduces_structure():
    for p in (fx.mutex_program(3), fx.mutex_program(2, trying=True), parse_program(TOKEN_RING)):
        space = global_structure(p)
        prog = extract_program(space.structure.full(), space)
        again = global_structure(prog).structure
        assert again.to_json() == space.structure.to_json()


def test_three_mutex_pipeline_pieces():
    p = fx.mutex_program(3)
    g = full_index_group(p)
    space = reduced_structure(p, g)
    f = fx.mutex_spec(3)
    n = repair(space.structure, f, maximize_retained=True)
    raw = extract_program(n, space)
    assert [len(proc.actions) for proc in raw.processes] == [1, 1, 2]
    closed = close_dead_ends(raw, g)
    assert [len(proc.actions) for proc in closed.processes] == [2, 2, 2]
    assert close_dead_ends(closed, g) == closed
    simple = simplify_guards(closed)
    for proc in simple.processes:
        others = [f"n{j}" for j in (1, 2, 3) if j != proc.index]
        assert {guard_text(a.guard) for a in proc.actions} == {" & ".join(others)}
    report = verify_extracted(simple, n, space, f)
    assert report.ok and report.states == 4


def test_full_closure_is_group_invariant():
    p = fx.mutex_program(3)
    g = full_index_group(p)
    space = reduced_structure(p, g)
    n = repair(space.structure, fx.mutex_spec(3))
    full = close_dead_ends(extract_program(n, space), g, mode="full")
    acts = set(full.all_actions())
    for elem in g.elements:
        assert {g.apply_action(elem, a) for a in acts} == acts
    with pytest.raises(ValueError):
        close_dead_ends(full, g, mode="bogus")


def test_dead_end_without_symmetry():
    p = fx.mutex_program(2)
    space = reduced_structure(p, trivial_index_group(p))
    keep = SubStructure(space.structure, frozenset({"NN", "CN"}), frozenset({("NN", "CN"), ("CN", "NN")}))
    prog = extract_program(keep, space)
    # process 2 never moves, so its local state N is a dead end
    with pytest.raises(DeadEndError):
        close_dead_ends(prog, trivial_index_group(p))
    fixed = close_dead_ends(prog, swap2(p))
    assert [len(proc.actions) for proc in fixed.processes] == [2, 2]


def test_simplify_falls_back_when_needed():
    text = """
shared
  var x : {0, 1} = 0
process 1
  local N { n1 }
  local C { c1 }
  init N
  action N -> C when n2 & x = 0
  action N -> C when c2 & x = 1
  action C -> N when true do x := 1
process 2
  local N { n2 }
  local C { c2 }
  init N
  action N -> C when c1
  action C -> N when true
"""
    p = parse_program(text)
    simple = simplify_guards(p)
    before = global_structure(p, allow_deadlock=True).structure
    assert global_structure(simple, allow_deadlock=True).structure.to_json() == before.to_json()
    (merged,) = [a for a in simple.process(1).actions if a.source == "N"]
    assert "|" in guard_text(merged.guard)


def test_verify_negative_control():
    p = fx.mutex_program(3)
    g = full_index_group(p)
    space = reduced_structure(p, g)
    f = fx.mutex_spec(3)
    n = repair(space.structure, f)
    report = verify_extracted(p, n, space, f)
    assert not report.models_ok and not report.ok
    assert not models(global_structure(p).structure, f)


def test_repair_program_two_mutex():
    p = fx.mutex_program(2, trying=True)
    f = parse_formula("AG !(c1 & c2)")
    result = repair_program(p, swap2(p), f, simplify=True, maximize_retained=True)
    m2 = global_structure(result.program).structure
    assert len(m2.states) == 8 and "CC" not in m2.states
    assert result.report.ok
    assert repair_program(p, swap2(p), parse_formula("false")) is None
