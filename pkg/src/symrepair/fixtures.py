"""Small reference structures and programs used by the tests and the CLI."""

from __future__ import annotations

from .ctl import Formula, parse_formula
from .kripke import KripkeStructure
from .programs import ConcurrentProgram, parse_program
from .symmetry import SymmetryGroup, group_closure

BOX_SWAP = {"s1": "s2", "s2": "s1", "t1": "t2", "t2": "t1"}

MUTEX2_STATES = ("NN", "TN", "NT", "TT", "CN", "NC", "CT", "TC", "CC")
MUTEX2_SWAP = {s: s[::-1] for s in MUTEX2_STATES}


def box() -> KripkeStructure:
    """Two s-states and two t-states, every s linked to every t in both directions."""
    edges = [(a, b) for a in ("s1", "s2") for b in ("t1", "t2")]
    edges += [(b, a) for a, b in edges]
    return KripkeStructure.build(["s1", "s2", "t1", "t2"], ["s1", "s2"], edges,
                                 {"s1": [], "s2": [], "t1": [], "t2": []}, ap=[])


def box_group(m: KripkeStructure | None = None) -> SymmetryGroup:
    return group_closure(m or box(), [BOX_SWAP])


def _mutex2_step(local: str) -> str:
    return {"N": "T", "T": "C", "C": "N"}[local]


def mutex2() -> KripkeStructure:
    """Two processes cycling N -> T -> C -> N with no coordination."""
    edges = set()
    for s in MUTEX2_STATES:
        edges.add((s, _mutex2_step(s[0]) + s[1]))
        edges.add((s, s[0] + _mutex2_step(s[1])))
    labels = {s: [f"{s[0].lower()}1", f"{s[1].lower()}2"] for s in MUTEX2_STATES}
    return KripkeStructure.build(MUTEX2_STATES, ["NN"], sorted(edges), labels,
                                 ap=["n1", "t1", "c1", "n2", "t2", "c2"])


def mutex2_group(m: KripkeStructure | None = None) -> SymmetryGroup:
    return group_closure(m or mutex2(), [MUTEX2_SWAP])


def mutex_spec(n: int) -> Formula:
    """No two processes in C at once."""
    pairs = [f"AG !(c{i} & c{j})" for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    return parse_formula(" & ".join(pairs) if pairs else "true")


def mutex_program_text(n: int, trying: bool = False) -> str:
    lines = [f"# {n} processes, no synchronization"]
    for i in range(1, n + 1):
        lines.append(f"process {i}")
        lines.append(f"  local N {{ n{i} }}")
        if trying:
            lines.append(f"  local T {{ t{i} }}")
        lines.append(f"  local C {{ c{i} }}")
        lines.append("  init N")
        if trying:
            lines += ["  action N -> T when true", "  action T -> C when true"]
        else:
            lines.append("  action N -> C when true")
        lines.append("  action C -> N when true")
    return "\n".join(lines) + "\n"


def mutex_program(n: int, trying: bool = False) -> ConcurrentProgram:
    return parse_program(mutex_program_text(n, trying))
