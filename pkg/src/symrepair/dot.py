"""Graphviz DOT output for structures and repairs."""

from __future__ import annotations

from .kripke import KripkeStructure, SubStructure

PALETTE = ("blue", "red", "darkgreen", "orange", "purple", "brown", "magenta", "cyan4")


def _quote(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_dot(m: KripkeStructure | SubStructure, kept: SubStructure | None = None,
             process_labels: dict | None = None, name: str = "M") -> str:
    """DOT text for ``m``.

    When ``kept`` is given, states and transitions of ``m`` outside it are
    drawn dashed.  ``process_labels`` maps a transition to the process
    indices that take it; such edges are labelled and coloured by index.
    """
    if isinstance(m, SubStructure):
        m = m.as_structure()
    lines = [f"digraph {_quote(name)} {{", "  node [shape=circle];"]
    for s in m.states:
        attrs = []
        if s in m.initial:
            attrs.append("shape=doublecircle")
        props = [p for p in m.ap if p in m.labels[s]]
        label = _quote(s)
        if props:
            label = label[:-1] + "\\n" + _quote(" ".join(props))[1:]
        attrs.append(f"label={label}")
        if kept is not None and s not in kept.states:
            attrs.append("style=dashed")
        lines.append(f"  {_quote(s)} [{', '.join(attrs)}];")
    for s, t in m.sorted_transitions():
        attrs = []
        procs = (process_labels or {}).get((s, t))
        if procs:
            attrs.append(f"label={_quote(','.join(map(str, procs)))}")
            attrs.append(f"color={PALETTE[(min(procs) - 1) % len(PALETTE)]}")
        if kept is not None and (s, t) not in kept.transitions:
            attrs.append("style=dashed")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {_quote(s)} -> {_quote(t)}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"
