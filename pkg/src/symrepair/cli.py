"""Command-line front end.

Exit status: 0 success, 1 the property does not hold, 2 no repair exists,
3 bad input or usage, 4 an internal check failed.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from . import kripke, programs, symmetry
from . import repair as repair_mod
from .ctl import (CheckError, CtlSyntaxError, check, failing_initial_states, models, parse_formula,
                  to_text)
from .dot import emit_dot
from .kripke import BoundExceeded, StructureError, SubStructure, load_structure, substructure_from_dict

EXIT_OK, EXIT_VIOLATED, EXIT_NO_REPAIR, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class InternalCheckFailed(RuntimeError):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    # usage errors must not collide with the "no repair" status
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _formula(args):
    if args.formula is not None and args.formula_file is not None:
        raise UsageError("give either --formula or --formula-file, not both")
    if args.formula is not None:
        return parse_formula(args.formula)
    if args.formula_file is not None:
        with open(args.formula_file) as fh:
            text = " ".join(line.split("#", 1)[0] for line in fh)
        return parse_formula(text)
    raise UsageError("a formula is required (--formula or --formula-file)")


def _load_group(m, path) -> symmetry.SymmetryGroup:
    if path is None:
        return symmetry.trivial_group(m)
    with open(path) as fh:
        gens = json.load(fh)
    if isinstance(gens, dict):
        gens = [gens]
    return symmetry.group_closure(m, gens)


def _load_index_group(p, spec) -> programs.IndexGroup:
    if spec is None:
        return programs.trivial_index_group(p)
    if spec == "full":
        return programs.full_index_group(p)
    with open(spec) as fh:
        gens = json.load(fh)
    if isinstance(gens, dict):
        gens = [gens]
    indices = [proc.index for proc in p.processes]
    out = []
    for gen in gens:
        procs = gen.get("processes", gen)
        mp = {int(k): int(v) for k, v in procs.items()}
        pi = tuple(p.position_of(mp.get(i, i)) for i in indices)
        shared = ()
        if "shared" in gen:
            shared = tuple(tuple(sorted(gen["shared"].get(v.name, {}).items())) or
                           tuple((x, x) for x in v.domain) for v in p.shared)
        out.append(programs.IndexPermutation(pi, shared))
    return programs.IndexGroup(p, out)


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _keep(args, name, text):
    if args.keep_intermediates:
        os.makedirs(args.keep_intermediates, exist_ok=True)
        with open(os.path.join(args.keep_intermediates, name), "w") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _substructure_json(n: SubStructure) -> str:
    return _dump(n.to_dict())


def _holds(n, f) -> bool:
    return models(n, f) if n.initial else all(check(n, f).holds.values())


def cmd_check(args) -> int:
    m = load_structure(args.structure)
    f = _formula(args)
    if args.sat_out:
        _write(args.sat_out, _dump(check(m, f).to_dict()))
    bad = failing_initial_states(m, f)
    if bad:
        print(f"{to_text(f)}: fails at initial state{'s' if len(bad) > 1 else ''} {', '.join(bad)}")
        return EXIT_VIOLATED
    print(f"{to_text(f)}: holds")
    return EXIT_OK


def cmd_quotient(args) -> int:
    m = load_structure(args.structure)
    g = _load_group(m, args.group)
    qr = symmetry.quotient(m, g)
    _write(args.output, qr.quotient.to_json())
    if args.theta_out:
        _write(args.theta_out, _dump(qr.theta))
    print(f"{len(g)} group elements, {len(qr.quotient.states)} quotient states", file=sys.stderr)
    return EXIT_OK


def cmd_repair(args) -> int:
    m = load_structure(args.structure)
    f = _formula(args)
    kwargs = dict(require_initial=not args.no_require_initial, maximize_retained=args.maximize_retained,
                  external=args.use_external_solver, emit_cnf=args.emit_cnf)
    if args.group:
        g = _load_group(m, args.group)
        result = repair_mod.repair_via_quotient(m, g, f, **kwargs)
        if result is None:
            print("no symmetric repair exists")
            return EXIT_NO_REPAIR
        qr = result.quotient
        _keep(args, "quotient.json", qr.quotient.to_json())
        _keep(args, "theta.json", _dump(qr.theta))
        _keep(args, "quotient_repair.json", _substructure_json(result.quotient_repair))
        n = result.lifted
    else:
        n = repair_mod.repair(m, f, **kwargs)
        if n is None:
            print("no repair exists")
            return EXIT_NO_REPAIR
    if not kripke.is_substructure(n, m) or not _holds(n, f):
        raise InternalCheckFailed("repaired structure failed re-verification")
    _keep(args, "repaired.json", _substructure_json(n))
    if args.dot:
        _write(args.dot, emit_dot(m, kept=n))
    _write(args.output, n.as_structure().to_json())
    deleted_states = m.sort_states(set(m.states) - n.states)
    deleted = m.sort_transitions(m.transitions - n.transitions)
    print(f"deleted {len(deleted_states)} states, {len(deleted)} transitions", file=sys.stderr)
    return EXIT_OK


def cmd_repair_program(args) -> int:
    p = programs.load_program(args.program)
    g = _load_index_group(p, args.group)
    f = _formula(args)
    kwargs = dict(require_initial=not args.no_require_initial, maximize_retained=args.maximize_retained,
                  external=args.use_external_solver, emit_cnf=args.emit_cnf)
    try:
        result = programs.repair_program(p, g, f, closure_mode=args.closure,
                                         simplify=args.simplify_guards, **kwargs)
    except programs.VerificationError as exc:
        raise InternalCheckFailed(str(exc)) from None
    if result is None:
        print("no repair of the reduced structure exists")
        return EXIT_NO_REPAIR
    space = result.space
    _keep(args, "reduced.json", space.structure.to_json())
    _keep(args, "repaired.json", _substructure_json(result.repaired))
    _keep(args, "extracted.prog", programs.format_program(result.extracted))
    _keep(args, "reduced.dot", emit_dot(space.structure, kept=result.repaired,
                                        process_labels=space.transition_labels(), name="reduced"))
    _write(args.output, programs.format_program(result.program))
    for line in result.report.lines():
        print(line, file=sys.stderr)
    return EXIT_OK


def cmd_extract(args) -> int:
    p = programs.load_program(args.program)
    g = _load_index_group(p, args.group)
    space = programs.reduced_structure(p, g)
    with open(args.substructure) as fh:
        n = substructure_from_dict(space.structure, json.load(fh))
    prog = programs.extract_program(n, space)
    if args.close:
        prog = programs.close_dead_ends(prog, g, args.closure)
    if args.simplify_guards:
        prog = programs.simplify_guards(prog)
    _write(args.output, programs.format_program(prog))
    return EXIT_OK


def cmd_lattice(args) -> int:
    m = load_structure(args.structure)
    g = _load_group(m, args.group) if args.group else None
    qr = symmetry.quotient(m, g) if g is not None and args.g_maximal else None
    elements = []
    for n in kripke.enumerate_substructures(m, args.bound):
        if g is not None and (args.g_closed or args.g_maximal) and not symmetry.is_g_closed(n, g):
            continue
        if qr is not None and not symmetry.is_g_maximal(n, qr):
            continue
        elements.append(n)
    if args.sample is not None and args.sample < len(elements):
        rng = random.Random(args.seed)
        picked = sorted(rng.sample(range(len(elements)), args.sample))
        elements = [elements[i] for i in picked]
    if args.list:
        for n in elements:
            print(json.dumps(n.to_dict()))
    print(len(elements))
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    m = load_structure(args.structure)
    f = _formula(args)
    require = not args.no_require_initial
    fast = repair_mod.repair(m, f, require_initial=require)
    slow = repair_mod.brute_force_repair(m, f, require_initial=require, bound=args.bound)
    print(f"repair: {'found' if fast is not None else 'none'}; brute force: {'found' if slow is not None else 'none'}")
    if (fast is None) != (slow is None):
        return EXIT_VIOLATED
    if fast is not None and not _holds(fast, f):
        return EXIT_VIOLATED
    return EXIT_OK


def cmd_dot(args) -> int:
    if args.input.endswith(".prog"):
        p = programs.load_program(args.input)
        g = _load_index_group(p, args.group) if args.group else None
        space = programs.reduced_structure(p, g) if g else programs.global_structure(p)
        m, labels = space.structure, space.transition_labels()
    else:
        m, labels = load_structure(args.input), None
        if args.group:
            m = symmetry.quotient(m, _load_group(m, args.group)).quotient
    kept = None
    if args.kept:
        with open(args.kept) as fh:
            kept = substructure_from_dict(m, json.load(fh))
    _write(args.output, emit_dot(m, kept=kept, process_labels=labels))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _ArgumentParser(prog="symrepair", description="CTL model checking and repair with symmetry reduction")
    ap.add_argument("--json-errors", action="store_true", help="report errors as JSON on stderr")
    ap.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def formula_opts(p):
        p.add_argument("--formula")
        p.add_argument("--formula-file")

    def repair_opts(p):
        p.add_argument("--maximize-retained", action="store_true")
        p.add_argument("--no-require-initial", action="store_true")
        p.add_argument("--emit-cnf", metavar="FILE")
        p.add_argument("--use-external-solver", metavar="CMD",
                       help="DIMACS solver command; {} stands for the instance file")
        p.add_argument("--keep-intermediates", metavar="DIR")
        p.add_argument("-o", "--output")

    p = sub.add_parser("check", help="model check a structure")
    p.add_argument("structure")
    formula_opts(p)
    p.add_argument("--sat-out", metavar="FILE", help="write the satisfaction set as JSON")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("quotient", help="build the quotient under a group")
    p.add_argument("structure")
    p.add_argument("--group", required=True)
    p.add_argument("-o", "--output")
    p.add_argument("--theta-out", metavar="FILE")
    p.set_defaults(func=cmd_quotient)

    p = sub.add_parser("repair", help="repair a structure by deletion")
    p.add_argument("structure")
    formula_opts(p)
    repair_opts(p)
    p.add_argument("--group")
    p.add_argument("--dot", metavar="FILE")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("repair-program", help="reduce, repair and extract a concurrent program")
    p.add_argument("program")
    formula_opts(p)
    repair_opts(p)
    p.add_argument("--group", default="full", help="'full' or a JSON file of index permutations")
    p.add_argument("--simplify-guards", action="store_true")
    p.add_argument("--closure", choices=["minimal", "full"], default="minimal")
    p.set_defaults(func=cmd_repair_program)

    p = sub.add_parser("extract", help="extract a program from a substructure of its reduced graph")
    p.add_argument("program")
    p.add_argument("substructure")
    p.add_argument("--group")
    p.add_argument("--close", action="store_true", help="close dead-end local states")
    p.add_argument("--closure", choices=["minimal", "full"], default="minimal")
    p.add_argument("--simplify-guards", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("lattice", help="enumerate substructures")
    p.add_argument("structure")
    p.add_argument("--group")
    p.add_argument("--g-closed", action="store_true")
    p.add_argument("--g-maximal", action="store_true")
    p.add_argument("--list", action="store_true")
    p.add_argument("--sample", type=int)
    p.add_argument("--bound", type=int, default=20)
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("oracle-compare", help="compare the SAT repair with exhaustive search")
    p.add_argument("structure")
    formula_opts(p)
    p.add_argument("--no-require-initial", action="store_true")
    p.add_argument("--bound", type=int, default=20)
    p.set_defaults(func=cmd_oracle_compare)

    p = sub.add_parser("dot", help="render a structure or program graph as DOT")
    p.add_argument("input", help="structure JSON or .prog file")
    p.add_argument("--group")
    p.add_argument("--kept", metavar="FILE", help="substructure JSON; everything else is dashed")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_dot)
    return ap


INPUT_ERRORS = (UsageError, StructureError, CtlSyntaxError, CheckError, symmetry.SymmetryError,
                programs.ProgramError, repair_mod.NotInvariantError, BoundExceeded, OSError,
                json.JSONDecodeError, KeyError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        return _fail(args, exc, EXIT_INPUT)
    except (InternalCheckFailed, repair_mod.RepairError) as exc:
        return _fail(args, exc, EXIT_INTERNAL)


def _fail(args, exc, code) -> int:
    if args.json_errors:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit": code}), file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
