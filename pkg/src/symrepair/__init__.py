"""CTL model checking, symmetry reduction and subtractive repair of Kripke
structures and of the concurrent programs that generate them."""

from .ctl import check, models, parse_formula
from .kripke import KripkeStructure, SubStructure, load_structure, validate_structure
from .programs import global_structure, parse_program, reduced_structure, repair_program
from .repair import brute_force_repair, repair_via_quotient
from .symmetry import group_closure, quotient

__version__ = "0.1.0"
