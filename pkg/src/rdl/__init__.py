"""Robust differential dynamic logic: parsing, fragment checking, ordinal
ranks, a sequent calculus with continuous-program axioms, an exact
interval oracle, and a budgeted proof search that emits replayable
certificates."""

from .calculus import (
    Accepted,
    Certificate,
    ProofNode,
    Rejected,
    Rule,
    Sequent,
    apply_rule,
    axiom_instance,
    check_certificate,
    certificate_from_json,
    certificate_to_json,
    goal_sequent,
    sequent,
)
from .fragment import Blame, BlameReason, FormulaClass, ProgramClass, classify_formula, classify_program, in_rrdl
from .grammar import ParseError, parse_formula, parse_program, parse_term, pretty
from .intervals import (
    Counterexample,
    RatInterval,
    Unknown,
    Valid,
    decide,
    find_rational_witness,
    interval_eval,
    replay,
    witness_stream,
)
from .rank import Ordinal, ord_add, ord_cmp, ord_mul_omega, rank_formula, rank_program, sequent_measure, set_cmp
from .search import NotInFragment, Schedule, Timeout, frontier_report, preprocess, prove, reduce_once
from .simsem import SimConfig, eval_term, probe_openness, sample_truth
from .syntax import (
    Add,
    And,
    Assign,
    Box,
    Choice,
    Const,
    Diamond,
    Exists,
    Forall,
    Formula,
    Geq,
    Gt,
    Mul,
    Ode,
    Or,
    Program,
    RdlError,
    Seq,
    Star,
    Term,
    Test,
    Var,
    free_vars,
    negate,
    normalize_clock,
    rename,
    safe_subst,
    term_subst,
)

__version__ = "0.1.0"
