"""Membership checks for the robust fragments.

Strict formulas generalize ``>`` and denote open sets; weak formulas
generalize ``>=`` and denote closed sets.  Exact programs carry strict
tests and evolution domains, approximate programs weak ones.  The
reachability fragment additionally bounds universal quantifiers on the
strict side and, on the weak side, forbids loops and requires evolution
domains to end in a sup-norm bound.

Classification is purely syntactic and linear-time; blame records the
outermost offending nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .syntax import (
    And,
    Assign,
    Box,
    Choice,
    Diamond,
    Exists,
    Forall,
    Formula,
    Geq,
    Gt,
    Ode,
    Or,
    Program,
    Seq,
    Star,
    Test,
    free_vars,
    match_bounded_exists,
    match_bounded_forall,
    match_eq,
    match_norm,
)


class FormulaClass(Enum):
    STRICT = "strict"
    WEAK = "weak"
    NEITHER = "neither"


class BlameReason(Enum):
    WRONG_POLARITY_ATOM = "WrongPolarityAtom"
    UNBOUNDED_FORALL = "UnboundedForall"
    UNBOUNDED_EXISTS = "UnboundedExists"
    LOOP_IN_APPROXIMATE = "LoopInApproximate"
    UNBOUNDED_EVOLUTION_DOMAIN = "UnboundedEvolutionDomain"
    EQUALITY_IN_EXACT_TEST = "EqualityInExactTest"


@dataclass(frozen=True)
class Blame:
    path: tuple
    reason: BlameReason

    def __str__(self) -> str:
        at = ".".join(str(i) for i in self.path) or "root"
        return f"{self.reason.value} at {at}"


@dataclass(frozen=True)
class ProgramClass:
    exact: bool
    approximate: bool


# ---------------------------------------------------------------------------
# Strict / weak classification


def classify_formula(f: Formula):
    """Classify ``f`` as strict, weak or neither, with blame for failures."""
    strict_blames: list = []
    weak_blames: list = []
    strict = _cls_formula(f, True, (), strict_blames)
    weak = _cls_formula(f, False, (), weak_blames)
    if strict:
        return FormulaClass.STRICT, []
    if weak:
        return FormulaClass.WEAK, []
    # report blame against the closer polarity: fewer offending nodes
    blames = strict_blames if len(strict_blames) <= len(weak_blames) else weak_blames
    return FormulaClass.NEITHER, blames


def classify_program(p: Program):
    """Exact/approximate flags for ``p``; both hold for test- and ODE-free
    programs."""
    exact_blames: list = []
    approx_blames: list = []
    exact = _cls_program(p, True, (), exact_blames)
    approx = _cls_program(p, False, (), approx_blames)
    blames = []
    if not exact:
        blames.extend(exact_blames)
    if not approx:
        blames.extend(approx_blames)
    return ProgramClass(exact=exact, approximate=approx), blames


def _cls_formula(f: Formula, strict: bool, path, blames) -> bool:
    if isinstance(f, Gt):
        if strict:
            return True
        blames.append(Blame(path, BlameReason.WRONG_POLARITY_ATOM))
        return False
    if isinstance(f, Geq):
        if not strict:
            return True
        blames.append(Blame(path, BlameReason.WRONG_POLARITY_ATOM))
        return False
    if isinstance(f, (Or, And)):
        left = _cls_formula(f.left, strict, path + (0,), blames)
        right = _cls_formula(f.right, strict, path + (1,), blames)
        return left and right
    if isinstance(f, (Exists, Forall)):
        return _cls_formula(f.body, strict, path + (0,), blames)
    if isinstance(f, Diamond):
        ok_p = _cls_program(f.program, strict, path + (0,), blames)
        ok_b = _cls_formula(f.body, strict, path + (1,), blames)
        return ok_p and ok_b
    if isinstance(f, Box):
        ok_p = _cls_program(f.program, not strict, path + (0,), blames)
        ok_b = _cls_formula(f.body, strict, path + (1,), blames)
        return ok_p and ok_b
    raise TypeError(f"not a formula: {f!r}")


def _cls_program(p: Program, exact: bool, path, blames) -> bool:
    if isinstance(p, Assign):
        return True
    if isinstance(p, Test):
        if exact and match_eq(p.condition) is not None:
            blames.append(Blame(path, BlameReason.EQUALITY_IN_EXACT_TEST))
            return False
        return _cls_formula(p.condition, exact, path + (0,), blames)
    if isinstance(p, (Choice, Seq)):
        left = _cls_program(p.left if isinstance(p, Choice) else p.first, exact, path + (0,), blames)
        right = _cls_program(p.right if isinstance(p, Choice) else p.second, exact, path + (1,), blames)
        return left and right
    if isinstance(p, Star):
        return _cls_program(p.body, exact, path + (0,), blames)
    if isinstance(p, Ode):
        return _cls_formula(p.domain, exact, path + (0,), blames)
    raise TypeError(f"not a program: {p!r}")


# ---------------------------------------------------------------------------
# Reachability fragment


def in_rrdl(f: Formula, side: str, time_bounded_domains: bool = False):
    """Membership in the reachability fragment for ``side`` in
    ``{"strict", "weak"}``.

    Bounded quantifiers are recognized by their exact desugared shapes.
    With ``time_bounded_domains`` the weak-side evolution domain may bound
    the clock alone instead of the full state norm.
    """
    if side not in ("strict", "weak"):
        raise ValueError(f"side must be 'strict' or 'weak', got {side!r}")
    blames: list = []
    ok = _rr_formula(f, side == "strict", (), blames, time_bounded_domains)
    return ok, blames


def _rr_formula(f: Formula, strict: bool, path, blames, tbd) -> bool:
    if isinstance(f, Gt):
        if strict:
            return True
        blames.append(Blame(path, BlameReason.WRONG_POLARITY_ATOM))
        return False
    if isinstance(f, Geq):
        if not strict:
            return True
        blames.append(Blame(path, BlameReason.WRONG_POLARITY_ATOM))
        return False
    if isinstance(f, Forall):
        if strict:
            m = match_bounded_forall(f)
            if m is None:
                blames.append(Blame(path, BlameReason.UNBOUNDED_FORALL))
                return False
            return _rr_formula(m[3], True, path + (0, 1), blames, tbd)
        return _rr_formula(f.body, False, path + (0,), blames, tbd)
    if isinstance(f, Exists):
        if strict:
            return _rr_formula(f.body, True, path + (0,), blames, tbd)
        m = match_bounded_exists(f)
        if m is None:
            blames.append(Blame(path, BlameReason.UNBOUNDED_EXISTS))
            return False
        return _rr_formula(m[3], False, path + (0, 1), blames, tbd)
    if isinstance(f, (Or, And)):
        left = _rr_formula(f.left, strict, path + (0,), blames, tbd)
        right = _rr_formula(f.right, strict, path + (1,), blames, tbd)
        return left and right
    if isinstance(f, Diamond):
        ok_p = _rr_program(f.program, strict, path + (0,), blames, tbd)
        ok_b = _rr_formula(f.body, strict, path + (1,), blames, tbd)
        return ok_p and ok_b
    if isinstance(f, Box):
        ok_p = _rr_program(f.program, not strict, path + (0,), blames, tbd)
        ok_b = _rr_formula(f.body, strict, path + (1,), blames, tbd)
        return ok_p and ok_b
    raise TypeError(f"not a formula: {f!r}")


def _rr_program(p: Program, exact: bool, path, blames, tbd) -> bool:
    if isinstance(p, Assign):
        return True
    if isinstance(p, Test):
        if exact and match_eq(p.condition) is not None:
            blames.append(Blame(path, BlameReason.EQUALITY_IN_EXACT_TEST))
            return False
        return _rr_formula(p.condition, exact, path + (0,), blames, tbd)
    if isinstance(p, Choice):
        left = _rr_program(p.left, exact, path + (0,), blames, tbd)
        right = _rr_program(p.right, exact, path + (1,), blames, tbd)
        return left and right
    if isinstance(p, Seq):
        left = _rr_program(p.first, exact, path + (0,), blames, tbd)
        right = _rr_program(p.second, exact, path + (1,), blames, tbd)
        return left and right
    if isinstance(p, Star):
        if not exact:
            blames.append(Blame(path, BlameReason.LOOP_IN_APPROXIMATE))
            return False
        return _rr_program(p.body, True, path + (0,), blames, tbd)
    if isinstance(p, Ode):
        if exact:
            return _rr_formula(p.domain, True, path + (0,), blames, tbd)
        m = _split_bounded_domain(p, tbd)
        if m is None:
            blames.append(Blame(path, BlameReason.UNBOUNDED_EVOLUTION_DOMAIN))
            return False
        return _rr_formula(m, False, path + (0, 0), blames, tbd)
    raise TypeError(f"not a program: {p!r}")


def _split_bounded_domain(p: Ode, tbd: bool):
    """For an approximate ODE, return the weak part of a domain of the form
    ``weak & ||vars|| <= k`` (or ``weak & k >= clock`` when allowed)."""
    d = p.domain
    if not isinstance(d, And):
        return None
    variables = [x for x, _ in p.system]
    bound = d.right
    k = match_norm(bound, variables, strict=False)
    if k is not None:
        return d.left
    if tbd and isinstance(bound, Geq):
        from .syntax import Var

        clock = variables[-1]
        if bound.right == Var(clock) and not (free_vars(bound.left) & set(variables)):
            return d.left
    return None
