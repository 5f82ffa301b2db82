"""Exact-rational interval arithmetic and the branch-and-bound validity
oracle that discharges proof leaves.

``decide`` certifies sequents of the shape "weak atoms entail a
disjunction of strict basic formulas" over a box of rational intervals.
Verdicts are sound on both sides: Valid comes with a subdivision tree
whose leaves are checkable by interval evaluation alone, and
Counterexample comes with an exactly rechecked rational point.  Unknown is
returned when the subdivision budget runs out, which is the only honest
answer for non-robust inputs.

Interval evaluation follows the syntactic term tree as written, with no
re-association; enclosure shapes (and therefore subdivision trees) are
deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .syntax import (
    Add,
    And,
    Const,
    Formula,
    Geq,
    Gt,
    Mul,
    Or,
    RdlError,
    Term,
    Var,
    free_vars,
    is_basic,
    is_quantifier_free,
)


class UnboundVariable(RdlError):
    pass


class PreconditionViolation(RdlError):
    pass


@dataclass(frozen=True)
class RatInterval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def width(self) -> Fraction:
        return self.hi - self.lo

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, other: "RatInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


Box = dict  # var name -> RatInterval


def interval_eval(t: Term, box: Box) -> RatInterval:
    """Enclosure of the term's range over the box; exact for affine terms."""
    if isinstance(t, Var):
        if t.name not in box:
            raise UnboundVariable(t.name)
        return box[t.name]
    if isinstance(t, Const):
        return RatInterval(t.value, t.value)
    if isinstance(t, Add):
        a = interval_eval(t.left, box)
        b = interval_eval(t.right, box)
        return RatInterval(a.lo + b.lo, a.hi + b.hi)
    if isinstance(t, Mul):
        a = interval_eval(t.left, box)
        b = interval_eval(t.right, box)
        products = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
        return RatInterval(min(products), max(products))
    raise TypeError(f"not a term: {t!r}")


def eval_exact(t: Term, point) -> Fraction:
    if isinstance(t, Var):
        if t.name not in point:
            raise UnboundVariable(t.name)
        return point[t.name]
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Add):
        return eval_exact(t.left, point) + eval_exact(t.right, point)
    if isinstance(t, Mul):
        return eval_exact(t.left, point) * eval_exact(t.right, point)
    raise TypeError(f"not a term: {t!r}")


def tv_formula(f: Formula, box: Box):
    """Three-valued interval truth of a quantifier-free basic formula."""
    if isinstance(f, Gt):
        a = interval_eval(f.left, box)
        b = interval_eval(f.right, box)
        if a.lo > b.hi:
            return True
        if a.hi <= b.lo:
            return False
        return None
    if isinstance(f, Geq):
        a = interval_eval(f.left, box)
        b = interval_eval(f.right, box)
        if a.lo >= b.hi:
            return True
        if a.hi < b.lo:
            return False
        return None
    if isinstance(f, And):
        left = tv_formula(f.left, box)
        right = tv_formula(f.right, box)
        if left is False or right is False:
            return False
        if left is True and right is True:
            return True
        return None
    if isinstance(f, Or):
        left = tv_formula(f.left, box)
        right = tv_formula(f.right, box)
        if left is True or right is True:
            return True
        if left is False and right is False:
            return False
        return None
    raise PreconditionViolation(f"not a quantifier-free basic formula: {f!r}")


def holds_exact(f: Formula, point) -> bool:
    if isinstance(f, Gt):
        return eval_exact(f.left, point) > eval_exact(f.right, point)
    if isinstance(f, Geq):
        return eval_exact(f.left, point) >= eval_exact(f.right, point)
    if isinstance(f, And):
        return holds_exact(f.left, point) and holds_exact(f.right, point)
    if isinstance(f, Or):
        return holds_exact(f.left, point) or holds_exact(f.right, point)
    raise PreconditionViolation(f"not a quantifier-free basic formula: {f!r}")


# ---------------------------------------------------------------------------
# Subdivision trees


@dataclass(frozen=True)
class AllTrue:
    pass


@dataclass(frozen=True)
class Split:
    var: str
    midpoint: Fraction
    left: "SubdivisionTree"
    right: "SubdivisionTree"


SubdivisionTree = object  # AllTrue | Split


@dataclass(frozen=True)
class Valid:
    tree: object
    box: dict


@dataclass(frozen=True)
class Counterexample:
    point: dict


@dataclass(frozen=True)
class Unknown:
    reason: str


class _Bailout(Exception):
    def __init__(self, verdict):
        self.verdict = verdict


DEFAULT_MAX_DEPTH = 40
_MAX_TREE_NODES = 200_000


def _leaf_condition(ante, goals, box):
    for a in ante:
        if tv_formula(a, box) is False:
            return True
    verdict = False
    for g in goals:
        t = tv_formula(g, box)
        if t is True:
            return True
        if t is None:
            verdict = None
    return verdict


def _split_var(box: Box) -> str:
    widest = None
    best = None
    for name in sorted(box):
        w = box[name].width()
        if best is None or w > best:
            best = w
            widest = name
    return widest


def decide_raw(ante, goals, box: Box, max_depth: int = DEFAULT_MAX_DEPTH):
    """Branch-and-bound core over lists of basic formulas.

    ``ante`` holds weak atoms read conjunctively, ``goals`` strict basic
    formulas read disjunctively.
    """
    budget = [_MAX_TREE_NODES]

    def probe(b: Box):
        point = {name: iv.midpoint() for name, iv in b.items()}
        if all(holds_exact(a, point) for a in ante) and not any(
            holds_exact(g, point) for g in goals
        ):
            raise _Bailout(Counterexample(point))

    def recurse(b: Box, depth: int):
        budget[0] -= 1
        if budget[0] <= 0:
            raise _Bailout(Unknown("subdivision node budget exhausted"))
        cond = _leaf_condition(ante, goals, b)
        if cond is True:
            return AllTrue()
        probe(b)
        if depth >= max_depth:
            raise _Bailout(Unknown("maximum subdivision depth reached"))
        var = _split_var(b)
        if var is None or b[var].width() == 0:
            # a point box evaluates exactly; reaching here means the probe
            # found the antecedent false, so the leaf condition must hold
            raise _Bailout(Unknown("point box undecided"))
        mid = b[var].midpoint()
        left = dict(b)
        left[var] = RatInterval(b[var].lo, mid)
        right = dict(b)
        right[var] = RatInterval(mid, b[var].hi)
        return Split(var, mid, recurse(left, depth + 1), recurse(right, depth + 1))

    try:
        tree = recurse(box, 0)
    except _Bailout as bail:
        return bail.verdict
    return Valid(tree=tree, box=dict(box))


def decide(sequent, box: Box, max_depth: int = DEFAULT_MAX_DEPTH):
    """Spec-level oracle entry: validity of a quantifier-free sequent whose
    antecedent atoms are weak and whose succedent formulas are strict."""
    from .fragment import FormulaClass, classify_formula

    ante = list(sequent.ante)
    goals = list(sequent.succ)
    for f in ante + goals:
        if not (is_basic(f) and is_quantifier_free(f)):
            raise PreconditionViolation(f"oracle requires quantifier-free basics: {f!r}")
    for f in ante:
        if not _weak_atoms_only(f):
            raise PreconditionViolation(f"antecedent must be weak atoms: {f!r}")
    for f in goals:
        if classify_formula(f)[0] is not FormulaClass.STRICT:
            raise PreconditionViolation(f"succedent must classify strict: {f!r}")
    missing = set().union(*[free_vars(f) for f in ante + goals]) - set(box) if ante + goals else set()
    if missing:
        raise UnboundVariable(", ".join(sorted(missing)))
    flat_ante = [a for f in ante for a in _flatten_and(f)]
    return decide_raw(flat_ante, goals, box, max_depth)


def _weak_atoms_only(f: Formula) -> bool:
    if isinstance(f, Geq):
        return True
    if isinstance(f, And):
        return _weak_atoms_only(f.left) and _weak_atoms_only(f.right)
    return False


def _flatten_and(f: Formula):
    if isinstance(f, And):
        yield from _flatten_and(f.left)
        yield from _flatten_and(f.right)
    else:
        yield f


def replay(tree, ante, goals, box: Box) -> bool:
    """Deterministically re-check a subdivision tree: every split must
    bisect exactly, and every leaf must be certified by interval
    evaluation alone."""
    if isinstance(tree, AllTrue):
        return _leaf_condition(ante, goals, box) is True
    if isinstance(tree, Split):
        if tree.var not in box:
            return False
        iv = box[tree.var]
        if tree.midpoint != iv.midpoint():
            return False
        left = dict(box)
        left[tree.var] = RatInterval(iv.lo, tree.midpoint)
        right = dict(box)
        right[tree.var] = RatInterval(tree.midpoint, iv.hi)
        return replay(tree.left, ante, goals, left) and replay(tree.right, ante, goals, right)
    return False


# ---------------------------------------------------------------------------
# Rational witness enumeration


def witness_stream():
    """Fair enumeration of the rationals: a doubling integer stream
    interleaved with a diagonal sweep over all dyadics, deduplicated.

    Starts 0, 1, -1, ... and reaches magnitude 2^t within O(t) entries
    while still eventually producing every rational k / 2^d.
    """
    def doubling():
        yield Fraction(0)
        t = 0
        while True:
            yield Fraction(2**t)
            yield Fraction(-(2**t))
            t += 1

    def integers():
        yield 0
        k = 1
        while True:
            yield k
            yield -k
            k += 1

    def diagonal():
        # Cantor sweep over (denominator exponent, integer index)
        for total in itertools.count():
            for d in range(total + 1):
                j = total - d
                k = (j + 1) // 2 * (1 if j % 2 else -1) if j else 0
                yield Fraction(k, 2**d)

    seen = set()
    for q in _interleave(doubling(), diagonal()):
        if q not in seen:
            seen.add(q)
            yield q


def _interleave(a, b):
    while True:
        yield next(a)
        yield next(b)


class Exhausted:
    pass


def find_rational_witness(body: Formula, x: str, context: Box, max_candidates: int,
                          max_depth: int = DEFAULT_MAX_DEPTH):
    """First rational ``q`` in the schedule for which the strict
    quantifier-free ``body`` with ``x := q`` is valid over ``context``."""
    from .syntax import subst_free

    for q, _ in zip(witness_stream(), range(max_candidates)):
        candidate = subst_free(body, {x: Const(q)})
        verdict = decide_raw([], [candidate], context, max_depth)
        if isinstance(verdict, Valid):
            return q
    return Exhausted()
