"""Abstract syntax for robust differential dynamic logic.

Terms denote polynomials with rational coefficients.  The formula language
is negation-free: only ``>`` and ``>=`` comparisons exist, and negation is
the De Morgan dual computed by :func:`negate`.  Equality ``a = b`` is a
derived form stored as ``a >= b & b >= a``; the printer resugars it.
Hybrid programs combine assignments, tests, choice, sequencing, iteration
and polynomial ODEs.

All nodes are frozen dataclasses; values are immutable and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

CLOCK = "tau"
FRESH_PREFIX = "_v"


class RdlError(Exception):
    """Base class for all errors raised by this package."""


class FreshnessViolation(RdlError):
    pass


class ClockMisuse(RdlError):
    pass


class BoundMentionsVar(RdlError):
    pass


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Add:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Mul:
    left: "Term"
    right: "Term"


Term = Union[Var, Const, Add, Mul]


@dataclass(frozen=True)
class Gt:
    left: Term
    right: Term


@dataclass(frozen=True)
class Geq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Diamond:
    program: "Program"
    body: "Formula"


@dataclass(frozen=True)
class Box:
    program: "Program"
    body: "Formula"


Formula = Union[Gt, Geq, Or, And, Exists, Forall, Diamond, Box]


@dataclass(frozen=True)
class Assign:
    var: str
    term: Term


@dataclass(frozen=True)
class Test:
    condition: Formula


@dataclass(frozen=True)
class Choice:
    left: "Program"
    right: "Program"


@dataclass(frozen=True)
class Seq:
    first: "Program"
    second: "Program"


@dataclass(frozen=True)
class Star:
    body: "Program"


@dataclass(frozen=True)
class Ode:
    system: tuple[tuple[str, Term], ...]
    domain: Formula


Program = Union[Assign, Test, Choice, Seq, Star, Ode]

Node = Union[Term, Formula, Program]

TERM_TYPES = (Var, Const, Add, Mul)
FORMULA_TYPES = (Gt, Geq, Or, And, Exists, Forall, Diamond, Box)
PROGRAM_TYPES = (Assign, Test, Choice, Seq, Star, Ode)


@dataclass(frozen=True)
class IntervalTermPair:
    """Closed or open interval of terms bounding a quantified variable."""

    lo: Term
    hi: Term
    bound_var: str


# ---------------------------------------------------------------------------
# Small constructors


def num(x) -> Const:
    return Const(Fraction(x))


TOP = Gt(num(0), num(-1))  # the valid atom used for the empty conjunction
BOT = Gt(num(0), num(0))  # the unsatisfiable atom used for the empty disjunction


def neg_term(t: Term) -> Term:
    if isinstance(t, Const):
        return Const(-t.value)
    return Mul(num(-1), t)


def sub_term(a: Term, b: Term) -> Term:
    return Add(a, neg_term(b))


def eq(a: Term, b: Term) -> Formula:
    """Equality, stored desugared as ``a >= b & b >= a``."""
    return And(Geq(a, b), Geq(b, a))


def match_eq(f: Formula):
    """Return ``(a, b)`` if ``f`` is the desugared equality ``a = b``."""
    if isinstance(f, And) and isinstance(f.left, Geq) and isinstance(f.right, Geq):
        if f.left.left == f.right.right and f.left.right == f.right.left:
            return f.left.left, f.left.right
    return None


def imp(antecedent: Formula, consequent: Formula) -> Formula:
    """Implication, encoded as ``!antecedent | consequent``."""
    return Or(negate(antecedent), consequent)


# ---------------------------------------------------------------------------
# Negation (De Morgan dual)


def negate(f: Formula) -> Formula:
    """Structural negation; an involution on every formula."""
    if isinstance(f, Gt):
        return Geq(f.right, f.left)
    if isinstance(f, Geq):
        return Gt(f.right, f.left)
    if isinstance(f, Or):
        return And(negate(f.left), negate(f.right))
    if isinstance(f, And):
        return Or(negate(f.left), negate(f.right))
    if isinstance(f, Exists):
        return Forall(f.var, negate(f.body))
    if isinstance(f, Forall):
        return Exists(f.var, negate(f.body))
    if isinstance(f, Diamond):
        return Box(f.program, negate(f.body))
    if isinstance(f, Box):
        return Diamond(f.program, negate(f.body))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Variables


def free_vars(node: Node) -> frozenset:
    """Free variables of a term, formula or program.

    Programs use the usual static analysis: a variable is free when it can
    be read before it is necessarily written.
    """
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, (Add, Mul)):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, (Gt, Geq)):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, (Or, And)):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, (Exists, Forall)):
        return free_vars(node.body) - {node.var}
    if isinstance(node, (Diamond, Box)):
        return free_vars(node.program) | (free_vars(node.body) - must_bound_vars(node.program))
    if isinstance(node, Assign):
        return free_vars(node.term)
    if isinstance(node, Test):
        return free_vars(node.condition)
    if isinstance(node, Choice):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, Seq):
        return free_vars(node.first) | (free_vars(node.second) - must_bound_vars(node.first))
    if isinstance(node, Star):
        return free_vars(node.body)
    if isinstance(node, Ode):
        fv = frozenset(x for x, _ in node.system) | free_vars(node.domain)
        for _, rhs in node.system:
            fv |= free_vars(rhs)
        return fv
    raise TypeError(f"not an AST node: {node!r}")


def must_bound_vars(p: Program) -> frozenset:
    """Variables written on every execution path of ``p``."""
    if isinstance(p, Assign):
        return frozenset({p.var})
    if isinstance(p, Test):
        return frozenset()
    if isinstance(p, Choice):
        return must_bound_vars(p.left) & must_bound_vars(p.right)
    if isinstance(p, Seq):
        return must_bound_vars(p.first) | must_bound_vars(p.second)
    if isinstance(p, Star):
        return frozenset()
    if isinstance(p, Ode):
        return frozenset(x for x, _ in p.system)
    raise TypeError(f"not a program: {p!r}")


def all_names(node: Node) -> frozenset:
    """Every identifier occurring anywhere in ``node``, free or bound."""
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, (Add, Mul, Gt, Geq, Or, And)):
        return all_names(node.left) | all_names(node.right)
    if isinstance(node, (Exists, Forall)):
        return all_names(node.body) | {node.var}
    if isinstance(node, (Diamond, Box)):
        return all_names(node.program) | all_names(node.body)
    if isinstance(node, Assign):
        return all_names(node.term) | {node.var}
    if isinstance(node, Test):
        return all_names(node.condition)
    if isinstance(node, Choice):
        return all_names(node.left) | all_names(node.right)
    if isinstance(node, Seq):
        return all_names(node.first) | all_names(node.second)
    if isinstance(node, Star):
        return all_names(node.body)
    if isinstance(node, Ode):
        names = all_names(node.domain) | frozenset(x for x, _ in node.system)
        for _, rhs in node.system:
            names |= all_names(rhs)
        return names
    raise TypeError(f"not an AST node: {node!r}")


def binder_names(node: Node) -> frozenset:
    """Names bound somewhere in ``node`` by a quantifier, assignment or ODE."""
    if isinstance(node, (Var, Const)):
        return frozenset()
    if isinstance(node, (Add, Mul, Gt, Geq)):
        return frozenset()
    if isinstance(node, (Or, And)):
        return binder_names(node.left) | binder_names(node.right)
    if isinstance(node, (Exists, Forall)):
        return binder_names(node.body) | {node.var}
    if isinstance(node, (Diamond, Box)):
        return binder_names(node.program) | binder_names(node.body)
    if isinstance(node, Assign):
        return frozenset({node.var})
    if isinstance(node, Test):
        return binder_names(node.condition)
    if isinstance(node, (Choice,)):
        return binder_names(node.left) | binder_names(node.right)
    if isinstance(node, Seq):
        return binder_names(node.first) | binder_names(node.second)
    if isinstance(node, Star):
        return binder_names(node.body)
    if isinstance(node, Ode):
        return frozenset(x for x, _ in node.system) | binder_names(node.domain)
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Renaming and substitution


def rename(node: Node, old: str, fresh: str) -> Node:
    """Uniformly rename every occurrence of ``old`` (free and bound).

    ``fresh`` must not occur anywhere in ``node``, which makes the renaming
    trivially capture-free.
    """
    if old == fresh:
        return node
    if fresh in all_names(node):
        raise FreshnessViolation(f"{fresh!r} already occurs in the given AST")
    return _rename(node, old, fresh)


def _rename(node: Node, old: str, new: str) -> Node:
    if isinstance(node, Var):
        return Var(new) if node.name == old else node
    if isinstance(node, Const):
        return node
    if isinstance(node, (Add, Mul, Gt, Geq, Or, And, Choice)):
        return type(node)(_rename(node.left, old, new), _rename(node.right, old, new))
    if isinstance(node, (Exists, Forall)):
        v = new if node.var == old else node.var
        return type(node)(v, _rename(node.body, old, new))
    if isinstance(node, (Diamond, Box)):
        return type(node)(_rename(node.program, old, new), _rename(node.body, old, new))
    if isinstance(node, Assign):
        v = new if node.var == old else node.var
        return Assign(v, _rename(node.term, old, new))
    if isinstance(node, Test):
        return Test(_rename(node.condition, old, new))
    if isinstance(node, Seq):
        return Seq(_rename(node.first, old, new), _rename(node.second, old, new))
    if isinstance(node, Star):
        return Star(_rename(node.body, old, new))
    if isinstance(node, Ode):
        system = tuple(
            (new if x == old else x, _rename(rhs, old, new)) for x, rhs in node.system
        )
        return Ode(system, _rename(node.domain, old, new))
    raise TypeError(f"not an AST node: {node!r}")


def term_subst(t: Term, x: str, r: Term) -> Term:
    """Replace every occurrence of variable ``x`` in term ``t`` by ``r``."""
    if isinstance(t, Var):
        return r if t.name == x else t
    if isinstance(t, Const):
        return t
    if isinstance(t, (Add, Mul)):
        return type(t)(term_subst(t.left, x, r), term_subst(t.right, x, r))
    raise TypeError(f"not a term: {t!r}")


def subst_free(f: Formula, mapping: Mapping[str, Term]) -> Formula:
    """Simultaneously substitute terms for free variables of ``f``.

    Refuses (``FreshnessViolation``) when a mapped variable is rebound
    anywhere in ``f`` or when a replacement variable would be captured;
    callers are expected to substitute fresh variables only.
    """
    rebound = binder_names(f) & set(mapping)
    if rebound:
        raise FreshnessViolation(f"substituted variables rebound in formula: {sorted(rebound)}")
    captured = binder_names(f) & {
        v for t in mapping.values() for v in free_vars(t)
    }
    if captured:
        raise FreshnessViolation(f"substitution would capture: {sorted(captured)}")
    return _subst(f, dict(mapping))


def _subst(node: Node, mapping: dict) -> Node:
    if not mapping:
        return node
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Const):
        return node
    if isinstance(node, (Add, Mul, Gt, Geq, Or, And, Choice)):
        return type(node)(_subst(node.left, mapping), _subst(node.right, mapping))
    if isinstance(node, (Exists, Forall)):
        inner = {k: v for k, v in mapping.items() if k != node.var}
        return type(node)(node.var, _subst(node.body, inner))
    if isinstance(node, (Diamond, Box)):
        return type(node)(_subst(node.program, mapping), _subst(node.body, mapping))
    if isinstance(node, Assign):
        return Assign(node.var, _subst(node.term, mapping))
    if isinstance(node, Test):
        return Test(_subst(node.condition, mapping))
    if isinstance(node, Seq):
        return Seq(_subst(node.first, mapping), _subst(node.second, mapping))
    if isinstance(node, Star):
        return Star(_subst(node.body, mapping))
    if isinstance(node, Ode):
        system = tuple((x, _subst(rhs, mapping)) for x, rhs in node.system)
        return Ode(system, _subst(node.domain, mapping))
    raise TypeError(f"not an AST node: {node!r}")


def safe_subst(f: Formula, x: str, v: Term, z: str) -> Formula:
    """Substitution-free encoding of "``f`` with ``x`` set to ``v``".

    Returns ``\\forall z (z = x -> \\forall x (x = v[x -> z] -> f))``.  The
    fresh variable ``z`` retains the old value of ``x`` so the encoding is
    admissible even when ``x`` occurs in ``v`` or is rebound inside ``f``.
    """
    if z == x or z in all_names(f) or z in all_names(v):
        raise FreshnessViolation(f"{z!r} is not fresh for the substitution")
    inner = Forall(x, imp(eq(Var(x), term_subst(v, x, Var(z))), f))
    return Forall(z, imp(eq(Var(z), Var(x)), inner))


# ---------------------------------------------------------------------------
# Derived forms


def desugar_norm(vs, w: Term, strict: bool) -> Formula:
    """Sup-norm bound ``||vs|| < w`` (strict) or ``<= w`` as a conjunction.

    Every component is bounded on both sides; the empty tuple yields the
    valid atom.
    """
    comps = []
    for v in vs:
        if strict:
            comps.append(And(Gt(v, neg_term(w)), Gt(w, v)))
        else:
            comps.append(And(Geq(v, neg_term(w)), Geq(w, v)))
    if not comps:
        return TOP
    out = comps[-1]
    for c in reversed(comps[:-1]):
        out = And(c, out)
    return out


def match_norm(f: Formula, variables, strict: bool):
    """Return the bound term ``w`` when ``f`` is exactly the desugared norm
    bound of ``variables``, or None."""
    if not variables:
        return None
    comp = f.left if (len(variables) > 1 and isinstance(f, And)) else f
    w = _norm_component_bound(comp, Var(variables[0]), strict)
    if w is None:
        return None
    expected = desugar_norm([Var(x) for x in variables], w, strict)
    if f == expected and not (free_vars(w) & set(variables)):
        return w
    return None


def _norm_component_bound(comp: Formula, v: Term, strict: bool):
    cmp_type = Gt if strict else Geq
    if not (
        isinstance(comp, And)
        and isinstance(comp.left, cmp_type)
        and isinstance(comp.right, cmp_type)
    ):
        return None
    if comp.left.left != v or comp.right.right != v:
        return None
    w = comp.right.left
    if comp.left.right != neg_term(w):
        return None
    return w


FORALL_CLOSED = "forall_closed"
EXISTS_CLOSED = "exists_closed"
EXISTS_OPEN = "exists_open"
FORALL_OPEN = "forall_open"


def desugar_bounded_quantifier(kind: str, x: str, lo: Term, hi: Term, body: Formula) -> Formula:
    """Expand a bounded quantifier over the interval ``[lo, hi]`` / ``(lo, hi)``.

    The bound terms must not mention the quantified variable.
    """
    if x in free_vars(lo) | free_vars(hi):
        raise BoundMentionsVar(f"bounds of {x!r} mention the variable itself")
    xv = Var(x)
    if kind == FORALL_CLOSED:
        return Forall(x, imp(And(Geq(xv, lo), Geq(hi, xv)), body))
    if kind == EXISTS_CLOSED:
        return Exists(x, And(And(Geq(xv, lo), Geq(hi, xv)), body))
    if kind == EXISTS_OPEN:
        return Exists(x, And(And(Gt(xv, lo), Gt(hi, xv)), body))
    if kind == FORALL_OPEN:
        return Forall(x, imp(And(Gt(xv, lo), Gt(hi, xv)), body))
    raise ValueError(f"unknown bounded quantifier kind: {kind!r}")


def match_bounded_forall(f: Formula):
    """Recognize the closed bounded universal shape.

    Returns ``(x, lo, hi, body)`` for ``\\forall x ((lo <= x & x <= hi) -> body)``
    stored in implication-free form, or None.
    """
    if not isinstance(f, Forall):
        return None
    x = f.var
    b = f.body
    if not (isinstance(b, Or) and isinstance(b.left, Or)):
        return None
    g1, g2 = b.left.left, b.left.right
    if not (isinstance(g1, Gt) and isinstance(g2, Gt)):
        return None
    if g1.right != Var(x) or g2.left != Var(x):
        return None
    lo, hi = g1.left, g2.right
    if x in free_vars(lo) | free_vars(hi):
        return None
    return x, lo, hi, b.right


def match_bounded_exists(f: Formula):
    """Recognize the closed bounded existential shape.

    Returns ``(x, lo, hi, body)`` for ``\\exists x (lo <= x & x <= hi & body)``.
    """
    if not isinstance(f, Exists):
        return None
    x = f.var
    b = f.body
    if not (isinstance(b, And) and isinstance(b.left, And)):
        return None
    g1, g2 = b.left.left, b.left.right
    if not (isinstance(g1, Geq) and isinstance(g2, Geq)):
        return None
    if g1.left != Var(x) or g2.right != Var(x):
        return None
    lo, hi = g1.right, g2.left
    if x in free_vars(lo) | free_vars(hi):
        return None
    return x, lo, hi, b.right


def power(p: Program, n: int) -> Program:
    """``p`` sequenced ``n`` times (right nested); requires ``n >= 1``."""
    if n < 1:
        raise ValueError("power requires n >= 1")
    if n == 1:
        return p
    return Seq(p, power(p, n - 1))


def desugar_loop_bound(p: Program, n: int) -> Program:
    """Bounded repetition: ``?top ++ p^1 ++ ... ++ p^n`` (left nested)."""
    out: Program = Test(TOP)
    for k in range(1, n + 1):
        out = Choice(out, power(p, k))
    return out


# ---------------------------------------------------------------------------
# Clock normalization


def normalize_clock(node: Node) -> Node:
    """Ensure every ODE carries the clock pair ``tau' = 1``, ordered last.

    Raises ClockMisuse when an ODE drives the clock at any rate other
    than 1, and rejects duplicated ODE variables.
    """
    if isinstance(node, TERM_TYPES):
        return node
    if isinstance(node, (Gt, Geq)):
        return node
    if isinstance(node, (Or, And)):
        return type(node)(normalize_clock(node.left), normalize_clock(node.right))
    if isinstance(node, (Exists, Forall)):
        return type(node)(node.var, normalize_clock(node.body))
    if isinstance(node, (Diamond, Box)):
        return type(node)(normalize_clock(node.program), normalize_clock(node.body))
    if isinstance(node, Assign):
        return node
    if isinstance(node, Test):
        return Test(normalize_clock(node.condition))
    if isinstance(node, Choice):
        return Choice(normalize_clock(node.left), normalize_clock(node.right))
    if isinstance(node, Seq):
        return Seq(normalize_clock(node.first), normalize_clock(node.second))
    if isinstance(node, Star):
        return Star(normalize_clock(node.body))
    if isinstance(node, Ode):
        names = [x for x, _ in node.system]
        if len(set(names)) != len(names):
            raise ClockMisuse(f"duplicate ODE variables: {names}")
        pairs = []
        for x, rhs in node.system:
            if x == CLOCK:
                if rhs != Const(Fraction(1)):
                    raise ClockMisuse(f"clock {CLOCK!r} must evolve at rate 1")
            else:
                pairs.append((x, rhs))
        pairs.append((CLOCK, num(1)))
        return Ode(tuple(pairs), normalize_clock(node.domain))
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Structure helpers


def is_basic(f: Formula) -> bool:
    """True when ``f`` contains no modality (a formula of real arithmetic)."""
    if isinstance(f, (Gt, Geq)):
        return True
    if isinstance(f, (Or, And)):
        return is_basic(f.left) and is_basic(f.right)
    if isinstance(f, (Exists, Forall)):
        return is_basic(f.body)
    if isinstance(f, (Diamond, Box)):
        return False
    raise TypeError(f"not a formula: {f!r}")


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, (Gt, Geq)):
        return True
    if isinstance(f, (Or, And)):
        return is_quantifier_free(f.left) and is_quantifier_free(f.right)
    if isinstance(f, (Exists, Forall)):
        return False
    if isinstance(f, (Diamond, Box)):
        return is_quantifier_free(f.body)
    raise TypeError(f"not a formula: {f!r}")


def node_children(node: Node) -> tuple:
    """Children reachable by rewrite paths (terms are opaque)."""
    if isinstance(node, (Gt, Geq, Assign)) or isinstance(node, TERM_TYPES):
        return ()
    if isinstance(node, (Or, And)):
        return (node.left, node.right)
    if isinstance(node, (Exists, Forall)):
        return (node.body,)
    if isinstance(node, (Diamond, Box)):
        return (node.program, node.body)
    if isinstance(node, Test):
        return (node.condition,)
    if isinstance(node, Choice):
        return (node.left, node.right)
    if isinstance(node, Seq):
        return (node.first, node.second)
    if isinstance(node, Star):
        return (node.body,)
    if isinstance(node, Ode):
        return (node.domain,)
    raise TypeError(f"not an AST node: {node!r}")


def with_child(node: Node, i: int, child: Node) -> Node:
    if isinstance(node, (Or, And, Choice)):
        return type(node)(child if i == 0 else node.left, child if i == 1 else node.right)
    if isinstance(node, (Exists, Forall)):
        if i != 0:
            raise IndexError(i)
        return type(node)(node.var, child)
    if isinstance(node, (Diamond, Box)):
        if i == 0:
            return type(node)(child, node.body)
        if i == 1:
            return type(node)(node.program, child)
        raise IndexError(i)
    if isinstance(node, Test):
        if i != 0:
            raise IndexError(i)
        return Test(child)
    if isinstance(node, Seq):
        if i == 0:
            return Seq(child, node.second)
        if i == 1:
            return Seq(node.first, child)
        raise IndexError(i)
    if isinstance(node, Star):
        if i != 0:
            raise IndexError(i)
        return Star(child)
    if isinstance(node, Ode):
        if i != 0:
            raise IndexError(i)
        return Ode(node.system, child)
    raise TypeError(f"cannot replace children of {node!r}")


def at_path(node: Node, path) -> Node:
    for i in path:
        children = node_children(node)
        if i >= len(children):
            raise IndexError(f"path step {i} out of range at {node!r}")
        node = children[i]
    return node


def replace_at(node: Node, path, new: Node) -> Node:
    if not path:
        return new
    i = path[0]
    children = node_children(node)
    if i >= len(children):
        raise IndexError(f"path step {i} out of range at {node!r}")
    return with_child(node, i, replace_at(children[i], path[1:], new))


def iter_subnodes(node: Node, path=()):
    """Yield ``(path, subnode)`` pairs in preorder along rewrite paths."""
    yield path, node
    for i, child in enumerate(node_children(node)):
        yield from iter_subnodes(child, path + (i,))


class FreshNames:
    """Deterministic fresh-name source: the reserved prefix plus a counter,
    skipping names that already occur in the AST at hand."""

    def __init__(self, start: int = 0):
        self._n = start

    def fresh(self, avoid) -> str:
        while True:
            name = f"{FRESH_PREFIX}{self._n}"
            self._n += 1
            if name not in avoid:
                return name

    def fresh_many(self, count: int, avoid) -> list:
        taken = set(avoid)
        out = []
        for _ in range(count):
            name = self.fresh(taken)
            taken.add(name)
            out.append(name)
        return out
