"""Ordinal arithmetic in Cantor normal form below omega^omega, and the
ordinal rank that drives well-founded descent during proof search.

An ordinal is a strictly decreasing list of ``(exponent, coefficient)``
pairs denoting ``w^e1*c1 + w^e2*c2 + ...``; the empty list is 0.  Only the
operations the rank needs are provided: non-commutative addition,
right-multiplication by omega, and comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

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
    RdlError,
    Seq,
    Star,
    Test,
    is_basic,
)


class ZeroOperand(RdlError):
    pass


@dataclass(frozen=True)
class Ordinal:
    terms: tuple  # ((exponent, coefficient), ...) strictly decreasing exponents

    def __post_init__(self):
        exps = [e for e, _ in self.terms]
        if exps != sorted(exps, reverse=True) or len(set(exps)) != len(exps):
            raise ValueError(f"not in normal form: {self.terms}")
        if any(c <= 0 or e < 0 for e, c in self.terms):
            raise ValueError(f"bad coefficient or exponent: {self.terms}")

    def is_zero(self) -> bool:
        return not self.terms

    def leading_exponent(self) -> int:
        if not self.terms:
            raise ZeroOperand("the zero ordinal has no leading exponent")
        return self.terms[0][0]

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms:
            if e == 0:
                parts.append(str(c))
            elif e == 1:
                parts.append(f"w*{c}")
            else:
                parts.append(f"w^{e}*{c}")
        return " + ".join(parts)

    # comparisons delegate to ord_cmp so sorting works directly
    def __lt__(self, other: "Ordinal") -> bool:
        return ord_cmp(self, other) < 0

    def __le__(self, other: "Ordinal") -> bool:
        return ord_cmp(self, other) <= 0


ZERO = Ordinal(())
OMEGA = Ordinal(((1, 1),))


def from_nat(n: int) -> Ordinal:
    if n < 0:
        raise ValueError("ordinals are non-negative")
    return Ordinal(((0, n),)) if n else ZERO


def omega_power(e: int, coeff: int = 1) -> Ordinal:
    return Ordinal(((e, coeff),))


def ord_add(a: Ordinal, b: Ordinal) -> Ordinal:
    """Non-commutative ordinal sum: terms of ``a`` below the leading
    exponent of ``b`` are absorbed."""
    if b.is_zero():
        return a
    if a.is_zero():
        return b
    k = b.leading_exponent()
    kept = [t for t in a.terms if t[0] > k]
    merged = list(b.terms)
    for e, c in a.terms:
        if e == k:
            merged[0] = (k, c + merged[0][1])
    return Ordinal(tuple(kept) + tuple(merged))


def ord_mul_omega(a: Ordinal) -> Ordinal:
    """Right-multiply by omega: ``a * w = w^(k+1)`` for leading exponent k."""
    if a.is_zero():
        raise ZeroOperand("0 * w is 0; refusing the degenerate case")
    return omega_power(a.leading_exponent() + 1)


def ord_cmp(a: Ordinal, b: Ordinal) -> int:
    """Lexicographic comparison of normal forms: -1, 0 or 1."""
    for (ea, ca), (eb, cb) in zip(a.terms, b.terms):
        if ea != eb:
            return 1 if ea > eb else -1
        if ca != cb:
            return 1 if ca > cb else -1
    if len(a.terms) != len(b.terms):
        return 1 if len(a.terms) > len(b.terms) else -1
    return 0


def ord_max(a: Ordinal, b: Ordinal) -> Ordinal:
    return a if ord_cmp(a, b) >= 0 else b


# ---------------------------------------------------------------------------
# Rank of formulas and programs.
#
# Modality-free formulas rank 0 regardless of their shape; the structural
# clauses below apply as soon as a modality occurs anywhere inside.  The
# continuous-program clause carries a trailing +2 so that its Euler-loop
# reduct, whose iteration clause ends in +1, lands strictly below it.


def rank_formula(f: Formula) -> Ordinal:
    if is_basic(f):
        return ZERO
    if isinstance(f, (Gt, Geq)):
        return ZERO
    if isinstance(f, (Or, And)):
        return ord_add(ord_max(rank_formula(f.left), rank_formula(f.right)), from_nat(1))
    if isinstance(f, Exists):
        return ord_add(rank_formula(f.body), from_nat(5))
    if isinstance(f, Forall):
        return ord_add(rank_formula(f.body), from_nat(1))
    if isinstance(f, (Diamond, Box)):
        return ord_add(ord_add(rank_formula(f.body), rank_program(f.program)), from_nat(1))
    raise TypeError(f"not a formula: {f!r}")


def rank_program(p: Program) -> Ordinal:
    if isinstance(p, Assign):
        return from_nat(4)
    if isinstance(p, Test):
        return ord_add(rank_formula(p.condition), from_nat(1))
    if isinstance(p, Choice):
        return ord_add(ord_add(rank_program(p.left), rank_program(p.right)), from_nat(2))
    if isinstance(p, Seq):
        out = ord_add(rank_program(p.second), from_nat(1))
        out = ord_add(out, rank_program(p.first))
        return ord_add(out, from_nat(1))
    if isinstance(p, Star):
        inner = ord_add(rank_program(p.body), from_nat(1))
        return ord_add(ord_mul_omega(inner), from_nat(1))
    if isinstance(p, Ode):
        inner = ord_add(rank_formula(p.domain), from_nat(17))
        return ord_add(ord_mul_omega(inner), from_nat(2))
    raise TypeError(f"not a program: {p!r}")


def sequent_measure(formulas) -> Ordinal:
    """Maximum rank over a set of formulas; 0 for the empty set."""
    out = ZERO
    for f in formulas:
        out = ord_max(out, rank_formula(f))
    return out


def set_cmp(g1, g2) -> int:
    return ord_cmp(sequent_measure(g1), sequent_measure(g2))
