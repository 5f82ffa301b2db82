"""Syntactic constructors for the continuous-program axioms: formal
derivatives, vector-field bound formulas, epsilon-interiors, the Euler
step program, and the four ODE axiom instantiations.  A fixed-step RK4
integrator is included as an uncertified testing aid.

Every constructor stays inside the core grammar: the simultaneous vector
update of an Euler step is encoded through fresh snapshot variables, and
the absolute values in the derivative bound are expanded into sign-case
conjunctions of strict comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iter_product

from .fragment import FormulaClass, classify_formula
from .syntax import (
    Add,
    And,
    Assign,
    Box,
    Const,
    Diamond,
    Exists,
    Forall,
    Formula,
    FreshNames,
    FreshnessViolation,
    Geq,
    Gt,
    Mul,
    Ode,
    Or,
    Program,
    RdlError,
    Seq,
    Star,
    TOP,
    Term,
    Test,
    Var,
    all_names,
    desugar_bounded_quantifier,
    desugar_norm,
    eq,
    free_vars,
    match_norm,
    negate,
    neg_term,
    num,
    subst_free,
    sub_term,
)
from .syntax import FORALL_CLOSED


class SideConditionViolation(RdlError):
    pass


class FlowOverflow(RdlError):
    pass


class VariableClash(RdlError):
    pass


@dataclass(frozen=True)
class EulerParams:
    k: Fraction
    m: Fraction
    l: Fraction
    h: Fraction
    n: int


def ode_variables(sys: Ode) -> list:
    return [x for x, _ in sys.system]


def clock_of(sys: Ode) -> str:
    """The designated clock: the last rate-1 pair of the system."""
    for x, rhs in reversed(sys.system):
        if rhs == Const(Fraction(1)):
            return x
    raise SideConditionViolation("system has no rate-1 clock variable")


# ---------------------------------------------------------------------------
# Formal derivative


def poly_derivative(v: Term, x: str) -> Term:
    """Unsimplified syntactic partial derivative of ``v`` by ``x``."""
    if isinstance(v, Var):
        return num(1) if v.name == x else num(0)
    if isinstance(v, Const):
        return num(0)
    if isinstance(v, Add):
        return Add(poly_derivative(v.left, x), poly_derivative(v.right, x))
    if isinstance(v, Mul):
        return Add(
            Mul(v.left, poly_derivative(v.right, x)),
            Mul(poly_derivative(v.left, x), v.right),
        )
    raise TypeError(f"not a term: {v!r}")


# ---------------------------------------------------------------------------
# Bound formula for the vector field and its Jacobian


def build_beta(sys: Ode, k: Term, m: Term, l: Term) -> Formula:
    """Bound formula: everywhere on the closed ball of radius ``k + 2`` the
    vector field stays below ``m`` and its derivative columns below ``l``.

    The ball quantifies the system variables themselves.  Column sums of
    absolute derivatives are encoded by one strict comparison per sign
    assignment, avoiding an absolute-value primitive.
    """
    xs = ode_variables(sys)
    clash = {v for t in (k, m, l) for v in free_vars(t)} & set(xs)
    if clash:
        raise VariableClash(f"bound terms mention system variables: {sorted(clash)}")
    vs = [rhs for _, rhs in sys.system]
    radius = Add(k, num(2))
    body = And(
        desugar_norm(vs, m, strict=True),
        jacobian_bounds(sys, l),
    )
    out = body
    for x in reversed(xs):
        out = desugar_bounded_quantifier(FORALL_CLOSED, x, neg_term(radius), radius, out)
    return out


def jacobian_bounds(sys: Ode, l: Term) -> Formula:
    xs = ode_variables(sys)
    vs = [rhs for _, rhs in sys.system]
    conjuncts = []
    for xj in xs:
        partials = [poly_derivative(vi, xj) for vi in vs]
        for signs in iter_product((1, -1), repeat=len(partials)):
            total = None
            for s, d in zip(signs, partials):
                signed = d if s == 1 else Mul(num(-1), d)
                total = signed if total is None else Add(total, signed)
            conjuncts.append(Gt(l, total))
    out = conjuncts[-1]
    for c in reversed(conjuncts[:-1]):
        out = And(c, out)
    return out


# ---------------------------------------------------------------------------
# Epsilon interior


def eps_interior(f: Formula, xs, eps: str, ball_vars) -> Formula:
    """The formula asserting that ``f`` holds throughout the closed
    sup-norm ball of radius ``eps`` around the current values of ``xs``.

    ``ball_vars`` supplies one fresh variable per component; they and
    ``eps`` must not occur in ``f``.
    """
    xs = list(xs)
    ball_vars = list(ball_vars)
    if len(ball_vars) != len(xs):
        raise SideConditionViolation("need one ball variable per component")
    taken = all_names(f)
    for name in ball_vars + [eps]:
        if name in taken:
            raise FreshnessViolation(f"{name!r} occurs in the formula")
    out = subst_free(f, {x: Var(y) for x, y in zip(xs, ball_vars)})
    ev = Var(eps)
    for x, y in zip(reversed(xs), reversed(ball_vars)):
        out = desugar_bounded_quantifier(
            FORALL_CLOSED, y, sub_term(Var(x), ev), Add(Var(x), ev), out
        )
    return out


# ---------------------------------------------------------------------------
# Euler step program


def build_euler_step(sys: Ode, k: Term, h: str, m: str, l: str, eps: str, snaps) -> Program:
    """One Euler iteration: test that the state is safely inside the
    ``k``-ball, advance every variable by ``h`` times its right-hand side
    (read from pre-state snapshots), then accumulate the error bound
    ``eps := (1 + h*l)*eps + (l*m/2)*h^2``.

    The confinement test is strict so the step program stays exact.
    """
    xs = ode_variables(sys)
    snaps = list(snaps)
    if len(snaps) != len(xs):
        raise SideConditionViolation("need one snapshot variable per system variable")
    reserved = set(snaps) | {h, m, l, eps}
    if len(reserved) != len(snaps) + 4:
        raise FreshnessViolation("reserved Euler variables must be distinct")
    for _, rhs in sys.system:
        if reserved & free_vars(rhs):
            raise FreshnessViolation("reserved Euler variables occur in the vector field")
    guard = Test(desugar_norm([Var(x) for x in xs], sub_term(k, Var(eps)), strict=True))
    snapshot_map = {x: Var(s) for x, s in zip(xs, snaps)}
    updates = [Assign(s, Var(x)) for x, s in zip(xs, snaps)]
    for (x, rhs) in sys.system:
        stepped = Add(Var(x), Mul(Var(h), rhs))
        updates.append(Assign(x, subst_free_term(stepped, snapshot_map)))
    err = Add(
        Mul(Add(num(1), Mul(Var(h), Var(l))), Var(eps)),
        Mul(Mul(Mul(Var(l), Var(m)), Const(Fraction(1, 2))), Mul(Var(h), Var(h))),
    )
    updates.append(Assign(eps, err))
    chain = updates[-1]
    for u in reversed(updates[:-1]):
        chain = Seq(u, chain)
    return Seq(guard, chain)


def subst_free_term(t: Term, mapping) -> Term:
    from .syntax import term_subst

    out = t
    for x, r in mapping.items():
        out = term_subst(out, x, r)
    return out


# ---------------------------------------------------------------------------
# Axiom instantiations


def instantiate_diaode(sys: Ode, domain_pos: Formula, k: Term, post: Formula, names: FreshNames):
    """Euler reduction: a reachability diamond over an ODE with a strict,
    norm-bounded evolution domain is equivalent to the existence of
    bounds and a step size under which the finite Euler iteration reaches
    the strict postcondition with accumulated error below one.

    Returns ``(lhs, rhs, params)`` where ``params`` records the fresh
    names used, keyed for deterministic re-instantiation.
    """
    xs = ode_variables(sys)
    for part, label in ((domain_pos, "domain"), (post, "postcondition")):
        if classify_formula(part)[0] is not FormulaClass.STRICT:
            raise SideConditionViolation(f"{label} must be a strict formula")
    if free_vars(k) & set(xs):
        raise SideConditionViolation("the norm bound must not mention system variables")
    avoid = set(all_names(post)) | set(all_names(domain_pos)) | set(xs) | set(free_vars(k))
    for _, rhs in sys.system:
        avoid |= all_names(rhs)
    m, l, h, eps = names.fresh_many(4, avoid)
    avoid |= {m, l, h, eps}
    ball = names.fresh_many(len(xs), avoid)
    avoid |= set(ball)
    snaps = names.fresh_many(len(xs), avoid)

    lhs = Diamond(Ode(sys.system, And(domain_pos, desugar_norm([Var(x) for x in xs], k, strict=True))), post)
    rhs = build_diaode_rhs(sys, domain_pos, k, post, m, l, h, eps, ball, snaps)
    params = {"m": m, "l": l, "h": h, "eps": eps, "ball": tuple(ball), "snaps": tuple(snaps)}
    return lhs, rhs, params


def build_diaode_rhs(sys, domain_pos, k, post, m, l, h, eps, ball, snaps) -> Formula:
    xs = ode_variables(sys)
    beta = build_beta(sys, k, Var(m), Var(l))
    step = build_euler_step(sys, k, h, m, l, eps, snaps)
    loop_body = Seq(Test(eps_interior(domain_pos, xs, eps, ball)), step)
    inner_post = And(eps_interior(post, xs, eps, ball), Gt(num(1), Var(eps)))
    run = Diamond(Seq(Assign(eps, num(0)), Star(loop_body)), inner_post)
    rhs = Exists(
        m,
        And(
            Gt(Var(m), num(0)),
            Exists(
                l,
                And(Gt(Var(l), num(0)), And(beta, Exists(h, And(Gt(Var(h), num(0)), run)))),
            ),
        ),
    )
    return rhs


def match_diaode_lhs(f: Formula):
    """Split a diamond over a norm-bounded ODE into (system, strict domain
    part, bound term, post)."""
    if not isinstance(f, Diamond) or not isinstance(f.program, Ode):
        return None
    ode = f.program
    if not isinstance(ode.domain, And):
        return None
    xs = ode_variables(ode)
    k = match_norm(ode.domain.right, xs, strict=True)
    if k is None:
        return None
    return ode, ode.domain.left, k, f.body


def instantiate_diaodebound(sys: Ode, post: Formula, y: str):
    """Evolution bound introduction: reachability along an ODE is
    equivalent to reachability with the state norm bounded by some fresh
    ``y``."""
    xs = ode_variables(sys)
    forbidden = set(xs) | free_vars(post) | free_vars(sys.domain)
    for _, rhs in sys.system:
        forbidden |= free_vars(rhs)
    if y in forbidden:
        raise SideConditionViolation(f"{y!r} must be fresh for the diamond")
    lhs = Diamond(sys, post)
    bounded = Ode(sys.system, And(sys.domain, desugar_norm([Var(x) for x in xs], Var(y), strict=True)))
    rhs = Exists(y, Diamond(bounded, post))
    return lhs, rhs


def instantiate_odedual(sys: Ode, post: Formula):
    """Duality between bounded safety and reachability: a box over an ODE
    whose weak domain carries a sup-norm bound ``k`` (a rational constant)
    is equivalent to a diamond that runs until the domain fails or the
    clock passes ``k``.

    Returns ``(lhs, rhs, guard)``; the guard premise asserts, over the
    enclosing box of radius ``k + 1``, that the domain keeps the state
    strictly inside radius ``k + 1``.
    """
    xs = ode_variables(sys)
    domain = sys.domain
    if classify_formula(post)[0] is not FormulaClass.STRICT:
        raise SideConditionViolation("postcondition must be a strict formula")
    if classify_formula(domain)[0] is not FormulaClass.WEAK:
        raise SideConditionViolation("evolution domain must be a weak formula")
    if not isinstance(domain, And):
        raise SideConditionViolation("evolution domain must end in a norm bound")
    k = match_norm(domain.right, xs, strict=False)
    if k is None:
        raise SideConditionViolation("evolution domain must end in a norm bound")
    if not isinstance(k, Const):
        raise SideConditionViolation("the norm bound must be a rational constant")
    if free_vars(domain) - set(xs):
        raise SideConditionViolation("domain may only mention system variables")
    clock = clock_of(sys)
    escape = Gt(Var(clock), k)
    lhs = Box(sys, post)
    rhs = Diamond(Ode(sys.system, Or(post, escape)), Or(negate(domain), escape))
    guard = _odedual_guard(xs, domain, k)
    return lhs, rhs, guard


def _odedual_guard(xs, domain: Formula, k: Const) -> Formula:
    radius = Const(k.value + 1)
    body = Or(negate(domain), desugar_norm([Var(x) for x in xs], radius, strict=True))
    out = body
    for x in reversed(xs):
        out = desugar_bounded_quantifier(FORALL_CLOSED, x, Const(-radius.value), radius, out)
    return out


def instantiate_evd(sys: Ode, post: Formula, tau0: str):
    """Evolution-domain split: reaching ``post`` under a domain equals
    picking a stop time, reaching ``post`` exactly then without a domain,
    and staying in the domain up to that time."""
    if tau0 in all_names(post) | all_names(sys):
        raise SideConditionViolation(f"{tau0!r} must be fresh")
    clock = clock_of(sys)
    lhs = Diamond(sys, post)
    free_run = Diamond(Ode(sys.system, TOP), And(post, eq(Var(clock), Var(tau0))))
    stay = Box(Ode(sys.system, Geq(Var(tau0), Var(clock))), sys.domain)
    rhs = Exists(tau0, And(free_run, stay))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Numerical flow (testing aid only; never feeds certificates)


def numeric_flow(sys: Ode, x0, T, step, magnitude_cap: float = 1e9):
    """Fixed-step RK4 trajectory of ``ceil(T / step)`` steps from ``x0``.

    States are rational-valued maps; integration is in floating point.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    xs = ode_variables(sys)
    state = {name: float(v) for name, v in x0.items()}
    for x in xs:
        state.setdefault(x, 0.0)
    rhs = {x: r for x, r in sys.system}
    out = [dict_to_fractions(state)]
    steps = math.ceil(Fraction(T) / Fraction(step))
    hf = float(step)

    def field(s):
        return {x: term_float(rhs[x], s) for x in xs}

    for _ in range(steps):
        k1 = field(state)
        s2 = {**state, **{x: state[x] + hf / 2 * k1[x] for x in xs}}
        k2 = field(s2)
        s3 = {**state, **{x: state[x] + hf / 2 * k2[x] for x in xs}}
        k3 = field(s3)
        s4 = {**state, **{x: state[x] + hf * k3[x] for x in xs}}
        k4 = field(s4)
        for x in xs:
            state[x] += hf / 6 * (k1[x] + 2 * k2[x] + 2 * k3[x] + k4[x])
            if abs(state[x]) > magnitude_cap:
                raise FlowOverflow(f"{x} exceeded magnitude cap")
        out.append(dict_to_fractions(state))
    return out


def term_float(t: Term, state) -> float:
    if isinstance(t, Var):
        return float(state.get(t.name, 0.0))
    if isinstance(t, Const):
        return float(t.value)
    if isinstance(t, Add):
        return term_float(t.left, state) + term_float(t.right, state)
    if isinstance(t, Mul):
        return term_float(t.left, state) * term_float(t.right, state)
    raise TypeError(f"not a term: {t!r}")


def dict_to_fractions(state):
    return {k: Fraction(v) for k, v in state.items()}
