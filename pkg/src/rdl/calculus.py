"""Sequents, rule application, and the independent certificate checker.

A sequent holds two duplicate-free formula sets kept in a canonical order
(sorted by their printed form) so that certificates serialize
byte-stably.  Rules are applied forward: structural rules act on a
top-level succedent formula, program and ODE axioms rewrite an
equivalence instance at an explicit position inside one.  ``r_real``
closes a leaf whose oracle obligation is derived deterministically from
the sequent and certified by an embedded subdivision tree; checking
replays the tree instead of re-searching.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import euler as _euler
from .fragment import FormulaClass, classify_formula
from .grammar import parse_formula, pretty
from .intervals import (
    AllTrue,
    RatInterval,
    Split,
    interval_eval,
    replay,
)
from .syntax import (
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
    Ode,
    Or,
    RdlError,
    Seq,
    Star,
    Term,
    Test,
    Var,
    all_names,
    at_path,
    desugar_loop_bound,
    free_vars,
    is_basic,
    is_quantifier_free,
    match_bounded_forall,
    negate,
    replace_at,
    safe_subst,
)


class SideConditionViolation(RdlError):
    pass


class PrincipalNotFound(RdlError):
    pass


class MalformedParameters(RdlError):
    pass


# ---------------------------------------------------------------------------
# Sequents


@dataclass(frozen=True)
class Sequent:
    ante: tuple
    succ: tuple

    def __str__(self) -> str:
        left = ", ".join(pretty(f) for f in self.ante)
        right = ", ".join(pretty(f) for f in self.succ)
        return f"{left} |- {right}"


def _canon(formulas) -> tuple:
    seen = set()
    out = []
    for f in formulas:
        if f not in seen:
            seen.add(f)
            out.append(f)
    return tuple(sorted(out, key=pretty))


def sequent(ante=(), succ=()) -> Sequent:
    return Sequent(_canon(ante), _canon(succ))


def goal_sequent(goal: Formula) -> Sequent:
    return sequent((), (goal,))


# ---------------------------------------------------------------------------
# Rules

OR_R = "or_r"
AND_R = "and_r"
EXISTS_R = "exists_r"
FORALL_R = "forall_r"
STAR_FINITE = "star_finite"
R_REAL = "r_real"
CUT_C = "cut_c"

DIA_TEST = "dia_test"
BOX_TEST = "box_test"
DIA_CHOICE = "dia_choice"
BOX_CHOICE = "box_choice"
DIA_SEQ = "dia_seq"
BOX_SEQ = "box_seq"
DIA_STAR = "dia_star"
BOX_STAR = "box_star"
DIA_ASSIGN = "dia_assign"
BOX_ASSIGN = "box_assign"
ODE_DUAL = "ode_dual"
DIA_ODE = "dia_ode"
DIA_ODE_BOUND = "dia_ode_bound"
EVOLUTION_DOMAIN = "evolution_domain"

REWRITE_RULES = {
    DIA_TEST, BOX_TEST, DIA_CHOICE, BOX_CHOICE, DIA_SEQ, BOX_SEQ,
    DIA_STAR, BOX_STAR, DIA_ASSIGN, BOX_ASSIGN, ODE_DUAL, DIA_ODE,
    DIA_ODE_BOUND, EVOLUTION_DOMAIN,
}

STRUCTURAL_RULES = {OR_R, AND_R, EXISTS_R, FORALL_R, STAR_FINITE, R_REAL, CUT_C}


@dataclass(frozen=True)
class Rule:
    name: str
    index: int = 0
    path: tuple = ()
    params: tuple = ()  # sorted (key, value) pairs

    def param(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default


def rule(name: str, index: int = 0, path=(), **params) -> Rule:
    return Rule(name, index, tuple(path), tuple(sorted(params.items())))


@dataclass
class ProofNode:
    conclusion: Sequent
    rule: Rule
    premises: list
    oracle_trace: Optional[dict] = None  # {"box": Box, "tree": SubdivisionTree}


@dataclass
class Certificate:
    goal: Formula
    tree: ProofNode
    format_version: int = 1


# ---------------------------------------------------------------------------
# Axiom instances


def axiom_instance(name: str, **params):
    """The two sides of a registered axiom schema.

    Keyword pieces depend on the schema: program axioms take ``program``
    and ``post``; the assignment axioms additionally take ``fresh``; the
    ODE axioms take the pieces documented on their builders in
    :mod:`rdl.euler`.
    """
    post = params.get("post")
    prog = params.get("program")
    if name == DIA_TEST:
        return Diamond(prog, post), And(prog.condition, post)
    if name == BOX_TEST:
        return Box(prog, post), Or(negate(prog.condition), post)
    if name == DIA_CHOICE:
        return Diamond(prog, post), Or(Diamond(prog.left, post), Diamond(prog.right, post))
    if name == BOX_CHOICE:
        return Box(prog, post), And(Box(prog.left, post), Box(prog.right, post))
    if name == DIA_SEQ:
        return Diamond(prog, post), Diamond(prog.first, Diamond(prog.second, post))
    if name == BOX_SEQ:
        return Box(prog, post), Box(prog.first, Box(prog.second, post))
    if name == DIA_STAR:
        return Diamond(prog, post), Or(post, Diamond(prog.body, Diamond(prog, post)))
    if name == BOX_STAR:
        return Box(prog, post), And(post, Box(prog.body, Box(prog, post)))
    if name in (DIA_ASSIGN, BOX_ASSIGN):
        shape = Diamond if name == DIA_ASSIGN else Box
        rhs = safe_subst(post, prog.var, prog.term, params["fresh"])
        return shape(prog, post), rhs
    if name == DIA_ODE_BOUND:
        return _euler.instantiate_diaodebound(prog, post, params["fresh"])
    if name == ODE_DUAL:
        lhs, rhs, _guard = _euler.instantiate_odedual(prog, post)
        return lhs, rhs
    if name == EVOLUTION_DOMAIN:
        return _euler.instantiate_evd(prog, post, params["fresh"])
    if name == DIA_ODE:
        split = _euler.match_diaode_lhs(Diamond(prog, post))
        if split is None:
            raise SideConditionViolation("domain is not of the norm-bounded shape")
        ode, domain_pos, k, _ = split
        rhs = _euler.build_diaode_rhs(
            ode, domain_pos, k, post,
            params["m"], params["l"], params["h"], params["eps"],
            list(params["ball"]), list(params["snaps"]),
        )
        return Diamond(prog, post), rhs
    raise MalformedParameters(f"unknown axiom: {name!r}")


def _sequent_names(s: Sequent):
    names = set()
    for f in s.ante + s.succ:
        names |= all_names(f)
    return names


def _require_fresh(names, s: Sequent):
    taken = _sequent_names(s)
    if len(set(names)) != len(list(names)):
        raise SideConditionViolation(f"fresh names must be distinct: {names}")
    for n in names:
        if n in taken:
            raise SideConditionViolation(f"name {n!r} is not fresh for the sequent")


# ---------------------------------------------------------------------------
# Rule application


def apply_rule(s: Sequent, r: Rule):
    """Premises of applying ``r`` to ``s``; raises when the principal
    formula is missing, parameters are malformed, or a side condition
    fails.  Deterministic: equal inputs yield equal premise lists."""
    if r.index < 0 or r.index >= len(s.succ):
        raise PrincipalNotFound(f"no succedent formula at index {r.index}")
    principal = s.succ[r.index]

    if r.name in (OR_R, AND_R, EXISTS_R, FORALL_R, STAR_FINITE, R_REAL):
        if r.path:
            raise MalformedParameters(f"{r.name} applies at the top level only")

    if r.name == OR_R:
        if not isinstance(principal, Or):
            raise PrincipalNotFound("or_r needs a disjunction")
        return [_replace(s, r.index, [principal.left, principal.right])]

    if r.name == AND_R:
        if not isinstance(principal, And):
            raise PrincipalNotFound("and_r needs a conjunction")
        return [
            _replace(s, r.index, [principal.left]),
            _replace(s, r.index, [principal.right]),
        ]

    if r.name == EXISTS_R:
        if not isinstance(principal, Exists):
            raise PrincipalNotFound("exists_r needs an existential")
        witness = r.param("witness")
        if witness is None or not _is_term(witness):
            raise MalformedParameters("exists_r needs a witness term")
        reduct = Diamond(Assign(principal.var, witness), principal.body)
        return [_replace(s, r.index, [reduct])]

    if r.name == FORALL_R:
        m = match_bounded_forall(principal)
        if m is None:
            raise PrincipalNotFound("forall_r needs a bounded universal")
        x, lo, hi, body = m
        new_name = r.param("rename")
        if new_name is not None:
            _require_fresh([new_name], s)
            from .syntax import rename as _rename

            renamed = _rename(principal, x, new_name)
            x, lo, hi, body = match_bounded_forall(renamed)
        else:
            others = set()
            for i, f in enumerate(s.succ):
                if i != r.index:
                    others |= free_vars(f)
            for f in s.ante:
                others |= free_vars(f)
            if x in others:
                raise SideConditionViolation(
                    f"{x!r} occurs free in the sequent; a rename is required"
                )
        bound = And(Geq(Var(x), lo), Geq(hi, Var(x)))
        out = _replace(s, r.index, [body])
        return [sequent(out.ante + (bound,), out.succ)]

    if r.name == STAR_FINITE:
        if not (isinstance(principal, Diamond) and isinstance(principal.program, Star)):
            raise PrincipalNotFound("star_finite needs a diamond over an iteration")
        n = r.param("n")
        if not isinstance(n, int) or n < 0:
            raise MalformedParameters("star_finite needs a repetition count n >= 0")
        reduct = Diamond(desugar_loop_bound(principal.program.body, n), principal.body)
        return [_replace(s, r.index, [reduct])]

    if r.name == R_REAL:
        view = oracle_view(s)
        if view is None:
            raise SideConditionViolation("sequent has no boxed basic obligation")
        return []

    if r.name in REWRITE_RULES:
        return _apply_rewrite(s, r, principal)

    if r.name == CUT_C:
        raise MalformedParameters("cut is realized by positional rewrites; use an axiom name")
    raise MalformedParameters(f"unknown rule: {r.name!r}")


def _is_term(x) -> bool:
    from .syntax import TERM_TYPES

    return isinstance(x, TERM_TYPES)


def _replace(s: Sequent, index: int, new_formulas) -> Sequent:
    succ = list(s.succ)
    del succ[index]
    return sequent(s.ante, tuple(succ) + tuple(new_formulas))


def _apply_rewrite(s: Sequent, r: Rule, principal: Formula):
    try:
        target = at_path(principal, r.path)
    except (IndexError, TypeError) as exc:
        raise PrincipalNotFound(f"bad rewrite path: {exc}") from exc

    extra = []
    if r.name == DIA_TEST:
        _need(target, Diamond, Test)
        rhs = And(target.program.condition, target.body)
    elif r.name == BOX_TEST:
        _need(target, Box, Test)
        rhs = Or(negate(target.program.condition), target.body)
    elif r.name == DIA_CHOICE:
        _need(target, Diamond, Choice)
        rhs = Or(Diamond(target.program.left, target.body), Diamond(target.program.right, target.body))
    elif r.name == BOX_CHOICE:
        _need(target, Box, Choice)
        rhs = And(Box(target.program.left, target.body), Box(target.program.right, target.body))
    elif r.name == DIA_SEQ:
        _need(target, Diamond, Seq)
        rhs = Diamond(target.program.first, Diamond(target.program.second, target.body))
    elif r.name == BOX_SEQ:
        _need(target, Box, Seq)
        rhs = Box(target.program.first, Box(target.program.second, target.body))
    elif r.name == DIA_STAR:
        _need(target, Diamond, Star)
        rhs = Or(target.body, Diamond(target.program.body, target))
    elif r.name == BOX_STAR:
        _need(target, Box, Star)
        rhs = And(target.body, Box(target.program.body, target))
    elif r.name in (DIA_ASSIGN, BOX_ASSIGN):
        shape = Diamond if r.name == DIA_ASSIGN else Box
        _need(target, shape, Assign)
        z = r.param("fresh")
        if not isinstance(z, str):
            raise MalformedParameters("assignment rewrite needs a fresh name")
        _require_fresh([z], s)
        rhs = safe_subst(target.body, target.program.var, target.program.term, z)
    elif r.name == DIA_ODE_BOUND:
        _need(target, Diamond, Ode)
        y = r.param("fresh")
        if not isinstance(y, str):
            raise MalformedParameters("bound introduction needs a fresh name")
        _require_fresh([y], s)
        _, rhs = _euler.instantiate_diaodebound(target.program, target.body, y)
    elif r.name == EVOLUTION_DOMAIN:
        _need(target, Diamond, Ode)
        tau0 = r.param("fresh")
        if not isinstance(tau0, str):
            raise MalformedParameters("domain split needs a fresh name")
        _require_fresh([tau0], s)
        _, rhs = _euler.instantiate_evd(target.program, target.body, tau0)
    elif r.name == ODE_DUAL:
        _need(target, Box, Ode)
        lhs, rhs, guard = _euler.instantiate_odedual(target.program, target.body)
        if lhs != target:
            raise SideConditionViolation("target does not match the duality schema")
        extra.append(goal_sequent(guard))
    elif r.name == DIA_ODE:
        _need(target, Diamond, Ode)
        names = [r.param("m"), r.param("l"), r.param("h"), r.param("eps")]
        ball = list(r.param("ball") or ())
        snaps = list(r.param("snaps") or ())
        if not all(isinstance(n, str) for n in names + ball + snaps):
            raise MalformedParameters("euler rewrite needs fresh name parameters")
        split = _euler.match_diaode_lhs(target)
        if split is None:
            raise SideConditionViolation("domain is not of the norm-bounded shape")
        ode, domain_pos, k, post = split
        if len(ball) != len(ode.system) or len(snaps) != len(ode.system):
            raise MalformedParameters("need one ball and one snapshot name per variable")
        _require_fresh(names + ball + snaps, s)
        rhs = _euler.build_diaode_rhs(
            ode, domain_pos, k, post, names[0], names[1], names[2], names[3], ball, snaps
        )
    else:
        raise MalformedParameters(f"unknown rewrite: {r.name!r}")

    rewritten = replace_at(principal, r.path, rhs)
    return [_replace(s, r.index, [rewritten])] + extra


def _need(target, outer, inner):
    if not isinstance(target, outer) or not isinstance(target.program, inner):
        raise PrincipalNotFound(
            f"rewrite expects {outer.__name__} over {inner.__name__}, got {target!r}"
        )


# ---------------------------------------------------------------------------
# Oracle obligations


def _weak_atoms(s: Sequent):
    atoms = []
    for f in s.ante:
        atoms.extend(a for a in _flatten_and(f) if isinstance(a, Geq))
    return atoms


def derive_box(s: Sequent, seed_vars):
    """Rational interval bounds for ``seed_vars`` (and the variables their
    bound terms mention, transitively), read off the weak antecedent
    atoms.  Returns None when some needed variable has no derivable
    two-sided rational bounds."""
    atoms = _weak_atoms(s)
    lowers: dict = {}
    uppers: dict = {}
    for a in atoms:
        if isinstance(a.left, Var):
            lowers.setdefault(a.left.name, []).append(a.right)
        if isinstance(a.right, Var):
            uppers.setdefault(a.right.name, []).append(a.left)
    needed = set()
    frontier = set(seed_vars)
    while frontier:
        x = frontier.pop()
        if x in needed:
            continue
        needed.add(x)
        for t in lowers.get(x, []) + uppers.get(x, []):
            frontier |= free_vars(t) - needed

    box: dict = {}
    for _ in range(len(needed) + 2):
        changed = False
        for x in sorted(needed):
            if x in box:
                continue
            lo_terms = lowers.get(x, [])
            hi_terms = uppers.get(x, [])
            if not lo_terms or not hi_terms:
                continue
            # wait until every bound term is evaluable so the box is tightest
            if any(free_vars(t) - set(box) for t in lo_terms + hi_terms):
                continue
            lo = max(interval_eval(t, box).lo for t in lo_terms)
            hi = min(interval_eval(t, box).hi for t in hi_terms)
            if lo > hi:
                hi = lo  # infeasible bounds; leaf evaluation sees the conflict
            box[x] = RatInterval(lo, hi)
            changed = True
        if not changed:
            break
    if needed - set(box):
        return None
    return box


def oracle_view(s: Sequent):
    """Derive the oracle obligation of a sequent: weak antecedent atoms, the
    strict quantifier-free basic succedent formulas, and a rational box
    enclosing every variable they need.

    Antecedent formulas that are not conjunctions of weak atoms, and
    succedent formulas that are not oracle-eligible, are dropped — a sound
    weakening on both sides.  Returns None when a needed variable has no
    derivable rational bounds.
    """
    goals = [
        f
        for f in s.succ
        if is_basic(f) and is_quantifier_free(f) and classify_formula(f)[0] is FormulaClass.STRICT
    ]
    if not goals:
        return None
    seed = set()
    for g in goals:
        seed |= free_vars(g)
    box = derive_box(s, seed)
    if box is None:
        return None
    kept = [a for a in _weak_atoms(s) if free_vars(a) <= set(box)]
    return kept, goals, box


def _flatten_and(f: Formula):
    if isinstance(f, And):
        yield from _flatten_and(f.left)
        yield from _flatten_and(f.right)
    else:
        yield f


# ---------------------------------------------------------------------------
# Certificate checking


@dataclass(frozen=True)
class Accepted:
    pass


@dataclass(frozen=True)
class Rejected:
    reason: str
    path: tuple

    def __str__(self) -> str:
        at = ".".join(str(i) for i in self.path) or "root"
        return f"rejected at {at}: {self.reason}"


def check_certificate(cert: Certificate, oracle_budget: int = 0):
    """Replay a certificate node by node, independently of how it was
    produced.  Every rule application is recomputed and compared, and
    every oracle leaf is replayed deterministically."""
    if cert.format_version != 1:
        return Rejected(f"unsupported format version {cert.format_version}", ())
    if free_vars(cert.goal):
        return Rejected("goal is not a sentence", ())
    if cert.tree.conclusion != goal_sequent(cert.goal):
        return Rejected("root conclusion does not match the goal", ())
    return _check_node(cert.tree, ())


def _check_node(node: ProofNode, path) :
    if node.rule.name == R_REAL:
        if node.premises:
            return Rejected("oracle leaves have no premises", path)
        if not node.oracle_trace:
            return Rejected("oracle leaf carries no trace", path)
        view = oracle_view(node.conclusion)
        if view is None:
            return Rejected("sequent has no boxed basic obligation", path)
        atoms, goals, box = view
        if node.oracle_trace.get("box") != box:
            return Rejected("recorded box differs from the derived box", path)
        if not replay(node.oracle_trace.get("tree"), atoms, goals, box):
            return Rejected("subdivision tree does not replay", path)
        return Accepted()

    try:
        expected = apply_rule(node.conclusion, node.rule)
    except RdlError as exc:
        return Rejected(str(exc), path)
    actual = [p.conclusion for p in node.premises]
    if expected != actual:
        return Rejected("premises do not match the rule application", path)
    for i, child in enumerate(node.premises):
        out = _check_node(child, path + (i,))
        if isinstance(out, Rejected):
            return out
    return Accepted()


# ---------------------------------------------------------------------------
# Serialization


def certificate_to_json(cert: Certificate) -> dict:
    return {
        "format_version": cert.format_version,
        "goal": pretty(cert.goal),
        "tree": _node_to_json(cert.tree),
    }


def _node_to_json(node: ProofNode) -> dict:
    out = {
        "sequent": {
            "ante": [pretty(f) for f in node.conclusion.ante],
            "succ": [pretty(f) for f in node.conclusion.succ],
        },
        "rule": {
            "name": node.rule.name,
            "index": node.rule.index,
            "path": list(node.rule.path),
            "params": {k: _param_to_json(v) for k, v in node.rule.params},
        },
        "premises": [_node_to_json(p) for p in node.premises],
    }
    if node.oracle_trace is not None:
        out["oracle"] = {
            "box": {
                name: [str(iv.lo), str(iv.hi)]
                for name, iv in sorted(node.oracle_trace["box"].items())
            },
            "tree": _tree_to_json(node.oracle_trace["tree"]),
        }
    return out


def _param_to_json(v):
    from .syntax import TERM_TYPES

    if isinstance(v, TERM_TYPES):
        return {"term": pretty(v)}
    if isinstance(v, tuple):
        return list(v)
    return v


def _tree_to_json(tree) -> dict:
    if isinstance(tree, AllTrue):
        return {"verdict": "all_true"}
    if isinstance(tree, Split):
        return {
            "verdict": "split",
            "var": tree.var,
            "midpoint": str(tree.midpoint),
            "left": _tree_to_json(tree.left),
            "right": _tree_to_json(tree.right),
        }
    raise TypeError(f"not a subdivision tree: {tree!r}")


def certificate_from_json(data: dict) -> Certificate:
    goal = parse_formula(data["goal"])
    return Certificate(
        goal=goal,
        tree=_node_from_json(data["tree"]),
        format_version=data.get("format_version", 0),
    )


def _node_from_json(data: dict) -> ProofNode:
    seq = Sequent(
        tuple(parse_formula(t) for t in data["sequent"]["ante"]),
        tuple(parse_formula(t) for t in data["sequent"]["succ"]),
    )
    params = {k: _param_from_json(k, v) for k, v in data["rule"].get("params", {}).items()}
    r = rule(
        data["rule"]["name"],
        data["rule"].get("index", 0),
        tuple(data["rule"].get("path", ())),
        **params,
    )
    trace = None
    if "oracle" in data:
        trace = {
            "box": {
                name: RatInterval(Fraction(lo), Fraction(hi))
                for name, (lo, hi) in data["oracle"]["box"].items()
            },
            "tree": _tree_from_json(data["oracle"]["tree"]),
        }
    return ProofNode(
        conclusion=seq,
        rule=r,
        premises=[_node_from_json(p) for p in data.get("premises", [])],
        oracle_trace=trace,
    )


def _param_from_json(key, v):
    from .grammar import parse_term

    if isinstance(v, dict) and "term" in v:
        return parse_term(v["term"])
    if isinstance(v, list):
        return tuple(v)
    return v


def _tree_from_json(data: dict):
    if data["verdict"] == "all_true":
        return AllTrue()
    if data["verdict"] == "split":
        return Split(
            data["var"],
            Fraction(data["midpoint"]),
            _tree_from_json(data["left"]),
            _tree_from_json(data["right"]),
        )
    raise ValueError(f"bad subdivision verdict: {data['verdict']!r}")
