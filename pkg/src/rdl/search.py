"""Budgeted semi-decision proof search.

The goal is first normalized and preprocessed: box modalities are
eliminated by rewriting with the assignment, test, choice and sequencing
axioms, and residual safety boxes over norm-bounded ODEs by the duality
axiom, whose boundedness premises join the obligation list.  Each
box-free obligation is then reduced along the rank order: disjunctions,
conjunctions, bounded universals and discrete program connectives reduce
deterministically, while the three unbounded choices (existential
witnesses, loop counts, Euler parameters) are explored fairly across
rounds with growing budgets.  Basic leaves are closed by the interval
oracle, whose subdivision trees embed into the certificate.

Candidate enumeration order is part of the artifact contract: rational
witnesses follow the stream in :mod:`rdl.intervals`, loop counts sweep
upward, and Euler tuples walk the dyadic grid k, m, l in {1, 2, 4, ...}
and h in {1/2, 1/4, ...} in index-lexicographic order.  When the initial
state of an ODE is pinned by the antecedent, an exact simulation of the
Euler recurrence pre-selects the tuple and iteration count; the proof
itself never trusts the simulation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .calculus import (
    AND_R,
    BOX_ASSIGN,
    BOX_CHOICE,
    BOX_SEQ,
    BOX_TEST,
    Certificate,
    DIA_ASSIGN,
    DIA_CHOICE,
    DIA_ODE,
    DIA_ODE_BOUND,
    DIA_SEQ,
    DIA_TEST,
    EXISTS_R,
    FORALL_R,
    ODE_DUAL,
    OR_R,
    ProofNode,
    R_REAL,
    Rule,
    STAR_FINITE,
    Sequent,
    apply_rule,
    goal_sequent,
    oracle_view,
    rule,
    sequent,
)
from .euler import (
    build_euler_step,
    build_beta,
    eps_interior,
    match_diaode_lhs,
    ode_variables,
)
from .fragment import in_rrdl
from .grammar import pretty
from .intervals import (
    Counterexample,
    RatInterval,
    Valid,
    decide_raw,
    eval_exact,
    witness_stream,
)
from .rank import Ordinal, ord_cmp, rank_formula, sequent_measure
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
    FreshNames,
    Geq,
    Gt,
    Ode,
    Or,
    RdlError,
    Seq,
    Star,
    Test,
    Var,
    all_names,
    at_path,
    free_vars,
    is_basic,
    is_quantifier_free,
    iter_subnodes,
    match_bounded_forall,
    normalize_clock,
)


class NotInFragment(RdlError):
    pass


class StuckSequent(RdlError):
    pass


class _OutOfBudget(Exception):
    def __init__(self, reason: str):
        self.reason = reason


@dataclass
class Schedule:
    """Budgets and fairness knobs; every candidate stream is finite per
    round and grows across rounds, so any finitely-reachable choice is
    eventually attempted."""

    max_rounds: int = 8
    node_budget: int = 1_000_000
    wall_seconds: float = 600.0
    oracle_depth: int = 40
    witness_base: int = 4
    loop_base: int = 4
    sim_step_cap: int = 512

    def witness_cap(self, round_index: int) -> int:
        return self.witness_base * (round_index + 1)

    def loop_cap(self, round_index: int) -> int:
        return self.loop_base * (2**round_index)

    def tuple_cap(self, round_index: int) -> int:
        return min(3 + round_index, 12)

    def quick_depth(self) -> int:
        return min(self.oracle_depth, 12)


@dataclass
class Timeout:
    frontier: list  # (Sequent, Ordinal, reason)
    nodes_used: int
    rounds_completed: int
    reason: str


@dataclass(frozen=True)
class _Script:
    """Pre-committed choices threaded through one reduction chain."""

    witnesses: tuple = ()  # ((var name, Fraction), ...)
    euler: Optional[tuple] = None  # (m, l, h, n)
    pending_loop_n: Optional[int] = None

    def witness_for(self, name: str):
        for k, v in self.witnesses:
            if k == name:
                return v
        return None

    def with_witnesses(self, extra):
        return replace(self, witnesses=self.witnesses + tuple(extra))


@dataclass
class _Budget:
    nodes_left: int
    deadline: float

    def tick(self):
        self.nodes_left -= 1
        if self.nodes_left <= 0:
            raise _OutOfBudget("node budget exhausted")
        if time.monotonic() > self.deadline:
            raise _OutOfBudget("wall-clock budget exhausted")


# ---------------------------------------------------------------------------
# Preprocessing: box elimination


def _first_box(f: Formula):
    for path, node in iter_subnodes(f):
        if isinstance(node, Box):
            return path
    return None


def _box_rule(s: Sequent, path, fresh: FreshNames) -> Rule:
    target = at_path(s.succ[0], path)
    prog = target.program
    if isinstance(prog, Assign):
        names = set()
        for g in s.ante + s.succ:
            names |= all_names(g)
        return rule(BOX_ASSIGN, 0, path, fresh=fresh.fresh(names))
    if isinstance(prog, Test):
        return rule(BOX_TEST, 0, path)
    if isinstance(prog, Choice):
        return rule(BOX_CHOICE, 0, path)
    if isinstance(prog, Seq):
        return rule(BOX_SEQ, 0, path)
    if isinstance(prog, Ode):
        return rule(ODE_DUAL, 0, path)
    raise NotInFragment(f"cannot eliminate a box over {type(prog).__name__}")


class _Open:
    def __init__(self, seq: Sequent):
        self.seq = seq
        self.node: Optional[ProofNode] = None


def _build_spine(goal: Formula, fresh: FreshNames):
    """Eliminate every box modality, returning the partially-built proof
    and the box-free obligations left open."""
    opens: list = []

    def walk(s: Sequent, depth: int):
        if depth > 10_000:
            raise RdlError("box elimination did not terminate")
        assert len(s.succ) == 1
        path = _first_box(s.succ[0])
        if path is None:
            o = _Open(s)
            opens.append(o)
            return o
        try:
            r = _box_rule(s, path, fresh)
            premises = apply_rule(s, r)
        except RdlError as exc:
            raise NotInFragment(f"box elimination failed: {exc}") from exc
        children = [walk(p, depth + 1) for p in premises]
        return ProofNode(s, r, children)

    root = walk(goal_sequent(goal), 0)
    return root, opens


def _resolve_opens(node):
    if isinstance(node, _Open):
        assert node.node is not None
        return node.node
    node.premises = [_resolve_opens(p) for p in node.premises]
    return node


def preprocess(goal: Formula):
    """Eliminate all box modalities from a strict reachability sentence.

    Returns the box-free main formula together with the boundedness side
    premises emitted by the duality rewrites.
    """
    f = normalize_clock(goal)
    _require_fragment(f)
    root, opens = _build_spine(f, FreshNames())
    main = opens[0].seq.succ[0]
    guards = [o.seq.succ[0] for o in opens[1:]]
    return main, guards


def _require_fragment(f: Formula):
    if free_vars(f):
        raise NotInFragment(f"goal has free variables: {sorted(free_vars(f))}")
    ok, blames = in_rrdl(f, "strict")
    if not ok:
        raise NotInFragment("; ".join(str(b) for b in blames) or "not in the fragment")


# ---------------------------------------------------------------------------
# Single-step reduction (the deterministic part, exposed for inspection)


@dataclass
class ReductionStep:
    rule: Rule
    premises: list


@dataclass
class OracleLeaf:
    pass


@dataclass
class NeedsSearch:
    kind: str  # "witness" | "loop" | "euler"
    index: int


def _reducible(f: Formula) -> bool:
    if isinstance(f, (Or, And, Exists, Diamond)):
        return True
    if isinstance(f, Forall):
        return match_bounded_forall(f) is not None
    return False


def _select(s: Sequent):
    """Index of the reducible succedent formula of maximal rank; ties break
    toward the canonical (sorted) order."""
    best = None
    best_rank = None
    for i, f in enumerate(s.succ):
        if not _reducible(f):
            continue
        r = rank_formula(f)
        if best is None or ord_cmp(r, best_rank) > 0:
            best, best_rank = i, r
    return best


def reduce_once(s: Sequent, fresh: Optional[FreshNames] = None):
    """Classify and perform the next reduction of a box-free sequent.

    Structural cases return the rule and its premises; the three search
    choices are reported as ``NeedsSearch``; a sequent of basic formulas
    is an ``OracleLeaf``.  Raises ``StuckSequent`` when no case applies.
    """
    fresh = fresh or FreshNames()
    if all(is_basic(f) and is_quantifier_free(f) for f in s.succ):
        return OracleLeaf()
    i = _select(s)
    if i is None:
        raise StuckSequent(f"no reducible succedent formula in: {s}")
    f = s.succ[i]
    if isinstance(f, Exists):
        return NeedsSearch("witness", i)
    if isinstance(f, Or):
        r = rule(OR_R, i)
    elif isinstance(f, And):
        r = rule(AND_R, i)
    elif isinstance(f, Forall):
        r = _forall_rule(s, i, f, fresh)
    elif isinstance(f, Diamond):
        prog = f.program
        if isinstance(prog, Star):
            return NeedsSearch("loop", i)
        if isinstance(prog, Ode):
            return NeedsSearch("euler", i)
        r = _diamond_rule(s, i, prog, fresh)
    else:
        raise StuckSequent(f"unexpected succedent formula: {pretty(f)}")
    return ReductionStep(r, apply_rule(s, r))


def _forall_rule(s: Sequent, i: int, f: Forall, fresh: FreshNames) -> Rule:
    m = match_bounded_forall(f)
    x = m[0]
    others = set()
    for j, g in enumerate(s.succ):
        if j != i:
            others |= free_vars(g)
    for g in s.ante:
        others |= free_vars(g)
    if x in others:
        names = set()
        for g in s.ante + s.succ:
            names |= all_names(g)
        return rule(FORALL_R, i, rename=fresh.fresh(names))
    return rule(FORALL_R, i)


def _diamond_rule(s: Sequent, i: int, prog, fresh: FreshNames) -> Rule:
    if isinstance(prog, Assign):
        names = set()
        for g in s.ante + s.succ:
            names |= all_names(g)
        return rule(DIA_ASSIGN, i, fresh=fresh.fresh(names))
    if isinstance(prog, Test):
        return rule(DIA_TEST, i)
    if isinstance(prog, Choice):
        return rule(DIA_CHOICE, i)
    if isinstance(prog, Seq):
        return rule(DIA_SEQ, i)
    raise StuckSequent(f"unexpected diamond program: {pretty(prog)}")


# ---------------------------------------------------------------------------
# The round engine


class _Engine:
    def __init__(self, sched: Schedule, round_index: int, fresh: FreshNames,
                 budget: _Budget, failures: list):
        self.sched = sched
        self.round = round_index
        self.fresh = fresh
        self.budget = budget
        self.failures = failures

    def fail(self, s: Sequent, reason: str):
        if len(self.failures) < 50:
            self.failures.append((s, sequent_measure(s.succ), reason))
        return None

    # -- oracle leaves

    def _try_oracle(self, s: Sequent, depth: int):
        view = oracle_view(s)
        if view is None:
            return None
        atoms, goals, box = view
        verdict = decide_raw(atoms, goals, box, depth)
        if isinstance(verdict, Valid):
            return ProofNode(s, rule(R_REAL), [], oracle_trace={"box": verdict.box, "tree": verdict.tree})
        return verdict

    # -- main loop: single-premise reductions iterate so chains use no
    # stack; recursion happens only at conjunction splits and choice points

    def prove_seq(self, s: Sequent, script: _Script):
        chain = []  # (sequent, rule) prefix of single-premise steps

        def wrap(node):
            for (cs, cr) in reversed(chain):
                node = ProofNode(cs, cr, [node])
            return node

        while True:
            self.budget.tick()
            all_basic = all(is_basic(f) and is_quantifier_free(f) for f in s.succ)
            depth = self.sched.oracle_depth if all_basic else self.sched.quick_depth()
            attempt = self._try_oracle(s, depth)
            if isinstance(attempt, ProofNode):
                return wrap(attempt)
            if all_basic:
                reason = "oracle refuted the leaf" if isinstance(attempt, Counterexample) else \
                    "oracle could not certify the leaf"
                return self.fail(s, reason)

            i = _select(s)
            if i is None:
                return self.fail(s, "no reducible succedent formula")
            f = s.succ[i]

            if isinstance(f, Or):
                r = rule(OR_R, i)
            elif isinstance(f, And):
                r = rule(AND_R, i)
                left, right = apply_rule(s, r)
                first = self.prove_seq(left, script)
                if first is None:
                    return None
                second = self.prove_seq(right, script)
                if second is None:
                    return None
                return wrap(ProofNode(s, r, [first, second]))
            elif isinstance(f, Forall):
                r = _forall_rule(s, i, f, self.fresh)
            elif isinstance(f, Exists):
                node = self._exists_point(s, i, f, script)
                return wrap(node) if node is not None else None
            elif isinstance(f, Diamond):
                prog = f.program
                if isinstance(prog, Star):
                    node = self._loop_point(s, i, f, script)
                    return wrap(node) if node is not None else None
                if isinstance(prog, Ode):
                    node = self._ode_point(s, i, f, script)
                    return wrap(node) if node is not None else None
                r = _diamond_rule(s, i, prog, self.fresh)
            else:
                return self.fail(s, f"unexpected succedent formula {pretty(f)}")

            (premise,) = apply_rule(s, r)
            chain.append((s, r))
            s = premise

    # -- choice points

    def _exists_point(self, s: Sequent, i: int, f: Exists, script: _Script):
        scripted = script.witness_for(f.var)
        if scripted is not None:
            candidates = [scripted]
        else:
            cap = self.sched.witness_cap(self.round)
            candidates = [q for q, _ in zip(witness_stream(), range(cap))]
        for q in candidates:
            r = rule(EXISTS_R, i, witness=Const(q))
            (premise,) = apply_rule(s, r)
            node = self.prove_seq(premise, script)
            if node is not None:
                return ProofNode(s, r, [node])
        return self.fail(s, f"witness stream exhausted for {pretty(f)}")

    def _loop_point(self, s: Sequent, i: int, f: Diamond, script: _Script):
        if script.pending_loop_n is not None:
            ns = [script.pending_loop_n]
            script = replace(script, pending_loop_n=None)
        else:
            ns = range(self.sched.loop_cap(self.round) + 1)
        for n in ns:
            r = rule(STAR_FINITE, i, n=n)
            (premise,) = apply_rule(s, r)
            node = self.prove_seq(premise, script)
            if node is not None:
                return ProofNode(s, r, [node])
        return self.fail(s, f"no iteration count closed {pretty(f)}")

    def _ode_point(self, s: Sequent, i: int, f: Diamond, script: _Script):
        split = match_diaode_lhs(f)
        if split is None:
            return self._ode_bound_point(s, i, f, script)
        ode, domain_pos, k_term, post = split
        xs = ode_variables(ode)
        names = set()
        for g in s.ante + s.succ:
            names |= all_names(g)
        m, l, h, eps = self.fresh.fresh_many(4, names)
        taken = names | {m, l, h, eps}
        ball = self.fresh.fresh_many(len(xs), taken)
        taken |= set(ball)
        snaps = self.fresh.fresh_many(len(xs), taken)
        r = rule(DIA_ODE, i, m=m, l=l, h=h, eps=eps, ball=tuple(ball), snaps=tuple(snaps))
        premises = apply_rule(s, r)

        if script.euler is not None:
            candidates = [script.euler]
            script = replace(script, euler=None)
        else:
            candidates = self._euler_candidates(s, ode, domain_pos, k_term, post)
        for (m_q, l_q, h_q, n) in candidates:
            sub = script.with_witnesses([(m, m_q), (l, l_q), (h, h_q)])
            sub = replace(sub, pending_loop_n=n)
            child = self.prove_seq(premises[0], sub)
            if child is not None:
                return ProofNode(s, r, [child])
        return self.fail(s, f"no Euler parameters closed {pretty(f)}")

    def _ode_bound_point(self, s: Sequent, i: int, f: Diamond, script: _Script):
        names = set()
        for g in s.ante + s.succ:
            names |= all_names(g)
        y = self.fresh.fresh(names)
        r = rule(DIA_ODE_BOUND, i, fresh=y)
        premises = apply_rule(s, r)
        ode = f.program
        pins = self._pinned_state(s, ode, f.body)
        cap = self.sched.tuple_cap(self.round)
        for ki in range(cap + 1):
            k_q = Fraction(2**ki)
            inner = self._euler_tuples(s, ode, ode.domain, k_q, f.body, pins)
            for (m_q, l_q, h_q, n) in inner:
                sub = script.with_witnesses([(y, k_q)])
                sub = replace(sub, euler=(m_q, l_q, h_q, n))
                child = self.prove_seq(premises[0], sub)
                if child is not None:
                    return ProofNode(s, r, [child])
        return self.fail(s, f"no evolution bound closed {pretty(f)}")

    def _euler_candidates(self, s, ode, domain_pos, k_term, post):
        pins = self._pinned_state(s, ode, post)
        k_q = None
        if pins is not None:
            try:
                k_q = eval_exact(k_term, pins)
            except Exception:
                k_q = None
        if isinstance(k_term, Const):
            k_q = k_term.value
        return self._euler_tuples(s, ode, domain_pos, k_q, post, pins)

    def _euler_tuples(self, s, ode, domain_pos, k_q, post, pins):
        simable = (
            pins is not None
            and k_q is not None
            and _sim_checkable(domain_pos)
            and _sim_checkable(post)
        )
        cap = self.sched.tuple_cap(self.round)
        for mi in range(cap + 1):
            for li in range(cap + 1):
                for hi in range(cap + 1):
                    m_q = Fraction(2**mi)
                    l_q = Fraction(2**li)
                    h_q = Fraction(1, 2 ** (hi + 1))
                    if simable:
                        n = self._simulate(ode, domain_pos, post, k_q, m_q, l_q, h_q, pins)
                        if n is not None:
                            yield (m_q, l_q, h_q, n)
                    else:
                        for n in range(self.sched.loop_cap(self.round) + 1):
                            yield (m_q, l_q, h_q, n)

    # -- exact Euler pre-simulation (selection only; never certified)

    def _pinned_state(self, s: Sequent, ode: Ode, post):
        from .calculus import derive_box

        wanted = set(ode_variables(ode)) | free_vars(post) | free_vars(ode.domain)
        for _, rhs in ode.system:
            wanted |= free_vars(rhs)
        box = derive_box(s, wanted)
        if box is None:
            return None
        pins = {}
        for x in wanted:
            iv = box.get(x)
            if iv is None or iv.lo != iv.hi:
                return None
            pins[x] = iv.lo
        return pins

    def _simulate(self, ode, domain_pos, post, k_q, m_q, l_q, h_q, pins):
        xs = ode_variables(ode)
        if not self._beta_holds(ode, k_q, m_q, l_q, pins):
            return None
        vals = {x: pins[x] for x in xs}
        others = {k: v for k, v in pins.items() if k not in vals}
        eps = Fraction(0)
        for n in range(self.sched.sim_step_cap + 1):
            if eps >= 1:
                return None
            ball = {x: RatInterval(vals[x] - eps, vals[x] + eps) for x in xs}
            for k, v in others.items():
                ball[k] = RatInterval(v, v)
            if isinstance(decide_raw([], [post], ball, 10), Valid):
                return n
            if not isinstance(decide_raw([], [domain_pos], ball, 10), Valid):
                return None
            if not all(abs(vals[x]) < k_q - eps for x in xs):
                return None
            env = {**others, **vals}
            vals = {x: vals[x] + h_q * eval_exact(rhs, env) for x, rhs in ode.system}
            eps = (1 + h_q * l_q) * eps + (l_q * m_q / 2) * h_q * h_q
        return None

    def _beta_holds(self, ode, k_q, m_q, l_q, pins) -> bool:
        from .euler import jacobian_bounds
        from .syntax import desugar_norm

        xs = ode_variables(ode)
        body = And(
            desugar_norm([rhs for _, rhs in ode.system], Const(m_q), strict=True),
            jacobian_bounds(ode, Const(l_q)),
        )
        radius = k_q + 2
        box = {x: RatInterval(-radius, radius) for x in xs}
        for k, v in pins.items():
            box.setdefault(k, RatInterval(v, v))
        return isinstance(decide_raw([], [body], box, 10), Valid)


def _sim_checkable(f: Formula) -> bool:
    return is_basic(f) and is_quantifier_free(f)


# ---------------------------------------------------------------------------
# Top-level search


def prove(goal: Formula, sched: Optional[Schedule] = None):
    """Search for a certificate of a strict reachability sentence.

    Returns a :class:`Certificate` on success, or a :class:`Timeout`
    carrying the open frontier.  Raises ``NotInFragment`` for goals the
    fragment check rejects.
    """
    sched = sched or Schedule()
    f = normalize_clock(goal)
    _require_fragment(f)
    fresh = FreshNames()
    budget = _Budget(sched.node_budget, time.monotonic() + sched.wall_seconds)
    root, opens = _build_spine(f, fresh)

    failures: list = []
    nodes_start = budget.nodes_left
    rounds_done = 0
    try:
        for o in opens:
            solved = False
            for r in range(sched.max_rounds):
                engine = _Engine(sched, r, fresh, budget, failures)
                failures.clear()
                node = engine.prove_seq(o.seq, _Script())
                if node is not None:
                    o.node = node
                    solved = True
                    rounds_done = max(rounds_done, r)
                    break
            if not solved:
                frontier = [(o.seq, sequent_measure(o.seq.succ), "unsolved obligation")]
                frontier.extend(failures[:19])
                return Timeout(
                    frontier=frontier,
                    nodes_used=nodes_start - budget.nodes_left,
                    rounds_completed=sched.max_rounds,
                    reason="candidate budgets exhausted",
                )
    except _OutOfBudget as exc:
        frontier = [(o.seq, sequent_measure(o.seq.succ), "open at budget exhaustion")
                    for o in opens if o.node is None][:20]
        return Timeout(
            frontier=frontier,
            nodes_used=nodes_start - budget.nodes_left,
            rounds_completed=rounds_done,
            reason=exc.reason,
        )

    tree = _resolve_opens(root)
    return Certificate(goal=f, tree=tree)


def frontier_report(t: Timeout) -> str:
    """Human-readable dump of the open frontier with ordinal measures."""
    lines = [
        f"proof search gave up: {t.reason}",
        f"nodes used: {t.nodes_used}; rounds completed: {t.rounds_completed}",
        f"open sequents ({len(t.frontier)}):",
    ]
    for s, measure, why in t.frontier:
        lines.append(f"  [{measure}] {s}")
        lines.append(f"      {why}")
    return "\n".join(lines)
