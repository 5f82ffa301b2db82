"""Numerical, uncertified semantics used only for differential testing.

Terms evaluate exactly over rational states.  Formula truth is sampled:
quantifiers range over dyadic grids (bounded quantifiers over their exact
interval), loops unroll to a configured depth, and continuous programs
follow the fixed-step integrator from :mod:`rdl.euler`.  The result is
three-valued; ``None`` means a budget was the deciding factor.  Nothing
computed here ever enters a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .euler import numeric_flow
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
    Term,
    Test,
    Var,
    free_vars,
    match_bounded_exists,
    match_bounded_forall,
)

State = dict  # var name -> Fraction; absent variables read as 0


@dataclass(frozen=True)
class SimConfig:
    quantifier_samples: int = 9
    unroll_max: int = 12
    ode_step: Fraction = Fraction(1, 64)
    ode_horizon: Fraction = Fraction(8)
    range_exponent: int = 4  # unbounded quantifiers sample [-2^d, 2^d]
    max_states: int = 4096


def eval_term(w: State, v: Term) -> Fraction:
    if isinstance(v, Var):
        return w.get(v.name, Fraction(0))
    from .syntax import Add, Const, Mul

    if isinstance(v, Const):
        return v.value
    if isinstance(v, Add):
        return eval_term(w, v.left) + eval_term(w, v.right)
    if isinstance(v, Mul):
        return eval_term(w, v.left) * eval_term(w, v.right)
    raise TypeError(f"not a term: {v!r}")


def _grid(lo: Fraction, hi: Fraction, count: int):
    if count <= 1 or lo == hi:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def sample_truth(w: State, f: Formula, cfg: SimConfig = SimConfig()):
    """Three-valued sampled truth of ``f`` at state ``w``."""
    if isinstance(f, Gt):
        return eval_term(w, f.left) > eval_term(w, f.right)
    if isinstance(f, Geq):
        return eval_term(w, f.left) >= eval_term(w, f.right)
    if isinstance(f, And):
        left = sample_truth(w, f.left, cfg)
        right = sample_truth(w, f.right, cfg)
        if left is False or right is False:
            return False
        if left is True and right is True:
            return True
        return None
    if isinstance(f, Or):
        left = sample_truth(w, f.left, cfg)
        right = sample_truth(w, f.right, cfg)
        if left is True or right is True:
            return True
        if left is False and right is False:
            return False
        return None
    if isinstance(f, (Exists, Forall)):
        return _sample_quantifier(w, f, cfg)
    if isinstance(f, Diamond):
        return _sample_reach(w, f.program, f.body, cfg, want_any=True)
    if isinstance(f, Box):
        return _sample_reach(w, f.program, f.body, cfg, want_any=False)
    raise TypeError(f"not a formula: {f!r}")


def _sample_quantifier(w: State, f: Formula, cfg: SimConfig):
    bounded = match_bounded_forall(f) if isinstance(f, Forall) else match_bounded_exists(f)
    if bounded is not None:
        x, lo_t, hi_t, body = bounded
        lo, hi = eval_term(w, lo_t), eval_term(w, hi_t)
        if lo > hi:
            return isinstance(f, Forall)  # empty range
        points = _grid(lo, hi, cfg.quantifier_samples)
        exact_range = True
    else:
        x, body = f.var, f.body
        radius = Fraction(2**cfg.range_exponent)
        points = _grid(-radius, radius, 2 * cfg.quantifier_samples + 1)
        exact_range = False
    results = [sample_truth({**w, x: a}, body, cfg) for a in points]
    if isinstance(f, Forall):
        if any(r is False for r in results):
            return False
        if all(r is True for r in results) and exact_range:
            return True  # grid approximation of the closed interval
        return None
    if any(r is True for r in results):
        return True
    if all(r is False for r in results) and exact_range:
        return False
    return None


def _sample_reach(w: State, p: Program, body: Formula, cfg: SimConfig, want_any: bool):
    truncated = [False]
    states = list(_reach(w, p, cfg, truncated))
    results = [sample_truth(s, body, cfg) for s in states]
    if want_any:
        if any(r is True for r in results):
            return True
        if truncated[0] or any(r is None for r in results):
            return None
        return False
    if any(r is False for r in results):
        return False
    if truncated[0] or any(r is None for r in results):
        return None
    return True


def _reach(w: State, p: Program, cfg: SimConfig, truncated):
    """Enumerate sampled reachable states; sets ``truncated[0]`` when a
    budget cut the enumeration short."""
    if isinstance(p, Assign):
        yield {**w, p.var: eval_term(w, p.term)}
        return
    if isinstance(p, Test):
        t = sample_truth(w, p.condition, cfg)
        if t is True:
            yield w
        elif t is None:
            truncated[0] = True
        return
    if isinstance(p, Choice):
        yield from _reach(w, p.left, cfg, truncated)
        yield from _reach(w, p.right, cfg, truncated)
        return
    if isinstance(p, Seq):
        for mid in _reach(w, p.first, cfg, truncated):
            yield from _reach(mid, p.second, cfg, truncated)
        return
    if isinstance(p, Star):
        seen = set()
        layer = [w]
        yield w
        for _ in range(cfg.unroll_max):
            nxt = []
            for s in layer:
                for t in _reach(s, p.body, cfg, truncated):
                    key = tuple(sorted(t.items()))
                    if key not in seen:
                        seen.add(key)
                        nxt.append(t)
                        yield t
                        if len(seen) > cfg.max_states:
                            truncated[0] = True
                            return
            if not nxt:
                return
            layer = nxt
        truncated[0] = True
        return
    if isinstance(p, Ode):
        yield w  # zero-duration evolution
        try:
            trajectory = numeric_flow(p, w, cfg.ode_horizon, cfg.ode_step)
        except Exception:
            truncated[0] = True
            return
        for state in trajectory[1:]:
            merged = {**w, **state}
            inside = sample_truth(merged, p.domain, cfg)
            if inside is False:
                return
            if inside is None:
                truncated[0] = True
                return
            yield merged
        truncated[0] = True  # evolution continues past the horizon
        return
    raise TypeError(f"not a program: {p!r}")


def probe_openness(f: Formula, w: State, radii, cfg: SimConfig = SimConfig()):
    """Empirical robustness margin: the largest tested radius at which all
    sign-pattern perturbations of the free variables keep ``f`` sampled
    true.  Requires ``f`` true at ``w``; never a proof."""
    if sample_truth(w, f, cfg) is not True:
        raise ValueError("probe requires a state where the formula samples true")
    fv = sorted(free_vars(f))
    margin = Fraction(0)
    for r in sorted(Fraction(x) for x in radii):
        if not _survives(f, w, fv, r, cfg):
            break
        margin = r
    return {"free_vars": fv, "margin": margin, "radii": [Fraction(x) for x in radii]}


def _survives(f: Formula, w: State, fv, r: Fraction, cfg: SimConfig) -> bool:
    from itertools import product

    for signs in product((-1, 0, 1), repeat=len(fv)):
        if not any(signs):
            continue
        point = dict(w)
        for x, sgn in zip(fv, signs):
            point[x] = point.get(x, Fraction(0)) + sgn * r
        if sample_truth(point, f, cfg) is not True:
            return False
    return True
