"""Command-line front end.

Exit codes: 0 success, 1 negative verdict, 2 usage error, 3 budget
exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .calculus import (
    Accepted,
    certificate_from_json,
    certificate_to_json,
    check_certificate,
    goal_sequent,
    sequent,
)
from .fragment import classify_formula, classify_program, in_rrdl
from .grammar import ParseError, parse_formula, parse_program, parse_term, pretty
from .intervals import Counterexample, RatInterval, Unknown, Valid, decide
from .rank import rank_formula, rank_program
from .search import NotInFragment, Schedule, Timeout, frontier_report, prove
from .simsem import SimConfig, eval_term, probe_openness, sample_truth
from .syntax import RdlError, normalize_clock

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.handler(args)
    except (ParseError, RdlError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE if isinstance(exc, NotInFragment) else EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _build_parser():
    parser = argparse.ArgumentParser(prog="rdl", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    parser.set_defaults(command=None)

    p = sub.add_parser("parse", help="echo the canonical form of a formula/program/term")
    p.add_argument("path")
    p.add_argument("--kind", choices=("formula", "program", "term"), default="formula")
    p.set_defaults(handler=_cmd_parse)

    p = sub.add_parser("fragment", help="classify a formula and check fragment membership")
    p.add_argument("path")
    p.add_argument("--side", choices=("strict", "weak"))
    p.add_argument("--time-bounded-domains", action="store_true")
    p.set_defaults(handler=_cmd_fragment)

    p = sub.add_parser("rank", help="print the ordinal rank of a formula or program")
    p.add_argument("path")
    p.add_argument("--kind", choices=("formula", "program"), default="formula")
    p.set_defaults(handler=_cmd_rank)

    p = sub.add_parser("prove", help="search for a replayable proof certificate")
    p.add_argument("path")
    p.add_argument("--emit", metavar="CERT", help="write the certificate here")
    p.add_argument("--budget-nodes", type=int, default=1_000_000)
    p.add_argument("--budget-seconds", type=float, default=600.0)
    p.add_argument("--oracle-depth", type=int, default=40)
    p.add_argument("--max-rounds", type=int, default=8)
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; search is sequential")
    p.set_defaults(handler=_cmd_prove)

    p = sub.add_parser("check", help="replay a certificate independently")
    p.add_argument("path")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("simulate", help="sampled truth and openness probing")
    p.add_argument("path")
    p.add_argument("--state", default="", help="comma list like x=1,y=1/2")
    p.add_argument("--probe-openness", action="store_true")
    p.add_argument("--radii", default="1/16,1/8,1/4,1/2,1")
    p.add_argument("--unroll", type=int, default=12)
    p.add_argument("--seed", type=int, default=None, help="recorded in the report")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("decide", help="run the interval validity oracle directly")
    p.add_argument("path", help="file with 'ante1, ante2 |- succ1, succ2'")
    p.add_argument("--box", required=True, help="semicolon list like 'x in [0,1]; y in [-1,1]'")
    p.add_argument("--depth", type=int, default=40)
    p.set_defaults(handler=_cmd_decide)
    return parser


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _cmd_parse(args) -> int:
    text = _read(args.path)
    parse = {"formula": parse_formula, "program": parse_program, "term": parse_term}[args.kind]
    print(pretty(parse(text)))
    return EXIT_OK


def _cmd_fragment(args) -> int:
    f = parse_formula(_read(args.path))
    cls, blames = classify_formula(f)
    print(f"class: {cls.value}")
    for b in blames:
        print(f"blame: {b}")
    if args.side:
        ok, blames = in_rrdl(f, args.side, args.time_bounded_domains)
        print(f"reachability fragment ({args.side}): {'yes' if ok else 'no'}")
        for b in blames:
            print(f"blame: {b}")
        return EXIT_OK if ok else EXIT_NEGATIVE
    return EXIT_OK


def _cmd_rank(args) -> int:
    text = _read(args.path)
    if args.kind == "formula":
        print(rank_formula(parse_formula(text)))
    else:
        print(rank_program(parse_program(text)))
    return EXIT_OK


def _cmd_prove(args) -> int:
    goal = parse_formula(_read(args.path))
    sched = Schedule(
        max_rounds=args.max_rounds,
        node_budget=args.budget_nodes,
        wall_seconds=args.budget_seconds,
        oracle_depth=args.oracle_depth,
    )
    try:
        result = prove(goal, sched)
    except NotInFragment as exc:
        print(f"not in fragment: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    if isinstance(result, Timeout):
        print(frontier_report(result), file=sys.stderr)
        return EXIT_BUDGET
    payload = certificate_to_json(result)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(f"certificate written to {args.emit}")
    else:
        json.dump(payload, sys.stdout, indent=1, sort_keys=True)
        print()
    return EXIT_OK


def _cmd_check(args) -> int:
    with open(args.path, "r", encoding="utf-8") as fh:
        cert = certificate_from_json(json.load(fh))
    verdict = check_certificate(cert)
    if isinstance(verdict, Accepted):
        print("accepted")
        return EXIT_OK
    print(f"rejected: {verdict}", file=sys.stderr)
    return EXIT_NEGATIVE


def _parse_state(text: str):
    state = {}
    if text.strip():
        for part in text.split(","):
            name, _, value = part.partition("=")
            state[name.strip()] = Fraction(value.strip())
    return state


def _cmd_simulate(args) -> int:
    f = normalize_clock(parse_formula(_read(args.path)))
    state = _parse_state(args.state)
    seed = args.seed if args.seed is not None else int(os.environ.get("RDL_SEED", "0"))
    cfg = SimConfig(unroll_max=args.unroll)
    verdict = sample_truth(state, f, cfg)
    shown = {True: "true", False: "false", None: "unknown"}[verdict]
    print(f"sampled truth: {shown} (seed {seed})")
    if args.probe_openness:
        if verdict is not True:
            print("openness probe skipped: formula is not sampled true here")
            return EXIT_NEGATIVE
        radii = [Fraction(r) for r in args.radii.split(",")]
        report = probe_openness(f, state, radii, cfg)
        print(f"margin: {report['margin']} over free variables {report['free_vars']}")
    return EXIT_OK if verdict is True else EXIT_NEGATIVE


def _parse_box(text: str):
    box = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, rng = part.partition(" in ")
        rng = rng.strip().strip("[]")
        lo, hi = rng.split(",")
        box[name.strip()] = RatInterval(Fraction(lo.strip()), Fraction(hi.strip()))
    return box


def _cmd_decide(args) -> int:
    text = _read(args.path)
    if "|-" in text:
        left, right = text.split("|-")
        ante = [parse_formula(t) for t in left.split(",") if t.strip()]
    else:
        right = text
        ante = []
    succ = [parse_formula(t) for t in right.split(",") if t.strip()]
    box = _parse_box(args.box)
    verdict = decide(sequent(ante, succ), box, args.depth)
    if isinstance(verdict, Valid):
        print("valid")
        return EXIT_OK
    if isinstance(verdict, Counterexample):
        point = ", ".join(f"{k} = {v}" for k, v in sorted(verdict.point.items()))
        print(f"counterexample: {point}")
        return EXIT_NEGATIVE
    print(f"unknown: {verdict.reason}")
    return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
