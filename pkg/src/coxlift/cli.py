"""Batch command line front-end.

Commands: lift, verify, decompose, factor, snf.  Exit codes: 0 success,
1 verification failure, 2 input error, 3 internal invariant violation.
stdout carries the human/JSON logs, stderr the diagnostics.
"""

from __future__ import annotations

import argparse
import json
import sys

from .abgroup import FgAbelianGroup
from .errors import (
    CoxliftError,
    InputDataError,
    InternalInvariantError,
)
from .lift import LiftOptions, decompose_as_roots, run_cox_lift, verify_lift
from .serialize import (
    RESULT_SCHEMA,
    emit_result,
    human_log,
    parse_decompose,
    parse_element,
    parse_problem,
    replay_result,
    result_json,
)


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="coxlift",
        description="Exact Cox-ring lifts, root towers and verification",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="write the JSON result to this path")
        p.add_argument(
            "--log",
            choices=["human", "json", "both"],
            default="both",
            help="what to print on stdout (default both)",
        )
        p.add_argument("--step-cap", type=int, default=None,
                       help="rewrite step cap (default 10000)")
        p.add_argument("--spotcheck-bound", type=int, default=None,
                       help="bound for the factorization spot check (default 4)")

    p = sub.add_parser("lift", help="compute the Cox lift of a problem file")
    p.add_argument("problem")
    common(p)

    p = sub.add_parser("verify", help="re-verify a result document against its problem")
    p.add_argument("problem")
    p.add_argument("result")
    common(p)

    p = sub.add_parser("decompose", help="present a stack as roots over its canonical stack")
    p.add_argument("problem")
    common(p)

    p = sub.add_parser("factor", help="h-factorize one element of the source ring")
    p.add_argument("problem")
    p.add_argument("--element", required=True, help="element JSON, e.g. '{\"terms\":[{\"m\":{\"t\":1}}]}'")

    p = sub.add_parser("snf", help="canonical form of an integer relation matrix")
    p.add_argument("--matrix", required=True, help="JSON rows, e.g. '[[2]]'")
    p.add_argument("--ambient-rank", type=int, default=None,
                   help="ambient rank when the matrix has no rows")
    return ap


def _apply_option_overrides(options: LiftOptions, args) -> LiftOptions:
    step_cap = args.step_cap if args.step_cap is not None else options.step_cap
    spot = (
        args.spotcheck_bound
        if args.spotcheck_bound is not None
        else options.spotcheck_bound
    )
    return LiftOptions(
        step_cap=step_cap,
        spotcheck_bound=spot,
        root_name_pins=options.root_name_pins,
    )


def _deliver(doc: dict, args) -> None:
    text = result_json(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.log in ("human", "both"):
        print(human_log(doc))
    if args.log in ("json", "both"):
        print(text)


def _cmd_lift(args) -> int:
    spec = parse_problem(args.problem)
    options = _apply_option_overrides(spec.options, args)
    result = run_cox_lift(spec.target, spec.source_stack, spec.base, options)
    doc = emit_result(spec.name, result, spec.order, spec.assertions)
    _deliver(doc, args)
    return 0 if result.verification.passed else 1


def _cmd_verify(args) -> int:
    spec = parse_problem(args.problem)
    with open(args.result, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != RESULT_SCHEMA:
        raise InputDataError(f"result document must have schema {RESULT_SCHEMA}")
    stack = replay_result(spec, doc)
    ring = stack.cox_ring
    images = {
        name: ring.normal_form(parse_element(el, spec.order))
        for name, el in doc["images"].items()
    }
    from .abgroup import GroupHomomorphism
    from .lift import CoxLiftResult, VerificationReport

    group_map = GroupHomomorphism(
        spec.target.cl,
        stack.pic,
        [stack.pic.element(c) for c in doc["group_map"]],
    )
    provided = CoxLiftResult(
        target=spec.target,
        base=spec.base,
        source_stack=spec.source_stack,
        stack=stack,
        images=images,
        group_map=group_map,
        table={},
        steps=(),
        verification=VerificationReport(()),
    )
    options = _apply_option_overrides(spec.options, args)
    report = verify_lift(spec.target, spec.source_stack, spec.base, provided,
                         spotcheck_bound=options.spotcheck_bound)
    out = {
        "schema": RESULT_SCHEMA,
        "problem": spec.name,
        "verification": {
            "passed": report.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in report.checks
            ],
        },
    }
    text = result_json(out)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.log in ("human", "both"):
        for c in report.checks:
            print(f"[{'ok' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    if args.log in ("json", "both"):
        print(text)
    return 0 if report.passed else 1


def _cmd_decompose(args) -> int:
    spec = parse_decompose(args.problem)
    options = _apply_option_overrides(spec.options, args)
    result = decompose_as_roots(spec.stack, options)
    doc = emit_result(spec.name, result, spec.order)
    _deliver(doc, args)
    return 0 if result.verification.passed else 1


def _cmd_factor(args) -> int:
    spec = parse_problem(args.problem)
    ring = spec.source_stack.cox_ring
    element = ring.normal_form(parse_element(json.loads(args.element), spec.order))
    fact = ring.h_factorize(element)
    doc = {
        "element": element.key(),
        "unit": fact.unit.as_string(),
        "factors": [[f.key(), e] for f, e in fact.factors],
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_snf(args) -> int:
    rows = json.loads(args.matrix)
    if rows and not isinstance(rows[0], list):
        raise InputDataError("matrix must be a list of rows")
    ncols = args.ambient_rank if not rows else len(rows[0])
    if ncols is None:
        raise InputDataError("empty matrix needs --ambient-rank")
    G = FgAbelianGroup(ncols, rows)
    print(G.describe())
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "lift": _cmd_lift,
        "verify": _cmd_verify,
        "decompose": _cmd_decompose,
        "factor": _cmd_factor,
        "snf": _cmd_snf,
    }
    try:
        return handlers[args.command](args)
    except InternalInvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3
    except (InputDataError, CoxliftError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
