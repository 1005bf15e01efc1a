#!/usr/bin/env python3
"""Run every bundled problem end to end and print the human-readable logs.

Usage: python scripts/run_examples.py [--json]
"""

import argparse
import sys
from pathlib import Path

from coxlift.lift import decompose_as_roots, run_cox_lift
from coxlift.serialize import (
    emit_result,
    human_log,
    parse_decompose,
    parse_problem,
    result_json,
)

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--json", action="store_true", help="print JSON instead of human logs")
    args = ap.parse_args()
    failures = 0
    for path in sorted(PROBLEMS.glob("*.json")):
        print("=" * 72)
        print(path.name)
        print("=" * 72)
        try:
            import json

            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
            if "decompose" in raw:
                spec = parse_decompose(raw)
                result = decompose_as_roots(spec.stack, spec.options)
                doc = emit_result(spec.name, result, spec.order)
            else:
                spec = parse_problem(raw)
                result = run_cox_lift(spec.target, spec.source_stack, spec.base, spec.options)
                doc = emit_result(spec.name, result, spec.order, spec.assertions)
            print(result_json(doc) if args.json else human_log(doc))
            if not result.verification.passed:
                failures += 1
        except Exception as exc:  # keep going so every example reports
            print(f"FAILED: {type(exc).__name__}: {exc}")
            failures += 1
        print()
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
