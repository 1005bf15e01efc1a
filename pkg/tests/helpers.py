"""Shared fixtures: parsed bundled problems and hand-built lift data."""

import json
from pathlib import Path

from coxlift.lift import run_cox_lift
from coxlift.serialize import parse_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"

_cache = {}


def load_spec(name):
    if name not in _cache:
        _cache[name] = parse_problem(str(PROBLEMS / f"{name}.json"))
    return _cache[name]


def load_raw(name):
    with open(PROBLEMS / f"{name}.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


_results = {}


def lift_of(name):
    if name not in _results:
        spec = load_spec(name)
        _results[name] = run_cox_lift(
            spec.target, spec.source_stack, spec.base, spec.options
        )
    return _results[name]
