"""Problem and result documents: versioned JSON with exact scalars.

Rationals serialize as "p/q" strings, roots of unity as {"zeta": k}
relative to the problem's cyclotomic order, group elements as integer
coordinate arrays, and elements as term lists.  Output key order is
deterministic so golden files diff cleanly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .abgroup import FgAbelianGroup, GroupElement, quotient_group
from .cyclo import CycOrder, CycScalar
from .errors import InputDataError
from .gring import Factorization, GradedRing, HomogeneousElement, Monomial, RewriteRule
from .lift import (
    BaseMorphism,
    CoxLiftResult,
    LiftOptions,
    StepRecord,
    TargetData,
    VerificationCheck,
    VerificationReport,
)
from .mdstack import (
    CoarseData,
    DivisorRootInfo,
    MdStackData,
    RootStep,
    canonical_stack,
    effective_generators,
    replay_tower,
    root_divisor,
)

SCHEMA = "coxlift/1"
RESULT_SCHEMA = "coxlift/1-result"


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    order: CycOrder
    target: TargetData
    source_stack: MdStackData
    base: BaseMorphism
    options: LiftOptions
    assertions: Dict[str, bool]
    raw: dict


@dataclass(frozen=True)
class DecomposeSpec:
    name: str
    order: CycOrder
    stack: MdStackData
    options: LiftOptions
    raw: dict


# ---------------------------------------------------------------------------
# scalars and elements


def parse_scalar(data, order: CycOrder) -> CycScalar:
    if isinstance(data, str):
        return CycScalar.from_rational(order, Fraction(data))
    if isinstance(data, (int, float)):
        return CycScalar.from_rational(order, Fraction(data))
    if isinstance(data, dict):
        if "zeta" in data:
            return CycScalar.zeta(order, int(data["zeta"]))
        if "coeffs" in data:
            coeffs = [Fraction(c) for c in data["coeffs"]]
            sub = CycOrder(int(data.get("order", order.N)))
            return CycScalar(sub, coeffs).promote(order)
    raise InputDataError(f"cannot parse scalar {data!r}")


def emit_scalar(s: CycScalar):
    if s.is_rational():
        return str(s.rational_value())
    k = s.as_root_of_unity()
    if k is not None:
        return {"zeta": k}
    return {"order": s.order.N, "coeffs": [str(c) for c in s.coeffs]}


def parse_element(data, order: CycOrder) -> HomogeneousElement:
    if not isinstance(data, dict) or "terms" not in data:
        raise InputDataError(f"element must be a dict with a 'terms' list: {data!r}")
    terms = []
    for t in data["terms"]:
        coeff = parse_scalar(t.get("c", "1"), order)
        mono = Monomial({str(k): int(v) for k, v in t.get("m", {}).items()})
        terms.append((coeff, mono))
    return HomogeneousElement(terms)


def emit_element(e: HomogeneousElement):
    return {
        "terms": [
            {"c": emit_scalar(c), "m": {n: x for n, x in m.pairs}} for c, m in e.terms
        ]
    }


def parse_group(data) -> FgAbelianGroup:
    return FgAbelianGroup(int(data["ambient_rank"]), data.get("relations", []))


def emit_group(G: FgAbelianGroup):
    return {
        "ambient_rank": G.ambient_rank,
        "relations": [list(r) for r in G.relations.entries],
    }


def _parse_rules(data, order: CycOrder) -> List[RewriteRule]:
    rules = []
    for r in data or []:
        lhs = Monomial({str(k): int(v) for k, v in r["lhs"].items()})
        rhs = parse_element(r["rhs"], order)
        rules.append(RewriteRule(lhs, rhs))
    return rules


def _emit_rules(rules):
    return [
        {"lhs": {n: e for n, e in r.lhs.pairs}, "rhs": emit_element(r.rhs)}
        for r in rules
    ]


def _parse_ring_block(data, group: FgAbelianGroup, order: CycOrder,
                      declared=None, step_cap: int = 10000) -> GradedRing:
    gens = []
    for g in data.get("generators", []):
        gens.append((str(g["name"]), group.element(g.get("degree", []))))
    return GradedRing(
        gens,
        group,
        order,
        _parse_rules(data.get("relations"), order),
        [str(n) for n in data.get("irreducibles", [])],
        declared or {},
        step_cap,
    )


# ---------------------------------------------------------------------------
# problems


def _global_order(raw, target_cl, pic_gens) -> CycOrder:
    Q, _ = quotient_group(target_cl, pic_gens)
    if not Q.is_finite():
        raise InputDataError("class group is not torsion over the Picard subgroup")
    N = Q.exponent()
    declared = int(raw.get("cyclotomic_order", 1))
    if declared < 1:
        raise InputDataError("cyclotomic_order must be positive")
    return CycOrder(math.lcm(N, declared))


def _parse_declared(block, ring: GradedRing, order: CycOrder, step_cap: int):
    """Validate declared factorizations against a scratch root extension.

    Returns (declared dict, root name pins).  Verification runs before
    the declarations are attached, so a wrong declaration cannot make
    itself true by rewriting.
    """
    declared: Dict[str, Factorization] = {}
    pins: List[Tuple[Tuple[str, int], str]] = []
    entries = block.get("declared_factorizations", [])
    if not entries:
        return declared, tuple(pins)
    scratch = canonical_stack(ring)
    for entry in entries:
        for root in entry.get("roots", []):
            section = scratch.cox_ring.normal_form(
                parse_element(root["section"], order)
            )
            name = str(root["name"])
            n = int(root["order"])
            if name not in scratch.cox_ring.gen_degrees:
                scratch = root_divisor(scratch, section, n, name)
            lead, _ = section.leading()
            pins.append(((section.scale(lead.inverse()).key(), n), name))
    sring = scratch.cox_ring
    for entry in entries:
        element = parse_element(entry["element"], order)
        unit = parse_scalar(entry.get("unit", "1"), order)
        factors = []
        for fdata, exp in entry.get("factors", []):
            if isinstance(fdata, str):
                fel = HomogeneousElement.monomial(order, Monomial.gen(fdata))
            else:
                fel = parse_element(fdata, order)
            factors.append((fel, int(exp)))
        fact = Factorization(unit, tuple(factors))
        missing = [
            n for f, _ in factors for n in f.support() if n not in sring.gen_degrees
        ]
        if missing:
            raise InputDataError(
                f"declared factorization of {element.key()} references unknown "
                f"generators {missing}; add a roots context"
            )
        ok, power, diag = sring.verify_factorization(element, fact)
        if not ok:
            raise InputDataError(
                f"declared factorization of {element.key()} fails verification: {diag}"
            )
        declared[element.key()] = fact
    return declared, tuple(pins)


def parse_problem(data) -> ProblemSpec:
    if isinstance(data, (str, bytes)):
        with open(data, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    if data.get("schema") != SCHEMA:
        raise InputDataError(f"unsupported schema {data.get('schema')!r}; expected {SCHEMA}")
    if "decompose" in data:
        raise InputDataError("this is a decompose document; use parse_decompose")
    name = str(data.get("name", "problem"))
    topts = data.get("options", {})
    step_cap = int(topts.get("step_cap", 10000))
    spot = int(topts.get("spotcheck_bound", 4))

    tblock = data["target"]
    cl = parse_group(tblock["class_group"])
    pic_gens = [cl.element(c) for c in tblock.get("pic_subgroup", [])]
    order = _global_order(data, cl, pic_gens)

    target_ring = _parse_ring_block(tblock, cl, order, step_cap=step_cap)
    if not tblock.get("generators"):
        raise InputDataError("target needs at least one Cox ring generator")
    target = TargetData(
        cl=cl,
        pic_gens=tuple(pic_gens),
        ring=target_ring,
        irrelevant=tuple(
            parse_element(e, order) for e in tblock.get("irrelevant", [])
        ),
    )
    target.validate()

    sblock = data["source"]
    clx = parse_group(sblock["class_group"])
    bare_ring = _parse_ring_block(sblock, clx, order, step_cap=step_cap)
    declared, pins = _parse_declared(sblock, bare_ring, order, step_cap)
    source_ring = bare_ring.with_data(declared_factorizations=declared)
    assertions = {
        str(k): bool(v) for k, v in sblock.get("assertions", {}).items()
    }
    source_stack = canonical_stack(
        source_ring,
        tuple(parse_element(e, order) for e in sblock.get("irrelevant", [])),
        tuple(sorted(assertions.items())),
    )

    bblock = data["base_morphism"]
    group_images = [clx.element(c) for c in bblock.get("group_map", [])]
    if len(group_images) != len(pic_gens):
        raise InputDataError(
            "base morphism group_map must list one image per pic_subgroup generator"
        )
    images: Dict[Monomial, HomogeneousElement] = {}
    target_names = set(target_ring.gen_degrees)
    source_names = set(source_ring.gen_degrees)
    for item in bblock.get("images", []):
        mono = Monomial({str(k): int(v) for k, v in item["monomial"].items()})
        if not set(mono.names()) <= target_names:
            raise InputDataError(f"base key {mono.key()} uses unknown target generators")
        img = parse_element(item["image"], order)
        if not img.support() <= source_names:
            raise InputDataError(
                f"base image of {mono.key()} uses unknown source generators"
            )
        images[mono] = source_ring.normal_form(img)
    base = BaseMorphism(images=images, group_images=tuple(group_images))
    options = LiftOptions(step_cap=step_cap, spotcheck_bound=spot, root_name_pins=pins)
    return ProblemSpec(name, order, target, source_stack, base, options, assertions, data)


def parse_decompose(data) -> DecomposeSpec:
    if isinstance(data, (str, bytes)):
        with open(data, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    if data.get("schema") != SCHEMA or "decompose" not in data:
        raise InputDataError("not a decompose document")
    name = str(data.get("name", "decompose"))
    topts = data.get("options", {})
    step_cap = int(topts.get("step_cap", 10000))
    spot = int(topts.get("spotcheck_bound", 4))
    block = data["decompose"]
    sblock = block["stack"]
    cblock = block["coarse"]
    pic = parse_group(sblock["class_group"])
    coarse_group = parse_group(cblock["class_group"])
    incl_rows = cblock.get("inclusion", [])
    if len(incl_rows) != coarse_group.ambient_rank:
        raise InputDataError("inclusion must list one image per coarse generator")
    pic_gens = [pic.element(r) for r in incl_rows]
    order = _global_order(data, pic, pic_gens)
    stack_bare = _parse_ring_block(sblock, pic, order, step_cap=step_cap)
    declared, _pins = _parse_declared(sblock, stack_bare, order, step_cap)
    stack_ring = stack_bare.with_data(declared_factorizations=declared)
    coarse_ring = _parse_ring_block(cblock, coarse_group, order, step_cap=step_cap)
    from .abgroup import GroupHomomorphism

    incl = GroupHomomorphism(coarse_group, pic, pic_gens)
    coarse = CoarseData(
        coarse_ring,
        coarse_group,
        tuple(parse_element(e, order) for e in cblock.get("irrelevant", [])),
        incl,
    )
    stack = MdStackData(
        stack_ring,
        pic,
        tuple(parse_element(e, order) for e in sblock.get("irrelevant", [])),
        (),
        coarse,
        (),
    )
    options = LiftOptions(step_cap=step_cap, spotcheck_bound=spot)
    return DecomposeSpec(name, order, stack, options, data)


def emit_problem(spec: ProblemSpec) -> dict:
    """Re-emit a parsed problem; parse(emit(spec)) reproduces the spec."""
    raw = spec.raw
    out = {
        "schema": SCHEMA,
        "name": spec.name,
        "cyclotomic_order": spec.order.N,
        "target": {
            "class_group": emit_group(spec.target.cl),
            "pic_subgroup": [list(g.coords) for g in spec.target.pic_gens],
            "generators": [
                {"name": n, "degree": list(d.coords)}
                for n, d in spec.target.ring.generators
            ],
            "relations": _emit_rules(spec.target.ring.rules),
            "irrelevant": [emit_element(e) for e in spec.target.irrelevant],
        },
        "source": {
            "class_group": emit_group(spec.source_stack.coarse.group),
            "generators": [
                {"name": n, "degree": list(d.coords)}
                for n, d in spec.source_stack.cox_ring.generators
            ],
            "relations": _emit_rules(spec.source_stack.cox_ring.rules),
            "irreducibles": sorted(spec.source_stack.cox_ring.irreducibles),
            "declared_factorizations": raw.get("source", {}).get(
                "declared_factorizations", []
            ),
            "irrelevant": [emit_element(e) for e in spec.source_stack.irrelevant_gens],
            "assertions": spec.assertions,
        },
        "base_morphism": {
            "group_map": [list(g.coords) for g in spec.base.group_images],
            "images": [
                {"monomial": {n: e for n, e in m.pairs}, "image": emit_element(img)}
                for m, img in sorted(spec.base.images.items(), key=lambda kv: kv[0].sort_key())
            ],
        },
        "options": {
            "step_cap": spec.options.step_cap,
            "spotcheck_bound": spec.options.spotcheck_bound,
        },
    }
    return out


# ---------------------------------------------------------------------------
# results


def emit_tower(tower) -> list:
    out = []
    for step in tower:
        if step.kind == "line_bundle":
            out.append(
                {"kind": "line_bundle", "class": list(step.bundle_class), "order": step.order}
            )
        elif step.kind == "divisor":
            info = step.roots[0]
            out.append(
                {
                    "kind": "divisor",
                    "section": emit_element(info.section),
                    "order": info.order,
                    "name": info.name,
                }
            )
        else:
            out.append(
                {
                    "kind": "divisor_batch",
                    "roots": [
                        {
                            "section": emit_element(i.section),
                            "order": i.order,
                            "name": i.name,
                        }
                        for i in step.roots
                    ],
                    "group_relations": [list(r) for r in step.group_relations],
                }
            )
    return out


def parse_tower(data, order: CycOrder):
    steps = []
    for item in data:
        kind = item["kind"]
        if kind == "line_bundle":
            steps.append(
                RootStep(kind=kind, bundle_class=tuple(item["class"]), order=int(item["order"]))
            )
        elif kind == "divisor":
            steps.append(
                RootStep(
                    kind=kind,
                    roots=(
                        DivisorRootInfo(
                            parse_element(item["section"], order),
                            int(item["order"]),
                            str(item["name"]),
                        ),
                    ),
                )
            )
        elif kind == "divisor_batch":
            steps.append(
                RootStep(
                    kind=kind,
                    roots=tuple(
                        DivisorRootInfo(
                            parse_element(r["section"], order), int(r["order"]), str(r["name"])
                        )
                        for r in item["roots"]
                    ),
                    group_relations=tuple(
                        tuple(int(x) for x in row) for row in item["group_relations"]
                    ),
                )
            )
        else:
            raise InputDataError(f"unknown tower step kind {kind!r}")
    return tuple(steps)


def emit_step_record(s: StepRecord) -> dict:
    return {
        "index": s.index,
        "class": list(s.cls_coords),
        "p": s.p,
        "kind": s.kind,
        "generators": [m.key() for m in s.gens],
        "cosets": list(s.cosets),
        "zero_pullbacks": list(s.zero_pullbacks),
        "roots": [{"section": k, "order": o, "name": n} for k, o, n in s.roots],
        "constraints": {
            "rows": [list(r) for r in s.constraint_rows],
            "rhs": list(s.constraint_rhs),
            "monomials": list(s.kernel_monomials),
            "human": list(s.constraint_strings()),
        },
        "alpha": list(s.alpha),
        "alpha_vars": list(s.alpha_vars),
        "solution_count": s.solution_count,
        "delta": list(s.delta_coords),
        "group_mode": s.group_mode,
    }


def emit_result(spec_name: str, result: CoxLiftResult, order: CycOrder,
                assertions: Optional[dict] = None) -> dict:
    ring = result.stack.cox_ring
    free, invs = result.stack.pic.canonical_form
    return {
        "schema": RESULT_SCHEMA,
        "problem": spec_name,
        "cyclotomic_order": order.N,
        "tower": emit_tower(result.stack.tower),
        "final_stack": {
            "pic": emit_group(result.stack.pic),
            "pic_canonical": {"free_rank": free, "invariants": list(invs)},
            "generators": [
                {"name": n, "degree": list(d.coords)} for n, d in ring.generators
            ],
            "rules": _emit_rules(ring.rules),
            "effective_generators": effective_generators(ring),
            "irrelevant": [emit_element(e) for e in result.stack.irrelevant_gens],
        },
        "images": {
            name: emit_element(el) for name, el in sorted(result.images.items())
        },
        "group_map": [list(g.coords) for g in result.group_map.images],
        "steps": [emit_step_record(s) for s in result.steps],
        "verification": {
            "passed": result.verification.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in result.verification.checks
            ],
        },
        "assertions": dict(assertions or {}),
    }


def result_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True)


def replay_result(spec: ProblemSpec, doc: dict) -> MdStackData:
    """Rebuild the final stack of a result document over the problem's source."""
    tower = parse_tower(doc["tower"], spec.order)
    return replay_tower(spec.source_stack, tower)


def human_log(doc: dict) -> str:
    lines = [f"problem: {doc.get('problem')}"]
    lines.append(f"cyclotomic order: {doc.get('cyclotomic_order')}")
    lines.append("tower:")
    tower = doc.get("tower", [])
    if not tower:
        lines.append("  (empty: the base morphism already lifts)")
    for step in tower:
        if step["kind"] == "line_bundle":
            lines.append(
                f"  [line-bundle root: class {step['class']}, order {step['order']}]"
            )
        elif step["kind"] == "divisor":
            lines.append(
                f"  [divisor root: {_element_str(step['section'])}, order {step['order']},"
                f" generator {step['name']}]"
            )
        else:
            for r in step["roots"]:
                lines.append(
                    f"  [divisor root: {_element_str(r['section'])}, order {r['order']},"
                    f" generator {r['name']}] (shared grading extension)"
                )
    fs = doc.get("final_stack", {})
    pc = fs.get("pic_canonical", {})
    parts = ["Z"] * pc.get("free_rank", 0) + [f"Z/{d}" for d in pc.get("invariants", [])]
    lines.append(f"Pic: {' x '.join(parts) if parts else '0'}")
    lines.append(f"effective generators: {', '.join(fs.get('effective_generators', [])) or '(none)'}")
    lines.append("images:")
    for name, el in doc.get("images", {}).items():
        lines.append(f"  {name} -> {_element_str(el)}")
    for s in doc.get("steps", []):
        human = s["constraints"]["human"]
        if s["kind"] == "divisor":
            desc = "; ".join(human) if human else "no constraints"
            lines.append(
                f"step {s['index']}: p={s['p']}, {desc}, {s['solution_count']} solutions,"
                f" chose {tuple(s['alpha'])}"
            )
        else:
            lines.append(f"step {s['index']}: p={s['p']}, line-bundle root")
    ver = doc.get("verification", {})
    lines.append(f"verification: {'PASS' if ver.get('passed') else 'FAIL'}")
    for c in ver.get("checks", []):
        lines.append(f"  [{'ok' if c['passed'] else 'FAIL'}] {c['name']}: {c['detail']}")
    return "\n".join(lines)


def _element_str(el: dict) -> str:
    terms = el.get("terms", [])
    if not terms:
        return "0"
    parts = []
    for t in terms:
        mono = "*".join(
            (n if e == 1 else f"{n}^{e}") for n, e in sorted(t.get("m", {}).items())
        ) or "1"
        c = t.get("c", "1")
        if isinstance(c, dict):
            c = f"zeta^{c['zeta']}" if "zeta" in c else "(cyc)"
        parts.append(mono if c in ("1", 1) else f"{c}*{mono}")
    return " + ".join(parts)
