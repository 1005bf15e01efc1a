"""Stack data: a graded Cox ring, its Picard-type grading group, the
irrelevant-ideal generators, and a log of root constructions.

Two pure transformations build new stacks from old: rooting a prime
divisor (adjoin z with z^n = s and push the grading group out by an n-th
root of the class of s) and rooting a line bundle (grading group only).
A tower log records every step so a stack can be replayed from its base.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement
from typing import Optional, Sequence, Tuple

from .abgroup import FgAbelianGroup, GroupElement, GroupHomomorphism, pushout_root
from .cyclo import CycScalar
from .errors import FactorizationOracleRequired, InputDataError
from .gring import Factorization, GradedRing, HomogeneousElement, Monomial, RewriteRule


@dataclass(frozen=True)
class DivisorRootInfo:
    section: HomogeneousElement
    order: int
    name: str


@dataclass(frozen=True)
class RootStep:
    """One tower entry.

    kind "divisor": a single root along a prime divisor (pushout group).
    kind "line_bundle": grading-group root only.
    kind "divisor_batch": several divisor roots taken in one lift step,
    with the grading extension given by explicit relation rows (the rows
    live in ambient coordinates of pic + one slot per root + one slot for
    the rooted divisor class).
    """

    kind: str
    roots: Tuple[DivisorRootInfo, ...] = ()
    bundle_class: Tuple[int, ...] = ()
    order: int = 0
    group_relations: Tuple[Tuple[int, ...], ...] = ()


@dataclass(frozen=True)
class CoarseData:
    """Snapshot of the base stack plus the composed grading-group inclusion."""

    ring: GradedRing
    group: FgAbelianGroup
    irrelevant: Tuple[HomogeneousElement, ...]
    inclusion: GroupHomomorphism  # coarse group -> current pic


@dataclass(frozen=True)
class MdStackData:
    cox_ring: GradedRing
    pic: FgAbelianGroup
    irrelevant_gens: Tuple[HomogeneousElement, ...]
    tower: Tuple[RootStep, ...]
    coarse: Optional[CoarseData] = None
    assertions: Tuple[Tuple[str, bool], ...] = ()

    def describe_tower(self):
        out = []
        for step in self.tower:
            if step.kind == "line_bundle":
                out.append(f"line-bundle root: class {list(step.bundle_class)}, order {step.order}")
            else:
                for r in step.roots:
                    out.append(
                        f"divisor root: section {r.section.key()}, order {r.order},"
                        f" new generator {r.name}"
                    )
        return out


def _mature_declared_rules(ring: GradedRing) -> GradedRing:
    """Turn declared factorizations of single generators into rewrite rules.

    Once every factor name exists in the ring, a declaration g = unit *
    prod(factors) is oriented as the elimination rule g -> rhs, so normal
    forms expose the factorization.  Generators already defined by a root
    rule (appearing as a whole rule side) are left alone.
    """
    skipped = set()
    changed = True
    while changed:
        changed = False
        gen_names = set(ring.gen_degrees)
        guarded = set()
        for r in ring.rules:
            if len(r.lhs.pairs) == 1 and r.lhs.pairs[0][1] == 1:
                guarded.add(r.lhs.pairs[0][0])
            if len(r.rhs.terms) == 1:
                c, m = r.rhs.terms[0]
                if (
                    c == CycScalar.one(ring.scalar_order)
                    and len(m.pairs) == 1
                    and m.pairs[0][1] == 1
                ):
                    guarded.add(m.pairs[0][0])
        for name in sorted(gen_names):
            if name in guarded or name in skipped:
                continue
            fact = ring.declared_factorizations.get(f"1*{name}")
            if fact is None:
                continue
            support = set()
            for f, _e in fact.factors:
                support |= f.support()
            if not support <= gen_names:
                continue
            rhs = ring.normal_form(fact.expand())
            try:
                ring = ring.with_data(
                    rules=tuple(ring.rules) + (RewriteRule(Monomial.gen(name), rhs),)
                )
            except InputDataError:
                # not orientable under the current grading or term order;
                # the declaration stays available as factorization data
                skipped.add(name)
                continue
            changed = True
            break
    return ring


def canonical_stack(cox_ring: GradedRing, irrelevant: Sequence[HomogeneousElement] = (),
                    assertions: Sequence[Tuple[str, bool]] = ()) -> MdStackData:
    """Wrap a class-group-graded Cox ring as a stack with an empty tower.

    The grading group doubles as the Picard group and the coarse data is
    the stack itself, with the identity as inclusion.
    """
    cox_ring = _mature_declared_rules(cox_ring)
    irrelevant = tuple(irrelevant)
    for g in irrelevant:
        if not cox_ring.is_homogeneous(cox_ring.normal_form(g)):
            raise InputDataError(f"irrelevant generator {g.key()} is not homogeneous")
    coarse = CoarseData(
        cox_ring,
        cox_ring.grading_group,
        irrelevant,
        GroupHomomorphism.identity(cox_ring.grading_group),
    )
    return MdStackData(
        cox_ring,
        cox_ring.grading_group,
        irrelevant,
        (),
        coarse,
        tuple(assertions),
    )


def _fresh_name(ring: GradedRing, start: int = 1) -> str:
    i = start
    used = set(ring.gen_degrees)
    while f"z{i}" in used:
        i += 1
    return f"z{i}"


def _regrade(ring: GradedRing, new_group: FgAbelianGroup,
             incl: GroupHomomorphism) -> list:
    return [(n, incl(d)) for n, d in ring.generators]


def root_divisor(S: MdStackData, s: HomogeneousElement, n: int,
                 zname: Optional[str] = None, check_irreducible: bool = True) -> MdStackData:
    """Adjoin an n-th root of the section s along its (prime) divisor.

    The ring gains a generator z with rule z^n -> s; the grading group is
    pushed out by an n-th root of the class of s.  By default the section
    must be h-irreducible: rooting a reducible divisor destroys unique
    homogeneous factorization (z^n = s1*s2 against z*...*z).
    """
    ring = S.cox_ring
    if n < 1:
        raise InputDataError("root order must be positive")
    s = ring.normal_form(s)
    if s.is_zero():
        raise InputDataError("cannot root the zero section")
    lead_c, _ = s.leading()
    s = s.scale(lead_c.inverse())
    if check_irreducible:
        try:
            fact = ring.h_factorize(s)
        except FactorizationOracleRequired:
            raise InputDataError(
                f"cannot certify section {s.key()} as h-irreducible; declare its factorization"
            )
        if len(fact.factors) != 1 or fact.factors[0][1] != 1:
            raise InputDataError(
                f"root along non-prime divisor breaks graded factoriality: "
                f"{s.key()} factors as {[(f.key(), e) for f, e in fact.factors]}"
            )
    if zname is None:
        zname = _fresh_name(ring)
    if zname in ring.gen_degrees:
        raise InputDataError(f"generator name {zname!r} already in use")

    deg_s = ring.degree_of(s)
    new_group, incl, delta = pushout_root(S.pic, deg_s, n)
    gens = _regrade(ring, new_group, incl) + [(zname, delta)]
    rules = list(ring.rules) + [
        RewriteRule(Monomial.gen(zname, n), s)
    ]
    declared = dict(ring.declared_factorizations)
    z_el = HomogeneousElement.monomial(ring.scalar_order, Monomial.gen(zname))
    declared[s.key()] = Factorization(CycScalar.one(ring.scalar_order), ((z_el, n),))
    new_ring = GradedRing(
        gens, new_group, ring.scalar_order, rules,
        ring.irreducibles, declared, ring.step_cap,
    )
    new_ring = _mature_declared_rules(new_ring)
    step = RootStep(kind="divisor", roots=(DivisorRootInfo(s, n, zname),))
    coarse = S.coarse and replace(S.coarse, inclusion=incl.compose(S.coarse.inclusion))
    return MdStackData(
        new_ring, new_group, S.irrelevant_gens, S.tower + (step,), coarse, S.assertions
    )


def root_line_bundle(S: MdStackData, a: GroupElement, n: int) -> MdStackData:
    """Adjoin an n-th root of the class a; the ring's term data is untouched."""
    if n < 1:
        raise InputDataError("root order must be positive")
    new_group, incl, _delta = pushout_root(S.pic, a, n)
    new_ring = S.cox_ring.with_data(
        generators=_regrade(S.cox_ring, new_group, incl), grading_group=new_group
    )
    step = RootStep(kind="line_bundle", bundle_class=tuple(a.coords), order=n)
    coarse = S.coarse and replace(S.coarse, inclusion=incl.compose(S.coarse.inclusion))
    return MdStackData(
        new_ring, new_group, S.irrelevant_gens, S.tower + (step,), coarse, S.assertions
    )


def apply_divisor_batch(S: MdStackData, roots: Sequence[DivisorRootInfo],
                        relations: Sequence[Sequence[int]]) -> MdStackData:
    """Root several divisors at once with an explicit grading extension.

    The new group is presented on pic's ambient generators plus one slot
    per rooted divisor plus one trailing slot for the class being rooted;
    the caller supplies all relation rows beyond pic's own.  Used by the
    lift engine when the per-divisor pushouts admit no compatible degree
    map; coming from that engine the rows always contain b_l*e_l = [q_l].
    """
    ring = S.cox_ring
    n_old = S.pic.ambient_rank
    m = len(roots)
    rows = [list(r) + [0] * (m + 1) for r in S.pic.relations.entries]
    for row in relations:
        if len(row) != n_old + m + 1:
            raise InputDataError("batch relation row has the wrong length")
        rows.append(list(row))
    new_group = FgAbelianGroup(n_old + m + 1, rows)
    incl = GroupHomomorphism(
        S.pic,
        new_group,
        [new_group.element(tuple(int(i == j) for j in range(n_old + m + 1)))
         for i in range(n_old)],
    )
    # the inclusion must stay injective, else the input degrees were inconsistent
    gens = _regrade(ring, new_group, incl)
    declared = dict(ring.declared_factorizations)
    rules = list(ring.rules)
    for idx, info in enumerate(roots):
        if info.name in dict(gens):
            raise InputDataError(f"generator name {info.name!r} already in use")
        delta = new_group.element(
            tuple(int(j == n_old + idx) for j in range(n_old + m + 1))
        )
        gens.append((info.name, delta))
        rules.append(RewriteRule(Monomial.gen(info.name, info.order), info.section))
        z_el = HomogeneousElement.monomial(ring.scalar_order, Monomial.gen(info.name))
        declared[info.section.key()] = Factorization(
            CycScalar.one(ring.scalar_order), ((z_el, info.order),)
        )
    new_ring = GradedRing(
        gens, new_group, ring.scalar_order, rules,
        ring.irreducibles, declared, ring.step_cap,
    )
    new_ring = _mature_declared_rules(new_ring)
    step = RootStep(
        kind="divisor_batch",
        roots=tuple(roots),
        group_relations=tuple(tuple(int(x) for x in row) for row in relations),
    )
    coarse = S.coarse and replace(S.coarse, inclusion=incl.compose(S.coarse.inclusion))
    return MdStackData(
        new_ring, new_group, S.irrelevant_gens, S.tower + (step,), coarse, S.assertions
    )


def replay_tower(base: MdStackData, tower: Sequence[RootStep]) -> MdStackData:
    """Rebuild a stack by replaying a tower over its base stack."""
    cur = base
    for step in tower:
        if step.kind == "divisor":
            (info,) = step.roots
            cur = root_divisor(cur, info.section, info.order, info.name,
                               check_irreducible=False)
        elif step.kind == "line_bundle":
            cur = root_line_bundle(cur, cur.pic.element(step.bundle_class), step.order)
        elif step.kind == "divisor_batch":
            cur = apply_divisor_batch(cur, step.roots, step.group_relations)
        else:
            raise InputDataError(f"unknown tower step kind {step.kind!r}")
    return cur


def effective_generators(ring: GradedRing) -> list:
    """Generators not eliminated by a rule whose right side is another generator
    (or a plain monomial in other generators) of the ring."""
    eliminable = set()
    for r in ring.rules:
        if len(r.lhs.pairs) == 1 and r.lhs.pairs[0][1] == 1:
            # alias rule g -> element eliminates g itself
            eliminable.add(r.lhs.pairs[0][0])
            continue
        if len(r.rhs.terms) == 1:
            c, m = r.rhs.terms[0]
            if (
                c == CycScalar.one(ring.scalar_order)
                and len(m.pairs) == 1
                and m.pairs[0][1] == 1
            ):
                # z^n -> g exhibits g as a power of z
                eliminable.add(m.pairs[0][0])
    return [n for n, _ in ring.generators if n not in eliminable]


def graded_factorial_spotcheck(S: MdStackData, degree_bound: int = 4):
    """Search bounded products of irreducible generators for a factorization clash.

    Enumerates all multisets (size <= degree_bound) of generator elements
    that are not split by declared data, multiplies them out modulo the
    rewrite rules, and reports two essentially different factorizations
    of the same element if any exist.
    Returns (True, None) on a clean pass, else (False, (element key, A, B)).
    """
    ring = S.cox_ring
    candidates = []
    for name, _ in ring.generators:
        el = ring.gen(name)
        if el.key() in ring.declared_factorizations:
            continue
        if ring.normal_form(el) != el:
            continue
        candidates.append((name, el))
    seen = {}
    for size in range(1, degree_bound + 1):
        for combo in combinations_with_replacement(candidates, size):
            prod = ring.one()
            for _, el in combo:
                prod = prod * el
            nf = ring.normal_form(prod)
            if nf.is_zero():
                continue
            lead_c, _ = nf.leading()
            nf = nf.scale(lead_c.inverse())
            key = nf.key()
            names = tuple(sorted(n for n, _ in combo))
            if key in seen and seen[key] != names:
                return False, (key, seen[key], names)
            seen.setdefault(key, names)
    return True, None
