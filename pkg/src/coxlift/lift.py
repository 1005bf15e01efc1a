"""The Cox lift engine.

Given a target space presented by its class group and Cox ring, a source
stack, and a base morphism on the Picard-level subring, the engine
enlarges the graded subring one divisor class at a time.  Each step
picks a class of prime order over the current subgroup, pulls back p-th
powers of the new sections, and either roots the h-irreducible factors
that occur with multiplicity not divisible by p (divisor case) or roots
a line bundle (all pullbacks zero).  Root-of-unity choices are pinned by
linear constraints modulo p coming from monomials that already live in
the current subring; all remaining freedom is resolved lexicographically
and the size of the solution set is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Dict, List, Optional, Sequence, Tuple

from .abgroup import (
    FgAbelianGroup,
    GroupElement,
    GroupHomomorphism,
    element_order,
    express_in_subgroup,
    kernel_basis_mod_p,
    pushout_root,
    quotient_group,
    rank_mod_p,
    solve_affine_mod_n,
    solve_affine_mod_p,
    solve_linear_over_group,
    subgroup_contains,
    subgroup_relation_lattice,
)
from .cyclo import CycOrder, CycScalar, root_of_unity_pth_root
from .errors import InputDataError, InternalInvariantError, LiftInconsistencyError
from .gring import Factorization, GradedRing, HomogeneousElement, Monomial
from .mdstack import (
    CoarseData,
    DivisorRootInfo,
    MdStackData,
    apply_divisor_batch,
    canonical_stack,
    effective_generators,
    graded_factorial_spotcheck,
    replay_tower,
    root_divisor,
    root_line_bundle,
)

_VAR_LETTERS = "ijklmnabcdefgh"


@dataclass(frozen=True)
class TargetData:
    """The target space: class group, Picard subgroup, Cox ring, irrelevant data."""

    cl: FgAbelianGroup
    pic_gens: Tuple[GroupElement, ...]
    ring: GradedRing
    irrelevant: Tuple[HomogeneousElement, ...] = ()

    def validate(self):
        if not self.ring.grading_group.same_presentation(self.cl):
            raise InputDataError("target ring must be graded by the target class group")
        Q, _ = quotient_group(self.cl, list(self.pic_gens))
        if not Q.is_finite():
            raise InputDataError(
                "not Q-factorial data: the class group is not torsion over the Picard subgroup"
            )
        return Q


@dataclass(frozen=True)
class BaseMorphism:
    """Images of the Picard-level generator monomials plus the group map."""

    images: Dict[Monomial, HomogeneousElement]
    group_images: Tuple[GroupElement, ...]


@dataclass(frozen=True)
class LiftOptions:
    step_cap: int = 10000
    spotcheck_bound: int = 4
    root_name_pins: Tuple[Tuple[Tuple[str, int], str], ...] = ()

    def pins(self) -> dict:
        return dict(self.root_name_pins)


@dataclass(frozen=True)
class StepRecord:
    index: int
    cls_coords: Tuple[int, ...]
    p: int
    kind: str  # "divisor" | "line_bundle"
    gens: Tuple[Monomial, ...]
    cosets: Tuple[int, ...]
    zero_pullbacks: Tuple[str, ...]
    roots: Tuple[Tuple[str, int, str], ...]  # (section key, order, name)
    constraint_rows: Tuple[Tuple[int, ...], ...]
    constraint_rhs: Tuple[int, ...]
    kernel_monomials: Tuple[str, ...]
    alpha: Tuple[int, ...]
    alpha_vars: Tuple[str, ...]
    solution_count: int
    delta_coords: Tuple[int, ...]
    group_mode: str  # "pushout" | "universal" | "line"

    def constraint_strings(self) -> Tuple[str, ...]:
        out = []
        for row, r in zip(self.constraint_rows, self.constraint_rhs):
            terms = []
            for coeff, var in zip(row, self.alpha_vars):
                if coeff % self.p == 0:
                    continue
                c = coeff % self.p
                terms.append(var if c == 1 else f"{c}{var}")
            lhs = "+".join(terms) if terms else "0"
            out.append(f"{lhs} ≡ {r % self.p} (mod {self.p})")
        return tuple(out)


@dataclass(frozen=True)
class VerificationCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class VerificationReport:
    checks: Tuple[VerificationCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]


@dataclass(frozen=True)
class CoxLiftResult:
    target: TargetData
    base: BaseMorphism
    source_stack: MdStackData
    stack: MdStackData
    images: Dict[str, HomogeneousElement]
    group_map: GroupHomomorphism
    table: Dict[Monomial, HomogeneousElement]
    steps: Tuple[StepRecord, ...]
    verification: VerificationReport


@dataclass(frozen=True)
class Theta:
    """A factoring map: ring images (result ring generators into the candidate
    ring) together with the grading-group map."""

    ring_images: Dict[str, HomogeneousElement]
    group_map: GroupHomomorphism


@dataclass(frozen=True)
class NoFactor:
    reason: str
    step: Optional[int] = None


# ---------------------------------------------------------------------------
# Subring generator bookkeeping


def pic_level_generators(T: TargetData, K_gens: Sequence[GroupElement]) -> List[Monomial]:
    """Monomials generating the subring of degrees inside the subgroup.

    Enumerates exponent vectors bounded, per generator, by the order of
    its degree class in Cl/K (a power beyond that order splits off a
    factor with degree in K, so nothing larger can be a minimal
    generator), keeps the vectors whose degree lies in K, and drops any
    monomial divisible by a product of two kept monomials.
    """
    Q, proj = quotient_group(T.cl, list(K_gens))
    if not Q.is_finite():
        raise InputDataError("not Q-factorial data: Cl/K is infinite")
    names = [n for n, _ in T.ring.generators]
    classes = [proj(d) for _, d in T.ring.generators]
    bounds = [element_order(Q, c) for c in classes]
    candidates = []
    for exps in iproduct(*[range(b + 1) for b in bounds]):
        if not any(exps):
            continue
        acc = Q.zero()
        for e, c in zip(exps, classes):
            if e:
                acc = acc + e * c
        if acc.is_zero():
            candidates.append(Monomial(zip(names, exps)))
    candidates.sort(key=lambda m: m.sort_key())
    kept: List[Monomial] = []
    for m in candidates:
        redundant = False
        for i in range(len(kept)):
            for j in range(i, len(kept)):
                if (kept[i] * kept[j]).divides(m):
                    redundant = True
                    break
            if redundant:
                break
        if not redundant:
            kept.append(m)
    return kept


def choose_extension_class(T: TargetData, K_gens: Sequence[GroupElement]):
    """Deterministic next divisor class: first nontrivial canonical slot of
    Cl/K, smallest prime p dividing its order, lifted as (order/p) times the
    canonical generator."""
    Q, _ = quotient_group(T.cl, list(K_gens))
    if not Q.is_finite():
        raise InputDataError("not Q-factorial data")
    if Q.order() == 1:
        raise InputDataError("already complete: K equals the class group")
    slot = next(i for i, d in enumerate(Q.moduli) if d not in (0, 1))
    m = Q.moduli[slot]
    p = next(q for q in range(2, m + 1) if m % q == 0 and all(q % r for r in range(2, q)))
    lift = T.cl.element(Q.canonical_generator(slot).coords)
    return (m // p) * lift, p


def coset_generators(T: TargetData, K_gens: Sequence[GroupElement],
                     D: GroupElement, p: int):
    """New subring generators for K + <D>, tagged with class data.

    Returns a list of (monomial, F, m, k) where F is the degree, m in
    1..p-1 its class in (K+<D>)/K relative to D, and k = F - m*D in K.
    """
    K1 = list(K_gens) + [D]
    out = []
    for mono in pic_level_generators(T, K1):
        F = T.ring.monomial_degree(mono)
        if subgroup_contains(T.cl, list(K_gens), F):
            continue
        mj = None
        for c in range(1, p):
            if subgroup_contains(T.cl, list(K_gens), F - c * D):
                mj = c
                break
        if mj is None:
            raise InternalInvariantError(
                f"generator {mono.key()} has no coset class relative to the chosen divisor"
            )
        out.append((mono, F, mj, F - mj * D))
    return out


# ---------------------------------------------------------------------------
# The engine


class _Engine:
    def __init__(self, target: TargetData, source_stack: MdStackData,
                 base: BaseMorphism, options: LiftOptions):
        self.T = target
        self.stack = source_stack
        self.base = base
        self.opts = options
        self.order = source_stack.cox_ring.scalar_order
        self.N = self.order.N
        self.K_gens: List[GroupElement] = list(target.pic_gens)
        self.K_images: List[GroupElement] = list(base.group_images)
        self.table: Dict[Monomial, HomogeneousElement] = dict(base.images)
        self.steps: List[StepRecord] = []
        self._validate_inputs()

    # -- validation ------------------------------------------------------

    def _validate_inputs(self):
        self.T.validate()
        if self.T.ring.scalar_order != self.order:
            raise InputDataError("target and source rings use different cyclotomic orders")
        ring0 = self.stack.cox_ring
        if len(self.K_images) != len(self.K_gens):
            raise InputDataError("base morphism needs one group image per Picard generator")
        self._lambda_hom()  # validates relation preservation of the group map
        expected = pic_level_generators(self.T, self.K_gens)
        missing = [m.key() for m in expected if m not in self.table]
        if missing:
            raise InputDataError(f"base morphism misses images for {missing}")
        for mono, img in self.table.items():
            img_nf = ring0.normal_form(img)
            if img_nf.is_zero():
                continue
            want = self._lambda_of(self.T.ring.monomial_degree(mono))
            got = ring0.degree_of(img_nf)
            if not (got == want):
                raise InputDataError(
                    f"base image of {mono.key()} has degree {list(got.coords)}, "
                    f"expected the group-map image of its class"
                )
        self._spotcheck_base_relations()

    def _spotcheck_base_relations(self):
        """Bounded well-definedness check: equal monomials from different
        key products must receive equal images."""
        ring = self.stack.cox_ring
        keys = sorted(self.table, key=lambda m: m.sort_key())
        seen: Dict[Monomial, Tuple[tuple, HomogeneousElement]] = {}
        from itertools import combinations_with_replacement

        for size in (2, 3):
            for combo in combinations_with_replacement(range(len(keys)), size):
                mono = Monomial.one()
                img = ring.one()
                for idx in combo:
                    mono = mono * keys[idx]
                    img = img * self.table[keys[idx]]
                img = ring.normal_form(img)
                if mono in seen and seen[mono][0] != combo:
                    if not ring.elements_equal(seen[mono][1], img):
                        raise InputDataError(
                            f"base images are inconsistent on the monomial {mono.key()}"
                        )
                seen.setdefault(mono, (combo, img))

    # -- degree map -------------------------------------------------------

    def _lambda_hom(self) -> GroupHomomorphism:
        from .abgroup import abstract_subgroup

        K_abs, _ = abstract_subgroup(self.T.cl, self.K_gens)
        try:
            return GroupHomomorphism(
                K_abs, self.stack.pic, [self.stack.pic.element(i.coords) for i in self.K_images]
            )
        except InputDataError as exc:
            raise LiftInconsistencyError(
                f"degree map is not well defined on the current subgroup: {exc}"
            )

    def _lambda_of(self, k: GroupElement) -> GroupElement:
        coeffs = express_in_subgroup(self.T.cl, self.K_gens, k)
        if coeffs is None:
            raise InternalInvariantError("degree map applied outside the current subgroup")
        acc = self.stack.pic.zero()
        for c, img in zip(coeffs, self.K_images):
            if c:
                acc = acc + c * self.stack.pic.element(img.coords)
        return acc

    # -- evaluation of tabulated monomials ---------------------------------

    def _decompositions(self, mono: Monomial, limit: int = 2):
        keys = sorted(self.table, key=lambda m: (-m.total_degree(), m.key()))
        results: List[tuple] = []

        def rec(rem, start, acc):
            if len(results) >= limit:
                return
            if rem.is_one():
                results.append(tuple(acc))
                return
            for idx in range(start, len(keys)):
                if keys[idx].divides(rem):
                    rec(rem.div(keys[idx]), idx, acc + [idx])
                    if len(results) >= limit:
                        return

        rec(mono, 0, [])
        return [[keys[i] for i in dec] for dec in results]

    def evaluate(self, mono: Monomial) -> HomogeneousElement:
        """Image of a monomial whose degree already lies in the subgroup."""
        if mono in self.table:
            return self.table[mono]
        ring = self.stack.cox_ring
        decs = self._decompositions(mono)
        if not decs:
            raise LiftInconsistencyError(
                f"generator table incomplete: no decomposition for {mono.key()}"
            )
        values = []
        for dec in decs:
            img = ring.one()
            for k in dec:
                img = img * self.table[k]
            values.append(ring.normal_form(img))
        if len(values) == 2 and not ring.elements_equal(values[0], values[1]):
            raise LiftInconsistencyError(
                f"inconsistent image table: two decompositions of {mono.key()} disagree"
            )
        return values[0]

    # -- the loop -----------------------------------------------------------

    def complete(self) -> bool:
        Q, _ = quotient_group(self.T.cl, self.K_gens)
        return Q.order() == 1

    def run(self):
        Q0, _ = quotient_group(self.T.cl, list(self.T.pic_gens))
        guard = (Q0.order() or 2).bit_length() + 2
        step = 0
        while not self.complete():
            step += 1
            if step > guard:
                raise InternalInvariantError("lift loop exceeded its termination bound")
            D, p = choose_extension_class(self.T, self.K_gens)
            if self.N % p:
                raise InputDataError(
                    f"cyclotomic order {self.N} does not contain the step prime {p}; "
                    "raise cyclotomic_order"
                )
            coset = coset_generators(self.T, self.K_gens, D, p)
            pullbacks = []
            for mono, F, mj, kj in coset:
                pullbacks.append(self.stack.cox_ring.normal_form(self.evaluate(mono ** p)))
            if any(not e.is_zero() for e in pullbacks):
                self._divisor_step(step - 1, D, p, coset, pullbacks)
            else:
                self._line_step(step - 1, D, p, coset)
        return self._finish()

    # -- line-bundle step ----------------------------------------------------

    def _line_step(self, index, D, p, coset):
        L = self._lambda_of(p * D)
        new_stack = root_line_bundle(self.stack, L, p)
        incl = GroupHomomorphism(
            self.stack.pic,
            new_stack.pic,
            [new_stack.pic.element(tuple(r) + (0,))
             for r in _identity_rows(self.stack.pic.ambient_rank)],
        )
        delta = new_stack.pic.element((0,) * self.stack.pic.ambient_rank + (1,))
        self.stack = new_stack
        self.K_images = [incl(i) for i in self.K_images]
        self.K_gens.append(D)
        self.K_images.append(delta)
        for mono, F, mj, kj in coset:
            self.table[mono] = HomogeneousElement.zero()
        self._lambda_hom()
        self.steps.append(
            StepRecord(
                index=index,
                cls_coords=tuple(D.coords),
                p=p,
                kind="line_bundle",
                gens=tuple(m for m, _, _, _ in coset),
                cosets=tuple(mj for _, _, mj, _ in coset),
                zero_pullbacks=tuple(m.key() for m, _, _, _ in coset),
                roots=(),
                constraint_rows=(),
                constraint_rhs=(),
                kernel_monomials=(),
                alpha=(),
                alpha_vars=(),
                solution_count=1,
                delta_coords=tuple(delta.coords),
                group_mode="line",
            )
        )

    # -- divisor step ----------------------------------------------------------

    def _divisor_step(self, index, D, p, coset, pullbacks):
        ring = self.stack.cox_ring
        Jp = [j for j, e in enumerate(pullbacks) if not e.is_zero()]
        facts: Dict[int, Factorization] = {}
        for j in Jp:
            facts[j] = ring.h_factorize(pullbacks[j])
        qlist: List[HomogeneousElement] = []
        qkeys: List[str] = []
        for j in Jp:
            for f, _e in facts[j].factors:
                if f.key() not in qkeys:
                    qkeys.append(f.key())
                    qlist.append(f)
        a = [[0] * len(coset) for _ in qlist]
        for j in Jp:
            for f, e in facts[j].factors:
                a[qkeys.index(f.key())][j] = e
        b = []
        for row in a:
            g = math.gcd(p, *[row[j] for j in Jp]) if Jp else p
            b.append(p // g if g != p else 1)
            if b[-1] not in (1, p):
                raise InternalInvariantError("root order outside {1, p}")
        rooted = [l for l, bl in enumerate(b) if bl == p]

        # base p-th roots for the factorization units of the pullbacks
        xi = CycScalar.zeta(self.order, self.N // p)
        base_roots: Dict[int, CycScalar] = {}
        for j in Jp:
            u = facts[j].unit
            if u == CycScalar.one(self.order):
                base_roots[j] = CycScalar.one(self.order)
                continue
            c0 = root_of_unity_pth_root(u, p)
            if c0 is None:
                raise LiftInconsistencyError(
                    f"pullback of {coset[j][0].key()}^{p} has unit {u.as_string()}, "
                    f"which admits no {p}-th root of unity in Q(zeta_{self.N})"
                )
            base_roots[j] = c0

        # names for the new root generators
        pins = self.opts.pins()
        names = []
        used = set(ring.gen_degrees)
        counter = 1
        for l in rooted:
            pin = pins.get((qlist[l].key(), p))
            if pin and pin not in used:
                names.append(pin)
                used.add(pin)
                continue
            while f"z{counter}" in used:
                counter += 1
            names.append(f"z{counter}")
            used.add(f"z{counter}")

        new_stack, incl, delta, zdegs, mode = self._extend_group_and_ring(
            D, p, coset, Jp, qlist, a, b, rooted, names
        )
        new_ring = new_stack.cox_ring

        # constraint system for the root-of-unity exponents
        kernel = kernel_basis_mod_p([coset[j][2] for j in Jp], p) if Jp else []
        rows, rhs, kmonos = [], [], []
        for cvec in kernel:
            mono = Monomial.one()
            for pos, j in enumerate(Jp):
                mono = mono * (coset[j][0] ** cvec[pos])
            E = self.evaluate(mono)
            if E.is_zero():
                raise LiftInconsistencyError(
                    f"kernel monomial {mono.key()} evaluated to zero; data inconsistent"
                )
            kfact = new_ring.h_factorize(E)
            expected: Dict[str, int] = {}
            for l in range(len(qlist)):
                s = sum(cvec[pos] * a[l][j] for pos, j in enumerate(Jp))
                if b[l] == p:
                    if s:
                        zel = new_ring.gen(names[rooted.index(l)])
                        expected[zel.key()] = s
                else:
                    if s % p:
                        raise LiftInconsistencyError(
                            f"inconsistent factorization data: exponent {s}/{p} of "
                            f"{qkeys[l]} in {mono.key()} is fractional"
                        )
                    if s // p:
                        expected[qkeys[l]] = s // p
            got = {f.key(): e for f, e in kfact.factors}
            if got != expected:
                raise LiftInconsistencyError(
                    f"inconsistent factorization data at {mono.key()}: "
                    f"expected {expected}, found {got}"
                )
            denom = CycScalar.one(self.order)
            for pos, j in enumerate(Jp):
                denom = denom * (base_roots[j] ** cvec[pos])
            rho = kfact.unit * denom.inverse()
            er = rho.as_root_of_unity()
            if er is None or er % (self.N // p):
                raise LiftInconsistencyError(
                    f"factorization unit at {mono.key()} is not a {p}-th root of unity: "
                    f"{rho.as_string()}"
                )
            rows.append(tuple(cvec))
            rhs.append((er // (self.N // p)) % p)
            kmonos.append(mono.key())
        alpha = solve_affine_mod_p(rows, rhs, len(Jp), p)
        if alpha is None:
            raise LiftInconsistencyError(
                "root-of-unity constraint system is inconsistent; "
                f"constraints {kmonos} cannot be satisfied"
            )
        count = p ** (len(Jp) - rank_mod_p(rows, len(Jp), p)) if Jp else 1

        # generator images
        new_images: Dict[Monomial, HomogeneousElement] = {}
        for jpos, j in enumerate(Jp):
            coeff = base_roots[j] * (xi ** alpha[jpos])
            img = new_ring.const(coeff)
            for l in range(len(qlist)):
                if not a[l][j]:
                    continue
                if b[l] == p:
                    img = img * new_ring.gen(names[rooted.index(l)]) ** a[l][j]
                else:
                    img = img * (qlist[l] ** (a[l][j] // p))
            new_images[coset[j][0]] = new_ring.normal_form(img)
        for j, (mono, F, mj, kj) in enumerate(coset):
            if j not in Jp:
                new_images[mono] = HomogeneousElement.zero()

        self.stack = new_stack
        self.K_images = [incl(i) for i in self.K_images]
        self.K_gens.append(D)
        self.K_images.append(delta)
        self.table.update(new_images)
        self._lambda_hom()
        # degree coherence: every new image matches the extended degree map
        for mono, F, mj, kj in coset:
            img = self.table[mono]
            if img.is_zero():
                continue
            if not (new_ring.degree_of(img) == self._lambda_of(F)):
                raise LiftInconsistencyError(
                    f"degree mismatch for the image of {mono.key()}"
                )
        varnames = tuple(
            _VAR_LETTERS[i % len(_VAR_LETTERS)] for i in range(len(Jp))
        )
        self.steps.append(
            StepRecord(
                index=index,
                cls_coords=tuple(D.coords),
                p=p,
                kind="divisor",
                gens=tuple(m for m, _, _, _ in coset),
                cosets=tuple(mj for _, _, mj, _ in coset),
                zero_pullbacks=tuple(
                    coset[j][0].key() for j in range(len(coset)) if j not in Jp
                ),
                roots=tuple(
                    (qkeys[l], p, names[rooted.index(l)]) for l in rooted
                ),
                constraint_rows=tuple(rows),
                constraint_rhs=tuple(rhs),
                kernel_monomials=tuple(kmonos),
                alpha=tuple(alpha),
                alpha_vars=varnames,
                solution_count=count,
                delta_coords=tuple(delta.coords),
                group_mode=mode,
            )
        )

    def _extend_group_and_ring(self, D, p, coset, Jp, qlist, a, b, rooted, names):
        """Extend ring and grading group for one divisor step.

        First tries the plain iterated pushouts with a solved image for
        the new class; when the degree equations have no solution there,
        falls back to a single universal extension whose relations force
        the degree map to exist (recorded in the tower for exact replay).
        """
        ring = self.stack.cox_ring
        pic = self.stack.pic
        unrooted_deg: Dict[int, GroupElement] = {}
        for j in Jp:
            acc = pic.zero()
            for l in range(len(qlist)):
                if b[l] == 1 and a[l][j]:
                    acc = acc + (a[l][j] // p) * ring.degree_of(qlist[l])
            unrooted_deg[j] = acc
        lam_pD = self._lambda_of(p * D)
        lam_k = {j: self._lambda_of(coset[j][3]) for j in Jp}

        # --- pushout attempt
        seq_stack = self.stack
        incls: List[GroupHomomorphism] = []
        for l, name in zip(rooted, names):
            before = seq_stack.pic
            seq_stack = root_divisor(seq_stack, qlist[l], p, name, check_irreducible=True)
            after = seq_stack.pic
            incls.append(
                GroupHomomorphism(
                    before,
                    after,
                    [after.element(tuple(r) + (0,))
                     for r in _identity_rows(before.ambient_rank)],
                )
            )
        def lift_through(x: GroupElement, from_stage: int) -> GroupElement:
            for h in incls[from_stage:]:
                x = h(x)
            return x

        G_seq = seq_stack.pic
        eqs = [(p, lift_through(lam_pD, 0))]
        for j in Jp:
            deg_img = G_seq.zero()
            for pos, l in enumerate(rooted):
                if a[l][j]:
                    zdeg = seq_stack.cox_ring.gen_degrees[names[pos]]
                    deg_img = deg_img + a[l][j] * zdeg
            deg_img = deg_img + lift_through(unrooted_deg[j], 0)
            eqs.append((coset[j][2], deg_img - lift_through(lam_k[j], 0)))
        delta = solve_linear_over_group(G_seq, eqs)
        if delta is not None:
            incl_total = incls[0] if incls else GroupHomomorphism.identity(pic)
            for h in incls[1:]:
                incl_total = h.compose(incl_total)
            zdegs = [seq_stack.cox_ring.gen_degrees[n] for n in names]
            return seq_stack, incl_total, delta, zdegs, "pushout"

        # --- universal extension
        n_old = pic.ambient_rank
        R = len(rooted)
        rows = []
        for pos, l in enumerate(rooted):
            dq = ring.degree_of(qlist[l])
            row = [-c for c in dq.coords] + [0] * (R + 1)
            row[n_old + pos] = p
            rows.append(row)
        row = [-c for c in lam_pD.coords] + [0] * (R + 1)
        row[n_old + R] = p
        rows.append(row)
        for j in Jp:
            base = lam_k[j] - unrooted_deg[j]
            row = list(base.coords) + [0] * (R + 1)
            for pos, l in enumerate(rooted):
                row[n_old + pos] = -a[l][j]
            row[n_old + R] = coset[j][2]
            rows.append(row)
        infos = [DivisorRootInfo(qlist[l], p, names[pos]) for pos, l in enumerate(rooted)]
        # irreducibility was certified during the pushout attempt above
        new_stack = apply_divisor_batch(self.stack, infos, rows)
        G_new = new_stack.pic
        incl = GroupHomomorphism(
            pic,
            G_new,
            [G_new.element(tuple(r) + (0,) * (R + 1)) for r in _identity_rows(n_old)],
        )
        for krow in subgroup_relation_lattice(G_new, list(incl.images)):
            if not pic.element(krow).is_zero():
                raise LiftInconsistencyError(
                    "inconsistent degree data: the grading extension collapses "
                    "existing degrees"
                )
        delta = G_new.element((0,) * (n_old + R) + (1,))
        zdegs = [new_stack.cox_ring.gen_degrees[n] for n in names]
        return new_stack, incl, delta, zdegs, "universal"

    # -- finish -----------------------------------------------------------------

    def _finish(self):
        ring = self.stack.cox_ring
        images: Dict[str, HomogeneousElement] = {}
        for name, _deg in self.T.ring.generators:
            mono = Monomial.gen(name)
            if mono not in self.table:
                raise InternalInvariantError(
                    f"generator {name} was never tabulated during the lift"
                )
            images[name] = ring.normal_form(self.table[mono])
        cl = self.T.cl
        hom_images = []
        for row in _identity_rows(cl.ambient_rank):
            coeffs = express_in_subgroup(cl, self.K_gens, cl.element(row))
            if coeffs is None:
                raise InternalInvariantError("class group not generated at completion")
            acc = self.stack.pic.zero()
            for c, img in zip(coeffs, self.K_images):
                if c:
                    acc = acc + c * self.stack.pic.element(img.coords)
            hom_images.append(acc)
        try:
            group_map = GroupHomomorphism(cl, self.stack.pic, hom_images)
        except InputDataError as exc:
            raise LiftInconsistencyError(f"final group map is ill defined: {exc}")
        return self.stack, images, group_map, dict(self.table), tuple(self.steps)


def _identity_rows(n: int):
    return [tuple(int(i == j) for j in range(n)) for i in range(n)]


def run_cox_lift(target: TargetData, source_stack: MdStackData, base: BaseMorphism,
                 options: LiftOptions = LiftOptions()) -> CoxLiftResult:
    """Run the full lift loop and verify the outcome."""
    engine = _Engine(target, source_stack, base, options)
    stack, images, group_map, table, steps = engine.run()
    draft = CoxLiftResult(
        target=target,
        base=base,
        source_stack=source_stack,
        stack=stack,
        images=images,
        group_map=group_map,
        table=table,
        steps=steps,
        verification=VerificationReport(()),
    )
    report = verify_lift(target, source_stack, base, draft,
                         spotcheck_bound=options.spotcheck_bound)
    return CoxLiftResult(
        target=target,
        base=base,
        source_stack=source_stack,
        stack=stack,
        images=images,
        group_map=group_map,
        table=table,
        steps=steps,
        verification=report,
    )


# ---------------------------------------------------------------------------
# Verification


def _map_monomial(images: Dict[str, HomogeneousElement], ring: GradedRing,
                  mono: Monomial) -> HomogeneousElement:
    acc = ring.one()
    for name, e in mono.pairs:
        img = images.get(name)
        if img is None:
            raise InputDataError(f"no image recorded for generator {name}")
        if img.is_zero():
            return HomogeneousElement.zero()
        acc = acc * (img ** e)
    return acc


def map_element(images: Dict[str, HomogeneousElement], ring: GradedRing,
                e: HomogeneousElement) -> HomogeneousElement:
    acc = HomogeneousElement.zero()
    for c, m in e.terms:
        part = _map_monomial(images, ring, m)
        acc = acc + part.scale(c)
    return acc


def verify_lift(target: TargetData, source_stack: MdStackData, base: BaseMorphism,
                result: CoxLiftResult, spotcheck_bound: int = 0) -> VerificationReport:
    """The four lift checks: homogeneity, relation preservation, restriction
    to the base morphism, and well-definedness of the group map."""
    ring = result.stack.cox_ring
    checks: List[VerificationCheck] = []

    ok, detail = True, "all generator images are homogeneous of the mapped degree"
    for name, deg in target.ring.generators:
        img = result.images.get(name)
        if img is None:
            ok, detail = False, f"generator {name} has no image"
            break
        img = ring.normal_form(img)
        if img.is_zero():
            continue
        want = result.group_map(deg)
        got = ring.degree_of(img)
        if not (got == want):
            ok, detail = False, (
                f"image of {name} has degree {list(got.coords)}, "
                f"group map demands {list(want.coords)}"
            )
            break
    checks.append(VerificationCheck("homogeneity", ok, detail))

    ok, detail = True, "all target ring relations map to zero"
    for rule in target.ring.rules:
        lhs = _map_monomial(result.images, ring, rule.lhs)
        rhs = map_element(result.images, ring, rule.rhs)
        if not ring.elements_equal(lhs, rhs):
            ok, detail = False, f"relation {rule.key()} does not map to zero"
            break
    checks.append(VerificationCheck("relation-preservation", ok, detail))

    ok, detail = True, "lift restricts to the base morphism on the Picard level"
    for mono, img0 in base.images.items():
        via_lift = _map_monomial(result.images, ring, mono)
        if not ring.elements_equal(via_lift, img0):
            ok, detail = False, (
                f"restriction differs from the base morphism at {mono.key()}"
            )
            break
    checks.append(VerificationCheck("restriction", ok, detail))

    ok, detail = True, "group map respects all class-group relations"
    try:
        GroupHomomorphism(target.cl, result.stack.pic, list(result.group_map.images))
    except InputDataError as exc:
        ok, detail = False, str(exc)
    if ok and result.stack.coarse is not None:
        iota = result.stack.coarse.inclusion
        for pic_gen, base_img in zip(target.pic_gens, base.group_images):
            want = iota(base_img)
            got = result.group_map(pic_gen)
            if not (got == want):
                ok, detail = False, (
                    "group map does not restrict to the base morphism on the "
                    "Picard subgroup"
                )
                break
    checks.append(VerificationCheck("group-map", ok, detail))

    if spotcheck_bound and len(ring.generators) <= 6:
        good, ce = graded_factorial_spotcheck(result.stack, spotcheck_bound)
        checks.append(
            VerificationCheck(
                "factorial-spotcheck",
                good,
                "no clashing bounded factorizations" if good else f"clash: {ce}",
            )
        )
    return VerificationReport(tuple(checks))


# ---------------------------------------------------------------------------
# Minimality: factoring a candidate through the computed lift


class _SymTerm:
    """coeff * zeta^(linear form in unit variables) * element (coeff-1)."""

    def __init__(self, const: CycScalar, varvec: Tuple[int, ...],
                 element: HomogeneousElement):
        self.const = const
        self.varvec = varvec
        self.element = element

    def mul(self, other: "_SymTerm") -> "_SymTerm":
        return _SymTerm(
            self.const * other.const,
            tuple(x + y for x, y in zip(self.varvec, other.varvec)),
            self.element * other.element,
        )

    def pow(self, k: int) -> "_SymTerm":
        out = _SymTerm(
            self.const ** k,
            tuple(x * k for x in self.varvec),
            self.element ** k,
        )
        return out


def check_factors_through(result: CoxLiftResult, candidate: CoxLiftResult):
    """Build the factoring map from the candidate stack through the result.

    Replays the result tower: each rooted divisor needs an element of the
    candidate ring whose power normalizes to the rooted section (unit
    freedom solved lexicographically), each line-bundle root extends the
    group map by the candidate's image of the rooted class.  Returns a
    Theta on success and a NoFactor with the obstruction otherwise.
    """
    res_base = result.stack.coarse
    cand_base = candidate.stack.coarse
    if res_base is None or cand_base is None:
        raise InputDataError("both stacks need coarse base data for factoring")
    if [
        (n, tuple(d.coords)) for n, d in res_base.ring.generators
    ] != [(n, tuple(d.coords)) for n, d in cand_base.ring.generators]:
        return NoFactor("the two lifts do not share a base stack")
    cand_ring = candidate.stack.cox_ring
    cand_pic = candidate.stack.pic
    N = cand_ring.scalar_order.N

    nvars_total = sum(
        len(step.roots) for step in result.stack.tower if step.kind != "line_bundle"
    )
    cand_orders = [
        info.order
        for step in candidate.stack.tower
        for info in (step.roots if step.kind != "line_bundle" else ())
    ]
    search_factor = 1
    for o in cand_orders:
        search_factor *= o
    search_factor = min(search_factor, 16)

    sym: Dict[str, _SymTerm] = {}
    for name, _d in res_base.ring.generators:
        if name not in cand_ring.gen_degrees:
            return NoFactor(f"candidate ring lacks base generator {name}")
        sym[name] = _SymTerm(
            CycScalar.one(cand_ring.scalar_order),
            (0,) * nvars_total,
            cand_ring.gen(name),
        )

    def theta_sym(e: HomogeneousElement) -> Optional[_SymTerm]:
        if len(e.terms) == 1:
            c, m = e.terms[0]
            acc = _SymTerm(c, (0,) * nvars_total, cand_ring.one())
            for nm, ex in m.pairs:
                if nm not in sym:
                    return None
                acc = acc.mul(sym[nm].pow(ex))
            return acc
        # multi-term: allowed only when no unit variables are involved
        acc = HomogeneousElement.zero()
        for c, m in e.terms:
            part = _SymTerm(c, (0,) * nvars_total, cand_ring.one())
            for nm, ex in m.pairs:
                if nm not in sym:
                    return None
                st = sym[nm].pow(ex)
                if any(st.varvec):
                    return None
                part = part.mul(st)
            acc = acc + part.element.scale(part.const)
        return _SymTerm(CycScalar.one(cand_ring.scalar_order), (0,) * nvars_total, acc)

    # group map, extended record by record while replaying the result tower
    theta_group_images: List[GroupElement] = list(cand_base.inclusion.images)
    res_stage = canonical_stack(res_base.ring, res_base.irrelevant)
    equations: List[Tuple[Tuple[int, ...], int]] = []  # rows over unit vars mod N
    var_cursor = 0
    psi = candidate.group_map
    tower = list(result.stack.tower)
    cursor = 0

    def process_root(info, step_idx):
        nonlocal var_cursor
        target_sym = theta_sym(res_stage.cox_ring.normal_form(info.section))
        if target_sym is None:
            return NoFactor(
                f"cannot transport section {info.section.key()} (unsupported shape)",
                step_idx,
            )
        found = _find_root_monomial(
            cand_ring, target_sym.element, info.order, search_factor
        )
        if found is None:
            return NoFactor(
                f"candidate ring has no {info.order}-th root of {info.section.key()}",
                step_idx,
            )
        m_el, sigma = found
        k = sigma.as_root_of_unity()
        if k is None:
            return NoFactor(
                f"root of {info.section.key()} differs by a non-root-of-unity scalar",
                step_idx,
            )
        kc = target_sym.const.as_root_of_unity()
        if kc is None:
            return NoFactor("accumulated unit is not a root of unity", step_idx)
        # w = zeta^x * m; w^order = theta(section) forces
        # order*x - (section's unit variables) = dlog(const) - dlog(sigma)
        crow = [0] * nvars_total
        crow[var_cursor] = info.order
        for i, c in enumerate(target_sym.varvec):
            crow[i] -= c
        equations.append((tuple(crow), (kc - k) % N))
        sym[info.name] = _SymTerm(
            CycScalar.one(cand_ring.scalar_order),
            tuple(int(i == var_cursor) for i in range(nvars_total)),
            m_el,
        )
        theta_group_images.append(cand_ring.degree_of(m_el))
        var_cursor += 1
        return None

    # pair tower entries with the step records that produced them; towers of
    # hand-assembled lift data may carry no records at all
    paired: List[Tuple[object, Optional[StepRecord]]] = []
    for record in result.steps:
        if record.kind == "line_bundle" or record.group_mode == "universal":
            n_entries = 1
        else:
            n_entries = len(record.roots)
        for _ in range(n_entries):
            paired.append((tower[cursor], record))
            cursor += 1
    while cursor < len(tower):
        paired.append((tower[cursor], None))
        cursor += 1

    for step_idx, (entry, record) in enumerate(paired):
        if entry.kind == "line_bundle":
            if record is None:
                return NoFactor(
                    "line-bundle root without a step record cannot be transported",
                    step_idx,
                )
            theta_group_images.append(psi(result.target.cl.element(record.cls_coords)))
        else:
            for info in entry.roots:
                fail = process_root(info, step_idx)
                if fail is not None:
                    return fail
            if entry.kind == "divisor_batch":
                if record is None:
                    return NoFactor(
                        "batched divisor roots without a step record cannot be "
                        "transported", step_idx,
                    )
                theta_group_images.append(psi(result.target.cl.element(record.cls_coords)))
        res_stage = replay_tower(res_stage, (entry,))
        try:
            GroupHomomorphism(res_stage.pic, cand_pic, list(theta_group_images))
        except InputDataError as exc:
            return NoFactor(f"grading map does not extend: {exc}", step_idx)

    # generator-image compatibility pins the unit variables
    for name, _deg in result.target.ring.generators:
        res_img = result.images[name]
        cand_img = cand_ring.normal_form(candidate.images[name])
        if res_img.is_zero() != cand_img.is_zero():
            return NoFactor(f"images of {name} disagree about vanishing")
        if res_img.is_zero():
            continue
        st = theta_sym(res_img)
        if st is None:
            return NoFactor(f"cannot transport the image of {name}")
        lhs = cand_ring.normal_form(st.element.scale(st.const))
        if lhs.is_zero():
            return NoFactor(f"transported image of {name} vanishes unexpectedly")
        ratio = _unit_ratio(cand_ring, lhs, cand_img)
        if ratio is None:
            return NoFactor(f"images of {name} differ beyond a scalar unit")
        k = ratio.as_root_of_unity()
        if k is None:
            return NoFactor(f"images of {name} differ by a non-root-of-unity scalar")
        equations.append((tuple(st.varvec), k % N))

    xs = solve_affine_mod_n([list(r) for r, _ in equations],
                            [b for _, b in equations], nvars_total, N)
    if xs is None:
        return NoFactor("unit constraints for the factoring map are unsolvable")

    ring_images: Dict[str, HomogeneousElement] = {}
    zeta = CycScalar.zeta(cand_ring.scalar_order)
    for name, st in sym.items():
        exp = sum(c * x for c, x in zip(st.varvec, xs)) % N if nvars_total else 0
        ring_images[name] = cand_ring.normal_form(
            st.element.scale(st.const * (zeta ** exp))
        )
    try:
        theta_group = GroupHomomorphism(result.stack.pic, cand_pic, theta_group_images)
    except InputDataError as exc:
        return NoFactor(f"grading map is ill defined: {exc}")

    # final compatibility: theta o (result lift) must equal the candidate lift
    for pg_img_res, pg_img_cand in zip(result.group_map.images, candidate.group_map.images):
        if not (theta_group(pg_img_res) == pg_img_cand):
            return NoFactor(
                "group maps are incompatible: the candidate's class-group map "
                "does not factor through the computed lift"
            )
    for name, _deg in result.target.ring.generators:
        res_img = result.images[name]
        cand_img = candidate.images[name]
        transported = map_element(ring_images, cand_ring, res_img)
        if not cand_ring.elements_equal(transported, cand_img):
            return NoFactor(f"ring images are incompatible at generator {name}")
    for rule in result.stack.cox_ring.rules:
        lhs = _map_monomial(ring_images, cand_ring, rule.lhs)
        rhs = map_element(ring_images, cand_ring, rule.rhs)
        if not cand_ring.elements_equal(lhs, rhs):
            return NoFactor(f"result ring relation {rule.key()} breaks in the candidate")
    return Theta(ring_images, theta_group)


def _unit_ratio(ring: GradedRing, a: HomogeneousElement,
                b: HomogeneousElement) -> Optional[CycScalar]:
    """Scalar c with c*a = b modulo the rules, or None."""
    a = ring.normal_form(a)
    b = ring.normal_form(b)
    if a.is_zero() or b.is_zero():
        return None
    ca, ma = a.leading()
    cb, mb = b.leading()
    if ma != mb:
        return None
    ratio = cb * ca.inverse()
    if ring.elements_equal(a.scale(ratio), b):
        return ratio
    return None


def _find_root_monomial(ring: GradedRing, target: HomogeneousElement, order: int,
                        bound_factor: int):
    """Smallest monomial m (graded lex) with m^order = sigma * target; returns
    (element of m, sigma) or None."""
    target = ring.normal_form(target)
    if target.is_zero():
        return None
    tdeg = max((m.total_degree() for _c, m in target.terms), default=1)
    bound = max(1, tdeg) * max(1, bound_factor)
    names = [n for n, _ in ring.generators]
    for total in range(1, bound + 1):
        for exps in _exponent_vectors(len(names), total):
            mono = Monomial(zip(names, exps))
            el = HomogeneousElement.monomial(ring.scalar_order, mono)
            powered = ring.normal_form(el ** order)
            ratio = _unit_ratio(ring, target, powered)
            if ratio is not None:
                return el, ratio
    return None


def _exponent_vectors(n: int, total: int):
    if n == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _exponent_vectors(n - 1, total - first):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# Decomposition of a stack into roots over its own canonical stack


def decompose_as_roots(stack: MdStackData,
                       options: LiftOptions = LiftOptions()) -> CoxLiftResult:
    """Present a stack as a root tower over the canonical stack of its coarse
    space by lifting the identity map through the engine."""
    coarse = stack.coarse
    if coarse is None:
        raise InputDataError("decomposition needs coarse base data on the stack")
    target = TargetData(
        cl=stack.pic,
        pic_gens=tuple(coarse.inclusion.images),
        ring=stack.cox_ring,
        irrelevant=stack.irrelevant_gens,
    )
    source = canonical_stack(coarse.ring, coarse.irrelevant)
    coarse_names = set(coarse.ring.gen_degrees)
    images: Dict[Monomial, HomogeneousElement] = {}
    for mono in pic_level_generators(target, target.pic_gens):
        img = stack.cox_ring.normal_form(
            HomogeneousElement.monomial(stack.cox_ring.scalar_order, mono)
        )
        if not img.support() <= coarse_names:
            raise InputDataError(
                f"monomial {mono.key()} does not normalize into the coarse subring"
            )
        images[mono] = img
        if not img.is_zero():
            want = stack.cox_ring.monomial_degree(mono)
            got = coarse.inclusion(coarse.ring.degree_of(img))
            if not (got == want):
                raise InputDataError(
                    f"coarse inclusion is degree-inconsistent at {mono.key()}"
                )
    base = BaseMorphism(
        images=images,
        group_images=tuple(
            coarse.group.element(row) for row in _identity_rows(coarse.group.ambient_rank)
        ),
    )
    result = run_cox_lift(target, source, base, options)
    checks = list(result.verification.checks)
    same_group = result.stack.pic == stack.pic
    orig_orders = sorted(
        element_order(stack.pic, d) or 0 for _n, d in stack.cox_ring.generators
    )
    new_orders = sorted(
        element_order(result.stack.pic, d) or 0 for _n, d in result.stack.cox_ring.generators
    )
    ok = (
        same_group
        and len(stack.cox_ring.generators) == len(result.stack.cox_ring.generators)
        and orig_orders == new_orders
    )
    checks.append(
        VerificationCheck(
            "reconstruction",
            ok,
            "replayed stack matches the input (canonical group and degree orders)"
            if ok
            else "replayed stack differs from the input",
        )
    )
    return CoxLiftResult(
        target=result.target,
        base=result.base,
        source_stack=result.source_stack,
        stack=result.stack,
        images=result.images,
        group_map=result.group_map,
        table=result.table,
        steps=result.steps,
        verification=VerificationReport(tuple(checks)),
    )
