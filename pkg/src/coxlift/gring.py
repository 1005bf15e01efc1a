"""Graded rings with named generators, binomial rewriting and h-factorization.

A ring is a list of named generators with degrees in an abelian grading
group, together with oriented rewrite rules (monomial left-hand sides)
and factorization data: generator names marked irreducible and declared
factorizations for elements no backend can split.  Elements are term
lists over exact cyclotomic scalars; monomials are keyed by generator
name so they survive ring extensions unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

from .abgroup import FgAbelianGroup, GroupElement
from .cyclo import CycOrder, CycScalar
from .errors import (
    FactorizationOracleRequired,
    InputDataError,
    InternalInvariantError,
    NotHomogeneousError,
    RewriteDivergedError,
)


class Monomial:
    """Finitely supported exponent map over generator names."""

    __slots__ = ("pairs",)

    def __init__(self, exps: Dict[str, int] | Iterable[Tuple[str, int]] = ()):
        items = exps.items() if isinstance(exps, dict) else exps
        pairs = tuple(sorted((str(n), int(e)) for n, e in items if int(e) != 0))
        if any(e < 0 for _, e in pairs):
            raise InputDataError("monomial exponents must be nonnegative")
        object.__setattr__(self, "pairs", pairs)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("Monomial is immutable")

    @classmethod
    def one(cls) -> "Monomial":
        return cls(())

    @classmethod
    def gen(cls, name: str, exp: int = 1) -> "Monomial":
        return cls({name: exp})

    def exps(self) -> dict:
        return dict(self.pairs)

    def exp(self, name: str) -> int:
        return dict(self.pairs).get(name, 0)

    def names(self):
        return [n for n, _ in self.pairs]

    def is_one(self) -> bool:
        return not self.pairs

    def total_degree(self) -> int:
        return sum(e for _, e in self.pairs)

    def __mul__(self, other: "Monomial") -> "Monomial":
        d = dict(self.pairs)
        for n, e in other.pairs:
            d[n] = d.get(n, 0) + e
        return Monomial(d)

    def __pow__(self, k: int) -> "Monomial":
        if k < 0:
            raise InputDataError("negative monomial power")
        return Monomial({n: e * k for n, e in self.pairs})

    def divides(self, other: "Monomial") -> bool:
        o = dict(other.pairs)
        return all(o.get(n, 0) >= e for n, e in self.pairs)

    def div(self, other: "Monomial") -> "Monomial":
        if not other.divides(self):
            raise InputDataError("monomial division is not exact")
        d = dict(self.pairs)
        for n, e in other.pairs:
            d[n] -= e
        return Monomial(d)

    def sort_key(self):
        return (self.total_degree(), self.pairs)

    def key(self) -> str:
        if not self.pairs:
            return "1"
        return "*".join(n if e == 1 else f"{n}^{e}" for n, e in self.pairs)

    def __eq__(self, other):
        return isinstance(other, Monomial) and self.pairs == other.pairs

    def __hash__(self):
        return hash(self.pairs)

    def __repr__(self):
        return f"Monomial({self.key()})"


class HomogeneousElement:
    """Term list (scalar, monomial) in canonical order; empty list is zero."""

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[Tuple[CycScalar, Monomial]]):
        merged: Dict[Monomial, CycScalar] = {}
        for c, m in terms:
            merged[m] = merged[m] + c if m in merged else c
        cleaned = [(c, m) for m, c in merged.items() if not c.is_zero()]
        cleaned.sort(key=lambda t: t[1].sort_key())
        object.__setattr__(self, "terms", tuple(cleaned))

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("HomogeneousElement is immutable")

    @classmethod
    def zero(cls) -> "HomogeneousElement":
        return cls(())

    @classmethod
    def monomial(cls, order: CycOrder, m: Monomial, coeff=None) -> "HomogeneousElement":
        c = coeff if coeff is not None else CycScalar.one(order)
        return cls([(c, m)])

    def is_zero(self) -> bool:
        return not self.terms

    def leading(self) -> Tuple[CycScalar, Monomial]:
        if not self.terms:
            raise InputDataError("zero element has no leading term")
        return self.terms[-1]

    def scale(self, c: CycScalar) -> "HomogeneousElement":
        return HomogeneousElement([(c * a, m) for a, m in self.terms])

    def __add__(self, other):
        return HomogeneousElement(self.terms + other.terms)

    def __sub__(self, other):
        return HomogeneousElement(self.terms + tuple((-c, m) for c, m in other.terms))

    def __neg__(self):
        return HomogeneousElement(tuple((-c, m) for c, m in self.terms))

    def __mul__(self, other):
        out = []
        for c1, m1 in self.terms:
            for c2, m2 in other.terms:
                out.append((c1 * c2, m1 * m2))
        return HomogeneousElement(out)

    def __pow__(self, k: int):
        if k < 0:
            raise InputDataError("negative element power")
        if not self.terms and k == 0:
            raise InputDataError("0^0 is undefined here")
        acc = None
        base = self
        while k:
            if k & 1:
                acc = base if acc is None else acc * base
            k >>= 1
            if k:
                base = base * base
        if acc is None:
            one = CycScalar.one(self.terms[0][0].order) if self.terms else None
            if one is None:
                raise InputDataError("cannot build 1 without a scalar order")
            return HomogeneousElement([(one, Monomial.one())])
        return acc

    def support(self):
        names = set()
        for _, m in self.terms:
            names.update(m.names())
        return names

    def key(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{c.as_string()}*{m.key()}" for c, m in self.terms)

    def __eq__(self, other):
        return isinstance(other, HomogeneousElement) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __repr__(self):
        return f"El({self.key()})"


@dataclass(frozen=True)
class RewriteRule:
    """Oriented rule lhs -> rhs; lhs is a monomial, both sides equal degree."""

    lhs: Monomial
    rhs: HomogeneousElement

    def key(self) -> str:
        return f"{self.lhs.key()} -> {self.rhs.key()}"


@dataclass(frozen=True)
class Factorization:
    """unit * prod(factor^exp); factors are h-irreducible elements."""

    unit: CycScalar
    factors: Tuple[Tuple[HomogeneousElement, int], ...]

    def expand(self) -> HomogeneousElement:
        acc = HomogeneousElement([(self.unit, Monomial.one())])
        for f, e in self.factors:
            acc = acc * (f ** e)
        return acc

    def factor_keys(self):
        return sorted((f.key(), e) for f, e in self.factors)


def _derive_weights(gen_names: Sequence[str], rules: Sequence[RewriteRule]):
    """Termination weights: the head generator of each rule outweighs its rhs.

    A rule g^n -> rhs with g absent from rhs determines w(g); generators
    without a defining rule get weight 1.  Fails when no assignment makes
    every rule strictly decreasing.
    """
    weights = {n: 1 for n in gen_names}
    heads = []
    for r in rules:
        names = r.lhs.names()
        rhs_support = set()
        for _, m in r.rhs.terms:
            rhs_support.update(m.names())
        head = None
        if len(names) == 1 and names[0] not in rhs_support:
            head = names[0]
        heads.append(head)
    for _ in range(len(rules) + 2):
        changed = False
        for r, head in zip(rules, heads):
            if head is None:
                continue
            n = r.lhs.exp(head)
            rhs_w = max(
                (sum(e * weights.get(nm, 1) for nm, e in m.pairs) for _, m in r.rhs.terms),
                default=0,
            )
            need = rhs_w // n + 1
            if weights[head] < need:
                weights[head] = need
                changed = True
        if not changed:
            break

    def wdeg(m: Monomial) -> int:
        return sum(e * weights.get(n, 1) for n, e in m.pairs)

    for r in rules:
        lw = wdeg(r.lhs)
        for _, m in r.rhs.terms:
            if wdeg(m) >= lw:
                raise InputDataError(
                    f"rewrite rule {r.key()} is not strictly decreasing; "
                    "no termination order found"
                )
    return weights


class GradedRing:
    """Named generators graded by an abelian group, plus rewrite and factor data."""

    def __init__(
        self,
        generators: Sequence[Tuple[str, GroupElement]],
        grading_group: FgAbelianGroup,
        scalar_order: CycOrder,
        rules: Sequence[RewriteRule] = (),
        irreducibles: Iterable[str] = (),
        declared_factorizations: Optional[Dict[str, Factorization]] = None,
        step_cap: int = 10000,
    ):
        names = [n for n, _ in generators]
        if len(set(names)) != len(names):
            raise InputDataError("duplicate generator names")
        for n, d in generators:
            if not d.group.same_presentation(grading_group):
                raise InputDataError(f"degree of generator {n} lies outside the grading group")
        self.generators = tuple((str(n), d) for n, d in generators)
        self.gen_degrees = {n: d for n, d in self.generators}
        self.grading_group = grading_group
        self.scalar_order = scalar_order
        self.rules = tuple(rules)
        self.irreducibles = frozenset(irreducibles)
        self.declared_factorizations = dict(declared_factorizations or {})
        self.step_cap = int(step_cap)
        unknown = self.irreducibles - set(names)
        if unknown:
            raise InputDataError(f"irreducible marks for unknown generators: {sorted(unknown)}")
        for r in self.rules:
            self._check_rule(r)
        self.weights = _derive_weights(names, self.rules)

    # -- constructors -----------------------------------------------------

    def one(self) -> HomogeneousElement:
        return HomogeneousElement([(CycScalar.one(self.scalar_order), Monomial.one())])

    def const(self, scalar: CycScalar) -> HomogeneousElement:
        return HomogeneousElement([(scalar, Monomial.one())])

    def gen(self, name: str) -> HomogeneousElement:
        if name not in self.gen_degrees:
            raise InputDataError(f"unknown generator {name!r}")
        return HomogeneousElement.monomial(self.scalar_order, Monomial.gen(name))

    def mono(self, exps: Dict[str, int], coeff=None) -> HomogeneousElement:
        m = Monomial(exps)
        self._check_names(m)
        return HomogeneousElement.monomial(self.scalar_order, m, coeff)

    def _check_names(self, m: Monomial):
        for n in m.names():
            if n not in self.gen_degrees:
                raise InputDataError(f"unknown generator {n!r} in monomial {m.key()}")

    def _check_rule(self, r: RewriteRule):
        self._check_names(r.lhs)
        lhs_el = HomogeneousElement.monomial(self.scalar_order, r.lhs)
        d1 = self.degree_of(lhs_el)
        if not r.rhs.is_zero():
            d2 = self.degree_of(r.rhs)
            if not (d1 == d2):
                raise InputDataError(f"rule {r.key()} is not degree-preserving")

    # -- graded structure ---------------------------------------------------

    def monomial_degree(self, m: Monomial) -> GroupElement:
        self._check_names(m)
        acc = self.grading_group.zero()
        for n, e in m.pairs:
            acc = acc + e * self.gen_degrees[n]
        return acc

    def degree_of(self, e: HomogeneousElement) -> GroupElement:
        """Common degree of all terms; raises on mixed-degree term lists."""
        if e.is_zero():
            raise NotHomogeneousError("zero element has no degree")
        degs = [self.monomial_degree(m) for _, m in e.terms]
        for d in degs[1:]:
            if not (d == degs[0]):
                raise NotHomogeneousError(f"element {e.key()} is not homogeneous")
        return degs[0]

    def is_homogeneous(self, e: HomogeneousElement) -> bool:
        if e.is_zero():
            return True
        try:
            self.degree_of(e)
            return True
        except NotHomogeneousError:
            return False

    # -- rewriting ------------------------------------------------------------

    def normal_form(self, e: HomogeneousElement) -> HomogeneousElement:
        """Apply rewrite rules to a fixpoint (first rule, first reducible term)."""
        steps = 0
        trace = []
        cur = e
        while True:
            hit = None
            for c, m in cur.terms:
                for r in self.rules:
                    if r.lhs.divides(m):
                        hit = (c, m, r)
                        break
                if hit:
                    break
            if hit is None:
                return cur
            c, m, r = hit
            steps += 1
            if steps > self.step_cap:
                raise RewriteDivergedError(
                    f"rewriting diverged after {self.step_cap} steps", trace[-10:]
                )
            trace.append(f"{m.key()} by {r.key()}")
            cof = m.div(r.lhs)
            replacement = r.rhs.scale(c) * HomogeneousElement.monomial(self.scalar_order, cof)
            cur = HomogeneousElement(
                tuple(t for t in cur.terms if t != (c, m)) + replacement.terms
            )

    def elements_equal(self, a: HomogeneousElement, b: HomogeneousElement) -> bool:
        return self.normal_form(a - b).is_zero()

    # -- factorization ----------------------------------------------------------

    def _declared_for(self, e: HomogeneousElement) -> Optional[Factorization]:
        return self.declared_factorizations.get(e.key())

    def h_factorize(self, e: HomogeneousElement) -> Factorization:
        """Factor into h-irreducibles via the backend cascade.

        Backends: declared factorizations, single-term splitting into
        generator powers, and univariate splitting by rational roots plus
        square-free parts (total degree at most 8).  Factors are
        normalized with leading coefficient one; the residual scalar
        lives in the unit.
        """
        e = self.normal_form(e)
        if e.is_zero():
            raise InputDataError("cannot factor zero")
        self.degree_of(e)
        lead_c, _ = e.leading()
        unit = lead_c
        core = e.scale(lead_c.inverse())
        factors: Dict[str, Tuple[HomogeneousElement, int]] = {}

        def settle(f, mult):
            key = f.key()
            if key in factors:
                g, k = factors[key]
                factors[key] = (g, k + mult)
            else:
                factors[key] = (f, mult)

        queue = [(core, 1)]
        guard = 0
        while queue:
            guard += 1
            if guard > 1000:
                raise InputDataError(
                    "factor refinement did not terminate; declared factorizations loop"
                )
            f, mult = queue.pop()
            if f.is_zero():
                raise InternalInvariantError("zero slipped into factor refinement")
            lc, _ = f.leading()
            if not (lc == CycScalar.one(self.scalar_order)):
                unit = unit * (lc ** mult)
                f = f.scale(lc.inverse())
            if len(f.terms) == 1 and f.terms[0][1].is_one():
                continue  # pure scalar, absorbed into the unit
            decl = self._declared_for(f)
            if decl is not None and not self._is_trivial_declaration(f, decl):
                unit = unit * (decl.unit ** mult)
                for g, k in decl.factors:
                    queue.append((g, k * mult))
                continue
            if len(f.terms) == 1:
                _, m = f.terms[0]
                if len(m.pairs) == 1 and m.pairs[0][1] == 1:
                    settle(f, mult)
                    continue
                for name, exp in m.pairs:
                    queue.append((self.gen(name), exp * mult))
                continue
            support = f.support()
            if len(support) == 1 and max(m.total_degree() for _, m in f.terms) == 1:
                settle(f, mult)  # linear in one generator: irreducible
                continue
            split = self._univariate_split(f)
            if split is None:
                raise FactorizationOracleRequired(
                    f"factorization oracle required for {f.key()}"
                )
            u2, parts = split
            unit = unit * (u2 ** mult)
            for g, k in parts:
                queue.append((g, k * mult))
        fact = Factorization(unit, tuple(sorted(factors.values(), key=lambda t: t[0].key())))
        return fact

    def _is_trivial_declaration(self, f: HomogeneousElement, decl: Factorization) -> bool:
        # a declaration of f as itself must not loop the refinement
        return (
            len(decl.factors) == 1
            and decl.factors[0][1] == 1
            and decl.factors[0][0] == f
            and decl.unit == CycScalar.one(self.scalar_order)
        )

    def _poly_from_coeffs(self, name: str, coeffs) -> HomogeneousElement:
        terms = []
        for i, c in enumerate(coeffs):
            if not c.is_zero():
                terms.append((c, Monomial.gen(name, i) if i else Monomial.one()))
        return HomogeneousElement(terms)

    @staticmethod
    def _poly_trim(coeffs):
        coeffs = list(coeffs)
        while coeffs and coeffs[-1].is_zero():
            coeffs.pop()
        return coeffs

    def _poly_divmod(self, a, b):
        a = self._poly_trim(a)
        b = self._poly_trim(b)
        if not b:
            raise ZeroDivisionError("polynomial division by zero")
        q = [CycScalar.zero(self.scalar_order) for _ in range(max(0, len(a) - len(b) + 1))]
        inv = b[-1].inverse()
        while len(a) >= len(b):
            coef = a[-1] * inv
            pos = len(a) - len(b)
            q[pos] = coef
            for i, y in enumerate(b):
                a[pos + i] = a[pos + i] - coef * y
            a = self._poly_trim(a)
            if not a:
                break
        return q, a

    def _poly_gcd(self, a, b):
        a = self._poly_trim(a)
        b = self._poly_trim(b)
        while b:
            _, r = self._poly_divmod(a, b)
            a, b = b, r
        if a:
            inv = a[-1].inverse()
            a = [c * inv for c in a]
        return a

    def _univariate_split(self, f: HomogeneousElement):
        """Split a polynomial in a single generator; None when out of scope."""
        names = f.support()
        if len(names) != 1:
            return None
        (name,) = names
        deg = max(m.total_degree() for _, m in f.terms)
        if deg > 8:
            return None
        coeffs = [CycScalar.zero(self.scalar_order) for _ in range(deg + 1)]
        for c, m in f.terms:
            coeffs[m.total_degree()] = c
        parts = []
        unit = CycScalar.one(self.scalar_order)
        # strip the monomial content first
        low = next(i for i, c in enumerate(coeffs) if not c.is_zero())
        if low:
            parts.append((self.gen(name), low))
            coeffs = coeffs[low:]
        while len(coeffs) > 2 and all(c.is_rational() for c in coeffs):
            root = self._rational_root(coeffs)
            if root is None:
                break
            coeffs = self._deflate(coeffs, root)
            lin = HomogeneousElement(
                [
                    (-root, Monomial.one()),
                    (CycScalar.one(self.scalar_order), Monomial.gen(name)),
                ]
            )
            parts.append((lin, 1))
        if len(coeffs) == 2:
            lead = coeffs[1]
            unit = unit * lead
            const = coeffs[0] * lead.inverse()
            lin = HomogeneousElement(
                [(const, Monomial.one()), (CycScalar.one(self.scalar_order), Monomial.gen(name))]
            )
            parts.append((lin, 1))
            return unit, parts
        if len(coeffs) == 1:
            unit = unit * coeffs[0]
            return unit, parts
        # square-free split: gcd with the derivative peels repeated factors
        deriv = [
            CycScalar.from_rational(self.scalar_order, i) * coeffs[i]
            for i in range(1, len(coeffs))
        ]
        g = self._poly_gcd(coeffs, deriv)
        if 1 < len(g) < len(coeffs):
            q, r = self._poly_divmod(coeffs, g)
            if self._poly_trim(r):
                raise InternalInvariantError("square-free division left a remainder")
            parts.append((self._poly_from_coeffs(name, g), 1))
            parts.append((self._poly_from_coeffs(name, q), 1))
            return unit, parts
        if parts and len(coeffs) > 2:
            # partial progress: keep the residual for declared-data lookup
            residual = self._poly_from_coeffs(name, coeffs)
            if self._declared_for(residual) is not None:
                parts.append((residual, 1))
                return unit, parts
        return None

    def _rational_root(self, coeffs):
        from fractions import Fraction

        lead = coeffs[-1].rational_value()
        const = coeffs[0].rational_value()
        if const == 0:
            return None  # content is stripped before root extraction

        def divisors(n):
            n = abs(n)
            out = [d for d in range(1, n + 1) if n % d == 0]
            return out or [1]

        for p in divisors(const.numerator * const.denominator or 1):
            for q in divisors(lead.numerator * lead.denominator or 1):
                for sign in (1, -1):
                    cand = Fraction(sign * p, q)
                    val = Fraction(0)
                    for c in reversed(coeffs):
                        val = val * cand + c.rational_value()
                    if val == 0:
                        return CycScalar.from_rational(self.scalar_order, cand)
        return None

    @staticmethod
    def _deflate(coeffs, root: CycScalar):
        # synthetic division by (x - root)
        out = [None] * (len(coeffs) - 1)
        acc = coeffs[-1]
        for i in range(len(coeffs) - 2, -1, -1):
            out[i] = acc
            acc = coeffs[i] + acc * root
        if not acc.is_zero():
            raise InternalInvariantError("deflation by a non-root")
        return out

    def is_h_irreducible(self, e: HomogeneousElement) -> bool:
        e = self.normal_form(e)
        if e.is_zero():
            return False
        fact = self.h_factorize(e)
        return len(fact.factors) == 1 and fact.factors[0][1] == 1

    def verify_factorization(self, e: HomogeneousElement, fact: Factorization):
        """Check that fact multiplies out to e, possibly only after p-th powers.

        Returns (ok, power, diagnostic); power records the exponent at which
        the two sides became comparable (1 for a direct match).
        """
        lhs = self.normal_form(e)
        rhs = self.normal_form(fact.expand())
        if self.normal_form(lhs - rhs).is_zero():
            return True, 1, "direct match"
        candidates = sorted(
            {r.lhs.total_degree() for r in self.rules if r.lhs.total_degree() > 1}
            | {2, 3, 4, 5, 6, 7, 8}
        )
        for p in candidates:
            if self.normal_form(lhs ** p - rhs ** p).is_zero():
                return True, p, f"matched after raising both sides to the power {p}"
        return False, 0, (
            f"product {rhs.key()} does not reproduce {lhs.key()}, even up to powers"
        )

    # -- extension builders -------------------------------------------------

    def with_data(
        self,
        generators=None,
        grading_group=None,
        rules=None,
        irreducibles=None,
        declared_factorizations=None,
    ) -> "GradedRing":
        return GradedRing(
            generators if generators is not None else self.generators,
            grading_group if grading_group is not None else self.grading_group,
            self.scalar_order,
            rules if rules is not None else self.rules,
            irreducibles if irreducibles is not None else self.irreducibles,
            declared_factorizations
            if declared_factorizations is not None
            else self.declared_factorizations,
            self.step_cap,
        )

    def serialize_key(self) -> str:
        gens = ",".join(f"{n}:{list(d.coords)}" for n, d in self.generators)
        rules = ";".join(r.key() for r in self.rules)
        return f"[{gens}][{rules}]"
