from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coxlift.abgroup import FgAbelianGroup
from coxlift.cyclo import CycOrder, CycScalar
from coxlift.errors import (
    FactorizationOracleRequired,
    InputDataError,
    NotHomogeneousError,
    RewriteDivergedError,
)
from coxlift.gring import (
    Factorization,
    GradedRing,
    HomogeneousElement,
    Monomial,
    RewriteRule,
)

N2 = CycOrder(2)
N3 = CycOrder(3)


def ring_kxy_z2():
    cl = FgAbelianGroup(1, [[2]])
    return GradedRing(
        [("x", cl.element([1])), ("y", cl.element([1]))], cl, N2
    )


def ring_kt_with_root():
    """k[t, z] with z^2 -> t (t marked as z^2 by declared data)."""
    cl = FgAbelianGroup(1, [[2]])
    gens = [("t", cl.element([0])), ("z", cl.element([1]))]
    z = HomogeneousElement.monomial(N2, Monomial.gen("z"))
    t = HomogeneousElement.monomial(N2, Monomial.gen("t"))
    return GradedRing(
        gens,
        cl,
        N2,
        rules=[RewriteRule(Monomial.gen("z", 2), t)],
        declared_factorizations={t.key(): Factorization(CycScalar.one(N2), ((z, 2),))},
    )


def ring_mu3_rooted(k: int = 0):
    """k[u,v,w,z1,z2] with v^3 -> uw, z1^3 -> u, z2^3 -> w; no elimination rule."""
    cl = FgAbelianGroup(0, [])
    gens = [(n, cl.zero()) for n in ("u", "v", "w", "z1", "z2")]
    tmp = GradedRing(gens, cl, N3)
    rules = [
        RewriteRule(Monomial.gen("v", 3), tmp.mono({"u": 1, "w": 1})),
        RewriteRule(Monomial.gen("z1", 3), tmp.gen("u")),
        RewriteRule(Monomial.gen("z2", 3), tmp.gen("w")),
    ]
    return GradedRing(gens, cl, N3, rules=rules, irreducibles=["u", "w"])


def test_degree_of_examples():
    R = ring_kxy_z2()
    e = R.mono({"x": 2, "y": 1})
    assert R.degree_of(e) == R.grading_group.element([1])
    assert R.degree_of(R.one()) == R.grading_group.zero()

    cl3 = FgAbelianGroup(1, [[3]])
    R3 = GradedRing([("x", cl3.element([1])), ("y", cl3.element([2]))], cl3, N3)
    assert R3.degree_of(R3.mono({"x": 1, "y": 2})) == cl3.element([2])


def test_degree_of_rejects_mixed_terms():
    R = ring_kxy_z2()
    mixed = R.gen("x") + R.mono({"x": 2})
    with pytest.raises(NotHomogeneousError):
        R.degree_of(mixed)


def test_normal_form_examples():
    R = ring_kt_with_root()
    z3 = R.mono({"z": 3})
    assert R.normal_form(z3) == R.mono({"t": 1, "z": 1})
    untouched = R.mono({"t": 2})
    assert R.normal_form(untouched) == untouched

    cl = FgAbelianGroup(0, [])
    gens = [(n, cl.zero()) for n in ("u", "v", "w")]
    tmp = GradedRing(gens, cl, N3)
    R2 = GradedRing(
        gens, cl, N3,
        rules=[RewriteRule(Monomial.gen("v", 3), tmp.mono({"u": 1, "w": 1}))],
    )
    diff = R2.mono({"v": 3}) - R2.mono({"u": 1, "w": 1})
    assert R2.normal_form(diff).is_zero()


def test_normal_form_idempotent_on_samples():
    R = ring_kt_with_root()
    for exps in [{"z": 5}, {"t": 1, "z": 4}, {"t": 2}, {"z": 1}]:
        e = R.mono(exps) + R.mono({"t": 1}).scale(CycScalar.from_rational(N2, 2))
        once = R.normal_form(e)
        assert R.normal_form(once) == once


def test_rewrite_rule_must_be_degree_preserving():
    cl = FgAbelianGroup(1, [[2]])
    gens = [("x", cl.element([1])), ("y", cl.element([0]))]
    tmp = GradedRing(gens, cl, N2)
    with pytest.raises(InputDataError):
        GradedRing(gens, cl, N2, rules=[RewriteRule(Monomial.gen("x", 1), tmp.gen("y"))])


def test_rule_orientation_failure_is_reported():
    cl = FgAbelianGroup(0, [])
    gens = [("a", cl.zero()), ("b", cl.zero())]
    tmp = GradedRing(gens, cl, N2)
    # a -> b and b -> a cannot both decrease
    with pytest.raises(InputDataError):
        GradedRing(
            gens, cl, N2,
            rules=[
                RewriteRule(Monomial.gen("a"), tmp.gen("b")),
                RewriteRule(Monomial.gen("b"), tmp.gen("a")),
            ],
        )


def test_h_factorize_examples():
    cl0 = FgAbelianGroup(0, [])
    R = GradedRing([("t", cl0.zero())], cl0, N2)
    fact = R.h_factorize(R.gen("t"))
    assert fact.unit == CycScalar.one(N2)
    assert fact.factor_keys() == [("1*t", 1)]

    R3 = ring_mu3_rooted()
    fu = R3.h_factorize(R3.gen("u"))
    assert fu.factor_keys() == [("1*u", 1)]

    Rxy = ring_kxy_z2()
    f = Rxy.h_factorize(Rxy.mono({"x": 2, "y": 1}, CycScalar.from_rational(N2, 3)))
    assert f.unit == CycScalar.from_rational(N2, 3)
    assert f.factor_keys() == [("1*x", 2), ("1*y", 1)]


def test_h_factorize_through_declared_root_data():
    R = ring_kt_with_root()
    fact = R.h_factorize(R.gen("t"))
    assert fact.factor_keys() == [("1*z", 2)]


def test_h_factorize_univariate_rational_roots():
    cl0 = FgAbelianGroup(0, [])
    R = GradedRing([("t", cl0.zero())], cl0, N2)
    e = R.mono({"t": 2}) - R.one()  # t^2 - 1
    fact = R.h_factorize(e)
    assert len(fact.factors) == 2
    ok, p, _ = R.verify_factorization(e, fact)
    assert ok and p == 1


def test_h_factorize_oracle_required():
    cl0 = FgAbelianGroup(0, [])
    R = GradedRing([("a", cl0.zero()), ("b", cl0.zero())], cl0, N2)
    e = R.mono({"a": 1}) + R.mono({"b": 1})
    with pytest.raises(FactorizationOracleRequired):
        R.h_factorize(e)


def test_verify_factorization_examples():
    cl0 = FgAbelianGroup(0, [])
    R = GradedRing([("t", cl0.zero())], cl0, N2)
    t = R.gen("t")
    ok, p, _ = R.verify_factorization(t, Factorization(CycScalar.one(N2), ((t, 1),)))
    assert ok and p == 1

    R3 = ring_mu3_rooted()
    v = R3.gen("v")
    z1z2 = Factorization(
        CycScalar.one(N3), ((R3.gen("z1"), 1), (R3.gen("z2"), 1))
    )
    ok, p, _ = R3.verify_factorization(v, z1z2)
    assert ok and p == 3  # only the cubes agree

    # any third root of unity passes the cube comparison: the exponent is data
    for k in range(3):
        fact = Factorization(CycScalar.zeta(N3, k), ((R3.gen("z1"), 1), (R3.gen("z2"), 1)))
        ok, p, _ = R3.verify_factorization(v, fact)
        assert ok

    Rt = ring_kt_with_root()
    bad = Factorization(CycScalar.one(N2), ((Rt.gen("z"), 1),))
    ok, _, diag = Rt.verify_factorization(Rt.gen("t"), bad)
    assert not ok and "does not reproduce" in diag


def test_verify_factorization_rejects_wrong_relation():
    # declared v = z1*z2 against v^3 -> u*w^2 fails the cube comparison
    cl = FgAbelianGroup(0, [])
    gens = [(n, cl.zero()) for n in ("u", "v", "w", "z1", "z2")]
    tmp = GradedRing(gens, cl, N3)
    rules = [
        RewriteRule(Monomial.gen("v", 3), tmp.mono({"u": 1, "w": 2})),
        RewriteRule(Monomial.gen("z1", 3), tmp.gen("u")),
        RewriteRule(Monomial.gen("z2", 3), tmp.gen("w")),
    ]
    R = GradedRing(gens, cl, N3, rules=rules, irreducibles=["u", "w"])
    fact = Factorization(CycScalar.one(N3), ((R.gen("z1"), 1), (R.gen("z2"), 1)))
    ok, _, _ = R.verify_factorization(R.gen("v"), fact)
    assert not ok


def test_monomial_factorizations_are_exact():
    R = ring_kxy_z2()
    for exps in [{"x": 1}, {"x": 3, "y": 2}, {"y": 4}]:
        fact = R.h_factorize(R.mono(exps))
        got = {}
        for f, e in fact.factors:
            (name, ex) = f.terms[0][1].pairs[0]
            got[name] = got.get(name, 0) + e * ex
        assert got == exps


def test_h_factorize_roundtrip_property():
    R = ring_kt_with_root()
    samples = [
        R.mono({"z": 3}),
        R.mono({"t": 2, "z": 1}, CycScalar.from_rational(N2, Fraction(-5, 3))),
        R.mono({"t": 1}),
    ]
    for e in samples:
        fact = R.h_factorize(e)
        ok, _, diag = R.verify_factorization(e, fact)
        assert ok, diag


def test_degree_additivity_on_products():
    R = ring_kxy_z2()
    a = R.mono({"x": 1})
    b = R.mono({"x": 1, "y": 2})
    assert R.degree_of(a * b) == R.degree_of(a) + R.degree_of(b)


def test_step_cap_divergence_reported():
    # x -> x*y is degree-compatible with deg y = 0 and never terminates;
    # the weight check rejects it at construction time
    cl = FgAbelianGroup(1, [[2]])
    gens = [("x", cl.element([1])), ("y", cl.element([0]))]
    tmp = GradedRing(gens, cl, N2)
    with pytest.raises(InputDataError):
        GradedRing(
            gens, cl, N2,
            rules=[RewriteRule(Monomial.gen("x"), tmp.mono({"x": 1, "y": 1}))],
        )


def test_fresh_root_uniqueness_spotcheck():
    """In k[x,y][z]/(z^2 - x) every bounded product of irreducibles has a
    single factorization class."""
    from itertools import combinations_with_replacement

    cl = FgAbelianGroup(0, [])
    gens = [("x", cl.zero()), ("y", cl.zero())]
    base = GradedRing(gens, cl, N2)
    x = base.gen("x")
    z = HomogeneousElement.monomial(N2, Monomial.gen("z"))
    R = GradedRing(
        gens + [("z", cl.zero())],
        cl,
        N2,
        rules=[RewriteRule(Monomial.gen("z", 2), x)],
        declared_factorizations={x.key(): Factorization(CycScalar.one(N2), ((z, 2),))},
    )
    irreducible = [R.gen("y"), R.gen("z")]
    seen = {}
    for size in range(1, 4):
        for combo in combinations_with_replacement(range(2), size):
            prod = R.one()
            for i in combo:
                prod = prod * irreducible[i]
            key = R.normal_form(prod).key()
            assert seen.setdefault(key, combo) == combo
