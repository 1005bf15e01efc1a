import math
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coxlift.abgroup import (
    FgAbelianGroup,
    GroupHomomorphism,
    IntMatrix,
    element_order,
    kernel_basis_mod_p,
    pushout_root,
    quotient_group,
    smith_normal_form,
    smith_normal_form_full,
    solution_count_mod_p,
    solve_affine_mod_n,
    solve_affine_mod_p,
    solve_linear_over_group,
    subgroup_contains,
)
from coxlift.errors import InputDataError

matrices = st.integers(1, 4).flatmap(
    lambda m: st.integers(1, 4).flatmap(
        lambda n: st.lists(
            st.lists(st.integers(-9, 9), min_size=n, max_size=n),
            min_size=m,
            max_size=m,
        )
    )
)


def test_snf_zero_relation_gives_free_group():
    S, U, V = smith_normal_form(IntMatrix([[0]]))
    assert S.entries == ((0,),)
    assert FgAbelianGroup(1, [[0]]).canonical_form == (1, ())


def test_snf_single_torsion_relation():
    S, _, _ = smith_normal_form(IntMatrix([[2]]))
    assert S.entries == ((2,),)
    assert FgAbelianGroup(1, [[2]]).describe() == "Z/2"


def test_snf_diag_2_3_normalizes_to_1_6():
    M = IntMatrix([[2, 0], [0, 3]])
    S, U, V = smith_normal_form(M)
    assert U.mul(M).mul(V).entries == S.entries
    assert S.diagonal() == (1, 6)


@settings(max_examples=120, deadline=None)
@given(matrices)
def test_snf_roundtrip_and_divisibility(rows):
    M = IntMatrix(rows)
    S, U, V, Ui, Vi = smith_normal_form_full(M)
    assert U.mul(M).mul(V).entries == S.entries
    assert U.mul(Ui).entries == IntMatrix.identity(M.rows).entries
    assert V.mul(Vi).entries == IntMatrix.identity(M.cols).entries
    diag = S.diagonal()
    for a, b in zip(diag, diag[1:]):
        if a:
            assert b % a == 0
        else:
            assert b == 0
    # off-diagonal entries vanish
    for i, row in enumerate(S.entries):
        for j, x in enumerate(row):
            if i != j:
                assert x == 0


def test_element_order_examples():
    Z2 = FgAbelianGroup(1, [[2]])
    assert element_order(Z2, Z2.element([1])) == 2
    Z = FgAbelianGroup(1, [])
    assert element_order(Z, Z.element([0])) == 1
    assert element_order(Z, Z.element([3])) is None
    Z4 = FgAbelianGroup(1, [[4]])
    assert element_order(Z4, Z4.element([2])) == 2


def test_quotient_group_examples():
    Z2 = FgAbelianGroup(1, [[2]])
    Q, _ = quotient_group(Z2, [Z2.element([1])])
    assert Q.canonical_form == (0, ())

    Z4 = FgAbelianGroup(1, [[4]])
    Q, _ = quotient_group(Z4, [Z4.element([2])])
    assert Q.describe() == "Z/2"

    G = FgAbelianGroup(2, [[0, 2]])  # Z + Z/2
    Q, _ = quotient_group(G, [G.element([2, 0])])
    assert Q.canonical_form == (0, (2, 2))


def test_quotient_projection_kills_exactly_the_subgroup():
    G = FgAbelianGroup(2, [[4, 0], [0, 4]])
    gens = [G.element([2, 0]), G.element([0, 2])]
    Q, proj = quotient_group(G, gens)
    subgroup = set()
    for a, b in product(range(2), repeat=2):
        subgroup.add((a * 2 % 4, b * 2 % 4))
    for g in G.elements():
        in_sub = subgroup_contains(G, gens, g)
        assert in_sub == proj(g).is_zero()
        assert in_sub == (tuple(c % 4 for c in g.canonical()) in subgroup)


def test_pushout_examples():
    trivial = FgAbelianGroup(0, [])
    A2, incl, delta = pushout_root(trivial, trivial.zero(), 2)
    assert A2.describe() == "Z/2"
    assert element_order(A2, delta) == 2

    Z6 = FgAbelianGroup(1, [[6]])
    A2, incl, delta = pushout_root(Z6, Z6.element([5]), 1)
    assert A2.canonical_form == Z6.canonical_form
    assert delta == incl(Z6.element([5]))

    Z2 = FgAbelianGroup(1, [[2]])
    A2, incl, delta = pushout_root(Z2, Z2.element([1]), 2)
    assert A2.describe() == "Z/4"
    assert 2 * delta == incl(Z2.element([1]))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.sampled_from([2, 3, 4, 6]), min_size=0, max_size=2),
    st.integers(1, 4),
)
def test_pushout_order_one_is_isomorphic(invs, seed):
    rels = [[invs[i] if i == j else 0 for j in range(len(invs))] for i in range(len(invs))]
    A = FgAbelianGroup(len(invs), rels)
    elems = list(A.elements())
    a = elems[seed % len(elems)]
    A2, incl, delta = pushout_root(A, a, 1)
    assert A2.canonical_form == A.canonical_form
    assert delta == incl(a)


def test_group_order_matches_enumeration():
    for rels, rank in [([[2]], 1), ([[4, 0], [0, 6]], 2), ([[2, 1], [0, 3]], 2)]:
        G = FgAbelianGroup(rank, rels)
        if G.is_finite() and G.order() <= 256:
            assert len(set(G.elements())) == G.order()


def test_homomorphism_rejects_bad_images():
    Z2 = FgAbelianGroup(1, [[2]])
    Z = FgAbelianGroup(1, [])
    with pytest.raises(InputDataError):
        GroupHomomorphism(Z2, Z, [Z.element([1])])  # 2*1 != 0 in Z
    h = GroupHomomorphism(Z2, Z2, [Z2.element([1])])
    assert h(Z2.element([1])) == Z2.element([1])


def test_kernel_basis_examples():
    assert kernel_basis_mod_p([1, 1], 3) == [(1, 2)]
    assert kernel_basis_mod_p([1], 2) == []
    basis = kernel_basis_mod_p([1, 2, 1], 3)
    assert len(basis) == 2
    brute = [
        v
        for v in product(range(3), repeat=3)
        if (v[0] + 2 * v[1] + v[2]) % 3 == 0
    ]
    span = set()
    for c1, c2 in product(range(3), repeat=2):
        span.add(tuple((c1 * a + c2 * b) % 3 for a, b in zip(basis[0], basis[1])))
    assert span == set(brute)


def test_kernel_basis_rejects_all_zero():
    with pytest.raises(InputDataError):
        kernel_basis_mod_p([0, 0], 3)


def test_solve_affine_examples():
    assert solve_affine_mod_p([[1, 1]], [0], 2, 3) == (0, 0)
    assert solution_count_mod_p([[1, 1]], 2, 3) == 3
    assert solve_affine_mod_p([], [], 2, 2) == (0, 0)
    assert solve_affine_mod_p([[1], [1]], [0, 1], 1, 2) is None


@settings(max_examples=60, deadline=None)
@given(
    st.integers(0, 2).flatmap(
        lambda m: st.tuples(
            st.lists(
                st.lists(st.integers(0, 4), min_size=3, max_size=3),
                min_size=m,
                max_size=m,
            ),
            st.lists(st.integers(0, 4), min_size=m, max_size=m),
        )
    ),
    st.sampled_from([2, 3, 5]),
)
def test_solve_affine_lex_minimality_by_enumeration(data, p):
    rows, rhs = data
    got = solve_affine_mod_p(rows, rhs, 3, p)
    sols = [
        v
        for v in product(range(p), repeat=3)
        if all(
            sum(r * x for r, x in zip(row, v)) % p == b % p
            for row, b in zip(rows, rhs)
        )
    ]
    if not sols:
        assert got is None
    else:
        assert got == min(sols)
        assert len(sols) == solution_count_mod_p(rows, 3, p)


def test_solve_affine_mod_n_composite():
    assert solve_affine_mod_n([[2]], [2], 1, 4) in ((1,), (3,))
    assert solve_affine_mod_n([[2]], [2], 1, 4) == (1,)
    assert solve_affine_mod_n([[2]], [1], 1, 4) is None


def test_solve_linear_over_group_examples():
    Z2 = FgAbelianGroup(1, [[2]])
    d = solve_linear_over_group(
        Z2, [(2, Z2.zero()), (1, Z2.element([1]))]
    )
    assert d == Z2.element([1])

    Z = FgAbelianGroup(1, [])
    d = solve_linear_over_group(Z, [(1, Z.element([7]))])
    assert d == Z.element([7])

    Z4 = FgAbelianGroup(1, [[4]])
    d = solve_linear_over_group(Z4, [(2, Z4.element([2]))])
    sols = [g for g in Z4.elements() if 2 * g == Z4.element([2])]
    assert d in sols
    assert d.canonical() == min(s.canonical() for s in sols)


def test_solve_linear_over_group_inconsistent():
    Z4 = FgAbelianGroup(1, [[4]])
    assert solve_linear_over_group(Z4, [(2, Z4.element([1]))]) is None
