"""Exact polynomial star products: identities land on exact zero."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from starweyl.algebra_core import Config, ExpressionParameter, PSIDO, WEYL
from starweyl.exact import CNum
from starweyl.poly_star import (
    DEGREE_CAP,
    StarDegreeError,
    WeylPoly,
    abs_bracket,
    bracket,
    casimir_diagnostic,
    change_generators,
    he_basis,
    intertwine,
    le_basis,
    lie_g0_bracket,
    ordered_square_diagnostic,
    parse_poly,
    star_mul,
    star_power,
)

U = WeylPoly.gen_u()
V = WeylPoly.gen_v()
IH_HALF = CNum(0, Fraction(1, 2))  # (i hbar)/2 at hbar = 1


def _small_fracs():
    return st.fractions(min_value=Fraction(-3), max_value=Fraction(3), max_denominator=4)


def _exact_params():
    return st.builds(
        ExpressionParameter,
        st.builds(CNum, _small_fracs(), _small_fracs()),
        st.builds(CNum, _small_fracs(), _small_fracs()),
        st.builds(CNum, _small_fracs(), _small_fracs()),
    )


def _small_polys(max_degree=2):
    keys = [(i, j) for i in range(max_degree + 1) for j in range(max_degree + 1 - i)]
    coeff = st.builds(CNum, _small_fracs(), _small_fracs())
    return st.dictionaries(st.sampled_from(keys), coeff, max_size=3).map(WeylPoly)


# ---------------------------------------------------------------------------
# first-order structure


@given(_exact_params())
def test_generator_products(K):
    uv = star_mul(U, V, K)
    vu = star_mul(V, U, K)
    assert uv == WeylPoly({(1, 1): 1, (0, 0): IH_HALF * (K.k12 - 1)})
    assert vu == WeylPoly({(1, 1): 1, (0, 0): IH_HALF * (K.k12 + 1)})
    assert bracket(U, V, K) == WeylPoly.constant(CNum(0, -1))  # -i*hbar exactly


@given(_exact_params())
def test_generator_squares(K):
    assert star_mul(U, U, K) == WeylPoly({(2, 0): 1, (0, 0): IH_HALF * K.k11})
    assert star_mul(V, V, K) == WeylPoly({(0, 2): 1, (0, 0): IH_HALF * K.k22})


def test_scalars_are_central():
    K = ExpressionParameter(CNum(1, 1), CNum(0, 2), CNum(Fraction(1, 3)))
    f = WeylPoly({(2, 1): CNum(1, 1), (0, 0): 3})
    c = WeylPoly.constant(CNum(Fraction(2, 5), 1))
    assert star_mul(c, f, K) == star_mul(f, c, K) == f * CNum(Fraction(2, 5), 1)


# ---------------------------------------------------------------------------
# associativity (the load-bearing property: exact zero, no tolerance)


@settings(max_examples=100, deadline=None)
@given(_small_polys(), _small_polys(), _small_polys(), _exact_params())
def test_associativity_exact(f, g, h, K):
    lhs = star_mul(star_mul(f, g, K), h, K)
    rhs = star_mul(f, star_mul(g, h, K), K)
    assert lhs == rhs


def test_float_path_matches_exact_path():
    # an inexact hbar forces the dense backend; compare against exact run
    K = ExpressionParameter(CNum(Fraction(1, 4)), CNum(0, Fraction(1, 2)), CNum(2))
    f = WeylPoly({(3, 1): CNum(2), (0, 2): CNum(0, 1)})
    g = WeylPoly({(1, 2): CNum(Fraction(1, 2)), (1, 0): CNum(-1)})
    exact = star_mul(f, g, K)
    rough = star_mul(f, g, K, Config(hbar=1.0 + 1e-17))  # not a Fraction-exact hbar
    diff = exact.float_copy() - rough
    assert diff.max_abs() < 1e-12


# ---------------------------------------------------------------------------
# the rotation triple


@given(_exact_params())
def test_rotation_bracket_table(K):
    e1, e2, e3 = le_basis(K)
    two_i = CNum(0, 2)
    assert bracket(e1, e2, K) == e3 * two_i
    assert bracket(e2, e3, K) == e1 * two_i
    assert bracket(e3, e1, K) == e2 * two_i


@given(_exact_params())
def test_scaled_bracket_table(K):
    h1, h2, h3 = he_basis(K)
    assert abs_bracket(h1, h2, K) == h3 * 2
    assert abs_bracket(h2, h3, K) == h1 * 2
    assert abs_bracket(h3, h1, K) == h2 * 2


@given(_exact_params())
def test_casimir_constant(K):
    diag = casimir_diagnostic(K)
    # the exact sum of star squares is the parameter-independent scalar -3/4
    assert diag["computed"] == WeylPoly.constant(CNum(Fraction(-3, 4)))
    assert diag["computed_constant"] == complex(-0.75)
    assert diag["matches_claim"] is False


def test_ordered_square_diagnostic():
    K = ExpressionParameter(CNum(2), CNum(0), CNum(0))
    diag = ordered_square_diagnostic(K)
    assert diag["formula_constant"] == 1j  # (i/2)*K11 = i
    assert diag["text_claimed_constant"] == 4j
    assert diag["ratio_text_over_formula"] == 4.0


# ---------------------------------------------------------------------------
# ordering changes


@settings(max_examples=60, deadline=None)
@given(_small_polys(), _small_polys(), _exact_params(), _exact_params())
def test_intertwiner_is_a_homomorphism(f, g, K1, K2):
    lhs = intertwine(star_mul(f, g, K1), K1, K2)
    rhs = star_mul(intertwine(f, K1, K2), intertwine(g, K1, K2), K2)
    assert lhs == rhs


@given(_small_polys(3), _exact_params(), _exact_params())
def test_intertwiner_round_trip(f, K1, K2):
    assert intertwine(intertwine(f, K1, K2), K2, K1) == f


def _sl2_exact():
    # words in the elementary shears generate enough of SL2
    shear_u = st.integers(-2, 2).map(lambda a: ((1, a), (0, 1)))
    shear_l = st.integers(-2, 2).map(lambda b: ((1, 0), (b, 1)))
    return st.tuples(shear_u, shear_l).map(
        lambda p: tuple(
            tuple(sum(p[0][i][k] * p[1][k][j] for k in range(2)) for j in range(2))
            for i in range(2)
        )
    )


@settings(max_examples=60, deadline=None)
@given(_small_polys(), _small_polys(), _exact_params(), _sl2_exact())
def test_generator_change_covariance(f, g, K, S):
    # substituting u' = u S intertwines the product at S^t K S with the
    # product at K
    s_mat = [[CNum(S[0][0]), CNum(S[0][1])], [CNum(S[1][0]), CNum(S[1][1])]]
    KS = ExpressionParameter.from_matrix(_congruence(K, S))
    lhs = change_generators(star_mul(f, g, KS), s_mat)
    rhs = star_mul(change_generators(f, s_mat), change_generators(g, s_mat), K)
    assert lhs == rhs


def _congruence(K, S):
    """S^t K S as a nested list in exact arithmetic."""
    k = [[K.k11, K.k12], [K.k12, K.k22]]
    st_k = [
        [sum(CNum(S[a][i]) * k[a][b] for a in range(2)) for b in range(2)]
        for i in range(2)
    ]
    return [
        [sum(st_k[i][b] * CNum(S[b][j]) for b in range(2)) for j in range(2)]
        for i in range(2)
    ]


def test_generator_change_validates_det():
    with pytest.raises(ValueError, match="det 1"):
        change_generators(U, ((2, 0), (0, 1)))


# ---------------------------------------------------------------------------
# the 4-parameter tangent algebra


def test_g0_closes_and_satisfies_jacobi():
    import random

    rnd = random.Random(5)
    K = ExpressionParameter(0.3, -0.2, 0.7)

    def rand_tuple():
        return tuple(complex(rnd.uniform(-1, 1), rnd.uniform(-1, 1)) for _ in range(4))

    for _ in range(10):
        a, b, c = rand_tuple(), rand_tuple(), rand_tuple()
        ab = lie_g0_bracket(a, b, K)  # closure: decomposition must not raise
        assert len(ab) == 4
        jac = [0j] * 4
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            term = lie_g0_bracket(x, lie_g0_bracket(y, z, K), K)
            jac = [p + q for p, q in zip(jac, term)]
        assert max(abs(x) for x in jac) < 1e-7


def test_g0_bracket_center():
    K = PSIDO
    center = (1.0, 0.0, 0.0, 0.0)
    other = (0.2, 0.5, -0.3, 0.8)
    assert max(abs(x) for x in lie_g0_bracket(center, other, K)) < 1e-12


# ---------------------------------------------------------------------------
# utilities


def test_star_power_and_degree_cap():
    K = WEYL
    assert star_power(U + V, 2, K) == star_mul(U + V, U + V, K)
    assert star_power(U, 0, K) == WeylPoly.constant(1)
    big = WeylPoly({(DEGREE_CAP, 0): 1})
    with pytest.raises(StarDegreeError):
        star_mul(big, U, K)
    with pytest.raises(ValueError):
        star_power(U, -1, K)


def test_parse_poly():
    assert parse_poly("u^2*v - i*hbar") == WeylPoly(
        {(2, 1): 1, (0, 0): CNum(0, -1)}
    )
    assert parse_poly("1/2*u + (u + v)^2") == WeylPoly(
        {(1, 0): CNum(Fraction(1, 2)), (2, 0): 1, (1, 1): 2, (0, 2): 1}
    )
    assert parse_poly("-u*-v") == WeylPoly({(1, 1): 1})
    for bad in ("u +", "w", "u^x", "(u", "u^"):
        with pytest.raises(ValueError):
            parse_poly(bad)


def test_weylpoly_structure():
    f = WeylPoly({(1, 0): 1, (0, 1): CNum(0, 1)})
    assert f.degree() == 1
    assert f.evaluate(2.0, 3.0) == 2.0 + 3j
    assert (f - f).is_zero()
    assert f.max_abs() == 1.0
    dense = f.to_dense()
    assert WeylPoly.from_dense(dense) == f.float_copy()
    assert not WeylPoly({(0, 0): 1e-12}).is_zero()
    assert WeylPoly({(0, 0): 1e-12}).is_zero(tol=1e-9)
