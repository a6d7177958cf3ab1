"""Exact complex-rational arithmetic."""

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from starweyl.exact import CNum, I, ONE, ZERO, as_cnum


def _rationals():
    return st.fractions(
        min_value=Fraction(-50), max_value=Fraction(50), max_denominator=64
    )


def _cnums():
    return st.builds(CNum, _rationals(), _rationals())


def test_constants():
    assert ZERO == CNum(0) and not ZERO
    assert ONE == CNum(1)
    assert I * I == CNum(-1)
    assert complex(I) == 1j


def test_ring_ops_match_complex():
    a = CNum(Fraction(3, 4), Fraction(-1, 2))
    b = CNum(2, Fraction(1, 3))
    for op in ("__add__", "__sub__", "__mul__", "__truediv__"):
        got = getattr(a, op)(b)
        want = getattr(complex(a), op)(complex(b))
        assert abs(complex(got) - want) < 1e-12


@given(_cnums(), _cnums())
def test_division_inverts_multiplication(a, b):
    if not b:
        with pytest.raises(ZeroDivisionError):
            a / b
        return
    assert (a * b) / b == a


@given(_cnums(), st.integers(min_value=0, max_value=8))
def test_power_is_repeated_product(a, n):
    out = ONE
    for _ in range(n):
        out = out * a
    assert a**n == out


def test_negative_power():
    a = CNum(Fraction(1, 2), Fraction(1, 3))
    assert a**-2 == ONE / (a * a)
    with pytest.raises(TypeError):
        a ** 0.5  # noqa: B018 - the raise is the point


def test_reflected_scalar_ops():
    a = CNum(1, 2)
    assert 3 + a == CNum(4, 2)
    assert 3 - a == CNum(2, -2)
    assert 2 * a == CNum(2, 4)
    assert 1 / CNum(0, 1) == CNum(0, -1)


def test_conjugate_and_predicates():
    a = CNum(Fraction(2, 7), Fraction(-3, 5))
    assert a.conjugate() == CNum(Fraction(2, 7), Fraction(3, 5))
    assert not a.is_rational()
    assert CNum(5).is_rational()
    assert (a * a.conjugate()).is_rational()


def test_immutable_and_hashable():
    a = CNum(1, 1)
    with pytest.raises(AttributeError):
        a.re = Fraction(2)
    assert hash(CNum(1, 1)) == hash(a)
    assert len({CNum(1, 1), CNum(1, 1), CNum(1, 2)}) == 2


def test_coercion():
    # binary-exact floats lose nothing
    assert as_cnum(0.5) == CNum(Fraction(1, 2))
    assert as_cnum(0.5 + 0.25j) == CNum(Fraction(1, 2), Fraction(1, 4))
    assert as_cnum(Fraction(2, 3)) == CNum(Fraction(2, 3))
    with pytest.raises(TypeError):
        as_cnum("nope")


def test_equality_against_foreign_types():
    assert CNum(2) == 2
    assert CNum(0, 1) == 1j
    assert (CNum(1) == "x") is False or (CNum(1).__eq__("x")) is NotImplemented
