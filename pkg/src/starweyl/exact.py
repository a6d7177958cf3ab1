"""Exact complex-rational arithmetic.

The polynomial layer promises zero-residual identity checks, so its
coefficient field must be exact: a :class:`CNum` is a complex number whose
real and imaginary parts are :class:`fractions.Fraction` values.  A tiny
hand-rolled class beats a general CAS here by a couple of orders of
magnitude, which is what keeps the exact identity suite inside its time
budget.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

__all__ = ["CNum", "as_cnum", "ZERO", "ONE", "I"]

_RATIONAL_TYPES = (int, Fraction, Rational)


def _coerce_part(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, _RATIONAL_TYPES):
        return Fraction(x)
    if isinstance(x, float):
        # Accept floats only when they are exact binary rationals anyway
        # (0.5, 0.25, ...).  Fraction(float) is exact, so nothing is lost.
        return Fraction(x)
    raise TypeError(f"cannot build an exact number from {type(x).__name__}")


class CNum:
    """Gaussian rational: re + im*i with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", _coerce_part(re))
        object.__setattr__(self, "im", _coerce_part(im))

    def __setattr__(self, name, value):
        raise AttributeError("CNum is immutable")

    # -- ring operations -------------------------------------------------
    def __add__(self, other):
        other = as_cnum(other)
        return CNum(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_cnum(other)
        return CNum(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return as_cnum(other).__sub__(self)

    def __mul__(self, other):
        other = as_cnum(other)
        return CNum(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return CNum(-self.re, -self.im)

    def __truediv__(self, other):
        other = as_cnum(other)
        d = other.re * other.re + other.im * other.im
        if d == 0:
            raise ZeroDivisionError("division by exact zero")
        return CNum(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __rtruediv__(self, other):
        return as_cnum(other).__truediv__(self)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("exact powers take integer exponents")
        if n < 0:
            return (ONE / self) ** (-n)
        out, base = ONE, self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- structure -------------------------------------------------------
    def conjugate(self) -> "CNum":
        return CNum(self.re, -self.im)

    def __eq__(self, other):
        try:
            other = as_cnum(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if not self.im:
            return f"CNum({self.re})"
        return f"CNum({self.re}, {self.im})"

    def is_rational(self) -> bool:
        return self.im == 0


def as_cnum(x) -> CNum:
    """Coerce ints, Fractions, exact floats and complexes to CNum."""
    if isinstance(x, CNum):
        return x
    if isinstance(x, complex):
        return CNum(_coerce_part(x.real), _coerce_part(x.imag))
    return CNum(_coerce_part(x))


ZERO = CNum(0)
ONE = CNum(1)
I = CNum(0, 1)
