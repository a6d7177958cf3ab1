"""Core types: configuration, 2x2 matrix helpers, ordering parameters.

Everything downstream works relative to a symmetric 2x2 ordering parameter
K.  The antisymmetric part of the product pairing is fixed once and for all
as J = [[0, -1], [1, 0]], so the full pairing is Lambda = K + J and the
commutator of the two generators is exactly -i*hbar.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import CNum, as_cnum

__all__ = [
    "Config",
    "load_config",
    "ExpressionParameter",
    "QuadForm",
    "SphereParam",
    "SPrimeElement",
    "su2_symmetric",
    "sphere_from_angles",
    "sprime_from_angles",
    "quadform_of_g",
    "eigen2",
    "det2",
    "inv2",
    "probe_points",
    "J_PAIRING",
    "WEYL",
    "PSIDO",
]

J_PAIRING = ((0, -1), (1, 0))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Config:
    """Numerical policy shared by all modules."""

    hbar: float = 1.0
    tol_closed: float = 1e-9
    tol_quad: float = 1e-6
    detour_radius: float = 0.1

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if not (0 < self.tol_closed < self.tol_quad < 1):
            raise ValueError("need 0 < tol_closed < tol_quad < 1")
        if not (0 < self.detour_radius < math.pi / 2):
            raise ValueError("detour_radius must sit in (0, pi/2)")

    @property
    def inv_ih(self) -> complex:
        """The 1/(i*hbar) prefactor used in every exponent."""
        return 1.0 / (1j * self.hbar)


DEFAULT_CONFIG = Config()


def load_config(path) -> Config:
    """Read a key=value file (hash comments allowed) into a Config."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in {"hbar", "tol_closed", "tol_quad", "detour_radius"}:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = float(val.strip())
    return Config(**values)


# ---------------------------------------------------------------------------
# small dense 2x2 helpers (complex)


def det2(m) -> complex:
    return complex(m[0][0] * m[1][1] - m[0][1] * m[1][0])


def inv2(m) -> np.ndarray:
    d = det2(m)
    if d == 0:
        raise ZeroDivisionError("singular 2x2 matrix")
    return np.array([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]], dtype=complex) / d


def eigen2(m) -> tuple[complex, complex]:
    """Eigenvalues of a 2x2 matrix, sorted by (real, imag)."""
    a, b = complex(m[0][0]), complex(m[0][1])
    c, d = complex(m[1][0]), complex(m[1][1])
    tr, det = a + d, a * d - b * c
    disc = cmath.sqrt(tr * tr / 4.0 - det)
    pair = sorted((tr / 2 + disc, tr / 2 - disc), key=lambda z: (z.real, z.imag))
    return pair[0], pair[1]


# ---------------------------------------------------------------------------
# ordering parameter


class ExpressionParameter:
    """Symmetric ordering parameter K.

    Stores the three independent entries.  Entries may be exact (ints,
    Fractions, exact-float complexes) in which case polynomial operations
    stay in exact arithmetic; otherwise everything downstream runs complex.
    """

    __slots__ = ("k11", "k12", "k22", "exact")

    def __init__(self, k11=0, k12=0, k22=0):
        exact = True
        vals = []
        for v in (k11, k12, k22):
            if isinstance(v, CNum):
                vals.append(v)
                continue
            try:
                vals.append(as_cnum(v))
            except (TypeError, ValueError):
                exact = False
                vals.append(complex(v))
        if exact:
            self.k11, self.k12, self.k22 = vals
        else:
            self.k11 = complex(vals[0]) if isinstance(vals[0], CNum) else vals[0]
            self.k12 = complex(vals[1]) if isinstance(vals[1], CNum) else vals[1]
            self.k22 = complex(vals[2]) if isinstance(vals[2], CNum) else vals[2]
        self.exact = exact

    @classmethod
    def from_matrix(cls, m, tol=1e-12) -> "ExpressionParameter":
        if abs(complex(m[0][1]) - complex(m[1][0])) > tol:
            raise ValueError("ordering parameter must be symmetric")
        return cls(m[0][0], m[0][1], m[1][1])

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [
                [complex(self.k11), complex(self.k12)],
                [complex(self.k12), complex(self.k22)],
            ],
            dtype=complex,
        )

    def lam_entries(self):
        """Entries of Lambda = K + J in the arithmetic of this parameter."""
        if self.exact:
            one = as_cnum(1)
            return (self.k11, self.k12 - one, self.k12 + one, self.k22)
        return (self.k11, self.k12 - 1, self.k12 + 1, self.k22)

    def lam_matrix(self) -> np.ndarray:
        l11, l12, l21, l22 = (complex(x) for x in self.lam_entries())
        return np.array([[l11, l12], [l21, l22]], dtype=complex)

    def __eq__(self, other):
        if not isinstance(other, ExpressionParameter):
            return NotImplemented
        return all(
            complex(getattr(self, k)) == complex(getattr(other, k))
            for k in ("k11", "k12", "k22")
        )

    def __hash__(self):
        return hash(tuple(complex(getattr(self, k)) for k in ("k11", "k12", "k22")))

    def __repr__(self):
        return f"ExpressionParameter({self.k11!r}, {self.k12!r}, {self.k22!r})"


WEYL = ExpressionParameter(0, 0, 0)
PSIDO = ExpressionParameter(0, 1, 0)


# ---------------------------------------------------------------------------
# quadratic forms


class QuadForm:
    """Symmetric quadratic form  A11 u^2 + 2 A12 u v + A22 v^2."""

    __slots__ = ("a11", "a12", "a22")

    def __init__(self, a11, a12, a22):
        self.a11 = complex(a11)
        self.a12 = complex(a12)
        self.a22 = complex(a22)

    @classmethod
    def from_matrix(cls, m, tol=1e-12) -> "QuadForm":
        if abs(complex(m[0][1]) - complex(m[1][0])) > tol:
            raise ValueError("quadratic-form matrix must be symmetric")
        return cls(m[0][0], m[0][1], m[1][1])

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]], dtype=complex)

    def det(self) -> complex:
        return self.a11 * self.a22 - self.a12 * self.a12

    def value(self, u, v) -> complex:
        return self.a11 * u * u + 2.0 * self.a12 * u * v + self.a22 * v * v

    def __repr__(self):
        return f"QuadForm({self.a11}, {self.a12}, {self.a22})"


HARMONIC = QuadForm(1, 0, 1)  # u^2 + v^2
HYPERBOLIC = QuadForm(0, 0.5, 0)  # the symmetric product u*v
ANTIHARMONIC = QuadForm(1, 0, -1)  # u^2 - v^2


# ---------------------------------------------------------------------------
# the sphere of special symmetric parameters and its det-1 preimages


@dataclass(frozen=True)
class SphereParam:
    """Point (alpha, beta, gamma) on the unit 2-sphere."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        r = self.alpha**2 + self.beta**2 + self.gamma**2
        if abs(r - 1.0) > 1e-9:
            raise ValueError("sphere point must satisfy alpha^2+beta^2+gamma^2 = 1")


def sphere_from_angles(theta: float, phi: float) -> SphereParam:
    """Polar/azimuth angles to a sphere point (theta from the gamma-axis)."""
    return SphereParam(
        math.sin(theta) * math.cos(phi),
        math.sin(theta) * math.sin(phi),
        math.cos(theta),
    )


def su2_symmetric(p: SphereParam) -> ExpressionParameter:
    """Symmetric unitary parameter attached to a sphere point.

    [[alpha + i beta, i gamma], [i gamma, alpha - i beta]]; unitary with
    determinant 1, which is exactly what makes these parameters nice.
    """
    return ExpressionParameter(
        complex(p.alpha, p.beta), complex(0.0, p.gamma), complex(p.alpha, -p.beta)
    )


@dataclass(frozen=True)
class SPrimeElement:
    """A det-1 complex 2x2 matrix g whose symmetric square g g^t lies on
    the parameter sphere."""

    g: tuple = field(repr=False)

    def matrix(self) -> np.ndarray:
        return np.array(self.g, dtype=complex)


def sprime_from_angles(
    gamma: float, theta: float, xi: float, branch: int = 1
) -> SPrimeElement:
    """Construct a family element from (gamma, theta, xi).

    The remaining hyperbolic angle is solved from the det-1 constraint
    cosh(xi + eta) = (1 - gamma^2)^(-1/2); `branch` picks the sign of the
    solved sum.  gamma = +-1 degenerates to the single element
    (1/sqrt2) [[1, i], [i, 1]]-type limit.
    """
    if abs(gamma) >= 1.0 - 1e-12:
        s = 1.0 if gamma >= 0 else -1.0
        m = np.array([[1.0, s * 1j], [s * 1j, 1.0]], dtype=complex) / math.sqrt(2.0)
        return SPrimeElement(tuple(map(tuple, m)))
    root4 = (1.0 - gamma * gamma) ** 0.25
    sigma = branch * math.acosh((1.0 - gamma * gamma) ** -0.5)
    eta = sigma - xi
    eip = cmath.exp(0.5j * theta)
    eim = cmath.exp(-0.5j * theta)
    m = np.array(
        [
            [root4 * eip * math.cosh(xi), root4 * 1j * eip * math.sinh(xi)],
            [root4 * 1j * eim * math.sinh(eta), root4 * eim * math.cosh(eta)],
        ],
        dtype=complex,
    )
    return SPrimeElement(tuple(map(tuple, m)))


def quadform_of_g(g, tol=1e-9) -> QuadForm:
    """Symmetric square A = g g^t of a det-1 matrix (A has det 1)."""
    m = g.matrix() if isinstance(g, SPrimeElement) else np.asarray(g, dtype=complex)
    d = det2(m)
    if abs(d - 1.0) > tol:
        raise ValueError(f"matrix must have det 1 (got {d})")
    a = m @ m.T
    return QuadForm(a[0, 0], 0.5 * (a[0, 1] + a[1, 0]), a[1, 1])


# ---------------------------------------------------------------------------
# the shared pointwise-equality convention


def probe_points() -> list[tuple[complex, complex]]:
    """3x3 real grid on [-1,1]^2 plus 4 fixed complex probes.

    Pointwise agreement on these 13 points is the package-wide definition
    of equality for function-valued elements.
    """
    pts = [(float(u), float(v)) for u in (-1.0, 0.0, 1.0) for v in (-1.0, 0.0, 1.0)]
    pts += [
        (0.3 + 0.4j, -0.2 + 0.1j),
        (-0.5 + 0.2j, 0.7 - 0.3j),
        (0.1 - 0.6j, 0.4 + 0.5j),
        (-0.3 - 0.2j, -0.6 - 0.4j),
    ]
    return pts
