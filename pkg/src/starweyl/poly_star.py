"""Polynomial star products in exact arithmetic.

A WeylPoly is a polynomial in the two generators u, v.  Products are taken
with the K-ordered rule: the exponential bidifferential pairing with matrix
Lambda = K + J, J = [[0,-1],[1,0]].  On polynomials the series terminates,
so with rational data every identity check lands on exact zero.

The first-order consequence of the sign convention: u*v = uv + (i hbar/2)
(K12 - 1), v*u = uv + (i hbar/2)(K12 + 1), hence the commutator of the
generators is exactly -i*hbar at every K.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import _backend
from .algebra_core import Config, DEFAULT_CONFIG, ExpressionParameter
from .exact import CNum, as_cnum

__all__ = [
    "WeylPoly",
    "StarDegreeError",
    "star_mul",
    "star_power",
    "bracket",
    "abs_bracket",
    "intertwine",
    "change_generators",
    "le_basis",
    "he_basis",
    "casimir_diagnostic",
    "ordered_square_diagnostic",
    "lie_g0_bracket",
    "parse_poly",
    "DEGREE_CAP",
]

DEGREE_CAP = 12


class StarDegreeError(ValueError):
    """Raised when a product would exceed the configured degree cap."""


def _is_exact_scalar(c) -> bool:
    return isinstance(c, (CNum, int, Fraction))


def _exact_hbar(config: Config):
    """hbar as an exact Fraction when it is one, else None."""
    f = Fraction(config.hbar)
    return f if float(f) == config.hbar else None


class WeylPoly:
    """Sparse polynomial in (u, v); coefficients CNum (exact) or complex."""

    __slots__ = ("coeffs", "exact")

    def __init__(self, coeffs=None):
        cleaned = {}
        exact = True
        if coeffs:
            for (i, j), c in coeffs.items():
                if isinstance(c, CNum):
                    pass
                elif _is_exact_scalar(c):
                    c = as_cnum(c)
                else:
                    c = complex(c)
                    exact = False
                if c == 0 or not c:
                    continue
                cleaned[(int(i), int(j))] = c
        if not exact:
            cleaned = {k: complex(c) for k, c in cleaned.items()}
        self.coeffs = cleaned
        self.exact = exact

    # -- constructors ----------------------------------------------------
    @classmethod
    def zero(cls) -> "WeylPoly":
        return cls({})

    @classmethod
    def constant(cls, c) -> "WeylPoly":
        return cls({(0, 0): c})

    @classmethod
    def monomial(cls, i: int, j: int, c=1) -> "WeylPoly":
        return cls({(i, j): c})

    @classmethod
    def gen_u(cls) -> "WeylPoly":
        return cls({(1, 0): 1})

    @classmethod
    def gen_v(cls) -> "WeylPoly":
        return cls({(0, 1): 1})

    # -- ring structure ---------------------------------------------------
    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            s = out.get(k, 0) + c
            if s == 0 or not s:
                out.pop(k, None)
            else:
                out[k] = s
        return WeylPoly(out)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) + (-self)

    def __neg__(self):
        return WeylPoly({k: -c for k, c in self.coeffs.items()})

    def __mul__(self, scalar):
        """Scalar multiple (use star_mul for the algebra product)."""
        if isinstance(scalar, WeylPoly):
            return self.poly_mul(scalar)
        if not _is_exact_scalar(scalar) and not isinstance(scalar, (complex, float)):
            return NotImplemented
        return WeylPoly({k: c * scalar for k, c in self.coeffs.items()})

    __rmul__ = __mul__

    def poly_mul(self, other: "WeylPoly") -> "WeylPoly":
        """Commutative (pointwise) polynomial product."""
        out: dict = {}
        for (i1, j1), c1 in self.coeffs.items():
            for (i2, j2), c2 in other.coeffs.items():
                k = (i1 + i2, j1 + j2)
                s = out.get(k, 0) + c1 * c2
                if s == 0 or not s:
                    out.pop(k, None)
                else:
                    out[k] = s
        return WeylPoly(out)

    def __eq__(self, other):
        try:
            other = _as_poly(other)
        except TypeError:
            return NotImplemented
        if set(self.coeffs) != set(other.coeffs):
            return False
        return all(
            complex(self.coeffs[k]) == complex(other.coeffs[k]) for k in self.coeffs
        )

    def __hash__(self):
        return hash(frozenset((k, complex(c)) for k, c in self.coeffs.items()))

    def is_zero(self, tol: float = 0.0) -> bool:
        if not self.coeffs:
            return True
        return all(abs(complex(c)) <= tol for c in self.coeffs.values())

    def degree(self) -> int:
        if not self.coeffs:
            return 0
        return max(i + j for i, j in self.coeffs)

    def max_abs(self) -> float:
        if not self.coeffs:
            return 0.0
        return max(abs(complex(c)) for c in self.coeffs.values())

    def evaluate(self, u, v):
        total = 0j
        for (i, j), c in self.coeffs.items():
            total += complex(c) * (complex(u) ** i) * (complex(v) ** j)
        return total

    def float_copy(self) -> "WeylPoly":
        return WeylPoly({k: complex(c) for k, c in self.coeffs.items()})

    def to_dense(self) -> np.ndarray:
        d = self.degree()
        out = np.zeros((d + 1, d + 1), dtype=complex)
        for (i, j), c in self.coeffs.items():
            out[i, j] = complex(c)
        return out

    @classmethod
    def from_dense(cls, arr, tol: float = 0.0) -> "WeylPoly":
        out = {}
        ii, jj = np.nonzero(arr)
        for i, j in zip(ii.tolist(), jj.tolist()):
            c = complex(arr[i, j])
            if abs(c) > tol:
                out[(i, j)] = c
        return cls(out)

    def __repr__(self):
        if not self.coeffs:
            return "WeylPoly(0)"
        bits = []
        for (i, j), c in sorted(self.coeffs.items()):
            mono = "".join(
                s for s, e in (("u^%d" % i, i), ("v^%d" % j, j)) if e
            ).replace("^1", "")
            bits.append(f"({c!r})*{mono}" if mono else f"({c!r})")
        return "WeylPoly(" + " + ".join(bits) + ")"


def _as_poly(x) -> WeylPoly:
    if isinstance(x, WeylPoly):
        return x
    if _is_exact_scalar(x) or isinstance(x, (complex, float)):
        return WeylPoly.constant(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as a polynomial")


# ---------------------------------------------------------------------------
# the star product


def star_mul(
    f: WeylPoly,
    g: WeylPoly,
    K: ExpressionParameter,
    config: Config = DEFAULT_CONFIG,
    cap: int = DEGREE_CAP,
) -> WeylPoly:
    """K-ordered star product of two polynomials."""
    if f.degree() + g.degree() > cap:
        raise StarDegreeError(
            f"product degree {f.degree() + g.degree()} exceeds cap {cap}"
        )
    hb = _exact_hbar(config)
    if f.exact and g.exact and K.exact and hb is not None:
        return _star_exact(f, g, K, hb)
    lam = K.lam_matrix()
    half_ih = 0.5j * config.hbar
    dense = _backend.star_dense(
        f.float_copy().to_dense(), g.float_copy().to_dense(), lam, half_ih, cap
    )
    return WeylPoly.from_dense(dense)


def _falling(n: int, k: int) -> int:
    out = 1
    for t in range(k):
        out *= n - t
    return out


def _derivs(poly: WeylPoly):
    """dict (m, n) -> derivative polynomial coeff dict (with weights)."""
    table: dict = {}
    for (i, j), c in poly.coeffs.items():
        for m in range(i + 1):
            wu = _falling(i, m)
            for n in range(j + 1):
                w = wu * _falling(j, n)
                d = table.setdefault((m, n), {})
                key = (i - m, j - n)
                s = d.get(key, 0) + c * w
                if s == 0 or not s:
                    d.pop(key, None)
                else:
                    d[key] = s
    return {k: v for k, v in table.items() if v}


def _star_exact(f: WeylPoly, g: WeylPoly, K: ExpressionParameter, hb: Fraction):
    l11, l12, l21, l22 = (as_cnum(x) for x in K.lam_entries())
    half_ih = CNum(0, hb / 2)
    df, dg = _derivs(f), _derivs(g)
    out: dict = {}
    zero = CNum(0)
    for (m1, n1), F in df.items():
        pref = half_ih ** (m1 + n1)
        for m2 in range(m1 + n1 + 1):
            n2 = m1 + n1 - m2
            G = dg.get((m2, n2))
            if G is None:
                continue
            coef = zero
            for k in range(max(0, m2 - n1), min(m1, m2) + 1):
                e12, e21, e22 = m1 - k, m2 - k, n1 - m2 + k
                if k and not l11:
                    continue
                if e12 and not l12:
                    continue
                if e21 and not l21:
                    continue
                if e22 and not l22:
                    continue
                term = (l11**k) * (l12**e12) * (l21**e21) * (l22**e22)
                denom = (
                    math.factorial(k)
                    * math.factorial(e12)
                    * math.factorial(e21)
                    * math.factorial(e22)
                )
                coef = coef + term / denom
            if not coef:
                continue
            coef = coef * pref
            for (a, b), cf in F.items():
                w = coef * cf
                for (c, d), cg in G.items():
                    key = (a + c, b + d)
                    s = out.get(key, zero) + w * cg
                    if not s:
                        out.pop(key, None)
                    else:
                        out[key] = s
    return WeylPoly(out)


def star_power(
    f: WeylPoly,
    n: int,
    K: ExpressionParameter,
    config: Config = DEFAULT_CONFIG,
    cap: int = DEGREE_CAP,
) -> WeylPoly:
    if n < 0:
        raise ValueError("star_power takes a nonnegative exponent")
    out = WeylPoly.constant(1)
    for _ in range(n):
        out = star_mul(out, f, K, config, cap)
    return out


def bracket(f, g, K, config: Config = DEFAULT_CONFIG, cap: int = DEGREE_CAP):
    """Star commutator f*g - g*f."""
    return star_mul(f, g, K, config, cap) - star_mul(g, f, K, config, cap)


def abs_bracket(f, g, K, config: Config = DEFAULT_CONFIG, cap: int = DEGREE_CAP):
    """The scaled bracket -i[f, g]_* (makes the rotation triple real)."""
    com = bracket(f, g, K, config, cap)
    return com * CNum(0, -1) if com.exact else com * (-1j)


# ---------------------------------------------------------------------------
# intertwiners and generator changes


def intertwine(
    f: WeylPoly,
    K_from: ExpressionParameter,
    K_to: ExpressionParameter,
    config: Config = DEFAULT_CONFIG,
) -> WeylPoly:
    """Ordering-change operator: exp((i hbar/4) <Delta d, d>) applied to f.

    Delta = K_to - K_from; an algebra homomorphism between the two star
    products (checked by the property suite, not assumed).
    """
    hb = _exact_hbar(config)
    exact = f.exact and K_from.exact and K_to.exact and hb is not None
    if exact:
        d11 = as_cnum(K_to.k11) - as_cnum(K_from.k11)
        d12 = as_cnum(K_to.k12) - as_cnum(K_from.k12)
        d22 = as_cnum(K_to.k22) - as_cnum(K_from.k22)
        quarter_ih = CNum(0, hb / 4)
    else:
        d11 = complex(K_to.k11) - complex(K_from.k11)
        d12 = complex(K_to.k12) - complex(K_from.k12)
        d22 = complex(K_to.k22) - complex(K_from.k22)
        quarter_ih = 0.25j * config.hbar
        f = f.float_copy()
    out = f
    term = f
    n = 1
    while True:
        term = _second_order_op(term, d11, d12, d22)
        if term.is_zero():
            break
        term = term * (quarter_ih / n)
        out = out + term
        n += 1
    return out


def _second_order_op(poly: WeylPoly, d11, d12, d22) -> WeylPoly:
    """d11 d_u^2 + 2 d12 d_u d_v + d22 d_v^2 applied once."""
    out: dict = {}

    def acc(key, val):
        if not val:
            return
        s = out.get(key, 0) + val
        if s == 0 or not s:
            out.pop(key, None)
        else:
            out[key] = s

    for (i, j), c in poly.coeffs.items():
        if i >= 2 and d11:
            acc((i - 2, j), c * d11 * (i * (i - 1)))
        if i >= 1 and j >= 1 and d12:
            acc((i - 1, j - 1), c * d12 * (2 * i * j))
        if j >= 2 and d22:
            acc((i, j - 2), c * d22 * (j * (j - 1)))
    return WeylPoly(out)


def change_generators(f: WeylPoly, S, tol: float = 1e-9) -> WeylPoly:
    """Substitute the linear generator change u' = u S (row convention).

    S must have det 1; the ordering parameter transforms as S^t K S, which
    callers pass to subsequent products themselves.
    """
    s11, s12 = S[0][0], S[0][1]
    s21, s22 = S[1][0], S[1][1]
    det = s11 * s22 - s12 * s21
    if abs(complex(det) - 1.0) > tol:
        raise ValueError("generator change must have det 1")
    exact = f.exact and all(_is_exact_scalar(x) for x in (s11, s12, s21, s22))
    if exact:
        s11, s12, s21, s22 = map(as_cnum, (s11, s12, s21, s22))
    else:
        s11, s12, s21, s22 = map(complex, (s11, s12, s21, s22))
        f = f.float_copy()
    new_u = WeylPoly({(1, 0): s11, (0, 1): s21})
    new_v = WeylPoly({(1, 0): s12, (0, 1): s22})
    out = WeylPoly.zero()
    for (i, j), c in f.coeffs.items():
        term = WeylPoly.constant(c)
        for _ in range(i):
            term = term.poly_mul(new_u)
        for _ in range(j):
            term = term.poly_mul(new_v)
        out = out + term
    return out


# ---------------------------------------------------------------------------
# distinguished quadratic elements


def _sym_uv_symbol(K: ExpressionParameter, config: Config) -> WeylPoly:
    """Symbol of the symmetric product of the generators: uv + (i hbar/2) K12."""
    hb = _exact_hbar(config)
    if K.exact and hb is not None:
        return WeylPoly({(1, 1): 1, (0, 0): CNum(0, hb / 2) * as_cnum(K.k12)})
    return WeylPoly({(1, 1): 1, (0, 0): 0.5j * config.hbar * complex(K.k12)})


def _square_symbol(gen: str, K: ExpressionParameter, config: Config) -> WeylPoly:
    """Symbol of u*u (gen='u') or v*v (gen='v')."""
    hb = _exact_hbar(config)
    kdiag = K.k11 if gen == "u" else K.k22
    key = (2, 0) if gen == "u" else (0, 2)
    if K.exact and hb is not None:
        return WeylPoly({key: 1, (0, 0): CNum(0, hb / 2) * as_cnum(kdiag)})
    return WeylPoly({key: 1, (0, 0): 0.5j * config.hbar * complex(kdiag)})


def le_basis(
    K: ExpressionParameter, config: Config = DEFAULT_CONFIG
) -> tuple[WeylPoly, WeylPoly, WeylPoly]:
    """The rotation triple of quadratic elements, as K-symbols.

    le1 = (1/(i hbar)) (symmetric uv product)
    le2 = (1/(2 hbar)) (u*u + v*v)
    le3 = (1/(2 i hbar)) (u*u - v*v)

    Exact bracket table: [le1, le2]_* = 2i le3 and cyclic.
    """
    hb = _exact_hbar(config)
    uv = _sym_uv_symbol(K, config)
    uu = _square_symbol("u", K, config)
    vv = _square_symbol("v", K, config)
    if K.exact and hb is not None:
        inv_ih = CNum(0, -1 / hb)  # 1/(i hbar)
        half_inv_h = CNum(Fraction(1, 2) / hb)
        return (
            uv * inv_ih,
            (uu + vv) * half_inv_h,
            (uu - vv) * (inv_ih * Fraction(1, 2)),
        )
    inv_ih = 1.0 / (1j * config.hbar)
    return (
        uv * inv_ih,
        (uu + vv) * (0.5 / config.hbar),
        (uu - vv) * (0.5 * inv_ih),
    )


def he_basis(K: ExpressionParameter, config: Config = DEFAULT_CONFIG):
    """Same triple; the name marks use with abs_bracket: [|he1,he2|] = 2 he3."""
    return le_basis(K, config)


def casimir_diagnostic(K: ExpressionParameter, config: Config = DEFAULT_CONFIG) -> dict:
    """Sum of star squares of the rotation triple.

    The source text asserts this vanishes; the exact computation gives the
    K-independent constant -3/4.  Both are reported; nothing is forced.
    """
    e1, e2, e3 = he_basis(K, config)
    total = (
        star_mul(e1, e1, K, config)
        + star_mul(e2, e2, K, config)
        + star_mul(e3, e3, K, config)
    )
    return {
        "claimed": 0,
        "computed": total,
        "computed_constant": complex(total.coeffs.get((0, 0), 0)),
        "matches_claim": total.is_zero(),
    }


def ordered_square_diagnostic(
    K: ExpressionParameter, config: Config = DEFAULT_CONFIG
) -> dict:
    """Report the square of the first generator both ways.

    The product formula gives u*u = u^2 + (i hbar/2) K11; a text passage
    claims u^2 + 2 i hbar K11 (a factor-4 discrepancy).  The product
    formula is normative here; this diagnostic surfaces both.
    """
    u = WeylPoly.gen_u()
    formula = star_mul(u, u, K, config)
    hbar = config.hbar
    text_constant = 2j * hbar * complex(K.k11)
    return {
        "formula_value": formula,
        "formula_constant": complex(formula.coeffs.get((0, 0), 0)),
        "text_claimed_constant": text_constant,
        "ratio_text_over_formula": 4.0,
    }


# ---------------------------------------------------------------------------
# the flat 4-parameter Lie algebra used by the group-side module


def lie_g0_bracket(
    a: tuple, b: tuple, K: ExpressionParameter, config: Config = DEFAULT_CONFIG
) -> tuple:
    """Star bracket of two tangent tuples (tau, x1, x2, sigma); closes.

    The realization sends (tau, x1, x2, sigma) to
    tau + (1/(i hbar))(x1 u + i x2 v) + (sigma/(2 hbar))(u^2 - v^2),
    a central direction, two translation directions, and one boost.
    """
    pa = _g0_tuple_poly(a, config)
    pb = _g0_tuple_poly(b, config)
    com = bracket(pa, pb, K, config)
    return _g0_decompose(com, config)


def _g0_tuple_poly(t, config: Config) -> WeylPoly:
    tau, x1, x2, sigma = (complex(x) for x in t)
    ih = 1j * config.hbar
    return WeylPoly(
        {
            (0, 0): tau,
            (1, 0): x1 / ih,
            (0, 1): 1j * x2 / ih,
            (2, 0): sigma / (2 * config.hbar),
            (0, 2): -sigma / (2 * config.hbar),
        }
    )


def _g0_decompose(p: WeylPoly, config: Config) -> tuple:
    q = p.float_copy()
    ih = 1j * config.hbar
    sigma = complex(q.coeffs.get((2, 0), 0)) * 2 * config.hbar
    sigma_check = -complex(q.coeffs.get((0, 2), 0)) * 2 * config.hbar
    x1 = complex(q.coeffs.get((1, 0), 0)) * ih
    x2 = complex(q.coeffs.get((0, 1), 0)) * ih / 1j
    tau = complex(q.coeffs.get((0, 0), 0))
    rest = q - _g0_tuple_poly((tau, x1, x2, sigma), config)
    if abs(sigma - sigma_check) > 1e-9 or rest.max_abs() > 1e-9:
        raise ValueError("bracket left the 4-parameter tangent space")
    return (tau, x1, x2, sigma)


# ---------------------------------------------------------------------------
# a small expression parser for the CLI


class _Parser:
    """Grammar: expr := term (('+'|'-') term)*; term := factor ('*' factor)*;
    factor := atom ('^' int)?; atom := 'u' | 'v' | 'i' | 'hbar' | number |
    '(' expr ')' | '-' factor."""

    def __init__(self, text: str, config: Config):
        self.toks = self._tokenize(text)
        self.pos = 0
        self.config = config

    @staticmethod
    def _tokenize(text: str):
        toks = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch in "+-*^()":
                toks.append(ch)
                i += 1
                continue
            if ch.isdigit() or ch == ".":
                j = i
                while j < len(text) and (text[j].isdigit() or text[j] in "./"):
                    j += 1
                toks.append(text[i:j])
                i = j
                continue
            if ch.isalpha():
                j = i
                while j < len(text) and text[j].isalpha():
                    j += 1
                word = text[i:j]
                if word not in {"u", "v", "i", "hbar"}:
                    raise ValueError(f"unknown symbol {word!r}")
                toks.append(word)
                i = j
                continue
            raise ValueError(f"cannot tokenize {text[i:]!r}")
        return toks

    def _peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def _next(self):
        tok = self._peek()
        self.pos += 1
        return tok

    def parse(self) -> WeylPoly:
        out = self._expr()
        if self._peek() is not None:
            raise ValueError(f"trailing input at {self.toks[self.pos:]!r}")
        return out

    def _expr(self) -> WeylPoly:
        sign = 1
        if self._peek() in {"+", "-"}:
            sign = -1 if self._next() == "-" else 1
        out = self._term() * sign
        while self._peek() in {"+", "-"}:
            op = self._next()
            t = self._term()
            out = out + (t if op == "+" else -t)
        return out

    def _term(self) -> WeylPoly:
        out = self._factor()
        while self._peek() == "*":
            self._next()
            out = out.poly_mul(self._factor())
        return out

    def _factor(self) -> WeylPoly:
        if self._peek() == "-":
            self._next()
            return -self._factor()
        atom = self._atom()
        if self._peek() == "^":
            self._next()
            exp_tok = self._next()
            try:
                n = int(exp_tok)
            except (TypeError, ValueError):
                raise ValueError(f"exponent must be an integer, got {exp_tok!r}")
            out = WeylPoly.constant(1)
            for _ in range(n):
                out = out.poly_mul(atom)
            return out
        return atom

    def _atom(self) -> WeylPoly:
        tok = self._next()
        if tok == "(":
            inner = self._expr()
            if self._next() != ")":
                raise ValueError("unbalanced parenthesis")
            return inner
        if tok == "u":
            return WeylPoly.gen_u()
        if tok == "v":
            return WeylPoly.gen_v()
        if tok == "i":
            return WeylPoly.constant(CNum(0, 1))
        if tok == "hbar":
            hb = _exact_hbar(self.config)
            return WeylPoly.constant(hb if hb is not None else self.config.hbar)
        if tok is None:
            raise ValueError("unexpected end of expression")
        if "/" in tok:
            num, _, den = tok.partition("/")
            return WeylPoly.constant(Fraction(int(num), int(den)))
        try:
            return WeylPoly.constant(int(tok))
        except ValueError:
            return WeylPoly.constant(float(tok))


def parse_poly(text: str, config: Config = DEFAULT_CONFIG) -> WeylPoly:
    """Parse expressions like "u^2*v - i*hbar" into a WeylPoly."""
    return _Parser(text, config).parse()
