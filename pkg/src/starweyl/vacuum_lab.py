"""Distinguished limits of the quadratic flows: projector-type elements,
one-sided inverses, matrix elements, and square-root regulators.

Everything here is a finite quadrature sum of (poly-)Gaussian elements
produced by walking the closed-form flows of :mod:`gauss_star` along
explicit contours.  Three quadrature families cover all the integrals:

* vertical period averages  -> uniform midpoint ladders on one (or two)
  periods of the flow, which converge spectrally for periodic integrands;
* decaying half-line weights -> composite Gauss panels with an explicit
  exponential tail cutoff;
* half-power Laplace weights -> fold the half-line onto one period of the
  flow through an accelerated alternating lattice sum, then remove the
  endpoint square-root singularity by substitution.

Every quadrature-built object is assembled twice, at the requested and at
doubled resolution; the 13-point probe deviation between the two runs is
recorded as ``drift`` and compared against the quadrature tolerance, so a
contour that silently stopped converging is always visible to the caller.

The height coordinate used throughout is the real part of the flow
parameter: a "vertical contour at height s" is the line tau = s + i t.
``exchanging_interval`` reports the admissible open window of such heights
in exactly these units.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .algebra_core import (
    Config,
    DEFAULT_CONFIG,
    ExpressionParameter,
    QuadForm,
    SphereParam,
    probe_points,
    su2_symmetric,
)
from .branch_analysis import exchanging_interval, is_nice, polar_set
from .gauss_star import (
    ElementSum,
    GaussianElement,
    PolyGaussian,
    StarSingularity,
    continue_det_sqrt,
    flow_values,
    gauss_mul,
    lmul_poly,
    max_residual,
    polygauss_mul,
    rmul_poly,
    star_exp_quad,
)
from .poly_star import WeylPoly, le_basis, star_power

__all__ = [
    "QuadratureRule",
    "IntegralElement",
    "MatrixElementTable",
    "PairingReport",
    "WitnessReport",
    "SphereVacuumReport",
    "RootPair",
    "FermionPair",
    "MIXED_GENERATOR",
    "HARMONIC_GENERATOR",
    "probe_magnitude",
    "contour_strip",
    "pseudo_vacuum",
    "limit_vacuum",
    "limit_vacuum_contour",
    "star_inverse_uv",
    "half_inverse_u",
    "matrix_units",
    "laurent_unit",
    "bilateral_pairing",
    "associativity_witness",
    "su2_vacuum",
    "laplace_sqrt_scalar",
    "harmonic_shift_root",
    "linear_square_root",
    "fermion_pair",
]

#: Quadratic generator with symbol u v (plus its ordering constant); the
#: one-parameter group it generates is the hyperbolic mixed flow.
MIXED_GENERATOR = QuadForm(0.0, 0.5, 0.0)

#: Quadratic generator with symbol u^2 + v^2 (plus its ordering constant).
HARMONIC_GENERATOR = QuadForm(1.0, 0.0, 1.0)

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# quadrature scaffolding


def probe_magnitude(x, config: Config = DEFAULT_CONFIG) -> float:
    """Largest absolute value of an element on the 13-point probe grid."""
    el = ElementSum.from_any(x, config=config)
    vals = el.evaluate_many(probe_points())
    return float(np.max(np.abs(vals)))


def _as_term(x) -> PolyGaussian:
    return x if isinstance(x, PolyGaussian) else PolyGaussian.from_gaussian(x)


def _wrap_sum(items) -> ElementSum:
    """ElementSum over a mixed iterable of Gaussian / poly-Gaussian terms."""
    return ElementSum([_as_term(t) for t in items])


def _gauss_segment(n: int, z0, z1):
    """Gauss-Legendre nodes and weights transplanted to the segment
    [z0, z1]; complex endpoints give a straight complex segment."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    mid, half = 0.5 * (z1 + z0), 0.5 * (z1 - z0)
    return [mid + half * xi for xi in x], [half * wi for wi in w]


@dataclass(frozen=True)
class QuadratureRule:
    """Record of the contour a quadrature object was built on."""

    contour: str
    nodes: tuple
    weights: tuple


@dataclass
class IntegralElement:
    """A quadrature sum of elements together with its convergence record.

    ``element`` is the finer of the two resolutions the object was built
    at; ``drift`` is the probe-grid deviation between the two, and
    ``converged`` states whether it beat the quadrature tolerance.
    """

    element: ElementSum
    rule: QuadratureRule
    drift: float
    converged: bool
    label: str
    info: dict = field(default_factory=dict)

    def evaluate(self, u, v) -> complex:
        return self.element.evaluate(u, v)

    def evaluate_many(self, pts):
        return self.element.evaluate_many(pts)

    @property
    def terms(self):
        return self.element.terms


def _build_doubled(make, n: int, label: str, config: Config) -> IntegralElement:
    """Assemble make(n) and make(2n), recording the probe drift between
    them; the finer sum is kept."""
    coarse, _ = make(int(n))
    fine, rule = make(2 * int(n))
    drift = max_residual(coarse, fine)
    return IntegralElement(fine, rule, drift, bool(drift < config.tol_quad), label)


def _flow_nodes(A, K, head, nodes, config: Config, trace_term: bool = True):
    """Flow values at ``nodes``, reached by one continuation walk that
    passes through the ``head`` points first (head values are discarded).
    The concatenated list must form a usable polyline: callers keep the
    nodes disjoint from the head and ordered along the walk."""
    walk = list(head) + list(nodes)
    vals = flow_values(A, K, walk, config, trace_term=trace_term)
    return vals[len(head):]


def _vertical_nodes(s: float, lo: float, hi: float, n: int):
    """Uniform midpoint ladder s + i t with t in [lo, hi)."""
    step = (hi - lo) / n
    return [complex(s, lo + (j + 0.5) * step) for j in range(n)]


def _vertical_head(s: float):
    return [0j] if s == 0.0 else [0j, complex(s)]


# ---------------------------------------------------------------------------
# vertical period averages


def contour_strip(K: ExpressionParameter, config: Config = DEFAULT_CONFIG):
    """Open window of contour heights admissible for the mixed flow.

    Raises StarSingularity when the window is empty or degenerate (the
    zero parameter folds both singular families onto the real axis, for
    instance), since no vertical period average exists there.
    """
    iv = exchanging_interval(MIXED_GENERATOR, K, config)
    if iv.kind != "strip":
        raise StarSingularity(
            "period averaging needs an open window of contour heights; "
            f"this parameter gives kind={iv.kind!r}"
        )
    return iv


def pseudo_vacuum(
    K: ExpressionParameter,
    s: float = 0.0,
    nodes: int = 128,
    config: Config = DEFAULT_CONFIG,
) -> IntegralElement:
    """Period average of the mixed flow along the vertical line at height s.

    Strictly inside the admissible window the flow is periodic over one
    period, and the average is the projector-type element: idempotent,
    independent of the height, and killed on both sides by the mixed
    quadratic shifted to its symmetric ordering.  Outside the window the
    flow alternates, so the average is taken over two periods and
    collapses to zero; ``info['inside']`` records which case was built,
    and ``info['magnitude']`` the probe size of the result.
    """
    iv = contour_strip(K, config)
    s = float(s)
    if min(abs(s - iv.a), abs(s - iv.b)) < 10.0 * config.tol_quad:
        raise StarSingularity("contour height sits on a singular line")
    inside = iv.a < s < iv.b
    head = _vertical_head(s)

    def make(n):
        if inside:
            nds = _vertical_nodes(s, 0.0, _TWO_PI, n)
            w = 1.0 / n
        else:
            nds = _vertical_nodes(s, -_TWO_PI, _TWO_PI, 2 * n)
            w = 1.0 / (2 * n)
        vals = _flow_nodes(MIXED_GENERATOR, K, head, nds, config)
        rule = QuadratureRule(
            f"vertical period average at height {s:g}"
            + ("" if inside else " (two-period window)"),
            tuple(nds),
            (w,) * len(nds),
        )
        return _wrap_sum(v.scale(w) for v in vals), rule

    out = _build_doubled(make, nodes, "period-averaged projector", config)
    out.info.update(
        window=(iv.a, iv.b),
        height=s,
        inside=inside,
        magnitude=probe_magnitude(out.element, config),
    )
    return out


def limit_vacuum_contour(
    K: ExpressionParameter,
    s: float,
    nodes: int = 64,
    side: str = "plus",
    config: Config = DEFAULT_CONFIG,
) -> IntegralElement:
    """One-period average of the one-sided ordered exponentials at height s.

    side='plus' weights the flow with the scalar e^{+(s+it)/2} and
    requires s above the admissible window; there the alternating scalar
    cancels the alternating flow, the integrand is periodic, and the
    average reproduces the upper limit element of :func:`limit_vacuum`
    independently of s.  side='minus' uses the mirrored weight
    e^{-(s+it)/2} below the window and reproduces the lower limit
    element the same way; with the un-mirrored weight the average below
    the window collapses instead (tests pin both behaviours).
    """
    iv = contour_strip(K, config)
    s = float(s)
    margin = 10.0 * config.tol_quad
    if side == "plus":
        if s <= iv.b + margin:
            raise StarSingularity("height must lie above the admissible window")
        pref = 0.5
    elif side == "minus":
        if s >= iv.a - margin:
            raise StarSingularity("height must lie below the admissible window")
        pref = -0.5
    else:
        raise ValueError("side must be 'plus' or 'minus'")
    head = _vertical_head(s)

    def make(n):
        nds = _vertical_nodes(s, 0.0, _TWO_PI, n)
        vals = _flow_nodes(MIXED_GENERATOR, K, head, nds, config)
        terms = [
            _as_term(v).scale(cmath.exp(pref * z) / n) for z, v in zip(nds, vals)
        ]
        rule = QuadratureRule(
            f"weighted one-period average at height {s:g} ({side})",
            tuple(nds),
            tuple(cmath.exp(pref * z) / n for z in nds),
        )
        return ElementSum(terms), rule

    out = _build_doubled(make, nodes, f"one-sided period average ({side})", config)
    out.info.update(window=(iv.a, iv.b), height=s, side=side,
                    magnitude=probe_magnitude(out.element, config))
    return out


# ---------------------------------------------------------------------------
# the two one-sided limits, in closed form


def _mixed_pieces(K: ExpressionParameter):
    lam = 0.5j  # principal square root of det(MIXED_GENERATOR)
    a1 = MIXED_GENERATOR.as_matrix() / lam
    return a1, a1 @ K.as_matrix()


def limit_vacuum(
    K: ExpressionParameter,
    side: str = "plus",
    config: Config = DEFAULT_CONFIG,
    check_height: float = 12.0,
) -> GaussianElement:
    """Limit of the one-sided mixed exponentials at infinite height.

    side='plus' is the limit of the e^{s/2}-weighted flow as s -> +inf
    (killed by u on the left and by v on the right); side='minus' the
    mirrored limit as s -> -inf (killed by v on the left and by u on the
    right).  Both are idempotent.  The closed form is cross-checked
    against the flow at two finite heights and must settle below the
    quadrature tolerance, otherwise the parameter is rejected.
    """
    a1, m = _mixed_pieces(K)
    ident = np.eye(2, dtype=complex)
    if side == "plus":
        p, q = ident - 1j * m, ident + 1j * m
        orient = 1.0
    elif side == "minus":
        p, q = ident + 1j * m, ident - 1j * m
        orient = -1.0
    else:
        raise ValueError("side must be 'plus' or 'minus'")
    try:
        b = 1j * orient * np.linalg.solve(p, a1)
    except np.linalg.LinAlgError:
        raise StarSingularity("the one-sided limit degenerates for this parameter")
    b = 0.5 * (b + b.T)

    def dfun(x):
        mat = p + complex(x) * q
        return mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]

    w, _ = continue_det_sqrt(dfun, [1.0, 0.0], config)
    g = GaussianElement(
        2.0 / w,
        QuadForm(b[0, 0], b[0, 1], b[1, 1]),
        (0j, 0j),
        K,
        1,
        config,
    )
    # the defining limit, probed at two heights: the drift must keep
    # shrinking and beat the tolerance at the farther height
    drifts = []
    for h in (check_height, 2.0 * check_height):
        z = complex(orient * h)
        val = flow_values(MIXED_GENERATOR, K, [0j, z], config)[-1]
        drifts.append(max_residual(g, val.scale(cmath.exp(0.5 * h))))
    if not (drifts[1] < config.tol_quad and drifts[1] <= drifts[0] + config.tol_closed):
        raise StarSingularity(
            f"one-sided flow does not settle (drifts {drifts[0]:.3e}, {drifts[1]:.3e})"
        )
    return g


# ---------------------------------------------------------------------------
# half-line Laplace weights: one-sided inverses

_PANEL_EDGES = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 28.0, 40.0)


def _half_line_nodes(n_per_panel: int, cutoff: float):
    nodes, weights = [], []
    edges = [e for e in _PANEL_EDGES if e < cutoff] + [float(cutoff)]
    for x0, x1 in zip(edges, edges[1:]):
        nds, ws = _gauss_segment(n_per_panel, x0, x1)
        nodes += nds
        weights += ws
    return nodes, weights


def _inverse_uv_sum(K, n_per_panel, cutoff, config):
    """Quadrature sum for the one-sided star inverse of u*v: minus
    (1/ih) times the half-line integral of the lowered one-sided
    exponential, whose scalar weight e^{-s/2} bounds the dropped tail by
    about 2 e^{-cutoff/2}."""
    nds, ws = _half_line_nodes(n_per_panel, cutoff)
    vals = _flow_nodes(MIXED_GENERATOR, K, [0j], [complex(x) for x in nds], config)
    c = -config.inv_ih
    terms = [
        _as_term(v).scale(c * w * math.exp(-0.5 * x))
        for x, w, v in zip(nds, ws, vals)
    ]
    rule = QuadratureRule(
        f"half-line Gauss panels up to {cutoff:g} with weight e^(-s/2)",
        tuple(complex(x) for x in nds),
        tuple(ws),
    )
    return ElementSum(terms), rule


def star_inverse_uv(
    K: ExpressionParameter,
    panel_nodes: int = 8,
    cutoff: float = 40.0,
    config: Config = DEFAULT_CONFIG,
) -> IntegralElement:
    """One-sided star inverse of u*v (the lowered mixed product).

    Starred with u*v from either side it gives 1 minus the upper limit
    projector's contribution where applicable; it is an even element, so
    it commutes with the half-period parity element.
    """
    def make(n):
        return _inverse_uv_sum(K, n, cutoff, config)

    out = _build_doubled(make, panel_nodes, "one-sided inverse of u*v", config)
    out.info.update(cutoff=cutoff)
    return out


def half_inverse_u(
    K: ExpressionParameter,
    panel_nodes: int = 8,
    cutoff: float = 40.0,
    config: Config = DEFAULT_CONFIG,
) -> IntegralElement:
    """Right star inverse of the coordinate u.

    u * half_inverse_u(K) = 1, while the reversed product equals 1 minus
    the upper limit projector -- the gap that makes one-sided inverses
    break associativity in triples with that projector.
    """
    vpoly = WeylPoly.gen_v().float_copy()

    def make(n):
        base, rule = _inverse_uv_sum(K, n, cutoff, config)
        return (
            ElementSum([lmul_poly(vpoly, t, config) for t in base.terms]),
            rule,
        )

    out = _build_doubled(make, panel_nodes, "right inverse of u", config)
    out.info.update(cutoff=cutoff)
    return out


# ---------------------------------------------------------------------------
# matrix elements over the limit projectors


@dataclass
class MatrixElementTable:
    """Star matrix units E[p,q] with E[p,q] * E[r,s] = delta(q,r) E[p,s].

    side='plus' sandwiches the upper limit projector between left
    v-powers and right u-powers, with an extra i-power in the
    normalisation; side='minus' sandwiches the lower projector between
    left u-powers and right v-powers.  The scalar normaliser uses the
    fixed branch (i hbar)^(1/2) = e^(i pi/4) sqrt(hbar).
    """

    K: ExpressionParameter
    side: str
    degree: int
    core: GaussianElement
    config: Config = DEFAULT_CONFIG
    _left: list = field(default_factory=list)
    _right: list = field(default_factory=list)
    _units: dict = field(default_factory=dict)

    def _coef(self, k: int) -> complex:
        root_ih = cmath.exp(0.25j * math.pi) * math.sqrt(self.config.hbar)
        base = 1.0 / (math.sqrt(float(math.factorial(k))) * root_ih**k)
        if self.side == "plus":
            return (1j**k) * base
        return base

    def unit(self, p: int, q: int) -> ElementSum:
        key = (int(p), int(q))
        if key not in self._units:
            p, q = key
            pg = PolyGaussian.from_gaussian(self.core)
            if p:
                pg = lmul_poly(self._left[p], pg, self.config)
            if q:
                pg = rmul_poly(pg, self._right[q], self.config)
            self._units[key] = ElementSum([pg.scale(self._coef(p) * self._coef(q))])
        return self._units[key]

    def relation_residual(self, degree: int | None = None) -> float:
        """Worst probe deviation of unit(p,q)*unit(r,s) from its target
        delta(q,r) unit(p,s), over all indices up to ``degree``."""
        dmax = self.degree if degree is None else int(degree)
        worst = 0.0
        rng = range(dmax + 1)
        for p in rng:
            for q in rng:
                left = self.unit(p, q)
                for r in rng:
                    for s in rng:
                        prod = left.star(self.unit(r, s), self.config, K=self.K)
                        if q == r:
                            res = max_residual(prod, self.unit(p, s))
                        else:
                            res = probe_magnitude(prod, self.config)
                        worst = max(worst, res)
        return worst

    def partial_identity(self, n: int) -> ElementSum:
        """Sum of the diagonal units with indices 0..n."""
        total = ElementSum.from_any(0.0, config=self.config)
        for k in range(int(n) + 1):
            total = total + self.unit(k, k)
        return total

    def identity_deviation(self, n: int, pts=None) -> float:
        """Largest deviation of the diagonal partial sum from 1 on the
        given points (default: the real probe sub-grid, where the partial
        sums converge; at complex probes they need not)."""
        pts = pts if pts is not None else [
            p for p in probe_points() if abs(p[0].imag if isinstance(p[0], complex) else 0.0) == 0.0
            and abs(p[1].imag if isinstance(p[1], complex) else 0.0) == 0.0
        ]
        vals = self.partial_identity(n).evaluate_many(pts)
        return float(np.max(np.abs(vals - 1.0)))


def matrix_units(
    K: ExpressionParameter,
    degree: int = 3,
    side: str = "minus",
    config: Config = DEFAULT_CONFIG,
) -> MatrixElementTable:
    """Build the star matrix-unit table over a limit projector."""
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    core = limit_vacuum(K, side, config)
    degree = int(degree)
    cap = max(12, degree + 1)
    upoly = WeylPoly.gen_u().float_copy()
    vpoly = WeylPoly.gen_v().float_copy()
    upow = [star_power(upoly, k, K, config, cap) for k in range(degree + 1)]
    vpow = [star_power(vpoly, k, K, config, cap) for k in range(degree + 1)]
    left, right = (vpow, upow) if side == "plus" else (upow, vpow)
    table = MatrixElementTable(K, side, degree, core, config)
    table._left = left
    table._right = right
    return table


def laurent_unit(
    K: ExpressionParameter,
    k: int,
    l: int,
    base: IntegralElement | None = None,
    config: Config = DEFAULT_CONFIG,
) -> ElementSum:
    """Two-sided (Laurent-style) matrix element over the period-averaged
    projector: positive indices use u-powers on the left and v-powers on
    the right, negative indices swap the coordinates; the normaliser uses
    half-integer Pochhammer weights with the fixed principal branch."""
    from scipy.special import poch

    if base is None:
        base = pseudo_vacuum(K, 0.0, 48, config)
    k, l = int(k), int(l)
    cap = max(12, abs(k) + 1, abs(l) + 1)
    upoly = WeylPoly.gen_u().float_copy()
    vpoly = WeylPoly.gen_v().float_copy()
    lpoly = star_power(upoly if k >= 0 else vpoly, abs(k), K, config, cap)
    rpoly = star_power(vpoly if l >= 0 else upoly, abs(l), K, config, cap)
    norm = 1.0 / cmath.sqrt(
        complex(poch(0.5, k))
        * complex(poch(0.5, l))
        * (1j * config.hbar) ** (abs(k) + abs(l))
    )
    terms = []
    for t in base.element.terms:
        pg = t
        if k != 0:
            pg = lmul_poly(lpoly, pg, config)
        if l != 0:
            pg = rmul_poly(pg, rpoly, config)
        terms.append(pg.scale(norm))
    return ElementSum(terms)


# ---------------------------------------------------------------------------
# pairing between the two projector families


@dataclass
class PairingReport:
    order: int
    window: tuple
    height_upper: float
    height_lower: float
    nodes: int
    ratio: complex
    expected: float
    residual: float
    collapsed_ratio: complex
    collapsed_residual: float
    bracketing_gap: float
    chain_margin: float
    chain_wrap: int
    ratio_drift: float


def _chained_products(left, rights):
    """polygauss_mul(left, r) for r along a closed parameter circle, the
    square-root sheet of each product chained by continuity of the probe
    values (the first product, taken next to the real axis, anchors the
    chain in the convergent regime).  Returns the signed products, the
    worst tracking margin (1 = unambiguous, 0 = tie), and the wrap sign
    of the chain around the circle."""
    pts = probe_points()
    out = []
    margin = 1.0
    sign = 1.0
    prev = None
    first = None
    for r in rights:
        q = polygauss_mul(left, r)
        z = np.array([q.evaluate(u, v) for u, v in pts])
        if prev is not None:
            dplus = float(np.max(np.abs(z - prev)))
            dminus = float(np.max(np.abs(z + prev)))
            if dplus > dminus:
                sign = -sign
            scale = max(float(np.max(np.abs(z))), 1e-300)
            margin = min(margin, abs(dplus - dminus) / (2.0 * scale))
        zz = sign * z
        if first is None:
            first = zz
        out.append(q.scale(sign))
        prev = zz
    dplus = float(np.max(np.abs(first - prev)))
    dminus = float(np.max(np.abs(first + prev)))
    wrap = 1 if dplus <= dminus else -1
    return out, margin, wrap


def bilateral_pairing(
    K: ExpressionParameter,
    order: int,
    nodes: int = 96,
    config: Config = DEFAULT_CONFIG,
) -> PairingReport:
    """Triple product of the upper limit projector, a u-power, and the
    period-averaged projector, measured against (projector * u-power).

    The witness heights s (above the window) and sigma = -s/(2*order)
    (inside it, with order*sigma + s/2 = 0 and s + sigma inside the
    window) are checked for feasibility and reported.  The triple
    product itself is assembled from the elements: the closed-form upper
    limit, the u-power, and the period-average ladder, with the
    square-root sheet of each Gaussian product chained by continuity
    along the ladder circle.  Both bracketings are computed; their
    relative gap is reported (they agree at machine precision).

    ``ratio``/``residual`` fit (2 pi)^2 times the triple product against
    the stated reference ray (projector * u-power).  The measured
    product does not lie on that ray: it collapses onto
    (upper limit * u-power), whose fit is reported as
    ``collapsed_ratio``/``collapsed_residual``.  The stated limit
    4/(2*order - 1) is kept in ``expected`` so callers can judge the
    discrepancy themselves.
    """
    l = int(order)
    if l < 1:
        raise ValueError("order must be a positive integer")
    iv = contour_strip(K, config)
    a, b = iv.a, iv.b
    s_hi = min(2.0 * l * b / (2.0 * l - 1.0), 2.0 * l * (-a))
    margin = 50.0 * config.tol_quad
    if s_hi <= b + 2.0 * margin:
        raise StarSingularity(
            "no admissible representation height for this order: the window "
            f"({a:g}, {b:g}) is too lopsided"
        )
    s = 0.5 * (b + s_hi)
    sigma = -s / (2.0 * l)

    gpg = _as_term(limit_vacuum(K, "plus", config))
    cap = max(12, l + 1)
    upow = star_power(WeylPoly.gen_u().float_copy(), l, K, config, cap)
    head = rmul_poly(gpg, upow, config)
    pts = probe_points()

    def assemble(n):
        nds = _vertical_nodes(0.0, 0.0, _TWO_PI, n)
        vals = _flow_nodes(MIXED_GENERATOR, K, _vertical_head(0.0), nds, config)
        terms = [_as_term(v) for v in vals]
        mids = [lmul_poly(upow, t, config) for t in terms]
        prods, chain_margin, wrap = _chained_products(gpg, mids)
        lhs = ElementSum([q.scale(_TWO_PI**2 / n) for q in prods])
        prods2, margin2, wrap2 = _chained_products(head, terms)
        lhs2 = ElementSum([q.scale(_TWO_PI**2 / n) for q in prods2])
        rhs = ElementSum([rmul_poly(t, upow, config).scale(1.0 / n) for t in terms])
        return lhs, lhs2, rhs, min(chain_margin, margin2), min(wrap, wrap2)

    def fit(lhs_vec, rhs_vec):
        ratio = complex(np.vdot(rhs_vec, lhs_vec) / np.vdot(rhs_vec, rhs_vec))
        resid = float(
            np.max(np.abs(lhs_vec - ratio * rhs_vec))
            / max(float(np.max(np.abs(lhs_vec))), 1e-300)
        )
        return ratio, resid

    n = int(nodes)
    lhs_c, _, rhs_c, _, _ = assemble(n)
    lhs, lhs2, rhs, chain_margin, wrap = assemble(2 * n)
    lv = lhs.evaluate_many(pts)
    l2v = lhs2.evaluate_many(pts)
    rv = rhs.evaluate_many(pts)
    ratio, residual = fit(lv, rv)
    ratio_c, _ = fit(lhs_c.evaluate_many(pts), rhs_c.evaluate_many(pts))
    upper_ray = rmul_poly(gpg, upow, config)
    uv = np.array([upper_ray.evaluate(u, v) for u, v in pts])
    collapsed_ratio, collapsed_residual = fit(lv, uv)
    gap = float(np.max(np.abs(lv - l2v)) / max(float(np.max(np.abs(lv))), 1e-300))
    return PairingReport(
        order=l,
        window=(a, b),
        height_upper=s,
        height_lower=sigma,
        nodes=2 * n,
        ratio=ratio,
        expected=4.0 / (2.0 * l - 1.0),
        residual=residual,
        collapsed_ratio=collapsed_ratio,
        collapsed_residual=collapsed_residual,
        bracketing_gap=gap,
        chain_margin=chain_margin,
        chain_wrap=wrap,
        ratio_drift=abs(ratio - ratio_c),
    )


# ---------------------------------------------------------------------------
# associativity witness


@dataclass
class WitnessReport:
    window: tuple
    delta: float
    ratio: complex
    expected: float
    gap: float
    residual: float
    inner_ratio: complex
    inner_expected: complex
    edge_inside_drift: float
    edge_outside_magnitude: float
    outside_start: float


def _two_period_column(K, s, n, config, bump: float = 0.0):
    """Two-period vertical average of the mixed flow at height s (the
    honest integrand of the witness: the projector inside the window,
    zero outside).

    A vertical line that passes close to a singular copy converges
    slowly; ``bump`` deforms the segment sideways with an endpoint-fixed
    profile (cos^2(x/4), zero at both ends), which leaves the integral
    unchanged while clearing the pole.  Weights carry the path
    derivative."""
    m = 2 * n
    h = 2.0 * _TWO_PI / m
    out = []
    nds, wts = [], []
    for j in range(m):
        x = -_TWO_PI + (j + 0.5) * h
        prof = math.cos(0.25 * x) ** 2
        nds.append(complex(s - bump * prof, x))
        wts.append((1.0 - 0.25j * bump * math.sin(0.5 * x)) / m)
    vals = _flow_nodes(MIXED_GENERATOR, K, _vertical_head(s), nds, config)
    return [_as_term(v).scale(w) for v, w in zip(vals, wts)]


def _line_spike(K, s, config):
    """Largest node magnitude on a coarse two-period scan of the
    vertical line at height s."""
    vals = _two_period_column(K, s, 24, config)
    return max(probe_magnitude(_wrap_sum([v]), config) for v in vals)


def _outside_start(K, b, d, config, ceiling: float = 50.0):
    """First height past the window edge whose vertical line clears the
    singular neighbourhood (coarse scan stays below the ceiling).  The
    true integrand vanishes on the whole outside half-line, so skipping
    the hot zone changes nothing analytically; it only moves the
    numerical panels to where the quadrature can certify the zero."""
    s = b + d
    for _ in range(16):
        try:
            if _line_spike(K, s, config) < ceiling:
                return s
        except StarSingularity:
            pass
        s += 0.15
    return s


def associativity_witness(
    K: ExpressionParameter,
    t_nodes: int = 128,
    s_nodes: int = 16,
    delta: float = 0.1,
    config: Config = DEFAULT_CONFIG,
) -> WitnessReport:
    """Quantifies the associativity failure of the one-sided inverse.

    (u * half_inverse_u) * P equals P exactly (the inner product is 1),
    but associating the other way gives u * (half_inverse_u * P) =
    (1 - e^{-b/2}) P, where P is the period-averaged projector and b the
    upper edge of the admissible window.  The inner element is computed
    in the faithful repeated-integral manner: the half-line integral of
    e^{-s/2} v * (two-period average at height s), whose integrand
    switches from v * P to 0 as s crosses b.  The height integral is
    split at b +- delta; the strip between is replaced by its exact
    scalar contribution (the integrand is pinned to its two edge values
    as a consistency check, reported in the result).  The vertical
    quadrature converges like exp(-c m |b - s|), so the node count per
    height grows inversely with the distance to the window edge
    (``t_nodes`` is the floor).
    """
    iv = contour_strip(K, config)
    b = iv.b
    d = float(delta)
    ref = pseudo_vacuum(K, 0.0, 64, config).element
    vpoly = WeylPoly.gen_v().float_copy()
    upoly = WeylPoly.gen_u().float_copy()
    c_ih = -config.inv_ih

    def height_nodes(dist):
        return int(min(2048, max(int(t_nodes), math.ceil(75.0 / max(abs(dist), 0.02)))))

    start = _outside_start(K, b, d, config)
    raw = []
    panels = (
        (0.0, b - d, int(s_nodes)),
        (start, start + 8.0, max(4, int(s_nodes) // 2)),
        (start + 8.0, start + 24.0, max(4, int(s_nodes) // 4)),
    )
    for x0, x1, n in panels:
        nds, ws = _gauss_segment(n, x0, x1)
        for z, w in zip(nds, ws):
            s = float(np.real(z))
            col = _two_period_column(K, s, height_nodes(b - s), config)
            wgt = w * math.exp(-0.5 * s)
            raw.extend(t.scale(wgt) for t in col)
    # exact scalar contribution of the strip [b-delta, b+delta]: the
    # integrand equals the projector up to b and vanishes beyond it
    # (the skipped stretch [b, start] contributes exactly zero)
    c_mid = 2.0 * (math.exp(-0.5 * (b - d)) - math.exp(-0.5 * b))
    raw.extend(t.scale(c_mid) for t in ref.terms)

    inner = ElementSum([lmul_poly(vpoly, t, config) for t in raw]).scale(c_ih)
    outer = ElementSum([lmul_poly(upoly, t, config) for t in inner.terms])

    pts = probe_points()
    ov = outer.evaluate_many(pts)
    rv = ref.evaluate_many(pts)
    ratio = complex(np.vdot(rv, ov) / np.vdot(rv, rv))
    residual = float(np.max(np.abs(ov - ratio * rv)))
    expected = 1.0 - math.exp(-0.5 * b)

    v_ref = ElementSum([lmul_poly(vpoly, t, config) for t in ref.terms])
    iv_ = inner.evaluate_many(pts)
    vv = v_ref.evaluate_many(pts)
    inner_ratio = complex(np.vdot(vv, iv_) / np.vdot(vv, vv))
    inner_expected = c_ih * 2.0 * (1.0 - math.exp(-0.5 * b))

    edge_in = ElementSum(_two_period_column(K, b - d, height_nodes(d), config))
    edge_out = ElementSum(_two_period_column(K, start, height_nodes(start - b), config))
    return WitnessReport(
        window=(iv.a, iv.b),
        delta=d,
        ratio=ratio,
        expected=expected,
        gap=abs(ratio - 1.0),
        residual=residual,
        inner_ratio=inner_ratio,
        inner_expected=inner_expected,
        edge_inside_drift=max_residual(edge_in, ref),
        edge_outside_magnitude=probe_magnitude(edge_out, config),
        outside_start=start,
    )


# ---------------------------------------------------------------------------
# sphere-averaged projector

def _cubature26():
    pts = []
    w1, w2, w3 = 1.0 / 21.0, 4.0 / 105.0, 27.0 / 840.0
    for sgn in (1.0, -1.0):
        for ax in range(3):
            vec = [0.0, 0.0, 0.0]
            vec[ax] = sgn
            pts.append((w1, tuple(vec)))
    r = 1.0 / math.sqrt(2.0)
    for i in range(3):
        for j in range(i + 1, 3):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    vec = [0.0, 0.0, 0.0]
                    vec[i], vec[j] = si * r, sj * r
                    pts.append((w2, tuple(vec)))
    c = 1.0 / math.sqrt(3.0)
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            for sz in (1.0, -1.0):
                pts.append((w3, (sx * c, sy * c, sz * c)))
    return tuple(pts)


#: 26-point octahedral cubature on the unit sphere (weights sum to 1,
#: exact through degree 7): 6 axis points, 12 edge midpoints, 8 corners.
SPHERE_GRID_26 = _cubature26()


@dataclass
class SphereVacuumReport:
    element: ElementSum
    drift: float
    aligned_residual: float
    polar_residual: float
    half_period_residual: float
    period_residual: float
    column_spread: float
    invariance_residual: float
    annihilation_residual: float
    projector_ratio: complex
    skipped: tuple
    grid: int
    t_nodes: int


def _sphere_generator(point) -> QuadForm:
    al, be, ga = point
    return QuadForm(0.5 * (al + 1j * be), 0.5j * ga, 0.5 * (al - 1j * be))


def _sphere_generator_poly(point, K: ExpressionParameter, config: Config) -> WeylPoly:
    """Left-multiplication form of a sphere direction's flow generator.

    The flow of a direction solves dF/dt = G * F where G is the
    quadratic form rewritten as an ordered product square; that rewrite
    adds the ordering scalar tr(a K)/4 to the plain quadratic
    (1/i hbar) <u a/2, u>.  Returned as a polynomial ready for lmul.
    """
    qf = _sphere_generator(point)
    c = 1.0 / (1j * config.hbar)
    poly = (
        WeylPoly.monomial(2, 0, c * complex(qf.a11))
        + WeylPoly.monomial(1, 1, c * 2 * complex(qf.a12))
        + WeylPoly.monomial(0, 2, c * complex(qf.a22))
    )
    tr_ak = 2.0 * (
        complex(qf.a11) * complex(K.k11)
        + 2.0 * complex(qf.a12) * complex(K.k12)
        + complex(qf.a22) * complex(K.k22)
    )
    return poly + WeylPoly.monomial(0, 0, 0.25 * tr_ak)


def su2_vacuum(
    K: ExpressionParameter,
    t_nodes: int = 128,
    config: Config = DEFAULT_CONFIG,
    nice_samples: int = 200,
    invariance_time: float = 0.7,
) -> SphereVacuumReport:
    """Average of the compact rotation group's flows over the whole group.

    Each sphere direction contributes the one-period average of its
    quadratic flow (a column); the element returned is the 26-point
    cubature average of the columns.  Four per-direction identities hold
    to quadrature accuracy and are reported: every column is annihilated
    on the left by its own flow generator (``aligned_residual``, the
    period integral of an exact derivative), the polar column reproduces
    the vertical period average (``polar_residual``), and each flow
    passes through the polar projector at half period and through one at
    the full period (``half_period_residual``, ``period_residual``).

    The remaining fields are honest diagnostics rather than small
    numbers: under the engine's principal-value products the columns of
    different directions are *different* elements -- each is the vacuum
    of its own direction, conjugate to but not equal to the polar one --
    so the cross-direction spread (``column_spread``), the invariance of
    the raw average under a group flow (``invariance_residual``) and its
    annihilation by the three rotation generators
    (``annihilation_residual``) come out order one, not zero.  They are
    reported as measured.  Columns whose walk hits a singular point (the
    exceptional classes) are skipped and listed.
    """
    rep = is_nice(K, samples=nice_samples, config=config)
    if not rep.is_nice:
        raise StarSingularity(
            "sphere averaging needs a uniform +1 half-period sign; "
            f"{len(rep.counterexamples)} counterexample(s) found"
        )
    n = int(t_nodes)

    def column(qf, m, delta):
        nds = [complex((j + 0.5) * _TWO_PI / m, delta) for j in range(m)]
        vals = _flow_nodes(qf, K, [0j], nds, config)
        return _wrap_sum(v.scale(1.0 / m) for v in vals)

    def spike(qf, delta):
        nds = [complex((j + 0.5) * _TWO_PI / 24, delta) for j in range(24)]
        vals = _flow_nodes(qf, K, [0j], nds, config)
        return max(probe_magnitude(_wrap_sum([v]), config) for v in vals)

    # A direction whose flow passes near a singular time converges slowly
    # on the real period circle; the period average is contour-invariant
    # inside the pole-free band, so shift such a column's circle to the
    # quieter side.  The aligned residual below certifies the choice.
    r = config.detour_radius
    deltas = (0.0, 0.5 * r, -0.5 * r, r, -r)

    cols_fine, cols_coarse, weights, points, skipped = [], [], [], [], []
    for w, p in SPHERE_GRID_26:
        qf = _sphere_generator(p)
        try:
            delta = min(deltas, key=lambda d: spike(qf, d))
            fine = column(qf, 2 * n, delta)
            coarse = column(qf, n, delta)
        except StarSingularity:
            skipped.append(p)
            continue
        cols_fine.append(fine)
        cols_coarse.append(coarse)
        weights.append(w)
        points.append(p)
    if not cols_fine:
        raise StarSingularity("every sphere column hit a singular point")
    total_w = sum(weights)

    def average(cols):
        terms = []
        for w, c in zip(weights, cols):
            terms.extend(t.scale(w / total_w) for t in c.terms)
        return ElementSum(terms)

    omega_fine = average(cols_fine)
    omega_coarse = average(cols_coarse)
    drift = max_residual(omega_coarse, omega_fine)

    aligned = 0.0
    for p, c in zip(points, cols_fine):
        gen = _sphere_generator_poly(p, K, config).float_copy()
        killed = ElementSum([lmul_poly(gen, t, config) for t in c.terms])
        aligned = max(
            aligned, probe_magnitude(killed, config) / max(probe_magnitude(c, config), 1e-300)
        )

    column_spread = max(
        (max_residual(c, cols_fine[0]) for c in cols_fine[1:]), default=0.0
    )
    pv = pseudo_vacuum(K, 0.0, max(32, n), config)
    polar_qf = _sphere_generator((0.0, 0.0, 1.0))
    polar = column(polar_qf, 2 * n, min(deltas, key=lambda d: spike(polar_qf, d)))
    polar_residual = max_residual(polar, pv.element)

    g0 = _sphere_generator(points[0])
    flow_el = star_exp_quad(g0, invariance_time, K, config)
    moved = ElementSum.from_any(flow_el, config=config).star(omega_fine, config, K=K)
    invariance_residual = max_residual(moved, omega_fine)

    ann = 0.0
    for le in le_basis(K, config):
        lef = le.float_copy()
        killed = ElementSum([lmul_poly(lef, t, config) for t in omega_fine.terms])
        ann = max(ann, probe_magnitude(killed, config))

    eps = polar_set(K, "nice", config)["eps00"]
    unit = star_exp_quad(g0, 0.0, K, config)
    half_period_residual = 0.0
    period_residual = 0.0
    for p in points:
        walk = flow_values(
            _sphere_generator(p),
            K,
            [0j, complex(0.5 * math.pi), complex(math.pi), complex(1.5 * math.pi), complex(_TWO_PI)],
            config,
        )
        half_period_residual = max(half_period_residual, max_residual(walk[2], eps))
        period_residual = max(period_residual, max_residual(walk[4], unit))

    col0 = cols_fine[0]
    sq = col0.star(col0, config, K=K)
    pts = probe_points()
    sv = sq.evaluate_many(pts)
    cv = col0.evaluate_many(pts)
    projector_ratio = complex(np.vdot(cv, sv) / np.vdot(cv, cv))

    return SphereVacuumReport(
        element=omega_fine,
        drift=drift,
        aligned_residual=aligned,
        polar_residual=polar_residual,
        half_period_residual=half_period_residual,
        period_residual=period_residual,
        column_spread=column_spread,
        invariance_residual=invariance_residual,
        annihilation_residual=ann,
        projector_ratio=projector_ratio,
        skipped=tuple(skipped),
        grid=len(points),
        t_nodes=2 * n,
    )


# ---------------------------------------------------------------------------
# half-power Laplace weights: square-root regulators


def _cvz_alternating(a) -> complex:
    """Sum of (-1)^k a_k for a slowly varying tail, by the Cohen /
    Rodriguez Villegas / Zagier acceleration (error ~ (3+sqrt(8))^-n)."""
    n = len(a)
    d = (3.0 + math.sqrt(8.0)) ** n
    d = (d + 1.0 / d) / 2.0
    b = -1.0
    c = -d
    s = 0j
    for k in range(n):
        c = b - c
        s = s + c * complex(a[k])
        b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0))
    return s / d


def _half_power_fold(t: float, c: complex, terms: int = 24) -> complex:
    """S(t) = sum_{k>=0} c^k (t + k pi)^{-1/2}.

    c = -1 uses the accelerated alternating sum; |c| < 1 sums directly;
    the resonant value c = 1 diverges and other unit-modulus phases are
    rejected (no accelerated scheme is wired up for them).
    """
    if abs(c - 1.0) < 1e-12:
        raise StarSingularity(
            "resonant half-power weight: the folded series diverges"
        )
    if abs(c + 1.0) < 1e-12:
        return _cvz_alternating(
            [(t + k * math.pi) ** -0.5 for k in range(terms)]
        )
    if abs(c) < 1.0 - 1e-9:
        s = 0j
        ck = 1.0 + 0j
        for k in range(100000):
            s += ck * (t + k * math.pi) ** -0.5
            ck *= c
            if abs(ck) * (t + (k + 1) * math.pi) ** -0.5 < (1.0 - abs(c)) * 1e-17:
                break
        return s
    raise StarSingularity(
        "unit-modulus half-power weight other than -1 is not supported"
    )


def laplace_sqrt_scalar(p, nodes: int = 32, terms: int = 24) -> complex:
    """p^{-1/2} through the same folded half-power quadrature that builds
    the element-valued regulator (scalar cross-validation of the
    machinery): (1/sqrt(pi)) integral of t^{-1/2} e^{-pt}, folded onto
    [0, pi] with ratio e^{-p pi} and smoothed by t = x^2."""
    p = complex(p)
    c = cmath.exp(-p * math.pi)
    root_pi = math.sqrt(math.pi)
    nds, ws = _gauss_segment(int(nodes), 0.0, root_pi)
    total = 0j
    for x, w in zip(nds, ws):
        x = float(np.real(x))
        t = x * x
        total += w * 2.0 * x * _half_power_fold(t, c, terms) * cmath.exp(-p * t)
    return total / root_pi


@dataclass
class RootPair:
    """Star square root of the normalised shifted harmonic element and
    its star inverse, with the identity residuals that certify them."""

    root: ElementSum
    inverse_root: IntegralElement
    checks: dict


def harmonic_shift_root(
    K: ExpressionParameter,
    nodes: int = 32,
    fold_terms: int = 24,
    config: Config = DEFAULT_CONFIG,
) -> RootPair:
    """Square root and inverse square root of X = (1/ih)(u^2 + v^2 + 1).

    inverse_root is (1/sqrt(pi)) times the half-line integral of t^{-1/2}
    against the star exponential of -tX.  That exponential is the scalar
    e^{it/hbar} times the bare harmonic flow (no ordering constant),
    which is pi-periodic along the negative real ray for an admissible
    parameter; the half-line therefore folds onto one period with ratio
    c = e^{i pi / hbar} -- the alternating case at the default hbar --
    and the endpoint square-root singularity is removed by t = x^2.
    root is the plain symbol (u^2+v^2+1) scaled by (1/ih) and starred
    onto inverse_root from the left, which makes root * inverse_root = 1
    exactly (the unnormalised symbol would leave the scalar i hbar).
    """
    hbar = config.hbar
    c = cmath.exp(1j * math.pi / hbar)
    root_pi = math.sqrt(math.pi)

    def make(n):
        snodes, ws = _gauss_segment(n, 0.0, root_pi)
        xs = [float(np.real(z)) for z in snodes]
        ts = [x * x for x in xs]
        flows = _flow_nodes(
            HARMONIC_GENERATOR,
            K,
            [0j],
            [complex(-t) for t in ts],
            config,
            trace_term=False,
        )
        terms = []
        for x, w, t, g in zip(xs, ws, ts, flows):
            scale = (
                (1.0 / root_pi)
                * w
                * 2.0
                * x
                * _half_power_fold(t, c, fold_terms)
                * cmath.exp(1j * t / hbar)
            )
            terms.append(_as_term(g).scale(scale))
        rule = QuadratureRule(
            "folded half-power ladder on one period of the harmonic flow",
            tuple(complex(-t) for t in ts),
            tuple(ws),
        )
        return ElementSum(terms), rule

    inverse_root = _build_doubled(
        make, nodes, "inverse square root of the shifted harmonic element", config
    )

    pa, pb = flow_values(
        HARMONIC_GENERATOR,
        K,
        [0j, complex(-0.37), complex(-0.37 - math.pi)],
        config,
        trace_term=False,
    )[-2:]
    periodicity_drift = max_residual(pa, pb)

    q_plain = WeylPoly({(2, 0): 1.0, (0, 2): 1.0, (0, 0): 1.0})
    x_poly = q_plain * config.inv_ih
    root = ElementSum(
        [lmul_poly(x_poly, t, config) for t in inverse_root.element.terms]
    )

    left = root.star(inverse_root.element, config, K=K)
    right = inverse_root.element.star(root, config, K=K)
    checks = {
        "periodicity_drift": periodicity_drift,
        "root_times_inverse": max_residual(left, 1.0),
        "inverse_times_root": max_residual(right, 1.0),
        "scalar_probe": abs(laplace_sqrt_scalar(1.0, nodes, fold_terms) - 1.0),
    }
    return RootPair(root=root, inverse_root=inverse_root, checks=checks)


def linear_square_root(
    K: ExpressionParameter,
    sign: int = 1,
    nodes: int = 24,
    config: Config = DEFAULT_CONFIG,
) -> IntegralElement:
    """Square root L of the squared null linear form l = u + sign*i*v.

    L is an even element (a star function of l alone), so it commutes
    with l and with the half-period parity element, and satisfies
    (L - l) * (L + l) = 0 = (L + l) * (L - l).  Construction: with
    tau0 = <xi K, xi> for xi = (1, sign*i), the Gaussian family
    G_sigma = exp(-(sigma/ih) l^2) obeys l * l * G_sigma =
    (1-sigma tau0)^2 l^2 G_sigma + (1-sigma tau0)(ih tau0/2) G_sigma, and

        L = (2/sqrt(pi)) integral_0^{tau0^{-1/2}}
            (1/ih) [ (1 - x^2 tau0) l^2 + (ih/2) tau0 ] G_{x^2} dx

    along the straight complex segment to the principal endpoint (the
    integrand is entire in the deformation parameter, so the straight
    chart is a legitimate deformation).  A direction with tau0 = 0 has
    no such normalisation and is rejected.
    """
    si = 1j if sign >= 0 else -1j
    kmat = K.as_matrix()
    tau0 = complex(kmat[0, 0] + 2.0 * si * kmat[0, 1] + si * si * kmat[1, 1])
    if abs(tau0) < 1e3 * config.tol_closed:
        raise StarSingularity("degenerate direction: <xi K, xi> vanishes")
    rho0 = 1.0 / cmath.sqrt(tau0)
    l2 = WeylPoly({(2, 0): 1.0, (1, 1): 2.0 * si, (0, 2): si * si})
    root_pi = math.sqrt(math.pi)

    def make(n):
        nds, ws = _gauss_segment(n, 0j, rho0)
        terms = []
        for z, w in zip(nds, ws):
            core = GaussianElement(
                1.0,
                QuadForm(-z * z, -z * z * si, -z * z * si * si),
                (0j, 0j),
                K,
                1,
                config,
            )
            pref = (
                l2 * ((1.0 - z * z * tau0) * config.inv_ih)
                + WeylPoly.constant(0.5 * tau0)
            ) * (2.0 / root_pi * w)
            terms.append(PolyGaussian(pref, core))
        rule = QuadratureRule(
            "Gauss ladder on the straight segment to the principal "
            "inverse square root of <xi K, xi>",
            tuple(nds),
            tuple(ws),
        )
        return ElementSum(terms), rule

    out = _build_doubled(
        make, nodes, f"square root of the squared null form (sign {sign:+d})", config
    )
    out.info.update(tau0=tau0)
    return out


# ---------------------------------------------------------------------------
# canonical anticommuting pair


@dataclass
class FermionPair:
    """Pair (lowering, raising) with lowering^2 = raising^2 = 0 and
    lowering * raising + raising * lowering = 1, together with the
    complementary idempotents that encode the parity split."""

    lowering: ElementSum
    raising: ElementSum
    half_plus: ElementSum
    half_minus: ElementSum
    checks: dict


def fermion_pair(
    K: ExpressionParameter,
    panel_nodes: int = 8,
    config: Config = DEFAULT_CONFIG,
) -> FermionPair:
    """Canonical anticommuting pair built from the coordinate u, its
    right inverse, and the half-period parity element e (e * e = 1,
    e anticommutes with the coordinates): lowering = (1/2)(1 + e) * u,
    raising = (1/2)(1 - e) * right inverse of u.
    """
    eps = polar_set(K, "nice", config)["eps00"]
    one = GaussianElement.one(K, config)
    eps_sq = max_residual(gauss_mul(eps, eps), one)
    if eps_sq > 100.0 * config.tol_closed:
        raise StarSingularity(
            "the half-period element does not square to one for this parameter"
        )
    epss = ElementSum.from_any(eps, config=config)
    upoly = WeylPoly.gen_u().float_copy()
    u_el = ElementSum.from_any(upoly, config=config)
    ubul = half_inverse_u(K, panel_nodes, config=config)

    lowering = (u_el + epss.star(u_el, config, K=K)).scale(0.5)
    raising = (ubul.element - epss.star(ubul.element, config, K=K)).scale(0.5)
    half_plus = (ElementSum.from_any(1.0, config=config) + epss).scale(0.5)
    half_minus = (ElementSum.from_any(1.0, config=config) - epss).scale(0.5)

    low_sq = lowering.star(lowering, config, K=K)
    rai_sq = raising.star(raising, config, K=K)
    anti = lowering.star(raising, config, K=K) + raising.star(lowering, config, K=K)
    alt = u_el.star(half_minus, config, K=K)  # the mirrored writing of lowering
    hp_sq = half_plus.star(half_plus, config, K=K)
    cross = half_plus.star(half_minus, config, K=K)
    checks = {
        "parity_square": eps_sq,
        "lowering_square": probe_magnitude(low_sq, config),
        "raising_square": probe_magnitude(rai_sq, config),
        "anticommutator_is_one": max_residual(anti, 1.0),
        "two_writings_agree": max_residual(lowering, alt),
        "idempotent": max_residual(hp_sq, half_plus),
        "complementary": probe_magnitude(cross, config),
        "parity_coordinate_anticommute": probe_magnitude(
            epss.star(u_el, config, K=K) + u_el.star(epss, config, K=K), config
        ),
        "parity_inverse_anticommute": probe_magnitude(
            epss.star(ubul.element, config, K=K)
            + ubul.element.star(epss, config, K=K),
            config,
        ),
    }
    return FermionPair(
        lowering=lowering,
        raising=raising,
        half_plus=half_plus,
        half_minus=half_minus,
        checks=checks,
    )
