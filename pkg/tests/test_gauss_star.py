"""Gaussian star-exponentials: closed forms vs independent oracles.

Every closed-form path in the engine is checked against a slower,
structurally different computation: the Riccati flow integrated by RK4,
and the truncated bidifferential series summed directly on probe points.
"""

import cmath
import math

import numpy as np
import pytest

from starweyl.algebra_core import (
    DEFAULT_CONFIG,
    ExpressionParameter,
    QuadForm,
    WEYL,
    det2,
    probe_points,
)
from starweyl.gauss_star import (
    ElementSum,
    GaussianElement,
    PathSpec,
    PolyGaussian,
    StarSingularity,
    _pg_derivative,
    flow_oracle,
    flow_values,
    gauss_mul,
    intertwine_gauss,
    lmul_poly,
    max_residual,
    polygauss_mul,
    rmul_poly,
    star_exp_degenerate,
    star_exp_linear,
    star_exp_linear_mul,
    star_exp_quad,
    trace_ak,
)
from starweyl.poly_star import WeylPoly


def _rand_param(rng, scale=0.6):
    def r():
        return complex(rng.uniform(-scale, scale), rng.uniform(-scale, scale))

    return ExpressionParameter(r(), r(), r())


def _rand_quad(rng, scale=0.8, min_det=0.05):
    def r():
        return complex(rng.uniform(-scale, scale), rng.uniform(-scale, scale))

    while True:
        q = QuadForm(r(), r(), r())
        if abs(q.det()) > min_det:
            return q


# ---------------------------------------------------------------------------
# oracle 1: the Riccati flow, integrated numerically


def test_closed_form_matches_flow_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(6):
        K, A = _rand_param(rng), _rand_quad(rng)
        tau = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3))
        g1 = star_exp_quad(A, tau, K)
        g2 = flow_oracle(A, tau, K, steps=3000)
        worst = max(worst, max_residual(g1, g2))
    assert worst < 1e-9


def test_trace_term_toggle():
    rng = np.random.default_rng(11)
    K, A = _rand_param(rng), _rand_quad(rng)
    tau = 0.31 - 0.12j
    with_const = star_exp_quad(A, tau, K)
    bare = star_exp_quad(A, tau, K, trace_term=False)
    factor = cmath.exp(tau * trace_ak(A, K) / 2.0)
    assert abs(with_const.amp - bare.amp * factor) < 1e-12
    assert max_residual(with_const, bare.scale(factor)) < 1e-12


# ---------------------------------------------------------------------------
# pinned closed-form values


def test_moyal_harmonic_closed_form():
    # at the zero parameter the harmonic flow is 1/cos * exp(tan * (u^2+v^2)/ih)
    g = star_exp_quad(QuadForm(1.0, 0.0, 1.0), 0.37, WEYL)
    assert abs(g.amp - 1.0 / math.cos(0.37)) < 1e-12
    assert abs(g.quad.a11 - math.tan(0.37)) < 1e-12
    assert abs(g.quad.a12) < 1e-12
    assert abs(g.quad.a22 - math.tan(0.37)) < 1e-12


def test_quarter_period_is_generator_independent():
    K = ExpressionParameter(0.3 + 0.1j, -0.2, 0.5 - 0.05j)
    k_inv = np.linalg.inv(K.as_matrix())
    amp2_expected = 1.0 / det2(K.as_matrix())
    rng = np.random.default_rng(3)
    for A in (QuadForm(1.0, 0.0, 1.0), QuadForm(0.0, 0.5, 0.0), _rand_quad(rng)):
        lam = cmath.sqrt(A.det())
        g = star_exp_quad(A, (math.pi / 2) / lam, K)
        assert abs(g.amp**2 - amp2_expected) < 1e-9
        b = np.array([[g.quad.a11, g.quad.a12], [g.quad.a12, g.quad.a22]])
        assert np.max(np.abs(b + k_inv)) < 1e-9


def test_full_period_flips_sign_at_zero_parameter():
    # K = 0 has an on-axis double zero at the quarter period: the full-period
    # value continues around it to the scalar -1 (alternating flow)
    path = PathSpec((0.0, math.pi), side="above")
    g = star_exp_quad(QuadForm(1.0, 0.0, 1.0), math.pi, WEYL, path=path)
    assert max_residual(g, -1.0) < 1e-9


def test_on_axis_singularity_raises_without_detour():
    with pytest.raises(StarSingularity):
        star_exp_quad(QuadForm(1.0, 0.0, 1.0), math.pi / 2, WEYL)


# ---------------------------------------------------------------------------
# the exponential law and associativity through the pair product


def test_exponential_law():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(8):
        K, A = _rand_param(rng), _rand_quad(rng)
        t1 = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.2, 0.2))
        t2 = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.2, 0.2))
        prod = gauss_mul(star_exp_quad(A, t1, K), star_exp_quad(A, t2, K))
        worst = max(worst, max_residual(prod, star_exp_quad(A, t1 + t2, K)))
    assert worst < 1e-9


def test_pair_product_associativity():
    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(6):
        K = _rand_param(rng, 0.4)
        gs = []
        for _ in range(3):
            A = _rand_quad(rng, 0.5)
            tau = complex(rng.uniform(-0.3, 0.3), rng.uniform(-0.15, 0.15))
            gs.append(star_exp_quad(A, tau, K))
        lhs = gauss_mul(gauss_mul(gs[0], gs[1]), gs[2])
        rhs = gauss_mul(gs[0], gauss_mul(gs[1], gs[2]))
        worst = max(worst, max_residual(lhs, rhs))
    assert worst < 1e-9


def test_singular_product_is_refused():
    # two eighth-turns of the harmonic flow at K = 0 compose onto the
    # quarter-period singularity: the pair product must refuse, not guess
    g = star_exp_quad(QuadForm(1.0, 0.0, 1.0), math.pi / 4, WEYL)
    with pytest.raises(StarSingularity):
        gauss_mul(g, g)


# ---------------------------------------------------------------------------
# linear exponentials


def test_linear_cocycle():
    K = _rand_param(np.random.default_rng(29))
    c, combined = star_exp_linear_mul((1.0, 0.0), (0.0, 1.0), K)
    assert abs(c - cmath.exp(0.5j)) < 1e-12
    # `combined` is the full closed-form product (cocycle already applied)
    prod = gauss_mul(star_exp_linear((1.0, 0.0), K), star_exp_linear((0.0, 1.0), K))
    assert max_residual(prod, combined) < 1e-12


def test_degenerate_exponential_matches_flow():
    rng = np.random.default_rng(31)
    for xi in ((1.0, 1j), (1.0, -1j), (0.7, 0.2)):
        K = _rand_param(rng)
        A = QuadForm(xi[0] * xi[0], xi[0] * xi[1], xi[1] * xi[1])
        gd = star_exp_degenerate(xi, 0.35, K)
        gf = flow_oracle(A, 0.35, K, steps=3000)
        assert max_residual(gd, gf) < 1e-9


def test_degenerate_amplitude_decay():
    K = ExpressionParameter(0.2, 0.1, -0.3)
    xi = (1.0, 0.4)
    tau0 = complex(
        xi[0] * (0.2 * xi[0] + 0.1 * xi[1]) + xi[1] * (0.1 * xi[0] - 0.3 * xi[1])
    )
    for t in (2.0, 10.0, 50.0):
        g = star_exp_degenerate(xi, t, K)
        assert abs(g.amp - (1.0 - tau0 * t) ** -0.5) < 1e-12
    big = star_exp_degenerate(xi, 1e6, K)
    assert abs(big.amp) < abs(tau0 * 1e6) ** -0.5 * 1.01  # |t|^(-1/2) decay


# ---------------------------------------------------------------------------
# oracle 2: the truncated bidifferential series on probe points


def _series_mul(P, Q, K, order=18):
    lam = K.lam_matrix()
    half_ih = 0.5j

    def derivs(pg, upto):
        cache = {(0, 0): pg}
        for total in range(1, upto + 1):
            for m in range(total + 1):
                n = total - m
                if n > 0:
                    cache[(m, n)] = _pg_derivative(cache[(m, n - 1)], 1)
                else:
                    cache[(m, n)] = _pg_derivative(cache[(m - 1, 0)], 0)
        return cache

    dp, dq = derivs(P, order), derivs(Q, order)
    pts = probe_points()
    total = np.zeros(len(pts), dtype=complex)
    for a in range(order + 1):
        for b in range(order + 1 - a):
            for c in range(order + 1 - a - b):
                for d in range(order + 1 - a - b - c):
                    w = (
                        half_ih ** (a + b + c + d)
                        * lam[0, 0] ** a
                        * lam[0, 1] ** b
                        * lam[1, 0] ** c
                        * lam[1, 1] ** d
                        / (
                            math.factorial(a)
                            * math.factorial(b)
                            * math.factorial(c)
                            * math.factorial(d)
                        )
                    )
                    if w == 0:
                        continue
                    f = dp[(a + b, c + d)]
                    g = dq[(a + c, b + d)]
                    total += w * np.array(
                        [f.evaluate(u, v) * g.evaluate(u, v) for u, v in pts]
                    )
    return total


_SERIES_K = ExpressionParameter(0.11, -0.07, 0.13)
_SERIES_G1 = GaussianElement(
    1.3 - 0.2j, QuadForm(0.08, -0.03, 0.05), (0.1, -0.07j), _SERIES_K
)
_SERIES_G2 = GaussianElement(
    0.9 + 0.1j, QuadForm(-0.04, 0.06, 0.09), (0.02j, 0.05), _SERIES_K
)


def test_gauss_mul_matches_series():
    ser = _series_mul(
        PolyGaussian.from_gaussian(_SERIES_G1),
        PolyGaussian.from_gaussian(_SERIES_G2),
        _SERIES_K,
    )
    eng = gauss_mul(_SERIES_G1, _SERIES_G2)
    vals = np.array([eng.evaluate(u, v) for u, v in probe_points()])
    assert np.max(np.abs(vals - ser)) < 5e-13


def test_polygauss_mul_matches_series():
    P = PolyGaussian(
        WeylPoly({(1, 0): 1.0, (0, 2): 0.3 - 0.1j, (0, 0): 0.2}), _SERIES_G1
    )
    Q = PolyGaussian(WeylPoly({(0, 1): 1.0, (2, 0): -0.25j}), _SERIES_G2)
    ser = _series_mul(P, Q, _SERIES_K)
    eng = polygauss_mul(P, Q)
    vals = np.array([eng.evaluate(u, v) for u, v in probe_points()])
    assert np.max(np.abs(vals - ser)) < 5e-13


def test_one_sided_polynomial_products_match_series():
    p = WeylPoly({(2, 1): 0.5, (1, 0): 1.0, (0, 0): -0.3j})
    pts = probe_points()
    lm = lmul_poly(p, PolyGaussian.from_gaussian(_SERIES_G2))
    ser = _series_mul(
        PolyGaussian(p, GaussianElement.one(_SERIES_K)),
        PolyGaussian.from_gaussian(_SERIES_G2),
        _SERIES_K,
    )
    assert np.max(np.abs(np.array([lm.evaluate(u, v) for u, v in pts]) - ser)) < 5e-13
    rm = rmul_poly(PolyGaussian.from_gaussian(_SERIES_G2), p)
    ser = _series_mul(
        PolyGaussian.from_gaussian(_SERIES_G2),
        PolyGaussian(p, GaussianElement.one(_SERIES_K)),
        _SERIES_K,
    )
    assert np.max(np.abs(np.array([rm.evaluate(u, v) for u, v in pts]) - ser)) < 5e-13


# ---------------------------------------------------------------------------
# ordering changes on Gaussians


def test_gaussian_ordering_change_round_trip():
    K2 = ExpressionParameter(0.4, 0.25, -0.3)
    h = intertwine_gauss(_SERIES_G1, K2)
    back = intertwine_gauss(h, _SERIES_K)
    assert abs(back.amp**2 - _SERIES_G1.amp**2) < 1e-12
    assert max_residual(back.scale(_SERIES_G1.amp / back.amp), _SERIES_G1) < 1e-12


def test_gaussian_ordering_change_homomorphism():
    K2 = ExpressionParameter(0.4, 0.25, -0.3)
    lhs = intertwine_gauss(gauss_mul(_SERIES_G1, _SERIES_G2), K2)
    rhs = gauss_mul(
        intertwine_gauss(_SERIES_G1, K2), intertwine_gauss(_SERIES_G2, K2)
    )
    assert max_residual(lhs, rhs) < 1e-12


# ---------------------------------------------------------------------------
# sums and mixed products


def test_element_sum_distributes():
    s1 = ElementSum.from_any(_SERIES_G1) + WeylPoly({(1, 0): 1.0})
    s2 = ElementSum.from_any(_SERIES_G2)
    prod = s1.star(s2, DEFAULT_CONFIG, K=_SERIES_K)
    direct = ElementSum.from_any(gauss_mul(_SERIES_G1, _SERIES_G2)) + ElementSum.from_any(
        lmul_poly(WeylPoly({(1, 0): 1.0}), PolyGaussian.from_gaussian(_SERIES_G2))
    )
    assert max_residual(prod, direct) < 1e-12


def test_gaussian_records_round_trip():
    rec = _SERIES_G1.to_record()
    back = GaussianElement.from_record(rec)
    assert max_residual(back, _SERIES_G1) == 0.0
    assert back.sheet == _SERIES_G1.sheet


def test_flow_values_walk_continuously():
    K = ExpressionParameter(0.3 + 0.2j, -0.1, 0.4)
    A = QuadForm(1.0, 0.0, 1.0)
    ts = np.linspace(0.0, 2.0, 41)
    vals = flow_values(A, K, [complex(t) for t in ts])
    assert len(vals) == len(ts)
    assert max_residual(vals[0], 1.0) < 1e-12
    for g0, g1 in zip(vals[:-1], vals[1:]):
        # adjacent values stay on the same branch: a sheet flip would make
        # the difference larger than the sum
        assert abs(g0.amp - g1.amp) < abs(g0.amp + g1.amp)
    assert max_residual(vals[-1], star_exp_quad(A, 2.0, K)) < 1e-9
