"""Pure-Python compute kernels.

Twin of the compiled ``_core`` extension: identical signatures and
semantics, so the import-time selector in :mod:`starweyl._backend` can swap
one for the other.  Keep both files in sync.

Kernels here are the per-call hot spots of the package: the dense
complex-coefficient star product (used by every floating-point polynomial
operation), and batched evaluation of Gaussian-exponential elements on
point grids (used by every quadrature-defined element).
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def star_dense(f, g, lam, half_ih, cap):
    """Dense star product of two coefficient matrices.

    f, g     : 2-D complex arrays; f[a, b] is the coefficient of u^a v^b.
    lam      : 2x2 complex array (the mixed second-derivative pairing).
    half_ih  : the scalar multiplying the pairing in the exponential.
    cap      : hard ceiling on the total degree of the result.

    Returns a dense complex array of shape (cap+1, cap+1) holding the
    product's coefficients (entries beyond total degree cap are zero).
    """
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    du_f, dv_f = f.shape[0] - 1, f.shape[1] - 1
    du_g, dv_g = g.shape[0] - 1, g.shape[1] - 1
    out = np.zeros((cap + 1, cap + 1), dtype=complex)

    l11, l12 = complex(lam[0][0]), complex(lam[0][1])
    l21, l22 = complex(lam[1][0]), complex(lam[1][1])

    # One derivative table per factor: deriv[m][n] = d_u^m d_v^n of the poly,
    # with the falling-factorial weights folded in.
    df = _deriv_table(f)
    dg = _deriv_table(g)

    fact = [math.factorial(k) for k in range(du_f + dv_f + du_g + dv_g + 2)]

    for m1 in range(du_f + 1):
        for n1 in range(dv_f + 1):
            F = df[m1][n1]
            if F is None:
                continue
            pref = half_ih ** (m1 + n1)
            # m2 indexes d_u on g; d_v on g is then fixed by m1+n1-m2.
            for m2 in range(0, m1 + n1 + 1):
                n2 = m1 + n1 - m2
                if m2 > du_g or n2 > dv_g:
                    continue
                G = dg[m2][n2]
                if G is None:
                    continue
                c = 0j
                k_lo = max(0, m2 - n1)
                k_hi = min(m1, m2)
                for k in range(k_lo, k_hi + 1):
                    e12 = m1 - k
                    e21 = m2 - k
                    e22 = n1 - m2 + k
                    term = 1.0 + 0j
                    if k:
                        if l11 == 0:
                            continue
                        term *= l11 ** k
                    if e12:
                        if l12 == 0:
                            continue
                        term *= l12 ** e12
                    if e21:
                        if l21 == 0:
                            continue
                        term *= l21 ** e21
                    if e22:
                        if l22 == 0:
                            continue
                        term *= l22 ** e22
                    c += term / (fact[k] * fact[e12] * fact[e21] * fact[e22])
                if c == 0:
                    continue
                c *= pref
                _accumulate_product(out, F, G, c, cap)
    return out


def _deriv_table(coeffs):
    """All (d_u^m d_v^n) derivatives of a dense coefficient matrix.

    Entry [m][n] is a dense array or None when identically zero.
    """
    du, dv = coeffs.shape[0] - 1, coeffs.shape[1] - 1
    table = [[None] * (dv + 1) for _ in range(du + 1)]
    cur_u = coeffs
    for m in range(du + 1):
        cur = cur_u
        for n in range(dv + 1):
            if np.any(cur):
                table[m][n] = cur
            if n < dv:
                nxt = cur[:, 1:] * np.arange(1, cur.shape[1])[None, :]
                cur = nxt
                if not cur.size:
                    break
        if m < du:
            cur_u = cur_u[1:, :] * np.arange(1, cur_u.shape[0])[:, None]
            if not cur_u.size:
                break
    return table


def _accumulate_product(out, F, G, scale, cap):
    """out += scale * (F poly-times G), truncated at total degree cap."""
    fu, fv = F.shape
    gu, gv = G.shape
    fi, fj = np.nonzero(F)
    for a, b in zip(fi.tolist(), fj.tolist()):
        w = scale * F[a, b]
        hi_u = min(gu, cap + 1 - a)
        hi_v = min(gv, cap + 1 - b)
        if hi_u <= 0 or hi_v <= 0:
            continue
        out[a : a + hi_u, b : b + hi_v] += w * G[:hi_u, :hi_v]


def gauss_eval(amps, B11, B12, B22, b1, b2, inv_ih, us, vs):
    """Evaluate a batch of Gaussian elements at a batch of points.

    Element g at point p:  amps[g] * exp(inv_ih * (B11[g] u^2 + 2 B12[g] u v
    + B22[g] v^2 + b1[g] u + b2[g] v)), with u = us[p], v = vs[p].

    Returns a complex array of shape (len(amps), len(us)).
    """
    amps = np.asarray(amps, dtype=complex)[:, None]
    B11 = np.asarray(B11, dtype=complex)[:, None]
    B12 = np.asarray(B12, dtype=complex)[:, None]
    B22 = np.asarray(B22, dtype=complex)[:, None]
    b1 = np.asarray(b1, dtype=complex)[:, None]
    b2 = np.asarray(b2, dtype=complex)[:, None]
    u = np.asarray(us, dtype=complex)[None, :]
    v = np.asarray(vs, dtype=complex)[None, :]
    expo = inv_ih * (B11 * u * u + 2.0 * B12 * u * v + B22 * v * v + b1 * u + b2 * v)
    return amps * np.exp(expo)
