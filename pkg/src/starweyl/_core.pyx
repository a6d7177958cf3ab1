# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled compute kernels.

Twin of ``_core_py``: identical signatures and semantics.  Keep both files
in sync; the parity test suite compares them term by term.
"""

import math

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from "complex.h":
    double complex cexp(double complex) nogil

BACKEND = "compiled"


def star_dense(f, g, lam, half_ih, int cap):
    """Dense star product of two coefficient matrices (see _core_py)."""
    cdef cnp.ndarray[complex, ndim=2] F = np.ascontiguousarray(f, dtype=complex)
    cdef cnp.ndarray[complex, ndim=2] G = np.ascontiguousarray(g, dtype=complex)
    cdef int du_f = F.shape[0] - 1, dv_f = F.shape[1] - 1
    cdef int du_g = G.shape[0] - 1, dv_g = G.shape[1] - 1
    cdef cnp.ndarray[complex, ndim=2] out = np.zeros((cap + 1, cap + 1), dtype=complex)

    cdef double complex l11 = complex(lam[0][0]), l12 = complex(lam[0][1])
    cdef double complex l21 = complex(lam[1][0]), l22 = complex(lam[1][1])
    cdef double complex pref, c, term, w, hih = half_ih

    df = _deriv_table(F)
    dg = _deriv_table(G)

    fact = [math.factorial(k) for k in range(du_f + dv_f + du_g + dv_g + 2)]

    cdef int m1, n1, m2, n2, k, e12, e21, e22, k_lo, k_hi
    cdef int a, b, hi_u, hi_v, p, q
    cdef cnp.ndarray[complex, ndim=2] DF, DG

    for m1 in range(du_f + 1):
        for n1 in range(dv_f + 1):
            if df[m1][n1] is None:
                continue
            DF = df[m1][n1]
            pref = hih ** (m1 + n1)
            for m2 in range(0, m1 + n1 + 1):
                n2 = m1 + n1 - m2
                if m2 > du_g or n2 > dv_g:
                    continue
                if dg[m2][n2] is None:
                    continue
                DG = dg[m2][n2]
                c = 0
                k_lo = m2 - n1
                if k_lo < 0:
                    k_lo = 0
                k_hi = m1 if m1 < m2 else m2
                for k in range(k_lo, k_hi + 1):
                    e12 = m1 - k
                    e21 = m2 - k
                    e22 = n1 - m2 + k
                    term = 1
                    if k:
                        if l11 == 0:
                            continue
                        term = term * l11 ** k
                    if e12:
                        if l12 == 0:
                            continue
                        term = term * l12 ** e12
                    if e21:
                        if l21 == 0:
                            continue
                        term = term * l21 ** e21
                    if e22:
                        if l22 == 0:
                            continue
                        term = term * l22 ** e22
                    c = c + term / <double> (fact[k] * fact[e12] * fact[e21] * fact[e22])
                if c == 0:
                    continue
                c = c * pref
                # accumulate c * DF poly-times DG into out, capped
                for a in range(DF.shape[0]):
                    for b in range(DF.shape[1]):
                        if DF[a, b] == 0:
                            continue
                        w = c * DF[a, b]
                        hi_u = DG.shape[0]
                        if hi_u > cap + 1 - a:
                            hi_u = cap + 1 - a
                        hi_v = DG.shape[1]
                        if hi_v > cap + 1 - b:
                            hi_v = cap + 1 - b
                        for p in range(hi_u):
                            for q in range(hi_v):
                                out[a + p, b + q] = out[a + p, b + q] + w * DG[p, q]
    return out


def _deriv_table(coeffs):
    """All (d_u^m d_v^n) derivatives; entry None when identically zero."""
    du, dv = coeffs.shape[0] - 1, coeffs.shape[1] - 1
    table = [[None] * (dv + 1) for _ in range(du + 1)]
    cur_u = np.asarray(coeffs)
    for m in range(du + 1):
        cur = cur_u
        for n in range(dv + 1):
            if np.any(cur):
                table[m][n] = np.ascontiguousarray(cur, dtype=complex)
            if n < dv:
                cur = cur[:, 1:] * np.arange(1, cur.shape[1])[None, :]
                if not cur.size:
                    break
        if m < du:
            cur_u = cur_u[1:, :] * np.arange(1, cur_u.shape[0])[:, None]
            if not cur_u.size:
                break
    return table


def gauss_eval(amps, B11, B12, B22, b1, b2, inv_ih, us, vs):
    """Evaluate a batch of Gaussian elements at a batch of points."""
    cdef cnp.ndarray[complex, ndim=1] A = np.ascontiguousarray(amps, dtype=complex)
    cdef cnp.ndarray[complex, ndim=1] c11 = np.ascontiguousarray(B11, dtype=complex)
    cdef cnp.ndarray[complex, ndim=1] c12 = np.ascontiguousarray(B12, dtype=complex)
    cdef cnp.ndarray[complex, ndim=1] c22 = np.ascontiguousarray(B22, dtype=complex)
    cdef cnp.ndarray[complex, ndim=1] d1 = np.ascontiguousarray(b1, dtype=complex)
    cdef cnp.ndarray[complex, ndim=1] d2 = np.ascontiguousarray(b2, dtype=complex)
    cdef cnp.ndarray[complex, ndim=1] U = np.ascontiguousarray(us, dtype=complex)
    cdef cnp.ndarray[complex, ndim=1] V = np.ascontiguousarray(vs, dtype=complex)
    cdef Py_ssize_t ng = A.shape[0], npt = U.shape[0]
    cdef cnp.ndarray[complex, ndim=2] out = np.empty((ng, npt), dtype=complex)
    cdef double complex ih = inv_ih, u, v, e
    cdef Py_ssize_t i, j
    for i in range(ng):
        for j in range(npt):
            u = U[j]
            v = V[j]
            e = ih * (c11[i] * u * u + 2.0 * c12[i] * u * v + c22[i] * v * v
                      + d1[i] * u + d2[i] * v)
            out[i, j] = A[i] * cexp(e)
    return out
