"""Configuration, 2x2 helpers, ordering parameters, and sphere elements."""

import math

import numpy as np
import pytest

from starweyl.algebra_core import (
    Config,
    DEFAULT_CONFIG,
    ExpressionParameter,
    PSIDO,
    QuadForm,
    SphereParam,
    SPrimeElement,
    WEYL,
    det2,
    eigen2,
    inv2,
    load_config,
    probe_points,
    quadform_of_g,
    sphere_from_angles,
    sprime_from_angles,
    su2_symmetric,
)


def test_config_defaults_and_validation():
    assert DEFAULT_CONFIG.hbar == 1.0
    assert DEFAULT_CONFIG.tol_closed == 1e-9
    assert DEFAULT_CONFIG.tol_quad == 1e-6
    assert DEFAULT_CONFIG.detour_radius == 0.1
    assert DEFAULT_CONFIG.inv_ih == 1.0 / 1j
    with pytest.raises(ValueError):
        Config(hbar=0.0)
    with pytest.raises(ValueError):
        Config(tol_closed=1e-3, tol_quad=1e-6)
    with pytest.raises(ValueError):
        Config(detour_radius=2.0)


def test_load_config(tmp_path):
    p = tmp_path / "cfg"
    p.write_text("hbar = 2.0  # comment\n\ntol_quad=1e-5\n")
    cfg = load_config(p)
    assert cfg.hbar == 2.0 and cfg.tol_quad == 1e-5
    assert cfg.tol_closed == 1e-9  # untouched default
    bad = tmp_path / "bad"
    bad.write_text("volume = 11\n")
    with pytest.raises(ValueError, match="unknown key"):
        load_config(bad)
    bad2 = tmp_path / "bad2"
    bad2.write_text("hbar 2\n")
    with pytest.raises(ValueError, match="key=value"):
        load_config(bad2)


def test_det2_inv2_eigen2():
    m = np.array([[1.0 + 1j, 2.0], [0.5j, -1.0]])
    assert abs(det2(m) - np.linalg.det(m)) < 1e-12
    assert np.max(np.abs(inv2(m) @ m - np.eye(2))) < 1e-12
    with pytest.raises(ZeroDivisionError):
        inv2([[1, 1], [1, 1]])
    e1, e2 = eigen2(m)
    want = sorted(np.linalg.eigvals(m), key=lambda z: (z.real, z.imag))
    assert abs(e1 - want[0]) < 1e-9 and abs(e2 - want[1]) < 1e-9
    assert (e1.real, e1.imag) <= (e2.real, e2.imag)


def test_presets():
    assert complex(WEYL.k11) == 0 and complex(WEYL.k12) == 0
    assert complex(PSIDO.k12) == 1 and complex(PSIDO.k11) == 0
    assert abs(det2(PSIDO.as_matrix()) + 1.0) < 1e-12  # det -1: not unitary-symmetric


def test_expression_parameter_lambda():
    K = ExpressionParameter(2, 3, 5)
    assert K.exact
    l11, l12, l21, l22 = (complex(x) for x in K.lam_entries())
    # Lambda = K + J with J = [[0,-1],[1,0]]
    assert (l11, l12, l21, l22) == (2, 2, 4, 5)
    assert np.max(np.abs(K.lam_matrix() - (K.as_matrix() + np.array([[0, -1], [1, 0]])))) == 0
    K2 = ExpressionParameter(0.3 + 0.1j, 0.0, -0.2)  # floats are exact binary rationals
    assert K2.exact
    assert ExpressionParameter(2, 3, 5) == ExpressionParameter(2.0, 3.0, 5.0)
    assert hash(ExpressionParameter(2, 3, 5)) == hash(ExpressionParameter(2.0, 3.0, 5.0))


def test_expression_parameter_from_matrix():
    m = [[1, 2], [2, 3]]
    K = ExpressionParameter.from_matrix(m)
    assert complex(K.k12) == 2
    with pytest.raises(ValueError, match="symmetric"):
        ExpressionParameter.from_matrix([[1, 2], [3, 4]])


def test_quadform():
    q = QuadForm(1, 2, 3)
    assert q.det() == 1 * 3 - 4
    assert q.value(2, 1) == 1 * 4 + 2 * 2 * 2 * 1 + 3 * 1
    assert np.max(np.abs(q.as_matrix() - np.array([[1, 2], [2, 3]]))) == 0
    with pytest.raises(ValueError):
        QuadForm.from_matrix([[1, 2], [2.5, 3]])


def test_sphere_param():
    with pytest.raises(ValueError):
        SphereParam(1.0, 1.0, 0.0)
    p = sphere_from_angles(0.3, 1.2)
    assert abs(p.alpha**2 + p.beta**2 + p.gamma**2 - 1.0) < 1e-12
    assert abs(p.gamma - math.cos(0.3)) < 1e-12


def test_su2_symmetric_is_special_unitary():
    for theta, phi in ((0.3, 1.2), (1.1, -0.4), (2.2, 0.9)):
        K = su2_symmetric(sphere_from_angles(theta, phi))
        m = K.as_matrix()
        assert np.max(np.abs(m - m.T)) < 1e-12
        assert np.max(np.abs(m @ m.conj().T - np.eye(2))) < 1e-12
        assert abs(det2(m) - 1.0) < 1e-12


def test_sprime_elements():
    g = sprime_from_angles(0.4, 0.7, 0.2)
    m = g.matrix()
    assert abs(det2(m) - 1.0) < 1e-9
    A = quadform_of_g(g)
    assert abs(A.det() - 1.0) < 1e-9
    # symmetric square lands on the sphere slice: diagonal conjugate pair,
    # off-diagonal purely imaginary
    assert abs(A.a11 - A.a22.conjugate()) < 1e-9
    assert abs(A.a12.real) < 1e-9
    # degenerate pole
    gp = sprime_from_angles(1.0, 0.0, 0.0)
    assert abs(det2(gp.matrix()) - 1.0) < 1e-12
    # branch picks the other hyperbolic solution
    gm = sprime_from_angles(0.4, 0.7, 0.2, branch=-1)
    assert np.max(np.abs(gm.matrix() - m)) > 1e-3


def test_quadform_of_g_requires_det_one():
    with pytest.raises(ValueError, match="det 1"):
        quadform_of_g(np.array([[2.0, 0.0], [0.0, 2.0]]))
    assert isinstance(SPrimeElement(((1, 0), (0, 1))).matrix(), np.ndarray)


def test_probe_points():
    pts = probe_points()
    assert len(pts) == 13
    reals = [p for p in pts if isinstance(p[0], float)]
    assert len(reals) == 9
