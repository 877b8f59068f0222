"""Exact-frame algebra: symbols, frame matrix, classification, wedges."""

import numpy as np
import pytest
import sympy as sp

from bqhl import algebra
from bqhl.errors import SingularPointError

RNG = np.random.default_rng(20260814)


def random_k(n=1, rmin=0.1, rmax=5.0):
    r = RNG.uniform(rmin, rmax, n)
    a = RNG.uniform(-np.pi, np.pi, n)
    return r * np.exp(1j * a)


def test_omega_is_primitive_cube_root():
    w = algebra.OMEGA
    assert abs(w**3 - 1) < 1e-15
    assert abs(1 + w + w**2) < 1e-15
    assert abs(w - np.exp(2j * np.pi / 3)) < 1e-15


def test_row_covector_annihilates_ones():
    ones = np.ones(3)
    assert abs(algebra.ROW_OMEGA @ ones) < 1e-15
    # scaled copies of (1,1,1) are annihilated too
    assert abs(algebra.ROW_OMEGA @ (algebra.OMEGA * ones)) < 1e-15


def test_lz_values_at_unit_point():
    l, z = algebra.lz_values(1.0)
    w = algebra.OMEGA
    assert np.allclose(l, [w, w**2, 1.0], atol=1e-15)
    assert np.allclose(z, [w**2, w, 1.0], atol=1e-15)


def test_lz_values_at_two():
    l, z = algebra.lz_values(2.0)
    w = algebra.OMEGA
    assert np.allclose(l, [2 * w, 2 * w**2, 2.0], atol=1e-14)
    assert np.allclose(z, [4 * w**2, 4 * w, 4.0], atol=1e-14)


def test_lz_values_at_origin_vanish():
    l, z = algebra.lz_values(0.0)
    assert np.all(l == 0) and np.all(z == 0)


def test_lz_values_broadcast_shape():
    ks = random_k(7)
    l, z = algebra.lz_values(ks)
    assert l.shape == (7, 3) and z.shape == (7, 3)
    l0, z0 = algebra.lz_values(ks[3])
    assert np.allclose(l[3], l0) and np.allclose(z[3], z0)


def test_theta_examples():
    w = algebra.OMEGA
    # x-only phase between the two twisted branches at k = 1
    th = algebra.theta(2, 1, 1.0, 0.0, 1.0)
    assert abs(th - (w**2 - w)) < 1e-15
    assert abs(th - (-1j * np.sqrt(3))) < 1e-15
    # all phases vanish at the corner
    for i in range(1, 4):
        for j in range(1, 4):
            assert abs(algebra.theta(i, j, 0.0, 0.0, 1.37 + 0.2j)) < 1e-15
    # x- and t-parts cancel between branches 1,2 at x = t = 1, k = 1
    assert abs(algebra.theta(2, 1, 1.0, 1.0, 1.0)) < 1e-15


def test_theta_antisymmetry_random():
    ks = random_k(5)
    for k in ks:
        a = algebra.theta(1, 3, 0.7, 0.4, k)
        b = algebra.theta(3, 1, 0.7, 0.4, k)
        assert abs(a + b) < 1e-13


def test_theta_21_imaginary_on_positive_axis():
    # the branch-1/2 phase oscillates without growth for k > 0
    for k in [0.3, 1.0, 2.5, 7.0]:
        th = algebra.theta(2, 1, 1.3, 0.8, k)
        assert abs(th.real) < 1e-12 * max(1.0, abs(th))
    # whereas phases against branch 3 do grow there
    assert abs(algebra.theta(3, 1, 1.3, 0.8, 2.0).real) > 1.0


def _det_by_cofactor(m):
    """Independent determinant: explicit first-row cofactor expansion."""
    return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))


def test_det_P_closed_form_symbolic():
    # cofactor expansion of the symbolic frame matrix
    k = sp.symbols("k")
    w = sp.Rational(-1, 2) + sp.sqrt(3) * sp.I / 2
    P = sp.Matrix([[w, w**2, 1], [w**2 * k, w * k, k], [k**2, k**2, k**2]])
    det = sp.simplify(sp.expand(_det_by_cofactor(P)))
    target = sp.simplify(-3 * sp.sqrt(3) * sp.I * k**3)
    assert sp.simplify(det - target) == 0


def test_det_P_matches_numeric():
    for k in random_k(6):
        P = algebra.build_P(k)
        assert abs(_det_by_cofactor(P) - algebra.det_P(k)) < 1e-10 * abs(k) ** 3
        assert abs(np.linalg.det(P) - algebra.det_P(k)) < 1e-10 * max(1.0, abs(k) ** 3)


def test_invert_P_is_inverse():
    assert algebra.matrices_close(
        algebra.build_P(1.0) @ algebra.invert_P(1.0), np.eye(3), tol=1e-14)
    for k in random_k(6):
        prod = algebra.build_P(k) @ algebra.invert_P(k)
        assert algebra.matrices_close(prod, np.eye(3), tol=1e-12)


def test_invert_P_raises_at_origin():
    with pytest.raises(SingularPointError):
        algebra.invert_P(0.0)


def test_P0_inverse_identity():
    assert algebra.matrices_close(algebra.P0 @ algebra.P0_INV, np.eye(3), tol=1e-14)
    # symmetric factor
    assert algebra.matrices_close(algebra.P0, algebra.P0.T, tol=1e-15)


def test_frame_columns_diagonalize_companion():
    # P(k)^-1 C(k) P(k) = diag(l) with C the cubic companion matrix
    for k in random_k(5):
        C = np.array([[0, 1, 0], [0, 0, 1], [k**3, 0, 0]], dtype=complex)
        l, _ = algebra.lz_values(k)
        D = algebra.invert_P(k) @ C @ algebra.build_P(k)
        assert algebra.matrices_close(D, np.diag(l), tol=1e-11 * max(1.0, abs(k) ** 3))


def test_classify_examples():
    loc = algebra.classify(np.exp(1j * np.pi / 12))
    assert (loc.kind, loc.index) == ("sector", 1)
    loc = algebra.classify(np.exp(1j * np.pi / 4))
    assert (loc.kind, loc.index) == ("sector", 2)
    loc = algebra.classify(np.exp(1j * np.pi / 6))
    assert (loc.kind, loc.index) == ("ray", 2)
    loc = algebra.classify(2.0)
    assert (loc.kind, loc.index) == ("ray", 1)
    loc = algebra.classify(-1.5)
    assert (loc.kind, loc.index) == ("ray", 7)
    loc = algebra.classify(-1e-3j)
    assert (loc.kind, loc.index) == ("ray", 10)


def test_classify_raises_at_origin():
    with pytest.raises(SingularPointError):
        algebra.classify(0.0)


def test_classify_ray_snap_tolerance():
    k = np.exp(1j * (np.pi / 6 + 1e-13))
    assert algebra.classify(k).kind == "ray"
    k = np.exp(1j * (np.pi / 6 + 1e-9))
    assert algebra.classify(k).kind == "sector"


def test_classify_rotation_shifts_by_four():
    for k in random_k(40):
        a = algebra.classify(k)
        b = algebra.classify(algebra.OMEGA * k)
        assert b.kind == a.kind
        assert b.index == (a.index - 1 + 4) % 12 + 1


def test_ray_direction_matches_classify():
    for n in range(1, 13):
        loc = algebra.classify(1.7 * algebra.ray_direction(n))
        assert (loc.kind, loc.index) == ("ray", n)


def _bounded_oracle(family, col, k):
    """Membership via the extremal-real-part condition on the symbols."""
    l, z = algebra.lz_values(k)
    vals = {"mu3": l.real, "mu3_adj": l.real, "mu1": z.real, "mu1_adj": z.real}[family]
    v = vals[col - 1]
    tol = 1e-9 * max(1.0, abs(k) ** 2)
    if family in ("mu3", "mu1"):
        return v <= vals.min() + tol
    return v >= vals.max() - tol


@pytest.mark.parametrize("family", ["mu3", "mu3_adj", "mu1", "mu1_adj"])
def test_wedge_tables_match_extremal_oracle(family):
    # sweep angles staying 0.05 deg away from wedge boundaries
    angles = np.arange(-179.0, 181.0, 0.731)
    for col in (1, 2, 3):
        for ang in angles:
            k = 1.3 * np.exp(1j * np.radians(ang))
            table = algebra.column_is_bounded(family, col, k)
            oracle = _bounded_oracle(family, col, k)
            assert table == oracle, (family, col, ang)


def test_wedge_boundaries_are_closed():
    for ang in (0.0, 120.0):
        assert algebra.column_is_bounded("mu3", 1, np.exp(1j * np.radians(ang)))
    for ang in (30.0, 90.0):
        assert algebra.column_is_bounded("mu1_adj", 1, np.exp(1j * np.radians(ang)))


def test_every_point_has_some_bounded_column():
    for family in ("mu3", "mu3_adj"):
        for k in random_k(30):
            assert any(algebra.column_is_bounded(family, c, k) for c in (1, 2, 3))


def test_symmetry_A_properties():
    A = algebra.A_ROT
    assert algebra.matrices_close(np.linalg.matrix_power(A, 3), np.eye(3), tol=0)
    d = np.diag([1.0, 2.0, 3.0])
    assert algebra.matrices_close(algebra.symmetry_A(d), np.diag([3.0, 1.0, 2.0]), tol=0)
    # conjugation respects products
    for _ in range(3):
        m1 = RNG.normal(size=(3, 3)) + 1j * RNG.normal(size=(3, 3))
        m2 = RNG.normal(size=(3, 3)) + 1j * RNG.normal(size=(3, 3))
        lhs = algebra.symmetry_A(m1 @ m2)
        rhs = algebra.symmetry_A(m1) @ algebra.symmetry_A(m2)
        assert algebra.matrices_close(lhs, rhs, tol=1e-13)


def test_symmetry_B_is_involution():
    d = np.diag([1.0 + 1j, 2.0, 3.0])
    assert algebra.matrices_close(algebra.symmetry_B(d), np.diag([2.0, 1.0 - 1j, 3.0]), tol=0)
    m = RNG.normal(size=(3, 3)) + 1j * RNG.normal(size=(3, 3))
    assert algebra.matrices_close(algebra.symmetry_B(algebra.symmetry_B(m)), m, tol=0)


def test_symmetry_helpers_broadcast_over_stacks():
    ms = RNG.normal(size=(4, 3, 3)) + 1j * RNG.normal(size=(4, 3, 3))
    sa = algebra.symmetry_A(ms)
    sb = algebra.symmetry_B(ms)
    for i in range(4):
        assert algebra.matrices_close(sa[i], algebra.symmetry_A(ms[i]), tol=0)
        assert algebra.matrices_close(sb[i], algebra.symmetry_B(ms[i]), tol=0)


def test_matrices_close_tolerance():
    a = np.zeros((3, 3))
    b = np.full((3, 3), 5e-11)
    assert algebra.matrices_close(a, b)
    assert not algebra.matrices_close(a, b, tol=1e-11)
