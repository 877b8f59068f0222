"""Profiles, stencil differentiation, and the 3x3 coefficient matrices."""

import numpy as np
import pytest

from bqhl import algebra, fields, oracle
from bqhl.errors import AssumptionError, SchemaError, SingularPointError

RNG = np.random.default_rng(7)


def random_point():
    vals = RNG.normal(size=5)
    return fields.FieldPoint(u=vals[0], v=vals[1], u_x=vals[2],
                             u_xx=vals[3], v_x=vals[4])


def random_k(n=1, rmin=0.2, rmax=4.0):
    r = RNG.uniform(rmin, rmax, n)
    a = RNG.uniform(-np.pi, np.pi, n)
    return r * np.exp(1j * a)


# ---------------------------------------------------------------- stencils

def test_fd_exact_on_quartic():
    x = np.linspace(0.0, 2.0, 41)
    y = 3 * x**4 - 2 * x**3 + x
    d1 = fields.fd_derivative(y, x[1] - x[0], 1)
    d2 = fields.fd_derivative(y, x[1] - x[0], 2)
    assert np.max(np.abs(d1 - (12 * x**3 - 6 * x**2 + 1))) < 1e-10
    assert np.max(np.abs(d2 - (36 * x**2 - 12 * x))) < 1e-9


def test_fd_fourth_order_convergence_including_edges():
    errs = {1: [], 2: []}
    for n in (81, 161):
        x = np.linspace(0.0, 3.0, n)
        h = x[1] - x[0]
        y = np.sin(2.0 * x)
        errs[1].append(np.max(np.abs(fields.fd_derivative(y, h, 1) - 2 * np.cos(2 * x))))
        errs[2].append(np.max(np.abs(fields.fd_derivative(y, h, 2) + 4 * np.sin(2 * x))))
    assert errs[1][0] / errs[1][1] == pytest.approx(16.0, rel=0.45)
    assert errs[2][0] / errs[2][1] == pytest.approx(16.0, rel=0.45)


# ---------------------------------------------------------------- profiles

def gaussian_profile(center=6.0, amplitude=0.3, n=961, x_max=30.0):
    x = np.linspace(0.0, x_max, n)
    u0 = amplitude * np.exp(-((x - center) ** 2) / 2.0)
    v0 = -0.5 * amplitude * (x - center) * np.exp(-((x - center) ** 2) / 2.0)
    return fields.InitialProfile(x, u0, v0)


def test_initial_profile_basic():
    prof = gaussian_profile()
    assert prof.x_max == 30.0
    # stencil second derivative vs analytic, fourth-order small
    x = prof.x
    exact = 0.3 * ((x - 6.0) ** 2 - 1.0) * np.exp(-((x - 6.0) ** 2) / 2.0)
    assert np.max(np.abs(prof.d2u - exact)) < 1e-6
    p = prof.point(6.0)
    assert p.u == pytest.approx(0.3, abs=1e-12)
    assert p.u_x == pytest.approx(0.0, abs=1e-9)
    # beyond the grid the profile is extended by zero
    u, v, du, d2u, dv = prof.values(np.array([35.0, 50.0]))
    assert np.all(u == 0) and np.all(dv == 0)


def test_initial_profile_support_radius():
    prof = gaussian_profile()
    r = prof.support_radius(1e-12)
    assert 12.0 < r < 15.0


def test_initial_profile_decay_violation():
    x = np.linspace(0.0, 30.0, 961)
    u0 = 0.3 * np.exp(-((x - 28.0) ** 2) / 2.0)
    with pytest.raises(AssumptionError):
        fields.InitialProfile(x, u0, np.zeros_like(x))


def test_initial_profile_schema_errors():
    x = np.linspace(0.0, 30.0, 961)
    z = np.zeros_like(x)
    with pytest.raises(SchemaError):
        fields.InitialProfile(x**1.01, z, z)          # non-uniform
    with pytest.raises(SchemaError):
        fields.InitialProfile(x + 1.0, z, z)          # starts off 0
    bad = z.copy()
    bad[5] = np.nan
    with pytest.raises(SchemaError):
        fields.InitialProfile(x, bad, z)


def test_initial_profile_csv_roundtrip(tmp_path):
    prof = gaussian_profile()
    path = tmp_path / "init.csv"
    prof.to_csv(path)
    back = fields.InitialProfile.from_csv(path)
    assert np.array_equal(back.x, prof.x)
    assert np.max(np.abs(back.u0 - prof.u0)) < 1e-16


def test_initial_profile_csv_schema(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,u0\n0.0,1.0\n")
    with pytest.raises(SchemaError):
        fields.InitialProfile.from_csv(path)


@pytest.fixture(scope="module")
def wall_run():
    # datum near the wall so the traces carry real signal
    u0, v0 = oracle.gaussian_datum(amplitude=0.3, center=2.0, width=1.0)
    fld = oracle.evolve_line(u0, v0, T=0.2, half_width=32.0, points=1024,
                             dt=1e-3, save_every=4)
    return oracle.half_line_data(fld)


def test_boundary_profile_derived_trace_matches_pde(wall_run):
    data = wall_run
    bp = fields.BoundaryProfile(data["t"], data["u0t"], data["u1t"],
                                data["u2t"], data["v0t"])
    # manufactured x-derivative trace of v vs the spectrally computed one
    assert np.max(np.abs(bp.vxt - data["v1t"])) < 1e-8
    assert bp.T == pytest.approx(0.2)
    p = bp.point(0.1)
    assert p.u == pytest.approx(float(np.interp(0.1, data["t"], data["u0t"])), abs=1e-6)


def test_boundary_profile_csv_roundtrip(tmp_path, wall_run):
    data = wall_run
    bp = fields.BoundaryProfile(data["t"], data["u0t"], data["u1t"],
                                data["u2t"], data["v0t"])
    path = tmp_path / "wall.csv"
    bp.to_csv(path)
    back = fields.BoundaryProfile.from_csv(path)
    for a, b in ((back.u0t, bp.u0t), (back.u1t, bp.u1t),
                 (back.u2t, bp.u2t), (back.v0t, bp.v0t)):
        assert np.max(np.abs(a - b)) < 1e-16


# ------------------------------------------------------- coefficient matrices

def _triple_product_U(p, k):
    inner = np.zeros((3, 3), dtype=complex)
    inner[2, 0] = -p.u_x - p.v
    inner[2, 1] = -2.0 * p.u
    return algebra.invert_P(k) @ inner @ algebra.build_P(k)


def _triple_product_V(p, k):
    inner = np.array([
        [4.0 * p.u / 3.0, 0.0, 0.0],
        [p.u_x / 3.0 - p.v, -2.0 * p.u / 3.0, 0.0],
        [p.u_xx / 3.0 - p.v_x, -p.u_x / 3.0 - p.v, -2.0 * p.u / 3.0],
    ], dtype=complex)
    return algebra.invert_P(k) @ inner @ algebra.build_P(k)


def test_build_U_zero_fields():
    p = fields.FieldPoint()
    for k in (1.0, 2j, -3.0 + 1j):
        assert np.all(fields.build_U(p, k) == 0)


def test_build_U_unit_u_example():
    p = fields.FieldPoint(u=1.0)
    got = fields.build_U(p, 1.0)
    assert algebra.matrices_close(got, _triple_product_U(p, 1.0), tol=1e-14)


def test_build_U_matches_triple_product_random():
    for _ in range(8):
        p = random_point()
        k = random_k()[0]
        assert algebra.matrices_close(fields.build_U(p, k),
                                      _triple_product_U(p, k), tol=1e-12)


def test_build_U_rows_identical():
    p = random_point()
    m = fields.build_U(p, 1.3 - 0.4j)
    assert algebra.matrices_close(m[0], m[1], tol=0)
    assert algebra.matrices_close(m[0], m[2], tol=0)


def test_build_V_zero_fields():
    p = fields.FieldPoint()
    assert np.all(fields.build_V(p, 1.0) == 0)


def test_build_V_unit_v_example():
    p = fields.FieldPoint(v=1.0)
    got = fields.build_V(p, 1.0)
    assert algebra.matrices_close(got, _triple_product_V(p, 1.0), tol=1e-14)


def test_build_V_matches_triple_product_random():
    for _ in range(8):
        p = random_point()
        k = random_k()[0]
        assert algebra.matrices_close(fields.build_V(p, k),
                                      _triple_product_V(p, k), tol=1e-12)


def test_build_V_traceless():
    for _ in range(5):
        assert abs(np.trace(fields.build_V(random_point(), random_k()[0]))) < 1e-13


def test_builders_raise_at_origin():
    p = random_point()
    with pytest.raises(SingularPointError):
        fields.build_U(p, 0.0)
    with pytest.raises(SingularPointError):
        fields.build_V(p, 0.0)


def test_laurent_U_reconstructs():
    p = random_point()
    U1, U2 = fields.laurent_U(p)
    for k in [1.0, 2j, -3.0, *random_k(10)]:
        res = fields.build_U(p, k) - U1 / k - U2 / k**2
        assert np.max(np.abs(res)) < 1e-12
    z1, z2 = fields.laurent_U(fields.FieldPoint())
    assert np.all(z1 == 0) and np.all(z2 == 0)


def test_laurent_V_reconstructs():
    p = random_point()
    V0, V1, V2 = fields.laurent_V(p)
    for k in [1.0, 2j, -3.0, *random_k(10)]:
        res = fields.build_V(p, k) - V0 - V1 / k - V2 / k**2
        assert np.max(np.abs(res)) < 1e-12


def test_conjugation_symmetries():
    w = algebra.OMEGA
    for build in (fields.build_U, fields.build_V):
        for _ in range(4):
            p = random_point()
            k = random_k()[0]
            m = build(p, k)
            rot = algebra.A_ROT.T @ m @ algebra.A_ROT
            assert algebra.matrices_close(build(p, w * k), rot, tol=1e-12)
            assert algebra.matrices_close(build(p, np.conj(k)),
                                          algebra.symmetry_B(m), tol=1e-12)


def test_V_pieces_batch_matches_pointwise():
    u, v, ux, uxx, vx = (RNG.normal(size=6) for _ in range(5))
    V0b, V1b, V2b = fields.V_pieces_batch((u, v, ux, uxx, vx))
    for i in range(6):
        p = fields.FieldPoint(u=u[i], v=v[i], u_x=ux[i], u_xx=uxx[i], v_x=vx[i])
        V0, V1, V2 = fields.laurent_V(p)
        assert algebra.matrices_close(V0b[i], V0, tol=1e-13)
        assert algebra.matrices_close(V1b[i], V1, tol=1e-13)
        assert algebra.matrices_close(V2b[i], V2, tol=1e-13)


def test_coefficient_row_drives_rank_one_action():
    p = random_point()
    k = 0.7 + 1.1j
    row = fields.coefficient_row(p.u, p.u_x + p.v, k)
    y = RNG.normal(size=3) + 1j * RNG.normal(size=3)
    direct = fields.build_U(p, k) @ y
    via_row = np.ones(3) * (row @ y) / 3.0
    assert np.max(np.abs(direct - via_row)) < 1e-13
