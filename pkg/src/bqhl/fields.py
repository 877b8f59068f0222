"""Sampled field data and the matrix coefficients of the linear system.

Holds the half-line initial profiles and the wall traces, manufactures
the derivative arrays they owe to the rest of the pipeline (high-order
finite differencing on uniform grids), and builds the two 3x3 coefficient
matrices of the overdetermined linear problem together with their Laurent
pieces in the spectral parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.interpolate import InterpolatedUnivariateSpline

from .algebra import OMEGA, P0, P0_INV, ROW_OMEGA
from .errors import AssumptionError, SchemaError, SingularPointError

DECAY_TOL = 1e-10
X_MAX_DEFAULT = 30.0

_ROW_TWIST = ROW_OMEGA            # (w, w^2, 1)
_ROW_TWIST2 = ROW_OMEGA.conj()    # (w^2, w, 1)
_ONES = np.ones(3)


def _fd_weights(offsets, order):
    """Finite-difference weights for a derivative at offset 0.

    Solves the small Vandermonde system sum_i c_i s_i^m = order! * [m == order]
    so the row is exact on polynomials up to degree len(offsets)-1.
    """
    s = np.asarray(offsets, dtype=float)
    m = np.arange(len(s))
    A = s[None, :] ** m[:, None]
    rhs = np.zeros(len(s))
    rhs[order] = factorial(order)
    return np.linalg.solve(A, rhs)


# interior rows: centered 5-point; edge rows: one-sided, with six points
# for the second derivative so the edge keeps the O(h^4) interior order
_C1 = _fd_weights((-2, -1, 0, 1, 2), 1)
_C2 = _fd_weights((-2, -1, 0, 1, 2), 2)
_E1_0 = _fd_weights((0, 1, 2, 3, 4), 1)
_E1_1 = _fd_weights((-1, 0, 1, 2, 3), 1)
_E2_0 = _fd_weights((0, 1, 2, 3, 4, 5), 2)
_E2_1 = _fd_weights((-1, 0, 1, 2, 3, 4), 2)


def fd_derivative(y, h, order=1):
    """Differentiate uniformly gridded samples with 5-point stencils.

    Interior points use the centered O(h^4) rows; the first and last two
    points use one-sided rows of the same order.  Needs len(y) >= 6.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 6:
        raise ValueError("need at least 6 samples for edge stencils")
    d = np.empty_like(y)
    if order == 1:
        c = _C1
        d[2:-2] = (c[0] * y[:-4] + c[1] * y[1:-3] + c[2] * y[2:-2]
                   + c[3] * y[3:-1] + c[4] * y[4:])
        d[0] = _E1_0 @ y[:5]
        d[1] = _E1_1 @ y[:5]
        d[-2] = -(_E1_1 @ y[-1:-6:-1])
        d[-1] = -(_E1_0 @ y[-1:-6:-1])
        return d / h
    if order == 2:
        c = _C2
        d[2:-2] = (c[0] * y[:-4] + c[1] * y[1:-3] + c[2] * y[2:-2]
                   + c[3] * y[3:-1] + c[4] * y[4:])
        d[0] = _E2_0 @ y[:6]
        d[1] = _E2_1 @ y[:6]
        d[-2] = _E2_1 @ y[-1:-7:-1]
        d[-1] = _E2_0 @ y[-1:-7:-1]
        return d / h**2
    raise ValueError("order must be 1 or 2")


@dataclass(frozen=True)
class FieldPoint:
    """Field values and derivatives at one space-time point."""

    u: float = 0.0
    v: float = 0.0
    u_x: float = 0.0
    u_xx: float = 0.0
    v_x: float = 0.0


def _check_uniform(grid, name):
    d = np.diff(grid)
    if len(grid) < 6 or d[0] <= 0 or not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise SchemaError(f"{name} grid must be uniform and increasing")
    return d[0]


class InitialProfile:
    """Initial data on a uniform half-line grid [0, X_max].

    Derivative arrays are manufactured by the stencil rows above; between
    grid points every array is interpolated by its own quintic spline and
    extended by zero beyond the grid (justified by the decay check).
    """

    def __init__(self, x, u0, v0, decay_tol=DECAY_TOL):
        x = np.asarray(x, dtype=float)
        u0 = np.asarray(u0, dtype=float)
        v0 = np.asarray(v0, dtype=float)
        if not (np.isfinite(u0).all() and np.isfinite(v0).all()):
            raise SchemaError("initial profile samples must be finite")
        if abs(x[0]) > 1e-12:
            raise SchemaError("initial profile grid must start at x = 0")
        h = _check_uniform(x, "initial profile")
        tail = slice(int(np.ceil(0.9 * len(x))), None)
        tail_size = max(np.max(np.abs(u0[tail])), np.max(np.abs(v0[tail])))
        if tail_size > decay_tol:
            raise AssumptionError(
                f"profile tail {tail_size:.3e} exceeds decay threshold {decay_tol:.1e}")
        self.x = x
        self.u0 = u0
        self.v0 = v0
        self.h = h
        self.du = fd_derivative(u0, h, 1)
        self.d2u = fd_derivative(u0, h, 2)
        self.dv = fd_derivative(v0, h, 1)
        self._splines = [
            InterpolatedUnivariateSpline(x, arr, k=5, ext="zeros")
            for arr in (u0, v0, self.du, self.d2u, self.dv)
        ]

    @property
    def x_max(self):
        return float(self.x[-1])

    def support_radius(self, threshold=1e-12):
        """Rightmost grid point where any field array still exceeds threshold."""
        mag = np.max(np.abs(np.stack([self.u0, self.v0, self.du, self.dv])), axis=0)
        idx = np.nonzero(mag > threshold)[0]
        if len(idx) == 0:
            return 0.0
        return float(self.x[min(idx[-1] + 1, len(self.x) - 1)])

    def values(self, x):
        """Vectorized (u, v, u_x, u_xx, v_x) at arbitrary points."""
        u, v, du, d2u, dv = (s(x) for s in self._splines)
        return u, v, du, d2u, dv

    def point(self, x):
        u, v, du, d2u, dv = self.values(float(x))
        return FieldPoint(u=float(u), v=float(v), u_x=float(du),
                          u_xx=float(d2u), v_x=float(dv))

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.x, self.u0, self.v0]),
                   delimiter=",", header="x,u0,v0", comments="")

    @classmethod
    def from_csv(cls, path, decay_tol=DECAY_TOL):
        try:
            raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise SchemaError(f"cannot parse initial profile CSV: {exc}") from exc
        if raw.shape[1] != 3:
            raise SchemaError("initial profile CSV needs exactly 3 columns")
        return cls(raw[:, 0], raw[:, 1], raw[:, 2], decay_tol=decay_tol)


class BoundaryProfile:
    """Wall traces on a uniform t-grid [0, T].

    Carries the boundary value, its first two x-derivatives, and the
    second field's value; the second field's x-derivative trace is
    manufactured from the time derivative of the boundary value, which
    the first evolution equation equates to it.
    """

    def __init__(self, t, u0t, u1t, u2t, v0t):
        arrays = [np.asarray(a, dtype=float) for a in (t, u0t, u1t, u2t, v0t)]
        t, u0t, u1t, u2t, v0t = arrays
        for a in arrays:
            if not np.isfinite(a).all():
                raise SchemaError("boundary trace samples must be finite")
            if len(a) != len(t):
                raise SchemaError("boundary trace arrays must share the t grid")
        if abs(t[0]) > 1e-12:
            raise SchemaError("boundary trace grid must start at t = 0")
        h = _check_uniform(t, "boundary trace")
        self.t = t
        self.u0t = u0t
        self.u1t = u1t
        self.u2t = u2t
        self.v0t = v0t
        self.h = h
        self.vxt = fd_derivative(u0t, h, 1)
        self._splines = [
            InterpolatedUnivariateSpline(t, arr, k=5, ext="raise")
            for arr in (u0t, v0t, u1t, u2t, self.vxt)
        ]

    @property
    def T(self):
        return float(self.t[-1])

    def values(self, t):
        """Vectorized (u, v, u_x, u_xx, v_x) on the wall at times t."""
        u, v, du, d2u, dv = (s(t) for s in self._splines)
        return u, v, du, d2u, dv

    def point(self, t):
        u, v, du, d2u, dv = self.values(float(t))
        return FieldPoint(u=float(u), v=float(v), u_x=float(du),
                          u_xx=float(d2u), v_x=float(dv))

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.t, self.u0t, self.u1t,
                                          self.u2t, self.v0t]),
                   delimiter=",", header="t,u0t,u1t,u2t,v0t", comments="")

    @classmethod
    def from_csv(cls, path):
        try:
            raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise SchemaError(f"cannot parse boundary trace CSV: {exc}") from exc
        if raw.shape[1] != 5:
            raise SchemaError("boundary trace CSV needs exactly 5 columns")
        return cls(raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3], raw[:, 4])


def coefficient_row(u, u_x_plus_v, k):
    """Row covector of the rank-one x-direction coefficient matrix.

    The matrix is (1/3) * ones(3,1) @ row; exposing the row lets solvers
    apply the matrix with a dot product instead of a 3x3 multiply.
    Accepts arrays for u and u_x_plus_v.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(u_x_plus_v, dtype=float)
    return (-w / k**2)[..., None] * _ROW_TWIST + (-2.0 * u / k)[..., None] * _ROW_TWIST2


def build_U(p: FieldPoint, k):
    """x-direction coefficient matrix at one field point.

    Rank one: all three rows equal a covector combining the fields with
    the two twisted frame rows.  Conjugating back with the frame matrix
    recovers a matrix whose only nonzero row is the third,
    (-u_x - v, -2u, 0).
    """
    k = complex(k)
    if k == 0:
        raise SingularPointError("coefficient matrices are singular at k = 0")
    row = coefficient_row(p.u, p.u_x + p.v, k)
    return np.outer(_ONES, row) / 3.0


def laurent_U(p: FieldPoint):
    """Laurent pieces (U1, U2) with build_U = U1/k + U2/k^2."""
    U1 = np.outer(_ONES, -2.0 * p.u * _ROW_TWIST2) / 3.0
    U2 = np.outer(_ONES, -(p.u_x + p.v) * _ROW_TWIST) / 3.0
    return U1, U2


def _inner_V_pieces(p: FieldPoint):
    E0 = np.diag([4.0 * p.u / 3.0, -2.0 * p.u / 3.0, -2.0 * p.u / 3.0])
    E1 = np.zeros((3, 3))
    E1[1, 0] = p.u_x / 3.0 - p.v
    E1[2, 1] = -(p.u_x / 3.0 + p.v)
    E2 = np.zeros((3, 3))
    E2[2, 0] = p.u_xx / 3.0 - p.v_x
    return E0, E1, E2


def build_V(p: FieldPoint, k):
    """t-direction coefficient matrix at one field point.

    Equals the frame conjugation of a lower-triangular inner matrix; the
    k-dependence collapses onto three Laurent pieces conjugated by the
    k-independent frame factor.
    """
    k = complex(k)
    if k == 0:
        raise SingularPointError("coefficient matrices are singular at k = 0")
    E0, E1, E2 = _inner_V_pieces(p)
    return P0_INV @ (E0 + E1 / k + E2 / k**2) @ P0


def laurent_V(p: FieldPoint):
    """Laurent pieces (V0, V1, V2) with build_V = V0 + V1/k + V2/k^2."""
    E0, E1, E2 = _inner_V_pieces(p)
    return P0_INV @ E0 @ P0, P0_INV @ E1 @ P0, P0_INV @ E2 @ P0


def V_pieces_batch(values):
    """Laurent pieces for arrays of field values, shaped (n, 3, 3).

    values is the (u, v, u_x, u_xx, v_x) tuple from a profile; the t-solver
    combines the pieces as V0 + V1/k + V2/k^2 per evaluation point.
    """
    u, v, u_x, u_xx, v_x = (np.asarray(a, dtype=float) for a in values)
    n = u.shape[0]
    E0 = np.zeros((n, 3, 3))
    E0[:, 0, 0] = 4.0 * u / 3.0
    E0[:, 1, 1] = -2.0 * u / 3.0
    E0[:, 2, 2] = -2.0 * u / 3.0
    E1 = np.zeros((n, 3, 3))
    E1[:, 1, 0] = u_x / 3.0 - v
    E1[:, 2, 1] = -(u_x / 3.0 + v)
    E2 = np.zeros((n, 3, 3))
    E2[:, 2, 0] = u_xx / 3.0 - v_x
    conj = lambda E: np.einsum("ab,nbc,cd->nad", P0_INV, E, P0)
    return conj(E0), conj(E1), conj(E2)
