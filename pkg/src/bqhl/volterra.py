"""Column-wise eigenfunction solves and the four spectral matrices.

The two linear problems (x-direction along t = 0, t-direction along
x = 0) are integrated column by column: column j obeys an ODE whose
diagonal generator is shifted by the j-th symbol, so only the columns
whose boundedness wedge contains k ever need to be computed.
Integration runs backward from the far endpoint, where the column
equals a basis vector exactly.  The corner values at (0, 0) are the
spectral matrices.

The integrator is a vectorized embedded Dormand-Prince 5(4) pair over
the (3, ncols) complex state; steps are clamped to land exactly on
requested output points, and the per-column running maximum is tracked
so callers can budget the floating-point cancellation left by growing
columns.

Each corner value has a second, quadrature-based route (the fixed-point
integral form); `integral_form_matrices` and `volterra_residual` keep
that route available as an independent consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import algebra
from .algebra import lz_values
from .errors import (NumericalError, RegionError, SingularPointError,
                     StepControlError)
from .fields import (BoundaryProfile, InitialProfile, V_pieces_batch,
                     coefficient_row)

_ONES3 = np.ones(3)

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
# difference between the 5th-order weights and the embedded 4th-order ones
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])


@dataclass
class ODESettings:
    """Tolerances and caps for the eigenfunction solves."""

    rtol: float = 1e-10
    atol: float = 1e-12
    k_max: float = 40.0           # cap for t-direction solves
    max_steps: int = 600_000
    support_threshold: float = 1e-12

    def effective_rtol(self, k):
        # oscillation-heavy solves at large |k| cannot beat accumulated
        # roundoff, so the tolerance relaxes quadratically beyond |k| = 5
        mag = abs(k)
        if mag <= 5.0:
            return self.rtol
        return min(1e-8, max(self.rtol, self.rtol * (mag / 5.0) ** 2))


def adaptive_rk45(f, s0, s1, y0, rtol, atol, s_eval=None, max_steps=600_000):
    """Integrate y' = f(s, y) from s0 to s1 with an embedded 5(4) pair.

    y may be any complex array shape.  s_eval, if given, must run
    monotonically from s0 toward s1; steps are clamped to land on each
    entry exactly (no dense-output interpolation, so a clamped point has
    the accuracy of a genuine step endpoint).

    Returns (outputs, peak, nsteps): outputs is a list of y copies at
    s_eval (or [y(s1)] if s_eval is None), peak the elementwise running
    maximum of |y| over accepted steps, nsteps the accepted step count.

    Raises StepControlError on step-size underflow or step-count
    overflow.
    """
    y = np.array(y0, dtype=complex)
    targets = list(s_eval) if s_eval is not None else [s1]
    span = abs(s1 - s0)
    if span == 0:
        if any(abs(t - s0) > 0 for t in targets):
            raise StepControlError("zero span cannot reach requested points")
        return [y.copy() for _ in targets], np.abs(y), 0

    direction = 1.0 if s1 >= s0 else -1.0
    s = s0
    k1 = f(s, y)
    # amplitude-based first step (|y|/|y'| scale); an rtol-relative norm
    # here would start below the underflow floor for stiff systems
    y_mag = max(float(np.max(np.abs(y))), 1e-12)
    f_norm = float(np.max(np.abs(k1))) / y_mag
    h = min(span, 0.01 / max(f_norm, 1e-3 / span))

    out = []
    ti = 0
    peak = np.abs(y)
    hmin = 16 * np.finfo(float).eps * span
    nsteps = 0
    K = [None] * 7

    while ti < len(targets):
        if nsteps >= max_steps:
            raise StepControlError(f"step cap {max_steps} exceeded at s = {s:.6g}")
        remaining = abs(targets[ti] - s)
        if remaining == 0.0:
            out.append(y.copy())
            ti += 1
            continue
        clamped = h >= remaining
        h_try = remaining if clamped else h
        if h_try < hmin and not clamped:
            raise StepControlError(f"step-size underflow at s = {s:.6g}")
        hs = direction * h_try

        K[0] = k1
        for i in range(1, 6):
            yi = y + hs * sum(a * K[m] for m, a in enumerate(_DP_A[i]))
            K[i] = f(s + _DP_C[i] * hs, yi)
        y_new = y + hs * sum(a * K[m] for m, a in enumerate(_DP_A[6]))
        K[6] = f(s + hs, y_new)

        err = hs * sum(e * K[m] for m, e in enumerate(_DP_E) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))
        factor = 5.0 if err_norm == 0.0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))

        if err_norm <= 1.0:
            y = y_new
            k1 = K[6]
            nsteps += 1
            np.maximum(peak, np.abs(y), out=peak)
            if clamped:
                s = targets[ti]
                out.append(y.copy())
                ti += 1
                # a clamped step says nothing against the controller's
                # step, but a cheap one may still enlarge it
                h = max(h, h_try * factor)
            else:
                s = s + hs
                h = h_try * factor
        else:
            h = h_try * factor

    return out, peak, nsteps


@dataclass
class EigenfunctionSlice:
    """One eigenfunction along an edge of the quarter plane at fixed k.

    values[m] is the 3x3 matrix at grid[m]; columns that were not
    computed hold NaN.  The integration starts at the far end of the
    grid, where the computed columns are basis vectors exactly.
    """

    family: str
    k: complex
    grid: np.ndarray
    values: np.ndarray
    columns: tuple
    peaks: np.ndarray = None
    nsteps: int = 0

    def corner(self):
        """Matrix at the near end (x = 0 or t = 0)."""
        return self.values[0]

    def terminal_defect(self):
        """Max deviation of the far-end computed columns from identity."""
        worst = 0.0
        for c in self.columns:
            e = np.zeros(3)
            e[c - 1] = 1.0
            worst = max(worst, float(np.max(np.abs(self.values[-1, :, c - 1] - e))))
        return worst


def _check_k(k):
    k = complex(k)
    if k == 0:
        raise SingularPointError("eigenfunctions are not defined at k = 0")
    return k


def _resolve_cols(family, k, cols, allow_growth):
    if cols is None:
        if family in ("mu1", "mu1_adj") or allow_growth:
            cols = (1, 2, 3)
        else:
            cols = tuple(c for c in (1, 2, 3)
                         if algebra.column_is_bounded(family, c, k))
    bad = [c for c in cols if not algebra.column_is_bounded(family, c, k)]
    if bad and not allow_growth and family in ("mu3", "mu3_adj"):
        raise RegionError(
            f"{family} column(s) {bad} grow at arg k = "
            f"{np.degrees(np.angle(k)):.2f} deg; pass allow_growth to force")
    return tuple(cols)


def _basis_columns(cols):
    y0 = np.zeros((3, len(cols)), dtype=complex)
    for m, c in enumerate(cols):
        y0[c - 1, m] = 1.0
    return y0


def _pack_slice(family, k, grid, cols, outs_descending, peak, nsteps):
    values = np.full((len(grid), 3, 3), np.nan, dtype=complex)
    for idx, out in enumerate(outs_descending[::-1]):
        for m, c in enumerate(cols):
            values[idx, :, c - 1] = out[:, m]
    peaks = np.full(3, np.nan)
    for m, c in enumerate(cols):
        peaks[c - 1] = peak[:, m].max()
    return EigenfunctionSlice(family=family, k=k, grid=grid, values=values,
                              columns=cols, peaks=peaks, nsteps=nsteps)


def _solve_x_family(family, k, init, cols, settings, allow_growth, x_eval):
    k = _check_k(k)
    settings = settings or ODESettings()
    cols = _resolve_cols(family, k, cols, allow_growth)
    lvec, _ = lz_values(k)
    lsel = lvec[[c - 1 for c in cols]]
    adjoint = family.endswith("_adj")

    far = init.support_radius(settings.support_threshold)
    if x_eval is None:
        grid = np.array([0.0, max(far, 1.0)])
    else:
        grid = np.asarray(x_eval, dtype=float)
        if len(grid) == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ValueError("x_eval must be strictly ascending, nonnegative")

    shift = lvec[:, None] - lsel[None, :]
    u_sp, v_sp, du_sp = init._splines[0], init._splines[1], init._splines[2]

    def rhs(x, Y):
        u = float(u_sp(x))
        b = coefficient_row(u, float(du_sp(x)) + float(v_sp(x)), k)
        if adjoint:
            return -shift * Y - np.outer(b, Y.sum(axis=0)) / 3.0
        return shift * Y + np.outer(_ONES3, b @ Y) / 3.0

    start = max(far, grid[-1])
    targets = list(grid[::-1])
    extra = 0
    if targets[0] < start:
        targets = [start] + targets          # enter the support quietly
        extra = 1
    rtol = settings.effective_rtol(k)
    outs, peak, nsteps = adaptive_rk45(rhs, start, 0.0, _basis_columns(cols),
                                       rtol, settings.atol, s_eval=targets,
                                       max_steps=settings.max_steps)
    return _pack_slice(family, k, grid, cols, outs[extra:], peak, nsteps)


def _solve_t_family(family, k, bdry, cols, settings, t_eval):
    k = _check_k(k)
    settings = settings or ODESettings()
    if abs(k) > settings.k_max:
        raise StepControlError(
            f"|k| = {abs(k):.3g} exceeds the t-direction cap {settings.k_max}; "
            "use the large-k tail expansion instead of direct integration")
    cols = _resolve_cols(family, k, cols, allow_growth=True)
    _, zvec = lz_values(k)
    zsel = zvec[[c - 1 for c in cols]]
    adjoint = family.endswith("_adj")
    T = bdry.T

    if t_eval is None:
        grid = np.array([0.0, T])
    else:
        grid = np.asarray(t_eval, dtype=float)
        if len(grid) == 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("t_eval must be strictly ascending")
        if grid[0] < 0 or grid[-1] > T + 1e-12:
            raise ValueError("t_eval must stay within [0, T]")

    shift = zvec[:, None] - zsel[None, :]
    ik, ik2 = 1.0 / k, 1.0 / k ** 2
    P0, P0_INV = algebra.P0, algebra.P0_INV

    def rhs(t, Y):
        u, v, du, d2u, dv = bdry.values(t)
        E = np.zeros((3, 3), dtype=complex)
        E[0, 0] = 4.0 * u / 3.0
        E[1, 1] = E[2, 2] = -2.0 * u / 3.0
        E[1, 0] = (du / 3.0 - v) * ik
        E[2, 1] = -(du / 3.0 + v) * ik
        E[2, 0] = (d2u / 3.0 - dv) * ik2
        V = P0_INV @ E @ P0
        if adjoint:
            return -shift * Y - V.T @ Y
        return shift * Y + V @ Y

    targets = list(grid[::-1])
    extra = 0
    if targets[0] < T:
        targets = [T] + targets
        extra = 1
    rtol = settings.effective_rtol(k)
    outs, peak, nsteps = adaptive_rk45(rhs, T, 0.0, _basis_columns(cols),
                                       rtol, settings.atol, s_eval=targets,
                                       max_steps=settings.max_steps)
    return _pack_slice(family, k, grid, cols, outs[extra:], peak, nsteps)


def solve_mu3_initial(k, init: InitialProfile, cols=None, settings=None,
                      allow_growth=False, x_eval=None):
    """x-direction eigenfunction along t = 0 (decaying normalization)."""
    return _solve_x_family("mu3", k, init, cols, settings, allow_growth, x_eval)


def solve_mu3A_initial(k, init: InitialProfile, cols=None, settings=None,
                       allow_growth=False, x_eval=None):
    """Adjoint x-direction eigenfunction along t = 0."""
    return _solve_x_family("mu3_adj", k, init, cols, settings, allow_growth,
                           x_eval)


def solve_mu1_boundary(k, bdry: BoundaryProfile, cols=None, settings=None,
                       t_eval=None):
    """t-direction eigenfunction along x = 0 (normalized at t = T)."""
    return _solve_t_family("mu1", k, bdry, cols, settings, t_eval)


def solve_mu1A_boundary(k, bdry: BoundaryProfile, cols=None, settings=None,
                        t_eval=None):
    """Adjoint t-direction eigenfunction along x = 0."""
    return _solve_t_family("mu1_adj", k, bdry, cols, settings, t_eval)


def solve_x_column_batch(ks, init: InitialProfile, col, settings=None,
                         adjoint=False, allow_growth=False):
    """One x-direction eigenfunction column at many k simultaneously.

    All k share the integration span and step control, so a batch costs
    about as much as a single solve at the largest |k|.  Returns
    (corners, peaks): corners[:, m] is the column at x = 0 for ks[m],
    peaks[m] the path maximum of its modulus (cancellation budgeting).
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    if np.any(ks == 0):
        raise SingularPointError("eigenfunctions are not defined at k = 0")
    settings = settings or ODESettings()
    family = "mu3_adj" if adjoint else "mu3"
    if not allow_growth:
        bad = [k for k in ks if not algebra.column_is_bounded(family, col, k)]
        if bad:
            raise RegionError(
                f"{family} column {col} grows at {len(bad)} of the "
                "requested k; pass allow_growth to force")

    lT = lz_values(ks)[0].T                      # (3, M)
    shift = lT - lT[col - 1]
    u_sp, v_sp, du_sp = init._splines[0], init._splines[1], init._splines[2]

    def rhs(x, Y):
        u = float(u_sp(x))
        B = coefficient_row(u, float(du_sp(x)) + float(v_sp(x)), ks).T
        if adjoint:
            return -shift * Y - B * (Y.sum(axis=0) / 3.0)
        return shift * Y + np.sum(B * Y, axis=0) / 3.0

    M = len(ks)
    y0 = np.zeros((3, M), dtype=complex)
    y0[col - 1] = 1.0
    far = max(init.support_radius(settings.support_threshold), 1.0)
    rtol = settings.effective_rtol(np.min(np.abs(ks)))
    outs, peak, _ = adaptive_rk45(rhs, far, 0.0, y0, rtol, settings.atol,
                                  max_steps=settings.max_steps)
    return outs[0], peak.max(axis=0)


def solve_t_column_batch(ks, bdry: BoundaryProfile, col, settings=None,
                         adjoint=False):
    """One t-direction eigenfunction column at many k simultaneously."""
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    if np.any(ks == 0):
        raise SingularPointError("eigenfunctions are not defined at k = 0")
    settings = settings or ODESettings()
    worst = float(np.max(np.abs(ks)))
    if worst > settings.k_max:
        raise StepControlError(
            f"batch reaches |k| = {worst:.3g}, beyond the t-direction cap "
            f"{settings.k_max}")

    zT = lz_values(ks)[1].T
    shift = zT - zT[col - 1]
    ik, ik2 = 1.0 / ks, 1.0 / ks ** 2
    P0, P0_INV = algebra.P0, algebra.P0_INV

    def rhs(t, Y):
        u, v, du, d2u, dv = bdry.values(t)
        E0 = np.diag([4.0 * u / 3.0, -2.0 * u / 3.0, -2.0 * u / 3.0])
        E1 = np.zeros((3, 3))
        E1[1, 0] = du / 3.0 - v
        E1[2, 1] = -(du / 3.0 + v)
        E2 = np.zeros((3, 3))
        E2[2, 0] = d2u / 3.0 - dv
        V0 = P0_INV @ E0 @ P0
        V1 = P0_INV @ E1 @ P0
        V2 = P0_INV @ E2 @ P0
        if adjoint:
            act = V0.T @ Y + (V1.T @ Y) * ik + (V2.T @ Y) * ik2
            return -shift * Y - act
        return shift * Y + V0 @ Y + (V1 @ Y) * ik + (V2 @ Y) * ik2

    M = len(ks)
    y0 = np.zeros((3, M), dtype=complex)
    y0[col - 1] = 1.0
    rtol = settings.effective_rtol(np.min(np.abs(ks)))
    outs, peak, _ = adaptive_rk45(rhs, bdry.T, 0.0, y0, rtol, settings.atol,
                                  max_steps=settings.max_steps)
    return outs[0], peak.max(axis=0)


_SOLVERS = {"mu3": solve_mu3_initial, "mu3_adj": solve_mu3A_initial,
            "mu1": solve_mu1_boundary, "mu1_adj": solve_mu1A_boundary}

_FAMILY_OF = {"s": "mu3", "S": "mu1", "sA": "mu3_adj", "SA": "mu1_adj"}


@dataclass
class SpectralMatrices:
    """Corner values of the four eigenfunction families at one k.

    The masks mark which columns sit inside their boundedness wedge;
    columns outside it are NaN unless the solve was forced.  peaks maps
    each computed name to the per-column path maxima, the input for
    cancellation budgeting downstream.
    """

    k: complex
    s: np.ndarray = None
    S: np.ndarray = None
    sA: np.ndarray = None
    SA: np.ndarray = None
    valid_s: np.ndarray = None
    valid_S: np.ndarray = None
    valid_sA: np.ndarray = None
    valid_SA: np.ndarray = None
    peaks: dict = field(default_factory=dict)

    def matrix(self, name):
        return getattr(self, name)

    def valid(self, name):
        return getattr(self, "valid_" + name)


def spectral_matrices(k, init=None, bdry=None, settings=None,
                      families=("s", "S", "sA", "SA"), allow_growth=False,
                      cols=None):
    """Corner evaluation of the requested spectral matrices at k.

    cols optionally maps a family name ("s", "S", "sA", "SA") to a
    column tuple; by default the x-direction families compute their
    wedge-valid columns (all three when allow_growth is set) and the
    t-direction families all columns.  Validity masks always reflect the
    wedge tables, whatever was computed.
    """
    k = _check_k(k)
    settings = settings or ODESettings()
    out = SpectralMatrices(k=k)
    for name in families:
        fam = _FAMILY_OF[name]
        want = None if cols is None else cols.get(name)
        if fam in ("mu3", "mu3_adj"):
            if init is None:
                continue
            sl = _SOLVERS[fam](k, init, cols=want, settings=settings,
                               allow_growth=allow_growth)
        else:
            if bdry is None:
                continue
            sl = _SOLVERS[fam](k, bdry, cols=want, settings=settings)
        setattr(out, name, sl.corner())
        mask = np.array([algebra.column_is_bounded(fam, c, k)
                         for c in (1, 2, 3)])
        setattr(out, "valid_" + name, mask)
        out.peaks[name] = sl.peaks
    return out


def _volterra_product(family, data, grid, values, k):
    """W(s_m) = (coefficient matrix acting on the slice) as an (n,3,3) stack.

    For the adjoint families the action is by the transposed matrix, to
    match the adjoint ODE.
    """
    M = np.nan_to_num(values)
    if family.startswith("mu3"):
        u, v, du, _, _ = data.values(grid)
        b = coefficient_row(u, du + v, k)            # (n, 3)
        if family.endswith("_adj"):
            colsum = M.sum(axis=1)                   # (n, 3)
            return b[:, :, None] * colsum[:, None, :] / 3.0
        bM = np.einsum("na,nac->nc", b, M)
        return np.repeat(bM[:, None, :], 3, axis=1) / 3.0
    V0, V1, V2 = V_pieces_batch(data.values(grid))
    V = V0 + V1 / k + V2 / k ** 2
    if family.endswith("_adj"):
        return np.einsum("nba,nbc->nac", V, M)
    return np.einsum("nab,nbc->nac", V, M)


def _phase_guard(expo):
    if np.max(expo) > 705.0:
        raise NumericalError(
            "integral-route exponential overflows; restrict this check to "
            "moderate |k| or shorten the window")


def volterra_residual(sl: EigenfunctionSlice, data):
    """Defect of the fixed-point integral form on the slice's own grid.

    Independent of the ODE stepping: evaluates the coefficient product
    on the stored grid and compares the integral right-hand side with
    the stored values.  Quadrature is trapezoid sharpened by one
    Richardson level, so the grid must be uniform with an even interval
    count.  Returns the max defect over the computed entries, measured
    at every second grid point.
    """
    grid = sl.grid
    n = len(grid)
    if n < 5 or (n - 1) % 2 != 0:
        raise ValueError("need an odd-length grid with an even interval count")
    h = np.diff(grid)
    if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(grid[-1])):
        raise ValueError("residual check needs a uniform grid")

    k = sl.k
    lvec, zvec = lz_values(k)
    diag = lvec if sl.family.startswith("mu3") else zvec
    sign = 1.0 if sl.family.endswith("_adj") else -1.0
    W = _volterra_product(sl.family, data, grid, sl.values, k)

    worst = 0.0
    for c in sl.columns:
        j = c - 1
        for i in range(3):
            lam = diag[i] - diag[j]
            _phase_guard(np.real(sign * grid * lam))
            _phase_guard(np.real(-sign * grid * lam))
            g = np.exp(sign * grid * lam) * W[:, i, j] * sign
            # reverse cumulative trapezoid on the full and halved grids
            seg = 0.5 * (g[1:] + g[:-1]) * np.diff(grid)
            C1 = np.concatenate([seg[::-1].cumsum()[::-1], [0.0]])
            g2, x2 = g[::2], grid[::2]
            seg2 = 0.5 * (g2[1:] + g2[:-1]) * np.diff(x2)
            C2 = np.concatenate([seg2[::-1].cumsum()[::-1], [0.0]])
            C = (4.0 * C1[::2] - C2) / 3.0
            pred = (1.0 if i == j else 0.0) + np.exp(-sign * x2 * lam) * C
            worst = max(worst, float(np.max(np.abs(sl.values[::2, i, j] - pred))))
    return worst


def integral_form_matrices(k, init=None, bdry=None, settings=None,
                           n_points=4001):
    """Recompute the corner matrices from their integral representations.

    Solves each slice on a dense uniform grid, then applies the
    phase-weighted quadrature once over the whole edge.  This is the
    dual route to the plain ODE corner value; the two must agree to a
    small multiple of the integration tolerance.  Returns a dict keyed
    by matrix name, NaN in uncomputed columns.
    """
    k = _check_k(k)
    settings = settings or ODESettings()
    out = {}

    def corner_from_slice(sl, data):
        grid = sl.grid
        sign = 1.0 if sl.family.endswith("_adj") else -1.0
        lvec, zvec = lz_values(k)
        diag = lvec if sl.family.startswith("mu3") else zvec
        W = _volterra_product(sl.family, data, grid, sl.values, k)
        M = np.full((3, 3), np.nan, dtype=complex)
        for c in sl.columns:
            j = c - 1
            for i in range(3):
                lam = diag[i] - diag[j]
                _phase_guard(np.real(sign * grid * lam))
                g = np.exp(sign * grid * lam) * W[:, i, j]
                M[i, j] = (1.0 if i == j else 0.0) + sign * simpson(g, x=grid)
        return M

    if init is not None:
        far = max(init.support_radius(settings.support_threshold), 1.0)
        grid = np.linspace(0.0, far, n_points)
        for fam, name in (("mu3", "s"), ("mu3_adj", "sA")):
            sl = _SOLVERS[fam](k, init, settings=settings, x_eval=grid)
            out[name] = corner_from_slice(sl, init)
    if bdry is not None:
        grid = np.linspace(0.0, bdry.T, n_points)
        for fam, name in (("mu1", "S"), ("mu1_adj", "SA")):
            sl = _SOLVERS[fam](k, bdry, settings=settings, t_eval=grid)
            out[name] = corner_from_slice(sl, bdry)
    return out


@dataclass
class GlobalRelationCheck:
    """Residual of the corner identity tying the two edges together."""

    k: complex
    residual: float
    mask: np.ndarray          # (3, 3) bool, entries that were comparable
    lhs: np.ndarray
    rhs: np.ndarray


def global_relation_residual(k, init0: InitialProfile, init_T: InitialProfile,
                             bdry: BoundaryProfile, settings=None):
    """Check the two-edge consistency identity at one k.

    lhs couples the t = 0 data (through the decaying x-family) with the
    x = 0 data (through the adjoint t-family); rhs is the decaying
    x-family of the time-T profile, phase-weighted back to t = 0.  Only
    entries whose column is wedge-valid and whose phase weight does not
    amplify are compared; the mask records them.
    """
    k = _check_k(k)
    settings = settings or ODESettings()
    T = bdry.T
    _, zvec = lz_values(k)

    s = solve_mu3_initial(k, init0, settings=settings).corner()
    SA = solve_mu1A_boundary(k, bdry, settings=settings).corner()
    muT = solve_mu3_initial(k, init_T, settings=settings).corner()

    lhs = SA.T @ np.nan_to_num(s)
    phase = np.exp(-T * (zvec[:, None] - zvec[None, :]))
    rhs = muT * phase

    col_ok = np.array([algebra.column_is_bounded("mu3", c, k)
                       for c in (1, 2, 3)])
    grow = np.real(zvec[:, None] - zvec[None, :]) < -1e-12 * max(1.0, abs(k) ** 2)
    mask = col_ok[None, :] & ~grow
    residual = float(np.max(np.abs(np.where(mask, lhs - rhs, 0.0))))
    return GlobalRelationCheck(k=k, residual=residual, mask=mask,
                               lhs=lhs, rhs=rhs)


def initial_moment_route(init: InitialProfile, xs):
    """First two large-k moments of the decaying column's (3,3) entry,
    by direct field quadrature (no ODE involved).

    Returns (m1, m2) arrays over xs:
      m1(x) = (2/3) * integral of u from x to the right edge,
      m2(x) = -u(x)/3 + (1/3) * integral of v from x  +  m1(x)^2 / 2.
    k * (mu3 - I)_33 tends to m1 + m2/k + O(1/k^2) for large k inside
    the third column's wedge.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    u_sp, v_sp = init._splines[0], init._splines[1]
    xmax = init.x_max
    m1 = np.array([(2.0 / 3.0) * u_sp.integral(x, xmax) for x in xs])
    iv = np.array([v_sp.integral(x, xmax) for x in xs])
    m2 = -u_sp(xs) / 3.0 + iv / 3.0 + 0.5 * m1 ** 2
    return m1, m2


@dataclass
class OriginPatternReport:
    """Rank-one structure of the double-pole coefficient near k = 0."""

    radii: np.ndarray
    direction_deg: float
    limits: dict               # label -> extrapolated 3x3 limit of k^2 * mu
    row_defect: float          # worst relative row disagreement
    twist_defect: float        # worst relative deviation from the twist row
    scale: float               # magnitude the defects are relative to


def _rank_one_defects(C):
    scale = float(np.max(np.abs(C)))
    if scale < 1e-13:
        return 0.0, 0.0, scale
    row_defect = max(float(np.max(np.abs(C[a] - C[b]))) / scale
                     for a in range(3) for b in range(a + 1, 3))
    w = algebra.ROW_OMEGA
    mean_row = C.mean(axis=0)
    coef = np.mean(mean_row * np.conj(w))
    twist_defect = float(np.max(np.abs(mean_row - coef * w))) / scale
    return row_defect, twist_defect, scale


def origin_pattern_check(init: InitialProfile = None,
                         bdry: BoundaryProfile = None, settings=None,
                         radii=None, direction_deg=75.0, xs=(0.0, 1.0),
                         ts=(0.0,), fit_degree=3):
    """Extrapolate k^2 * mu to k = 0 and measure its rank-one pattern.

    Solves the full matrix (growth is negligible at these radii) at a
    handful of small |k| along one ray, never below |k| = 0.05, and
    extrapolates each entry to 0 with a cubic fit in |k| (the first
    radius is still far from asymptotic, so a quadratic is not enough).
    The limit must have three equal rows, each proportional to the
    twist row (w, w^2, 1).
    """
    settings = settings or ODESettings()
    if radii is None:
        radii = np.geomspace(0.05, 0.12, 6)
    radii = np.asarray(radii, dtype=float)
    phase = np.exp(1j * np.radians(direction_deg))

    limits = {}
    row_defect = twist_defect = scale = 0.0

    def record(label, C):
        nonlocal row_defect, twist_defect, scale
        limits[label] = C
        rd, td, sc = _rank_one_defects(C)
        row_defect = max(row_defect, rd)
        twist_defect = max(twist_defect, td)
        scale = max(scale, sc)

    if init is not None:
        xs_arr = np.asarray(sorted(set(float(x) for x in xs)))
        stack = np.array([(complex(r * phase) ** 2) *
                          solve_mu3_initial(r * phase, init, cols=(1, 2, 3),
                                            settings=settings,
                                            allow_growth=True,
                                            x_eval=xs_arr).values
                          for r in radii])
        flat = np.polyfit(radii, stack.reshape(len(radii), -1), fit_degree)[-1]
        for x, C in zip(xs_arr, flat.reshape(len(xs_arr), 3, 3)):
            record(f"initial@x={x:g}", C)

    if bdry is not None:
        ts_arr = np.asarray(sorted(set(float(t) for t in ts)))
        stack = np.array([(complex(r * phase) ** 2) *
                          solve_mu1_boundary(r * phase, bdry,
                                             settings=settings,
                                             t_eval=ts_arr).values
                          for r in radii])
        flat = np.polyfit(radii, stack.reshape(len(radii), -1), fit_degree)[-1]
        for t, C in zip(ts_arr, flat.reshape(len(ts_arr), 3, 3)):
            record(f"boundary@t={t:g}", C)

    return OriginPatternReport(radii=radii, direction_deg=direction_deg,
                               limits=limits, row_defect=row_defect,
                               twist_defect=twist_defect, scale=scale)
