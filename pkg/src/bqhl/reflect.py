"""Reflection coefficients on their rays and everything derived from them.

Four scalar functions summarize the scattering of a half-line field
pair: r1 on the positive real axis, r2 on the negative real axis, and
r3, r4 on the 30-degree ray.  Each is a ratio of bilinear combinations
of eigenfunction corner columns; the combinations mix exponentially
large t-direction columns with exponentially small x-direction ones, so
every value carries a propagated cancellation-error estimate built from
the solver peak magnitudes.  Dataset assembly walks each ray until the
error budget is exhausted (only r1's ray ever hits the budget: its wall
column grows like exp(3|k|^2 T / 2)).

Large-k tails are fitted on the outer half of each ray in the pinned
inverse-power bases.  One structural subtlety is measured and modeled
here rather than assumed away: t-direction corner entries pick up an
oscillatory wall contribution ~ u(0,T) e^{i sqrt(3) T |k|^2} / k^2 on
the two rays where Re(z_i - z_j) degenerates, so a pure power fit has
an irreducible residual whenever the wall trace at t = T is not small.
The fit reports its residual honestly and flags quality instead of
pretending the basis is complete; `adjoint_wall_tail_model` provides
the closed-form two-term model used to cross-check the solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import algebra
from .algebra import OMEGA
from .errors import (AssumptionError, NumericalError, RegionError,
                     SchemaError, SingularPointError)
from .fields import BoundaryProfile, InitialProfile
from .volterra import (ODESettings, SpectralMatrices, solve_t_column_batch,
                       solve_x_column_batch)

_EPS = float(np.finfo(float).eps)
# multiple of rtol*peak used as a one-column error estimate; calibrated
# against batch-vs-single solver discrepancies on growing columns
_ERR_SAFETY = 10.0
_SOLITON_TOL = 1e-13

RAY_OF_COEFF = {1: 1, 2: 7, 3: 2, 4: 2}
RAY_ANGLE_DEG = {1: 0.0, 2: 180.0, 3: 30.0, 4: 30.0}

_DEN_NAMES = {
    1: "sL[1,1]",
    2: "sA[1,1]*SA[3,3] - sA[3,1]*SA[1,3] (r2 denominator)",
    3: "sA[3,3] * sL[1,1] (r3 denominator)",
    4: "sA[3,3] * (sA[3,3]*SA[1,1] - sA[1,3]*SA[3,1]) (r4 denominator)",
}


def _product_err(a, ea, b, eb):
    """First-order error of an elementwise product of noisy complex arrays."""
    return np.abs(a) * eb + np.abs(b) * ea + _EPS * np.abs(a * b)


def _dot_columns(a, b, ea, eb):
    """Columnwise dot of (3, M) stacks with propagated error; errors are
    per-column scalars shared by the three entries."""
    val = np.sum(a * b, axis=0)
    err = np.sum(np.abs(a) * eb + np.abs(b) * ea + _EPS * np.abs(a * b),
                 axis=0)
    return val, err


def _check_denominator(name, den, ks):
    den = np.atleast_1d(den)
    bad = np.abs(den) < _SOLITON_TOL
    if np.any(bad):
        m = int(np.argmax(bad))
        raise AssumptionError(
            f"{name} vanishes (|.| = {abs(den[m]):.2e}) at k = {ks[m]:.6g}: "
            "soliton-type spectral zero; the reflection coefficient is "
            "undefined there")


class SpectralFunctionEvaluator:
    """Cached corner-column access plus the four reflection formulas.

    Columns are solved in k-batches (one integration per ray and column)
    and cached by (matrix, column, node set), so r3 and r4 share their
    common columns and repeated queries are free.
    """

    def __init__(self, init: InitialProfile, bdry: BoundaryProfile,
                 settings: ODESettings | None = None):
        self.init = init
        self.bdry = bdry
        self.settings = settings or ODESettings()
        self._cache = {}

    def columns(self, name, col, ks, allow_growth=False):
        """Column `col` of matrix `name` in {s, S, sA, SA} at nodes ks.

        Returns (values (3, M), err (M,)) where err is an absolute
        uncertainty estimate per node, rtol * path peak per column.
        """
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        key = (name, col, bool(allow_growth), ks.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if name == "s":
            vals, peaks = solve_x_column_batch(
                ks, self.init, col, self.settings, adjoint=False,
                allow_growth=allow_growth)
        elif name == "sA":
            vals, peaks = solve_x_column_batch(
                ks, self.init, col, self.settings, adjoint=True,
                allow_growth=allow_growth)
        elif name == "S":
            vals, peaks = solve_t_column_batch(
                ks, self.bdry, col, self.settings, adjoint=False)
        elif name == "SA":
            vals, peaks = solve_t_column_batch(
                ks, self.bdry, col, self.settings, adjoint=True)
        else:
            raise ValueError(f"unknown spectral matrix {name!r}")
        rtol = self.settings.effective_rtol(float(np.min(np.abs(ks))))
        errs = _ERR_SAFETY * rtol * peaks + self.settings.atol
        self._cache[key] = (vals, errs)
        return vals, errs

    def sL11(self, ks, allow_growth=False):
        """(S^-1 s)_11 with error estimate (the r1/r3 denominator core)."""
        A1, eA1 = self.columns("SA", 1, ks)
        s1, e1 = self.columns("s", 1, ks, allow_growth)
        return _dot_columns(A1, s1, eA1, e1)

    def reflection_batch(self, j, ks, allow_growth=False):
        """All four formulas, vectorized over one ray's nodes."""
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        if j == 1:
            s2, e2 = self.columns("s", 2, ks, allow_growth)
            A1, eA1 = self.columns("SA", 1, ks)
            den, eden = self.sL11(ks, allow_growth)
            num, enum = _dot_columns(A1, s2, eA1, e2)
        elif j == 2:
            a1, ea1 = self.columns("sA", 1, ks, allow_growth)
            a2, ea2 = self.columns("sA", 2, ks, allow_growth)
            A3, eA3 = self.columns("SA", 3, ks)
            num = a2[0] * A3[2] - a2[2] * A3[0]
            enum = (_product_err(a2[0], ea2, A3[2], eA3)
                    + _product_err(a2[2], ea2, A3[0], eA3))
            den = a1[0] * A3[2] - a1[2] * A3[0]
            eden = (_product_err(a1[0], ea1, A3[2], eA3)
                    + _product_err(a1[2], ea1, A3[0], eA3))
        elif j in (3, 4):
            a3, ea3 = self.columns("sA", 3, ks, allow_growth)
            A1, eA1 = self.columns("SA", 1, ks)
            _check_denominator("sA[3,3]", a3[2], ks)
            if j == 3:
                sl, esl = self.sL11(ks, allow_growth)
                _check_denominator("sL[1,1]", sl, ks)
                num, enum = A1[2], eA1
                den = a3[2] * sl
                eden = _product_err(a3[2], ea3, sl, esl)
            else:
                s1, e1 = self.columns("s", 1, ks, allow_growth)
                inner = a3[2] * A1[0] - a3[0] * A1[2]
                einner = (_product_err(a3[2], ea3, A1[0], eA1)
                          + _product_err(a3[0], ea3, A1[2], eA1))
                num = A1[2] * s1[1]
                enum = _product_err(A1[2], eA1, s1[1], e1)
                den = a3[2] * inner
                eden = _product_err(a3[2], ea3, inner, einner)
        else:
            raise ValueError(f"reflection index must be 1..4, got {j}")
        _check_denominator(_DEN_NAMES[j], den, ks)
        r = num / den
        err = (enum + np.abs(r) * eden) / np.abs(den)
        return r, err

    def reflection(self, j, k, strict_ray=True):
        """One reflection coefficient; returns (value, err_estimate).

        With strict_ray the node must lie on the coefficient's ray.
        Passing strict_ray=False evaluates the same formula anywhere
        (growing columns forced), which is how the Schwartz-conjugate
        consistency check reaches mirrored arguments.
        """
        k = complex(k)
        if strict_ray:
            loc = algebra.classify(k)
            want = RAY_OF_COEFF[j]
            if loc.kind != "ray" or loc.index != want:
                raise RegionError(
                    f"r{j} lives on ray {want} "
                    f"(angle {RAY_ANGLE_DEG[j]:g} deg); got k = {k:.6g}")
        vals, errs = self.reflection_batch(
            j, np.array([k]), allow_growth=not strict_ray)
        return complex(vals[0]), float(errs[0])

    def schwartz_pair(self, j, k):
        """Two routes to the Schwartz conjugate of r_j at a node k on
        the coefficient's ray.

        Route one conjugates the plain formula at k.  Route two uses
        the conjugation symmetry of the spectral matrices, which swaps
        matrix indices 1 and 2 and moves the argument to conj(k); both
        evaluations then run in venues where every column involved is
        bounded, so agreement is limited only by solver tolerance.
        Returns (direct_conjugate, swapped_formula).
        """
        k = complex(k)
        lhs = np.conj(self.reflection(j, k)[0])
        km = np.array([np.conj(k)])
        if j == 1:
            A2, eA2 = self.columns("SA", 2, km)
            s1, e1 = self.columns("s", 1, km, allow_growth=True)
            s2, e2 = self.columns("s", 2, km, allow_growth=True)
            num, _ = _dot_columns(A2, s1, eA2, e1)
            den, _ = _dot_columns(A2, s2, eA2, e2)
        elif j == 2:
            a1, _ = self.columns("sA", 1, km, allow_growth=True)
            a2, _ = self.columns("sA", 2, km, allow_growth=True)
            A3, _ = self.columns("SA", 3, km)
            num = a1[1] * A3[2] - a1[2] * A3[1]
            den = a2[1] * A3[2] - a2[2] * A3[1]
        elif j in (3, 4):
            A2, eA2 = self.columns("SA", 2, km)
            a3, _ = self.columns("sA", 3, km, allow_growth=True)
            if j == 3:
                s2, e2 = self.columns("s", 2, km, allow_growth=True)
                sl22, _ = _dot_columns(A2, s2, eA2, e2)
                num = A2[2]
                den = a3[2] * sl22
            else:
                s2, _ = self.columns("s", 2, km, allow_growth=True)
                num = A2[2] * s2[0]
                den = a3[2] * (a3[2] * A2[1] - a3[1] * A2[2])
        else:
            raise ValueError(f"reflection index must be 1..4, got {j}")
        return complex(lhs), complex((num / den)[0])

    def r4_denominator_consistency(self, k):
        """Cross-check of the r4 inner denominator at k on the 30-degree
        ray against the r2-denominator formula at conj(omega*k); the two
        are equal by the conjugation symmetry of the adjoint matrices.
        Returns (direct, mirrored).
        """
        ks = np.array([complex(k)])
        a3, _ = self.columns("sA", 3, ks)
        A1, _ = self.columns("SA", 1, ks)
        direct = a3[2, 0] * A1[0, 0] - a3[0, 0] * A1[2, 0]
        km = np.array([np.conj(OMEGA * complex(k))])
        b1, _ = self.columns("sA", 1, km)
        B3, _ = self.columns("SA", 3, km)
        mirrored = np.conj(b1[0, 0] * B3[2, 0] - b1[2, 0] * B3[0, 0])
        return complex(direct), complex(mirrored)


def compute_sL(k, m: SpectralMatrices):
    """Left spectral product (S^A)^T s at one already-solved node.

    Columns of s that were not valid at k stay NaN in the product.
    """
    if not np.any(m.valid_s):
        raise RegionError(f"no column of s is bounded at k = {m.k:.6g}")
    return m.matrix("SA").T @ m.matrix("s")


def ray_nodes(kmax, n=64, r_min=0.05):
    """Node magnitudes graded toward both endpoints.

    5/8 of the nodes cluster geometrically toward r_min on [r_min,
    kmax/2); the rest cluster toward kmax on [kmax/2, kmax], so both the
    origin extrapolation and the tail fit see locally refined grids.
    """
    if kmax <= 2 * r_min:
        raise ValueError("kmax too small for the two-sided grading")
    n_lo = (5 * n) // 8
    n_hi = n - n_lo
    lo = np.geomspace(r_min, kmax / 2, n_lo, endpoint=False)
    hi = kmax + r_min - np.geomspace(r_min, kmax / 2 + r_min, n_hi)[::-1]
    return np.concatenate([lo, hi])


@dataclass
class RaySamples:
    """Signed samples of one reflection coefficient along its ray."""

    j: int
    angle_deg: float
    k: np.ndarray
    r: np.ndarray
    err: np.ndarray
    tail: np.ndarray | None = None
    tail_powers: tuple = (1, 2)
    tail_report: dict = field(default_factory=dict)
    origin: complex | None = None

    def magnitudes(self):
        return np.abs(self.k)


@dataclass
class SpectralDataSet:
    """Immutable-by-convention container for the four sampled rays."""

    rays: dict
    T: float
    kmax: float
    assumptions: dict = field(default_factory=dict)

    def ray(self, j) -> RaySamples:
        return self.rays[j]

    def to_json(self):
        doc = {"schema": "bqhl/1", "T": float(self.T),
               "kmax": float(self.kmax), "assumptions": self.assumptions,
               "rays": []}
        for j in sorted(self.rays):
            ray = self.rays[j]
            samples = [[float(k.real), float(k.imag),
                        float(r.real), float(r.imag)]
                       for k, r in zip(ray.k, ray.r)]
            tail = None
            if ray.tail is not None:
                tail = [float(ray.tail[0].real), float(ray.tail[0].imag),
                        float(ray.tail[1].real), float(ray.tail[1].imag)]
            origin = None
            if ray.origin is not None:
                origin = [float(ray.origin.real), float(ray.origin.imag)]
            doc["rays"].append({
                "j": int(ray.j), "angle_deg": float(ray.angle_deg),
                "samples": samples, "tail": tail,
                "tail_powers": [int(p) for p in ray.tail_powers],
                "origin": origin,
            })
        try:
            return json.dumps(doc, sort_keys=True, indent=1,
                              allow_nan=False)
        except ValueError as exc:
            raise SchemaError(f"non-finite value in dataset: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_json(cls, text):
        def _reject_nan(token):
            raise SchemaError(f"non-finite literal {token!r} in dataset")

        try:
            doc = json.loads(text, parse_constant=_reject_nan)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"dataset is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or doc.get("schema") != "bqhl/1":
            raise SchemaError("missing or unsupported dataset schema tag")
        for key in ("T", "rays"):
            if key not in doc:
                raise SchemaError(f"dataset lacks required key {key!r}")
        rays = {}
        for entry in doc["rays"]:
            try:
                j = int(entry["j"])
                angle = float(entry["angle_deg"])
                samples = np.asarray(entry["samples"], dtype=float)
                if samples.ndim != 2 or samples.shape[1] != 4:
                    raise SchemaError(
                        f"ray {j}: samples must be rows of "
                        "[k_re, k_im, r_re, r_im]")
                tail = entry.get("tail")
                origin = entry.get("origin")
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"malformed ray entry: {exc}") from exc
            if j not in (1, 2, 3, 4) or j in rays:
                raise SchemaError(f"invalid or duplicate ray id {j}")
            k = samples[:, 0] + 1j * samples[:, 1]
            r = samples[:, 2] + 1j * samples[:, 3]
            tail_arr = None
            if tail is not None:
                if len(tail) != 4:
                    raise SchemaError(f"ray {j}: tail must have 4 numbers")
                tail_arr = np.array([tail[0] + 1j * tail[1],
                                     tail[2] + 1j * tail[3]])
            origin_val = None
            if origin is not None:
                if len(origin) != 2:
                    raise SchemaError(f"ray {j}: origin must have 2 numbers")
                origin_val = complex(origin[0], origin[1])
            powers = tuple(entry.get("tail_powers",
                                     (2, 3) if j == 4 else (1, 2)))
            rays[j] = RaySamples(j=j, angle_deg=angle, k=k, r=r,
                                 err=np.zeros(len(k)), tail=tail_arr,
                                 tail_powers=powers, origin=origin_val)
        if sorted(rays) != [1, 2, 3, 4]:
            raise SchemaError("dataset must contain exactly rays 1..4")
        return cls(rays=rays, T=float(doc["T"]),
                   kmax=float(doc.get("kmax", 0.0)),
                   assumptions=doc.get("assumptions", {}))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def build_dataset(init, bdry, settings=None, kmax=9.0, nodes_per_ray=64,
                  budget_tol=1e-6, r_min=0.05, scan=True, evaluator=None):
    """Sample all four coefficients, fit tails, extrapolate origins.

    Nodes whose propagated cancellation estimate exceeds budget_tol are
    dropped; a ray is cut at the first two consecutive over-budget nodes
    (r1's wall column makes this a hard ceiling near
    sqrt(2 ln(budget_tol / (rtol u_wall)) / (3T)) regardless of kmax).
    """
    ev = evaluator or SpectralFunctionEvaluator(init, bdry, settings)
    mags = ray_nodes(kmax, nodes_per_ray, r_min)
    rays = {}
    for j in (1, 2, 3, 4):
        theta = np.deg2rad(RAY_ANGLE_DEG[j])
        ks = mags * np.exp(1j * theta)
        vals, errs = ev.reflection_batch(j, ks)
        good = errs <= budget_tol
        cut = len(ks)
        for m in range(len(ks) - 1):
            if not good[m] and not good[m + 1]:
                cut = m
                break
        keep = np.flatnonzero(good[:cut])
        if keep.size < 12:
            raise NumericalError(
                f"cancellation budget {budget_tol:g} leaves only "
                f"{keep.size} usable nodes on the r{j} ray; "
                "lower kmax or loosen the budget")
        rays[j] = RaySamples(j=j, angle_deg=RAY_ANGLE_DEG[j], k=ks[keep],
                             r=vals[keep], err=errs[keep])
    assumptions = {}
    if scan:
        assumptions = assumption_scan(init, bdry, settings, kmax=kmax,
                                      r_min=r_min, evaluator=ev).to_dict()
    ds = SpectralDataSet(rays=rays, T=bdry.T, kmax=float(kmax),
                         assumptions=assumptions)
    fit_tails(ds)
    for j, ray in ds.rays.items():
        ray.origin = _extrapolate_origin(ray)
    return ds


def _extrapolate_origin(ray, n_fit=8, degree=2):
    m = ray.magnitudes()
    n = min(n_fit, len(m))
    p = np.polyfit(m[:n], ray.r[:n], min(degree, n - 1))
    return complex(p[-1])


def fit_tails(ds: SpectralDataSet, rel_tol=1e-2, mag_floor=1e-6):
    """Least-squares inverse-power tails on the outer half of each ray.

    Basis is {k^-1, k^-2} (r4: {k^-2, k^-3}).  The report carries the
    window-relative residual, the leave-one-out ratio, and the
    coefficient of an added k^0 column; `ok` records whether the
    residual met rel_tol.  Rays whose window signal sits at the solver
    noise floor get a zero tail rather than a fit of noise.  The k^0
    probe fit also carries the two leading wall-oscillation columns,
    otherwise the non-decaying oscillatory part of the samples lands in
    the constant and masks the decay it is supposed to confirm.

    Two more zero-tail outcomes, both flagged in the report: a window
    whose log-log slope is far steeper than the basis powers decays
    super-algebraically, so an inverse-power fit through it manufactures
    a tail orders of magnitude above the actual beyond-cut values; and a
    fitted tail whose own size at the cut is below mag_floor contributes
    under the downstream collocation tolerance and only inflates contour
    meshes if kept.
    """
    for j, ray in ds.rays.items():
        powers = (2, 3) if j == 4 else (1, 2)
        m = ray.magnitudes()
        cap = m.max()
        wsel = np.flatnonzero(m >= cap / 2 * (1 - 1e-12))
        if wsel.size < 6:
            wsel = np.argsort(m)[-min(6, len(m)):]
        kw, rw, ew = ray.k[wsel], ray.r[wsel], ray.err[wsel]
        signal = float(np.linalg.norm(rw))
        noise = float(np.linalg.norm(ew))
        ray.tail_powers = powers
        if signal <= max(3.0 * noise, 1e-13):
            ray.tail = np.zeros(2, dtype=complex)
            ray.tail_report = {"window": int(wsel.size), "rel_residual": 0.0,
                               "loo_ratio": 0.0, "const_coeff": 0.0,
                               "below_noise": True, "ok": True}
            continue
        mw = np.abs(kw)
        live = np.abs(rw) > max(3.0 * noise / np.sqrt(len(rw)), 1e-14)
        if live.sum() >= 3:
            p_eff = -np.polyfit(np.log(mw[live]),
                                np.log(np.abs(rw[live])), 1)[0]
        else:
            p_eff = float("inf")
        if p_eff >= powers[0] + 2.5:
            ray.tail = np.zeros(2, dtype=complex)
            ray.tail_report = {"window": int(wsel.size), "rel_residual": 0.0,
                               "loo_ratio": 0.0, "const_coeff": 0.0,
                               "below_noise": False, "superdecay": True,
                               "p_eff": float(p_eff), "ok": True}
            continue
        A = np.column_stack([kw ** (-float(p)) for p in powers])
        if np.linalg.cond(A) > 1e12:
            raise NumericalError(
                f"tail fit on the r{j} ray is ill-conditioned")
        c, *_ = np.linalg.lstsq(A, rw, rcond=None)
        res = A @ c - rw
        rel = float(np.linalg.norm(res) / signal)
        in_sample = float(np.linalg.norm(res) / np.sqrt(len(wsel)))
        loo_sq = 0.0
        for i in range(len(wsel)):
            mask = np.ones(len(wsel), dtype=bool)
            mask[i] = False
            ci, *_ = np.linalg.lstsq(A[mask], rw[mask], rcond=None)
            loo_sq += float(np.abs(A[i] @ ci - rw[i]) ** 2)
        loo = np.sqrt(loo_sq / len(wsel))
        osc = np.exp(1j * np.sqrt(3.0) * ds.T * np.abs(kw) ** 2)
        aug = np.column_stack([np.ones(len(kw)), A, osc / kw, osc / kw ** 2])
        c_aug, *_ = np.linalg.lstsq(aug, rw, rcond=None)
        tail_at_cut = sum(abs(c[i]) / cap ** powers[i] for i in (0, 1))
        if tail_at_cut <= mag_floor:
            ray.tail = np.zeros(2, dtype=complex)
            ray.tail_report = {"window": int(wsel.size),
                               "rel_residual": rel,
                               "loo_ratio": float(loo / max(in_sample, 1e-300)),
                               "const_coeff": float(np.abs(c_aug[0])),
                               "below_noise": False, "negligible": True,
                               "tail_at_cut": float(tail_at_cut), "ok": True}
            continue
        ray.tail = c
        ray.tail_report = {
            "window": int(wsel.size),
            "rel_residual": rel,
            "loo_ratio": float(loo / max(in_sample, 1e-300)),
            "const_coeff": float(np.abs(c_aug[0])),
            "below_noise": False,
            "ok": bool(rel <= rel_tol),
        }
    return ds


def _leading_coeff_fit(ray, T, lead_power):
    """Leading inverse-power coefficient of a ray with honest error bar.

    Fits three inverse powers plus the two leading wall-oscillation
    terms exp(i sqrt(3) T |k|^2) / |k|^p.  The oscillation does not
    decay relative to the power terms, so a plain power basis absorbs
    it into biased coefficients; with it in the basis the leading
    coefficient resolves to its true (typically zero) size.  Returns
    (coefficient of k^-lead_power, sigma) with sigma the standard
    error from the fit residual and the normal-matrix inverse.
    """
    m = ray.magnitudes()
    cap = m.max()
    wsel = np.flatnonzero(m >= cap / 2 * (1 - 1e-12))
    if wsel.size < 8:
        wsel = np.argsort(m)[-min(8, len(m)):]
    mw, rw = m[wsel], ray.r[wsel]
    osc = np.exp(1j * np.sqrt(3.0) * T * mw ** 2)
    cols = [mw ** (-float(lead_power + i)) for i in range(3)]
    cols += [osc * mw ** (-float(lead_power + i)) for i in (1, 2)]
    A = np.column_stack(cols)
    if np.linalg.cond(A) > 1e10:
        A = A[:, :3]
    c, *_ = np.linalg.lstsq(A, rw, rcond=None)
    res = A @ c - rw
    dof = max(len(wsel) - A.shape[1], 1)
    cov = np.linalg.inv(A.conj().T @ A)
    sigma = float(np.sqrt(np.linalg.norm(res) ** 2 / dof * np.real(cov[0, 0])))
    phase = ray.k[wsel][-1] / mw[-1]
    return complex(c[0] * phase ** lead_power), sigma


def tail_identity(ds: SpectralDataSet, floor=1e-4):
    """Defect of r4^(2) = (conj(r1^(1)) - omega^2 r3^(1)) r3^(1).

    All three first coefficients vanish identically for this problem
    (the first-order expansion matrices are diagonal), so the identity
    is typically 0 = 0 at fit-noise level; the scale floor and the
    propagated fit uncertainty keep the relative defect meaningful in
    that regime instead of rationing noise against noise.
    """
    c1_r1, s1 = _leading_coeff_fit(ds.ray(1), ds.T, 1)
    c1_r3, s3 = _leading_coeff_fit(ds.ray(3), ds.T, 1)
    lhs, s4 = _leading_coeff_fit(ds.ray(4), ds.T, 2)
    rhs = (np.conj(c1_r1) - OMEGA ** 2 * c1_r3) * c1_r3
    var_rhs = (abs(c1_r3) * s1) ** 2 \
        + (abs(np.conj(c1_r1) - 2 * OMEGA ** 2 * c1_r3) * s3) ** 2
    sigma = float(np.sqrt(var_rhs + s4 ** 2))
    scale = max(abs(lhs), abs(rhs), 3.0 * sigma, floor)
    return {"lhs": complex(lhs), "rhs": complex(rhs),
            "defect_rel": float(abs(lhs - rhs) / scale),
            "sigma": sigma, "floor": float(floor),
            "c1_r1": complex(c1_r1), "c1_r3": complex(c1_r3)}


@dataclass
class OriginReport:
    """Extrapolated k -> 0 behavior of the four coefficients."""

    r1_origin: complex
    r1_err: float
    r2_origin: complex
    r2_err: float
    r3_origin: complex
    r3_slope: complex
    r3_curvature: complex
    r3_exponent: float
    r4_origin: complex
    r4_slope: complex
    r4_exponent: float
    r4_linear_ratio: tuple
    notes: list


def origin_limits(ds: SpectralDataSet, n_fit=8):
    """Richardson-style polynomial extrapolation at the origin ends.

    Requires the admissibility scan (when present in the dataset) to
    have passed; enforces the degenerate pattern r3(0) = r3'(0) =
    r4(0) = 0 with r3''(0) and r4'(0) away from zero.  Zero checks are
    scaled by the extrapolation's own uncertainty (the shift between
    quadratic and cubic fits): for weak data the coefficient asymptotics
    only dominate below the smallest sampled node, and pretending the
    extrapolation resolves better than its truncation error would turn
    honest uncertainty into spurious failures.  `origin_refined` gives
    the sharp version on dedicated small nodes.
    """
    if ds.assumptions and ds.assumptions.get("passed") is False:
        raise AssumptionError(
            "origin extrapolation is meaningless for a dataset whose "
            "small-k admissibility scan failed")
    notes = []

    def _fits(ray):
        m = ray.magnitudes()[:n_fit]
        r = ray.r[:n_fit]
        return np.polyfit(m, r, 2), np.polyfit(m, r, 3)

    def _exponent(ray, count=6):
        m = ray.magnitudes()
        r = np.abs(ray.r)
        ok = r > 1e-13
        if ok[:count].sum() < 3:
            return float("nan")
        mm, rr = m[:count][ok[:count]], r[:count][ok[:count]]
        return float(np.polyfit(np.log(mm), np.log(rr), 1)[0])

    p2, p3 = _fits(ds.ray(1))
    r1_0, e1 = complex(p2[-1]), float(abs(p2[-1] - p3[-1]))
    p2, p3 = _fits(ds.ray(2))
    r2_0, e2 = complex(p2[-1]), float(abs(p2[-1] - p3[-1]))

    ray3 = ds.ray(3)
    theta = np.deg2rad(ray3.angle_deg)
    p2, p3 = _fits(ray3)
    r3_0 = complex(p2[-1])
    e3_0 = float(abs(p2[-1] - p3[-1]))
    r3_slope = complex(p2[-2] * np.exp(-1j * theta))
    e3_s = float(abs(p2[-2] - p3[-2]))
    r3_curv = complex(2.0 * p2[-3] * np.exp(-2j * theta))
    p3_exp = _exponent(ray3)

    ray4 = ds.ray(4)
    p2, p3 = _fits(ray4)
    r4_0 = complex(p2[-1])
    e4_0 = float(abs(p2[-1] - p3[-1]))
    r4_slope = complex(p2[-2] * np.exp(-1j * theta))
    p4_exp = _exponent(ray4)
    lin = np.abs(ray4.r[:5]) / ray4.magnitudes()[:5]
    lin_ratio = (float(lin.min()), float(lin.max()))

    # the vanishing checks are only evidence against the data when the
    # window already shows the asymptotic slope; below onset (weak
    # fields) the polynomial extrapolation is systematically off by
    # more than its quadratic-vs-cubic spread, so note and move on
    r3_asym = np.isfinite(p3_exp) and p3_exp > 1.0
    r4_asym = np.isfinite(p4_exp) and p4_exp > 0.5
    for name, val, err, asym in (("r3(0)", abs(r3_0), e3_0, r3_asym),
                                 ("r3'(0)", abs(r3_slope), e3_s, r3_asym),
                                 ("r4(0)", abs(r4_0), e4_0, r4_asym)):
        if val > max(1e-2, 5.0 * err):
            if asym:
                raise NumericalError(
                    f"origin extrapolation inconsistent: |{name}| = "
                    f"{val:.3e} (uncertainty {err:.1e}) should vanish "
                    "for this data class")
            notes.append(f"{name} extrapolates to {val:.2e} but the "
                         "window is above the small-k onset; use the "
                         "refined origin helper")
        elif val > 1e-2:
            notes.append(f"{name} unresolved at this node spacing: "
                         f"|value| {val:.2e} within uncertainty {err:.1e}")
    for name, val in (("r3''(0)", abs(r3_curv)), ("r4'(0)", abs(r4_slope))):
        if val < 1e-6:
            raise AssumptionError(
                f"{name} = {val:.3e} is below the genericity threshold; "
                "the origin pattern degenerates for this data")
    if lin_ratio[0] < 1e-3:
        raise AssumptionError(
            f"|r4(k)|/|k| drops to {lin_ratio[0]:.3e} on the smallest "
            "nodes; the linear vanishing degenerates for this data")
    return OriginReport(r1_origin=r1_0, r1_err=e1, r2_origin=r2_0, r2_err=e2,
                        r3_origin=r3_0, r3_slope=r3_slope,
                        r3_curvature=r3_curv, r3_exponent=p3_exp,
                        r4_origin=r4_0, r4_slope=r4_slope,
                        r4_exponent=p4_exp, r4_linear_ratio=lin_ratio,
                        notes=notes)


_REFINED_MAGS = {
    1: (0.004, 0.02, 6),
    2: (0.001, 0.005, 6),
    3: (0.002, 0.01, 5),
    4: (0.0008, 0.004, 5),
}


def origin_refined(evaluator: SpectralFunctionEvaluator, j, mags=None):
    """Sharp origin behavior of r_j from dedicated small-|k| solves.

    The coefficient asymptotics of the quotients kick in only once the
    double-pole parts dominate, which for weak fields happens well below
    a typical dataset's smallest node, so this helper re-evaluates on a
    per-coefficient magnitude window chosen inside that regime (r4's
    onset sits lowest: its denominator combination loses its k^-4 part
    to a rank-1 cancellation and the surviving k^-3 coefficient carries
    an O(k) correction with a large coefficient ratio).

    Returns {"value", "err", "exponent"}: a Richardson constant with a
    quadratic-vs-cubic uncertainty and a log-log slope over the window.
    """
    if mags is None:
        lo, hi, n = _REFINED_MAGS[j]
        mags = np.geomspace(lo, hi, n)
    mags = np.asarray(mags, dtype=float)
    ks = mags * np.exp(1j * np.deg2rad(RAY_ANGLE_DEG[j]))
    r, _ = evaluator.reflection_batch(j, ks)
    deg = min(2, len(mags) - 1)
    p2 = np.polyfit(mags, r, deg)
    p3 = np.polyfit(mags, r, min(3, len(mags) - 1))
    nz = np.abs(r) > 1e-13
    if nz.sum() >= 3:
        expo = float(np.polyfit(np.log(mags[nz]), np.log(np.abs(r[nz])),
                                1)[0])
    else:
        expo = float("nan")
    return {"value": complex(p2[-1]), "err": float(abs(p2[-1] - p3[-1])),
            "exponent": expo}


def unitarity_defect(k, init=None, bdry=None, settings=None, evaluator=None):
    """Both sides of the modulus identity for r1 (k > 0) or r2 (k < 0).

    Returns (1 - |r_j|^2, independent bilinear right-hand side); the two
    agree to solver accuracy for admissible data.
    """
    k = float(k)
    if k == 0:
        raise SingularPointError("the unitarity identities exclude k = 0")
    ev = evaluator or SpectralFunctionEvaluator(init, bdry, settings)
    ks = np.array([complex(k)])
    if k > 0:
        r1, _ = ev.reflection(1, k)
        lhs = 1.0 - abs(r1) ** 2
        S3, _ = ev.columns("S", 3, ks)
        a3, _ = ev.columns("sA", 3, ks)
        dot = np.sum(S3[:, 0] * a3[:, 0])
        sl, _ = ev.sL11(ks)
        rhs = (dot / (sl[0] * np.conj(sl[0]))).real
    else:
        r2, _ = ev.reflection(2, k)
        lhs = 1.0 - abs(r2) ** 2
        A3, _ = ev.columns("SA", 3, ks)
        a1, _ = ev.columns("sA", 1, ks)
        den = a1[0, 0] * A3[2, 0] - a1[2, 0] * A3[0, 0]
        slw, _ = ev.sL11(np.array([OMEGA ** 2 * complex(k)]))
        rhs = (A3[2, 0] * slw[0] / (den * np.conj(den))).real
    return float(lhs), float(rhs)


@dataclass
class AssumptionReport:
    """Admissibility scan: modulus minima, winding, and small-k limits."""

    minima: dict
    winding: int
    limits: dict
    pattern_defect: float
    threshold: float
    passed: bool
    reasons: list
    scan_radius: float = 0.0
    zeros: list = field(default_factory=list)

    def to_dict(self):
        doc = {"threshold": self.threshold, "winding": int(self.winding),
               "pattern_defect": float(self.pattern_defect),
               "passed": bool(self.passed), "reasons": list(self.reasons),
               "scan_radius": float(self.scan_radius),
               "zeros": [[float(np.real(z)), float(np.imag(z))]
                         for z in self.zeros],
               "minima": {}, "limits": {}}
        for name, (val, kloc) in self.minima.items():
            doc["minima"][name] = [float(val), float(np.real(kloc)),
                                   float(np.imag(kloc))]
        for name, (val, err) in self.limits.items():
            doc["limits"][name] = [float(np.real(val)), float(np.imag(val)),
                                   float(err)]
        return doc


def scan_minima_from_values(named_values, threshold):
    """Detector half of the scan: locate modulus minima and flag zeros.

    named_values maps a label to (complex values, matching k nodes).
    Factored out so negative controls can feed synthetic fields with a
    planted zero and confirm detection and location.
    """
    minima = {}
    reasons = []
    for name, (vals, ks) in named_values.items():
        mod = np.abs(np.asarray(vals))
        i = int(np.argmin(mod))
        kmin = np.asarray(ks).ravel()[i]
        minima[name] = (float(mod.ravel()[i]), complex(kmin))
        if mod.ravel()[i] <= threshold:
            reasons.append(
                f"{name} has modulus {mod.ravel()[i]:.3e} <= {threshold:g} "
                f"at k = {kmin:.6g} (located zero)")
    return minima, reasons


def _winding_count(ev, kmax, r_min, n_edge=48, n_arc=32, max_rounds=18):
    """Winding of sL11 around the boundary of the first two sectors.

    Neighboring loop nodes are bisected until every phase step is below
    pi/2.  A fixed-grid unwrap is not safe here: the entries oscillate
    on a wavenumber scale set by the support radius of the data, and an
    undersampled unwrap can alias whole turns away (or invent them)
    while agreeing with itself across refinements.
    """
    radii = np.geomspace(r_min, kmax, n_edge)
    angles = np.linspace(0.0, np.pi / 3.0, n_arc)
    loop = np.concatenate([
        radii.astype(complex),
        kmax * np.exp(1j * angles[1:]),
        (radii * np.exp(1j * np.pi / 3.0))[::-1][1:],
        (r_min * np.exp(1j * angles))[::-1][1:-1],
    ])
    vals, errs = ev.sL11(loop)
    for _ in range(max_rounds):
        mod = np.abs(vals)
        if float(np.min(mod - 5.0 * errs)) <= 0.0:
            i = int(np.argmin(mod - 5.0 * errs))
            raise NumericalError(
                f"sL[1,1] on the scan boundary is indistinguishable "
                f"from zero at working precision (|val| = {mod[i]:.2e}, "
                f"err = {errs[i]:.2e} at k = {loop[i]:.4g}); shrink the "
                f"loop radius")
        dphi = np.angle(np.roll(vals, -1) / vals)
        bad = np.flatnonzero(np.abs(dphi) > np.pi / 2.0)
        if bad.size == 0:
            total = float(np.sum(dphi) / (2.0 * np.pi))
            w = int(np.round(total))
            if abs(total - w) > 0.05:
                raise NumericalError(
                    f"winding count of sL[1,1] is not close to an "
                    f"integer ({total:.3f})")
            return w
        mids = 0.5 * (loop[bad] + np.roll(loop, -1)[bad])
        mv, me = ev.sL11(mids)
        loop = np.insert(loop, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mv)
        errs = np.insert(errs, bad + 1, me)
    raise NumericalError(
        "winding count of sL[1,1] did not resolve: phase steps stayed "
        "above pi/2 after repeated bisection")


def _reliable_radius(ev, kmax, r_floor=1.0, ratio_tol=0.05):
    """Largest radius where interior sL11 values still beat their noise.

    Off the rays the spectral entries grow exponentially in T |k|^2
    while their O(1) combination stays bounded, so past some radius the
    cancellation noise swamps the value and zero counting becomes
    meaningless.  Walk the radius down from kmax until the worst
    noise-to-value ratio on a test arc is small and the values sit near
    the large-k limit 1.
    """
    r = float(kmax)
    angs = np.deg2rad(np.linspace(4.0, 56.0, 12))
    while r >= r_floor:
        ks = r * np.exp(1j * angs)
        vals, errs = ev.sL11(ks)
        mod = np.abs(vals)
        if float(np.max(errs / np.maximum(mod, 1e-300))) <= ratio_tol \
                and float(np.max(np.abs(vals - 1.0))) <= 0.5:
            return r
        r *= 0.8
    raise NumericalError(
        f"no radius in [{r_floor:g}, {kmax:g}] gives a reliable "
        "interior evaluation of sL[1,1]; the wall response is too "
        "strong for a zero scan at this precision")


def _locate_zero(ev, k_start, kmax, tol=1e-10, max_iter=24):
    """Newton refinement of a zero of sL11 from a coarse grid minimum.

    Iterates are confined to a padded copy of the scanned sector pair;
    a Newton step taken from a shallow grid minimum (no actual zero
    nearby) can otherwise shoot far outside the region where the
    spectral functions are even computable.  Returns the best point
    seen and its modulus; the caller decides whether that qualifies as
    a located zero.
    """
    k = complex(k_start)
    best_k, best_f = k, np.inf
    for _ in range(max_iter):
        ang = np.rad2deg(np.angle(k))
        if not (1e-4 <= abs(k) <= 1.2 * kmax and -15.0 <= ang <= 75.0):
            break
        h = 1e-5 * max(abs(k), 1e-2)
        vals, _ = ev.sL11(np.array([k, k + h, k + 1j * h]))
        f = abs(vals[0])
        if f < best_f:
            best_k, best_f = k, f
        if f < tol:
            return k, f
        fp = ((vals[1] - vals[0]) + (vals[2] - vals[0]) / 1j) / (2 * h)
        if fp == 0:
            break
        k = k - vals[0] / fp
    return best_k, float(best_f)


def _small_k_limits(ev, r_lo=0.05, r_hi=0.12, n=6, direction_deg=45.0):
    """The eight k -> 0 limits via cubic fits along one interior ray.

    Quantities with a double pole are premultiplied by k^2 (k^3 for the
    second-sector combination) so the fit constant is the limit; the
    linear fit coefficients give the two subtracted first-order limits.
    Error bars are the shift of the constant between cubic and quadratic
    fits.
    """
    phi = np.deg2rad(direction_deg)
    rr = np.geomspace(r_lo, r_hi, n)
    ks = rr * np.exp(1j * phi)

    s3, _ = ev.columns("s", 3, ks, allow_growth=True)
    a3, _ = ev.columns("sA", 3, ks)
    S3, _ = ev.columns("S", 3, ks)
    A3, _ = ev.columns("SA", 3, ks)
    A2, _ = ev.columns("SA", 2, ks)
    A1, _ = ev.columns("SA", 1, ks)
    sl, _ = ev.sL11(ks)

    def _fit(scaled):
        p3 = np.polyfit(rr, scaled, 3)
        p2 = np.polyfit(rr, scaled, 2)
        err = float(abs(p3[-1] - p2[-1]))
        return p3, err

    limits = {}
    p, e = _fit(ks ** 2 * s3[2])
    limits["k2_s33"] = (complex(p[-1]), e)
    p, e = _fit(ks ** 2 * a3[2])
    limits["k2_sA33"] = (complex(p[-1]), e)
    p, e = _fit(ks ** 2 * S3[2])
    limits["k2_S33"] = (complex(p[-1]), e)
    p33, e33 = _fit(ks ** 2 * A3[2])
    limits["k2_SA33"] = (complex(p33[-1]), e33)
    limits["k_SA33_sub"] = (complex(p33[-2] * np.exp(-1j * phi)), e33)
    p32, e32 = _fit(ks ** 2 * A2[2])
    limits["k_SA32_sub"] = (complex(p32[-2] * np.exp(-1j * phi)), e32)
    pattern_defect = float(abs(p32[-1] - p33[-1]))
    p, e = _fit(ks ** 2 * sl)
    limits["k2_sL11"] = (complex(p[-1]), e)
    combo = a3[2] * A1[0] - a3[0] * A1[2]
    p, e = _fit(ks ** 3 * combo)
    limits["k3_combo2"] = (complex(p[-1]), e)
    return limits, pattern_defect


def assumption_scan(init=None, bdry=None, settings=None, kmax=9.0,
                    n_radii=10, angles_per_sector=16, r_min=0.05,
                    threshold=1e-6, evaluator=None):
    """Generic-data admissibility scan over the first two sectors.

    Checks, in order: modulus minima of the three reflection
    denominators on a polar grid, sign constancy of the two real-axis
    factors that control the reflection modulus bounds, the argument
    winding of sL11 around the sector-pair boundary (zero count), and
    the eight small-k limits.  The polar grid and the winding loop stop
    at an adaptive radius where interior values still beat their
    cancellation noise; beyond it sL11 is within 0.5 of its limit 1, so
    no zeros hide outside the loop.
    """
    ev = evaluator or SpectralFunctionEvaluator(init, bdry, settings)
    r_out = _reliable_radius(ev, kmax)
    a1 = np.linspace(0.0, 30.0, angles_per_sector)
    a2 = np.linspace(30.0, 60.0, angles_per_sector)
    angles = np.unique(np.concatenate([a1, a2]))
    radii = np.geomspace(r_min, r_out, n_radii)
    K = radii[:, None] * np.exp(1j * np.deg2rad(angles))[None, :]
    ks = K.ravel()

    sl, _ = ev.sL11(ks)
    a3, _ = ev.columns("sA", 3, ks)
    A1v, _ = ev.columns("SA", 1, ks)
    sl = sl.reshape(K.shape)
    sA33 = a3[2].reshape(K.shape)
    combo = (a3[2] * A1v[0] - a3[0] * A1v[2]).reshape(K.shape)

    in_d1 = angles <= 30.0 + 1e-9
    in_d2 = angles >= 30.0 - 1e-9
    named = {
        "sL11_D12": (sl, K),
        "sA33_D1": (sA33[:, in_d1], K[:, in_d1]),
        "combo2_D2": (combo[:, in_d2], K[:, in_d2]),
    }
    minima, reasons = scan_minima_from_values(named, threshold)

    # The two reflection-modulus bounds rest on real-axis positivity:
    # (S^T sA)[3,3] on the 0-degree ray controls 1 - |r1|^2 and SA[3,3]
    # on the 180-degree ray controls 1 - |r2|^2.  Both are real there
    # and tend to 1 at infinity, so a sign change (they carry a k^-2
    # pole at the origin) is the failure mode, not a small modulus.
    # The first factor is computed as the upper 2x2 determinant of sL,
    # whose entries stay bounded on the positive axis; the literal
    # column product is exponentially cancellative there.
    kr = np.geomspace(r_min, kmax, 48)
    krc = kr.astype(complex)
    sA1r, eA1 = ev.columns("SA", 1, krc, allow_growth=True)
    sA2r, eA2 = ev.columns("SA", 2, krc, allow_growth=True)
    s1r, e1 = ev.columns("s", 1, krc, allow_growth=True)
    s2r, e2 = ev.columns("s", 2, krc, allow_growth=True)
    sl11, u11 = _dot_columns(sA1r, s1r, eA1, e1)
    sl12, u12 = _dot_columns(sA1r, s2r, eA1, e2)
    sl21, u21 = _dot_columns(sA2r, s1r, eA2, e1)
    sl22, u22 = _dot_columns(sA2r, s2r, eA2, e2)
    uni = np.real(sl11 * sl22 - sl12 * sl21)
    uni_err = (np.abs(sl11) * u22 + np.abs(sl22) * u11
               + np.abs(sl12) * u21 + np.abs(sl21) * u12)
    A3r, eA3 = ev.columns("SA", 3, (-kr).astype(complex), allow_growth=True)
    sa33_neg = np.real(A3r[2])
    for name, grid, vals, verr, what in (
            ("uni33_ray1", kr, uni, uni_err, "|r1| crosses 1 nearby"),
            ("SA33_ray7", -kr, sa33_neg, eA3, "|r2| crosses 1 nearby")):
        # sign testing is restricted to nodes whose value beats its own
        # propagated noise; past the cancellation radius the sign of a
        # noise sample means nothing
        good = np.abs(vals) > 5.0 * verr
        if not good.any():
            raise NumericalError(
                f"{name} is noise-dominated on every sampled node")
        gv, gk = vals[good], grid[good]
        i = int(np.argmin(np.abs(gv)))
        minima[name] = (float(abs(gv[i])), complex(gk[i]))
        flips = np.flatnonzero(np.sign(gv[:-1]) * np.sign(gv[1:]) < 0)
        if flips.size:
            j = int(flips[0])
            reasons.append(
                f"{name} changes sign between k = {gk[j]:.6g} and "
                f"k = {gk[j + 1]:.6g}: {what}")

    winding = _winding_count(ev, r_out, r_min)
    zeros = []
    if winding != 0:
        k0, f0 = _locate_zero(ev, minima["sL11_D12"][1], r_out)
        if f0 <= 1e-8:
            zeros.append(complex(k0))
            reasons.append(
                f"sL[1,1] winds {winding} time(s) around the sector-pair "
                f"boundary: discrete spectrum present (zero located at "
                f"k = {k0:.6g}, |sL11| = {f0:.1e})")
        else:
            reasons.append(
                f"sL[1,1] winds {winding} time(s) around the sector-pair "
                f"boundary but Newton found no zero (best |sL11| = "
                f"{f0:.1e} at k = {k0:.6g}); treat as inadmissible")
    limits, pattern_defect = _small_k_limits(ev)
    for name, (val, err) in limits.items():
        if abs(val) <= threshold:
            reasons.append(
                f"limit {name} has modulus {abs(val):.3e} <= {threshold:g} "
                "(non-generic data)")
    passed = not reasons
    return AssumptionReport(minima=minima, winding=winding, limits=limits,
                            pattern_defect=pattern_defect,
                            threshold=threshold, passed=passed,
                            reasons=reasons, scan_radius=r_out, zeros=zeros)


def expansion_tail_coefficients(init: InitialProfile, bdry: BoundaryProfile):
    """Formal inverse-power tail coefficients from the corner value.

    First-order coefficients vanish identically (the order-1/k expansion
    matrices are diagonal).  The order-1/k^2 coefficients are corner
    local: with base = 2 / (3 (1 - omega)) and u00 = u(0, 0),
    r2 -> omega * base * u00 and r3 -> base * u00, while for r1 the
    initial-line and wall contributions share the same corner value and
    cancel, and r4's pinned basis starts one order below its decay.
    Wall oscillation amplitudes (the part a power basis cannot carry)
    are reported alongside.
    """
    base = 2.0 / (3.0 * (1.0 - OMEGA))
    u00 = float(init.values(0.0)[0])
    u0T = float(bdry.values(bdry.T)[0])
    osc = abs(base) * abs(u0T)
    return {
        1: {"power": (0.0, 0.0), "osc_amplitude": osc},
        2: {"power": (0.0, complex(OMEGA * base * u00)), "osc_amplitude": 0.0},
        3: {"power": (0.0, complex(base * u00)), "osc_amplitude": osc},
        4: {"power": (0.0, 0.0), "osc_amplitude": 0.0},
    }


def adjoint_wall_tail_model(bdry: BoundaryProfile, ks):
    """Two-term closed form for k^2 * SA_31 on the 30-degree ray.

    The constant part comes from the t = 0 endpoint (corner value), the
    oscillation from the t = T endpoint of the wall integral:
    base * (u(0,0) - u(0,T) exp(i sqrt(3) T |k|^2)) + O(1/k).
    """
    ks = np.asarray(ks, dtype=complex)
    base = 2.0 / (3.0 * (1.0 - OMEGA))
    u00 = float(bdry.values(0.0)[0])
    u0T = float(bdry.values(bdry.T)[0])
    phase = np.exp(1j * np.sqrt(3.0) * bdry.T * np.abs(ks) ** 2)
    return base * (u00 - u0T * phase)
