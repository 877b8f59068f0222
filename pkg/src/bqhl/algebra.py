"""Exact algebra of the cubic spectral frame.

The half-line problem linearizes in a frame built from the primitive cube
root of unity.  This module collects the closed-form pieces of that frame:
the two symbol triples attached to a spectral point, phase exponents, the
frame matrix and its inverse, ray/sector classification of the spectral
plane, the boundedness wedges of the four eigenfunction families, and the
two discrete symmetries.  No field data or quadrature enters here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularPointError

OMEGA = np.exp(2j * np.pi / 3)

# Row covector that contracts the rank-one part of the x-direction
# coefficient matrix; annihilated by (1,1,1) columns since 1+w+w^2=0.
ROW_OMEGA = np.array([OMEGA, OMEGA**2, 1.0])

# Points within this angular distance (radians) of a multiple of pi/6
# snap to the ray in classify().
RAY_TOL = 1e-12

# Default entrywise tolerance for matrix comparisons.
MAT_TOL = 1e-10

# Cyclic rotation and transposition used by the two symmetries.
A_ROT = np.array([[0.0, 0.0, 1.0],
                  [1.0, 0.0, 0.0],
                  [0.0, 1.0, 0.0]])
B_SWAP = np.array([[0.0, 1.0, 0.0],
                   [1.0, 0.0, 0.0],
                   [0.0, 0.0, 1.0]])

# k-independent factor of the frame matrix.  P0 is symmetric and
# satisfies P0 @ conj(P0) = 3 I, so its inverse is conj(P0)/3.
P0 = np.array([[OMEGA, OMEGA**2, 1.0],
               [OMEGA**2, OMEGA, 1.0],
               [1.0, 1.0, 1.0]])
P0_INV = P0.conj() / 3.0


def lz_values(k):
    """Return the two symbol triples attached to a spectral point.

    Args:
      k: complex scalar or array of spectral points.

    Returns:
      Pair of arrays (l, z) with a trailing axis of length 3.  Slot m
      holds branch m+1: l = omega**(m+1) * k, z = omega**(2*(m+1)) * k**2.
      Branch 3 is the untwisted one (l = k, z = k**2).
    """
    k = np.asarray(k, dtype=complex)
    branch = np.arange(1, 4)
    l = OMEGA**branch * k[..., None]
    z = OMEGA**(2 * branch) * (k**2)[..., None]
    return l, z


def theta(i, j, x, t, k):
    """Phase exponent between branches i and j (1-based) at (x, t, k)."""
    l, z = lz_values(k)
    return (l[..., i - 1] - l[..., j - 1]) * x + (z[..., i - 1] - z[..., j - 1]) * t


def build_P(k):
    """Frame matrix whose columns are Vandermonde-type eigenvectors.

    Column j of P(k) is an eigenvector of the companion matrix
    [[0,1,0],[0,0,1],[k**3,0,0]] with eigenvalue l_j = omega**j * k.
    """
    k = complex(k)
    return np.array([[OMEGA, OMEGA**2, 1.0],
                     [OMEGA**2 * k, OMEGA * k, k],
                     [k**2, k**2, k**2]])


def invert_P(k):
    """Inverse frame matrix; the frame degenerates at k = 0."""
    k = complex(k)
    if k == 0:
        raise SingularPointError("frame matrix is singular at k = 0")
    return P0_INV @ np.diag([1.0, 1.0 / k, 1.0 / k**2])


def det_P(k):
    """Closed-form determinant of the frame matrix."""
    return -3.0 * np.sqrt(3.0) * 1j * np.asarray(k, dtype=complex) ** 3


@dataclass(frozen=True)
class SpectralLocation:
    """Position of a spectral point in the twelve-fold fan.

    kind is "ray" or "sector"; index runs 1..12.  Ray n points along
    exp(i*(n-1)*pi/6); sector n is the open wedge between rays n and n+1.
    """

    kind: str
    index: int


def classify(k, tol=RAY_TOL):
    """Locate a nonzero spectral point among the twelve rays and sectors.

    Raises:
      SingularPointError: at k = 0 where the fan degenerates.
    """
    k = complex(k)
    if k == 0:
        raise SingularPointError("cannot classify k = 0")
    ang = np.angle(k)
    step = np.pi / 6.0
    nearest = round(ang / step)
    if abs(ang - nearest * step) <= tol:
        return SpectralLocation("ray", (int(nearest) % 12) + 1)
    return SpectralLocation("sector", (int(np.floor(ang / step)) % 12) + 1)


def ray_direction(n):
    """Unit direction of ray n (1-based, counterclockwise from +Re axis)."""
    return np.exp(1j * (n - 1) * np.pi / 6.0)


# Closed angular wedges (degrees) where each eigenfunction column stays
# bounded as its integration variable runs to the far endpoint.  The four
# families are the x-direction solve, its adjoint, the t-direction solve,
# and its adjoint.  Derived from which branch realizes the extremal real
# part of the corresponding symbol triple.
MU3_COL_WEDGES = {1: ((0.0, 120.0),),
                  2: ((-120.0, 0.0),),
                  3: ((120.0, 240.0),)}
MU3A_COL_WEDGES = {1: ((180.0, 300.0),),
                   2: ((60.0, 180.0),),
                   3: ((-60.0, 60.0),)}
MU1_COL_WEDGES = {1: ((-60.0, 0.0), (120.0, 180.0)),
                  2: ((0.0, 60.0), (180.0, 240.0)),
                  3: ((60.0, 120.0), (240.0, 300.0))}
MU1A_COL_WEDGES = {1: ((30.0, 90.0), (210.0, 270.0)),
                   2: ((90.0, 150.0), (270.0, 330.0)),
                   3: ((-30.0, 30.0), (150.0, 210.0))}

FAMILY_WEDGES = {"mu3": MU3_COL_WEDGES,
                 "mu3_adj": MU3A_COL_WEDGES,
                 "mu1": MU1_COL_WEDGES,
                 "mu1_adj": MU1A_COL_WEDGES}


def in_wedges(k, wedges, tol_deg=1e-9):
    """True if arg(k) lies in one of the closed wedges, given in degrees."""
    a = np.degrees(np.angle(complex(k))) % 360.0
    for lo, hi in wedges:
        width = hi - lo
        d = (a - lo % 360.0) % 360.0
        if d <= width + tol_deg or d >= 360.0 - tol_deg:
            return True
    return False


def column_is_bounded(family, col, k):
    """Whether column col (1-based) of the given family is bounded at k.

    family is one of "mu3", "mu3_adj", "mu1", "mu1_adj".  The t-direction
    solves are entire in k; their wedges describe large-k decay only, so a
    False here is a growth warning for them, not a validity failure.
    """
    return in_wedges(k, FAMILY_WEDGES[family][col])


def symmetry_A(m):
    """Conjugate a 3x3 matrix (or stack) by the cyclic rotation."""
    return A_ROT @ np.asarray(m) @ A_ROT.T


def symmetry_B(m):
    """Conjugate the complex conjugate of a matrix (or stack) by the swap."""
    return B_SWAP @ np.conj(np.asarray(m)) @ B_SWAP


def matrices_close(a, b, tol=MAT_TOL):
    """Entrywise max-norm comparison with an absolute tolerance."""
    return bool(np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol)
