"""Shared fixtures: the reference half-line problems used across the
direct, inverse, and acceptance suites.

Session scoped because each problem costs a whole-line oracle evolution
plus (for the dataset) a few hundred eigenfunction solves; the
evaluator's column cache is shared so later tests reuse earlier solves.
"""

import numpy as np
import pytest

from bqhl import oracle
from bqhl.fields import BoundaryProfile, InitialProfile
from bqhl.reflect import SpectralFunctionEvaluator, build_dataset


def half_line_problem(amplitude, center, slope, T):
    """Oracle-evolved quarter-plane data for a Gaussian line datum.

    Returns (init, bdry, field): the x = 0 restriction carries the wall
    traces up to order two, the t = 0 restriction the initial pair, and
    `field` keeps the whole-line history for reconstruction comparisons.
    """
    u0, v0 = oracle.gaussian_datum(amplitude=amplitude, center=center,
                                   slope=slope)
    fld = oracle.evolve_line(u0, v0, T=T)
    d = oracle.half_line_data(fld)
    init = InitialProfile(d["x"], d["u0"], d["v0"])
    bdry = BoundaryProfile(d["t"], d["u0t"], d["u1t"], d["u2t"], d["v0t"])
    return init, bdry, fld


@pytest.fixture(scope="session")
def problem_factory():
    return half_line_problem


@pytest.fixture(scope="session")
def theorem_problem():
    """Depression bump with an outgoing slope partner at T = 0.25.

    This datum passes every clause of the admissibility scan (no
    discrete spectrum, both real-axis positivity factors stay positive)
    while keeping the wall active enough to exercise the oscillatory
    tail machinery; the reflection-theorem tests all run on it.
    """
    init, bdry, _ = half_line_problem(-0.3, 2.0, +0.5, 0.25)
    return init, bdry


@pytest.fixture(scope="session")
def theorem_evaluator(theorem_problem):
    init, bdry = theorem_problem
    return SpectralFunctionEvaluator(init, bdry)


@pytest.fixture(scope="session")
def theorem_dataset(theorem_problem, theorem_evaluator):
    init, bdry = theorem_problem
    return build_dataset(init, bdry, evaluator=theorem_evaluator)


@pytest.fixture(scope="session")
def roundtrip_problem():
    """Far-centered quiet-wall depression datum at T = 1.

    The inverse-transform suite reconstructs this one; the far center
    keeps the wall nearly silent so all four rays carry clean decaying
    samples at the larger time.
    """
    return half_line_problem(-0.3, 6.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def zero_problem():
    x = np.linspace(0.0, 12.0, 241)
    t = np.linspace(0.0, 0.25, 101)
    zx = np.zeros_like(x)
    zt = np.zeros_like(t)
    return (InitialProfile(x, zx, zx),
            BoundaryProfile(t, zt, zt, zt, zt))
