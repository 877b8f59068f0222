"""Direct and inverse scattering on the half-line for a Boussinesq-type system.

Subpackages are imported explicitly by consumers:

    algebra   exact spectral-frame algebra (roots of unity, wedges, symmetries)
    oracle    reference PDE solver on the full line (spectral + RK4)
    fields    initial/boundary profiles and the Lax coefficient matrices
    volterra  eigenfunction ODE/integral solver and spectral matrices
    reflect   reflection coefficients, tails, origin limits, datasets
    rh        vector Riemann-Hilbert solver and field reconstruction
    cli       command line front end
"""

__version__ = "0.1.0"
