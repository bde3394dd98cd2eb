"""Numerical lab for the cone-based fractional p-Laplacian.

Submodules
----------
cone        aperture calibration, cap quadrature, rotations
measure     the singular measure, truncated-cone quadrature and sampling
fields      evaluable fields and smooth probes
operators   cone averages, A_eps, Abar_eps and the limit operators
expansion   expansion error budgets and verification tables
dpp         lattice fixed-point solver for the dynamic programming principle
game        tug-of-war with noise Monte-Carlo engine
barrier     the barrier family f_t and its checks
cli         command line front end
"""

from .cone import ConeSpec, make_cone, aperture_for_exponent, cap_moment_ratio, cap_measure
from .measure import FractionalKernel, make_kernel, normalizing_constant, truncated_cone_mass

__version__ = "0.1.0"

__all__ = [
    "ConeSpec",
    "make_cone",
    "aperture_for_exponent",
    "cap_moment_ratio",
    "cap_measure",
    "FractionalKernel",
    "make_kernel",
    "normalizing_constant",
    "truncated_cone_mass",
]
