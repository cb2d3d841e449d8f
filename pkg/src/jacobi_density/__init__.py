"""Spectral densities of unbounded Jacobi matrices.

Three independent routes compute the same density: the asymptotic formula
(critical or non-critical family), densities of stabilized matrices, and a
resolvent oracle.
"""
from .core import CoefficientFamily, Perturbation, coeffs, orthopoly
from .critical import rho_critical
from .noncritical import rho_noncritical
from .stabilized import free_density, resolvent_density, rho_stabilized

__all__ = [
    "CoefficientFamily",
    "Perturbation",
    "coeffs",
    "orthopoly",
    "rho_critical",
    "rho_noncritical",
    "rho_stabilized",
    "resolvent_density",
    "free_density",
]
__version__ = "0.1.0"
