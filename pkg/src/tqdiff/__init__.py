"""Diffusion of a quantum Brownian particle in a classical heat bath.

Closed forms, dispersion ODEs, a nonlinear quantum Smoluchowski PDE solver and
Bohm-Langevin ensembles, all in reduced units by default (m = b = hbar = k_B = 1).
"""

__version__ = "0.1.0"

from .errors import DomainError, NumericError, ParameterError, TqdiffError
from .phys import INFINITE, BathParams, DerivedConstants, OscillatorParams, derive

__all__ = [
    "__version__",
    "BathParams",
    "DerivedConstants",
    "DomainError",
    "INFINITE",
    "NumericError",
    "OscillatorParams",
    "ParameterError",
    "TqdiffError",
    "derive",
]
