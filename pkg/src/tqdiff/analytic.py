"""Closed-form dispersion laws, spectra and an exact Bloch-equation oracle.

Everything here is a pure function of its arguments.  The numerical solvers in
:mod:`tqdiff.moments`, :mod:`tqdiff.pde` and :mod:`tqdiff.langevin` are tested
against these results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError, NumericError
from .grid import Grid1D, PotentialSpec
from .phys import INFINITE, DerivedConstants, OscillatorParams


# --- free particle: Einstein law and the quantum-thermal front ------------------


def einstein_msd(t: float, D: float) -> float:
    return 2.0 * D * t


def _x_minus_log1p(x: float) -> float:
    """x - ln(1 + x) without cancellation for small x."""
    if x == 0.0:
        return 0.0
    if x < 0.1:
        # alternating series sum_{k>=2} (-1)^k x^k / k
        total, term, k = 0.0, x * x, 2
        while True:
            contrib = term / k
            total += contrib if k % 2 == 0 else -contrib
            if contrib <= 1e-17 * total:
                return total
            term *= x
            k += 1
    return x - math.log1p(x)


def front_lhs(sigma2: float, lambda_T: float) -> float:
    """sigma^2 - lambda_T^2 ln(1 + sigma^2/lambda_T^2)."""
    if sigma2 < 0:
        raise DomainError("sigma2 must be non-negative")
    if lambda_T == 0.0:
        return sigma2
    lam2 = lambda_T * lambda_T
    return lam2 * _x_minus_log1p(sigma2 / lam2)


@dataclass(frozen=True)
class FrontQuery:
    t: float
    constants: DerivedConstants

    def __post_init__(self):
        if not self.t >= 0:
            raise DomainError("front time must be non-negative")


def _solve_front_scaled(y: float, max_iter: int = 100) -> float:
    """Root x >= 0 of x - ln(1 + x) = y."""
    g = _x_minus_log1p
    # both seeds are lower bounds of the root; Newton on a convex increasing
    # function overshoots once and then decreases monotonically
    x = max(y, math.sqrt(2.0 * y))
    for _ in range(max_iter):
        step = (g(x) - y) * (1.0 + x) / x
        x_new = x - step
        if x_new <= 0:
            break
        if abs(step) <= 4e-16 * x_new:
            x = x_new
            if abs(g(x) - y) <= 1e-13 * y:
                return x
            break
        x = x_new

    # bisection fallback on an expanding bracket
    lo, hi = 0.0, max(y, math.sqrt(2.0 * y), 1e-300)
    while g(hi) < y:
        lo, hi = hi, 2.0 * hi
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            return mid
        if g(mid) < y:
            lo = mid
        else:
            hi = mid
    raise NumericError(f"front inversion did not converge for y={y!r}")


def front_sigma2(q: FrontQuery) -> float:
    """Dispersion sigma^2(t) of the quantum-plus-thermal diffusion front from a point source."""
    t, c = q.t, q.constants
    if t == 0.0:
        return 0.0
    if c.zero_temperature:
        return math.sqrt(4.0 * c.kappa * t)
    if c.lambda_T == 0.0:
        return 2.0 * c.D * t
    lam2 = c.lambda_T**2
    return lam2 * _solve_front_scaled(2.0 * c.D * t / lam2)


def zero_T_free_sigma2(t: float, hbar: float, m: float, b: float) -> float:
    """Purely quantum spreading hbar*sqrt(t/(m b)); also the short-time limit of the front.

    The friction coefficient belongs under the root: sigma^4 = 4 kappa t with
    kappa = hbar^2/(4 m b).  Forms without b are dimensionally inconsistent.
    """
    return hbar * math.sqrt(t / (m * b))


# --- harmonic oscillator equilibria ------------------------------------------


def _require_oscillator(p: OscillatorParams):
    if p.omega0 <= 0:
        raise DomainError("oscillator formulas require omega0 > 0")


def oscillator_sigma2_dg(p: OscillatorParams) -> float:
    """Fixed point of the density-gradient dispersion equation (approximate theory)."""
    bath = p.bath
    if bath.T <= 0 or p.omega0 <= 0:
        raise DomainError(
            "density-gradient equilibrium needs T > 0 and omega0 > 0; "
            "use oscillator_sigma2_exact for the T = 0 limit hbar/(2 m omega0)"
        )
    beta = 1.0 / bath.kT
    x = beta * bath.hbar * p.omega0
    return (1.0 + math.hypot(1.0, x)) / (2.0 * beta * p.spring)


def coth_half(x: float) -> float:
    """coth(x/2) for x > 0, accurate as x -> 0."""
    em = math.expm1(-x)
    return (2.0 + em) / (-em)


def oscillator_sigma2_exact(p: OscillatorParams) -> float:
    """Exact quantum equilibrium dispersion (hbar/2 m w0) coth(beta hbar w0 / 2)."""
    _require_oscillator(p)
    bath = p.bath
    if bath.T == 0.0:
        if bath.hbar == 0.0:
            raise DomainError("hbar = 0 and T = 0: the oscillator collapses to a point")
        return bath.hbar / (2.0 * bath.m * p.omega0)
    if bath.hbar == 0.0:
        return bath.kT / p.spring
    x = bath.hbar * p.omega0 / bath.kT
    return bath.hbar / (2.0 * bath.m * p.omega0) * coth_half(x)


def zero_T_oscillator_sigma2(t: float, p: OscillatorParams) -> float:
    """Zero-temperature oscillator dispersion grown from a point at t = 0."""
    _require_oscillator(p)
    bath = p.bath
    rate = 4.0 * p.spring / bath.b
    return bath.hbar / (2.0 * bath.m * p.omega0) * math.sqrt(-math.expm1(-rate * t))


# --- quadrature over inverse temperature -------------------------------------


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_panel(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, order: int) -> float:
    if order not in _GL_CACHE:
        _GL_CACHE[order] = leggauss(order)
    nodes, weights = _GL_CACHE[order]
    half = 0.5 * (b - a)
    return half * float(np.dot(weights, f(a + half * (nodes + 1.0))))


def integrate_gl(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-13,
    atol: float = 0.0,
    order: int = 16,
    max_panels: int = 4096,
) -> tuple[float, float]:
    """Adaptive Gauss-Legendre panel quadrature; returns (value, error estimate).

    A panel is accepted when its one-panel estimate agrees with the sum over its
    two halves.  ``f`` must accept a numpy array of nodes.
    """
    total = _gl_panel(f, a, b, order)
    stack = [(a, b, total)]
    value, err, panels = 0.0, 0.0, 0
    while stack:
        lo, hi, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gl_panel(f, lo, mid, order), _gl_panel(f, mid, hi, order)
        diff = abs(left + right - whole)
        panels += 1
        local_tol = max(rtol * abs(total) * (hi - lo) / (b - a), atol * (hi - lo) / (b - a))
        if diff <= local_tol or diff <= 1e-16 * abs(left + right):
            value += left + right
            err += diff
        elif panels > max_panels:
            raise NumericError(f"quadrature did not converge; achieved error estimate {err + diff:.3e}")
        else:
            stack.append((mid, hi, right))
            stack.append((lo, mid, left))
    return value, err


def _sigma2_e_of_beta(p: OscillatorParams) -> Callable[[np.ndarray], np.ndarray]:
    bath = p.bath
    x_per_beta = bath.hbar * p.omega0
    pref = bath.hbar / (2.0 * bath.m * p.omega0)

    def s2(beta_prime: np.ndarray) -> np.ndarray:
        em = np.expm1(-x_per_beta * beta_prime)
        return pref * (2.0 + em) / (-em)

    return s2


def quantum_spring_integral(p: OscillatorParams) -> float:
    """k_B T * integral_0^beta hbar^2 / (4 m sigma_e^4(beta')) d beta'."""
    _require_oscillator(p)
    bath = p.bath
    if bath.hbar == 0.0:
        return 0.0
    if bath.T == 0.0:
        return p.spring
    beta = 1.0 / bath.kT
    s2 = _sigma2_e_of_beta(p)
    c = bath.hbar**2 / (4.0 * bath.m)
    value, _ = integrate_gl(lambda bp: c / s2(bp) ** 2, 0.0, beta)
    return value / beta


def effective_spring(p: OscillatorParams) -> float:
    """Effective restoring constant m w0^2 - (quantum free-energy correction).

    Computed by quadrature over inverse temperature; equals k_B T / sigma_e^2
    with the exact equilibrium dispersion.
    """
    _require_oscillator(p)
    if p.bath.T == 0.0:
        return 0.0
    return p.spring - quantum_spring_integral(p)


def effective_spring_closed(p: OscillatorParams) -> float:
    """k_B T / sigma_e^2, the closed form the quadrature must reproduce."""
    if p.bath.T == 0.0:
        return 0.0
    return p.bath.kT / oscillator_sigma2_exact(p)


def free_energy_factor(p: OscillatorParams) -> float:
    """Dimensionless weight turning the Bohm force coefficient into the F_Q one.

    k_B T * integral_0^beta sigma_e^4(beta)/sigma_e^4(beta') d beta'.  Tends to 1
    as T -> 0 (F_Q -> Q) and to 1/3 when beta hbar w0 -> 0.
    """
    _require_oscillator(p)
    bath = p.bath
    if bath.T == 0.0:
        return 1.0
    if bath.hbar == 0.0:
        return 1.0 / 3.0
    beta = 1.0 / bath.kT
    s2 = _sigma2_e_of_beta(p)
    ref = float(s2(np.array([beta]))[0]) ** 2
    value, _ = integrate_gl(lambda bp: ref / s2(bp) ** 2, 0.0, beta)
    return value / beta


def quantum_free_energy(x, p: OscillatorParams):
    """F_Q(x) = k_B T integral_0^beta Q(x; sigma_e^2(beta')) d beta' for the Gaussian oscillator.

    Q(x; s2) = hbar^2/(4 m s2) - hbar^2 x^2/(8 m s2^2) is the Bohm potential of a
    centred Gaussian with variance s2.
    """
    _require_oscillator(p)
    bath = p.bath
    x = np.asarray(x, dtype=float)
    if bath.T == 0.0:
        s2 = oscillator_sigma2_exact(p)
        return bath.hbar**2 / (4 * bath.m * s2) - bath.hbar**2 * x**2 / (8 * bath.m * s2**2)
    if bath.hbar == 0.0:
        return np.zeros_like(x)
    beta = 1.0 / bath.kT
    s2 = _sigma2_e_of_beta(p)
    c = bath.hbar**2 / bath.m
    inv1, _ = integrate_gl(lambda bp: 1.0 / s2(bp), 0.0, beta)
    inv2, _ = integrate_gl(lambda bp: 1.0 / s2(bp) ** 2, 0.0, beta)
    return (c / 4.0 * inv1 - c / 8.0 * inv2 * x**2) / beta


# --- equilibrium fluctuations -------------------------------------------------


def spectral_density_rr(omega, b: float, m: float, T: float, sigma2_e: float, kB: float = 1.0):
    """Two-sided position spectral density of the effective oscillator.

    Normalized so that integral S d(omega)/(2 pi) over the real line is the
    position variance.
    """
    kT = kB * T
    omega = np.asarray(omega, dtype=float)
    k_eff = kT / sigma2_e
    return 2.0 * b * kT / ((m * omega**2 - k_eff) ** 2 + (b * omega) ** 2)


def autocorrelation_rr(tau, D: float, sigma2_e: float):
    """sigma_e^2 exp(-D tau / sigma_e^2); constant when D = 0 (T = 0)."""
    tau = np.asarray(tau, dtype=float)
    return sigma2_e * np.exp(-D * tau / sigma2_e)


# --- Bloch-equation oracle ------------------------------------------------------


@dataclass(frozen=True)
class BlochOracleSpec:
    grid: Grid1D
    potential: PotentialSpec
    beta: float
    hbar: float = 1.0
    m: float = 1.0

    @property
    def matrix_size(self) -> int:
        return self.grid.n

    @classmethod
    def for_oscillator(cls, p: OscillatorParams, n: int = 512, half_width: float | None = None) -> "BlochOracleSpec":
        _require_oscillator(p)
        bath = p.bath
        if bath.T <= 0:
            raise DomainError("Bloch oracle needs a finite beta (T > 0)")
        if half_width is None:
            scale = bath.kT / p.spring + bath.hbar / (2.0 * bath.m * p.omega0)
            half_width = 8.0 * math.sqrt(scale)
        return cls(
            Grid1D.symmetric(half_width, n),
            PotentialSpec.harmonic(p.omega0, bath.m),
            1.0 / bath.kT,
            bath.hbar,
            bath.m,
        )


def bloch_density(spec: BlochOracleSpec) -> np.ndarray:
    """Normalized diagonal of exp(-beta H) on the grid (Dirichlet walls)."""
    if spec.beta <= 0 or spec.matrix_size > 4096:
        raise DomainError("Bloch oracle needs beta > 0 and at most 4096 grid points")
    grid = spec.grid
    t = spec.hbar**2 / (2.0 * spec.m * grid.dx**2)
    U = spec.potential.on(grid)
    energies, vectors = eigh_tridiagonal(2.0 * t + U, np.full(grid.n - 1, -t))
    weights = np.exp(-spec.beta * (energies - energies[0]))
    keep = weights > 1e-300
    P = (vectors[:, keep] ** 2) @ weights[keep]
    P /= P.sum() * grid.dx
    edge = max(P[0], P[-1])
    if edge > 1e-12 * P.max():
        raise DomainError(
            f"Bloch density at the boundary is {edge / P.max():.2e} of its peak; use a wider grid"
        )
    return P


def bloch_oracle_dispersion(spec: BlochOracleSpec) -> float:
    P = bloch_density(spec)
    x = spec.grid.x
    w = P / P.sum()
    mu = np.dot(w, x)
    return float(np.dot(w, (x - mu) ** 2))


__all__ = [
    "INFINITE",
    "BlochOracleSpec",
    "FrontQuery",
    "autocorrelation_rr",
    "bloch_density",
    "bloch_oracle_dispersion",
    "effective_spring",
    "effective_spring_closed",
    "einstein_msd",
    "free_energy_factor",
    "front_lhs",
    "front_sigma2",
    "integrate_gl",
    "oscillator_sigma2_dg",
    "oscillator_sigma2_exact",
    "quantum_free_energy",
    "quantum_spring_integral",
    "spectral_density_rr",
    "zero_T_free_sigma2",
    "zero_T_oscillator_sigma2",
]
