"""Gaussian moment dynamics: dispersion ODEs and their diagnostics.

All three models share one right-hand side,

    d sigma^2/dt = 2 D + hbar^2/(2 m b sigma^2) - (2 m w0^2 / b) sigma^2,

written with D lambda_T^2 = hbar^2/(4 m b) and 2 D beta m w0^2 = 2 m w0^2 / b so
that the T = 0 oscillator follows by setting D = 0 with both products kept
finite.  ``free_thermal`` drops the spring term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import DomainError, NumericError, ParameterError
from .phys import BathParams, OscillatorParams, derive

Kind = Literal["free_thermal", "oscillator_thermal", "oscillator_zero_T"]
KINDS = ("free_thermal", "oscillator_thermal", "oscillator_zero_T")


@dataclass(frozen=True)
class MomentState:
    t: float
    sigma2: float


@dataclass(frozen=True)
class MomentModel:
    kind: Kind
    params: OscillatorParams

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown moment model {self.kind!r}")
        derive(self.params)
        if self.kind != "free_thermal" and self.params.omega0 <= 0:
            raise ParameterError(f"{self.kind} requires omega0 > 0")
        if self.kind == "oscillator_zero_T" and self.params.bath.T != 0:
            raise ParameterError("oscillator_zero_T requires T = 0")
        if self.kind == "oscillator_thermal" and self.params.bath.T <= 0:
            raise ParameterError("oscillator_thermal requires T > 0")

    @property
    def coefficients(self) -> tuple[float, float, float]:
        """(2D, 2 kappa, 2 m w0^2 / b) of the right-hand side."""
        bath = self.params.bath
        c = derive(bath)
        spring = 0.0 if self.kind == "free_thermal" else 2.0 * self.params.spring / bath.b
        return 2.0 * c.D, 2.0 * c.kappa, spring


def rhs(model: MomentModel, sigma2: float) -> float:
    if not sigma2 > 0:
        raise DomainError(f"dispersion must be positive, got {sigma2!r}")
    a, q, k = model.coefficients
    return a + q / sigma2 - k * sigma2


def fixed_point(model: MomentModel) -> float:
    """Positive root of the right-hand side for the oscillator models."""
    if model.kind == "free_thermal":
        raise DomainError("the free particle spreads forever; no fixed point")
    a, q, k = model.coefficients
    # k s^2 - a s - q = 0
    return (a + math.sqrt(a * a + 4.0 * k * q)) / (2.0 * k)


def _short_time_scale(model: MomentModel) -> float | None:
    bath = model.params.bath
    c = derive(bath)
    scales = []
    if c.D > 0 and c.kappa > 0:
        scales.append(c.kappa / c.D**2)  # lambda_T^2 / D
    if model.kind != "free_thermal":
        scales.append(model.params.relaxation_time)
    return min(scales) if scales else None


def _rk4(model: MomentModel, y: float, h: float) -> float:
    k1 = rhs(model, y)
    k2 = rhs(model, y + 0.5 * h * k1)
    k3 = rhs(model, y + 0.5 * h * k2)
    k4 = rhs(model, y + h * k3)
    return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def integrate(
    model: MomentModel,
    sigma2_0: float,
    t_grid: Sequence[float],
    rtol: float = 1e-10,
    t0: float = 0.0,
) -> list[MomentState]:
    """Integrate the dispersion ODE from (t0, sigma2_0), reporting at ``t_grid``.

    Classic RK4 with step doubling (the Richardson-extrapolated value is kept).
    A zero (or unresolvably small) initial dispersion is started from the exact
    short-time law sigma^4 = sigma0^4 + hbar^2 t/(m b) over a first step of 1e-12
    of the shortest model time scale.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) <= 0) or (t_grid.size and t_grid[0] < t0):
        raise ParameterError("t_grid must be strictly ascending and start at or after t0")
    if sigma2_0 < 0:
        raise ParameterError("initial dispersion must be non-negative")
    bath: BathParams = model.params.bath
    kappa = bath.kappa

    out: list[MomentState] = []
    t, y = t0, float(sigma2_0)
    i = 0
    while i < t_grid.size and t_grid[i] == t0:
        out.append(MomentState(t0, y))
        i += 1
    if i == t_grid.size:
        return out

    t1 = None
    if kappa > 0:
        scale = _short_time_scale(model)
        t1 = 1e-12 * (scale if scale is not None else t_grid[i] - t0)
    if t1 is not None and y * y < 4.0 * kappa * t1:
        # at or near zero dispersion: sigma^4 = sigma0^4 + 4 kappa t is exact for the quantum term
        y0 = y
        while i < t_grid.size and t_grid[i] - t0 <= t1:
            out.append(MomentState(float(t_grid[i]), math.sqrt(y0 * y0 + 4.0 * kappa * (t_grid[i] - t0))))
            i += 1
        t, y = t0 + t1, math.sqrt(y0 * y0 + 4.0 * kappa * t1)
    elif y == 0.0:
        # hbar = 0: the right-hand side is regular at zero; take one Euler step of the
        # constant 2D term so later steps never see sigma2 = 0.
        a = model.coefficients[0]
        t1 = 1e-9 * (t_grid[i] - t0)
        if a <= 0:
            raise DomainError("zero dispersion with D = 0 and hbar = 0 never evolves")
        t, y = t0 + t1, a * t1

    h = (t - t0) if t > t0 else 1e-6 * (t_grid[-1] - t0)
    while i < t_grid.size:
        target = float(t_grid[i])
        while t < target:
            h = min(h, target - t)
            if h <= 1e-15 * abs(t) or h < 1e-300:
                raise NumericError(f"step size underflow at t={t:g}", state=MomentState(t, y))
            try:
                y_full = _rk4(model, y, h)
                y_half = _rk4(model, _rk4(model, y, 0.5 * h), 0.5 * h)
            except DomainError:
                h *= 0.25
                continue
            err = abs(y_half - y_full) / 15.0
            tol = rtol * abs(y_half)
            if err <= tol and y_half > 0:
                t += h
                y = y_half + (y_half - y_full) / 15.0
                if t >= target or target - t <= 1e-14 * target:
                    t = target
            factor = 0.9 * (tol / err) ** 0.2 if err > 0 else 5.0
            h *= min(5.0, max(0.2, factor))
        out.append(MomentState(target, y))
        i += 1
    return out


def integrate_array(model: MomentModel, sigma2_0: float, t_grid, **kw) -> np.ndarray:
    return np.array([s.sigma2 for s in integrate(model, sigma2_0, t_grid, **kw)])


def heisenberg_product(sigma2: float, params: BathParams) -> float:
    """Position variance times momentum variance, m k_B T sigma^2 + hbar^2/4."""
    return params.m * params.kT * sigma2 + params.hbar**2 / 4.0


def quantum_diffusion_coefficient(sigma2: float, params: BathParams) -> float:
    """D_Q = hbar^2/(4 m b sigma^2), the diffusion coefficient equivalent to the Bohm force."""
    if not sigma2 > 0:
        raise DomainError("dispersion must be positive")
    return params.hbar**2 / (4.0 * params.m * params.b * sigma2)
