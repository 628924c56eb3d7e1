"""Conservative finite-difference solver for the nonlinear quantum Smoluchowski equation.

    dP/dt = d/dx [ P d(U + Q)/dx / b + D dP/dx ],   Q = -(hbar^2/2m) (sqrt P)'' / sqrt P

Vertex-centred finite volumes on a uniform grid: node i owns a cell of width dx
(dx/2 at the two ends), fluxes live on the faces between nodes and the outer
faces carry no flux (reflecting walls, a modelling choice: runs are meant to keep
the density well away from the edges, which :func:`evolve` monitors).  The
trapezoidal mass is therefore conserved to roundoff.

Three models are supported: ``free_thermal`` (U = 0, T > 0),
``thermal_potential`` (U, T > 0) and ``zero_T_potential`` (U, T = 0,
D = 0).  Time stepping is explicit Euler; the Bohm term acts like a fourth-order
operator with coefficient kappa = hbar^2/(4 m b), so the step is limited by
dx^4/(8 kappa) as well as by the diffusive bound (see :func:`stable_dt`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numba
import numpy as np

from .errors import NumericError, ParameterError
from .grid import DensityField, Grid1D, PotentialSpec, variance
from .phys import OscillatorParams, derive

Model = Literal["free_thermal", "thermal_potential", "zero_T_potential"]
MODELS = ("free_thermal", "thermal_potential", "zero_T_potential")

FLOOR_REL = 1e-12
MAX_HALVINGS = 20

__all__ = [
    "DensityField",
    "Grid1D",
    "PdeResult",
    "PdeRun",
    "PotentialSpec",
    "evolve",
    "flux",
    "gaussian_run",
    "quantum_potential",
    "stable_dt",
    "steady_state_residual",
    "step",
    "variance",
]


def _bath(params):
    return params.bath if isinstance(params, OscillatorParams) else params


def _lap_sqrt_over_sqrt(values: np.ndarray, dx: float) -> np.ndarray:
    sq = np.sqrt(np.maximum(values, FLOOR_REL * values.max()))
    lap = np.empty_like(sq)
    lap[1:-1] = sq[2:] - 2.0 * sq[1:-1] + sq[:-2]
    lap[0] = 2.0 * sq[0] - 5.0 * sq[1] + 4.0 * sq[2] - sq[3]
    lap[-1] = 2.0 * sq[-1] - 5.0 * sq[-2] + 4.0 * sq[-3] - sq[-4]
    return lap / (dx * dx * sq)


def quantum_potential(P: DensityField, params) -> np.ndarray:
    """Bohm potential on the grid.

    sqrt(P) is floored at 1e-12 of the peak density inside this function only,
    which keeps Q bounded in empty regions without touching the density.
    """
    bath = _bath(params)
    if bath.hbar == 0.0:
        return np.zeros(P.grid.n)
    return -(bath.hbar**2 / (2.0 * bath.m)) * _lap_sqrt_over_sqrt(P.values, P.grid.dx)


def _model_coeffs(params, model: Model) -> tuple[float, float]:
    if model not in MODELS:
        raise ParameterError(f"unknown PDE model {model!r}")
    c = derive(_bath(params))
    D = 0.0 if model == "zero_T_potential" else c.D
    return D, 1.0 / _bath(params).b


def flux(P: DensityField, U: PotentialSpec | np.ndarray, params, model: Model) -> np.ndarray:
    """Face fluxes (n + 1 values, the outer two are zero).

    F = -[Pbar d(U + Q)/dx / b + D dP/dx] with Pbar the arithmetic face average.
    Where either neighbour is below the vacuum floor, Pbar is the upwind value
    instead, so an empty node can never export mass.
    """
    D, inv_b = _model_coeffs(params, model)
    grid = P.grid
    if model == "free_thermal":
        u = np.zeros(grid.n)
    else:
        u = U.on(grid) if isinstance(U, PotentialSpec) else np.asarray(U, dtype=float)
    phi = u + quantum_potential(P, params)
    p = P.values
    F = np.zeros(grid.n + 1)
    dphi = np.diff(phi)
    pbar = 0.5 * (p[1:] + p[:-1])
    # faces touching vacuum take the drift density from the upwind node
    vac = p < FLOOR_REL * p.max()
    edge = vac[1:] | vac[:-1]
    upwind = np.where(dphi < 0, p[:-1], p[1:])
    pbar = np.where(edge, upwind, pbar)
    F[1:-1] = -(pbar * dphi * inv_b + D * np.diff(p)) / grid.dx
    return F


def _apply(P: DensityField, F: np.ndarray, dt: float) -> np.ndarray:
    return P.values - dt * np.diff(F) / P.grid.cell_widths()


def step(P: DensityField, U, params, model: Model, dt: float, _depth: int = 0) -> DensityField:
    """One explicit Euler step of length dt.

    A step that would make any density value negative is redone as two half
    steps, recursively, at most 20 times.
    """
    new = _apply(P, flux(P, U, params, model), dt)
    if np.all(new >= 0):
        return DensityField(P.grid, new)
    if _depth >= MAX_HALVINGS:
        i = int(np.argmin(new))
        raise NumericError(
            f"negative density {new[i]:.3e} at x={P.grid.x[i]:.4g} persists after "
            f"{MAX_HALVINGS} halvings (dt={dt:.3e})",
            state=P,
        )
    half = step(P, U, params, model, 0.5 * dt, _depth + 1)
    return step(half, U, params, model, 0.5 * dt, _depth + 1)


def stable_dt(grid: Grid1D, params, model: Model, sigma2: float, courant: float = 0.5) -> float:
    """Explicit Euler step from the linear stability limit of the scheme.

    dt = courant * 2 / (4 D_eff / dx^2 + 16 kappa / dx^4) with D_eff = D + kappa/sigma2;
    courant = 0.5 puts the stiffest mode exactly at dt * rate = 1.
    """
    bath = _bath(params)
    D, _ = _model_coeffs(params, model)
    kappa = bath.kappa
    dx = grid.dx
    d_eff = D + (kappa / sigma2 if sigma2 > 0 else 0.0)
    rate = 4.0 * d_eff / dx**2 + 16.0 * kappa / dx**4
    if rate <= 0:
        raise ParameterError("nothing evolves: D = 0 and hbar = 0")
    return 2.0 * courant / rate


def steady_state_residual(P: DensityField, U, params) -> float:
    """Spread of U + Q + k_B T ln P over the occupied region, in units of k_B T.

    Zero exactly when the hydrodynamic velocity vanishes everywhere.
    """
    bath = _bath(params)
    if bath.T <= 0:
        raise ParameterError("steady_state_residual needs T > 0")
    u = U.on(P.grid) if isinstance(U, PotentialSpec) else np.asarray(U, dtype=float)
    p = P.values
    mask = p > 1e-8 * p.max()
    chem = u + quantum_potential(P, params) + bath.kT * np.log(np.where(mask, p, 1.0))
    return float(np.std(chem[mask]) / bath.kT)


def zero_T_residual(P: DensityField, U, params) -> float:
    """Spread of U + Q over the occupied region in units of hbar^2/(8 m sigma^2)."""
    bath = _bath(params)
    u = U.on(P.grid) if isinstance(U, PotentialSpec) else np.asarray(U, dtype=float)
    p = P.values
    mask = p > 1e-8 * p.max()
    scale = bath.hbar**2 / (8.0 * bath.m * variance(P))
    return float(np.std((u + quantum_potential(P, params))[mask]) / scale)


# --- compiled time loop --------------------------------------------------------


@numba.njit(cache=True, fastmath=False)
def _euler(P, U, out, dx, D, hb2m, inv_b, dt, sq, phi):
    n = P.size
    pmax = 0.0
    for i in range(n):
        if P[i] > pmax:
            pmax = P[i]
    floor = 1e-12 * pmax
    for i in range(n):
        sq[i] = math.sqrt(P[i] if P[i] > floor else floor)
    c = hb2m / (dx * dx)
    if hb2m > 0.0:
        phi[0] = U[0] - c * (2.0 * sq[0] - 5.0 * sq[1] + 4.0 * sq[2] - sq[3]) / sq[0]
        for i in range(1, n - 1):
            phi[i] = U[i] - c * (sq[i + 1] + sq[i - 1]) / sq[i] + 2.0 * c
        phi[n - 1] = U[n - 1] - c * (2.0 * sq[n - 1] - 5.0 * sq[n - 2] + 4.0 * sq[n - 3] - sq[n - 4]) / sq[n - 1]
    else:
        for i in range(n):
            phi[i] = U[i]
    # Euler update accumulated face by face; r = dt/dx^2 per unit width
    r = dt / (dx * dx)
    for i in range(n):
        out[i] = P[i]
    for j in range(1, n):
        dphi = phi[j] - phi[j - 1]
        if P[j] < floor or P[j - 1] < floor:
            pbar = P[j - 1] if dphi < 0.0 else P[j]
        else:
            pbar = 0.5 * (P[j] + P[j - 1])
        g = r * (pbar * dphi * inv_b + D * (P[j] - P[j - 1]))  # = -dt F_j / dx
        out[j - 1] += g
        out[j] -= g
    out[0] += out[0] - P[0]
    out[n - 1] += out[n - 1] - P[n - 1]
    ok = True
    for i in range(n):
        if out[i] < 0.0:
            ok = False
    return ok


@numba.njit(cache=True)
def _advance(P, U, dx, D, hb2m, inv_b, dt, nsteps, max_halvings):
    """Advance P in place by nsteps Euler steps; returns (steps done, halvings used).

    On persistent negativity returns the number of completed steps and -1.
    """
    n = P.size
    a = P.copy()
    b = np.empty(n)
    trial = np.empty(n)
    sq = np.empty(n)
    phi = np.empty(n)
    worst = 0
    for s in range(nsteps):
        if _euler(a, U, b, dx, D, hb2m, inv_b, dt, sq, phi):
            a, b = b, a
            continue
        done = False
        for level in range(1, max_halvings + 1):
            nsub = 1 << level
            sub = dt / nsub
            trial[:] = a
            good = True
            for _k in range(nsub):
                if not _euler(trial, U, b, dx, D, hb2m, inv_b, sub, sq, phi):
                    good = False
                    break
                trial[:] = b
            if good:
                a[:] = trial
                if level > worst:
                    worst = level
                done = True
                break
        if not done:
            P[:] = a
            return s, -1
    P[:] = a
    return nsteps, worst


@dataclass(frozen=True)
class PdeRun:
    model: Model
    params: OscillatorParams
    initial: DensityField
    t_end: float
    output_times: Sequence[float] = ()
    potential: PotentialSpec | None = None
    courant: float = 0.5
    boundary_tol: float = 1e-8
    chunk_steps: int = 20000

    def __post_init__(self):
        if self.model not in MODELS:
            raise ParameterError(f"unknown PDE model {self.model!r}")
        derive(self.params)
        T = self.params.bath.T
        if self.model == "zero_T_potential" and T != 0:
            raise ParameterError("zero_T_potential requires T = 0")
        if self.model != "zero_T_potential" and T <= 0:
            raise ParameterError(f"{self.model} requires T > 0")
        times = np.asarray(self.output_times if len(self.output_times) else [self.t_end], dtype=float)
        if np.any(np.diff(times) <= 0) or times[0] < 0 or times[-1] > self.t_end:
            raise ParameterError("output_times must be ascending within [0, t_end]")
        if not 0 < self.courant <= 0.9:
            raise ParameterError("courant factor must lie in (0, 0.9]")
        v = self.initial.values
        if np.any(v < 0) or abs(self.initial.mass() - 1.0) > 1e-10:
            raise ParameterError("initial density must be non-negative with unit mass")

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.output_times if len(self.output_times) else [self.t_end], dtype=float)

    def resolved_potential(self) -> PotentialSpec:
        if self.model == "free_thermal":
            return PotentialSpec()
        if self.potential is not None:
            return self.potential
        return PotentialSpec.harmonic(self.params.omega0, self.params.bath.m)


@dataclass
class PdeResult:
    times: np.ndarray
    snapshots: list[DensityField]
    sigma2: np.ndarray
    mass: np.ndarray
    residual: np.ndarray
    steps: int = 0
    halvings: int = 0
    min_value: float = field(default=0.0)


def _check_boundary(P: np.ndarray, tol: float, t: float):
    edge = max(P[:3].max(), P[-3:].max())
    if edge > tol * P.max():
        raise NumericError(
            f"density reached the domain edge at t={t:.4g} ({edge / P.max():.2e} of peak); widen the grid"
        )


def evolve(run: PdeRun) -> PdeResult:
    grid = run.initial.grid
    bath = run.params.bath
    D, inv_b = _model_coeffs(run.params, run.model)
    hb2m = bath.hbar**2 / (2.0 * bath.m)
    Uspec = run.resolved_potential()
    U = np.ascontiguousarray(Uspec.on(grid) if run.model != "free_thermal" else np.zeros(grid.n))

    def residual(field_: DensityField) -> float:
        if bath.T > 0:
            return steady_state_residual(field_, U, run.params)
        return zero_T_residual(field_, U, run.params)

    P = run.initial.values.astype(float).copy()
    t = 0.0
    times, snaps, s2, mass, res = [], [], [], [], []
    total_steps, worst, pmin = 0, 0, float(P.min())
    for target in run.times:
        while t < target:
            sigma2 = variance(DensityField(grid, P))
            dt = stable_dt(grid, run.params, run.model, sigma2, run.courant)
            n = math.ceil((target - t) / dt - 1e-9)
            if n > run.chunk_steps:
                n, t_next = run.chunk_steps, t + run.chunk_steps * dt
            else:
                dt, t_next = (target - t) / n, target
            done, halvings = _advance(P, U, grid.dx, D, hb2m, inv_b, dt, n, MAX_HALVINGS)
            total_steps += done
            if halvings < 0:
                raise NumericError(
                    f"negative density persists after {MAX_HALVINGS} halvings at t={t + done * dt:.4g}",
                    state=DensityField(grid, P.copy()),
                )
            worst = max(worst, halvings)
            t = t_next
            pmin = min(pmin, float(P.min()))
            _check_boundary(P, run.boundary_tol, t)
        snap = DensityField(grid, P.copy())
        times.append(float(target))
        snaps.append(snap)
        s2.append(variance(snap))
        mass.append(snap.mass())
        res.append(residual(snap))
    return PdeResult(
        np.array(times), snaps, np.array(s2), np.array(mass), np.array(res), total_steps, worst, pmin
    )


def gaussian_run(
    model: Model,
    params: OscillatorParams,
    sigma2_0: float,
    t_end: float,
    n: int = 1024,
    half_width: float | None = None,
    output_times: Sequence[float] = (),
    **kw,
) -> PdeRun:
    """Gaussian start on a grid sized to 8 expected standard deviations at ``t_end``."""
    if half_width is None:
        from .analytic import FrontQuery, front_sigma2, oscillator_sigma2_exact

        c = derive(params)
        if params.omega0 > 0 and model != "free_thermal":
            expect = max(sigma2_0, oscillator_sigma2_exact(params))
        else:
            expect = sigma2_0 + front_sigma2(FrontQuery(t_end, c))
        half_width = 8.0 * math.sqrt(expect)
    grid = Grid1D.symmetric(half_width, n)
    return PdeRun(model, params, DensityField.gaussian(grid, sigma2_0), t_end, tuple(output_times), **kw)
