"""Ensemble Langevin dynamics with a Gaussian-closure Bohm force.

The stochastic Bohm-Langevin equation

    m R'' + b R' + dU/dR + dQ/dR = X,   <X(t) X(t')> = 2 b k_B T delta(t - t')

has a force that depends on the law of R itself.  It is simulated as an
interacting ensemble: each step the ensemble mean and variance are reduced, the
density is approximated by the Gaussian with those moments, and the resulting
linear quantum force acts on every trajectory.

Noise comes from :mod:`tqdiff.rng`, so every number depends only on
(seed, trajectory index, draw index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from . import analytic
from .errors import DomainError, ParameterError
from .moments import MomentModel, integrate_array
from .phys import OscillatorParams, derive
from .rng import STREAM_INIT, STREAM_INIT_VELOCITY, NormalStream, normals

ForceKind = Literal["free", "external", "meanfield_quantum", "effective_spring", "time_dependent_spring"]
FORCE_KINDS = ("free", "external", "meanfield_quantum", "effective_spring", "time_dependent_spring")
MEANFIELD_KINDS = ("meanfield_quantum", "time_dependent_spring")


@dataclass(frozen=True)
class NoiseSpec:
    """White Langevin force; a step of length dt delivers an impulse of variance S_XX dt."""

    spectral_density: float

    def __post_init__(self):
        if self.spectral_density < 0:
            raise ParameterError("spectral density must be non-negative")

    @classmethod
    def from_params(cls, p: OscillatorParams) -> "NoiseSpec":
        return cls(2.0 * p.bath.b * p.bath.kT)

    def impulse_variance(self, dt: float) -> float:
        return self.spectral_density * dt


@dataclass(frozen=True)
class Ensemble:
    t: float
    positions: np.ndarray = field(repr=False)
    velocities: np.ndarray | None = field(default=None, repr=False)
    seed: int = 0
    draw: int = 0
    noise: NormalStream | None = field(default=None, repr=False, compare=False)
    last_kick: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.positions.size

    def stats(self) -> tuple[float, float]:
        """(mean, unbiased variance); numpy's pairwise sum keeps the reduction order fixed."""
        return float(np.mean(self.positions)), float(np.var(self.positions, ddof=1))

    def stream(self) -> NormalStream:
        if self.noise is None:
            object.__setattr__(self, "noise", NormalStream(self.seed, self.n))
        return self.noise

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "seed": self.seed,
            "draw": self.draw,
            "positions": self.positions.tolist(),
            "velocities": None if self.velocities is None else self.velocities.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        v = d.get("velocities")
        return cls(
            float(d["t"]),
            np.asarray(d["positions"], dtype=float),
            None if v is None else np.asarray(v, dtype=float),
            int(d["seed"]),
            int(d["draw"]),
        )


def initial_ensemble(
    p: OscillatorParams,
    n_traj: int,
    seed: int,
    sigma2_0: float = 0.0,
    underdamped: bool = False,
    moment_match: bool = False,
    velocity: Literal["thermal", "zero"] = "thermal",
) -> Ensemble:
    """Gaussian start with variance ``sigma2_0`` (all at the origin when 0).

    ``moment_match`` shifts and rescales the draw so the sample mean is 0 and the
    sample variance is exactly ``sigma2_0``.
    """
    z = normals(seed, n_traj, 1, STREAM_INIT)[:, 0]
    if moment_match and n_traj > 1:
        z = (z - z.mean()) / z.std(ddof=1)
    R = math.sqrt(sigma2_0) * z
    V = None
    if underdamped:
        if velocity == "zero":
            V = np.zeros(n_traj)
        else:
            V = math.sqrt(p.bath.kT / p.bath.m) * normals(seed, n_traj, 1, STREAM_INIT_VELOCITY)[:, 0]
    return Ensemble(0.0, R, V, seed)


def meanfield_quantum_force(R, mu: float, sigma2: float, params, factor: float = 1.0):
    """-dQ/dx of a Gaussian with mean mu and variance sigma2: (hbar^2/(4 m sigma^4)) (R - mu).

    ``factor`` weights the coefficient; the free-energy closure passes
    :func:`tqdiff.analytic.free_energy_factor`.
    """
    if not sigma2 > 0:
        raise DomainError("mean-field force needs a positive ensemble variance")
    bath = params.bath if isinstance(params, OscillatorParams) else params
    return factor * bath.hbar**2 / (4.0 * bath.m * sigma2**2) * (np.asarray(R) - mu)


@dataclass(frozen=True)
class ForceModel:
    """Deterministic force acting on each trajectory.

    closure: ``bohm`` uses Q itself; ``free_energy`` uses the entropy-corrected
    quantum free energy (harmonic oscillator only).
    spring_source: where ``time_dependent_spring`` takes sigma^2(t) from.
    """

    kind: ForceKind
    params: OscillatorParams
    k_eff: float | None = None
    closure: Literal["bohm", "free_energy"] = "bohm"
    spring_source: Literal["ensemble", "ode"] = "ensemble"
    grad_U: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in FORCE_KINDS:
            raise ParameterError(f"unknown force model {self.kind!r}")
        if self.closure not in ("bohm", "free_energy"):
            raise ParameterError(f"unknown closure {self.closure!r}")
        if self.spring_source not in ("ensemble", "ode"):
            raise ParameterError(f"unknown spring source {self.spring_source!r}")
        if self.kind == "effective_spring" and self.k_eff is None:
            object.__setattr__(self, "k_eff", analytic.effective_spring(self.params))
        if self.kind == "time_dependent_spring" and self.params.omega0 <= 0:
            raise ParameterError("time_dependent_spring needs omega0 > 0")
        if self.closure == "free_energy" and self.params.omega0 <= 0:
            raise ParameterError("free-energy closure is defined for the harmonic oscillator only")

    @property
    def needs_stats(self) -> bool:
        return self.kind in MEANFIELD_KINDS

    @property
    def quantum_factor(self) -> float:
        if self.kind == "time_dependent_spring" or self.closure == "free_energy":
            return analytic.free_energy_factor(self.params)
        return 1.0

    def external(self, R: np.ndarray) -> np.ndarray:
        if self.grad_U is not None:
            return -self.grad_U(R)
        return -self.params.spring * R

    def spring_at(self, sigma2: float) -> float:
        """k(t) = m w0^2 - phi hbar^2/(4 m sigma^4)."""
        bath = self.params.bath
        return self.params.spring - self.quantum_factor * bath.hbar**2 / (4.0 * bath.m * sigma2**2)

    def __call__(self, R: np.ndarray, stats: tuple[float, float] | None = None, factor: float | None = None) -> np.ndarray:
        kind = self.kind
        if kind == "free":
            return np.zeros_like(R)
        if kind == "external":
            return self.external(R)
        if kind == "effective_spring":
            return -self.k_eff * R
        if stats is None:
            raise ParameterError(f"{kind} needs ensemble statistics")
        mu, sigma2 = stats
        if kind == "time_dependent_spring":
            return -self.spring_at(sigma2) * R
        f = meanfield_quantum_force(R, mu, sigma2, self.params, self.quantum_factor if factor is None else factor)
        if self.params.omega0 > 0 or self.grad_U is not None:
            f = f + self.external(R)
        return f


def step_overdamped(ens: Ensemble, force: ForceModel, dt: float, stats=None) -> Ensemble:
    """Euler-Maruyama for b R' = F + X."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    bath = force.params.bath
    if stats is None and force.needs_stats:
        stats = ens.stats()
    F = force(ens.positions, stats)
    xi = ens.stream().draw(ens.draw)
    amp = math.sqrt(2.0 * bath.kT / bath.b * dt)
    R = ens.positions + (F / bath.b) * dt + amp * xi
    return replace(ens, t=ens.t + dt, positions=R, draw=ens.draw + 1, last_kick=bath.b * amp * xi)


def step_underdamped(ens: Ensemble, force: ForceModel, dt: float, stats=None) -> Ensemble:
    """Kick / drift / exact Ornstein-Uhlenbeck velocity / drift / kick.

    Mean-field statistics are taken once, from the ensemble at the start of the step.
    """
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if ens.velocities is None:
        raise ParameterError("underdamped stepping needs velocities")
    bath = force.params.bath
    if stats is None and force.needs_stats:
        stats = ens.stats()
    m = bath.m
    V = ens.velocities + 0.5 * dt * force(ens.positions, stats) / m
    R = ens.positions + 0.5 * dt * V
    a = math.exp(-bath.b * dt / m)
    sd = math.sqrt(bath.kT / m * -math.expm1(-2.0 * bath.b * dt / m))
    xi = ens.stream().draw(ens.draw)
    V = a * V + sd * xi
    R = R + 0.5 * dt * V
    V = V + 0.5 * dt * force(R, stats) / m
    return replace(ens, t=ens.t + dt, positions=R, velocities=V, draw=ens.draw + 1, last_kick=m * sd * xi)


# --- simulation driver ----------------------------------------------------------


@dataclass(frozen=True)
class SdeConfig:
    params: OscillatorParams = OscillatorParams()
    n_traj: int = 1000
    dt: float | None = None
    t_end: float = 10.0
    seed: int = 0
    mode: Literal["overdamped", "underdamped"] = "overdamped"
    force: ForceKind = "free"
    record_stride: int = 10
    sigma2_0: float = 0.0
    closure: Literal["bohm", "free_energy"] = "bohm"
    spring_source: Literal["ensemble", "ode"] = "ensemble"
    k_eff: float | None = None
    record_trajectories: int = 0
    burn_in: float = 0.0
    moment_match: bool = False
    velocity_init: Literal["thermal", "zero"] = "thermal"

    def validate(self) -> list[str]:
        errors = []
        if self.n_traj < 1:
            errors.append("n_traj must be at least 1")
        if self.force in MEANFIELD_KINDS and self.n_traj < 2 and not (
            self.force == "time_dependent_spring" and self.spring_source == "ode"
        ):
            errors.append("mean-field mode requires N ≥ 2")
        if self.mode not in ("overdamped", "underdamped"):
            errors.append(f"unknown mode {self.mode!r}")
        if self.force not in FORCE_KINDS:
            errors.append(f"unknown force {self.force!r}")
        if self.dt is not None and not self.dt > 0:
            errors.append("dt must be positive")
        if not self.t_end > 0:
            errors.append("t_end must be positive")
        if self.record_stride < 1:
            errors.append("record_stride must be at least 1")
        if not 0 <= self.seed < 2**64:
            errors.append("seed must be a 64-bit unsigned integer")
        if self.sigma2_0 < 0:
            errors.append("sigma2_0 must be non-negative")
        if self.force in MEANFIELD_KINDS and self.sigma2_0 <= 0:
            errors.append("mean-field mode needs sigma2_0 > 0 (the Gaussian closure diverges at a point)")
        if not 0 <= self.record_trajectories <= self.n_traj:
            errors.append("record_trajectories must lie in [0, n_traj]")
        return errors

    def force_model(self) -> ForceModel:
        return ForceModel(self.force, self.params, self.k_eff, self.closure, self.spring_source)

    def resolved_dt(self) -> float:
        if self.dt is not None:
            return self.dt
        return default_dt(self.params, self.mode, self.force, self.t_end)


def default_dt(p: OscillatorParams, mode: str, force: str, t_end: float) -> float:
    """0.01 times the fastest applicable relaxation scale."""
    bath = p.bath
    c = derive(bath)
    scales = []
    if mode == "underdamped":
        scales.append(bath.m / bath.b)
    if p.omega0 > 0:
        scales.append(1.0 / p.omega0)
        if bath.T > 0 and force in ("effective_spring", "time_dependent_spring"):
            scales.append(analytic.oscillator_sigma2_exact(p) / c.D)
    if force == "meanfield_quantum" and c.D > 0 and c.kappa > 0:
        scales.append(c.kappa / c.D**2)
    return 0.01 * (min(scales) if scales else t_end)


@dataclass
class SdeResult:
    config: SdeConfig
    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    var_stderr: np.ndarray
    final: Ensemble
    var_v: np.ndarray | None = None
    ode_sigma2: np.ndarray | None = None
    traj_times: np.ndarray | None = None
    trajectories: np.ndarray | None = None  # shape (n_times, n_recorded)

    @property
    def record_dt(self) -> float:
        return self.config.resolved_dt() * self.config.record_stride


def variance_stderr(x: np.ndarray) -> float:
    """Standard error of the sample variance from the fourth central moment."""
    d = x - x.mean()
    s2 = np.mean(d * d)
    m4 = np.mean(d**4)
    return float(math.sqrt(max(m4 - s2 * s2, 0.0) / x.size))


def _ode_rhs(force: ForceModel, mode: str, y: np.ndarray) -> np.ndarray:
    """Gaussian-closure moment ODE for the time-dependent spring.

    overdamped: y = [Var R]; underdamped: y = [Var R, Cov RV, Var V].
    """
    bath = force.params.bath
    k = force.spring_at(y[0])
    if mode == "overdamped":
        return np.array([2.0 * bath.kT / bath.b - 2.0 * k * y[0] / bath.b])
    m, b = bath.m, bath.b
    vr, c, vv = y
    return np.array([2.0 * c, vv - (b / m) * c - (k / m) * vr, -2.0 * (b / m) * vv - 2.0 * (k / m) * c + 2.0 * b * bath.kT / m**2])


def _rk4_vec(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def simulate(config: SdeConfig) -> SdeResult:
    errors = config.validate()
    if errors:
        raise ParameterError(errors)
    p = config.params
    derive(p)
    force = config.force_model()
    dt = config.resolved_dt()
    underdamped = config.mode == "underdamped"
    stepper = step_underdamped if underdamped else step_overdamped
    n_steps = int(round(config.t_end / dt))
    if n_steps < 1:
        raise ParameterError("t_end shorter than one step")

    ens = initial_ensemble(
        p, config.n_traj, config.seed, config.sigma2_0, underdamped, config.moment_match, config.velocity_init
    )
    use_ode = force.kind == "time_dependent_spring" and config.spring_source == "ode"
    ode_y = None
    if use_ode:
        v0 = p.bath.kT / p.bath.m if (underdamped and config.velocity_init == "thermal") else 0.0
        ode_y = np.array([config.sigma2_0]) if not underdamped else np.array([config.sigma2_0, 0.0, v0])

    times, means, vars_, ses, vvs, odes = [], [], [], [], [], []
    traj_t, traj = [], []
    n_rec = config.record_trajectories

    def record(e: Ensemble):
        times.append(e.t)
        means.append(float(np.mean(e.positions)))
        vars_.append(float(np.var(e.positions, ddof=1)) if e.n > 1 else 0.0)
        ses.append(variance_stderr(e.positions) if e.n > 1 else 0.0)
        if underdamped:
            vvs.append(float(np.var(e.velocities, ddof=1)) if e.n > 1 else 0.0)
        if use_ode:
            odes.append(float(ode_y[0]))
        if n_rec and e.t >= config.burn_in - 0.5 * dt:
            traj_t.append(e.t)
            traj.append(e.positions[:n_rec].copy())

    record(ens)
    for i in range(1, n_steps + 1):
        stats = None
        if force.needs_stats:
            if use_ode:
                stats = (0.0, float(ode_y[0]))
            else:
                stats = ens.stats()
        ens = stepper(ens, force, dt, stats)
        ens = replace(ens, t=i * dt)
        if use_ode:
            ode_y = _rk4_vec(lambda y: _ode_rhs(force, config.mode, y), ode_y, dt)
        if i % config.record_stride == 0:
            record(ens)

    return SdeResult(
        config,
        np.array(times),
        np.array(means),
        np.array(vars_),
        np.array(ses),
        ens,
        np.array(vvs) if underdamped else None,
        np.array(odes) if use_ode else None,
        np.array(traj_t) if n_rec else None,
        np.array(traj) if n_rec else None,
    )


def moment_reference(config: SdeConfig, times) -> np.ndarray:
    """Moment-ODE prediction of the ensemble variance for a free mean-field run."""
    model = MomentModel("free_thermal", config.params)
    t = np.asarray(times, dtype=float)
    out = np.empty_like(t)
    first = 0
    if t[0] == 0.0:
        out[0] = config.sigma2_0
        first = 1
    out[first:] = integrate_array(model, config.sigma2_0, t[first:])
    return out
