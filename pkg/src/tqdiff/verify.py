"""Cross-check matrix: every acceptance check as a function returning a :class:`Check`.

Two tiers share the same code.  ``full`` uses the stated ensemble sizes and
grids; ``quick`` shrinks them so the whole matrix runs in about a minute.
"""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, TextIO

import numpy as np

from . import analytic, pde, spectral
from .errors import ParameterError, TqdiffError
from .grid import DensityField, Grid1D, PotentialSpec
from .langevin import SdeConfig, moment_reference, simulate
from .moments import MomentModel, fixed_point, heisenberg_product, integrate, integrate_array
from .phys import BathParams, OscillatorParams, derive


@dataclass(frozen=True)
class Tier:
    name: str
    pde_free_n: int
    pde_zero_T_n: int
    bloch_n: int
    n_traj: int
    meanfield_n_traj: int


TIERS = {
    "full": Tier("full", 1024, 256, 512, 10_000, 10_000),
    "quick": Tier("quick", 640, 128, 512, 2_000, 2_000),
}


@dataclass
class Check:
    name: str
    target: str
    deviation: float
    tolerance: float
    passed: bool
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)


@dataclass
class VerifyReport:
    tier: str
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"tier": self.tier, "passed": self.passed, "checks": [_jsonable(asdict(c)) for c in self.checks]}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def format_table(report: VerifyReport) -> str:
    rows = [("check", "target", "deviation", "tolerance", "result", "time [s]")]
    for c in report.checks:
        rows.append((c.name, c.target, f"{c.deviation:.3e}", f"{c.tolerance:.1e}", "PASS" if c.passed else "FAIL", f"{c.wall_time:.2f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)) for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def emit_report(report: VerifyReport, path: str | Path | None, stream: TextIO | None = None) -> None:
    """Write the JSON report to ``path`` (if given) and a table to ``stream``."""
    if not report.checks:
        raise ParameterError("report must be non-empty")
    if path is not None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc}") from exc
    print(format_table(report), file=stream or sys.stdout)


def _timed(name: str, fn: Callable[[], Check]) -> Check:
    """Run one check; a library error becomes a failed row instead of aborting the report."""
    t0 = time.perf_counter()
    try:
        c = fn()
    except TqdiffError as exc:
        c = Check(name, "error", float("inf"), 0.0, False, details={"error": f"{type(exc).__name__}: {exc}"})
    c.wall_time = time.perf_counter() - t0
    if "time_limit" in c.details and c.wall_time > c.details["time_limit"]:
        c.passed = False
    return c


# --- individual checks ---------------------------------------------------------

UNIT = BathParams()


def check_front_law(tier: Tier) -> Check:
    """Moment ODE from zero dispersion satisfies the implicit front law."""
    c = derive(UNIT)
    lam2 = c.lambda_T**2
    ts = np.logspace(-2, 2, 100) * lam2 / c.D
    s2 = integrate_array(MomentModel("free_thermal", OscillatorParams(UNIT)), 0.0, ts)
    resid = np.abs(s2 - lam2 * np.log1p(s2 / lam2) - 2 * c.D * ts) / (1 + 2 * c.D * ts)
    dev = float(resid.max())
    return Check("front_law", "front law", dev, 1e-6, dev <= 1e-6, details={"time_limit": 1.0})


def check_asymptotes(tier: Tier) -> Check:
    """Front law against the Einstein law (long times) and the quantum sqrt law (short times)."""
    c = derive(UNIT)
    lam2 = c.lambda_T**2
    t_long = np.logspace(2, 6, 41) * lam2 / c.D
    t_short = np.logspace(-8, -4, 41) * lam2 / c.D
    long_dev = np.array([analytic.front_sigma2(analytic.FrontQuery(t, c)) / (2 * c.D * t) - 1 for t in t_long])
    short_ref = UNIT.hbar * np.sqrt(t_short / (UNIT.m * UNIT.b))
    short_dev = np.array([analytic.front_sigma2(analytic.FrontQuery(t, c)) for t in t_short]) / short_ref - 1
    dev = float(max(np.abs(long_dev).max(), np.abs(short_dev).max()))
    return Check(
        "asymptotes",
        "front law limits",
        dev,
        0.01,
        dev <= 0.01,
        details={
            "long_time_max_dev": float(np.abs(long_dev).max()),
            "long_time_dev_at_100": float(long_dev[0]),
            "short_time_max_dev": float(np.abs(short_dev).max()),
        },
    )


def check_pde_ode(tier: Tier) -> Check:
    """Free thermal PDE variance against the moment ODE."""
    p = OscillatorParams(UNIT)
    c = derive(p)
    lam2 = c.lambda_T**2
    t_end = 10 * lam2 / c.D
    ts = np.linspace(0, t_end, 21)[1:]
    r = pde.evolve(pde.gaussian_run("free_thermal", p, lam2, t_end, n=tier.pde_free_n, output_times=ts))
    ode = integrate_array(MomentModel("free_thermal", p), lam2, ts)
    dev = float(np.abs(r.sigma2 / ode - 1).max())
    drift = float(np.abs(r.mass - 1).max())
    ok = dev <= 0.01 and drift <= 1e-10 and r.min_value >= 0
    return Check(
        "pde_ode",
        "quantum Smoluchowski vs moment ODE",
        dev,
        0.01,
        ok,
        details={"mass_drift": drift, "min_density": r.min_value, "n": tier.pde_free_n, "steps": r.steps, "time_limit": 60.0},
    )


def check_classical(tier: Tier) -> Check:
    """hbar = 0 PDE run against sigma0^2 + 2 D t."""
    p = OscillatorParams(BathParams(hbar=0.0))
    ts = np.linspace(0.2, 2.0, 10)
    r = pde.evolve(pde.gaussian_run("free_thermal", p, 1.0, 2.0, n=512, output_times=ts))
    dev = float(np.abs(r.sigma2 / (1.0 + 2 * derive(p).D * ts) - 1).max())
    return Check("classical_limit", "classical diffusion", dev, 0.005, dev <= 0.005)


def check_fixed_point(tier: Tier) -> Check:
    """Oscillator ODE relaxes to the density-gradient root; that root differs from the exact one."""
    p = OscillatorParams(UNIT, 1.0)
    model = MomentModel("oscillator_thermal", p)
    t_end = 20 * p.relaxation_time
    s2 = integrate(model, 0.0, [t_end])[-1].sigma2
    root = analytic.oscillator_sigma2_dg(p)
    dev = abs(s2 / root - 1)
    exact = analytic.oscillator_sigma2_exact(p)
    ok = dev <= 1e-6 and abs(fixed_point(model) / root - 1) < 1e-12
    ok = ok and abs(root - (1 + math.sqrt(2)) / 2) < 1e-12 and abs(exact - 0.5 / math.tanh(0.5)) < 1e-12
    return Check(
        "fixed_point",
        "oscillator fixed point",
        dev,
        1e-6,
        ok,
        details={"density_gradient": root, "exact": exact, "relative_discrepancy": root / exact - 1},
    )


def check_bloch(tier: Tier) -> Check:
    """Imaginary-time oracle against the exact equilibrium dispersion."""
    devs = {}
    for x in (0.5, 1.0, 5.0):
        p = OscillatorParams(UNIT.replace(T=1.0 / x), 1.0)
        oracle = analytic.bloch_oracle_dispersion(analytic.BlochOracleSpec.for_oscillator(p, n=tier.bloch_n))
        devs[x] = abs(oracle / analytic.oscillator_sigma2_exact(p) - 1)
    dev = max(devs.values())
    return Check("bloch_oracle", "exact equilibrium dispersion", dev, 1e-3, dev <= 1e-3, details={"per_beta": devs, "time_limit": 10.0})


def check_zero_T(tier: Tier) -> Check:
    """Zero-temperature oscillator: ODE, PDE and short-time law against the closed form."""
    from scipy.optimize import brentq

    p = OscillatorParams(UNIT.replace(T=0.0), 1.0)
    tau = p.relaxation_time
    ts = np.linspace(0.02, 3.0, 60) * tau
    ode = integrate_array(MomentModel("oscillator_zero_T", p), 0.0, ts)
    ref = np.array([analytic.zero_T_oscillator_sigma2(t, p) for t in ts])
    ode_dev = float(np.abs(ode / ref - 1).max())

    # PDE: the smallest resolvable Gaussian is the closed form at a shifted time origin
    se = analytic.oscillator_sigma2_exact(p)
    grid = Grid1D.symmetric(8 * math.sqrt(se), tier.pde_zero_T_n)
    s0 = (4 * grid.dx) ** 2 * 1.0001
    shift = brentq(lambda t: analytic.zero_T_oscillator_sigma2(t, p) - s0, 0.0, 10 * tau)
    pts = np.linspace(0.05, 1.5, 30) * tau
    r = pde.evolve(pde.PdeRun("zero_T_potential", p, DensityField.gaussian(grid, s0), pts[-1], pts))
    pref = np.array([analytic.zero_T_oscillator_sigma2(t + shift, p) for t in pts])
    pde_dev = float(np.abs(r.sigma2 / pref - 1).max())

    bath = p.bath
    short = np.logspace(-7, -3, 20) * tau
    s_short = integrate_array(MomentModel("oscillator_zero_T", p), 0.0, short)
    slope_dev = float(np.abs(s_short**2 / (bath.hbar**2 * short / (bath.m * bath.b)) - 1).max())
    ok = ode_dev <= 1e-6 and pde_dev <= 0.01 and slope_dev <= 0.02
    return Check(
        "zero_T_oscillator",
        "zero-temperature oscillator",
        max(ode_dev / 1e-6, pde_dev / 0.01, slope_dev / 0.02),
        1.0,
        ok,
        details={"ode_dev": ode_dev, "pde_dev": pde_dev, "short_time_dev": slope_dev, "deviation_units": "fraction of each tolerance"},
    )


def check_effective_spring(tier: Tier) -> Check:
    devs = {}
    for beta in (0.1, 1.0, 10.0):
        p = OscillatorParams(UNIT.replace(T=1.0 / beta), 1.0)
        quad = analytic.quantum_spring_integral(p)
        closed = p.spring - analytic.effective_spring_closed(p)
        devs[beta] = abs(quad / closed - 1)
    dev = max(devs.values())
    return Check("effective_spring", "effective spring identity", dev, 1e-10, dev <= 1e-10, details={"per_beta": devs})


def check_fluctuations(tier: Tier, seed: int = 2024) -> Check:
    """Equilibrium variance, autocorrelation and spectrum of the effective oscillator."""
    p = OscillatorParams(UNIT, 1.0)
    s2e = analytic.oscillator_sigma2_exact(p)
    D = derive(p).D
    t_rel = s2e / D
    k_eff = analytic.effective_spring(p)
    common = dict(
        params=p, n_traj=tier.n_traj, t_end=100 * t_rel, force="effective_spring", record_stride=10, burn_in=10 * t_rel
    )

    over = simulate(SdeConfig(seed=seed, record_trajectories=tier.n_traj, **common))
    var_z = abs(over.var[-1] - s2e) / over.var_stderr[-1]
    ts = spectral.TimeSeries.from_trajectories(over.record_dt, over.trajectories)
    max_lag = int(math.ceil(3 * t_rel / ts.dt))
    a = spectral.acf(ts, max_lag)
    acf_cmp = spectral.compare(a.lags, a.values, analytic.autocorrelation_rr(a.lags, D, s2e), (0.0, 3 * t_rel), 0.05)
    fit = spectral.fit_exponential_rate(a.lags, a.values, a.stderr, 3 * t_rel)
    del over, ts

    under = simulate(SdeConfig(seed=seed + 1, mode="underdamped", dt=0.01, record_trajectories=tier.n_traj, **common))
    us = spectral.TimeSeries.from_trajectories(under.record_dt, under.trajectories)
    est = spectral.psd(us, 512)
    w0 = math.sqrt(k_eff / p.bath.m)
    curve = analytic.spectral_density_rr(est.omega, p.bath.b, p.bath.m, p.bath.T, s2e)
    psd_cmp = spectral.compare(est.omega, est.values, curve, (0.1 * w0, 10 * w0), 0.10)
    parseval = spectral.parseval_ratio(us, est)

    ok = var_z <= 3 and acf_cmp.passed and psd_cmp.passed
    return Check(
        "equilibrium_fluctuations",
        "effective oscillator fluctuations",
        max(var_z / 3, acf_cmp.l1 / 0.05, psd_cmp.l1 / 0.10),
        1.0,
        ok,
        details={
            "variance_z": var_z,
            "acf_l1": acf_cmp.l1,
            "psd_l1": psd_cmp.l1,
            "acf_rate": fit.rate,
            "acf_rate_expected": D / s2e,
            "acf_log_residual": fit.residual,
            "parseval_ratio": parseval,
            "n_traj": tier.n_traj,
            "deviation_units": "fraction of each tolerance",
            "time_limit": 300.0,
        },
    )


def check_meanfield(tier: Tier, seed: int = 11) -> Check:
    """Gaussian-closure ensemble against the free thermal moment ODE."""
    p = OscillatorParams(UNIT)
    c = derive(p)
    lam2 = c.lambda_T**2
    t_end = 10 * lam2 / c.D
    dt = 1e-3
    n_steps = int(round(t_end / dt))
    cfg = SdeConfig(
        p, tier.meanfield_n_traj, dt, t_end, seed, force="meanfield_quantum", record_stride=n_steps // 50, sigma2_0=lam2, moment_match=True
    )
    r = simulate(cfg)
    ref = moment_reference(cfg, r.times)
    z = np.abs(r.var[1:] - ref[1:]) / r.var_stderr[1:]
    dev = float(z.max())
    return Check("meanfield", "mean-field closure vs moment ODE", dev, 3.0, dev <= 3.0, details={"n_recorded": int(z.size)})


def check_invariants(tier: Tier, seed: int = 5) -> Check:
    """Heisenberg bound, Q normalization invariance, front-law bounds, reproducibility."""
    failures = []
    bath = UNIT
    c = derive(bath)
    lam2 = c.lambda_T**2

    # Heisenberg product on recorded ODE, PDE and SDE states
    ts = np.logspace(-3, 1, 40) * lam2 / c.D
    ode = integrate_array(MomentModel("free_thermal", OscillatorParams(bath)), 0.0, ts)
    pde_run = pde.evolve(pde.gaussian_run("free_thermal", OscillatorParams(bath), 1.0, 0.5, n=160, output_times=[0.1, 0.25, 0.5]))
    sde = simulate(SdeConfig(OscillatorParams(bath), 200, 1e-3, 0.5, seed, force="meanfield_quantum", sigma2_0=lam2, record_stride=50))
    states = np.concatenate([ode, pde_run.sigma2, sde.var])
    heis = min(heisenberg_product(s, bath) for s in states) - bath.hbar**2 / 4
    if heis < 0:
        failures.append("heisenberg")

    # quantum potential is blind to normalization
    g = Grid1D.symmetric(6.0, 257)
    P = DensityField.gaussian(g, 1.0)
    q1 = pde.quantum_potential(P, bath)
    q2 = pde.quantum_potential(DensityField(g, 7.3 * P.values), bath)
    qdev = float(np.abs(q1 - q2).max() / np.abs(q1).max())
    if qdev > 1e-12:
        failures.append("normalization")

    # front law sits above both asymptotes
    t_all = np.logspace(-8, 6, 200) * lam2 / c.D
    front = np.array([analytic.front_sigma2(analytic.FrontQuery(t, c)) for t in t_all])
    lower = np.maximum(2 * c.D * t_all, bath.hbar * np.sqrt(t_all / (bath.m * bath.b)))
    bound_gap = float(np.min(front / lower - 1))
    ode_gap = float(np.min(ode / np.maximum(2 * c.D * ts, bath.hbar * np.sqrt(ts / (bath.m * bath.b))) - 1))
    if bound_gap < -1e-12 or ode_gap < -1e-9:
        failures.append("front_bounds")

    # same seed, same bits
    cfg = SdeConfig(OscillatorParams(bath, 1.0), 300, 0.01, 2.0, seed, mode="underdamped", force="effective_spring", record_trajectories=4)
    a, b = simulate(cfg), simulate(cfg)
    same = all(
        np.array_equal(x, y) for x, y in [(a.var, b.var), (a.mean, b.mean), (a.trajectories, b.trajectories), (a.final.velocities, b.final.velocities)]
    )
    if not same:
        failures.append("reproducibility")

    return Check(
        "invariants",
        "uncertainty, normalization, bounds, replay",
        float(len(failures)),
        0.0,
        not failures,
        details={"failures": failures, "heisenberg_margin": heis, "q_scale_dev": qdev, "front_bound_gap": bound_gap, "ode_bound_gap": ode_gap},
    )


def check_residual(tier: Tier) -> Check:
    """Equilibrium residual of the density-gradient Gaussian shrinks with dx."""
    p = OscillatorParams(UNIT, 1.0)
    se = analytic.oscillator_sigma2_dg(p)
    U = PotentialSpec.harmonic(p.omega0, p.bath.m)
    g = Grid1D.symmetric(8 * math.sqrt(se), 129)
    res = []
    for _ in range(2):
        P = DensityField.normalized(g, np.exp(-g.x**2 / (2 * se)))
        res.append(pde.steady_state_residual(P, U, p))
        g = g.refined()
    ratio = res[0] / res[1]
    return Check("equilibrium_residual", "density-gradient equilibrium", ratio, 3.0, ratio >= 3.0, details={"residuals": res})


CHECKS: dict[str, Callable[[Tier], Check]] = {
    "front_law": check_front_law,
    "asymptotes": check_asymptotes,
    "pde_ode": check_pde_ode,
    "classical_limit": check_classical,
    "fixed_point": check_fixed_point,
    "bloch_oracle": check_bloch,
    "zero_T_oscillator": check_zero_T,
    "effective_spring": check_effective_spring,
    "equilibrium_fluctuations": check_fluctuations,
    "meanfield": check_meanfield,
    "invariants": check_invariants,
    "equilibrium_residual": check_residual,
}


def run_checks(tier: str = "quick", only: list[str] | None = None) -> VerifyReport:
    if tier not in TIERS:
        raise ParameterError(f"unknown tier {tier!r}")
    names = only or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ParameterError([f"unknown check {n!r}" for n in unknown])
    t = TIERS[tier]
    return VerifyReport(tier, [_timed(n, lambda fn=CHECKS[n]: fn(t)) for n in names])
