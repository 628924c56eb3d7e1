"""Grid, density and the quantum Smoluchowski finite-volume solver."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from tqdiff import analytic, pde
from tqdiff.errors import NumericError, ParameterError
from tqdiff.grid import DensityField, Grid1D, PotentialSpec, variance
from tqdiff.moments import MomentModel, integrate_array
from tqdiff.phys import BathParams, OscillatorParams, derive

FREE = OscillatorParams(BathParams())
OSC = OscillatorParams(BathParams(), 1.0)
HARMONIC = PotentialSpec.harmonic(1.0)


# --- grid and density ------------------------------------------------------------


def test_grid_basics():
    g = Grid1D(-1.0, 1.0, 21)
    assert g.dx == pytest.approx(0.1)
    assert g.cell_widths().sum() == pytest.approx(2.0)
    r = g.refined()
    assert r.n == 41 and r.dx == pytest.approx(0.05)
    with pytest.raises(ParameterError):
        Grid1D(1.0, 1.0, 32)
    with pytest.raises(ParameterError):
        Grid1D(0.0, 1.0, 15)


def test_variance_examples():
    g = Grid1D.symmetric(20.0, 4001)
    assert abs(DensityField.gaussian(g, 2.0).variance() - 2.0) < 1e-6
    spike = np.zeros(g.n)
    spike[2000] = 1.0
    assert variance(DensityField.normalized(g, spike)) < 1e-12
    a = 3.0
    box = DensityField.normalized(g, (np.abs(g.x) <= a).astype(float))
    assert abs(box.variance() - a * a / 3) < 5 * g.dx


def test_unresolved_gaussian_rejected():
    g = Grid1D.symmetric(10.0, 101)
    with pytest.raises(ParameterError, match="unresolved"):
        DensityField.gaussian(g, 0.1)


def test_potential_spec():
    g = Grid1D.symmetric(2.0, 17)
    assert np.allclose(PotentialSpec.harmonic(2.0, m=0.5).on(g), g.x**2)
    assert np.all(PotentialSpec().on(g) == 0)
    with pytest.raises(ParameterError):
        PotentialSpec("tabulated", values=np.array([np.nan]))
    with pytest.raises(ParameterError):
        PotentialSpec.harmonic(-1.0)


# --- quantum potential -------------------------------------------------------------


def test_uniform_density_has_no_quantum_potential():
    g = Grid1D(0.0, 1.0, 64)
    assert np.allclose(pde.quantum_potential(DensityField.normalized(g, np.ones(g.n)), FREE), 0.0, atol=1e-9)


@given(st.floats(1e-6, 1e6))
def test_quantum_potential_ignores_normalization(c):
    g = Grid1D.symmetric(6.0, 129)
    P = DensityField.gaussian(g, 1.0)
    q1 = pde.quantum_potential(P, FREE)
    q2 = pde.quantum_potential(DensityField(g, c * P.values), FREE)
    assert np.allclose(q1, q2, rtol=1e-10, atol=1e-12)


def test_quantum_potential_of_gaussian_converges():
    errs = []
    for n in (201, 401, 801):
        g = Grid1D.symmetric(10.0, n)
        q = pde.quantum_potential(DensityField.gaussian(g, 1.0), FREE)
        errs.append(abs(q[n // 2] - 0.25))
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.9 and errs[1] / errs[2] > 3.9


def test_quantum_potential_is_finite_in_vacuum():
    g = Grid1D.symmetric(30.0, 301)
    P = DensityField.gaussian(g, 1.0)
    assert np.all(np.isfinite(pde.quantum_potential(P, FREE)))


# --- flux ---------------------------------------------------------------------------


def test_equilibrium_flux_vanishes_with_refinement():
    se = analytic.oscillator_sigma2_dg(OSC)
    g = Grid1D.symmetric(8 * math.sqrt(se), 129)
    peaks = []
    for _ in range(3):
        P = DensityField.normalized(g, np.exp(-g.x**2 / (2 * se)))
        peaks.append(np.abs(pde.flux(P, HARMONIC, OSC, "thermal_potential")).max())
        g = g.refined()
    assert peaks[0] / peaks[1] > 3 and peaks[1] / peaks[2] > 3


def test_classical_flux_is_fick():
    p = OscillatorParams(BathParams(hbar=0.0, T=2.0))
    g = Grid1D.symmetric(8.0, 161)
    P = DensityField.gaussian(g, 1.5)
    F = pde.flux(P, PotentialSpec(), p, "free_thermal")
    assert F[0] == F[-1] == 0.0
    assert np.allclose(F[1:-1], -2.0 * np.diff(P.values) / g.dx, rtol=1e-13, atol=1e-300)


@given(st.floats(0.3, 2.0), st.floats(0.5, 3.0))
def test_symmetric_density_gives_antisymmetric_flux(s2, T):
    p = OscillatorParams(BathParams(T=T), 1.0)
    g = Grid1D.symmetric(8.0, 161)
    F = pde.flux(DensityField.gaussian(g, s2), HARMONIC, p, "thermal_potential")
    assert np.allclose(F, -F[::-1], atol=1e-12 * np.abs(F).max())


# --- stepping -------------------------------------------------------------------------


def test_zero_flux_step_is_identity():
    g = Grid1D(0.0, 1.0, 64)
    P = DensityField.normalized(g, np.ones(g.n))
    out = pde.step(P, PotentialSpec(), FREE, "free_thermal", 1e-6)
    assert np.allclose(out.values, P.values, rtol=1e-12)


@given(
    st.lists(st.tuples(st.floats(-1.5, 1.5), st.floats(0.6, 1.5), st.floats(0.1, 1.0)), min_size=1, max_size=3)
)
def test_step_conserves_mass(bumps):
    g = Grid1D.symmetric(8.0, 128)
    values = sum(w * np.exp(-((g.x - c) ** 2) / (2 * s2)) for c, s2, w in bumps)
    P = DensityField.normalized(g, values)
    dt = pde.stable_dt(g, OSC, "thermal_potential", 1.0)
    out = pde.step(P, HARMONIC, OSC, "thermal_potential", dt)
    assert abs(out.mass() - P.mass()) < 1e-14
    assert np.all(out.values >= 0)


def test_heat_step_variance_growth():
    p = OscillatorParams(BathParams(hbar=0.0))
    g = Grid1D.symmetric(12.0, 1201)
    P = DensityField.gaussian(g, 1.0)
    dt = 1e-5
    out = pde.step(P, PotentialSpec(), p, "free_thermal", dt)
    assert out.variance() - P.variance() == pytest.approx(2 * dt, rel=1e-6)


def test_negative_step_is_split_not_clipped():
    p = OscillatorParams(BathParams(hbar=0.0))
    g = Grid1D.symmetric(1.0, 41)
    v = np.zeros(g.n)
    v[20] = 1.0
    P = DensityField.normalized(g, v)
    dt = 4 * g.dx**2  # eight times the explicit heat limit
    out = pde.step(P, PotentialSpec(), p, "free_thermal", dt)
    assert np.all(out.values >= 0)
    assert abs(out.mass() - 1.0) < 1e-14


def test_persistent_negativity_raises():
    p = OscillatorParams(BathParams(hbar=0.0))
    g = Grid1D.symmetric(1.0, 41)
    v = np.zeros(g.n)
    v[20] = 1.0
    with pytest.raises(NumericError, match="halvings"):
        pde.step(DensityField.normalized(g, v), PotentialSpec(), p, "free_thermal", 1e9)


@pytest.mark.parametrize("model,params", [("free_thermal", FREE), ("thermal_potential", OSC), ("zero_T_potential", OscillatorParams(BathParams(T=0.0), 1.0))])
def test_compiled_kernel_matches_reference_step(model, params):
    g = Grid1D.symmetric(6.0, 97)
    P = DensityField.gaussian(g, 0.8, center=0.3)
    U = np.zeros(g.n) if model == "free_thermal" else HARMONIC.on(g)
    dt = pde.stable_dt(g, params, model, 0.8)
    ref = pde.step(P, U, params, model, dt)
    D, inv_b = pde._model_coeffs(params, model)
    work = P.values.copy()
    done, halvings = pde._advance(work, U, g.dx, D, params.bath.hbar**2 / (2 * params.bath.m), inv_b, dt, 1, 20)
    assert (done, halvings) == (1, 0)
    assert np.allclose(work, ref.values, rtol=1e-12, atol=1e-15 * P.values.max())


def test_stable_dt_needs_dynamics():
    p = OscillatorParams(BathParams(T=0.0, hbar=0.0), 1.0)
    with pytest.raises(ParameterError):
        pde.stable_dt(Grid1D(0, 1, 32), p, "zero_T_potential", 1.0)


# --- residuals ------------------------------------------------------------------------


def test_classical_gibbs_state_has_no_residual():
    p = OscillatorParams(BathParams(hbar=0.0, T=0.7), 1.0)
    g = Grid1D.symmetric(6.0, 201)
    P = DensityField.normalized(g, np.exp(-HARMONIC.on(g) / 0.7))
    assert pde.steady_state_residual(P, HARMONIC, p) < 1e-12


def test_equilibrium_residual_discriminates():
    se = analytic.oscillator_sigma2_dg(OSC)
    g = Grid1D.symmetric(8 * math.sqrt(se), 257)
    eq = pde.steady_state_residual(DensityField.normalized(g, np.exp(-g.x**2 / (2 * se))), HARMONIC, OSC)
    shifted = pde.steady_state_residual(DensityField.normalized(g, np.exp(-((g.x - 0.5) ** 2) / (2 * se))), HARMONIC, OSC)
    assert shifted > 10 * eq


def test_ground_state_zero_T_residual():
    p = OscillatorParams(BathParams(T=0.0), 1.0)
    g = Grid1D.symmetric(6.0, 401)
    res = [pde.zero_T_residual(DensityField.gaussian(g, 0.5), HARMONIC, p) for g in (g, g.refined())]
    assert res[1] < 0.01 and res[0] / res[1] > 3.5
    assert pde.zero_T_residual(DensityField.gaussian(g, 1.0), HARMONIC, p) > 0.5


# --- runs -----------------------------------------------------------------------------


def test_run_validation():
    g = Grid1D.symmetric(5.0, 64)
    P = DensityField.gaussian(g, 1.0)
    with pytest.raises(ParameterError):
        pde.PdeRun("zero_T_potential", OSC, P, 1.0)
    with pytest.raises(ParameterError):
        pde.PdeRun("thermal_potential", OscillatorParams(BathParams(T=0.0), 1.0), P, 1.0)
    with pytest.raises(ParameterError):
        pde.PdeRun("free_thermal", FREE, P, 1.0, courant=1.5)
    with pytest.raises(ParameterError):
        pde.PdeRun("free_thermal", FREE, P, 1.0, output_times=(0.5, 0.2))
    with pytest.raises(ParameterError):
        pde.PdeRun("free_thermal", FREE, DensityField(g, 2 * P.values), 1.0)


def test_boundary_monitor():
    p = OscillatorParams(BathParams(hbar=0.0))
    g = Grid1D.symmetric(8.0, 129)
    run = pde.PdeRun("free_thermal", p, DensityField.gaussian(g, 1.0), 20.0)
    with pytest.raises(NumericError, match="edge"):
        pde.evolve(run)


def test_classical_run_is_einstein():
    p = OscillatorParams(BathParams(hbar=0.0))
    ts = np.linspace(0.25, 1.0, 4)
    r = pde.evolve(pde.gaussian_run("free_thermal", p, 1.0, 1.0, n=256, output_times=ts))
    assert np.allclose(r.sigma2, 1.0 + 2 * ts, rtol=5e-3)
    assert np.all(np.abs(r.mass - 1) < 1e-10)


def test_quantum_spreads_faster_than_classical():
    ts = np.linspace(0.1, 1.0, 5)
    hw = 8 * math.sqrt(1.0 + 3.0)
    q = pde.evolve(pde.gaussian_run("free_thermal", FREE, 1.0, 1.0, n=200, half_width=hw, output_times=ts))
    c = pde.evolve(pde.gaussian_run("free_thermal", OscillatorParams(BathParams(hbar=0.0)), 1.0, 1.0, n=200, half_width=hw, output_times=ts))
    assert np.all(q.sigma2 > c.sigma2)
    assert np.all(q.sigma2 - 1.0 >= 2 * derive(FREE).D * ts)


def test_grid_convergence_against_moment_ode():
    lam2 = 1.0
    t_end = 0.5
    hw = 8 * math.sqrt(lam2 + analytic.front_sigma2(analytic.FrontQuery(t_end, derive(FREE))))
    ode = integrate_array(MomentModel("free_thermal", FREE), lam2, [t_end])[0]
    errs = []
    for n in (129, 257):
        g = Grid1D.symmetric(hw, n)
        r = pde.evolve(pde.PdeRun("free_thermal", FREE, DensityField.gaussian(g, lam2), t_end))
        assert r.min_value >= 0
        errs.append(abs(r.sigma2[-1] - ode))
    assert errs[0] / errs[1] >= 3


def test_zero_T_run_tracks_shifted_closed_form():
    from scipy.optimize import brentq

    p = OscillatorParams(BathParams(T=0.0), 1.0)
    g = Grid1D.symmetric(8 * math.sqrt(0.5), 128)
    s0 = (4 * g.dx) ** 2 * 1.0001
    shift = brentq(lambda t: analytic.zero_T_oscillator_sigma2(t, p) - s0, 0, 10)
    ts = np.linspace(0.1, 1.0, 10)
    r = pde.evolve(pde.PdeRun("zero_T_potential", p, DensityField.gaussian(g, s0), 1.0, ts))
    ref = np.array([analytic.zero_T_oscillator_sigma2(t + shift, p) for t in ts])
    assert np.max(np.abs(r.sigma2 / ref - 1)) < 0.01
    # the uncertainty product is saturated at T = 0 and never undercut
    assert np.all(p.bath.m * p.bath.kT * r.sigma2 + p.bath.hbar**2 / 4 >= p.bath.hbar**2 / 4)
