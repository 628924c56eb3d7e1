"""Closed forms, quadrature and the imaginary-time oracle.

Reference constants were evaluated independently at 30 digits with mpmath.
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tqdiff import analytic
from tqdiff.analytic import FrontQuery
from tqdiff.errors import DomainError
from tqdiff.phys import BathParams, OscillatorParams, derive

ONE_MINUS_LN2 = 0.306852819440054691
SIGMA2_DG_UNIT = 1.20710678118654752
SIGMA2_EXACT_UNIT = 1.08197670686932642
K_EFF_UNIT = 0.924234314520019800
ZERO_T_AT_LN2_4 = 0.353553390593273762
# k_B T * integral_0^beta hbar^2/(4 m sigma_e^4) at beta = 0.1, 1, 10 (m = w0 = hbar = 1)
SPRING_INTEGRAL = {0.1: 8.325008424005561e-4, 1.0: 0.0757656854799805, 10.0: 0.800018159147481}


def unit_front(t, **bath):
    return analytic.front_sigma2(FrontQuery(t, derive(BathParams(**bath))))


def test_einstein_msd():
    assert analytic.einstein_msd(3, 1) == 6
    assert analytic.einstein_msd(5, 0) == 0
    assert analytic.einstein_msd(0, 2) == 0


def test_front_lhs_examples():
    assert analytic.front_lhs(0.0, 0.7) == 0.0
    assert analytic.front_lhs(2.0, 0.0) == 2.0
    assert math.isclose(analytic.front_lhs(1.0, 1.0), ONE_MINUS_LN2, rel_tol=1e-14)


def test_front_lhs_small_argument_accuracy():
    # x - log1p(x) ~ x^2/2 - x^3/3; naive subtraction loses every digit here
    assert math.isclose(analytic.front_lhs(1e-9, 1.0), 0.5e-18 - 1e-27 / 3, rel_tol=1e-12)


def test_front_sigma2_examples():
    assert unit_front(0.0) == 0.0
    assert unit_front(3.0, hbar=0.0) == 6.0
    # lambda_T = 1 with D = 1: hbar = 2 in reduced units
    assert math.isclose(unit_front(ONE_MINUS_LN2 / 2, hbar=2.0), 1.0, rel_tol=1e-12)


def test_front_sigma2_zero_temperature_is_sqrt_law():
    assert unit_front(4.0, T=0.0) == 2.0
    assert analytic.zero_T_free_sigma2(4, 1, 1, 1) == 2
    assert analytic.zero_T_free_sigma2(0, 1, 1, 1) == 0
    assert analytic.zero_T_free_sigma2(1, 2, 1, 4) == 1


def test_front_inverse_on_log_grid():
    c = derive(BathParams())
    lam = c.lambda_T
    for t in np.logspace(-10, 8, 100):
        s2 = analytic.front_sigma2(FrontQuery(t, c))
        assert abs(analytic.front_lhs(s2, lam) - 2 * c.D * t) <= 1e-12 * (1 + 2 * c.D * t)


@given(st.floats(1e-9, 1e7), st.floats(0.05, 20), st.floats(0.05, 5))
def test_front_bounds(t, T, hbar):
    bath = BathParams(T=T, hbar=hbar)
    c = derive(bath)
    s2 = analytic.front_sigma2(FrontQuery(t, c))
    assert s2 >= 2 * c.D * t * (1 - 1e-12)
    assert s2 >= hbar * math.sqrt(t) * (1 - 1e-12)


@given(st.floats(0, 1e4), st.floats(1e-3, 10))
def test_front_lhs_monotone(s2, lam):
    assert analytic.front_lhs(s2 * 1.001 + 1e-9, lam) > analytic.front_lhs(s2, lam)


def test_front_query_rejects_negative_time():
    with pytest.raises(ValueError):
        FrontQuery(-1.0, derive(BathParams()))


def test_density_gradient_equilibrium(unit_oscillator):
    assert math.isclose(analytic.oscillator_sigma2_dg(unit_oscillator), SIGMA2_DG_UNIT, rel_tol=1e-14)
    classical = OscillatorParams(BathParams(T=2.0, hbar=0.0), 1.5)
    assert math.isclose(analytic.oscillator_sigma2_dg(classical), 2.0 / 1.5**2, rel_tol=1e-14)
    cold = OscillatorParams(BathParams(T=1e-6), 1.0)
    assert math.isclose(analytic.oscillator_sigma2_dg(cold), 0.5, rel_tol=1e-5)
    with pytest.raises(DomainError):
        analytic.oscillator_sigma2_dg(OscillatorParams(BathParams(T=0.0), 1.0))
    with pytest.raises(DomainError):
        analytic.oscillator_sigma2_dg(OscillatorParams(BathParams(), 0.0))


def test_exact_equilibrium(unit_oscillator):
    assert math.isclose(analytic.oscillator_sigma2_exact(unit_oscillator), SIGMA2_EXACT_UNIT, rel_tol=1e-14)
    assert analytic.oscillator_sigma2_exact(OscillatorParams(BathParams(T=0.0), 2.0)) == 0.25
    hot = OscillatorParams(BathParams(T=1e6), 1.0)
    assert math.isclose(analytic.oscillator_sigma2_exact(hot), 1e6, rel_tol=1e-9)
    with pytest.raises(DomainError):
        analytic.oscillator_sigma2_exact(OscillatorParams(BathParams(T=0.0), 0.0))


def test_coth_small_argument():
    x = 1e-10
    assert math.isclose(analytic.coth_half(x), 2 / x + x / 6, rel_tol=1e-14)


@given(st.floats(1e-3, 1e3))
def test_equilibria_ordered_and_agree_in_limits(T):
    p = OscillatorParams(BathParams(T=T), 1.0)
    dg, ex = analytic.oscillator_sigma2_dg(p), analytic.oscillator_sigma2_exact(p)
    # both lie between the ground state and classical equipartition + zero point
    assert dg >= ex * (1 - 1e-12)
    x = 1.0 / T
    if x < 1e-2 or x > 1e2:
        assert abs(dg / ex - 1) < 0.01


def test_equilibria_differ_at_intermediate_temperature(unit_oscillator):
    dg = analytic.oscillator_sigma2_dg(unit_oscillator)
    ex = analytic.oscillator_sigma2_exact(unit_oscillator)
    assert dg / ex - 1 > 0.1


def test_zero_temperature_oscillator():
    p = OscillatorParams(BathParams(T=0.0), 1.0)
    assert analytic.zero_T_oscillator_sigma2(0.0, p) == 0.0
    assert math.isclose(analytic.zero_T_oscillator_sigma2(math.log(2) / 4, p), ZERO_T_AT_LN2_4, rel_tol=1e-14)
    assert math.isclose(analytic.zero_T_oscillator_sigma2(100.0, p), 0.5, rel_tol=1e-15)


@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
def test_spring_integral_against_oracle(beta):
    p = OscillatorParams(BathParams(T=1 / beta), 1.0)
    assert math.isclose(analytic.quantum_spring_integral(p), SPRING_INTEGRAL[beta], rel_tol=1e-12)
    assert math.isclose(analytic.effective_spring(p), analytic.effective_spring_closed(p), rel_tol=1e-10)


def test_effective_spring_examples(unit_oscillator):
    assert math.isclose(analytic.effective_spring(unit_oscillator), K_EFF_UNIT, rel_tol=1e-12)
    assert math.isclose(K_EFF_UNIT, math.tanh(0.5) / 0.5, rel_tol=1e-15)
    hot = OscillatorParams(BathParams(T=1e4), 1.0)
    assert math.isclose(analytic.effective_spring(hot), 1.0, rel_tol=1e-8)
    assert analytic.effective_spring(OscillatorParams(BathParams(T=0.0), 1.0)) == 0.0


@given(st.floats(1e-2, 1e2), st.floats(0.2, 5.0))
def test_effective_spring_weaker_than_bare(T, w):
    p = OscillatorParams(BathParams(T=T), w)
    k = analytic.effective_spring(p)
    assert 0 < k < p.spring
    # the quantum correlation time exceeds the classical relaxation time
    assert analytic.oscillator_sigma2_exact(p) / derive(p).D > p.relaxation_time


def test_gauss_legendre_polynomial_exact():
    val, err = analytic.integrate_gl(lambda x: x**7 - 3 * x**2, -1.0, 2.0)
    assert math.isclose(val, (2**8 - 1) / 8 - (8 + 1), rel_tol=1e-14)


def test_free_energy_factor_limits():
    assert analytic.free_energy_factor(OscillatorParams(BathParams(T=0.0), 1.0)) == 1.0
    assert math.isclose(analytic.free_energy_factor(OscillatorParams(BathParams(T=1e-3), 1.0)), 1.0, rel_tol=1e-2)
    assert math.isclose(analytic.free_energy_factor(OscillatorParams(BathParams(T=1e4), 1.0)), 1 / 3, rel_tol=1e-6)


def test_quantum_free_energy_gradient_matches_spring(unit_oscillator):
    # F_Q is quadratic with curvature -(quantum spring integral)
    x = np.array([-1.0, 0.0, 1.0])
    f = analytic.quantum_free_energy(x, unit_oscillator)
    curvature = f[0] + f[2] - 2 * f[1]
    assert math.isclose(-curvature, analytic.quantum_spring_integral(unit_oscillator), rel_tol=1e-12)


def test_spectral_density_examples():
    s = analytic.spectral_density_rr(0.0, b=1.0, m=1.0, T=1.0, sigma2_e=SIGMA2_EXACT_UNIT)
    assert math.isclose(s, 2 * SIGMA2_EXACT_UNIT**2, rel_tol=1e-14)
    assert analytic.spectral_density_rr(0.0, b=1.0, m=0.0, T=1.0, sigma2_e=1.0) == 2.0
    w = 1e4
    tail = analytic.spectral_density_rr(w, b=1.0, m=1.0, T=1.0, sigma2_e=1.0)
    assert math.isclose(tail, 2.0 / w**4, rel_tol=1e-6)


def test_spectral_density_parseval():
    from scipy.integrate import quad

    s2 = SIGMA2_EXACT_UNIT
    total, _ = quad(lambda w: analytic.spectral_density_rr(w, 1.0, 1.0, 1.0, s2), -np.inf, np.inf)
    assert math.isclose(total / (2 * math.pi), s2, rel_tol=1e-8)


def test_autocorrelation_examples():
    assert analytic.autocorrelation_rr(0.0, 1.0, 2.0) == 2.0
    assert math.isclose(analytic.autocorrelation_rr(2.0, 1.0, 2.0), 2.0 / math.e, rel_tol=1e-15)
    cold = np.asarray(analytic.autocorrelation_rr(np.linspace(0, 50, 6), 0.0, 0.5))
    assert np.all(cold == 0.5)


@pytest.mark.parametrize("x", [0.5, 1.0, 5.0])
def test_bloch_oracle_matches_exact(x):
    p = OscillatorParams(BathParams(T=1 / x), 1.0)
    spec = analytic.BlochOracleSpec.for_oscillator(p, n=512)
    assert spec.matrix_size == 512
    assert abs(analytic.bloch_oracle_dispersion(spec) / analytic.oscillator_sigma2_exact(p) - 1) < 1e-3


def test_bloch_oracle_fixed_window_example(unit_oscillator):
    from tqdiff.grid import Grid1D, PotentialSpec

    spec = analytic.BlochOracleSpec(Grid1D(-10.0, 10.0, 512), PotentialSpec.harmonic(1.0), beta=1.0)
    assert abs(analytic.bloch_oracle_dispersion(spec) / SIGMA2_EXACT_UNIT - 1) < 1e-3


def test_bloch_oracle_limits():
    cold = OscillatorParams(BathParams(T=1 / 40), 1.0)
    assert abs(analytic.bloch_oracle_dispersion(analytic.BlochOracleSpec.for_oscillator(cold)) / 0.5 - 1) < 1e-3
    hot = OscillatorParams(BathParams(T=1.0, hbar=0.02), 1.0)
    assert abs(analytic.bloch_oracle_dispersion(analytic.BlochOracleSpec.for_oscillator(hot, n=1024)) / 1.0 - 1) < 1e-3


def test_bloch_oracle_converges_quadratically(unit_oscillator):
    from tqdiff.grid import Grid1D, PotentialSpec

    exact = SIGMA2_EXACT_UNIT
    errs = []
    for n in (65, 129, 257):
        spec = analytic.BlochOracleSpec(Grid1D(-10.0, 10.0, n), PotentialSpec.harmonic(1.0), beta=1.0)
        errs.append(abs(analytic.bloch_oracle_dispersion(spec) - exact))
    assert errs[0] / errs[1] >= 4 * 0.99 and errs[1] / errs[2] >= 4 * 0.99


def test_bloch_oracle_detects_leakage(unit_oscillator):
    from tqdiff.grid import Grid1D, PotentialSpec

    spec = analytic.BlochOracleSpec(Grid1D(-2.0, 2.0, 128), PotentialSpec.harmonic(1.0), beta=1.0)
    with pytest.raises(DomainError, match="wider"):
        analytic.bloch_density(spec)
