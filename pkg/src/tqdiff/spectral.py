"""Autocorrelation and power-spectrum estimators for sampled trajectories.

Samples may be a single series (1-D) or a stack of independent realizations
(2-D, one per row).  Stacks are treated as one ensemble: the pooled mean is
removed and estimates are averaged over rows.

Frequencies are angular, omega = 2 pi f, and spectra are two-sided with the
normalization  integral S(omega) d omega / (2 pi) = variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ParameterError

MIN_SPECTRAL_LENGTH = 256


@dataclass(frozen=True)
class TimeSeries:
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim not in (1, 2):
            raise ParameterError("samples must be 1-D or 2-D (one realization per row)")
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        object.__setattr__(self, "samples", s)

    @property
    def rows(self) -> np.ndarray:
        return self.samples if self.samples.ndim == 2 else self.samples[None, :]

    @property
    def length(self) -> int:
        return self.samples.shape[-1]

    @classmethod
    def from_trajectories(cls, dt: float, trajectories: np.ndarray) -> "TimeSeries":
        """Recorded (n_times, n_traj) positions to one row per trajectory."""
        return cls(dt, np.ascontiguousarray(np.asarray(trajectories).T))


@dataclass(frozen=True)
class AcfEstimate:
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray


@dataclass(frozen=True)
class PsdEstimate:
    omega: np.ndarray
    values: np.ndarray
    n_segments: int
    total_power: float  # sum over all two-sided bins times df


def _acf_rows(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocovariance of each row via FFT: sum_t x_t x_{t+k} / L."""
    L = x.shape[-1]
    nfft = 1 << (2 * L - 1).bit_length()
    f = np.fft.rfft(x, nfft, axis=-1)
    c = np.fft.irfft(f * np.conj(f), nfft, axis=-1)[..., : max_lag + 1]
    return c / L


def acf(ts: TimeSeries, max_lag: int, n_batches: int = 8) -> AcfEstimate:
    """Biased, mean-removed autocovariance with batch-means standard errors.

    Batches are groups of rows when there are at least ``n_batches`` rows,
    otherwise contiguous blocks of a single series.
    """
    if n_batches < 8:
        raise ParameterError("at least 8 batches are needed for a standard error")
    if not 0 <= max_lag <= ts.length // 4:
        raise ParameterError(f"max_lag must lie in [0, length/4] = [0, {ts.length // 4}]")
    x = ts.rows - ts.rows.mean()
    if x.shape[0] >= n_batches:
        per_row = _acf_rows(x, max_lag)
        groups = np.array_split(per_row, n_batches, axis=0)
        batch = np.array([g.mean(axis=0) for g in groups])
        values = per_row.mean(axis=0)
    else:
        if x.shape[0] != 1:
            raise ParameterError(f"need one series or at least {n_batches} series")
        L = x.shape[1] // n_batches
        if L <= max_lag:
            raise ParameterError("series too short for the requested lag and batch count")
        blocks = x[0, : L * n_batches].reshape(n_batches, L)
        blocks = blocks - blocks.mean(axis=1, keepdims=True)
        batch = _acf_rows(blocks, max_lag)
        values = _acf_rows(x, max_lag)[0]
    stderr = batch.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return AcfEstimate(np.arange(max_lag + 1) * ts.dt, values, stderr)


def psd(ts: TimeSeries, segment_len: int, overlap: float = 0.5) -> PsdEstimate:
    """Welch estimate with a Hann window, averaged over segments and rows.

    White noise of two-sided density S (sample variance S/dt) gives a flat estimate S.
    """
    if not 0 <= overlap <= 0.9:
        raise ParameterError("overlap must lie in [0, 0.9]")
    if ts.length < MIN_SPECTRAL_LENGTH:
        raise ParameterError(f"spectral estimation needs at least {MIN_SPECTRAL_LENGTH} samples")
    if not 8 <= segment_len <= ts.length:
        raise ParameterError("segment_len must lie in [8, length]")
    noverlap = int(overlap * segment_len)
    x = ts.rows - ts.rows.mean()
    fs = 1.0 / ts.dt
    f, pxx = signal.welch(
        x,
        fs=fs,
        window="hann",
        nperseg=segment_len,
        noverlap=noverlap,
        detrend=False,
        return_onesided=False,
        scaling="density",
        axis=-1,
    )
    pxx = pxx.mean(axis=0)
    total = float(pxx.sum() * fs / segment_len)
    n_seg = x.shape[0] * (1 + (ts.length - segment_len) // (segment_len - noverlap))
    keep = f >= 0
    order = np.argsort(f[keep])
    # density in per-Hz units: integral pxx df = var = integral S d omega / (2 pi), so S = pxx
    return PsdEstimate(2.0 * math.pi * f[keep][order], pxx[keep][order], n_seg, total)


def parseval_ratio(ts: TimeSeries, est: PsdEstimate) -> float:
    """Integrated two-sided estimate over the sample variance; near 1 for a stationary series."""
    return est.total_power / float(np.var(ts.rows - ts.rows.mean()))


@dataclass(frozen=True)
class Comparison:
    l1: float
    max_pointwise: float
    n_points: int
    tolerance: float = float("inf")

    @property
    def passed(self) -> bool:
        return self.l1 <= self.tolerance


def compare(x, estimate, curve, band: tuple[float, float], tolerance: float = float("inf")) -> Comparison:
    """Band-averaged relative deviation sum|est - curve| / sum|curve| over x in ``band``.

    ``max_pointwise`` is reported alongside; only the band average decides ``passed``.
    """
    x = np.asarray(x, dtype=float)
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(curve(x) if callable(curve) else curve, dtype=float)
    mask = (x >= band[0]) & (x <= band[1])
    if not mask.any():
        raise ParameterError(f"no samples inside band {band}")
    d = np.abs(est[mask] - ref[mask])
    denom = np.abs(ref[mask]).sum()
    if denom == 0:
        raise ParameterError("reference curve vanishes on the band")
    rel = d / np.maximum(np.abs(ref[mask]), np.finfo(float).tiny)
    return Comparison(float(d.sum() / denom), float(rel.max()), int(mask.sum()), tolerance)


@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    amplitude: float
    residual: float  # rms of log C - fit over the fitted points


def fit_exponential_rate(lags, values, stderr=None, max_lag: float | None = None) -> ExponentialFit:
    """Weighted least-squares fit of log C = log C0 - rate * tau.

    Points with non-positive C are dropped; weights are
    (C/stderr)^2 when errors are given.
    """
    lags = np.asarray(lags, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = values > 0
    if max_lag is not None:
        mask &= lags <= max_lag
    if mask.sum() < 2:
        raise ParameterError("fewer than two positive points to fit")
    y = np.log(values[mask])
    w = None
    if stderr is not None:
        se = np.asarray(stderr, dtype=float)[mask]
        w = np.where(se > 0, values[mask] / np.where(se > 0, se, 1.0), 1.0)
    slope, intercept = np.polyfit(lags[mask], y, 1, w=w)
    resid = y - (intercept + slope * lags[mask])
    return ExponentialFit(float(-slope), float(math.exp(intercept)), float(np.sqrt(np.mean(resid**2))))
