"""Uniform 1-D grids, sampled densities and external potentials."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.integrate import trapezoid

from .errors import ParameterError


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ParameterError("grid requires x_max > x_min")
        if self.n < 16:
            raise ParameterError("grid requires at least 16 points")

    @classmethod
    def symmetric(cls, half_width: float, n: int, center: float = 0.0) -> "Grid1D":
        return cls(center - half_width, center + half_width, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    def cell_widths(self) -> np.ndarray:
        """Trapezoid weights: dx inside, dx/2 at the two end points."""
        w = np.full(self.n, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def refined(self) -> "Grid1D":
        """Same domain with dx halved."""
        return Grid1D(self.x_min, self.x_max, 2 * self.n - 1)


@dataclass(frozen=True)
class DensityField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ParameterError(f"density has shape {v.shape}, grid has {self.grid.n} points")
        object.__setattr__(self, "values", v)

    @classmethod
    def gaussian(cls, grid: Grid1D, sigma2: float, center: float = 0.0) -> "DensityField":
        if sigma2 < (4 * grid.dx) ** 2:
            raise ParameterError(
                f"initial variance {sigma2:g} unresolved; need sigma2 >= (4 dx)^2 = {(4 * grid.dx) ** 2:g}"
            )
        x = grid.x
        return cls.normalized(grid, np.exp(-((x - center) ** 2) / (2.0 * sigma2)))

    @classmethod
    def normalized(cls, grid: Grid1D, values) -> "DensityField":
        v = np.asarray(values, dtype=float)
        return cls(grid, v / trapezoid(v, dx=grid.dx))

    def mass(self) -> float:
        return float(np.dot(self.grid.cell_widths(), self.values))

    def mean(self) -> float:
        w = self.grid.cell_widths() * self.values
        return float(np.dot(w, self.grid.x) / w.sum())

    def variance(self) -> float:
        return variance(self)


def variance(P: DensityField) -> float:
    """Trapezoidal second central moment of a sampled density."""
    x = P.grid.x
    w = P.grid.cell_widths() * P.values
    norm = w.sum()
    mu = np.dot(w, x) / norm
    return float(np.dot(w, (x - mu) ** 2) / norm)


@dataclass(frozen=True)
class PotentialSpec:
    """External potential U(x): none, harmonic m w0^2 x^2/2, or tabulated values."""

    kind: Literal["none", "harmonic", "tabulated"] = "none"
    omega0: float = 0.0
    m: float = 1.0
    center: float = 0.0
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("none", "harmonic", "tabulated"):
            raise ParameterError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and self.omega0 < 0:
            raise ParameterError("harmonic potential requires omega0 >= 0")
        if self.kind == "tabulated":
            if self.values is None or not np.all(np.isfinite(self.values)):
                raise ParameterError("tabulated potential requires finite values")

    @classmethod
    def harmonic(cls, omega0: float, m: float = 1.0, center: float = 0.0) -> "PotentialSpec":
        return cls("harmonic", omega0=omega0, m=m, center=center)

    def on(self, grid: Grid1D) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(grid.n)
        if self.kind == "harmonic":
            return 0.5 * self.m * self.omega0**2 * (grid.x - self.center) ** 2
        v = np.asarray(self.values, dtype=float)
        if v.shape != (grid.n,):
            raise ParameterError("tabulated potential does not match grid")
        return v
