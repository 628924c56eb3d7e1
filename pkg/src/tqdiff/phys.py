"""Physical parameters and derived constants.

Reduced units (m = b = hbar = k_B = 1) are the default, but every formula in
the package takes its parameters explicitly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Any, Mapping

from .errors import DomainError, ParameterError


class Infinite(enum.Enum):
    """Tagged sentinel for quantities that diverge at T = 0."""

    INFINITE = "infinite"

    def __repr__(self) -> str:
        return "INFINITE"


INFINITE = Infinite.INFINITE


@dataclass(frozen=True)
class BathParams:
    m: float = 1.0
    b: float = 1.0
    T: float = 1.0
    hbar: float = 1.0
    kB: float = 1.0

    @property
    def kT(self) -> float:
        return self.kB * self.T

    @property
    def kappa(self) -> float:
        """hbar^2/(4 m b): the product D*lambda_T^2, finite at every T."""
        return self.hbar**2 / (4.0 * self.m * self.b)

    def replace(self, **changes: float) -> "BathParams":
        return BathParams(**{**asdict(self), **changes})


@dataclass(frozen=True)
class OscillatorParams:
    bath: BathParams = BathParams()
    omega0: float = 0.0

    @property
    def spring(self) -> float:
        """Bare spring constant m*omega0^2."""
        return self.bath.m * self.omega0**2

    @property
    def relaxation_time(self) -> float:
        """Classical overdamped relaxation time b/(m omega0^2)."""
        if self.omega0 <= 0.0:
            raise DomainError("relaxation time undefined for omega0 = 0")
        return self.bath.b / self.spring

    def replace(self, **changes: float) -> "OscillatorParams":
        bath_keys = {k: v for k, v in changes.items() if k in BathParams.__dataclass_fields__}
        omega0 = changes.get("omega0", self.omega0)
        return OscillatorParams(self.bath.replace(**bath_keys), omega0)


@dataclass(frozen=True)
class DerivedConstants:
    """D = k_B T/b, thermal de Broglie wavelength and inverse temperature.

    At T = 0, ``lambda_T`` and ``beta`` hold :data:`INFINITE` and ``D`` is 0;
    ``kappa`` (= D lambda_T^2) stays finite and is what T = 0 formulas use.
    """

    D: float
    lambda_T: float | Infinite
    beta: float | Infinite
    kappa: float

    @property
    def zero_temperature(self) -> bool:
        return self.beta is INFINITE

    @property
    def lambda_T2(self) -> float | Infinite:
        if self.lambda_T is INFINITE:
            return INFINITE
        return self.lambda_T**2

    def to_dict(self) -> dict[str, Any]:
        def enc(v):
            return v.value if isinstance(v, Infinite) else v

        return {"D": self.D, "lambda_T": enc(self.lambda_T), "beta": enc(self.beta), "kappa": self.kappa}


def validate(params: BathParams | OscillatorParams) -> list[str]:
    """Return one message per violated invariant (empty list means valid)."""
    errors = []
    bath = params.bath if isinstance(params, OscillatorParams) else params
    checks = [
        ("m", bath.m, "mass must be positive", lambda v: v > 0),
        ("b", bath.b, "friction must be positive", lambda v: v > 0),
        ("kB", bath.kB, "boltzmann constant must be positive", lambda v: v > 0),
        ("T", bath.T, "temperature must be non-negative", lambda v: v >= 0),
        ("hbar", bath.hbar, "hbar must be non-negative", lambda v: v >= 0),
    ]
    if isinstance(params, OscillatorParams):
        checks.append(("omega0", params.omega0, "omega0 must be non-negative", lambda v: v >= 0))
    for _name, value, message, ok in checks:
        if not (math.isfinite(value) and ok(value)):
            errors.append(message)
    return errors


def derive(params: BathParams | OscillatorParams) -> DerivedConstants:
    bath = params.bath if isinstance(params, OscillatorParams) else params
    errors = validate(params)
    if errors:
        raise ParameterError(errors)
    kappa = bath.kappa
    if bath.T == 0.0:
        return DerivedConstants(D=0.0, lambda_T=INFINITE, beta=INFINITE, kappa=kappa)
    kT = bath.kT
    return DerivedConstants(
        D=kT / bath.b,
        lambda_T=bath.hbar / (2.0 * math.sqrt(bath.m * kT)),
        beta=1.0 / kT,
        kappa=kappa,
    )


_KEYS = ("m", "b", "T", "hbar", "kB")


def params_from_mapping(section: Mapping[str, Any] | None) -> OscillatorParams:
    """Build parameters from a flat config section; missing keys default to 1 (omega0 to 0)."""
    section = dict(section or {})
    unknown = set(section) - set(_KEYS) - {"omega0"}
    if unknown:
        raise ParameterError([f"unknown parameter key(s): {', '.join(sorted(unknown))}"])
    try:
        bath = BathParams(**{k: float(section.get(k, 1.0)) for k in _KEYS})
        p = OscillatorParams(bath, float(section.get("omega0", 0.0)))
    except (TypeError, ValueError) as exc:
        raise ParameterError([f"non-numeric parameter: {exc}"]) from None
    errors = validate(p)
    if errors:
        raise ParameterError(errors)
    return p


def params_to_mapping(p: OscillatorParams) -> dict[str, float]:
    return {**asdict(p.bath), "omega0": p.omega0}
