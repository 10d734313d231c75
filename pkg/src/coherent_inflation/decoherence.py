"""Position-localisation decoherence (PLD) sources.

Every source reduces to a rate ``gamma`` (Hz), a localisation parameter
``lambda_loc`` (Hz/m^2) and the saturation length ``sqrt(gamma/lambda_loc)``
beyond which separations decohere at the full rate.  Sources that only ever act
in the long-wavelength (quadratic) regime carry ``gamma = 0`` and an infinite
saturation length.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from .errors import DomainError
from .quantities import (
    AMU,
    C_LIGHT,
    G_NEWTON,
    HBAR,
    K_B,
    LENGTH,
    LOCALIZATION,
    MASS,
    PSD,
    RATE,
    Quantity,
    si,
    sphere_mass,
)

AIR_MASS_AMU = 28.97

# Blackbody-scattering prefactor, read as 8! * 8 * zeta(9).
BLACKBODY_SCATTER_PREFACTOR = math.factorial(8) * 8 * float(zeta(9))

# Geometric factor of the gas-scattering rate 16 pi sqrt(2 pi) / sqrt(3).
AIR_RATE_PREFACTOR = 16.0 * math.pi * math.sqrt(2.0 * math.pi) / math.sqrt(3.0)


class SourceKind(enum.Enum):
    AIR_SCATTERING = "air"
    BLACKBODY_SCATTERING = "bb-scatter"
    BLACKBODY_EMIT_ABSORB = "bb-emit-absorb"
    VIBRATION = "vibration"
    GRAVITY = "gravity"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PldSource:
    """A (gamma, Lambda, lambda) triple in SI units."""

    kind: SourceKind
    gamma: float
    lambda_loc: float
    saturation_length: float

    def __post_init__(self):
        if self.gamma < 0 or self.lambda_loc < 0:
            raise DomainError("gamma and lambda_loc must be non-negative")

    @property
    def long_wavelength_only(self) -> bool:
        return math.isinf(self.saturation_length)

    def quantity(self, name: str) -> Quantity:
        dims = {"gamma": RATE, "lambda_loc": LOCALIZATION, "saturation_length": LENGTH}
        return Quantity(getattr(self, name), dims[name])

    @classmethod
    def custom(cls, gamma: float = 0.0, lambda_loc: float = 0.0) -> "PldSource":
        return _from_pair(SourceKind.CUSTOM, gamma, lambda_loc)


def _from_pair(kind, gamma, lambda_loc) -> PldSource:
    if gamma > 0 and lambda_loc > 0:
        sat = math.sqrt(gamma / lambda_loc)
    elif gamma == 0:
        sat = math.inf
    else:
        sat = 0.0
    return PldSource(kind, gamma, lambda_loc, sat)


def _from_lambda_and_length(kind, lambda_loc, sat) -> PldSource:
    return PldSource(kind, lambda_loc * sat * sat, lambda_loc, sat)


@dataclass(frozen=True)
class Sphere:
    """Homogeneous sphere; radius in m, density in kg/m^3."""

    radius: float
    density: float

    def __post_init__(self):
        if not (self.radius > 0 and self.density > 0):
            raise DomainError("sphere needs radius > 0 and density > 0")

    @property
    def mass(self) -> float:
        return sphere_mass(self.radius, self.density).value


@dataclass(frozen=True)
class Environment:
    """Environmental parameters, all SI.

    ``chi_real``/``chi_imag`` are Re/Im of (eps - 1)/(eps + 2) at the thermal
    frequency; ``vibration_psd`` is S_xx at the inverted-potential frequency.
    """

    temperature: float
    pressure: float = 0.0
    gas_mass: float = AIR_MASS_AMU * AMU
    chi_real: float = 1.0
    chi_imag: float = 1.0
    vibration_psd: float = 0.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError("temperature must be positive")
        if self.pressure < 0 or self.vibration_psd < 0:
            raise DomainError("pressure and vibration_psd must be non-negative")
        if not self.gas_mass > 0:
            raise DomainError("gas_mass must be positive")

    @classmethod
    def from_units(
        cls,
        temperature_K: float,
        pressure_mbar: float = 0.0,
        gas_mass_amu: float = AIR_MASS_AMU,
        chi_real: float = 1.0,
        chi_imag: float = 1.0,
        vibration_psd_m2_per_Hz: float = 0.0,
    ) -> "Environment":
        return cls(
            temperature=temperature_K,
            pressure=pressure_mbar * 100.0,
            gas_mass=gas_mass_amu * AMU,
            chi_real=chi_real,
            chi_imag=chi_imag,
            vibration_psd=vibration_psd_m2_per_Hz,
        )


def decoherence_function(source: PldSource, x):
    """Gamma(x) = gamma (1 - exp(-Lambda x^2 / gamma)); Lambda x^2 when gamma = 0."""
    x = np.asarray(si(x, LENGTH, "x"), dtype=float)
    quad = source.lambda_loc * x * x
    if source.gamma == 0:
        val = quad
    else:
        val = -source.gamma * np.expm1(-quad / source.gamma)
    return Quantity(val if val.ndim else float(val), RATE)


def thermal_wavelength_photon(temperature: float) -> float:
    """pi^(2/3) hbar c / (k_B T)."""
    return math.pi ** (2.0 / 3.0) * HBAR * C_LIGHT / (K_B * temperature)


def mean_gas_speed(env: Environment) -> float:
    """Maxwell-Boltzmann mean speed sqrt(8 k_B T / (pi m))."""
    return math.sqrt(8.0 * K_B * env.temperature / (math.pi * env.gas_mass))


def air_scattering(env: Environment, radius) -> PldSource:
    r = si(radius, LENGTH, "radius")
    if not r > 0:
        raise DomainError("radius must be positive")
    sat = 2.0 * math.pi * HBAR / math.sqrt(2.0 * math.pi * env.gas_mass * K_B * env.temperature)
    gamma = AIR_RATE_PREFACTOR * env.pressure * r * r / (mean_gas_speed(env) * env.gas_mass)
    return PldSource(SourceKind.AIR_SCATTERING, gamma, gamma / sat**2, sat)


def blackbody_scattering(env: Environment, radius) -> PldSource:
    r = si(radius, LENGTH, "radius")
    if not r > 0:
        raise DomainError("radius must be positive")
    kT = K_B * env.temperature / (HBAR * C_LIGHT)  # thermal wavenumber
    lam = BLACKBODY_SCATTER_PREFACTOR * C_LIGHT * r**6 * kT**9 * env.chi_real**2 / (9.0 * math.pi)
    return _from_lambda_and_length(
        SourceKind.BLACKBODY_SCATTERING, lam, thermal_wavelength_photon(env.temperature)
    )


def blackbody_emit_absorb(env: Environment, radius) -> PldSource:
    # bulk temperature taken equal to the environment temperature
    r = si(radius, LENGTH, "radius")
    if not r > 0:
        raise DomainError("radius must be positive")
    kT = K_B * env.temperature / (HBAR * C_LIGHT)
    lam = 16.0 * math.pi**5 * C_LIGHT * r**3 * kT**6 * env.chi_imag / 189.0
    return _from_lambda_and_length(
        SourceKind.BLACKBODY_EMIT_ABSORB, lam, thermal_wavelength_photon(env.temperature)
    )


def vibration_source(mass, frequency, psd) -> PldSource:
    """Vibrations of the potential centre: Lambda = M^2 w^4 S_xx / (2 hbar^2), LW only."""
    m = si(mass, MASS, "mass")
    w = si(frequency, RATE, "frequency")
    s = si(psd, PSD, "psd")
    if m < 0 or w < 0 or s < 0:
        raise DomainError("vibration_source inputs must be non-negative")
    lam = m * m * w**4 * s / (2.0 * HBAR**2)
    return PldSource(SourceKind.VIBRATION, 0.0, lam, math.inf)


def gravity_source(mass, radius) -> PldSource:
    """Gravitationally induced decoherence of a homogeneous sphere: Lambda = G M^2 / (2 hbar R^3), lambda = R."""
    m = si(mass, MASS, "mass")
    r = si(radius, LENGTH, "radius")
    if not (m > 0 and r > 0):
        raise DomainError("gravity_source needs mass > 0 and radius > 0")
    lam = G_NEWTON * m * m / (2.0 * HBAR * r**3)
    return _from_lambda_and_length(SourceKind.GRAVITY, lam, r)


def environmental_sources(env: Environment, radius) -> list:
    return [
        air_scattering(env, radius),
        blackbody_scattering(env, radius),
        blackbody_emit_absorb(env, radius),
    ]


@dataclass(frozen=True)
class SourceClassification:
    kind: SourceKind
    regime: str  # "SW" or "LW"
    ratio: float  # coherence scale / saturation length
    borderline: bool


@dataclass(frozen=True)
class EffectivePld:
    gamma: float
    lambda_loc: float
    report: tuple = field(default=())


def combine(sources, coherence_scale) -> EffectivePld:
    """Split sources into short- and long-wavelength regimes at scale xi.

    A source is SW when xi >= its saturation length and then contributes its
    rate gamma; otherwise it contributes Lambda.  Ratios xi/lambda within
    [0.1, 10] are flagged as borderline.
    """
    xi = si(coherence_scale, LENGTH, "coherence_scale")
    if not xi > 0:
        raise DomainError("coherence scale must be positive")
    gamma = 0.0
    lam = 0.0
    report = []
    for src in sources:
        ratio = xi / src.saturation_length if src.saturation_length > 0 else math.inf
        if ratio >= 1.0:
            gamma += src.gamma
            regime = "SW"
        else:
            lam += src.lambda_loc
            regime = "LW"
        report.append(SourceClassification(src.kind, regime, ratio, 0.1 <= ratio <= 10.0))
    return EffectivePld(gamma, lam, tuple(report))
