"""Zero-mean Gaussian centre-of-mass states.

A state is fixed by its mass and the three second moments

    v_x = <x^2>,  v_p = <p^2>,  c = <xp + px>/2.

Purity is hbar / (2 sqrt(v_x v_p - c^2)) and the coherence length, the decay
scale of <x/2|rho|-x/2>, is purity * sqrt(8 v_x).

The uncertainty product ``v_x v_p - c^2`` is carried alongside the moments.
After a strong inverted-potential stretch v_x v_p exceeds it by many orders of
magnitude, so recomputing it from the moments would cancel away every
significant digit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .quantities import HBAR, MASS, RATE, VELOCITY, Quantity, si

HEISENBERG_SLACK = 1e-9
# allowed disagreement between a supplied product and v_x v_p - c^2, in units of v_x v_p
_PRODUCT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class StateDiagnostics:
    purity: float
    coherence_length: float
    position_stdev: float


@dataclass(frozen=True)
class GaussianState:
    """Second moments of a Gaussian state (SI units).

    Parameters
    ----------
    mass : float
        kg
    v_x : float
        m^2
    v_p : float
        kg^2 m^2 / s^2
    c : float
        symmetrised covariance, kg m^2 / s
    uncertainty : float, optional
        v_x v_p - c^2 if known more accurately than the moments allow.
    """

    mass: float
    v_x: float
    v_p: float
    c: float
    uncertainty: float | None = None

    def __post_init__(self):
        if not (self.mass > 0):
            raise DomainError("mass must be positive")
        if not (self.v_x > 0 and self.v_p > 0):
            raise DomainError("v_x and v_p must be positive")
        direct = self.v_x * self.v_p - self.c * self.c
        if self.uncertainty is None:
            object.__setattr__(self, "uncertainty", direct)
        elif abs(self.uncertainty - direct) > _PRODUCT_TOLERANCE * self.v_x * self.v_p:
            raise DomainError(
                f"uncertainty product {self.uncertainty:.6e} disagrees with moments ({direct:.6e})"
            )
        if self.uncertainty < 0.25 * HBAR**2 * (1.0 - HEISENBERG_SLACK):
            raise DomainError(
                f"state violates Heisenberg: v_x v_p - c^2 = {self.uncertainty:.6e} "
                f"< hbar^2/4 = {0.25 * HBAR**2:.6e}"
            )

    @property
    def purity(self) -> float:
        return min(1.0, HBAR / (2.0 * math.sqrt(self.uncertainty)))

    @property
    def coherence_length(self) -> float:
        return self.purity * math.sqrt(8.0 * self.v_x)

    @property
    def position_stdev(self) -> float:
        return math.sqrt(self.v_x)

    def to_record(self) -> dict:
        return {
            "mass_kg": self.mass,
            "v_x_m2": self.v_x,
            "v_p_kg2m2s2": self.v_p,
            "c_kgm2s": self.c,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "GaussianState":
        return cls(
            mass=float(rec["mass_kg"]),
            v_x=float(rec["v_x_m2"]),
            v_p=float(rec["v_p_kg2m2s2"]),
            c=float(rec["c_kgm2s"]),
        )


def diagnostics(state: GaussianState) -> StateDiagnostics:
    return StateDiagnostics(
        purity=state.purity,
        coherence_length=state.coherence_length,
        position_stdev=state.position_stdev,
    )


def ground_state(mass, trap_frequency) -> GaussianState:
    """Ground state of the harmonic trap M w0^2 x^2 / 2.

    ``trap_frequency`` is the angular frequency w0 in rad/s.
    """
    m = si(mass, MASS, "mass")
    w0 = si(trap_frequency, RATE, "trap_frequency")
    if not (m > 0 and w0 > 0):
        raise DomainError("ground_state needs mass > 0 and trap_frequency > 0")
    return GaussianState(
        mass=m,
        v_x=HBAR / (2.0 * m * w0),
        v_p=0.5 * HBAR * m * w0,
        c=0.0,
        uncertainty=0.25 * HBAR**2,
    )


def inflated_state(ground: GaussianState, g_x: float, g_p: float) -> GaussianState:
    """Pure state left by a coherent inflation of gains (g_x, g_p).

    v_x -> g_x^2 v_x, v_p -> g_p^2 v_p and 2c = hbar sqrt(g^2 - 1) with g = g_x g_p.
    """
    g = g_x * g_p
    if g < 1.0:
        raise DomainError("inflation gain g = g_x g_p must be >= 1")
    return GaussianState(
        mass=ground.mass,
        v_x=g_x**2 * ground.v_x,
        v_p=g_p**2 * ground.v_p,
        c=0.5 * HBAR * math.sqrt(g * g - 1.0),
        uncertainty=0.25 * HBAR**2,
    )


def coherence_speed(state: GaussianState) -> Quantity:
    """Free-flight growth rate of the coherence length, sqrt(8 v_p) / M."""
    return Quantity(math.sqrt(8.0 * state.v_p) / state.mass, VELOCITY)
