"""Dimension-checked SI scalars, unit conversion and physical constants.

Everything inside the package is strict SI.  Human-facing units (amu, um,
mbar, mK, ...) are only understood by :func:`convert` and :func:`from_unit`.

A :class:`Quantity` carries a value (float or numpy array) together with an
exponent vector over (kg, m, s, K).  Exponents are rationals so that square
roots such as m/sqrt(Hz) stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import DomainError, UnitError

__all__ = [
    "Dimension",
    "Quantity",
    "CONSTANTS",
    "UNITS",
    "convert",
    "from_unit",
    "si",
    "sqrt",
    "sphere_mass",
]


@dataclass(frozen=True)
class Dimension:
    kg: Fraction = Fraction(0)
    m: Fraction = Fraction(0)
    s: Fraction = Fraction(0)
    K: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("kg", "m", "s", "K"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))

    @property
    def exponents(self) -> tuple:
        return (self.kg, self.m, self.s, self.K)

    def __mul__(self, other: "Dimension") -> "Dimension":
        return Dimension(*(a + b for a, b in zip(self.exponents, other.exponents)))

    def __truediv__(self, other: "Dimension") -> "Dimension":
        return Dimension(*(a - b for a, b in zip(self.exponents, other.exponents)))

    def __pow__(self, n) -> "Dimension":
        n = Fraction(n)
        return Dimension(*(a * n for a in self.exponents))

    @property
    def is_dimensionless(self) -> bool:
        return not any(self.exponents)

    def __str__(self):
        parts = []
        for sym, e in zip(("kg", "m", "s", "K"), self.exponents):
            if e == 1:
                parts.append(sym)
            elif e:
                parts.append(f"{sym}^{e}")
        return " ".join(parts) or "1"


DIMENSIONLESS = Dimension()
MASS = Dimension(kg=1)
LENGTH = Dimension(m=1)
TIME = Dimension(s=1)
TEMPERATURE = Dimension(K=1)
RATE = Dimension(s=-1)
AREA = LENGTH**2
VOLUME = LENGTH**3
DENSITY = MASS / VOLUME
VELOCITY = LENGTH / TIME
MOMENTUM = MASS * VELOCITY
ENERGY = MASS * VELOCITY**2
ACTION = ENERGY * TIME
PRESSURE = ENERGY / VOLUME
LOCALIZATION = RATE / AREA  # Hz/m^2
PSD = AREA / RATE  # m^2/Hz
DENSITY_1D = Dimension(m=-1)  # probability per metre


Number = Union[float, int, np.ndarray]


@dataclass(frozen=True, eq=False)
class Quantity:
    """A value in SI base units tagged with its dimension."""

    value: Number
    dim: Dimension = DIMENSIONLESS

    def _coerce(self, other) -> "Quantity":
        if isinstance(other, Quantity):
            return other
        return Quantity(other, DIMENSIONLESS)

    def _same(self, other, op: str) -> "Quantity":
        other = self._coerce(other)
        if other.dim != self.dim:
            raise UnitError(f"cannot {op} [{self.dim}] and [{other.dim}]")
        return other

    def __add__(self, other):
        other = self._same(other, "add")
        return Quantity(self.value + other.value, self.dim)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._same(other, "subtract")
        return Quantity(self.value - other.value, self.dim)

    def __rsub__(self, other):
        other = self._same(other, "subtract")
        return Quantity(other.value - self.value, self.dim)

    def __mul__(self, other):
        other = self._coerce(other)
        return Quantity(self.value * other.value, self.dim * other.dim)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        return Quantity(self.value / other.value, self.dim / other.dim)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        return Quantity(other.value / self.value, other.dim / self.dim)

    def __pow__(self, n):
        n = Fraction(n).limit_denominator(64)
        return Quantity(self.value ** float(n), self.dim**n)

    def __neg__(self):
        return Quantity(-self.value, self.dim)

    def __abs__(self):
        return Quantity(abs(self.value), self.dim)

    def _cmp(self, other, op):
        other = self._same(other, "compare")
        return op(self.value, other.value)

    def __lt__(self, other):
        return self._cmp(other, lambda a, b: a < b)

    def __le__(self, other):
        return self._cmp(other, lambda a, b: a <= b)

    def __gt__(self, other):
        return self._cmp(other, lambda a, b: a > b)

    def __ge__(self, other):
        return self._cmp(other, lambda a, b: a >= b)

    def __float__(self):
        if not self.dim.is_dimensionless:
            raise UnitError(f"quantity with dimension [{self.dim}] is not a plain number")
        return float(self.value)

    def to(self, unit: str):
        return convert(self, unit)

    def __repr__(self):
        return f"Quantity({self.value!r}, [{self.dim}])"


def sqrt(q):
    if isinstance(q, Quantity):
        return q ** Fraction(1, 2)
    return np.sqrt(q)


def _plain(q) -> Number:
    if isinstance(q, Quantity):
        return float(q) if np.ndim(q.value) == 0 else _dimensionless_array(q)
    return q


def _dimensionless_array(q: Quantity):
    if not q.dim.is_dimensionless:
        raise UnitError(f"transcendental function of a [{q.dim}] quantity")
    return q.value


def exp(q):
    return np.exp(_plain(q))


def sinh(q):
    return np.sinh(_plain(q))


@dataclass(frozen=True)
class Constants:
    """CODATA 2018 exact / recommended values."""

    hbar: Quantity
    boltzmann: Quantity
    light_speed: Quantity
    gravitational_constant: Quantity
    amu_in_kg: Quantity


CONSTANTS = Constants(
    hbar=Quantity(1.054571817e-34, ACTION),
    boltzmann=Quantity(1.380649e-23, ENERGY / TEMPERATURE),
    light_speed=Quantity(299792458.0, VELOCITY),
    gravitational_constant=Quantity(6.67430e-11, LENGTH**3 / (MASS * TIME**2)),
    amu_in_kg=Quantity(1.66053906660e-27, MASS),
)

# plain-float aliases for the numeric kernels
HBAR = CONSTANTS.hbar.value
K_B = CONSTANTS.boltzmann.value
C_LIGHT = CONSTANTS.light_speed.value
G_NEWTON = CONSTANTS.gravitational_constant.value
AMU = CONSTANTS.amu_in_kg.value


# name -> (SI factor, dimension)
UNITS: dict = {
    "1": (1.0, DIMENSIONLESS),
    "kg": (1.0, MASS),
    "amu": (AMU, MASS),
    "m": (1.0, LENGTH),
    "mm": (1e-3, LENGTH),
    "um": (1e-6, LENGTH),
    "nm": (1e-9, LENGTH),
    "s": (1.0, TIME),
    "Hz": (1.0, RATE),
    "K": (1.0, TEMPERATURE),
    "mK": (1e-3, TEMPERATURE),
    "Pa": (1.0, PRESSURE),
    "mbar": (100.0, PRESSURE),
    "m2_per_Hz": (1.0, PSD),
    "m_per_sqrtHz": (1.0, PSD ** Fraction(1, 2)),
    "Hz_per_m2": (1.0, LOCALIZATION),
    "kg_per_m3": (1.0, DENSITY),
    "m2": (1.0, AREA),
    "m_per_s": (1.0, VELOCITY),
    "nm_per_s": (1e-9, VELOCITY),
    "per_m": (1.0, DENSITY_1D),
}


def _lookup(unit: str):
    try:
        return UNITS[unit]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r}") from None


def convert(q: Quantity, target_unit: str):
    """Numeric value of ``q`` expressed in ``target_unit``."""
    factor, dim = _lookup(target_unit)
    if not isinstance(q, Quantity):
        raise UnitError("convert() needs a Quantity")
    if q.dim != dim:
        raise UnitError(f"cannot express [{q.dim}] in {target_unit!r} [{dim}]")
    return q.value / factor


def from_unit(value, unit: str) -> Quantity:
    factor, dim = _lookup(unit)
    return Quantity(value * factor, dim)


def si(x, dim: Dimension, name: str = "argument"):
    """Plain SI value of ``x``.

    Quantities are dimension-checked; bare numbers are taken to be SI already.
    """
    if isinstance(x, Quantity):
        if x.dim != dim:
            raise UnitError(f"{name}: expected [{dim}], got [{x.dim}]")
        return x.value
    return x


def sphere_mass(radius, density) -> Quantity:
    """Mass of a homogeneous sphere, (4 pi / 3) rho R^3."""
    r = si(radius, LENGTH, "radius")
    rho = si(density, DENSITY, "density")
    if not (r > 0 and rho > 0):
        raise DomainError("sphere_mass needs radius > 0 and density > 0")
    return Quantity(4.0 * math.pi / 3.0 * rho * r**3, MASS)
