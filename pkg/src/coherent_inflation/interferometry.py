"""Double-slit cat states, their interference patterns and decoherence blur.

A cat psi(x) = N [phi(x - d/2) + phi(x + d/2)], phi(x) = exp(-x^2 / (4 sigma^2))
stays a sum of two Gaussians under any linear phase-space map [[A, B], [C, D]],
so the ideal position density is closed-form:

    P(x) = N^2 / |A + i beta B| * [ e^{-q (x-a)^2} + e^{-q (x+a)^2}
                                   + 2 kappa e^{-q (x^2 + a^2)} cos(k x) ]

with beta = hbar / (2 sigma^2), q = beta / (hbar |A + i beta B|^2), a = A d / 2
and k = -d beta^2 B / (hbar |A + i beta B|^2).  ``kappa`` <= 1 scales the
interference term to model short-wavelength loss of coherence.

Long-wavelength diffusion after the slit convolves P with a Gaussian whose
variance is the accumulated position diffusion; its width parameter
sigma_blur satisfies sigma_blur^2 = 2 * added variance.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.ndimage import gaussian_filter1d

from .dynamics import (
    DEFAULT_OMEGA_T_CAP,
    PotentialSegment,
    SegmentKind,
    _sinh_minus_arg,
    diffusion_covariance,
)
from .errors import DomainError, OverflowGuardError, ResolutionError, VisibilityError
from .quantities import HBAR, LENGTH, LOCALIZATION, MASS, RATE, TIME, VELOCITY, Quantity, si

DEFAULT_GRID_POINTS = 4096
MIN_SAMPLES_PER_FRINGE = 16
VISIBILITY_FRINGES = 5


class EvolutionKind(enum.Enum):
    FREE_EXPANSION = "FreeExpansion"
    CI_EXPANSION = "CiExpansion"


@dataclass(frozen=True)
class CatState:
    slit_separation: float
    slit_width: float
    mass: float

    def __post_init__(self):
        d, s = self.slit_separation, self.slit_width
        if not (d > 0 and s > 0 and self.mass > 0):
            raise DomainError("cat state needs positive d, sigma and mass")
        if not s < d / 2:
            raise DomainError(f"slit width {s:g} must be below d/2 = {d / 2:g}")
        if s > d / 4:
            warnings.warn(f"slit width {s:g} exceeds d/4; slits barely resolved", stacklevel=2)

    @classmethod
    def with_default_width(cls, slit_separation: float, mass: float) -> "CatState":
        return cls(slit_separation, slit_separation / 10.0, mass)

    @property
    def overlap(self) -> float:
        """<phi_+|phi_-> / <phi|phi> = exp(-d^2 / (8 sigma^2))."""
        return math.exp(-self.slit_separation**2 / (8.0 * self.slit_width**2))

    def second_moments(self, coherence: float = 1.0):
        """(<x^2>, <p^2>) of the cat with interference weight ``coherence``."""
        d, s = self.slit_separation, self.slit_width
        ov = coherence * self.overlap
        vx = s * s + 0.25 * d * d / (1.0 + ov)
        vp = HBAR**2 / (4 * s * s) * (1.0 + ov * (1.0 - d * d / (4 * s * s))) / (1.0 + ov)
        return vx, vp


# -- linear maps ---------------------------------------------------------------


def _exact_flow(seg: PotentialSegment, mass: float):
    M = mpmath.mpf(mass)
    t = mpmath.mpf(seg.duration)
    if seg.kind is SegmentKind.FREE:
        return mpmath.matrix([[1, t / M], [0, 1]])
    w = mpmath.mpf(seg.omega)
    u = w * t
    if seg.kind is SegmentKind.HARMONIC:
        return mpmath.matrix([[mpmath.cos(u), mpmath.sin(u) / (M * w)], [-M * w * mpmath.sin(u), mpmath.cos(u)]])
    return mpmath.matrix([[mpmath.cosh(u), mpmath.sinh(u) / (M * w)], [M * w * mpmath.sinh(u), mpmath.cosh(u)]])


def linear_map(segments, mass: float, cap_omega_t: float = DEFAULT_OMEGA_T_CAP) -> np.ndarray:
    """Composite flow of ``segments``.

    Composed at 60 significant digits: after an inversion the contracting entry
    is e^{-wt} while the matrix products involved are ~e^{wt}, so double
    precision would lose it entirely.
    """
    with mpmath.workdps(60):
        total = mpmath.eye(2)
        for seg in segments:
            if seg.kind is SegmentKind.INVERTED and seg.omega * seg.duration > cap_omega_t:
                raise OverflowGuardError(
                    f"inverted segment omega*t = {seg.omega * seg.duration:.3g} exceeds cap {cap_omega_t:g}"
                )
            total = _exact_flow(seg, mass) * total
        return np.array([[float(total[i, j]) for j in range(2)] for i in range(2)])


def free_map(mass: float, t: float) -> np.ndarray:
    return np.array([[1.0, t / mass], [0.0, 1.0]])


def _check_symplectic(m: np.ndarray):
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    det = a * d - b * c
    scale = max(abs(a * d), abs(b * c), 1.0)
    if abs(det - 1.0) > 1e-9 * scale:
        raise DomainError(f"map is not symplectic (det = {det!r})")


@dataclass(frozen=True)
class _PatternGeometry:
    norm: float  # N^2 / |A + i beta B|
    q: float
    a: float
    k: float
    coherence: float
    envelope_stdev: float

    @property
    def fringe_separation(self) -> float:
        return 2 * math.pi / abs(self.k) if self.k != 0 else math.inf


def _geometry(cat: CatState, m: np.ndarray, coherence: float) -> _PatternGeometry:
    _check_symplectic(m)
    A, B = float(m[0, 0]), float(m[0, 1])
    d, s = cat.slit_separation, cat.slit_width
    beta = HBAR / (2 * s * s)
    den2 = A * A + (beta * B) ** 2
    n2 = 1.0 / (2.0 * math.sqrt(2 * math.pi) * s * (1.0 + coherence * cat.overlap))
    vx, vp = cat.second_moments(coherence)
    return _PatternGeometry(
        norm=n2 / math.sqrt(den2),
        q=beta / (HBAR * den2),
        a=0.5 * A * d,
        k=-d * beta * beta * B / (HBAR * den2),
        coherence=coherence,
        envelope_stdev=math.sqrt(A * A * vx + B * B * vp),
    )


def pattern_density(cat: CatState, phase_map: np.ndarray, x, coherence: float = 1.0):
    """Ideal (unblurred) position density at ``x`` after ``phase_map``."""
    geo = _geometry(cat, np.asarray(phase_map, dtype=float), coherence)
    return _density(geo, np.asarray(x, dtype=float))


def _density(geo: _PatternGeometry, x):
    q, a = geo.q, geo.a
    humps = np.exp(-q * (x - a) ** 2) + np.exp(-q * (x + a) ** 2)
    cross = 2.0 * geo.coherence * np.exp(-q * (x * x + a * a)) * np.cos(geo.k * x)
    return geo.norm * (humps + cross)


# -- patterns -------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    n_points: int = DEFAULT_GRID_POINTS
    half_width: float | None = None  # default: 5 envelope stdev + 3 blur scales


@dataclass(frozen=True, eq=False)
class FringePattern:
    x: np.ndarray
    density: np.ndarray
    fringe_separation: float
    blur_scale: float
    visibility: float
    evolution_kind: EvolutionKind
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.x))

    def metadata(self) -> dict:
        return {
            "fringe_separation_m": self.fringe_separation,
            "blur_scale_m": self.blur_scale,
            "visibility": self.visibility,
            "evolution_kind": self.evolution_kind.value,
            "time_s": self.time,
            **self.meta,
        }


def _grid(half_width: float, n: int) -> np.ndarray:
    return np.linspace(-half_width, half_width, n)


def _safe_visibility(x, density, x_f) -> float:
    if not math.isfinite(x_f):
        return 0.0
    try:
        return visibility_of(x, density, VISIBILITY_FRINGES * x_f)
    except VisibilityError:
        # no resolvable extrema: fringes are gone
        return 0.0


def unblurred_pattern(
    cat: CatState,
    phase_map,
    t: float = 0.0,
    grid: GridSpec = GridSpec(),
    evolution_kind: EvolutionKind = EvolutionKind.FREE_EXPANSION,
    coherence: float = 1.0,
    blur_margin: float = 0.0,
) -> FringePattern:
    """Sample the ideal density on a uniform grid.

    ``blur_margin`` widens the default grid by three blur scales so that a
    later convolution does not push probability off the grid.
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    geo = _geometry(cat, np.asarray(phase_map, dtype=float), coherence)
    half = grid.half_width or 5.0 * geo.envelope_stdev + 3.0 * blur_margin
    x = _grid(half, grid.n_points)
    dx = x[1] - x[0]
    x_f = geo.fringe_separation
    if math.isfinite(x_f) and x_f / dx < MIN_SAMPLES_PER_FRINGE and x_f < 2 * half:
        raise ResolutionError(
            f"grid spacing {dx:.3e} m gives {x_f / dx:.1f} samples per fringe (< {MIN_SAMPLES_PER_FRINGE})"
        )
    density = _density(geo, x)
    return FringePattern(
        x=x,
        density=density,
        fringe_separation=x_f,
        blur_scale=0.0,
        visibility=_safe_visibility(x, density, x_f),
        evolution_kind=evolution_kind,
        time=t,
        meta={"envelope_stdev_m": geo.envelope_stdev, "coherence_factor": coherence},
    )


def blurred_pattern(p0: FringePattern, sigma_blur) -> FringePattern:
    """Convolve with exp(-y^2 / sigma_blur^2) / (sigma_blur sqrt(pi))."""
    sb = si(sigma_blur, LENGTH, "sigma_blur")
    if sb < 0:
        raise DomainError("sigma_blur must be >= 0")
    extent = float(p0.x[-1] - p0.x[0])
    if sb > extent / 6.0:
        raise DomainError(f"blur {sb:.3e} m exceeds grid extent / 6 = {extent / 6:.3e} m")
    if sb == 0:
        density = p0.density.copy()
    else:
        stdev_samples = sb / math.sqrt(2.0) / p0.spacing
        density = gaussian_filter1d(p0.density, stdev_samples, mode="constant", cval=0.0, truncate=12.0)
    blur = math.hypot(p0.blur_scale, sb)
    return FringePattern(
        x=p0.x,
        density=density,
        fringe_separation=p0.fringe_separation,
        blur_scale=blur,
        visibility=_safe_visibility(p0.x, density, p0.fringe_separation),
        evolution_kind=p0.evolution_kind,
        time=p0.time,
        meta=dict(p0.meta),
    )


# -- visibility -------------------------------------------------------------------


def _refine(y0, y1, y2):
    den = y0 - 2.0 * y1 + y2
    if den == 0:
        return y1
    return y1 - (y0 - y2) ** 2 / (8.0 * den)


def visibility_of(x, density, window: float) -> float:
    """Michelson contrast (Pmax - Pmin)/(Pmax + Pmin) over the central window.

    Extremum heights are refined with a three-point parabola.
    """
    x = np.asarray(x)
    y = np.asarray(density)
    inside = np.flatnonzero(np.abs(x) <= window / 2.0)
    lo, hi = max(inside[0], 1), min(inside[-1], len(y) - 2)
    maxima, minima = [], []
    for i in range(lo, hi + 1):
        if y[i] >= y[i - 1] and y[i] > y[i + 1]:
            maxima.append(_refine(y[i - 1], y[i], y[i + 1]))
        elif y[i] <= y[i - 1] and y[i] < y[i + 1]:
            minima.append(_refine(y[i - 1], y[i], y[i + 1]))
    if len(maxima) < 2 or len(minima) < 2:
        raise VisibilityError(f"{len(maxima)} maxima and {len(minima)} minima in the window")
    pmax, pmin = max(maxima), max(min(minima), 0.0)
    return (pmax - pmin) / (pmax + pmin)


def visibility(pattern: FringePattern, window: float | None = None) -> float:
    if window is None:
        window = VISIBILITY_FRINGES * pattern.fringe_separation
    if not math.isfinite(window):
        raise VisibilityError("pattern has no fringes")
    if window < 3.0 * pattern.fringe_separation:
        raise DomainError("visibility window must cover at least 3 fringe periods")
    return visibility_of(pattern.x, pattern.density, window)


# -- closed-form scales -------------------------------------------------------------


def _lw_lambda(lam) -> float:
    # PldSource instances must be pure long-wavelength sources
    if hasattr(lam, "lambda_loc"):
        if not lam.long_wavelength_only:
            raise DomainError(
                f"{lam.kind.value} source has a finite saturation length; classify it with combine() first"
            )
        return lam.lambda_loc
    return si(lam, LOCALIZATION, "Lambda")


def free_blur_scale(mass, lam, t) -> Quantity:
    """sqrt(4 hbar^2 Lambda t^3 / (3 M^2))."""
    m = si(mass, MASS, "mass")
    L = _lw_lambda(lam)
    tt = si(t, TIME, "t")
    if m <= 0 or L < 0 or tt < 0:
        raise DomainError("free_blur_scale needs mass > 0, Lambda >= 0, t >= 0")
    return Quantity(math.sqrt(4.0 * HBAR**2 * L * tt**3 / (3.0 * m * m)), LENGTH)


def ci_blur_scale(mass, lam_i, omega_i, t, cap_omega_t: float = DEFAULT_OMEGA_T_CAP) -> Quantity:
    """sqrt(hbar^2 Lambda_I / (M^2 wI^3) [sinh(2 wI t) - 2 wI t])."""
    m = si(mass, MASS, "mass")
    L = _lw_lambda(lam_i)
    w = si(omega_i, RATE, "omega_i")
    tt = si(t, TIME, "t")
    if m <= 0 or L < 0 or w <= 0 or tt < 0:
        raise DomainError("ci_blur_scale needs mass, omega_i > 0 and Lambda_I, t >= 0")
    if w * tt > cap_omega_t:
        raise OverflowGuardError(f"omega_i t = {w * tt:.3g} exceeds cap {cap_omega_t:g}")
    return Quantity(math.sqrt(HBAR**2 * L / (m * m * w**3) * float(_sinh_minus_arg(2 * w * tt))), LENGTH)


def free_fringe_separation(mass, d, t) -> Quantity:
    """2 pi hbar t / (M d)."""
    m, dd, tt = si(mass, MASS, "mass"), si(d, LENGTH, "d"), si(t, TIME, "t")
    if m <= 0 or dd <= 0 or tt < 0:
        raise DomainError("free_fringe_separation needs mass, d > 0 and t >= 0")
    return Quantity(2 * math.pi * HBAR * tt / (m * dd), LENGTH)


def free_fringe_speed(mass, d) -> Quantity:
    """2 pi hbar / (M d)."""
    m, dd = si(mass, MASS, "mass"), si(d, LENGTH, "d")
    if m <= 0 or dd <= 0:
        raise DomainError("free_fringe_speed needs mass, d > 0")
    return Quantity(2 * math.pi * HBAR / (m * dd), VELOCITY)


def ci_fringe_separation(mass, d, omega_i, t, cap_omega_t: float = DEFAULT_OMEGA_T_CAP) -> Quantity:
    """exp(wI t) 2 pi hbar / (M d wI).

    The rotate-then-invert map gives x(t) ~ e^{wI t} p / (sqrt(2) M wI), so the
    sampled pattern's spacing is this value divided by sqrt(2).
    """
    m, dd = si(mass, MASS, "mass"), si(d, LENGTH, "d")
    w, tt = si(omega_i, RATE, "omega_i"), si(t, TIME, "t")
    if m <= 0 or dd <= 0 or w <= 0 or tt < 0:
        raise DomainError("ci_fringe_separation needs positive mass, d, omega_i and t >= 0")
    if w * tt > cap_omega_t:
        raise OverflowGuardError(f"omega_i t = {w * tt:.3g} exceeds cap {cap_omega_t:g}")
    return Quantity(math.exp(w * tt) * 2 * math.pi * HBAR / (m * dd * w), LENGTH)


def ci_visibility_bound(omega_i, d) -> Quantity:
    """Lambda_I must stay well below 8 pi^2 wI / d^2 to keep CI fringes."""
    w, dd = si(omega_i, RATE, "omega_i"), si(d, LENGTH, "d")
    return Quantity(8 * math.pi**2 * w / (dd * dd), LOCALIZATION)


# -- pipeline helper -----------------------------------------------------------------


def synthesize(
    cat: CatState,
    segments,
    grid: GridSpec = GridSpec(),
    evolution_kind: EvolutionKind = EvolutionKind.CI_EXPANSION,
    coherence: float = 1.0,
    cap_omega_t: float = DEFAULT_OMEGA_T_CAP,
) -> FringePattern:
    """Pattern after running ``segments`` from the slit, blur included."""
    phase_map = linear_map(segments, cat.mass, cap_omega_t)
    added = diffusion_covariance(segments, cat.mass, cap_omega_t)
    sigma_blur = math.sqrt(2.0 * max(added[0, 0], 0.0))
    t = float(sum(seg.duration for seg in segments))
    geo = _geometry(cat, phase_map, coherence)
    n = grid.n_points
    if grid.half_width is None and math.isfinite(geo.fringe_separation):
        # keep at least MIN_SAMPLES_PER_FRINGE when the blur margin widens the grid
        half = 5.0 * geo.envelope_stdev + 3.0 * sigma_blur
        needed = int(math.ceil(2 * half / geo.fringe_separation * MIN_SAMPLES_PER_FRINGE * 2)) + 1
        if needed > n:
            if needed > 2**22:
                raise ResolutionError(f"pattern would need {needed} grid points")
            n = needed
    raw = unblurred_pattern(
        cat, phase_map, t, GridSpec(n, grid.half_width), evolution_kind, coherence, sigma_blur
    )
    return blurred_pattern(raw, sigma_blur)


def write_pattern(pattern: FringePattern, csv_path, meta_path=None):
    with open(csv_path, "w") as fh:
        fh.write("x_m,probability_density_per_m\n")
        for xi, pi in zip(pattern.x, pattern.density):
            fh.write(f"{xi:.16e},{pi:.16e}\n")
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(pattern.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")
