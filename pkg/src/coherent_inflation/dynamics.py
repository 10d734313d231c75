"""Closed-form second-moment dynamics under quadratic potentials with LW diffusion.

For H = p^2/2M + s M w^2 x^2/2 (s = +1 harmonic, -1 inverted, w = 0 free) and
the long-wavelength dissipator -Lambda [x, [x, rho]] the moments obey

    d v_x/dt = 2c/M
    d c/dt   = v_p/M - s M w^2 v_x
    d v_p/dt = -2 s M w^2 c + 2 hbar^2 Lambda

so the covariance evolves as S sigma S^T + 2 hbar^2 Lambda K(t), with S the
classical flow and K the integrated outer product of its second column.  The
uncertainty product obeys d(det)/dt = 2 hbar^2 Lambda v_x(t) and is
integrated in closed form too, which keeps it accurate after large stretches.

Rate ``sw_gamma`` on a segment does not touch the moments; it only feeds the
exp(-gamma t) coherence bookkeeping kept by callers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DomainError, OverflowGuardError
from .gaussian_state import HEISENBERG_SLACK, GaussianState, ground_state, inflated_state
from .quantities import HBAR

DEFAULT_OMEGA_T_CAP = 30.0


class SegmentKind(enum.Enum):
    FREE = "free"
    HARMONIC = "harmonic"
    INVERTED = "inverted"


@dataclass(frozen=True)
class PotentialSegment:
    kind: SegmentKind
    duration: float
    omega: float = 0.0
    lw_lambda: float = 0.0
    sw_gamma: float = 0.0

    def __post_init__(self):
        if not self.duration >= 0:
            raise DomainError("segment duration must be >= 0")
        if self.kind is not SegmentKind.FREE and not self.omega > 0:
            raise DomainError(f"{self.kind.value} segment needs omega > 0")
        if self.lw_lambda < 0 or self.sw_gamma < 0:
            raise DomainError("segment decoherence parameters must be >= 0")

    @classmethod
    def free(cls, duration, lw_lambda=0.0, sw_gamma=0.0):
        return cls(SegmentKind.FREE, duration, 0.0, lw_lambda, sw_gamma)

    @classmethod
    def harmonic(cls, omega, duration, lw_lambda=0.0, sw_gamma=0.0):
        return cls(SegmentKind.HARMONIC, duration, omega, lw_lambda, sw_gamma)

    @classmethod
    def inverted(cls, omega, duration, lw_lambda=0.0, sw_gamma=0.0):
        return cls(SegmentKind.INVERTED, duration, omega, lw_lambda, sw_gamma)

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "omega_Hz": self.omega,
            "duration_s": self.duration,
            "lambda_Hz_per_m2": self.lw_lambda,
            "gamma_Hz": self.sw_gamma,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PotentialSegment":
        return cls(
            SegmentKind(rec["kind"]),
            float(rec["duration_s"]),
            float(rec.get("omega_Hz", 0.0)),
            float(rec.get("lambda_Hz_per_m2", 0.0)),
            float(rec.get("gamma_Hz", 0.0)),
        )


# -- cancellation-free elementary combinations --------------------------------


def _sinh_minus_arg(u):
    """sinh(u) - u."""
    u = np.asarray(u, dtype=float)
    u2 = u * u
    series = u * u2 / 6.0 * (1 + u2 / 20.0 * (1 + u2 / 42.0 * (1 + u2 / 72.0 * (1 + u2 / 110.0))))
    return np.where(np.abs(u) < 0.1, series, np.sinh(u) - u)


def _arg_minus_sin(u):
    """u - sin(u)."""
    u = np.asarray(u, dtype=float)
    u2 = u * u
    series = u * u2 / 6.0 * (1 - u2 / 20.0 * (1 - u2 / 42.0 * (1 - u2 / 72.0 * (1 - u2 / 110.0))))
    return np.where(np.abs(u) < 0.1, series, u - np.sin(u))


def _check_cap(seg: PotentialSegment, cap: float):
    if seg.kind is SegmentKind.INVERTED and seg.omega * seg.duration > cap:
        raise OverflowGuardError(
            f"inverted segment omega*t = {seg.omega * seg.duration:.3g} exceeds cap {cap:g}"
        )


def _kernels(kind: SegmentKind, omega: float, t, mass: float):
    """Flow matrix entries and the integrals needed by the moment update.

    Returns (S11, S12, S21, S22, J11, J12, J22, I) where, with u(tau) the first
    row of the flow, J = int_0^t u u^T dtau, and I = int_0^t J22(s) ds.  The
    diffusion kernel is [[J22, J12], [J12, J11]] because S11 = S22 here.
    """
    t = np.asarray(t, dtype=float)
    M = mass
    if kind is SegmentKind.FREE:
        one = np.ones_like(t)
        return (one, t / M, 0.0 * t, one, t, t * t / (2 * M), t**3 / (3 * M * M), t**4 / (12 * M * M))
    w = omega
    u = w * t
    if kind is SegmentKind.HARMONIC:
        cs, sn = np.cos(u), np.sin(u)
        j11 = (2 * u + np.sin(2 * u)) / (4 * w)
        j12 = sn * sn / (2 * M * w * w)
        j22 = _arg_minus_sin(2 * u) / (4 * M * M * w**3)
        integ = _arg_minus_sin(u) * (u + sn) / (4 * M * M * w**4)
        return (cs, sn / (M * w), -M * w * sn, cs, j11, j12, j22, integ)
    ch, sh = np.cosh(u), np.sinh(u)
    j11 = (2 * u + np.sinh(2 * u)) / (4 * w)
    j12 = sh * sh / (2 * M * w * w)
    j22 = _sinh_minus_arg(2 * u) / (4 * M * M * w**3)
    integ = _sinh_minus_arg(u) * (sh + u) / (4 * M * M * w**4)
    return (ch, sh / (M * w), M * w * sh, ch, j11, j12, j22, integ)


def _advance(vx, c, vp, det, mass, kind, omega, lam, t):
    """Raw closed-form update; vectorised over t."""
    s11, s12, s21, s22, j11, j12, j22, integ = _kernels(kind, omega, t, mass)
    k = 2.0 * HBAR**2 * lam
    vx_t = s11 * s11 * vx + 2 * s11 * s12 * c + s12 * s12 * vp + k * j22
    c_t = s11 * s21 * vx + (s11 * s22 + s12 * s21) * c + s12 * s22 * vp + k * j12
    vp_t = s21 * s21 * vx + 2 * s21 * s22 * c + s22 * s22 * vp + k * j11
    det_t = det + k * (vx * j11 + 2 * c * j12 + vp * j22 + k * integ)
    return vx_t, c_t, vp_t, det_t


def flow_matrix(seg: PotentialSegment, mass: float) -> np.ndarray:
    s11, s12, s21, s22, *_ = _kernels(seg.kind, seg.omega, seg.duration, mass)
    return np.array([[s11, s12], [s21, s22]], dtype=float)


def propagate_segment(
    state: GaussianState, seg: PotentialSegment, cap_omega_t: float = DEFAULT_OMEGA_T_CAP
) -> GaussianState:
    """State after ``seg.duration`` of the segment's dynamics."""
    _check_cap(seg, cap_omega_t)
    vx, c, vp, det = _advance(
        state.v_x, state.c, state.v_p, state.uncertainty, state.mass,
        seg.kind, seg.omega, seg.lw_lambda, seg.duration,
    )
    vx, c, vp, det = float(vx), float(c), float(vp), float(det)
    if det < 0.25 * HBAR**2 * (1 - HEISENBERG_SLACK) or det < state.uncertainty * (1 - 1e-12):
        raise ConsistencyError(f"propagation produced uncertainty product {det:.6e}")
    # rounding in the moments must not trip the constructor's product check
    direct = vx * vp - c * c
    if abs(det - direct) > 1e-9 * vx * vp:
        raise ConsistencyError("moment propagation lost the uncertainty product")
    return GaussianState(state.mass, vx, vp, c, det)


def propagate(state: GaussianState, segments, cap_omega_t: float = DEFAULT_OMEGA_T_CAP) -> GaussianState:
    for seg in segments:
        state = propagate_segment(state, seg, cap_omega_t)
    return state


def sw_exposure(segments) -> float:
    """Accumulated gamma*t; coherence is suppressed by exp(-exposure)."""
    return float(sum(seg.sw_gamma * seg.duration for seg in segments))


def moments_along(state: GaussianState, seg: PotentialSegment, times):
    """Moments (v_x, c, v_p, det) at each of ``times`` inside one segment."""
    times = np.asarray(times, dtype=float)
    if seg.kind is SegmentKind.INVERTED and seg.omega * np.max(times, initial=0.0) > DEFAULT_OMEGA_T_CAP:
        raise OverflowGuardError("sample times exceed the omega*t cap")
    return _advance(
        state.v_x, state.c, state.v_p, state.uncertainty, state.mass,
        seg.kind, seg.omega, seg.lw_lambda, times,
    )


def coherence_length_along(state: GaussianState, seg: PotentialSegment, times):
    """Coherence length hbar sqrt(2 v_x / det) at each time (no SW factor)."""
    vx, _, _, det = moments_along(state, seg, times)
    purity = np.minimum(1.0, HBAR / (2.0 * np.sqrt(det)))
    return purity * np.sqrt(8.0 * vx)


# -- linear maps --------------------------------------------------------------


def phase_space_map(segments, mass: float, cap_omega_t: float = DEFAULT_OMEGA_T_CAP) -> np.ndarray:
    """Composite classical flow (x, p) -> (x', p') of a segment sequence."""
    total = np.eye(2)
    for seg in segments:
        _check_cap(seg, cap_omega_t)
        total = flow_matrix(seg, mass) @ total
    return total


def diffusion_covariance(segments, mass: float, cap_omega_t: float = DEFAULT_OMEGA_T_CAP) -> np.ndarray:
    """Covariance added by LW diffusion over the sequence, transported to its end."""
    vx = c = vp = det = 0.0
    for seg in segments:
        _check_cap(seg, cap_omega_t)
        vx, c, vp, det = _advance(vx, c, vp, det, mass, seg.kind, seg.omega, seg.lw_lambda, seg.duration)
    return np.array([[vx, c], [c, vp]], dtype=float)


# -- coherent inflation ---------------------------------------------------------


@dataclass(frozen=True)
class CiGain:
    g: float
    g_x: float
    g_p: float


def ci_gain_formula(omega0: float, omega_i: float, t_i: float) -> float:
    """sqrt(1 + ((wI^2 + w0^2)/(2 wI w0))^2 sinh^2(2 tI wI))."""
    pref = (omega_i**2 + omega0**2) / (2.0 * omega_i * omega0)
    return math.hypot(1.0, pref * math.sinh(2.0 * t_i * omega_i))


def ci_gain(omega0: float, omega_i: float, t_i: float, cap_omega_t: float = DEFAULT_OMEGA_T_CAP) -> CiGain:
    """Gain of a coherent inflation of duration t_i in -M wI^2 x^2 / 2.

    ``g`` comes from the closed-form gain law; ``g_x`` and ``g_p`` from
    propagating the trap ground state, and the two routes must agree.
    """
    if not (omega0 > 0 and omega_i > 0 and t_i >= 0):
        raise DomainError("ci_gain needs omega0, omega_i > 0 and t_i >= 0")
    g = ci_gain_formula(omega0, omega_i, t_i)
    gs = ground_state(1.0, omega0)
    out = propagate_segment(gs, PotentialSegment.inverted(omega_i, t_i), cap_omega_t)
    g_x = math.sqrt(out.v_x / gs.v_x)
    g_p = math.sqrt(out.v_p / gs.v_p)
    if abs(g_x * g_p - g) > 1e-8 * g:
        raise ConsistencyError(f"gain mismatch: g={g!r} vs g_x g_p={g_x * g_p!r}")
    return CiGain(g, g_x, g_p)


def inflation_time(omega0: float, omega_i: float, g: float) -> float:
    """Inverse of the gain law: t_i giving total gain g."""
    if g < 1:
        raise DomainError("gain must be >= 1")
    pref = (omega_i**2 + omega0**2) / (2.0 * omega_i * omega0)
    return math.asinh(math.sqrt(g * g - 1.0) / pref) / (2.0 * omega_i)


@dataclass(frozen=True)
class CoherentGainBound:
    g_star: float
    g_p_star: float
    t_inflation: float  # where sinh(2 tI wI) meets the coherence bound


def max_coherent_gain(mass: float, omega0: float, omega_i: float, lambda_i: float) -> CoherentGainBound:
    """Largest inflation gain that stays coherent under localisation Lambda_I.

    g* = wI^2 M / (2 hbar Lambda_I).  ``t_inflation`` solves
    sinh(2 tI wI) = M wI^3 w0 / (hbar Lambda_I (wI^2 + w0^2)); the ``<<``
    margin is the caller's business.  Lambda_I = 0 gives infinities.
    """
    if not (mass > 0 and omega0 > 0 and omega_i > 0) or lambda_i < 0:
        raise DomainError("max_coherent_gain needs positive mass and frequencies, Lambda_I >= 0")
    if lambda_i == 0:
        return CoherentGainBound(math.inf, math.inf, math.inf)
    g_star = omega_i**2 * mass / (2.0 * HBAR * lambda_i)
    bound = mass * omega_i**3 * omega0 / (HBAR * lambda_i * (omega_i**2 + omega0**2))
    return CoherentGainBound(
        g_star=g_star,
        g_p_star=math.sqrt(omega_i * g_star / omega0),
        t_inflation=math.asinh(bound) / (2.0 * omega_i),
    )


# -- momentum-to-position mapping -------------------------------------------------


def rotation_time(omega_i: float) -> float:
    return math.pi / (4.0 * omega_i)


def momentum_mapping_segments(
    omega_i: float,
    duration: float | None = None,
    lw_lambda: float = 0.0,
    sw_gamma: float = 0.0,
    cap_omega_t: float = DEFAULT_OMEGA_T_CAP,
) -> list:
    """Quarter-of-quarter rotation in +M wI^2 x^2/2, then inversion in -M wI^2 x^2/2.

    ``duration`` is the length of the inverted stage; ``None`` runs it up to the cap.
    """
    if not omega_i > 0:
        raise DomainError("omega_i must be positive")
    if duration is None:
        duration = cap_omega_t / omega_i
    segs = [
        PotentialSegment.harmonic(omega_i, rotation_time(omega_i), lw_lambda, sw_gamma),
        PotentialSegment.inverted(omega_i, duration, lw_lambda, sw_gamma),
    ]
    _check_cap(segs[1], cap_omega_t)
    return segs


def asymptotic_momentum_gain(mass: float, omega_i: float, t: float) -> float:
    """Coefficient of p(t0) in x(t) for omega_i t >> 1: exp(wI t) / (sqrt(2) M wI)."""
    return math.exp(omega_i * t) / (math.sqrt(2.0) * mass * omega_i)


# -- reduced units for coherence-growth curves ----------------------------------


@dataclass(frozen=True)
class ReducedUnits:
    """x0 = sqrt(v_x(0)) and w0 = hbar / (2 M v_x(0)) of a reference state."""

    x0: float
    omega0: float

    @classmethod
    def of(cls, state: GaussianState) -> "ReducedUnits":
        return cls(math.sqrt(state.v_x), HBAR / (2.0 * state.mass * state.v_x))

    def reduced_lambda(self, lambda_loc: float) -> float:
        return lambda_loc * self.x0**2 / self.omega0

    def lambda_from_reduced(self, lambda_tilde: float) -> float:
        return lambda_tilde * self.omega0 / self.x0**2


def free_peak_time_reduced(lambda_tilde: float, g_p: float = 1.0) -> float:
    """Coherence peak time w0 t = [3 / (4 g_p^2 Lambda~)]^(1/3)."""
    return (3.0 / (4.0 * g_p**2 * lambda_tilde)) ** (1.0 / 3.0)


def free_peak_coherence_reduced(lambda_tilde: float) -> float:
    """Peak coherence xi / x0 = [32 / (3 Lambda~^2)]^(1/6)."""
    return (32.0 / (3.0 * lambda_tilde**2)) ** (1.0 / 6.0)


def reduced_coherence_curve(lambda_tilde: float, times, g_x: float = 1.0, g_p: float = 1.0):
    """xi / x0 against reduced time w0 t for free flight after an optional inflation.

    The ground state is inflated by (g_x, g_p) instantaneously and then left to
    expand freely under Lambda~; ``times`` are in units of 1/w0.
    """
    times = np.asarray(times, dtype=float)
    if lambda_tilde < 0 or np.any(times < 0):
        raise DomainError("Lambda~ and reduced times must be non-negative")
    gs = ground_state(1.0, 1.0)
    units = ReducedUnits.of(gs)
    start = gs if (g_x == 1.0 and g_p == 1.0) else inflated_state(gs, g_x, g_p)
    seg = PotentialSegment.free(float(np.max(times, initial=0.0)), units.lambda_from_reduced(lambda_tilde))
    return coherence_length_along(start, seg, times) / units.x0
