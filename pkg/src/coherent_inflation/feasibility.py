"""Closed-form budgets: decoherence times, coherence ceilings and noise limits.

The central quantities are

* ``t_lambda = [3 M / (2 hbar Lambda w0)]^(1/3)``, the time at which
  long-wavelength decoherence stops the free growth of the coherence length;
* ``t_star = min(t_lambda, 1/gamma)`` and ``xi_star = xi(t_star)``;
* the vibration ceilings on S_xx(wI) for a pure inflation and for visible
  fringes;
* the window of slit separations that separates standard decoherence from
  gravitationally induced decoherence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .decoherence import (
    Environment,
    PldSource,
    Sphere,
    combine,
    environmental_sources,
    gravity_source,
    vibration_source,
)
from .dynamics import (
    DEFAULT_OMEGA_T_CAP,
    PotentialSegment,
    coherence_length_along,
    max_coherent_gain,
    propagate_segment,
)
from .errors import DomainError
from .gaussian_state import GaussianState, ground_state
from .protocol import DEFAULT_MARGIN, ProtocolPlan, run_protocol
from .quantities import HBAR, LENGTH, LOCALIZATION, MASS, PSD, RATE, TIME, Quantity, si

_MAX_CLASSIFICATION_ROUNDS = 20


def t_lambda(mass, omega0, lambda_loc) -> Quantity:
    """Peak time of the free coherence length under LW localisation Lambda.

    Returns an infinite time when Lambda = 0.
    """
    m = si(mass, MASS, "mass")
    w0 = si(omega0, RATE, "omega0")
    lam = si(lambda_loc, LOCALIZATION, "lambda_loc")
    if not (m > 0 and w0 > 0) or lam < 0:
        raise DomainError("t_lambda needs mass > 0, omega0 > 0 and Lambda >= 0")
    if lam == 0:
        return Quantity(math.inf, TIME)
    return Quantity((3.0 * m / (2.0 * HBAR * lam * w0)) ** (1.0 / 3.0), TIME)


def coherence_at_t_lambda(lambda_loc, t_peak) -> Quantity:
    """xi(t_lambda) = sqrt(2 / (Lambda t_lambda))."""
    lam = si(lambda_loc, LOCALIZATION, "lambda_loc")
    t = si(t_peak, TIME, "t_peak")
    if lam == 0 or math.isinf(t):
        return Quantity(math.inf, LENGTH)
    return Quantity(math.sqrt(2.0 / (lam * t)), LENGTH)


def simulated_peak_time(state: GaussianState, lambda_loc: float, t_guess: float) -> float:
    """Time of the maximum of the simulated free-flight coherence length.

    Searches a log grid spanning 1e-6 to 10 times ``t_guess``; returns 0 when
    the coherence length only decreases and NaN when the maximum lies beyond
    the grid.
    """
    seg = PotentialSegment.free(0.0, lambda_loc)
    grid = np.geomspace(1e-6 * t_guess, 10.0 * t_guess, 6001)
    xi = coherence_length_along(state, seg, grid)
    i = int(np.argmax(xi))
    if i == len(grid) - 1:
        return math.nan
    if i == 0:
        if xi[0] < state.coherence_length:
            return 0.0
        lo = 0.0
    else:
        lo = grid[i - 1]
    res = minimize_scalar(
        lambda t: -float(coherence_length_along(state, seg, [t])[0]),
        bounds=(lo, grid[i + 1]),
        method="bounded",
        options={"xatol": 1e-12 * grid[i]},
    )
    return float(res.x)


@dataclass(frozen=True)
class Budget:
    """Budget of one sphere in one environment (SI units).

    ``t_lambda`` maps each long-wavelength source (by kind value) to its own
    t_lambda.  The ``*_inflated`` fields repeat the coherence ceiling for the
    inflated state when an inflation time is configured, else NaN.
    """

    t_lambda: dict
    gamma_total: float
    lambda_total: float
    t_star: float
    xi_star: float
    g_star: float
    g_p_star: float
    s_xx_max_inflation: float
    s_xx_max_fringes: float
    t_star_inflated: float = math.nan
    xi_star_inflated: float = math.nan
    classification: tuple = field(default=(), compare=False)

    def to_record(self) -> dict:
        rec = {f"t_lambda_{kind}_s": val for kind, val in sorted(self.t_lambda.items())}
        rec.update(
            {
                "gamma_total_Hz": self.gamma_total,
                "lambda_total_Hz_per_m2": self.lambda_total,
                "t_star_s": self.t_star,
                "xi_star_m": self.xi_star,
                "g_star": self.g_star,
                "g_p_star": self.g_p_star,
                "s_xx_max_inflation_m2_per_Hz": self.s_xx_max_inflation,
                "s_xx_max_fringes_m2_per_Hz": self.s_xx_max_fringes,
                "t_star_inflated_s": self.t_star_inflated,
                "xi_star_inflated_m": self.xi_star_inflated,
            }
        )
        return rec


def _ceiling(sources, mass, omega0, start: GaussianState, scale: float):
    eff = combine(sources, scale)
    lw = {
        c.kind.value: t_lambda(mass, omega0, s.lambda_loc).value
        for s, c in zip(sources, eff.report)
        if c.regime == "LW" and s.lambda_loc > 0
    }
    t_star = min(min(lw.values(), default=math.inf), 1.0 / eff.gamma if eff.gamma > 0 else math.inf)
    if math.isinf(t_star):
        xi = math.inf
    else:
        xi = float(coherence_length_along(start, PotentialSegment.free(t_star, eff.lambda_loc), [t_star])[0])
    return eff, lw, t_star, xi


def _self_consistent(sources, mass, omega0, start):
    """Classify sources at the coherence ceiling they themselves produce.

    Starts with every finite-range source short-wavelength and reclassifies at
    the resulting xi_star until the regimes stop changing.
    """
    finite = [s.saturation_length for s in sources if math.isfinite(s.saturation_length) and s.saturation_length > 0]
    scale = 2.0 * max(finite, default=1.0)
    regimes = None
    for _ in range(_MAX_CLASSIFICATION_ROUNDS):
        eff, lw, t_star, xi = _ceiling(sources, mass, omega0, start, scale)
        now = tuple(c.regime for c in eff.report)
        if now == regimes or math.isinf(xi):
            break
        regimes = now
        scale = xi
    return eff, lw, t_star, xi


def budget(
    sphere: Sphere,
    omega0: float,
    env: Environment,
    omega_i: float,
    slit_separation: float | None = None,
    inflation_time: float | None = None,
    cap_omega_t: float = DEFAULT_OMEGA_T_CAP,
) -> Budget:
    """Assemble the decoherence budget of a free expansion from the trap ground state.

    Parameters
    ----------
    slit_separation : float, optional
        d for the fringe-visibility ceiling; defaults to the sphere radius.
    inflation_time : float, optional
        when given, the coherence ceiling is also evaluated after an inflation
        of that length in -M wI^2 x^2 / 2 (vibrations included).
    """
    mass = sphere.mass
    d = sphere.radius if slit_separation is None else slit_separation
    sources = environmental_sources(env, sphere.radius)
    start = ground_state(mass, omega0)
    eff, lw, t_star, xi_star = _self_consistent(sources, mass, omega0, start)

    lam_v = vibration_source(mass, omega_i, env.vibration_psd).lambda_loc
    bound = max_coherent_gain(mass, omega0, omega_i, lam_v)
    s_inflation = HBAR / (mass * omega0 * omega_i)
    s_fringes = (4.0 * math.pi * HBAR / (d * mass * omega_i**1.5)) ** 2

    t_inf = xi_inf = math.nan
    if inflation_time is not None:
        seg = PotentialSegment.inverted(omega_i, inflation_time, eff.lambda_loc + lam_v)
        inflated = propagate_segment(start, seg, cap_omega_t)
        t_inf, xi_inf = _inflated_ceiling(inflated, eff, t_lambda(mass, omega0, eff.lambda_loc).value)

    return Budget(
        t_lambda=lw,
        gamma_total=eff.gamma,
        lambda_total=eff.lambda_loc,
        t_star=t_star,
        xi_star=xi_star,
        g_star=bound.g_star,
        g_p_star=bound.g_p_star,
        s_xx_max_inflation=s_inflation,
        s_xx_max_fringes=s_fringes,
        t_star_inflated=t_inf,
        xi_star_inflated=xi_inf,
        classification=eff.report,
    )


def _inflated_ceiling(state: GaussianState, eff, t_uninflated: float):
    """Peak of the free coherence after inflation, capped by 1/gamma.

    Inflation only advances the peak, so the uninflated peak time bounds the
    search.
    """
    t_sw = 1.0 / eff.gamma if eff.gamma > 0 else math.inf
    if eff.lambda_loc > 0:
        t_peak = simulated_peak_time(state, eff.lambda_loc, t_uninflated)
        if math.isnan(t_peak):
            t_peak = t_uninflated
    else:
        t_peak = math.inf
    t = min(t_peak, t_sw)
    if math.isinf(t):
        return t, math.inf
    xi = float(coherence_length_along(state, PotentialSegment.free(t, eff.lambda_loc), [t])[0])
    return t, xi


@dataclass(frozen=True)
class FalsificationWindow:
    xi_with_gravity: float
    xi_without_gravity: float
    d_low: float
    d_high: float
    ratio: float
    margin: float
    conclusive: bool

    def to_record(self) -> dict:
        return {
            "xi_with_gravity_m": self.xi_with_gravity,
            "xi_without_gravity_m": self.xi_without_gravity,
            "d_low_m": self.d_low,
            "d_high_m": self.d_high,
            "ratio": self.ratio,
            "margin": self.margin,
            "conclusive": self.conclusive,
        }


def falsification_window(
    sphere: Sphere,
    omega0: float,
    env: Environment,
    margin: float = DEFAULT_MARGIN,
    free_time: float | None = None,
    omega_i: float | None = None,
    inflation_time: float = 0.0,
    gravity: PldSource | None = None,
) -> FalsificationWindow:
    """Slit separations d with xi(Lambda + Lambda_G) << d << xi(Lambda).

    Both coherence lengths come from the protocol pipeline up to the slit, with
    and without the gravitational source.  ``free_time`` defaults to the
    gravity-free t_star; ``gravity`` overrides the homogeneous-sphere source.
    """
    if not margin > 0:
        raise DomainError("margin must be positive")
    omega_i = omega0 if omega_i is None else omega_i
    if free_time is None:
        free_time = budget(sphere, omega0, env, omega_i).t_star
        if not math.isfinite(free_time):
            raise DomainError("no standard decoherence: free_time must be given")
    grav = gravity_source(sphere.mass, sphere.radius) if gravity is None else gravity
    plan = ProtocolPlan(
        sphere=sphere,
        trap_frequency=omega0,
        inflator_frequency=omega_i,
        inflation_time=inflation_time,
        free_time=free_time,
        environment=env,
        margin=margin,
    )
    xi_off = run_protocol(plan).final_gaussian.coherence_length
    xi_on = run_protocol(replace(plan, custom_sources=(grav,))).final_gaussian.coherence_length
    ratio = xi_off / xi_on
    return FalsificationWindow(
        xi_with_gravity=xi_on,
        xi_without_gravity=xi_off,
        d_low=xi_on,
        d_high=xi_off,
        ratio=ratio,
        margin=margin,
        conclusive=ratio >= margin,
    )
