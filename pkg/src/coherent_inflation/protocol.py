"""The seven-step interferometer as a declarative pipeline.

1. ground state of the trap ``+M w0^2 x^2 / 2``
2. coherent inflation in ``-M wI^2 x^2 / 2`` for ``inflation_time``
3. free expansion for ``free_time``
4. instantaneous coherent slit: Gaussian -> cat of separation d
5. rotation in ``+M wI^2 x^2 / 2`` for ``rotation_time`` (pi / (4 wI))
6. momentum-to-position mapping in ``-M wI^2 x^2 / 2``
7. free drift to the detector, then pattern synthesis

Every dynamic step picks its PLD sources, splits them into long- and
short-wavelength parts at the relevant coherence scale and propagates with the
long-wavelength part.  Short-wavelength rates only suppress coherence by
``exp(-gamma t)``: before the slit this multiplies the coherence length, after
it the interference term of the pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decoherence import (
    Environment,
    SourceKind,
    Sphere,
    combine,
    environmental_sources,
    gravity_source,
    vibration_source,
)
from .dynamics import (
    DEFAULT_OMEGA_T_CAP,
    PotentialSegment,
    ReducedUnits,
    ci_gain_formula,
    max_coherent_gain,
    moments_along,
    propagate_segment,
    rotation_time,
)
from .errors import DomainError
from .gaussian_state import GaussianState, ground_state
from .interferometry import (
    CatState,
    EvolutionKind,
    FringePattern,
    GridSpec,
    ci_fringe_separation,
    ci_visibility_bound,
    synthesize,
)
from .quantities import HBAR

DEFAULT_DETECTABLE_FRINGE = 100e-9
DEFAULT_MARGIN = 10.0

# which source families act in which step; vibrations only where a potential is on
_POTENTIAL_STEPS = frozenset({2, 5, 6})
DYNAMIC_STEPS = (2, 3, 5, 6, 7)
_STEP_LABELS = {
    1: "cool",
    2: "inflate",
    3: "free",
    4: "slit",
    5: "rotate",
    6: "map",
    7: "drift",
}


@dataclass(frozen=True)
class ProtocolPlan:
    """All inputs of one run, SI units, angular frequencies in rad/s.

    ``slit_separation=None`` stops the run after step 3.  ``step_sources``
    optionally restricts, per step number, the enabled source kinds (values of
    :class:`SourceKind`); steps absent from the mapping keep the defaults.
    ``traverse_speed`` only converts step durations into landscape lengths.
    """

    sphere: Sphere
    trap_frequency: float
    inflator_frequency: float
    inflation_time: float
    free_time: float
    slit_separation: float | None = None
    slit_width: float | None = None
    environment: Environment | None = None
    rotation_duration: float | None = None
    mapping_duration: float | None = None
    drift_time: float = 0.0
    detectable_fringe: float = DEFAULT_DETECTABLE_FRINGE
    include_gravity: bool = False
    custom_sources: tuple = ()
    step_sources: dict | None = None
    traverse_speed: float | None = None
    margin: float = DEFAULT_MARGIN
    cap_omega_t: float = DEFAULT_OMEGA_T_CAP
    grid: GridSpec = GridSpec()

    def __post_init__(self):
        if not (self.trap_frequency > 0 and self.inflator_frequency > 0):
            raise DomainError("trap and inflator frequencies must be positive")
        for name in ("inflation_time", "free_time", "drift_time"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        for name in ("rotation_duration", "mapping_duration"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise DomainError(f"{name} must be non-negative")
        if self.slit_separation is not None and not self.slit_separation > 0:
            raise DomainError("slit separation must be positive")
        if not self.detectable_fringe > 0 or not self.margin > 0:
            raise DomainError("detectable_fringe and margin must be positive")
        if self.inflator_frequency * self.inflation_time > self.cap_omega_t:
            raise DomainError("inflation exceeds the omega*t cap")

    @property
    def mass(self) -> float:
        return self.sphere.mass

    @property
    def t_rotation(self) -> float:
        if self.rotation_duration is None:
            return rotation_time(self.inflator_frequency)
        return self.rotation_duration

    @property
    def rotation_is_standard(self) -> bool:
        return self.rotation_duration is None or math.isclose(
            self.rotation_duration, rotation_time(self.inflator_frequency), rel_tol=1e-12
        )

    def mapping_time(self) -> tuple:
        """Step-6 duration and whether it was clipped by the omega*t cap."""
        if self.mapping_duration is not None:
            return self.mapping_duration, False
        if self.slit_separation is None:
            return 0.0, False
        w = self.inflator_frequency
        base = 2.0 * math.pi * HBAR / (self.mass * self.slit_separation * w)
        wt = math.log(self.detectable_fringe / base) if self.detectable_fringe > base else 0.0
        if wt > self.cap_omega_t:
            return self.cap_omega_t / w, True
        return wt / w, False

    def sources(self, step: int) -> list:
        """PLD sources acting during ``step``."""
        out = []
        if self.environment is not None:
            out.extend(environmental_sources(self.environment, self.sphere.radius))
            if step in _POTENTIAL_STEPS and self.environment.vibration_psd > 0:
                out.append(
                    vibration_source(self.mass, self.inflator_frequency, self.environment.vibration_psd)
                )
        if self.include_gravity:
            out.append(gravity_source(self.mass, self.sphere.radius))
        out.extend(self.custom_sources)
        if self.step_sources is not None and step in self.step_sources:
            allowed = {SourceKind(k) if not isinstance(k, SourceKind) else k for k in self.step_sources[step]}
            out = [s for s in out if s.kind in allowed]
        return out

    def landscape_length(self, duration: float) -> float | None:
        return None if self.traverse_speed is None else self.traverse_speed * duration


@dataclass(frozen=True)
class StepRecord:
    """State of the run at the end of one step.

    Coherence length and purity refer to Gaussian stages; cat stages carry NaN
    there.  ``sw_exposure`` is the accumulated sum of gamma * t up to t_end.
    """

    step: int
    label: str
    t_start: float
    t_end: float
    stage: str
    state: GaussianState | None
    cat: CatState | None
    coherence_length: float
    purity: float
    gamma_eff: float
    lambda_eff: float
    sw_exposure: float
    classification: tuple = ()

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class ProtocolTrace:
    records: tuple
    pattern: FringePattern | None
    verdicts: dict
    summary: dict = field(default_factory=dict)

    def record(self, step: int) -> StepRecord:
        for rec in self.records:
            if rec.step == step:
                return rec
        raise KeyError(step)

    @property
    def final_gaussian(self) -> StepRecord:
        return [r for r in self.records if r.stage == "gaussian"][-1]

    @property
    def visibility(self) -> float:
        return math.nan if self.pattern is None else self.pattern.visibility


def _check_records(records):
    t_prev = -math.inf
    for rec in records:
        if rec.t_start > rec.t_end or rec.t_end < t_prev:
            raise DomainError("protocol trace is not time-ordered")
        t_prev = rec.t_end


_MAX_CLASSIFICATION_ROUNDS = 20
_TINY_LENGTH = 1e-300


def _regimes(eff) -> tuple:
    return tuple(c.regime for c in eff.report)


def _pre_slit_segment(plan: ProtocolPlan, step: int, state: GaussianState, bare: PotentialSegment, exposure: float):
    """Attach LW/SW rates to a pre-slit segment.

    Sources are first classified at the coherence length the segment would
    reach without decoherence, then reclassified at the coherence length the
    classified dynamics actually reach (short-wavelength loss included) until
    the regimes settle.  A cycle resolves to the option with more
    long-wavelength sources, whose quadratic law overestimates the loss.
    """
    sources = plan.sources(step)

    def end_scale(seg):
        end = propagate_segment(state, seg, plan.cap_omega_t) if seg.duration > 0 else state
        xi = end.coherence_length * math.exp(-(exposure + seg.sw_gamma * seg.duration))
        return max(xi, _TINY_LENGTH)

    def attach(eff):
        return PotentialSegment(bare.kind, bare.duration, bare.omega, eff.lambda_loc, eff.gamma)

    eff = combine(sources, end_scale(bare))
    seen = [eff]
    for _ in range(_MAX_CLASSIFICATION_ROUNDS):
        new = combine(sources, end_scale(attach(eff)))
        if _regimes(new) == _regimes(eff):
            eff = new
            break
        if any(_regimes(new) == _regimes(old) for old in seen):
            eff = max(seen + [new], key=lambda e: _regimes(e).count("LW"))
            break
        seen.append(new)
        eff = new
    return attach(eff), eff


def pre_slit_segments(plan: ProtocolPlan):
    """Steps 2 and 3 as segments with decoherence attached, plus the start state."""
    state = ground_state(plan.mass, plan.trap_frequency)
    start = state
    out = []
    exposure = 0.0
    for step, bare in (
        (2, PotentialSegment.inverted(plan.inflator_frequency, plan.inflation_time)),
        (3, PotentialSegment.free(plan.free_time)),
    ):
        seg, eff = _pre_slit_segment(plan, step, state, bare, exposure)
        state = propagate_segment(state, seg, plan.cap_omega_t)
        exposure += seg.sw_gamma * seg.duration
        out.append((step, seg, eff))
    return start, out


def run_protocol(plan: ProtocolPlan) -> ProtocolTrace:
    """Execute all steps and collect records, the pattern and the verdicts."""
    records = []
    state, segments = pre_slit_segments(plan)
    records.append(
        StepRecord(1, _STEP_LABELS[1], 0.0, 0.0, "gaussian", state, None,
                   state.coherence_length, state.purity, 0.0, 0.0, 0.0)
    )
    t = 0.0
    exposure = 0.0
    for step, seg, eff in segments:
        state = propagate_segment(state, seg, plan.cap_omega_t)
        exposure += seg.sw_gamma * seg.duration
        records.append(
            StepRecord(step, _STEP_LABELS[step], t, t + seg.duration, "gaussian", state, None,
                       state.coherence_length * math.exp(-exposure), state.purity,
                       eff.gamma, eff.lambda_loc, exposure, eff.report)
        )
        t += seg.duration

    xi_slit = records[-1].coherence_length
    verdicts = {
        "rotation_standard": plan.rotation_is_standard,
        "coherence_at_slit_m": xi_slit,
    }
    lam_inflation = segments[0][1].lw_lambda
    gain = ci_gain_formula(plan.trap_frequency, plan.inflator_frequency, plan.inflation_time)
    bound = max_coherent_gain(plan.mass, plan.trap_frequency, plan.inflator_frequency, lam_inflation)
    verdicts["inflation_gain"] = gain
    verdicts["inflation_coherent"] = gain * plan.margin <= bound.g_star

    pattern = None
    if plan.slit_separation is not None:
        d = plan.slit_separation
        cat = CatState(d, d / 10.0 if plan.slit_width is None else plan.slit_width, plan.mass)
        verdicts["slit_feasible"] = d <= xi_slit
        verdicts["slit_well_inside_coherence"] = d * plan.margin <= xi_slit
        records.append(
            StepRecord(4, _STEP_LABELS[4], t, t, "cat", None, cat, math.nan, math.nan, 0.0, 0.0, exposure)
        )
        t_map, capped = plan.mapping_time()
        verdicts["mapping_capped"] = capped
        post = []
        post_exposure = 0.0
        w = plan.inflator_frequency
        for step, bare in (
            (5, PotentialSegment.harmonic(w, plan.t_rotation)),
            (6, PotentialSegment.inverted(w, t_map)),
            (7, PotentialSegment.free(plan.drift_time)),
        ):
            # after the slit the superposition size sets the scale
            eff = combine(plan.sources(step), d)
            seg = PotentialSegment(bare.kind, bare.duration, bare.omega, eff.lambda_loc, eff.gamma)
            post.append(seg)
            post_exposure += seg.sw_gamma * seg.duration
            records.append(
                StepRecord(step, _STEP_LABELS[step], t, t + seg.duration, "cat", None, cat,
                           math.nan, math.nan, eff.gamma, eff.lambda_loc,
                           exposure + post_exposure, eff.report)
            )
            t += seg.duration
        lam_map = post[1].lw_lambda
        verdicts["fringe_lambda_ratio"] = lam_map / ci_visibility_bound(w, d).value
        verdicts["fringes_resolvable"] = lam_map * plan.margin <= ci_visibility_bound(w, d).value
        pattern = synthesize(
            cat, post, plan.grid, EvolutionKind.CI_EXPANSION,
            coherence=math.exp(-post_exposure), cap_omega_t=plan.cap_omega_t,
        )
        verdicts["visibility"] = pattern.visibility
        verdicts["fringe_separation_m"] = pattern.fringe_separation
        verdicts["target_fringe_separation_m"] = (
            ci_fringe_separation(plan.mass, d, w, t_map, plan.cap_omega_t).value if t_map > 0 else math.nan
        )

    _check_records(records)
    trace = ProtocolTrace(tuple(records), pattern, verdicts)
    return ProtocolTrace(trace.records, pattern, verdicts, summarize(plan, trace))


def summarize(plan: ProtocolPlan, trace: ProtocolTrace) -> dict:
    """Flat key -> scalar record of a run (keys carry SI units)."""
    out = {
        "mass_kg": plan.mass,
        "total_time_s": trace.records[-1].t_end,
    }
    for rec in trace.records:
        if rec.stage == "gaussian":
            out[f"step{rec.step}_coherence_length_m"] = rec.coherence_length
            out[f"step{rec.step}_purity"] = rec.purity
        out[f"step{rec.step}_gamma_eff_Hz"] = rec.gamma_eff
        out[f"step{rec.step}_lambda_eff_Hz_per_m2"] = rec.lambda_eff
        length = plan.landscape_length(rec.duration)
        if length is not None:
            out[f"step{rec.step}_landscape_length_m"] = length
    for key, val in trace.verdicts.items():
        out[key] = val
    return out


@dataclass(frozen=True)
class Timeline:
    t: np.ndarray
    coherence_length: np.ndarray
    reduced: bool = False


def coherence_timeline(plan: ProtocolPlan, n_samples: int, reduced: bool = False) -> Timeline:
    """Coherence length through steps 1-3 on a uniform time grid.

    Short-wavelength loss enters as the factor exp(-sum gamma t).  With
    ``reduced=True`` times are in units of 1/w0 and lengths in units of the
    ground-state width x0.
    """
    if n_samples < 2:
        raise DomainError("n_samples must be >= 2")
    state, segments = pre_slit_segments(plan)
    units = ReducedUnits.of(state)
    total = sum(seg.duration for _, seg, _ in segments)
    times = np.linspace(0.0, total, n_samples)
    xi = np.empty_like(times)
    xi[0] = state.coherence_length
    t0 = 0.0
    exposure = 0.0
    for k, (_, seg, _) in enumerate(segments):
        last = k == len(segments) - 1
        mask = (times > t0) & ((times <= t0 + seg.duration) if not last else (times >= t0))
        if np.any(mask):
            local = np.minimum(times[mask] - t0, seg.duration)
            vx, _, _, det = moments_along(state, seg, local)
            purity = np.minimum(1.0, HBAR / (2.0 * np.sqrt(det)))
            xi[mask] = purity * np.sqrt(8.0 * vx) * np.exp(-(exposure + seg.sw_gamma * local))
        state = propagate_segment(state, seg, plan.cap_omega_t)
        exposure += seg.sw_gamma * seg.duration
        t0 += seg.duration
    if reduced:
        return Timeline(times * units.omega0, xi / units.x0, True)
    return Timeline(times, xi, False)
