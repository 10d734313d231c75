"""Coherent-inflation matter-wave interferometry with a levitated microsphere.

Gaussian centre-of-mass dynamics under position-localisation decoherence,
double-slit patterns with decoherence blur, the seven-step protocol and the
environmental budgets it needs.
"""

from .decoherence import (
    Environment,
    PldSource,
    SourceKind,
    Sphere,
    combine,
    decoherence_function,
    environmental_sources,
    gravity_source,
    vibration_source,
)
from .dynamics import (
    PotentialSegment,
    SegmentKind,
    ci_gain,
    max_coherent_gain,
    propagate,
    propagate_segment,
)
from .errors import (
    ConsistencyError,
    DomainError,
    OverflowGuardError,
    ResolutionError,
    SimulationError,
    UnitError,
    VisibilityError,
)
from .feasibility import Budget, FalsificationWindow, budget, falsification_window, t_lambda
from .gaussian_state import GaussianState, diagnostics, ground_state, inflated_state
from .interferometry import CatState, FringePattern, blurred_pattern, synthesize, unblurred_pattern, visibility
from .protocol import ProtocolPlan, ProtocolTrace, coherence_timeline, run_protocol
from .quantities import CONSTANTS, Quantity, convert, from_unit, sphere_mass

__version__ = "0.1.0"
