"""Exception types shared across the package.

The CLI maps each family onto an exit code, so new errors should subclass
one of these rather than ``Exception`` directly.
"""


class SimulationError(Exception):
    """Base class for all package errors."""


class DomainError(SimulationError, ValueError):
    """An input lies outside the physical domain of an operation."""


class UnitError(SimulationError, ValueError):
    """Dimension mismatch or unknown unit name."""


class ConsistencyError(SimulationError, ArithmeticError):
    """A propagated state violates an invariant it should preserve."""


class ResolutionError(SimulationError):
    """A grid is too coarse to resolve the requested structure."""


class OverflowGuardError(SimulationError):
    """An exponential stretch exceeds the configured cap on omega*t."""


class VisibilityError(SimulationError):
    """Fringe visibility is undefined (not enough extrema in the window)."""
