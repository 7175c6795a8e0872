"""Exception hierarchy for the toolkit.

Configuration problems (bad grids, malformed files) are separated from
numerical failures (blow-up, Newton divergence) so the CLI can map them
to distinct exit codes.
"""
from __future__ import annotations


class GlacialDDEError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(GlacialDDEError):
    """Invalid configuration: bad grids, unknown keys, contract violations."""


class DomainError(GlacialDDEError):
    """Operation called with values outside its domain (non-finite, mismatched grids)."""


class IntegrationError(GlacialDDEError):
    """Trajectory left the admissible range (|X| > abort bound) or went non-finite."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class OutOfRangeError(GlacialDDEError):
    """Evaluation outside tabulated data range or curve coverage."""


class NoConvergenceError(GlacialDDEError):
    """Newton iteration did not reach tolerance within the iteration budget."""

    def __init__(self, message: str, residual: float | None = None,
                 last_point=None):
        super().__init__(message)
        self.residual = residual
        self.last_point = last_point


class ChartValidityError(GlacialDDEError):
    """The 2x2 chart linearization is singular; the planar coordinates fail here."""


class PreconditionError(GlacialDDEError):
    """A documented precondition was violated (e.g. non-saddle fixed point)."""


class StallError(GlacialDDEError):
    """Manifold growth could not bracket an intersection above the radius floor."""

    def __init__(self, message: str, last_point=None, curve=None):
        super().__init__(message)
        self.last_point = last_point
        self.curve = curve
