"""Model constants and the delayed right-hand side.

The scalar delay equation is

    X'(t) = -p X(t-tau) + r X(t) - s X(t-tau)^2 - X(t-tau)^2 X(t) - u F(t)

with one discrete delay tau. Time is measured in units of 10 kyr.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .forcing import ForcingSpec, eval_forcing


@dataclass(frozen=True)
class ModelParams:
    """Constants of the delay equation plus the forcing amplitude u."""

    p: float = 0.95
    r: float = 0.8
    s: float = 0.8
    tau: float = 1.55
    u: float = 0.0

    def __post_init__(self):
        for name in ("p", "r", "s", "tau", "u"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise DomainError(f"parameter {name} must be a finite real, got {v!r}")
        if self.tau <= 0:
            raise DomainError(f"delay tau must be positive, got {self.tau}")

    def replace(self, **kw) -> "ModelParams":
        d = {"p": self.p, "r": self.r, "s": self.s, "tau": self.tau, "u": self.u}
        d.update(kw)
        return ModelParams(**d)


def rhs(t: float, x1: float, x2: float, params: ModelParams,
        forcing: ForcingSpec) -> float:
    """Right-hand side f(t, x1, x2): x1 is the current value X(t), x2 the
    delayed value X(t-tau)."""
    if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(t)):
        raise DomainError(f"rhs arguments must be finite, got t={t}, x1={x1}, x2={x2}")
    q = x2 * x2
    f = -params.p * x2 + params.r * x1 - params.s * q - q * x1 \
        - params.u * float(eval_forcing(forcing, t))
    return float(f)


def equilibria(params: ModelParams) -> tuple[float, ...]:
    """Real roots of the unforced cubic -p x + r x - s x^2 - x^3, ascending.

    Constant histories at these values are equilibria of the unforced
    equation; for the default constants the roots are {-0.5, -0.3, 0}.
    """
    # x * (x^2 + s x + (p - r)) = 0
    roots = [0.0]
    disc = params.s * params.s - 4.0 * (params.p - params.r)
    if disc >= 0:
        sq = math.sqrt(disc)
        roots.extend([(-params.s - sq) / 2.0, (-params.s + sq) / 2.0])
    return tuple(sorted(set(roots)))


def cubic_slope(params: ModelParams, x: float) -> float:
    """Derivative of the unforced cubic at x (instantaneous feedback strength)."""
    return (params.r - params.p) - 2.0 * params.s * x - 3.0 * x * x
