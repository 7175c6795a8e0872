"""Forcing laws F(t) for the delayed model.

The model couples to forcing through a term -u * F(t), where the amplitude
u lives in ModelParams. A step-wise amplitude modulation is expressed as a
time-dependent scale wrapped around a base law, so the integrator sees a
single callable interface for every scenario.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, OutOfRangeError

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ZeroForcing:
    """F(t) = 0."""


@dataclass(frozen=True)
class PeriodicForcing:
    """F(t) = sin(2 pi t / T - phi)."""

    T: float = 4.1
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ConfigurationError(f"period T must be positive, got {self.T}")
        if not (math.isfinite(self.phi) and abs(self.phi) <= math.pi + 1e-12):
            raise ConfigurationError(f"phase phi must lie in [-pi, pi], got {self.phi}")


@dataclass(frozen=True)
class SumOfSines:
    """F(t) = sum_i a_i sin(2 pi f_i t - phi_i); terms are (f, a, phi) triples."""

    terms: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ConfigurationError("SumOfSines needs at least one term")
        object.__setattr__(self, "terms",
                           tuple((float(f), float(a), float(ph)) for f, a, ph in self.terms))
        for f, a, ph in self.terms:
            if not all(math.isfinite(v) for v in (f, a, ph)):
                raise ConfigurationError(f"non-finite sum-of-sines term ({f}, {a}, {ph})")


@dataclass(frozen=True)
class StepAmplitudeScale:
    """scale(t) * base(t), with scale jumping from scale_before to scale_after
    at t_switch (the switch time itself uses scale_after)."""

    t_switch: float
    scale_before: float
    scale_after: float
    base: "ForcingSpec"

    def __post_init__(self):
        if isinstance(self.base, StepAmplitudeScale):
            raise ConfigurationError("StepAmplitudeScale cannot wrap another StepAmplitudeScale")
        for name in ("t_switch", "scale_before", "scale_after"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")


@dataclass(frozen=True)
class TabulatedForcing:
    """Linear interpolation of (time, value) samples; no extrapolation."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) < 2:
            raise ConfigurationError("tabulated forcing needs at least 2 samples")
        if len(times) != len(values):
            raise ConfigurationError("times and values must have equal length")
        arr = np.asarray(times)
        if not np.all(np.diff(arr) > 0):
            raise ConfigurationError("tabulated times must be strictly increasing")
        if not (np.all(np.isfinite(arr)) and np.all(np.isfinite(values))):
            raise ConfigurationError("tabulated samples must be finite")


ForcingSpec = (ZeroForcing | PeriodicForcing | SumOfSines
               | StepAmplitudeScale | TabulatedForcing)

_RANGE_TOL = 1e-9


def eval_forcing(spec: ForcingSpec, t):
    """Evaluate F at a scalar time or an array of times."""
    t_arr = np.asarray(t, dtype=np.float64)
    out = _eval(spec, t_arr)
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def _eval(spec: ForcingSpec, t: np.ndarray) -> np.ndarray:
    if isinstance(spec, ZeroForcing):
        return np.zeros_like(t)
    if isinstance(spec, PeriodicForcing):
        return np.sin(_TWO_PI * t / spec.T - spec.phi)
    if isinstance(spec, SumOfSines):
        out = np.zeros_like(t)
        for f, a, ph in spec.terms:
            out = out + a * np.sin(_TWO_PI * f * t - ph)
        return out
    if isinstance(spec, StepAmplitudeScale):
        scale = np.where(t < spec.t_switch, spec.scale_before, spec.scale_after)
        return scale * _eval(spec.base, t)
    if isinstance(spec, TabulatedForcing):
        lo, hi = spec.times[0], spec.times[-1]
        if np.any(t < lo - _RANGE_TOL) or np.any(t > hi + _RANGE_TOL):
            bad = t[(t < lo - _RANGE_TOL) | (t > hi + _RANGE_TOL)]
            first = float(np.atleast_1d(bad)[0])
            raise OutOfRangeError(
                f"time {first} outside tabulated range [{lo}, {hi}]; no extrapolation")
        return np.interp(t, spec.times, spec.values)
    raise DomainError(f"unknown forcing spec {type(spec).__name__}")


def forcing_period(spec: ForcingSpec) -> float | None:
    """Period of the law, or None when it is not periodic (or has no
    distinguished period, as for the zero law)."""
    if isinstance(spec, PeriodicForcing):
        return spec.T
    if isinstance(spec, SumOfSines):
        freqs = np.array([abs(f) for f, _, _ in spec.terms])
        if np.any(freqs == 0):
            return None
        base = freqs.min()
        ratios = freqs / base
        if np.allclose(ratios, np.round(ratios), rtol=0, atol=1e-9):
            return 1.0 / base
        return None
    return None


def load_tabulated(path, kyr: bool = False,
                   rescale: tuple[float, float] | None = None) -> TabulatedForcing:
    """Parse a two-column text file into a TabulatedForcing.

    Each non-comment line holds "time,value" or "time value". With
    kyr=True the times are divided by 10 (kyr -> model units). rescale
    applies offset + scale * value to the second column.
    """
    path = Path(path)
    times: list[float] = []
    values: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected two columns, got {raw.strip()!r}")
            try:
                t, v = float(parts[0]), float(parts[1])
            except ValueError:
                raise ConfigurationError(
                    f"{path}:{lineno}: non-numeric entry in {raw.strip()!r}") from None
            if times and t <= times[-1]:
                raise ConfigurationError(
                    f"{path}:{lineno}: times must be strictly increasing "
                    f"({t} after {times[-1]})")
            times.append(t)
            values.append(v)
    if len(times) < 2:
        raise ConfigurationError(f"{path}: needs at least 2 samples, got {len(times)}")
    if kyr:
        times = [t / 10.0 for t in times]
    if rescale is not None:
        off, sc = rescale
        values = [off + sc * v for v in values]
    return TabulatedForcing(tuple(times), tuple(values))


def forcing_to_dict(spec: ForcingSpec) -> dict:
    if isinstance(spec, ZeroForcing):
        return {"kind": "zero"}
    if isinstance(spec, PeriodicForcing):
        return {"kind": "periodic", "T": spec.T, "phi": spec.phi}
    if isinstance(spec, SumOfSines):
        return {"kind": "sum_of_sines", "terms": [list(t) for t in spec.terms]}
    if isinstance(spec, StepAmplitudeScale):
        return {"kind": "step_scale", "t_switch": spec.t_switch,
                "scale_before": spec.scale_before, "scale_after": spec.scale_after,
                "base": forcing_to_dict(spec.base)}
    if isinstance(spec, TabulatedForcing):
        return {"kind": "tabulated", "times": list(spec.times),
                "values": list(spec.values)}
    raise DomainError(f"unknown forcing spec {type(spec).__name__}")


def forcing_from_dict(d: dict) -> ForcingSpec:
    kind = d.get("kind")
    if kind == "zero":
        return ZeroForcing()
    if kind == "periodic":
        return PeriodicForcing(T=float(d.get("T", 4.1)), phi=float(d.get("phi", 0.0)))
    if kind == "sum_of_sines":
        return SumOfSines(tuple(tuple(t) for t in d["terms"]))
    if kind == "step_scale":
        return StepAmplitudeScale(
            t_switch=float(d["t_switch"]), scale_before=float(d["scale_before"]),
            scale_after=float(d["scale_after"]), base=forcing_from_dict(d["base"]))
    if kind == "tabulated":
        if "path" in d:
            return load_tabulated(d["path"], kyr=bool(d.get("kyr", False)),
                                  rescale=tuple(d["rescale"]) if d.get("rescale") else None)
        return TabulatedForcing(tuple(d["times"]), tuple(d["values"]))
    raise ConfigurationError(f"unknown forcing kind {kind!r}")
