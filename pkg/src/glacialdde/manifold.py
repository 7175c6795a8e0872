"""Stable manifolds of planar saddles by a two-curve search-circle method.

The classic search-circle construction grows a stable manifold point by
point: the next point sits on a circle of adaptively chosen radius around
the last one, positioned so its image lands on the curve computed so far.
For maps given implicitly through a pair (g, r) = (R M^(ell+1) L, R M^ell L)
the same idea works without ever solving the implicit equation: keep two
point sequences, S_L in the domain plane and S_R with S_R[j] = r(S_L[j]),
and accept a candidate x when g(x) meets the polyline through S_R. With
r = identity and g an explicit map this reduces to the original method.

Intersections are located by bisection on the search-circle angle, never
by root-finding on the map itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .errors import (ConfigurationError, DomainError, IntegrationError,
                     OutOfRangeError, PreconditionError, StallError)
from .eqfree import (FixedPointRecord, HealedMapConfig, PlanarPoint,
                     restrictions_at)

MapFn = Callable[[np.ndarray], np.ndarray]

_ON_TOL = 1e-8


@dataclass(frozen=True)
class PlanarMapPair:
    """Image map g and chart map r defining an implicit planar map.

    Both act on (m, 2) arrays of points. evaluate_pair returns (g(x), r(x))
    and may be overridden to share work between the two.
    """

    g: MapFn
    r: MapFn
    pair: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None

    def evaluate_pair(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.pair is not None:
            return self.pair(points)
        return self.g(points), self.r(points)


def identity_chart_pair(g: MapFn) -> PlanarMapPair:
    """Wrap an explicit planar map: r is the identity."""
    return PlanarMapPair(g=g, r=lambda pts: np.array(pts, dtype=np.float64, copy=True))


def dde_map_pair(cfg: HealedMapConfig) -> PlanarMapPair:
    """The equation-free pair for the delay model at cfg's healing time."""

    def g(pts):
        return restrictions_at(pts, cfg, (cfg.ell + 1,))[cfg.ell + 1]

    def r(pts):
        return restrictions_at(pts, cfg, (cfg.ell,))[cfg.ell]

    def pair(pts):
        vals = restrictions_at(pts, cfg, (cfg.ell, cfg.ell + 1))
        return vals[cfg.ell + 1], vals[cfg.ell]

    return PlanarMapPair(g=g, r=r, pair=pair)


@dataclass(frozen=True)
class SCConfig:
    """Search-circle tuning knobs.

    delta_* bound the circle radius; alpha_max caps the turning angle
    between consecutive segments; bisect_tol is the accepted distance of
    the candidate's image from the reference polyline; growth stops at
    max_arclength, max_points, or on leaving box (x1min, x1max, x2min,
    x2max).
    """

    delta_init: float = 1e-3
    delta_min: float = 1e-6
    delta_max: float = 0.05
    alpha_max: float = 0.3
    bisect_tol: float = 1e-9
    max_arclength: float = 2.0
    max_points: int = 4000
    seed_offset: float = 1e-3
    arc_points: int = 64
    box: tuple[float, float, float, float] | None = None
    grow_factor: float = 1.2
    shrink_factor: float = 0.5
    max_bisect: int = 90
    fd_eps: float = 1e-6
    multiplier_tol: float = 1e-6

    def __post_init__(self):
        if not (0 < self.delta_min <= self.delta_init <= self.delta_max):
            raise ConfigurationError(
                f"need 0 < delta_min <= delta_init <= delta_max, got "
                f"{self.delta_min}, {self.delta_init}, {self.delta_max}")
        if self.bisect_tol <= 0:
            raise ConfigurationError(f"bisect_tol must be positive, got {self.bisect_tol}")
        if self.seed_offset <= 0:
            raise ConfigurationError(f"seed_offset must be positive, got {self.seed_offset}")
        if self.arc_points < 4:
            raise ConfigurationError(f"arc_points must be >= 4, got {self.arc_points}")


@dataclass
class ManifoldCurve:
    """Paired polylines: s_l in the domain plane, s_r[j] = r(s_l[j])."""

    s_l: np.ndarray
    s_r: np.ndarray
    arclength: np.ndarray
    delta: np.ndarray
    stalled: bool = False

    def __len__(self) -> int:
        return self.s_l.shape[0]

    @property
    def total_arclength(self) -> float:
        return float(self.arclength[-1])


def _nearest_segment(curve: np.ndarray, p: np.ndarray):
    """Signed distance of p to the polyline, via its nearest segment.

    Returns (signed_distance, segment_index, parameter_on_segment,
    interior). interior is False when the nearest foot is a clamped
    endpoint of the whole polyline, i.e. p projects beyond the curve.
    """
    a = curve[:-1]
    b = curve[1:]
    ab = b - a
    ap = p[None, :] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        tt = np.einsum("ij,ij->i", ap, ab) / np.where(denom > 0, denom, 1.0)
    tt = np.clip(tt, 0.0, 1.0)
    foot = a + tt[:, None] * ab
    diff = p[None, :] - foot
    d = np.hypot(diff[:, 0], diff[:, 1])
    j = int(np.argmin(d))
    cross = ab[j, 0] * (p[1] - a[j, 1]) - ab[j, 1] * (p[0] - a[j, 0])
    sign = 1.0 if cross > 0 else (-1.0 if cross < 0 else 0.0)
    interior = not ((j == 0 and tt[j] == 0.0)
                    or (j == len(ab) - 1 and tt[j] == 1.0))
    return sign * d[j], j, float(tt[j]), interior


def signed_side_distance(curve: ManifoldCurve | np.ndarray, p) -> tuple[float, bool]:
    """Signed distance of p from the curve's domain polyline and whether the
    projection falls in the curve's interior."""
    poly = curve.s_l if isinstance(curve, ManifoldCurve) else np.asarray(curve, float)
    pt = np.asarray(p, dtype=np.float64).reshape(2)
    sd, _, _, interior = _nearest_segment(poly, pt)
    return float(sd), bool(interior)


def point_side(curve: ManifoldCurve | np.ndarray, p) -> Literal["above", "below", "on"]:
    """Which side of the curve p lies on ('on' within 1e-8); points whose
    projection falls beyond the curve's ends are outside its coverage."""
    sd, interior = signed_side_distance(curve, p)
    if not interior:
        raise OutOfRangeError(
            f"point {tuple(np.asarray(p, float).reshape(2))} projects beyond "
            "the computed curve; no side is defined")
    if abs(sd) < _ON_TOL:
        return "on"
    return "above" if sd > 0 else "below"


def merge_branches(minus: ManifoldCurve, plus: ManifoldCurve) -> ManifoldCurve:
    """Concatenate the two branches through the shared saddle point."""
    if len(minus) < 2 or len(plus) < 2:
        raise DomainError("both branches need at least two points to merge")
    s_l = np.concatenate([minus.s_l[::-1], plus.s_l[1:]], axis=0)
    s_r = np.concatenate([minus.s_r[::-1], plus.s_r[1:]], axis=0)
    delta = np.concatenate([minus.delta[::-1], plus.delta[1:]])
    seg = np.hypot(*np.diff(s_l, axis=0).T)
    arclength = np.concatenate([[0.0], np.cumsum(seg)])
    return ManifoldCurve(s_l=s_l, s_r=s_r, arclength=arclength, delta=delta,
                         stalled=minus.stalled or plus.stalled)


def saddle_frame(point, maps: PlanarMapPair, cfg: SCConfig) -> tuple[np.ndarray, complex, complex]:
    """Stable eigenvector and (stable, unstable) multipliers of the implicit
    map at the given fixed point, from finite differences of (g, r).

    Raises PreconditionError unless exactly one multiplier lies inside and
    one outside the unit circle, with the stable one real and positive
    (the orientation-preserving case this growth routine handles).
    """
    x = np.asarray(point, dtype=np.float64).reshape(2)
    eps = cfg.fd_eps
    pts = np.array([[x[0] + eps, x[1]], [x[0] - eps, x[1]],
                    [x[0], x[1] + eps], [x[0], x[1] - eps]])
    g_vals, r_vals = maps.evaluate_pair(pts)
    A_g = np.stack([(g_vals[0] - g_vals[1]) / (2 * eps),
                    (g_vals[2] - g_vals[3]) / (2 * eps)], axis=1)
    A_r = np.stack([(r_vals[0] - r_vals[1]) / (2 * eps),
                    (r_vals[2] - r_vals[3]) / (2 * eps)], axis=1)
    if abs(np.linalg.det(A_r)) < 1e-14 * max(1.0, float(np.abs(A_r).max()) ** 2):
        raise PreconditionError("chart Jacobian singular at the fixed point")
    D = np.linalg.solve(A_r, A_g)
    lam, vecs = np.linalg.eig(D)
    mags = np.abs(lam)
    tol = cfg.multiplier_tol
    inside = mags < 1.0 - tol
    outside = mags > 1.0 + tol
    if inside.sum() != 1 or outside.sum() != 1:
        raise PreconditionError(
            f"not a saddle: multipliers {lam} must straddle the unit circle")
    i_s = int(np.flatnonzero(inside)[0])
    lam_s = lam[i_s]
    if abs(lam_s.imag) > 1e-9 or lam_s.real <= 0:
        raise PreconditionError(
            f"stable multiplier {lam_s} must be real and positive for "
            "search-circle growth")
    v = vecs[:, i_s].real
    v = v / math.hypot(*v)
    if (v[0] < 0) or (v[0] == 0 and v[1] < 0):
        v = -v
    return v, complex(lam_s), complex(lam[int(np.flatnonzero(outside)[0])])


def _rotate(d: np.ndarray, theta) -> np.ndarray:
    ca, sa = np.cos(theta), np.sin(theta)
    return np.stack([ca * d[0] - sa * d[1], ca * d[1] + sa * d[0]], axis=-1)


def grow_stable_manifold(saddle: FixedPointRecord | tuple, direction: int,
                         maps: PlanarMapPair, cfg: SCConfig) -> ManifoldCurve:
    """Grow one branch of the stable manifold from a verified saddle.

    direction +1/-1 selects the branch along +/- the stable eigenvector.
    Raises StallError (with the partial curve attached) when the search
    radius underflows delta_min without bracketing an intersection.
    """
    if direction not in (1, -1):
        raise ConfigurationError(f"direction must be +1 or -1, got {direction}")
    point = saddle.point if isinstance(saddle, FixedPointRecord) else saddle
    x0 = np.asarray(point, dtype=np.float64).reshape(2)
    v_s, lam_s, lam_u = saddle_frame(x0, maps, cfg)

    x1 = x0 + direction * cfg.seed_offset * v_s
    s_l = [x0.copy(), x1]
    s_r = [maps.r(x0[None, :])[0], maps.r(x1[None, :])[0]]
    deltas = [0.0, cfg.seed_offset]
    arclen = [0.0, cfg.seed_offset]

    def partial(stalled: bool) -> ManifoldCurve:
        return ManifoldCurve(s_l=np.array(s_l), s_r=np.array(s_r),
                             arclength=np.array(arclen), delta=np.array(deltas),
                             stalled=stalled)

    def eval_g(points: np.ndarray) -> np.ndarray:
        try:
            return maps.g(points)
        except IntegrationError:
            return np.full((points.shape[0], 2), np.nan)

    delta = cfg.delta_init
    while len(s_l) < cfg.max_points and arclen[-1] < cfg.max_arclength:
        xk = s_l[-1]
        d_prev = s_l[-1] - s_l[-2]
        d_prev = d_prev / math.hypot(*d_prev)
        ref = np.array(s_r)
        accepted = False
        while not accepted:
            theta = np.linspace(-np.pi / 2, np.pi / 2, cfg.arc_points)
            cand = xk[None, :] + delta * _rotate(d_prev, theta)
            img = eval_g(cand)
            sides = np.full(cfg.arc_points, np.nan)
            valid = np.zeros(cfg.arc_points, dtype=bool)
            for i in range(cfg.arc_points):
                if not np.all(np.isfinite(img[i])):
                    continue
                sd, _, _, interior = _nearest_segment(ref, img[i])
                sides[i] = sd
                valid[i] = interior
            bracket = [i for i in range(cfg.arc_points - 1)
                       if valid[i] and valid[i + 1] and sides[i] * sides[i + 1] < 0]
            if not bracket:
                delta *= cfg.shrink_factor
                if delta < cfg.delta_min:
                    curve = partial(stalled=True)
                    raise StallError(
                        f"search radius underflowed {cfg.delta_min:.3g} with no "
                        f"bracketed intersection at point {len(s_l)} "
                        f"(arclength {arclen[-1]:.4f}, last point "
                        f"({xk[0]:.6f}, {xk[1]:.6f}))",
                        last_point=PlanarPoint(float(xk[0]), float(xk[1])),
                        curve=curve)
                continue
            mids = np.array([0.5 * (theta[i] + theta[i + 1]) for i in bracket])
            i0 = bracket[int(np.argmin(np.abs(mids)))]
            lo, hi = theta[i0], theta[i0 + 1]
            s_lo = sides[i0]
            x_new = None
            cm = None
            for _ in range(cfg.max_bisect):
                tm = 0.5 * (lo + hi)
                cm = xk + delta * _rotate(d_prev, tm)
                im = eval_g(cm[None, :])[0]
                if not np.all(np.isfinite(im)):
                    break
                sd, _, _, _ = _nearest_segment(ref, im)
                if abs(sd) < cfg.bisect_tol:
                    x_new = cm
                    break
                if sd * s_lo < 0:
                    hi = tm
                else:
                    lo = tm
                    s_lo = sd
            if x_new is None:
                if cm is None:
                    delta *= cfg.shrink_factor
                    continue
                x_new = cm  # angle bracket exhausted; geometrically converged
            d_new = x_new - xk
            step_len = math.hypot(*d_new)
            ang = math.acos(max(-1.0, min(1.0, float(np.dot(d_new, d_prev)) / step_len)))
            if ang > cfg.alpha_max and delta * cfg.shrink_factor >= cfg.delta_min:
                delta *= cfg.shrink_factor
                continue
            s_l.append(x_new)
            s_r.append(maps.r(x_new[None, :])[0])
            deltas.append(delta)
            arclen.append(arclen[-1] + step_len)
            accepted = True
            if ang < 0.5 * cfg.alpha_max:
                delta = min(delta * cfg.grow_factor, cfg.delta_max)
            if cfg.box is not None:
                x1min, x1max, x2min, x2max = cfg.box
                if not (x1min <= x_new[0] <= x1max and x2min <= x_new[1] <= x2max):
                    return partial(stalled=False)
    return partial(stalled=False)
