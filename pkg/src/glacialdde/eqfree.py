"""Equation-free reduction of the delay model to a planar map.

Lifting embeds a chart point (x1, x2) as the discontinuous state with
constant history x2 and head x1; restriction reads (head, oldest sample)
back off a history window. Healing evolves the lifted state a whole
number of forcing periods so it relaxes onto the attracting
two-dimensional slow manifold before any comparison. Fixed points of the
implicitly defined healed map solve

    R M^(ell+k) L x  =  R M^ell L x      (k = orbit period in strobe units)

with a finite-difference Jacobian; the healed-map linearization is
D = [d(R M^ell L)]^-1 [d(R M^(ell+k) L)], whose eigenvalues classify the
point against the unit circle.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple

import numpy as np

from .errors import (ChartValidityError, ConfigurationError, DomainError,
                     IntegrationError, NoConvergenceError)
from .forcing import ForcingSpec, forcing_period
from .integrate import HistoryVector, history_length, run_batch
from .model import ModelParams

WORK_RECT = (-0.75, 0.15, -0.75, 0.15)
_CIRCLE_TOL = 1e-6

Classification = Literal["sink", "saddle", "source", "marginal"]


class PlanarPoint(NamedTuple):
    """Chart coordinates: x1 is the head value X(t), x2 the delayed X(t-tau)."""

    x1: float
    x2: float


def as_points(x) -> np.ndarray:
    """Coerce a point or an array of points to shape (m, 2)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError(f"expected planar point(s), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("planar points must be finite")
    return arr


@dataclass(frozen=True)
class HealedMapConfig:
    """Everything needed to evaluate the healed planar map and its fixed points."""

    params: ModelParams
    forcing: ForcingSpec
    h: float = 0.01
    ell: int = 1
    fd_eps: float = 1e-6
    newton_tol: float = 1e-10
    newton_step_tol: float = 1e-8
    newton_max_iter: int = 50

    def __post_init__(self):
        if self.ell < 1 or self.ell != int(self.ell):
            raise ConfigurationError(f"healing time ell must be a positive integer, got {self.ell}")
        T = forcing_period(self.forcing)
        if T is None:
            raise ConfigurationError("healed maps need a periodic forcing law")
        if T < self.params.tau:
            raise ConfigurationError(
                f"forcing period T={T} must be >= tau={self.params.tau} so one "
                "period heals the lifted state")
        n_per = round(T / self.h)
        if abs(n_per * self.h - T) > 1e-9:
            raise ConfigurationError(f"T={T} is not an integer multiple of h={self.h}")
        history_length(self.params.tau, self.h)  # validates tau/h

    @property
    def period(self) -> float:
        return float(forcing_period(self.forcing))

    @property
    def steps_per_period(self) -> int:
        return round(self.period / self.h)

    @property
    def n(self) -> int:
        return history_length(self.params.tau, self.h)

    def with_u(self, u: float) -> "HealedMapConfig":
        return replace(self, params=self.params.replace(u=u))


@dataclass
class FixedPointRecord:
    """A converged fixed point of the healed map (or of its k-th iterate)."""

    point: PlanarPoint
    u: float
    eigenvalues: tuple[complex, complex]
    classification: Classification
    period: int = 1
    residual: float = 0.0
    iterations: int = 0


@dataclass
class ScalarField:
    """Values of a scalar diagnostic on a rectangular chart grid."""

    x1: np.ndarray
    x2: np.ndarray
    values: np.ndarray


def lift(x, n: int, h: float = 0.01, t: float = 0.0) -> HistoryVector:
    """Constant-history embedding (x1, x2) -> (x2, ..., x2, x1)."""
    if n < 2:
        raise DomainError(f"lifted history needs n >= 2, got {n}")
    x1, x2 = np.asarray(x, dtype=np.float64).reshape(2)
    v = np.full(int(n), x2)
    v[-1] = x1
    return HistoryVector(v, h, t)


def lift_batch(points: np.ndarray, n: int) -> np.ndarray:
    """(m, 2) chart points -> (n, m) history windows, oldest sample first."""
    pts = as_points(points)
    buf = np.repeat(pts[:, 1][None, :], n, axis=0)
    buf[-1] = pts[:, 0]
    return buf


def restrict(Y: HistoryVector) -> PlanarPoint:
    """Project a history window to (head, oldest sample)."""
    return PlanarPoint(Y.head, Y.oldest)


def _warn_outside_chart(pts: np.ndarray, what: str) -> None:
    a, b, c, d = WORK_RECT
    out = (pts[:, 0] < a) | (pts[:, 0] > b) | (pts[:, 1] < c) | (pts[:, 1] > d)
    if out.any():
        warnings.warn(
            f"{what} outside the chart working rectangle "
            f"[{a},{b}]x[{c},{d}]; the planar coordinates may be invalid there",
            stacklevel=3)


def restrictions_at(points, cfg: HealedMapConfig, periods: tuple[int, ...],
                    strict: bool = True) -> dict[int, np.ndarray]:
    """Evaluate R M^m L at every point for each m in periods.

    One batched integration covers all points and all requested powers.
    Returns {m: (n_points, 2) array}. strict=False tolerates diverging
    lanes (their entries come back NaN instead of aborting the batch).
    """
    pts = as_points(points)
    spp = cfg.steps_per_period
    marks = sorted(set(int(m) for m in periods))
    if marks and marks[0] < 0:
        raise DomainError(f"map powers must be >= 0, got {marks[0]}")
    buf = lift_batch(pts, cfg.n)
    res = run_batch(buf, 0, (marks[-1] if marks else 0) * spp, cfg.h,
                    cfg.params, cfg.forcing,
                    checkpoints=tuple(m * spp for m in marks),
                    blowup_abort=None if not strict else 1.0e3)
    out = {}
    for m in marks:
        head, oldest = res.checkpoints[m * spp]
        out[m] = np.stack([head, oldest], axis=1)
    return out


def forward_map(x, k: int, cfg: HealedMapConfig) -> PlanarPoint:
    """R M^k L x: restrict the k-period stroboscopic image of the lifted point."""
    if k < 1 or k != int(k):
        raise ConfigurationError(f"forward_map needs k >= 1 so the lifted state heals, got {k}")
    vals = restrictions_at(x, cfg, (int(k),))[int(k)]
    return PlanarPoint(float(vals[0, 0]), float(vals[0, 1]))


def classify_multipliers(lams, tol: float = _CIRCLE_TOL) -> Classification:
    mags = np.abs(np.asarray(lams, dtype=np.complex128))
    inside = int(np.sum(mags < 1.0 - tol))
    outside = int(np.sum(mags > 1.0 + tol))
    if inside == 2:
        return "sink"
    if outside == 2:
        return "source"
    if inside == 1 and outside == 1:
        return "saddle"
    return "marginal"


def _fd_system(x: np.ndarray, cfg: HealedMapConfig, period: int):
    """Residual G, Jacobian of G, and the two chart Jacobians at x.

    G(x) = R M^(ell+period) L x - R M^ell L x, differentiated centrally
    with increment fd_eps; the five required integrations run as one batch.
    """
    eps = cfg.fd_eps
    pts = np.array([x,
                    [x[0] + eps, x[1]], [x[0] - eps, x[1]],
                    [x[0], x[1] + eps], [x[0], x[1] - eps]])
    vals = restrictions_at(pts, cfg, (cfg.ell, cfg.ell + period))
    r_l = vals[cfg.ell]
    r_lk = vals[cfg.ell + period]
    G = r_lk - r_l
    A_l = np.stack([(r_l[1] - r_l[2]) / (2 * eps),
                    (r_l[3] - r_l[4]) / (2 * eps)], axis=1)
    A_lk = np.stack([(r_lk[1] - r_lk[2]) / (2 * eps),
                     (r_lk[3] - r_lk[4]) / (2 * eps)], axis=1)
    return G[0], A_lk - A_l, A_l, A_lk


def _solve2(J: np.ndarray, b: np.ndarray) -> np.ndarray:
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    scale = max(1.0, float(np.abs(J).max()) ** 2)
    if not math.isfinite(det) or abs(det) < 1e-14 * scale:
        raise ChartValidityError(
            f"singular 2x2 linearization (det={det:.3e}); the chart fails here")
    return np.array([(J[1, 1] * b[0] - J[0, 1] * b[1]) / det,
                     (J[0, 0] * b[1] - J[1, 0] * b[0]) / det])


def healed_fixed_point(x0, cfg: HealedMapConfig, period: int = 1) -> FixedPointRecord:
    """Newton solve for a fixed point of the healed map's period-th iterate.

    Plain Newton steps are backtracked to keep the residual monotone; when
    no damped Newton step helps (the defining residual steepens like the
    unstable multiplier to the power ell+period), a Levenberg-Marquardt
    step on the squared residual takes over for that iteration.
    """
    if period < 1 or period != int(period):
        raise ConfigurationError(f"orbit period must be a positive integer, got {period}")
    if cfg.fd_eps <= 0:
        raise ConfigurationError(f"fd_eps must be positive, got {cfg.fd_eps}")
    x = np.asarray(x0, dtype=np.float64).reshape(2)
    _warn_outside_chart(x[None, :], "fixed-point seed")

    def residual_only(xx) -> np.ndarray | None:
        try:
            vals = restrictions_at(xx, cfg, (cfg.ell, cfg.ell + period))
        except IntegrationError:
            return None
        g = (vals[cfg.ell + period] - vals[cfg.ell])[0]
        return g if np.all(np.isfinite(g)) else None

    res = math.inf
    for it in range(cfg.newton_max_iter):
        try:
            g0, J, A_l, A_lk = _fd_system(x, cfg, period)
        except IntegrationError as e:
            raise NoConvergenceError(
                f"integration blew up at Newton iterate {it} ({e})",
                residual=res, last_point=PlanarPoint(*x)) from e
        if not np.all(np.isfinite(g0)):
            raise NoConvergenceError(
                f"non-finite residual at Newton iterate {it}",
                residual=res, last_point=PlanarPoint(*x))
        res = float(np.abs(g0).max())
        if res < cfg.newton_tol:
            return _record(x, cfg, period, A_l, A_lk, res, it)
        step = _solve2(J, -g0)
        accepted = False
        alpha = 1.0
        for _ in range(6):
            trial = x + alpha * step
            gn = residual_only(trial)
            if gn is not None and np.abs(gn).max() < res:
                x = trial
                accepted = True
                break
            alpha *= 0.5
        if accepted:
            if float(np.abs(alpha * step).max()) < cfg.newton_step_tol:
                g0, J, A_l, A_lk = _fd_system(x, cfg, period)
                return _record(x, cfg, period, A_l, A_lk,
                               float(np.abs(g0).max()), it + 1)
            continue
        mu = 1e-3 * max(1.0, float(np.abs(J).max()))
        for _ in range(25):
            A = J.T @ J + mu * np.eye(2)
            step = np.linalg.solve(A, -J.T @ g0)
            trial = x + step
            gn = residual_only(trial)
            if gn is not None and np.abs(gn).max() < res:
                x = trial
                accepted = True
                break
            mu *= 3.0
        if not accepted:
            raise NoConvergenceError(
                f"Newton stalled at residual {res:.3e} after {it + 1} iterations",
                residual=res, last_point=PlanarPoint(*x))
    raise NoConvergenceError(
        f"no convergence within {cfg.newton_max_iter} iterations "
        f"(last residual {res:.3e})", residual=res, last_point=PlanarPoint(*x))


def _record(x, cfg, period, A_l, A_lk, res, it) -> FixedPointRecord:
    D = np.linalg.solve(A_l, A_lk) if abs(np.linalg.det(A_l)) > 1e-14 else None
    if D is None:
        raise ChartValidityError("chart Jacobian d(R M^ell L) singular at the fixed point")
    lam = np.linalg.eigvals(D)
    lam = tuple(complex(v) for v in lam)
    return FixedPointRecord(point=PlanarPoint(float(x[0]), float(x[1])),
                            u=cfg.params.u, eigenvalues=lam,
                            classification=classify_multipliers(lam),
                            period=int(period), residual=res, iterations=it)


def healed_map_jacobian(x, cfg: HealedMapConfig, period: int = 1) -> np.ndarray:
    """Finite-difference linearization D of the healed map iterate at x."""
    _, _, A_l, A_lk = _fd_system(np.asarray(x, float).reshape(2), cfg, period)
    return np.linalg.solve(A_l, A_lk)


@dataclass
class Branch:
    """Continuation output: records along the branch plus an optional
    diagnostic when the branch was lost before reaching the target."""

    records: list[FixedPointRecord] = field(default_factory=list)
    diagnostic: str | None = None

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def continue_fixed_points(seed: FixedPointRecord, u_end: float, du: float,
                          cfg: HealedMapConfig, du_min: float | None = None,
                          max_jump: float | None = None) -> Branch:
    """Natural-parameter continuation of a fixed point in the forcing
    amplitude u, with step halving on Newton failure.

    A step whose converged point moves farther than max_jump is treated as
    a jump onto a different branch and rejected the same way (fixed points
    of this map sit close together, so an unguarded Newton from a stale
    predictor can land on a neighboring root).
    """
    if du <= 0:
        raise ConfigurationError(f"continuation step du must be positive, got {du}")
    if du_min is None:
        du_min = du / 64.0
    if max_jump is None:
        max_jump = max(0.02, 10.0 * du)
    branch = Branch(records=[seed])
    x = np.asarray(seed.point, dtype=np.float64)
    u = seed.u
    direction = 1.0 if u_end >= u else -1.0
    step = du
    while direction * (u_end - u) > 1e-12:
        step = min(step, abs(u_end - u))
        u_try = u + direction * step
        try:
            rec = healed_fixed_point(x, cfg.with_u(u_try), period=seed.period)
            if float(np.hypot(*(np.asarray(rec.point) - x))) > max_jump:
                raise NoConvergenceError(
                    f"suspected branch jump at u={u_try:.6g}: point moved "
                    f"{float(np.hypot(*(np.asarray(rec.point) - x))):.3g}")
        except (NoConvergenceError, ChartValidityError) as e:
            step *= 0.5
            if step < du_min:
                branch.diagnostic = (
                    f"branch lost at u={u:.6g}: continuation step fell below "
                    f"{du_min:.3g} ({e})")
                return branch
            continue
        branch.records.append(rec)
        x = np.asarray(rec.point, dtype=np.float64)
        u = u_try
        step = min(du, step * 2.0)
    return branch


def healed_planar_map(x, cfg: HealedMapConfig) -> PlanarPoint:
    """The healed map itself: y solving R M^ell L y = R M^(ell+1) L x.

    Seeded from the raw one-period image R M L x; Newton with the
    finite-difference chart Jacobian.
    """
    x = np.asarray(x, dtype=np.float64).reshape(2)
    _warn_outside_chart(x[None, :], "healed-map argument")
    vals = restrictions_at(x, cfg, (1, cfg.ell + 1))
    target = vals[cfg.ell + 1][0]
    y = vals[1][0].copy()
    eps = cfg.fd_eps
    if eps <= 0:
        raise ConfigurationError(f"fd_eps must be positive, got {eps}")
    res = math.inf
    for it in range(cfg.newton_max_iter):
        pts = np.array([y,
                        [y[0] + eps, y[1]], [y[0] - eps, y[1]],
                        [y[0], y[1] + eps], [y[0], y[1] - eps]])
        r_l = restrictions_at(pts, cfg, (cfg.ell,))[cfg.ell]
        g = r_l[0] - target
        if not np.all(np.isfinite(g)):
            raise NoConvergenceError("non-finite residual in healed-map solve",
                                     residual=res, last_point=PlanarPoint(*y))
        res = float(np.abs(g).max())
        if res < cfg.newton_tol:
            return PlanarPoint(float(y[0]), float(y[1]))
        A = np.stack([(r_l[1] - r_l[2]) / (2 * eps),
                      (r_l[3] - r_l[4]) / (2 * eps)], axis=1)
        step = _solve2(A, -g)
        y = y + step
        if float(np.abs(step).max()) < cfg.newton_step_tol and res < 1e-6:
            return PlanarPoint(float(y[0]), float(y[1]))
    raise NoConvergenceError(
        f"healed-map solve did not converge (last residual {res:.3e})",
        residual=res, last_point=PlanarPoint(*y))


def full_map_jacobian(x, cfg: HealedMapConfig, power: int = 1) -> np.ndarray:
    """Central-difference N x N Jacobian of the full stroboscopic map M^power
    at the lifted state L x; columns come from one batched integration."""
    if cfg.fd_eps <= 0:
        raise ConfigurationError(f"fd_eps must be positive, got {cfg.fd_eps}")
    x1, x2 = np.asarray(x, dtype=np.float64).reshape(2)
    n = cfg.n
    eps = cfg.fd_eps
    base = np.full(n, x2)
    base[-1] = x1
    pert = np.zeros((n, 2 * n))
    idx = np.arange(n)
    pert[idx, 2 * idx] = eps
    pert[idx, 2 * idx + 1] = -eps
    buf = base[:, None] + pert
    res = run_batch(buf, 0, int(power) * cfg.steps_per_period, cfg.h,
                    cfg.params, cfg.forcing)
    out = res.history()
    return (out[:, 0::2] - out[:, 1::2]) / (2 * eps)


def singular_values(x, cfg: HealedMapConfig, power: int = 1) -> np.ndarray:
    """Descending singular values of the full-map Jacobian at L x."""
    return np.linalg.svd(full_map_jacobian(x, cfg, power), compute_uv=False)


def spectral_gap(x, cfg: HealedMapConfig, power: int = 1) -> float:
    """Slow-manifold diagnostic sigma3/sigma2 of the full-map Jacobian."""
    sv = singular_values(x, cfg, power)
    if sv[1] < 1e-14:
        raise DomainError(
            f"sigma2={sv[1]:.3e} is degenerate; the gap ratio is undefined")
    return float(sv[2] / sv[1])


def chart_jacobian(points, cfg: HealedMapConfig, power: int = 1,
                   strict: bool = True) -> np.ndarray:
    """2x2 central-difference Jacobians of R M^power L at many points,
    shaped (m, 2, 2); all perturbations run as one batch."""
    pts = as_points(points)
    eps = cfg.fd_eps
    if eps <= 0:
        raise ConfigurationError(f"fd_eps must be positive, got {eps}")
    m = pts.shape[0]
    stacked = np.concatenate([
        pts + [eps, 0], pts - [eps, 0], pts + [0, eps], pts - [0, eps]], axis=0)
    vals = restrictions_at(stacked, cfg, (int(power),), strict=strict)[int(power)]
    c1 = (vals[0:m] - vals[m:2 * m]) / (2 * eps)
    c2 = (vals[2 * m:3 * m] - vals[3 * m:4 * m]) / (2 * eps)
    return np.stack([c1, c2], axis=2)


def singular_boundary_scan(rect, nx: int, ny: int, cfg: HealedMapConfig,
                           power: int = 1) -> ScalarField:
    """Determinant of the chart Jacobian d(R M^power L) on a grid; its zero
    contour bounds the region where the planar coordinates are valid."""
    if nx < 2 or ny < 2:
        raise ConfigurationError(f"grid must be at least 2x2, got {nx}x{ny}")
    x1min, x1max, x2min, x2max = rect
    g1 = np.linspace(x1min, x1max, nx)
    g2 = np.linspace(x2min, x2max, ny)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
    J = chart_jacobian(pts, cfg, power, strict=False)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    det = np.where(np.isfinite(det), det, np.nan)
    return ScalarField(x1=g1, x2=g2, values=det.reshape(nx, ny))
