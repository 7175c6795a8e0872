"""Batch experiment drivers: response classification, amplitude heat maps,
basin grids, phase/delay threshold contours, bifurcation scans, and the
step-amplitude transition scenario.

Grid cells are independent; they run as lanes of vectorized batches and,
when jobs > 1, as contiguous chunks on a process pool with assembly by
cell index, so results never depend on scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigurationError, NoConvergenceError
from .eqfree import (FixedPointRecord, HealedMapConfig, PlanarPoint,
                     as_points, healed_fixed_point, lift_batch)
from .forcing import (ForcingSpec, PeriodicForcing, StepAmplitudeScale,
                      eval_forcing, forcing_period, forcing_to_dict)
from .integrate import HistoryVector, Trajectory, history_length, run_batch
from .model import ModelParams, equilibria

MISSING = -1
X_LARGE_THRESHOLD = -1.0
DEFAULT_HORIZON_PERIODS = 200
BISTABLE_TAU_RANGE = (1.295, 1.625)


class ResponseLabel(IntEnum):
    """Response class of a forced trajectory; integer values are the CSV codes."""

    SMALL = 0
    LARGE = 1
    UNDECIDED = 2


@dataclass
class ClassifyResult:
    label: ResponseLabel
    decision_time: float | None
    x_min: float


@dataclass
class ScanResult:
    """Grid-shaped scan output plus the configuration that produced it."""

    kind: str
    axes: dict[str, np.ndarray]
    values: np.ndarray
    metadata: dict = field(default_factory=dict)


def kyr_bp_to_model(t_kyr_bp: float) -> float:
    """Convert kyr before present to model time (2000 kyr BP -> t = 0)."""
    return (2000.0 - t_kyr_bp) / 10.0


def model_to_kyr_bp(t_model: float) -> float:
    return 2000.0 - 10.0 * t_model


def snap_to_grid(values, h: float) -> np.ndarray:
    """Round values onto the integrator lattice (integer multiples of h)."""
    return np.round(np.round(np.asarray(values, dtype=np.float64) / h) * h, 12)


def _horizon_steps(horizon: float | None, forcing: ForcingSpec, h: float) -> int:
    T = forcing_period(forcing)
    if horizon is None:
        if T is None:
            raise ConfigurationError(
                "horizon must be given explicitly for non-periodic forcing")
        horizon = DEFAULT_HORIZON_PERIODS * T
    if T is not None:
        ratio = horizon / T
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigurationError(
                f"horizon {horizon} must be a multiple of the forcing period {T}")
    n = round(horizon / h)
    if n < 1 or abs(n * h - horizon) > 1e-9:
        raise ConfigurationError(
            f"horizon {horizon} must be a positive integer multiple of h={h}")
    return n


def _classify_lanes(points: np.ndarray, params: ModelParams, forcing: ForcingSpec,
                    n_steps: int, threshold: float, h: float,
                    u_lane=None, forcing_values=None, group_idx=None):
    """First-crossing classification of lifted chart points, one lane each."""
    buf = lift_batch(points, history_length(params.tau, h))
    res = run_batch(buf, 0, n_steps, h, params, forcing, threshold=threshold,
                    u_lane=u_lane, forcing_values=forcing_values,
                    group_idx=group_idx)
    crossed = res.cross_step >= 0
    labels = np.where(crossed, int(ResponseLabel.LARGE), int(ResponseLabel.SMALL))
    times = np.where(crossed, res.cross_step * h, np.nan)
    return labels.astype(np.int64), times, res.min_head


def classify_response(history, params: ModelParams, forcing: ForcingSpec,
                      horizon: float | None = None,
                      x_large_threshold: float = X_LARGE_THRESHOLD,
                      h: float = 0.01) -> ClassifyResult:
    """Simulate and classify: Large at the first time X(t) drops to the
    threshold, Small when that never happens within the horizon."""
    n_steps = _horizon_steps(horizon, forcing, h)
    if isinstance(history, HistoryVector):
        res = run_batch(history.values[:, None], round(history.t / history.h),
                        n_steps, history.h, params, forcing,
                        threshold=x_large_threshold)
        crossed = res.cross_step[0] >= 0
        t_cross = float(res.cross_step[0] * history.h) if crossed else None
        return ClassifyResult(
            label=ResponseLabel.LARGE if crossed else ResponseLabel.SMALL,
            decision_time=t_cross, x_min=float(res.min_head[0]))
    pts = as_points(history)
    labels, times, mins = _classify_lanes(pts, params, forcing, n_steps,
                                          x_large_threshold, h)
    crossed = labels[0] == int(ResponseLabel.LARGE)
    return ClassifyResult(
        label=ResponseLabel(int(labels[0])),
        decision_time=float(times[0]) if crossed else None,
        x_min=float(mins[0]))


def heatmap_u(u_grid, params: ModelParams, forcing: ForcingSpec,
              horizon: float | None = None, h: float = 0.01,
              x0: float = -0.5) -> ScanResult:
    """Window distance from the constant reference state, once per forcing
    period, for each amplitude in u_grid (all amplitudes in one batch)."""
    u_grid = np.asarray(u_grid, dtype=np.float64)
    if u_grid.ndim != 1 or u_grid.size < 1:
        raise ConfigurationError("u_grid must be a one-dimensional sequence")
    if np.any(np.diff(u_grid) <= 0) and u_grid.size > 1:
        raise ConfigurationError("u_grid must be ascending")
    T = forcing_period(forcing)
    if T is None:
        raise ConfigurationError("heatmap_u needs a periodic forcing law")
    n_steps = _horizon_steps(horizon, forcing, h)
    spp = round(T / h)
    pts = np.repeat([[x0, x0]], u_grid.size, axis=0)
    buf = lift_batch(pts, history_length(params.tau, h))
    res = run_batch(buf, 0, n_steps, h, params, forcing, u_lane=u_grid,
                    mae_ref=x0, mae_every=spp)
    t_axis = np.arange(res.mae_series.shape[0], dtype=np.float64) * (spp * h)
    return ScanResult(
        kind="heatmap_u",
        axes={"u": u_grid, "t": t_axis},
        values=res.mae_series.T,  # (n_u, n_periods+1)
        metadata={"provenance": {
            "params": vars(params).copy(), "forcing": forcing_to_dict(forcing),
            "h": h, "horizon_steps": n_steps, "x0": x0}})


def _basin_chunk(args):
    points, params, forcing, n_steps, threshold, h = args
    return _classify_lanes(points, params, forcing, n_steps, threshold, h)


def basin_scan(rect, nx: int, ny: int, params: ModelParams, forcing: ForcingSpec,
               horizon: float | None = None, h: float = 0.01,
               x_large_threshold: float = X_LARGE_THRESHOLD,
               jobs: int = 1) -> ScanResult:
    """Label a grid of lifted initial conditions over the rectangle
    (x1min, x1max, x2min, x2max); also locates the attracting fixed point
    of the healed map for overlay."""
    if nx < 2 or ny < 2:
        raise ConfigurationError(f"basin grid must be at least 2x2, got {nx}x{ny}")
    x1min, x1max, x2min, x2max = rect
    g1 = np.linspace(x1min, x1max, nx)
    g2 = np.linspace(x2min, x2max, ny)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
    n_steps = _horizon_steps(horizon, forcing, h)

    if jobs <= 1:
        labels, times, mins = _classify_lanes(pts, params, forcing, n_steps,
                                              x_large_threshold, h)
    else:
        chunks = np.array_split(pts, jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_basin_chunk, [
                (c, params, forcing, n_steps, x_large_threshold, h)
                for c in chunks if len(c)]))
        labels = np.concatenate([p[0] for p in parts])
        times = np.concatenate([p[1] for p in parts])
        mins = np.concatenate([p[2] for p in parts])

    sink = None
    sink_note = None
    try:
        cfg = HealedMapConfig(params=params, forcing=forcing, h=h)
        seed = min(equilibria(params))
        rec = _continue_to_u(PlanarPoint(seed, seed), cfg, params.u)
        sink = (rec.point.x1, rec.point.x2)
    except Exception as e:  # overlay is best-effort; the grid is the product
        sink_note = f"sink location unavailable: {e}"

    return ScanResult(
        kind="basin",
        axes={"x1": g1, "x2": g2},
        values=labels.reshape(nx, ny),
        metadata={
            "decision_time": times.reshape(nx, ny),
            "x_min": mins.reshape(nx, ny),
            "sink": sink, "sink_note": sink_note,
            "provenance": {
                "params": vars(params).copy(), "forcing": forcing_to_dict(forcing),
                "h": h, "horizon_steps": n_steps, "rect": list(rect),
                "nx": nx, "ny": ny, "x_large_threshold": x_large_threshold}})


def _continue_to_u(seed_point: PlanarPoint, cfg: HealedMapConfig,
                   u_target: float, du: float = 0.01) -> FixedPointRecord:
    """Newton at u_target directly, falling back to short continuation in u."""
    try:
        return healed_fixed_point(seed_point, cfg.with_u(u_target))
    except NoConvergenceError:
        pass
    u = 0.0
    rec = healed_fixed_point(seed_point, cfg.with_u(u))
    while abs(u - u_target) > 1e-12:
        u = min(u + du, u_target) if u_target > u else max(u - du, u_target)
        rec = healed_fixed_point(rec.point, cfg.with_u(u))
    return rec


def _phase_tau_chunk(args):
    (tau_list, phis, us, params, T, n_steps, threshold, h) = args
    out = np.full((len(phis), len(tau_list)), np.nan)
    for j, tau in enumerate(tau_list):
        p_tau = params.replace(tau=float(tau))
        n_lane = len(phis) * len(us)
        pts = np.repeat([[-0.5, -0.5]], n_lane, axis=0)
        u_lane = np.tile(us, len(phis))
        gidx = np.repeat(np.arange(len(phis)), len(us))
        k = np.arange(n_steps + 1, dtype=np.float64)
        Fg = np.stack(
            [np.asarray(eval_forcing(PeriodicForcing(T=T, phi=float(phi)), k * h))
             for phi in phis], axis=1)
        labels, _, _ = _classify_lanes(pts, p_tau, PeriodicForcing(T=T), n_steps,
                                       threshold, h, u_lane=u_lane,
                                       forcing_values=Fg, group_idx=gidx)
        large = (labels == int(ResponseLabel.LARGE)).reshape(len(phis), len(us))
        for i in range(len(phis)):
            row = large[i]
            out[i, j] = us[int(np.argmax(row))] if row.any() else 1.0
    return out


def phase_threshold_scan(phi_values, tau_values, params: ModelParams,
                         T: float = 4.1, du: float = 0.005, u_max: float = 1.0,
                         horizon: float | None = None, h: float = 0.01,
                         x_large_threshold: float = X_LARGE_THRESHOLD,
                         jobs: int = 1) -> ScanResult:
    """Smallest amplitude on the du-grid that classifies Large for each
    (phase, delay) pair, from the constant history -0.5; cells with no
    transition up to u_max report the sentinel value 1."""
    phis = np.asarray(phi_values, dtype=np.float64)
    taus = np.asarray(tau_values, dtype=np.float64)
    lo, hi = BISTABLE_TAU_RANGE
    if np.any(taus < lo - 1e-9) or np.any(taus > hi + 1e-9):
        raise ConfigurationError(
            f"tau values must lie inside the bistable range [{lo}, {hi}]")
    if du <= 0:
        raise ConfigurationError(f"du must be positive, got {du}")
    for tau in taus:
        history_length(float(tau), h)
    us = np.round(np.arange(du, u_max + du / 2, du), 12)
    n_steps = _horizon_steps(horizon, PeriodicForcing(T=T), h)

    if jobs <= 1:
        table = _phase_tau_chunk((list(taus), phis, us, params, T, n_steps,
                                  x_large_threshold, h))
    else:
        tau_chunks = np.array_split(taus, jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_phase_tau_chunk, [
                (list(c), phis, us, params, T, n_steps, x_large_threshold, h)
                for c in tau_chunks if len(c)]))
        table = np.concatenate(parts, axis=1)

    return ScanResult(
        kind="phase_threshold",
        axes={"phi": phis, "tau": taus},
        values=table,
        metadata={"sentinel": 1.0, "provenance": {
            "params": vars(params).copy(), "T": T, "du": du, "u_max": u_max,
            "h": h, "horizon_steps": n_steps,
            "x_large_threshold": x_large_threshold}})


def _orbit_extrema(rec: FixedPointRecord, cfg: HealedMapConfig) -> tuple[float, float]:
    """Min and max of X over one orbit period, simulated from the healed state."""
    spp = cfg.steps_per_period
    buf = lift_batch(np.asarray(rec.point, float)[None, :], cfg.n)
    healed = run_batch(buf, 0, cfg.ell * spp, cfg.h, cfg.params, cfg.forcing)
    res = run_batch(healed.history(), cfg.ell * spp, rec.period * spp, cfg.h,
                    cfg.params, cfg.forcing, record_every=1)
    heads = res.heads[:, 0]
    return float(heads.min()), float(heads.max())


def _most_negative_real(rec: FixedPointRecord) -> float:
    reals = [lam.real for lam in rec.eigenvalues if abs(lam.imag) < 1e-8]
    return min(reals) if reals else math.nan


def _pd_indicator(rec: FixedPointRecord) -> float:
    """Positive while the most negative real multiplier is above -1."""
    m = _most_negative_real(rec)
    return m + 1.0 if not math.isnan(m) else math.nan


@dataclass
class BifurcationRow:
    tau: float
    period: int
    point: PlanarPoint
    orbit_min: float
    orbit_max: float
    eigenvalues: tuple[complex, complex]
    classification: str
    status: str = "ok"


def _solve_at_tau(x_seed, tau: float, u: float, params: ModelParams, T: float,
                  phi: float, h: float, ell: int, period: int) -> FixedPointRecord:
    cfg = HealedMapConfig(
        params=params.replace(tau=float(tau), u=float(u)),
        forcing=PeriodicForcing(T=T, phi=phi), h=h, ell=ell)
    return healed_fixed_point(x_seed, cfg, period=period)


def _bisect_pd_crossing(tau_lo: float, tau_hi: float, x_seed, u: float,
                        params: ModelParams, T: float, phi: float, ell: int,
                        period: int, width: float = 1e-3,
                        h_fine: float = 1e-3) -> tuple[float, float]:
    """Bracket the delay at which a real multiplier crosses -1, to the given
    width, on the tau lattice of spacing h_fine (so tau stays an integer
    multiple of the fine integration step)."""
    lat = round(width / h_fine) * h_fine
    if abs(lat - width) > 1e-12:
        raise ConfigurationError(
            f"bracket width {width} must be a multiple of the fine lattice {h_fine}")
    lo = round(tau_lo / h_fine)
    hi = round(tau_hi / h_fine)
    rec_lo = _solve_at_tau(x_seed, lo * h_fine, u, params, T, phi, h_fine, ell, period)
    rec_hi = _solve_at_tau(rec_lo.point, hi * h_fine, u, params, T, phi, h_fine, ell, period)
    s_lo = _pd_indicator(rec_lo)
    s_hi = _pd_indicator(rec_hi)
    if math.isnan(s_lo) or math.isnan(s_hi) or s_lo * s_hi > 0:
        raise NoConvergenceError(
            f"no sign change of (multiplier + 1) over [{lo * h_fine}, {hi * h_fine}] "
            "at the fine step")
    x = np.asarray(rec_lo.point, float)
    while hi - lo > round(width / h_fine):
        mid = (lo + hi) // 2
        rec_mid = _solve_at_tau(x, mid * h_fine, u, params, T, phi, h_fine, ell, period)
        x = np.asarray(rec_mid.point, float)
        if _pd_indicator(rec_mid) * s_lo > 0:
            lo = mid
        else:
            hi = mid
    return lo * h_fine, hi * h_fine


def bifurcation_scan_1d(tau_values, u: float, params: ModelParams,
                        T: float = 4.1, phi: float = 0.0, h: float = 0.01,
                        ell: int = 1, max_period: int = 4,
                        bracket_width: float = 1e-3,
                        h_fine: float = 1e-3) -> ScanResult:
    """March the small-amplitude orbit through a delay grid at fixed u,
    recording extrema and multipliers; flag period doublings where a real
    multiplier crosses -1 and bracket each crossing by bisection in tau.

    Past a detected doubling the doubled orbit is located as a fixed point
    of the corresponding healed-map iterate.
    """
    taus = np.asarray(tau_values, dtype=np.float64)
    for tau in taus:
        history_length(float(tau), h)
    rows: list[BifurcationRow] = []
    brackets: list[tuple[float, float, int]] = []
    period = 1
    seed = min(equilibria(params))
    x_seed = np.array([seed, seed])
    prev: FixedPointRecord | None = None
    prev_tau: float | None = None
    nan_pair = (complex(math.nan, math.nan), complex(math.nan, math.nan))
    for tau in taus:
        try:
            if prev is None:
                cfg0 = HealedMapConfig(
                    params=params.replace(tau=float(tau), u=0.0),
                    forcing=PeriodicForcing(T=T, phi=phi), h=h, ell=ell)
                rec = _continue_u_path(healed_fixed_point(x_seed, cfg0), u,
                                       params.replace(tau=float(tau)),
                                       T, phi, h, ell)
            else:
                rec = _solve_at_tau(x_seed, float(tau), u, params, T, phi, h,
                                    ell, period)
        except (NoConvergenceError, ConfigurationError) as e:
            rows.append(BifurcationRow(
                tau=float(tau), period=period,
                point=PlanarPoint(math.nan, math.nan), orbit_min=math.nan,
                orbit_max=math.nan, eigenvalues=nan_pair,
                classification="missing", status=f"newton failed: {e}"))
            continue
        cfg = HealedMapConfig(
            params=params.replace(tau=float(tau), u=float(u)),
            forcing=PeriodicForcing(T=T, phi=phi), h=h, ell=ell)
        omin, omax = _orbit_extrema(rec, cfg)
        rows.append(BifurcationRow(
            tau=float(tau), period=period, point=rec.point, orbit_min=omin,
            orbit_max=omax, eigenvalues=rec.eigenvalues,
            classification=rec.classification))
        if prev is not None and not math.isnan(_pd_indicator(prev)) \
                and not math.isnan(_pd_indicator(rec)) \
                and _pd_indicator(prev) * _pd_indicator(rec) < 0:
            try:
                lo, hi = _bisect_pd_crossing(prev_tau, float(tau),
                                             np.asarray(prev.point, float), u,
                                             params, T, phi, ell, period,
                                             width=bracket_width, h_fine=h_fine)
                brackets.append((lo, hi, period))
            except (NoConvergenceError, ConfigurationError) as e:
                brackets.append((float(prev_tau), float(tau), period))
                rows[-1].status = f"bracket refinement failed: {e}"
            if 2 * period <= max_period:
                doubled = _seed_doubled_orbit(rec, cfg, period)
                if doubled is not None:
                    period *= 2
                    rec = doubled
                else:
                    rows[-1].status = "doubled orbit not found; following the unstable orbit"
        prev = rec
        prev_tau = float(tau)
        x_seed = np.asarray(rec.point, float)

    vals = np.array([[r.tau, r.period, r.point.x1, r.point.x2, r.orbit_min,
                      r.orbit_max,
                      r.eigenvalues[0].real, r.eigenvalues[0].imag,
                      r.eigenvalues[1].real, r.eigenvalues[1].imag]
                     for r in rows])
    return ScanResult(
        kind="bifurcation_1d",
        axes={"tau": taus},
        values=vals,
        metadata={"rows": rows, "pd_brackets": brackets, "provenance": {
            "params": vars(params).copy(), "u": u, "T": T, "phi": phi, "h": h,
            "ell": ell, "bracket_width": bracket_width, "h_fine": h_fine}})


def _continue_u_path(rec0: FixedPointRecord, u_target: float,
                     params: ModelParams, T: float, phi: float, h: float,
                     ell: int, du: float = 0.05) -> FixedPointRecord:
    """Walk a fixed point from u=0 to u_target with step halving."""
    u = 0.0
    rec = rec0
    step = du
    while abs(u - u_target) > 1e-12:
        u_try = min(u + step, u_target)
        try:
            rec_try = _solve_at_tau(np.asarray(rec.point, float), params.tau,
                                    u_try, params, T, phi, h, ell, rec0.period)
        except NoConvergenceError:
            step *= 0.5
            if step < du / 64:
                raise
            continue
        rec = rec_try
        u = u_try
        step = min(du, step * 2)
    return rec


def _seed_doubled_orbit(rec: FixedPointRecord, cfg: HealedMapConfig,
                        period: int) -> FixedPointRecord | None:
    """Find the period-doubled orbit near a fixed point whose multiplier just
    crossed -1, by seeding off along that multiplier's eigenvector."""
    from .eqfree import healed_map_jacobian

    try:
        D = healed_map_jacobian(rec.point, cfg, period=period)
    except Exception:
        return None
    lam, vecs = np.linalg.eig(D)
    reals = np.abs(lam.imag) < 1e-8
    if not reals.any():
        return None
    i = int(np.argmin(lam.real))
    v = vecs[:, i].real
    v = v / np.hypot(*v)
    x = np.asarray(rec.point, float)
    for delta in (0.01, 0.02, 0.005, 0.002):
        for sign in (1.0, -1.0):
            try:
                cand = healed_fixed_point(x + sign * delta * v, cfg,
                                          period=2 * period)
            except Exception:
                continue
            if np.hypot(*(np.asarray(cand.point) - x)) > 1e-4:
                return cand
    return None


def bifurcation_boundary_2d(tau_values, u_values, params: ModelParams,
                            T: float = 4.1, phi: float = 0.0, h: float = 0.01,
                            ell: int = 1) -> ScanResult:
    """Stability class of the small-amplitude orbit on a (tau, u) grid.

    Codes: 0 stable, 1 period-doubling unstable (real multiplier beyond -1),
    2 unstable otherwise, -1 missing. Cells adjacent to a class change are
    refined by one bisection level in u; the refinements are reported
    alongside the grid.
    """
    taus = np.asarray(tau_values, dtype=np.float64)
    us = np.asarray(u_values, dtype=np.float64)
    if np.any(np.diff(us) <= 0):
        raise ConfigurationError("u_values must be strictly ascending")
    for tau in taus:
        history_length(float(tau), h)
    grid = np.full((len(taus), len(us)), MISSING, dtype=np.int64)
    points = np.full((len(taus), len(us), 2), np.nan)
    mults = np.full((len(taus), len(us), 2), np.nan + 0j, dtype=np.complex128)

    def code(rec: FixedPointRecord) -> int:
        mags = np.abs(rec.eigenvalues)
        if np.all(mags < 1.0 - 1e-6):
            return 0
        m = _most_negative_real(rec)
        if not math.isnan(m) and m < -1.0:
            return 1
        return 2

    seed0 = min(equilibria(params))
    for i, tau in enumerate(taus):
        x = np.array([seed0, seed0])
        fresh = True
        for j, u in enumerate(us):
            try:
                if fresh and u > 0:
                    rec0 = _solve_at_tau(x, float(tau), 0.0, params, T, phi, h, ell, 1)
                    rec = _continue_u_path(rec0, float(u),
                                           params.replace(tau=float(tau)),
                                           T, phi, h, ell)
                else:
                    rec = _solve_at_tau(x, float(tau), float(u), params, T, phi,
                                        h, ell, 1)
            except (NoConvergenceError, ConfigurationError):
                continue
            fresh = False
            grid[i, j] = code(rec)
            points[i, j] = rec.point
            mults[i, j] = rec.eigenvalues
            x = np.asarray(rec.point, float)

    refined = []
    for i, tau in enumerate(taus):
        for j in range(len(us) - 1):
            a, b = grid[i, j], grid[i, j + 1]
            if a != b and a != MISSING and b != MISSING:
                u_mid = 0.5 * (us[j] + us[j + 1])
                try:
                    rec = _solve_at_tau(points[i, j], float(tau), float(u_mid),
                                        params, T, phi, h, ell, 1)
                    refined.append((float(tau), float(u_mid), code(rec)))
                except (NoConvergenceError, ConfigurationError):
                    refined.append((float(tau), float(u_mid), MISSING))

    return ScanResult(
        kind="bifurcation_2d",
        axes={"tau": taus, "u": us},
        values=grid,
        metadata={"multipliers": mults, "refined": refined, "provenance": {
            "params": vars(params).copy(), "T": T, "phi": phi, "h": h, "ell": ell}})


def mpt_scenario(t_switch: float, scale_before: float, u_end: float,
                 params: ModelParams, forcing_base: ForcingSpec,
                 span: float = 200.0, h: float = 0.01,
                 x_large_threshold: float = X_LARGE_THRESHOLD,
                 x0: float = -0.5, record_every: int = 1
                 ) -> tuple[Trajectory, float | None]:
    """Step-wise amplitude scenario: amplitude scale_before until t_switch,
    u_end afterwards. Returns the trajectory and the first time X drops to
    the threshold (None when it never does within the span).

    The step profile carries the absolute amplitudes, so the model's own u
    is overridden to 1.
    """
    if t_switch >= span:
        raise ConfigurationError(
            f"simulation span {span} must cover the switch time {t_switch}")
    forcing = StepAmplitudeScale(t_switch=t_switch, scale_before=scale_before,
                                 scale_after=u_end, base=forcing_base)
    p_run = params.replace(u=1.0)
    n_steps = round(span / h)
    if abs(n_steps * h - span) > 1e-9 or n_steps < 1:
        raise ConfigurationError(f"span {span} must be a positive multiple of h={h}")
    if n_steps % record_every != 0:
        raise ConfigurationError(
            f"record_every={record_every} must divide the step count {n_steps}")
    buf = np.full((history_length(params.tau, h), 1), float(x0))
    res = run_batch(buf, 0, n_steps, h, p_run, forcing,
                    threshold=x_large_threshold, record_every=record_every)
    traj = Trajectory(0.0, h * record_every, res.heads[:, 0])
    crossed = res.cross_step[0] >= 0
    t_cross = float(res.cross_step[0] * h) if crossed else None
    return traj, t_cross
