"""Fixed-step Heun integrator for the scalar delay equation.

State is a discretized history vector Y in R^N on a uniform grid of
spacing h: Y[0] is the value at t - tau and Y[N-1] the head point at the
current time t, with tau = (N-1) h. A single step advances the head by a
two-stage (Euler predictor, trapezoidal corrector) update and shifts the
window; longer spans compose steps. Internally the window lives in a ring
buffer so one step costs O(lanes), not O(N * lanes), and many independent
trajectories integrate as lanes of one batch.

Step times are derived from an integer step counter, t_k = (k0 + k) * h,
so splitting a span produces bitwise-identical trajectories to running it
in one go.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, IntegrationError
from .forcing import ForcingSpec, eval_forcing, forcing_period
from .model import ModelParams

BLOWUP_ABORT = 1.0e3
_ALIGN_TOL = 1e-9


@dataclass
class HistoryVector:
    """Discretized state: history segment plus head point on a uniform grid.

    values[0] is the oldest sample X(t - tau), values[-1] the head X(t).
    """

    values: np.ndarray
    h: float
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise DomainError(f"history needs >= 2 samples in one dimension, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("history samples must be finite")
        if not (math.isfinite(self.h) and self.h > 0):
            raise DomainError(f"grid spacing h must be positive, got {self.h}")
        if not math.isfinite(self.t):
            raise DomainError(f"time tag must be finite, got {self.t}")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def head(self) -> float:
        return float(self.values[-1])

    @property
    def oldest(self) -> float:
        return float(self.values[0])

    @property
    def tau(self) -> float:
        return (self.n - 1) * self.h

    def copy(self) -> "HistoryVector":
        return HistoryVector(self.values.copy(), self.h, self.t)


@dataclass
class Trajectory:
    """Head-point samples X(t0 + k*h) of one integration run."""

    t0: float
    h: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size, dtype=np.float64) * self.h


def constant_history(value: float, n: int, h: float, t: float = 0.0) -> HistoryVector:
    return HistoryVector(np.full(n, float(value)), h, t)


def history_length(tau: float, h: float) -> int:
    """Number of grid samples N = tau/h + 1; tau must sit on the grid."""
    n_tau = round(tau / h)
    if n_tau < 1 or abs(n_tau * h - tau) > _ALIGN_TOL:
        raise ConfigurationError(
            f"delay tau={tau} is not an integer multiple of the step h={h}")
    return n_tau + 1


def _step_index(t: float, h: float) -> int:
    k = round(t / h)
    if abs(k * h - t) > _ALIGN_TOL:
        raise ConfigurationError(f"time {t} does not sit on the step grid h={h}")
    return k


def _check_grid(Y: HistoryVector, params: ModelParams) -> None:
    if abs((Y.n - 1) * Y.h - params.tau) > _ALIGN_TOL:
        raise ConfigurationError(
            f"history length {Y.n} with h={Y.h} does not match tau={params.tau} "
            f"(need N = tau/h + 1 = {history_length(params.tau, Y.h)})")


@dataclass
class BatchResult:
    """Final ring state plus whatever per-step bookkeeping was requested."""

    buf: np.ndarray
    pos: int
    heads: np.ndarray | None = None
    checkpoints: dict = field(default_factory=dict)
    cross_step: np.ndarray | None = None
    min_head: np.ndarray | None = None
    mae_series: np.ndarray | None = None

    def history(self) -> np.ndarray:
        """Time-ordered (N, lanes) window."""
        return np.concatenate([self.buf[self.pos:], self.buf[:self.pos]], axis=0)


def run_batch(histories: np.ndarray, step0: int, n_steps: int, h: float,
              params: ModelParams, forcing: ForcingSpec, *,
              u_lane: np.ndarray | float | None = None,
              forcing_values: np.ndarray | None = None,
              group_idx: np.ndarray | None = None,
              threshold: float | None = None,
              record_every: int = 0,
              checkpoints: tuple[int, ...] = (),
              mae_ref: float | None = None,
              mae_every: int = 0,
              blowup_abort: float | None = BLOWUP_ABORT,
              check_every: int = 50) -> BatchResult:
    """Advance a batch of history windows n_steps Heun steps.

    histories: (N, lanes) array, oldest sample first. u_lane overrides
    params.u (scalar or per lane). forcing_values may pre-supply F on the
    step grid, shaped (n_steps+1,) or (n_steps+1, n_groups) with group_idx
    mapping lanes to columns. threshold enables first-crossing tracking
    (X <= threshold) plus running minimum. checkpoints are step offsets at
    which (head, oldest) pairs are snapshotted. blowup_abort=None disables
    the abort guard and lets non-finite lanes propagate as per-lane NaNs.
    """
    buf = np.array(histories, dtype=np.float64, order="C")
    if buf.ndim != 2:
        raise DomainError(f"histories must be (N, lanes), got shape {buf.shape}")
    L, lanes = buf.shape
    p, r, s = params.p, params.r, params.s
    if u_lane is None:
        u = params.u
    else:
        u = np.asarray(u_lane, dtype=np.float64)
        u = float(u) if u.ndim == 0 else u
    if forcing_values is None:
        k = np.arange(n_steps + 1, dtype=np.float64) + float(step0)
        F = np.asarray(eval_forcing(forcing, k * h), dtype=np.float64)
    else:
        F = np.asarray(forcing_values, dtype=np.float64)
        if F.shape[0] != n_steps + 1:
            raise DomainError(f"forcing_values must cover {n_steps + 1} grid times")
    grouped = F.ndim == 2
    if grouped and group_idx is None:
        raise DomainError("group_idx required for grouped forcing values")

    res = BatchResult(buf=buf, pos=0)
    pos = 0
    if threshold is not None:
        crossed = buf[L - 1] <= threshold
        cross_step = np.where(crossed, 0, -1).astype(np.int64)
        min_head = buf[L - 1].copy()
    if record_every:
        n_rec = n_steps // record_every
        heads = np.empty((n_rec + 1, lanes))
        heads[0] = buf[L - 1]
    if mae_every:
        w = h / ((L - 1) * h)
        mae_rows = []

        def _mae_now(pos):
            d = np.abs(buf - mae_ref)
            tot = d.sum(axis=0) - 0.5 * d[pos] - 0.5 * d[pos - 1 if pos > 0 else L - 1]
            return w * tot

        mae_rows.append(_mae_now(pos))
    cps = set(int(c) for c in checkpoints)
    if 0 in cps:
        res.checkpoints[0] = (buf[L - 1].copy(), buf[pos].copy())

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            d0 = buf[pos]
            nxt = pos + 1
            if nxt == L:
                nxt = 0
            d1 = buf[nxt]
            head = buf[pos - 1] if pos > 0 else buf[L - 1]
            if grouped:
                F0 = F[k][group_idx]
                F1 = F[k + 1][group_idx]
            else:
                F0 = F[k]
                F1 = F[k + 1]
            q0 = d0 * d0
            f0 = -p * d0 + r * head - s * q0 - q0 * head - u * F0
            pred = head + h * f0
            q1 = d1 * d1
            fE = -p * d1 + r * pred - s * q1 - q1 * pred - u * F1
            new_head = head + 0.5 * h * (f0 + fE)
            buf[pos] = new_head
            pos = nxt
            done = k + 1
            if threshold is not None:
                newly = (new_head <= threshold) & ~crossed
                if newly.any():
                    cross_step[newly] = done
                    crossed |= newly
                np.minimum(min_head, new_head, out=min_head)
            if record_every and done % record_every == 0:
                heads[done // record_every] = new_head
            if mae_every and done % mae_every == 0:
                mae_rows.append(_mae_now(pos))
            if done in cps:
                res.checkpoints[done] = (new_head.copy(), buf[pos].copy())
            if blowup_abort is not None and (done % check_every == 0 or done == n_steps):
                m = np.abs(new_head).max()
                if not np.isfinite(m) or m > blowup_abort:
                    t_bad = (step0 + done) * h
                    raise IntegrationError(
                        f"|X| exceeded {blowup_abort} near t={t_bad} "
                        f"(lane {int(np.argmax(~np.isfinite(new_head) | (np.abs(new_head) > blowup_abort)))})",
                        t=t_bad)

    res.pos = pos
    if threshold is not None:
        res.cross_step = cross_step
        res.min_head = min_head
    if record_every:
        res.heads = heads
    if mae_every:
        res.mae_series = np.stack(mae_rows, axis=0)
    return res


def _advance(Y: HistoryVector, n_steps: int, params: ModelParams,
             forcing: ForcingSpec) -> HistoryVector:
    step0 = _step_index(Y.t, Y.h)
    res = run_batch(Y.values[:, None], step0, n_steps, Y.h, params, forcing)
    return HistoryVector(res.history()[:, 0], Y.h, (step0 + n_steps) * Y.h)


def heun_step(Y: HistoryVector, params: ModelParams,
              forcing: ForcingSpec) -> HistoryVector:
    """One two-stage step: shift the window left and append the new head."""
    _check_grid(Y, params)
    return _advance(Y, 1, params, forcing)


def evolve(Y: HistoryVector, t_span: float, params: ModelParams,
           forcing: ForcingSpec) -> HistoryVector:
    """Compose t_span/h steps; t_span must be a positive grid multiple."""
    _check_grid(Y, params)
    n = round(t_span / Y.h)
    if n < 1 or abs(n * Y.h - t_span) > _ALIGN_TOL:
        raise ConfigurationError(
            f"t_span={t_span} must be a positive integer multiple of h={Y.h}")
    return _advance(Y, n, params, forcing)


def evolve_trajectory(Y: HistoryVector, t_span: float, params: ModelParams,
                      forcing: ForcingSpec, record_every: int = 1
                      ) -> tuple[HistoryVector, Trajectory]:
    """Like evolve, also recording the head every record_every steps."""
    _check_grid(Y, params)
    n = round(t_span / Y.h)
    if n < 1 or abs(n * Y.h - t_span) > _ALIGN_TOL:
        raise ConfigurationError(
            f"t_span={t_span} must be a positive integer multiple of h={Y.h}")
    if record_every < 1 or n % record_every != 0:
        raise ConfigurationError(
            f"record_every={record_every} must divide the step count {n}")
    step0 = _step_index(Y.t, Y.h)
    res = run_batch(Y.values[:, None], step0, n, Y.h, params, forcing,
                    record_every=record_every)
    out = HistoryVector(res.history()[:, 0], Y.h, (step0 + n) * Y.h)
    traj = Trajectory(Y.t, Y.h * record_every, res.heads[:, 0])
    return out, traj


def strobe_map(Y: HistoryVector, k: int, params: ModelParams,
               forcing: ForcingSpec) -> HistoryVector:
    """Advance by k forcing periods; autonomous for periodic forcing."""
    if k < 1 or k != int(k):
        raise ConfigurationError(f"strobe count k must be a positive integer, got {k}")
    T = forcing_period(forcing)
    if T is None:
        raise ConfigurationError(
            "stroboscopic map requires a periodic forcing law (the zero law "
            "has no distinguished period; use a periodic law with u = 0)")
    steps_per = round(T / Y.h)
    if abs(steps_per * Y.h - T) > _ALIGN_TOL:
        raise ConfigurationError(
            f"forcing period T={T} is not an integer multiple of h={Y.h}")
    if abs(Y.t / T - round(Y.t / T)) > _ALIGN_TOL:
        raise ConfigurationError(
            f"stroboscopic sections require t to be a multiple of T, got t={Y.t}")
    _check_grid(Y, params)
    return _advance(Y, int(k) * steps_per, params, forcing)


def mae(A: HistoryVector, B: HistoryVector) -> float:
    """Mean absolute error (1/tau) * integral |A - B| over the window,
    by the trapezoidal rule on the shared grid."""
    if A.n != B.n or abs(A.h - B.h) > 1e-12:
        raise DomainError(
            f"mismatched grids: N {A.n} vs {B.n}, h {A.h} vs {B.h}")
    d = np.abs(A.values - B.values)
    tau = (A.n - 1) * A.h
    return float((A.h / tau) * (d.sum() - 0.5 * d[0] - 0.5 * d[-1]))
