import math

import numpy as np
import pytest

from glacialdde import (ConfigurationError, DomainError, IntegrationError,
                        HistoryVector, ModelParams, PeriodicForcing,
                        ZeroForcing, constant_history, equilibria, evolve,
                        evolve_trajectory, heun_step, history_length, mae,
                        rhs, strobe_map)
from conftest import H, T_FORCE, hist, steps_per_period


# --- right-hand side ---

def test_rhs_equilibrium_values(forcing0):
    p = ModelParams(tau=1.45, u=0.0)
    assert rhs(0.0, -0.5, -0.5, p, forcing0) == pytest.approx(0.0, abs=1e-15)
    assert rhs(0.0, 0.0, 0.0, p, forcing0) == 0.0


def test_rhs_forced_at_quarter_period(forcing0):
    p = ModelParams(tau=1.55, u=0.09)
    assert rhs(T_FORCE / 4, 0.0, 0.0, p, forcing0) == pytest.approx(-0.09, abs=1e-12)


def test_rhs_rejects_nonfinite(forcing0):
    p = ModelParams()
    with pytest.raises(DomainError):
        rhs(0.0, math.nan, 0.0, p, forcing0)


def test_cubic_roots_are_the_known_three():
    roots = equilibria(ModelParams())
    assert np.allclose(sorted(roots), [-0.5, -0.3, 0.0], atol=1e-15)


# --- single step ---

def test_heun_step_fixes_equilibria(forcing0):
    p = ModelParams(tau=1.45, u=0.0)
    for x in equilibria(p):
        Y = hist(x, 1.45)
        Y2 = heun_step(Y, p, forcing0)
        assert np.max(np.abs(Y2.values - x)) < 1e-14
        assert Y2.t == pytest.approx(H)


def test_heun_step_hand_value(forcing0):
    # one step from the constant equilibrium history with forcing switched on:
    # f0 = 0, predictor stays, fE = -u sin(2 pi h / T)
    p = ModelParams(tau=1.55, u=0.09)
    Y = hist(-0.5, 1.55)
    Y2 = heun_step(Y, p, forcing0)
    expected = -0.5 + 0.005 * (0.0 - 0.09 * np.sin(2 * np.pi * 0.01 / 4.1))
    assert abs(Y2.head - expected) < 1e-15


def test_heun_step_shifts_window(forcing0):
    p = ModelParams(tau=1.55, u=0.09)
    rng = np.random.default_rng(7)
    Y = HistoryVector(rng.uniform(-0.6, 0.1, history_length(1.55, H)), H, 0.0)
    Y2 = heun_step(Y, p, forcing0)
    assert np.array_equal(Y2.values[:-1], Y.values[1:])


def test_grid_mismatch_rejected(forcing0):
    p = ModelParams(tau=1.55)
    Y = constant_history(-0.5, 42, H)
    with pytest.raises(ConfigurationError):
        heun_step(Y, p, forcing0)


# --- evolve ---

def test_evolve_composition_is_bitwise(forcing0):
    p = ModelParams(tau=1.55, u=0.09)
    Y = hist(-0.5, 1.55)
    a = evolve(Y, 2 * T_FORCE, p, forcing0)
    b = evolve(evolve(Y, T_FORCE, p, forcing0), T_FORCE, p, forcing0)
    assert np.array_equal(a.values, b.values)
    assert a.t == b.t


def test_evolve_span_validation(forcing0):
    p = ModelParams(tau=1.55)
    Y = hist(-0.5, 1.55)
    with pytest.raises(ConfigurationError):
        evolve(Y, 0.005, p, forcing0)
    with pytest.raises(ConfigurationError):
        evolve(Y, -1.0, p, forcing0)


def test_evolve_determinism(forcing0):
    p = ModelParams(tau=1.55, u=0.09)
    Y = hist(-0.5, 1.55)
    a = evolve(Y, 5 * T_FORCE, p, forcing0)
    b = evolve(Y, 5 * T_FORCE, p, forcing0)
    assert np.array_equal(a.values, b.values)


def test_evolve_smooths_discontinuous_history(forcing0):
    # lifted states are discontinuous; after time tau the window is smooth
    # and depends continuously on the input
    p = ModelParams(tau=1.55, u=0.05)
    n = history_length(1.55, H)
    v = np.full(n, -0.3)
    v[-1] = 0.1  # head jump
    Y = HistoryVector(v, H, 0.0)
    out = evolve(Y, p.tau, p, forcing0)
    steps = np.abs(np.diff(out.values))
    assert steps.max() < 0.05  # no O(1) jumps left on the window
    v2 = v.copy()
    v2[5] += 1e-6
    out2 = evolve(HistoryVector(v2, H, 0.0), p.tau, p, forcing0)
    assert np.max(np.abs(out2.values - out.values)) < 1e-4


def test_second_order_convergence(forcing0):
    # Richardson: halving h shrinks the one-period head error ~4x
    p = ModelParams(tau=1.55, u=0.09)
    vals = {}
    for h in (0.01, 0.005, 0.0025):
        Y = constant_history(-0.5, history_length(1.55, h), h)
        vals[h] = evolve(Y, T_FORCE, p, forcing0).head
    order = math.log2(abs((vals[0.01] - vals[0.005]) / (vals[0.005] - vals[0.0025])))
    assert 1.8 <= order <= 2.2


def test_trajectory_sample_count(forcing0):
    p = ModelParams(tau=1.55, u=0.09)
    Y = hist(-0.5, 1.55)
    _, traj = evolve_trajectory(Y, T_FORCE, p, forcing0)
    assert traj.samples.size == steps_per_period() + 1
    assert np.all(np.isfinite(traj.samples))


def test_blowup_guard_carries_time(forcing0):
    p = ModelParams(tau=1.45, u=0.0)
    Y = hist(-50.0, 1.45)  # far outside the attractor range; scheme explodes
    with pytest.raises(IntegrationError) as exc:
        evolve(Y, 50.0, p, forcing0)
    assert exc.value.t is not None and exc.value.t > 0


# --- stability of the unforced equilibria ---

def test_stable_equilibrium_holds_small_perturbation(forcing0):
    p = ModelParams(tau=1.45, u=0.0)
    for sign in (+1, -1):
        Y = hist(-0.5 + sign * 1e-3, 1.45)
        _, traj = evolve_trajectory(Y, 100.0, p, forcing0)  # 1e4 steps
        assert np.max(np.abs(traj.samples + 0.5)) < 1e-2


def test_origin_departs_with_growing_envelope(forcing0):
    # the origin is unstable under the delayed feedback: the per-period
    # amplitude envelope grows monotonically until the trajectory has left
    p = ModelParams(tau=1.45, u=0.0)
    Y = hist(1e-3, 1.45)
    _, traj = evolve_trajectory(Y, 24 * T_FORCE, p, forcing0)
    per = steps_per_period()
    envelope = np.abs(traj.samples[1:]).reshape(24, per).max(axis=1)
    below = envelope < 0.5
    grow_phase = envelope[below]
    assert grow_phase.size >= 5
    assert np.all(np.diff(grow_phase) > 0)
    assert envelope.max() > 0.5  # it really leaves


def test_large_orbit_reaches_deep_minimum(forcing0):
    # unforced large-amplitude orbit dips below -p/s every cycle
    p = ModelParams(tau=1.45, u=0.0)
    Y = hist(0.5, 1.45)
    Y = evolve(Y, 50.0, p, forcing0)  # transient discard
    _, traj = evolve_trajectory(Y, 123.0, p, forcing0)
    deep = -p.p / p.s
    assert traj.samples.min() <= deep
    # at least one deep excursion per orbit period (measured ~11.26 units)
    window = round(12.0 / H)
    n_win = traj.samples.size // window
    mins = traj.samples[:n_win * window].reshape(n_win, window).min(axis=1)
    assert np.all(mins <= deep)


# --- stroboscopic map ---

def test_strobe_composition_bitwise(forcing0):
    p = ModelParams(tau=1.55, u=0.05)
    Y = hist(-0.5, 1.55)
    a = strobe_map(Y, 2, p, forcing0)
    b = strobe_map(strobe_map(Y, 1, p, forcing0), 1, p, forcing0)
    assert np.array_equal(a.values, b.values)


def test_strobe_unforced_equilibrium(forcing0):
    p = ModelParams(tau=1.45, u=0.0)
    Y = hist(-0.5, 1.45)
    out = strobe_map(Y, 3, p, forcing0)
    assert np.max(np.abs(out.values + 0.5)) < 1e-13


def test_strobe_escape_at_supercritical_amplitude(forcing0):
    # from the unforced equilibrium history, u=0.09 leaves the chart window
    p = ModelParams(tau=1.55, u=0.09)
    Y = hist(-0.5, 1.55)
    heads = []
    for _ in range(12):
        Y = strobe_map(Y, 1, p, forcing0)
        heads.append(Y.head)
    assert min(heads) < -0.75 or max(heads) > 0.15


def test_strobe_requires_periodic_forcing():
    p = ModelParams(tau=1.45, u=0.0)
    Y = hist(-0.5, 1.45)
    with pytest.raises(ConfigurationError):
        strobe_map(Y, 1, p, ZeroForcing())


def test_strobe_requires_aligned_time(forcing0):
    p = ModelParams(tau=1.45, u=0.0)
    Y = hist(-0.5, 1.45, t=1.0)  # not a multiple of T
    with pytest.raises(ConfigurationError):
        strobe_map(Y, 1, p, forcing0)


# --- window distance ---

def test_mae_zero_on_identical():
    A = hist(-0.5, 1.45)
    assert mae(A, A) == 0.0


def test_mae_constant_offset():
    A = hist(-0.5, 1.45)
    B = hist(-0.3, 1.45)
    assert mae(A, B) == pytest.approx(0.2, abs=1e-12)
    assert mae(B, A) == pytest.approx(0.2, abs=1e-12)


def test_mae_trapezoid_value():
    # N=3 windows (0,0,0) vs (0,1,0) over tau=2h: trapezoid gives 1/2
    A = HistoryVector(np.array([0.0, 0.0, 0.0]), H, 0.0)
    B = HistoryVector(np.array([0.0, 1.0, 0.0]), H, 0.0)
    assert mae(A, B) == pytest.approx(0.5, abs=1e-15)


def test_mae_grid_mismatch():
    A = hist(-0.5, 1.45)
    B = hist(-0.5, 1.55)
    with pytest.raises(DomainError):
        mae(A, B)


def test_history_validation():
    with pytest.raises(DomainError):
        HistoryVector(np.array([1.0]), H, 0.0)
    with pytest.raises(DomainError):
        HistoryVector(np.array([1.0, math.inf]), H, 0.0)
    with pytest.raises(ConfigurationError):
        history_length(1.455, 0.01)
