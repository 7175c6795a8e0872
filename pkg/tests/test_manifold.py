import numpy as np
import pytest

from glacialdde import (ConfigurationError, HealedMapConfig, ModelParams,
                        OutOfRangeError, PeriodicForcing, PreconditionError,
                        SCConfig, StallError, continue_fixed_points,
                        dde_map_pair, grow_stable_manifold, healed_fixed_point,
                        identity_chart_pair, merge_branches, point_side,
                        signed_side_distance)
from glacialdde.manifold import ManifoldCurve, saddle_frame
from conftest import H


def g_linear(pts):
    pts = np.asarray(pts, float)
    return np.stack([0.5 * pts[:, 0], 2.0 * pts[:, 1]], axis=1)


def g_parabola(pts):
    pts = np.asarray(pts, float)
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([0.5 * x, 2.0 * (y - x * x) + 0.25 * x * x], axis=1)


LIN = identity_chart_pair(g_linear)
PAR = identity_chart_pair(g_parabola)


def sc(**kw):
    base = dict(delta_init=5e-4, delta_min=1e-7, delta_max=0.05,
                bisect_tol=1e-9, max_arclength=2.0, max_points=3000,
                seed_offset=1e-3)
    base.update(kw)
    return SCConfig(**base)


def test_linear_saddle_manifold_is_the_axis():
    curve = grow_stable_manifold((0.0, 0.0), +1, LIN, sc())
    assert curve.total_arclength >= 2.0
    assert np.abs(curve.s_l[:, 1]).max() < 1e-6


def test_linear_saddle_spacing_equals_radius():
    curve = grow_stable_manifold((0.0, 0.0), +1, LIN, sc())
    spacing = np.hypot(*np.diff(curve.s_l[2:], axis=0).T)
    assert np.max(np.abs(spacing / curve.delta[3:] - 1.0)) < 0.01


def test_parabola_manifold_matches_graph():
    curve = grow_stable_manifold((0.0, 0.0), +1, PAR,
                                 sc(delta_max=0.005, max_arclength=1.5))
    dev = np.abs(curve.s_l[:, 1] - curve.s_l[:, 0] ** 2)
    assert dev.max() < 1e-5


def test_both_directions_land_on_graph():
    minus = grow_stable_manifold((0.0, 0.0), -1, PAR,
                                 sc(delta_max=0.005, max_arclength=1.0))
    assert minus.s_l[-1, 0] < -0.5
    dev = np.abs(minus.s_l[:, 1] - minus.s_l[:, 0] ** 2)
    assert dev.max() < 1e-5


def test_pairing_identity_exact_bookkeeping():
    curve = grow_stable_manifold((0.0, 0.0), +1, PAR,
                                 sc(delta_max=0.01, max_arclength=1.0))
    recomputed = PAR.r(curve.s_l)
    assert np.max(np.abs(curve.s_r - recomputed)) < 1e-10


def test_manifold_invariance_property():
    # images of grown points stay on the reference polyline; the two seed
    # points carry the linear-segment initialization error and the last
    # point has no successors yet, so they are excluded
    cfg = sc(delta_max=0.01, max_arclength=1.0)
    curve = grow_stable_manifold((0.0, 0.0), +1, PAR, cfg)
    imgs = PAR.g(curve.s_l[2:-1])
    for im in imgs:
        sd, _ = signed_side_distance(curve.s_r, im)
        assert abs(sd) < 5 * cfg.bisect_tol


def test_refinement_halves_interior_distance():
    curves = {}
    for dm in (0.02, 0.01, 0.005):
        curves[dm] = grow_stable_manifold((0.0, 0.0), +1, PAR,
                                          sc(delta_max=dm, max_arclength=1.3))

    def interior_hausdorff(A, B, L):
        d = 0.0
        for poly_a, poly_b in ((A, B), (B, A)):
            keep = poly_a.arclength <= L
            for p in poly_a.s_l[keep]:
                sd, _ = signed_side_distance(poly_b.s_l, p)
                d = max(d, abs(sd))
        return d

    d1 = interior_hausdorff(curves[0.02], curves[0.01], 1.2)
    d2 = interior_hausdorff(curves[0.01], curves[0.005], 1.2)
    assert d2 <= 0.55 * d1


def test_saddle_frame_verification():
    v, lam_s, lam_u = saddle_frame((0.0, 0.0), LIN, sc())
    assert abs(lam_s - 0.5) < 1e-6
    assert abs(lam_u - 2.0) < 1e-6
    assert np.allclose(np.abs(v), [1.0, 0.0], atol=1e-8)


def test_non_saddle_rejected():
    def g_sink(pts):
        pts = np.asarray(pts, float)
        return np.stack([0.5 * pts[:, 0], 0.9 * pts[:, 1]], axis=1)

    with pytest.raises(PreconditionError):
        grow_stable_manifold((0.0, 0.0), +1, identity_chart_pair(g_sink), sc())


def test_orientation_reversing_stable_multiplier_rejected():
    def g_flip(pts):
        pts = np.asarray(pts, float)
        return np.stack([-0.5 * pts[:, 0], 2.0 * pts[:, 1]], axis=1)

    with pytest.raises(PreconditionError):
        grow_stable_manifold((0.0, 0.0), +1, identity_chart_pair(g_flip), sc())


def test_stall_reports_partial_curve():
    # make the map undefined beyond x = 0.35: growth must stall there
    def g_bounded(pts):
        out = g_linear(pts)
        bad = np.abs(np.asarray(pts, float)[:, 0]) > 0.35
        out[bad] = np.nan
        return out

    with pytest.raises(StallError) as exc:
        grow_stable_manifold((0.0, 0.0), +1, identity_chart_pair(g_bounded),
                             sc(max_arclength=2.0))
    assert exc.value.curve is not None
    assert exc.value.last_point is not None
    assert 0.3 < exc.value.curve.s_l[-1, 0] <= 0.36


def test_direction_validation():
    with pytest.raises(ConfigurationError):
        grow_stable_manifold((0.0, 0.0), 0, LIN, sc())


def test_sc_config_validation():
    with pytest.raises(ConfigurationError):
        SCConfig(delta_init=1e-9, delta_min=1e-6)
    with pytest.raises(ConfigurationError):
        SCConfig(bisect_tol=0.0)


# --- point_side ---

def _straight_curve():
    x = np.linspace(0.0, 1.0, 11)
    pts = np.stack([x, np.zeros_like(x)], axis=1)
    return ManifoldCurve(s_l=pts, s_r=pts.copy(),
                         arclength=x.copy(), delta=np.full(11, 0.1))


def test_point_side_above_below_on():
    curve = _straight_curve()
    assert point_side(curve, (0.5, 0.1)) == "above"
    assert point_side(curve, (0.5, -0.1)) == "below"
    assert point_side(curve, (0.4, 0.0)) == "on"
    assert point_side(curve, (0.5, 5e-9)) == "on"


def test_point_side_out_of_coverage():
    curve = _straight_curve()
    with pytest.raises(OutOfRangeError):
        point_side(curve, (1.5, 0.2))
    with pytest.raises(OutOfRangeError):
        point_side(curve, (-0.5, 0.2))


def test_merge_branches_runs_through_saddle():
    minus = grow_stable_manifold((0.0, 0.0), -1, PAR,
                                 sc(delta_max=0.01, max_arclength=0.5))
    plus = grow_stable_manifold((0.0, 0.0), +1, PAR,
                                sc(delta_max=0.01, max_arclength=0.5))
    merged = merge_branches(minus, plus)
    assert len(merged) == len(minus) + len(plus) - 1
    assert np.array_equal(merged.s_l[len(minus) - 1], [0.0, 0.0])
    assert np.all(np.diff(merged.arclength) > 0)
    dev = np.abs(merged.s_l[:, 1] - merged.s_l[:, 0] ** 2)
    assert dev.max() < 1e-4


# --- the implicit delay-model pair ---

@pytest.fixture(scope="module")
def dde_saddle_curve():
    forcing = PeriodicForcing(T=4.1, phi=0.0)
    cfg = HealedMapConfig(params=ModelParams(tau=1.55, u=0.0), forcing=forcing)
    rec = healed_fixed_point((-0.3, -0.3), cfg)
    branch = continue_fixed_points(rec, 0.09, 0.005, cfg)
    saddle = branch.records[-1]
    cfg09 = cfg.with_u(0.09)
    maps = dde_map_pair(cfg09)
    curve = grow_stable_manifold(
        saddle, -1, maps,
        SCConfig(delta_init=0.005, delta_min=1e-6, delta_max=0.02,
                 bisect_tol=1e-8, max_arclength=0.45, max_points=200,
                 seed_offset=1e-3))
    return saddle, maps, curve


def test_dde_pair_pairing_identity(dde_saddle_curve):
    _, maps, curve = dde_saddle_curve
    recomputed = maps.r(curve.s_l)
    assert np.max(np.abs(curve.s_r - recomputed)) < 1e-10


def test_dde_pair_invariance(dde_saddle_curve):
    _, maps, curve = dde_saddle_curve
    imgs = maps.g(curve.s_l[2:-1])
    for im in imgs:
        sd, _ = signed_side_distance(curve.s_r, im)
        assert abs(sd) < 5 * 1e-8


def test_dde_curve_descends_from_saddle(dde_saddle_curve):
    saddle, _, curve = dde_saddle_curve
    assert curve.s_l[-1, 0] < saddle.point.x1 - 0.2
    assert curve.s_l[-1, 1] < saddle.point.x2 - 0.2
