import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glacialdde import (ConfigurationError,
                        HealedMapConfig, ModelParams, NoConvergenceError,
                        PeriodicForcing, continue_fixed_points, equilibria,
                        forward_map, healed_fixed_point, healed_planar_map,
                        lift, restrict, singular_boundary_scan,
                        singular_values, spectral_gap)
from glacialdde.eqfree import chart_jacobian, classify_multipliers
from conftest import H


def test_lift_shape_and_values():
    Y = lift((1.0, 2.0), 4, h=H)
    assert np.array_equal(Y.values, [2.0, 2.0, 2.0, 1.0])
    assert Y.t == 0.0
    Yc = lift((0.3, 0.3), 6, h=H)
    assert np.all(Yc.values == 0.3)


def test_restrict_reads_head_and_oldest():
    Y = lift((1.0, 2.0), 4, h=H)
    assert tuple(restrict(Y)) == (1.0, 2.0)
    Yc = lift((0.3, 0.3), 6, h=H)
    assert tuple(restrict(Yc)) == (0.3, 0.3)


@given(st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=100, deadline=None)
def test_restrict_of_lift_is_identity(x1, x2):
    assert tuple(restrict(lift((x1, x2), 17, h=H))) == (x1, x2)


def test_forward_map_fixes_equilibria(cfg_bist):
    for x in equilibria(cfg_bist.params):
        pt = forward_map((x, x), 2, cfg_bist)
        assert pt.x1 == pytest.approx(x, abs=1e-12)
        assert pt.x2 == pytest.approx(x, abs=1e-12)


def test_forward_map_requires_healing_steps(cfg_bist):
    with pytest.raises(ConfigurationError):
        forward_map((-0.5, -0.5), 0, cfg_bist)


def test_forward_map_escape_at_supercritical_amplitude(cfg_155_009):
    pt = forward_map((-0.5, -0.5), 40, cfg_155_009)
    inside = -0.75 <= pt.x1 <= 0.15 and -0.75 <= pt.x2 <= 0.15
    assert not inside


# --- fixed points at zero forcing ---

def test_unforced_fixed_points_and_classes(cfg_bist):
    # root oracle: x^2 + s x + (p - r) = 0 gives the nonzero pair
    p = cfg_bist.params
    oracle = sorted(np.roots([1.0, p.s, p.p - p.r]).real.tolist() + [0.0])
    expected_classes = {oracle[0]: "sink", oracle[1]: "saddle", oracle[2]: "source"}
    for root, cls in expected_classes.items():
        rec = healed_fixed_point((root + 0.002, root - 0.002), cfg_bist)
        assert rec.point.x1 == pytest.approx(root, abs=1e-8)
        assert rec.point.x2 == pytest.approx(root, abs=1e-8)
        assert rec.classification == cls
        assert rec.residual < cfg_bist.newton_tol


def test_saddle_multipliers_regression(cfg_bist):
    rec = healed_fixed_point((-0.3, -0.3), cfg_bist)
    mags = sorted(np.abs(rec.eigenvalues))
    assert mags[0] == pytest.approx(0.2788, abs=2e-3)
    assert mags[1] == pytest.approx(3.0452, abs=2e-2)


def test_classification_stable_under_fd_eps(cfg_bist):
    for root in equilibria(cfg_bist.params):
        classes = set()
        for eps in (1e-5, 1e-6, 1e-7):
            cfg = HealedMapConfig(params=cfg_bist.params, forcing=cfg_bist.forcing,
                                  h=H, fd_eps=eps)
            classes.add(healed_fixed_point((root, root), cfg).classification)
        assert len(classes) == 1


def test_classify_multipliers_tolerance():
    assert classify_multipliers([0.5, 0.9]) == "sink"
    assert classify_multipliers([1.5, 3.0]) == "source"
    assert classify_multipliers([0.5, 1.5]) == "saddle"
    assert classify_multipliers([1.0 + 1e-9, 0.5]) == "marginal"


def test_newton_reports_nonconvergence(cfg_155_009):
    cfg = HealedMapConfig(params=cfg_155_009.params, forcing=cfg_155_009.forcing,
                          h=H, newton_max_iter=1)
    with pytest.raises(NoConvergenceError) as exc:
        healed_fixed_point((-0.1, 0.1), cfg)
    assert exc.value.residual is not None


def test_fd_eps_contract(cfg_bist):
    cfg = HealedMapConfig(params=cfg_bist.params, forcing=cfg_bist.forcing,
                          h=H, fd_eps=0.0)
    with pytest.raises(ConfigurationError):
        healed_fixed_point((-0.5, -0.5), cfg)


# --- continuation ---

def test_sink_branch_stays_inside_circle(cfg_bist, forcing0):
    rec = healed_fixed_point((-0.5, -0.5), cfg_bist)
    branch = continue_fixed_points(rec, 0.3, 0.02, cfg_bist)
    assert branch.diagnostic is None
    assert branch.records[-1].u == pytest.approx(0.3)
    for r in branch:
        assert np.all(np.abs(r.eigenvalues) < 1.0)
        assert r.classification == "sink"


def test_source_branch_outside_circle_until_lost(cfg_bist):
    rec = healed_fixed_point((0.0, 0.0), cfg_bist)
    branch = continue_fixed_points(rec, 0.15, 0.01, cfg_bist)
    assert len(branch) >= 5
    for r in branch:
        assert np.all(np.abs(r.eigenvalues) > 1.0)
        assert r.classification == "source"


def test_continuation_rejects_zero_step(cfg_bist):
    rec = healed_fixed_point((-0.5, -0.5), cfg_bist)
    with pytest.raises(ConfigurationError):
        continue_fixed_points(rec, 0.3, 0.0, cfg_bist)


def test_saddle_continues_to_known_location(forcing0):
    # at u=0.09, tau=1.55 the saddle sits near (-0.2, -0.3)
    cfg = HealedMapConfig(params=ModelParams(tau=1.55, u=0.0), forcing=forcing0)
    rec = healed_fixed_point((-0.3, -0.3), cfg)
    branch = continue_fixed_points(rec, 0.09, 0.005, cfg)
    assert branch.diagnostic is None
    saddle = branch.records[-1]
    assert saddle.classification == "saddle"
    assert abs(saddle.point.x1 - (-0.2)) < 0.05
    assert abs(saddle.point.x2 - (-0.3)) < 0.05


# --- the healed planar map ---

def test_healed_map_fixes_equilibrium(cfg_bist):
    out = healed_planar_map((-0.5, -0.5), cfg_bist)
    assert out.x1 == pytest.approx(-0.5, abs=1e-8)
    assert out.x2 == pytest.approx(-0.5, abs=1e-8)


def test_healed_map_fixed_points_are_consistent(cfg_155_009):
    rec = healed_fixed_point((-0.22, -0.28), cfg_155_009)
    out = healed_planar_map(rec.point, cfg_155_009)
    assert out.x1 == pytest.approx(rec.point.x1, abs=1e-6)
    assert out.x2 == pytest.approx(rec.point.x2, abs=1e-6)


def test_chart_consistency(cfg_155_009):
    # where the healed map is defined, mapping then restricting at power ell
    # equals restricting at power ell+1
    x = (-0.45, -0.5)
    y = healed_planar_map(x, cfg_155_009)
    lhs = forward_map(x, cfg_155_009.ell + 1, cfg_155_009)
    rhs_ = forward_map(tuple(y), cfg_155_009.ell, cfg_155_009)
    assert np.allclose(lhs, rhs_, atol=10 * cfg_155_009.newton_tol)


def test_healing_convergence_saddle_and_sink(forcing0):
    # locations move < 1e-2 from ell=1 to 2 and < 1e-3 from ell=2 to 3
    params = ModelParams(tau=1.55, u=0.09)
    pts = {}
    seeds = ((-0.222, -0.276), (-0.451, -0.515))
    for ell in (1, 2, 3):
        cfg = HealedMapConfig(params=params, forcing=forcing0, h=H, ell=ell)
        sad = healed_fixed_point(seeds[0], cfg)
        snk = healed_fixed_point(seeds[1], cfg)
        pts[ell] = (np.asarray(sad.point), np.asarray(snk.point))
        seeds = (sad.point, snk.point)  # deeper healing has a smaller basin
    for which in (0, 1):
        d12 = np.abs(pts[2][which] - pts[1][which]).max()
        d23 = np.abs(pts[3][which] - pts[2][which]).max()
        assert d12 < 1e-2
        assert d23 < 1e-3


def test_healed_map_ell_sensitivity_is_small(forcing0):
    params = ModelParams(tau=1.55, u=0.09)
    cfg1 = HealedMapConfig(params=params, forcing=forcing0, h=H, ell=1)
    cfg2 = HealedMapConfig(params=params, forcing=forcing0, h=H, ell=2)
    x = (-0.4, -0.45)
    y1 = healed_planar_map(x, cfg1)
    y2 = healed_planar_map(x, cfg2)
    assert np.max(np.abs(np.asarray(y1) - np.asarray(y2))) < 1e-2


# --- slow-manifold diagnostics ---

def test_spectral_gap_regression_and_h_stability(cfg_155_009, forcing0):
    gap = spectral_gap((-0.5, -0.5), cfg_155_009)
    assert gap == pytest.approx(0.03534, abs=5e-4)  # frozen regression value
    cfg_fine = HealedMapConfig(params=cfg_155_009.params, forcing=forcing0,
                               h=0.005)
    gap_fine = spectral_gap((-0.5, -0.5), cfg_fine)
    # two significant digits of agreement between step sizes
    assert abs(gap - gap_fine) / gap < 0.05


def test_spectral_gap_below_one_on_samples(cfg_155_009):
    for x1 in (-0.75, -0.3, 0.15):
        for x2 in (-0.75, -0.3, 0.15):
            assert spectral_gap((x1, x2), cfg_155_009) < 1.0


def test_rank_two_gap_dominates_leading_gap(cfg_155_009):
    # the drop from sigma2 to sigma3 should beat the drop from sigma1 to
    # sigma2 everywhere on the sampled chart domain; measured, this fails
    # where the leading stretch is extreme (e.g. (x1,x2)=(-0.3,-0.75) has
    # sigma2/sigma1 ~ 1e-3 under a sigma3/sigma2 of ~3e-2, stable under
    # h-refinement), so this check documents a real property violation
    for x1 in (-0.75, -0.3, 0.15):
        for x2 in (-0.75, -0.3, 0.15):
            sv = singular_values((x1, x2), cfg_155_009)
            assert sv[2] / sv[1] < sv[1] / sv[0], f"violated at ({x1},{x2})"


def test_spectral_gap_contracts(cfg_155_009):
    with pytest.raises(ConfigurationError):
        spectral_gap((-0.5, -0.5),
                     HealedMapConfig(params=cfg_155_009.params,
                                     forcing=cfg_155_009.forcing, h=H,
                                     fd_eps=0.0))


def test_singular_boundary_nonzero_at_reference_point(cfg_155_009):
    J = chart_jacobian(np.array([[-0.5, -0.5]]), cfg_155_009, power=1)[0]
    det = np.linalg.det(J)
    assert abs(det) > 0.1


def test_singular_boundary_sign_change_in_domain(cfg_155_009):
    field = singular_boundary_scan((-0.75, 0.15, -0.75, 0.15), 8, 8,
                                   cfg_155_009)
    sgn = np.sign(field.values)
    changes = (sgn[:, :-1] * sgn[:, 1:] < 0).any() or \
              (sgn[:-1, :] * sgn[1:, :] < 0).any()
    assert changes


def test_singular_grid_validation(cfg_155_009):
    with pytest.raises(ConfigurationError):
        singular_boundary_scan((-0.75, 0.15, -0.75, 0.15), 1, 5, cfg_155_009)


def test_det_ratio_matches_multiplier_product(forcing0):
    # the chart-Jacobian determinant ratio between consecutive powers equals
    # the product of the healed-map multipliers
    cfg = HealedMapConfig(params=ModelParams(tau=1.55, u=0.0), forcing=forcing0)
    rec = healed_fixed_point((-0.5, -0.5), cfg)
    pt = np.asarray(rec.point)[None, :]
    d1 = np.linalg.det(chart_jacobian(pt, cfg, power=cfg.ell)[0])
    d2 = np.linalg.det(chart_jacobian(pt, cfg, power=cfg.ell + 1)[0])
    prod = (rec.eigenvalues[0] * rec.eigenvalues[1]).real
    assert d2 / d1 == pytest.approx(prod, rel=1e-8)


def test_config_validation(forcing0):
    with pytest.raises(ConfigurationError):
        HealedMapConfig(params=ModelParams(tau=1.45), forcing=forcing0, ell=0)
    from glacialdde import ZeroForcing
    with pytest.raises(ConfigurationError):
        HealedMapConfig(params=ModelParams(tau=1.45), forcing=ZeroForcing())
    with pytest.raises(ConfigurationError):
        HealedMapConfig(params=ModelParams(tau=1.455), forcing=forcing0)
