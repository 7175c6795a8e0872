"""Delay-model toolkit for forced glacial-cycle dynamics.

Implements a fixed-step integrator for a scalar delay equation under
periodic forcing, an equation-free reduction to a planar stroboscopic map
(lifting, restriction, healing, fixed points with continuation), stable
manifolds of the implicitly defined map by a two-curve search-circle
method, and the batch scans (basins, amplitude thresholds, bifurcation
structure, step-amplitude transition scenario) built on top.
"""

__version__ = "0.1.0"

from .errors import (ChartValidityError, ConfigurationError, DomainError,
                     GlacialDDEError, IntegrationError, NoConvergenceError,
                     OutOfRangeError, PreconditionError, StallError)
from .forcing import (ForcingSpec, PeriodicForcing, StepAmplitudeScale,
                      SumOfSines, TabulatedForcing, ZeroForcing, eval_forcing,
                      forcing_period, load_tabulated)
from .model import ModelParams, equilibria, rhs
from .integrate import (HistoryVector, Trajectory, constant_history, evolve,
                        evolve_trajectory, heun_step, history_length, mae,
                        strobe_map)
from .eqfree import (FixedPointRecord, HealedMapConfig, PlanarPoint,
                     continue_fixed_points, forward_map, healed_fixed_point,
                     healed_planar_map, lift, restrict, singular_boundary_scan,
                     singular_values, spectral_gap)
from .manifold import (ManifoldCurve, PlanarMapPair, SCConfig, dde_map_pair,
                       grow_stable_manifold, identity_chart_pair,
                       merge_branches, point_side, signed_side_distance)
from .scan import (ClassifyResult, ResponseLabel, ScanResult, basin_scan,
                   bifurcation_boundary_2d, bifurcation_scan_1d,
                   classify_response, heatmap_u, kyr_bp_to_model,
                   model_to_kyr_bp, mpt_scenario, phase_threshold_scan,
                   snap_to_grid)

__all__ = [
    "ChartValidityError", "ClassifyResult", "ConfigurationError",
    "DomainError", "FixedPointRecord", "ForcingSpec", "GlacialDDEError",
    "HealedMapConfig", "HistoryVector", "IntegrationError", "ManifoldCurve",
    "ModelParams", "NoConvergenceError", "OutOfRangeError", "PeriodicForcing",
    "PlanarMapPair", "PlanarPoint", "PreconditionError", "ResponseLabel",
    "SCConfig", "ScanResult", "StallError", "StepAmplitudeScale", "SumOfSines",
    "TabulatedForcing", "Trajectory", "ZeroForcing", "basin_scan",
    "bifurcation_boundary_2d", "bifurcation_scan_1d", "classify_response",
    "constant_history", "continue_fixed_points", "dde_map_pair", "equilibria",
    "eval_forcing", "evolve", "evolve_trajectory", "forcing_period",
    "forward_map", "grow_stable_manifold", "healed_fixed_point",
    "healed_planar_map", "heatmap_u", "heun_step", "history_length",
    "identity_chart_pair", "kyr_bp_to_model", "lift", "load_tabulated", "mae",
    "merge_branches", "model_to_kyr_bp", "mpt_scenario", "phase_threshold_scan",
    "point_side", "restrict", "rhs", "signed_side_distance",
    "singular_boundary_scan", "singular_values", "snap_to_grid",
    "spectral_gap", "strobe_map",
]
