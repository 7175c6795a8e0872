"""Command-line entry point.

Every subcommand reads one JSON configuration (defaults, optional file,
dotted --set overrides), computes its outputs fully, and only then writes
them to --out together with a resolved config.json snapshot. Re-running a
subcommand on that snapshot reproduces the files byte for byte.

Exit codes: 0 success, 1 configuration error, 2 numerical failure; errors
are also emitted as a JSON record on stderr.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import load_config, model_params, forcing_spec, snapshot_config
from .csvio import write_csv, write_json
from .errors import (ChartValidityError, ConfigurationError, DomainError,
                     GlacialDDEError, IntegrationError, NoConvergenceError,
                     OutOfRangeError, PreconditionError, StallError)
from .eqfree import (HealedMapConfig, continue_fixed_points,
                     healed_fixed_point, lift, singular_boundary_scan,
                     spectral_gap)
from .integrate import evolve, evolve_trajectory, history_length
from .manifold import SCConfig, dde_map_pair, grow_stable_manifold
from .scan import (basin_scan, bifurcation_boundary_2d, bifurcation_scan_1d,
                   heatmap_u, kyr_bp_to_model, model_to_kyr_bp, mpt_scenario,
                   phase_threshold_scan, snap_to_grid)

_CONFIG_ERRORS = (ConfigurationError, DomainError, OutOfRangeError)
_NUMERICAL_ERRORS = (IntegrationError, NoConvergenceError, ChartValidityError,
                     PreconditionError, StallError)


def _fail(exc: Exception, code: int) -> None:
    record = {"error": {"type": type(exc).__name__, "message": str(exc),
                        "exit_code": code}}
    print(json.dumps(record), file=sys.stderr)
    sys.exit(code)


def common_options(f):
    f = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                     help="Override a config value by dotted key.")(f)
    f = click.option("--jobs", type=int, default=None,
                     help="Worker processes for grid scans (default: all cores).")(f)
    f = click.option("--out", "out_dir", type=click.Path(), default="out",
                     show_default=True, help="Output directory.")(f)
    f = click.option("--config", "config_path", type=click.Path(), default=None,
                     help="JSON configuration file.")(f)
    return f


def _setup(config_path, overrides, out_dir, jobs):
    cfg = load_config(config_path, list(overrides))
    n_jobs = jobs if jobs and jobs > 0 else (os.cpu_count() or 1)
    return cfg, Path(out_dir), n_jobs


def _emit(out_dir: Path, cfg: dict, files: list[tuple[str, object]]) -> None:
    """Write all outputs at once; nothing touches disk before this point."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, payload in files:
        if name.endswith(".json"):
            write_json(out_dir / name, payload)
        else:
            header, rows = payload
            write_csv(out_dir / name, header, rows)
    write_json(out_dir / "config.json", snapshot_config(cfg))


def guarded(fn):
    """Map toolkit errors to exit codes with a machine-readable record."""

    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except _CONFIG_ERRORS as e:
            _fail(e, 1)
        except _NUMERICAL_ERRORS as e:
            _fail(e, 2)
        except GlacialDDEError as e:
            _fail(e, 2)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.version_option(version=__version__)
def cli():
    """Delay-model toolkit: simulation, equation-free fixed points, stable
    manifolds, and the batch scans behind the basin/threshold analyses."""


@cli.command()
@common_options
@guarded
def simulate(config_path, out_dir, jobs, overrides):
    """Integrate one trajectory and write its head-point samples."""
    cfg, out, _ = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    forcing = forcing_spec(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["simulate"]
    n = history_length(params.tau, h)
    Y = lift((blk["x1"], blk["x2"]), n, h)
    if blk["transient"] > 0:
        Y = evolve(Y, blk["transient"], params, forcing)
    Y, traj = evolve_trajectory(Y, blk["span"], params, forcing,
                                record_every=int(blk["record_every"]))
    rows = [((round(traj.t0 / h) + k * int(blk["record_every"])) * h, x)
            for k, x in enumerate(traj.samples)]
    _emit(out, cfg, [("trajectory.csv", (["t", "x"], rows))])
    click.echo(f"wrote {len(rows)} samples to {out / 'trajectory.csv'}")


@cli.command()
@common_options
@guarded
def heatmap(config_path, out_dir, jobs, overrides):
    """Distance-from-equilibrium heat map over forcing amplitudes."""
    cfg, out, _ = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    forcing = forcing_spec(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["heatmap"]
    horizon = cfg["classify"]["horizon_periods"] * cfg["forcing"].get("T", 4.1)
    u_grid = np.round(np.arange(blk["u_min"], blk["u_max"] + blk["du"] / 2,
                                blk["du"]), 12)
    res = heatmap_u(u_grid, params, forcing, horizon=horizon, h=h, x0=blk["x0"])
    rows = []
    for i, u in enumerate(res.axes["u"]):
        for j, t in enumerate(res.axes["t"]):
            rows.append((u, t, res.values[i, j]))
    _emit(out, cfg, [("heatmap.csv", (["u", "t", "mae"], rows))])
    click.echo(f"wrote {len(rows)} cells to {out / 'heatmap.csv'}")


@cli.command()
@common_options
@guarded
def basin(config_path, out_dir, jobs, overrides):
    """Label a grid of lifted initial conditions by response class."""
    cfg, out, n_jobs = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    forcing = forcing_spec(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["basin"]
    horizon = cfg["classify"]["horizon_periods"] * cfg["forcing"].get("T", 4.1)
    res = basin_scan(tuple(blk["rect"]), int(blk["nx"]), int(blk["ny"]),
                     params, forcing, horizon=horizon, h=h,
                     x_large_threshold=cfg["classify"]["x_large_threshold"],
                     jobs=n_jobs)
    rows = []
    for i, x1 in enumerate(res.axes["x1"]):
        for j, x2 in enumerate(res.axes["x2"]):
            rows.append((i, j, x1, x2, int(res.values[i, j])))
    meta = {"sink": res.metadata["sink"], "sink_note": res.metadata["sink_note"],
            "labels": {"0": "small", "1": "large", "2": "undecided", "-1": "missing"}}
    _emit(out, cfg, [("basin.csv", (["row", "col", "x1", "x2", "label"], rows)),
                     ("basin_meta.json", meta)])
    click.echo(f"wrote {len(rows)} cells to {out / 'basin.csv'}")


def _curve_rows(curve):
    rows = []
    for j in range(len(curve)):
        rows.append((j, curve.s_l[j, 0], curve.s_l[j, 1],
                     curve.s_r[j, 0], curve.s_r[j, 1],
                     curve.arclength[j], curve.delta[j]))
    return rows


@cli.command()
@common_options
@guarded
def manifold(config_path, out_dir, jobs, overrides):
    """Grow both branches of the saddle's stable manifold."""
    cfg, out, _ = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    forcing = forcing_spec(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["manifold"]
    heal = cfg["healing"]
    hcfg = HealedMapConfig(params=params, forcing=forcing, h=h,
                           ell=int(heal["ell"]), fd_eps=heal["fd_eps"],
                           newton_tol=heal["newton_tol"],
                           newton_step_tol=heal["newton_step_tol"],
                           newton_max_iter=int(heal["newton_max_iter"]))
    seed_rec = healed_fixed_point(tuple(blk["seed"]), hcfg.with_u(0.0))
    branch = continue_fixed_points(seed_rec, params.u, blk["continue_du"], hcfg)
    if branch.diagnostic:
        raise NoConvergenceError(f"saddle continuation failed: {branch.diagnostic}")
    saddle = branch.records[-1]
    maps = dde_map_pair(hcfg)
    sc = SCConfig(delta_init=blk["delta_init"], delta_min=blk["delta_min"],
                  delta_max=blk["delta_max"], alpha_max=blk["alpha_max"],
                  bisect_tol=blk["bisect_tol"], seed_offset=blk["seed_offset"],
                  arc_points=int(blk["arc_points"]),
                  max_points=int(blk["max_points"]),
                  max_arclength=blk["max_arclength"], box=tuple(blk["box"]))
    files = []
    meta = {"saddle": [saddle.point.x1, saddle.point.x2],
            "multipliers": [[l.real, l.imag] for l in saddle.eigenvalues],
            "u": params.u, "branches": {}}
    header = ["index", "xL1", "xL2", "xR1", "xR2", "arclength", "delta_used"]
    for direction in blk["directions"]:
        name = "manifold_pos.csv" if direction > 0 else "manifold_neg.csv"
        note = "completed"
        try:
            curve = grow_stable_manifold(saddle, int(direction), maps, sc)
        except StallError as e:
            curve = e.curve
            note = f"stalled: {e}"
        files.append((name, (header, _curve_rows(curve))))
        meta["branches"][name] = {"points": len(curve),
                                  "arclength": curve.total_arclength,
                                  "status": note}
    files.append(("manifold_meta.json", meta))
    _emit(out, cfg, files)
    click.echo(f"wrote {len(files) - 1} branch files to {out}")


@cli.command("fixed-points")
@common_options
@guarded
def fixed_points(config_path, out_dir, jobs, overrides):
    """Continue the unforced fixed points in the forcing amplitude."""
    cfg, out, _ = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    forcing = forcing_spec(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["fixed_points"]
    heal = cfg["healing"]
    hcfg = HealedMapConfig(params=params, forcing=forcing, h=h,
                           ell=int(heal["ell"]), fd_eps=heal["fd_eps"],
                           newton_tol=heal["newton_tol"],
                           newton_step_tol=heal["newton_step_tol"],
                           newton_max_iter=int(heal["newton_max_iter"]))
    header = ["u", "x1", "x2", "re_lambda1", "im_lambda1",
              "re_lambda2", "im_lambda2", "class"]
    files = []
    diag = {}
    for i, seed in enumerate(blk["seeds"]):
        rec = healed_fixed_point(tuple(seed), hcfg.with_u(0.0))
        branch = continue_fixed_points(rec, blk["u_end"], blk["du"], hcfg)
        rows = [(r.u, r.point.x1, r.point.x2,
                 r.eigenvalues[0].real, r.eigenvalues[0].imag,
                 r.eigenvalues[1].real, r.eigenvalues[1].imag,
                 r.classification) for r in branch]
        name = f"fixed_points_branch{i}.csv"
        files.append((name, (header, rows)))
        diag[name] = {"seed": list(seed), "records": len(branch),
                      "diagnostic": branch.diagnostic}
    files.append(("fixed_points_meta.json", diag))
    _emit(out, cfg, files)
    click.echo(f"wrote {len(blk['seeds'])} branches to {out}")


@cli.command("phase-scan")
@common_options
@guarded
def phase_scan(config_path, out_dir, jobs, overrides):
    """Threshold amplitude over a (phase, delay) grid."""
    cfg, out, n_jobs = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["phase_scan"]
    T = cfg["forcing"].get("T", 4.1)
    horizon = cfg["classify"]["horizon_periods"] * T
    phis = np.linspace(blk["phi_min"], blk["phi_max"], int(blk["n_phi"]))
    taus = snap_to_grid(np.linspace(blk["tau_min"], blk["tau_max"],
                                    int(blk["n_tau"])), h)
    res = phase_threshold_scan(phis, taus, params, T=T, du=blk["du"],
                               u_max=blk["u_max"], horizon=horizon, h=h,
                               x_large_threshold=cfg["classify"]["x_large_threshold"],
                               jobs=n_jobs)
    rows = []
    for i, phi in enumerate(res.axes["phi"]):
        for j, tau in enumerate(res.axes["tau"]):
            rows.append((phi, tau, res.values[i, j]))
    _emit(out, cfg, [("phase_thresholds.csv", (["phi", "tau", "u_threshold"], rows))])
    click.echo(f"wrote {len(rows)} cells to {out / 'phase_thresholds.csv'}")


@cli.command()
@common_options
@guarded
def bifurcation(config_path, out_dir, jobs, overrides):
    """Bifurcation structure of the small-amplitude orbit (1d or 2d mode)."""
    cfg, out, _ = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["bifurcation"]
    T = cfg["forcing"].get("T", 4.1)
    phi = cfg["forcing"].get("phi", 0.0)
    ell = int(cfg["healing"]["ell"])
    taus = snap_to_grid(np.linspace(blk["tau_min"], blk["tau_max"],
                                    int(blk["n_tau"])), h)
    if blk["mode"] == "1d":
        res = bifurcation_scan_1d(taus, blk["u"], params, T=T, phi=phi, h=h,
                                  ell=ell, max_period=int(blk["max_period"]),
                                  bracket_width=blk["bracket_width"],
                                  h_fine=blk["h_fine"])
        header = ["tau", "period", "x1", "x2", "orbit_min", "orbit_max",
                  "re_lambda1", "im_lambda1", "re_lambda2", "im_lambda2"]
        rows = [tuple(row) for row in res.values]
        brows = [(lo, hi, per) for lo, hi, per in res.metadata["pd_brackets"]]
        _emit(out, cfg, [
            ("bifurcation_1d.csv", (header, rows)),
            ("pd_brackets.csv", (["tau_lo", "tau_hi", "period"], brows))])
        click.echo(f"wrote {len(rows)} rows, {len(brows)} brackets to {out}")
    elif blk["mode"] == "2d":
        us = np.round(np.linspace(blk["u_min"], blk["u_max"], int(blk["n_u"])), 12)
        res = bifurcation_boundary_2d(taus, us, params, T=T, phi=phi, h=h, ell=ell)
        rows = []
        for i, tau in enumerate(res.axes["tau"]):
            for j, u in enumerate(res.axes["u"]):
                rows.append((tau, u, int(res.values[i, j])))
        rrows = [(tau, u, c) for tau, u, c in res.metadata["refined"]]
        _emit(out, cfg, [
            ("bifurcation_2d.csv", (["tau", "u", "class"], rows)),
            ("bifurcation_2d_refined.csv", (["tau", "u", "class"], rrows))])
        click.echo(f"wrote {len(rows)} cells to {out}")
    else:
        raise ConfigurationError(f"bifurcation.mode must be 1d or 2d, got {blk['mode']!r}")


@cli.command("spectral-gap")
@common_options
@guarded
def spectral_gap_cmd(config_path, out_dir, jobs, overrides):
    """Slow-manifold diagnostics: gap ratios and chart-Jacobian determinants."""
    cfg, out, _ = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    forcing = forcing_spec(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["spectral_gap"]
    heal = cfg["healing"]
    hcfg = HealedMapConfig(params=params, forcing=forcing, h=h,
                           ell=int(heal["ell"]), fd_eps=heal["fd_eps"])
    rect = tuple(blk["rect"])
    n = int(blk["n"])
    g1 = np.linspace(rect[0], rect[1], n)
    g2 = np.linspace(rect[2], rect[3], n)
    grows = []
    for x1 in g1:
        for x2 in g2:
            grows.append((x1, x2, spectral_gap((x1, x2), hcfg,
                                               power=int(blk["power"]))))
    field = singular_boundary_scan(rect, int(blk["det_n"]), int(blk["det_n"]),
                                   hcfg, power=int(blk["power"]))
    drows = []
    for i, x1 in enumerate(field.x1):
        for j, x2 in enumerate(field.x2):
            drows.append((x1, x2, field.values[i, j]))
    _emit(out, cfg, [
        ("spectral_gap.csv", (["x1", "x2", "sigma3_over_sigma2"], grows)),
        ("singular_det.csv", (["x1", "x2", "det"], drows))])
    click.echo(f"wrote {len(grows)} gap points, {len(drows)} determinant cells to {out}")


@cli.command("mpt-scenario")
@common_options
@guarded
def mpt_scenario_cmd(config_path, out_dir, jobs, overrides):
    """Step-wise amplitude modulation run with transition timing."""
    cfg, out, _ = _setup(config_path, overrides, out_dir, jobs)
    params = model_params(cfg)
    forcing = forcing_spec(cfg)
    h = cfg["integrator"]["h"]
    blk = cfg["mpt"]
    t_switch = kyr_bp_to_model(blk["t_switch_kyr_bp"])
    traj, t_cross = mpt_scenario(t_switch, blk["scale_before"], blk["u_end"],
                                 params, forcing, span=blk["span"], h=h,
                                 x_large_threshold=cfg["classify"]["x_large_threshold"],
                                 record_every=int(blk["record_every"]))
    rows = [(k * traj.h, x) for k, x in enumerate(traj.samples)]
    meta = {"t_switch_model": t_switch,
            "t_switch_kyr_bp": blk["t_switch_kyr_bp"],
            "transition_time_model": t_cross,
            "transition_kyr_bp": model_to_kyr_bp(t_cross) if t_cross is not None else None}
    _emit(out, cfg, [("trajectory.csv", (["t", "x"], rows)),
                     ("transition.json", meta)])
    click.echo(f"transition at t={t_cross} (model units); wrote {out / 'trajectory.csv'}")


def main():
    cli(prog_name="glacialdde")


if __name__ == "__main__":
    main()
