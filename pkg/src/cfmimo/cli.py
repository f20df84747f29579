"""Command line interface.

Verbs: ``run`` (Monte Carlo at one operating point), ``sweep`` (paired
runs over a parameter), ``validate-config``, and ``oracle`` (small-
instance grid-search cross-checks).  Exit codes: 0 success, 1 config
error, 2 runtime failure.
"""

from __future__ import annotations

import dataclasses
import sys

import click
import numpy as np

from .config import ConfigError, SystemConfig
from .harness import RunError, default_out_dir, emit, run, sweep
from .optimizer import gee_max_downlink
from .oracles import gee_grid_search
from . import harness as _harness


def _load_config(path: str | None, seed, drops, workers) -> SystemConfig:
    cfg = SystemConfig.from_yaml(path) if path else SystemConfig()
    if seed is not None:
        cfg.seed = seed
    if drops is not None:
        cfg.drops = drops
    if workers is not None:
        cfg.workers = workers
    cfg.validate()
    return cfg


def _config_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      default=None, help="YAML config file")(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--drops", type=int, default=None)(fn)
    fn = click.option("--workers", type=int, default=None)(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=None,
                      help="output directory (default: $CFMIMO_OUT_DIR or .)")(fn)
    fn = click.option("--format", "fmt",
                      type=click.Choice(["csv", "json", "both"]),
                      default="both")(fn)
    return fn


@click.group()
def main():
    """Cell-free / user-centric mmWave massive MIMO simulator."""


@main.command("run")
@_config_options
def run_cmd(config_path, seed, drops, workers, out_dir, fmt):
    """Run the configured Monte Carlo and emit metric tables."""
    try:
        cfg = _load_config(config_path, seed, drops, workers)
    except (ConfigError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        result = run(cfg)
        paths = emit(result, fmt=fmt, out_dir=out_dir or default_out_dir())
    except (RunError, Exception) as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(2)
    agg = result.aggregates
    click.echo(f"included drops: {agg.get('included_drops')}"
               f" (excluded {agg.get('excluded_drops')})")
    for key in ("mean_dl_rate_per_user", "mean_ul_rate_per_user",
                "mean_gee_dl"):
        if key in agg:
            click.echo(f"{key}: {agg[key]:.6g}")
    for path in paths:
        click.echo(f"wrote {path}")


@main.command("sweep")
@click.option("--param", required=True,
              type=click.Choice(sorted(_harness.SWEEPABLE)))
@click.option("--values", required=True,
              help="comma-separated parameter values")
@_config_options
def sweep_cmd(param, values, config_path, seed, drops, workers, out_dir, fmt):
    """Sweep one parameter with common random numbers across points."""
    try:
        cfg = _load_config(config_path, seed, drops, workers)
        vals = [float(v) for v in values.split(",") if v.strip()]
        if not vals:
            raise ConfigError("empty sweep value list")
    except (ConfigError, OSError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        results = sweep(cfg, param, vals)
        paths = emit(results, fmt=fmt, out_dir=out_dir or default_out_dir(),
                     stem=f"sweep_{param}")
    except (RunError, Exception) as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(2)
    for value, res in zip(vals, results):
        click.echo(f"{param}={value:g}: "
                   f"mean_gee_dl={res.aggregates.get('mean_gee_dl', 0):.6g} "
                   f"mean_dl_rate={res.aggregates.get('mean_dl_rate_per_user', 0):.6g}")
    for path in paths:
        click.echo(f"wrote {path}")


@main.command("validate-config")
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True)
def validate_cmd(config_path):
    """Parse and validate a config file."""
    try:
        cfg = SystemConfig.from_yaml(config_path)
    except (ConfigError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"ok: M={cfg.n_aps} K={cfg.n_ms} mode={cfg.mode.value} "
               f"objective={cfg.objective.value} drops={cfg.drops}")


@main.command("oracle")
@click.option("--seed", type=int, default=0)
@click.option("--drops", type=int, default=5)
@click.option("--points", type=int, default=20,
              help="grid points per power dimension")
def oracle_cmd(seed, drops, points):
    """Compare the GEE optimizer against exhaustive grid search.

    Uses the small M=2, K=2 perfect-CSI instance; reports the relative
    gap per drop.
    """
    from .config import Beamforming, CircuitModel, CsiModel, Mode, Objective
    cfg = SystemConfig(area_m=100.0, n_aps=2, n_ms=2, n_ap_ant=4, n_ms_ant=2,
                       p_streams=1, mode=Mode.CF, beamforming=Beamforming.FD,
                       csi=CsiModel.PERFECT, p_max_w=0.1,
                       circuit_model=CircuitModel.STATIC, p_c_w=1.0,
                       drops=drops, seed=seed, objective=Objective.GEE,
                       cluster_density_per_m2=0.01)
    worst = 0.0
    for d in range(drops):
        ctx = _harness.prepare_drop(cfg, d)
        tensor = ctx.tensor_true
        _, trace = gee_max_downlink(tensor, cfg.optimizer, cfg.p_max_w,
                                    cfg.delta, cfg.circuit_model, cfg.p_c_w)
        opt = trace[-1]
        ref, _ = gee_grid_search(tensor, cfg.p_max_w, cfg.delta,
                                 cfg.circuit_model, cfg.p_c_w, points=points)
        gap = (ref - opt) / ref if ref > 0 else 0.0
        worst = max(worst, gap)
        click.echo(f"drop {d}: optimizer={opt:.6g} grid={ref:.6g} "
                   f"gap={gap:+.3%}")
    click.echo(f"worst gap vs grid: {worst:.3%}")
    sys.exit(0 if worst < 0.02 else 2)


if __name__ == "__main__":
    main()
