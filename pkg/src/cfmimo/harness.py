"""Seeded Monte Carlo execution, aggregation, persistence.

One drop = scenario generation, (optional) uplink training and LMMSE
estimation, precoding, association, power allocation on the tensor the
network can actually see, and metric evaluation on the true tensor.
Drops are keyed by index so results are independent of completion order.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import __version__
from .beamforming import hybrid_precoders, ms_combiner, zf_precoders
from .channel import generate_scenario
from .config import (Beamforming, CsiModel, Mode, Objective, SystemConfig)
from .optimizer import (gee_max_downlink, gee_max_uplink, sumrate_max,
                        uniform_allocation, uniform_uplink)
from .rates import (Association, AssociationMode, associate, downlink_rates,
                    effective_gain_tensor, gain_tensor, gee_downlink,
                    gee_uplink, uplink_rates)
from .training import generate_pilots, lmmse_estimate, training_signal


class RunError(RuntimeError):
    pass


SWEEPABLE = {"p_max_w", "p_t_max_w", "uc_n", "n_ms", "n_rf"}


@dataclass
class DropResult:
    index: int
    ok: bool
    error: Optional[str] = None
    dl_rates: Optional[np.ndarray] = None     # (K,) bits/s
    ul_rates: Optional[np.ndarray] = None     # (K,) bits/s
    gee_dl: float = 0.0
    gee_ul: float = 0.0
    eta: Optional[np.ndarray] = None          # (M, K)
    eta_ul: Optional[np.ndarray] = None       # (K,)
    trace: Optional[np.ndarray] = None        # optimizer trace (GEE or sum-rate)
    outage_links: int = 0
    regularized_aps: int = 0


@dataclass
class RunResult:
    config: dict[str, Any]
    drops: list[DropResult]
    aggregates: dict[str, float] = field(default_factory=dict)
    version: str = __version__

    @property
    def included(self) -> list[DropResult]:
        return [d for d in self.drops if d.ok]

    def compute_aggregates(self) -> None:
        inc = self.included
        k = self.config["n_ms"]
        if not inc:
            self.aggregates = {"included_drops": 0,
                               "excluded_drops": len(self.drops)}
            return
        dl = np.stack([d.dl_rates for d in inc])          # (D, K)
        ul = np.stack([d.ul_rates for d in inc])
        gee = np.array([d.gee_dl for d in inc])
        gee_ul = np.array([d.gee_ul for d in inc])
        n = len(inc)
        self.aggregates = {
            "included_drops": n,
            "excluded_drops": len(self.drops) - n,
            "mean_dl_rate_per_user": float(dl.mean()),
            "stderr_dl_rate_per_user": float(dl.mean(axis=1).std(ddof=1)
                                             / np.sqrt(n)) if n > 1 else 0.0,
            "mean_sum_rate": float(dl.sum(axis=1).mean()),
            "mean_ul_rate_per_user": float(ul.mean()),
            "mean_gee_dl": float(gee.mean()),
            "stderr_gee_dl": float(gee.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            "mean_gee_ul": float(gee_ul.mean()),
            "total_outage_links": int(sum(d.outage_links for d in inc)),
            "total_regularized_aps": int(sum(d.regularized_aps for d in inc)),
        }
        assert abs(self.aggregates["mean_dl_rate_per_user"]
                   - self.aggregates["mean_sum_rate"] / k) \
            <= 1e-12 * max(self.aggregates["mean_sum_rate"], 1.0)

    def rate_cdf(self, which: str = "dl") -> tuple[np.ndarray, np.ndarray]:
        """Sorted per-user rate samples and empirical quantiles."""
        inc = self.included
        samples = np.concatenate(
            [(d.dl_rates if which == "dl" else d.ul_rates) for d in inc]) \
            if inc else np.array([])
        samples = np.sort(samples)
        quant = (np.arange(1, samples.size + 1) - 0.5) / max(samples.size, 1)
        return samples, quant


# --------------------------------------------------------------------- #

@dataclass
class DropContext:
    """Everything a drop produces before power allocation."""

    scenario: Any
    assoc: Association
    precoders: Any
    tensor_true: Any
    tensor_opt: Any


def prepare_drop(config: SystemConfig, drop_index: int) -> DropContext:
    """Scenario, training, precoding and gain tensors for one drop."""
    seed = int(np.random.SeedSequence(
        [config.seed, drop_index]).generate_state(1)[0])
    scenario = generate_scenario(config, seed)
    combiner = ms_combiner(config.n_ms_ant, config.p_streams)
    noise_var = config.noise_var_w
    s_true = np.einsum("mkij,jp->mkip", scenario.channels, combiner)

    mode = AssociationMode.CF if config.mode is Mode.CF \
        else AssociationMode.UC
    assoc = associate(scenario.channels, mode,
                      None if mode is AssociationMode.CF else config.uc_n)

    drop_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, drop_index, 2]))
    if config.csi is CsiModel.ESTIMATED:
        book = generate_pilots(config.n_ms, config.p_streams, config.tau_p,
                               drop_rng, power_w=config.pilot_power_w,
                               orthogonal=config.orthogonal_pilots)
        s_hat = np.empty_like(s_true)
        for m in range(config.n_aps):
            y = training_signal(s_true[m], book, noise_var, drop_rng)
            s_hat[m] = lmmse_estimate(y, book, noise_var)
    else:
        s_hat = s_true

    precoders = zf_precoders(s_hat, assoc.served)
    if config.beamforming is Beamforming.HY:
        precoders = hybrid_precoders(precoders, config.n_rf, drop_rng)

    tensor_true = gain_tensor(scenario.channels, precoders, combiner,
                              assoc, config.bandwidth_hz, noise_var)
    if config.csi is CsiModel.ESTIMATED:
        tensor_opt = effective_gain_tensor(
            s_hat, precoders, assoc, config.bandwidth_hz, noise_var,
            config.n_ms_ant)
    else:
        tensor_opt = tensor_true
    return DropContext(scenario=scenario, assoc=assoc, precoders=precoders,
                       tensor_true=tensor_true, tensor_opt=tensor_opt)


def allocate_and_measure(config: SystemConfig, ctx: DropContext,
                         drop_index: int,
                         eta0: Optional[np.ndarray] = None,
                         eta0_ul: Optional[np.ndarray] = None) -> DropResult:
    """Power allocation plus metric evaluation on a prepared drop.

    ``eta0`` / ``eta0_ul`` warm-start the optimizers (used by sweeps over
    power budgets, where the previous point's solution stays feasible).
    """
    scenario, assoc, precoders = ctx.scenario, ctx.assoc, ctx.precoders
    tensor_true, tensor_opt = ctx.tensor_true, ctx.tensor_opt

    trace = None
    if config.objective is Objective.UNIFORM:
        eta = uniform_allocation(assoc.served, config.p_max_w)
    elif config.objective is Objective.GEE:
        eta, trace = gee_max_downlink(
            tensor_opt, config.optimizer, config.p_max_w, config.delta,
            config.circuit_model, config.p_c_w, config.sigmoid_theta_w,
            eta0=eta0)
    else:
        method = config.sumrate_method
        perfect_fd = (config.csi is CsiModel.PERFECT
                      and config.beamforming is Beamforming.FD)
        if method == "auto":
            method = "zf" if perfect_fd else "general"
        eta, trace = sumrate_max(tensor_opt, config.optimizer,
                                 config.p_max_w, method=method,
                                 perfect_csi_fd=perfect_fd, eta0=eta0)

    dl = downlink_rates(tensor_true, eta)
    gee_dl = gee_downlink(tensor_true, eta, config.delta,
                          config.circuit_model, config.p_c_w,
                          config.sigmoid_theta_w)
    if config.optimize_uplink:
        eta_ul, _ = gee_max_uplink(
            tensor_opt, config.optimizer, config.p_t_max_w, config.delta,
            config.circuit_model, config.p_c_ul_w, config.sigmoid_theta_w,
            eta0=eta0_ul)
    else:
        eta_ul = uniform_uplink(config.n_ms, config.p_t_max_w,
                                config.n_ms_ant)
    ul = uplink_rates(tensor_true, eta_ul)
    gee_ul = gee_uplink(tensor_true, eta_ul, config.delta,
                        config.circuit_model, config.p_c_ul_w,
                        config.sigmoid_theta_w)

    result = DropResult(
        index=drop_index, ok=True, dl_rates=dl, ul_rates=ul,
        gee_dl=gee_dl, gee_ul=gee_ul, eta=eta, eta_ul=eta_ul, trace=trace,
        outage_links=int(scenario.outage.sum()),
        regularized_aps=len(precoders.regularized_aps))
    for arr in (dl, ul, eta):
        if not np.all(np.isfinite(arr)):
            raise RunError("non-finite metric in drop result")
    return result


def run_drop(config: SystemConfig, drop_index: int) -> DropResult:
    """Execute a single seeded drop end to end."""
    try:
        ctx = prepare_drop(config, drop_index)
        return allocate_and_measure(config, ctx, drop_index)
    except Exception as exc:           # recorded, never silently averaged
        return DropResult(index=drop_index, ok=False,
                          error=f"{type(exc).__name__}: {exc}")


def run(config: SystemConfig) -> RunResult:
    """Run all configured drops and aggregate."""
    config.validate()
    indices = list(range(config.drops))
    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            drops = list(pool.map(run_drop, [config] * len(indices), indices))
        drops.sort(key=lambda d: d.index)
    else:
        drops = [run_drop(config, i) for i in indices]
    result = RunResult(config=config.to_dict(), drops=drops)
    result.compute_aggregates()
    return result


def _clamp_feasible(eta: np.ndarray, p_max: float) -> np.ndarray:
    """Scale per-AP rows down so every block satisfies its budget."""
    eta = np.array(eta, dtype=float)
    sums = eta.sum(axis=1, keepdims=True)
    scale = np.where(sums > p_max, np.where(sums > 0, p_max / np.maximum(sums, 1e-300), 1.0), 1.0)
    return eta * scale


def sweep(config: SystemConfig, parameter: str, values) -> list[RunResult]:
    """Re-run the config at each parameter value with common random numbers.

    The same base seed (hence the same scenarios per drop index) is used
    at every point so curves are paired.  Power-budget sweeps reuse each
    drop's channels/precoders across points (they do not depend on the
    budget) and warm-start every optimizer from the previous point's
    solution, clamped back into the new feasible set.
    """
    if parameter not in SWEEPABLE:
        raise RunError(f"unsupported sweep parameter {parameter!r}; "
                       f"choose from {sorted(SWEEPABLE)}")
    values = list(values)
    if not values:
        raise RunError("empty sweep value list")

    if parameter in ("p_max_w", "p_t_max_w"):
        config.validate()
        cfgs = []
        for value in values:
            cfg = dataclasses.replace(config)
            setattr(cfg, parameter, float(value))
            cfg.validate()
            cfgs.append(cfg)
        point_drops: list[list[DropResult]] = [[] for _ in values]
        for i in range(config.drops):
            try:
                ctx = prepare_drop(config, i)
            except Exception as exc:
                for drops in point_drops:
                    drops.append(DropResult(
                        index=i, ok=False,
                        error=f"{type(exc).__name__}: {exc}"))
                continue
            prev_eta = prev_eta_ul = None
            for p, cfg in enumerate(cfgs):
                try:
                    eta0 = None if prev_eta is None \
                        else _clamp_feasible(prev_eta, cfg.p_max_w)
                    eta0_ul = None if prev_eta_ul is None \
                        else np.minimum(prev_eta_ul,
                                        cfg.p_t_max_w / cfg.n_ms_ant)
                    d = allocate_and_measure(cfg, ctx, i, eta0=eta0,
                                             eta0_ul=eta0_ul)
                    prev_eta = d.eta
                    if cfg.optimize_uplink:
                        prev_eta_ul = d.eta_ul
                except Exception as exc:
                    d = DropResult(index=i, ok=False,
                                   error=f"{type(exc).__name__}: {exc}")
                point_drops[p].append(d)
        results = []
        for cfg, drops in zip(cfgs, point_drops):
            res = RunResult(config=cfg.to_dict(), drops=drops)
            res.compute_aggregates()
            results.append(res)
        return results

    results = []
    for value in values:
        cfg = dataclasses.replace(config)
        setattr(cfg, parameter, int(value))
        cfg.validate()
        results.append(run(cfg))
    return results


# --------------------------------------------------------------------- #
# persistence

def _drop_to_dict(d: DropResult) -> dict[str, Any]:
    out = dataclasses.asdict(d)
    for key, val in out.items():
        if isinstance(val, np.ndarray):
            out[key] = val.tolist()
    return out


def result_to_dict(result: RunResult) -> dict[str, Any]:
    dl_samples, dl_quant = result.rate_cdf("dl")
    ul_samples, ul_quant = result.rate_cdf("ul")
    return {
        "version": result.version,
        "config": result.config,
        "aggregates": result.aggregates,
        "drops": [_drop_to_dict(d) for d in result.drops],
        "cdf": {
            "dl": {"rates": dl_samples.tolist(), "quantiles": dl_quant.tolist()},
            "ul": {"rates": ul_samples.tolist(), "quantiles": ul_quant.tolist()},
        },
    }


def default_out_dir() -> str:
    return os.environ.get("CFMIMO_OUT_DIR", ".")


def emit(results, fmt: str = "both", out_dir: str | None = None,
         stem: str = "results") -> list[str]:
    """Write CSV and/or JSON files; returns the written paths.

    ``results`` may be a RunResult or a list of them (a sweep).  The CSV
    holds one row per (sweep point, drop, user); the JSON holds the full
    structure including config echo and optimizer traces.
    """
    if fmt not in ("csv", "json", "both"):
        raise RunError(f"unknown output format {fmt!r}")
    if out_dir is None:
        out_dir = default_out_dir()
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise RunError(f"cannot create output directory {out_dir}: {exc}")
    run_list = results if isinstance(results, list) else [results]
    paths = []
    try:
        if fmt in ("csv", "both"):
            path = os.path.join(out_dir, f"{stem}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write("# one row per (sweep point, drop, user)\n"
                         "# point: sweep point index; drop: drop index; "
                         "user: MS index\n"
                         "# dl_rate_bps / ul_rate_bps: per-user rates; "
                         "gee_dl_bpj: per-drop downlink GEE\n")
                writer = csv.writer(fh)
                writer.writerow(["point", "drop", "user", "dl_rate_bps",
                                 "ul_rate_bps", "gee_dl_bpj"])
                for p, res in enumerate(run_list):
                    for d in res.included:
                        for k in range(len(d.dl_rates)):
                            writer.writerow([p, d.index, k, d.dl_rates[k],
                                             d.ul_rates[k], d.gee_dl])
            paths.append(path)
        if fmt in ("json", "both"):
            path = os.path.join(out_dir, f"{stem}.json")
            payload = [result_to_dict(r) for r in run_list] \
                if isinstance(results, list) else result_to_dict(results)
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=1)
            paths.append(path)
    except OSError as exc:
        raise RunError(f"failed writing results under {out_dir}: {exc}")
    return paths
