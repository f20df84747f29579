"""Loading and shaping of simulator result files.

The simulator emits two documented formats:

* JSON — full structure: config echo, aggregates, per-drop records
  (rates, GEE, optimizer trace) and pre-computed CDF samples/quantiles.
  A sweep is a JSON array of such run objects.
* CSV — one row per (sweep point, drop, user) with columns
  ``point, drop, user, dl_rate_bps, ul_rate_bps, gee_dl_bpj`` after
  ``#`` comment lines.

This module turns either into the pure "data layer" of a figure: an
ordered mapping of series name -> {x, y, style}.  All functions raise
:class:`PlotError` with the offending field named.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Any

DASHED = "dashed"      # optimized results
SOLID = "solid"        # uniform baseline

KINDS = ("gee-vs-power", "rate-vs-power", "rate-cdf",
         "ul-rate-vs-power", "convergence")


class PlotError(RuntimeError):
    pass


def watts_to_dbw(w: float) -> float:
    if w <= 0:
        raise PlotError(f"cannot convert non-positive power {w!r} to dBW")
    return 10.0 * math.log10(w)


# --------------------------------------------------------------------- #
# input parsing

def load_runs(path: str) -> list[dict[str, Any]]:
    """Parse a JSON result file into a list of run dicts (sweep order)."""
    if not os.path.exists(path):
        raise PlotError(f"input file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PlotError(f"{path} is not valid JSON: {exc}")
    runs = payload if isinstance(payload, list) else [payload]
    if not runs:
        raise PlotError(f"{path} contains no runs")
    for run in runs:
        for key in ("config", "aggregates"):
            if key not in run:
                raise PlotError(f"{path}: missing field {key!r}")
    return runs


def load_csv_rows(path: str) -> list[dict[str, float]]:
    """Parse the emitted CSV into typed rows."""
    if not os.path.exists(path):
        raise PlotError(f"input file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(lines)
    required = {"point", "drop", "user", "dl_rate_bps", "ul_rate_bps",
                "gee_dl_bpj"}
    if reader.fieldnames is None or not required <= set(reader.fieldnames):
        missing = sorted(required - set(reader.fieldnames or []))
        raise PlotError(f"{path}: missing columns {missing}")
    rows = [{key: float(row[key]) for key in required} for row in reader]
    if not rows:
        raise PlotError(f"{path} contains no data rows")
    return rows


def _sweep_xy(runs, x_field: str, y_field: str, x_scale: str):
    xs, ys = [], []
    for run in runs:
        if x_field not in run["config"]:
            raise PlotError(f"missing config field {x_field!r}")
        if y_field not in run["aggregates"]:
            raise PlotError(f"missing aggregate {y_field!r}")
        x = float(run["config"][x_field])
        xs.append(watts_to_dbw(x) if x_scale == "dbw" else x)
        ys.append(float(run["aggregates"][y_field]))
    return xs, ys


def _csv_point_means(rows, value: str):
    by_point: dict[int, list[float]] = {}
    for row in rows:
        by_point.setdefault(int(row["point"]), []).append(row[value])
    points = sorted(by_point)
    return points, [sum(by_point[p]) / len(by_point[p]) for p in points]


# --------------------------------------------------------------------- #
# data layers per figure kind

def sweep_data(kind: str, inputs: dict[str, str],
               x_scale: str = "dbw") -> dict[str, Any]:
    """Data layer for the power-sweep kinds.

    ``inputs`` maps series roles to file paths; the role ``optimized``
    renders dashed, ``uniform`` solid, anything else defaults to dashed.
    """
    field = {"gee-vs-power": ("p_max_w", "mean_gee_dl",
                              "P_max [dBW]", "GEE [bit/J]"),
             "rate-vs-power": ("p_max_w", "mean_dl_rate_per_user",
                               "P_max [dBW]", "rate per user [bit/s]"),
             "ul-rate-vs-power": ("p_t_max_w", "mean_ul_rate_per_user",
                                  "P_T,max [dBW]", "rate per user [bit/s]")}
    if kind not in field:
        raise PlotError(f"{kind!r} is not a sweep figure kind")
    x_field, y_field, x_label, y_label = field[kind]
    if x_scale == "watts":
        x_label = x_label.replace("[dBW]", "[W]")
    series = {}
    for role in sorted(inputs):
        path = inputs[role]
        if path.endswith(".csv"):
            value = "gee_dl_bpj" if kind == "gee-vs-power" else (
                "ul_rate_bps" if kind == "ul-rate-vs-power" else "dl_rate_bps")
            xs, ys = _csv_point_means(load_csv_rows(path), value)
            x_label = "sweep point"        # budgets live in the JSON echo
        else:
            xs, ys = _sweep_xy(load_runs(path), x_field, y_field, x_scale)
        series[role] = {"x": xs, "y": ys,
                        "style": SOLID if role == "uniform" else DASHED}
    if not series:
        raise PlotError("no input series given")
    return {"kind": kind, "x_label": x_label, "y_label": y_label,
            "series": series}


def cdf_data(inputs: dict[str, str], which: str = "dl") -> dict[str, Any]:
    """Data layer for per-user rate CDFs."""
    if which not in ("dl", "ul"):
        raise PlotError(f"unknown CDF direction {which!r}")
    series = {}
    for role in sorted(inputs):
        path = inputs[role]
        if path.endswith(".csv"):
            value = "dl_rate_bps" if which == "dl" else "ul_rate_bps"
            rates = sorted(row[value] for row in load_csv_rows(path))
            n = len(rates)
            quant = [(i + 0.5) / n for i in range(n)]
        else:
            runs = load_runs(path)
            run = runs[0]
            if "cdf" not in run or which not in run["cdf"]:
                raise PlotError(f"{path}: missing field 'cdf.{which}'")
            rates = run["cdf"][which]["rates"]
            quant = run["cdf"][which]["quantiles"]
        if not rates:
            raise PlotError(f"{path}: empty CDF sample set")
        series[role] = {"x": rates, "y": quant,
                        "style": SOLID if role == "uniform" else DASHED}
    return {"kind": "rate-cdf", "x_label": "rate per user [bit/s]",
            "y_label": "CDF", "series": series}


def convergence_data(inputs: dict[str, str],
                     max_drops: int = 8) -> dict[str, Any]:
    """Data layer for optimizer convergence traces (one line per drop)."""
    series = {}
    for role in sorted(inputs):
        runs = load_runs(inputs[role])
        count = 0
        for run in runs:
            for drop in run.get("drops", []):
                trace = drop.get("trace")
                if not drop.get("ok") or not trace:
                    continue
                series[f"{role} drop {drop['index']}"] = {
                    "x": list(range(len(trace))), "y": list(trace),
                    "style": SOLID if role == "uniform" else DASHED}
                count += 1
                if count >= max_drops:
                    break
            if count >= max_drops:
                break
    if not series:
        raise PlotError("no optimizer traces in input")
    return {"kind": "convergence", "x_label": "block update",
            "y_label": "objective", "series": series}


def build_data(kind: str, inputs: dict[str, str],
               x_scale: str = "dbw", which: str = "dl") -> dict[str, Any]:
    """Dispatch to the figure kind's data-layer builder."""
    if kind not in KINDS:
        raise PlotError(f"unknown figure kind {kind!r}; choose from {KINDS}")
    if not inputs:
        raise PlotError("no input files given")
    if kind == "rate-cdf":
        return cdf_data(inputs, which)
    if kind == "convergence":
        return convergence_data(inputs)
    return sweep_data(kind, inputs, x_scale)


def canonical_bytes(data: dict[str, Any]) -> bytes:
    """Deterministic serialization of a data layer (byte-stability hook)."""
    return json.dumps(data, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
