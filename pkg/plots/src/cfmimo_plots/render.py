"""Deterministic drawing of figure data layers with matplotlib."""

from __future__ import annotations

from typing import Any

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .data import DASHED, PlotError

_LINESTYLE = {DASHED: "--", "solid": "-"}
# fixed palette so series colors depend only on sorted series order
_COLORS = ["C0", "C1", "C2", "C3", "C4", "C5", "C6", "C7"]


def render(data: dict[str, Any], out_path: str) -> None:
    """Draw one figure data layer to ``out_path``.

    Series are drawn in sorted-name order with a fixed palette and no
    timestamps, so identical data layers produce identical image bytes.
    """
    if not data.get("series"):
        raise PlotError("empty data layer; nothing to draw")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        for i, name in enumerate(sorted(data["series"])):
            s = data["series"][name]
            if len(s["x"]) != len(s["y"]):
                raise PlotError(f"series {name!r}: x/y length mismatch")
            ax.plot(s["x"], s["y"],
                    linestyle=_LINESTYLE.get(s.get("style", DASHED), "--"),
                    color=_COLORS[i % len(_COLORS)], label=name)
        ax.set_xlabel(data.get("x_label", ""))
        ax.set_ylabel(data.get("y_label", ""))
        if data.get("kind") == "rate-cdf":
            ax.set_ylim(0.0, 1.0)
        ax.grid(True, alpha=0.4)
        if len(data["series"]) > 1:
            ax.legend(fontsize=8)
        fig.savefig(out_path, dpi=120, metadata={"Software": "cfmimo-plots"})
    finally:
        plt.close(fig)
