"""``plot`` command line interface.

Single-figure mode::

    plot --kind gee-vs-power --in opt.json --in-uniform uni.json --out fig.png

Batch mode from a YAML figure spec::

    plot --spec figures.yaml

where the spec file holds a ``figures`` list, each entry with ``kind``,
``out``, an ``inputs`` mapping of series role -> result file, and the
optional ``x_scale`` (dbw|watts) and ``which`` (dl|ul) knobs.

Exit codes: 0 success, 1 bad spec/arguments, 2 render failure.
"""

from __future__ import annotations

import sys

import click
import yaml

from .data import KINDS, PlotError, build_data
from .render import render


def _render_one(kind, inputs, out, x_scale, which):
    data = build_data(kind, inputs, x_scale=x_scale, which=which)
    render(data, out)
    click.echo(f"wrote {out}")


@click.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True),
              default=None, help="YAML figure spec (batch mode)")
@click.option("--kind", type=click.Choice(KINDS), default=None)
@click.option("--in", "in_path", type=click.Path(), default=None,
              help="result file for the optimized series")
@click.option("--in-uniform", "uniform_path", type=click.Path(),
              default=None, help="result file for the uniform baseline")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--x-scale", type=click.Choice(["dbw", "watts"]),
              default="dbw")
@click.option("--which", type=click.Choice(["dl", "ul"]), default="dl",
              help="rate direction for CDF figures")
def main(spec_path, kind, in_path, uniform_path, out_path, x_scale, which):
    """Render simulator results into publication-style figures."""
    try:
        if spec_path is not None:
            with open(spec_path, encoding="utf-8") as fh:
                spec = yaml.safe_load(fh)
            figures = (spec or {}).get("figures")
            if not figures:
                raise PlotError(f"{spec_path}: no 'figures' list")
            jobs = []
            for fig in figures:
                for key in ("kind", "out", "inputs"):
                    if key not in fig:
                        raise PlotError(f"figure entry missing {key!r}")
                jobs.append((fig["kind"], dict(fig["inputs"]), fig["out"],
                             fig.get("x_scale", "dbw"),
                             fig.get("which", "dl")))
        else:
            if kind is None or in_path is None or out_path is None:
                raise PlotError(
                    "single-figure mode needs --kind, --in and --out")
            inputs = {"optimized": in_path}
            if uniform_path is not None:
                inputs["uniform"] = uniform_path
            jobs = [(kind, inputs, out_path, x_scale, which)]
    except (PlotError, OSError, yaml.YAMLError) as exc:
        click.echo(f"spec error: {exc}", err=True)
        sys.exit(1)

    try:
        for job in jobs:
            _render_one(*job)
    except (PlotError, OSError) as exc:
        click.echo(f"render failure: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
