#!/usr/bin/env python3
"""Run the reference configuration and print aggregate metrics.

Equivalent to ``cfmimo run --config configs/reference.yaml`` with a few
common knobs exposed; useful for quick sanity checks after changes.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from cfmimo.config import SystemConfig
from cfmimo.harness import emit, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=os.path.join(
        os.path.dirname(__file__), "..", "configs", "reference.yaml"))
    ap.add_argument("--drops", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="emit CSV/JSON here")
    args = ap.parse_args()

    cfg = SystemConfig.from_yaml(args.config)
    cfg.drops = args.drops
    cfg.seed = args.seed
    result = run(cfg)
    for key, val in sorted(result.aggregates.items()):
        print(f"{key}: {val:.6g}" if isinstance(val, float) else
              f"{key}: {val}")
    if args.out:
        for path in emit(result, fmt="both", out_dir=args.out):
            print(f"wrote {path}")


if __name__ == "__main__":
    main()
