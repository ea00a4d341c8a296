"""CDF of the CPU's SE: cell-free (estimated and perfect CSI) vs colocated array.

    python scripts/run_fig3.py --placements 500 --channel-trials 200
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from cfmonitor.experiments import Preset, parse_config, run_fig3_cdf, run_metadata, write_results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--placements", type=int, default=500)
    ap.add_argument("--channel-trials", type=int, default=200)
    ap.add_argument("--suppression-db", type=float, default=30.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/fig3"))
    args = ap.parse_args()

    cfg, spec = parse_config("", Preset.FIG3_SE_CDF)
    spec = replace(spec, placements=args.placements, channel_trials=args.channel_trials, seed=args.seed,
                   workers=args.workers, colocated=replace(spec.colocated, suppression_db=args.suppression_db))
    t0 = time.perf_counter()
    rows, cdf = run_fig3_cdf(spec, cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_results(rows, "both", args.out, run_metadata(cfg, spec, time.perf_counter() - t0))

    for v, x in cdf.samples.items():
        q = np.quantile(x, [0.1, 0.5, 0.9])
        print(f"{v:<13} p10 {q[0]:.4f}  median {q[1]:.4f}  p90 {q[2]:.4f}")


if __name__ == "__main__":
    main()
