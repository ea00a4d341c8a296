"""MSP versus number of MNs at N_MT = 240 antennas (ZF/MRT x S1/S2/PERFECT).

    python scripts/run_fig2.py --placements 200 --channel-trials 200 --workers 4
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

from cfmonitor import SystemConfig
from cfmonitor.experiments import ExperimentSpec, Preset, load_config, run_fig2_sweep, run_metadata, write_results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--M", type=int, nargs="+", default=[10, 20, 30, 40, 60, 80])
    ap.add_argument("--placements", type=int, default=200)
    ap.add_argument("--channel-trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/fig2"))
    args = ap.parse_args()

    if args.config:
        cfg, spec = load_config(args.config, Preset.FIG2_MSP_SWEEP)
    else:
        cfg, spec = SystemConfig(D=1.0), ExperimentSpec()
    spec = replace(spec, M_list=tuple(args.M), placements=args.placements,
                   channel_trials=args.channel_trials, seed=args.seed, workers=args.workers)

    t0 = time.perf_counter()
    rows = run_fig2_sweep(spec, cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_results(rows, "both", args.out, run_metadata(cfg, spec, time.perf_counter() - t0))

    print(f"{'M':>4} {'N':>4}  {'prec':<4} {'S1':>6} {'S2':>6} {'PERF':>6}")
    msp = {(r["M"], r["precoder"], r["scenario"]): r for r in rows if r["metric"] == "MSP"}
    for M in spec.M_list:
        for p in ("ZF", "MRT"):
            vals = [msp[(M, p, s)]["value"] for s in ("S1_noCPU", "S2_atCPU", "PERFECT")]
            print(f"{M:>4} {spec.N_MT // M:>4}  {p:<4} " + " ".join(f"{v:6.3f}" for v in vals))


if __name__ == "__main__":
    main()
