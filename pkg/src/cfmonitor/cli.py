"""Command-line entry point: ``cfmonitor simulate ...``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, SystemConfig
from .experiments import (
    PRESET_ALIASES,
    PRESET_SYSTEM,
    ExperimentSpec,
    Preset,
    load_config,
    run_custom,
    run_fig2_sweep,
    run_fig3_cdf,
    run_metadata,
    write_results,
)

log = logging.getLogger("cfmonitor")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfmonitor", description="Cell-free massive MIMO surveillance simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run an experiment and write results")
    sim.add_argument("--config", type=Path, help="TOML config file")
    sim.add_argument("--experiment", choices=sorted(PRESET_ALIASES), help="preset (overrides the config)")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--placements", type=int)
    sim.add_argument("--channel-trials", type=int)
    sim.add_argument("--ur-trials", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--out", type=Path, help="output directory (default: experiment.out_dir)")
    sim.add_argument("--format", choices=["csv", "json", "both"])
    sim.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve(args) -> tuple:
    if args.config is not None:
        cfg, spec = load_config(args.config, args.experiment)
    else:
        preset = PRESET_ALIASES[args.experiment] if args.experiment else Preset.FIG2_MSP_SWEEP
        cfg, spec = SystemConfig(**PRESET_SYSTEM[preset]), ExperimentSpec(preset=preset)
    updates = {k: v for k, v in dict(seed=args.seed, placements=args.placements,
                                     channel_trials=args.channel_trials, ur_trials=args.ur_trials,
                                     workers=args.workers, format=args.format).items() if v is not None}
    return cfg, replace(spec, **updates)


def simulate(args) -> int:
    cfg, spec = resolve(args)
    out_dir = args.out or Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / {v: k for k, v in PRESET_ALIASES.items()}[spec.preset]
    start = time.perf_counter()
    if spec.preset is Preset.FIG2_MSP_SWEEP:
        table = run_fig2_sweep(spec, cfg)
    elif spec.preset is Preset.FIG3_SE_CDF:
        table, _ = run_fig3_cdf(spec, cfg)
    else:
        table = run_custom(spec, cfg)
    meta = run_metadata(cfg, spec, time.perf_counter() - start)
    for path in write_results(table, spec.format, stem, meta):
        print(path)
    for row in table:
        if row["metric"] in ("MSP", "SE_cpu_median"):
            ci = f" [{row['ci_low']:.3f}, {row['ci_high']:.3f}]" if row["ci_low"] is not None else ""
            print(f"M={row['M']:<3} {row['precoder']:<4} {row['scenario']:<22} {row['metric']}="
                  f"{row['value']:.4f}{ci}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    try:
        return simulate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
