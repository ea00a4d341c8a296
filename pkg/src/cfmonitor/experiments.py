"""Experiment presets, the colocated baseline, config files and result output.

Config files are TOML with one table per section::

    [scenario]
    M = 20
    N = 12

    [training]
    tau_r = 4

    [experiment]
    preset = "FIG2_MSP_SWEEP"
    M_list = [20, 40, 60]

See ``CONFIG_SCHEMA`` for every accepted key.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
import subprocess
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import (
    AssignmentStrategy,
    ConfigError,
    CsiScenario,
    Precoder,
    PropagationParams,
    SystemConfig,
)
from .performance import (
    DEFAULT_UR_TRIALS,
    evaluate_placement,
    msp_from_results,
    run_placements,
    se_cpu,
    se_ur_closed_form,
    ur_jamming,
)
from .scenario import NetworkRealization, large_scale_fading, wrap_distance
from .simulation import build_ensemble, draw_trials, draw_ur_estimates, placement_network, seed_at
from .training import herm
from .transmission import allocate_power_ut, build_precoder

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CSV_COLUMNS = ("experiment", "M", "N", "N_t", "N_r", "precoder", "scenario", "metric", "value",
               "ci_low", "ci_high", "placements", "channel_trials", "seed")

COLOCATED_STREAM = 3


class Preset(str, enum.Enum):
    FIG2_MSP_SWEEP = "FIG2_MSP_SWEEP"
    FIG3_SE_CDF = "FIG3_SE_CDF"
    CUSTOM = "CUSTOM"


PRESET_ALIASES = {"fig2": Preset.FIG2_MSP_SWEEP, "fig3": Preset.FIG3_SE_CDF, "custom": Preset.CUSTOM}

# system parameters pinned by each preset (a config file may still override them)
PRESET_SYSTEM = {
    Preset.FIG2_MSP_SWEEP: dict(D=1.0, N_t=4, N_r=4, p_J_w=1.0),
    Preset.FIG3_SE_CDF: dict(M=4, N=60, D=0.3, N_t=4, N_r=4, p_J_w=1.0),
    Preset.CUSTOM: {},
}


@dataclass(frozen=True)
class ColocatedBaselineConfig:
    N_MT: int = 240
    n_observe: int = 120
    suppression_db: float = 30.0

    def __post_init__(self):
        if self.N_MT < 1:
            raise ConfigError("colocated.N_MT >= 1 required")
        if not 0 <= self.n_observe <= self.N_MT:
            raise ConfigError("colocated.n_observe must lie in [0, N_MT]")
        if self.n_observe not in (0, self.N_MT) and 2 * self.n_observe != self.N_MT:
            raise ConfigError("colocated.n_observe must be 0, N_MT/2 or N_MT")
        if self.suppression_db < 0:
            raise ConfigError("colocated.suppression_db >= 0 required")

    @property
    def n_jam(self) -> int:
        return self.N_MT - self.n_observe


@dataclass(frozen=True)
class ExperimentSpec:
    preset: Preset = Preset.FIG2_MSP_SWEEP
    seed: int = 0
    placements: int = 200
    channel_trials: int = 200
    ur_trials: int = DEFAULT_UR_TRIALS
    workers: int = 1
    N_MT: int = 240
    M_list: Tuple[int, ...] = (20, 40, 60)
    precoders: Tuple[Precoder, ...] = (Precoder.ZF, Precoder.MRT)
    scenarios: Tuple[CsiScenario, ...] = (CsiScenario.S1_NO_CPU, CsiScenario.S2_AT_CPU, CsiScenario.PERFECT)
    out_dir: str = "results"
    format: str = "both"
    colocated: ColocatedBaselineConfig = field(default_factory=ColocatedBaselineConfig)

    def __post_init__(self):
        object.__setattr__(self, "preset", _preset(self.preset))
        object.__setattr__(self, "M_list", tuple(int(m) for m in self.M_list))
        object.__setattr__(self, "precoders", tuple(Precoder(p) for p in self.precoders))
        object.__setattr__(self, "scenarios", tuple(CsiScenario(s) for s in self.scenarios))
        if self.placements < 1 or self.channel_trials < 1 or self.ur_trials < 1:
            raise ConfigError("experiment.placements/channel_trials/ur_trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("experiment.workers >= 1 required")
        if self.format not in ("csv", "json", "both"):
            raise ConfigError("experiment.format must be csv, json or both")
        if self.preset is Preset.FIG2_MSP_SWEEP:
            bad = [m for m in self.M_list if m < 1 or self.N_MT % m]
            if bad:
                raise ConfigError(f"experiment.M_list: N_MT={self.N_MT} not divisible by {bad}")


def _preset(value) -> Preset:
    if isinstance(value, Preset):
        return value
    if str(value).lower() in PRESET_ALIASES:
        return PRESET_ALIASES[str(value).lower()]
    try:
        return Preset(str(value).upper())
    except ValueError:
        raise ConfigError(f"experiment.preset: unknown preset {value!r}") from None


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

# section -> {key: (target, field name)}
CONFIG_SCHEMA: Dict[str, Dict[str, Tuple[str, str]]] = {
    "scenario": {k: ("system", k) for k in
                 ("M", "N", "N_t", "N_r", "D", "assignment", "fixed_mask", "shadowing")},
    "propagation": {k: ("propagation", k) for k in ("d0", "d1", "L", "shadow_std_db")},
    "power": {k: ("system", k) for k in
              ("p_t_w", "p_r_w", "p_J_w", "bandwidth_hz", "temperature_k", "noise_figure_db")},
    "training": {k: ("system", k) for k in ("tau", "tau_r", "tau_t")},
    "transmission": {"precoder": ("system", "precoder"), "varrho": ("system", "varrho")},
    "performance": {"csi_scenario": ("system", "csi_scenario")},
    "experiment": {k: ("experiment", k) for k in
                   ("preset", "seed", "placements", "channel_trials", "ur_trials", "workers", "N_MT",
                    "M_list", "precoders", "scenarios", "out_dir", "format")},
    "colocated": {k: ("colocated", k) for k in ("N_MT", "n_observe", "suppression_db")},
}


def _flatten(d: dict, prefix: str = "") -> Dict[str, object]:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse_config(text: str, preset=None) -> Tuple[SystemConfig, ExperimentSpec]:
    """Build validated configs from TOML text; unknown keys are rejected."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    groups: Dict[str, dict] = {"system": {}, "propagation": {}, "experiment": {}, "colocated": {}}
    for key, value in _flatten(raw).items():
        section, _, name = key.partition(".")
        target = CONFIG_SCHEMA.get(section, {}).get(name) if name and "." not in name else None
        if target is None:
            raise ConfigError(f"unknown config key {key!r}")
        groups[target[0]][target[1]] = value

    exp = dict(groups["experiment"])
    if preset is not None:
        exp["preset"] = preset
    chosen = _preset(exp.get("preset", Preset.FIG2_MSP_SWEEP))
    exp["preset"] = chosen

    system = {**PRESET_SYSTEM[chosen], **groups["system"]}
    try:
        system["propagation"] = PropagationParams(**groups["propagation"])
        cfg = SystemConfig(**system)
        spec = ExperimentSpec(colocated=ColocatedBaselineConfig(**groups["colocated"]), **exp)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, spec


def load_config(path, preset=None) -> Tuple[SystemConfig, ExperimentSpec]:
    return parse_config(Path(path).read_text(), preset)


def _plain(v):
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    return v


def dump_config(cfg: SystemConfig, spec: Optional[ExperimentSpec] = None) -> str:
    """TOML text that ``parse_config`` maps back to the same configs."""
    import tomli_w

    values = {"system": {f.name: getattr(cfg, f.name) for f in fields(cfg)}}
    values["propagation"] = {f.name: getattr(cfg.propagation, f.name) for f in fields(cfg.propagation)}
    if spec is not None:
        values["experiment"] = {f.name: getattr(spec, f.name) for f in fields(spec)}
        values["colocated"] = {f.name: getattr(spec.colocated, f.name) for f in fields(spec.colocated)}
    doc: Dict[str, dict] = {}
    for section, keys in CONFIG_SCHEMA.items():
        for name, (target, attr) in keys.items():
            if target not in values:
                continue
            v = values[target][attr]
            if v is None:
                continue
            doc.setdefault(section, {})[name] = _plain(v)
    return tomli_w.dumps(doc)


def config_hash(cfg: SystemConfig, spec: Optional[ExperimentSpec] = None) -> str:
    return hashlib.sha256(dump_config(cfg, spec).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _row(experiment, cfg: SystemConfig, precoder, scenario, metric, value, ci_low, ci_high,
         placements, channel_trials, seed) -> dict:
    return dict(experiment=experiment, M=cfg.M, N=cfg.N, N_t=cfg.N_t, N_r=cfg.N_r,
                precoder=_plain(precoder), scenario=_plain(scenario), metric=metric,
                value=float(value), ci_low=ci_low, ci_high=ci_high,
                placements=placements, channel_trials=channel_trials, seed=seed)


def msp_rows(experiment: str, cfg: SystemConfig, results, spec: ExperimentSpec) -> List[dict]:
    rows = []
    n = len(results)
    for p in spec.precoders:
        se_r = np.array([r.se_r[p.value] for r in results])
        rows.append(_row(experiment, cfg, p, "UR", "SE_ur_mean", se_r.mean(), None, None,
                         n, spec.channel_trials, spec.seed))
        for s in spec.scenarios:
            rep = msp_from_results(results, p, s)
            rows.append(_row(experiment, cfg, p, s, "MSP", rep.msp, rep.ci_low, rep.ci_high,
                             n, spec.channel_trials, spec.seed))
            rows.append(_row(experiment, cfg, p, s, "SE_cpu_mean", rep.pairs[:, 0].mean(), None, None,
                             n, spec.channel_trials, spec.seed))
    return rows


def run_fig2_sweep(spec: ExperimentSpec, base: Optional[SystemConfig] = None,
                   return_results: bool = False):
    """MSP versus the number of MNs at a fixed total antenna count."""
    base = base or SystemConfig(**PRESET_SYSTEM[Preset.FIG2_MSP_SWEEP])
    rows, raw = [], {}
    for M in spec.M_list:
        if spec.N_MT % M:
            raise ConfigError(f"N_MT={spec.N_MT} not divisible by M={M}")
        cfg = base.with_(M=M, N=spec.N_MT // M)
        results = run_placements(cfg, spec.seed, spec.placements, spec.channel_trials, spec.ur_trials,
                                 spec.precoders, spec.scenarios, spec.workers)
        raw[M] = results
        rows.extend(msp_rows("fig2", cfg, results, spec))
    return (rows, raw) if return_results else rows


def colocated_network(net: NetworkRealization, cfg: SystemConfig, baseline: ColocatedBaselineConfig,
                      seed) -> NetworkRealization:
    """Co-sited observing and jamming arrays at the area centre, keeping the
    UT/UR positions of ``net``. Both arrays see the same large-scale fading;
    the jam-to-observe coupling is the residual self-interference."""
    rng = np.random.default_rng(seed)
    centre = np.full(2, cfg.D / 2)
    z = rng.standard_normal(2) if cfg.shadowing else np.zeros(2)
    prop = cfg.propagation
    b_r = large_scale_fading(wrap_distance(centre, net.ur_pos, cfg.D), prop, z[0])
    b_t = large_scale_fading(wrap_distance(centre, net.ut_pos, cfg.D), prop, z[1])
    if baseline.n_observe in (0, baseline.N_MT):
        alpha = np.array([1 if baseline.n_observe else 0])
    else:
        alpha = np.array([1, 0])
    M = len(alpha)
    si = 10 ** (-baseline.suppression_db / 10) if math.isfinite(baseline.suppression_db) else 0.0
    beta_mm = np.full((M, M), si) - np.diag(np.full(M, si))
    return NetworkRealization(
        mn_pos=np.tile(centre, (M, 1)), ut_pos=net.ut_pos, ur_pos=net.ur_pos, beta_TR=net.beta_TR,
        beta_mr=np.full(M, b_r), beta_tm=np.full(M, b_t), beta_mm=beta_mm, alpha=alpha,
    )


def colocated_config(cfg: SystemConfig, baseline: ColocatedBaselineConfig) -> SystemConfig:
    if baseline.n_observe in (0, baseline.N_MT):
        M, N = 1, baseline.N_MT
    else:
        M, N = 2, baseline.n_observe
    mask = (1,) if baseline.n_observe == baseline.N_MT else (0,) if baseline.n_observe == 0 else (1, 0)
    return cfg.with_(M=M, N=N, assignment=AssignmentStrategy.FIXED, fixed_mask=mask)


def colocated_placement(cfg: SystemConfig, baseline: ColocatedBaselineConfig, master: int, index: int,
                        channel_trials: int, scenario=CsiScenario.S2_AT_CPU, precoder=None) -> float:
    """CPU SE of the colocated full-duplex system for placement ``index``."""
    net = colocated_network(placement_network(cfg, master, index), cfg, baseline,
                            seed_at(master, index, COLOCATED_STREAM))
    ccfg = colocated_config(cfg, baseline)
    draws = draw_trials(net, ccfg, channel_trials, master, (index, COLOCATED_STREAM))
    ens = build_ensemble(draws, net, ccfg, precoder or cfg.precoder)
    return se_cpu(ens, ccfg, scenario).se


def simulate_colocated(cfg: SystemConfig, baseline: ColocatedBaselineConfig, trials: int, seed: int,
                       placements: int = 1, scenario=CsiScenario.S2_AT_CPU) -> np.ndarray:
    """One colocated CPU SE sample per placement."""
    return np.array([colocated_placement(cfg, baseline, seed, i, trials, scenario)
                     for i in range(placements)])


@dataclass
class CdfResult:
    samples: Dict[str, np.ndarray]  # variant -> sorted SE samples
    levels: Dict[str, np.ndarray]

    def median(self, variant: str) -> float:
        return float(np.median(self.samples[variant]))


FIG3_VARIANTS = ("CF_estimated", "CF_perfect", "colocated")


def _fig3_placement(args):
    cfg, baseline, seed, index, trials = args
    res = evaluate_placement(cfg, seed, index, trials, ur_trials=1,
                             scenarios=[cfg.csi_scenario, CsiScenario.PERFECT])
    p = cfg.precoder.value
    return (res.se_c[(p, cfg.csi_scenario.value)], res.se_c[(p, CsiScenario.PERFECT.value)],
            colocated_placement(cfg, baseline, seed, index, trials, cfg.csi_scenario))


def run_fig3_cdf(spec: ExperimentSpec, base: Optional[SystemConfig] = None) -> Tuple[List[dict], CdfResult]:
    """CDF of the CPU's SE for cell-free (estimated / perfect CSI) and colocated systems."""
    cfg = base or SystemConfig(**PRESET_SYSTEM[Preset.FIG3_SE_CDF])
    jobs = [(cfg, spec.colocated, spec.seed, i, spec.channel_trials) for i in range(spec.placements)]
    if spec.workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            values = list(pool.map(_fig3_placement, jobs))
    else:
        values = [_fig3_placement(j) for j in jobs]
    arr = np.array(values)
    samples = {v: np.sort(arr[:, i]) for i, v in enumerate(FIG3_VARIANTS)}
    n = len(arr)
    levels = {v: np.arange(1, n + 1) / n for v in FIG3_VARIANTS}
    ccfg = colocated_config(cfg, spec.colocated)
    rows = []
    for v in FIG3_VARIANTS:
        vcfg = ccfg if v == "colocated" else cfg
        scen = CsiScenario.PERFECT.value if v == "CF_perfect" else cfg.csi_scenario.value
        rows.append(_row("fig3", vcfg, cfg.precoder, f"{v}:{scen}", "SE_cpu_median",
                         np.median(samples[v]), None, None, n, spec.channel_trials, spec.seed))
        for x in samples[v]:
            rows.append(_row("fig3", vcfg, cfg.precoder, f"{v}:{scen}", "SE_cpu_cdf", x, None, None,
                             n, spec.channel_trials, spec.seed))
    return rows, CdfResult(samples, levels)


def run_custom(spec: ExperimentSpec, cfg: SystemConfig):
    results = run_placements(cfg, spec.seed, spec.placements, spec.channel_trials, spec.ur_trials,
                             spec.precoders, spec.scenarios, spec.workers)
    return msp_rows("custom", cfg, results, spec)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(v)


def table_to_csv(table: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in table:
        w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_csv(path) -> List[dict]:
    ints = {"M", "N", "N_t", "N_r", "placements", "channel_trials", "seed"}
    floats = {"value", "ci_low", "ci_high"}
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if v == "":
                    row[k] = None
                elif k in ints:
                    row[k] = int(v)
                elif k in floats:
                    row[k] = float(v)
                else:
                    row[k] = v
            out.append(row)
    return out


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def run_metadata(cfg: SystemConfig, spec: ExperimentSpec, wall_time_s: float) -> dict:
    return {
        "config_hash": config_hash(cfg, spec),
        "master_seed": spec.seed,
        "git_describe": git_describe(),
        "wall_time_s": wall_time_s,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def write_results(table: Sequence[dict], format: str, path, metadata: Optional[dict] = None) -> List[Path]:
    """Write ``table`` as CSV and/or JSON. ``path`` is used without its suffix
    when both formats are requested."""
    if not table:
        raise ValueError("refusing to write an empty result table")
    path = Path(path)
    fmts = ("csv", "json") if format == "both" else (format,)
    written = []
    for fmt in fmts:
        target = path.with_suffix("." + fmt) if (format == "both" or not path.suffix) else path
        if fmt == "csv":
            target.write_text(table_to_csv(table))
        elif fmt == "json":
            doc = {"metadata": metadata or {}, "columns": list(CSV_COLUMNS), "rows": list(table)}
            target.write_text(json.dumps(doc, indent=1, default=_plain))
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(target)
    return written
