import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfmonitor import ConfigError, CsiScenario, Precoder, SystemConfig
from cfmonitor.cli import main
from cfmonitor.experiments import (
    CSV_COLUMNS,
    ColocatedBaselineConfig,
    ExperimentSpec,
    Preset,
    colocated_placement,
    dump_config,
    load_config,
    parse_config,
    read_csv,
    run_fig2_sweep,
    run_fig3_cdf,
    simulate_colocated,
    table_to_csv,
    write_results,
)


def test_empty_config_gives_defaults(tmp_path):
    p = tmp_path / "empty.toml"
    p.write_text("")
    cfg, spec = load_config(p)
    assert cfg == SystemConfig()
    assert spec == ExperimentSpec()


def test_fig3_preset_pins_caption_values():
    cfg, spec = parse_config("", preset="fig3")
    assert (cfg.M, cfg.N, cfg.D, cfg.N_t, cfg.N_r, cfg.p_J_w) == (4, 60, 0.3, 4, 4, 1.0)
    assert spec.colocated.suppression_db == 30.0
    assert cfg.combiner_reg == pytest.approx(1 / cfg.rho_t)


def test_config_overrides_and_errors():
    cfg, spec = parse_config('[scenario]\nM = 6\nN = 10\n[transmission]\nprecoder = "MRT"\n'
                             '[experiment]\nM_list = [40]\nseed = 9\n')
    assert (cfg.M, cfg.N, cfg.precoder, spec.M_list, spec.seed) == (6, 10, Precoder.MRT, (40,), 9)
    with pytest.raises(ConfigError, match="tau_r"):
        parse_config("[training]\ntau_r = 2\n[scenario]\nN_r = 4\n")
    with pytest.raises(ConfigError, match="scenario.bogus"):
        parse_config("[scenario]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="nosuch.M"):
        parse_config("[nosuch]\nM = 1\n")
    with pytest.raises(ConfigError, match="precoder"):
        parse_config('[transmission]\nprecoder = "XYZ"\n')
    with pytest.raises(ConfigError, match="M_list"):
        parse_config("[experiment]\nM_list = [7]\n")
    with pytest.raises(ConfigError, match="parse"):
        parse_config("[scenario\n")


def test_round_trip():
    cfg, spec = parse_config('[scenario]\nM = 6\nN = 10\nassignment = "FIXED"\nfixed_mask = [1,0,1,0,1,0]\n'
                             '[transmission]\nvarrho = 0.5\n[propagation]\nL = 130.0\n'
                             '[experiment]\npreset = "CUSTOM"\nscenarios = ["S2_atCPU"]\n'
                             '[colocated]\nsuppression_db = 40.0\n')
    again = parse_config(dump_config(cfg, spec))
    assert again == (cfg, spec)


@settings(max_examples=30, deadline=None)
@given(M=st.integers(1, 12), N=st.integers(1, 20), Nr=st.integers(1, 4), D=st.floats(0.1, 5.0),
       p=st.floats(0.0, 10.0), prec=st.sampled_from(list(Precoder)))
def test_round_trip_property(M, N, Nr, D, p, prec):
    cfg = SystemConfig(M=M, N=N, N_r=Nr, N_t=4, D=D, p_J_w=p, tau_r=Nr, tau_t=Nr, precoder=prec)
    spec = ExperimentSpec(preset=Preset.CUSTOM)
    assert parse_config(dump_config(cfg, spec)) == (cfg, spec)


def test_colocated_config_validation():
    with pytest.raises(ConfigError):
        ColocatedBaselineConfig(N_MT=240, n_observe=300)
    with pytest.raises(ConfigError):
        ColocatedBaselineConfig(suppression_db=-1)
    assert ColocatedBaselineConfig().n_jam == 120


def _small_spec(**kw):
    base = dict(placements=3, channel_trials=10, ur_trials=20, N_MT=48, M_list=(8,))
    return ExperimentSpec(**{**base, **kw})


def test_fig2_rows():
    spec = _small_spec(M_list=(4, 8))
    rows = run_fig2_sweep(spec)
    msp = [r for r in rows if r["metric"] == "MSP"]
    assert len(msp) == 2 * 2 * 3
    assert {(r["precoder"], r["scenario"]) for r in msp} == {
        (p.value, s.value) for p in Precoder for s in CsiScenario}
    assert {(r["M"], r["N"]) for r in msp} == {(4, 12), (8, 6)}
    for r in msp:
        assert r["ci_low"] <= r["value"] <= r["ci_high"]
        assert r["placements"] == 3 and r["seed"] == 0


def test_fig2_uses_n_mt_over_m():
    rows = run_fig2_sweep(ExperimentSpec(placements=1, channel_trials=5, ur_trials=5, M_list=(40,)))
    assert {r["N"] for r in rows} == {6}


def test_fig3_cdf_levels():
    cfg = SystemConfig(M=4, N=8, D=0.3)
    rows, cdf = run_fig3_cdf(_small_spec(placements=4), cfg)
    for v, lev in cdf.levels.items():
        assert np.all(np.diff(lev) >= 0) and lev[-1] == 1.0
        assert np.all(np.diff(cdf.samples[v]) >= 0)
    assert sum(r["metric"] == "SE_cpu_cdf" for r in rows) == 3 * 4


def test_colocated_all_jam_split_is_zero():
    cfg = SystemConfig(M=4, N=8, D=0.3)
    se = simulate_colocated(cfg, ColocatedBaselineConfig(N_MT=16, n_observe=0), 10, 0, placements=2)
    np.testing.assert_array_equal(se, 0.0)


def test_colocated_monotone_in_suppression():
    cfg = SystemConfig(M=4, N=8, D=0.3)
    for i in range(3):
        lo = colocated_placement(cfg, ColocatedBaselineConfig(N_MT=16, n_observe=8, suppression_db=30), 0, i, 20)
        mid = colocated_placement(cfg, ColocatedBaselineConfig(N_MT=16, n_observe=8, suppression_db=90), 0, i, 20)
        hi = colocated_placement(cfg, ColocatedBaselineConfig(N_MT=16, n_observe=8,
                                                              suppression_db=float("inf")), 0, i, 20)
        assert lo <= mid <= hi
        assert hi > 0


def _table():
    cfg = SystemConfig()
    return [dict(experiment="x", M=cfg.M, N=cfg.N, N_t=4, N_r=4, precoder="ZF", scenario="S2_atCPU",
                 metric="MSP", value=1 / 3, ci_low=0.1, ci_high=np.nextafter(0.9, 1), placements=3,
                 channel_trials=5, seed=7),
            dict(experiment="x", M=4, N=60, N_t=4, N_r=4, precoder="ZF", scenario="UR",
                 metric="SE_ur_mean", value=2.0 ** -40, ci_low=None, ci_high=None, placements=3,
                 channel_trials=5, seed=7)]


def test_csv_round_trip(tmp_path):
    table = _table()
    [path] = write_results(table, "csv", tmp_path / "t.csv")
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert read_csv(path) == table


def test_json_envelope(tmp_path):
    paths = write_results(_table(), "both", tmp_path / "t", {"master_seed": 7})
    assert sorted(p.suffix for p in paths) == [".csv", ".json"]
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["metadata"]["master_seed"] == 7
    assert doc["rows"][0]["value"] == 1 / 3


def test_empty_table_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_results([], "csv", tmp_path / "e.csv")
    assert not list(tmp_path.iterdir())


def test_cli_deterministic(tmp_path, capsys):
    cfgfile = tmp_path / "c.toml"
    cfgfile.write_text("[experiment]\nM_list = [20]\nur_trials = 10\n")
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["simulate", "--config", str(cfgfile), "--experiment", "fig2", "--seed", "3",
                     "--placements", "2", "--channel-trials", "5", "--out", str(d)]) == 0
        outs.append(d)
    assert (outs[0] / "fig2.csv").read_bytes() == (outs[1] / "fig2.csv").read_bytes()
    meta = [json.loads((d / "fig2.json").read_text()) for d in outs]
    assert meta[0]["rows"] == meta[1]["rows"]
    assert meta[0]["metadata"]["config_hash"] == meta[1]["metadata"]["config_hash"]
    assert "MSP=" in capsys.readouterr().out


def test_cli_config_error(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[training]\ntau_r = 2\n")
    assert main(["simulate", "--config", str(p)]) == 2
    assert "tau_r" in capsys.readouterr().err
