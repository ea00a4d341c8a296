from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfmonitor import AssignmentStrategy, CsiScenario, Precoder, SystemConfig
from cfmonitor.channel import complex_normal
from cfmonitor.performance import (
    FormulaError,
    estimate_msp,
    evaluate_placement,
    jamming_interference,
    msp_from_pairs,
    paired_better,
    paired_not_worse,
    run_placements,
    se_cpu_perfect,
    se_cpu_scenario1,
    se_cpu_scenario2,
    se_from_upsilon,
    se_ur_closed_form,
    se_ur_oracle,
    se_ur_per_antenna_oracle,
    simulate_ur_interference,
    ur_jamming,
    ur_sinr,
    wilson_interval,
)
from cfmonitor.simulation import build_ensemble, draw_trials, draw_ur_estimates, placement_network
from cfmonitor.training import herm
from cfmonitor.transmission import allocate_power_ut, build_precoder


def random_psd(rng, n, rank=None):
    X = complex_normal(rng, (n, rank or n))
    return X @ herm(X)


# -- log det -----------------------------------------------------------------

def test_se_from_upsilon_reference():
    assert se_from_upsilon(np.zeros((4, 4)), 1.0) == 0.0
    assert se_from_upsilon(np.eye(4), 1.0) == pytest.approx(4.0)
    assert se_from_upsilon(np.eye(4), 0.0) == 0.0
    assert se_from_upsilon(3 * np.eye(2), 0.5) == pytest.approx(2.0)


def test_se_from_upsilon_eigen_oracle(rng):
    for _ in range(20):
        U = random_psd(rng, 4)
        ref = np.sum(np.log2(1 + np.linalg.eigvalsh(U)))
        assert se_from_upsilon(U, 1.0) == pytest.approx(ref, abs=1e-9)


def test_se_from_upsilon_rejects_indefinite():
    with pytest.raises(FormulaError):
        se_from_upsilon(np.diag([1.0, -0.1]), 1.0)
    # tiny negative round-off is tolerated
    assert se_from_upsilon(np.diag([1.0, -1e-12]), 1.0) == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 5), scale=st.floats(1e-3, 1e3))
def test_loewner_monotone(seed, n, scale):
    rng = np.random.default_rng(seed)
    U = scale * random_psd(rng, n)
    P = random_psd(rng, n, rank=1)
    lo, hi = se_from_upsilon(U, 1.0), se_from_upsilon(U + P, 1.0)
    assert lo >= 0
    assert hi > lo


# -- untrusted receiver --------------------------------------------------------

def test_jamming_interference_reference():
    # one jamming MN, N = 1, N_r = 1, pi = 1, estimate variance 0.5, beta = 1
    I = jamming_interference(np.array([[1.0]]), np.array([0.5]), np.array([1.0]), np.array([0]), 1)
    np.testing.assert_allclose(I, [0.75])
    # observers contribute nothing
    assert not jamming_interference(np.array([[1.0]]), np.array([0.5]), np.array([1.0]),
                                    np.array([1]), 1).any()


def test_ur_sinr_no_jamming():
    gam = ur_sinr(np.array([[[1.0]]]), np.array([1.0]), 1.0, 1.0, np.zeros(1))
    np.testing.assert_allclose(gam, [[1.0]])
    A = np.array([[1.0, 0.5], [0.25, 2.0]])
    gam = ur_sinr(A, np.array([0.5, 0.5]), 2.0, 0.0, np.zeros(2))
    np.testing.assert_allclose(gam, [1.0 / (1 + 0.25), 4.0 / (1 + 0.0625)])


def _ur_setup(Nr, D=1.0, seed=0):
    cfg = SystemConfig(M=2, N=4, N_t=2, N_r=Nr, D=D, tau_r=Nr, tau_t=Nr,
                       assignment=AssignmentStrategy.FIXED, fixed_mask=(1, 0))
    net = placement_network(cfg, seed, 0)
    g, gh = draw_ur_estimates(net, cfg, 4000, seed, 0)
    A = herm(g) @ build_precoder(gh, Precoder.ZF)
    return cfg, net, A, allocate_power_ut(Nr)


@pytest.mark.parametrize("Nr", [1, 2])
def test_closed_form_matches_per_antenna_oracle(Nr):
    cfg, net, A, lam = _ur_setup(Nr)
    R = simulate_ur_interference(net, cfg, 10_000, np.random.default_rng(1))
    cf = se_ur_closed_form(A, lam, net, cfg).se
    ora = se_ur_per_antenna_oracle(A, lam, R, cfg).se
    assert cf == pytest.approx(ora, rel=0.05)


def test_closed_form_bounds_joint_mmse():
    cfg, net, A, lam = _ur_setup(1)
    R = simulate_ur_interference(net, cfg, 10_000, np.random.default_rng(1))
    # one antenna: per-antenna and joint detection coincide
    assert se_ur_closed_form(A, lam, net, cfg).se == pytest.approx(se_ur_oracle(A, lam, R, cfg).se, rel=0.05)
    cfg, net, A, lam = _ur_setup(2)
    R = simulate_ur_interference(net, cfg, 10_000, np.random.default_rng(1))
    # two antennas: the sum-SINR expression lower-bounds joint MMSE detection
    assert se_ur_closed_form(A, lam, net, cfg).se <= se_ur_oracle(A, lam, R, cfg).se * 1.02


def test_interference_simulation_matches_closed_form_power():
    cfg, net, A, lam = _ur_setup(2)
    R = simulate_ur_interference(net, cfg, 20_000, np.random.default_rng(5))
    expected = 1 + cfg.rho_J * ur_jamming(net, cfg)
    np.testing.assert_allclose(np.real(np.diag(R)), expected, rtol=0.05)


def test_jamming_hurts_ur():
    cfg, net, A, lam = _ur_setup(2)
    se = [se_ur_closed_form(A, lam, net, cfg.with_(p_J_w=p)).se for p in (0.0, 0.1, 1.0)]
    assert se[0] >= se[1] >= se[2]


# -- CPU -----------------------------------------------------------------------

def _ensemble(cfg, seed=0, trials=100, precoder=None, **kw):
    net = placement_network(cfg, seed, 0)
    draws = draw_trials(net, cfg, trials, seed, 0)
    return build_ensemble(draws, net, cfg, precoder, **kw), net


def test_all_jam_gives_zero(small_cfg):
    cfg = small_cfg.with_(assignment=AssignmentStrategy.ALL_JAM)
    ens, _ = _ensemble(cfg)
    for fn in (se_cpu_scenario1, se_cpu_scenario2, se_cpu_perfect):
        assert fn(ens, cfg).se == 0.0


def test_zero_prelog(small_cfg):
    cfg = small_cfg.with_(tau=small_cfg.tau_r + small_cfg.tau_t)
    ens, _ = _ensemble(cfg)
    for fn in (se_cpu_scenario1, se_cpu_scenario2, se_cpu_perfect):
        assert fn(ens, cfg).se == 0.0


def test_scenario2_without_error_is_perfect(small_cfg):
    ens, _ = _ensemble(small_cfg)
    swapped = replace(ens, D_hat=ens.D_perf, D=ens.D_perf, V_obs=ens.V_perf_obs, Q=ens.Q_perf)
    s2 = se_cpu_scenario2(swapped, small_cfg, include_error=False)
    assert s2.se == pytest.approx(se_cpu_perfect(ens, small_cfg).se, rel=1e-12)


def test_scenario2_pilot_snr_limit(small_cfg):
    net = placement_network(small_cfg, 0, 0)
    snr = 1e9 / net.beta_tm.min()  # per-entry training SNR of at least 1e9
    ens, _ = _ensemble(small_cfg, bf_pilot_snr=snr)
    assert se_cpu_scenario2(ens, small_cfg).se == pytest.approx(se_cpu_perfect(ens, small_cfg).se, rel=0.01)


def test_scenario2_monotone_in_rho_t_without_jamming():
    base = SystemConfig(M=2, N=8, N_r=2, tau_r=2, tau_t=2, D=0.3, p_J_w=0.0,
                       assignment=AssignmentStrategy.FIXED, fixed_mask=(1, 0))
    se = [se_cpu_scenario2(_ensemble(base.with_(p_t_w=p))[0], base.with_(p_t_w=p)).se
          for p in (0.001, 0.01, 0.1)]
    assert se[0] < se[1] < se[2]


def test_prelog_scaling(small_cfg):
    cfg2 = small_cfg.with_(tau=2 * small_cfg.tau)
    ratio = cfg2.prelog / small_cfg.prelog
    r1 = evaluate_placement(small_cfg, 3, 0, 30, 30, ["ZF"], list(CsiScenario))
    r2 = evaluate_placement(cfg2, 3, 0, 30, 30, ["ZF"], list(CsiScenario))
    assert r2.se_r["ZF"] == pytest.approx(ratio * r1.se_r["ZF"], rel=1e-12)
    for k in r1.se_c:
        assert r2.se_c[k] == pytest.approx(ratio * r1.se_c[k], rel=1e-12)


def test_scenario_ordering_statistical():
    cfg = SystemConfig()
    res = run_placements(cfg, 11, 50, 100, 50, ["ZF"], list(CsiScenario))
    se = {s: np.array([r.se_c[("ZF", s.value)] for r in res]) for s in CsiScenario}
    s1, s2, pf = se[CsiScenario.S1_NO_CPU], se[CsiScenario.S2_AT_CPU], se[CsiScenario.PERFECT]
    assert paired_not_worse(s2 >= s1, s1 > s2)  # S1 is not significantly above S2
    assert paired_better(s2 > s1, s1 > s2)
    assert paired_not_worse(pf >= s2, s2 > pf)
    assert s1.mean() <= s2.mean() <= pf.mean()


# -- MSP -----------------------------------------------------------------------

def test_msp_degenerate_cases(small_cfg):
    rep = estimate_msp(small_cfg.with_(assignment=AssignmentStrategy.ALL_JAM), 5, 10, 0, ur_trials=20)
    assert rep.msp == 0.0
    rep = estimate_msp(small_cfg.with_(tau=small_cfg.tau_r + small_cfg.tau_t), 5, 10, 0, ur_trials=20)
    assert rep.msp == 1.0
    assert np.all(rep.pairs == 0.0)
    with pytest.raises(ValueError):
        estimate_msp(small_cfg, 0, 10, 0)


def test_msp_from_pairs_ties_and_ci():
    rep = msp_from_pairs([1.0, 0.0, 2.0, 0.5], [1.0, 0.0, 3.0, 0.1])
    assert rep.msp == 0.75
    assert rep.successes.tolist() == [True, True, False, True]
    assert rep.ci_low <= rep.msp <= rep.ci_high


def test_wilson_reference():
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(0.236593, abs=1e-6)
    assert hi == pytest.approx(0.763407, abs=1e-6)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_paired_tests():
    a = np.array([True] * 30 + [False] * 10)
    b = np.array([False] * 30 + [False] * 10)
    assert paired_better(a, b)
    assert not paired_better(b, a)
    assert paired_not_worse(a, b)
    assert not paired_not_worse(b, a)
    assert paired_not_worse(a, a) and not paired_better(a, a)


def test_worker_count_does_not_change_results(small_cfg):
    one = run_placements(small_cfg, 5, 3, 10, 10, workers=1)
    two = run_placements(small_cfg, 5, 3, 10, 10, workers=2)
    for a, b in zip(one, two):
        assert a.se_r == b.se_r and a.se_c == b.se_c
