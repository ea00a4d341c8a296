"""Spectral efficiency at the untrusted receiver and at the CPU, and the
monitoring success probability (MSP).

Expectations are ensemble averages over the channel trials of one
placement; the MSP is the fraction of placements in which the CPU's SE
reaches the untrusted receiver's SE.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .channel import complex_normal
from .config import CsiScenario, Precoder, SystemConfig
from .scenario import NetworkRealization
from .simulation import (
    TrialEnsemble,
    build_ensemble,
    draw_trials,
    draw_ur_estimates,
    placement_network,
)
from .training import estimate_variance, herm, mmse_gamma
from .transmission import allocate_power_jam, allocate_power_ut, build_precoder

PSD_TOL = 1e-9


class FormulaError(ArithmeticError):
    """An SE formula produced a matrix that violates its structural guarantees."""


def hermitian(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + herm(X))


def log2det_eye_plus(Upsilon: np.ndarray) -> np.ndarray:
    """log2 det(I + Upsilon) for Hermitian PSD ``Upsilon`` (batched)."""
    ev = np.linalg.eigvalsh(hermitian(np.asarray(Upsilon, dtype=complex)))
    scale = np.maximum(1.0, np.abs(ev).max(axis=-1, keepdims=True))
    if np.any(ev < -PSD_TOL * scale):
        raise FormulaError(f"Upsilon is not PSD (min eigenvalue {ev.min():.3e})")
    return np.sum(np.log2(1.0 + np.clip(ev, 0.0, None)), axis=-1)


def se_from_upsilon(Upsilon: np.ndarray, prelog: float) -> float:
    if prelog <= 0:
        return 0.0
    return float(prelog * log2det_eye_plus(Upsilon))


def _quadratic(D: np.ndarray, Psi: np.ndarray, rho_t: float) -> np.ndarray:
    """rho_t D^H Psi^-1 D, symmetrized."""
    try:
        return hermitian(rho_t * (herm(D) @ np.linalg.solve(hermitian(Psi), D)))
    except np.linalg.LinAlgError as exc:
        raise FormulaError("singular interference-plus-noise covariance") from exc


@dataclass
class SEReport:
    se: float
    link: str  # "ur" or "cpu"
    scenario: Optional[str]
    prelog: float
    samples: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    half_width: float = 0.0  # 95% CI half-width of the Monte Carlo mean


def _report(per_trial: np.ndarray, prelog: float, link: str, scenario) -> SEReport:
    samples = prelog * np.asarray(per_trial, dtype=float) if prelog > 0 else np.zeros(len(per_trial))
    n = len(samples)
    hw = 1.96 * samples.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
    return SEReport(float(samples.mean()) if n else 0.0, link, scenario, prelog, samples, float(hw))


# ---------------------------------------------------------------------------
# untrusted receiver
# ---------------------------------------------------------------------------

def jamming_interference(pi: np.ndarray, est_var: np.ndarray, beta_mr: np.ndarray,
                         alpha: np.ndarray, N: int) -> np.ndarray:
    """Average jamming power (per unit rho_J) at each UR antenna.

    ``est_var[m]`` is the per-entry variance of MN m's estimate of its UR
    channel and ``beta_mr[m]`` the true per-entry variance. Returns one value
    per UR antenna n:

        N sum_{n'} sum_m (1-a_m) pi_{m,n'} beta_m v_m + N^2 (sum_m (1-a_m) sqrt(pi_{m,n}) v_m)^2
    """
    jam = (1 - np.asarray(alpha))[:, None]
    pi = np.asarray(pi, dtype=float) * jam
    v = np.asarray(est_var, dtype=float)[:, None]
    beta = np.asarray(beta_mr, dtype=float)[:, None]
    incoherent = N * np.sum(pi * beta * v)
    coherent = N ** 2 * np.sum(np.sqrt(pi) * v, axis=0) ** 2
    return incoherent + coherent


def ur_jamming(net: NetworkRealization, cfg: SystemConfig) -> np.ndarray:
    pi = allocate_power_jam(net, None, cfg)
    v = np.atleast_1d(estimate_variance(net.beta_mr, cfg.tau_r, cfg.rho_r))
    return jamming_interference(pi, v, net.beta_mr, net.alpha, cfg.N)


def ur_sinr(A_r: np.ndarray, lam: np.ndarray, rho_t: float, rho_J: float,
            jam: np.ndarray) -> np.ndarray:
    """Per-antenna SINR at the UR, batched over leading axes of ``A_r``."""
    P = np.abs(A_r) ** 2 * lam  # |a_{n,n'}|^2 lambda_{n'}
    signal = np.diagonal(P, axis1=-2, axis2=-1)
    interference = P.sum(axis=-1) - signal
    return rho_t * signal / (1.0 + rho_t * interference + rho_J * np.asarray(jam))


def se_ur_closed_form(A_r: np.ndarray, lam: np.ndarray, net: NetworkRealization,
                      cfg: SystemConfig, jam: Optional[np.ndarray] = None) -> SEReport:
    """UR's SE with perfect knowledge of its effective channel, averaged over
    the supplied ``A_r`` realizations."""
    if jam is None:
        jam = ur_jamming(net, cfg)
    A = np.asarray(A_r)
    if A.ndim == 2:
        A = A[None]
    gam = ur_sinr(A, lam, cfg.rho_t, cfg.rho_J, jam)
    return _report(np.log2(1.0 + gam.sum(axis=-1)), cfg.prelog, "ur", None)


def simulate_ur_interference(net: NetworkRealization, cfg: SystemConfig, n_draws: int,
                             rng: np.random.Generator) -> np.ndarray:
    """Sample covariance of jamming-plus-noise at the UR from simulated
    received signals (fresh jammer channels, estimates, symbols and noise)."""
    jam = net.jammers
    Nr, N = cfg.N_r, cfg.N
    R = np.zeros((Nr, Nr), dtype=complex)
    pi = allocate_power_jam(net, None, cfg)
    snr = np.sqrt(cfg.tau_r * cfg.rho_r)
    chunk = 2000
    done = 0
    while done < n_draws:
        k = min(chunk, n_draws - done)
        z = complex_normal(rng, (k, Nr))  # receiver noise
        if len(jam):
            beta = net.beta_mr[jam][None, :, None, None]
            G = np.sqrt(beta) * complex_normal(rng, (k, len(jam), N, Nr))
            gamma = np.atleast_1d(mmse_gamma(net.beta_mr[jam], cfg.tau_r, cfg.rho_r))[None, :, None, None]
            G_hat = gamma * (snr * G + complex_normal(rng, G.shape))
            xJ = complex_normal(rng, (k, Nr))
            s = np.einsum("kmnr,mr,kr->kmn", G_hat, np.sqrt(pi[jam]), xJ)  # per-MN jamming signals
            z = z + np.sqrt(cfg.rho_J) * np.einsum("kmnr,kmn->kr", np.conj(G), s)
        R += np.einsum("ki,kj->ij", z, np.conj(z))
        done += k
    return R / n_draws


def se_ur_oracle(A_r: np.ndarray, lam: np.ndarray, interference_cov: np.ndarray,
                 cfg: SystemConfig) -> SEReport:
    """UR's SE from conditional covariances given A_r (MMSE detection):
    -log2 det of the error covariance of x given y_r."""
    A = np.asarray(A_r)
    sq = np.sqrt(lam)
    C_xy = np.sqrt(cfg.rho_t) * (herm(A) * sq[:, None])  # Lambda^1/2 A^H
    C_yy = cfg.rho_t * (A * lam) @ herm(A) + interference_cov
    E = np.eye(cfg.N_r) - C_xy @ np.linalg.solve(hermitian(C_yy), herm(C_xy))
    sign, logdet = np.linalg.slogdet(hermitian(E))
    return _report(-logdet / np.log(2), cfg.prelog, "ur", "oracle")


def ur_sinr_oracle(A_r: np.ndarray, lam: np.ndarray, interference_cov: np.ndarray,
                   cfg: SystemConfig) -> np.ndarray:
    """Per-antenna SINR from conditional covariances: antenna n estimates
    stream n from y_n alone, SINR_n = |C_xy|^2 / (C_yy - |C_xy|^2)."""
    A = np.asarray(A_r)
    c_xy2 = cfg.rho_t * lam * np.abs(np.diagonal(A, axis1=-2, axis2=-1)) ** 2
    c_yy = cfg.rho_t * (np.abs(A) ** 2 @ lam) + np.real(np.diag(interference_cov))
    return c_xy2 / (c_yy - c_xy2)


def se_ur_per_antenna_oracle(A_r: np.ndarray, lam: np.ndarray, interference_cov: np.ndarray,
                             cfg: SystemConfig) -> SEReport:
    gam = ur_sinr_oracle(A_r, lam, interference_cov, cfg)
    return _report(np.log2(1.0 + gam.sum(axis=-1)), cfg.prelog, "ur", "per-antenna oracle")


# ---------------------------------------------------------------------------
# CPU
# ---------------------------------------------------------------------------

def _empty_cpu(ens: TrialEnsemble, cfg: SystemConfig, scenario) -> Optional[SEReport]:
    if ens.n_observers == 0 or cfg.prelog <= 0:
        return _report(np.zeros(ens.n_trials), cfg.prelog, "cpu", scenario)
    return None


def se_cpu_scenario1(ens: TrialEnsemble, cfg: SystemConfig) -> SEReport:
    """CPU without side information: every expectation is an ensemble mean."""
    tag = CsiScenario.S1_NO_CPU.value
    empty = _empty_cpu(ens, cfg, tag)
    if empty is not None:
        return empty
    rho_t, rho_J = cfg.rho_t, cfg.rho_J
    ED = ens.D.mean(axis=0)
    Psi = (rho_J * (ens.J @ herm(ens.J)).mean(axis=0)
           + rho_t * (ens.D @ herm(ens.D)).mean(axis=0)
           + ens.Q.mean(axis=0)
           - rho_t * ED @ herm(ED))
    ld = log2det_eye_plus(_quadratic(ED, Psi, rho_t))
    rep = _report(np.array([ld]), cfg.prelog, "cpu", tag)
    rep.samples = np.full(ens.n_trials, rep.se)
    return rep


def _side_info_se(D_side, V, Q, err_cov, ens, cfg, tag) -> SEReport:
    Psi = cfg.rho_J * (herm(V) @ ens.jam_cov @ V) + Q
    if err_cov is not None:
        Psi = Psi + cfg.rho_t * err_cov
    return _report(log2det_eye_plus(_quadratic(D_side, Psi, cfg.rho_t)), cfg.prelog, "cpu", tag)


def se_cpu_scenario2(ens: TrialEnsemble, cfg: SystemConfig, include_error: bool = True) -> SEReport:
    """CPU knows every observing MN's effective-channel estimate."""
    tag = CsiScenario.S2_AT_CPU.value
    empty = _empty_cpu(ens, cfg, tag)
    if empty is not None:
        return empty
    err = None
    if include_error:
        Dt = ens.D - ens.D_hat
        err = (Dt @ herm(Dt)).mean(axis=0)
    return _side_info_se(ens.D_hat, ens.V_obs, ens.Q, err, ens, cfg, tag)


def se_cpu_perfect(ens: TrialEnsemble, cfg: SystemConfig) -> SEReport:
    """Upper-bound baseline: true effective channels at the MNs and the CPU."""
    tag = CsiScenario.PERFECT.value
    empty = _empty_cpu(ens, cfg, tag)
    if empty is not None:
        return empty
    return _side_info_se(ens.D_perf, ens.V_perf_obs, ens.Q_perf, None, ens, cfg, tag)


SE_CPU = {
    CsiScenario.S1_NO_CPU: se_cpu_scenario1,
    CsiScenario.S2_AT_CPU: se_cpu_scenario2,
    CsiScenario.PERFECT: se_cpu_perfect,
}


def se_cpu(ens: TrialEnsemble, cfg: SystemConfig, scenario=None) -> SEReport:
    return SE_CPU[CsiScenario(scenario or cfg.csi_scenario)](ens, cfg)


# ---------------------------------------------------------------------------
# placements and MSP
# ---------------------------------------------------------------------------

@dataclass
class PlacementResult:
    index: int
    alpha: np.ndarray
    se_r: Dict[str, float]  # precoder -> SE at UR
    se_c: Dict[Tuple[str, str], float]  # (precoder, scenario) -> SE at CPU


DEFAULT_UR_TRIALS = 500


def evaluate_placement(cfg: SystemConfig, master: int, index: int, channel_trials: int,
                       ur_trials: int = DEFAULT_UR_TRIALS,
                       precoders: Sequence = None, scenarios: Sequence = None) -> PlacementResult:
    """SE at the UR and at the CPU for one placement; precoders and scenarios
    are evaluated on the same (paired) channel draws."""
    precoders = [Precoder(p) for p in (precoders or [cfg.precoder])]
    scenarios = [CsiScenario(s) for s in (scenarios or [cfg.csi_scenario])]
    net = placement_network(cfg, master, index)
    jam = ur_jamming(net, cfg)
    lam = allocate_power_ut(cfg.N_r)
    g_tr, g_hat_tr = draw_ur_estimates(net, cfg, ur_trials, master, index)
    draws = draw_trials(net, cfg, channel_trials, master, index)
    se_r, se_c = {}, {}
    for p in precoders:
        A_r = herm(g_tr) @ build_precoder(g_hat_tr, p)
        se_r[p.value] = se_ur_closed_form(A_r, lam, net, cfg, jam).se
        ens = build_ensemble(draws, net, cfg, p)
        for s in scenarios:
            se_c[(p.value, s.value)] = se_cpu(ens, cfg, s).se
    return PlacementResult(index, net.alpha, se_r, se_c)


def _evaluate_star(args):
    return evaluate_placement(*args)


def run_placements(cfg: SystemConfig, master: int, placements: int, channel_trials: int,
                   ur_trials: int = DEFAULT_UR_TRIALS, precoders=None, scenarios=None,
                   workers: int = 1) -> List[PlacementResult]:
    """Evaluate placements ``0..placements-1``; output order is fixed."""
    jobs = [(cfg, master, i, channel_trials, ur_trials, precoders, scenarios) for i in range(placements)]
    if workers <= 1:
        return [_evaluate_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_star, jobs))


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class MSPReport:
    msp: float
    placements: int
    pairs: np.ndarray  # (placements, 2): (se_c, se_r)
    ci_low: float
    ci_high: float

    @property
    def successes(self) -> np.ndarray:
        return self.pairs[:, 0] >= self.pairs[:, 1]


def msp_from_pairs(se_c: Iterable[float], se_r: Iterable[float]) -> MSPReport:
    pairs = np.column_stack([np.asarray(list(se_c), float), np.asarray(list(se_r), float)])
    wins = int(np.sum(pairs[:, 0] >= pairs[:, 1]))
    n = len(pairs)
    lo, hi = wilson_interval(wins, n)
    return MSPReport(wins / n if n else 0.0, n, pairs, lo, hi)


def msp_from_results(results: Sequence[PlacementResult], precoder, scenario) -> MSPReport:
    p, s = Precoder(precoder).value, CsiScenario(scenario).value
    return msp_from_pairs([r.se_c[(p, s)] for r in results], [r.se_r[p] for r in results])


def estimate_msp(cfg: SystemConfig, placements: int, channel_trials: int, master_seed: int,
                 ur_trials: int = DEFAULT_UR_TRIALS, workers: int = 1) -> MSPReport:
    if placements < 1 or channel_trials < 1:
        raise ValueError("placements and channel_trials must be >= 1")
    results = run_placements(cfg, master_seed, placements, channel_trials, ur_trials, workers=workers)
    return msp_from_results(results, cfg.precoder, cfg.csi_scenario)


def paired_not_worse(upper: np.ndarray, lower: np.ndarray, confidence: float = 0.95) -> bool:
    """True unless ``lower`` succeeds significantly more often than ``upper``
    on paired placements (one-sided exact sign test on discordant pairs)."""
    b = int(np.sum(upper & ~lower))
    c = int(np.sum(lower & ~upper))
    if b + c == 0:
        return True
    return stats.binomtest(c, b + c, 0.5, alternative="greater").pvalue >= 1 - confidence


def paired_better(a: np.ndarray, b: np.ndarray, confidence: float = 0.95) -> bool:
    """True if ``a`` succeeds significantly more often than ``b`` (paired sign test)."""
    wins = int(np.sum(a & ~b))
    losses = int(np.sum(b & ~a))
    if wins + losses == 0:
        return False
    return stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue < 1 - confidence
