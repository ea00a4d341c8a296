"""Per-placement Monte Carlo ensembles of the three-phase protocol.

Seeds are addressed hierarchically, ``(master, placement, stream, trial,
retry)``, so every channel trial can be regenerated in isolation and the
results do not depend on how placements are spread over workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .channel import ChannelSet, complex_normal, realize_channels, stack_channels
from .config import Precoder, SystemConfig
from .scenario import NetworkRealization, sample_geometry
from .training import UplinkEstimates, herm, mmse_gamma, uplink_training
from .transmission import (
    ZF_COND_LIMIT,
    allocate_power_jam,
    allocate_power_ut,
    build_precoder,
    mmse_combiner,
)

GEOMETRY_STREAM = 0
CHANNEL_STREAM = 1
UR_STREAM = 2
MAX_RESAMPLE_FRACTION = 1e-3


def seed_at(master: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=tuple(int(p) for p in path))


def placement_network(cfg: SystemConfig, master: int, placement: int) -> NetworkRealization:
    return sample_geometry(cfg, seed_at(master, placement, GEOMETRY_STREAM))


def _zf_ok(g_hat_TR: np.ndarray) -> bool:
    Nt, Nr = g_hat_TR.shape
    if Nt < Nr:
        return True  # ZF is rejected up front for such shapes
    return np.linalg.cond(herm(g_hat_TR) @ g_hat_TR) <= ZF_COND_LIMIT


@dataclass
class TrialDraws:
    """Channels, uplink estimates and beamforming-training noise for T trials."""

    channels: ChannelSet  # batched
    uplink: UplinkEstimates  # batched
    bf_noise: np.ndarray  # (T, M, N, N_r)
    resampled: int = 0

    @property
    def n_trials(self) -> int:
        return self.channels.G_TR.shape[0]


def draw_one_trial(net: NetworkRealization, cfg: SystemConfig, seed):
    rng = np.random.default_rng(seed)
    ch = realize_channels(net, cfg, rng)
    up = uplink_training(ch, net, cfg, rng)
    bf_noise = complex_normal(rng, (cfg.M, cfg.N, cfg.N_r))
    return ch, up, bf_noise


def draw_trials(net: NetworkRealization, cfg: SystemConfig, n_trials: int, master: int,
                placement) -> TrialDraws:
    """Draw ``n_trials`` coherence blocks; ZF-singular blocks are redrawn.

    ``placement`` is an index or a tuple of indices prefixing the seed path.
    """
    prefix = tuple(np.atleast_1d(placement).tolist())
    chans, ups, noises = [], [], []
    resampled = 0
    for t in range(n_trials):
        retry = 0
        while True:
            ch, up, bf = draw_one_trial(net, cfg, seed_at(master, *prefix, CHANNEL_STREAM, t, retry))
            if _zf_ok(up.g_hat_TR):
                break
            retry += 1
            resampled += 1
        chans.append(ch)
        ups.append(up)
        noises.append(bf)
    if resampled > max(1.0, MAX_RESAMPLE_FRACTION * n_trials):
        raise RuntimeError(f"{resampled} of {n_trials} trials had a singular ZF estimate")
    uplink = UplinkEstimates(
        g_hat_TR=np.stack([u.g_hat_TR for u in ups]),
        g_hat_mr=np.stack([u.g_hat_mr for u in ups]),
        gamma_TR=ups[0].gamma_TR,
        gamma_mr=ups[0].gamma_mr,
    )
    return TrialDraws(stack_channels(chans), uplink, np.stack(noises), resampled)


def draw_ur_estimates(net: NetworkRealization, cfg: SystemConfig, n_trials: int, master: int,
                      placement: int):
    """UT-side draws only: true G_TR and its estimate, for the UR's SE."""
    g_tr = np.empty((n_trials, cfg.N_t, cfg.N_r), dtype=complex)
    g_hat = np.empty_like(g_tr)
    gamma = mmse_gamma(net.beta_TR, cfg.tau_r, cfg.rho_r)
    snr = np.sqrt(cfg.tau_r * cfg.rho_r)
    for t in range(n_trials):
        retry = 0
        while True:
            rng = np.random.default_rng(seed_at(master, placement, UR_STREAM, t, retry))
            G = np.sqrt(net.beta_TR) * complex_normal(rng, (cfg.N_t, cfg.N_r))
            Gh = gamma * (snr * G + complex_normal(rng, (cfg.N_t, cfg.N_r)))
            if _zf_ok(Gh):
                break
            retry += 1
        g_tr[t], g_hat[t] = G, Gh
    return g_tr, g_hat


@dataclass
class TrialEnsemble:
    """Per-trial effective matrices restricted to the observing MNs.

    ``*_perf`` fields use the true effective channels in place of the
    estimates (perfect-CSI baseline). Jamming matrices are power-free.
    """

    A_r: np.ndarray  # (T, N_r, N_r)
    D: np.ndarray  # (T, N_r, N_r) true effective desired-signal matrix
    D_hat: np.ndarray  # (T, N_r, N_r) same with B_hat
    D_perf: np.ndarray
    J: np.ndarray  # (T, N_r, N_r) sum_m V_m^H F_m
    J_perf: np.ndarray
    Q: np.ndarray  # (T, N_r, N_r) sum_m V_m^H V_m
    Q_perf: np.ndarray
    V_obs: np.ndarray  # (T, M_o N, N_r) stacked observer combiners
    V_perf_obs: np.ndarray
    F_obs: np.ndarray  # (T, M_o N, N_r) stacked observer jamming matrices
    lam: np.ndarray
    n_observers: int

    @property
    def n_trials(self) -> int:
        return self.A_r.shape[0]

    @cached_property
    def jam_cov(self) -> np.ndarray:
        """Ensemble average of F F^H over the stacked observers."""
        F = self.F_obs
        return np.einsum("tir,tjr->ij", F, np.conj(F)) / F.shape[0]


def observer_jamming(G_mm: np.ndarray, X: np.ndarray, obs: np.ndarray, jam: np.ndarray) -> np.ndarray:
    """F_m = sum_k G_mk^H X_k for observing m and jamming k, batched over trials."""
    T, N, Nr = G_mm.shape[0], G_mm.shape[-1], X.shape[-1]
    if len(jam) == 0 or len(obs) == 0:
        return np.zeros((T, len(obs), N, Nr), dtype=complex)
    G = G_mm[:, obs][:, :, jam]  # (T, Mo, Mj, N, N)
    G = G.reshape(T, len(obs), len(jam) * N, N)
    Xs = X[:, jam].reshape(T, 1, len(jam) * N, Nr)
    return herm(G) @ Xs


def build_ensemble(draws: TrialDraws, net: NetworkRealization, cfg: SystemConfig,
                   precoder: Optional[Precoder] = None,
                   bf_pilot_snr: Optional[float] = None) -> TrialEnsemble:
    """Data-phase matrices for every trial. ``bf_pilot_snr`` overrides
    tau_t * rho_t in beamforming training only (limit checks)."""
    precoder = Precoder(precoder or cfg.precoder)
    ch, up = draws.channels, draws.uplink
    T, Nr, N = draws.n_trials, cfg.N_r, cfg.N
    obs, jam = net.observers, net.jammers
    Mo = len(obs)

    W = build_precoder(up.g_hat_TR, precoder)
    lam = allocate_power_ut(Nr)
    pi = allocate_power_jam(net, None, cfg)
    sq = np.sqrt(lam)
    varrho = cfg.combiner_reg

    A_r = herm(ch.G_TR) @ W
    B = herm(ch.G_tm[:, obs]) @ W[:, None]
    snr = cfg.tau_t * cfg.rho_t if bf_pilot_snr is None else bf_pilot_snr
    gain = np.atleast_1d(mmse_gamma(net.beta_tm[obs], snr, 1.0))
    B_hat = gain[None, :, None, None] * (np.sqrt(snr) * B + draws.bf_noise[:, obs])

    X = up.g_hat_mr * np.sqrt(pi)[None, :, None, :]
    F = observer_jamming(ch.G_mm, X, obs, jam)

    if Mo:
        V = mmse_combiner(B_hat, varrho)
        Vp = mmse_combiner(B, varrho)
    else:
        V = Vp = np.zeros((T, 0, N, Nr), dtype=complex)

    def total(P, R):
        return np.sum(herm(P) @ R, axis=1)

    return TrialEnsemble(
        A_r=A_r,
        D=total(V, B) * sq,
        D_hat=total(V, B_hat) * sq,
        D_perf=total(Vp, B) * sq,
        J=total(V, F),
        J_perf=total(Vp, F),
        Q=total(V, V),
        Q_perf=total(Vp, Vp),
        V_obs=V.reshape(T, Mo * N, Nr),
        V_perf_obs=Vp.reshape(T, Mo * N, Nr),
        F_obs=F.reshape(T, Mo * N, Nr),
        lam=lam,
        n_observers=Mo,
    )
