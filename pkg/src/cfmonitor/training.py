"""Uplink pilot training and beamforming training with MMSE estimation.

Pilot matrices are never formed: with orthonormal pilots the projection onto
each pilot is lossless, so the post-projection observations

    y_n = sqrt(tau * rho) * g_n + w_n,   w_n ~ CN(0, I)

are simulated directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, complex_normal
from .config import SystemConfig
from .scenario import NetworkRealization


def herm(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def mmse_gamma(beta, tau, rho):
    """Scalar LMMSE gain sqrt(tau rho) beta / (tau rho beta + 1)."""
    snr = np.asarray(tau, dtype=float) * np.asarray(rho, dtype=float)
    beta = np.asarray(beta, dtype=float)
    g = np.sqrt(snr) * beta / (snr * beta + 1.0)
    return float(g) if g.ndim == 0 else g


def estimate_variance(beta, tau, rho):
    """Per-entry variance of the MMSE estimate, gamma * sqrt(tau rho) * beta."""
    return mmse_gamma(beta, tau, rho) * np.sqrt(tau * rho) * np.asarray(beta, dtype=float)


def uplink_pilot_project(G: np.ndarray, tau_r, rho_r, noise: np.ndarray) -> np.ndarray:
    """Projected pilot observations, one column per UR antenna."""
    if tau_r * rho_r <= 0:
        raise ValueError("tau_r * rho_r must be positive")
    return np.sqrt(tau_r * rho_r) * G + noise


def estimate_uplink(projected: np.ndarray, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    # broadcast a per-node gain over the trailing (antenna, stream) axes
    return gamma.reshape(gamma.shape + (1, 1)) * projected if gamma.ndim else gamma * projected


@dataclass
class UplinkEstimates:
    g_hat_TR: np.ndarray  # (..., N_t, N_r)
    g_hat_mr: np.ndarray  # (..., M, N, N_r)
    gamma_TR: float
    gamma_mr: np.ndarray  # (M,)


def uplink_training(channels: ChannelSet, net: NetworkRealization, cfg: SystemConfig,
                    rng: np.random.Generator) -> UplinkEstimates:
    """MMSE estimates of the UR channels at the UT and at every MN."""
    gamma_TR = mmse_gamma(net.beta_TR, cfg.tau_r, cfg.rho_r)
    gamma_mr = np.atleast_1d(mmse_gamma(net.beta_mr, cfg.tau_r, cfg.rho_r))
    y_TR = uplink_pilot_project(channels.G_TR, cfg.tau_r, cfg.rho_r,
                                complex_normal(rng, channels.G_TR.shape))
    y_mr = uplink_pilot_project(channels.G_mr, cfg.tau_r, cfg.rho_r,
                                complex_normal(rng, channels.G_mr.shape))
    return UplinkEstimates(
        g_hat_TR=gamma_TR * y_TR,
        g_hat_mr=gamma_mr[:, None, None] * y_mr,
        gamma_TR=gamma_TR,
        gamma_mr=gamma_mr,
    )


def beamforming_pilot_project(G: np.ndarray, W: np.ndarray, tau_t, rho_t, noise: np.ndarray) -> np.ndarray:
    """Transposed projected observations sqrt(tau_t rho_t) G^H W + noise.

    ``G`` is the transmitter-to-receiver channel with the UT antennas on the
    row axis, so the result has one row per receive antenna and one column
    per precoded stream.
    """
    if G.shape[-2] != W.shape[-2]:
        raise ValueError(f"channel has {G.shape[-2]} UT antennas, precoder has {W.shape[-2]}")
    return np.sqrt(tau_t * rho_t) * (herm(G) @ W) + noise


def _check_psd(C: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    C = np.asarray(C, dtype=complex)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("prior covariance must be square")
    if not np.allclose(C, herm(C), atol=tol * max(1.0, np.abs(C).max())):
        raise ValueError("prior covariance must be Hermitian")
    C = 0.5 * (C + herm(C))
    scale = max(1.0, np.abs(C).max())
    if np.linalg.eigvalsh(C).min() < -tol * scale:
        raise ValueError("prior covariance must be positive semi-definite")
    return C


def effective_channel_gain(prior_cov: np.ndarray, tau_t, rho_t) -> np.ndarray:
    """LMMSE gain sqrt(tau rho) C (tau rho C + I)^-1 for zero-mean priors."""
    C = _check_psd(prior_cov)
    snr = tau_t * rho_t
    # C and (snr C + I) commute, so the product is Hermitian
    return np.sqrt(snr) * np.linalg.solve(snr * C + np.eye(len(C)), C)


def estimate_effective_channel(y_p: np.ndarray, prior_mean: np.ndarray, prior_cov: np.ndarray,
                               tau_t, rho_t) -> np.ndarray:
    """MMSE estimate of one effective-channel vector b_p from its observation y_p."""
    K = effective_channel_gain(prior_cov, tau_t, rho_t)
    mean = np.asarray(prior_mean, dtype=complex)
    return mean + K @ (np.asarray(y_p) - np.sqrt(tau_t * rho_t) * mean)


def estimate_effective_channels(Y_T: np.ndarray, prior_cov: np.ndarray, tau_t, rho_t) -> np.ndarray:
    """Row-wise MMSE estimate of B from its transposed observation ``Y_T``.

    Row ``p`` of ``Y_T`` observes ``b_p^H``; with a zero prior mean the
    estimate is ``Y_T K^H`` for the gain ``K`` of the column-vector form.
    """
    K = effective_channel_gain(prior_cov, tau_t, rho_t)
    return Y_T @ herm(K)


@dataclass
class EffectiveChannelEstimate:
    B_hat: np.ndarray  # (..., M, N, N_r)
    gain: np.ndarray  # (M,) scalar gains of the isotropic prior


def beamforming_training(channels: ChannelSet, W: np.ndarray, net: NetworkRealization,
                         cfg: SystemConfig, noise: np.ndarray) -> EffectiveChannelEstimate:
    """Estimate every MN's effective channel B_m = G_tm^H W.

    The MNs assume a zero-mean prior with covariance beta_tm * I. Because
    each precoder column is unit-norm and has a uniformly random phase that
    is independent of G_tm, this is the exact second-order prior for both
    ZF and MRT.
    """
    Y_T = beamforming_pilot_project(channels.G_tm, W[..., None, :, :], cfg.tau_t, cfg.rho_t, noise)
    gain = np.atleast_1d(mmse_gamma(net.beta_tm, cfg.tau_t, cfg.rho_t))
    return EffectiveChannelEstimate(B_hat=gain[:, None, None] * Y_T, gain=gain)
