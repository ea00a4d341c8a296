"""Precoding, power allocation, jamming and MMSE combining for the data phase."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelSet
from .config import Precoder, SystemConfig
from .scenario import NetworkRealization
from .training import UplinkEstimates, estimate_variance, herm

ZF_COND_LIMIT = 1e12


class SingularPrecoderError(np.linalg.LinAlgError):
    """ZF precoder requested for a rank-deficient channel estimate."""

    def __init__(self, msg, trials=None):
        super().__init__(msg)
        self.trials = trials


def _normalize_columns(W: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(W, axis=-2, keepdims=True)
    return W / norms


def build_precoder(g_hat_TR: np.ndarray, kind) -> np.ndarray:
    """Unit-column precoder from the UT's estimate of the UR channel.

    Works on a single ``(N_t, N_r)`` estimate or a stack of them.
    """
    kind = Precoder(kind)
    G = np.asarray(g_hat_TR)
    if kind is Precoder.MRT:
        return _normalize_columns(G)
    Nt, Nr = G.shape[-2:]
    if Nt < Nr:
        raise SingularPrecoderError(f"ZF needs N_t >= N_r (got {Nt} < {Nr})")
    gram = herm(G) @ G
    cond = np.linalg.cond(gram)
    bad = ~np.isfinite(cond) | (cond > ZF_COND_LIMIT)
    if np.any(bad):
        raise SingularPrecoderError("rank-deficient channel estimate under ZF",
                                    trials=np.flatnonzero(np.atleast_1d(bad)))
    W = herm(np.linalg.solve(gram, herm(G)))  # G (G^H G)^-1, gram is Hermitian
    return _normalize_columns(W)


def allocate_power_ut(N_r: int) -> np.ndarray:
    """Equal per-stream split: diagonal of Lambda_r."""
    if N_r < 1:
        raise ValueError("N_r >= 1 required")
    return np.full(N_r, 1.0 / N_r)


def allocate_power_jam(net: NetworkRealization, estimates: Optional[UplinkEstimates],
                       cfg: SystemConfig) -> np.ndarray:
    """Per-MN jamming power coefficients, shape ``(M, N_r)``.

    Each jamming MN splits its budget equally over the UR streams so that
    E||s_m^J||^2 = rho_J exactly; observers get zeros.
    """
    # N * gamma * sqrt(tau rho) * beta is E||g_hat_{mr,n}||^2
    if estimates is None:
        v = np.atleast_1d(estimate_variance(net.beta_mr, cfg.tau_r, cfg.rho_r))
    else:
        v = np.atleast_1d(estimates.gamma_mr) * np.sqrt(cfg.tau_r * cfg.rho_r) * net.beta_mr
    jam = net.alpha == 0
    pi = np.zeros((net.M, cfg.N_r))
    dead = jam & (v <= 0)
    if np.any(dead):
        warnings.warn(f"zero UR channel estimate at jamming MN(s) {np.flatnonzero(dead).tolist()};"
                      " jamming power set to 0", RuntimeWarning, stacklevel=2)
    ok = jam & (v > 0)
    pi[ok] = 1.0 / (cfg.N_r * cfg.N * v[ok])[:, None]
    return pi


def mmse_combiner(B_hat: np.ndarray, varrho: float) -> np.ndarray:
    """V = B_hat (B_hat^H B_hat + varrho I)^-1, batched over leading axes."""
    if varrho <= 0:
        raise ValueError("varrho > 0 required")
    Nr = B_hat.shape[-1]
    gram = herm(B_hat) @ B_hat + varrho * np.eye(Nr)
    return herm(np.linalg.solve(gram, herm(B_hat)))


@dataclass
class MonitoringLinkMatrices:
    A_r: np.ndarray  # (..., N_r, N_r)
    B: np.ndarray  # (..., M, N, N_r)
    D: np.ndarray  # (..., N_r, N_r)
    F_UR_J: np.ndarray  # (..., N_r, N_r)
    F_m_J: np.ndarray  # (..., M, N, N_r)


def jamming_precoders(g_hat_mr: np.ndarray, pi: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """(1 - alpha_m) G_hat_mr Pi_mr^{1/2}, the power-free MR jamming precoders."""
    return g_hat_mr * (np.sqrt(pi) * (1 - alpha)[:, None])[..., None, :]


def assemble_link_matrices(channels: ChannelSet, estimates: UplinkEstimates, W: np.ndarray,
                           lam: np.ndarray, pi: np.ndarray, V: np.ndarray,
                           alpha: np.ndarray) -> MonitoringLinkMatrices:
    """Effective matrices of the data phase.

    The jamming matrices carry no sqrt(rho_J); the SE layer applies rho_J
    once to their covariances.
    """
    alpha = np.asarray(alpha)
    M = len(alpha)
    if channels.G_mr.shape[-3] != M or V.shape[-3] != M or pi.shape[0] != M:
        raise ValueError("per-MN inputs disagree on M")
    if W.shape[-2:] != (channels.G_TR.shape[-2], channels.G_TR.shape[-1]):
        raise ValueError("precoder shape does not match G_TR")
    A_r = herm(channels.G_TR) @ W
    B = herm(channels.G_tm) @ W[..., None, :, :]
    X = jamming_precoders(estimates.g_hat_mr, pi, alpha)
    F_UR_J = np.sum(herm(channels.G_mr) @ X, axis=-3)
    # F_m = sum_k G_mk^H X_k ; G_mm has zero diagonal blocks
    F_m_J = np.einsum("...mkji,...kjr->...mir", np.conj(channels.G_mm), X)
    sq = np.sqrt(lam)
    D = np.sum(alpha[:, None, None] * (herm(V) @ B), axis=-3) * sq
    return MonitoringLinkMatrices(A_r=A_r, B=B, D=D, F_UR_J=F_UR_J, F_m_J=F_m_J)
