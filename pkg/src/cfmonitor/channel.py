"""Rayleigh small-scale fading and channel matrix assembly."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import SystemConfig
from .scenario import NetworkRealization

_SQRT_HALF = np.sqrt(0.5)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples of the given shape."""
    x = rng.standard_normal((*np.atleast_1d(shape), 2))
    return (x[..., 0] + 1j * x[..., 1]) * _SQRT_HALF


def sample_complex_gaussian(rows: int, cols: int, seed_stream) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    return complex_normal(np.random.default_rng(seed_stream), (rows, cols))


@dataclass
class ChannelSet:
    """One coherence block of channels, optionally with a leading trial axis.

    ``G_mm[m, k]`` is the channel from MN ``k`` into MN ``m`` and is zero on
    the diagonal.
    """

    G_TR: np.ndarray  # (..., N_t, N_r)
    G_mr: np.ndarray  # (..., M, N, N_r)
    G_tm: np.ndarray  # (..., M, N_t, N)
    G_mm: np.ndarray  # (..., M, M, N, N)

    @property
    def batched(self) -> bool:
        return self.G_TR.ndim == 3


def _check_dims(net: NetworkRealization, cfg: SystemConfig) -> None:
    M = cfg.M
    if (net.beta_mr.shape != (M,) or net.beta_tm.shape != (M,)
            or net.beta_mm.shape != (M, M) or net.alpha.shape != (M,)):
        raise ValueError(f"network realization does not match config with M={M}")


def realize_channels(net: NetworkRealization, cfg: SystemConfig, seed_stream) -> ChannelSet:
    """Draw G = sqrt(beta) * H for every link of the deployment."""
    _check_dims(net, cfg)
    rng = np.random.default_rng(seed_stream)
    M, N, Nt, Nr = cfg.M, cfg.N, cfg.N_t, cfg.N_r
    G_TR = np.sqrt(net.beta_TR) * complex_normal(rng, (Nt, Nr))
    G_mr = np.sqrt(net.beta_mr)[:, None, None] * complex_normal(rng, (M, N, Nr))
    G_tm = np.sqrt(net.beta_tm)[:, None, None] * complex_normal(rng, (M, Nt, N))
    G_mm = np.zeros((M, M, N, N), dtype=complex)
    if M > 1:
        iu, ju = np.triu_indices(M, k=1)
        H = complex_normal(rng, (len(iu), N, N))
        blocks = np.sqrt(net.beta_mm[iu, ju])[:, None, None] * H
        G_mm[iu, ju] = blocks
        # TDD reciprocity between MN pairs
        G_mm[ju, iu] = np.swapaxes(blocks, -1, -2)
    return ChannelSet(G_TR=G_TR, G_mr=G_mr, G_tm=G_tm, G_mm=G_mm)


def stack_channels(sets: Sequence[ChannelSet]) -> ChannelSet:
    return ChannelSet(
        G_TR=np.stack([s.G_TR for s in sets]),
        G_mr=np.stack([s.G_mr for s in sets]),
        G_tm=np.stack([s.G_tm for s in sets]),
        G_mm=np.stack([s.G_mm for s in sets]),
    )
