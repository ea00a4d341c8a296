"""Node placement on a wrap-around square, large-scale fading and mode assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AssignmentStrategy, ConfigError, PropagationParams, SystemConfig


@dataclass(frozen=True)
class NetworkRealization:
    """One deployment: positions (km), large-scale gains and observe/jam modes.

    ``alpha[m] == 1`` means MN ``m`` observes, ``0`` means it jams.
    """

    mn_pos: np.ndarray  # (M, 2)
    ut_pos: np.ndarray  # (2,)
    ur_pos: np.ndarray  # (2,)
    beta_TR: float
    beta_mr: np.ndarray  # (M,)
    beta_tm: np.ndarray  # (M,)
    beta_mm: np.ndarray  # (M, M), symmetric, zero diagonal
    alpha: np.ndarray  # (M,) int

    @property
    def M(self) -> int:
        return len(self.alpha)

    @property
    def observers(self) -> np.ndarray:
        return np.flatnonzero(self.alpha == 1)

    @property
    def jammers(self) -> np.ndarray:
        return np.flatnonzero(self.alpha == 0)


def wrap_distance(p, q, D: float) -> float:
    """Shortest distance between ``p`` and ``q`` on a ``D x D`` torus."""
    d = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    d = np.minimum(d, D - d)
    return float(np.hypot(d[..., 0], d[..., 1]))


def pairwise_wrap_distance(a: np.ndarray, b: np.ndarray, D: float) -> np.ndarray:
    d = np.abs(a[:, None, :] - b[None, :, :])
    d = np.minimum(d, D - d)
    return np.hypot(d[..., 0], d[..., 1])


def path_loss_db(distance, params: PropagationParams = PropagationParams()):
    """Three-slope path loss in dB (positive number, larger = weaker)."""
    d = np.asarray(distance, dtype=float)
    far = params.L + 35 * np.log10(np.maximum(d, params.d1))
    mid = params.L + 15 * np.log10(params.d1) + 20 * np.log10(np.clip(d, params.d0, params.d1))
    return np.where(d > params.d1, far, mid)


def large_scale_fading(distance, params: PropagationParams = PropagationParams(), shadow_draw=0.0):
    """Linear large-scale gain; shadowing only applies beyond ``d1``."""
    d = np.asarray(distance, dtype=float)
    z = np.where(d > params.d1, params.shadow_std_db * np.asarray(shadow_draw, dtype=float), 0.0)
    beta = 10 ** (-(path_loss_db(d, params) + z) / 10)
    return float(beta) if beta.ndim == 0 else beta


def assign_modes(M: int, strategy, seed=None, mask=None) -> np.ndarray:
    """Observe/jam assignment vector (1 = observe)."""
    if M < 1:
        raise ConfigError("M >= 1 required")
    strategy = AssignmentStrategy(strategy)
    if strategy is AssignmentStrategy.ALL_OBSERVE:
        return np.ones(M, dtype=int)
    if strategy is AssignmentStrategy.ALL_JAM:
        return np.zeros(M, dtype=int)
    if strategy is AssignmentStrategy.FIXED:
        if mask is None or len(mask) != M:
            raise ConfigError(f"fixed_mask must have length M={M}")
        return np.asarray(mask, dtype=int).copy()
    rng = np.random.default_rng(seed)
    alpha = np.zeros(M, dtype=int)
    alpha[rng.choice(M, size=(M + 1) // 2, replace=False)] = 1
    return alpha


def sample_geometry(config: SystemConfig, seed) -> NetworkRealization:
    """Uniform placement of M MNs, UT and UR plus shadowed large-scale fading."""
    config.validate()
    rng = np.random.default_rng(seed)
    M, D, prop = config.M, config.D, config.propagation
    pos = rng.uniform(0.0, D, size=(M + 2, 2))
    mn_pos, ut_pos, ur_pos = pos[:M], pos[M], pos[M + 1]

    # one shadowing draw per link; MN-MN draws are shared by both directions
    z = rng.standard_normal(2 * M + 1 + M * (M - 1) // 2)
    if not config.shadowing:
        z[:] = 0.0
    z_tr, z_mr, z_tm, z_mm = z[0], z[1:M + 1], z[M + 1:2 * M + 1], z[2 * M + 1:]

    beta_TR = large_scale_fading(wrap_distance(ut_pos, ur_pos, D), prop, z_tr)
    beta_mr = large_scale_fading(pairwise_wrap_distance(mn_pos, ur_pos[None], D)[:, 0], prop, z_mr)
    beta_tm = large_scale_fading(pairwise_wrap_distance(mn_pos, ut_pos[None], D)[:, 0], prop, z_tm)
    beta_mm = np.zeros((M, M))
    if M > 1:
        iu = np.triu_indices(M, k=1)
        dmm = pairwise_wrap_distance(mn_pos, mn_pos, D)[iu]
        beta_mm[iu] = large_scale_fading(dmm, prop, z_mm)
        beta_mm = beta_mm + beta_mm.T

    alpha = assign_modes(M, config.assignment, rng, config.fixed_mask)
    return NetworkRealization(
        mn_pos=mn_pos, ut_pos=ut_pos, ur_pos=ur_pos,
        beta_TR=float(beta_TR), beta_mr=np.atleast_1d(beta_mr), beta_tm=np.atleast_1d(beta_tm),
        beta_mm=beta_mm, alpha=alpha,
    )
