"""System parameters for the cell-free surveillance simulator.

All transmit powers are stored in watts and exposed as noise-normalized
linear quantities (``rho_t``, ``rho_r``, ``rho_J``), which is the unit every
estimator and SE formula works in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

BOLTZMANN = 1.380649e-23


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


class Precoder(str, enum.Enum):
    ZF = "ZF"
    MRT = "MRT"


class CsiScenario(str, enum.Enum):
    S1_NO_CPU = "S1_noCPU"
    S2_AT_CPU = "S2_atCPU"
    PERFECT = "PERFECT"


class AssignmentStrategy(str, enum.Enum):
    BALANCED_RANDOM = "BALANCED_RANDOM"
    ALL_OBSERVE = "ALL_OBSERVE"
    ALL_JAM = "ALL_JAM"
    FIXED = "FIXED"


@dataclass(frozen=True)
class PropagationParams:
    """Three-slope path loss with log-normal shadowing (distances in km)."""

    d0: float = 0.01
    d1: float = 0.05
    L: float = 140.7
    shadow_std_db: float = 8.0

    def __post_init__(self):
        if not 0 < self.d0 < self.d1:
            raise ConfigError("propagation.d0/d1: need 0 < d0 < d1")
        if self.shadow_std_db < 0:
            raise ConfigError("propagation.shadow_std_db must be >= 0")


def noise_power_w(bandwidth_hz: float, temperature_k: float, noise_figure_db: float) -> float:
    return BOLTZMANN * temperature_k * bandwidth_hz * 10 ** (noise_figure_db / 10)


@dataclass(frozen=True)
class SystemConfig:
    # geometry / antennas
    M: int = 4
    N: int = 60
    N_t: int = 4
    N_r: int = 4
    D: float = 1.0
    # transmit powers in watts
    p_t_w: float = 0.1
    p_r_w: float = 0.1
    p_J_w: float = 1.0
    bandwidth_hz: float = 20e6
    temperature_k: float = 290.0
    noise_figure_db: float = 9.0
    # coherence block / training
    tau: int = 200
    tau_r: int = 4
    tau_t: int = 4
    # combiner regularization; None means 1/rho_t
    varrho: Optional[float] = None
    precoder: Precoder = Precoder.ZF
    csi_scenario: CsiScenario = CsiScenario.S2_AT_CPU
    assignment: AssignmentStrategy = AssignmentStrategy.BALANCED_RANDOM
    fixed_mask: Optional[Tuple[int, ...]] = None
    propagation: PropagationParams = field(default_factory=PropagationParams)
    shadowing: bool = True

    def __post_init__(self):
        # coerce enum-valued fields given as strings
        object.__setattr__(self, "precoder", _enum(Precoder, self.precoder, "precoder"))
        object.__setattr__(self, "csi_scenario", _enum(CsiScenario, self.csi_scenario, "csi_scenario"))
        object.__setattr__(self, "assignment", _enum(AssignmentStrategy, self.assignment, "assignment"))
        if self.fixed_mask is not None:
            object.__setattr__(self, "fixed_mask", tuple(int(a) for a in self.fixed_mask))
        self.validate()

    def validate(self) -> None:
        for name in ("M", "N", "N_t", "N_r"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} >= 1 required")
        if self.D <= 0:
            raise ConfigError("D > 0 required")
        for name in ("p_t_w", "p_r_w", "p_J_w"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} >= 0 required")
        if self.bandwidth_hz <= 0 or self.temperature_k <= 0:
            raise ConfigError("bandwidth_hz and temperature_k must be positive")
        if self.tau_r < self.N_r:
            raise ConfigError("tau_r >= N_r required")
        if self.tau_t < self.N_r:
            raise ConfigError("tau_t >= N_r required")
        if self.tau < self.tau_r + self.tau_t:
            raise ConfigError("tau >= tau_r + tau_t required")
        if self.varrho is not None and self.varrho <= 0:
            raise ConfigError("varrho > 0 required")
        if self.assignment is AssignmentStrategy.FIXED:
            if self.fixed_mask is None or len(self.fixed_mask) != self.M:
                raise ConfigError(f"fixed_mask must have length M={self.M}")
        if self.fixed_mask is not None and any(a not in (0, 1) for a in self.fixed_mask):
            raise ConfigError("fixed_mask entries must be 0 or 1")

    @property
    def noise_w(self) -> float:
        return noise_power_w(self.bandwidth_hz, self.temperature_k, self.noise_figure_db)

    @property
    def rho_t(self) -> float:
        return self.p_t_w / self.noise_w

    @property
    def rho_r(self) -> float:
        return self.p_r_w / self.noise_w

    @property
    def rho_J(self) -> float:
        return self.p_J_w / self.noise_w

    @property
    def combiner_reg(self) -> float:
        if self.varrho is not None:
            return self.varrho
        return 1.0 / self.rho_t if self.rho_t > 0 else 1.0

    @property
    def prelog(self) -> float:
        return 1.0 - (self.tau_t + self.tau_r) / self.tau

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    def to_flat(self) -> dict:
        """Flat ``{field: value}`` mapping with plain-Python values."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "propagation":
                for pf in fields(v):
                    out[f"propagation.{pf.name}"] = getattr(v, pf.name)
                continue
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


def _enum(cls, value, name):
    if isinstance(value, cls):
        return value
    try:
        return cls(value)
    except ValueError:
        try:
            return cls[str(value)]
        except KeyError:
            allowed = ", ".join(m.value for m in cls)
            raise ConfigError(f"{name}: unknown value {value!r} (allowed: {allowed})") from None


def db_to_linear(x_db: float) -> float:
    return 10 ** (x_db / 10)


def linear_to_db(x: float) -> float:
    return 10 * math.log10(x)
