"""Monte Carlo simulator for cell-free massive MIMO surveillance with MMSE
channel acquisition at the monitoring nodes."""

from .config import (
    AssignmentStrategy,
    ConfigError,
    CsiScenario,
    Precoder,
    PropagationParams,
    SystemConfig,
)

__all__ = [
    "AssignmentStrategy",
    "ConfigError",
    "CsiScenario",
    "Precoder",
    "PropagationParams",
    "SystemConfig",
]
__version__ = "0.1.0"
