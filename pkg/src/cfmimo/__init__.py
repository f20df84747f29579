"""Cell-free / user-centric mmWave massive MIMO simulator."""

__version__ = "0.1.0"

from .config import (Beamforming, CircuitModel, ConfigError, CsiModel, Mode,
                     Objective, OptimizerConfig, PathLossParams,
                     PathLossScenario, SystemConfig)

__all__ = [
    "Beamforming", "CircuitModel", "ConfigError", "CsiModel", "Mode",
    "Objective", "OptimizerConfig", "PathLossParams", "PathLossScenario",
    "SystemConfig", "__version__",
]
