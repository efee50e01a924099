"""Time-shared FSO telemetry network: simulator, delay analysis, service."""

__version__ = "0.1.0"

from .model import (ClusterSpec, ConfigError, Mode, Partition, RackClass,
                    Schedule, ServiceModel, TrafficProfile, ValidatedConfig,
                    validate_config)

__all__ = [
    "ClusterSpec", "ConfigError", "Mode", "Partition", "RackClass",
    "Schedule", "ServiceModel", "TrafficProfile", "ValidatedConfig",
    "validate_config", "__version__",
]
