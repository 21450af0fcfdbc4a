"""FMCW mmWave radar simulation and 3-D drone localization pipelines."""

from uavradar.radar import (
    DataCube,
    DerivedParams,
    PositionEstimate,
    RadarConfig,
    VirtualArrayLayout,
    default_layout,
    derived_params,
    freq_to_range,
    phase_to_angle,
    phase_to_velocity,
    range_to_beat_freq,
)

__version__ = "0.1.0"

__all__ = [
    "DataCube",
    "DerivedParams",
    "PositionEstimate",
    "RadarConfig",
    "VirtualArrayLayout",
    "default_layout",
    "derived_params",
    "freq_to_range",
    "phase_to_angle",
    "phase_to_velocity",
    "range_to_beat_freq",
    "__version__",
]
