"""Simulator of a Rydberg-blockade single-photon source in a thermal vapor cell."""

from .config import PhysicalConfig, dump_config, load_config
from .ensemble import (AtomSet, filter_by_rabi, polyfit_channels, sample_boltzmann,
                       sample_filtered, sample_liad)
from .pulses import PulseSequence, default_pulses

__version__ = "0.1.0"

__all__ = [
    "AtomSet", "PhysicalConfig", "PulseSequence", "default_pulses", "dump_config",
    "filter_by_rabi", "load_config", "polyfit_channels", "sample_boltzmann",
    "sample_filtered", "sample_liad", "__version__",
]
