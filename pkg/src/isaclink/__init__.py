"""isaclink: link-level simulator for full-duplex PC-FMCW joint radar-communication.

One waveform carries both a linear-FM radar sweep and a phase-code payload; the
package provides the two receiver chains (delay-Doppler radar processing and
pilot-aided demodulation), closed-form interference-dispersion oracles, five
interference-cancellation receiver structures plus dynamic track-fed variants,
and a Monte-Carlo harness with a CLI.
"""

from .waveform import (
    Constellation,
    ComplexSignal,
    SymbolFrame,
    WaveformParams,
    constellation,
    map_bits,
)
from .channel import PropagationPath, Scenario, VehicleState, apply_path, superpose

__version__ = "0.1.0"

__all__ = [
    "Constellation",
    "ComplexSignal",
    "SymbolFrame",
    "WaveformParams",
    "constellation",
    "map_bits",
    "PropagationPath",
    "Scenario",
    "VehicleState",
    "apply_path",
    "superpose",
    "__version__",
]
