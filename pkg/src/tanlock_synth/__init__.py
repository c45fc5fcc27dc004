"""Discrete-time tanlock loop (TDTL / NDTL) frequency synthesizer simulator."""

__version__ = "0.1.0"

from .analysis import (
    JitterReport,
    LockReport,
    SweepResult,
    detect_lock,
    jitter_rms,
    lock_range_sweep,
    phase_plane,
    snr_jitter_sweep,
)
from .loop_core import Edge, LoopParams, Variant
from .scenario import Scenario, load_scenario
from .signal_model import StimulusSpec
from .synthesizer import AdaptationConfig, DividerConfig, Synthesizer
from .trace import Trace

__all__ = [
    "AdaptationConfig", "DividerConfig", "Edge", "JitterReport", "LockReport", "LoopParams",
    "Scenario", "StimulusSpec", "SweepResult", "Synthesizer", "Trace", "Variant",
    "detect_lock", "jitter_rms", "load_scenario", "lock_range_sweep", "phase_plane",
    "snr_jitter_sweep",
]
