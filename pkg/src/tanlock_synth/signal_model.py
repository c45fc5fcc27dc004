"""Input sinusoid with a single frequency step and optional AWGN.

The instantaneous phase is kept as a closed-form piecewise-linear function of
time, so the loop can request samples at arbitrary, non-uniform instants
without any integration drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class StimulusSpec:
    base_frequency: float = 25.0
    step_value: float = 0.0
    step_scale: Optional[float] = None  # Hz per volt; None -> base_frequency
    step_time: float = 0.0
    amplitude: float = 1.0
    initial_phase: float = 0.0
    snr_db: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not self.base_frequency > 0:
            raise ConfigError("stimulus.base_frequency must be > 0")
        if not self.amplitude > 0:
            raise ConfigError("stimulus.amplitude must be > 0")
        if self.step_time < 0:
            raise ConfigError("stimulus.step_time must be >= 0")
        if not -math.pi < self.initial_phase <= math.pi:
            raise ConfigError("stimulus.initial_phase must lie in (-pi, pi]")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("stimulus.seed must be a 64-bit unsigned integer")
        if self.stepped_frequency <= 0:
            raise ConfigError(
                f"stepped input frequency {self.stepped_frequency:g} Hz is not positive"
            )

    @property
    def kappa(self) -> float:
        return self.base_frequency if self.step_scale is None else self.step_scale

    @property
    def stepped_frequency(self) -> float:
        return self.base_frequency + self.kappa * self.step_value

    @property
    def noise_sigma(self) -> float:
        if self.snr_db is None:
            return 0.0
        return math.sqrt(self.amplitude**2 / (2.0 * 10.0 ** (self.snr_db / 10.0)))


def input_frequency(spec: StimulusSpec, t: float) -> float:
    """Input frequency in Hz at time ``t``."""
    if t < spec.step_time:
        return spec.base_frequency
    f = spec.stepped_frequency
    if f <= 0:
        raise ConfigError(f"input frequency {f:g} Hz after the step is not positive")
    return f


def input_phase(spec: StimulusSpec, t: float) -> float:
    """Unwrapped input phase at ``t``.

    Negative ``t`` is allowed: the input exists before the simulation clock
    starts, which the delayed TDTL channel needs at start-up.
    """
    cycles = spec.base_frequency * t
    if t > spec.step_time:
        cycles += spec.kappa * spec.step_value * (t - spec.step_time)
    # reduce the cycle count before scaling to keep the phase well conditioned
    cycles -= math.floor(cycles)
    return spec.initial_phase + TWO_PI * cycles


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def sample_at(spec: StimulusSpec, t: float, rng: Optional[np.random.Generator] = None) -> float:
    """Sample the (possibly noisy) input at instant ``t``.

    Noise is drawn from ``rng`` once per call; it is white across sampling
    instants. A noisy spec requires an rng.
    """
    value = spec.amplitude * math.sin(input_phase(spec, t))
    if spec.snr_db is not None:
        if rng is None:
            raise ConfigError("a noisy stimulus needs a random generator")
        value += rng.normal(0.0, spec.noise_sigma)
    return value
