"""Tanlock loop recursion: arctan phase detector, gain-block filter, DCO timing.

Two variants share the same recursion and differ only in how the quadrature
(cosine) channel is obtained:

* ``TDTL`` samples the input a fixed time ``tau`` *before* the in-phase
  instant and inverts it. The resulting shift ``2*pi*f_in*tau`` equals pi/2
  only at one input frequency.
* ``NDTL`` samples the input a quarter of the current divider-output period
  *after* the in-phase instant. At lock that period is exactly one input
  period, so the shift is pi/2 for every input frequency.

The NDTL quadrature rule is a reconstruction: the published block diagram of
the no-delay loop is not described in enough detail to copy, and the
quarter-period rule is the simplest local-timing scheme with the frequency
independent pi/2 property.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError
from .signal_model import TWO_PI, StimulusSpec, sample_at


class Variant(str, enum.Enum):
    TDTL = "TDTL"
    NDTL = "NDTL"

    def __str__(self):
        return self.value


class Edge(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LoopParams:
    variant: Variant = Variant.NDTL
    dco_sensitivity: float = 25.0  # Hz per volt
    dco_dc_constant: float = 1.0  # volts
    filter_gain: float = 0.135  # volts per radian
    tdtl_delay: Optional[float] = None  # seconds; None -> quarter free-running period
    f_floor: Optional[float] = None
    f_ceil: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.dco_sensitivity > 0:
            raise ConfigError("loop.dco_sensitivity must be > 0")
        if self.dco_dc_constant < 0:
            raise ConfigError("loop.dco_dc_constant must be >= 0")
        if not self.filter_gain > 0:
            raise ConfigError("loop.filter_gain must be > 0")
        if self.tdtl_delay is not None and not self.tdtl_delay > 0:
            raise ConfigError("loop.tdtl_delay must be > 0")
        lo, hi = self.floor, self.ceil
        if not 0 < lo < hi:
            raise ConfigError("DCO clamp bounds need 0 < f_floor < f_ceil")
        if not lo <= self.free_running <= hi:
            raise ConfigError(
                f"free-running DCO frequency {self.free_running:g} Hz is outside "
                f"the clamp range [{lo:g}, {hi:g}]"
            )

    @property
    def free_running(self) -> float:
        return self.dco_sensitivity * self.dco_dc_constant

    @property
    def floor(self) -> float:
        return 1e-3 * self.free_running if self.f_floor is None else self.f_floor

    @property
    def ceil(self) -> float:
        return 100.0 * self.free_running if self.f_ceil is None else self.f_ceil

    @property
    def delay(self) -> float:
        if self.tdtl_delay is not None:
            return self.tdtl_delay
        return 0.25 / self.free_running


@dataclass(frozen=True)
class TraceRecord:
    k: int
    t: float
    ratio: int
    edge: Edge
    f_dco: float
    s_sin: float
    s_cos: float
    phi: float
    v_filter: float
    saturated: bool = False
    degenerate: bool = False


@dataclass(frozen=True)
class LoopState:
    k: int
    t: float
    T_dco: float
    v: float
    phi: float
    edge: Edge = Edge.POSITIVE
    rng: Optional[np.random.Generator] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DerivedLoopQuantities:
    W: float
    K1: float


def phase_detect(s_sin: float, s_cos: float) -> tuple[float, bool]:
    """Four-quadrant arctan detector.

    Returns ``(phi, degenerate)``; ``phi`` lies in (-pi, pi] and a (0, 0)
    pair yields ``(0.0, True)``.
    """
    if s_sin == 0.0 and s_cos == 0.0:
        return 0.0, True
    phi = math.atan2(s_sin, s_cos)
    if phi == -math.pi:
        phi = math.pi
    return phi, False


def quadrature_sample_offset(variant, T_dco: float, ratio_d: int, tdtl_delay: float) -> tuple[float, int]:
    """Time offset of the cosine-channel sample and the sign applied to it."""
    if Variant(variant) is Variant.TDTL:
        return -tdtl_delay, -1
    return ratio_d * T_dco / 4.0, 1


def dco_frequency(params: LoopParams, control: float, dc_offset: float = 0.0) -> tuple[float, bool]:
    """DCO frequency ``S*(M + dc_offset + control)``, clamped.

    Returns ``(frequency, saturated)``.
    """
    f = params.dco_sensitivity * (params.dco_dc_constant + dc_offset + control)
    if f < params.floor:
        return params.floor, True
    if f > params.ceil:
        return params.ceil, True
    return f, False


def _measure(params: LoopParams, stimulus: StimulusSpec, t: float, T_dco: float,
             ratio_d: int, rng) -> tuple[float, float, float, bool]:
    offset, sign = quadrature_sample_offset(params.variant, T_dco, ratio_d, params.delay)
    s_sin = sample_at(stimulus, t, rng)
    s_cos = sign * sample_at(stimulus, t + offset, rng)
    phi, degenerate = phase_detect(s_sin, s_cos)
    return s_sin, s_cos, phi, degenerate


def initial_state(params: LoopParams, stimulus: StimulusSpec, ratio_d: int, gain: float,
                  dc_offset: float = 0.0, rng=None, t0: float = 0.0) -> tuple[LoopState, TraceRecord]:
    """Measure the first phase error at ``t0`` with zero control applied."""
    f, saturated = dco_frequency(params, 0.0, dc_offset)
    T = 1.0 / f
    s_sin, s_cos, phi, degenerate = _measure(params, stimulus, t0, T, ratio_d, rng)
    v = gain * phi
    state = LoopState(k=0, t=t0, T_dco=T, v=v, phi=phi, rng=rng)
    record = TraceRecord(0, t0, ratio_d, Edge.POSITIVE, f, s_sin, s_cos, phi, v, saturated, degenerate)
    return state, record


def loop_step(state: LoopState, params: LoopParams, stimulus: StimulusSpec, ratio_d: int,
              *, dc_offset: float = 0.0, next_gain: Optional[float] = None,
              edge: Optional[Edge] = None) -> tuple[LoopState, TraceRecord]:
    """Advance the loop by one divider-output period.

    ``state.v`` is the control voltage held over the coming period. The DCO runs
    at ``S*(M + dc_offset + state.v)`` for ``ratio_d`` of its cycles; the new
    phase error is then filtered with ``next_gain`` (defaults to the base
    filter gain) into the next held control voltage.

    A change of ``edge`` relative to ``state.edge`` shifts this one sampling
    instant by half a DCO period (later when moving to the negative edge).
    """
    edge = state.edge if edge is None else Edge(edge)
    gain = params.filter_gain if next_gain is None else next_gain
    f, saturated = dco_frequency(params, state.v, dc_offset)
    T = 1.0 / f
    interval = ratio_d * T
    if edge is not state.edge:
        interval += T / 2.0 if edge is Edge.NEGATIVE else -T / 2.0
    t = state.t + interval
    s_sin, s_cos, phi, degenerate = _measure(params, stimulus, t, T, ratio_d, state.rng)
    v = gain * phi
    new = replace(state, k=state.k + 1, t=t, T_dco=T, v=v, phi=phi, edge=edge)
    record = TraceRecord(new.k, t, ratio_d, edge, f, s_sin, s_cos, phi, v, saturated, degenerate)
    return new, record


def compute_W(omega0: float, beta: float, omega: float) -> float:
    """Normalized frequency ratio omega0 / (beta * omega)."""
    if not (omega0 > 0 and beta > 0 and omega > 0):
        raise DomainError("compute_W needs positive arguments")
    return omega0 / (beta * omega)


def compute_K1(g1: float, omega0: float, beta: float) -> float:
    """Normalized loop gain g1 * omega0 / beta."""
    if not (g1 > 0 and omega0 > 0 and beta > 0):
        raise DomainError("compute_K1 needs positive arguments")
    return g1 * omega0 / beta


def linearized_jacobian(params: LoopParams, f_in: float, phi_star: float,
                        gain: Optional[float] = None, gain_scale: float = 1.0) -> np.ndarray:
    """Jacobian of the noise-free recursion about its fixed point.

    State is ``(input phase at the sample, detector output)``, both as
    deviations from the fixed point; ``gain_scale`` is the ratio of effective
    filter gain to division ratio (1 under ratio-proportional adaptation).
    Only valid when the DCO is not clamped.
    """
    g = params.filter_gain if gain is None else gain
    a = TWO_PI * params.dco_sensitivity * g * gain_scale / f_in
    if Variant(params.variant) is Variant.NDTL:
        # phi = atan2(sin e, sin(e + psi)); psi = pi/2 * f_in * d / f_dco
        # d(phi)/d(psi) at psi = pi/2 is sin(e)^2; d(psi)/d(phi_prev) = -a/4
        b = a * math.sin(phi_star) ** 2 / 4.0
        return np.array([[1.0, -a], [1.0, -a - b]])
    delta = TWO_PI * f_in * params.delay - math.pi / 2.0
    e_star = tdtl_input_phase(phi_star, delta)
    r2 = math.sin(e_star) ** 2 + math.cos(e_star - delta) ** 2
    h = math.cos(delta) / r2
    return np.array([[1.0, -a], [h, -a * h]])


def tdtl_input_phase(phi: float, delta: float) -> float:
    """Input phase ``e`` with atan2(sin e, cos(e - delta)) == phi, |delta| < pi/2."""
    return math.atan2(math.sin(phi) * math.cos(delta),
                      math.cos(phi) - math.sin(phi) * math.sin(delta))


def linearized_factor(params: LoopParams, f_in: float, phi_star: float = 0.0,
                      gain: Optional[float] = None, gain_scale: float = 1.0) -> float:
    """Signed dominant eigenvalue of the linearized recursion."""
    eig = np.linalg.eigvals(linearized_jacobian(params, f_in, phi_star, gain, gain_scale))
    dominant = eig[np.argmax(np.abs(eig))]
    return float(np.real(dominant))
