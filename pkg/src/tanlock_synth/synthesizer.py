"""Hybrid dual-modulus divider, edge-selecting FSM, loop adaptation and the
closed-loop synthesizer run.

Naming note: ``ratio_int`` is the division ratio itself. A hardware divider
programmed with DIV value ``P`` divides by ``P + 1``, so a ÷4 synthesizer
has ``P1 = P2 = 3`` but ``ratio_int = 4`` here.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator, Optional

from .errors import ConfigError, DomainError
from .loop_core import (
    DerivedLoopQuantities,
    Edge,
    LoopParams,
    compute_K1,
    compute_W,
    initial_state,
    loop_step,
)
from .signal_model import TWO_PI, StimulusSpec, make_rng
from .trace import Trace


def parse_fraction(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    if "." in text or "e" in text.lower():
        # decimal literals like 0.2 are taken at face value, not as binary floats
        return Fraction(text)
    return Fraction(int(text))


@dataclass(frozen=True)
class DividerConfig:
    ratio_int: int = 4
    ratio_frac: Fraction = Fraction(0)
    edge: Edge = Edge.POSITIVE

    def __post_init__(self):
        object.__setattr__(self, "ratio_frac", parse_fraction(self.ratio_frac))
        object.__setattr__(self, "edge", Edge(self.edge))
        if int(self.ratio_int) != self.ratio_int or self.ratio_int < 1:
            raise ConfigError("divider.ratio_int must be an integer >= 1")
        if not 0 <= self.ratio_frac < 1:
            raise ConfigError(f"divider.ratio_frac must lie in [0, 1), got {self.ratio_frac}")

    @property
    def beta_avg(self) -> Fraction:
        return self.ratio_int + self.ratio_frac


@dataclass(frozen=True)
class DividerState:
    accumulator: Fraction = Fraction(0)
    cycle_index: int = 0
    last_ratio: Optional[int] = None


def next_ratio(state: DividerState, config: DividerConfig) -> tuple[int, DividerState]:
    """One divider cycle: add the fraction, carry selects the N+1 modulus."""
    acc = state.accumulator + config.ratio_frac
    ratio = config.ratio_int
    if acc >= 1:
        acc -= 1
        ratio += 1
    return ratio, DividerState(acc, state.cycle_index + 1, ratio)


def carry_sequence(ratio_int: int, num: int, den: int, count: int) -> Iterator[int]:
    """Integer-accumulator form of :func:`next_ratio` for long sequences."""
    acc = 0
    for _ in range(count):
        acc += num
        if acc >= den:
            acc -= den
            yield ratio_int + 1
        else:
            yield ratio_int


class GainRule(str, enum.Enum):
    BETA = "beta"
    BETA_PLUS_ONE = "beta_plus_one"


class Tracking(str, enum.Enum):
    INSTANTANEOUS = "instantaneous"
    AVERAGE = "average"


@dataclass(frozen=True)
class AdaptationConfig:
    gain_rule: GainRule = GainRule.BETA
    enabled: bool = True
    tracking: Tracking = Tracking.INSTANTANEOUS

    def __post_init__(self):
        object.__setattr__(self, "gain_rule", GainRule(self.gain_rule))
        object.__setattr__(self, "tracking", Tracking(self.tracking))


def adapt(beta_avg, params: LoopParams, config: AdaptationConfig) -> tuple[float, float]:
    """Return ``(effective_gain, dc_offset)`` restoring the operating point.

    The DC offset moves the DCO centre from ``S*M`` to ``beta*S*M``.
    """
    beta = float(beta_avg)
    if beta < 1:
        raise DomainError(f"division ratio must be >= 1, got {beta_avg}")
    if not config.enabled:
        return params.filter_gain, 0.0
    mult = beta + 1.0 if config.gain_rule is GainRule.BETA_PLUS_ONE else beta
    return params.filter_gain * mult, (beta - 1.0) * params.dco_dc_constant


@dataclass(frozen=True)
class OperatingPoint:
    pre: DerivedLoopQuantities
    post: DerivedLoopQuantities


def restored_operating_point(beta_avg, params: LoopParams, stimulus: StimulusSpec,
                             config: AdaptationConfig = AdaptationConfig()) -> OperatingPoint:
    """W and K1 before and after adaptation, at the stepped input frequency."""
    beta = float(beta_avg)
    omega0 = TWO_PI * params.free_running
    omega = TWO_PI * stimulus.stepped_frequency
    pre = DerivedLoopQuantities(compute_W(omega0, beta, omega),
                                compute_K1(params.filter_gain, omega0, beta))
    gain, dc = adapt(beta, params, config)
    centre = TWO_PI * params.dco_sensitivity * (params.dco_dc_constant + dc)
    post = DerivedLoopQuantities(compute_W(centre, beta, omega), compute_K1(gain, centre, beta))
    return OperatingPoint(pre, post)


@dataclass(frozen=True)
class FsmConfig:
    window: int = 8
    threshold: float = 1e-3

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("fsm window must be >= 1")
        if self.threshold < 0:
            raise ConfigError("fsm threshold must be >= 0")


@dataclass(frozen=True)
class FsmState:
    selected_edge: Edge = Edge.POSITIVE
    step_sign_estimate: str = "unknown"
    history: tuple = ()


def fsm_select(filter_output: float, div_pos: int, div_neg: int, state: FsmState,
               config: FsmConfig = FsmConfig()) -> tuple[int, FsmState]:
    """Pick the divider that drives sampling from the sensed step sign.

    A positive step selects the negative-edge divider; a negative step the
    positive-edge one. Inside the dead band the previous choice is kept.
    """
    history = (state.history + (filter_output,))[-config.window:]
    mean = sum(history) / len(history)
    if mean > config.threshold:
        sign, edge = "positive", Edge.NEGATIVE
    elif mean < -config.threshold:
        sign, edge = "negative", Edge.POSITIVE
    else:
        sign, edge = state.step_sign_estimate, state.selected_edge
    ratio = div_neg if edge is Edge.NEGATIVE else div_pos
    return ratio, FsmState(edge, sign, history)


class Synthesizer:
    """Closed-loop tanlock synthesizer.

    Each cycle the accumulator supplies the division ratio, the FSM picks
    the triggering edge, and the adaptation DC offset and gain follow the
    division ratio (instantaneous tracking) or its long-run mean.
    """

    def __init__(self, params: LoopParams, divider: DividerConfig = DividerConfig(),
                 adaptation: AdaptationConfig = AdaptationConfig(), fsm: FsmConfig = FsmConfig(),
                 use_fsm: bool = True):
        self.params = params
        self.divider = divider
        self.adaptation = adaptation
        self.fsm = fsm
        self.use_fsm = use_fsm
        self._avg = adapt(divider.beta_avg, params, adaptation)

    def _adapt(self, ratio):
        if self.adaptation.tracking is Tracking.AVERAGE:
            return self._avg
        return adapt(ratio, self.params, self.adaptation)

    def run(self, stimulus: StimulusSpec, n_samples: int, rng=None) -> Trace:
        if n_samples < 1:
            raise ConfigError("run length must be >= 1")
        if rng is None and stimulus.snr_db is not None:
            rng = make_rng(stimulus.seed)
        dstate = DividerState()
        ratio, dstate = next_ratio(dstate, self.divider)
        gain, dc = self._adapt(ratio)
        state, record = initial_state(self.params, stimulus, ratio, gain, dc, rng)
        state = replace(state, edge=self.divider.edge)
        record = replace(record, edge=self.divider.edge)
        fstate = FsmState(selected_edge=self.divider.edge)
        trace = Trace([record])
        for _ in range(n_samples - 1):
            edge = None
            if self.use_fsm:
                ratio, fstate = fsm_select(state.v, ratio, ratio, fstate, self.fsm)
                edge = fstate.selected_edge
            nxt, dstate = next_ratio(dstate, self.divider)
            next_gain, next_dc = self._adapt(nxt)
            state, record = loop_step(state, self.params, stimulus, ratio, dc_offset=dc,
                                      next_gain=next_gain, edge=edge)
            trace.append(record)
            ratio, gain, dc = nxt, next_gain, next_dc
        return trace


def steady_phase(params: LoopParams, f_in: float, gain_scale: float = 1.0) -> float:
    """Fixed-point detector output for a locked loop at input frequency ``f_in``.

    Valid under ratio-proportional adaptation, where every divider-output
    period equals ``1 / (f_free + S * G1 * gain_scale * phi)``.
    """
    return (f_in - params.free_running) / (params.dco_sensitivity * params.filter_gain * gain_scale)
