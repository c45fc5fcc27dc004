"""Flat ``key = value`` scenario files.

One assignment per line, ``#`` starts a comment, section keys are dotted
(``loop.filter_gain``). ``none`` clears an optional value. Unknown keys are
rejected. Every key and its default is listed in ``KEYS``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .loop_core import Edge, LoopParams, Variant
from .signal_model import StimulusSpec
from .synthesizer import AdaptationConfig, DividerConfig, FsmConfig, parse_fraction


class ScenarioError(ConfigError):
    def __init__(self, message, line: Optional[int] = None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class AnalysisConfig:
    epsilon: float = 0.01
    hold: int = 100
    jitter_window: str = "trailing_half"  # or "START:STOP"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("analysis.epsilon must be > 0")
        if self.hold < 1:
            raise ConfigError("analysis.hold must be >= 1")
        parse_window(self.jitter_window)


@dataclass(frozen=True)
class CompareConfig:
    snr_min: float = 0.0
    snr_max: float = 30.0
    snr_step: float = 5.0
    trials: int = 10
    samples: int = 2000

    def __post_init__(self):
        if not self.snr_step > 0 or self.snr_max < self.snr_min:
            raise ConfigError("compare SNR grid needs snr_step > 0 and snr_max >= snr_min")
        if self.trials < 1:
            raise ConfigError("compare.trials must be >= 1")
        if self.samples < 4:
            raise ConfigError("compare.samples must be >= 4")

    def grid(self) -> list:
        n = int(math.floor((self.snr_max - self.snr_min) / self.snr_step + 1e-9)) + 1
        return [round(self.snr_min + i * self.snr_step, 10) for i in range(n)]


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    loop: LoopParams = field(default_factory=LoopParams)
    stimulus: StimulusSpec = field(default_factory=StimulusSpec)
    divider: DividerConfig = field(default_factory=DividerConfig)
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    fsm: FsmConfig = field(default_factory=FsmConfig)
    fsm_enabled: bool = True
    run_length: int = 5000
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)

    def __post_init__(self):
        if self.run_length < self.analysis.hold:
            raise ConfigError(
                f"run_length ({self.run_length}) must be >= analysis.hold ({self.analysis.hold})"
            )

    def to_dict(self) -> dict:
        return {key: _plain(value) for key, value in flatten(self).items()}


def parse_window(text: str):
    if text == "trailing_half":
        return None
    try:
        a, b = text.split(":")
        start, stop = int(a), int(b)
    except ValueError:
        raise ConfigError(f"jitter window must be 'trailing_half' or 'START:STOP', got {text!r}")
    if not 0 <= start < stop:
        raise ConfigError("jitter window needs 0 <= START < STOP")
    return start, stop


def _opt(conv):
    def inner(text):
        return None if text.lower() == "none" else conv(text)
    return inner


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    return int(text, 0)


# key -> (section, field, converter)
KEYS = {
    "name": (None, "name", str),
    "run_length": (None, "run_length", _int),
    "loop.variant": ("loop", "variant", lambda s: Variant(s.upper())),
    "loop.dco_sensitivity": ("loop", "dco_sensitivity", float),
    "loop.dco_dc_constant": ("loop", "dco_dc_constant", float),
    "loop.filter_gain": ("loop", "filter_gain", float),
    "loop.tdtl_delay": ("loop", "tdtl_delay", _opt(float)),
    "loop.f_floor": ("loop", "f_floor", _opt(float)),
    "loop.f_ceil": ("loop", "f_ceil", _opt(float)),
    "stimulus.base_frequency": ("stimulus", "base_frequency", float),
    "stimulus.step_value": ("stimulus", "step_value", float),
    "stimulus.step_scale": ("stimulus", "step_scale", _opt(float)),
    "stimulus.step_time": ("stimulus", "step_time", float),
    "stimulus.amplitude": ("stimulus", "amplitude", float),
    "stimulus.initial_phase": ("stimulus", "initial_phase", float),
    "stimulus.snr_db": ("stimulus", "snr_db", _opt(float)),
    "stimulus.seed": ("stimulus", "seed", _int),
    "divider.ratio_int": ("divider", "ratio_int", _int),
    "divider.ratio_frac": ("divider", "ratio_frac", parse_fraction),
    "divider.edge": ("divider", "edge", lambda s: Edge(s.lower())),
    "adaptation.gain_rule": ("adaptation", "gain_rule", str),
    "adaptation.enabled": ("adaptation", "enabled", _bool),
    "adaptation.tracking": ("adaptation", "tracking", str),
    "fsm.enabled": (None, "fsm_enabled", _bool),
    "fsm.window": ("fsm", "window", _int),
    "fsm.threshold": ("fsm", "threshold", float),
    "analysis.epsilon": ("analysis", "epsilon", float),
    "analysis.hold": ("analysis", "hold", _int),
    "analysis.jitter_window": ("analysis", "jitter_window", str),
    "compare.snr_min": ("compare", "snr_min", float),
    "compare.snr_max": ("compare", "snr_max", float),
    "compare.snr_step": ("compare", "snr_step", float),
    "compare.trials": ("compare", "trials", _int),
    "compare.samples": ("compare", "samples", _int),
}

SECTIONS = {f.name for f in fields(Scenario)} - {"name", "run_length", "fsm_enabled"}


def build_scenario(values: dict) -> Scenario:
    """Assemble a validated Scenario from already-converted ``KEYS`` values."""
    base = Scenario()
    top = {}
    sections = {name: {} for name in SECTIONS}
    for key, value in values.items():
        section, fname, _ = KEYS[key]
        (top if section is None else sections[section])[fname] = value
    kwargs = dict(top)
    for name, overrides in sections.items():
        kwargs[name] = replace(getattr(base, name), **overrides) if overrides else getattr(base, name)
    return Scenario(**{**{f.name: getattr(base, f.name) for f in fields(Scenario)}, **kwargs})


def parse_scenario(text: str, path=None) -> Scenario:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ScenarioError(f"unknown key {key!r}", lineno, path)
        if key in values:
            raise ScenarioError(f"duplicate key {key!r}", lineno, path)
        try:
            values[key] = KEYS[key][2](value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioError(f"bad value for {key}: {exc}", lineno, path) from None
    try:
        return build_scenario(values)
    except ValueError as exc:
        raise ScenarioError(f"invalid scenario: {exc}", path=path) from None


def shipped_scenarios() -> list:
    folder = resources.files(__package__) / "scenarios"
    return sorted(p.name for p in folder.iterdir() if p.name.endswith(".scn"))


def resolve_path(path) -> Path:
    """A file path, or the name of a shipped scenario (``fig7`` / ``fig7.scn``)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".scn") else p.name + ".scn"
    shipped = resources.files(__package__) / "scenarios" / name
    if str(path) == p.name and shipped.is_file():
        return Path(str(shipped))
    raise FileNotFoundError(f"scenario not found: {path}")


def load_scenario(path) -> Scenario:
    p = resolve_path(path)
    return parse_scenario(p.read_text(), path=p)


def _plain(value):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if hasattr(value, "value"):  # enums
        return value.value
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def flatten(scenario: Scenario) -> dict:
    out = {}
    for key, (section, fname, _) in KEYS.items():
        holder = scenario if section is None else getattr(scenario, section)
        out[key] = getattr(holder, fname)
    return out


def dump_scenario(scenario: Scenario) -> str:
    """Serialize back to the text format; ``parse_scenario`` round-trips it."""
    lines = []
    for key, value in flatten(scenario).items():
        value = _plain(value)
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
