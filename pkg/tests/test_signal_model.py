import math

import numpy as np
import pytest

from tanlock_synth.errors import ConfigError
from tanlock_synth.signal_model import StimulusSpec, input_frequency, input_phase, make_rng, sample_at


def test_input_frequency_zero_step():
    spec = StimulusSpec(base_frequency=25.0)
    assert input_frequency(spec, 0.0) == 25.0
    assert input_frequency(spec, 123.0) == 25.0


@pytest.mark.parametrize("step, expected", [(0.2, 30.0), (-0.3, 17.5)])
def test_input_frequency_step(step, expected):
    spec = StimulusSpec(base_frequency=25.0, step_value=step, step_scale=25.0, step_time=1.0)
    assert input_frequency(spec, 0.5) == 25.0
    assert input_frequency(spec, 2.0) == pytest.approx(expected, rel=1e-15)


def test_default_step_scale_is_base_frequency():
    assert StimulusSpec(base_frequency=25.0, step_value=0.2).stepped_frequency == pytest.approx(30.0)


def test_nonpositive_stepped_frequency_rejected():
    with pytest.raises(ConfigError):
        StimulusSpec(base_frequency=25.0, step_value=-1.0)


@pytest.mark.parametrize("kw", [dict(base_frequency=0.0), dict(amplitude=-1.0), dict(step_time=-1.0),
                                dict(initial_phase=4.0), dict(seed=-1)])
def test_invalid_spec(kw):
    with pytest.raises(ConfigError):
        StimulusSpec(**kw)


def test_sample_at_zero_phase():
    assert sample_at(StimulusSpec(), 0.0) == 0.0


def test_sample_at_quarter_period():
    spec = StimulusSpec(base_frequency=25.0, amplitude=2.0)
    assert sample_at(spec, 1 / (4 * 25.0)) == pytest.approx(2.0, abs=1e-12)


def test_noise_free_is_repeatable():
    spec = StimulusSpec(base_frequency=31.0, initial_phase=0.3)
    assert sample_at(spec, 0.123) == sample_at(spec, 0.123)


def test_noisy_spec_needs_rng():
    with pytest.raises(ConfigError):
        sample_at(StimulusSpec(snr_db=10.0), 0.1)


def test_noise_variance_monte_carlo():
    # sigma^2 = A^2 / (2 * 10^(snr/10)) = 1 / 20 at 10 dB
    spec = StimulusSpec(base_frequency=25.0, snr_db=10.0, seed=3)
    rng = make_rng(3)
    t = 0.0137
    clean = math.sin(input_phase(spec, t))
    x = np.fromiter((sample_at(spec, t, rng) for _ in range(10**6)), float, 10**6)
    assert abs(np.var(x - clean) / 0.05 - 1) < 0.02


def test_noise_independence():
    spec = StimulusSpec(base_frequency=25.0, snr_db=0.0, seed=9)
    rng = make_rng(9)
    t = np.arange(2 * 10**5) * 0.00137
    noise = np.array([sample_at(spec, ti, rng) for ti in t]) - np.sin(
        [input_phase(spec, ti) for ti in t])
    a, b = noise[0::2], noise[1::2]
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_reproducible_sequence():
    spec = StimulusSpec(base_frequency=25.0, snr_db=5.0, seed=42)
    ts = np.linspace(0, 1, 50)
    a = [sample_at(spec, t, make_rng(42)) for t in ts[:1]]
    r1, r2 = make_rng(42), make_rng(42)
    assert [sample_at(spec, t, r1) for t in ts] == [sample_at(spec, t, r2) for t in ts]
    assert a[0] == sample_at(spec, ts[0], make_rng(42))


def test_phase_continuous_across_step():
    spec = StimulusSpec(base_frequency=25.0, step_value=0.3, step_time=0.5)
    dt = 1e-7
    ts = 0.5 + np.arange(-200, 200) * dt
    phases = np.unwrap([input_phase(spec, t) for t in ts])
    steps = np.diff(phases)
    # no jump: every increment is 2*pi*f*dt with f either side of the step
    assert steps.max() <= 2 * math.pi * 32.5 * dt * (1 + 1e-4)
    assert steps.min() >= 2 * math.pi * 25.0 * dt * (1 - 1e-4)
