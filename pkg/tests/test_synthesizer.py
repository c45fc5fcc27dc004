from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tanlock_synth.analysis import detect_lock, window_frequencies
from tanlock_synth.errors import ConfigError, DomainError
from tanlock_synth.loop_core import Edge, LoopParams, dco_frequency
from tanlock_synth.signal_model import StimulusSpec
from tanlock_synth.synthesizer import (
    AdaptationConfig,
    DividerConfig,
    DividerState,
    FsmState,
    Synthesizer,
    adapt,
    carry_sequence,
    fsm_select,
    next_ratio,
    restored_operating_point,
)


def ratios(config, count):
    state, out = DividerState(), []
    for _ in range(count):
        r, state = next_ratio(state, config)
        out.append(r)
        assert 0 <= state.accumulator < 1
    return out


def floor_oracle(n, num, den, count):
    k = np.arange(1, count + 1, dtype=np.int64)
    return n + (k * num) // den - ((k - 1) * num) // den


def test_divide_by_4_2():
    assert ratios(DividerConfig(4, "1/5"), 5) == [4, 4, 4, 4, 5]


def test_divide_by_3_125():
    assert ratios(DividerConfig(3, "1/8"), 8) == [3, 3, 3, 3, 3, 3, 3, 4]


def test_integer_division():
    assert set(ratios(DividerConfig(5), 50)) == {5}


def test_fraction_is_exact():
    cfg = DividerConfig(4, "0.2")
    assert cfg.ratio_frac == Fraction(1, 5)
    assert cfg.beta_avg == Fraction(21, 5)


@pytest.mark.parametrize("frac", ["5/4", "1", "-1/3"])
def test_bad_fraction(frac):
    with pytest.raises(ConfigError):
        DividerConfig(4, frac)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 64), st.integers(1, 200).flatmap(
    lambda den: st.tuples(st.integers(0, den - 1), st.just(den))))
def test_next_ratio_matches_floor_oracle(n, frac):
    num, den = frac
    seq = ratios(DividerConfig(n, Fraction(num, den)), 3 * den + 7)
    assert seq == floor_oracle(n, num, den, len(seq)).tolist()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(1, 97).flatmap(
    lambda den: st.tuples(st.integers(0, den - 1), st.just(den))), st.integers(0, 500))
def test_exact_window_sum(n, frac, offset):
    num, den = frac
    seq = list(carry_sequence(n, num, den, offset + den))
    assert sum(seq[offset:offset + den]) == n * den + num


def test_carry_sequence_matches_next_ratio():
    cfg = DividerConfig(7, Fraction(13, 31))
    assert list(carry_sequence(7, 13, 31, 1000)) == ratios(cfg, 1000)


def test_fsm_positive_step_selects_negative_edge():
    ratio, state = fsm_select(0.5, 4, 5, FsmState())
    assert ratio == 5 and state.selected_edge is Edge.NEGATIVE
    assert state.step_sign_estimate == "positive"


def test_fsm_negative_step_selects_positive_edge():
    ratio, state = fsm_select(-0.5, 4, 5, FsmState(selected_edge=Edge.NEGATIVE))
    assert ratio == 4 and state.selected_edge is Edge.POSITIVE


def test_fsm_dead_band_keeps_selection():
    ratio, state = fsm_select(1e-5, 4, 5, FsmState())
    assert state.selected_edge is Edge.POSITIVE and ratio == 4
    _, state = fsm_select(1e-5, 4, 5, FsmState(selected_edge=Edge.NEGATIVE))
    assert state.selected_edge is Edge.NEGATIVE


def test_fsm_averages_window():
    state = FsmState()
    for v in [1.0] * 3 + [-0.2] * 5:
        _, state = fsm_select(v, 4, 5, state)
    assert len(state.history) == 8
    assert state.selected_edge is Edge.NEGATIVE  # mean 0.25 > 0


def test_adapt_examples():
    params = LoopParams(filter_gain=0.01)
    gain, _ = adapt(4, params, AdaptationConfig(gain_rule="beta_plus_one"))
    assert gain == pytest.approx(0.05)
    assert adapt(1, params, AdaptationConfig(gain_rule="beta")) == (pytest.approx(0.01), 0.0)
    _, dc = adapt(3.125, LoopParams(dco_dc_constant=1.0), AdaptationConfig())
    assert dc == pytest.approx(2.125)
    assert adapt(4, params, AdaptationConfig(enabled=False)) == (0.01, 0.0)
    with pytest.raises(DomainError):
        adapt(0.5, params, AdaptationConfig())


@pytest.mark.parametrize("beta", [1, 2, 3.125, 4, 4.2, 8])
def test_adapt_moves_centre_to_beta_times_free(beta):
    params = LoopParams(dco_sensitivity=32, dco_dc_constant=3.125)
    _, dc = adapt(beta, params, AdaptationConfig())
    assert dco_frequency(params, 0.0, dc)[0] == pytest.approx(beta * 100.0)


def test_operating_point_examples():
    params = LoopParams(dco_sensitivity=32, dco_dc_constant=3.125)
    op = restored_operating_point(4, params, StimulusSpec(base_frequency=25.0))
    assert op.pre.W == pytest.approx(1.0)
    op = restored_operating_point(4, params, StimulusSpec(base_frequency=100.0))
    assert op.pre.W == pytest.approx(0.25)
    assert op.post.W == pytest.approx(1.0)
    op = restored_operating_point(1, params, StimulusSpec(base_frequency=100.0))
    assert op.pre == op.post


def _edge_changes(trace):
    edges = [r.edge for r in trace]
    return [k for k in range(1, len(edges)) if edges[k] != edges[k - 1]]


def test_edge_switch_perturbs_one_instant():
    trace = Synthesizer(LoopParams(), DividerConfig(4, "1/5")).run(
        StimulusSpec(step_value=0.3, step_time=0.4), 400)
    changes = _edge_changes(trace)
    assert changes, "positive step should move to the negative edge"
    t = trace.t
    for k in changes:
        r = trace[k]
        T = 1.0 / r.f_dco
        shift = T / 2 if r.edge is Edge.NEGATIVE else -T / 2
        assert t[k] - t[k - 1] == pytest.approx(r.ratio * T + shift, rel=1e-12)
    assert np.all(np.diff(t) > 0)


GRID = [DividerConfig(2), DividerConfig(3), DividerConfig(3, "1/8"), DividerConfig(4),
        DividerConfig(4, "1/5"), DividerConfig(8)]


@pytest.mark.parametrize("divider", GRID, ids=lambda d: str(float(d.beta_avg)))
@pytest.mark.parametrize("step", [0.2, 0.3, -0.3])
def test_adaptation_restores_lock(divider, step):
    stim = StimulusSpec(step_value=step, step_time=0.4)
    trace = Synthesizer(LoopParams(), divider).run(stim, 1500)
    rep = detect_lock(trace)
    assert rep.locked
    f_in = stim.stepped_frequency
    assert abs(rep.mean_sample_freq - f_in) / f_in < 1e-3
    beta = float(divider.beta_avg)
    assert abs(rep.mean_dco_freq - beta * f_in) / (beta * f_in) < 1e-3


@pytest.mark.parametrize("divider", GRID[:1] + GRID[2:], ids=lambda d: str(float(d.beta_avg)))
def test_unadapted_loop_samples_at_wrong_rate(divider):
    params = LoopParams()
    beta = float(divider.beta_avg)
    # open loop, the divided centre is off by beta
    f_centre, _ = dco_frequency(params, 0.0, adapt(beta, params, AdaptationConfig(enabled=False))[1])
    assert f_centre / beta == pytest.approx(params.free_running / beta)
    stim = StimulusSpec(step_value=0.2, step_time=0.4)
    trace = Synthesizer(params, divider, AdaptationConfig(enabled=False)).run(stim, 1500)
    fs, _ = window_frequencies(trace, 750)
    assert abs(fs - stim.stepped_frequency) / stim.stepped_frequency > 0.05
    assert not detect_lock(trace).locked


def test_average_tracking_leaves_fractional_ripple():
    stim = StimulusSpec()
    inst = Synthesizer(LoopParams(), DividerConfig(4, "1/5")).run(stim, 500)
    avg = Synthesizer(LoopParams(), DividerConfig(4, "1/5"),
                      AdaptationConfig(tracking="average")).run(stim, 500)
    assert np.abs(inst.phi).max() < 1e-9
    assert np.abs(avg.phi[250:]).max() > 0.05
