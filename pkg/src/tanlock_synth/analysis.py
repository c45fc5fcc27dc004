"""Lock detection, phase planes, period jitter and parameter sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, UnlockedError
from .loop_core import LoopParams, Variant
from .signal_model import StimulusSpec
from .synthesizer import AdaptationConfig, DividerConfig, FsmConfig, Synthesizer
from .trace import Trace


@dataclass
class LockReport:
    locked: bool
    lock_index: Optional[int] = None
    lock_time: Optional[float] = None
    steady_phi_mean: Optional[float] = None
    steady_phi_std: Optional[float] = None
    mean_sample_freq: Optional[float] = None
    mean_dco_freq: Optional[float] = None
    reference_phi: Optional[float] = None

    def to_dict(self):
        return asdict(self)


@dataclass
class JitterReport:
    rms_jitter: float
    peak_to_peak_jitter: float
    window: tuple
    carry_corrected_rms: Optional[float] = None
    mean_interval: Optional[float] = None

    def to_dict(self):
        out = asdict(self)
        out["window"] = list(self.window)
        return out


@dataclass
class SweepResult:
    label: str
    axis_name: str
    axis: list
    points: list
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.axis, self.axis[1:])):
            raise ConfigError(f"sweep axis must be strictly increasing: {self.axis}")

    def to_dict(self):
        return {"label": self.label, "axis_name": self.axis_name, "axis": list(self.axis),
                "points": list(self.points), "summary": dict(self.summary)}


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def window_frequencies(trace: Trace, start: int, stop: Optional[int] = None) -> tuple[float, float]:
    """Mean sampling and DCO frequency over records ``start..stop-1``.

    Both are counter-style: events (or DCO cycles) divided by elapsed time.
    """
    t = trace.t
    ratio = trace.ratio
    stop = len(t) if stop is None else stop
    if stop - start < 2:
        return float("nan"), float("nan")
    elapsed = t[stop - 1] - t[start]
    n = stop - 1 - start
    cycles = ratio[start + 1:stop].sum()
    return n / elapsed, float(cycles) / elapsed


def detect_lock(trace: Trace, epsilon: float = 0.01, hold: int = 100,
                reference: Optional[float] = None) -> LockReport:
    """First index from which |phi - reference| < epsilon for ``hold`` samples.

    A first-order loop settles to a non-zero phase error after a frequency
    step, so the error is measured against ``reference``; when omitted it is
    the median of the last ``hold`` samples (0 for a trace ending in lock at
    zero offset).
    """
    if hold < 1:
        raise ConfigError("hold must be >= 1")
    if not epsilon > 0:
        raise ConfigError("epsilon must be > 0")
    phi = trace.phi
    n = len(phi)
    if n < hold:
        return LockReport(False)
    ref = float(np.median(phi[-hold:])) if reference is None else float(reference)
    inside = np.abs(_wrap(phi - ref)) < epsilon
    # lock_index must start a run of `hold` inside samples; a run that is
    # still going at the end of the trace must also be at least `hold` long
    bad = np.flatnonzero(~inside)
    candidates = np.concatenate(([0], bad + 1))
    ends = np.concatenate((bad, [n]))
    lock_index = None
    for start, end in zip(candidates, ends):
        if end - start >= hold:
            lock_index = int(start)
            break
    if lock_index is None:
        return LockReport(False, reference_phi=ref)
    post = phi[lock_index:]
    tail_start = lock_index + len(post) // 2
    tail = phi[tail_start:]
    fs, fd = window_frequencies(trace, tail_start)
    return LockReport(True, lock_index, float(trace.t[lock_index]), float(np.mean(tail)),
                      float(np.std(tail)), fs, fd, ref)


def phase_plane(trace) -> list:
    """Consecutive phase-error pairs (phi_k, phi_{k+1})."""
    phi = trace.phi if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    if len(phi) < 2:
        return []
    return list(zip(phi[:-1].tolist(), phi[1:].tolist()))


def interval_jitter(t, start: int = 0, stop: Optional[int] = None,
                    period: Optional[int] = None) -> JitterReport:
    """Period jitter of sampling instants ``t[start:stop]`` with no lock check.

    ``period`` (the fraction denominator) enables a second figure with the
    deterministic carry pattern removed: the mean interval at each position
    of the period is subtracted before taking the deviation.
    """
    t = np.asarray(t, dtype=float)
    stop = len(t) if stop is None else stop
    seg = t[start:stop]
    if len(seg) < 3:
        raise ConfigError("jitter window needs at least 2 intervals")
    d = np.diff(seg)
    rms = float(np.std(d))
    p2p = float(d.max() - d.min())
    corrected = None
    if period and period > 1:
        pos = (np.arange(start + 1, start + 1 + len(d))) % period
        resid = d.copy()
        for p in range(period):
            m = pos == p
            if m.any():
                resid[m] -= d[m].mean()
        corrected = float(np.sqrt(np.mean(resid**2)))
    elif period is not None:
        corrected = rms
    return JitterReport(min(rms, p2p), p2p, (int(start), int(stop)), corrected, float(d.mean()))


def jitter_rms(trace: Trace, window: Optional[tuple] = None, period: Optional[int] = None,
               lock: Optional[LockReport] = None, **lock_kw) -> JitterReport:
    """Period jitter over a post-lock window (default: trailing half after lock)."""
    lock = detect_lock(trace, **lock_kw) if lock is None else lock
    if not lock.locked:
        raise UnlockedError("trace never locked; extend the run (more samples) before measuring jitter")
    if window is None:
        window = (lock.lock_index + (len(trace) - lock.lock_index) // 2, len(trace))
    start, stop = window
    if start < lock.lock_index:
        raise ConfigError(f"jitter window starts at {start}, before lock at {lock.lock_index}")
    return interval_jitter(trace.t, start, stop, period)


def derive_seed(root: int, *index: int) -> int:
    """Per-(point, trial) seed: SeedSequence over (root, *index), first 64-bit word."""
    ss = np.random.SeedSequence([int(root), *[int(i) for i in index]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _edges(axis, locked):
    """Contiguous lock interval around the grid point closest to W = 1."""
    axis = list(axis)
    i1 = int(np.argmin([abs(w - 1.0) for w in axis]))
    if not locked[i1]:
        return None, None
    lo = hi = i1
    while lo > 0 and locked[lo - 1]:
        lo -= 1
    while hi < len(axis) - 1 and locked[hi + 1]:
        hi += 1
    return axis[lo], axis[hi]


def asymmetry(lower: float, upper: float) -> float:
    """Imbalance of the lock interval about W = 1; 0 is symmetric, 1 is one-sided."""
    up, down = max(upper - 1.0, 0.0), max(1.0 - lower, 0.0)
    if up + down == 0:
        return 0.0
    return abs(up - down) / (up + down)


def _lock_point(args):
    params, divider, adaptation, fsm, stimulus, n_samples, epsilon, hold, w = args
    f_in = params.free_running / w
    stim = replace(stimulus, base_frequency=params.free_running,
                   step_value=(f_in - params.free_running) / stimulus.kappa, snr_db=None)
    trace = Synthesizer(params, divider, adaptation, fsm).run(stim, n_samples)
    rep = detect_lock(trace, epsilon, hold)
    if rep.locked and abs(rep.mean_sample_freq - f_in) / f_in >= 1e-3:
        rep = LockReport(False, reference_phi=rep.reference_phi)
    step_index = int(np.searchsorted(trace.t, stim.step_time))
    acq = None if not rep.locked else max(rep.lock_index - step_index, 0)
    return {"W": w, "f_in": f_in, "locked": rep.locked, "acquisition_samples": acq,
            "lock": rep.to_dict()}


def _map(fn, jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def lock_range_sweep(params: LoopParams, divider: DividerConfig, stimulus: StimulusSpec,
                     w_grid: Sequence[float], adaptation: AdaptationConfig = AdaptationConfig(),
                     fsm: FsmConfig = FsmConfig(), n_samples: int = 1500,
                     epsilon: float = 0.01, hold: int = 100, workers: int = 0) -> SweepResult:
    """Noise-free acquisition test at each normalized frequency W.

    The loop starts locked to its own centre and the input then steps to
    ``f_free / W`` (W as seen by the adapted loop). The summary carries the
    contiguous lock edges around W = 1 and their asymmetry.
    """
    grid = [float(w) for w in w_grid]
    if any(w <= 0 for w in grid):
        raise ConfigError("W grid values must be > 0")
    jobs = [(params, divider, adaptation, fsm, stimulus, n_samples, epsilon, hold, w) for w in grid]
    points = _map(_lock_point, jobs, workers)
    lower, upper = _edges(grid, [p["locked"] for p in points])
    summary = {"lower_edge": lower, "upper_edge": upper,
               "asymmetry": None if lower is None else asymmetry(lower, upper)}
    return SweepResult(Variant(params.variant).value, "W", grid, points, summary)


def _jitter_trial(args):
    params, divider, adaptation, fsm, stimulus, n_samples, snr, seed = args
    stim = replace(stimulus, snr_db=snr, seed=seed)
    trace = Synthesizer(params, divider, adaptation, fsm).run(stim, n_samples)
    start = n_samples // 2
    rep = interval_jitter(trace.t, start, None, divider.ratio_frac.denominator)
    fs, _ = window_frequencies(trace, start)
    f_in = stim.stepped_frequency
    return rep, abs(fs - f_in) / f_in < 1e-3


def snr_jitter_sweep(params_pair: tuple, divider: DividerConfig, stimulus: StimulusSpec,
                     snr_grid: Sequence[Optional[float]], trials: int = 10,
                     adaptation: AdaptationConfig = AdaptationConfig(), fsm: FsmConfig = FsmConfig(),
                     n_samples: int = 2000, workers: int = 0) -> tuple:
    """Paired TDTL/NDTL period-jitter sweep over input SNR.

    Both variants see the same seed at each (point, trial). Jitter is taken
    over the trailing half of each run; a trial counts as locked when its
    mean sampling frequency matches the input to 1e-3 (no cycle slips).
    ``None`` in the grid means noise-free.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    results = []
    for params in params_pair:
        jobs = []
        for i, snr in enumerate(snr_grid):
            for trial in range(trials):
                jobs.append((params, divider, adaptation, fsm, stimulus, n_samples, snr,
                             derive_seed(stimulus.seed, i, trial)))
        out = _map(_jitter_trial, jobs, workers)
        points = []
        for i, snr in enumerate(snr_grid):
            chunk = out[i * trials:(i + 1) * trials]
            rms = [r.rms_jitter for r, _ in chunk]
            points.append({
                "snr_db": snr,
                "rms_jitter": float(np.mean(rms)),
                "carry_corrected_rms": float(np.mean([r.carry_corrected_rms for r, _ in chunk])),
                "peak_to_peak_jitter": float(np.mean([r.peak_to_peak_jitter for r, _ in chunk])),
                "locked_fraction": sum(ok for _, ok in chunk) / trials,
                "trial_rms": rms,
            })
        axis = [math.inf if s is None else s for s in snr_grid]
        results.append(SweepResult(Variant(params.variant).value, "snr_db", axis, points,
                                   {"trials": trials, "n_samples": n_samples}))
    return tuple(results)
