"""Command-line experiment runners.

Exit codes: 0 success (locked), 1 I/O or configuration error, 2 run
completed but the loop did not lock.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    detect_lock,
    jitter_rms,
    lock_range_sweep,
    phase_plane,
    snr_jitter_sweep,
)
from .errors import ConfigError, UnlockedError
from .loop_core import Variant
from .scenario import Scenario, load_scenario, parse_window
from .synthesizer import Synthesizer, carry_sequence, parse_fraction, restored_operating_point
from .trace import COLUMNS

log = logging.getLogger("tanlock_synth")

EXIT_OK, EXIT_ERROR, EXIT_UNLOCKED = 0, 1, 2
TRACE_COLUMNS = ("k", "t", "ratio", "edge", "f_dco", "s_sin", "s_cos", "phi", "v_filter",
                 "saturated", "degenerate")
assert TRACE_COLUMNS == COLUMNS


def _cell(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n")


def build(scenario: Scenario, variant=None) -> Synthesizer:
    params = scenario.loop if variant is None else replace(scenario.loop, variant=variant)
    return Synthesizer(params, scenario.divider, scenario.adaptation, scenario.fsm,
                       use_fsm=scenario.fsm_enabled)


def run_scenario(scenario: Scenario, out_dir) -> int:
    """Simulate one scenario and write trace.csv, phase_plane.csv, report.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = build(scenario).run(scenario.stimulus, scenario.run_length)
    lock = detect_lock(trace, scenario.analysis.epsilon, scenario.analysis.hold)
    jitter, jitter_error = None, None
    try:
        jitter = jitter_rms(trace, parse_window(scenario.analysis.jitter_window),
                            period=scenario.divider.ratio_frac.denominator, lock=lock).to_dict()
    except (UnlockedError, ConfigError) as exc:
        jitter_error = str(exc)
    op = restored_operating_point(scenario.divider.beta_avg, scenario.loop, scenario.stimulus,
                                  scenario.adaptation)
    f_in = scenario.stimulus.stepped_frequency
    report = {
        "tool": "tanlock-synth",
        "version": __version__,
        "seed": scenario.stimulus.seed,
        "scenario": scenario.to_dict(),
        "lock": lock.to_dict(),
        "jitter": jitter,
        "jitter_error": jitter_error,
        "input_frequency_after_step": f_in,
        "beta_avg": float(scenario.divider.beta_avg),
        "dco_to_sample_ratio": (lock.mean_dco_freq / lock.mean_sample_freq) if lock.locked else None,
        "operating_point": {
            "pre": {"W": op.pre.W, "K1": op.pre.K1},
            "post": {"W": op.post.W, "K1": op.post.K1},
        },
        "saturated_samples": sum(r.saturated for r in trace),
        "degenerate_samples": sum(r.degenerate for r in trace),
    }
    _write_csv(out / "trace.csv", TRACE_COLUMNS, trace.rows())
    _write_csv(out / "phase_plane.csv", ("phi_k", "phi_k1"), phase_plane(trace))
    _write_json(out / "report.json", report)
    log.info("%s: locked=%s lock_index=%s", scenario.name, lock.locked, lock.lock_index)
    return EXIT_OK if lock.locked else EXIT_UNLOCKED


def run_compare(scenario: Scenario, out_dir, workers: int = 0, snr_grid=None) -> int:
    """Paired TDTL/NDTL jitter sweep; writes jitter_sweep.csv and compare.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = scenario.compare
    grid = cfg.grid() if snr_grid is None else list(snr_grid)
    pair = (replace(scenario.loop, variant=Variant.TDTL), replace(scenario.loop, variant=Variant.NDTL))
    tdtl, ndtl = snr_jitter_sweep(pair, scenario.divider, scenario.stimulus, grid, cfg.trials,
                                  scenario.adaptation, scenario.fsm, cfg.samples, workers)
    rows = []
    for snr, pt, pn in zip(grid, tdtl.points, ndtl.points):
        t_rms, n_rms = pt["rms_jitter"], pn["rms_jitter"]
        ratio = n_rms / t_rms if t_rms > 0 else float("nan")
        rows.append(("none" if snr is None else float(snr), t_rms, n_rms, ratio))
    _write_csv(out / "jitter_sweep.csv", ("snr_db", "tdtl_rms_s", "ndtl_rms_s", "ratio"), rows)
    ratios = [r[3] for r in rows]
    good = sum(1 for r in ratios if r <= 0.1)
    verdict = {
        "ndtl_below_tdtl_everywhere": all(r[2] < r[1] for r in rows),
        "points_with_ratio_le_0.1": good,
        "points": len(rows),
        "majority_ratio_le_0.1": good > len(rows) / 2,
        "ndtl_within_decade_band": all(1e-5 <= r[2] <= 1e-2 for r in rows),
    }
    _write_json(out / "compare.json", {
        "tool": "tanlock-synth", "version": __version__, "seed": scenario.stimulus.seed,
        "scenario": scenario.to_dict(), "verdict": verdict,
        "tdtl": tdtl.to_dict(), "ndtl": ndtl.to_dict(),
    })
    return EXIT_OK


def w_grid(w_min: float, w_max: float, steps: int) -> list:
    if steps < 1:
        raise ConfigError("--w-steps must be >= 1")
    if steps == 1:
        return [float(w_min)]
    return [round(float(w), 12) for w in np.linspace(w_min, w_max, steps)]


def run_lockrange(scenario: Scenario, grid, out_dir, samples=None, workers: int = 0) -> int:
    """Noise-free lock-range sweep of both variants; writes lockrange.csv and lockrange.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = scenario.run_length if samples is None else samples
    sweeps = {}
    for variant in (Variant.TDTL, Variant.NDTL):
        params = replace(scenario.loop, variant=variant)
        sweeps[variant.value] = lock_range_sweep(
            params, scenario.divider, scenario.stimulus, grid, scenario.adaptation, scenario.fsm,
            n, scenario.analysis.epsilon, scenario.analysis.hold, workers)
    rows = []
    for i, w in enumerate(grid):
        pt, pn = sweeps["TDTL"].points[i], sweeps["NDTL"].points[i]
        rows.append((w, pt["locked"], "" if pt["acquisition_samples"] is None else pt["acquisition_samples"],
                     pn["locked"], "" if pn["acquisition_samples"] is None else pn["acquisition_samples"]))
    _write_csv(out / "lockrange.csv",
               ("W", "tdtl_locked", "tdtl_acquisition_samples", "ndtl_locked", "ndtl_acquisition_samples"),
               rows)
    payload = {"tool": "tanlock-synth", "version": __version__, "scenario": scenario.to_dict(),
               "grid": list(grid), "summary": {k: s.summary for k, s in sweeps.items()}}
    if len(grid) > 1:
        a_t = sweeps["TDTL"].summary["asymmetry"]
        a_n = sweeps["NDTL"].summary["asymmetry"]
        payload["comparison"] = {
            "tdtl_asymmetry": a_t, "ndtl_asymmetry": a_n,
            "ndtl_less_asymmetric": None if a_t is None or a_n is None else a_n < a_t,
        }
    _write_json(out / "lockrange.json", payload)
    return EXIT_OK


def _parser():
    p = argparse.ArgumentParser(prog="tanlock-synth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("scenario")
    r.add_argument("--out", default="out")
    r.add_argument("--seed", type=int)
    r.add_argument("--samples", type=int)

    c = sub.add_parser("compare", help="TDTL vs NDTL jitter over SNR")
    c.add_argument("template")
    c.add_argument("--out", default="out")
    c.add_argument("--seed", type=int)
    c.add_argument("--samples", type=int)
    c.add_argument("--trials", type=int)
    c.add_argument("--snr-min", type=float)
    c.add_argument("--snr-max", type=float)
    c.add_argument("--snr-step", type=float)
    c.add_argument("--noise-free", action="store_true", help="single noise-free point")
    c.add_argument("--workers", type=int, default=0)

    lr = sub.add_parser("lockrange", help="noise-free lock range over W")
    lr.add_argument("template")
    lr.add_argument("--w-min", type=float, required=True)
    lr.add_argument("--w-max", type=float, required=True)
    lr.add_argument("--w-steps", type=int, required=True)
    lr.add_argument("--out", default="out")
    lr.add_argument("--samples", type=int)
    lr.add_argument("--workers", type=int, default=0)

    o = sub.add_parser("oracle", help="reference sequences for cross-checking")
    osub = o.add_subparsers(dest="oracle", required=True)
    d = osub.add_parser("divider", help="print the dual-modulus carry sequence")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--frac", default="0/1")
    d.add_argument("--count", type=int, required=True)
    return p


def _with_overrides(scenario: Scenario, args) -> Scenario:
    if getattr(args, "seed", None) is not None:
        scenario = replace(scenario, stimulus=replace(scenario.stimulus, seed=args.seed))
    if args.command == "run" and args.samples is not None:
        scenario = replace(scenario, run_length=args.samples)
    if args.command == "compare":
        over = {k: v for k, v in (("samples", args.samples), ("trials", args.trials),
                                  ("snr_min", args.snr_min), ("snr_max", args.snr_max),
                                  ("snr_step", args.snr_step)) if v is not None}
        if over:
            scenario = replace(scenario, compare=replace(scenario.compare, **over))
    return scenario


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "oracle":
            frac = parse_fraction(args.frac)
            if args.n < 1 or not 0 <= frac < 1 or args.count < 0:
                raise ConfigError("oracle needs --n >= 1, 0 <= frac < 1, --count >= 0")
            seq = carry_sequence(args.n, frac.numerator, frac.denominator, args.count)
            print(" ".join(str(x) for x in seq))
            return EXIT_OK
        path = args.scenario if args.command == "run" else args.template
        scenario = _with_overrides(load_scenario(path), args)
        if args.command == "run":
            return run_scenario(scenario, args.out)
        if args.command == "compare":
            grid = [None] if args.noise_free else None
            return run_compare(scenario, args.out, args.workers, grid)
        grid = w_grid(args.w_min, args.w_max, args.w_steps)
        return run_lockrange(scenario, grid, args.out, args.samples, args.workers)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
