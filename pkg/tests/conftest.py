import math

import pytest

from tanlock_synth.loop_core import LoopParams


@pytest.fixture
def fig14_params():
    return LoopParams(variant="NDTL", dco_sensitivity=32, dco_dc_constant=3.125, filter_gain=0.42)


def wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


ACCEPTANCE_LINES = []


def record_criterion(name: str, ok: bool, detail: str = ""):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
