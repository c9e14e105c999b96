"""Shared fixtures: the four reference receivers with their SQL cavities."""

from pathlib import Path

import numpy as np
import pytest

from forcenoise.params import (
    ALL_CASES,
    REF_KAPPA,
    REF_NU_STAR,
    reference_params,
)
from forcenoise.noise import sql_cavity

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def reference_setup(case):
    """``(params, cavity)`` for a case at the reference operating point."""
    p = reference_params(case)
    return p, sql_cavity(case, p, REF_KAPPA, REF_NU_STAR)


@pytest.fixture(params=ALL_CASES, ids=lambda c: c.name)
def any_case(request):
    case = request.param
    p, cav = reference_setup(case)
    return case, p, cav


@pytest.fixture
def hz_grid():
    """2000 log-spaced points, 1 Hz - 10 GHz, in rad/s."""
    return 2 * np.pi * np.logspace(0, 10, 2000)


@pytest.fixture
def reference_cfg():
    return str(CONFIGS / "reference.cfg")


@pytest.fixture
def plates_cfg():
    return str(CONFIGS / "plates.cfg")


# PASS/FAIL lines of the acceptance suite, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
