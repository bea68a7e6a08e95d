import os

import numpy as np
import pytest
from hypothesis import settings

from stablecond import validate_params

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GRID = [(0.5, 0.5), (0.5, 0.3), (1.2, 0.45), (1.5, 0.5), (1.8, 0.52)]


@pytest.fixture(params=GRID, ids=lambda ar: f"a{ar[0]}_r{ar[1]}")
def grid_params(request):
    return validate_params(*request.param)


def admissible(alpha: float, u: float):
    """Map ``u`` in (0, 1) to an admissible rho for ``alpha``."""
    if alpha < 1:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = 1 - 1 / alpha, 1 / alpha
    return lo + (hi - lo) * u


def rel(a, b):
    return abs(a - b) / abs(b)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
