import sys

import numpy as np
import pytest

from gykit.group import GPoint


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_point(rng, t_lo=-2.0, t_hi=2.0) -> GPoint:
    return GPoint(float(rng.uniform(0.2, 5.0)), float(rng.uniform(-3.0, 3.0)),
                  float(rng.uniform(t_lo, t_hi)))


def random_reachable(rng):
    """(start, end) with start.t > end.t and start.y < end.y."""
    end = random_point(rng)
    start = GPoint(float(rng.uniform(0.2, 5.0)), end.y - float(rng.uniform(0.1, 4.0)),
                   end.t + float(rng.uniform(0.1, 3.0)))
    return start, end


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
