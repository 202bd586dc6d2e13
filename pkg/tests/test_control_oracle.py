import math

import numpy as np
import pytest

from gykit.control_oracle import breakpoints, minimize_energy
from gykit.group import IDENTITY, GPoint
from gykit.value_function import energy, psi


def branch_value(start, end, sign):
    """Either branch of the closed form, regardless of the threshold."""
    E = energy(start, end)
    T = start.t - end.t
    D = end.y - start.y
    rad = max(E + 4 * start.x * end.x / D**2, 0.0)
    return E * T + 4 * (start.x + end.x) / D + sign * 4 * math.sqrt(rad)


def test_breakpoints():
    b = breakpoints(2.0, 10, "chebyshev")
    assert b[0] == 0.0 and math.isclose(b[-1], 2.0)
    assert np.all(np.diff(b) > 0)
    assert np.allclose(breakpoints(2.0, 4), [0, 0.5, 1, 1.5, 2])
    with pytest.raises(ValueError):
        breakpoints(1.0, 4, "bogus")


def test_unreachable_pairs():
    assert minimize_energy(GPoint(1, 1, 1), IDENTITY) == math.inf
    assert minimize_energy(GPoint(1, -1, -1), IDENTITY) == math.inf


def test_oracle_matches_branch_example():
    s = GPoint(4, -2, 2)
    val = minimize_energy(s, IDENTITY, pieces=200, mesh="chebyshev")
    assert abs(val - psi(s, IDENTITY)) / psi(s, IDENTITY) < 1e-3
    # the first-branch value (unsquared threshold) is far below anything achievable
    assert branch_value(s, IDENTITY, -1) < 0.27 < math.log(4) ** 2 / 2 < val


def test_oracle_converges_second_order():
    s = GPoint(4, -0.25, 2)
    p = psi(s, IDENTITY)
    e = [minimize_energy(s, IDENTITY, pieces=n, mesh="chebyshev") - p for n in (50, 100)]
    assert e[0] > 0 and e[1] > 0
    assert 3.0 < e[0] / e[1] < 5.0


def test_squared_threshold_is_the_right_one():
    """Where the two threshold conventions pick different branches, the oracle sides with T^2."""
    seen = 0
    # the acceptance-grid points lying between -pi^2/T^2 and -pi^2/T, plus (4, -2, 2)
    pts = [(1.1875, -1.1875, 2.0), (2.125, -1.1875, 1.625), (2.125, -1.1875, 2.0),
           (3.0625, -2.125, 2.0), (4.0, -2.125, 2.0), (4.0, -2.0, 2.0)]
    for x1, y1, t1 in pts:
        s = GPoint(x1, y1, t1)
        E = energy(s, IDENTITY)
        sq = E >= -math.pi**2 / t1**2
        unsq = E >= -math.pi**2 / t1
        if sq == unsq:
            continue
        seen += 1
        oracle = minimize_energy(s, IDENTITY, pieces=200, mesh="chebyshev", starts=2)
        other = branch_value(s, IDENTITY, -1 if unsq else 1)
        assert abs(oracle - psi(s, IDENTITY)) / psi(s, IDENTITY) < 1e-3
        assert abs(oracle - other) / oracle > 0.05
    assert seen == len(pts)
