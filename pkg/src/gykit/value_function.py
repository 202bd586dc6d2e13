"""Value function of the minimum-energy steering problem.

For a start (x, y, t) and an end (x0, y0, t0) with t > t0 and y < y0,
Psi is the least value of the integral of omega(s)^2 over admissible
paths x' = omega x, y' = x joining the two points in time t - t0.  When
no such path exists Psi is the sentinel ``UNREACHABLE``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .group import GPoint, left_translate

PI2 = math.pi * math.pi

# Taylor coefficients of g(r) - 1 = sum r^k / (2k+1)!
_G_SERIES = tuple(1.0 / math.factorial(2 * k + 1) for k in range(1, 8))
_SERIES_RADIUS = 0.1


class _Unreachable(float):
    """+inf that remembers it means "no admissible path" rather than overflow."""

    _instance: "_Unreachable | None" = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls, "inf")
        return cls._instance

    def __repr__(self) -> str:
        return "UNREACHABLE"

    def __reduce__(self):
        return (_Unreachable, ())


UNREACHABLE = _Unreachable()


def is_unreachable(v) -> bool:
    return v is UNREACHABLE


@dataclass(frozen=True, slots=True)
class ControlSynthesis:
    """Pontryagin data for one (start, end) pair.

    ``k`` and ``c`` are the final covector in the frame where the end point
    is moved to (1, 0) by left translation; time keeps its original scale,
    so ``E = k**2 + 2*c``.
    """

    E: float
    k: float
    c: float
    cost: float


@dataclass(frozen=True, slots=True)
class TrajectorySample:
    s: float
    x: float
    y: float
    lambda1: float
    omega: float


@dataclass(frozen=True, slots=True)
class PsiEval:
    E: float
    psi: float
    branch: str  # "minus", "plus" or "none"


# ---------------------------------------------------------------------------
# the function g and its inverse


def _check_g_domain(r: float) -> None:
    if not r > -PI2:
        raise ValueError(f"g is defined for r > -pi^2, got {r!r}")


def _gm1_series(r: float) -> float:
    acc = 0.0
    for coef in reversed(_G_SERIES):
        acc = acc * r + coef
    return acc * r


def _dgm1_series(r: float) -> float:
    acc = 0.0
    for k in range(len(_G_SERIES), 0, -1):
        acc = acc * r + k * _G_SERIES[k - 1]
    return acc


def eval_g(r: float) -> float:
    """sinh(sqrt r)/sqrt r, continued through 1 at 0 to sin(sqrt -r)/sqrt -r."""
    r = float(r)
    _check_g_domain(r)
    if abs(r) < _SERIES_RADIUS:
        return 1.0 + _gm1_series(r)
    if r > 0.0:
        u = math.sqrt(r)
        if u > 700.0:
            return math.exp(_log_g(r)) if _log_g(r) < 709.0 else math.inf
        return math.sinh(u) / u
    u = math.sqrt(-r)
    return math.sin(u) / u


def _log_g(r: float) -> float:
    if abs(r) < _SERIES_RADIUS:
        return math.log1p(_gm1_series(r))
    if r > 0.0:
        u = math.sqrt(r)
        return u + math.log1p(-math.exp(-2.0 * u)) - math.log(2.0 * u)
    u = math.sqrt(-r)
    return math.log(math.sin(u) / u)


def _dlog_g(r: float) -> float:
    if abs(r) < _SERIES_RADIUS:
        return _dgm1_series(r) / (1.0 + _gm1_series(r))
    if r > 0.0:
        u = math.sqrt(r)
        return (1.0 / math.tanh(u) - 1.0 / u) / (2.0 * u)
    u = math.sqrt(-r)
    return (1.0 / u - math.cos(u) / math.sin(u)) / (2.0 * u)


def invert_g(v: float) -> float:
    """Solve g(r) = v.  Bisection down to a bracket of width 1e-3, then Newton on log g."""
    v = float(v)
    if not v > 0.0 or math.isnan(v):
        raise ValueError(f"g^-1 needs a positive argument, got {v!r}")
    if math.isinf(v):
        raise ValueError("g^-1 of +inf is not finite")
    if v == 1.0:
        return 0.0
    target = math.log(v)
    if v > 1.0:
        lo, hi = 0.0, 1.0
        while _log_g(hi) < target:
            lo, hi = hi, 4.0 * hi
    else:
        lo, hi = -PI2, 0.0

    def f(r: float) -> float:
        if r <= -PI2:
            return -math.inf
        return _log_g(r) - target

    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    for _ in range(60):
        fr = f(r)
        if fr == 0.0:
            break
        if fr < 0.0:
            lo = r
        else:
            hi = r
        step = fr / _dlog_g(r)
        r_new = r - step
        if not lo <= r_new <= hi:
            r_new = 0.5 * (lo + hi)
        if abs(r_new - r) <= 1e-15 * max(1.0, abs(r)):
            r = r_new
            break
        r = r_new
    return r


# ---------------------------------------------------------------------------
# energy and value


def _reachable(start: GPoint, end: GPoint) -> bool:
    return start.t > end.t and start.y < end.y


def _ratio(start: GPoint, end: GPoint) -> float:
    T = start.t - end.t
    return (end.y - start.y) / (T * math.sqrt(start.x * end.x))


def energy(start: GPoint, end: GPoint) -> float:
    if not _reachable(start, end):
        return UNREACHABLE
    T = start.t - end.t
    return 4.0 / (T * T) * invert_g(_ratio(start, end))


def evaluate(start: GPoint, end: GPoint) -> PsiEval:
    """Energy, value and the branch of the closed form that produced it."""
    if not _reachable(start, end):
        return PsiEval(UNREACHABLE, UNREACHABLE, "none")
    T = start.t - end.t
    D = end.y - start.y
    x1, x0 = start.x, end.x
    E = 4.0 / (T * T) * invert_g(_ratio(start, end))
    root = math.sqrt(max(D * D * E + 4.0 * x1 * x0, 0.0))
    if E * T * T >= -PI2:
        # (x1 + x0 - root) rewritten without cancellation
        value = E * T + 4.0 * ((x1 - x0) ** 2 - D * D * E) / (D * (x1 + x0 + root))
        branch = "minus"
    else:
        value = E * T + 4.0 * (x1 + x0 + root) / D
        branch = "plus"
    return PsiEval(E, max(value, 0.0), branch)


def psi(start: GPoint, end: GPoint) -> float:
    return evaluate(start, end).psi


def psi_asymptotic_log(start: GPoint, end: GPoint) -> float:
    """Leading behaviour of psi as the ratio parameter goes to +inf."""
    if not _reachable(start, end):
        return UNREACHABLE
    T = start.t - end.t
    L = math.log(_ratio(start, end))
    return 4.0 / T * L * L + 4.0 * (end.x + start.x) / (end.y - start.y)


def psi_asymptotic_small(start: GPoint, end: GPoint) -> float:
    """Leading behaviour of psi as the ratio parameter goes to 0."""
    if not _reachable(start, end):
        return UNREACHABLE
    T = start.t - end.t
    s = math.sqrt(start.x) + math.sqrt(end.x)
    return 4.0 * s * s / (end.y - start.y) - 4.0 * PI2 / T


# ---------------------------------------------------------------------------
# Pontryagin synthesis


def optimal_covector(E: float, x1: float, y1: float) -> tuple[float, float]:
    """Final covector (k, c) of the normalized problem: end (1, 0), final time 2."""
    if not x1 > 0.0 or not y1 < 0.0:
        raise ValueError("normalized start needs x1 > 0 and y1 < 0")
    disc = E * y1 * y1 + 4.0 * x1
    if disc < 0.0:
        raise ValueError(f"E*y1^2 + 4*x1 = {disc!r} < 0")
    root = math.sqrt(disc)
    if E >= -PI2 / 4.0:
        k = (disc - 4.0) / (y1 * (root + 2.0))
    else:
        k = -(root + 2.0) / y1
    return k, 0.5 * (E - k * k)


def _normalize(start: GPoint, end: GPoint) -> tuple[float, float, float]:
    w = left_translate(end, start)
    r = 0.5 * w.t
    return w.x, w.y / r, r


def synthesize(start: GPoint, end: GPoint) -> ControlSynthesis:
    if not _reachable(start, end):
        raise ValueError("no admissible path joins these points")
    ev = evaluate(start, end)
    x1, y1, r = _normalize(start, end)
    k, c = optimal_covector(ev.E * r * r, x1, y1)
    return ControlSynthesis(ev.E, k / r, c / (r * r), ev.psi)


def _regime_xy(E: float, k: float, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if E == 0.0:
        den = k * tau + 2.0
        x_num, y_num = 4.0, -2.0 * tau
    elif E > 0.0:
        a = math.sqrt(E)
        den = a * np.cosh(0.5 * a * tau) + k * np.sinh(0.5 * a * tau)
        x_num, y_num = E, -2.0 * np.sinh(0.5 * a * tau)
    else:
        a = math.sqrt(-E)
        den = a * np.cos(0.5 * a * tau) + k * np.sin(0.5 * a * tau)
        x_num, y_num = -E, -2.0 * np.sin(0.5 * a * tau)
    if np.any(den <= 0.0):
        raise ValueError("closed-form trajectory denominator vanishes on the interval")
    return x_num / den**2, y_num / den


def trajectory_arrays(start: GPoint, end: GPoint, n: int) -> dict[str, np.ndarray]:
    """Optimal path sampled at n uniform values of s, as arrays."""
    if n < 2:
        raise ValueError("need n >= 2 samples")
    if not _reachable(start, end):
        raise ValueError("no admissible path joins these points")
    ev = evaluate(start, end)
    x1, y1, r = _normalize(start, end)
    En = ev.E * r * r
    k, c = optimal_covector(En, x1, y1)
    s_n = np.linspace(0.0, 2.0, n)
    tau = 2.0 - s_n
    xn, yn = _regime_xy(En, k, tau)
    omega_n = k - c * yn
    x = end.x * xn
    omega = omega_n / r
    return {
        "s": r * s_n,
        "x": x,
        "y": end.y + end.x * r * yn,
        "t": end.t + r * tau,
        "omega": omega,
        "lambda1": omega / x,
    }


def trajectory(start: GPoint, end: GPoint, n: int) -> list[TrajectorySample]:
    a = trajectory_arrays(start, end, n)
    return [
        TrajectorySample(float(s), float(x), float(y), float(l1), float(w))
        for s, x, y, l1, w in zip(a["s"], a["x"], a["y"], a["lambda1"], a["omega"])
    ]


def trajectory_cost(samples) -> float:
    """Left Riemann sum of omega^2 over uniformly spaced samples."""
    s = np.array([p.s for p in samples])
    w = np.array([p.omega for p in samples])
    return float(np.sum(w[:-1] ** 2 * np.diff(s)))


# ---------------------------------------------------------------------------
# Hamilton-Jacobi residual


def hjb_residual(pole: GPoint, z: GPoint, h: float) -> float:
    """Central-difference value of Y Psi + (X Psi)^2 / 4 in the end-point variable.

    Psi is taken as a function of its end point z with the start ``pole``
    held fixed, X = x d/dx and Y = x d/dy - d/dt.  The whole stencil must
    stay inside the region where Psi is finite.
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    if not (pole.t > z.t + h and pole.y < z.y - h and z.x > h):
        raise ValueError("stencil leaves the region where psi is finite and smooth")

    def f(x: float, y: float, t: float) -> float:
        return psi(pole, GPoint(x, y, t))

    x, y, t = z.x, z.y, z.t
    dx = (f(x + h, y, t) - f(x - h, y, t)) / (2.0 * h)
    dy = (f(x, y + h, t) - f(x, y - h, t)) / (2.0 * h)
    dt = (f(x, y, t + h) - f(x, y, t - h)) / (2.0 * h)
    X = x * dx
    Y = x * dy - dt
    return Y + 0.25 * X * X
