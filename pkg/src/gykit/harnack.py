"""Admissible paths and Harnack chains along them.

An admissible path solves x' = omega x, y' = x, t' = -1 from a start
(x0, y0, t0).  Chain times are picked by the recursion

    t_{j+1} = max{t, t_j - theta^2/4, t_j - theta^2 (t_j - T0), s_h(t_j)}

with s_h(t_j) the earliest time s such that the control energy on
[s, t_j] is at most h = 4 log^2(3/2).  Each step costs one factor M in the
Harnack inequality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .group import GPoint, in_paraboloid

H_BUDGET = 4.0 * math.log(1.5) ** 2


@dataclass(frozen=True)
class ChainConfig:
    theta: float = 0.5
    M: float = 10.0
    T0: float = -1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if not self.M > 1.0:
            raise ValueError("M must exceed 1")

    @property
    def h(self) -> float:
        return H_BUDGET

    @property
    def beta(self) -> float:
        return math.log(self.M) / abs(math.log(1.0 - self.theta**2))


@dataclass(frozen=True)
class Control:
    """Piecewise-constant control on a uniform grid of the path parameter s in [0, d]."""

    values: np.ndarray
    d: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size < 1 or not self.d > 0.0:
            raise ValueError("control needs a non-empty 1-D value array and d > 0")

    @classmethod
    def zero(cls, d: float) -> "Control":
        return cls(np.zeros(1), d)

    @property
    def width(self) -> float:
        return self.d / self.values.size

    def __call__(self, s):
        idx = np.clip((np.asarray(s, float) / self.width).astype(int), 0, self.values.size - 1)
        return self.values[idx]

    def cumulative_energy(self) -> np.ndarray:
        """Energy int_0^s omega^2 at the cell boundaries."""
        return np.concatenate(([0.0], np.cumsum(self.values**2) * self.width))

    def energy(self, s0: float = 0.0, s1: float | None = None) -> float:
        s1 = self.d if s1 is None else s1
        return self._energy_to(s1) - self._energy_to(s0)

    def _energy_to(self, s: float) -> float:
        s = min(max(s, 0.0), self.d)
        cum = self.cumulative_energy()
        j = min(int(s / self.width), self.values.size - 1)
        return float(cum[j] + self.values[j] ** 2 * (s - j * self.width))

    def reach(self, s0: float, budget: float) -> float:
        """Largest s >= s0 with energy on [s0, s] <= budget (inf if never exceeded)."""
        cum = self.cumulative_energy()
        target = self._energy_to(s0) + budget
        if cum[-1] <= target:
            return math.inf
        j = int(np.searchsorted(cum, target, side="right")) - 1
        rate = self.values[j] ** 2
        return j * self.width + (target - cum[j]) / rate


@dataclass(frozen=True)
class AdmissiblePath:
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray

    @property
    def start(self) -> GPoint:
        return GPoint(self.x[0], self.y[0], self.t[0])

    @property
    def end(self) -> GPoint:
        return GPoint(self.x[-1], self.y[-1], self.t[-1])

    def point_at_time(self, tau: float) -> GPoint:
        """Interpolate the path at time tau (log-linear in x, linear in y)."""
        if not self.t[-1] - 1e-12 <= tau <= self.t[0] + 1e-12:
            raise ValueError(f"time {tau} outside the path span [{self.t[-1]}, {self.t[0]}]")
        s = self.t[0] - tau
        lx = np.interp(s, self.s, np.log(self.x))
        return GPoint(math.exp(lx), float(np.interp(s, self.s, self.y)), tau)


def integrate_admissible_path(start: GPoint, omega, d: float, steps: int) -> AdmissiblePath:
    """Integrate x' = omega x, y' = x, t' = -1 over s in [0, d].

    ``omega`` is either a callable of s or an array of its values at the
    steps + 1 grid nodes.  int omega and the y increment use the trapezoid
    rule; the x update is the exact exponential of the integrated control.
    """
    if not d > 0.0 or steps < 1:
        raise ValueError("need d > 0 and steps >= 1")
    s = np.linspace(0.0, d, steps + 1)
    if callable(omega):
        w = np.asarray(omega(s), dtype=float) * np.ones_like(s)
    else:
        w = np.asarray(omega, dtype=float)
        if w.shape != s.shape:
            raise ValueError(f"expected {steps + 1} control samples, got {w.shape}")
    ds = d / steps
    log_x = math.log(start.x) + np.concatenate(([0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * ds)))
    x = np.exp(log_x)
    y = start.y + np.concatenate(([0.0], np.cumsum(0.5 * (x[1:] + x[:-1]) * ds)))
    return AdmissiblePath(s, x, y, start.t - s)


def _check_order(t: float, t0: float, cfg: ChainConfig) -> None:
    if not cfg.T0 < t < t0:
        raise ValueError(f"need T0 < t < t0, got T0={cfg.T0}, t={t}, t0={t0}")


def chain_times(t: float, t0: float, cfg: ChainConfig,
                omega: Control | None = None) -> list[float]:
    """Harnack chain times from t0 down to t.

    ``omega`` lives on the path parameter s = t0 - time; None means omega = 0,
    for which the energy term never binds.
    """
    _check_order(t, t0, cfg)
    th2 = cfg.theta**2
    times = [t0]
    tj = t0
    while tj > t:
        cand = [t, tj - th2 / 4.0, tj - th2 * (tj - cfg.T0)]
        if omega is not None:
            s_far = omega.reach(t0 - tj, cfg.h)
            if math.isfinite(s_far):
                cand.append(t0 - s_far)
        nxt = max(cand)
        if not nxt < tj:
            raise ArithmeticError("chain recursion stalled")
        times.append(nxt)
        tj = nxt
    return times


def chain_count_bound(phi: float, t: float, t0: float, cfg: ChainConfig) -> float:
    """Upper bound for k = (number of chain steps) - 1.

    Steps of length theta^2/4 number at most 4(t0-t)/theta^2, energy-limited
    steps at most phi/h, and steps that shrink (t_j - T0) by (1 - theta^2) at
    most log((t0-T0)/(t-T0))/|log(1-theta^2)|; the last step is the +1.
    """
    _check_order(t, t0, cfg)
    return (phi / cfg.h + 4.0 * (t0 - t) / cfg.theta**2
            + math.log((t0 - cfg.T0) / (t - cfg.T0)) / abs(math.log(1.0 - cfg.theta**2)))


@dataclass(frozen=True)
class ChainPoints:
    points: list[GPoint]
    verified: list[bool]  # link j: points[j+1] lies in the paraboloid of points[j]

    @property
    def all_verified(self) -> bool:
        return all(self.verified)


def chain_points(path: AdmissiblePath, times: list[float], theta: float) -> ChainPoints:
    pts = [path.point_at_time(tau) for tau in times]
    ok = []
    for a, b in zip(pts[:-1], pts[1:]):
        r = math.sqrt(a.t - b.t) / theta * (1.0 + 1e-12)
        ok.append(in_paraboloid(b, a, r, theta))
    return ChainPoints(pts, ok)


def samples_in_paraboloid(path: AdmissiblePath, r: float, theta: float) -> np.ndarray:
    """Membership of every path sample after the first in P_r of the path start."""
    c = path.start
    return np.array([in_paraboloid(GPoint(x, y, t), c, r, theta)
                     for x, y, t in zip(path.x[1:], path.y[1:], path.t[1:])])


def lower_bound_multiplier(phi: float, t: float, t0: float, cfg: ChainConfig) -> float:
    """m with u(x0, y0, t0) >= m u(x, y, t) for the path endpoint (x, y, t).

    m = ((t-T0)/(t0-T0))^beta M^(-1 - phi/h - 4(t0-t)/theta^2), i.e.
    M^-(1 + chain_count_bound).
    """
    if phi < 0.0:
        raise ValueError("phi must be non-negative")
    _check_order(t, t0, cfg)
    ratio = (t - cfg.T0) / (t0 - cfg.T0)
    return ratio**cfg.beta * cfg.M ** (-1.0 - phi / cfg.h - 4.0 * (t0 - t) / cfg.theta**2)


def seeded_lower_constant(kappa: float, eps: float, T: float, cfg: ChainConfig) -> float:
    """c- obtained by chaining from the seed Gamma(1, -s, s; 1, 0, 0) >= kappa / s^2.

    With s = eps t, T0 = 0 and a zero-energy path the chain gives
    kappa eps^beta / (4 eps^2) M^(-1 - 4T/theta^2).
    """
    return kappa * eps**cfg.beta / (4.0 * eps * eps) * cfg.M ** (-1.0 - 4.0 * T / cfg.theta**2)
