"""Brute-force minimum-energy steering by direct transcription.

The control is piecewise constant on a grid of ``pieces`` intervals, either
uniform or with Chebyshev-clustered breakpoints (finer near both ends,
where optimal controls are steepest).  With omega constant on a piece of
length d the state update is exact:

    x <- x * exp(omega d),   y <- y + x (exp(omega d) - 1) / omega.

The terminal x condition is linear in the controls, the terminal y
condition is handled by SLSQP with an analytic Jacobian.  SLSQP works in
u = omega sqrt(d), which makes the energy |u|^2 and keeps the problem well
conditioned on graded meshes.  Used only as an
independent check of the closed-form value function.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from .group import GPoint, left_translate


def _phi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(e^a - 1)/a and its derivative, stable near a = 0."""
    small = np.abs(a) < 1e-5
    safe = np.where(small, 1.0, a)
    em1 = np.expm1(safe)
    f = np.where(small, 1.0 + a / 2.0 + a * a / 6.0, em1 / safe)
    df = np.where(small, 0.5 + a / 3.0, (safe * (em1 + 1.0) - em1) / (safe * safe))
    return f, df


def _terminal_y(omega: np.ndarray, x1: float, y1: float, d: np.ndarray):
    a = omega * d
    log_x = math.log(x1) + np.concatenate(([0.0], np.cumsum(a)[:-1]))
    x = np.exp(log_x)
    f, df = _phi(a)
    inc = d * x * f
    yN = y1 + inc.sum()
    # d yN / d omega_i: own piece plus the effect of x_i on all later pieces
    later = np.concatenate((np.cumsum(inc[::-1])[::-1][1:], [0.0]))
    grad = d * d * x * df + d * later
    return yN, grad


def breakpoints(T: float, pieces: int, mesh: str = "uniform") -> np.ndarray:
    if mesh == "uniform":
        return np.linspace(0.0, T, pieces + 1)
    if mesh == "chebyshev":
        return 0.5 * T * (1.0 - np.cos(np.pi * np.arange(pieces + 1) / pieces))
    raise ValueError(f"unknown mesh {mesh!r}")


def minimize_energy(start: GPoint, end: GPoint, pieces: int = 200, starts: int = 4,
                    seed: int = 0, mesh: str = "uniform") -> float:
    """Least discrete energy over piecewise-constant controls."""
    w = left_translate(end, start)
    if not (w.t > 0.0 and w.y < 0.0):
        return math.inf
    x1, y1, T = w.x, w.y, w.t
    d = np.diff(breakpoints(T, pieces, mesh))
    need = -math.log(x1)  # sum(omega * d) must equal this

    sd = np.sqrt(d)

    def terminal(u):
        yN, g = _terminal_y(u / sd, x1, y1, d)
        return yN, g / sd

    cons = [
        {"type": "eq", "fun": lambda u: np.array([u @ sd - need]),
         "jac": lambda u: sd[None, :]},
        {"type": "eq", "fun": lambda u: np.array([terminal(u)[0]]),
         "jac": lambda u: terminal(u)[1][None, :]},
    ]

    def cost(u):
        return float(u @ u), 2.0 * u

    rng = np.random.default_rng(seed)
    s = (np.cumsum(d) - 0.5 * d) / T
    guesses = [np.full(pieces, need / T)]
    # x must dip when the y budget is short and swell when it is long
    tilt = math.log(abs(y1) / T / math.sqrt(x1))
    guesses.append(need / T + 4.0 * tilt * (s - 0.5))
    guesses.append(need / T - 4.0 * tilt * (s - 0.5))
    while len(guesses) < starts:
        guesses.append(need / T + rng.normal(scale=1.0, size=pieces))

    best = math.inf
    for g in guesses[:max(starts, 1)]:
        res = minimize(cost, g * sd, jac=True, constraints=cons, method="SLSQP",
                       options={"maxiter": 500, "ftol": 1e-14})
        u = res.x
        feas = abs(u @ sd - need) < 1e-8 and abs(terminal(u)[0]) < 1e-8
        if feas and res.fun < best:
            best = float(res.fun)
    return best
