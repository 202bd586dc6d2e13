"""Pure numpy implementation of the scaled Yor oscillatory integral.

    I(z, t) = int_0^inf exp(-xi^2/2t - z (cosh xi - 1)) sinh xi sin(pi xi / t) dxi

so that psi(z, t) = exp(-z) I(z, t).  The half-line is cut at the zeros
xi = m t of the sine, each half-period is integrated by adaptive
Gauss-Kronrod 15/7 and the alternating contributions are accumulated with
Neumaier summation.  The tail is dropped once the envelope falls below
``tail_cutoff`` times its maximum.
"""
from __future__ import annotations

import math

import numpy as np

from ._gk import FLAG_SUBDIVISION_LIMIT, FLAG_TRUNCATED, MAX_HALF_PERIODS, WG, WGK, XGK

_X = np.array(XGK)
_NODES = np.concatenate((-_X[:-1], _X[::-1]))  # 15 nodes, ascending
_WK = np.concatenate((np.array(WGK[:-1]), np.array(WGK[::-1])))
_WG = np.zeros(15)
for _i, _w in zip((1, 3, 5), WG[:3]):
    _WG[_i] = _w
    _WG[14 - _i] = _w
_WG[7] = WG[3]
_EPS = np.finfo(float).eps


def _log_env(xi: float, z: float, t: float) -> float:
    if xi <= 0.0:
        return -math.inf
    s = math.sinh(0.5 * xi)
    return -xi * xi / (2.0 * t) - 2.0 * z * s * s + math.log(math.sinh(xi))


def _peak(z: float, t: float) -> float:
    """Maximiser of the envelope; its log is strictly concave."""
    lo, hi = 0.0, 1.0
    while -hi / t - z * math.sinh(hi) + 1.0 / math.tanh(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if -mid / t - z * math.sinh(mid) + 1.0 / math.tanh(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _gk(a: float, b: float, z: float, t: float):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    xi = c + h * _NODES
    s = np.sinh(0.5 * xi)
    f = np.exp(-xi * xi / (2.0 * t) - 2.0 * z * s * s) * np.sinh(xi) * np.sin(np.pi * xi / t)
    k = h * float(_WK @ f)
    g = h * float(_WG @ f)
    return k, abs(k - g), h * float(_WK @ np.abs(f))


def _half_period(a: float, b: float, z: float, t: float, rel_tol: float, abs_tol: float,
                 max_sub: int):
    length = b - a
    stack = [(a, b)]
    val = err = aval = 0.0
    comp = 0.0
    n = 0
    limited = False
    while stack:
        lo, hi = stack.pop()
        k, e, ak = _gk(lo, hi, z, t)
        n += 1
        tol = max(rel_tol * ak, abs_tol * (hi - lo) / length, 50.0 * _EPS * ak)
        if e <= tol or n + len(stack) >= max_sub or hi - lo < 1e-12 * length:
            if e > tol:
                limited = True
            y = k - comp
            s = val + y
            comp = (s - val) - y
            val = s
            err += e
            aval += ak
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi))
            stack.append((lo, mid))
    return val, err, aval, limited


def scaled_integral(z: float, t: float, abs_tol: float, rel_tol: float, max_sub: int,
                    tail_cutoff: float) -> tuple[float, float, float, int, int]:
    """(value, quadrature error, integral of |integrand|, half periods, flags)."""
    peak = _peak(z, t)
    log_max = _log_env(peak, z, t)
    log_cut = math.log(tail_cutoff)
    total = 0.0
    comp = 0.0
    err = 0.0
    aval = 0.0
    flags = 0
    m = 0
    while True:
        a, b = m * t, (m + 1) * t
        v, e, av, limited = _half_period(a, b, z, t, rel_tol, abs_tol, max_sub)
        if limited:
            flags |= FLAG_SUBDIVISION_LIMIT
        # Neumaier summation of the alternating series
        s = total + v
        if abs(total) >= abs(v):
            comp += (total - s) + v
        else:
            comp += (v - s) + total
        total = s
        err += e
        aval += av
        m += 1
        if b > peak and _log_env(b, z, t) - log_max < log_cut:
            break
        if m >= MAX_HALF_PERIODS:
            flags |= FLAG_TRUNCATED
            break
    return total + comp, err, aval, m, flags


def scaled_integral_batch(z: np.ndarray, t: float, abs_tol: float, rel_tol: float,
                          max_sub: int, tail_cutoff: float):
    z = np.ascontiguousarray(z, dtype=float)
    n = z.size
    val = np.empty(n)
    err = np.empty(n)
    aval = np.empty(n)
    flags = np.zeros(n, dtype=np.int32)
    for i, zi in enumerate(z.ravel()):
        v, e, a, _, f = scaled_integral(float(zi), t, abs_tol, rel_tol, max_sub, tail_cutoff)
        val[i], err[i], aval[i], flags[i] = v, e, a, f
    shape = z.shape
    return val.reshape(shape), err.reshape(shape), aval.reshape(shape), flags.reshape(shape)
