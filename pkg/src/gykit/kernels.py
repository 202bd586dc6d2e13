"""Explicit fundamental solutions.

* Yor's joint density p(w, a, t) of (W_t, int_0^t exp(2 W_s) ds) and the
  oscillatory integral psi(z, t) inside it;
* Gamma0, the fundamental solution of L0 = x^2 d_xx + x d_x + x d_y - d_t,
  built from p;
* the Kolmogorov kernels of d_xx + x d_y - d_t and of its constant
  coefficient family;
* Gamma^mu, the fundamental solution of mu x^2 d_xx + x d_x + x d_y - d_t,
  obtained from Gamma0 by a power weight and a rescaling of (y, t).

Array functions return (value, est_error, flag bits); the scalar wrappers
return ``KernelEval``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._gk import FLAG_SUBDIVISION_LIMIT, FLAG_TRUNCATED
from .group import GPoint
from .parallel import ordered_map

T_MIN = 0.25  # below this p-time the e^{pi^2/2t} cancellation eats the digits
EPS = float(np.finfo(float).eps)

F_TRUNCATED = FLAG_TRUNCATED
F_SUBDIVISION = FLAG_SUBDIVISION_LIMIT
F_UNSTABLE = 4
F_CLAMPED = 8
F_EXACT = 16

_FLAG_NAMES = (
    (F_EXACT, "exact"),
    (F_TRUNCATED, "truncated_tail"),
    (F_SUBDIVISION, "subdivision_limit"),
    (F_UNSTABLE, "unstable_small_t"),
    (F_CLAMPED, "clamped_negative"),
)


def flag_names(bits: int) -> tuple[str, ...]:
    names = tuple(name for bit, name in _FLAG_NAMES if bits & bit)
    return names if names else ("quadrature",)


@dataclass(frozen=True, slots=True)
class QuadratureConfig:
    abs_tol: float = 1e-30
    rel_tol: float = 1e-12
    max_subdivisions: int = 200
    tail_cutoff: float = 1e-18

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.tail_cutoff > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be at least 16")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True, slots=True)
class KernelEval:
    value: float
    est_error: float
    flags: tuple[str, ...]


def _finish(val: np.ndarray, err: np.ndarray, bits: np.ndarray):
    """Clamp negative round-off to 0; anything beyond the error bar is a bug."""
    bad = val < -err
    if np.any(bad):
        raise ArithmeticError(
            f"kernel value {val[bad][0]!r} is negative beyond its error estimate {err[bad][0]!r}")
    neg = val < 0.0
    if np.any(neg):
        val = np.where(neg, 0.0, val)
        bits = np.where(neg, bits | F_CLAMPED, bits)
    return val, err, bits


def _scaled_psi(z: np.ndarray, t: float, cfg: QuadratureConfig):
    """exp(z) psi(z, t) with error including the accumulator's round-off floor."""
    v, e, a, f = _backend.scaled_integral_batch(z, t, cfg.abs_tol, cfg.rel_tol,
                                                cfg.max_subdivisions, cfg.tail_cutoff)
    e = e + 4.0 * EPS * a
    f = f.astype(np.int64)
    if t < T_MIN:
        e = 10.0 * e
        f = f | F_UNSTABLE
    return v, e, f


# ---------------------------------------------------------------------------
# psi and Yor's density


def yor_psi_array(z, t: float, cfg: QuadratureConfig = DEFAULT_QUAD):
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0.0)) or not t > 0.0:
        raise ValueError("yor_psi needs z > 0 and t > 0")
    v, e, f = _scaled_psi(z, float(t), cfg)
    scale = np.exp(-z)
    return _finish(v * scale, e * scale, f)


def yor_psi(z: float, t: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> KernelEval:
    v, e, f = yor_psi_array(np.array([z]), t, cfg)
    return KernelEval(float(v[0]), float(e[0]), flag_names(int(f[0])))


def _yor_density_fixed_t(w: np.ndarray, a: np.ndarray, t: float, cfg: QuadratureConfig):
    # exp(-(1+e^{2w})/2a) psi(e^w/a) = exp(-(1+e^w)^2/2a) * scaled psi
    out_v = np.zeros(w.shape)
    out_e = np.zeros(w.shape)
    out_f = np.zeros(w.shape, dtype=np.int64)
    live = w < 700.0
    if not np.any(live):
        return out_v, out_e, out_f | F_EXACT
    wl, al = w[live], a[live]
    ew = np.exp(wl)
    log_pref = (math.pi**2 / (2.0 * t) - math.log(math.pi * math.sqrt(2.0 * math.pi * t))
                - (1.0 + ew) ** 2 / (2.0 * al) + wl - 2.0 * np.log(al))
    z = ew / al
    ok = np.isfinite(z) & (z > 0.0) & (log_pref > -745.0)
    v = np.zeros(wl.shape)
    e = np.zeros(wl.shape)
    f = np.full(wl.shape, F_EXACT, dtype=np.int64)
    if np.any(ok):
        sv, se, sf = _scaled_psi(z[ok], t, cfg)
        lp = log_pref[ok]
        # the prefactor alone can overflow at small t; combine in log space
        with np.errstate(divide="ignore"):
            v[ok] = np.sign(sv) * np.exp(np.minimum(lp + np.log(np.abs(sv)), 709.0))
            e[ok] = np.exp(np.minimum(lp + np.log(se), 709.0))
        f[ok] = sf
    out_v[live], out_e[live], out_f[live] = v, e, f
    out_f[~live] = F_EXACT
    return out_v, out_e, out_f


def yor_density_array(w, a, t, cfg: QuadratureConfig = DEFAULT_QUAD, threads: int | None = None):
    """p(w, a, t) on broadcast arrays; grouped by distinct t for the quadrature."""
    w, a, t = np.broadcast_arrays(np.asarray(w, float), np.asarray(a, float),
                                  np.asarray(t, float))
    if np.any(~(a > 0.0)) or np.any(~(t > 0.0)):
        raise ValueError("yor_density needs y > 0 and t > 0")
    shape = w.shape
    w, a, t = w.ravel(), a.ravel(), t.ravel()
    val = np.zeros(w.size)
    err = np.zeros(w.size)
    bits = np.zeros(w.size, dtype=np.int64)
    tasks = []
    for tv in np.unique(t):
        idx = np.flatnonzero(t == tv)
        for chunk in np.array_split(idx, max(1, idx.size // 512)):
            tasks.append((float(tv), chunk))

    def run(task):
        tv, idx = task
        return _yor_density_fixed_t(w[idx], a[idx], tv, cfg)

    for (tv, idx), (v, e, f) in zip(tasks, ordered_map(run, tasks, threads)):
        val[idx], err[idx], bits[idx] = v, e, f
    val, err, bits = _finish(val, err, bits)
    return val.reshape(shape), err.reshape(shape), bits.reshape(shape)


def yor_density(w: float, y: float, t: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> KernelEval:
    v, e, f = yor_density_array(w, y, t, cfg)
    return KernelEval(float(v), float(e), flag_names(int(f)))


# ---------------------------------------------------------------------------
# Gamma0


def gamma0_array(x, y, t, x0, y0, t0, cfg: QuadratureConfig = DEFAULT_QUAD,
                 threads: int | None = None):
    """Gamma0((x, y, t); (x0, y0, t0)) on broadcast arrays.

    Gamma0 = p(log(x0/x)/2, (y0 - y)/(2x), (t - t0)/2) / (4 x x0), and 0 off
    the support {t > t0, y < y0}.
    """
    x, y, t, x0, y0, t0 = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, t, x0, y0, t0)))
    if np.any(~(x > 0.0)) or np.any(~(x0 > 0.0)):
        raise ValueError("x coordinates must be positive")
    shape = x.shape
    val = np.zeros(shape)
    err = np.zeros(shape)
    bits = np.full(shape, F_EXACT, dtype=np.int64)
    sup = (t > t0) & (y < y0)
    if np.any(sup):
        xs, x0s = x[sup], x0[sup]
        v, e, f = yor_density_array(0.5 * np.log(x0s / xs), (y0[sup] - y[sup]) / (2.0 * xs),
                                    0.5 * (t[sup] - t0[sup]), cfg, threads)
        jac = 1.0 / (4.0 * xs * x0s)
        val[sup], err[sup], bits[sup] = v * jac, e * jac, f
    return val, err, bits


def gamma0(z: GPoint, pole: GPoint, cfg: QuadratureConfig = DEFAULT_QUAD) -> KernelEval:
    v, e, f = gamma0_array(z.x, z.y, z.t, pole.x, pole.y, pole.t, cfg)
    return KernelEval(float(v), float(e), flag_names(int(f)))


def gamma_mu_array(mu: float, x, y, t, x0, y0, t0, cfg: QuadratureConfig = DEFAULT_QUAD,
                   threads: int | None = None):
    """Fundamental solution of mu x^2 d_xx + x d_x + x d_y - d_t.

    With m = 1/2 - 1/(2 mu):
        Gamma^mu = mu (x/x0)^m exp(-mu m^2 (t - t0)) Gamma0((x, mu y, mu t); (x0, mu y0, mu t0)).
    """
    if not mu > 0.0:
        raise ValueError("mu must be positive")
    x, y, t, x0, y0, t0 = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, t, x0, y0, t0)))
    if mu == 1.0:
        return gamma0_array(x, y, t, x0, y0, t0, cfg, threads)
    m = 0.5 - 0.5 / mu
    v, e, f = gamma0_array(x, mu * y, mu * t, x0, mu * y0, mu * t0, cfg, threads)
    dt = np.where(t > t0, t - t0, 0.0)
    w = mu * (x / x0) ** m * np.exp(-mu * m * m * dt)
    return v * w, e * w, f


def gamma_mu(mu: float, z: GPoint, pole: GPoint, cfg: QuadratureConfig = DEFAULT_QUAD) -> KernelEval:
    v, e, f = gamma_mu_array(mu, z.x, z.y, z.t, pole.x, pole.y, pole.t, cfg)
    return KernelEval(float(v), float(e), flag_names(int(f)))


# ---------------------------------------------------------------------------
# Kolmogorov kernels


def kolmo_kernel_array(x, y, t, xi, eta, tau):
    """Fundamental solution of d_xx + x d_y - d_t (one space dimension each)."""
    x, y, t, xi, eta, tau = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, t, xi, eta, tau)))
    out = np.zeros(x.shape)
    live = t > tau
    if np.any(live):
        s = (t - tau)[live]
        dx = (x - xi)[live]
        dy = (y - eta)[live] + 0.5 * s * (x + xi)[live]
        out[live] = (math.sqrt(3.0) / (2.0 * math.pi * s * s)
                     * np.exp(-dx * dx / (4.0 * s) - 3.0 * dy * dy / s**3))
    return out


def kolmo_kernel(z, pole) -> float:
    x, y, t = z
    xi, eta, tau = pole
    return float(kolmo_kernel_array(x, y, t, xi, eta, tau))


def kolmo_kernel_mu(n: int, mu: float, z, pole) -> float:
    """Constant coefficient kernel of mu Lap_x + <x, grad_y> - d_t on R^{2n+1}.

    ``z`` and ``pole`` are (x, y, t) with x, y of length n (scalars allowed
    for n = 1).
    """
    if n < 1 or not mu > 0.0:
        raise ValueError("need n >= 1 and mu > 0")
    x, y, t = z
    xi, eta, tau = pole
    if not t > tau:
        return 0.0
    x, y, xi, eta = (np.broadcast_to(np.asarray(v, float), (n,)) for v in (x, y, xi, eta))
    s = t - tau
    dx = x - xi
    dy = y - eta + 0.5 * s * (x + xi)
    q = float(dx @ dx) / s + 12.0 * float(dy @ dy) / s**3
    return 3.0 ** (n / 2.0) / ((2.0 * math.pi * mu) ** n * s ** (2 * n)) * math.exp(-q / (4.0 * mu))


# ---------------------------------------------------------------------------
# finite-difference residuals


def operator_residual(fn, z: GPoint, h: float, mu: float = 1.0) -> float:
    """mu x^2 f_xx + x f_x + x f_y - f_t by central differences at z."""
    x, y, t = z.x, z.y, z.t
    pts = np.array([
        (x, y, t), (x + h, y, t), (x - h, y, t),
        (x, y + h, t), (x, y - h, t), (x, y, t + h), (x, y, t - h),
    ])
    f = fn(pts[:, 0], pts[:, 1], pts[:, 2])
    fxx = (f[1] - 2.0 * f[0] + f[2]) / (h * h)
    fx = (f[1] - f[2]) / (2.0 * h)
    fy = (f[3] - f[4]) / (2.0 * h)
    ft = (f[5] - f[6]) / (2.0 * h)
    return float(mu * x * x * fxx + x * fx + x * fy - ft)


def _check_away(z: GPoint, pole: GPoint, h: float, min_distance: float) -> None:
    if math.dist(z.as_tuple(), pole.as_tuple()) < min_distance:
        raise ValueError("point is too close to the pole")
    if not (z.t - h > pole.t and z.y + h < pole.y and z.x - h > 0.0):
        raise ValueError("stencil leaves the open support")


def pde_residual_L0(z: GPoint, pole: GPoint, h: float, cfg: QuadratureConfig = DEFAULT_QUAD,
                    min_distance: float = 0.1) -> float:
    _check_away(z, pole, h, min_distance)
    return operator_residual(
        lambda x, y, t: gamma0_array(x, y, t, pole.x, pole.y, pole.t, cfg)[0], z, h)


def pde_residual_mu(mu: float, z: GPoint, pole: GPoint, h: float,
                    cfg: QuadratureConfig = DEFAULT_QUAD, min_distance: float = 0.1) -> float:
    _check_away(z, pole, h, min_distance)
    return operator_residual(
        lambda x, y, t: gamma_mu_array(mu, x, y, t, pole.x, pole.y, pole.t, cfg)[0], z, h, mu)


def pde_residual_kolmo(z, pole, h: float) -> float:
    """f_xx + x f_y - f_t applied to the Kolmogorov kernel at z."""
    x, y, t = z
    xi, eta, tau = pole

    def f(a, b, c):
        return float(kolmo_kernel_array(a, b, c, xi, eta, tau))

    fxx = (f(x + h, y, t) - 2.0 * f(x, y, t) + f(x - h, y, t)) / (h * h)
    fy = (f(x, y + h, t) - f(x, y - h, t)) / (2.0 * h)
    ft = (f(x, y, t + h) - f(x, y, t - h)) / (2.0 * h)
    return fxx + x * fy - ft
