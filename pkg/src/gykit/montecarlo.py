"""Monte Carlo for dX = mu X dt + sigma X dW, dY = X dt.

Paths are simulated in fixed-size blocks; block b draws from a Philox
stream keyed by (seed, b), so results do not depend on how many worker
threads process the blocks.  Y is accumulated with the trapezoid rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .parallel import ordered_map

SCHEMES = ("exact_lognormal", "euler", "milstein")
MAX_HALVINGS = 3

Coef = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class SdeModel:
    mu: Coef
    sigma: Coef
    descriptor: str
    sigma_min: float = 1e-8
    constant: tuple[float, float] | None = None  # (mu, sigma) if both are constant


def constant_model(mu: float, sigma: float, descriptor: str | None = None) -> SdeModel:
    return SdeModel(
        mu=lambda x, y, t: np.full_like(x, mu),
        sigma=lambda x, y, t: np.full_like(x, sigma),
        descriptor=descriptor or f"gbm(mu={mu!r},sigma={sigma!r})",
        sigma_min=0.0 if sigma == 0.0 else 1e-8,
        constant=(float(mu), float(sigma)),
    )


def l0_model() -> SdeModel:
    """Process generated by x^2 d_xx + x d_x + x d_y."""
    return constant_model(1.0, math.sqrt(2.0), "L0")


def operator_model(a: Coef, b: Coef | None = None, a_x: Coef | None = None,
                   descriptor: str = "operator", sigma_min: float = 1e-8) -> SdeModel:
    """SDE whose generator is a x^2 d_xx + (x a_x + a + b) x d_x + x d_y.

    sigma = sqrt(2a) and mu = b + a + x a_x.  a_x defaults to a central
    difference of a.
    """
    def mu(x, y, t):
        ax = a_x(x, y, t) if a_x is not None else (a(x * (1 + 1e-6), y, t) - a(x * (1 - 1e-6), y, t)) / (2e-6 * x)
        bb = b(x, y, t) if b is not None else 0.0
        return bb + a(x, y, t) + x * ax

    return SdeModel(mu=mu, sigma=lambda x, y, t: np.sqrt(2.0 * a(x, y, t)),
                    descriptor=descriptor, sigma_min=sigma_min)


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int
    horizon: float
    seed: int = 0
    scheme: str = "exact_lognormal"
    antithetic: bool = False
    block_size: int = 8192

    def __post_init__(self) -> None:
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be at least 1")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.block_size < 2 or self.block_size % 2:
            raise ValueError("block_size must be an even number >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class McResult:
    x: np.ndarray
    y: np.ndarray
    paths_x: np.ndarray | None = None
    paths_y: np.ndarray | None = None
    resimulated: int = 0
    meta: dict = field(default_factory=dict)


def block_rng(seed: int, block: int, level: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block, level))))


def _normals(rng: np.random.Generator, n: int, steps: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal((steps, n))
    half = rng.standard_normal((steps, (n + 1) // 2))
    return np.concatenate((half, -half), axis=1)[:, :n]


def _run(model: SdeModel, x0: float, y0: float, n: int, steps: int, T: float, scheme: str,
         z: np.ndarray, g: Callable, keep: bool):
    """Simulate n paths with the normals z (steps x n); returns x, y, bad mask, paths."""
    dt = T / steps
    sq = math.sqrt(dt)
    x = np.full(n, float(x0))
    y = np.full(n, float(y0))
    bad = np.zeros(n, dtype=bool)
    px = py = None
    if keep:
        px = np.empty((n, steps + 1))
        py = np.empty((n, steps + 1))
        px[:, 0], py[:, 0] = x, y
    gx = g(x)
    if scheme == "exact_lognormal":
        if model.constant is None:
            raise ValueError("exact_lognormal needs constant coefficients")
        m, s = model.constant
        drift = (m - 0.5 * s * s) * dt
    for k in range(steps):
        t = k * dt
        if scheme == "exact_lognormal":
            xn = x * np.exp(drift + s * sq * z[k])
        else:
            sig = model.sigma(x, y, t)
            if np.any(sig < model.sigma_min):
                raise ValueError(f"sigma fell below sigma_min={model.sigma_min} in {model.descriptor}")
            dw = sq * z[k]
            xn = x + model.mu(x, y, t) * x * dt + sig * x * dw
            if scheme == "milstein":
                hx = 1e-6 * np.abs(x) + 1e-12
                dsig = (model.sigma(x + hx, y, t) * (x + hx) - model.sigma(x - hx, y, t) * (x - hx)) / (2 * hx)
                xn = xn + 0.5 * sig * x * dsig * (dw * dw - dt)
            neg = ~(xn > 0.0)
            if np.any(neg):
                bad |= neg
                xn = np.where(neg, np.abs(x), xn)  # placeholder; these paths are redone
        gn = g(xn)
        y = y + 0.5 * dt * (gx + gn)
        x, gx = xn, gn
        if keep:
            px[:, k + 1], py[:, k + 1] = x, y
    return x, y, bad, px, py


def _simulate_block(model: SdeModel, x0: float, y0: float, cfg: McConfig, block: int, n: int,
                    g: Callable, keep: bool):
    rng = block_rng(cfg.seed, block)
    z = _normals(rng, n, cfg.n_steps, cfg.antithetic)
    x, y, bad, px, py = _run(model, x0, y0, n, cfg.n_steps, cfg.horizon, cfg.scheme, z, g, keep)
    redone = int(bad.sum())
    level = 0
    while np.any(bad):
        level += 1
        if level > MAX_HALVINGS:
            raise ArithmeticError(
                f"{int(bad.sum())} paths still leave x > 0 after {MAX_HALVINGS} step halvings")
        idx = np.flatnonzero(bad)
        steps = cfg.n_steps * 2**level
        zz = block_rng(cfg.seed, block, level).standard_normal((steps, idx.size))
        xr, yr, br, pxr, pyr = _run(model, x0, y0, idx.size, steps, cfg.horizon, cfg.scheme,
                                    zz, g, keep)
        x[idx], y[idx] = xr, yr
        if keep:
            px[idx], py[idx] = pxr[:, :: 2**level], pyr[:, :: 2**level]
        bad = np.zeros_like(bad)
        bad[idx] = br
    return x, y, px, py, redone


def simulate_paths(model: SdeModel, x0: float, y0: float, cfg: McConfig,
                   threads: int | None = None, keep_paths: bool = False,
                   integrand: Callable | None = None) -> McResult:
    """Terminal (X_T, Y_T) samples, Y_T = y0 + int_0^T integrand(X_s) ds (default X_s)."""
    if not x0 > 0.0:
        raise ValueError("x0 must be positive")
    g = integrand if integrand is not None else (lambda v: v)
    sizes = [min(cfg.block_size, cfg.n_paths - b * cfg.block_size)
             for b in range(-(-cfg.n_paths // cfg.block_size))]
    blocks = list(enumerate(sizes))
    out = ordered_map(lambda bs: _simulate_block(model, x0, y0, cfg, bs[0], bs[1], g, keep_paths),
                      blocks, threads)
    res = McResult(
        x=np.concatenate([o[0] for o in out]),
        y=np.concatenate([o[1] for o in out]),
        resimulated=sum(o[4] for o in out),
        meta={"model": model.descriptor, "blocks": len(blocks)},
    )
    if keep_paths:
        res.paths_x = np.concatenate([o[2] for o in out])
        res.paths_y = np.concatenate([o[3] for o in out])
    return res


def simulate_yor(t: float, cfg: McConfig, threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Samples of (W_t, A_t) with A_t = int_0^t exp(2 W_s) ds."""
    model = constant_model(0.0, 1.0, "brownian")
    c = McConfig(cfg.n_paths, cfg.n_steps, t, cfg.seed, "exact_lognormal", cfg.antithetic,
                 cfg.block_size)
    # X = exp(W - s/2) under zero drift; recover W and integrate exp(2W) along the way
    dt = t / cfg.n_steps

    def run(bs):
        b, n = bs
        z = _normals(block_rng(c.seed, b), n, c.n_steps, c.antithetic)
        w = np.zeros(n)
        a = np.zeros(n)
        e_prev = np.ones(n)
        sq = math.sqrt(dt)
        for k in range(c.n_steps):
            w = w + sq * z[k]
            e = np.exp(2.0 * w)
            a += 0.5 * dt * (e_prev + e)
            e_prev = e
        return w, a

    del model
    sizes = [min(c.block_size, c.n_paths - b * c.block_size) for b in range(-(-c.n_paths // c.block_size))]
    out = ordered_map(run, list(enumerate(sizes)), threads)
    return np.concatenate([o[0] for o in out]), np.concatenate([o[1] for o in out])


# ---------------------------------------------------------------------------
# density estimation


@dataclass
class DensitySurface:
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray  # values[i, j] at (x[i], y[j])
    bandwidth: tuple[float, float]
    n: int

    @property
    def rel_uncertainty(self) -> np.ndarray:
        """Std of a product-Gaussian KDE over its value: sqrt(R(K)/(n hx hy f))."""
        hx, hy = self.bandwidth
        with np.errstate(divide="ignore"):
            return np.sqrt(1.0 / (4.0 * math.pi * self.n * hx * hy * self.values))


def _spread(v: np.ndarray) -> float:
    sd = float(np.std(v))
    q75, q25 = np.percentile(v, [75, 25])
    iqr = float(q75 - q25) / 1.349
    return min(sd, iqr) if iqr > 0.0 else sd


def silverman_bandwidth(samples: np.ndarray) -> float | np.ndarray:
    """Per-coordinate Silverman bandwidth (4/(d+2))^(1/(d+4)) sigma n^(-1/(d+4))."""
    s = np.atleast_2d(np.asarray(samples, float))
    if s.shape[0] > s.shape[1]:
        s = s.T
    d, n = s.shape
    f = (4.0 / (d + 2.0)) ** (1.0 / (d + 4.0)) * n ** (-1.0 / (d + 4.0))
    h = np.array([_spread(row) * f for row in s])
    return float(h[0]) if d == 1 else h


def _gauss_matrix(grid: np.ndarray, pts: np.ndarray, h: float) -> np.ndarray:
    u = (grid[:, None] - pts[None, :]) / h
    return np.exp(-0.5 * u * u) / (h * math.sqrt(2.0 * math.pi))


def density_estimate(x_samples, y_samples, grid_x, grid_y,
                     bandwidth: tuple[float, float] | None = None,
                     chunk: int = 65536) -> DensitySurface:
    """Product-Gaussian KDE of 2-D samples on a tensor grid."""
    xs = np.asarray(x_samples, float)
    ys = np.asarray(y_samples, float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("samples must be two equal-length 1-D arrays")
    if xs.size < 10_000:
        raise ValueError("density estimation needs at least 1e4 samples")
    if np.ptp(xs) == 0.0 or np.ptp(ys) == 0.0:
        raise ValueError("degenerate samples: zero spread in a coordinate")
    gx = np.asarray(grid_x, float)
    gy = np.asarray(grid_y, float)
    if bandwidth is None:
        hx, hy = silverman_bandwidth(np.vstack((xs, ys)))
    else:
        hx, hy = bandwidth
    acc = np.zeros((gx.size, gy.size))
    for lo in range(0, xs.size, chunk):
        kx = _gauss_matrix(gx, xs[lo:lo + chunk], hx)
        ky = _gauss_matrix(gy, ys[lo:lo + chunk], hy)
        acc += kx @ ky.T
    return DensitySurface(gx, gy, acc / xs.size, (float(hx), float(hy)), xs.size)


def density_at(x_samples, y_samples, px, py, whiten: bool = True,
               chunk: int = 65536) -> np.ndarray:
    """2-D KDE at scattered points.

    With ``whiten`` the samples are decorrelated by the Cholesky factor of
    their covariance first (a full-covariance Gaussian kernel), which cuts
    the smoothing bias for strongly correlated pairs.
    """
    X = np.vstack((np.asarray(x_samples, float), np.asarray(y_samples, float)))
    P = np.vstack((np.ravel(px), np.ravel(py))).astype(float)
    if X.shape[1] < 10_000:
        raise ValueError("density estimation needs at least 1e4 samples")
    if np.ptp(X[0]) == 0.0 or np.ptp(X[1]) == 0.0:
        raise ValueError("degenerate samples: zero spread in a coordinate")
    jac = 1.0
    if whiten:
        Li = np.linalg.inv(np.linalg.cholesky(np.cov(X)))
        X, P = Li @ X, Li @ P
        jac = abs(float(np.linalg.det(Li)))
    hx, hy = silverman_bandwidth(X)
    acc = np.zeros(P.shape[1])
    for lo in range(0, X.shape[1], chunk):
        kx = _gauss_matrix(P[0], X[0, lo:lo + chunk], hx)
        ky = _gauss_matrix(P[1], X[1, lo:lo + chunk], hy)
        acc += np.einsum("ij,ij->i", kx, ky)
    return jac * acc / X.shape[1]


def density_estimate_1d(samples, grid, bandwidth: float | None = None,
                        chunk: int = 65536) -> np.ndarray:
    s = np.asarray(samples, float)
    g = np.asarray(grid, float)
    if s.size < 10_000:
        raise ValueError("density estimation needs at least 1e4 samples")
    if np.ptp(s) == 0.0:
        raise ValueError("degenerate samples")
    h = silverman_bandwidth(s) if bandwidth is None else bandwidth
    acc = np.zeros(g.size)
    for lo in range(0, s.size, chunk):
        acc += _gauss_matrix(g, s[lo:lo + chunk], h).sum(axis=1)
    return acc / s.size


@dataclass
class DensityComparison:
    rel_error: np.ndarray
    rel_uncertainty: np.ndarray
    scored: np.ndarray
    median: float
    q90: float
    max: float
    n_scored: int


def compare_density(surface: DensitySurface, kernel, high_density: float = 0.1,
                    max_rel_uncertainty: float = 0.2) -> DensityComparison:
    """Relative error of a KDE surface against kernel values on the same grid.

    ``kernel`` is an array shaped like ``surface.values`` or a callable of the
    meshgrid arrays (X, Y).  Nodes are scored where the KDE relative
    uncertainty is below ``max_rel_uncertainty`` and the kernel exceeds
    ``high_density`` times its maximum.
    """
    if callable(kernel):
        X, Y = np.meshgrid(surface.x, surface.y, indexing="ij")
        kv = np.asarray(kernel(X, Y), float)
    else:
        kv = np.asarray(kernel, float)
    if kv.shape != surface.values.shape:
        raise ValueError(f"grid mismatch: kernel {kv.shape} vs surface {surface.values.shape}")
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(kv > 0.0, np.abs(surface.values - kv) / kv,
                       np.where(surface.values == 0.0, 0.0, np.inf))
    unc = surface.rel_uncertainty
    scored = (unc < max_rel_uncertainty) & (kv >= high_density * kv.max())
    vals = rel[scored]
    if vals.size == 0:
        return DensityComparison(rel, unc, scored, math.nan, math.nan, math.nan, 0)
    return DensityComparison(rel, unc, scored, float(np.median(vals)),
                             float(np.quantile(vals, 0.9)), float(vals.max()), int(vals.size))


# ---------------------------------------------------------------------------
# pricing


def risk_neutral(model: SdeModel, r: float) -> SdeModel:
    const = (float(r), model.constant[1]) if model.constant is not None else None
    return SdeModel(mu=lambda x, y, t: np.full_like(x, r), sigma=model.sigma,
                    descriptor=f"{model.descriptor}|drift=r", sigma_min=model.sigma_min,
                    constant=const)


def feynman_kac_price(payoff: Callable[[np.ndarray, np.ndarray], np.ndarray], model: SdeModel,
                      r: float, cfg: McConfig, s0: float, y0: float = 0.0,
                      threads: int | None = None,
                      integrand: Callable | None = None) -> tuple[float, float]:
    """Discounted mean of payoff(S_T, Y_T) under drift r, and its standard error.

    Y_T = y0 + int_0^T S dt (or of ``integrand(S)``); the payoff does any
    averaging.
    """
    res = simulate_paths(risk_neutral(model, r), s0, y0, cfg, threads, integrand=integrand)
    v = np.asarray(payoff(res.x, res.y), float) * np.ones_like(res.x)
    if not np.all(np.isfinite(v)):
        raise ValueError("payoff produced non-finite values")
    disc = math.exp(-r * cfg.horizon)
    if cfg.antithetic:
        v = _pair_means(v, cfg.block_size)
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return disc * float(np.mean(v)), disc * se


def _pair_means(v: np.ndarray, block: int) -> np.ndarray:
    """Average each draw with its antithetic partner (pairs live inside one block)."""
    out = []
    for lo in range(0, v.size, block):
        b = v[lo:lo + block]
        h = (b.size + 1) // 2
        first, second = b[:h], b[h:]
        k = second.size
        out.append(0.5 * (first[:k] + second))
        if h > k:
            out.append(first[k:])
    return np.concatenate(out)
