"""Average-rate (Asian) options priced through the model kernels.

Arithmetic averages: under the risk-neutral drift r, put s = sigma^2 tau / 2
(tau the time left) and y = sigma^2 I / 2 (I the running integral of S).
Then (S, y) in time s is the L0 process up to the Girsanov weight
(X_s/x)^m exp(-m^2 s), m = r/sigma^2 - 1/2, so

    E[phi] = x^-m exp(-m^2 s) int Gamma0(x, y, s; xi, eta, 0) xi^m phi(xi, eta) dxi deta.

Geometric averages: log S is Gaussian and the running integral of log S is
an affine image of the (X, Y) pair of d_xx + x d_y - d_t, so the payoff is
integrated against that Gaussian kernel.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import ndtr

from .kernels import (DEFAULT_QUAD, F_UNSTABLE, T_MIN, QuadratureConfig, flag_names,
                      kolmo_kernel_array, yor_density_array)
from .montecarlo import McConfig, constant_model, feynman_kac_price

STYLES = ("fixed_strike", "floating_strike")
RIGHTS = ("call", "put")
AVERAGES = ("arithmetic", "geometric")


@dataclass(frozen=True)
class AsianOption:
    style: str
    right: str
    average: str
    strike: float
    maturity: float

    def __post_init__(self) -> None:
        if self.style not in STYLES:
            raise ValueError(f"style must be one of {STYLES}")
        if self.right not in RIGHTS:
            raise ValueError(f"right must be one of {RIGHTS}")
        if self.average not in AVERAGES:
            raise ValueError(f"average must be one of {AVERAGES}")
        if not self.strike >= 0.0:
            raise ValueError("strike must be non-negative")
        if not self.maturity > 0.0:
            raise ValueError("maturity must be positive")


@dataclass(frozen=True)
class Market:
    """Spot, running average to date, rate and volatility.

    ``elapsed`` is the part of the averaging window [0, maturity] already
    observed; A0 is the average over it (arithmetic or geometric to match
    the option).
    """

    S0: float
    A0: float
    r: float
    sigma: float
    elapsed: float = 0.0

    def __post_init__(self) -> None:
        if not self.S0 > 0.0:
            raise ValueError("S0 must be positive")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if not self.A0 >= 0.0:
            raise ValueError("A0 must be non-negative")
        if not self.elapsed >= 0.0:
            raise ValueError("elapsed must be non-negative")


def load_spec(doc: dict[str, Any] | str | Path) -> tuple[AsianOption, Market]:
    """Read {"option": {...}, "market": {...}} from a dict or a JSON file."""
    if not isinstance(doc, dict):
        doc = json.loads(Path(doc).read_text())
    try:
        return AsianOption(**doc["option"]), Market(**doc["market"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed option/market document: {exc}") from None


def dump_spec(option: AsianOption, market: Market) -> dict[str, Any]:
    return {"option": asdict(option), "market": asdict(market)}


def _remaining(option: AsianOption, market: Market) -> float:
    tau = option.maturity - market.elapsed
    if not tau > 0.0:
        raise ValueError("elapsed time must be shorter than the maturity")
    return tau


def _accumulated(option: AsianOption, market: Market) -> float:
    """Running integral of S (arithmetic) or log S (geometric) to date."""
    if market.elapsed == 0.0:
        return 0.0
    if option.average == "arithmetic":
        return market.A0 * market.elapsed
    if market.A0 <= 0.0:
        raise ValueError("a geometric running average must be positive")
    return math.log(market.A0) * market.elapsed


def payoff(option: AsianOption, S_T, A_T):
    """Payoff given the terminal spot and the time average A_T (already divided by T)."""
    S_T = np.asarray(S_T, float)
    A_T = np.asarray(A_T, float)
    if option.style == "fixed_strike":
        diff = A_T - option.strike
    else:
        diff = S_T - A_T
    out = np.maximum(diff if option.right == "call" else -diff, 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# L0 reduction


@dataclass(frozen=True)
class L0Point:
    x: float
    y: float
    t: float
    m: float
    weight: float  # x^m e^{m^2 t}; value = exp(-r tau) * u / weight


def reduce_to_L0(S: float, y: float, t: float, market: Market, T: float) -> L0Point:
    """Map (spot, running integral of S, calendar time) to L0 coordinates."""
    s2 = market.sigma**2
    m = market.r / s2 - 0.5
    tl = 0.5 * s2 * (T - t)
    return L0Point(S, 0.5 * s2 * y, tl, m, S**m * math.exp(m * m * tl))


def from_L0(p: L0Point, market: Market, T: float) -> tuple[float, float, float]:
    s2 = market.sigma**2
    return p.x, 2.0 * p.y / s2, T - 2.0 * p.t / s2


# ---------------------------------------------------------------------------
# reports


@dataclass
class PricingConfig:
    nodes: int = 64
    truncation: float = 1e-6
    scan: int = 64
    mc_paths: int = 200_000
    mc_steps: int = 200
    seed: int = 0
    threads: int | None = None
    quad: QuadratureConfig = DEFAULT_QUAD


DEFAULT_PRICING = PricingConfig()


@dataclass
class PriceReport:
    price: float
    est_error: float
    method: str
    flags: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"price": self.price, "est_error": self.est_error, "method": self.method,
                "flags": list(self.flags), "details": dict(self.details)}


# ---------------------------------------------------------------------------
# Monte Carlo


def price_monte_carlo(option: AsianOption, market: Market,
                      cfg: PricingConfig = DEFAULT_PRICING) -> PriceReport:
    tau = _remaining(option, market)
    acc = _accumulated(option, market)
    T = option.maturity
    model = constant_model(market.r, market.sigma)
    mc = McConfig(cfg.mc_paths, cfg.mc_steps, tau, cfg.seed, "exact_lognormal", antithetic=True)
    if option.average == "arithmetic":
        price, se = feynman_kac_price(lambda s, y: payoff(option, s, (acc + y) / T), model,
                                      market.r, mc, market.S0, threads=cfg.threads)
    else:
        price, se = feynman_kac_price(lambda s, y: payoff(option, s, np.exp((acc + y) / T)), model,
                                      market.r, mc, market.S0, threads=cfg.threads,
                                      integrand=np.log)
    return PriceReport(price, se, "monte_carlo", [],
                       {"n_paths": cfg.mc_paths, "n_steps": cfg.mc_steps, "seed": cfg.seed})


# ---------------------------------------------------------------------------
# arithmetic average by quadrature against Gamma0


def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


def _panel(lo: np.ndarray, hi: np.ndarray, x: np.ndarray, wt: np.ndarray):
    """Map Gauss-Legendre rule onto [lo, hi] (broadcast over leading axes)."""
    half = 0.5 * (hi - lo)
    return 0.5 * (hi + lo)[..., None] + half[..., None] * x, half[..., None] * wt


def price_arithmetic_quadrature(option: AsianOption, market: Market,
                                cfg: PricingConfig = DEFAULT_PRICING) -> PriceReport:
    if option.average != "arithmetic":
        raise ValueError("option must have an arithmetic average")
    tau = _remaining(option, market)
    T = option.maturity
    acc = _accumulated(option, market)
    pt = reduce_to_L0(market.S0, acc, T - tau, market, T)
    tp = 0.5 * pt.t  # time of the Yor pair
    if tp < T_MIN:
        warnings.warn(f"L0 time {pt.t:.4g} is below the kernel stability range; pricing by Monte Carlo",
                      RuntimeWarning, stacklevel=2)
        rep = price_monte_carlo(option, market, cfg)
        rep.method = "monte_carlo_fallback"
        rep.flags = ["unstable_small_t"]
        return rep

    x, y0, m, s2 = pt.x, pt.y, pt.m, market.sigma**2

    def integrand(w, la):
        """Density in (w, log a) times xi^m phi, plus its kernel error."""
        a = np.exp(la)
        xi = x * np.exp(2.0 * w)
        avg = (acc + 4.0 * x * a / s2) / T
        dens, derr, bits = yor_density_array(w, a, tp, cfg.quad, cfg.threads)
        g = a * xi**m
        pay = payoff(option, xi, avg)
        return dens * g * pay, derr * g * pay, bits, dens * g * (1.0 + option.strike + xi + avg)

    # truncation box from a coarse scan of the integrand envelope
    sq = math.sqrt(tp)
    wlo, whi = -10.0 * sq - 1.0, 10.0 * sq + 1.0
    llo, lhi = math.log(tp) - 12.0 * sq - 6.0, math.log(tp) + 12.0 * sq + 4.0
    gw = np.linspace(wlo, whi, cfg.scan)
    gl_ = np.linspace(llo, lhi, cfg.scan)
    W, L = np.meshgrid(gw, gl_, indexing="ij")
    env = integrand(W.ravel(), L.ravel())[3].reshape(W.shape)
    keep = env >= cfg.truncation * env.max()
    iw = np.flatnonzero(keep.any(axis=1))
    il = np.flatnonzero(keep.any(axis=0))
    iw0, iw1 = max(iw[0] - 1, 0), min(iw[-1] + 1, cfg.scan - 1)
    il0, il1 = max(il[0] - 1, 0), min(il[-1] + 1, cfg.scan - 1)
    box = (gw[iw0], gw[iw1], gl_[il0], gl_[il1])
    cell = (gw[1] - gw[0]) * (gl_[1] - gl_[0])
    outside = np.ones_like(keep)
    outside[iw0:iw1 + 1, il0:il1 + 1] = False
    trunc_err = float(env[outside].sum() * cell) + cfg.truncation * float(env.max()) * (box[1] - box[0]) * (box[3] - box[2])

    def kink(w):
        """log a where the payoff has its kink, per w (nan if none in the box)."""
        if option.style == "fixed_strike":
            a = (option.strike * T - acc) * s2 / (4.0 * x) * np.ones_like(w)
        else:
            a = (T * x * np.exp(2.0 * w) - acc) * s2 / (4.0 * x)
        with np.errstate(invalid="ignore", divide="ignore"):
            la = np.where(a > 0.0, np.log(np.where(a > 0.0, a, 1.0)), np.nan)
        return np.where((la > box[2]) & (la < box[3]), la, np.nan)

    xg, wg = _gl(cfg.nodes)

    def rule(split: int):
        wb = np.linspace(box[0], box[1], split + 1)
        wn, ww = _panel(wb[:-1], wb[1:], xg, wg)
        wn, ww = wn.ravel(), ww.ravel()
        # split log a at the kink (or the midpoint when there is none)
        k = kink(wn)
        brk = np.where(np.isnan(k), 0.5 * (box[2] + box[3]), k)
        f = np.arange(split + 1) / split
        left = box[2] + f[None, :] * (brk - box[2])[:, None]
        right = brk[:, None] + f[None, :] * (box[3] - brk)[:, None]
        lo = np.concatenate((left[:, :-1], right[:, :-1]), axis=1)
        hi = np.concatenate((left[:, 1:], right[:, 1:]), axis=1)
        ln, lw = _panel(lo, hi, xg, wg)  # (n_w, n_seg, nodes)
        Wn = np.broadcast_to(wn[:, None, None], ln.shape).ravel()
        val, err, bits, _ = integrand(Wn, ln.ravel())
        wts = (ww[:, None, None] * lw).ravel()
        return float(wts @ val), float(wts @ err), int(np.bitwise_or.reduce(bits))

    coarse, _, _ = rule(1)
    fine, kerr, bits = rule(2)
    scale = math.exp(-market.r * tau) / pt.weight
    price = scale * fine
    est = scale * (abs(fine - coarse) + kerr + trunc_err)
    flags = [f for f in flag_names(bits) if f != "exact"]
    if bits & F_UNSTABLE:
        est *= 10.0
    return PriceReport(float(price), float(est), "quadrature_gamma0", flags,
                       {"l0_time": pt.t, "m": m, "box": [float(b) for b in box],
                        "coarse": scale * coarse})


# ---------------------------------------------------------------------------
# geometric average


def _geometric_moments(option: AsianOption, market: Market):
    """Means, variances and covariance of (log S_T, log G)."""
    tau = _remaining(option, market)
    T = option.maturity
    acc = _accumulated(option, market)
    nu = market.r - 0.5 * market.sigma**2
    s2 = market.sigma**2
    m1 = math.log(market.S0) + nu * tau
    v1 = s2 * tau
    m2 = (acc + tau * math.log(market.S0) + 0.5 * nu * tau * tau) / T
    v2 = s2 * tau**3 / (3.0 * T * T)
    c = s2 * tau * tau / (2.0 * T)
    return tau, m1, v1, m2, v2, c


def geometric_closed_form(option: AsianOption, market: Market) -> float:
    """Lognormal closed form (fixed strike: Black-Scholes on G; floating: exchange option)."""
    if option.average != "geometric":
        raise ValueError("option must have a geometric average")
    tau, m1, v1, m2, v2, c = _geometric_moments(option, market)
    disc = math.exp(-market.r * tau)
    F2 = math.exp(m2 + 0.5 * v2)
    if option.style == "fixed_strike":
        K = option.strike
        if K == 0.0:
            return disc * F2 if option.right == "call" else 0.0
        sd = math.sqrt(v2)
        d1 = (m2 - math.log(K) + v2) / sd
        d2 = d1 - sd
        if option.right == "call":
            return disc * (F2 * ndtr(d1) - K * ndtr(d2))
        return disc * (K * ndtr(-d2) - F2 * ndtr(-d1))
    F1 = math.exp(m1 + 0.5 * v1)
    s = math.sqrt(v1 + v2 - 2.0 * c)
    d1 = (math.log(F1 / F2) + 0.5 * s * s) / s
    d2 = d1 - s
    if option.right == "call":
        return disc * (F1 * ndtr(d1) - F2 * ndtr(d2))
    return disc * (F2 * ndtr(-d2) - F1 * ndtr(-d1))


def price_geometric_quadrature(option: AsianOption, market: Market,
                               cfg: PricingConfig = DEFAULT_PRICING) -> PriceReport:
    """Integrate the payoff against the kernel of d_xx + x d_y - d_t.

    With X_0 = Y_0 = 0 and time tau left, log S_T = log S + nu tau + sigma X/sqrt2
    and the integral of log S gains tau log S + nu tau^2/2 + sigma Y/sqrt2.
    Nodes live in whitened coordinates rotated so the payoff kink is a
    coordinate line.
    """
    if option.average != "geometric":
        raise ValueError("option must have a geometric average")
    tau = _remaining(option, market)
    T = option.maturity
    acc = _accumulated(option, market)
    sig = market.sigma
    nu = market.r - 0.5 * sig * sig
    ls = math.log(market.S0)
    k = sig / math.sqrt(2.0)
    # covariance of (X, Y) and its Cholesky factor
    cov = np.array([[2.0 * tau, tau * tau], [tau * tau, 2.0 * tau**3 / 3.0]])
    C = np.linalg.cholesky(cov)
    # payoff kink: linear functional c . (X, Y) = const
    if option.style == "fixed_strike":
        grad = np.array([0.0, k / T])
        level = (math.log(option.strike) if option.strike > 0 else -math.inf) - (acc + tau * ls + 0.5 * nu * tau * tau) / T
    else:
        grad = np.array([k, -k / T])
        level = (acc + tau * ls + 0.5 * nu * tau * tau) / T - ls - nu * tau
    gz = C.T @ grad
    e1 = gz / np.linalg.norm(gz)
    R = np.column_stack((e1, [-e1[1], e1[0]]))  # z = R u
    u1_kink = level / np.linalg.norm(gz)

    xg, wg = _gl(cfg.nodes)
    L = 10.0

    def rule(split: int):
        b1 = [-L, L] if not (-L < u1_kink < L) else [-L, u1_kink, L]
        e1s = np.concatenate([np.linspace(lo, hi, split + 1)[:-1] for lo, hi in zip(b1[:-1], b1[1:])] + [[L]])
        e2s = np.linspace(-L, L, 2 * split + 1)
        n1, w1 = _panel(e1s[:-1], e1s[1:], xg, wg)
        n2, w2 = _panel(e2s[:-1], e2s[1:], xg, wg)
        U1, U2 = np.meshgrid(n1.ravel(), n2.ravel(), indexing="ij")
        Wt = np.outer(w1.ravel(), w2.ravel())
        Z = R @ np.vstack((U1.ravel(), U2.ravel()))
        XY = C @ Z
        dens = kolmo_kernel_array(0.0, 0.0, tau, XY[0], XY[1], 0.0)
        ST = np.exp(ls + nu * tau + k * XY[0])
        G = np.exp((acc + tau * ls + 0.5 * nu * tau * tau + k * XY[1]) / T)
        jac = abs(np.linalg.det(C))
        return float((Wt.ravel() * dens * jac) @ payoff(option, ST, G))

    coarse = rule(1)
    fine = rule(2)
    disc = math.exp(-market.r * tau)
    tail = 2.0 * math.exp(-0.5 * L * L)
    return PriceReport(disc * fine, disc * (abs(fine - coarse) + tail * abs(fine)) + 1e-15,
                       "quadrature_kolmogorov", [], {"coarse": disc * coarse})


def price(option: AsianOption, market: Market, cfg: PricingConfig = DEFAULT_PRICING,
          method: str = "quadrature") -> PriceReport:
    if method == "monte_carlo":
        return price_monte_carlo(option, market, cfg)
    if method != "quadrature":
        raise ValueError("method must be 'quadrature' or 'monte_carlo'")
    if option.average == "arithmetic":
        return price_arithmetic_quadrature(option, market, cfg)
    return price_geometric_quadrature(option, market, cfg)


# ---------------------------------------------------------------------------
# benchmarks


def k0_analytic(market: Market, maturity: float) -> float:
    """Fixed-strike arithmetic call with K = 0 at inception: e^{-rT} S0 (e^{rT} - 1)/(rT)."""
    r, T = market.r, maturity
    growth = math.expm1(r * T) / (r * T) if r != 0.0 else 1.0
    return math.exp(-r * T) * market.S0 * growth


K0_CASE = (AsianOption("fixed_strike", "call", "arithmetic", 0.0, 2.0),
           Market(S0=1.0, A0=0.0, r=0.05, sigma=1.0))

# L0 times sigma^2 T/2 of 0.6 to 1.0, inside the stable kernel range
BENCHMARKS = {
    "atm_call": (AsianOption("fixed_strike", "call", "arithmetic", 100.0, 1.5),
                 Market(S0=100.0, A0=0.0, r=0.05, sigma=1.0)),
    "otm_put": (AsianOption("fixed_strike", "put", "arithmetic", 80.0, 2.0),
                Market(S0=100.0, A0=0.0, r=0.03, sigma=0.8)),
    "floating_call": (AsianOption("floating_strike", "call", "arithmetic", 0.0, 1.0),
                      Market(S0=1.0, A0=0.0, r=0.1, sigma=1.2)),
}
