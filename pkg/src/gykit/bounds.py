"""Two-sided bounds for the fundamental solution and their empirical calibration.

Lower:  c-/(x0^2 (t-t0)^2) exp(-C- Psi(x, y + x0 eps (t-t0), t - eps (t-t0); pole))
Upper:  C+/(x0^2 (t-t0)^2) exp(-c+ Psi(x, y - x0 eps, t + eps; pole))

The constants exist but are not given explicitly, so they are configuration
here; ``calibrate_constants`` fits the tightest values a grid allows.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .group import GPoint
from .kernels import DEFAULT_QUAD, QuadratureConfig, gamma_mu
from .value_function import psi

_SAFETY = 4.0 * float(np.finfo(float).eps)


@dataclass(frozen=True)
class BoundsConfig:
    eps: float
    C_minus: float = 1.0
    c_minus_eps: float = 1.0
    c_plus: float = 1.0 / 16.0  # 1/(16 M1) with M1 = sup a = 1 for L0
    C_plus_eps: float = 1.0
    mu_minus: float = 1.0
    mu_plus: float = 1.0
    k_minus: float = 1.0
    k_plus: float = 1.0
    T: float = math.inf
    lam: float = 1.0  # ellipticity bounds of the diffusion coefficient, metadata only
    Lam: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        for name in ("C_minus", "c_minus_eps", "c_plus", "C_plus_eps", "mu_minus", "mu_plus",
                     "k_minus", "k_plus", "T", "lam", "Lam"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def M1(self) -> float:
        return self.Lam

    def to_dict(self) -> dict:
        d = asdict(self)
        d["T"] = _num(self.T)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BoundsConfig":
        d = dict(d)
        if "T" in d:
            d["T"] = float(d["T"])
        return cls(**d)


@dataclass
class SandwichReport:
    grid_size: int
    admissible: int
    violations_lower: int
    violations_upper: int
    worst_margin_lower: float
    worst_margin_upper: float
    records: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "admissible": self.admissible,
            "violations_lower": self.violations_lower,
            "violations_upper": self.violations_upper,
            "worst_margin_lower": _num(self.worst_margin_lower),
            "worst_margin_upper": _num(self.worst_margin_upper),
            "records": [{k: _num(v) if isinstance(v, float) else v for k, v in r.items()}
                        for r in self.records],
        }


def _num(v: float):
    """JSON has no infinities; spell them as strings."""
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


# ---------------------------------------------------------------------------


def support_check(z: GPoint, pole: GPoint, T: float = math.inf) -> bool:
    return z.y < pole.y and pole.t < z.t <= pole.t + T


def _lower_shift(cfg: BoundsConfig, z: GPoint, pole: GPoint) -> GPoint:
    d = cfg.eps * (z.t - pole.t)
    return GPoint(z.x, z.y + pole.x * d, z.t - d)


def _upper_shift(cfg: BoundsConfig, z: GPoint, pole: GPoint) -> GPoint:
    return GPoint(z.x, z.y - pole.x * cfg.eps, z.t + cfg.eps)


def lower_admissible(cfg: BoundsConfig, z: GPoint, pole: GPoint) -> bool:
    return (z.y < pole.y - pole.x * cfg.eps * (z.t - pole.t)
            and pole.t < z.t <= pole.t + cfg.T)


def _scale(z: GPoint, pole: GPoint) -> float:
    return 1.0 / (pole.x * pole.x * (z.t - pole.t) ** 2)


def lower_bound(cfg: BoundsConfig, z: GPoint, pole: GPoint) -> float:
    if not lower_admissible(cfg, z, pole):
        return 0.0
    p = psi(_lower_shift(cfg, z, pole), pole)
    return cfg.c_minus_eps * _scale(z, pole) * math.exp(-cfg.C_minus * p)


def upper_bound(cfg: BoundsConfig, z: GPoint, pole: GPoint) -> float:
    """Vacuous (+inf) outside the time window, where the bound says nothing."""
    if not pole.t < z.t <= pole.t + cfg.T:
        return math.inf
    p = psi(_upper_shift(cfg, z, pole), pole)
    return cfg.C_plus_eps * _scale(z, pole) * math.exp(-cfg.c_plus * p)


def sandwich_gamma_pm(cfg: BoundsConfig, z: GPoint, pole: GPoint,
                      qcfg: QuadratureConfig = DEFAULT_QUAD) -> tuple[float, float]:
    """k- Gamma^{mu-} and k+ Gamma^{mu+} at the shifted points."""
    eps = cfg.eps
    span = z.t - pole.t + 1.0
    if not (z.y + pole.x * eps * span < pole.y and z.t > pole.t + eps / (1.0 - eps)):
        raise ValueError("point outside the region where the sandwich is stated")
    lo_pt = GPoint(z.x, z.y + pole.x * eps * span, z.t - eps * span)
    up = eps / (1.0 - eps) * span
    hi_pt = GPoint(z.x, z.y - pole.x * up, z.t + up)
    lower = cfg.k_minus * gamma_mu(cfg.mu_minus, lo_pt, pole, qcfg).value
    upper = cfg.k_plus * gamma_mu(cfg.mu_plus, hi_pt, pole, qcfg).value
    return lower, upper


def check_sandwich(cfg: BoundsConfig, grid, pole: GPoint, gamma_values) -> SandwichReport:
    grid = list(grid)
    gamma_values = [float(g) for g in gamma_values]
    if len(grid) != len(gamma_values):
        raise ValueError("grid and gamma_values differ in length")
    vl = vu = n_adm = 0
    worst_l = worst_u = math.inf
    records = []
    for z, g in zip(grid, gamma_values):
        adm = lower_admissible(cfg, z, pole)
        rec = {"x": z.x, "y": z.y, "t": z.t, "gamma": g, "admissible": adm}
        if adm:
            n_adm += 1
            lo = lower_bound(cfg, z, pole)
            hi = upper_bound(cfg, z, pole)
            # margins in log space: >= 0 means the bound holds
            ml = math.log(g / lo) if lo > 0.0 and g > 0.0 else (math.inf if lo == 0.0 else -math.inf)
            mu = math.log(hi / g) if g > 0.0 else math.inf
            vl += lo > g
            vu += g > hi
            worst_l = min(worst_l, ml)
            worst_u = min(worst_u, mu)
            rec.update(lower=lo, upper=hi)
        records.append(rec)
    return SandwichReport(len(grid), n_adm, vl, vu, worst_l, worst_u, records)


def calibrate_constants(eps: float, grid, pole: GPoint, gamma_values, C_minus: float = 1.0,
                        c_plus: float = 1.0 / 16.0, T: float | None = None) -> BoundsConfig:
    """Tightest c-_eps and C+_eps for which every admissible grid point is bracketed."""
    grid = list(grid)
    gamma_values = [float(g) for g in gamma_values]
    if len(grid) != len(gamma_values):
        raise ValueError("grid and gamma_values differ in length")
    if T is None:
        T = max((z.t - pole.t for z in grid), default=1.0)
        T = T if T > 0.0 else 1.0
    base = BoundsConfig(eps, C_minus=C_minus, c_plus=c_plus, T=T)
    lo_ratio = math.inf
    hi_ratio = 0.0
    for z, g in zip(grid, gamma_values):
        if not lower_admissible(base, z, pole):
            continue
        if not g > 0.0:
            raise ValueError(f"gamma must be positive on admissible points, got {g!r} at {z}")
        s = _scale(z, pole)
        ql = s * math.exp(-C_minus * psi(_lower_shift(base, z, pole), pole))
        qu = s * math.exp(-c_plus * psi(_upper_shift(base, z, pole), pole))
        lo_ratio = min(lo_ratio, g / ql)
        hi_ratio = max(hi_ratio, g / qu)
    if lo_ratio == math.inf:
        raise ValueError("no admissible grid points")
    # a few ulps of slack so recomputing the bounds cannot cross gamma by round-off
    return replace(base, c_minus_eps=lo_ratio * (1.0 - _SAFETY),
                   C_plus_eps=hi_ratio * (1.0 + _SAFETY))
