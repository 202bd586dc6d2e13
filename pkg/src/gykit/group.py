"""The group (R+ x R^2, o) with its dilations, cylinders and paraboloids.

Points are written (x, y, t).  The product is

    (x0, y0, t0) o (x, y, t) = (x0 x, y0 + x0 y, t0 + t)

and the model operator of the package is left-invariant under it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True, slots=True)
class GPoint:
    x: float
    y: float
    t: float

    def __post_init__(self) -> None:
        x = float(self.x)
        if not x > 0.0 or not math.isfinite(x):
            raise ValueError(f"GPoint requires x > 0, got x={self.x!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "t", float(self.t))

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y
        yield self.t

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.t)


IDENTITY = GPoint(1.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class CylinderSpec:
    center: GPoint
    r: float

    def __post_init__(self) -> None:
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"cylinder radius must lie in (0, 1), got {self.r!r}")


def as_point(p) -> GPoint:
    if isinstance(p, GPoint):
        return p
    x, y, t = p
    return GPoint(x, y, t)


def compose(a: GPoint, b: GPoint) -> GPoint:
    return GPoint(a.x * b.x, a.y + a.x * b.y, a.t + b.t)


def inverse(a: GPoint) -> GPoint:
    return GPoint(1.0 / a.x, -a.y / a.x, -a.t)


def left_translate(z0: GPoint, z: GPoint) -> GPoint:
    """z0^{-1} o z, written out so the quotient is formed directly."""
    return GPoint(z.x / z0.x, (z.y - z0.y) / z0.x, z.t - z0.t)


def dilate(a: GPoint, r: float) -> GPoint:
    """(x, y, t) -> (x, y/r, t/r)."""
    if not r > 0.0:
        raise ValueError(f"dilation factor must be positive, got {r!r}")
    return GPoint(a.x, a.y / r, a.t / r)


def in_paraboloid(z: GPoint, center: GPoint, r: float, theta: float) -> bool:
    """Membership in the backward paraboloid of radius r and aperture theta."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if not r > 0.0:
        raise ValueError("r must be positive")
    dt = center.t - z.t
    if not (0.0 < dt <= theta * theta * r * r):
        return False
    if abs(z.x - center.x) > math.sqrt(dt) * center.x:
        return False
    return abs(z.y - center.y - dt * center.x) <= dt**1.5 * center.x


def in_cylinder_H(z: GPoint, spec: CylinderSpec) -> bool:
    c, r = spec.center, spec.r
    dt = z.t - c.t
    if not (-r * r < dt < 0.0):
        return False
    if not abs(z.x - c.x) < r * c.x:
        return False
    return abs(z.y - c.y + c.x * dt) < r**3 * c.x
