"""Analytic critical circle-map families and their lifts.

Every family is a degree-one lift ``F(x+1) = F(x) + 1``.  The Arnold family
``x + theta - sin(2 pi x) / (2 pi)`` has a cubic critical point at ``c = 0``;
the perturbed family adds ``b sin^3(2 pi x)``, which keeps ``F'(0) = F''(0) = 0``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

TWO_PI = 2.0 * math.pi

# Complex evaluation is only offered on the strip |Im z| < R_SPEC.
R_SPEC = 1.0

B_MAX = 0.05
# Below this the cubic coefficient 1 + 12*pi*b changes sign and F' < 0 near 0.
B_MIN = -1.0 / (12.0 * math.pi)


class Family(str, enum.Enum):
    RIGID = "RigidRotation"
    ARNOLD = "Arnold"
    PERTURBED = "PerturbedArnold"


_CODES = {Family.RIGID: 0, Family.ARNOLD: 1, Family.PERTURBED: 2}


class DomainError(ValueError):
    """Raised when a point or parameter lies outside the region of definition."""


@dataclass(frozen=True)
class MapSpec:
    family: Family
    theta: float
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "b", float(self.b))
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if self.family is Family.PERTURBED:
            if not (B_MIN < self.b <= B_MAX):
                raise ValueError(
                    f"perturbation b={self.b} outside ({B_MIN:.5f}, {B_MAX}]")
        elif self.b != 0.0:
            raise ValueError(f"b is only meaningful for {Family.PERTURBED.value}")

    @property
    def code(self) -> int:
        return _CODES[self.family]

    @property
    def critical(self) -> bool:
        return self.family is not Family.RIGID

    def with_theta(self, theta: float) -> "MapSpec":
        return MapSpec(self.family, theta, self.b)

    def to_dict(self) -> dict:
        d = {"family": self.family.value, "theta": self.theta}
        if self.family is Family.PERTURBED:
            d["b"] = self.b
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MapSpec":
        return cls(Family(d["family"]), d.get("theta", 0.0), d.get("b", 0.0))


@dataclass(frozen=True)
class CylinderPoint:
    """A point of C/Z; ``x`` is kept in [0, 1)."""
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x) % 1.0)
        object.__setattr__(self, "y", float(self.y))

    @classmethod
    def from_complex(cls, z: complex) -> "CylinderPoint":
        return cls(z.real, z.imag)

    def to_complex(self) -> complex:
        return complex(self.x, self.y)

    def conjugate(self) -> "CylinderPoint":
        return CylinderPoint(self.x, -self.y)


def eval_lift(spec: MapSpec, x):
    """F(x) for a scalar or array ``x``."""
    x = np.asarray(x, dtype=float)
    if spec.family is Family.RIGID:
        out = x + spec.theta
    else:
        s = np.sin(TWO_PI * x)
        out = x + spec.theta - s / TWO_PI
        if spec.family is Family.PERTURBED:
            out = out + spec.b * s ** 3
    return out[()] if out.ndim == 0 else out


def lift_complex(spec: MapSpec, z):
    """Holomorphic extension of the lift on the plane (no strip check)."""
    z = np.asarray(z, dtype=complex)
    if spec.family is Family.RIGID:
        out = z + spec.theta
    else:
        s = np.sin(TWO_PI * z)
        out = z + spec.theta - s / TWO_PI
        if spec.family is Family.PERTURBED:
            out = out + spec.b * s ** 3
    return out[()] if out.ndim == 0 else out


def lift_complex_prime(spec: MapSpec, z):
    z = np.asarray(z, dtype=complex)
    if spec.family is Family.RIGID:
        out = np.ones_like(z)
    else:
        s = np.sin(TWO_PI * z)
        c = np.cos(TWO_PI * z)
        out = 1.0 - c
        if spec.family is Family.PERTURBED:
            out = out + 3.0 * TWO_PI * spec.b * s * s * c
    return out[()] if out.ndim == 0 else out


def eval_complex(spec: MapSpec, z: CylinderPoint) -> CylinderPoint:
    if abs(z.y) >= R_SPEC:
        raise DomainError(f"|Im z| = {abs(z.y)} outside the annulus of radius {R_SPEC}")
    w = lift_complex(spec, z.to_complex())
    return CylinderPoint(w.real, w.imag)


def derivative(spec: MapSpec, x, order: int):
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x = np.asarray(x, dtype=float)
    if spec.family is Family.RIGID:
        out = np.full_like(x, 1.0 if order == 1 else 0.0)
        return out[()] if out.ndim == 0 else out
    u = TWO_PI * x
    s, c = np.sin(u), np.cos(u)
    b = spec.b
    if order == 1:
        out = 1.0 - c + 3.0 * TWO_PI * b * s * s * c
    elif order == 2:
        out = TWO_PI * s + 3.0 * b * TWO_PI ** 2 * (2.0 * s * c * c - s ** 3)
    else:
        out = TWO_PI ** 2 * c + 3.0 * b * TWO_PI ** 3 * (2.0 * c ** 3 - 7.0 * s * s * c)
    return out[()] if out.ndim == 0 else out


@dataclass
class CriticalityReport:
    c: float
    d1: float
    d2: float
    d3: float
    grid_min: float
    grid_size: int
    passed: bool = field(default=False)


def verify_critical_cubic(spec: MapSpec, grid: int = 10_000) -> CriticalityReport:
    grid = max(int(grid), 10_000)
    d1, d2, d3 = (float(derivative(spec, 0.0, k)) for k in (1, 2, 3))
    xs = np.arange(grid) / grid
    gmin = float(np.min(derivative(spec, xs, 1)))
    ok = abs(d1) <= 1e-12 and abs(d2) <= 1e-12 and d3 > 0 and gmin >= -1e-12
    return CriticalityReport(0.0, d1, d2, d3, gmin, grid, ok)


def require_critical(spec: MapSpec) -> None:
    rep = verify_critical_cubic(spec)
    if not rep.passed:
        raise ValueError(f"{spec.family.value} map is not a cubic critical circle map "
                         f"(F'(0)={rep.d1:g}, F'''(0)={rep.d3:g})")


def real_orbit(spec: MapSpec, x0: float, n: int) -> np.ndarray:
    """Lift values F^j(x0), j < n."""
    return _kernels.orbit(spec.code, spec.theta, spec.b, float(x0), int(n))


def iterate(spec: MapSpec, xs, q: int) -> np.ndarray:
    xs = np.ascontiguousarray(np.atleast_1d(np.asarray(xs, dtype=float)))
    return _kernels.iterate_real(spec.code, spec.theta, spec.b, xs, int(q))


def iterate_complex(spec: MapSpec, zs, q: int, height: float = R_SPEC) -> np.ndarray:
    """F^q on complex points; NaN where the orbit left the strip |Im| < height."""
    zs = np.ascontiguousarray(np.atleast_1d(np.asarray(zs, dtype=complex)))
    return _kernels.iterate_complex(spec.code, spec.theta, spec.b, zs, int(q), float(height))
