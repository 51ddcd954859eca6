"""Almost parabolic maps built from the saddle-node family ``x + eps + x^2``.

Everything is computed in original coordinates on ``J = [-1/2, 1/2]`` and
then pushed through the affine map ``T`` that sends the fundamental-domain
union ``[-1/2, phi^a(-1/2)]`` onto ``[0, 1]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .maps import DomainError

EPS_MIN, EPS_MAX = 1e-5, 1e-2
J_DEFAULT = (-0.5, 0.5)
STEP_CAP = 10_000
# Escape iterations must stay in this disk (original coordinates).
DOMAIN_RADIUS = 1.0


def phi_eps(eps: float, z):
    return z + eps + z * z


@dataclass(frozen=True)
class AlmostParabolic:
    eps: float
    J: tuple
    Delta: tuple
    length_a: int
    sigma: float
    orbit: np.ndarray        # phi^j(J[0]), j = 0..a  (original coordinates)

    @property
    def scale(self) -> float:
        return float(self.orbit[-1] - self.orbit[0])

    def normalize(self, z):
        return (np.asarray(z) - self.orbit[0]) / self.scale

    def denormalize(self, w):
        return np.asarray(w) * self.scale + self.orbit[0]

    def phi(self, z):
        return phi_eps(self.eps, z)

    def phi_normalized(self, w):
        return self.normalize(self.phi(self.denormalize(w)))

    def pieces(self) -> np.ndarray:
        """Normalized lengths |phi^j(Delta)|, j = 0..a-1."""
        return np.diff(self.normalize(self.orbit))


def make_almost_parabolic(eps: float) -> AlmostParabolic:
    if not EPS_MIN <= eps <= EPS_MAX:
        raise DomainError(f"eps={eps} outside [{EPS_MIN}, {EPS_MAX}]")
    lo, hi = J_DEFAULT
    xs = [lo]
    x = lo
    while True:
        y = phi_eps(eps, x)
        if y > hi:
            break
        xs.append(y)
        x = y
    orb = np.array(xs)
    a = orb.size - 1
    Jlen = hi - lo
    sigma = min(orb[1] - orb[0], orb[-1] - orb[-2]) / Jlen
    return AlmostParabolic(float(eps), J_DEFAULT, (lo, float(orb[1])), a, float(sigma), orb)


def m_of(j, a: int):
    j = np.asarray(j)
    return np.minimum(j + 1, a - j)


@dataclass(frozen=True)
class YoccozProfile:
    j: np.ndarray
    length: np.ndarray
    m: np.ndarray
    C_fit: float

    @property
    def product(self) -> np.ndarray:
        return self.length * self.m.astype(float) ** 2

    def rows(self):
        return list(zip(self.j.tolist(), self.length.tolist(), self.m.tolist()))

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["j", "length", "m", "product"])
        for j, ln, m, pr in zip(self.j, self.length, self.m, self.product):
            w.writerow([int(j), repr(float(ln)), int(m), repr(float(pr))])


def yoccoz_profile(ap: AlmostParabolic) -> YoccozProfile:
    lengths = ap.pieces()
    j = np.arange(ap.length_a)
    m = m_of(j, ap.length_a)
    prod = lengths * m.astype(float) ** 2
    C = float(np.max(np.maximum(prod, 1.0 / prod)))
    return YoccozProfile(j, lengths, m, C)


def complex_fixed_points(ap: AlmostParabolic):
    """``z_+`` in normalized coordinates and the product ``a * Im z_+``.

    The fixed points of ``x + eps + x^2`` are ``+-i sqrt(eps)``.
    """
    z0 = 1j * math.sqrt(ap.eps)
    zp = complex(ap.normalize(z0))
    return zp, ap.length_a * zp.imag


def fixed_point_residual(ap: AlmostParabolic) -> float:
    z0 = 1j * math.sqrt(ap.eps)
    return abs(ap.phi(z0) - z0)


Target = Union[float, Callable[[complex], bool]]


def neighborhood(delta: float) -> Callable[[complex], bool]:
    """Open delta-neighborhood of [0, 1] (sup-norm box), normalized coordinates."""
    def inside(w: complex) -> bool:
        return -delta < w.real < 1.0 + delta and abs(w.imag) < delta
    return inside


def escape_time(ap: AlmostParabolic, z: complex, target: Target = 0.05,
                cap: int = STEP_CAP) -> Optional[int]:
    """Smallest n with phi^n(z) in ``target`` (normalized coordinates), or None."""
    inside = neighborhood(target) if not callable(target) else target
    w = complex(z)
    u = complex(ap.denormalize(w))
    for n in range(cap + 1):
        if inside(w):
            return n
        if abs(u) > DOMAIN_RADIUS:
            raise DomainError(f"orbit of {z} left the domain after {n} steps")
        u = ap.phi(u)
        w = complex(ap.normalize(u))
    return None
