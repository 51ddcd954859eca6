"""Complex geometry on the cylinder: Poincare neighborhoods, quasi-invariance,
cubic growth of renormalizations, pullback distances and modulus bounds."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .fitting import FitError, FitResult, linear_fit
from .maps import DomainError, MapSpec, R_SPEC, iterate_complex, lift_complex, require_critical
from .partition import return_structure
from .rotation import ContinuedFraction

log = logging.getLogger(__name__)

# Newton may move at most NEWTON_GUARD * R0 away from its seed.
R0 = 0.05
NEWTON_GUARD = 0.4
PATH_STEPS = 16


@dataclass(frozen=True)
class PoincareRegion:
    J: tuple
    angle: float

    def __post_init__(self):
        a, b = self.J
        if not a < b:
            raise ValueError("J must be a non-degenerate interval")
        if not 0 < self.angle < math.pi:
            raise ValueError("angle must lie in (0, pi)")

    @property
    def length(self) -> float:
        return self.J[1] - self.J[0]

    def circle(self):
        """Center (upper half) and radius of the boundary arc through J's ends."""
        L = self.length
        mid = 0.5 * (self.J[0] + self.J[1])
        return complex(mid, 0.5 * L / math.tan(self.angle)), 0.5 * L / math.sin(self.angle)

    def boundary(self, samples: int, margin: float = 0.02) -> np.ndarray:
        """Points on the upper boundary arc, endpoints excluded."""
        c, r = self.circle()
        # the arc runs from J[1] to J[0] counter-clockwise
        t0 = math.atan2(-c.imag, self.J[1] - c.real)
        t1 = math.atan2(-c.imag, self.J[0] - c.real)
        if t1 <= t0:
            t1 += 2 * math.pi
        span = t1 - t0
        t = np.linspace(t0 + margin * span, t1 - margin * span, samples)
        return c + r * np.exp(1j * t)

    @property
    def diam(self) -> float:
        c, r = self.circle()
        return 2 * r if self.angle <= 0.5 * math.pi else self.length


def visual_angle(J: tuple, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.abs(np.angle((z - J[1]) / (z - J[0])))


def poincare_contains(region: PoincareRegion, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    c, r = region.circle()
    w = np.where(z.imag < 0, np.conj(z), z)
    inside = np.abs(w - c) < r
    on_axis = z.imag == 0
    out = inside & ~on_axis
    return out[()] if out.ndim == 0 else out


def _normalized_branch(spec: MapSpec, J: tuple) -> Callable:
    """F followed by the affine map sending F(J) back onto J."""
    a, b = J
    Fa, Fb = float(lift_complex(spec, a).real), float(lift_complex(spec, b).real)
    k = (b - a) / (Fb - Fa)
    return lambda z: a + (lift_complex(spec, z) - Fa) * k


@dataclass(frozen=True)
class QuasiInvariance:
    theta_min_out: float
    loss: float
    excluded: int
    samples: int


def quasi_invariance_measure(spec, J: tuple, theta: float, samples: int = 400,
                             max_len: float = 0.05) -> QuasiInvariance:
    """Worst angle lost when pushing the boundary of P_theta(J) forward.

    ``spec`` is a MapSpec, or any callable already normalized to fix J's
    endpoints (used for the identity self-check).
    """
    a, b = J
    if not 0 < b - a <= max_len:
        raise ValueError(f"|J| must lie in (0, {max_len}]")
    G = spec if callable(spec) else _normalized_branch(spec, J)
    region = PoincareRegion(J, theta)
    z = region.boundary(samples)
    w = np.asarray(G(z), dtype=complex)
    bad = (np.abs(w.imag) <= 1e-15) & (w.real >= a) & (w.real <= b)
    bad |= ~np.isfinite(w)
    excluded = int(np.count_nonzero(bad))
    if excluded > 0.1 * samples:
        raise DomainError(f"{excluded} of {samples} images landed on J")
    ang_in = visual_angle(J, z[~bad])
    ang_out = visual_angle(J, w[~bad])
    loss = float(max(0.0, np.max(ang_in - ang_out)))
    return QuasiInvariance(float(np.min(ang_out)), loss, excluded, samples)


@dataclass(frozen=True)
class ReturnDisk:
    m: int
    center: float
    radius: float

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius


def return_disk(spec: MapSpec, cf: ContinuedFraction, m: int) -> ReturnDisk:
    """D_m: the disk of diameter [f^{q_{m+1}}(c), f^{q_m - q_{m+1}}(c)]."""
    rs = return_structure(spec, cf, m)
    q, p = rs.q, rs.p
    left = rs.disp[m + 1]
    # f^{q_m - q_{m+1}}(c) = f^{q_m}(f^{-q_{m+1}}(c))
    back = _kernels.inverse_real(spec.code, spec.theta, spec.b, 0.0, q[m + 1]) + p[m + 1]
    right = float(_kernels.iterate_real(spec.code, spec.theta, spec.b,
                                        np.array([back]), q[m])[0] - p[m])
    lo, hi = min(left, right), max(left, right)
    if not lo < 0.0 < hi:
        raise DomainError(f"D_{m} diameter [{lo}, {hi}] misses the critical point")
    return ReturnDisk(m, 0.5 * (lo + hi), 0.5 * (hi - lo))


def renormalized_complex(spec: MapSpec, cf: ContinuedFraction, n: int):
    """Complex evaluator of the normalized eta-hat at level n (NaN on escape)."""
    rs = return_structure(spec, cf, n)
    dn, q1, p1 = rs.disp[n], rs.q[n + 1], rs.p[n + 1]

    def g(z):
        w = iterate_complex(spec, np.asarray(z, dtype=complex) * dn, q1, R_SPEC)
        return (w - p1) / dn
    return g


@dataclass(frozen=True)
class CubicGrowth:
    C: float
    count: int
    discarded: int


def cubic_growth_samples(g: Callable, B: float, R: float, samples: int = 2000,
                         rng: Optional[np.random.Generator] = None,
                         min_count: int = 50) -> CubicGrowth:
    """min |g(z)| / |z|^3 over z with |z| > B and |g(z)| < R."""
    rng = np.random.default_rng(0) if rng is None else rng
    # |g| ~ |z|^3 near the bound, so sample radii up to a few times B
    r = B * (1.0 + 2.0 * rng.random(samples))
    t = 2 * np.pi * rng.random(samples)
    z = r * np.exp(1j * t)
    gz = np.asarray(g(z), dtype=complex)
    finite = np.isfinite(gz)
    keep = finite & (np.abs(gz) < R)
    count = int(np.count_nonzero(keep))
    if count < min_count:
        raise DomainError(f"only {count} samples retained (need {min_count})")
    ratio = np.abs(gz[keep]) / np.abs(z[keep]) ** 3
    return CubicGrowth(float(np.min(ratio)), count, int(np.count_nonzero(~finite)))


def cubic_growth_check(f: MapSpec, cf: ContinuedFraction, n: int, B: float = 2.0,
                       R: float = 10.0, samples: int = 2000, seed: int = 0) -> CubicGrowth:
    require_critical(f)
    g = renormalized_complex(f, cf, n)
    return cubic_growth_samples(g, B, R, samples, np.random.default_rng(seed))


@dataclass(frozen=True)
class PullbackCloud:
    x: np.ndarray        # dist(z, I_n) / |I_n|
    y: np.ndarray        # dist(pullback, f(I_n)) / |f(I_n)|
    z: np.ndarray
    w: np.ndarray
    residual: float
    discarded: int

    def to_csv(self, fh) -> None:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow(["re_z", "im_z", "value"])
        for z, y in zip(self.z, self.y):
            wr.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(y))])


def _dist_to_interval(z, lo: float, hi: float) -> np.ndarray:
    x = np.clip(z.real, lo, hi)
    return np.abs(z - x)


def pullback_cloud(f: MapSpec, cf: ContinuedFraction, n: int, N: int, samples: int = 400,
                   seed: int = 0) -> PullbackCloud:
    if not 1 <= N <= n - 4:
        raise ValueError("need 1 <= N <= n - 4")
    require_critical(f)
    rs = return_structure(f, cf, n)
    q, p = rs.q, rs.p
    disk = return_disk(f, cf, n - N)
    rng = np.random.default_rng(seed)
    # uniform in the disk, off the real axis, plus real points of f^{q_{n+1}}(I_n)
    nc = samples - samples // 8
    r = disk.radius * np.sqrt(rng.random(nc))
    t = 2 * np.pi * rng.random(nc)
    zc = disk.center + r * np.exp(1j * t)
    zc = zc[np.abs(zc.imag) > 1e-12]
    # f^{q_{n+1}}(I_n) has ends f^{q_{n+1}}(c) and f^{q_{n+1}}(f^{q_n}(c))
    e0 = rs.disp[n + 1]
    e1 = float(_kernels.iterate_real(f.code, f.theta, f.b, np.array([rs.disp[n]]),
                                     q[n + 1])[0] - p[n + 1])
    lo, hi = min(e0, e1), max(e0, e1)
    zr = lo + (hi - lo) * rng.random(samples - nc) + 0j
    z = np.concatenate([zc, zr])

    # continuation starts from the nearest real point of f^{q_{n+1}}(I_n)
    x0 = np.clip(z.real, lo, hi)
    w = _kernels.pullback(f.code, f.theta, f.b, np.ascontiguousarray(z + p[n + 1]),
                          np.ascontiguousarray(x0 + p[n + 1]), q[n + 1] - 1, PATH_STEPS,
                          NEWTON_GUARD * R0, R_SPEC)
    ok = np.isfinite(w)
    z, w = z[ok], w[ok]
    discarded = int(np.count_nonzero(~ok))
    back = iterate_complex(f, w, q[n + 1] - 1, np.inf) - p[n + 1]
    residual = float(np.max(np.abs(back - z))) if z.size else float("nan")

    In = rs.I[n]
    fIn = rs.image_of_I(n, 1)
    x = _dist_to_interval(z, *In) / (In[1] - In[0])
    y = _dist_to_interval(w, *fIn) / (fIn[1] - fIn[0])
    return PullbackCloud(x, y, z, w, residual, discarded)


def prop33_inequality_fit(f: MapSpec, cf: ContinuedFraction, n: int, N: int,
                          samples: int = 400, seed: int = 0) -> FitResult:
    cloud = pullback_cloud(f, cf, n, N, samples, seed)
    if cloud.x.size < 30:
        raise FitError(f"only {cloud.x.size} samples survived the pullback")
    if cloud.residual > 1e-9:
        log.warning("pullback residual %.2e exceeds 1e-9", cloud.residual)
    return linear_fit(cloud.x, cloud.y)


@dataclass(frozen=True)
class ModulusBounds:
    lower: float
    sep: float
    diam: float


def modulus_lower_bound(sep: float, diam: float) -> ModulusBounds:
    if not sep > 0 or not diam > 0:
        raise DomainError("sep and diam must be positive")
    if sep > diam:
        raise DomainError(f"separation {sep} exceeds diameter {diam}")
    return ModulusBounds(4.0 / math.pi * (sep / diam) ** 2, sep, diam)


def round_annulus_modulus(R: float) -> float:
    """Modulus of {1 < |z| < R}."""
    return math.log(R) / (2 * math.pi)


def round_annulus_bound(R: float) -> ModulusBounds:
    """Separation R - 1 between the boundary circles, outer diameter 2R."""
    return modulus_lower_bound(R - 1.0, 2.0 * R)
