"""Rotation numbers, continued fractions and parameter tuning.

Continued fractions follow the convention ``rho = 1/(a0 + 1/(a1 + ...))`` so
that the closest return times are ``q0 = 1, q1 = a0, q_{n+1} = a_n q_n + q_{n-1}``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .maps import Family, MapSpec

log = logging.getLogger(__name__)

MAX_DEPTH = 25
ORBIT_CAP = 200_000
# Tuning compares against deeper convergents than any stored orbit needs.
COMPARE_CAP = 1_000_000
COMPARE_MAX_DEPTH = 30
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SILVER = math.sqrt(2.0) - 1.0


class RationalInputError(ValueError):
    """The expansion terminated before the requested depth."""


class TuningError(RuntimeError):
    def __init__(self, msg, bracket=None):
        super().__init__(msg)
        self.bracket = bracket


@dataclass(frozen=True)
class ContinuedFraction:
    quotients: tuple
    bounded_by: Optional[int] = None

    def __post_init__(self):
        qs = tuple(int(a) for a in self.quotients)
        object.__setattr__(self, "quotients", qs)
        if not qs:
            raise ValueError("empty continued fraction")
        if any(a < 1 for a in qs):
            raise ValueError("partial quotients must be >= 1")
        if self.bounded_by is not None and max(qs) > self.bounded_by:
            raise ValueError(f"quotient exceeds bound {self.bounded_by}")

    def __len__(self):
        return len(self.quotients)

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def value(self) -> float:
        x = Fraction(0)
        for a in reversed(self.quotients):
            x = 1 / (a + x)
        return float(x)

    def extended(self, depth: int) -> "ContinuedFraction":
        """Pad by repeating the last quotient (periodic tail)."""
        qs = list(self.quotients)
        while len(qs) < depth:
            qs.append(qs[-1])
        return ContinuedFraction(tuple(qs), self.bounded_by)

    def limit_value(self) -> float:
        """Value of the infinite continued fraction with periodic tail."""
        return self.extended(max(self.depth, 40)).value()

    @classmethod
    def constant(cls, a: int, depth: int) -> "ContinuedFraction":
        return cls((a,) * depth, bounded_by=a)


@dataclass(frozen=True)
class Convergents:
    p: tuple
    q: tuple

    def value(self) -> float:
        return self.p[-1] / self.q[-1]


def rotation_number(spec: MapSpec, x0: float = 0.0, iterates: int = 100_000):
    """Lift-average estimate ``(F^N(x0) - x0) / N`` and its error bound ``1/N``."""
    if iterates < 1000:
        raise ValueError("need at least 10^3 iterates")
    xN = _kernels.iterate_real(spec.code, spec.theta, spec.b,
                               np.array([float(x0)]), int(iterates))[0]
    return (xN - x0) / iterates, 1.0 / iterates


def continued_fraction(rho, depth: int) -> ContinuedFraction:
    if not 0 < depth <= MAX_DEPTH:
        raise ValueError(f"depth must be in 1..{MAX_DEPTH}")
    x = Fraction(rho)
    if not 0 < x < 1:
        raise ValueError(f"rho={rho} outside (0, 1)")
    qs = []
    for _ in range(depth):
        if x == 0:
            raise RationalInputError(
                f"expansion of rational input terminated after {len(qs)} quotients")
        y = 1 / x
        a = int(y)
        qs.append(a)
        x = y - a
    return ContinuedFraction(tuple(qs))


def convergents(cf: ContinuedFraction) -> Convergents:
    a = cf.quotients
    p = [0, 1]
    q = [1, a[0]]
    for n in range(1, len(a)):
        p.append(a[n] * p[n] + p[n - 1])
        q.append(a[n] * q[n] + q[n - 1])
    return Convergents(tuple(p), tuple(q))


def comparison_depth(cf: ContinuedFraction, cap: int = COMPARE_CAP) -> int:
    """Deepest level of the periodic extension with q_D <= cap; must exceed
    the target depth so the tuned combinatorics are decided beyond it."""
    ext = convergents(cf.extended(COMPARE_MAX_DEPTH))
    d = max(k for k in range(len(ext.q)) if ext.q[k] <= cap)
    if d <= cf.depth:
        raise ValueError(f"target depth {cf.depth} too deep: q_{cf.depth + 1} exceeds {cap}")
    return d


def compare_to_target(spec: MapSpec, conv: Convergents) -> int:
    """-1 if rho(spec) < target, +1 if above, 0 if the two agree through
    every convergent in ``conv``.

    Even convergents lie below the target, odd ones above; the sign of
    ``F^q(0) - p`` decides rho against ``p/q``.
    """
    orb = _kernels.orbit(spec.code, spec.theta, spec.b, 0.0, conv.q[-1] + 1)
    for k, (p, q) in enumerate(zip(conv.p, conv.q)):
        v = orb[q] - p
        if k % 2 == 0 and v <= 0:
            return -1
        if k % 2 == 1 and v >= 0:
            return 1
    return 0


def combinatorics_match(spec: MapSpec, target: float, count: int) -> bool:
    """Cyclic order of the first ``count`` points of the critical orbit
    equals that of the rigid rotation by ``target``."""
    orb = _kernels.orbit(spec.code, spec.theta, spec.b, 0.0, int(count))
    rigid = np.mod(np.arange(count) * target, 1.0)
    return bool(np.array_equal(np.argsort(np.mod(orb, 1.0), kind="stable"),
                               np.argsort(rigid, kind="stable")))


@dataclass(frozen=True)
class TuneResult:
    theta: float
    bracket: tuple
    steps: int
    certified: bool
    comparison_depth: int


def tune(family, b: float, target: ContinuedFraction, tol: float = 1e-14,
         max_steps: int = 200) -> TuneResult:
    family = Family(family)
    if target.depth < 8:
        raise ValueError("target needs depth >= 8")
    if tol < 1e-14:
        raise ValueError("tol must be >= 1e-14")
    depth = comparison_depth(target)
    ext = convergents(target.extended(depth))
    value = target.limit_value()
    count = convergents(target).q[-1]

    def side(theta):
        return compare_to_target(MapSpec(family, theta, b), ext)

    lo, hi = 0.0, 1.0
    if side(lo) != -1 or side(hi) != 1:
        raise TuningError("target rotation number not bracketed by theta in [0, 1]", (lo, hi))
    for step in range(1, max_steps + 1):
        mid = 0.5 * (lo + hi)
        s = side(mid)
        if s == 0:
            lo = hi = mid
        elif s < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            theta = 0.5 * (lo + hi)
            ok = combinatorics_match(MapSpec(family, theta, b), value, count)
            if not ok:
                raise TuningError("combinatorial certification failed", (lo, hi))
            log.debug("tuned %s b=%g to theta=%.16f in %d steps", family.value, b, theta, step)
            return TuneResult(theta, (lo, hi), step, ok, depth)
    raise TuningError(f"no convergence after {max_steps} bisection steps", (lo, hi))


def tune_parameter(family, b: float, target: ContinuedFraction, tol: float = 1e-14) -> float:
    return tune(family, b, target, tol).theta


def tuned_map(family, target: ContinuedFraction, b: float = 0.0) -> MapSpec:
    return MapSpec(Family(family), tune_parameter(family, b, target), b)
