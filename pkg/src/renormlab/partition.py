"""Closest returns, dynamical partitions and real-bounds statistics.

Intervals are stored as ``(lo, hi)`` in lift coordinates.  The critical
point is ``c = 0`` and the closest return ``f^{q_k}(c)`` is represented by the
signed displacement ``d_k = F^{q_k}(0) - p_k``, so ``I_k = [min(0, d_k), max(0, d_k)]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .maps import MapSpec, real_orbit
from .rotation import ContinuedFraction, Convergents, convergents

ENDPOINT_TOL = 1e-9
ORBIT_CAP = 200_000


class CertificationError(RuntimeError):
    def __init__(self, msg, k=None, j=None):
        super().__init__(msg)
        self.k = k
        self.j = j


class PrecisionError(RuntimeError):
    pass


def circle_dist(x):
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.round(x))


def _interval(a: float, b: float) -> tuple:
    return (a, b) if a <= b else (b, a)


def contains(outer: tuple, inner: tuple, tol: float = ENDPOINT_TOL) -> bool:
    """Circle containment of lift intervals (any integer offset)."""
    shift = round(0.5 * (inner[0] + inner[1]) - 0.5 * (outer[0] + outer[1]))
    lo, hi = inner[0] - shift, inner[1] - shift
    return outer[0] - tol <= lo and hi <= outer[1] + tol


@dataclass(frozen=True)
class ReturnStructure:
    spec: MapSpec
    cf: ContinuedFraction
    level: int
    conv: Convergents
    orbit: np.ndarray          # lift values F^j(0), j < q_n + q_{n+1}
    disp: tuple                # d_0 .. d_{n+1}
    I: tuple                   # I_0 .. I_{n+1}
    Delta: tuple               # Delta_0 .. Delta_n
    certified: bool = True

    @property
    def q(self) -> tuple:
        return self.conv.q

    @property
    def p(self) -> tuple:
        return self.conv.p

    def point(self, j: int, shift_by: int = 0) -> float:
        return float(self.orbit[j]) - shift_by

    def image_of_I(self, k: int, i: int) -> tuple:
        """Lift interval f^i(I_k), endpoints F^i(0) and F^{i+q_k}(0) - p_k."""
        return _interval(float(self.orbit[i]), float(self.orbit[i + self.q[k]]) - self.p[k])


def return_structure(spec: MapSpec, cf: ContinuedFraction, n: int) -> ReturnStructure:
    if n < 0 or n + 2 > cf.depth:
        raise ValueError(f"level n={n} needs a continued fraction of depth >= n+2")
    conv = convergents(cf)
    q, p = conv.q, conv.p
    length = q[n] + q[n + 1]
    if length > ORBIT_CAP:
        raise ValueError(f"orbit length {length} exceeds cap {ORBIT_CAP}")
    orb = real_orbit(spec, 0.0, length)
    disp = tuple(float(orb[q[k]] - p[k]) for k in range(n + 2))

    dist = circle_dist(orb)
    dist[0] = np.inf
    prefix_min = np.minimum.accumulate(dist)
    for k in range(1, n + 2):
        if q[k] >= 2:
            j = int(np.argmin(dist[1:q[k]])) + 1
            if not abs(disp[k]) < prefix_min[q[k] - 1]:
                raise CertificationError(
                    f"closest return fails at level k={k}: |f^{q[k]}(c)-c|={abs(disp[k]):.3e} "
                    f">= |f^{j}(c)-c|={dist[j]:.3e}", k, j)
        if k >= 1 and not disp[k] * disp[k - 1] < 0:
            raise CertificationError(
                f"closest returns at levels {k - 1} and {k} lie on the same side of c", k, q[k])
    I = tuple(_interval(0.0, d) for d in disp)
    Delta = tuple(_interval(min(disp[k], disp[k + 1]), max(disp[k], disp[k + 1]))
                  for k in range(n + 1))
    return ReturnStructure(spec, cf, n, conv, orb, disp, I, Delta)


@dataclass(frozen=True)
class DynamicalPartition:
    level: int
    left: np.ndarray          # in [0, 1), sorted
    length: np.ndarray
    generation: np.ndarray
    iterate: np.ndarray

    @property
    def right(self) -> np.ndarray:
        return self.left + self.length

    def __len__(self):
        return self.left.size

    def labels(self, i: int) -> tuple:
        return int(self.generation[i]), int(self.iterate[i])


def _partition_raw(rs: ReturnStructure):
    n, q = rs.level, rs.q
    lo, hi, gen, it = [], [], [], []
    for k, count in ((n, q[n + 1]), (n + 1, q[n])):
        for i in range(count):
            a, b = rs.image_of_I(k, i)
            lo.append(a)
            hi.append(b)
            gen.append(k)
            it.append(i)
    lo, hi = np.array(lo), np.array(hi)
    left = np.mod(lo, 1.0)
    return left, hi - lo, np.array(gen), np.array(it)


def dynamical_partition(rs: ReturnStructure, tol: float = ENDPOINT_TOL) -> DynamicalPartition:
    left, length, gen, it = _partition_raw(rs)
    order = np.argsort(left, kind="stable")
    left, length, gen, it = left[order], length[order], gen[order], it[order]
    right = left + length
    nxt = np.append(left[1:], left[0] + 1.0)
    gap = np.abs(nxt - right)
    if np.max(gap) > tol:
        i = int(np.argmax(gap))
        raise PrecisionError(f"atoms {i} and {(i + 1) % left.size} overlap or leave a gap "
                             f"of {gap[i]:.3e} at level {rs.level}")
    total = float(np.sum(length))
    if abs(total - 1.0) > tol * left.size:
        raise PrecisionError(f"atom lengths sum to {total!r}")
    return DynamicalPartition(rs.level, left, length, gen, it)


def refines(fine: DynamicalPartition, coarse: DynamicalPartition,
            tol: float = ENDPOINT_TOL) -> bool:
    """Every fine atom sits inside one coarse atom and each coarse atom is
    the union of the fine atoms it contains."""
    covered = np.zeros(len(coarse))
    for lo, ln in zip(fine.left, fine.length):
        mid = lo + 0.5 * ln
        i = int(np.searchsorted(coarse.left, mid, side="right")) - 1
        if i < 0:
            i = len(coarse) - 1
        if not contains((coarse.left[i], coarse.right[i]), (lo, lo + ln), tol):
            return False
        covered[i] += ln
    return bool(np.all(np.abs(covered - coarse.length) <= tol * len(fine)))


@dataclass(frozen=True)
class LevelBound:
    level: int
    ratio: float
    larger: tuple
    smaller: tuple


def max_adjacent_ratio(part: DynamicalPartition) -> LevelBound:
    ln = part.length
    nxt = np.roll(ln, -1)
    r = np.maximum(ln / nxt, nxt / ln)
    i = int(np.argmax(r))
    j = (i + 1) % ln.size
    big, small = (i, j) if ln[i] >= ln[j] else (j, i)
    return LevelBound(part.level, float(r[i]), part.labels(big), part.labels(small))


def real_bounds_stats(spec: MapSpec, cf: ContinuedFraction, n_lo: int, n_hi: int) -> list:
    if n_hi > cf.depth - 2:
        raise ValueError("n_hi must be <= depth(cf) - 2")
    rs = return_structure(spec, cf, n_hi)
    out = []
    for n in range(n_lo, n_hi + 1):
        sub = restrict(rs, n)
        out.append(max_adjacent_ratio(dynamical_partition(sub)))
    return out


def restrict(rs: ReturnStructure, n: int) -> ReturnStructure:
    """The level-n structure carried by a deeper certified one."""
    if n > rs.level:
        raise ValueError("can only restrict to a shallower level")
    q = rs.q
    return ReturnStructure(rs.spec, rs.cf, n, rs.conv, rs.orbit[:q[n] + q[n + 1]],
                           rs.disp[:n + 2], rs.I[:n + 2], rs.Delta[:n + 1], rs.certified)


@dataclass(frozen=True)
class MomentsReport:
    level: int
    m: int
    moments: tuple            # i_1 < ... < i_l
    ell: int
    expected: int
    containments: tuple       # bool per moment
    edge_ratios: tuple        # (k, |J_{-i_k}| / |I_n|)

    @property
    def ok(self) -> bool:
        return self.ell == self.expected and all(self.containments)


def backward_moments(rs: ReturnStructure, m: int, edge: int = 2) -> MomentsReport:
    n, q, p = rs.level, rs.q, rs.p
    if not 0 <= m < n:
        raise ValueError("need 0 <= m < level")
    a = rs.cf.quotients[m + 1]
    In = rs.I[n]
    len_n = In[1] - In[0]

    def J(i):
        return rs.image_of_I(n, q[n + 1] - i)

    moments = []
    for i in range(1, q[n + 1]):
        Ji = J(i)
        if contains(rs.I[m + 1], Ji):
            break
        if contains(rs.I[m], Ji):
            moments.append(i)
    ell = len(moments)
    if ell != a:
        raise CertificationError(
            f"found {ell} backward moments in I_{m} at level {n}, expected a_{m + 1}={a}", m, ell)
    checks, ratios = [], []
    for k, i in enumerate(moments, start=1):
        # the k-th moment sits in f^{q_m + (a - k) q_{m+1}}(I_{m+1}), k = 1..a
        e = q[m] + (a - k) * q[m + 1]
        target = rs.image_of_I(m + 1, e)
        Ji = J(i)
        checks.append(contains(target, Ji))
        if k <= edge or k > a - edge:
            ratios.append((k, (Ji[1] - Ji[0]) / len_n))
    return MomentsReport(n, m, tuple(moments), ell, a, tuple(checks), tuple(ratios))


def intervals_disjoint(intervals: Sequence[tuple], tol: float = ENDPOINT_TOL) -> bool:
    """Pairwise-disjoint interiors on the circle (overlaps up to ``tol`` allowed)."""
    lo = np.array([iv[0] for iv in intervals])
    ln = np.array([iv[1] - iv[0] for iv in intervals])
    if np.any(ln > 1.0):
        return False
    left = np.mod(lo, 1.0)
    order = np.argsort(left)
    left, ln = left[order], ln[order]
    nxt = np.append(left[1:], left[0] + 1.0)
    return bool(np.all(left + ln <= nxt + tol))


def preimage_intervals(rs: ReturnStructure) -> list:
    """f^{-j}(Delta_n) for 0 <= j < q_n, endpoints F^{q_n - j}(0) - p_n and
    F^{q_{n+1} - j}(0) - p_{n+1}."""
    n, q, p = rs.level, rs.q, rs.p
    return [_interval(float(rs.orbit[q[n] - j]) - p[n], float(rs.orbit[q[n + 1] - j]) - p[n + 1])
            for j in range(q[n])]


def disjoint_preimages_check(rs: ReturnStructure) -> bool:
    return intervals_disjoint(preimage_intervals(rs))


def partition_to_csv(partitions: Sequence[DynamicalPartition], fh) -> None:
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(["level", "generation", "iterate", "left", "right", "length"])
    for part in partitions:
        for i in range(len(part)):
            w.writerow([part.level, int(part.generation[i]), int(part.iterate[i]),
                        repr(float(part.left[i])), repr(float(part.right[i])),
                        repr(float(part.length[i]))])
