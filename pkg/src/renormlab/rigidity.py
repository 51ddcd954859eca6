"""Rigidity observables: orbit-matched conjugacies, quasisymmetric distortion,
scaling ratios and the interval-ratio convergence fit.

Nothing here interpolates the conjugacy; every quantity is a ratio of
lengths between corresponding orbit points.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .fitting import FitError, FitResult, linear_fit
from .maps import MapSpec
from .partition import return_structure
from .rotation import ContinuedFraction

log = logging.getLogger(__name__)

SNAP_TOL = 0.10         # snapped half-widths must match t within 10%
DIFF_FLOOR = 1e-13
MIN_TRIPLES = 4


class ConjugacyError(ValueError):
    """The two orbits are not in the same cyclic order."""


@dataclass(frozen=True)
class OrbitConjugacy:
    x: np.ndarray             # f^i(c_f) mod 1, sorted
    y: np.ndarray             # g^i(c_g) mod 1, same order
    index: np.ndarray         # orbit index i of each pair
    level: int

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def __len__(self):
        return self.x.size

    def inverse(self) -> "OrbitConjugacy":
        return OrbitConjugacy(self.y, self.x, self.index, self.level)

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["i", "x", "y"])
        for i, x, y in zip(self.index, self.x, self.y):
            w.writerow([int(i), repr(float(x)), repr(float(y))])


def orbit_conjugacy(f: MapSpec, g: MapSpec, cf: ContinuedFraction, n: int) -> OrbitConjugacy:
    """Pair f^i(c) with g^i(c) for i < q_n + q_{n+1} and certify the order."""
    xs = np.mod(return_structure(f, cf, n).orbit, 1.0)
    ys = np.mod(return_structure(g, cf, n).orbit, 1.0)
    # both orbits start at c = 0, so cyclic order is linear order on [0, 1)
    ox = np.argsort(xs, kind="stable")
    oy = np.argsort(ys, kind="stable")
    if not np.array_equal(ox, oy):
        k = int(np.argmax(ox != oy))
        raise ConjugacyError(f"orbit orders differ at rank {k}: f^{ox[k]} vs g^{oy[k]}")
    return OrbitConjugacy(xs[ox], ys[ox], ox, n)


def _snap(x: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Index of the nearest point of sorted x on the circle."""
    ext = np.concatenate([x - 1.0, x, x + 1.0])
    j = np.clip(np.searchsorted(ext, targets), 1, ext.size - 1)
    left_closer = (targets - ext[j - 1]) <= (ext[j] - targets)
    return np.where(left_closer, j - 1, j)


def qs_profile(oc: OrbitConjugacy, scales: int) -> dict:
    """Per dyadic scale t = 2^-k, the worst symmetric-triple ratio.

    Snapping moves the outer points off x +- t, so the h-gap ratio is divided
    by the x-gap ratio of the snapped triple; the identity then gives 1 exactly.
    """
    if len(oc) < 100:
        raise ValueError("need at least 100 pairs")
    x, y = oc.x, oc.y
    N = x.size
    ext_x = np.concatenate([x - 1.0, x, x + 1.0])
    ext_y = np.concatenate([y - 1.0, y, y + 1.0])
    out = {}
    for k in range(2, scales + 2):
        t = 2.0 ** -k
        hi = _snap(x, x + t)
        lo = _snap(x, x - t)
        tr = ext_x[hi] - x
        tl = x - ext_x[lo]
        ok = (np.abs(tr - t) <= SNAP_TOL * t) & (np.abs(tl - t) <= SNAP_TOL * t)
        if np.count_nonzero(ok) < MIN_TRIPLES:
            log.info("scale 2^-%d skipped: %d triples", k, np.count_nonzero(ok))
            continue
        c = np.arange(N)[ok] + N
        hr = ext_y[hi[ok]] - ext_y[c]
        hl = ext_y[c] - ext_y[lo[ok]]
        R = (hr / hl) / (tr[ok] / tl[ok])
        out[k] = float(np.max(np.maximum(R, 1.0 / R)))
    return out


def qs_distortion(oc: OrbitConjugacy, scales: int) -> float:
    prof = qs_profile(oc, scales)
    if not prof:
        raise ValueError("no dyadic scale had enough snapped triples")
    return max(prof.values())


def scaling_ratios(f: MapSpec, cf: ContinuedFraction, n_hi: int) -> np.ndarray:
    """s_n = |I_{n+1}| / |I_n| for n = 0..n_hi."""
    d = np.abs(np.array(return_structure(f, cf, n_hi).disp))
    return d[1:] / d[:-1]


@dataclass(frozen=True)
class RigidityScan:
    levels: tuple
    rho: tuple                # |I_n(g)| / |I_n(f)|
    diffs: tuple              # |rho_n - rho_{n+1}|
    fit: FitResult
    excluded: tuple = ()

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["n", "rho_n", "diff", "log_diff"])
        for n, r, d in zip(self.levels, self.rho, self.diffs):
            w.writerow([n, repr(r), repr(d), repr(math.log(d)) if d > 0 else ""])


def rigidity_scan(f: MapSpec, g: MapSpec, cf: ContinuedFraction, n_lo: int, n_hi: int) -> RigidityScan:
    if n_hi - n_lo < 4:
        raise ValueError("need n_hi - n_lo >= 4")
    df = np.abs(np.array(return_structure(f, cf, n_hi).disp))
    dg = np.abs(np.array(return_structure(g, cf, n_hi).disp))
    rho = dg / df
    levels = list(range(n_lo, n_hi))
    diffs = [float(abs(rho[n] - rho[n + 1])) for n in levels]
    keep = [(n, d) for n, d in zip(levels, diffs) if d >= DIFF_FLOOR]
    excluded = tuple(n for n, d in zip(levels, diffs) if d < DIFF_FLOOR)
    if len(keep) < 4:
        raise FitError("all differences zero" if not keep else "fewer than 4 usable levels")
    fit = linear_fit([n for n, _ in keep], [math.log(d) for _, d in keep])
    return RigidityScan(tuple(levels), tuple(float(rho[n]) for n in levels), tuple(diffs), fit, excluded)


def rigidity_fit(f: MapSpec, g: MapSpec, cf: ContinuedFraction, n_lo: int, n_hi: int) -> FitResult:
    return rigidity_scan(f, g, cf, n_lo, n_hi).fit
