"""Commuting pairs and their affine renormalizations.

Renormalizations are kept compositional: an evaluator iterates the base lift
``q`` times and rescales, so no approximation error enters the distances.
With ``d_n = F^{q_n}(0) - p_n`` the rescaling is ``A(x) = x / d_n``, which
sends ``c = 0`` to 0 and ``I_n`` onto ``[0, 1]``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fitting import FitError, FitResult, linear_fit
from .maps import MapSpec, iterate, require_critical
from .partition import PrecisionError, ReturnStructure, restrict, return_structure
from .rotation import ContinuedFraction

log = logging.getLogger(__name__)

COMMUTE_TOL = 1e-7
DEFAULT_GRID = 256


@dataclass(frozen=True)
class CommutingPair:
    base: MapSpec
    level: int
    xi_exponent: int
    eta_exponent: int
    domain_xi: tuple
    domain_eta: tuple
    xi_shift: int = 0         # p_n
    eta_shift: int = 0        # p_{n+1}
    residual: float = 0.0

    def xi(self, x):
        return iterate(self.base, x, self.xi_exponent) - self.xi_shift

    def eta(self, x):
        return iterate(self.base, x, self.eta_exponent) - self.eta_shift


def commuting_pair(rs: ReturnStructure, samples: int = 8) -> CommutingPair:
    n, q, p = rs.level, rs.q, rs.p
    cp = CommutingPair(rs.spec, n, q[n], q[n + 1], rs.I[n + 1], rs.I[n], p[n], p[n + 1])
    # both compositions are F^{q_n + q_{n+1}} minus the same integer
    r = min(abs(rs.disp[n]), abs(rs.disp[n + 1]))
    xs = np.concatenate([[0.0], np.linspace(-0.5 * r, 0.5 * r, samples + 2)[1:-1]])
    res = float(np.max(np.abs(cp.xi(cp.eta(xs)) - cp.eta(cp.xi(xs)))))
    if res > COMMUTE_TOL:
        raise PrecisionError(f"commutation residual {res:.3e} at level {n}")
    return CommutingPair(cp.base, n, cp.xi_exponent, cp.eta_exponent, cp.domain_xi,
                         cp.domain_eta, cp.xi_shift, cp.eta_shift, res)


@dataclass(frozen=True)
class NormalizedPair:
    pair: CommutingPair
    scale: float              # d_n, signed
    ratio: float              # s = |I_{n+1}| / |I_n|
    parity: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "parity", 1 if self.scale > 0 else -1)

    def eta_hat(self, x):
        x = np.asarray(x, dtype=float)
        return self.pair.eta(x * self.scale) / self.scale

    def xi_hat(self, x):
        x = np.asarray(x, dtype=float)
        return self.pair.xi(x * self.scale) / self.scale


def renormalize(cp: CommutingPair) -> NormalizedPair:
    dn = float(cp.xi(0.0)[0])
    dn1 = float(cp.eta(0.0)[0])
    return NormalizedPair(cp, dn, abs(dn1 / dn))


def pair_distance(a: NormalizedPair, b: NormalizedPair, grid: int = DEFAULT_GRID) -> float:
    if grid < 64:
        raise ValueError("grid must be >= 64")
    x_eta = np.linspace(0.0, 1.0, grid)
    x_xi = np.linspace(-min(a.ratio, b.ratio), 0.0, grid)
    d_eta = np.max(np.abs(a.eta_hat(x_eta) - b.eta_hat(x_eta)))
    d_xi = np.max(np.abs(a.xi_hat(x_xi) - b.xi_hat(x_xi)))
    return float(abs(a.ratio - b.ratio) + d_eta + d_xi)


def normalized_pairs(spec: MapSpec, cf: ContinuedFraction, levels: Sequence[int]) -> dict:
    """Normalized pairs at several levels from one deep orbit."""
    rs = return_structure(spec, cf, max(levels))
    return {n: renormalize(commuting_pair(restrict(rs, n))) for n in levels}


@dataclass(frozen=True)
class ConvergenceScan:
    levels: tuple
    distances: tuple
    fit: FitResult
    excluded: tuple = ()

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["n", "d_n", "log_d_n"])
        for n, d in zip(self.levels, self.distances):
            w.writerow([n, repr(d), repr(math.log(d)) if d > 0 else ""])


def convergence_scan(f: MapSpec, g: MapSpec, cf: ContinuedFraction, n_lo: int, n_hi: int,
                     grid: int = DEFAULT_GRID) -> ConvergenceScan:
    if n_hi - n_lo < 4:
        raise ValueError("need n_hi - n_lo >= 4")
    require_critical(f)
    require_critical(g)
    levels = list(range(n_lo, n_hi + 1))
    pf = normalized_pairs(f, cf, levels)
    pg = normalized_pairs(g, cf, levels)
    dist = [pair_distance(pf[n], pg[n], grid) for n in levels]
    keep = [(n, d) for n, d in zip(levels, dist) if d > 0]
    excluded = tuple(n for n, d in zip(levels, dist) if d == 0)
    if excluded:
        log.info("levels %s have d_n = 0 and are excluded from the fit", excluded)
    if len(keep) < 4:
        raise FitError("all distances zero" if not keep else "fewer than 4 usable levels")
    fit = linear_fit([n for n, _ in keep], [math.log(d) for _, d in keep])
    return ConvergenceScan(tuple(levels), tuple(dist), fit, excluded)


def convergence_rate(f: MapSpec, g: MapSpec, cf: ContinuedFraction, n_lo: int, n_hi: int,
                     grid: int = DEFAULT_GRID) -> FitResult:
    return convergence_scan(f, g, cf, n_lo, n_hi, grid).fit
