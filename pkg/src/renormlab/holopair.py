"""Numerical holomorphic pairs over a renormalization level.

All geometry lives in the normalized frame ``z -> z / d_n`` (see ``renorm``),
where ``eta(0) = -s < 0 < xi(0) = 1``.  The maps are

    xi  = F^{q_n} - p_n,  eta = F^{q_{n+1}} - p_{n+1},  nu = xi o eta,

evaluated compositionally on complex points.  With ``m`` the height, the
long dynamical interval is ``J = [a, b]`` where ``a = f^{q_{n-1}}(c)`` (so
``xi^m(a) = eta(0)``) and ``b = f^{q_n - q_{n+1}}(c)`` (so ``eta(b) = xi(0)``).

Domains are traced by marching rays out of a real base point and stopping
where the image leaves ``V`` or crosses the real axis outside the allowed
real trace; the resulting polygons are star-shaped about that point.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import _kernels
from .complexgeom import modulus_lower_bound
from .fitting import FitError, FitResult, linear_fit
from .maps import MapSpec, R_SPEC, require_critical
from .partition import return_structure
from .rotation import ContinuedFraction

log = logging.getLogger(__name__)

V_FACTOR = 3.0          # diam(V) = V_FACTOR * |Delta_n| unless J needs more room
J_MARGIN = 1.15         # V's radius covers J's ends with this margin
RAYS = 512
RADIAL = 64
REFINE = 24
BAND = 160
V_CLIP = 0.9           # protection band: traced domains stay inside this fraction of V
VERTEX_TOL = 1e-4       # relative to |Delta_n|
H5_TOL = 1e-7


class HoloPairError(RuntimeError):
    pass


class BoundaryAmbiguity(ValueError):
    pass


@dataclass(frozen=True)
class Branch:
    """Normalized evaluator ``z -> (F^q(z d) - p) / d`` of one generator."""
    name: str
    spec: MapSpec
    q: int
    p: int
    scale: float

    def __call__(self, z):
        return self.with_derivative(z)[0]

    def with_derivative(self, z):
        z = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=complex)))
        w, d = _kernels.iterate_complex_d(self.spec.code, self.spec.theta, self.spec.b,
                                          z * self.scale, self.q, R_SPEC)
        return (w - self.p) / self.scale, d

    def real(self, x):
        x = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=float)))
        y = _kernels.iterate_real(self.spec.code, self.spec.theta, self.spec.b,
                                  x * self.scale, self.q)
        return (y - self.p) / self.scale


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    @property
    def diam(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class Domain:
    """Star-shaped closed polyline with a designated real trace."""
    name: str
    base: float
    vertices: np.ndarray
    real_trace: tuple
    _angles: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        ang = np.angle(self.vertices - self.base)
        order = np.argsort(ang, kind="stable")
        object.__setattr__(self, "vertices", self.vertices[order])
        object.__setattr__(self, "_angles", ang[order])

    def radius_at(self, phi: np.ndarray) -> np.ndarray:
        """Distance from the base point to the boundary along direction phi."""
        ang, v = self._angles, self.vertices
        k = np.searchsorted(ang, phi, side="right") - 1
        k0 = np.mod(k, ang.size)
        k1 = np.mod(k + 1, ang.size)
        p0, p1 = v[k0] - self.base, v[k1] - self.base
        d = np.exp(1j * phi)
        # intersect the ray t*d with the segment p0 + u (p1 - p0)
        e = p1 - p0
        den = (d.real * e.imag - d.imag * e.real)
        num = (p0.real * e.imag - p0.imag * e.real)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / den
        return np.where(np.isfinite(t) & (t > 0), t, np.minimum(np.abs(p0), np.abs(p1)))

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        w = z - self.base
        r = np.abs(w)
        inside = r < self.radius_at(np.angle(w))
        lo, hi = self.real_trace
        on_axis = z.imag == 0
        real_ok = (z.real >= lo) & (z.real <= hi)
        out = np.where(on_axis, real_ok, inside)
        return out[()] if out.ndim == 0 else out

    def boundary_distance(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        v = self.vertices
        a, b = v, np.roll(v, -1)
        e = b - a
        ee = np.abs(e) ** 2
        ee = np.where(ee == 0, 1.0, ee)
        t = np.clip(((z[:, None] - a[None, :]) * np.conj(e)[None, :]).real / ee[None, :], 0, 1)
        proj = a[None, :] + t * e[None, :]
        return np.min(np.abs(z[:, None] - proj), axis=1)

    @property
    def diam(self) -> float:
        v = self.vertices
        return float(np.max(np.abs(v[:, None] - v[None, :])))

    def sample_interior(self, per_ray: int = 8) -> np.ndarray:
        """Points on the rays from the base point, strictly inside."""
        t = (np.arange(1, per_ray + 1) / (per_ray + 1))
        w = self.vertices - self.base
        pts = self.base + w[:, None] * t[None, :]
        return pts.ravel()


def _violations(g: Branch, z, g_prev, V: Disk, allowed, clip: Disk):
    """True where the march arriving at z (previous image g_prev) must stop."""
    gz = g(z)
    bad = ~np.isfinite(gz) | ~V.contains(gz) | ~clip.contains(z)
    if allowed is not None:
        s0, s1 = np.sign(g_prev.imag), np.sign(gz.imag)
        cross = (s0 != 0) & (s1 != 0) & (s0 != s1)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = g_prev.imag / (g_prev.imag - gz.imag)
            x = g_prev.real + u * (gz.real - g_prev.real)
        bad |= cross & ~((x >= allowed[0]) & (x <= allowed[1]))
    return bad, gz


def _radial_schedule(rmax: float, radial: int, band: Optional[tuple]) -> np.ndarray:
    r = rmax * np.arange(1, radial + 1) / radial
    if band is not None:
        # rays grazing the cubic point cross two preimage lines within a tiny
        # distance, so the march is refined where they pass it
        r = np.union1d(r, np.linspace(band[0], band[1], BAND))
    return r


def trace_domain(name: str, g: Branch, base: float, V: Disk, real_trace: tuple,
                 allowed: Optional[tuple], rays: int = RAYS, radial: int = RADIAL,
                 refine: int = REFINE, band: Optional[tuple] = None) -> Domain:
    """Boundary of the component of g^{-1}(V minus the forbidden real slits)
    containing ``real_trace``, clipped to V_CLIP * V, by marching rays
    from ``base`` until the first violation."""
    clip = Disk(V.center, V_CLIP * V.radius)
    phi = 2 * np.pi * (np.arange(rays) + 0.5) / rays - np.pi
    d = np.exp(1j * phi)
    rmax = abs(base - V.center) + V.radius
    r = _radial_schedule(rmax, radial, band)
    gbase = complex(g.real(base)[0])
    lo = np.zeros(rays)
    hi = np.full(rays, rmax)
    glo = np.full(rays, gbase, dtype=complex)
    active = np.ones(rays, dtype=bool)
    for rj in r:
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        stop, gz = _violations(g, base + rj * d[idx], glo[idx], V, allowed, clip)
        hi[idx[stop]] = rj
        active[idx[stop]] = False
        keep = idx[~stop]
        lo[keep] = rj
        glo[keep] = gz[~stop]
    stopped = np.nonzero(~active)[0]
    for _ in range(refine):
        idx = stopped
        mid = 0.5 * (lo[idx] + hi[idx])
        stop, gm = _violations(g, base + mid * d[idx], glo[idx], V, allowed, clip)
        hi[idx] = np.where(stop, mid, hi[idx])
        lo[idx] = np.where(stop, lo[idx], mid)
        glo[idx] = np.where(stop, glo[idx], gm)
    verts = base + lo * d
    # the real trace endpoints are exact vertices on the axis
    extra = np.array([real_trace[0], real_trace[1]], dtype=complex)
    return Domain(name, base, np.concatenate([verts, extra]), real_trace)


def _real_exit(g: Branch, V: Disk, x0: float, direction: int, step: float) -> float:
    """Last real point from x0 (walking in ``direction``) that stays inside the
    clipped V and whose image stays inside V."""
    clip = Disk(V.center, V_CLIP * V.radius)

    def ok(x):
        y = g.real(x)[0]
        return bool(np.isfinite(y) and V.contains(y) and clip.contains(x))

    lo = x0
    for _ in range(10_000):
        x = lo + direction * step
        if not ok(x):
            break
        lo = x
    else:
        raise HoloPairError(f"{g.name} real trace did not leave V")
    hi = x
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class HoloPair:
    base: MapSpec
    level: int
    xi: Branch
    eta: Branch
    nu: Branch
    V: Disk
    O_xi: Domain
    O_eta: Domain
    O_nu: Domain
    J: tuple
    height_m: int
    ratio: float
    checks: dict

    @property
    def a(self) -> float:
        return self.J[0]

    @property
    def b(self) -> float:
        return self.J[1]

    @property
    def J_len(self) -> float:
        return self.J[1] - self.J[0]

    @property
    def Delta(self) -> tuple:
        return (-self.ratio, 1.0)

    @property
    def vertex_tol(self) -> float:
        return VERTEX_TOL * (1.0 + self.ratio)

    def domains(self):
        return (self.O_xi, self.O_eta, self.O_nu)

    def in_U(self, z) -> np.ndarray:
        return self.O_xi.contains(z) | self.O_eta.contains(z) | self.O_nu.contains(z)

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["domain", "re", "im"])
        for dom in self.domains():
            for v in dom.vertices:
                w.writerow([dom.name, repr(float(v.real)), repr(float(v.imag))])


def _choose_V(ratio: float, a: float, b: float, factor: float) -> Disk:
    center = 0.5 * (1.0 - ratio)
    radius = 0.5 * factor * (1.0 + ratio)
    need = J_MARGIN * max(abs(a - center), abs(b - center))
    return Disk(complex(center, 0.0), max(radius, need))


def build_holo_pair(f: MapSpec, cf: ContinuedFraction, n: int, v_factor: float = V_FACTOR,
                    V: Optional[Disk] = None, certify: bool = True) -> HoloPair:
    if n < 6:
        raise ValueError("holomorphic pairs need level n >= 6")
    require_critical(f)
    rs = return_structure(f, cf, n)
    q, p, disp = rs.q, rs.p, rs.disp
    dn = disp[n]
    s = abs(disp[n + 1] / dn)
    m = cf.quotients[n]
    xi = Branch("xi", f, q[n], p[n], dn)
    eta = Branch("eta", f, q[n + 1], p[n + 1], dn)
    nu = Branch("nu", f, q[n] + q[n + 1], p[n] + p[n + 1], dn)

    a = disp[n - 1] / dn
    back = _kernels.inverse_real(f.code, f.theta, f.b, 0.0, q[n + 1]) + p[n + 1]
    b = float(_kernels.iterate_real(f.code, f.theta, f.b, np.array([back]), q[n])[0]
              - p[n]) / dn
    if V is None:
        V = _choose_V(s, a, b, v_factor)

    eta0 = float(eta.real(0.0)[0])
    xi0 = float(xi.real(0.0)[0])
    xia = float(xi.real(a)[0])
    O_xi = trace_domain("xi", xi, 0.5 * a, V, (a, 0.0), (xia, xi0),
                        band=(0.4 * abs(a), 0.6 * abs(a)))
    O_eta = trace_domain("eta", eta, 0.5 * b, V, (0.0, b), (eta0, float(eta.real(b)[0])),
                         band=(0.4 * b, 0.6 * b))
    step = 0.02 * (1.0 + s)
    lo_nu = _real_exit(nu, V, 0.0, -1, step)
    hi_nu = _real_exit(nu, V, 0.0, +1, step)
    O_nu = trace_domain("nu", nu, 0.0, V, (lo_nu, hi_nu),
                        (float(nu.real(lo_nu)[0]), float(nu.real(hi_nu)[0])))

    checks = _certify(xi, eta, nu, V, O_xi, O_eta, O_nu, a, b, m, s)
    hp = HoloPair(f, n, xi, eta, nu, V, O_xi, O_eta, O_nu, (a, b), m, s, checks)
    if certify:
        failed = [k for k, v in checks.items() if not v[0]]
        if failed:
            raise HoloPairError(f"certification failed: {', '.join(failed)} "
                                f"({'; '.join(str(checks[k][1]) for k in failed)})")
    return hp


def _certify(xi, eta, nu, V, O_xi, O_eta, O_nu, a, b, m, s) -> dict:
    tol = VERTEX_TOL * (1.0 + s)
    out = {}
    eta0, xi0 = float(eta.real(0.0)[0]), float(xi.real(0.0)[0])
    out["H3"] = (a < eta0 < 0.0 < xi0 < b, (eta0, xi0))
    x = a
    for _ in range(m):
        x = float(xi.real(x)[0])
    r1 = abs(x - eta0)
    r2 = abs(float(eta.real(b)[0]) - xi0)
    out["H5"] = (max(r1, r2) <= H5_TOL, (r1, r2))
    # bowtie (a): closures inside V
    inside = all(bool(np.all(V.contains(dom.vertices))) for dom in (O_xi, O_eta, O_nu))
    out["bowtie_a"] = (inside, "closure of each domain inside V")
    # bowtie (b): O_xi and O_eta touch only at 0, which lies in O_nu
    vx = O_xi.vertices[np.abs(O_xi.vertices) > tol]
    ve = O_eta.vertices[np.abs(O_eta.vertices) > tol]
    overlap = bool(np.any(O_eta.contains(vx) & (np.abs(vx.imag) > 0))
                   or np.any(O_xi.contains(ve) & (np.abs(ve.imag) > 0)))
    out["bowtie_b"] = (not overlap and bool(O_nu.contains(0.0)), "O_xi meets O_eta only at 0")
    # bowtie (c): the four difference sets are nonempty
    px, pe, pn = O_xi.sample_interior(), O_eta.sample_interior(), O_nu.sample_interior()
    diffs = (np.any(~O_nu.contains(px)), np.any(~O_nu.contains(pe)),
             np.any(~O_xi.contains(pn)), np.any(~O_eta.contains(pn)))
    out["bowtie_c"] = (bool(all(diffs)), diffs)
    return out


# ---------------------------------------------------------------- control

K_GRID = 1.02 ** np.arange(0, 600)      # 1 .. ~1.4e5
CIRCLE = 96


@dataclass(frozen=True)
class ControlReport:
    conditions: dict          # name -> (passed, K_i, measured)
    K_est: float
    K: Optional[float] = None

    @property
    def all_pass(self) -> bool:
        return all(v[0] for v in self.conditions.values())

    def to_dict(self) -> dict:
        return {"K_est": self.K_est, "K": self.K,
                "conditions": {k: {"passed": bool(v[0]), "K": float(v[1]), "measured": v[2]}
                               for k, v in self.conditions.items()}}


def _bounded_constant(points) -> float:
    p = np.asarray(points, dtype=complex)
    d = np.abs(p[:, None] - p[None, :])
    d = d[d > 0]
    return float(d.max() / d.min())


def _smallest_K(distortion, J_len: float) -> float:
    """Least K on the grid with distortion(|J| / K) <= K."""
    for K in K_GRID:
        try:
            if distortion(J_len / K) <= K:
                return float(K)
        except FloatingPointError:
            continue
    return math.inf


def _circle(center: complex, r: float) -> np.ndarray:
    return center + r * np.exp(2j * np.pi * (np.arange(CIRCLE) + 0.5) / CIRCLE)


def _plain_distortion(g: Branch, center: float):
    def dist(r):
        _, d = g.with_derivative(_circle(center, r))
        m = np.abs(d)
        if not np.all(np.isfinite(m)) or m.min() == 0:
            raise FloatingPointError
        return float(m.max() / m.min())
    return dist


def _cubic_distortion(g: Branch, center: float):
    """Distortion of the univalent factor of g = g(center) + h^3 (or of
    psi with g = psi o Q when center = 0); only |h'| is needed."""
    g0 = complex(g.real(center)[0])

    def dist(r):
        z = _circle(center, r)
        w, d = g.with_derivative(z)
        num = np.abs(d)
        den = 3.0 * np.abs(w - g0) ** (2.0 / 3.0)
        m = num / den
        if not np.all(np.isfinite(m)) or m.min() == 0:
            raise FloatingPointError
        return float(m.max() / m.min())
    return dist


def _psi_distortion(g: Branch):
    """g = psi o Q near 0: |psi'(z^3)| = |g'(z)| / (3 |z|^2)."""
    def dist(r):
        z = _circle(0.0, r)
        _, d = g.with_derivative(z)
        m = np.abs(d) / (3.0 * np.abs(z) ** 2)
        if not np.all(np.isfinite(m)) or m.min() == 0:
            raise FloatingPointError
        return float(m.max() / m.min())
    return dist


def _connected_K(dom: Domain, center: float, J_len: float, px: int = 81) -> float:
    for K in K_GRID:
        r = J_len / K
        t = np.linspace(-r, r, px)
        X, Y = np.meshgrid(t, t)
        Z = center + X + 1j * Y
        mask = (np.abs(Z - center) < r) & dom.contains(Z)
        _, count = ndimage.label(mask, structure=np.ones((3, 3)))
        if count == 1:
            return float(K)
    return math.inf


def fundamental_separation(hp: HoloPair) -> float:
    """Smallest distance from the polygonal boundary of U to the circle of V."""
    v = np.concatenate([d.vertices for d in hp.domains()])
    return float(np.min(hp.V.radius - np.abs(v - hp.V.center)))


def control_report(hp: HoloPair, K: Optional[float] = None) -> ControlReport:
    J_len = hp.J_len
    out = {}
    marked = [0.0, float(hp.xi.real(0.0)[0]), float(hp.eta.real(0.0)[0]),
              float(hp.nu.real(0.0)[0]), hp.a, hp.b]
    k1 = _bounded_constant(marked)
    out["G1"] = (k1, marked)
    out["G2"] = (hp.V.diam / J_len, hp.V.diam)
    sup = 0.0
    for g, dom in ((hp.xi, hp.O_xi), (hp.eta, hp.O_eta), (hp.nu, hp.O_nu)):
        lo, hi = dom.real_trace
        _, d = g.with_derivative(np.linspace(lo, hi, 2001) + 0j)
        sup = max(sup, float(np.max(np.abs(d))))
    out["G3"] = (max(1.0, sup), sup)
    # xi is univalent at a; eta has its cubic point at b (see module docstring)
    k4 = max(_smallest_K(_plain_distortion(hp.xi, hp.a), J_len),
             _smallest_K(_psi_distortion(hp.xi), J_len))
    k5 = max(_smallest_K(_cubic_distortion(hp.eta, hp.b), J_len),
             _smallest_K(_psi_distortion(hp.eta), J_len))
    out["G4"] = (k4, None)
    out["G5"] = (k5, None)
    k6 = max(_connected_K(hp.O_xi, hp.a, J_len), _connected_K(hp.O_eta, hp.b, J_len))
    out["G6"] = (k6, None)
    r7 = float(hp.O_nu.boundary_distance(0.0)[0])
    out["G7"] = (J_len / r7 if r7 > 0 else math.inf, r7)
    sep = fundamental_separation(hp)
    if sep > 0:
        mb = modulus_lower_bound(min(sep, hp.V.diam), hp.V.diam)
        out["G8"] = (1.0 / mb.lower, mb.lower)
    else:
        out["G8"] = (math.inf, 0.0)
    K_est = max(v[0] for v in out.values())
    limit = K_est if K is None else K
    conds = {k: (bool(np.isfinite(v[0]) and v[0] <= limit), float(v[0]),
                 v[1] if not isinstance(v[1], list) else [float(x) for x in v[1]])
             for k, v in out.items()}
    return ControlReport(conds, float(K_est), K)


# ---------------------------------------------------------------- shadow

ESCAPE = None


def _which(hp: HoloPair, z) -> np.ndarray:
    """0 = xi, 1 = eta, 2 = nu, -1 = outside U (vectorized shadow rule)."""
    z = np.asarray(z, dtype=complex)
    inx, ine, inn = hp.O_xi.contains(z), hp.O_eta.contains(z), hp.O_nu.contains(z)
    # O_xi and O_eta are open and their closures meet only at 0, so 0 belongs to nu
    origin = z == 0
    inx, ine = inx & ~origin, ine & ~origin
    return np.where(inx, 0, np.where(ine, 1, np.where(inn, 2, -1)))


def shadow_step(hp: HoloPair, z) -> tuple:
    """Vectorized shadow; NaN where the point is outside U."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    k = _which(hp, z)
    out = np.full(z.shape, complex(np.nan, np.nan))
    for label, g in enumerate((hp.xi, hp.eta, hp.nu)):
        sel = k == label
        if np.any(sel):
            out[sel] = g(z[sel])
    return out, k


def shadow_eval(hp: HoloPair, z: complex):
    z = complex(z)
    tol = hp.vertex_tol
    if z.imag != 0:
        for dom in hp.domains():
            if dom.boundary_distance(z)[0] < tol:
                raise BoundaryAmbiguity(f"{z} lies within {tol:g} of the boundary of O_{dom.name}")
    w, k = shadow_step(hp, z)
    if k[0] < 0:
        return ESCAPE
    return complex(w[0])


# ---------------------------------------------------------------- limit set

@dataclass(frozen=True)
class LimitSetCloud:
    points: np.ndarray
    depth_of: np.ndarray
    depth: int
    counts: tuple
    skipped: int = 0

    def at_depth(self, d: int) -> np.ndarray:
        return self.points[self.depth_of == d]

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["re", "im", "depth"])
        for z, d in zip(self.points, self.depth_of):
            w.writerow([repr(float(z.real)), repr(float(z.imag)), int(d)])


@dataclass
class _SeedTable:
    g: Branch
    z: np.ndarray
    tree: cKDTree

    @classmethod
    def build(cls, g: Branch, dom: Domain, per_ray: int = 12):
        z = dom.sample_interior(per_ray)
        w = g(z)
        ok = np.isfinite(w)
        z, w = z[ok], w[ok]
        return cls(g, z, cKDTree(np.column_stack([w.real, w.imag])))


def _newton_preimages(table: _SeedTable, targets: np.ndarray, k: int, iters: int = 40):
    """Roots of g(z) = w started from the k seeds whose images are nearest."""
    if targets.size == 0:
        return np.empty(0, complex), np.empty(0, int)
    _, idx = table.tree.query(np.column_stack([targets.real, targets.imag]), k=k)
    idx = idx.reshape(targets.size, k)
    z = table.z[idx].ravel()
    w = np.repeat(targets, k)
    owner = np.repeat(np.arange(targets.size), k)
    done = np.zeros(z.size, dtype=bool)
    for _ in range(iters):
        act = np.nonzero(~done & np.isfinite(z))[0]
        if act.size == 0:
            break
        gz, dz = table.g.with_derivative(z[act])
        with np.errstate(invalid="ignore", divide="ignore"):
            step = (gz - w[act]) / dz
        z[act] = z[act] - step
        done[act] = np.abs(step) <= 1e-13 * (1.0 + np.abs(z[act]))
    ok = done & np.isfinite(z)
    return z[ok], owner[ok]


def _dedupe(z: np.ndarray, res: float) -> np.ndarray:
    if z.size == 0:
        return z
    key = np.round(np.column_stack([z.real, z.imag]) / res).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    return z[np.sort(first)]


def limit_set_sample(hp: HoloPair, depth: int, per_arc: int = 200, cap: int = 4000,
                     seed: int = 0, resolution: float = 1e-7) -> LimitSetCloud:
    """Breadth-first inverse iteration of a sample of J under the shadow."""
    if not 0 <= depth <= 12:
        raise ValueError("depth must lie in 0..12")
    rng = np.random.default_rng(seed)
    tables = [_SeedTable.build(hp.xi, hp.O_xi), _SeedTable.build(hp.eta, hp.O_eta),
              _SeedTable.build(hp.nu, hp.O_nu)]
    gen = np.linspace(hp.a, hp.b, per_arc) + 0j
    pts, dep, counts = [gen], [np.zeros(gen.size, int)], [gen.size]
    skipped = 0
    res = resolution * (1.0 + hp.ratio)
    for d in range(1, depth + 1):
        new = []
        for label, (table, k) in enumerate(zip(tables, (2, 2, 6))):
            z, owner = _newton_preimages(table, gen, k)
            keep = _which(hp, z) == label
            skipped += int(np.count_nonzero(~keep))
            new.append(z[keep])
        z = np.concatenate(new)
        z = np.concatenate([z, np.conj(z)])
        z = _dedupe(z, res)
        if z.size > cap:
            z = z[np.sort(rng.choice(z.size, cap, replace=False))]
            z = _dedupe(np.concatenate([z, np.conj(z)]), res)
        gen = z
        pts.append(z)
        dep.append(np.full(z.size, d))
        counts.append(int(z.size))
    return LimitSetCloud(np.concatenate(pts), np.concatenate(dep), depth, tuple(counts), skipped)


def conjugation_gap(hp: HoloPair, cloud: LimitSetCloud, resolution: float = 1e-7) -> float:
    """Worst distance from a conjugated point to the cloud, in units of the dedupe resolution."""
    z = cloud.points
    tree = cKDTree(np.column_stack([z.real, z.imag]))
    dist, _ = tree.query(np.column_stack([z.real, -z.imag]))
    return float(np.max(dist)) / (resolution * (1.0 + hp.ratio))


@dataclass(frozen=True)
class Consistency:
    chain: float       # worst distance to J after d forward shadow steps
    link: float        # worst distance from one forward step to the previous generation


def forward_consistency(hp: HoloPair, cloud: LimitSetCloud) -> Consistency:
    """Push each depth-d point forward.  ``chain`` is the literal d-fold test;
    rounding grows by |DF| per step, so ``link`` checks a single step against
    the stored generation d - 1 instead."""
    chain = link = 0.0
    for d in range(1, cloud.depth + 1):
        z = cloud.at_depth(d)
        if z.size == 0:
            continue
        prev = cloud.at_depth(d - 1)
        tree = cKDTree(np.column_stack([prev.real, prev.imag]))
        w, _ = shadow_step(hp, z)
        dist, _ = tree.query(np.column_stack([w.real, w.imag]))
        link = max(link, float(np.max(np.nan_to_num(dist, nan=np.inf))))
        for _ in range(d - 1):
            w, _ = shadow_step(hp, w)
        err = np.abs(w - np.clip(w.real, hp.a, hp.b))
        chain = max(chain, float(np.max(np.nan_to_num(err, nan=np.inf))))
    return Consistency(chain, link)


# ---------------------------------------------------------------- deep point

def hole_radius(tree: cKDTree, r: float, grid: int) -> float:
    """Radius of the largest sampled disk inside D(0, r) missing the cloud."""
    t = np.linspace(-r, r, grid)
    X, Y = np.meshgrid(t, t)
    P = np.column_stack([X.ravel(), Y.ravel()])
    rad = np.hypot(P[:, 0], P[:, 1])
    P, rad = P[rad < r], rad[rad < r]
    dist, _ = tree.query(P)
    return float(np.max(np.minimum(dist, r - rad)))


@dataclass(frozen=True)
class DeepPointFit:
    fit: FitResult
    radii: tuple
    holes: tuple
    excluded: tuple


def deep_point_exponent(points, r_lo: float, r_hi: float, grid: int = 128,
                        n_radii: int = 10) -> DeepPointFit:
    pts = np.asarray(points, dtype=complex)
    xy = np.column_stack([pts.real, pts.imag])
    tree = cKDTree(xy)
    nn, _ = tree.query(xy, k=2)
    radii, holes, excluded = [], [], []
    for r in np.geomspace(r_lo, r_hi, n_radii):
        near = np.hypot(xy[:, 0], xy[:, 1]) < r
        spacing = float(np.median(nn[near, 1])) if np.any(near) else math.inf
        h = hole_radius(tree, r, grid)
        if h < 3.0 * spacing:
            excluded.append(float(r))
            continue
        radii.append(float(r))
        holes.append(h)
    if len(radii) < 4:
        raise FitError("resolution-limited: fewer than 4 radii with holes above the sampling floor")
    fit = linear_fit(np.log(radii), np.log(holes))
    return DeepPointFit(fit, tuple(radii), tuple(holes), tuple(excluded))


# ---------------------------------------------------------------- expansion

@dataclass(frozen=True)
class ExpansionSequence:
    values: tuple
    complete: bool


def expansion_proxy(hp: HoloPair, z: complex, k: int) -> ExpansionSequence:
    """l_j = |DF^j(z)| |Im z| / |Im F^j(z)|, j = 0..k, with DF by finite differences."""
    z = complex(z)
    h = 1e-7 * (1.0 + hp.ratio)
    vals = [1.0]
    der = 1.0 + 0j
    y0 = abs(z.imag)
    w = z
    for _ in range(k):
        label = int(_which(hp, w))
        if label < 0:
            return ExpansionSequence(tuple(vals), False)
        g = (hp.xi, hp.eta, hp.nu)[label]
        pair = g(np.array([w - h, w + h]))
        nxt = complex(g(w)[0])
        if not np.all(np.isfinite(pair)) or not np.isfinite(nxt) or nxt.imag == 0:
            return ExpansionSequence(tuple(vals), False)
        der *= (pair[1] - pair[0]) / (2 * h)
        w = nxt
        vals.append(abs(der) * y0 / abs(w.imag))
    return ExpansionSequence(tuple(vals), True)


@dataclass(frozen=True)
class ExpansionSurvey:
    starts: np.ndarray
    one_step: np.ndarray      # l_1 / l_0 (NaN when the first step escapes)
    last: np.ndarray          # l_k for complete sequences, NaN otherwise
    k: int

    @property
    def complete(self) -> np.ndarray:
        return np.isfinite(self.last)

    def fraction_expanding(self) -> float:
        ok = np.isfinite(self.one_step)
        return float(np.mean(self.one_step[ok] >= 1.0)) if np.any(ok) else math.nan

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["re", "im", "one_step", "l_k"])
        for z, r, l in zip(self.starts, self.one_step, self.last):
            w.writerow([repr(float(z.real)), repr(float(z.imag)),
                        "" if not np.isfinite(r) else repr(float(r)),
                        "" if not np.isfinite(l) else repr(float(l))])


def expansion_survey(hp: HoloPair, count: int = 1000, k: int = 20, min_im_frac: float = 0.1,
                     seed: int = 0) -> ExpansionSurvey:
    """Uniform starts in U with |Im z| >= min_im_frac |J|, each followed for k steps."""
    rng = np.random.default_rng(seed)
    starts = []
    while len(starts) < count:
        r = hp.V.radius * np.sqrt(rng.random(4 * count))
        t = 2 * np.pi * rng.random(4 * count)
        z = hp.V.center + r * np.exp(1j * t)
        z = z[(np.abs(z.imag) >= min_im_frac * hp.J_len) & hp.in_U(z)]
        starts.extend(z.tolist())
    starts = np.array(starts[:count])
    one = np.full(count, np.nan)
    last = np.full(count, np.nan)
    for i, z in enumerate(starts):
        seq = expansion_proxy(hp, z, k)
        if len(seq.values) > 1:
            one[i] = seq.values[1]
        if seq.complete:
            last[i] = seq.values[-1]
    return ExpansionSurvey(starts, one, last, k)
