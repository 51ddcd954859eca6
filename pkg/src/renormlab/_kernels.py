"""Compiled orbit kernels shared by the real and complex evaluators.

Families are passed as small integer codes so the kernels stay monomorphic:
0 = rigid rotation, 1 = Arnold, 2 = perturbed Arnold.
"""
import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def lift(code, theta, b, x):
    if code == 0:
        return x + theta
    s = math.sin(TWO_PI * x)
    y = x + theta - s / TWO_PI
    if code == 2:
        y += b * s * s * s
    return y


@njit(cache=True)
def lift_prime(code, b, x):
    if code == 0:
        return 1.0
    s = math.sin(TWO_PI * x)
    c = math.cos(TWO_PI * x)
    d = 1.0 - c
    if code == 2:
        d += 3.0 * TWO_PI * b * s * s * c
    return d


@njit(cache=True)
def orbit(code, theta, b, x0, n):
    """Lift values F^j(x0) for j = 0..n-1."""
    out = np.empty(n)
    x = x0
    for j in range(n):
        out[j] = x
        x = lift(code, theta, b, x)
    return out


@njit(cache=True)
def iterate_real(code, theta, b, xs, q):
    out = xs.copy()
    for i in range(out.shape[0]):
        x = out[i]
        for _ in range(q):
            x = lift(code, theta, b, x)
        out[i] = x
    return out


@njit(cache=True)
def lift_c(code, theta, b, z):
    if code == 0:
        return z + theta
    s = np.sin(TWO_PI * z)
    w = z + theta - s / TWO_PI
    if code == 2:
        w += b * s * s * s
    return w


@njit(cache=True)
def lift_prime_c(code, b, z):
    if code == 0:
        return 1.0 + 0.0j
    s = np.sin(TWO_PI * z)
    c = np.cos(TWO_PI * z)
    d = 1.0 - c
    if code == 2:
        d += 3.0 * TWO_PI * b * s * s * c
    return d


@njit(cache=True)
def iterate_complex(code, theta, b, zs, q, height):
    """Apply the lift q times to every point; NaN marks points whose orbit
    left the strip |Im| < height at some step."""
    out = zs.copy()
    nan = complex(np.nan, np.nan)
    for i in range(out.shape[0]):
        z = out[i]
        ok = abs(z.imag) < height
        if ok:
            for _ in range(q):
                z = lift_c(code, theta, b, z)
                if not abs(z.imag) < height:
                    ok = False
                    break
        out[i] = z if ok else nan
    return out


@njit(cache=True)
def inverse_real(code, theta, b, v, steps):
    """Apply the inverse lift ``steps`` times to a real value by bisection.

    |F(u) - u - theta| < 1/4 for every family, which brackets the preimage.
    """
    for _ in range(steps):
        lo = v - theta - 0.25
        hi = v - theta + 0.25
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if lift(code, theta, b, mid) < v:
                lo = mid
            else:
                hi = mid
        v = 0.5 * (lo + hi)
    return v


@njit(cache=True)
def _newton_inverse(code, theta, b, w, seed, guard):
    u = seed
    for _ in range(60):
        du = lift_prime_c(code, b, u)
        if du == 0:
            return complex(np.nan, np.nan)
        step = (lift_c(code, theta, b, u) - w) / du
        u = u - step
        if abs(u - seed) > guard:
            return complex(np.nan, np.nan)
        if abs(step) <= 1e-14 * (1.0 + abs(u)):
            return u
    # rounding can stall the step above tolerance; accept a small residual
    if abs(lift_c(code, theta, b, u) - w) <= 1e-12 * (1.0 + abs(w)):
        return u
    return complex(np.nan, np.nan)


@njit(cache=True)
def pullback(code, theta, b, zs, x0s, steps, path, guard, height):
    """Pull each ``zs[i]`` back through ``steps`` inverse lifts.

    The branch is fixed by continuation along the segment from the real
    point ``x0s[i]``, whose real preimages are unique.  Every inversion is a
    guarded Newton solve seeded by the preimage at the previous path node.
    NaN marks samples where some solve failed or left |Im| < height.
    """
    n = zs.shape[0]
    out = np.empty(n, dtype=np.complex128)
    chain = np.empty(steps + 1, dtype=np.complex128)
    for i in range(n):
        x = x0s[i]
        chain[steps] = x
        for k in range(steps - 1, -1, -1):
            x = inverse_real(code, theta, b, x, 1)
            chain[k] = x
        ok = True
        for t in range(1, path + 1):
            w = x0s[i] + (zs[i] - x0s[i]) * (t / path)
            chain[steps] = w
            for k in range(steps - 1, -1, -1):
                u = _newton_inverse(code, theta, b, w, chain[k], guard)
                if not (abs(u.imag) < height):
                    ok = False
                    break
                chain[k] = u
                w = u
            if not ok:
                break
        out[i] = chain[0] if ok else complex(np.nan, np.nan)
    return out


@njit(cache=True)
def iterate_complex_d(code, theta, b, zs, q, height):
    """F^q and its derivative by the chain rule; NaN where the strip was left."""
    n = zs.shape[0]
    out = np.empty(n, dtype=np.complex128)
    der = np.empty(n, dtype=np.complex128)
    nan = complex(np.nan, np.nan)
    for i in range(n):
        z = zs[i]
        d = 1.0 + 0.0j
        ok = abs(z.imag) < height
        if ok:
            for _ in range(q):
                d *= lift_prime_c(code, b, z)
                z = lift_c(code, theta, b, z)
                if not abs(z.imag) < height:
                    ok = False
                    break
        out[i] = z if ok else nan
        der[i] = d if ok else nan
    return out, der
