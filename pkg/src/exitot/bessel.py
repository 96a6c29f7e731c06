"""Order-zero and order-one Bessel functions and the zeros of J0.

Evaluated in-house: power series for small arguments, Hankel asymptotic
expansion for large ones, zeros by bracketed bisection around McMahon
estimates. No external tables.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

__all__ = ["j0", "j1", "j0_zeros"]

_SERIES_CUTOFF = 14.0


def _j0_series(x: float) -> float:
    q = -0.25 * x * x
    term = 1.0
    acc = 1.0
    for m in range(1, 200):
        term *= q / (m * m)
        acc += term
        if abs(term) < 1e-18 * max(1.0, abs(acc)):
            break
    return acc


def _j1_series(x: float) -> float:
    q = -0.25 * x * x
    term = 0.5 * x
    acc = term
    for m in range(1, 200):
        term *= q / (m * (m + 1))
        acc += term
        if abs(term) < 1e-18 * max(1.0, abs(acc)):
            break
    return acc


def _hankel_pq(nu: int, x: float):
    # a_k = a_{k-1} * (4 nu^2 - (2k-1)^2) / (8 k x); P sums even k, Q odd k.
    mu = 4.0 * nu * nu
    p = 1.0
    q = 0.0
    term = 1.0
    for k in range(1, 20):
        term *= (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        if k % 2 == 1:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += -term if (k // 2) % 2 == 1 else term
        if abs(term) < 1e-18:
            break
    return p, q


def _j_asymptotic(nu: int, x: float) -> float:
    p, q = _hankel_pq(nu, x)
    w = x - 0.5 * nu * math.pi - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(w) - q * math.sin(w))


def j0(x: float) -> float:
    x = abs(float(x))
    if x <= _SERIES_CUTOFF:
        return _j0_series(x)
    return _j_asymptotic(0, x)


def j1(x: float) -> float:
    xf = float(x)
    s = -1.0 if xf < 0 else 1.0
    x = abs(xf)
    if x <= _SERIES_CUTOFF:
        return s * _j1_series(x)
    return s * _j_asymptotic(1, x)


def _mcmahon_j0(n: int) -> float:
    b = (n - 0.25) * math.pi
    r = 1.0 / (8.0 * b)
    return b + r * (1.0 + r * r * (-124.0 / 3.0 + r * r * 120928.0 / 15.0))


@lru_cache(maxsize=None)
def _j0_zeros_tuple(k: int) -> tuple:
    zs = []
    for n in range(1, k + 1):
        guess = _mcmahon_j0(n)
        half = 0.4 if n > 1 else 0.8
        lo, hi = guess - half, guess + half
        flo, fhi = j0(lo), j0(hi)
        widen = 0
        while flo * fhi > 0:
            half *= 1.5
            lo, hi = guess - half, guess + half
            flo, fhi = j0(lo), j0(hi)
            widen += 1
            if widen > 8:
                raise ArithmeticError(f"no sign change bracketing zero #{n} of J0")
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            fm = j0(mid)
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi, fhi = mid, fm
        zs.append(0.5 * (lo + hi))
    return tuple(zs)


def j0_zeros(k: int) -> np.ndarray:
    """First k positive zeros of J0, ascending."""
    if k < 1:
        return np.empty(0)
    return np.asarray(_j0_zeros_tuple(int(k)))
