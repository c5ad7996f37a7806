"""Small shared numerical helpers: composite Simpson weights, Gauss nodes, slope fits."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for n equally spaced samples (spacing h).

    Handles an even number of subintervals with plain Simpson; an odd count
    gets a 3/8 rule on the final triple so the order stays 4.  n == 1 gives a
    zero weight (empty interval), n == 2 falls back to the trapezoid.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    w = np.zeros(n)
    if n == 1:
        return w
    if n == 2:
        w[:] = h / 2.0
        return w
    m = n - 1  # number of subintervals
    if m % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= h / 3.0
    else:
        # Simpson on the first m-3 subintervals, 3/8 on the last three.
        if m == 3:
            w[:] = [1.0, 3.0, 3.0, 1.0]
            w *= 3.0 * h / 8.0
            return w
        head = simpson_weights(n - 3, h)
        w[: n - 3] += head
        w[n - 4 :] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


def simpson(values: np.ndarray, h: float) -> float:
    values = np.asarray(values, dtype=float)
    return float(simpson_weights(values.size, h) @ values)


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_integrate(func, a: float, b: float, n: int = 10) -> float:
    x, w = gauss_legendre(n)
    return (b - a) * float(w @ func(a + (b - a) * x))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def fit_line(x, y) -> tuple[float, float]:
    """Least-squares (slope, intercept)."""
    coeffs = np.polyfit(np.asarray(x, dtype=float), np.asarray(y, dtype=float), 1)
    return float(coeffs[0]), float(coeffs[1])
