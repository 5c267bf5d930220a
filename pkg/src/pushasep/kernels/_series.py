"""Small power-series helpers for residues at z = 1."""
from __future__ import annotations

import math

import numpy as np


def binom_poly(m, r: int):
    """Generalized binomial coefficient C(m, r) for integer (array) m and r >= 0."""
    m = np.asarray(m, dtype=float)
    out = np.ones_like(m)
    for i in range(r):
        out = out * (m - i) / (i + 1)
    return out


def exp_series(h, order: int) -> np.ndarray:
    """Taylor coefficients up to ``order`` of exp(sum_i h[i] u^i)."""
    h = np.asarray(h, dtype=float)
    g = np.zeros(order + 1)
    g[0] = math.exp(h[0])
    for m in range(1, order + 1):
        acc = 0.0
        for i in range(1, min(m, len(h) - 1) + 1):
            acc += i * h[i] * g[m - i]
        g[m] = acc / m
    return g


def inverse_clock_series(a: float, b: float, order: int) -> np.ndarray:
    """Taylor coefficients in u of exp(-a (1+u) - b / (1+u))."""
    h = np.empty(order + 1)
    h[0] = -a - b
    if order >= 1:
        h[1] = -a + b
    for i in range(2, order + 1):
        h[i] = -b * (-1.0) ** i
    return exp_series(h, order)
