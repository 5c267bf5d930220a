"""Airy function and the extended Airy1 / Airy2 kernels.

Ai and Ai' use the Maclaurin series on [-6, 4], the asymptotic expansions for
x >= 8 and x <= -8, and Taylor stepping of Ai'' = x Ai on (-8, -6) and (4, 8),
where neither the series (cancellation) nor the expansions (truncation) reach
1e-12. On the positive side the stepping runs from x = 8 towards the origin,
the direction in which the decaying solution is stable.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

C1 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)   # Ai(0)
C2 = 3.0 ** (-1.0 / 3.0) / math.gamma(1.0 / 3.0)   # -Ai'(0)
SQRT_PI = math.sqrt(math.pi)

MACLAURIN_LIMIT = 6.0
MACLAURIN_UPPER = 4.0
DECAYING_LIMIT = 8.0
OSCILLATORY_LIMIT = -8.0
_STEP = 0.25


def _u_coefficients(n: int):
    u = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k))
    v = [1.0] + [-(6 * k + 1) / (6 * k - 1) * u[k] for k in range(1, n)]
    return np.array(u), np.array(v)


_U, _V = _u_coefficients(40)


def _maclaurin(x):
    x = np.asarray(x, dtype=float)
    x3 = x ** 3
    f = np.ones_like(x)
    g = x.copy()
    df = 0.5 * x ** 2
    dg = np.ones_like(x)
    tf, tg, tdf, tdg = f.copy(), g.copy(), df.copy(), dg.copy()
    for k in range(1, 80):
        tf = tf * x3 / ((3 * k - 1) * (3 * k))
        tg = tg * x3 / ((3 * k) * (3 * k + 1))
        f += tf
        g += tg
        if k >= 2:
            tdf = tdf * x3 / ((3 * k - 3) * (3 * k - 1))
            df += tdf
        tdg = tdg * x3 / ((3 * k - 2) * (3 * k))
        dg += tdg
        if np.all(np.abs(tf) + np.abs(tg) + np.abs(tdf) + np.abs(tdg) < 1e-18 * (1 + np.abs(f) + np.abs(g))):
            break
    return C1 * f - C2 * g, C1 * df - C2 * dg


def _optimal_sum(coef, zeta, sign=1.0):
    """Asymptotic sum of sign^k coef[k] / zeta^k truncated before the smallest term."""
    zeta = np.asarray(zeta, dtype=float)
    total = np.zeros_like(zeta)
    term_prev = np.full_like(zeta, np.inf)
    active = np.ones(zeta.shape, dtype=bool)
    for k, c in enumerate(coef):
        term = (sign ** k) * c / zeta ** k
        active &= np.abs(term) < np.abs(term_prev)
        total = np.where(active, total + term, total)
        term_prev = term
    return total


def _positive_asymptotic(x):
    x = np.asarray(x, dtype=float)
    zeta = 2.0 / 3.0 * x ** 1.5
    e = np.exp(-zeta)
    ai = e / (2 * SQRT_PI * x ** 0.25) * _optimal_sum(_U, zeta, -1.0)
    aip = -x ** 0.25 * e / (2 * SQRT_PI) * _optimal_sum(_V, zeta, -1.0)
    return ai, aip


def _alternating_pairs(coef, zeta):
    """sum_k (-1)^k c_{2k} / zeta^{2k} and sum_k (-1)^k c_{2k+1} / zeta^{2k+1}."""
    even = np.zeros_like(zeta)
    odd = np.zeros_like(zeta)
    for k in range(len(coef) // 2):
        even += (-1) ** k * coef[2 * k] / zeta ** (2 * k)
        odd += (-1) ** k * coef[2 * k + 1] / zeta ** (2 * k + 1)
    return even, odd


def _negative_asymptotic(x):
    z = -np.asarray(x, dtype=float)
    zeta = 2.0 / 3.0 * z ** 1.5
    n = 19
    ue, uo = _alternating_pairs(_U[:2 * n], zeta)
    ve, vo = _alternating_pairs(_V[:2 * n], zeta)
    s, c = np.sin(zeta + math.pi / 4), np.cos(zeta + math.pi / 4)
    ai = (s * ue - c * uo) / (SQRT_PI * z ** 0.25)
    aip = z ** 0.25 / SQRT_PI * (-c * ve - s * vo)
    return ai, aip


def _taylor_coefficients(x0, a0, d0, terms=40):
    """Taylor coefficients at x0 of the solution of y'' = x y with y(x0)=a0, y'(x0)=d0."""
    a = [a0, d0]
    for n in range(terms - 2):
        prev = a[n - 1] if n >= 1 else 0.0
        a.append((x0 * a[n] + prev) / ((n + 2) * (n + 1)))
    return np.array(a)


def _taylor_step(x0, a0, d0, h):
    c = _taylor_coefficients(x0, a0, d0)
    k = np.arange(len(c))
    return float(np.sum(c * h ** k)), float(np.sum(k[1:] * c[1:] * h ** (k[1:] - 1)))


def _build_anchors(start, stop, step, expansion):
    xs = [start]
    ai, aip = expansion(np.array([start]))
    vals = [(float(ai[0]), float(aip[0]))]
    while abs(xs[-1] - stop) > 1e-12:
        a, d = vals[-1]
        vals.append(_taylor_step(xs[-1], a, d, step))
        xs.append(xs[-1] + step)
    order = np.argsort(xs)
    return np.array(xs)[order], np.array(vals)[order]


_NEG_X, _NEG_V = _build_anchors(OSCILLATORY_LIMIT, -MACLAURIN_LIMIT, _STEP, lambda x: _negative_asymptotic(x))
_POS_X, _POS_V = _build_anchors(DECAYING_LIMIT, MACLAURIN_UPPER, -_STEP, lambda x: _positive_asymptotic(x))


def _anchor_table(xs, vals):
    return np.array([_taylor_coefficients(x0, a, d) for x0, (a, d) in zip(xs, vals)])


_NEG_C = _anchor_table(_NEG_X, _NEG_V)
_POS_C = _anchor_table(_POS_X, _POS_V)


def _stepped(x, xs, coefs):
    """Horner evaluation of the Taylor expansion at the nearest anchor."""
    x = np.asarray(x, dtype=float)
    idx = np.clip(np.rint((x - xs[0]) / _STEP).astype(int), 0, len(xs) - 1)
    h = x - xs[idx]
    c = coefs[idx]
    val = np.zeros_like(x)
    der = np.zeros_like(x)
    for k in range(c.shape[1] - 1, -1, -1):
        der = der * h + val
        val = val * h + c[:, k]
    return val, der


def airy_ai_and_derivative(x):
    """(Ai(x), Ai'(x)) for real x (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    masks = [
        ((flat >= -MACLAURIN_LIMIT) & (flat <= MACLAURIN_UPPER), _maclaurin),
        ((flat > MACLAURIN_UPPER) & (flat < DECAYING_LIMIT), lambda v: _stepped(v, _POS_X, _POS_C)),
        (flat >= DECAYING_LIMIT, _positive_asymptotic),
        (flat <= OSCILLATORY_LIMIT, _negative_asymptotic),
        ((flat > OSCILLATORY_LIMIT) & (flat < -MACLAURIN_LIMIT), lambda v: _stepped(v, _NEG_X, _NEG_C)),
    ]
    for mask, fn in masks:
        if mask.any():
            ai[mask], aip[mask] = fn(flat[mask])
    if arr.ndim == 0:
        return float(ai[0]), float(aip[0])
    return ai.reshape(arr.shape), aip.reshape(arr.shape)


def airy_fn(x):
    """Ai(x)."""
    return airy_ai_and_derivative(x)[0]


def airy_deriv(x):
    """Ai'(x)."""
    return airy_ai_and_derivative(x)[1]


# ---------------------------------------------------------------------------
# Extended kernels.

def airy1_kernel(u1, s1, u2, s2):
    """Extended Airy1 kernel; the heat-kernel term is present only for u2 > u1."""
    u1, s1, u2, s2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (u1, s1, u2, s2)))
    d = u2 - u1
    out = airy_fn(s1 + s2 + d ** 2) * np.exp(d * (s1 + s2) + 2.0 / 3.0 * d ** 3)
    pos = d > 0
    if np.any(pos):
        dp = np.where(pos, d, 1.0)
        gauss = np.exp(-(s2 - s1) ** 2 / (4 * dp)) / np.sqrt(4 * np.pi * dp)
        out = out - np.where(pos, gauss, 0.0)
    return out if out.ndim else float(out)


def airy_kernel(s1, s2):
    """Equal-time Airy2 kernel (Ai(s1) Ai'(s2) - Ai'(s1) Ai(s2)) / (s1 - s2), with its diagonal limit."""
    s1, s2 = np.broadcast_arrays(np.asarray(s1, dtype=float), np.asarray(s2, dtype=float))
    a1, d1 = airy_ai_and_derivative(s1)
    a2, d2 = airy_ai_and_derivative(s2)
    diff = s1 - s2
    close = np.abs(diff) < 1e-6
    safe = np.where(close, 1.0, diff)
    out = np.where(close, d1 * d2 - 0.5 * (s1 + s2) * a1 * a2, (a1 * d2 - d1 * a2) / safe)
    return out if out.ndim else float(out)


@lru_cache(maxsize=64)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _gl(n, lo, hi):
    x, w = _legendre(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


HALF_LINE_NODES = 240
GAUSSIAN_SWITCH = 1.0


def _half_line_nodes(smin: float):
    # Ai(s + lambda) is below 1e-40 once s + lambda > 25
    top = max(25.0 - smin, 1.0)
    return _gl(HALF_LINE_NODES, 0.0, top)


def airy2_block(u1: float, ss1, u2: float, ss2) -> np.ndarray:
    """Matrix of K_A2(u1, s; u2, s') for s in ss1, s' in ss2."""
    ss1 = np.atleast_1d(np.asarray(ss1, dtype=float))
    ss2 = np.atleast_1d(np.asarray(ss2, dtype=float))
    d = u2 - u1
    if d == 0.0:
        return airy_kernel(ss1[:, None], ss2[None, :])
    if d > 0:
        lam, w = _half_line_nodes(min(ss1.min(), ss2.min()))
        A1 = airy_fn(ss1[:, None] + lam[None, :])
        A2 = airy_fn(ss2[:, None] + lam[None, :])
        return (A1 * (w * np.exp(-lam * d))) @ A2.T
    c = -d
    if c < GAUSSIAN_SWITCH:
        # -int_{R-} = int_{R+} - int_R, the full-line integral being a Gaussian
        lam, w = _half_line_nodes(min(ss1.min(), ss2.min()))
        A1 = airy_fn(ss1[:, None] + lam[None, :])
        A2 = airy_fn(ss2[:, None] + lam[None, :])
        half = (A1 * (w * np.exp(lam * c))) @ A2.T
        S1, S2 = ss1[:, None], ss2[None, :]
        gauss = np.exp(c ** 3 / 12 - (S1 + S2) * c / 2 - (S1 - S2) ** 2 / (4 * c)) / np.sqrt(4 * np.pi * c)
        return half - gauss
    # for larger c the exponential weight makes the negative half-line integral short
    depth = 40.0 / c
    n = int(min(4000, max(200, 12 * depth ** 1.5 + 100)))
    lam, w = _gl(n, -depth, 0.0)
    A1 = airy_fn(ss1[:, None] + lam[None, :])
    A2 = airy_fn(ss2[:, None] + lam[None, :])
    return -(A1 * (w * np.exp(lam * c))) @ A2.T


def airy2_kernel(u1, s1, u2, s2) -> float:
    return float(airy2_block(u1, [s1], u2, [s2])[0, 0])


def airy1_block(u1: float, ss1, u2: float, ss2) -> np.ndarray:
    ss1 = np.atleast_1d(np.asarray(ss1, dtype=float))
    ss2 = np.atleast_1d(np.asarray(ss2, dtype=float))
    return np.asarray(airy1_kernel(u1, ss1[:, None], u2, ss2[None, :]))
