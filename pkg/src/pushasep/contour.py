"""Contour integrals on circles.

Two independent routes to the same numbers: a spectrally accurate trapezoid
rule on circles (``circle_quadrature``, ``laurent_coefficients``) and an exact
double-series oracle for Laurent coefficients of ``exp(b z + a / z)`` times a
rational factor (``laurent_coefficient``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import NonConvergence, TruncationFailure, ValidationError

EPS = np.finfo(float).eps
DEFAULT_MAX_NODES = 2 ** 16
START_NODES = 64
SADDLE_RADIUS_MAX = 1e4

# Named radii used by the flat-kernel bound checks.
PRESET_RADII = {
    "e-1": math.exp(-1.0),
    "e-1/4": math.exp(-0.25),
    "e-2": math.exp(-2.0),
    "e-4": math.exp(-4.0),
}


@dataclass(frozen=True)
class ContourSpec:
    """Positively oriented circle |z - center| = radius."""
    center: complex = 0.0
    radius: float = 0.5
    nodes: int = START_NODES

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValidationError("radius must be positive and finite")
        n = int(self.nodes)
        if n < 8 or n & (n - 1):
            raise ValidationError("nodes must be a power of two and at least 8")

    def points(self, n: Optional[int] = None) -> np.ndarray:
        n = self.nodes if n is None else n
        theta = 2.0 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * theta)


def circle_quadrature(f: Callable[[np.ndarray], np.ndarray], spec: ContourSpec,
                      rel_tol: float = 1e-12, max_nodes: int = DEFAULT_MAX_NODES) -> complex:
    """(1/2 pi i) times the contour integral of ``f`` over the circle ``spec``.

    ``f`` must accept a numpy array of complex points. The trapezoid rule is
    refined by doubling (old nodes are reused) until two successive estimates
    agree to ``rel_tol`` relative to the value, or absolutely when the value is
    below 1e-14. Differences at the level of floating point cancellation in the
    node sum are also accepted, since no refinement can reduce them.
    """
    if not (0 < rel_tol <= 1e-3):
        raise ValidationError("rel_tol must lie in (0, 1e-3]")
    c, r = complex(spec.center), float(spec.radius)
    n = max(int(spec.nodes), 8)

    def samples(theta):
        u = r * np.exp(1j * theta)
        vals = np.asarray(f(c + u), dtype=complex) * u
        if not np.all(np.isfinite(vals)):
            raise NonConvergence("integrand is not finite on the contour")
        return vals

    vals = samples(2.0 * np.pi * np.arange(n) / n)
    total, mag = vals.sum(), np.abs(vals).sum()
    est = total / n
    while True:
        if 2 * n > max_nodes:
            raise NonConvergence(
                f"trapezoid rule did not converge with {max_nodes} nodes on |z-{c}|={r}")
        new = samples(2.0 * np.pi * (np.arange(n) + 0.5) / n)
        total += new.sum()
        mag += np.abs(new).sum()
        n *= 2
        prev, est = est, total / n
        diff = abs(est - prev)
        scale = abs(est) if abs(est) >= 1e-14 else 1.0
        floor = 64.0 * EPS * mag / n
        if diff <= rel_tol * scale or diff <= floor:
            return complex(est)


# ---------------------------------------------------------------------------
# Batched coefficient extraction by FFT on circles around the origin.

def saddle_radius(a: float, b: float, m: float, r_lo: float = 0.0, r_hi: float = math.inf) -> float:
    """Radius minimizing b r + a / r - m log r, i.e. the size of the integrand
    of the z^m coefficient of exp(b z + a / z) on |z| = r, clipped to an
    admissible interval (r_lo, r_hi)."""
    if b > 0:
        r = (m + math.sqrt(m * m + 4.0 * a * b)) / (2.0 * b)
        if r <= 0:
            r = a / max(-m, 1.0) if a > 0 else 1.0
    elif a > 0 and m < 0:
        r = -a / m
    else:
        r = max(1.0, a)
    # a nearly vanishing a or b puts the saddle absurdly far out, where any
    # polynomial prefactor overflows
    r = min(max(r, 1e-3), SADDLE_RADIUS_MAX)
    lo = r_lo * 1.02 if r_lo > 0 else 0.0
    hi = r_hi * 0.98 if math.isfinite(r_hi) else math.inf
    if lo >= hi:
        return math.sqrt(r_lo * r_hi) if r_lo > 0 else 0.5 * r_hi
    return min(max(r, lo), hi)


def best_radii(log_h: Callable[[np.ndarray], np.ndarray], orders: Sequence[int],
               r_lo: float, r_hi: float, n_radii: int = 48, n_angles: int = 64,
               refine: int = 2) -> Dict[int, float]:
    """Per-order radius in (r_lo, r_hi) minimizing the size of h(z) z^-m on the
    circle, max over the circle of Re log h - m log r.

    A coarse geometric grid is searched first, then each order's bracket is
    refined ``refine`` times with a finer grid.
    """
    lo = max(r_lo, 1e-300) * 1.02 if r_lo > 0 else 1e-4
    hi = r_hi * 0.98 if math.isfinite(r_hi) else 1e4
    theta = np.exp(1j * 2.0 * np.pi * (np.arange(n_angles) + 0.5) / n_angles)
    ms = np.asarray(list(orders), dtype=float)

    def peak(radii):
        with np.errstate(all="ignore"):
            val = np.real(log_h(radii[..., None] * theta)).max(axis=-1)
        return np.where(np.isnan(val), np.inf, val)

    logr = np.linspace(math.log(lo), math.log(hi), n_radii)
    cost = peak(np.exp(logr))[None, :] - ms[:, None] * logr[None, :]
    best = logr[np.argmin(cost, axis=1)]
    step = logr[1] - logr[0]
    for _ in range(refine):
        uniq, inv = np.unique(best, return_inverse=True)
        offs = np.linspace(-step, step, 9)
        cand = np.clip(uniq[:, None] + offs[None, :], math.log(lo), math.log(hi))
        pk = peak(np.exp(cand))
        c = pk[inv] - ms[:, None] * cand[inv]
        best = cand[inv, np.argmin(c, axis=1)]
        step = offs[1] - offs[0]
    return {int(m): float(math.exp(b)) for m, b in zip(ms, best)}


def laurent_coefficients(log_h: Callable[[np.ndarray], np.ndarray], orders: Iterable[int],
                         radius: Callable[[int], float], rel_tol: float = 1e-13,
                         max_nodes: int = DEFAULT_MAX_NODES) -> Dict[int, float]:
    """Coefficients c_m of z^m in the Laurent expansion around 0 of exp(log_h(z)).

    ``log_h`` is any (vectorized, complex) logarithm of the function; working
    with logarithms keeps integrands with huge dynamic range representable.
    ``radius(m)`` gives the circle used for order m, which must lie in the
    annulus of convergence. Orders with nearby radii share one FFT and the node
    count is doubled until every coefficient of the group is stable. Returns
    real parts (all integrands in this package are real on the real axis).
    """
    orders = sorted(set(int(m) for m in orders))
    groups: Dict[int, list] = {}
    for m in orders:
        r = radius(m)
        if not (r > 0 and math.isfinite(r)):
            raise ValidationError(f"invalid radius {r} for order {m}")
        groups.setdefault(int(round(math.log(r) / 0.05)), []).append((m, r))
    out: Dict[int, float] = {}
    for members in groups.values():
        ms = [m for m, _ in members]
        # all requested radii lie in one annulus, so their median does too
        r = float(np.median([rr for _, rr in members]))
        ms_arr = np.array(ms)
        span = int(ms_arr.max() - ms_arr.min()) + 1
        n = START_NODES
        while n < 4 * span:
            n *= 2
        prev = None
        while True:
            if n > max_nodes:
                raise NonConvergence(f"FFT coefficient extraction did not converge on |z|={r}")
            z = r * np.exp(2j * np.pi * np.arange(n) / n)
            with np.errstate(divide="ignore"):
                lv = np.asarray(log_h(z), dtype=complex)
            # zeros of the integrand (log = -inf) are harmless
            if np.any(np.isnan(lv)) or np.any(lv.real == np.inf):
                raise NonConvergence("integrand is not finite on the contour")
            shift = lv.real.max()
            with np.errstate(invalid="ignore"):
                vals = np.exp(lv - shift)
            vals[np.isneginf(lv.real)] = 0.0
            spec = np.fft.fft(vals) / n
            logscale = shift - ms_arr * math.log(r)
            cur = spec[ms_arr % n] * np.exp(logscale)
            if prev is not None:
                floor = 64.0 * EPS * np.abs(vals).mean() * np.exp(logscale)
                diff = np.abs(cur - prev)
                if np.all((diff <= rel_tol * np.abs(cur)) | (diff <= floor)):
                    break
            prev = cur
            n *= 2
        for m, c in zip(ms, cur):
            out[m] = float(c.real)
    return out


# ---------------------------------------------------------------------------
# Series oracle.

@dataclass(frozen=True)
class LaurentQuery:
    """Coefficient of z^power in exp(b z + a / z) * scale * prod(1 - u z) / prod(1 - w z).

    ``numerator`` lists the u's and ``denominator`` the w's (roots 1/u, 1/w).
    """
    a: float
    b: float
    power: int
    numerator: tuple = field(default_factory=tuple)
    denominator: tuple = field(default_factory=tuple)
    scale: float = 1.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValidationError("a and b must be nonnegative")
        if any(w <= 0 for w in self.denominator):
            raise ValidationError("denominator speeds must be positive")
        object.__setattr__(self, "numerator", tuple(float(u) for u in self.numerator))
        object.__setattr__(self, "denominator", tuple(float(w) for w in self.denominator))
        object.__setattr__(self, "power", int(self.power))

    def rational(self, z):
        out = np.full_like(np.asarray(z, dtype=complex), self.scale)
        for u in self.numerator:
            out = out * (1.0 - u * z)
        for w in self.denominator:
            out = out / (1.0 - w * z)
        return out

    def integrand(self, z):
        """Function whose z^power coefficient is requested."""
        return np.exp(self.b * z + self.a / z) * self.rational(z)

    def log_integrand(self, z):
        z = np.asarray(z, dtype=complex)
        out = self.b * z + self.a / z + np.log(complex(self.scale))
        for u in self.numerator:
            out = out + np.log(1.0 - u * z)
        for w in self.denominator:
            out = out - np.log(1.0 - w * z)
        return out


def _taylor_rational(num: Sequence[float], den: Sequence[float], degree: int) -> list:
    c = [0.0] * (degree + 1)
    c[0] = 1.0
    for u in num:
        for i in range(degree, 0, -1):
            c[i] -= u * c[i - 1]
    for w in den:
        for i in range(1, degree + 1):
            c[i] += w * c[i - 1]
    return c


def laurent_coefficient(q: LaurentQuery, tail_tol: float = 1e-15, max_order: int = 4000) -> float:
    """Exact double-series value of the coefficient described by ``q``.

    Writes exp(b z + a / z) R(z) = sum_n a^n z^-n / n! * sum_m d_m z^m with
    d_m = sum_{i<=m} r_i b^(m-i) / (m-i)! (finite), so the z^p coefficient is
    sum_{n >= max(0,-p)} a^n / n! * d_{p+n}. The outer sum is truncated once a
    Cauchy-estimate tail bound falls below ``tail_tol``; all sums are
    accumulated with ``math.fsum``.
    """
    a, b, p = q.a, q.b, q.power
    if a == 0.0:
        n_terms = 0
    else:
        n_terms = _outer_terms(q, tail_tol, max_order)
    n0 = max(0, -p)
    if n_terms < n0:
        return 0.0
    top = p + n_terms
    r = _taylor_rational(q.numerator, q.denominator, max(top, 0))
    # e^{bz} Taylor coefficients
    e = [1.0] * (max(top, 0) + 1)
    for j in range(1, len(e)):
        e[j] = e[j - 1] * b / j
    terms = []
    an = 1.0
    for n in range(0, n_terms + 1):
        if n > 0:
            an *= a / n
        if n < n0:
            continue
        m = p + n
        d = math.fsum(r[i] * e[m - i] for i in range(m + 1))
        terms.append(an * d)
    return q.scale * math.fsum(terms)


def _outer_terms(q: LaurentQuery, tail_tol: float, max_order: int) -> int:
    a, b, p = q.a, q.b, q.power
    if q.denominator:
        rmax = 1.0 / max(q.denominator)
        rhos = [rmax * f for f in (0.95, 0.8, 0.5, 0.25, 0.1)]
    else:
        rhos = [0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
    logs = []
    for rho in rhos:
        logm = b * rho + sum(math.log1p(abs(u) * rho) for u in q.numerator) \
            - sum(math.log1p(-w * rho) for w in q.denominator) - p * math.log(rho)
        logs.append((rho, logm + math.log(abs(q.scale)) if q.scale else -math.inf))
    log_tol = math.log(tail_tol)
    for k in range(max(0, -p), max_order):
        n = k + 1
        for rho, logm in logs:
            ratio = a / rho
            if n + 1 <= ratio:
                continue
            # tail sum_{j>=n} M rho^-p (a/rho)^j / j! <= first term / (1 - ratio/(n+1))
            log_first = logm + n * math.log(ratio) - math.lgamma(n + 1)
            if log_first - math.log1p(-ratio / (n + 1)) < log_tol:
                return k
    raise TruncationFailure(f"series tail bound did not reach {tail_tol} within {max_order} terms")


def _annulus(q: LaurentQuery, annulus):
    if annulus is None:
        return 0.0, (1.0 / max(q.denominator) if q.denominator else math.inf)
    return float(annulus[0]), float(annulus[1])


def _bound_saddle(q: LaurentQuery, r_lo: float, r_hi: float) -> float:
    """Radius minimizing b r + a / r - power log r + sum log(1 + |u| r) - sum log(1 - w r),
    a bound on the log-modulus of the integrand on |z| = r.

    The saddle of the exponential part alone ignores the rational factor: it can sit
    just short of a high-order pole, or far out where a polynomial numerator is
    huge, and either way the node sum cancels badly."""
    a, b, p = q.a, q.b, q.power
    us = [abs(u) for u in q.numerator]

    def h(r):
        return (b * r + a / r - p * math.log(r) + sum(math.log1p(u * r) for u in us)
                - sum(math.log1p(-w * r) for w in q.denominator))

    def dh(r):
        return (b - a / (r * r) - p / r + sum(u / (1.0 + u * r) for u in us)
                + sum(w / (1.0 - w * r) for w in q.denominator))

    lo = max(r_lo, 1e-3 * min(1.0, r_hi))
    hi = min(0.98 * r_hi, SADDLE_RADIUS_MAX)
    if dh(lo) >= 0 or dh(hi) <= 0:
        return lo if h(lo) <= h(hi) else hi
    return brentq(dh, lo, hi, xtol=1e-6 * hi)


def quadrature_coefficient(q: LaurentQuery, rel_tol: float = 1e-13,
                           radius: Optional[float] = None, annulus=None) -> float:
    """Coefficient described by ``q`` computed by circle quadrature.

    By default the expansion is the one around 0 valid inside the nearest pole
    of the rational factor; ``annulus=(r_lo, r_hi)`` selects the Laurent
    expansion valid in another pole-free annulus. The circle radius defaults to
    the saddle radius of exp(b z + a / z) z^-power clipped to the annulus. The
    integrand is
    evaluated on the unit circle after substituting z = r w, with r^-power folded
    into the exponent, so coefficients at large |power| neither overflow nor
    lose accuracy to a badly scaled contour.
    """
    a, b, p = q.a, q.b, q.power
    r_lo, r_hi = _annulus(q, annulus)
    if radius is None:
        if annulus is None and (q.numerator or q.denominator):
            r = _bound_saddle(q, r_lo, r_hi)
        else:
            r = saddle_radius(a, b, p, r_lo, r_hi)
    else:
        r = float(radius)
    if not (r_lo < r < r_hi):
        raise ValidationError(f"radius {r} is outside the annulus ({r_lo}, {r_hi})")
    logr = math.log(r)

    def f(w):
        z = r * w
        return np.exp(b * z + a / z - p * logr) * q.rational(z) * w ** (-p - 1)

    val = circle_quadrature(f, ContourSpec(0.0, 1.0), rel_tol=rel_tol)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise NonConvergence(f"coefficient has spurious imaginary part {val.imag}")
    return float(val.real)


def coefficient_table(a: float, b: float, powers: Iterable[int], numerator=(), denominator=(),
                      scale: float = 1.0, annulus=None, rel_tol: float = 1e-13) -> Dict[int, float]:
    """Batched ``quadrature_coefficient`` over many powers with one FFT per radius."""
    q = LaurentQuery(a, b, 0, tuple(numerator), tuple(denominator), scale)
    r_lo, r_hi = _annulus(q, annulus)
    powers = [int(p) for p in powers]
    if not q.numerator and not q.denominator:
        return laurent_coefficients(q.log_integrand, powers,
                                    lambda m: saddle_radius(a, b, m, r_lo, r_hi), rel_tol=rel_tol)
    # the rational factor shifts the optimal circle; locate it numerically
    radii = best_radii(q.log_integrand, powers, r_lo, r_hi)
    return laurent_coefficients(q.log_integrand, powers, radii.__getitem__, rel_tol=rel_tol)
