"""Finite-T kernels in the KPZ scaling window and their convergence to the Airy kernels.

Large T makes the raw kernels over/underflow, so every integrand is evaluated in
log form with the conjugation factor folded into the exponent, on circles through
(or hugging) the double critical point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from ..contour import ContourSpec, best_radii, circle_quadrature
from ..errors import NonConvergence, ValidationError
from .airy import airy1_kernel, airy2_kernel
from .scaling import PathGerm, ScalingMap, flat_scaling, lattice_floor, step_scaling

MIN_T = 20.0
START_NODES = 64
MAX_NODES = 2 ** 14
REL_TOL = 1e-10
CHUNK = 1024


def _check_T(T: float):
    if not T >= MIN_T:
        raise ValidationError(f"T must be at least {MIN_T}")


def _log_circle(log_f: Callable, center: float, radius: float) -> float:
    """(1/2 pi i) contour integral of exp(log_f) on a circle."""
    f = lambda z: np.exp(log_f(z))
    return float(circle_quadrature(f, ContourSpec(center, radius), rel_tol=REL_TOL, max_nodes=MAX_NODES).real)


def _positive_radius(log_f: Callable, lo: float, hi: float) -> float:
    """Minimizer over real r of log_f(r) - log r: the circle that balances a
    Laurent series with positive coefficients."""
    g = lambda r: float(np.real(log_f(r)))
    return minimize_scalar(g, bounds=(lo, hi), method="bounded",
                           options={"xatol": 1e-10}).x


def _transition_term(dn: int, da: float, db: float, d: int, shift: float) -> float:
    """exp(-shift) times the w^d coefficient of exp(da w + db / w) / (1-w)^dn."""
    def log_f(w):
        return da * w + db / w - dn * np.log(1 - w) - (d + 1) * np.log(w) - shift
    r = _positive_radius(lambda w: log_f(w) + np.log(w), 1e-9, 1 - 1e-9)
    return _log_circle(log_f, 0.0, r)


# ---------------------------------------------------------------------------
# Flat initial condition.

@dataclass(frozen=True)
class FlatWindowPoint:
    n: int
    t: float
    x: int
    s_lattice: float  # rescaled coordinate of the site actually used


def flat_window_point(T: float, u: float, s: float, germ: PathGerm, R: float, L: float) -> FlatWindowPoint:
    sm = ScalingMap(T, germ)
    par = flat_scaling(germ, R, L)
    n, t = sm.n(u), sm.t(u)
    centre = -2 * n + par.v_mean * t
    x = lattice_floor(centre - s * T ** (1 / 3))
    return FlatWindowPoint(n, t, x, (centre - x) / T ** (1 / 3))


def rescaled_flat_kernel(T: float, u1: float, s1: float, u2: float, s2: float,
                         germ: PathGerm, R: float, L: float) -> float:
    """T^(1/3) K(x1, x2) e^{t2 (2L+R/2)} 2^x2 / (e^{t1 (2L+R/2)} 2^x1) at the scaled points."""
    _check_T(T)
    p1 = flat_window_point(T, u1, s1, germ, R, L)
    p2 = flat_window_point(T, u2, s2, germ, R, L)
    c = 2 * L + R / 2
    log_conj = (p2.t - p1.t) * c + (p2.x - p1.x) * math.log(2.0)
    a1, b1, a2, b2 = R * p1.t, L * p1.t, R * p2.t, L * p2.t
    e, m = p1.n + p2.n + p2.x, p1.n + p2.n + p1.x

    def log_h(u):
        return a1 * u + b1 / u - a2 * (1 - u) - b2 / (1 - u) + e * np.log(1 - u) + log_conj

    # near u = 1/2 for u2 > u1; pushed off it when the quadratic term grows along the circle
    r = best_radii(log_h, [m], 0.0, 1.0)[m]
    val = _log_circle(lambda u: log_h(u) - (m + 1) * np.log(u), 0.0, r)
    if (p2.n, p2.t) != (p1.n, p1.t) and p2.n >= p1.n and p2.t <= p1.t:
        dn = p2.n - p1.n
        val -= _transition_term(dn, R * (p1.t - p2.t), L * (p1.t - p2.t), p1.x - p2.x - dn, -log_conj)
    return val * T ** (1 / 3)


def flat_limit(u1: float, s1: float, u2: float, s2: float, germ: PathGerm, R: float, L: float) -> float:
    par = flat_scaling(germ, R, L)
    return airy1_kernel(u1 / par.S_h, s1 / par.S_v, u2 / par.S_h, s2 / par.S_v) / par.S_v


# ---------------------------------------------------------------------------
# Step initial condition.

@dataclass(frozen=True)
class StepWindowPoint:
    n: int
    t: float
    x: int
    s_lattice: float


def step_window_point(T: float, u: float, s: float, germ: PathGerm, R: float, L: float) -> StepWindowPoint:
    sm = ScalingMap(T, germ)
    par = step_scaling(germ, R, L)
    centre = par.sigma0 * T - par.sigma1 * u * T ** (2 / 3) + par.sigma2 * u * u * T ** (1 / 3)
    x = lattice_floor(centre - s * T ** (1 / 3))
    return StepWindowPoint(sm.n(u), sm.t(u), x, (centre - x) / T ** (1 / 3))


def _step_log_g(p: StepWindowPoint, R: float, L: float):
    """log of exp(a w + b / w) (1-w)^n w^-(x+n): the w-part of the step integrand."""
    a, b = R * p.t, L * p.t

    def g(w):
        return a * w + b / w + p.n * np.log(1 - w) - (p.x + p.n) * np.log(w)
    return g


def _double_circle(gw: Callable, gz: Callable, rw: float, rz: float) -> complex:
    """(1/(2 pi i)^2) double integral of exp(gw(w) - gz(z)) / (w (w - z)) over
    |w| = rw and |z - 1| = rz, by tensor trapezoid with doubling."""
    prev = None
    n = START_NODES
    while n <= MAX_NODES:
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        w = rw * np.exp(1j * th)
        z = 1 + rz * np.exp(1j * th)
        A = np.exp(gw(w)) / n
        B = np.exp(-gz(z)) * (z - 1) / n
        val = 0j
        for i in range(0, n, CHUNK):  # bounded memory for large n
            val += A[i:i + CHUNK] @ (1.0 / (w[i:i + CHUNK, None] - z[None, :])) @ B
        if prev is not None and abs(val - prev) < REL_TOL * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise NonConvergence("double circle quadrature did not converge")


def rescaled_step_kernel(T: float, u1: float, s1: float, u2: float, s2: float,
                         germ: PathGerm, R: float, L: float) -> float:
    """T^(1/3) K(x1, x2) conjugated by exp(G2(mu) - G1(mu)), G_i the log of the
    w-part of the integrand at point i; this removes all u- and s-dependent
    constants at the double critical point mu."""
    _check_T(T)
    par = step_scaling(germ, R, L)
    mu = par.mu
    p1 = step_window_point(T, u1, s1, germ, R, L)
    p2 = step_window_point(T, u2, s2, germ, R, L)
    g1, g2 = _step_log_g(p1, R, L), _step_log_g(p2, R, L)
    c1, c2 = float(g1(mu)), float(g2(mu))
    # In W = (w - mu)(kappa0 T)^(1/3) the integrands behave like exp(-W^3/3 - u W^2 ...),
    # so the crossings go to Re W = -u1 - 1/2 and Re Z = -u2 + 1/2 (or +-1/2 if closer).
    scale = (par.kappa0 * T) ** (-1 / 3)
    v1, v2 = u1 / par.S_h, u2 / par.S_h
    dw = min(-0.5, -v1 - 0.5) * scale
    dz = max(0.5, -v2 + 0.5) * scale
    rw, rz = mu + dw, 1 - mu - dz
    if rw <= 0 or rz <= 0:
        raise ValidationError("T too small for the scaling window at these u")
    val = _double_circle(lambda w: g1(w) - c1, lambda z: g2(z) - c2, rw, rz).real
    if (p2.n, p2.t) != (p1.n, p1.t) and p2.n >= p1.n and p2.t <= p1.t:
        dn = p2.n - p1.n
        val -= _transition_term(dn, R * (p1.t - p2.t), L * (p1.t - p2.t), p1.x - p2.x - dn, c1 - c2)
    return val * T ** (1 / 3)


def step_limit(u1: float, s1: float, u2: float, s2: float, germ: PathGerm, R: float, L: float) -> float:
    """Limit of rescaled_step_kernel: S_v^-1 K_A2 at the rescaled points, in the
    conjugation left over by removing the values at mu.

    Shifting Z -> Z - u in the double contour integral leaves the factor
    exp(s2 u2 - s1 u1 + (u1^3 - u2^3) / 3); the transition term sits on the
    u2 > u1 side, which is K_A2 with both times negated. Neither change affects
    Fredholm determinants (conjugation, and reversibility of Airy2).
    """
    par = step_scaling(germ, R, L)
    v1, v2 = u1 / par.S_h, u2 / par.S_h
    r1, r2 = s1 / par.S_v, s2 / par.S_v
    conj = math.exp(r2 * v2 - r1 * v1 + (v1 ** 3 - v2 ** 3) / 3)
    return conj * airy2_kernel(-v1, r1, -v2, r2) / par.S_v


# ---------------------------------------------------------------------------
# Convergence studies.

@dataclass
class ConvergenceRow:
    T: float
    sup_error: float
    worst: Tuple[float, float]


def convergence_study(variant: str, Ts: Sequence[float], germ: PathGerm, R: float, L: float,
                      u1: float = 0.0, u2: float = 1.0,
                      grid: Sequence[float] = (-2.0, 0.0, 2.0),
                      lattice: bool = False) -> List[ConvergenceRow]:
    """Sup over (s1, s2) in grid x grid of |K^resc_T - limit| for each T.

    With ``lattice=True`` the limit is evaluated at the rescaled coordinates of
    the sites actually used, which removes the rounding jitter of x.
    """
    if variant == "flat":
        kern, lim, point = rescaled_flat_kernel, flat_limit, flat_window_point
    elif variant == "step":
        kern, lim, point = rescaled_step_kernel, step_limit, step_window_point
    else:
        raise ValidationError("variant must be 'flat' or 'step'")
    rows = []
    for T in Ts:
        worst, where = -1.0, (0.0, 0.0)
        for s1 in grid:
            for s2 in grid:
                l1, l2 = s1, s2
                if lattice:
                    l1 = point(T, u1, s1, germ, R, L).s_lattice
                    l2 = point(T, u2, s2, germ, R, L).s_lattice
                err = abs(kern(T, u1, s1, u2, s2, germ, R, L) - lim(u1, l1, u2, l2, germ, R, L))
                if err > worst:
                    worst, where = float(err), (s1, s2)
        rows.append(ConvergenceRow(float(T), worst, where))
    return rows
