"""Kernel and biorthogonal functions for the flat initial condition y_i = -2i (unit speeds)."""
from __future__ import annotations

import math
from typing import Dict

import numpy as np

from ..contour import (PRESET_RADII, ContourSpec, LaurentQuery, best_radii, circle_quadrature,
                       coefficient_table, laurent_coefficients, quadrature_coefficient)
from ..errors import ContourCollision, NonConvergence, ValidationError
from ..model import RatePlan, SpaceTimePoint, precedes
from ._series import binom_poly, inverse_clock_series
from .step import STEP_Z_RADIUS, _plan, _psi_query, transition_block

# Circles of the finite-N decay bound: |w| = e^-4 and |1 - z| = e^-2.
FLAT_W_RADIUS = PRESET_RADII["e-4"]
FLAT_Z_RADIUS = PRESET_RADII["e-2"]
# Circles used to evaluate K^(N): exp(b / w) makes |w| = e^-4 useless for values.
VALUE_W_RADIUS = 0.4
VALUE_Z_RADIUS = 0.45


def flat_kappa(w_radius: float = FLAT_W_RADIUS, z_radius: float = FLAT_Z_RADIUS) -> float:
    """max |w (w - 1)| over |w| = w_radius divided by min |z (z - 1)| over |1 - z| = z_radius."""
    return w_radius * (1.0 + w_radius) / (z_radius * (1.0 - z_radius))


def psi_flat(n: int, t: float, k: int, x: int, R: float = None, L: float = None,
             plan: RatePlan = None) -> float:
    """Psi^{n,t}_k(x): the w^(x+2n-k) coefficient of (w-1)^k exp(a w + b / w)
    (Laurent expansion for |w| > 1 when k < 0)."""
    plan = _plan(R, L, plan)
    q, ann = _psi_query(plan.a(t), plan.b(t), k, x + 2 * n - k)
    return quadrature_coefficient(q, annulus=ann)


def psi_flat_table(a: float, b: float, n: int, k: int, xs) -> np.ndarray:
    q, ann = _psi_query(a, b, k, 0)
    powers = np.asarray(xs) + 2 * n - k
    tab = coefficient_table(q.a, q.b, powers, q.numerator, q.denominator, q.scale, ann)
    return np.array([tab[p] for p in powers])


def phi_flat(n: int, t: float, j: int, x, R: float = None, L: float = None,
             plan: RatePlan = None, method: str = "residue"):
    """Phi^{n,t}_j(x): residue at z = 1 of (2z-1) z^(x+2n) / (z(z-1))^(j+1) exp(-a z - b / z),
    i.e. the u^j coefficient of (1+2u)(1+u)^(x+2n-j-1) exp(-a(1+u) - b/(1+u))."""
    plan = _plan(R, L, plan)
    if j < 0:
        raise ValidationError("Phi is defined for j >= 0")
    a, b = plan.a(t), plan.b(t)
    if method == "quadrature":
        xs = np.atleast_1d(x)
        out = []
        for xx in xs:
            f = lambda z, xx=xx: ((2 * z - 1) * z ** (xx + 2 * n) / (z * (z - 1)) ** (j + 1)
                                  * np.exp(-a * z - b / z))
            out.append(circle_quadrature(f, ContourSpec(1.0, STEP_Z_RADIUS)).real)
        out = np.array(out)
        return out if np.ndim(x) else float(out[0])
    g = inverse_clock_series(a, b, j)
    m = np.asarray(x) + 2 * n - j - 1
    # coefficients of (1+u)^m g(u), then multiply by (1 + 2u)
    c = [sum(binom_poly(m, i - r) * g[r] for r in range(i + 1)) for i in range(j + 1)]
    out = c[j] + (2.0 * c[j - 1] if j >= 1 else 0.0)
    return out if np.ndim(x) else float(out)


def k1_block(p1: SpaceTimePoint, xs1, p2: SpaceTimePoint, xs2, plan: RatePlan) -> np.ndarray:
    """Second term of the flat kernel: the u^(n1+n2+x1) coefficient of
    exp(a1 u + b1 / u - a2 (1-u) - b2 / (1-u)) (1-u)^(n1+n2+x2) around u = 0 (|u| < 1)."""
    xs1, xs2 = np.asarray(xs1, dtype=int), np.asarray(xs2, dtype=int)
    n1, n2 = p1.n, p2.n
    a1, b1, a2, b2 = plan.a(p1.t), plan.b(p1.t), plan.a(p2.t), plan.b(p2.t)
    orders = xs1 + n1 + n2
    out = np.empty((len(xs1), len(xs2)))
    for j, x2 in enumerate(xs2):
        e = n1 + n2 + int(x2)

        def log_h(u, e=e):
            return a1 * u + b1 / u - a2 * (1 - u) - b2 / (1 - u) + e * np.log(1 - u)

        radii = best_radii(log_h, orders, 0.0, 1.0)
        tab = laurent_coefficients(log_h, orders, radii.__getitem__)
        out[:, j] = [tab[m] for m in orders]
    return out


class FlatKernel:
    """Correlation kernel K0 + K1 for the flat initial condition on all of 2Z."""

    def __init__(self, R: float = None, L: float = None, plan: RatePlan = None):
        self.plan = _plan(R, L, plan)

    def block(self, p1: SpaceTimePoint, xs1, p2: SpaceTimePoint, xs2) -> np.ndarray:
        return -transition_block(p1, xs1, p2, xs2, self.plan) + k1_block(p1, xs1, p2, xs2, self.plan)

    def __call__(self, p1, x1, p2, x2) -> float:
        return float(self.block(p1, [x1], p2, [x2])[0, 0])


def kernel_flat(p1: SpaceTimePoint, x1: int, p2: SpaceTimePoint, x2: int,
                R: float = None, L: float = None, plan: RatePlan = None) -> float:
    return FlatKernel(R, L, plan)(p1, x1, p2, x2)


def _correction_integrand(p1, x1, p2, x2, N, plan, w, z):
    n1, n2 = p1.n, p2.n
    a1, b1, a2, b2 = plan.a(p1.t), plan.b(p1.t), plan.a(p2.t), plan.b(p2.t)
    logv = (a1 * w + b1 / w - a2 * z - b2 / z + (n1 + N) * np.log(w - 1) - (n2 + N) * np.log(z - 1)
            + (x2 + n2 - N) * np.log(z) - (x1 + n1 - N + 1) * np.log(w))
    return np.exp(logv) * (2 * z - 1) / ((w - z) * (w - 1 + z))


def _check_radii(w_radius, z_radius):
    # the w circle must enclose 0 but neither w = z (needs r_w + r_z < 1)
    # nor w = 1 - z (needs r_w < r_z)
    if w_radius + z_radius >= 1.0 or w_radius >= z_radius:
        raise ContourCollision("circles for K^(N) must satisfy r_w < r_z and r_w + r_z < 1")


def flat_correction(p1: SpaceTimePoint, x1: int, p2: SpaceTimePoint, x2: int, N: int,
                    R: float = None, L: float = None, plan: RatePlan = None,
                    w_radius: float = VALUE_W_RADIUS, z_radius: float = VALUE_Z_RADIUS,
                    rel_tol: float = 1e-10, max_nodes: int = 4096) -> float:
    """Finite-N correction K^(N): double integral over |w| = w_radius and |1 - z| = z_radius,
    tensor-product trapezoid rule with simultaneous doubling of both node counts."""
    plan = _plan(R, L, plan)
    _check_radii(w_radius, z_radius)
    n = 32
    prev = None
    while n <= max_nodes:
        th = 2 * np.pi * np.arange(n) / n
        w = w_radius * np.exp(1j * th)
        z = 1.0 + z_radius * np.exp(1j * th)
        W, Z = np.meshgrid(w, z, indexing="ij")
        vals = _correction_integrand(p1, x1, p2, x2, N, plan, W, Z) * W * (Z - 1.0)
        est = vals.mean()
        if prev is not None:
            floor = 64 * np.finfo(float).eps * np.abs(vals).mean()
            if abs(est - prev) <= max(rel_tol * abs(est), floor):
                return float(est.real)
        prev = est
        n *= 2
    raise NonConvergence("finite-N correction quadrature did not converge")


def flat_correction_majorant(p1: SpaceTimePoint, x1: int, p2: SpaceTimePoint, x2: int, N: int,
                             R: float = None, L: float = None, plan: RatePlan = None,
                             w_radius: float = FLAT_W_RADIUS, z_radius: float = FLAT_Z_RADIUS,
                             nodes: int = 256) -> float:
    """(2 pi)^-2 times the integral of |integrand| |dw| |dz| over the two circles:
    an upper bound for |K^(N)| whose N-dependence isolates the contour geometry."""
    plan = _plan(R, L, plan)
    _check_radii(w_radius, z_radius)
    th = 2 * np.pi * np.arange(nodes) / nodes
    w = w_radius * np.exp(1j * th)
    z = 1.0 + z_radius * np.exp(1j * th)
    W, Z = np.meshgrid(w, z, indexing="ij")
    vals = np.abs(_correction_integrand(p1, x1, p2, x2, N, plan, W, Z)) * w_radius * z_radius
    return float(vals.mean())


def finite_flat_kernel(p1: SpaceTimePoint, x1: int, p2: SpaceTimePoint, x2: int, N: int,
                       R: float = None, L: float = None, plan: RatePlan = None) -> float:
    """Kernel of the system started from y_i = -2i, i >= 1, at particles n + N and
    positions shifted by -2N, written as K0' + K1 + K^(N) (before the (-1)^(n1-n2) conjugation)."""
    plan = _plan(R, L, plan)
    sign = (-1.0) ** (p1.n - p2.n)
    base = FlatKernel(plan=plan)
    return sign * base(p1, x1, p2, x2) + flat_correction(p1, x1, p2, x2, N, plan=plan)


def correction_decay_rate(p1: SpaceTimePoint, x1: int, p2: SpaceTimePoint, x2: int, Ns,
                          R: float = None, L: float = None, plan: RatePlan = None,
                          nodes: int = 512) -> float:
    """exp of the least-squares slope of log majorant(K^(N)) against N: the geometric
    decay rate of the finite-N correction on the bound circles (compare flat_kappa)."""
    plan = _plan(R, L, plan)
    Ns = np.asarray(list(Ns), dtype=int)
    if len(Ns) < 2 or np.any(Ns < 1):
        raise ValidationError("need at least two system sizes N >= 1")
    logs = [math.log(flat_correction_majorant(p1, x1, p2, x2, int(N), plan=plan, nodes=nodes)) for N in Ns]
    return float(math.exp(np.polyfit(Ns, logs, 1)[0]))
