"""Kernel and biorthogonal functions for the step initial condition y_i = -i (unit speeds)."""
from __future__ import annotations

import math
from typing import Dict, Optional, Sequence

import numpy as np

from ..contour import ContourSpec, LaurentQuery, circle_quadrature, coefficient_table, quadrature_coefficient
from ..errors import ContourCollision, ValidationError
from ..model import RatePlan, SpaceTimePoint, precedes
from ._series import binom_poly, inverse_clock_series

# Preset circles for the direct double-contour route: |w| = 0.4 and |z - 1| = 0.4.
STEP_W_RADIUS = 0.4
STEP_Z_RADIUS = 0.4


def _plan(R: Optional[float], L: Optional[float], plan: Optional[RatePlan]) -> RatePlan:
    if plan is None:
        if R is None or L is None:
            raise ValidationError("give either R and L or a rate plan")
        plan = RatePlan.homogeneous(R, L)
    if not plan.unit_speeds:
        raise ValidationError("step and flat kernels require unit speeds")
    return plan


def psi_step(n: int, t: float, k: int, x: int, R: float = None, L: float = None,
             plan: RatePlan = None) -> float:
    """Psi^{n,t}_k(x): the w^(x+n) coefficient of (w-1)^k exp(a w + b / w).

    For k < 0 the contour encloses both 0 and 1, so the Laurent expansion valid
    for |w| > 1 is used.
    """
    plan = _plan(R, L, plan)
    return _psi_query_value(plan.a(t), plan.b(t), k, x + n)


def _psi_query(a: float, b: float, k: int, power: int):
    if k >= 0:
        return LaurentQuery(b, a, power, (1.0,) * k, (), (-1.0) ** k), None
    return LaurentQuery(b, a, power, (), (1.0,) * (-k), (-1.0) ** k), (1.0, math.inf)


def _psi_query_value(a, b, k, power):
    q, ann = _psi_query(a, b, k, power)
    return quadrature_coefficient(q, annulus=ann)


def psi_table(a: float, b: float, k: int, powers) -> Dict[int, float]:
    q, ann = _psi_query(a, b, k, 0)
    return coefficient_table(q.a, q.b, powers, q.numerator, q.denominator, q.scale, ann)


def phi_step(n: int, t: float, j: int, x, R: float = None, L: float = None,
             plan: RatePlan = None, method: str = "residue"):
    """Phi^{n,t}_j(x), a polynomial of degree j in x.

    ``residue`` expands the integrand at z = 1 exactly (binomials times the
    Taylor series of exp(-a z - b / z)); ``quadrature`` integrates on the preset
    circle around 1.
    """
    plan = _plan(R, L, plan)
    if j < 0:
        raise ValidationError("Phi is defined for j >= 0")
    a, b = plan.a(t), plan.b(t)
    if method == "quadrature":
        xs = np.atleast_1d(x)
        out = np.array([_phi_quad(a, b, lambda z, xx=xx: z ** (xx + n) / (z - 1) ** (j + 1)) for xx in xs])
        return out if np.ndim(x) else float(out[0])
    g = inverse_clock_series(a, b, j)
    m = np.asarray(x) + n
    out = sum(binom_poly(m, j - i) * g[i] for i in range(j + 1))
    return out if np.ndim(x) else float(out)


def _phi_quad(a, b, rational):
    f = lambda z: rational(z) * np.exp(-a * z - b / z)
    return circle_quadrature(f, ContourSpec(1.0, STEP_Z_RADIUS)).real


def transition_block(p1: SpaceTimePoint, xs1, p2: SpaceTimePoint, xs2, plan: RatePlan) -> np.ndarray:
    """Unit-speed transition term: the w^(x1-x2-dn) coefficient of
    exp(da w + db / w) / (1-w)^dn, zero unless p1 precedes p2."""
    xs1, xs2 = np.asarray(xs1, dtype=int), np.asarray(xs2, dtype=int)
    out = np.zeros((len(xs1), len(xs2)))
    if not precedes(p1, p2):
        return out
    dn = p2.n - p1.n
    da, db = plan.a(p1.t) - plan.a(p2.t), plan.b(p1.t) - plan.b(p2.t)
    d = xs1[:, None] - xs2[None, :] - dn
    tab = coefficient_table(db, da, np.unique(d), (), (1.0,) * dn)
    return np.vectorize(tab.__getitem__, otypes=[float])(d)


class StepKernel:
    """Correlation kernel for step initial data, evaluated block-wise.

    K = -[p1 < p2] A(x1 - x2) + sum_m s_m P_m(x1) Phi^{n2,t2}_{n2-1-m}(x2), obtained
    by taking the residue at z = 1 of the double contour integral exactly.
    """

    def __init__(self, R: float = None, L: float = None, plan: RatePlan = None):
        self.plan = _plan(R, L, plan)

    def block(self, p1: SpaceTimePoint, xs1, p2: SpaceTimePoint, xs2) -> np.ndarray:
        plan = self.plan
        xs1, xs2 = np.asarray(xs1, dtype=int), np.asarray(xs2, dtype=int)
        n1, n2 = p1.n, p2.n
        a1, b1 = plan.a(p1.t), plan.b(p1.t)
        a2, b2 = plan.a(p2.t), plan.b(p2.t)
        K = -transition_block(p1, xs1, p2, xs2, plan)
        g = inverse_clock_series(a2, b2, n2 - 1)
        m2 = xs2 + n2
        C = [sum(binom_poly(m2, i - r) * g[r] for r in range(i + 1)) for i in range(n2)]
        for m in range(n2):
            e = n1 - m - 1
            num, den = ((1.0,) * e, ()) if e >= 0 else ((), (1.0,) * (-e))
            tab = coefficient_table(b1, a1, xs1 + n1, num, den)
            P = np.array([tab[x + n1] for x in xs1])
            K += (-1.0) ** (n2 + m + 1) * np.outer(P, C[n2 - 1 - m])
        return K

    def __call__(self, p1, x1, p2, x2) -> float:
        return float(self.block(p1, [x1], p2, [x2])[0, 0])


def kernel_step(p1: SpaceTimePoint, x1: int, p2: SpaceTimePoint, x2: int,
                R: float = None, L: float = None, plan: RatePlan = None,
                method: str = "residue", w_radius: float = STEP_W_RADIUS,
                z_radius: float = STEP_Z_RADIUS) -> float:
    """Step-IC kernel entry. ``method='contour'`` evaluates both integrals of
    the two-term formula by (nested) trapezoid quadrature on the preset
    circles |w| = w_radius and |z - 1| = z_radius."""
    plan = _plan(R, L, plan)
    if method == "residue":
        return StepKernel(plan=plan)(p1, x1, p2, x2)
    if w_radius + z_radius >= 1.0:
        raise ContourCollision("circles around 0 and 1 must be disjoint")
    a1, b1, a2, b2 = plan.a(p1.t), plan.b(p1.t), plan.a(p2.t), plan.b(p2.t)
    n1, n2 = p1.n, p2.n
    first = 0.0
    if precedes(p1, p2):
        dn = n2 - n1
        f = lambda w: w ** (-(x1 - x2 + 1)) * (w / (1 - w)) ** dn * np.exp((a1 - a2) * w + (b1 - b2) / w)
        first = -circle_quadrature(f, ContourSpec(0.0, w_radius)).real

    def inner(w):
        def g(z):
            return (np.exp(-b2 / z - a2 * z) * z ** (x2 + n2) / (1 - z) ** n2 / (w - z))
        return circle_quadrature(g, ContourSpec(1.0, z_radius))

    def outer(ws):
        vals = np.array([inner(w) for w in np.atleast_1d(ws)])
        return np.exp(b1 / ws + a1 * ws) * (1 - ws) ** n1 / ws ** (x1 + n1 + 1) * vals

    second = circle_quadrature(outer, ContourSpec(0.0, w_radius)).real
    return first + second
