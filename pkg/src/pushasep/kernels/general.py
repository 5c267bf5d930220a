"""Kernel for particle-dependent speeds and arbitrary initial configurations.

Phi is built from the basis f_k(x) = contour integral of z^(-x-1) / prod_{i=n-k}^{n} (1 - v_i z)
around the poles 1/v_i, orthogonalized against Psi through the Gram matrix.
Everything stays analytic when speeds coincide.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from ..contour import ContourSpec, circle_quadrature, coefficient_table
from ..errors import SingularGram, ValidationError
from ..model import ParticleConfig, RatePlan, SpaceTimePoint, precedes

GRAM_COND_LIMIT = 1e12


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to evaluate. ``initial`` is required for the general variant;
    ``rho`` is the default conjugation factor used by Fredholm determinants."""
    variant: str
    plan: RatePlan
    initial: Optional[ParticleConfig] = None
    rho: float = 1.0

    def __post_init__(self):
        if self.variant not in ("step", "flat", "general"):
            raise ValidationError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "general" and self.initial is None:
            raise ValidationError("the general kernel needs an initial configuration")
        if not (0 < self.rho <= 1.0 or self.rho > 0):
            raise ValidationError("rho must be positive")

    def evaluator(self):
        if self.variant == "step":
            from .step import StepKernel
            return StepKernel(plan=self.plan)
        if self.variant == "flat":
            from .flat import FlatKernel
            return FlatKernel(plan=self.plan)
        return GeneralKernel(self.plan, self.initial)


def complete_homogeneous(values: Sequence[float], degree: int) -> np.ndarray:
    """h_0..h_degree of the given variables (sums of all monomials of each degree)."""
    h = np.zeros(degree + 1)
    h[0] = 1.0
    for v in values:
        for d in range(1, degree + 1):
            h[d] += v * h[d - 1]
    return h


def divided_power(nodes: Sequence[float], powers) -> np.ndarray:
    """Divided difference [v_0, ..., v_k] of z -> z^m for integer m, any node multiplicities.

    m >= k gives h_{m-k}(v); 0 <= m < k gives 0; m < 0 gives
    (-1)^k h_{-m-1}(1/v) / prod v. All terms are positive, so no cancellation occurs.
    """
    nodes = np.asarray(nodes, dtype=float)
    k = len(nodes) - 1
    powers = np.asarray(powers, dtype=int)
    out = np.zeros(powers.shape)
    pos = powers >= k
    if pos.any():
        h = complete_homogeneous(nodes, int(powers[pos].max()) - k)
        out[pos] = h[powers[pos] - k]
    neg = powers < 0
    if neg.any():
        h = complete_homogeneous(1.0 / nodes, int(-powers[neg].min()) - 1)
        out[neg] = (-1.0) ** k * h[-powers[neg] - 1] / np.prod(nodes)
    return out


def divided_difference(g, nodes: Sequence[float]) -> float:
    """[v_0, ..., v_k] g by the contour integral of g(z) / prod (z - v_i) on a circle
    enclosing the nodes but not the origin (g may be singular at 0)."""
    nodes = np.asarray(nodes, dtype=float)
    lo, hi = nodes.min(), nodes.max()
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    radius = 0.5 * (c + half) if half > 0 else 0.5 * c
    f = lambda z: g(z) / np.prod([z - v for v in nodes], axis=0)
    return circle_quadrature(f, ContourSpec(c, radius)).real


class GeneralKernel:
    """K = -phi + sum_{k=1}^{n2} Psi^{n1,t1}_{n1-k}(x1) Phi^{n2,t2}_{n2-k}(x2)."""

    def __init__(self, plan: RatePlan, initial: ParticleConfig):
        self.plan = plan
        self.y = tuple(initial)
        self._phi_coef: Dict[Tuple[int, float], np.ndarray] = {}

    def _check(self, n):
        if n > len(self.y):
            raise ValidationError(f"label {n} exceeds the {len(self.y)} particles of the initial state")

    def v(self, i: int) -> float:
        return self.plan.speed(i)

    # -- Psi -------------------------------------------------------------
    def psi_query(self, n: int, t: float, i: int):
        """Psi^{n,t}_i with label l = n - i: the z^(y_l - x) coefficient of
        exp(a/z + b z) prod_{m=l+1}^n (1 - v_m z), or / prod_{m=n+1}^l (1 - v_m z) if l > n."""
        l = n - i
        if l < 1:
            raise ValidationError("Psi index too large")
        self._check(l)
        if l <= n:
            num, den = tuple(self.v(m) for m in range(l + 1, n + 1)), ()
        else:
            num, den = (), tuple(self.v(m) for m in range(n + 1, l + 1))
        # LaurentQuery convention: first clock multiplies 1/z
        return self.plan.a(t), self.plan.b(t), num, den, self.y[l - 1]

    def psi(self, n: int, t: float, i: int, xs) -> np.ndarray:
        qa, qb, num, den, yl = self.psi_query(n, t, i)
        xs = np.atleast_1d(np.asarray(xs, dtype=int))
        tab = coefficient_table(qa, qb, yl - xs, num, den)
        return np.array([tab[yl - x] for x in xs])

    # -- basis and Gram matrix ------------------------------------------
    def f_basis(self, n: int, k: int, xs) -> np.ndarray:
        """f_k(x) = -[v_{n-k}, ..., v_n](z -> z^(x+k)) (sum of residues at 1/v_i)."""
        nodes = [self.v(m) for m in range(n - k, n + 1)]
        return -divided_power(nodes, np.asarray(xs, dtype=int) + k)

    def gram(self, n: int, t: float) -> np.ndarray:
        """G_{k,l} = sum_x f_k(x) Psi^{n,t}_l(x) in closed form.

        Summing v^x Psi(x) over x gives v^(y_L) exp(a v + b / v) prod_{m>L} (1 - v_m / v)
        (L = n - l), so G_{k,l} is minus the divided difference of
        z^(k + y_L) exp(a z + b / z) prod_{m=L+1}^n (1 - v_m / z) on v_{n-k}, ..., v_n.
        """
        self._check(n)
        a, b = self.plan.a(t), self.plan.b(t)
        G = np.zeros((n, n))
        for k in range(n):
            nodes = [self.v(m) for m in range(n - k, n + 1)]
            for l in range(k + 1):
                L = n - l
                vs = [self.v(m) for m in range(L + 1, n + 1)]
                yL = self.y[L - 1]

                def g(z, k=k, yL=yL, vs=vs):
                    out = z ** (k + yL) * np.exp(a * z + b / z)
                    for vm in vs:
                        out = out * (1 - vm / z)
                    return out

                G[k, l] = -divided_difference(g, nodes)
        return G

    def phi_coefficients(self, n: int, t: float) -> np.ndarray:
        """Rows of G^-1: Phi_k = sum_l [G^-1]_{k,l} f_l."""
        key = (n, t)
        if key not in self._phi_coef:
            G = self.gram(n, t)
            d = np.abs(np.diag(G))
            if np.any(d == 0):
                raise SingularGram("Gram matrix has a zero diagonal entry")
            scaled = G / d[:, None]
            if np.linalg.cond(scaled) > GRAM_COND_LIMIT:
                raise SingularGram("Gram matrix is numerically singular")
            # G is lower triangular, so forward substitution is exact LU
            inv = sla.solve_triangular(scaled, np.eye(n), lower=True) / d[None, :]
            self._phi_coef[key] = inv
        return self._phi_coef[key]

    def phi(self, n: int, t: float, j: int, xs) -> np.ndarray:
        C = self.phi_coefficients(n, t)
        xs = np.asarray(xs, dtype=int)
        return sum(C[j, l] * self.f_basis(n, l, xs) for l in range(n))

    # -- kernel ------------------------------------------------------------
    def transition(self, p1: SpaceTimePoint, xs1, p2: SpaceTimePoint, xs2) -> np.ndarray:
        xs1, xs2 = np.asarray(xs1, dtype=int), np.asarray(xs2, dtype=int)
        out = np.zeros((len(xs1), len(xs2)))
        if not precedes(p1, p2):
            return out
        da = self.plan.a(p1.t) - self.plan.a(p2.t)
        db = self.plan.b(p1.t) - self.plan.b(p2.t)
        den = tuple(self.v(j) for j in range(p1.n + 1, p2.n + 1))
        d = xs2[None, :] - xs1[:, None]
        tab = coefficient_table(da, db, np.unique(d), (), den)
        return np.vectorize(tab.__getitem__, otypes=[float])(d)

    def block(self, p1: SpaceTimePoint, xs1, p2: SpaceTimePoint, xs2) -> np.ndarray:
        n1, n2 = p1.n, p2.n
        self._check(max(n1, n2))
        K = -self.transition(p1, xs1, p2, xs2)
        for k in range(1, n2 + 1):
            K += np.outer(self.psi(n1, p1.t, n1 - k, xs1), self.phi(n2, p2.t, n2 - k, xs2))
        return K

    def __call__(self, p1, x1, p2, x2) -> float:
        return float(self.block(p1, [x1], p2, [x2])[0, 0])


def kernel_general(p1: SpaceTimePoint, x1: int, p2: SpaceTimePoint, x2: int, spec: KernelSpec) -> float:
    if spec.variant != "general":
        return float(spec.evaluator()(p1, x1, p2, x2))
    if max(p1.n, p2.n) > 10:
        raise ValidationError("the general kernel is limited to labels <= 10")
    return GeneralKernel(spec.plan, spec.initial)(p1, x1, p2, x2)
