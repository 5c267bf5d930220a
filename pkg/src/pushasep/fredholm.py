"""Fredholm determinants for discrete joint distributions and for the Airy processes."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import QuadratureDivergence, ValidationError, WindowDivergence
from .model import SpaceLikePath

WINDOW_START = 16
WINDOW_DOUBLINGS = 5
WINDOW_TOL = 1e-8


@dataclass
class DiscreteDetProblem:
    """P(x_{n_k}(t_k) >= s_k for all k) as det(1 - chi K chi) with chi = 1(x < s_k).

    ``kernel`` is any object with a ``block(p1, xs1, p2, xs2)`` method. Entries
    are conjugated as K(x1, x2) rho^(x2 - x1), which leaves the determinant unchanged.
    """
    path: SpaceLikePath
    thresholds: Sequence[int]
    kernel: object
    window: int = WINDOW_START
    rho: float = 1.0

    def __post_init__(self):
        if not isinstance(self.path, SpaceLikePath):
            self.path = SpaceLikePath(tuple(self.path))
        self.thresholds = [int(s) for s in self.thresholds]
        if len(self.thresholds) != len(self.path):
            raise ValidationError("one threshold per space-time point is required")
        if len(self.path) > 4:
            raise ValidationError("at most 4 space-time points are supported")
        if self.window < 16:
            raise ValidationError("window must be at least 16 sites")
        if not self.rho > 0:
            raise ValidationError("rho must be positive")

    def sites(self, window: Optional[int] = None) -> List[np.ndarray]:
        W = self.window if window is None else window
        return [np.arange(s - W, s) for s in self.thresholds]

    def matrix(self, window: Optional[int] = None) -> np.ndarray:
        xs = self.sites(window)
        blocks = []
        for i, p in enumerate(self.path):
            row = []
            for j, q in enumerate(self.path):
                B = np.asarray(self.kernel.block(p, xs[i], q, xs[j]), dtype=float)
                if self.rho != 1.0:
                    B = B * self.rho ** (xs[j][None, :] - xs[i][:, None]).astype(float)
                row.append(B)
            blocks.append(row)
        return np.block(blocks)


@dataclass
class DetResult:
    value: float
    raw: float
    window: int
    history: list = field(default_factory=list)

    def __float__(self):
        return self.value


def _det_one_minus(M: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(np.eye(len(M)) - M)
    return float(sign * math.exp(logdet)) if sign != 0 else 0.0


def fredholm_discrete(p: DiscreteDetProblem, tol: float = WINDOW_TOL,
                      doublings: int = WINDOW_DOUBLINGS) -> DetResult:
    """Window-doubling evaluation with the convergence history retained."""
    W = p.window
    history = []
    prev = None
    for _ in range(doublings + 1):
        val = _det_one_minus(p.matrix(W))
        history.append((W, val))
        if prev is not None and abs(val - prev) < tol:
            return DetResult(min(max(val, 0.0), 1.0), val, W, history)
        prev = val
        W *= 2
    raise WindowDivergence(f"determinant did not settle after {doublings} window doublings: {history}")


def joint_distribution_discrete(p: DiscreteDetProblem) -> float:
    return fredholm_discrete(p).value


def fredholm_series_reference(p: DiscreteDetProblem, order: int) -> float:
    """Fredholm expansion sum_{n<=order} (-1)^n sum over n-subsets of principal minors."""
    if order < 0 or order > 3:
        raise ValidationError("series reference supports orders 0..3")
    M = p.matrix()
    if len(M) > 4 * 30:
        raise ValidationError("series reference is meant for tiny windows")
    total = [1.0]
    idx = range(len(M))
    for n in range(1, order + 1):
        acc = []
        for sub in itertools.combinations(idx, n):
            acc.append(float(np.linalg.det(M[np.ix_(sub, sub)])))
        total.append((-1) ** n * math.fsum(acc))
    return math.fsum(total)


def series_tail_bound(p: DiscreteDetProblem, order: int) -> float:
    """Bound on |det - series(order)|: by Hadamard, a principal minor over a set S is at
    most prod_{i in S} r_i with r_i the row norm restricted to S <= full row norm, so
    the remainder is at most prod(1 + r_i) - sum_{k<=order} e_k(r)."""
    M = p.matrix()
    r = np.linalg.norm(M, axis=1)
    # elementary symmetric polynomials
    e = np.zeros(order + 1)
    e[0] = 1.0
    for ri in r:
        for k in range(order, 0, -1):
            e[k] += ri * e[k - 1]
    full = float(np.prod(1.0 + r))
    return max(full - float(e.sum()), 0.0)


# ---------------------------------------------------------------------------
# Continuum determinants.

@dataclass
class ContinuumDetProblem:
    """P(A(u_k) <= s_k for all k) as det(1 - chi K chi) on L^2({u_k} x R), chi = 1(x > s_k)."""
    times: Sequence[float]
    thresholds: Sequence[float]
    kernel: str = "airy2"
    cutoff: float = 12.0
    order: int = 60

    def __post_init__(self):
        self.times = [float(u) for u in self.times]
        self.thresholds = [float(s) for s in self.thresholds]
        if len(self.times) != len(self.thresholds) or not self.times:
            raise ValidationError("times and thresholds must have equal nonzero length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("times must be increasing")
        if self.kernel not in ("airy1", "airy2"):
            raise ValidationError("kernel must be 'airy1' or 'airy2'")
        if not 20 <= self.order <= 200:
            raise ValidationError("quadrature order must lie in [20, 200]")
        if self.cutoff < 8:
            raise ValidationError("cutoff must be at least 8")


def nystrom_det(block: Callable, times, thresholds, cutoff: float, order: int) -> float:
    """det(1 - K) discretized by Gauss-Legendre on [s_k, s_k + cutoff] per time slice,
    symmetrized with square roots of the weights."""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = [s + 0.5 * cutoff * (x + 1.0) for s in thresholds]
    sw = np.sqrt(0.5 * cutoff * w)
    rows = []
    for i, ui in enumerate(times):
        rows.append([sw[:, None] * block(ui, nodes[i], uj, nodes[j]) * sw[None, :]
                     for j, uj in enumerate(times)])
    return _det_one_minus(np.block(rows))


def _kernel_block(name):
    from .limits.airy import airy1_block, airy2_block
    return airy1_block if name == "airy1" else airy2_block


def fredholm_continuum(p: ContinuumDetProblem, tol: float = 1e-7, rounds: int = 3) -> DetResult:
    block = _kernel_block(p.kernel)
    q, L = p.order, p.cutoff
    history = []
    val = nystrom_det(block, p.times, p.thresholds, L, q)
    history.append((q, L, val))
    for _ in range(rounds):
        q2, L2 = min(2 * q, 400), 1.5 * L
        val2 = nystrom_det(block, p.times, p.thresholds, L2, q2)
        history.append((q2, L2, val2))
        if abs(val2 - val) < tol:
            return DetResult(min(max(val2, 0.0), 1.0), val2, q2, history)
        q, L, val = q2, L2, val2
    raise QuadratureDivergence(f"Nystrom determinant did not converge: {history}")


def joint_distribution_continuum(p: ContinuumDetProblem) -> float:
    return fredholm_continuum(p).value
