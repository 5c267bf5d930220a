"""Exact finite-time transition probabilities and the kernels they are built from."""
from __future__ import annotations

import itertools
import math
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .contour import LaurentQuery, coefficient_table, laurent_coefficient, quadrature_coefficient
from .errors import DimensionMismatch, ValidationError, WindowTooSmall
from .model import ParticleConfig, RatePlan, SpaceTimePoint, precedes


def _n_particles(plan: RatePlan, N: Optional[int]) -> int:
    if N is not None:
        return int(N)
    if plan.speeds is None:
        raise ValidationError("particle count N is required when speeds are implicit")
    return len(plan.speeds)


def F_query(k: int, l: int, x: int, a: float, b: float, plan: RatePlan,
            N: Optional[int] = None) -> LaurentQuery:
    """F_{k,l}(x,a,b) as a Laurent coefficient: the z^-x coefficient of
    exp(bz + a/z) prod_{i<k}(1 - v_{N+1-i} z) / prod_{j<l}(1 - v_{N+1-j} z)."""
    N = _n_particles(plan, N)
    if not (1 <= k <= N and 1 <= l <= N):
        raise ValidationError(f"indices k={k}, l={l} outside 1..{N}")
    if a < 0 or b < 0:
        raise ValidationError("a and b must be nonnegative")
    # common factors cancel
    num = tuple(plan.speed(N + 1 - i) for i in range(l, k))
    den = tuple(plan.speed(N + 1 - j) for j in range(k, l))
    return LaurentQuery(a, b, -int(x), num, den)


def eval_F(k: int, l: int, x: int, a: float, b: float, plan: RatePlan,
           N: Optional[int] = None, method: str = "quadrature") -> float:
    q = F_query(k, l, x, a, b, plan, N)
    if method == "series":
        return laurent_coefficient(q)
    return quadrature_coefficient(q)


def eval_T(x: int, y: int, da: float, db: float, method: str = "quadrature") -> float:
    """One-particle transition weight F_{1,1}(x - y, da, db)."""
    if da < 0 or db < 0:
        raise ValidationError("time increments of the clocks must be nonnegative")
    q = LaurentQuery(da, db, int(y) - int(x))
    return laurent_coefficient(q) if method == "series" else quadrature_coefficient(q)


def T_table(offsets: Iterable[int], da: float, db: float) -> Dict[int, float]:
    """eval_T(d, 0, da, db) for many displacements d at once."""
    tab = coefficient_table(da, db, [-int(d) for d in offsets])
    return {-m: v for m, v in tab.items()}


def phi_query(p1: SpaceTimePoint, p2: SpaceTimePoint, x: int, y: int,
              plan: RatePlan) -> LaurentQuery:
    da = plan.a(p1.t) - plan.a(p2.t)
    db = plan.b(p1.t) - plan.b(p2.t)
    den = tuple(plan.speed(j) for j in range(p1.n + 1, p2.n + 1))
    return LaurentQuery(da, db, int(y) - int(x), (), den)


def eval_phi_transition(p1: SpaceTimePoint, p2: SpaceTimePoint, x: int, y: int,
                        plan: RatePlan, method: str = "quadrature") -> float:
    """Transition kernel between space-time points; exactly 0 unless p1 precedes p2."""
    if not precedes(p1, p2):
        return 0.0
    q = phi_query(p1, p2, x, y, plan)
    return laurent_coefficient(q) if method == "series" else quadrature_coefficient(q)


class GreenEvaluator:
    """Green's function evaluator with F_{k,l} values cached per (k, l, x).

    The determinant is det[F_{k,l}(x_{N+1-l} - y_{N+1-k}, a, b)] times the
    prefactor prod_n v_n^(x_n - y_n) exp(-a v_n - b / v_n).
    """

    def __init__(self, y: Sequence[int], t: float, plan: RatePlan):
        self.y = tuple(int(v) for v in y)
        self.N = len(self.y)
        if self.N == 0:
            raise DimensionMismatch("need at least one particle")
        if t < 0:
            raise ValidationError("t must be nonnegative")
        self.t = float(t)
        self.plan = plan
        self.a, self.b = plan.a(t), plan.b(t)
        self.v = np.array([plan.speed(n) for n in range(1, self.N + 1)])
        self._cache: Dict[Tuple[int, int, int], float] = {}

    def F(self, k: int, l: int, x: int) -> float:
        key = (k, l, x)
        val = self._cache.get(key)
        if val is None:
            val = eval_F(k, l, x, self.a, self.b, self.plan, self.N)
            self._cache[key] = val
        return val

    def prefill(self, xs: Iterable[Sequence[int]]):
        """Compute all F values needed for the terminal tuples ``xs`` in batches."""
        need: Dict[Tuple[int, int], set] = {}
        for x in xs:
            for k in range(1, self.N + 1):
                for l in range(1, self.N + 1):
                    d = x[self.N - l] - self.y[self.N - k]
                    if (k, l, d) not in self._cache:
                        need.setdefault((k, l), set()).add(d)
        for (k, l), ds in need.items():
            q = F_query(k, l, 0, self.a, self.b, self.plan, self.N)
            tab = coefficient_table(self.a, self.b, [-d for d in ds], q.numerator, q.denominator)
            for d in ds:
                self._cache[(k, l, d)] = tab[-d]

    def __call__(self, x: Sequence[int]) -> float:
        x = tuple(int(v) for v in x)
        if len(x) != self.N:
            raise DimensionMismatch(f"expected {self.N} positions, got {len(x)}")
        N = self.N
        if self.t == 0.0:
            return float(x == self.y)
        M = np.empty((N, N))
        for k in range(1, N + 1):
            for l in range(1, N + 1):
                M[k - 1, l - 1] = self.F(k, l, x[N - l] - self.y[N - k])
        d = np.array(x) - np.array(self.y)
        logpre = float(np.sum(d * np.log(self.v) - self.a * self.v - self.b / self.v))
        return math.exp(logpre) * float(np.linalg.det(M))


def green_function(y: ParticleConfig, x: Sequence[int], t: float, plan: RatePlan) -> float:
    """Probability of moving from configuration ``y`` to ``x`` in time t.

    ``x`` may be any integer tuple; the determinant formula is evaluated as is.
    """
    yy = tuple(y)
    if len(tuple(x)) != len(yy):
        raise DimensionMismatch("initial and terminal tuples differ in length")
    return GreenEvaluator(yy, t, plan)(x)


# ---------------------------------------------------------------------------
# Master-equation oracle.

def _right_move(x: Tuple[int, ...], k: int) -> Optional[Tuple[int, ...]]:
    """Right jump of particle k (0-based), or None if the target site is occupied."""
    if k > 0 and x[k - 1] == x[k] + 1:
        return None
    return x[:k] + (x[k] + 1,) + x[k + 1:]


def _push_move(x: Tuple[int, ...], k: int) -> Tuple[int, ...]:
    """Left move of particle k (0-based) shifting the contiguous block k..m by one."""
    m = k
    while m + 1 < len(x) and x[m + 1] == x[m] - 1:
        m += 1
    return x[:k] + tuple(p - 1 for p in x[k:m + 1]) + x[m + 1:]


def _generators(states, index, v):
    """Sparse right and left generator parts (rows: from, cols: to); column -1 is the sink."""
    n = len(states)
    sink = n
    mats = []
    for mover in (_right_move, _push_move):
        rows, cols, vals = [], [], []
        for i, s in enumerate(states):
            for k in range(len(s)):
                rate = v[k] if mover is _right_move else 1.0 / v[k]
                new = mover(s, k)
                if new is None:
                    continue
                rows.append(i)
                cols.append(index.get(new, sink))
                vals.append(rate)
                rows.append(i)
                cols.append(i)
                vals.append(-rate)
        mats.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n + 1)))
    return mats


def _enumerate(lo: int, hi: int, N: int):
    return [tuple(c) for c in itertools.combinations(range(hi, lo - 1, -1), N)]


def _integrate(y, t, plan, W, courant):
    N = len(y)
    lo, hi = min(y) - W, max(y) + W
    states = _enumerate(lo, hi, N)
    index = {s: i for i, s in enumerate(states)}
    v = [plan.speed(k) for k in range(1, N + 1)]
    Ar, Al = _generators(states, index, v)
    ArT, AlT = Ar.T.tocsr(), Al.T.tocsr()
    p = np.zeros(len(states) + 1)
    p[index[tuple(y)]] = 1.0
    if t > 0:
        out_r = sum(v) if N else 0.0
        out_l = sum(1.0 / u for u in v)
        peak = plan.right.max_slope(t) * out_r + plan.left.max_slope(t) * out_l
        steps = max(1, int(math.ceil(peak * t / courant)))
        h = t / steps

        def rhs(q, s):
            return plan.adot(s) * (ArT @ q[:-1]) + plan.bdot(s) * (AlT @ q[:-1])

        s = 0.0
        for _ in range(steps):
            mid = s + 0.5 * h
            k1 = rhs(p, mid)
            k2 = rhs(p + 0.5 * h * k1, mid)
            k3 = rhs(p + 0.5 * h * k2, mid)
            k4 = rhs(p + h * k3, mid)
            p = p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            s += h
    return states, p


def master_equation_oracle(y: ParticleConfig, t: float, plan: RatePlan,
                           window: Optional[int] = None, courant: float = 0.05,
                           escape_tol: float = 1e-10) -> Dict[Tuple[int, ...], float]:
    """Distribution at time t by integrating the forward equation on a finite window.

    Configurations are restricted to [min(y) - W, max(y) + W]; probability that
    leaves the window is absorbed in a sink. Without an explicit ``window`` W
    starts at 8 and is doubled until the escaped mass is below ``escape_tol``.
    Rates are taken at the midpoint of each RK4 step and the step satisfies
    (max total rate) * step <= ``courant``.
    """
    y = tuple(y)
    if len(y) > 4:
        raise ValidationError("the oracle is limited to N <= 4 particles")
    if t < 0:
        raise ValidationError("t must be nonnegative")
    W = 8 if window is None else int(window)
    while True:
        states, p = _integrate(y, t, plan, W, courant)
        escaped = p[-1]
        if escaped < escape_tol:
            return {s: float(pi) for s, pi in zip(states, p[:-1])}
        if window is not None or W > 4096:
            raise WindowTooSmall(f"escaped mass {escaped:.3g} with window {W}")
        W *= 2


def generator_action(G, x: Tuple[int, ...], t: float, plan: RatePlan) -> float:
    """Right-hand side of the forward equation at terminal configuration x,
    with ``G(x')`` supplying the probabilities of neighbouring configurations."""
    x = tuple(x)
    N = len(x)
    ad, bd = plan.adot(t), plan.bdot(t)
    v = [plan.speed(k) for k in range(1, N + 1)]
    total = 0.0
    out = 0.0
    for k in range(N):
        # outgoing
        if k == 0 or x[k - 1] != x[k] + 1:
            out += ad * v[k]
        out += bd / v[k]
        # incoming right jump of k from x_k - 1
        if k == N - 1 or x[k] - 1 > x[k + 1]:
            total += ad * v[k] * G(x[:k] + (x[k] - 1,) + x[k + 1:])
        # incoming push by k moving the block k..m
        if k == 0 or x[k - 1] > x[k] + 1:
            m = k
            while True:
                prev = x[:k] + tuple(p + 1 for p in x[k:m + 1]) + x[m + 1:]
                total += bd / v[k] * G(prev)
                if m + 1 < N and x[m + 1] == x[m] - 1:
                    m += 1
                else:
                    break
    return total - out * G(x)


def forward_equation_residual(y: ParticleConfig, x: Sequence[int], t: float, h: float,
                              plan: RatePlan) -> float:
    """|central difference of G in t minus the generator applied to G| at x."""
    if t - h <= 0:
        raise ValidationError("need t - h > 0")
    x = tuple(int(p) for p in x)
    yy = tuple(y)
    dG = (green_function(y, x, t + h, plan) - green_function(y, x, t - h, plan)) / (2 * h)
    ev = GreenEvaluator(yy, t, plan)
    return abs(dG - generator_action(ev, x, t, plan))
