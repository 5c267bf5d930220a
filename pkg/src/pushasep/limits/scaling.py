"""Space-like scaling maps and the flat / step scaling constants."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import RootNotBracketed, ValidationError

MU_LO = 1e-6
MU_HI = 1.0 - 1e-6
MU_TOL = 1e-12
# floor guard: (0.7 - 0.3) * 1000 must give 400, not 399
FLOOR_GUARD = 1e-9


def lattice_floor(v: float) -> int:
    return int(math.floor(v + FLOOR_GUARD * max(1.0, abs(v))))


@dataclass(frozen=True)
class PathGerm:
    """Local data (theta, pi, pi', pi'') of a space-like curve at the observation point."""
    theta: float
    pi_val: float
    pi_d1: float
    pi_d2: float = 0.0

    def __post_init__(self):
        vals = (self.theta, self.pi_val, self.pi_d1, self.pi_d2)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("germ entries must be finite")
        if self.theta < 0:
            raise ValidationError("theta must be nonnegative")
        if abs(self.pi_d1) > 1:
            raise ValidationError("|pi'| must be at most 1")
        if self.pi_val < abs(self.theta) or self.pi_val + self.theta <= 0:
            raise ValidationError("pi(theta) must dominate |theta| with pi + theta > 0")

    @classmethod
    def fixed_time(cls, theta: float) -> "PathGerm":
        """pi(theta) = 1 - theta: every point observed at time T."""
        return cls(theta, 1.0 - theta, -1.0, 0.0)

    @classmethod
    def tagged(cls, alpha: float) -> "PathGerm":
        """pi(theta) = alpha + theta: particle number alpha T, normalized so pi + theta = 1."""
        if not 0 <= alpha < 1:
            raise ValidationError("tagged-particle density alpha must lie in [0, 1)")
        theta = 0.5 * (1.0 - alpha)
        return cls(theta, alpha + theta, 1.0, 0.0)

    @property
    def w0(self) -> float:
        return self.pi_val

    @property
    def w1(self) -> float:
        return self.theta


@dataclass(frozen=True)
class ScalingMap:
    """u -> (n(u), t(u)) along the germ at large parameter T."""
    T: float
    germ: PathGerm

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValidationError("T must be positive and finite")

    def t(self, u: float) -> float:
        g, T = self.germ, self.T
        t = (g.pi_val + g.theta) * T - (g.pi_d1 + 1) * u * T ** (2 / 3) + 0.5 * g.pi_d2 * u * u * T ** (1 / 3)
        if t < 0:
            raise ValidationError(f"t(u) = {t} is negative at u = {u}")
        return t

    def n_real(self, u: float) -> float:
        g, T = self.germ, self.T
        return (g.pi_val - g.theta) * T + (1 - g.pi_d1) * u * T ** (2 / 3) + 0.5 * g.pi_d2 * u * u * T ** (1 / 3)

    def n(self, u: float) -> int:
        n = lattice_floor(self.n_real(u))
        if n < 1:
            raise ValidationError(f"n(u) = {n} is below 1 at u = {u}")
        return n


@dataclass(frozen=True)
class ScalingParamsFlat:
    S_v: float
    S_h: float
    v_mean: float
    kappa0: float
    kappa1: float


def flat_scaling(germ: PathGerm, R: float, L: float) -> ScalingParamsFlat:
    _check_rates(R, L)
    c = (8 * L + R) * (germ.pi_val + germ.theta)
    kappa1 = (R + 4 * L) * (germ.pi_d1 + 1) + 4 * (1 - germ.pi_d1)
    return ScalingParamsFlat(S_v=c ** (1 / 3), S_h=4 * c ** (2 / 3) / kappa1,
                             v_mean=-2 * L + R / 2, kappa0=8 * c, kappa1=kappa1)


@dataclass(frozen=True)
class ScalingParamsStep:
    mu: float
    alpha: float
    beta: float
    sigma0: float
    sigma1: float
    sigma2: float
    kappa0: float
    kappa1: float

    @property
    def S_v(self) -> float:
        return self.mu * self.kappa0 ** (1 / 3)

    @property
    def S_h(self) -> float:
        return self.kappa0 ** (2 / 3) / self.kappa1


def alpha_of_mu(mu, R: float, L: float):
    return (1 - mu) ** 2 * (R + L / mu ** 2)


def beta_of_mu(mu, R: float, L: float):
    return -((1 - 2 * mu) * R + L / mu ** 2)


def solve_mu(target: float, R: float, L: float) -> float:
    """Root of alpha(mu) = target on (0, 1) by bisection, after a monotonicity check."""
    _check_rates(R, L)
    grid = np.linspace(MU_LO, MU_HI, 100)
    vals = alpha_of_mu(grid, R, L)
    if not np.all(np.diff(vals) < 0):
        raise ValidationError("alpha(mu) is not strictly decreasing on the grid")
    lo, hi = MU_LO, MU_HI
    f_lo, f_hi = alpha_of_mu(lo, R, L) - target, alpha_of_mu(hi, R, L) - target
    if f_lo * f_hi > 0:
        raise RootNotBracketed(f"target {target} outside alpha((0,1)) = ({f_hi + target:.6g}, {f_lo + target:.6g})")
    while hi - lo > MU_TOL:
        mid = 0.5 * (lo + hi)
        if alpha_of_mu(mid, R, L) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def step_scaling(germ: PathGerm, R: float, L: float) -> ScalingParamsStep:
    g = germ
    s = g.pi_val + g.theta
    mu = solve_mu((g.pi_val - g.theta) / s, R, L)
    alpha, beta = alpha_of_mu(mu, R, L), beta_of_mu(mu, R, L)
    sigma0 = s * beta
    # x(u) is the limit shape t beta(mu(n / t)) expanded along the germ
    sigma1 = (g.pi_d1 + 1) * (mu * R - L / mu) + (1 - g.pi_d1) / (1 - mu)
    sigma2 = (0.5 * g.pi_d2 * (mu * R - L / mu - 1 / (1 - mu))
              + (g.pi_d1 * (1 - alpha) - (1 + alpha)) ** 2
              / (4 * (1 - mu) ** 3 * s * (R + L / mu ** 3)))
    kappa0 = s * (R + L / mu ** 3) / (mu * (1 - mu))
    kappa1 = (g.pi_d1 + 1) * (R + L / mu ** 2) / (2 * mu) - (g.pi_d1 - 1) / (2 * mu * (1 - mu) ** 2)
    return ScalingParamsStep(mu, alpha, beta, sigma0, sigma1, sigma2, kappa0, kappa1)


def _check_rates(R: float, L: float):
    if R < 0 or L < 0 or R + L == 0:
        raise ValidationError("rates must be nonnegative and not both zero")
