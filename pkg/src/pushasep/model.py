"""Core data types: rate plans, particle configurations and space-like paths."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Profile:
    """Nondecreasing piecewise-linear clock c(t) with c(0)=0.

    Given by knot times 0 = s_0 < s_1 < ... and values c(s_i); beyond the last
    knot the final slope is continued.
    """
    times: tuple
    values: tuple

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        vs = tuple(float(v) for v in self.values)
        if len(ts) != len(vs) or len(ts) < 2:
            raise ValidationError("profile needs at least two knots of matching length")
        if ts[0] != 0.0 or vs[0] != 0.0:
            raise ValidationError("profile must start at c(0)=0")
        if any(t1 <= t0 for t0, t1 in zip(ts, ts[1:])):
            raise ValidationError("profile knot times must increase")
        if any(v1 < v0 for v0, v1 in zip(vs, vs[1:])):
            raise ValidationError("profile must be nondecreasing")
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "values", vs)

    @classmethod
    def linear(cls, rate: float) -> "Profile":
        if rate < 0:
            raise ValidationError("rate must be nonnegative")
        return cls((0.0, 1.0), (0.0, float(rate)))

    def _segment(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(i, 0), len(self.times) - 2)

    def slope(self, t: float) -> float:
        i = self._segment(t)
        t0, t1 = self.times[i], self.times[i + 1]
        return (self.values[i + 1] - self.values[i]) / (t1 - t0)

    def __call__(self, t: float) -> float:
        if t < 0:
            raise ValidationError("profiles are defined for t >= 0")
        i = self._segment(t)
        return self.values[i] + self.slope(t) * (t - self.times[i])

    def max_slope(self, t_max: float) -> float:
        slopes = [self.slope(t) for t in self.times if t <= t_max]
        return max(slopes) if slopes else self.slope(0.0)


@dataclass(frozen=True)
class RatePlan:
    """Particle speeds v_k and the clocks a(t) (right) and b(t) (left).

    Particle k jumps right at rate a'(t) v_k and pushes left at rate b'(t) / v_k.
    ``speeds=None`` means all particles have speed 1, for any number of particles.
    """
    right: Profile
    left: Profile
    speeds: Optional[tuple] = None
    R: Optional[float] = None
    L: Optional[float] = None

    def __post_init__(self):
        if self.speeds is not None:
            sp = tuple(float(v) for v in self.speeds)
            if any(not (v > 0 and np.isfinite(v)) for v in sp):
                raise ValidationError("speeds must be positive and finite")
            object.__setattr__(self, "speeds", sp)

    @classmethod
    def homogeneous(cls, R: float, L: float, speeds: Optional[Sequence[float]] = None) -> "RatePlan":
        if R < 0 or L < 0:
            raise ValidationError("R and L must be nonnegative")
        return cls(Profile.linear(R), Profile.linear(L),
                   None if speeds is None else tuple(speeds), float(R), float(L))

    @property
    def is_homogeneous(self) -> bool:
        return self.R is not None and self.L is not None

    @property
    def unit_speeds(self) -> bool:
        return self.speeds is None or all(v == 1.0 for v in self.speeds)

    def speed(self, k: int) -> float:
        """Speed of particle k (1-based)."""
        if k < 1:
            raise ValidationError("particle labels start at 1")
        if self.speeds is None:
            return 1.0
        if k > len(self.speeds):
            raise ValidationError(f"no speed given for particle {k}")
        return self.speeds[k - 1]

    def speed_array(self, n: int) -> np.ndarray:
        return np.array([self.speed(k) for k in range(1, n + 1)])

    def a(self, t: float) -> float:
        return self.right(t)

    def b(self, t: float) -> float:
        return self.left(t)

    def adot(self, t: float) -> float:
        return self.right.slope(t)

    def bdot(self, t: float) -> float:
        return self.left.slope(t)


@dataclass(frozen=True)
class ParticleConfig:
    """Strictly decreasing integer positions x_1 > x_2 > ... > x_N."""
    positions: tuple

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if any(b >= a for a, b in zip(pos, pos[1:])):
            raise ValidationError(f"positions must be strictly decreasing: {pos}")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def step(cls, n: int) -> "ParticleConfig":
        return cls(tuple(-i for i in range(1, n + 1)))

    @classmethod
    def flat(cls, n: int) -> "ParticleConfig":
        return cls(tuple(-2 * i for i in range(1, n + 1)))

    def __len__(self) -> int:
        return len(self.positions)

    def __iter__(self):
        return iter(self.positions)

    def __getitem__(self, i):
        return self.positions[i]


@dataclass(frozen=True, order=True)
class SpaceTimePoint:
    """A (particle label, time) pair."""
    n: int
    t: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError("particle label must be an integer >= 1")
        if not np.isfinite(self.t) or self.t < 0:
            raise ValidationError("time must be finite and nonnegative")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "t", float(self.t))


def precedes(p1: SpaceTimePoint, p2: SpaceTimePoint) -> bool:
    """Strict space-like order: n2 >= n1, t2 <= t1 and the points differ."""
    return p2.n >= p1.n and p2.t <= p1.t and (p1.n, p1.t) != (p2.n, p2.t)


@dataclass(frozen=True)
class SpaceLikePath:
    points: tuple = field(default_factory=tuple)

    def __post_init__(self):
        pts = tuple(p if isinstance(p, SpaceTimePoint) else SpaceTimePoint(*p) for p in self.points)
        for p, q in zip(pts, pts[1:]):
            if not precedes(p, q):
                raise ValidationError(f"points {p} and {q} are not space-like ordered")
        object.__setattr__(self, "points", pts)

    @classmethod
    def of(cls, pairs: Iterable) -> "SpaceLikePath":
        return cls(tuple(pairs))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]
