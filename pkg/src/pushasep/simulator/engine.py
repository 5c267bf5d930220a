"""Simulation drivers: configurations, exact trajectories, space-like sampling and buffer audits.

Labels in the simulated system run 1..N from the rightmost particle. For the flat
initial condition the B buffer particles come first, so window particle n is
simulated particle B + n.
"""
from __future__ import annotations

import heapq
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ..errors import IndexOutOfRange, InvalidBound, ValidationError
from ..model import ParticleConfig, RatePlan, SpaceLikePath, SpaceTimePoint
from . import _pycore

try:
    from . import _core as core
except ImportError:  # no compiled extension
    core = _pycore

CI_LEVEL = 0.99
BOUND_SLACK = 1e-12
SEED_MAX = 2 ** 64
LABEL_OFFSET = 2 ** 31  # spawn keys must be nonnegative; buffer labels are <= 0


# ---------------------------------------------------------------------------
# Configuration.

@dataclass(frozen=True)
class Step:
    """Particles at -1, -2, ..., -N."""
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError("step initial condition needs N >= 1")

    def positions(self) -> np.ndarray:
        return -np.arange(1, self.N + 1, dtype=np.int64)

    @property
    def offset(self) -> int:
        return 0

    @property
    def observable(self) -> int:
        return self.N


def _flat_positions(M: int, B: int) -> np.ndarray:
    buffer = 2 * np.arange(B - 1, -1, -1, dtype=np.int64)
    window = -2 * np.arange(1, M + 1, dtype=np.int64)
    return np.concatenate([buffer, window])


@dataclass(frozen=True)
class Flat:
    """Window particles n = 1..M at -2n, plus B buffer particles on 0, 2, ..., 2(B-1)."""
    M: int
    B: int

    def __post_init__(self):
        for v, name in ((self.M, "M"), (self.B, "B")):
            if int(v) != v or v < 1:
                raise ValidationError(f"flat initial condition needs {name} >= 1")

    def positions(self) -> np.ndarray:
        return _flat_positions(self.M, self.B)

    @property
    def offset(self) -> int:
        return self.B

    @property
    def observable(self) -> int:
        return self.M


@dataclass(frozen=True)
class Explicit:
    config: ParticleConfig

    def __post_init__(self):
        if len(self.config) < 1:
            raise ValidationError("explicit initial condition needs a particle")

    def positions(self) -> np.ndarray:
        return np.array(self.config.positions, dtype=np.int64)

    @property
    def offset(self) -> int:
        return 0

    @property
    def observable(self) -> int:
        return len(self.config)


Initial = Union[Step, Flat, Explicit]


@dataclass(frozen=True)
class SimConfig:
    """What to simulate. ``rate_bound = (A, B)`` must dominate a'(t) and b'(t) on
    [0, t_max]; it is only needed (and only used) for time-dependent plans."""
    plan: RatePlan
    initial: Initial
    t_max: float
    seed: int = 0
    replicas: int = 1
    rate_bound: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not isinstance(self.initial, (Step, Flat, Explicit)):
            raise ValidationError("initial must be Step, Flat or Explicit")
        if not (math.isfinite(self.t_max) and self.t_max >= 0):
            raise ValidationError("t_max must be finite and nonnegative")
        if int(self.seed) != self.seed or not 0 <= self.seed < SEED_MAX:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ValidationError("replicas must be at least 1")
        if isinstance(self.initial, Flat) and not self.plan.unit_speeds:
            raise ValidationError("the flat initial condition is simulated with unit speeds")
        self.plan.speed_array(self.n_particles)  # raises if speeds are missing
        if self.rate_bound is not None:
            A, B = (float(v) for v in self.rate_bound)
            if not (A >= 0 and B >= 0 and math.isfinite(A) and math.isfinite(B)):
                raise ValidationError("rate bounds must be finite and nonnegative")
            object.__setattr__(self, "rate_bound", (A, B))

    @property
    def n_particles(self) -> int:
        return len(self.initial.positions())

    def index_of(self, n: int) -> int:
        """0-based array index of observed particle n (window label for flat)."""
        if not 1 <= n <= self.initial.observable:
            raise IndexOutOfRange(f"particle {n} is not in 1..{self.initial.observable}")
        return self.initial.offset + n - 1


def alias_table(weights: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Vose alias table: category j is kept with probability prob[j], else alias[j]."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) == 0 or np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise ValidationError("weights must be finite, nonnegative and not all zero")
    m = len(w)
    scaled = w * (m / w.sum())
    prob = np.ones(m)
    alias = np.arange(m, dtype=np.int64)
    small = [j for j in range(m) if scaled[j] < 1.0]
    large = [j for j in range(m) if scaled[j] >= 1.0]
    while small and large:
        s, g = small.pop(), large.pop()
        prob[s], alias[s] = scaled[s], g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    # leftovers are 1 up to rounding
    return prob, alias


def _category_weights(plan: RatePlan, n: int, A: float, B: float) -> np.ndarray:
    v = plan.speed_array(n)
    return np.concatenate([A * v, B / v])


def _streams(seed: int, replicas: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(int(replicas))


def _check_bound(cfg: SimConfig) -> Tuple[float, float]:
    if cfg.rate_bound is None:
        raise ValidationError("time-dependent plans need a dominating rate bound")
    A, B = cfg.rate_bound
    if cfg.plan.right.max_slope(cfg.t_max) > A + BOUND_SLACK or cfg.plan.left.max_slope(cfg.t_max) > B + BOUND_SLACK:
        raise InvalidBound("rate bound does not dominate a'(t), b'(t) on [0, t_max]")
    return A, B


# ---------------------------------------------------------------------------
# Trajectories.

@dataclass
class Trajectory:
    """Effective events (time, 1-based simulated particle, direction +-1, block length)."""
    initial: ParticleConfig
    terminal: ParticleConfig
    times: np.ndarray
    particles: np.ndarray
    directions: np.ndarray
    blocks: np.ndarray
    t_max: float
    seed: int

    def __len__(self) -> int:
        return len(self.times)

    def replay(self) -> Iterator[np.ndarray]:
        """Positions after each event (the same array, updated in place)."""
        x = np.array(self.initial.positions, dtype=np.int64)
        for k, d, b in zip(self.particles.tolist(), self.directions.tolist(), self.blocks.tolist()):
            i = k - 1
            if d > 0:
                x[i] += 1
            else:
                x[i:i + b] -= 1
            yield x

    def events(self) -> Iterator[dict]:
        for t, k, d, b in zip(self.times.tolist(), self.particles.tolist(),
                              self.directions.tolist(), self.blocks.tolist()):
            yield {"time": f"{t:.12g}", "particle": int(k), "direction": int(d), "block": int(b)}

    def to_jsonl(self, fh) -> None:
        for e in self.events():
            fh.write(json.dumps(e) + "\n")

    def write_jsonl(self, path: str) -> None:
        with open(path, "w") as fh:
            self.to_jsonl(fh)


def _thinned(x: np.ndarray, cfg: SimConfig, bitgen, t0: float, t_end: float, log: Optional[list]):
    """Poisson thinning against the dominating bound on [t0, t_end], in place."""
    A, B = cfg.rate_bound
    n = len(x)
    w = _category_weights(cfg.plan, n, A, B)
    total = float(w.sum())
    if total == 0:
        return
    prob, alias = alias_table(w)
    pr, al = prob.tolist(), alias.tolist()
    xs = x.tolist()
    t = t0
    while True:
        t += -math.log1p(-_pycore._uniform(int(bitgen.random_raw()))) / total
        if t > t_end:
            break
        c = _pycore._category(int(bitgen.random_raw()), pr, al, 2 * n)
        rate, bound = (cfg.plan.adot(t), A) if c < n else (cfg.plan.bdot(t), B)
        ratio = rate / bound
        if ratio > 1 + BOUND_SLACK:
            raise InvalidBound(f"thinning acceptance probability {ratio} exceeds 1 at t = {t}")
        if _pycore._uniform(int(bitgen.random_raw())) >= ratio:
            continue
        b = _pycore._apply(xs, n, c)
        if b and log is not None:
            log.append((t, c if c < n else c - n, 1 if c < n else -1, b))
    x[:] = xs


def simulate(cfg: SimConfig) -> Trajectory:
    """One exact trajectory on [0, t_max] from the first replica stream of the seed."""
    x = cfg.initial.positions()
    init = ParticleConfig(tuple(x.tolist()))
    bitgen = np.random.PCG64(_streams(cfg.seed, 1)[0])
    n = len(x)
    if cfg.plan.is_homogeneous:
        w = _category_weights(cfg.plan, n, cfg.plan.R, cfg.plan.L)
        if w.sum() > 0:
            prob, alias = alias_table(w)
            times, parts, dirs, blocks = core.run_logged(x, prob, alias, 0.0, float(cfg.t_max),
                                                         float(w.sum()), bitgen)
        else:
            times, parts, dirs, blocks = (np.empty(0), np.empty(0, np.int64),
                                          np.empty(0, np.int8), np.empty(0, np.int64))
    else:
        _check_bound(cfg)
        log: list = []
        _thinned(x, cfg, bitgen, 0.0, float(cfg.t_max), log)
        arr = np.array(log, dtype=float).reshape(-1, 4)
        times, parts = arr[:, 0], arr[:, 1].astype(np.int64)
        dirs, blocks = arr[:, 2].astype(np.int8), arr[:, 3].astype(np.int64)
    return Trajectory(init, ParticleConfig(tuple(x.tolist())), times, parts + 1, dirs, blocks,
                      float(cfg.t_max), int(cfg.seed))


# ---------------------------------------------------------------------------
# Fixed-time statistics along many replicas.

@dataclass(frozen=True)
class LightCone:
    """Freeze particles that can no longer influence the observations.

    A change at label distance d travels at about ``speed`` labels per unit time,
    so particle i (0-based) is frozen once i < ref - margin - speed (t_ref - t),
    with ref the rightmost observed index and t_ref the last observation time.
    A frozen particle acts as a wall; it is never pushed, since pushes travel left.
    """
    speed: float
    margin: float

    def __post_init__(self):
        if not (self.speed > 0 and self.margin >= 0):
            raise ValidationError("light cone needs speed > 0 and margin >= 0")

    def schedule(self, ref: int, checkpoints: Sequence[float]):
        """Per checkpoint interval: arrays (lo, duration) of epochs with a fixed active set."""
        t_ref = checkpoints[-1]
        h = 1.0 / self.speed
        grid = t_ref - h * np.arange(int(t_ref / h) + 1)
        cuts = np.unique(np.concatenate([[0.0], grid[grid > 0], checkpoints]))
        out, start = [], 0.0
        for cp in checkpoints:
            edges = cuts[(cuts >= start) & (cuts <= cp)]
            a, b = edges[:-1], edges[1:]
            lo = np.clip(np.ceil(ref - self.margin - self.speed * (t_ref - a) - 1e-9), 0, ref)
            out.append((lo.astype(np.int64), b - a))
            start = cp
        return out


def _uniform_schedule(n: int, checkpoints: Sequence[float]):
    out, start = [], 0.0
    for cp in checkpoints:
        out.append((np.zeros(1, dtype=np.int64), np.array([cp - start])))
        start = cp
    return out


def _run_replicas(fn, replicas: int, threads: Optional[int]) -> None:
    threads = max(1, int(threads or 1))
    if threads == 1:
        for k in range(replicas):
            fn(k)
        return
    with ThreadPoolExecutor(threads) as pool:  # the compiled core releases the GIL
        list(pool.map(fn, range(replicas), chunksize=max(1, replicas // (8 * threads))))


def sample_positions(cfg: SimConfig, points: Sequence, threads: Optional[int] = None,
                     cone: Optional[LightCone] = None) -> np.ndarray:
    """Positions x_n(t) for each (n, t) in points and each replica: shape (replicas, len(points)).

    Homogeneous plans use the uniformized chain: Poisson event counts per interval
    and one random draw per event. Time-dependent plans use thinning.
    """
    pts = [p if isinstance(p, SpaceTimePoint) else SpaceTimePoint(*p) for p in points]
    if not pts:
        raise ValidationError("need at least one observation point")
    idx = np.array([cfg.index_of(p.n) for p in pts], dtype=np.int64)
    if any(p.t > cfg.t_max for p in pts):
        raise ValidationError("observation times must not exceed t_max")
    checkpoints = sorted({p.t for p in pts})
    which = [checkpoints.index(p.t) for p in pts]
    x0 = cfg.initial.positions()
    n = len(x0)
    plan = cfg.plan
    homogeneous = plan.is_homogeneous
    uniform = homogeneous and plan.unit_speeds
    if cone is not None and not uniform:
        raise ValidationError("light-cone freezing needs a homogeneous unit-speed plan")
    if not homogeneous:
        _check_bound(cfg)
    out = np.empty((cfg.replicas, len(pts)), dtype=np.int64)
    seeds = _streams(cfg.seed, cfg.replicas)

    if uniform:
        rate = plan.R + plan.L
        p_right = plan.R / rate if rate > 0 else 0.0
        sched = (cone.schedule(int(idx.min()), checkpoints) if cone is not None
                 else _uniform_schedule(n, checkpoints))
        lams = [rate * (n - lo) * dur for lo, dur in sched]
        splits = np.cumsum([len(l) for l in lams])[:-1]
        lam_all = np.concatenate(lams)
    elif homogeneous:
        w = _category_weights(plan, n, plan.R, plan.L)
        total = float(w.sum())
        if total > 0:
            prob, alias = alias_table(w)
        gaps = np.diff(np.concatenate([[0.0], checkpoints]))

    def one(k: int) -> None:
        bitgen = np.random.PCG64(seeds[k])
        x = x0.copy()
        snaps = np.empty((len(checkpoints), n), dtype=np.int64)
        if uniform:
            counts = np.random.Generator(bitgen).poisson(lam_all)
            for j, (c, (lo, _)) in enumerate(zip(np.split(counts, splits), sched)):
                core.advance_epochs(x, lo, c.astype(np.int64), p_right, bitgen)
                snaps[j] = x
        elif homogeneous:
            counts = np.random.Generator(bitgen).poisson(total * gaps) if total > 0 else np.zeros(len(gaps), int)
            for j, c in enumerate(counts.tolist()):
                if c:
                    core.advance(x, prob, alias, c, bitgen)
                snaps[j] = x
        else:
            t = 0.0
            for j, cp in enumerate(checkpoints):
                _thinned(x, cfg, bitgen, t, cp, None)
                snaps[j] = x
                t = cp
        out[k] = snaps[which, idx]

    _run_replicas(one, cfg.replicas, threads)
    return out


@dataclass(frozen=True)
class SpaceLikeEstimate:
    probability: float
    ci_low: float
    ci_high: float
    sigma: float
    hits: int
    replicas: int


def binomial_ci(hits: int, n: int, level: float = CI_LEVEL) -> Tuple[float, float]:
    """Clopper-Pearson interval."""
    a = 1 - level
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(a / 2, hits, n - hits + 1))
    hi = 1.0 if hits == n else float(stats.beta.ppf(1 - a / 2, hits + 1, n - hits))
    return lo, hi


def sample_space_like(cfg: SimConfig, path: SpaceLikePath, thresholds: Sequence[float],
                      threads: Optional[int] = None) -> SpaceLikeEstimate:
    """Fraction of replicas with x_{n_k}(t_k) >= s_k for every k, with a 99% interval."""
    if not isinstance(path, SpaceLikePath):
        path = SpaceLikePath.of(path)
    if len(thresholds) != len(path) or len(path) == 0:
        raise ValidationError("need one threshold per path point")
    pos = sample_positions(cfg, path.points, threads)
    hits = int(np.all(pos >= np.asarray(thresholds, dtype=float)[None, :], axis=1).sum())
    n = cfg.replicas
    p = hits / n
    lo, hi = binomial_ci(hits, n)
    return SpaceLikeEstimate(p, lo, hi, math.sqrt(p * (1 - p) / n), hits, n)


# ---------------------------------------------------------------------------
# Flat buffer audit with per-particle clocks.

@dataclass(frozen=True)
class AuditResult:
    difference: float
    noise_floor: float
    certified: bool
    buffers: Tuple[int, int]

    def __float__(self) -> float:
        return self.difference


def _coupled_flat_run(M: int, B: int, R: float, L: float, t_max: float, seed: int, r: int) -> np.ndarray:
    """Window positions at t_max; particle with window label j has its own clock stream,
    shared by every buffer size."""
    xs = _flat_positions(M, B).tolist()
    n = len(xs)
    rate = R + L
    if rate == 0:
        return np.array(xs[B:], dtype=np.int64)
    gens, heap = [], []
    for i in range(n):
        ss = np.random.SeedSequence(int(seed), spawn_key=(r, i - B + 1 + LABEL_OFFSET))
        g = np.random.Generator(np.random.PCG64(ss))
        gens.append(g)
        heap.append((g.exponential(1 / rate), i))
    heapq.heapify(heap)
    while heap[0][0] <= t_max:
        t, i = heapq.heappop(heap)
        g = gens[i]
        _pycore._apply(xs, n, i if g.random() < R / rate else i + n)
        heapq.heappush(heap, (t + g.exponential(1 / rate), i))
    return np.array(xs[B:], dtype=np.int64)


def _sup_cdf_gap(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    grid = np.union1d(a, b)
    Fa = np.searchsorted(np.sort(a), grid, side="right") / len(a)
    Fb = np.searchsorted(np.sort(b), grid, side="right") / len(b)
    gap = np.abs(Fa - Fb)
    j = int(np.argmax(gap))
    floor = 3 * math.sqrt((Fa[j] * (1 - Fa[j]) + Fb[j] * (1 - Fb[j])) / len(a))
    return float(gap[j]), floor


def flat_buffer_audit(cfg: SimConfig, observed: Sequence[int],
                      buffers: Optional[Tuple[int, int]] = None) -> AuditResult:
    """Max over observed window labels of the sup distance between the empirical laws of
    x_n(t_max) with buffer sizes B and 2B (or ``buffers``), clocks coupled per particle.

    The noise floor is three binomial standard deviations of the CDF difference at
    its maximum as if the runs were independent; coupling only makes it conservative.
    """
    if not isinstance(cfg.initial, Flat):
        raise ValidationError("the buffer audit needs a flat initial condition")
    if not cfg.plan.is_homogeneous:
        raise ValidationError("the buffer audit needs a homogeneous plan")
    M = cfg.initial.M
    b1, b2 = buffers if buffers is not None else (cfg.initial.B, 2 * cfg.initial.B)
    if min(b1, b2) < 0:
        raise ValidationError("buffer sizes must be nonnegative")
    for n in observed:
        cfg.index_of(n)
    cols = [n - 1 for n in observed]
    runs = []
    for B in (b1, b2):
        runs.append(np.array([_coupled_flat_run(M, B, cfg.plan.R, cfg.plan.L, cfg.t_max, cfg.seed, r)[cols]
                              for r in range(cfg.replicas)]))
    diff, floor = 0.0, 0.0
    for j in range(len(cols)):
        d, f = _sup_cdf_gap(runs[0][:, j], runs[1][:, j])
        if d >= diff:
            diff, floor = d, max(f, floor)
    return AuditResult(diff, floor, diff < floor, (int(b1), int(b2)))


# ---------------------------------------------------------------------------
# KPZ fluctuation exponent.

@dataclass(frozen=True)
class KPZResult:
    times: Tuple[float, ...]
    means: Tuple[float, ...]
    stds: Tuple[float, ...]
    slope: float
    slope_stderr: float
    buffer: int
    margin: float


def kpz_exponent(times: Sequence[float] = (250, 500, 1000, 2000), replicas: int = 10_000,
                 R: float = 1.0, L: float = 1.0, seed: int = 0, margin: Optional[float] = None,
                 threads: Optional[int] = None) -> KPZResult:
    """Log-log slope of std x_1(T) against T for the flat initial condition.

    All times are read off the same replicas. The buffer covers the light cone of
    the last time: characteristics at density 1/2 move R/4 + L labels per unit time
    away from the free right edge, plus a margin of a few T^(2/3).
    """
    ts = sorted(float(t) for t in times)
    if len(ts) < 2 or ts[0] <= 0:
        raise ValidationError("need at least two positive times")
    speed = R / 4 + L
    T = ts[-1]
    if margin is None:
        margin = 3.0 * T ** (2 / 3) + 10
    B = int(math.ceil(margin + speed * T)) + 1
    cfg = SimConfig(RatePlan.homogeneous(R, L), Flat(1, B), T, seed, replicas)
    threads = threads if threads is not None else (os.cpu_count() or 1)
    pos = sample_positions(cfg, [(1, t) for t in ts], threads, LightCone(speed, margin)).astype(float)
    means = pos.mean(axis=0)
    stds = pos.std(axis=0, ddof=1)
    lx, ly = np.log(ts), np.log(stds)
    fit = stats.linregress(lx, ly)
    # std of log(std) is about 1 / sqrt(2 (replicas - 1)) for near-Gaussian tails
    se = 1 / math.sqrt(2 * (replicas - 1)) / math.sqrt(np.sum((lx - lx.mean()) ** 2))
    return KPZResult(tuple(ts), tuple(means.tolist()), tuple(stds.tolist()), float(fit.slope),
                     float(se), B, float(margin))


# ---------------------------------------------------------------------------
# Goodness of fit against the exact transition probabilities.

@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    pvalue: float
    dof: int
    bins: int


def terminal_chi2(cfg: SimConfig, min_expected: float = 5.0, threads: Optional[int] = None) -> Chi2Result:
    """Pearson test of the empirical terminal configurations against green_function.

    Configurations with expected count >= min_expected get their own bin; the rest
    of the probability (including configurations never sampled) forms one pooled bin.
    """
    from ..transition import green_function
    n = cfg.n_particles
    if n > 4:
        raise ValidationError("the exact-law test is limited to N <= 4 particles")
    if cfg.initial.offset:
        raise ValidationError("the exact-law test needs step or explicit initial data")
    pos = sample_positions(cfg, [(k, cfg.t_max) for k in range(1, n + 1)], threads)
    configs, counts = np.unique(pos, axis=0, return_counts=True)
    y0 = ParticleConfig(tuple(cfg.initial.positions().tolist()))
    obs, exp = [], []
    for c, k in zip(configs, counts):
        e = cfg.replicas * green_function(y0, tuple(c.tolist()), cfg.t_max, cfg.plan)
        if e >= min_expected:
            obs.append(int(k))
            exp.append(e)
    rest_obs = cfg.replicas - sum(obs)
    rest_exp = cfg.replicas - math.fsum(exp)
    if rest_exp >= min_expected or rest_obs > 0:
        obs.append(rest_obs)
        exp.append(max(rest_exp, 1e-300))
    if len(obs) < 2:
        return Chi2Result(0.0, 1.0, 0, len(obs))
    obs_a, exp_a = np.array(obs, dtype=float), np.array(exp)
    stat = float(np.sum((obs_a - exp_a) ** 2 / exp_a))
    dof = len(obs) - 1
    return Chi2Result(stat, float(stats.chi2.sf(stat, dof)), dof, len(obs))
