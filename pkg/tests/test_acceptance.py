"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are printed even
when output capture is on. The KPZ criterion takes about 20 minutes on one core.
"""
import itertools
import math
import time

import numpy as np
import pytest
from scipy import stats

from pushasep.fredholm import (ContinuumDetProblem, DiscreteDetProblem, fredholm_continuum,
                               joint_distribution_continuum, joint_distribution_discrete)
from pushasep.kernels import KernelSpec, correction_decay_rate, phi_flat, phi_step, psi_flat, psi_step
from pushasep.limits import PathGerm, convergence_study
from pushasep.model import ParticleConfig, RatePlan, SpaceLikePath, SpaceTimePoint
from pushasep.simulator import SimConfig, Step, kpz_exponent, sample_space_like
from pushasep.transition import (GreenEvaluator, T_table, eval_T, forward_equation_residual,
                                 green_function, master_equation_oracle)


@pytest.fixture
def verdict(capsys):
    def report(name, ok, detail):
        with capsys.disabled():
            print(f"\n{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, f"{name}: {detail}"
    return report


def test_c01_single_particle_skellam(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for (R, L), t in itertools.product([(1, 0), (0, 1), (1, 1), (4, 1)], [0.5, 1.0, 2.0]):
        plan = RatePlan.homogeneous(R, L)
        for d in range(-10, 11):
            if R and L:
                ref = stats.skellam.pmf(d, R * t, L * t)
            elif R:
                ref = stats.poisson.pmf(d, R * t)
            else:
                ref = stats.poisson.pmf(-d, L * t)
            worst = max(worst, abs(green_function(ParticleConfig((0,)), (d,), t, plan) - ref))
    dt = time.perf_counter() - t0
    verdict("C1 single-particle Skellam law", worst < 1e-10 and dt < 10,
            f"max diff {worst:.2e}, {dt:.1f} s")


def random_config(rng, N, max_gap=3):
    y = [int(rng.integers(-2, 3))]
    for _ in range(N - 1):
        y.append(y[-1] - int(rng.integers(1, max_gap + 1)))
    return tuple(y)


def test_c02_master_equation_oracle(verdict):
    rng = np.random.default_rng(2)
    plan = RatePlan.homogeneous(1, 1)
    t0 = time.perf_counter()
    worst = 0.0
    for N in (2, 3):
        for _ in range(3):
            y = random_config(rng, N)
            oracle = master_equation_oracle(ParticleConfig(y), 1.0, plan)
            G = GreenEvaluator(y, 1.0, plan)
            worst = max(worst, 0.5 * sum(abs(G(x) - p) for x, p in oracle.items()))
    dt = time.perf_counter() - t0
    verdict("C2 master-equation oracle", worst < 1e-6 and dt < 120, f"max TV {worst:.2e}, {dt:.1f} s")


def test_c03_forward_equation_residual(verdict):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        N = int(rng.integers(1, 4))
        y = random_config(rng, N)
        x = tuple(sorted(rng.choice(np.arange(-7, 6), N, replace=False).tolist(), reverse=True))
        R, L = rng.uniform(0.2, 2.0), rng.uniform(0.0, 2.0)
        t = rng.uniform(0.3, 2.0)
        res = forward_equation_residual(ParticleConfig(y), x, t, 1e-4, RatePlan.homogeneous(R, L))
        worst = max(worst, res)
    verdict("C3 forward-equation residual", worst < 1e-5, f"max residual {worst:.2e} over 20 configurations")


def biorth_error(psi, phi, n, t, offset, reach):
    xs = np.arange(-offset * n - reach, reach + 1)
    Psi = np.array([[psi(n, t, k, int(x), 1.0, 1.0) for x in xs] for k in range(n)])
    Phi = np.array([np.asarray(phi(n, t, j, xs, 1.0, 1.0), float) for j in range(n)])
    return np.abs(Phi @ Psi.T - np.eye(n)).max()


def test_c04_biorthogonality(verdict):
    worst = 0.0
    for n, t in itertools.product([1, 4, 8], [0.5, 1.5, 3.0]):
        worst = max(worst, biorth_error(psi_step, phi_step, n, t, 1, 50))
        worst = max(worst, biorth_error(psi_flat, phi_flat, n, t, 2, 50))
    verdict("C4 biorthogonality", worst < 1e-10, f"max |sum phi psi - delta| {worst:.2e}")


def test_c05_semigroup(verdict):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        a1, b1, a2, b2 = rng.uniform(0.0, 2.0, 4)
        x, y = (int(v) for v in rng.integers(-6, 7, 2))
        left = T_table(range(-40, 41), a1, b1)  # T(x, z) with z = x - d
        right = T_table(range(-60, 61), a2, b2)
        conv = math.fsum(left[d] * right[(x - d) - y] for d in range(-40, 41))
        worst = max(worst, abs(conv - eval_T(x, y, a1 + a2, b1 + b2)))
    verdict("C5 semigroup identity", worst < 1e-10, f"max error {worst:.2e} on 50 triples")


def test_c06_fredholm_vs_monte_carlo(verdict):
    plan = RatePlan.homogeneous(1, 1)
    path = SpaceLikePath.of([(1, 1.0), (3, 0.5)])
    thresholds = [-1, -4]
    t0 = time.perf_counter()
    K = KernelSpec("step", plan).evaluator()
    exact = joint_distribution_discrete(DiscreteDetProblem(path, thresholds, K))
    est = sample_space_like(SimConfig(plan, Step(3), 1.0, seed=20261015, replicas=100_000), path, thresholds)
    dt = time.perf_counter() - t0
    sigma = math.sqrt(exact * (1 - exact) / est.replicas)
    gap = abs(exact - est.probability)
    verdict("C6 Fredholm vs Monte Carlo", gap < 3 * sigma and dt < 300,
            f"exact {exact:.5f}, MC {est.probability:.5f}, {gap / sigma:.2f} sigma, {dt:.1f} s")


def test_c07_flat_correction_decay(verdict):
    p1, p2 = SpaceTimePoint(1, 1.0), SpaceTimePoint(2, 0.5)
    t0 = time.perf_counter()
    rate = correction_decay_rate(p1, 0, p2, -1, range(10, 61), plan=RatePlan.homogeneous(1, 1))
    dt = time.perf_counter() - t0
    verdict("C7 flat finite-N decay rate", 0.12 <= rate <= 0.20 and dt < 60, f"rate {rate:.4f}, {dt:.1f} s")


def test_c08_airy1_convergence(verdict):
    t0 = time.perf_counter()
    rows = convergence_study("flat", [100, 1000], PathGerm.fixed_time(0.0), 1, 1, 0.0, 1.0)
    dt = time.perf_counter() - t0
    e100, e1000 = rows[0].sup_error, rows[1].sup_error
    ratio = e1000 / e100
    verdict("C8 Airy1 convergence", e1000 < e100 and 0.2 <= ratio <= 0.9 and dt < 1800,
            f"errors {e100:.4f} -> {e1000:.4f}, ratio {ratio:.3f}, {dt:.1f} s")


def test_c09_airy2_step_trend(verdict):
    rows = convergence_study("step", [100, 1000], PathGerm.fixed_time(0.0), 1, 1, 0.0, 0.0)
    e100, e1000 = rows[0].sup_error, rows[1].sup_error
    verdict("C9 Airy2 step trend", e1000 < e100, f"errors {e100:.5f} -> {e1000:.5f}")


def test_c10_continuum_self_consistency(verdict):
    base = fredholm_continuum(ContinuumDetProblem([0.0], [-1.0], "airy2")).value
    fine = fredholm_continuum(ContinuumDetProblem([0.0], [-1.0], "airy2", cutoff=16.0, order=120)).value
    drift = 0.0
    for kernel in ("airy1", "airy2"):
        vals = [joint_distribution_continuum(ContinuumDetProblem([u], [-0.5], kernel)) for u in (-2.0, 0.0, 3.0)]
        drift = max(drift, max(vals) - min(vals))
    ok = abs(base - fine) < 1e-7 and drift < 1e-7
    verdict("C10 continuum Fredholm self-consistency", ok,
            f"resolution change {abs(base - fine):.1e}, u-dependence {drift:.1e}")


def test_c11_kpz_exponent(verdict):
    t0 = time.perf_counter()
    r = kpz_exponent((250, 500, 1000, 2000), replicas=10_000, seed=20261015)
    dt = time.perf_counter() - t0
    verdict("C11 KPZ exponent", 0.25 <= r.slope <= 0.42 and dt < 1800,
            f"slope {r.slope:.4f} +- {r.slope_stderr:.4f}, stds {', '.join(f'{s:.3f}' for s in r.stds)}, "
            f"{dt / 60:.1f} min")
