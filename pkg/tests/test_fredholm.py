import itertools

import numpy as np
import pytest
from scipy import integrate, stats

from pushasep.errors import ValidationError
from pushasep.fredholm import (ContinuumDetProblem, DiscreteDetProblem, fredholm_continuum,
                               fredholm_discrete, fredholm_series_reference,
                               joint_distribution_continuum, joint_distribution_discrete,
                               series_tail_bound)
from pushasep.kernels import KernelSpec
from pushasep.model import ParticleConfig, RatePlan, SpaceLikePath
from pushasep.transition import GreenEvaluator

# Tracy-Widom GUE and GOE means (literature values)
TW2_MEAN = -1.7710868074116
TW1_MEAN = -1.2065335745820


def step_det(points, thresholds, plan, **kw):
    K = KernelSpec("step", plan).evaluator()
    return joint_distribution_discrete(DiscreteDetProblem(SpaceLikePath.of(points), thresholds, K, **kw))


def skellam_sf(k, mu1, mu2):
    """P(Poisson(mu1) - Poisson(mu2) > k), valid for zero means too."""
    if mu1 == 0 and mu2 == 0:
        return float(k < 0)
    if mu2 == 0:
        return float(stats.poisson.sf(k, mu1))
    if mu1 == 0:
        return float(stats.poisson.cdf(-k - 1, mu2))
    return float(stats.skellam.sf(k, mu1, mu2))


@pytest.mark.parametrize("R,L", [(1, 0), (1, 1), (4, 1), (0.5, 2)])
@pytest.mark.parametrize("s", [-4, -1, 2])
def test_one_point_step_is_skellam_tail(R, L, s):
    # x_1(0) = -1 and the first particle moves freely
    t = 1.3
    val = step_det([(1, t)], [s], RatePlan.homogeneous(R, L))
    assert abs(val - skellam_sf(s, R * t, L * t)) < 1e-9


def two_particle_law(plan, t):
    G = GreenEvaluator((-1, -2), t, plan)
    return {c: G(c) for c in itertools.combinations(range(30, -31, -1), 2)}


@pytest.mark.parametrize("R,L", [(1, 0), (1, 1)])
def test_equal_time_pair_matches_green(R, L):
    plan = RatePlan.homogeneous(R, L)
    t = 1.0
    law = two_particle_law(plan, t)
    for s1, s2 in [(-1, -2), (0, -3), (-2, -2)]:
        exact = sum(p for c, p in law.items() if c[0] >= s1 and c[1] >= s2)
        assert abs(step_det([(1, t), (2, t)], [s1, s2], plan) - exact) < 1e-8
        second = sum(p for c, p in law.items() if c[1] >= s2)
        assert abs(step_det([(2, t)], [s2], plan) - second) < 1e-8


def test_space_like_pair_matches_markov_composition():
    # x_1 ignores x_2, so P(x_1(t1) >= s1, x_2(t2) >= s2) follows from the law at t2
    plan = RatePlan.homogeneous(1, 1)
    t1, t2 = 1.0, 0.4
    law = two_particle_law(plan, t2)
    dt = t1 - t2
    for s1, s2 in [(-1, -2), (0, -3)]:
        exact = sum(p * skellam_sf(s1 - c[0] - 1, dt, dt) for c, p in law.items() if c[1] >= s2)
        assert abs(step_det([(1, t1), (2, t2)], [s1, s2], plan) - exact) < 1e-8


def test_general_kernel_with_speeds_matches_green():
    plan = RatePlan.homogeneous(2.0, 0.5, speeds=(0.8, 1.3))
    t = 0.7
    G = GreenEvaluator((-1, -2), t, plan)
    law = {c: G(c) for c in itertools.combinations(range(25, -26, -1), 2)}
    K = KernelSpec("general", plan, ParticleConfig((-1, -2))).evaluator()
    for s1, s2 in [(-1, -2), (0, -4)]:
        exact = sum(p for c, p in law.items() if c[0] >= s1 and c[1] >= s2)
        val = fredholm_discrete(DiscreteDetProblem(SpaceLikePath.of([(1, t), (2, t)]), [s1, s2], K)).value
        assert abs(val - exact) < 1e-8


def test_conjugation_invariance():
    plan = RatePlan.homogeneous(1, 1)
    pts, th = [(1, 1.0), (3, 0.5)], [-1, -4]
    base = step_det(pts, th, plan)
    for rho in (0.6, 0.85):
        assert abs(step_det(pts, th, plan, rho=rho) - base) < 1e-10


def test_extreme_thresholds():
    plan = RatePlan.homogeneous(1, 1)
    assert step_det([(2, 1.0)], [-60], plan) == pytest.approx(1.0, abs=1e-12)
    assert step_det([(2, 1.0)], [40], plan) < 1e-12


def test_window_history_converges():
    K = KernelSpec("step", RatePlan.homogeneous(1, 1)).evaluator()
    res = fredholm_discrete(DiscreteDetProblem(SpaceLikePath.of([(2, 2.0)]), [-2], K), tol=1e-10)
    assert len(res.history) >= 2
    assert abs(res.history[-1][1] - res.history[-2][1]) < 1e-10
    assert 0 <= res.value <= 1


def test_series_reference_within_tail_bound():
    K = KernelSpec("step", RatePlan.homogeneous(1, 1)).evaluator()
    p = DiscreteDetProblem(SpaceLikePath.of([(1, 0.3)]), [-1], K, window=20)
    det = fredholm_discrete(p).value
    for order in (1, 2, 3):
        assert abs(fredholm_series_reference(p, order) - det) <= series_tail_bound(p, order) + 1e-12


def test_series_agrees_for_small_kernel():
    K = KernelSpec("step", RatePlan.homogeneous(1, 1)).evaluator()
    p = DiscreteDetProblem(SpaceLikePath.of([(1, 0.05)]), [-2], K, window=16)
    assert np.linalg.norm(p.matrix(), 2) < 0.1
    assert abs(fredholm_series_reference(p, 3) - fredholm_discrete(p).value) < 1e-9


def test_problem_validation():
    K = KernelSpec("step", RatePlan.homogeneous(1, 1)).evaluator()
    with pytest.raises(ValidationError):
        DiscreteDetProblem(SpaceLikePath.of([(1, 1.0)]), [0, 1], K)
    with pytest.raises(ValidationError):
        DiscreteDetProblem(SpaceLikePath.of([(1, 1.0)]), [0], K, window=8)
    with pytest.raises(ValidationError):
        ContinuumDetProblem([0.0, 1.0], [0.0])


def cdf_mean(kernel, lo=-9.0, hi=7.0, n=161):
    s = np.linspace(lo, hi, n)
    F = np.array([joint_distribution_continuum(ContinuumDetProblem([0.0], [x], kernel)) for x in s])
    return hi - integrate.simpson(F, x=s), F


def test_airy2_one_point_mean_is_tracy_widom_gue():
    mean, F = cdf_mean("airy2")
    assert np.all(np.diff(F) >= -1e-12)
    assert abs(mean - TW2_MEAN) < 1e-6


def test_airy1_one_point_mean_is_half_goe():
    mean, _ = cdf_mean("airy1")
    assert abs(mean - TW1_MEAN / 2) < 1e-6


@pytest.mark.parametrize("kernel", ["airy1", "airy2"])
def test_continuum_resolution_stability(kernel):
    base = fredholm_continuum(ContinuumDetProblem([0.0], [-1.0], kernel)).value
    fine = fredholm_continuum(ContinuumDetProblem([0.0], [-1.0], kernel, cutoff=16.0, order=120)).value
    assert abs(base - fine) < 1e-7


@pytest.mark.parametrize("kernel", ["airy1", "airy2"])
def test_continuum_stationarity(kernel):
    vals = [joint_distribution_continuum(ContinuumDetProblem([u], [-0.5], kernel)) for u in (-2.0, 0.0, 3.0)]
    assert max(vals) - min(vals) < 1e-7


def test_airy2_decoupling_rate():
    # joint - F(s)^2 ~ u^-2 F'(s)^2 (two-time Airy2 asymptotics); the gap is
    # still 1.6e-3 at u = 10 and drops below 1e-4 only around u = 40
    s, h = -1.5, 1e-3
    F = lambda x: joint_distribution_continuum(ContinuumDetProblem([0.0], [x], "airy2"))
    dF = (F(s + h) - F(s - h)) / (2 * h)
    ratios = []
    for u in (10.0, 20.0, 40.0):
        gap = joint_distribution_continuum(ContinuumDetProblem([0.0, u], [s, s], "airy2")) - F(s) ** 2
        ratios.append(gap / (dF * dF / u ** 2))
    assert abs(ratios[-1] - 1) < 5e-3
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1) / 3
    assert gap < 1.1e-4


def test_two_time_joint_below_marginals():
    one = joint_distribution_continuum(ContinuumDetProblem([0.0], [-1.0], "airy2"))
    two = joint_distribution_continuum(ContinuumDetProblem([0.0, 0.5], [-1.0, -1.0], "airy2"))
    assert one * one < two < one
