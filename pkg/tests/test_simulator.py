import io
import json
import math

import numpy as np
import pytest
from scipy import stats

from pushasep.errors import IndexOutOfRange, InvalidBound, ValidationError
from pushasep.model import ParticleConfig, Profile, RatePlan, SpaceLikePath
from pushasep.simulator import (BACKEND, Explicit, Flat, LightCone, SimConfig, Step, alias_table,
                                binomial_ci, flat_buffer_audit, sample_positions, sample_space_like,
                                simulate, terminal_chi2)
from pushasep.simulator import _pycore
from pushasep.simulator.engine import core


def test_compiled_backend_present():
    assert BACKEND == "cython"


def test_alias_table_reproduces_weights():
    w = np.array([0.5, 2.0, 0.0, 1.5])
    prob, alias = alias_table(w)
    m = len(w)
    mass = np.zeros(m)
    for j in range(m):
        mass[j] += prob[j] / m
        mass[alias[j]] += (1 - prob[j]) / m
    assert np.allclose(mass, w / w.sum(), atol=1e-15)
    with pytest.raises(ValidationError):
        alias_table([0.0, 0.0])


def test_tasep_has_no_left_moves():
    tr = simulate(SimConfig(RatePlan.homogeneous(1, 0), Step(5), 20.0, seed=3))
    assert len(tr) > 0
    assert np.all(tr.directions > 0) and np.all(tr.blocks == 1)


def test_replay_preserves_order_and_terminal():
    tr = simulate(SimConfig(RatePlan.homogeneous(1, 2), Step(6), 10.0, seed=11))
    x = None
    for x in tr.replay():
        assert np.all(np.diff(x) < 0)
    assert tuple(x.tolist()) == tr.terminal.positions
    assert np.any(tr.blocks > 1)  # some pushes happened


def test_pushes_only_move_left_blocks():
    tr = simulate(SimConfig(RatePlan.homogeneous(0, 1), Explicit(ParticleConfig((3, 2, 1, -5))), 5.0, seed=1))
    assert np.all(tr.directions < 0)
    assert np.all(tr.particles + tr.blocks - 1 <= 4)


def test_jsonl_times_have_twelve_digits():
    tr = simulate(SimConfig(RatePlan.homogeneous(1, 1), Step(2), 3.0, seed=5))
    buf = io.StringIO()
    tr.to_jsonl(buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == len(tr)
    for line, t in zip(lines, tr.times):
        e = json.loads(line)
        assert e["time"] == f"{t:.12g}"
        assert abs(float(e["time"]) - t) <= 1e-11 * t
        assert set(e) == {"time", "particle", "direction", "block"}


def test_single_particle_skellam_ks():
    # with one particle the uniformized chain is a Skellam walk
    R, L, t = 1.3, 0.6, 2.0
    cfg = SimConfig(RatePlan.homogeneous(R, L), Explicit(ParticleConfig((0,))), t, seed=17, replicas=4000)
    d = sample_positions(cfg, [(1, t)])[:, 0]
    ks = np.arange(-15, 16)
    emp = np.array([(d <= k).mean() for k in ks])
    gap = np.max(np.abs(emp - stats.skellam.cdf(ks, R * t, L * t)))
    assert gap < 1.63 / math.sqrt(cfg.replicas)  # KS critical value at the 1% level


def test_step_first_particle_skellam_tail():
    R, L, t, s = 1.0, 1.0, 1.5, -1
    cfg = SimConfig(RatePlan.homogeneous(R, L), Step(4), t, seed=23, replicas=4000)
    est = sample_space_like(cfg, [(1, t)], [s])
    exact = stats.skellam.sf(s + 1 - 1, R * t, L * t)  # x_1 = -1 + Skellam
    sd = math.sqrt(exact * (1 - exact) / cfg.replicas)
    assert abs(est.probability - exact) < 3 * sd
    assert est.ci_low <= est.probability <= est.ci_high


def test_extreme_threshold_is_certain():
    cfg = SimConfig(RatePlan.homogeneous(1, 1), Step(3), 2.0, seed=2, replicas=200)
    est = sample_space_like(cfg, [(2, 2.0), (3, 1.0)], [-1e6, -1e6])
    assert est.probability == 1.0 and est.ci_high == 1.0


def test_index_out_of_range():
    cfg = SimConfig(RatePlan.homogeneous(1, 1), Step(3), 1.0)
    with pytest.raises(IndexOutOfRange):
        sample_positions(cfg, [(4, 1.0)])
    with pytest.raises(IndexOutOfRange):
        SimConfig(RatePlan.homogeneous(1, 1), Flat(2, 5), 1.0).index_of(3)


def test_config_validation():
    plan = RatePlan.homogeneous(1, 1)
    with pytest.raises(ValidationError):
        SimConfig(plan, Step(2), -1.0)
    with pytest.raises(ValidationError):
        SimConfig(plan, Step(2), 1.0, seed=-1)
    with pytest.raises(ValidationError):
        Flat(2, 0)
    with pytest.raises(ValidationError):
        sample_positions(SimConfig(plan, Step(2), 1.0), [(1, 2.0)])


def test_binomial_ci_brackets():
    lo, hi = binomial_ci(50, 100)
    assert lo < 0.5 < hi
    assert binomial_ci(0, 10)[0] == 0.0 and binomial_ci(10, 10)[1] == 1.0


def raw_after(bitgen):
    return int(bitgen.random_raw())


@pytest.mark.parametrize("bg", [np.random.PCG64, np.random.Philox])
def test_backends_consume_identical_streams(bg):
    x0 = np.array([5, 4, 2, 0, -1, -2, -6], dtype=np.int64)
    n = len(x0)
    w = np.concatenate([1.2 * np.ones(n), 0.7 * np.ones(n)])
    prob, alias = alias_table(w)
    out = []
    for mod in (core, _pycore):
        g = bg(99)
        x = x0.copy()
        moved = mod.advance(x, prob, alias, 500, g)
        moved2 = mod.advance_uniform(x, 2, 0.4, 300, g)
        moved3 = mod.advance_epochs(x, np.array([0, 3], dtype=np.int64), np.array([50, 80], dtype=np.int64), 0.6, g)
        y = x0.copy()
        logged = mod.run_logged(y, prob, alias, 0.0, 4.0, float(w.sum()), g)
        out.append((moved, moved2, moved3, x.tolist(), y.tolist(), [a.tolist() for a in logged], raw_after(g)))
    assert out[0] == out[1]


def test_uniform_core_respects_frozen_wall():
    x = np.array([10, 3, 2, 1], dtype=np.int64)
    core.advance_uniform(x, 1, 1.0, 200, np.random.PCG64(0))
    assert x[0] == 10 and x[1] <= 9 and np.all(np.diff(x) < 0)


def test_time_dependent_plan_needs_dominating_bound():
    right = Profile((0.0, 1.0, 2.0), (0.0, 1.0, 3.0))  # slope up to 2
    left = Profile.linear(1.0)
    plan = RatePlan(right, left)
    with pytest.raises(ValidationError):
        simulate(SimConfig(plan, Step(2), 2.0))
    with pytest.raises(InvalidBound):
        simulate(SimConfig(plan, Step(2), 2.0, rate_bound=(1.5, 1.0)))
    tr = simulate(SimConfig(plan, Step(2), 2.0, seed=4, rate_bound=(2.0, 1.0)))
    for x in tr.replay():
        assert x[0] > x[1]


def test_thinning_matches_exact_law():
    right = Profile((0.0, 0.5, 1.5), (0.0, 0.25, 1.75))
    plan = RatePlan(right, Profile.linear(0.8))
    cfg = SimConfig(plan, Explicit(ParticleConfig((0, -2))), 1.5, seed=8, replicas=3000, rate_bound=(1.5, 0.8))
    assert terminal_chi2(cfg).pvalue > 1e-3


@pytest.mark.parametrize("R,L,speeds", [(1, 1, None), (2, 0.5, None), (1, 1, (1.5, 0.6, 1.0))])
def test_terminal_law_chi2(R, L, speeds):
    cfg = SimConfig(RatePlan.homogeneous(R, L, speeds), Step(3), 1.0, seed=31, replicas=5000)
    res = terminal_chi2(cfg)
    assert res.dof >= 10
    assert res.pvalue > 1e-3


def test_light_cone_agrees_with_rectangle():
    T = 30.0
    speed, margin = 1.25, 3 * T ** (2 / 3) + 10
    B = int(math.ceil(margin + speed * T)) + 1
    cfg = SimConfig(RatePlan.homogeneous(1, 1), Flat(1, B), T, seed=12, replicas=3000)
    pts = [(1, 10.0), (1, T)]
    a = sample_positions(cfg, pts, cone=LightCone(speed, margin)).astype(float)
    b = sample_positions(SimConfig(cfg.plan, cfg.initial, T, seed=13, replicas=3000), pts).astype(float)
    for j in range(len(pts)):
        se = math.sqrt(a[:, j].var() / len(a) + b[:, j].var() / len(b))
        assert abs(a[:, j].mean() - b[:, j].mean()) < 4 * se
        assert stats.ks_2samp(a[:, j], b[:, j]).pvalue > 1e-3


def test_light_cone_needs_unit_speeds():
    cfg = SimConfig(RatePlan.homogeneous(1, 1, (1.0, 2.0)), Step(2), 1.0)
    with pytest.raises(ValidationError):
        sample_positions(cfg, [(1, 1.0)], cone=LightCone(1.0, 1.0))


def test_threads_do_not_change_results():
    cfg = SimConfig(RatePlan.homogeneous(1, 1), Step(4), 2.0, seed=9, replicas=64)
    pts = [(1, 1.0), (4, 2.0)]
    assert np.array_equal(sample_positions(cfg, pts, threads=1), sample_positions(cfg, pts, threads=4))


def test_flat_buffer_audit():
    cfg = SimConfig(RatePlan.homogeneous(1, 1), Flat(3, 10), 1.0, seed=7, replicas=1000)
    ok = flat_buffer_audit(cfg, [1, 2, 3])
    assert ok.certified and ok.buffers == (10, 20)
    bad = flat_buffer_audit(cfg, [1, 2, 3], buffers=(0, 20))
    assert not bad.certified and bad.difference > 3 * bad.noise_floor
    with pytest.raises(ValidationError):
        flat_buffer_audit(SimConfig(cfg.plan, Step(3), 1.0), [1])


def test_space_like_path_input():
    cfg = SimConfig(RatePlan.homogeneous(1, 1), Step(3), 1.0, seed=1, replicas=50)
    est = sample_space_like(cfg, SpaceLikePath.of([(1, 1.0), (3, 0.5)]), [-5, -8])
    assert est.replicas == 50
    with pytest.raises(ValidationError):
        sample_space_like(cfg, [(1, 1.0)], [0, 1])
