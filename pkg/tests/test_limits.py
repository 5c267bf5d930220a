import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize, special

from pushasep.errors import RootNotBracketed, ValidationError
from pushasep.limits import (PathGerm, ScalingMap, airy1_kernel, airy2_kernel, airy_deriv, airy_fn,
                             airy_kernel, alpha_of_mu, beta_of_mu, convergence_study, flat_limit,
                             flat_scaling, lattice_floor, rescaled_flat_kernel, solve_mu, step_scaling)


def test_airy_at_zero():
    assert airy_fn(0.0) == pytest.approx(3 ** (-2 / 3) / math.gamma(2 / 3), abs=1e-15)


@pytest.mark.parametrize("x", [-35.0, -12.5, -6.2, -5.9, -1.0, 0.3, 4.0, 5.99, 6.01, 15.0, 38.0])
def test_airy_matches_scipy(x):
    ai, aip, _, _ = special.airy(x)
    assert abs(airy_fn(x) - ai) < 1e-12
    assert abs(airy_deriv(x) - aip) < 1e-10 * max(1, abs(x))


def test_airy_ode_residual():
    # fourth-order difference of Ai'; x = -6 straddles the Maclaurin / Taylor-stepping switch
    h = 1e-3
    for x in np.linspace(-10, 10, 21):
        f = airy_deriv
        d2 = (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)
        assert abs(d2 - x * airy_fn(x)) < 1e-9


def test_airy_positive_decreasing_right():
    vals = np.array([airy_fn(x) for x in np.linspace(1, 30, 59)])
    assert np.all(vals > 0) and np.all(np.diff(vals) < 0)


def test_airy1_examples():
    assert airy1_kernel(0.0, 0.0, 0.0, 0.0) == pytest.approx(airy_fn(0.0), abs=1e-15)
    ref = -(4 * math.pi) ** -0.5 + special.airy(1.0)[0] * math.exp(2 / 3)
    assert airy1_kernel(0.0, 0.0, 1.0, 0.0) == pytest.approx(ref, abs=1e-12)


def test_airy1_indicator_and_symmetry():
    for s1, s2 in [(-1.0, 0.5), (0.3, 2.0)]:
        # no Gaussian term for u2 <= u1
        d = -0.7
        ai = special.airy(s1 + s2 + d * d)[0] * math.exp(d * (s1 + s2) + 2 * d ** 3 / 3)
        assert airy1_kernel(-d, s1, 0.0, s2) == pytest.approx(ai, abs=1e-12)
        assert airy1_kernel(0.0, s1, 0.0, s2) == pytest.approx(airy1_kernel(0.0, s2, 0.0, s1), abs=1e-15)


def test_airy2_diagonal_identity():
    assert airy2_kernel(0.0, 0.0, 0.0, 0.0) == pytest.approx(special.airy(0.0)[1] ** 2, abs=1e-12)
    for s in (-2.0, 1.0):
        ai, aip, _, _ = special.airy(s)
        assert airy2_kernel(0.4, s, 0.4, s) == pytest.approx(aip ** 2 - s * ai ** 2, abs=1e-11)
        assert airy_kernel(s, s) == pytest.approx(aip ** 2 - s * ai ** 2, abs=1e-12)


def test_airy2_integral_representation():
    # u2 > u1: integral of e^{-l (u2 - u1)} Ai(s1 + l) Ai(s2 + l) over l > 0
    u1, u2, s1, s2 = 0.0, 0.6, -0.5, 0.4
    ref, _ = integrate.quad(lambda l: math.exp(-l * (u2 - u1)) * special.airy(s1 + l)[0]
                            * special.airy(s2 + l)[0], 0, np.inf, epsabs=1e-13)
    assert airy2_kernel(u1, s1, u2, s2) == pytest.approx(ref, abs=1e-10)


def test_airy2_hermitian_and_decay():
    assert airy2_kernel(0.0, -1.0, 0.0, 0.5) == pytest.approx(airy2_kernel(0.0, 0.5, 0.0, -1.0), abs=1e-13)
    # at s1 = s2 = 0 the integral behaves like Ai(0)^2 / u
    for u in (30.0, 300.0):
        assert airy2_kernel(0.0, 0.0, u, 0.0) * u == pytest.approx(airy_fn(0.0) ** 2, rel=3 / u)


@pytest.mark.parametrize("R,L", [(1, 1), (4, 1), (1, 0), (0.5, 3)])
def test_flat_scaling_specializations(R, L):
    ft = flat_scaling(PathGerm.fixed_time(0.2), R, L)
    assert ft.S_v == pytest.approx((8 * L + R) ** (1 / 3), rel=1e-14)
    assert ft.S_h == pytest.approx((8 * L + R) ** (2 / 3) / 2, rel=1e-14)
    tg = flat_scaling(PathGerm.tagged(0.3), R, L)
    assert tg.S_h == pytest.approx(2 * (8 * L + R) ** (2 / 3) / (4 * L + R), rel=1e-14)


def test_flat_scaling_r4_l1():
    assert flat_scaling(PathGerm.fixed_time(0.0), 4, 1).S_v == pytest.approx(12 ** (1 / 3), rel=1e-14)


def test_flat_scaling_derivative():
    germ = PathGerm.fixed_time(0.1)
    h = 1e-5
    d = (flat_scaling(germ, 1 + h, 1).S_v - flat_scaling(germ, 1 - h, 1).S_v) / (2 * h)
    assert d == pytest.approx((9.0) ** (-2 / 3) / 3, rel=1e-6)


def test_alpha_beta_at_half():
    assert alpha_of_mu(0.5, 4, 1) == pytest.approx(2.0, abs=1e-14)
    assert beta_of_mu(0.5, 4, 1) == pytest.approx(-4.0, abs=1e-14)


@pytest.mark.parametrize("R,L", [(1, 1), (4, 1), (2, 0.3)])
def test_alpha_strictly_decreasing(R, L):
    mu = np.linspace(0.01, 0.99, 200)
    assert np.all(np.diff(alpha_of_mu(mu, R, L)) < 0)


@given(target=st.floats(0.05, 20), R=st.floats(0.2, 5), L=st.floats(0.05, 5))
def test_solve_mu_root(target, R, L):
    mu = solve_mu(target, R, L)
    assert 0 < mu < 1
    assert abs(alpha_of_mu(mu, R, L) - target) < 1e-10 * max(1, target)


def test_solve_mu_outside_range():
    # alpha(0+) is finite when L = 0, so large targets have no root
    with pytest.raises(RootNotBracketed):
        solve_mu(1e6, 1.0, 0.0)


@pytest.mark.parametrize("R,L", [(1, 1), (4, 1)])
def test_unit_alpha_root_oracle(R, L):
    mu = step_scaling(PathGerm.fixed_time(0.0), R, L).mu
    ref = optimize.brentq(lambda m: (1 - m) ** 2 * (R + L / m ** 2) - 1, 1e-6, 1 - 1e-6)
    assert mu == pytest.approx(ref, abs=1e-10)


def test_step_scaling_kappa0():
    germ = PathGerm.fixed_time(0.2)
    par = step_scaling(germ, 4, 1)
    mu = par.mu
    ref = (germ.pi_val + germ.theta) * (4 + 1 / mu ** 3) / (mu * (1 - mu))
    assert par.kappa0 == pytest.approx(ref, rel=1e-12)


def test_scaling_map_floor_and_guard():
    sm = ScalingMap(1000.0, PathGerm.fixed_time(0.3))
    # n(0) = (pi - theta) T, which floating point puts just below 400
    assert sm.n(0.0) == 400
    assert lattice_floor(399.9999999999) == 400
    assert lattice_floor(-0.5) == -1
    with pytest.raises(ValidationError):
        ScalingMap(1000.0, PathGerm.tagged(0.0)).n(0.0)


def test_rescaled_flat_near_limit():
    germ = PathGerm.fixed_time(0.25)
    val = rescaled_flat_kernel(100.0, 0.0, 0.0, 0.0, 0.0, germ, 1, 1)
    lim = flat_limit(0.0, 0.0, 0.0, 0.0, germ, 1, 1)
    assert abs(val - lim) < 3 * 100 ** (-1 / 3) * abs(lim)


def test_tagged_flat_convergence_on_lattice():
    rows = convergence_study("flat", [100, 1000], PathGerm.tagged(0.4), 1, 1, lattice=True)
    ratio = rows[1].sup_error / rows[0].sup_error
    assert 0.2 <= ratio <= 0.9


def test_convergence_study_rejects_variant():
    with pytest.raises(ValidationError):
        convergence_study("bogus", [100], PathGerm.fixed_time(0.2), 1, 1)


@pytest.mark.parametrize("R,L", [(1, 1), (4, 1), (0.7, 2.5)])
def test_step_constants_match_limit_shape(R, L):
    # x(u) = t beta(mu) with alpha(mu) = n / t along the curve; sigma_k are its Taylor coefficients
    germ = PathGerm(0.15, 0.6, 0.3, 0.8)
    par = step_scaling(germ, R, L)
    th, p, p1, p2 = germ.theta, germ.pi_val, germ.pi_d1, germ.pi_d2

    def X(e):
        t = (p + th) - (p1 + 1) * e + 0.5 * p2 * e * e
        n = (p - th) + (1 - p1) * e + 0.5 * p2 * e * e
        return t * beta_of_mu(solve_mu(n / t, R, L), R, L)

    h = 1e-3
    d1 = (X(-2 * h) - 8 * X(-h) + 8 * X(h) - X(2 * h)) / (12 * h)
    d2 = (-X(-2 * h) + 16 * X(-h) - 30 * X(0) + 16 * X(h) - X(2 * h)) / (12 * h * h)
    assert par.sigma0 == pytest.approx(X(0.0), rel=1e-10)
    assert par.sigma1 == pytest.approx(-d1, rel=1e-7)
    assert par.sigma2 == pytest.approx(d2 / 2, rel=1e-5, abs=1e-7)
