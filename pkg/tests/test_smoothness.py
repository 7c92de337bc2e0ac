import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracnet.model import DiffusionModel
from fracnet.payoff import binary, call, identity, quadratic
from fracnet.smoothness import (
    SmoothnessCurve,
    besov_proxy_norm,
    curves_csv,
    default_t_grid,
    derivative_bound_check,
    fit_theta,
    h_moment_curves,
    h_norm_curve,
    proxy_consistency,
    riemann_liouville_norm,
    smoothness_curves,
)

BM, GBM = DiffusionModel.bm(1), DiffusionModel.gbm(1)
T = default_t_grid(301)


@pytest.fixture(scope="module")
def binary_curve():
    return smoothness_curves(binary(), 2.0, T)


def test_binary_curves_closed_form(binary_curve):
    t, s = T, 1 - T
    np.testing.assert_allclose(binary_curve.d0, np.sqrt(0.25 - np.arcsin(t) / (2 * np.pi)), atol=1e-6)
    # E phi(W_t/sqrt(s))^2 / s and E H^2 in closed form
    np.testing.assert_allclose(binary_curve.d1, (2 * np.pi) ** -0.5 * (s * (1 + t)) ** -0.25, rtol=1e-8)
    np.testing.assert_allclose(binary_curve.d2, np.sqrt(t / (2 * np.pi * s**1.5 * (1 + t) ** 1.5)), rtol=1e-8, atol=1e-12)
    assert binary_curve.f_norm == pytest.approx(math.sqrt(0.5))
    assert set(binary_curve.method) == {"quadrature"}


def test_quadratic_and_identity_curves():
    c = smoothness_curves(quadratic(), 2.0, T)
    s = 1 - T
    np.testing.assert_allclose(c.d0, np.sqrt(2 * s**2 + 4 * T * s), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(c.d1, 2 * np.sqrt(T), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(c.d2, 2.0, rtol=1e-12)
    i = smoothness_curves(identity(), 2.0, T)
    np.testing.assert_allclose(i.d0, np.sqrt(s), rtol=1e-10)
    assert np.all(i.d2 == 0)


def test_binary_theta_fit(binary_curve):
    fit = fit_theta(binary_curve)
    assert abs(fit.theta_hat - 0.5) <= 0.05
    assert fit.slope_ci[0] <= fit.theta_hat <= fit.slope_ci[1]
    assert not fit.boundary


def test_smooth_payoff_fit_hits_boundary():
    fit = fit_theta(smoothness_curves(call(1.0), 2.0, T, model=GBM))
    assert fit.boundary and fit.theta_hat == pytest.approx(1.0, abs=0.02)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.02, 1.5), st.floats(0.1, 10.0))
def test_fit_theta_recovers_planted_exponent(theta, c):
    d0 = c * (1 - T) ** (theta / 2)
    curve = SmoothnessCurve("synthetic", 2.0, T, d0, d0, d0, np.full(T.size, "quadrature"), 1.0)
    assert fit_theta(curve).theta_hat == pytest.approx(theta, abs=1e-10)


def test_monte_carlo_mode_close_to_quadrature():
    t = default_t_grid(41, 1e-4)
    c = smoothness_curves(binary(), 4.0, t, n_paths=40_000, seed=1, force_mc=True)
    assert set(c.method) == {"monte_carlo"}
    fit = fit_theta(c)
    # binary has theta = 1/p in L_p
    assert abs(fit.theta_hat - 0.25) <= 0.05
    q = smoothness_curves(binary(), 4.0, t)
    assert np.all(np.abs(c.d0 - q.d0) < 5 * c.std_err["d0"] + 1e-12)


def test_proxy_norms_binary():
    c = smoothness_curves(binary(), 2.0, default_t_grid())
    sup = besov_proxy_norm(c, 0.5, math.inf, 0)
    assert not sup.divergent and sup.weighted.value == pytest.approx(0.5)
    assert besov_proxy_norm(c, 0.8, math.inf, 0).divergent
    for theta in (0.2, 0.4):
        assert proxy_consistency(c, theta, 2.0).consistent
    bad = proxy_consistency(c, 0.7, 2.0)
    assert bad.all_divergent and bad.consistent
    with pytest.raises(ValueError):
        besov_proxy_norm(c, 0.5, 2.0, 3)


@pytest.mark.parametrize("p", [3.0, 4.0])
def test_proxy_consistency_other_p(p):
    c = smoothness_curves(binary(), p, default_t_grid(401))
    assert proxy_consistency(c, 0.5 / p, 2.0).consistent
    assert proxy_consistency(c, 1.5 / p, 2.0).all_divergent


def test_derivative_bounds(binary_curve):
    rep = derivative_bound_check(binary_curve)
    assert rep.finite
    # at t = 0: d1/d0 = phi(0) / (1/2)
    assert rep.sup_first == pytest.approx(2 / math.sqrt(2 * math.pi), rel=1e-9)
    assert derivative_bound_check(smoothness_curves(identity(), 2.0, T)).sup_second == 0.0
    assert derivative_bound_check(smoothness_curves(quadratic(), 2.0, T)).finite


def test_h_curves():
    t, m2, m4 = h_moment_curves(binary(), BM, 4.0, T)
    np.testing.assert_allclose(m2, t / (2 * np.pi * (1 - t) ** 1.5 * (1 + t) ** 1.5), rtol=1e-8, atol=1e-12)
    assert np.all(m4 >= m2 * (1 - 1e-12))
    _, sup = h_norm_curve(quadratic(), BM, math.inf, T)
    np.testing.assert_allclose(sup, 2.0)


def test_riemann_liouville_exact_cases():
    q = riemann_liouville_norm(quadratic(), BM, 1.0, 3.0, 2000)
    assert q.value == pytest.approx(2.0, rel=1e-12) and not q.divergent
    z = riemann_liouville_norm(identity(), BM, 0.5, 2.0, 500)
    assert z.value == 0.0


def test_riemann_liouville_binary_dichotomy():
    c = smoothness_curves(binary(), 2.0, T)
    for theta in (0.3, 0.7):
        rl = riemann_liouville_norm(binary(), BM, theta, 2.0, 4000, seed=2)
        assert rl.divergent == (theta > 0.5) == besov_proxy_norm(c, theta, 2.0, 2).divergent
        assert rl.raw_value is not None and np.isfinite(rl.raw_value)
        if rl.divergent:
            assert math.isinf(rl.value)


def test_riemann_liouville_mean_square_matches_integral():
    # E D^2 = int (1-u)^(1-theta) E H^2 du, by quadrature of the closed form
    theta = 0.3
    want = integrate.quad(lambda u: (1 - u) ** (1 - theta) * u / (2 * np.pi * (1 - u) ** 1.5 * (1 + u) ** 1.5), 0, 1)[0]
    rl = riemann_liouville_norm(binary(), BM, theta, 2.0, 50_000, seed=3)
    assert abs(rl.value - math.sqrt(want)) < 4 * rl.std_err


@pytest.mark.parametrize("p", [3.0, 4.0])
def test_rl_finiteness_implies_sup_proxy_finite(p):
    c = smoothness_curves(binary(), p, default_t_grid(401))
    for theta in (0.1, 0.2, 0.3, 0.4, 0.6, 0.8):
        rl = riemann_liouville_norm(binary(), BM, theta, p, 1000, seed=1)
        if not rl.divergent and rl.finite_certified:
            assert not besov_proxy_norm(c, theta, math.inf, 0).divergent


def test_curves_csv(binary_curve):
    lines = curves_csv(binary_curve).splitlines()
    assert lines[0] == "payoff,p,t,d0,d1,d2,method,d0_std_err,d1_std_err,d2_std_err"
    assert len(lines) == T.size + 1


def test_bad_inputs():
    with pytest.raises(ValueError):
        smoothness_curves(binary(), 2.0, np.array([0.5, 1.0]))
    with pytest.raises(ValueError):
        riemann_liouville_norm(binary(), BM, 0.0, 2.0, 10)
    with pytest.raises(ValueError):
        fit_theta(smoothness_curves(binary(), 2.0, np.linspace(0, 0.5, 10)))
