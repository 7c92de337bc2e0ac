import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma

from fracnet.quadrature import (
    HARDY_FAMILY,
    KernelSums,
    WeightedCurve,
    fit_tail_exponent,
    hardy_check,
    hardy_constant,
    horizon_integrals,
    kernel_interval_integral,
    net_kernel_equivalence_check,
    net_kernel_sums,
    u_grid,
    weighted_q_norm,
)


def power(a, b=0.0):
    return WeightedCurve.from_function(lambda t: (1 - t) ** a * np.log(1 / (1 - t)) ** b if b else (1 - t) ** a)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(1.0, 6.0))
def test_weighted_norm_of_power(a, q):
    # int_0^1 (1-t)^(aq) dt/(1-t) = 1/(aq)
    r = weighted_q_norm(power(a), q)
    assert not r.divergent
    assert r.value == pytest.approx((1 / (a * q)) ** (1 / q), rel=1e-6)


@pytest.mark.parametrize("a,b,q", [(0.5, 1.0, 2.0), (0.25, 0.5, 1.0), (1.0, 2.0, 3.0)])
def test_weighted_norm_log_corrected(a, b, q):
    # int s^(aq-1) log(1/s)^(bq) ds = Gamma(bq+1) / (aq)^(bq+1)
    want = (gamma(b * q + 1) / (a * q) ** (b * q + 1)) ** (1 / q)
    assert weighted_q_norm(power(a, b), q).value == pytest.approx(want, rel=1e-5)


@pytest.mark.parametrize("a", [0.0, -0.2, -1.0])
def test_weighted_norm_divergent(a):
    for q in (1.0, 2.0):
        r = weighted_q_norm(power(a), q)
        assert r.divergent and math.isinf(r.value)


def test_sup_norm():
    assert weighted_q_norm(WeightedCurve.from_function(lambda t: 0.5 * (1 - t) ** 0.25), math.inf).value == 0.5
    assert weighted_q_norm(power(-0.3), math.inf).divergent
    assert weighted_q_norm(power(0.0, 1.0), math.inf).divergent
    assert not weighted_q_norm(power(0.0), math.inf).divergent


def test_curve_validation():
    with pytest.raises(ValueError):
        WeightedCurve(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        WeightedCurve(np.array([0.0, 0.5]), np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        weighted_q_norm(power(1.0), 0.5)
    t = u_grid(11, 1e-4)
    assert t[0] == 0 and t[-1] == pytest.approx(1 - 1e-4)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.5, 2.0), st.floats(0.0, 2.0))
def test_tail_fit_recovers_planted_exponent(a, b):
    t = u_grid(2001)
    s = 1 - t
    fit = fit_tail_exponent(t, 3.0 * s**a * np.log(1 / s) ** b)
    assert fit.a == pytest.approx(a, abs=1e-6)
    assert fit.b == pytest.approx(b, abs=1e-6)


def test_kernel_interval_integral_before_horizon():
    t = np.linspace(0.2, 0.6, 101)
    # int_a^b (b - t) dt = (b - a)^2 / 2
    assert kernel_interval_integral(np.ones_like(t), t, 0.6) == pytest.approx(0.08, rel=1e-12)
    with pytest.raises(ValueError):
        kernel_interval_integral(np.ones(3), np.array([0.1, 0.2, 0.3]), 0.5)


@pytest.mark.parametrize("c", [0.0, 0.5, 1.2, 1.9])
def test_kernel_interval_integral_at_horizon_is_exact_for_powers(c):
    # int_a^1 (1 - t)^(1 - c) dt = (1 - a)^(2 - c) / (2 - c), even from a handful of samples
    t = np.array([0.5, 0.8, 0.95, 0.999])
    got = kernel_interval_integral((1 - t) ** -c, t, 1.0)
    assert got == pytest.approx(0.5 ** (2 - c) / (2 - c), rel=1e-12)


def test_kernel_interval_integral_non_integrable_raises():
    t = np.array([0.5, 0.9, 0.99])
    with pytest.raises(ArithmeticError):
        kernel_interval_integral((1 - t) ** -2.5, t, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.95, 1.0), st.floats(0.0, 1.0))
def test_horizon_integrals_power(c, e):
    # c + e > -1 keeps the integrand integrable
    t = np.concatenate([1 - np.geomspace(1, 1e-6, 800), [1.0]])
    h = np.append((1 - t[:-1]) ** c, np.inf)[None, :]
    vals, fails = horizon_integrals(h, t, e)
    assert fails == 0
    assert vals[0] == pytest.approx(1 / (c + e + 1), rel=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 79), min_size=1, max_size=6, unique=True), st.integers(0, 1000))
def test_kernel_sums_match_direct_trapezoid(inner, seed):
    rng = np.random.default_rng(seed)
    t = np.concatenate([np.linspace(0, 0.9, 61), 1 - np.geomspace(0.09, 1e-5, 20)])
    amp = rng.uniform(0.5, 2.0, size=(2, 1))
    h = amp * (1 + t) * (1 - t) ** -0.7
    idx = np.array(sorted({0, *inner, t.size}))
    got, fails = net_kernel_sums(np.append(h, np.full((2, 1), np.inf), axis=1), np.append(t, 1.0), idx)
    assert fails == 0
    for p in range(2):
        want = 0.0
        for lo, hi in zip(idx[:-1], idx[1:]):
            right = 1.0 if hi == t.size else t[hi]
            stop = min(hi, t.size - 1)
            want += integrate.trapezoid((right - t[lo : stop + 1]) * h[p, lo : stop + 1], t[lo : stop + 1])
        # remainder beyond the last sample: power law through the last two samples
        s1, s0 = 1 - t[-1], 1 - t[-2]
        a = math.log(h[p, -1] / h[p, -2]) / math.log(s1 / s0)
        want += h[p, -1] * s1**2 / (a + 2)
        assert got[p] == pytest.approx(want, rel=1e-12)


def test_kernel_sums_per_path_nets():
    t = np.linspace(0, 1, 9)
    h = np.ones((2, 9))
    ks = KernelSums(h, t)
    got, _ = ks(np.array([[0, 4, 8], [0, 2, 8]]))
    # h = 1: sum of squared intervals over 2
    np.testing.assert_allclose(got, [0.25, 0.0625 / 2 + 0.5625 / 2], rtol=1e-12)


@pytest.mark.parametrize("theta", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("q", [1.0, 2.0, 4.0, math.inf])
def test_hardy_family(theta, q):
    for name, fn, mono in HARDY_FAMILY:
        if q < 2 and not mono:
            continue
        assert hardy_check(fn, theta, q).holds, name


@pytest.mark.parametrize("theta,c", [(0.3, 0.2), (0.7, 0.5), (0.5, 0.0)])
def test_hardy_sides_match_independent_quadrature(theta, c):
    # phi = (1-t)^(-c): both sides by scipy.quad, q = 2
    def inner(t):
        return integrate.quad(lambda r: (1 - r) ** (-2 * c), 0, t)[0]

    lhs2 = integrate.quad(lambda t: (1 - t) ** (-theta) * inner(t), 0, 1, limit=200)[0]
    rhs2 = integrate.quad(lambda t: (1 - t) ** (1 - theta - 2 * c), 0, 1)[0]
    rep = hardy_check(lambda t: (1 - t) ** -c, theta, 2.0)
    assert rep.lhs.value == pytest.approx(math.sqrt(lhs2), rel=1e-4)
    assert rep.rhs.value == pytest.approx(math.sqrt(rhs2), rel=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]), st.floats(0.0, 0.6))
def test_hardy_holds_for_increasing_powers(theta, q, c):
    assert hardy_check(lambda t: (1 - t) ** -c, theta, q, n=4001).holds


def test_hardy_constant_and_preconditions():
    assert hardy_constant(0.5, 2.0) == pytest.approx(math.sqrt(2))
    assert hardy_constant(0.5, 1.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        hardy_check(lambda t: 1 - t, 0.5, 1.0)
    with pytest.raises(ValueError):
        hardy_check(lambda t: np.ones_like(t), 1.0, 2.0)


def test_net_kernel_equivalence():
    # (1-u)^(theta-1): weighted integral finite, scaled sums bounded
    r = net_kernel_equivalence_check(lambda u: (1 - u) ** (0.5 - 1), 0.5)
    assert r.sums_bounded and r.consistent and not r.weighted_integral.divergent
    # phi = 1 with theta = 1: n sum (1/n)^2 / 2 = 1/2
    r = net_kernel_equivalence_check(lambda u: np.ones_like(np.asarray(u, dtype=float)), 1.0)
    np.testing.assert_allclose(r.scaled_sums, 0.5, rtol=1e-12)
    # 1/(1-u) with theta = 1 diverges on both sides
    r = net_kernel_equivalence_check(lambda u: 1 / (1 - u), 1.0, (4, 16, 64, 256, 1024))
    assert not r.sums_bounded and r.weighted_integral.divergent and r.consistent
