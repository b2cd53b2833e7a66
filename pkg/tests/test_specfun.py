import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphere_ot.specfun import (CostFunction, QuadraticCost, comparison_factors, cost, s_fn,
                               sin_power_integral)

mp.mp.dps = 40


def mp_sin_power(m, d):
    # subdivided tanh-sinh: a single panel is inaccurate for high powers at small d
    return mp.quad(lambda s: mp.sin(s) ** m, mp.linspace(0, d, 10))


def mp_cost(n, d):
    d = mp.mpf(d)
    S = (n * mp_sin_power(n - 1, d)) ** (mp.mpf(1) / n)
    return n - (mp.sin(d) / S) ** (n - 1) - (n - 1) * S * mp.cos(d) / mp.sin(d)


@pytest.mark.parametrize("m", range(0, 12))
@pytest.mark.parametrize("d", [1e-6, 1e-3, 0.1, 0.5, math.pi / 4, 0.8, 1.5, 2.5, 3.1, math.pi])
def test_sin_power_integral_matches_quadrature(m, d):
    ref = float(mp_sin_power(m, d))
    assert sin_power_integral(m, d) == pytest.approx(ref, rel=1e-12)


def test_sin_power_integral_examples():
    assert sin_power_integral(0, 1.3) == 1.3
    assert sin_power_integral(1, math.pi) == pytest.approx(2.0, rel=1e-15)
    assert sin_power_integral(2, math.pi / 2) == pytest.approx(math.pi / 4, rel=1e-15)
    assert sin_power_integral(5, 0.0) == 0.0


def test_sin_power_integral_wallis_at_pi():
    # int_0^pi sin^m = sqrt(pi) Gamma((m+1)/2) / Gamma(m/2 + 1)
    for m in range(0, 20):
        ref = math.sqrt(math.pi) * math.gamma((m + 1) / 2) / math.gamma(m / 2 + 1)
        assert sin_power_integral(m, math.pi) == pytest.approx(ref, rel=1e-13)


def test_sin_power_integral_vectorized_matches_scalar():
    d = np.linspace(0, math.pi, 37)
    vec = sin_power_integral(4, d)
    assert vec.shape == d.shape
    np.testing.assert_array_equal(vec, [sin_power_integral(4, x) for x in d])


@pytest.mark.parametrize("m,d", [(-1, 1.0), (1.5, 1.0), (2, -0.1), (2, 3.2), (2, float("nan"))])
def test_sin_power_integral_rejects_bad_input(m, d):
    with pytest.raises(ValueError):
        sin_power_integral(m, d)


def test_s_fn_examples():
    assert s_fn(2, math.pi / 2) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert s_fn(3, math.pi / 2) == pytest.approx((3 * math.pi / 4) ** (1 / 3), rel=1e-15)
    assert s_fn(3, math.pi / 2) == pytest.approx(1.3306700, abs=5e-8)
    assert s_fn(5, 0.0) == 0.0


def test_s2_closed_form():
    d = np.linspace(0, math.pi, 101)
    np.testing.assert_allclose(s_fn(2, d), 2 * np.sin(d / 2), rtol=1e-14, atol=1e-300)


@pytest.mark.parametrize("n", range(2, 11))
def test_s_fn_sandwich(n):
    d = np.arange(1, int(math.pi / 1e-3) + 1) * 1e-3
    s = s_fn(n, d)
    assert np.all(np.sin(d) < s)
    assert np.all(s < d)


@pytest.mark.parametrize("n", [1, 0, 2.5])
def test_dimension_must_be_integer_at_least_two(n):
    with pytest.raises(ValueError):
        s_fn(n, 1.0)
    with pytest.raises(ValueError):
        CostFunction(n)


def test_comparison_factors_examples():
    cf = comparison_factors(2, math.pi / 2)
    assert cf.v == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)
    assert cf.w == pytest.approx(0.0, abs=1e-15)
    assert cf.mu == pytest.approx(1.1283792, abs=5e-8)
    assert comparison_factors(3, math.pi / 2).w == pytest.approx(0.0, abs=1e-15)
    small = comparison_factors(2, 1e-6)
    assert (small.v, small.w, small.mu) == pytest.approx((1.0, 1.0, 1.0), abs=1e-9)


@pytest.mark.parametrize("alpha", [0.0, math.pi, -0.5])
def test_comparison_factors_open_interval(alpha):
    with pytest.raises(ValueError):
        comparison_factors(2, alpha)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 10), a=st.floats(1e-3, math.pi - 1e-3))
def test_comparison_factor_ranges(n, a):
    cf = comparison_factors(n, a)
    assert 0 < cf.v <= 1
    assert cf.mu >= 1 - 1e-15


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 10), d=st.floats(0.01, math.pi - 0.01))
def test_cost_identity(n, d):
    cf = comparison_factors(n, d)
    rhs = n - cf.v * cf.mu ** (-(n - 1)) - cf.mu * cf.v * cf.w
    assert abs(cost(n, d) - rhs) <= 1e-10


def test_cost_examples():
    assert cost(2, 0.0) == 0.0
    assert cost(2, math.pi / 2) == pytest.approx(2 - 1 / math.sqrt(2), rel=1e-14)
    assert cost(2, math.pi) == math.inf
    assert cost(3, 1e-5) == pytest.approx(1e-10, rel=1e-6)


@pytest.mark.parametrize("n", [2, 3, 5, 10])
@pytest.mark.parametrize("d", [1e-4, 1e-3, 0.05, 0.7, 1.6, 2.4, 3.0, 3.14])
def test_cost_matches_extended_precision(n, d):
    assert cost(n, d) == pytest.approx(float(mp_cost(n, d)), rel=1e-9)


@pytest.mark.parametrize("n", [2, 3, 10])
def test_series_branch_close_to_exact_value(n):
    # below the threshold the quadratic is used; its relative error is O(d^2)
    d = 5e-5
    assert cost(n, d) == pytest.approx(float(mp_cost(n, d)), rel=1e-8)


@pytest.mark.parametrize("n", range(2, 11))
def test_small_distance_ratio(n):
    assert abs(cost(n, 1e-2) / ((n - 1) * 5e-5) - 1) <= 1e-3


@pytest.mark.parametrize("n", range(2, 11))
def test_blow_up_near_pi(n):
    d = np.linspace(2.8, math.pi - 1e-9, 4000)
    assert np.all(np.diff(cost(n, d)) > 0)
    assert cost(n, math.pi - 1e-6) > 1e3


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 10), a=st.floats(0, math.pi), b=st.floats(0, math.pi))
def test_cost_nonnegative_and_monotone(n, a, b):
    lo, hi = min(a, b), max(a, b)
    c_lo, c_hi = cost(n, lo), cost(n, hi)
    assert c_lo >= 0
    assert c_lo <= c_hi * (1 + 1e-12)


def test_cost_custom_sentinel_and_tag():
    c = CostFunction(2, infinity_sentinel=1e300)
    assert c(math.pi) == 1e300
    assert c.tag == "c_2"
    np.testing.assert_array_equal(c(np.array([0.0, math.pi])), [0.0, 1e300])


def test_cost_rejects_out_of_range():
    with pytest.raises(ValueError):
        cost(2, 3.5)
    with pytest.raises(ValueError):
        cost(2, -1e-9)


def test_quadratic_cost():
    q = QuadraticCost(3)
    assert q(0.5) == pytest.approx(0.25)
    np.testing.assert_allclose(q(np.array([0.0, 1.0])), [0.0, 1.0])
    assert q.tag == "quad_3"


def test_cost_is_pure():
    d = np.linspace(0, math.pi, 50)
    np.testing.assert_array_equal(cost(4, d), cost(4, d.copy()))
