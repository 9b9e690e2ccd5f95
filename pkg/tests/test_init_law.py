import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.stats import logistic

from rankdiffusion import (
    CoefficientModel,
    LimitLaw,
    compute_gap_rates,
    limit_cdf,
    limit_quantile,
    median_index,
    quantile_stats,
    sample_initial_positions,
)
from rankdiffusion.errors import DomainError, ModelError
from rankdiffusion.init_law import (
    limit_cdf_bisection,
    limit_density,
    limit_quantile_integral,
    mean_abs_deviation_from_median,
    rate_bound_holds,
)
from rankdiffusion.model import TabulatedDriftModel


def exact_rates(mu0, mu1, c, d, n):
    """Gap rates from rational arithmetic, straight from the definition."""
    mu0, mu1, c, d = map(Fraction, (mu0, mu1, c, d))
    mu = [mu0 + mu1 * Fraction(j, n) for j in range(1, n + 1)]
    s2 = [c * Fraction(j, n) + d for j in range(1, n + 1)]
    out = []
    for i in range(1, n):
        gap = sum(mu[:i]) / i - sum(mu[i:]) / (n - i)
        out.append(Fraction(4 * i * (n - i), n) * gap / (s2[i - 1] + s2[i]))
    return out


@pytest.mark.parametrize("n, expected", [(2, 2), (3, 2), (4, 3), (5, 3), (10, 6)])
def test_median_index(n, expected):
    assert median_index(n) == expected


def test_two_particle_rate():
    g = compute_gap_rates(CoefficientModel(0.0, -1.0, 0.0, 1.0), 2)
    assert g.rates.tolist() == [0.5]


def test_stationary_rate_closed_form(stationary):
    assert compute_gap_rates(stationary, 4).rates[1] == 1.0
    for n in (2, 7, 100, 1001):
        i = np.arange(1, n)
        np.testing.assert_allclose(compute_gap_rates(stationary, n).rates, i * (n - i) / n, rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(2, 40),
    st.floats(-2, 2),
    st.floats(-3, -0.1),
    st.floats(-0.5, 2),
    st.floats(0.6, 2),
)
def test_rates_match_rational_oracle(n, mu0, mu1, c, d):
    g = compute_gap_rates(CoefficientModel(mu0, mu1, c, d), n)
    exact = exact_rates(mu0, mu1, c, d, n)
    np.testing.assert_allclose(g.rates, [float(r) for r in exact], rtol=1e-12)
    assert np.all(g.rates > 0)


@pytest.mark.parametrize("mu0", [0.5, 0.3, -1.7, 4.0])
def test_affine_drift_gap_is_half_slope(mu0):
    m = CoefficientModel(mu0, -1.3, 0.0, 1.0)
    for n in list(range(2, 200)) + [1000, 4999, 10_000]:
        np.testing.assert_allclose(compute_gap_rates(m, n).drift_gap, 0.65, rtol=1e-12)


def test_rate_bound_exact_small_sweep():
    for mu1 in (-0.5, -1.0, -2.0):
        for c, d in ((0.0, 1.0), (1.0, 1.0), (-0.5, 1.0), (0.3, 0.7)):
            m = CoefficientModel(0.1, mu1, c, d)
            for n in (2, 3, 10, 257):
                assert rate_bound_holds(m, n).all()
                # float ratio agrees with the exact verdict up to rounding
                g = compute_gap_rates(m, n)
                assert np.all(g.bound_ratio() >= m.omega0 / m.max_sigma2 * (1 - 1e-12))


def test_rate_bound_detects_violation():
    # the inequality is an equality for constant sigma; its exact check must
    # flip when the right-hand side is nudged up
    m = CoefficientModel(0.5, -1.0, 0.0, 1.0)
    assert rate_bound_holds(m, 64).all()
    worse = CoefficientModel(0.5, -1.0, 0.0, 1.0 - 2.0**-40)
    assert rate_bound_holds(worse, 64).all()


def test_rate_bound_needs_affine_model():
    with pytest.raises(ModelError):
        rate_bound_holds(TabulatedDriftModel([1.0, -1.0], 0.0, 1.0), 4)


def test_forced_uniform_two_particles():
    g = compute_gap_rates(CoefficientModel(0.0, -1.0, 0.0, 1.0), 2)
    s = sample_initial_positions(g, uniforms=[math.exp(-1.0)])
    np.testing.assert_allclose(s.positions, [-2.0, 0.0], rtol=1e-15)
    assert s.t == 0.0


def test_forced_zero_gaps(stationary):
    s = sample_initial_positions(compute_gap_rates(stationary, 3), uniforms=[1.0, 1.0])
    assert s.positions.tolist() == [0.0, 0.0, 0.0]


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 300), st.integers(0, 2**32 - 1))
def test_sample_is_ordered_and_pinned(n, seed):
    g = compute_gap_rates(CoefficientModel(0.5, -1.0, 1.0, 1.0), n)
    y = sample_initial_positions(g, np.random.default_rng(seed)).positions
    assert np.all(np.diff(y) >= 0)
    assert y[median_index(n) - 1] == 0.0


def test_gap_means_match_rates(stationary):
    n, reps = 10_000, 1000
    g = compute_gap_rates(stationary, n)
    rng = np.random.default_rng(2024)
    total = np.zeros(n - 1)
    for _ in range(reps):
        total += np.diff(sample_initial_positions(g, rng).positions)
    mean = total / reps
    se = (1.0 / g.rates) / math.sqrt(reps)
    assert np.all(np.abs(mean - 1.0 / g.rates) <= 5 * se)


def brute_quantile_stats(n, u):
    rates = [Fraction(i * (n - i), n) for i in range(1, n)]
    k = math.ceil(Fraction(u) * n)
    mid = median_index(n)
    if u > 0.5:
        idx, sign = range(mid, k), 1
    else:
        idx, sign = range(k, mid), -1
    return sign * sum((1 / rates[i - 1] for i in idx), Fraction(0)), sum((1 / rates[i - 1] ** 2 for i in idx), Fraction(0))


def test_quantile_stats_eight(stationary):
    m, v = quantile_stats(compute_gap_rates(stationary, 8), 0.75)
    assert m == 8 / 15
    assert v == pytest.approx((8 / 15) ** 2, rel=1e-15)


@pytest.mark.parametrize("n", [3, 8, 9, 50, 101])
def test_quantile_stats_against_rationals(stationary, n):
    g = compute_gap_rates(stationary, n)
    for u in (0.01, 0.2, 0.25, 0.5, 0.61, 0.75, 0.99):
        m, v = quantile_stats(g, u)
        bm, bv = brute_quantile_stats(n, u)
        assert m == pytest.approx(float(bm), rel=1e-13, abs=1e-300)
        assert v == pytest.approx(float(bv), rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("n", [10, 11, 100, 1001])
def test_quantile_stats_empty_range(stationary, n):
    g = compute_gap_rates(stationary, n)
    u = 0.5 + 1 / (4 * n)
    assert math.ceil(u * n) - 1 < median_index(n)
    assert quantile_stats(g, u) == (0.0, 0.0)


def test_quantile_stats_monotone_in_u(stationary):
    g = compute_gap_rates(stationary, 500)
    ms = [quantile_stats(g, u)[0] for u in np.linspace(0.001, 0.999, 400)]
    assert np.all(np.diff(ms) >= 0)


def test_quantile_stats_converge(stationary):
    law = LimitLaw(stationary)
    for u in (0.25, 0.75):
        errs = [abs(quantile_stats(compute_gap_rates(stationary, n), u)[0] - limit_quantile(law, u)) for n in (100, 1000, 10_000)]
        assert errs[0] > errs[1] > errs[2]
    m, _ = quantile_stats(compute_gap_rates(stationary, 10_000), 0.75)
    assert abs(m - math.log(3)) <= 0.02


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1])
def test_quantile_stats_domain(stationary, u):
    with pytest.raises(DomainError):
        quantile_stats(compute_gap_rates(stationary, 10), u)


# --- limiting law ----------------------------------------------------------


def test_limit_quantile_examples(stationary):
    law = LimitLaw(CoefficientModel(0.0, -1.0, 0.0, 1.0))
    assert limit_quantile(law, 0.5) == 0.0
    assert limit_quantile(law, 0.75) == pytest.approx(math.log(3), rel=1e-15)
    u = np.arange(1, 10) / 10
    np.testing.assert_allclose(limit_quantile(law, u) + limit_quantile(law, 1 - u), 0.0, atol=1e-14)
    np.testing.assert_allclose(limit_quantile(LimitLaw(stationary), u), logistic.ppf(u), rtol=1e-13, atol=1e-15)


@settings(max_examples=50)
@given(st.floats(0.1, 3), st.floats(-0.9, 3), st.floats(0.2, 3))
def test_limit_quantile_increasing(slope, c, d):
    law = LimitLaw(CoefficientModel(0.0, -slope, c * d, d))
    q = limit_quantile(law, np.linspace(1e-6, 1 - 1e-6, 200))
    assert np.all(np.diff(q) > 0)


def test_limit_cdf_examples():
    law = LimitLaw(CoefficientModel(0.0, -1.0, 0.0, 1.0))
    assert limit_cdf(law, 0.0) == 0.5
    assert limit_cdf(law, math.log(3)) == pytest.approx(0.75, rel=1e-15)
    x = np.linspace(-30, 30, 61)
    np.testing.assert_allclose(limit_cdf(law, x), logistic.cdf(x), rtol=1e-13)


def test_limit_cdf_median_any_model():
    for c, d, s in ((1.0, 1.0, 1.0), (-0.5, 1.0, 2.0), (2.0, 0.3, 0.5)):
        assert limit_cdf(LimitLaw(CoefficientModel(0.0, -s, c, d)), 0.0) == pytest.approx(0.5, abs=1e-15)


def test_limit_cdf_round_trip():
    law = LimitLaw(CoefficientModel(0.0, -1.0, 1.0, 1.0))
    u = np.arange(1, 20) / 20
    np.testing.assert_allclose(limit_cdf(law, limit_quantile(law, u)), u, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 3), st.floats(0.2, 3), st.floats(0.1, 3), st.floats(-15, 15))
def test_limit_cdf_against_root_finder(c_ratio, d, slope, x):
    law = LimitLaw(CoefficientModel(0.0, -slope, c_ratio * d, d))
    lo, hi = 1e-300, 1 - 1e-16
    ql, qh = limit_quantile(law, lo), limit_quantile(law, hi)
    if not ql < x < qh:
        return
    ref = brentq(lambda u: limit_quantile(law, u) - x, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=2000)
    assert limit_cdf(law, x) == pytest.approx(ref, rel=1e-9, abs=1e-15)


def test_closed_form_cdf_agrees_with_bisection():
    law = LimitLaw(CoefficientModel(0.5, -1.0, 0.0, 1.0))
    x = np.linspace(-20, 20, 81)
    np.testing.assert_allclose(limit_cdf(law, x), limit_cdf_bisection(law, x), rtol=1e-12)


def test_limit_density():
    law = LimitLaw(CoefficientModel(0.0, -1.0, 0.0, 1.0))
    assert limit_density(law, 0.0) == pytest.approx(0.25, rel=1e-15)
    for m in (CoefficientModel(0.0, -1.0, 1.0, 1.0), CoefficientModel(0.2, -2.0, -0.5, 1.0)):
        law = LimitLaw(m)
        x = np.arange(-2.0, 2.5, 0.5)
        h = 1e-5
        fd = (limit_cdf(law, x + h) - limit_cdf(law, x - h)) / (2 * h)
        np.testing.assert_allclose(limit_density(law, x), fd, atol=1e-6)
        right = limit_density(law, np.linspace(5, 60, 40))
        left = limit_density(law, np.linspace(-60, -5, 40))
        assert np.all(np.diff(right) < 0) and np.all(np.diff(left) > 0)
        assert right[-1] < 1e-12 and left[0] < 1e-12


def test_quantile_integral_is_antiderivative():
    law = LimitLaw(CoefficientModel(0.0, -1.5, 1.0, 0.5))
    u = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (limit_quantile_integral(law, u + h) - limit_quantile_integral(law, u - h)) / (2 * h)
    np.testing.assert_allclose(fd, limit_quantile(law, u), atol=1e-6)


def test_limit_law_needs_affine_model():
    with pytest.raises(ModelError):
        LimitLaw(TabulatedDriftModel([1.0, -1.0], 0.0, 1.0))


# --- spread statistic ------------------------------------------------------


def brute_spread(rates):
    n = len(rates) + 1
    mid = median_index(n)
    total = Fraction(0)
    for i in range(1, n + 1):
        lo, hi = sorted((i, mid))
        total += sum((1 / Fraction(rates[k - 1]) for k in range(lo, hi)), Fraction(0))
    return total / n


def test_spread_two_particles(stationary):
    assert mean_abs_deviation_from_median(compute_gap_rates(stationary, 2)) == 1.0


@pytest.mark.parametrize("n", [3, 4, 17, 60])
def test_spread_against_nested_sums(stationary, n):
    g = compute_gap_rates(stationary, n)
    assert mean_abs_deviation_from_median(g) == pytest.approx(float(brute_spread(g.rates.tolist())), rel=1e-13)


def test_spread_bounded(stationary):
    for n in (100, 1000):
        assert mean_abs_deviation_from_median(compute_gap_rates(stationary, n)) <= 1 + 2 * math.log(3)
