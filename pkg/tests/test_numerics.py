import math
import threading
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doubleseries.numerics import (
    BLOCK,
    PowerSumCache,
    compensated_sum,
    extrapolate_limit,
    power_sum,
    power_sums,
    prefix_sums,
    scaled_power_sum,
    trend_of,
)


def test_compensated_sum_cancellation():
    assert compensated_sum([1e16, 1.0, -1e16]) == 1.0


def test_compensated_sum_empty_is_zero():
    assert compensated_sum([]) == 0.0


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_compensated_sum_rejects_nonfinite_with_index(bad):
    with pytest.raises(ValueError, match="index 2"):
        compensated_sum([1.0, 2.0, bad, 3.0])


@given(st.lists(st.floats(-1e12, 1e12, allow_nan=False), max_size=60))
def test_compensated_sum_matches_exact_rational_sum(xs):
    exact = float(sum((Fraction(x) for x in xs), Fraction(0)))
    assert compensated_sum(xs) == exact


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40), st.randoms())
def test_compensated_sum_order_independent(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert compensated_sum(xs) == compensated_sum(ys)


def test_power_sum_examples():
    assert power_sum(2, -0.5) == pytest.approx(1 + 2**-0.5, rel=1e-15)
    assert power_sum(1, 7.3) == 1.0
    assert power_sum(10, 1.0) == 55.0
    assert power_sum(100, 2.0) == 338350.0


def test_power_sum_rejects_bad_n():
    with pytest.raises(ValueError):
        power_sum(0, 1.0)
    with pytest.raises(ValueError):
        power_sums(0, 1.0)


@pytest.mark.parametrize("r", [-0.75, -0.5, 0.25, 0.5, 1.5, 2.5])
def test_power_sum_matches_mpmath(r):
    n = 3000
    mpmath.mp.dps = 40
    exact = mpmath.fsum(mpmath.mpf(i) ** mpmath.mpf(r) for i in range(1, n + 1))
    assert power_sum(n, r) == pytest.approx(float(exact), rel=2e-15)


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_power_sum_integer_exponents_exact(r):
    for n in (1, 7, 255, 256, 257, 1000):
        assert power_sum(n, float(r)) == sum(i**r for i in range(1, n + 1))


def test_prefix_sums_growth_bit_identical():
    # growing the cache in several uneven steps gives the same bits as one pass
    r = 0.3731
    one = PowerSumCache(r).partials(5000).copy()
    c = PowerSumCache(r)
    for n in (1, 3, 300, 1024, 1025, 4999, 5000):
        c.partials(n)
    assert np.array_equal(c.partials(5000), one)


@settings(max_examples=30)
@given(st.lists(st.integers(1, 3 * BLOCK), min_size=1, max_size=6))
def test_prefix_sums_independent_of_growth_schedule(steps):
    r = -0.4
    ref = PowerSumCache(r).partials(sum(steps) + 1).copy()
    c = PowerSumCache(r)
    total = 0
    for s in steps:
        total += s
        c.partials(total)
    c.partials(sum(steps) + 1)
    assert np.array_equal(c.partials(sum(steps) + 1), ref)


def test_prefix_sums_agree_with_fsum_prefixes():
    rng = np.random.default_rng(1)
    t = rng.standard_normal(2000) * 1e3
    p = prefix_sums(t)
    for j in (0, 10, 255, 256, 1999):
        assert p[j] == pytest.approx(math.fsum(t[: j + 1]), rel=1e-13, abs=1e-9)


def test_cache_concurrent_growth_is_consistent():
    r = 1.37
    ref = PowerSumCache(r).partials(40000).copy()
    c = PowerSumCache(r)
    out = []

    def work(n):
        out.append(np.array(c.partials(n)))

    threads = [threading.Thread(target=work, args=(n,)) for n in (1000, 40000, 7, 20000, 39999)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for arr in out:
        assert np.array_equal(arr, ref[: arr.size])


def test_cache_view_is_read_only():
    v = power_sums(10, 0.5)
    with pytest.raises(ValueError):
        v[0] = 2.0


def test_scaled_power_sum_direct_and_log_paths():
    assert scaled_power_sum(4, 4, 1.0) == pytest.approx(10 / 4)
    # m**-r overflows a double, the log form does not
    v = scaled_power_sum(400, 400, 120.0)
    mpmath.mp.dps = 30
    exact = mpmath.fsum((mpmath.mpf(i) / 400) ** 120 for i in range(1, 401))
    assert v == pytest.approx(float(exact), rel=1e-12)


def test_scaled_power_sum_overflow_names_parameters():
    with pytest.raises(OverflowError, match="n=3.*m=2.*r=2000"):
        scaled_power_sum(3, 2, 2000.0)


def test_extrapolate_increasing_algebraic():
    trace = [(m, 2.0 - 0.5 * m**-0.5) for m in (10, 100, 1000, 10000)]
    est = extrapolate_limit(trace)
    assert est.trend == "increasing"
    assert est.point_estimate == pytest.approx(2.0, abs=1e-9)
    assert est.theta == pytest.approx(0.5, rel=1e-6)


def test_extrapolate_decreasing():
    trace = [(m, 2.0 + 3.0 / m) for m in (1, 10, 100, 1000)]
    est = extrapolate_limit(trace)
    assert est.trend == "decreasing"
    assert est.point_estimate == pytest.approx(2.0, abs=1e-9)


def test_extrapolate_constant_is_nonmonotone():
    est = extrapolate_limit([(1, 5.0), (2, 5.0), (3, 5.0)])
    assert est.trend == "nonmonotone"
    assert est.point_estimate == 5.0


def test_extrapolate_validation():
    with pytest.raises(ValueError):
        extrapolate_limit([(1, 1.0), (2, 2.0)])
    with pytest.raises(ValueError):
        extrapolate_limit([(1, 1.0), (3, 2.0), (2, 2.5)])


def test_trend_of():
    assert trend_of([1, 2, 2, 3]) == "increasing"
    assert trend_of([3, 2, 2]) == "decreasing"
    assert trend_of([1, 2, 1]) == "nonmonotone"
    assert trend_of([4]) == "nonmonotone"
