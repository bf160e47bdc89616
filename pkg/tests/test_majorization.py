import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from doubleseries.errors import DomainError
from doubleseries.majorization import (
    DecreasingVector,
    default_convex_family,
    expected_direction,
    is_majorized,
    monotone_average,
    monotone_average_scan,
    principle_check,
    section4_majorization,
    section4_margin,
    section4_vectors,
)


def test_decreasing_vector_validation():
    with pytest.raises(DomainError, match="increase at index 1"):
        DecreasingVector([0.5, 0.6])
    with pytest.raises(DomainError):
        DecreasingVector([1.0, 0.0])
    with pytest.raises(DomainError):
        DecreasingVector([])
    # rounding-level rises are tolerated
    DecreasingVector([1.0, 1.0 + 1e-16])


def test_is_majorized_examples():
    assert is_majorized([0.5, 0.5], [0.9, 0.1])
    assert is_majorized([0.9, 0.1], [0.9, 0.1])
    assert not is_majorized([0.9, 0.1], [0.5, 0.5])
    assert not is_majorized([0.5, 0.5], [0.9, 0.2])  # totals differ
    with pytest.raises(DomainError, match="length mismatch"):
        is_majorized([1.0], [0.5, 0.5])


def test_principle_examples():
    x, y = section4_vectors("thm4.3", 1, 0.5, 2)
    assert x.entries.tolist() == [0.5, 0.5]
    assert y.entries == pytest.approx([math.sqrt(0.5), 1 - math.sqrt(0.5)], rel=1e-14)
    rep = principle_check(x, y, ["neg_power:0.5", "square", "linear"])
    rows = {r.tag: r for r in rep.rows}
    assert rows["neg_power:0.5"].sum_fx == pytest.approx(-math.sqrt(2), rel=1e-15)
    # direct evaluation: -(sqrt(0.70711) + sqrt(0.29289))
    assert rows["neg_power:0.5"].sum_fy == pytest.approx(-1.3820925154, rel=1e-10)
    assert rows["linear"].margin == 0.0
    assert rows["square"].sum_fy == pytest.approx(0.5857864376, rel=1e-10)
    assert rep.passed


def test_principle_needs_majorization():
    with pytest.raises(DomainError):
        principle_check([0.9, 0.1], [0.5, 0.5])


def test_principle_unknown_tag():
    with pytest.raises(DomainError):
        principle_check([0.5, 0.5], [0.9, 0.1], ["cosh"])


def _averaged(y, rng):
    # x = P y for a doubly stochastic P gives x majorized by y
    n = y.size
    w = rng.random((n, n))
    for _ in range(200):
        w /= w.sum(axis=1, keepdims=True)
        w /= w.sum(axis=0, keepdims=True)
    x = np.sort(w @ y)[::-1]
    return x * (y.sum() / x.sum())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 12))
def test_principle_on_random_majorized_pairs(seed, n):
    rng = np.random.default_rng(seed)
    y = np.sort(rng.exponential(1.0, n) + 1e-3)[::-1]
    x = _averaged(y, rng)
    assert is_majorized(x, y, tol=1e-9)
    assume(is_majorized(x, y))
    assert principle_check(x, y).passed


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 10))
def test_majorization_transitive(seed, n):
    rng = np.random.default_rng(seed)
    z = np.sort(rng.exponential(1.0, n) + 1e-3)[::-1]
    y = _averaged(z, rng)
    x = _averaged(y, rng)
    if is_majorized(x, y, 1e-9) and is_majorized(y, z, 1e-9):
        assert is_majorized(x, z, 1e-9)


def test_thm45_vectors_example():
    x, y = section4_vectors("thm4.5", 1, 0.5, 3)
    assert x.entries == pytest.approx([1 / 3] * 3, rel=1e-15)
    k = np.arange(1, 4.0) ** -0.5
    assert y.entries == pytest.approx(k / k.sum(), rel=1e-15)
    assert section4_majorization("thm4.5", 1, 0.5, 3)


def test_section4_parameter_errors():
    with pytest.raises(DomainError):
        section4_vectors("thm4.3", 0.5, 1.0, 3)
    with pytest.raises(DomainError):
        section4_vectors("thm4.5", 1.5, 0.5, 3)
    with pytest.raises(DomainError):
        section4_vectors("thm4.4", 1, 0.5, 3)
    with pytest.raises(DomainError):
        section4_vectors("thm4.3", 1, 0.5, 0)


@pytest.mark.parametrize("a,b", [(1, 0.5), (0.75, 0.25), (0.5, 0.25), (1, 0.95)])
def test_thm43_majorization_grid(a, b):
    for n in range(1, 301):
        gap, total = section4_margin("thm4.3", a, b, n)
        assert gap >= -1e-12 and total <= 1e-12


@pytest.mark.parametrize("r,s", [(1, 0.5), (0.5, 0), (1, -1), (0.25, -0.75)])
def test_thm45_majorization_grid(r, s):
    assert all(section4_majorization("thm4.5", r, s, n) for n in range(1, 301))


def test_default_family_contents():
    fam = default_convex_family()
    assert "square" in fam and "linear" in fam
    assert sum(t.startswith("hinge:") for t in fam) == 9


def test_monotone_average_examples():
    assert monotone_average("power:1", 1) == 1.0
    assert monotone_average("power:1", 2) == 0.75
    assert monotone_average("power:0", 17) == 1.0
    assert monotone_average("power:-0.5", 2) == pytest.approx((math.sqrt(2) + 1) / 2, rel=1e-15)


def test_monotone_average_directions():
    assert expected_direction("power:2") == "decreasing"
    assert expected_direction("power:-0.3") == "increasing"
    assert expected_direction("power:0") == "constant"
    with pytest.raises(DomainError):
        expected_direction("exp:1")
    with pytest.raises(DomainError):
        expected_direction("power:-1.5")


@pytest.mark.parametrize("e", [0, 0.25, 1, 2.5, -0.25, -0.5, -0.9])
def test_monotone_average_scan(e):
    assert monotone_average_scan(f"power:{e}", 1000).passed
