import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doubleseries.errors import DomainError
from doubleseries.families import (
    DISTRIBUTIONS,
    GE,
    LE,
    VERIFY_GRID,
    Family,
    FiniteSequence,
    Params,
    check_monotone_hypothesis,
    claimed_constant,
    custom_instance,
    lhs_value,
    make_instance,
    parse_family,
    random_sequence,
    rhs_value,
)


def S(n, e):
    return math.fsum(i**e for i in range(1, n + 1))


# closed-form coefficients written out independently of the library
def coeffs(family, P):
    p = P.p
    if family == "thm4.1":
        r, s = P.r, P.s
        return (lambda n, k: n**-r * k ** (r - 1), lambda n: n**-s, lambda k: k ** (s - 1))
    if family == "thm4.2":
        r, s = P.r, P.s
        return (lambda n, k: n**-r * (k + 1) ** (r - 1), lambda n: n**-s, lambda k: (k + 1) ** (s - 1))
    if family == "cor4.1":
        a, b = P.alpha, P.beta
        return (
            lambda n, k: n**-a * ((k + 1) ** a - k**a),
            lambda n: n**-b,
            lambda k: (k + 1) ** b - k**b,
        )
    if family == "cor4.2":
        a = P.alpha
        return (lambda n, k: n**-a * ((k + 1) ** a - k**a), lambda n: 1.0, lambda k: math.log(1 + 1 / k))
    if family == "cor4.3":
        a = P.alpha
        return (lambda n, k: n**-a * ((k + 1) ** a - k**a), lambda n: 1.0, lambda k: 1 / k)
    if family == "thm4.3":
        a, b = P.alpha, P.beta
        return (
            lambda n, k: k**-b * (n**b - (n - 1) ** b),
            lambda n: n**a - (n - 1) ** a,
            lambda k: k**-a,
        )
    if family == "thm4.4":
        r, s = P.r, P.s
        return (lambda n, k: k ** (r - 1) / S(n, r - 1), lambda n: 1 / S(n, s - 1), lambda k: k ** (s - 1))
    if family == "thm4.5":
        r, s = P.r, P.s
        return (lambda n, k: n ** (s - 1) / S(k, s - 1), lambda n: n ** (r - 1), lambda k: 1 / S(k, r - 1))
    raise KeyError(family)


def brute_sides(family, P, x):
    a, b, c = coeffs(family, P)
    p = P.p
    N = len(x)
    mat = math.fsum(math.fsum(a(n, k) * x[k - 1] for k in range(n, N + 1)) ** p for n in range(1, N + 1))
    wtd = math.fsum((b(n) * math.fsum(c(k) * x[k - 1] for k in range(n, N + 1))) ** p for n in range(1, N + 1))
    return mat, wtd


ALIAS = {
    Family.THM_4_1: "thm4.1", Family.THM_4_2: "thm4.2", Family.COR_4_1: "cor4.1",
    Family.COR_4_2: "cor4.2", Family.COR_4_3: "cor4.3", Family.THM_4_3: "thm4.3",
    Family.THM_4_4: "thm4.4", Family.THM_4_5: "thm4.5",
}
GRID_POINTS = [(ALIAS[f], P) for f, ps in VERIFY_GRID.items() for P in ps]


def test_parse_family_aliases_and_canonical():
    assert parse_family("thm4.1") is Family.THM_4_1
    assert parse_family("thm_4_1") is Family.THM_4_1
    assert parse_family("hardy1.1") is Family.CLASSICAL_HARDY
    with pytest.raises(DomainError, match="unknown family"):
        parse_family("thm9.9")


def test_params_validation():
    with pytest.raises(DomainError):
        Params(p=-1)
    with pytest.raises(DomainError):
        Params(p=0.5, r=math.nan)
    assert Params(p=1, r=2).r == 2.0


@pytest.mark.parametrize(
    "family,kw,predicate",
    [
        ("thm4.1", dict(p=0.5, r=0, s=1), "s < r < 1/p"),
        ("thm4.1", dict(p=0.5, r=2.5, s=0), "s < r < 1/p"),
        ("thm4.1", dict(p=1.5, r=0.5, s=0), "0 < p < 1"),
        ("cor4.1", dict(p=0.5, alpha=1, beta=1.5), "0 < beta < alpha < 1/p"),
        ("cor4.2", dict(p=0.5, alpha=2.5), "0 < alpha < 1/p"),
        ("thm4.3", dict(p=0.5, alpha=1.5, beta=0.5), "0 < beta < alpha <= 1"),
        ("thm4.4", dict(p=0.5, r=1, s=0.5), "1 <= s < r < 1/p"),
        ("thm4.5", dict(p=0.5, r=1.5, s=0.5), "s < r <= 1"),
        ("hardy1.1", dict(p=0.5), "p > 1"),
    ],
)
def test_domain_errors_name_the_predicate(family, kw, predicate):
    with pytest.raises(DomainError, match=predicate.replace("/", ".")):
        make_instance(family, **kw)


def test_missing_and_mismatched_parameters():
    with pytest.raises(DomainError, match="needs parameter"):
        make_instance("thm4.1", p=0.5, r=1)
    with pytest.raises(DomainError, match="q = p"):
        make_instance("thm4.1", p=0.5, q=0.7, r=1, s=0)


def test_relaxed_allows_boundary_identity():
    inst = make_instance("thm4.1", p=0.5, r=0.5, s=0.5, relaxed=True)
    x = [1.0, 2.0, 0.5]
    assert lhs_value(inst, x) == pytest.approx(rhs_value(inst, x), rel=1e-14)


@pytest.mark.parametrize(
    "family,kw,expected",
    [
        ("thm4.1", dict(p=0.5, r=1, s=0), 2.0),
        ("thm4.2", dict(p=0.5, r=-2, s=-4), 2.0),
        ("thm4.2", dict(p=0.5, r=1, s=0.5), (1 - 0.25) / (1 - 0.5)),
        ("cor4.1", dict(p=0.5, alpha=1.5, beta=1), 2 * math.sqrt(1.5)),
        ("cor4.2", dict(p=0.5, alpha=0.5), math.sqrt(0.5) / 0.75),
        ("cor4.3", dict(p=0.5, alpha=1.5), math.sqrt(1.5) / 0.25),
        ("thm4.3", dict(p=0.5, alpha=1, beta=0.5), 1.0),
        ("thm4.4", dict(p=0.5, r=1.5, s=1), 2 * math.sqrt(1.5)),
        ("thm4.5", dict(p=0.5, r=1, s=0.5), 1.0),
        ("hardy1.1", dict(p=2), 4.0),
        ("hardy1.1", dict(p=3), 1.5**3),
    ],
)
def test_claimed_constants(family, kw, expected):
    assert claimed_constant(make_instance(family, **kw)) == pytest.approx(expected, rel=1e-15)


def test_thm42_uncovered_region_is_rejected():
    inst = make_instance("thm4.2", p=0.5, r=0.5, s=-1)
    with pytest.raises(DomainError, match="not covered"):
        claimed_constant(inst)


def test_lambda_form_has_no_closed_constant():
    inst = make_instance("lambda1.3", p=0.5, alpha=0.0)
    assert inst.direction == GE
    with pytest.raises(DomainError):
        claimed_constant(inst)


@pytest.mark.parametrize("family,P", GRID_POINTS, ids=[f"{f}-{i}" for i, (f, _) in enumerate(GRID_POINTS)])
def test_sides_match_brute_force(family, P):
    inst = make_instance(family, P)
    rng = np.random.default_rng(3)
    for _ in range(3):
        x = rng.exponential(1.0, size=int(rng.integers(1, 12)))
        x[rng.random(x.size) < 0.3] = 0.0
        mat, wtd = brute_sides(family, P, x.tolist())
        assert inst.direction == LE and inst.left == "matrix"
        assert lhs_value(inst, x) == pytest.approx(mat, rel=1e-12, abs=1e-300)
        assert rhs_value(inst, x) == pytest.approx(wtd, rel=1e-12, abs=1e-300)


def test_unit_vector_example_thm41():
    inst = make_instance("thm4.1", p=0.5, r=1, s=0)
    e2 = FiniteSequence.unit(2)
    assert lhs_value(inst, e2) == pytest.approx(1 + math.sqrt(0.5), rel=1e-15)
    assert rhs_value(inst, e2) == pytest.approx(math.sqrt(2.0), rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=15),
    st.floats(0.01, 100),
)
def test_sides_are_homogeneous(xs, t):
    inst = make_instance("thm4.4", p=0.5, r=1.5, s=1)
    x = FiniteSequence(xs)
    assert lhs_value(inst, x.scaled(t)) == pytest.approx(t**0.5 * lhs_value(inst, x), rel=1e-11, abs=1e-300)
    assert rhs_value(inst, x.scaled(t)) == pytest.approx(t**0.5 * rhs_value(inst, x), rel=1e-11, abs=1e-300)


def test_zero_sequence():
    inst = make_instance("thm4.1", p=0.5, r=1, s=0)
    assert lhs_value(inst, FiniteSequence.zeros(5)) == 0.0
    assert rhs_value(inst, FiniteSequence.zeros(5)) == 0.0


def test_sequence_validation():
    with pytest.raises(ValueError, match="index 1"):
        FiniteSequence([1.0, -2.0])
    with pytest.raises(ValueError):
        FiniteSequence([math.inf])
    with pytest.raises(ValueError):
        FiniteSequence.unit(0)
    assert FiniteSequence([1.0]).padded(4).entries.tolist() == [1.0, 0.0, 0.0, 0.0]


@pytest.mark.parametrize("family,P", GRID_POINTS, ids=[f"{f}-{i}" for i, (f, _) in enumerate(GRID_POINTS)])
def test_monotone_hypothesis_holds_on_documented_grid(family, P):
    assert check_monotone_hypothesis(make_instance(family, P), 300).passed


def test_monotone_hypothesis_reports_first_violation():
    inst = custom_instance(
        kernel=lambda n, k: 1.0 / k,
        row_weight=lambda n: np.ones_like(n),
        col_weight=lambda k: np.ones_like(k),
        p=0.5,
    )
    rep = check_monotone_hypothesis(inst, 10)
    assert not rep.passed
    assert rep.first_violation == (1, 2)


def test_hardy_sides_with_tail_bound():
    inst = make_instance("hardy1.1", p=2)
    x = [1.0, 0.0, 0.0]
    lhs = lhs_value(inst, x, n_truncate=1000)
    # true value: sum_{n>=1} 1/n^2 = pi^2/6; the tail bound is 1/T
    body = math.fsum(1.0 / n**2 for n in range(1, 1001))
    assert lhs == pytest.approx(body + 1e-3, rel=1e-14)
    assert lhs >= math.pi**2 / 6
    assert rhs_value(inst, x) == 1.0


@pytest.mark.parametrize("dist", DISTRIBUTIONS)
def test_random_sequence_deterministic(dist):
    a = random_sequence(123, 50, dist)
    b = random_sequence(123, 50, dist)
    assert np.array_equal(a.entries, b.entries)
    assert 1 <= a.support_length <= 50
    assert np.all(a.entries >= 0)


def test_random_sequence_unknown_distribution():
    with pytest.raises(ValueError):
        random_sequence(1, 5, "cauchy")
