"""Concrete inequality instances, their evaluators and sharp constants.

Every upper-triangular instance compares two sides built on a non-negative
sequence ``x``:

* the *matrix side*   ``sum_n ( sum_{k>=n} a(n,k) x_k )**q``
* the *weighted side* ``sum_n ( b(n) sum_{k>=n} c(k) x_k )**p``

For the applications with ``0 < p < 1`` the matrix side is the one displayed
on the left, and each theorem reads ``matrix side <= K * weighted side``.
Both sides are power sums; no outer roots are taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError
from .numerics import compensated_sum, power_sum_cache, prefix_sums

__all__ = [
    "ALIASES",
    "CONVERGENCE_BUDGET",
    "FiniteSequence",
    "Family",
    "GE",
    "InequalityInstance",
    "LE",
    "MonotoneReport",
    "Params",
    "VERIFY_GRID",
    "check_monotone_hypothesis",
    "claimed_constant",
    "custom_instance",
    "lhs_value",
    "make_instance",
    "parse_family",
    "random_sequence",
    "rhs_value",
]

LE = "lhs_le_K_rhs"
GE = "lhs_ge_K_rhs"


class Family(str, Enum):
    CLASSICAL_HARDY = "classical_hardy_1_1"
    LAMBDA_FORM = "lambda_form_1_3"
    THM_4_1 = "thm_4_1"
    THM_4_2 = "thm_4_2"
    COR_4_1 = "cor_4_1"
    COR_4_2 = "cor_4_2"
    COR_4_3 = "cor_4_3"
    THM_4_3 = "thm_4_3"
    THM_4_4 = "thm_4_4"
    THM_4_5 = "thm_4_5"
    CUSTOM = "custom"


ALIASES = {
    "hardy1.1": Family.CLASSICAL_HARDY,
    "lambda1.3": Family.LAMBDA_FORM,
    "thm4.1": Family.THM_4_1,
    "thm4.2": Family.THM_4_2,
    "cor4.1": Family.COR_4_1,
    "cor4.2": Family.COR_4_2,
    "cor4.3": Family.COR_4_3,
    "thm4.3": Family.THM_4_3,
    "thm4.4": Family.THM_4_4,
    "thm4.5": Family.THM_4_5,
}

# applications whose sides are both upper-triangular product kernels
SECTION4 = frozenset(
    {
        Family.THM_4_1,
        Family.THM_4_2,
        Family.COR_4_1,
        Family.COR_4_2,
        Family.COR_4_3,
        Family.THM_4_3,
        Family.THM_4_4,
        Family.THM_4_5,
    }
)

# Fraction of the sharp constant a scan of the default length must reach.
# The limiting families converge like m**-(1 - r p); these budgets cover the
# documented grids at M = 10**5.  Families attaining their constant at m = 1
# get a rounding-level budget.
CONVERGENCE_BUDGET = {
    Family.THM_4_1: 0.05,
    Family.THM_4_2: 0.05,
    Family.COR_4_1: 0.10,
    Family.COR_4_2: 0.10,
    Family.COR_4_3: 0.10,
    Family.THM_4_3: 1e-12,
    Family.THM_4_4: 0.10,
    Family.THM_4_5: 1e-12,
}


def parse_family(tag) -> Family:
    if isinstance(tag, Family):
        return tag
    tag = str(tag).strip()
    if tag in ALIASES:
        return ALIASES[tag]
    try:
        return Family(tag)
    except ValueError:
        known = ", ".join(sorted(ALIASES) + [f.value for f in Family])
        raise DomainError(f"unknown family {tag!r}; known: {known}") from None


@dataclass(frozen=True)
class Params:
    """Exponents of an instance; ``None`` marks an unused slot."""

    p: float | None = None
    q: float | None = None
    r: float | None = None
    s: float | None = None
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                v = float(v)
                if not math.isfinite(v):
                    raise DomainError(f"parameter {f.name} must be finite, got {v}")
                object.__setattr__(self, f.name, v)
        for name in ("p", "q"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise DomainError(f"{name} must be > 0, got {v}")

    def asdict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class FiniteSequence:
    """Non-negative finitely supported sequence; index 0 holds ``x_1``."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float).ravel()
        if not np.all(np.isfinite(arr)):
            raise ValueError("sequence entries must be finite")
        if np.any(arr < 0):
            idx = int(np.argmax(arr < 0))
            raise ValueError(f"sequence entries must be non-negative (index {idx})")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @classmethod
    def unit(cls, m: int, length: int | None = None) -> FiniteSequence:
        """The coordinate vector ``e^(m)`` (1-based)."""
        if m < 1:
            raise ValueError("unit vectors are indexed from 1")
        arr = np.zeros(max(m, length or 0))
        arr[m - 1] = 1.0
        return cls(arr)

    @classmethod
    def zeros(cls, length: int) -> FiniteSequence:
        return cls(np.zeros(length))

    @property
    def support_length(self) -> int:
        return self.entries.size

    def __len__(self):
        return self.entries.size

    def scaled(self, t: float) -> FiniteSequence:
        return FiniteSequence(self.entries * t)

    def padded(self, length: int) -> FiniteSequence:
        arr = np.zeros(max(length, self.entries.size))
        arr[: self.entries.size] = self.entries
        return FiniteSequence(arr)


Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]
Weight = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class InequalityInstance:
    """A concrete inequality with coefficient generators.

    ``kernel`` is ``a(n, k)``, ``row_weight`` is ``b(n)`` and ``col_weight``
    is ``c(k)``; all take float index arrays and broadcast.  Entries with
    ``k < n`` are masked by the evaluators.  ``matrix_factors`` optionally
    splits ``a(n, k) = row(n) * col(k)`` for the fast unit-vector scan.
    """

    family: Family
    params: Params
    p: float
    q: float
    direction: str
    kernel: Kernel | None
    row_weight: Weight | None
    col_weight: Weight | None
    matrix_factors: tuple[Weight, Weight] | None = None
    left: str = "matrix"
    shape: str = "upper"
    constant: float | None = None
    relaxed: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def left_exponent(self) -> float:
        return self.q if self.left == "matrix" else self.p

    @property
    def right_exponent(self) -> float:
        return self.p if self.left == "matrix" else self.q

    @property
    def side_ratio_exponent(self) -> float:
        """Power applied to the right side when forming ``lhs / rhs**e``."""
        return self.left_exponent / self.right_exponent

    @property
    def is_upper(self) -> bool:
        return self.shape == "upper"

    def label(self) -> str:
        shown = {k: v for k, v in self.params.asdict().items() if v is not None}
        inner = ", ".join(f"{k}={v:g}" for k, v in shown.items())
        return f"{self.family.value}({inner})"


# coefficient building blocks --------------------------------------------------


def _S(n, e):
    """Power sums ``S(n, e)`` at float index arrays."""
    return power_sum_cache(e).at(np.asarray(n).astype(np.int64))


def _pw(x, e):
    return np.power(x, e)


def _fwd_diff(k, a):
    """``(k+1)**a - k**a`` without cancellation for large ``k``."""
    return np.power(k, a) * np.expm1(a * np.log1p(1.0 / k))


def _bwd_diff(n, a):
    """``n**a - (n-1)**a``; exactly 1 at ``n = 1``."""
    n = np.asarray(n, dtype=float)
    safe = np.where(n > 1, n, 2.0)
    out = -np.power(safe, a) * np.expm1(a * np.log1p(-1.0 / safe))
    return np.where(n > 1, out, 1.0)


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=float))


# validity predicates and generators --------------------------------------------


def _need(params: Params, family: Family, *names):
    missing = [n for n in names if getattr(params, n) is None]
    if missing:
        raise DomainError(f"{family.value} needs parameter(s) {', '.join(missing)}")


def _require(cond: bool, family: Family, predicate: str, params: Params):
    if not cond:
        shown = {k: v for k, v in params.asdict().items() if v is not None}
        raise DomainError(f"{family.value} requires {predicate} (got {shown})")


def _check_q(params: Params, family: Family) -> float:
    if params.q is not None and params.q != params.p:
        raise DomainError(f"{family.value} is stated for q = p (got p={params.p}, q={params.q})")
    return params.p


def _build_section4(family: Family, params: Params, relaxed: bool) -> dict:
    _need(params, family, "p")
    p = params.p
    q = _check_q(params, family)
    if not relaxed:
        _require(0 < p < 1, family, "0 < p < 1", params)

    if family in (Family.THM_4_1, Family.THM_4_2):
        _need(params, family, "r", "s")
        r, s = params.r, params.s
        if not relaxed:
            _require(s < r < 1 / p, family, "s < r < 1/p", params)
        if family is Family.THM_4_1:
            gen = dict(
                kernel=lambda n, k: _pw(n, -r) * _pw(k, r - 1),
                matrix_factors=(lambda n: _pw(n, -r), lambda k: _pw(k, r - 1)),
                row_weight=lambda n: _pw(n, -s),
                col_weight=lambda k: _pw(k, s - 1),
            )
        else:
            gen = dict(
                kernel=lambda n, k: _pw(n, -r) * _pw(k + 1, r - 1),
                matrix_factors=(lambda n: _pw(n, -r), lambda k: _pw(k + 1, r - 1)),
                row_weight=lambda n: _pw(n, -s),
                col_weight=lambda k: _pw(k + 1, s - 1),
            )
    elif family is Family.COR_4_1:
        _need(params, family, "alpha", "beta")
        a, b = params.alpha, params.beta
        if not relaxed:
            _require(0 < b < a < 1 / p, family, "0 < beta < alpha < 1/p", params)
        gen = dict(
            kernel=lambda n, k: _pw(n, -a) * _fwd_diff(k, a),
            matrix_factors=(lambda n: _pw(n, -a), lambda k: _fwd_diff(k, a)),
            row_weight=lambda n: _pw(n, -b),
            col_weight=lambda k: _fwd_diff(k, b),
        )
    elif family in (Family.COR_4_2, Family.COR_4_3):
        _need(params, family, "alpha")
        a = params.alpha
        if not relaxed:
            _require(0 < a < 1 / p, family, "0 < alpha < 1/p", params)
        if family is Family.COR_4_2:
            col = lambda k: np.log1p(1.0 / k)  # noqa: E731
        else:
            col = lambda k: 1.0 / k  # noqa: E731
        gen = dict(
            kernel=lambda n, k: _pw(n, -a) * _fwd_diff(k, a),
            matrix_factors=(lambda n: _pw(n, -a), lambda k: _fwd_diff(k, a)),
            row_weight=_ones,
            col_weight=col,
        )
    elif family is Family.THM_4_3:
        _need(params, family, "alpha", "beta")
        a, b = params.alpha, params.beta
        if not relaxed:
            _require(0 < b < a <= 1, family, "0 < beta < alpha <= 1", params)
        gen = dict(
            kernel=lambda n, k: _pw(k, -b) * _bwd_diff(n, b),
            matrix_factors=(lambda n: _bwd_diff(n, b), lambda k: _pw(k, -b)),
            row_weight=lambda n: _bwd_diff(n, a),
            col_weight=lambda k: _pw(k, -a),
        )
    elif family is Family.THM_4_4:
        _need(params, family, "r", "s")
        r, s = params.r, params.s
        if not relaxed:
            _require(1 <= s < r < 1 / p, family, "1 <= s < r < 1/p", params)
        gen = dict(
            kernel=lambda n, k: _pw(k, r - 1) / _S(n, r - 1),
            matrix_factors=(lambda n: 1.0 / _S(n, r - 1), lambda k: _pw(k, r - 1)),
            row_weight=lambda n: 1.0 / _S(n, s - 1),
            col_weight=lambda k: _pw(k, s - 1),
        )
    elif family is Family.THM_4_5:
        _need(params, family, "r", "s")
        r, s = params.r, params.s
        if not relaxed:
            _require(s < r <= 1, family, "s < r <= 1", params)
        # inner sums run to the column index k on both sides
        gen = dict(
            kernel=lambda n, k: _pw(n, s - 1) / _S(k, s - 1),
            matrix_factors=(lambda n: _pw(n, s - 1), lambda k: 1.0 / _S(k, s - 1)),
            row_weight=lambda n: _pw(n, r - 1),
            col_weight=lambda k: 1.0 / _S(k, r - 1),
        )
    else:  # pragma: no cover - guarded by caller
        raise DomainError(f"{family.value} is not an application family")
    gen.update(p=p, q=q, direction=LE, left="matrix", shape="upper")
    return gen


def make_instance(family, params: Params | None = None, *, relaxed: bool = False, **kw):
    """Build the instance for ``family`` with the given exponents.

    ``params`` may be passed as a :class:`Params` or as keyword arguments.
    ``relaxed=True`` skips the validity predicate (used for boundary and
    identity experiments, e.g. ``thm_4_1`` with ``r = s``).

    Raises:
        DomainError: if the parameters violate the family's hypothesis; the
            message names the violated predicate.
    """
    family = parse_family(family)
    if params is None:
        params = Params(**kw)
    elif kw:
        params = replace(params, **kw)

    if family in SECTION4:
        gen = _build_section4(family, params, relaxed)
    elif family is Family.CLASSICAL_HARDY:
        _need(params, family, "p")
        p = params.p
        if not relaxed:
            _require(p > 1, family, "p > 1", params)
        gen = dict(
            p=p, q=p, direction=LE, kernel=None, row_weight=None, col_weight=None,
            left="weighted", shape="hardy",
        )
    elif family is Family.LAMBDA_FORM:
        _need(params, family, "p")
        p = params.p
        q = _check_q(params, family)
        lam = 0.0 if params.alpha is None else params.alpha
        if not relaxed:
            _require(lam > -1, family, "weights k**alpha with alpha > -1", params)
        gen = dict(
            p=p, q=q, direction=LE if p >= 1 else GE,
            kernel=lambda n, k: (n == k).astype(float),
            row_weight=lambda n: 1.0 / _S(n, lam),
            col_weight=lambda k: _pw(k, lam),
            left="weighted", shape="upper",
        )
    else:
        raise DomainError("use custom_instance() to build a custom instance")
    return InequalityInstance(family=family, params=params, relaxed=relaxed, **gen)


def custom_instance(
    kernel: Kernel,
    row_weight: Weight,
    col_weight: Weight,
    p: float,
    q: float | None = None,
    *,
    direction: str = LE,
    left: str = "weighted",
    matrix_factors: tuple[Weight, Weight] | None = None,
    constant: float | None = None,
) -> InequalityInstance:
    """Upper-triangular instance from user-supplied generators.

    The default orientation follows the general double-series form: the
    weighted side on the left, the matrix side on the right.
    """
    q = p if q is None else q
    if direction not in (LE, GE):
        raise ValueError(f"direction must be {LE!r} or {GE!r}")
    if left not in ("matrix", "weighted"):
        raise ValueError("left must be 'matrix' or 'weighted'")
    return InequalityInstance(
        family=Family.CUSTOM,
        params=Params(p=p, q=q),
        p=float(p),
        q=float(q),
        direction=direction,
        kernel=kernel,
        row_weight=row_weight,
        col_weight=col_weight,
        matrix_factors=matrix_factors,
        left=left,
        shape="upper",
        constant=constant,
    )


# evaluation -------------------------------------------------------------------


def _as_sequence(x) -> FiniteSequence:
    return x if isinstance(x, FiniteSequence) else FiniteSequence(x)


def _dense_side(inst: InequalityInstance, x: FiniteSequence, side: str) -> float:
    e = x.entries
    support = np.flatnonzero(e)
    if support.size == 0:
        return 0.0
    k = (support + 1.0)[None, :]
    n = np.arange(1.0, support[-1] + 2.0)[:, None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if side == "matrix":
            K = inst.kernel(n, k)
            expo = inst.q
        else:
            K = inst.row_weight(n) * inst.col_weight(k)
            expo = inst.p
        K = np.where(k >= n, np.broadcast_to(K, (n.size, k.size)), 0.0)
    inner = K @ e[support]
    return compensated_sum(np.power(inner, expo))


def _hardy_sides(inst: InequalityInstance, x: FiniteSequence, n_truncate):
    p = inst.p
    e = x.entries
    N = e.size
    if not p > 1:
        raise DomainError("the classical Hardy tail bound needs p > 1")
    rhs = compensated_sum(np.power(e, p))
    if N == 0:
        return 0.0, rhs
    T = max(N, 10**4 if n_truncate is None else int(n_truncate))
    cs = prefix_sums(e)
    total = float(cs[-1])
    n = np.arange(1.0, T + 1.0)
    means = np.empty(T)
    means[:N] = cs / n[:N]
    means[N:] = total / n[N:]
    body = compensated_sum(np.power(means, p))
    tail = total**p * float(T) ** (1.0 - p) / (p - 1.0)
    return body + tail, rhs


def _sides(inst, x, n_truncate=None):
    x = _as_sequence(x)
    if inst.shape == "hardy":
        return _hardy_sides(inst, x, n_truncate)
    matrix = _dense_side(inst, x, "matrix")
    weighted = _dense_side(inst, x, "weighted")
    return (matrix, weighted) if inst.left == "matrix" else (weighted, matrix)


def lhs_value(inst: InequalityInstance, x, n_truncate: int | None = None) -> float:
    """Power sum on the left of the displayed inequality, evaluated at ``x``.

    For triangular instances the value is exact up to rounding.  For the
    classical Hardy instance the outer sum is truncated at
    ``max(len(x), n_truncate)`` (default ``10**4``) and a rigorous tail bound
    ``S**p * T**(1-p) / (p-1)`` is added, so the result bounds the true value
    from above.
    """
    return _sides(inst, x, n_truncate)[0]


def rhs_value(inst: InequalityInstance, x, n_truncate: int | None = None) -> float:
    """Power sum on the right of the displayed inequality (no constant, no root)."""
    return _sides(inst, x, n_truncate)[1]


def claimed_constant(inst: InequalityInstance) -> float:
    """Closed-form sharp constant multiplying the right-hand power sum."""
    f, P = inst.family, inst.params
    p = inst.p
    if f is Family.THM_4_1:
        return (1 - P.s * p) / (1 - P.r * p)
    if f is Family.THM_4_2:
        r, s = P.r, P.s
        if s < r <= -1 / p:
            return 2.0 ** ((r - s) * p)
        if 0 < s < r < 1 / p:
            return (1 - s * p) / (1 - r * p)
        raise DomainError(
            f"thm_4_2 constant not covered: needs s < r <= -1/p or 0 < s < r < 1/p "
            f"(got p={p}, r={r}, s={s})"
        )
    if f is Family.COR_4_1:
        a, b = P.alpha, P.beta
        # beta > 0 always falls in the second regime of the thm_4_2 constant
        return (a / b) ** p * (1 - b * p) / (1 - a * p)
    if f in (Family.COR_4_2, Family.COR_4_3):
        a = P.alpha
        return a**p / (1 - a * p)
    if f in (Family.THM_4_3, Family.THM_4_5):
        return 1.0
    if f is Family.THM_4_4:
        r, s = P.r, P.s
        return r**p * (1 - s * p) / (s**p * (1 - r * p))
    if f is Family.CLASSICAL_HARDY:
        return (p / (p - 1)) ** p
    if inst.constant is not None:
        return float(inst.constant)
    raise DomainError(f"no closed-form constant is known for {inst.family.value}")


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    N: int
    first_violation: tuple[int, int] | None = None
    worst_drop: float = 0.0


def check_monotone_hypothesis(inst: InequalityInstance, N: int, rtol: float = 1e-12):
    """Check that ``a(n,k) / c(k)`` is non-decreasing in ``k`` for ``n <= k <= N``.

    The first violation is reported as ``(n, k)`` where the ratio at ``k`` is
    smaller than at ``k - 1``.
    """
    if N < 2:
        raise ValueError("monotone check needs N >= 2")
    if not inst.is_upper:
        raise DomainError(f"{inst.family.value} has no upper-triangular kernel")
    n = np.arange(1.0, N + 1.0)[:, None]
    k = np.arange(1.0, N + 1.0)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        R = inst.kernel(n, k) / inst.col_weight(k)
    R = np.broadcast_to(R, (N, N))
    prev, cur = R[:, :-1], R[:, 1:]
    valid = (k[:, :-1] >= n)
    drop = np.where(valid, (prev - cur) / np.maximum(np.abs(prev), np.finfo(float).tiny), 0.0)
    bad = valid & (drop > rtol)
    worst = float(drop.max(initial=0.0))
    if not bad.any():
        return MonotoneReport(True, N, None, worst)
    i, j = np.argwhere(bad)[0]
    return MonotoneReport(False, N, (int(i) + 1, int(j) + 2), worst)


DISTRIBUTIONS = ("halfnormal", "heavytail", "unitvec")


def random_sequence(seed: int, N_max: int, distribution: str = "halfnormal") -> FiniteSequence:
    """Deterministic random test vector.

    The generator is numpy's PCG64 seeded directly with ``seed``.  The support
    length is uniform on ``[1, N_max]``; ``halfnormal`` draws ``|N(0,1)|``,
    ``heavytail`` draws Lomax(1.5) values and ``unitvec`` returns ``e^(m)``
    with ``m`` uniform on ``[1, N_max]``.
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    if distribution == "unitvec":
        return FiniteSequence.unit(int(rng.integers(1, N_max + 1)))
    length = int(rng.integers(1, N_max + 1))
    if distribution == "halfnormal":
        return FiniteSequence(np.abs(rng.standard_normal(length)))
    if distribution == "heavytail":
        return FiniteSequence(rng.pareto(1.5, length))
    raise ValueError(f"unknown distribution {distribution!r}; use one of {DISTRIBUTIONS}")


# documented parameter points for randomized verification
VERIFY_GRID = {
    Family.THM_4_1: [Params(p=0.5, r=1, s=0), Params(p=0.5, r=0.5, s=-1), Params(p=0.25, r=2, s=0.5)],
    Family.THM_4_2: [Params(p=0.5, r=-2, s=-4), Params(p=0.5, r=1, s=0.5), Params(p=0.25, r=-4, s=-6)],
    Family.COR_4_1: [Params(p=0.5, alpha=1.5, beta=1), Params(p=0.5, alpha=1, beta=0.5)],
    Family.COR_4_2: [Params(p=0.5, alpha=0.5), Params(p=0.5, alpha=1.5)],
    Family.COR_4_3: [Params(p=0.5, alpha=0.5), Params(p=0.5, alpha=1.5)],
    Family.THM_4_3: [Params(p=0.5, alpha=1, beta=0.5), Params(p=0.5, alpha=0.75, beta=0.25)],
    Family.THM_4_4: [Params(p=0.5, r=1.5, s=1), Params(p=0.25, r=3, s=1.5)],
    Family.THM_4_5: [Params(p=0.5, r=1, s=0.5), Params(p=0.5, r=0.5, s=0), Params(p=0.5, r=1, s=-1)],
}
