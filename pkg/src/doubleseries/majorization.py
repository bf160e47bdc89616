"""Majorization order, the convex-function principle, and monotone averages."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .numerics import power_sum_cache, prefix_sums

DECREASING_TOL = 1e-14
SLACK = 1e-12

NEG_POWER_GRID = (0.1, 0.25, 0.5, 0.75, 0.9)
HINGE_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


class DecreasingVector:
    """Finite, positive, non-increasing vector (checked to a 1e-14 relative tolerance)."""

    __slots__ = ("entries",)

    def __init__(self, entries, tol: float = DECREASING_TOL):
        arr = np.array(entries, dtype=float).ravel()
        if arr.size == 0:
            raise DomainError("a decreasing vector needs at least one entry")
        if not np.all(np.isfinite(arr)):
            raise DomainError("entries must be finite")
        if np.any(arr <= 0):
            raise DomainError(f"entries must be positive; index {int(np.argmax(arr <= 0))} is not")
        rise = arr[1:] > arr[:-1] * (1.0 + tol)
        if rise.any():
            j = int(np.argmax(rise))
            raise DomainError(f"entries increase at index {j + 1}: {arr[j]!r} < {arr[j + 1]!r}")
        arr.flags.writeable = False
        self.entries = arr

    def __len__(self):
        return self.entries.size

    def __repr__(self):
        return f"DecreasingVector({self.entries.tolist()!r})"


def _dv(x) -> DecreasingVector:
    return x if isinstance(x, DecreasingVector) else DecreasingVector(x)


def prefix_gaps(x, y) -> tuple[np.ndarray, float]:
    """Prefix differences ``Y_j - X_j`` for j < n and the total difference."""
    x, y = _dv(x), _dv(y)
    if len(x) != len(y):
        raise DomainError(f"length mismatch: {len(x)} vs {len(y)}")
    X, Y = prefix_sums(x.entries), prefix_sums(y.entries)
    return Y[:-1] - X[:-1], float(Y[-1] - X[-1])


def is_majorized(x, y, tol: float = SLACK) -> bool:
    """True iff x is majorized by y: prefix sums of x never exceed those of y, equal totals.

    ``tol`` is relative to the larger total.
    """
    gaps, total_gap = prefix_gaps(x, y)
    scale = max(float(np.sum(_dv(x).entries)), float(np.sum(_dv(y).entries)))
    return bool(np.all(gaps >= -tol * scale) and abs(total_gap) <= tol * scale)


# convex test functions ------------------------------------------------------

def _parse_tag(tag: str):
    name, _, arg = tag.partition(":")
    if name in ("square", "linear"):
        if arg:
            raise DomainError(f"{name} takes no parameter: {tag!r}")
        return name, None
    if name in ("neg_power", "hinge"):
        try:
            val = float(arg)
        except ValueError:
            raise DomainError(f"bad parameter in convex tag {tag!r}") from None
        if name == "neg_power" and not (0.0 < val < 1.0):
            raise DomainError(f"neg_power needs 0 < p < 1, got {val}")
        if name == "hinge" and not (0.0 < val < 1.0):
            raise DomainError(f"hinge needs 0 < c < 1, got {val}")
        return name, val
    raise DomainError(f"unknown convex function tag {tag!r}")


def default_convex_family() -> list[str]:
    return (
        [f"neg_power:{p}" for p in NEG_POWER_GRID]
        + ["square"]
        + [f"hinge:{c}" for c in HINGE_GRID]
        + ["linear"]
    )


def _apply(tag: str, t: np.ndarray, top: float) -> np.ndarray:
    name, arg = _parse_tag(tag)
    if name == "square":
        return t * t
    if name == "linear":
        return t
    if name == "neg_power":
        return -np.power(t, arg)
    # hinge thresholds are fractions of the largest entry of y
    return np.maximum(0.0, t - arg * top)


@dataclass(frozen=True)
class PrincipleRow:
    tag: str
    sum_fx: float
    sum_fy: float
    margin: float
    passed: bool


@dataclass(frozen=True)
class PrincipleReport:
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def principle_check(x, y, convex_family=None, slack: float = SLACK) -> PrincipleReport:
    """Check sum f(x_j) <= sum f(y_j) for each convex f, given x majorized by y.

    For ``linear`` the two sums must agree within ``slack``.
    """
    x, y = _dv(x), _dv(y)
    if not is_majorized(x, y):
        raise DomainError("principle_check needs x majorized by y")
    family = default_convex_family() if convex_family is None else list(convex_family)
    top = float(y.entries[0])
    rows = []
    for tag in family:
        fx = math.fsum(_apply(tag, x.entries, top).tolist())
        fy = math.fsum(_apply(tag, y.entries, top).tolist())
        scale = max(abs(fx), abs(fy), 1.0)
        margin = fy - fx
        ok = abs(margin) <= slack * scale if tag == "linear" else margin >= -slack * scale
        rows.append(PrincipleRow(tag, fx, fy, margin, bool(ok)))
    return PrincipleReport(tuple(rows))


# vectors behind the two majorization-based constants --------------------------

SECTION4_KINDS = ("thm_4_3", "thm_4_5")


def _kind(kind: str) -> str:
    k = kind.replace(".", "_").replace("thm4", "thm_4")
    if k not in SECTION4_KINDS:
        raise DomainError(f"unknown kind {kind!r}; expected thm4.3 or thm4.5")
    return k


def _back_diff(k: np.ndarray, a: float) -> np.ndarray:
    # k**a - (k-1)**a, exactly 1 at k = 1
    out = np.power(k, a) * -np.expm1(a * np.log1p(-1.0 / np.maximum(k, 2.0)))
    out[k == 1] = 1.0
    return out


def section4_vectors(kind: str, a: float, b: float, n: int):
    """Return (x, y) for the given kind.

    thm_4_3 (a = alpha, b = beta, 0 < beta < alpha <= 1):
        x_k = (k**alpha - (k-1)**alpha) / n**alpha, y likewise with beta.
    thm_4_5 (a = r, b = s, s < r <= 1):
        x_k = k**(r-1) / S_n(r-1), y_k = k**(s-1) / S_n(s-1).
    """
    kind = _kind(kind)
    if int(n) != n or n < 1:
        raise DomainError(f"n must be an integer >= 1, got {n!r}")
    n = int(n)
    a, b = float(a), float(b)
    k = np.arange(1, n + 1, dtype=float)
    if kind == "thm_4_3":
        if not (0.0 < b < a <= 1.0):
            raise DomainError(f"thm4.3 needs 0 < beta < alpha <= 1, got alpha={a}, beta={b}")
        x = _back_diff(k, a) / float(n) ** a
        y = _back_diff(k, b) / float(n) ** b
    else:
        if not (b < a <= 1.0):
            raise DomainError(f"thm4.5 needs s < r <= 1, got r={a}, s={b}")
        x = np.power(k, a - 1.0) / power_sum_cache(a - 1.0).at(n)
        y = np.power(k, b - 1.0) / power_sum_cache(b - 1.0).at(n)
    return DecreasingVector(x), DecreasingVector(y)


def section4_margin(kind: str, a: float, b: float, n: int) -> tuple[float, float]:
    """(smallest prefix gap Y_j - X_j, |total gap|); 0 prefix gap when n = 1."""
    x, y = section4_vectors(kind, a, b, n)
    gaps, total = prefix_gaps(x, y)
    return (float(gaps.min()) if gaps.size else 0.0), abs(total)


def section4_majorization(kind: str, a: float, b: float, n: int, tol: float = SLACK) -> bool:
    x, y = section4_vectors(kind, a, b, n)
    return is_majorized(x, y, tol)


# monotone averages ---------------------------------------------------------------

def _power_tag(f_tag: str) -> float:
    name, _, arg = f_tag.partition(":")
    if name != "power":
        raise DomainError(f"unknown function tag {f_tag!r}; expected 'power:<e>'")
    try:
        e = float(arg)
    except ValueError:
        raise DomainError(f"bad exponent in {f_tag!r}") from None
    if not (e >= 0.0 or -1.0 < e < 0.0):
        raise DomainError(f"power exponent must be > -1, got {e}")
    return e


def expected_direction(f_tag: str) -> str:
    """Direction of R_n(f) in n: increasing f gives decreasing averages and vice versa."""
    e = _power_tag(f_tag)
    if e == 0.0:
        return "constant"
    return "decreasing" if e > 0 else "increasing"


def monotone_average(f_tag: str, n) -> float | np.ndarray:
    """R_n(f) = (1/n) sum_{i<=n} f(i/n) for f(t) = t**e, tag ``"power:<e>"``."""
    e = _power_tag(f_tag)
    arr = np.asarray(n, dtype=np.int64)
    if arr.size and arr.min() < 1:
        raise DomainError("n must be >= 1")
    out = np.asarray(power_sum_cache(e).at(arr)) * np.power(arr.astype(float), -1.0 - e)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MonotoneScan:
    tag: str
    expected: str
    N: int
    first_violation: int | None
    worst_step: float

    @property
    def passed(self) -> bool:
        return self.first_violation is None


def monotone_average_scan(f_tag: str, N: int, slack: float = SLACK) -> MonotoneScan:
    """Check R_1(f), ..., R_N(f) moves in the expected direction (non-strict)."""
    expected = expected_direction(f_tag)
    R = np.asarray(monotone_average(f_tag, np.arange(1, int(N) + 1)), dtype=float)
    step = np.diff(R)
    if expected == "decreasing":
        step = -step
    tol = slack * np.maximum(np.abs(R[1:]), 1.0)
    if expected == "constant":
        bad = np.abs(step) > tol
    else:
        bad = step < -tol
    first = int(np.argmax(bad)) + 2 if bad.any() else None
    worst = float(step.min()) if step.size else 0.0
    return MonotoneScan(f_tag, expected, int(N), first, worst)
