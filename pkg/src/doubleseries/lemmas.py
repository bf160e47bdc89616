"""Power-sum lemmas, their proof-internal auxiliaries, and grid runners.

Every check returns a signed margin, ``favoured side - other side``, so a
non-negative value means the inequality holds at that point.  All checks
accept an integer ``n`` or an integer array and are vectorised over it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .numerics import power_sum_cache, prefix_sums

SLACK = 1e-12
LN2 = math.log(2.0)

LEMMA21_VARIANTS = ("ineq_2_1", "ineq_2_1_reversed", "ineq_2_2", "ineq_2_2_reversed")
LEMMA23_CASES = ("high", "low")


def _n(n, lo=1):
    arr = np.asarray(n)
    if arr.dtype.kind not in "iu":
        if not np.all(np.asarray(n, dtype=float) == np.round(np.asarray(n, dtype=float))):
            raise DomainError(f"n must be an integer, got {n!r}")
        arr = np.asarray(n, dtype=np.int64)
    if arr.size and arr.min() < lo:
        raise DomainError(f"n must be >= {lo}, got min {int(arr.min())}")
    return arr.astype(np.int64)


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _S(n, r):
    """sum_{i=1}^n i**r, with S(0) = 0."""
    n = np.asarray(n, dtype=np.int64)
    out = np.zeros(n.shape)
    pos = n >= 1
    if pos.any():
        out[pos] = power_sum_cache(r).at(n[pos])
    return out


def _pow(n, e):
    return np.power(np.asarray(n, dtype=float), float(e))


def _L(n):
    """ln(1 + 1/n)."""
    return np.log1p(1.0 / np.asarray(n, dtype=float))


# Lemma 2.1 -----------------------------------------------------------------

def _lemma21_pre(r, variant):
    if variant == "ineq_2_1":
        ok = 0.0 <= r <= 1.0
        need = "0 <= r <= 1"
    elif variant == "ineq_2_1_reversed":
        ok = r >= 1.0 or -1.0 < r <= 0.0
        need = "r >= 1 or -1 < r <= 0"
    elif variant == "ineq_2_2":
        ok = r >= 1.0
        need = "r >= 1"
    elif variant == "ineq_2_2_reversed":
        ok = -1.0 < r <= 1.0
        need = "-1 < r <= 1"
    else:
        raise DomainError(f"unknown variant {variant!r}; expected one of {LEMMA21_VARIANTS}")
    if not ok:
        raise DomainError(f"{variant} needs {need}, got r={r}")


def lemma21_bound(n, r, variant):
    """Closed-form comparison value for the power sum S_n(r)."""
    n = _n(n)
    nf = n.astype(float)
    if variant.startswith("ineq_2_1"):
        return _out(nf * _pow(nf + 1.0, r) / (r + 1.0))
    # r n^r (n+1)^r / ((1+r)((n+1)^r - n^r)), written so that r -> 0 is smooth
    x = r * _L(nf)
    # x underflows to 0 for subnormal r; use the r -> 0 limit there
    em = np.array(np.expm1(x))
    factor = np.divide(r, em, out=np.array(1.0 / _L(nf)), where=em != 0.0)
    return _out(_pow(nf + 1.0, r) * factor / (1.0 + r))


def lemma21_check(n, r, variant):
    """Margin of S_n(r) against its Lemma 2.1 bound in the given regime.

    The plain variants are lower bounds on S_n(r), the reversed ones upper
    bounds.
    """
    r = float(r)
    _lemma21_pre(r, variant)
    n = _n(n)
    value = _S(n, r)
    bound = np.asarray(lemma21_bound(n, r, variant))
    margin = bound - value if variant.endswith("reversed") else value - bound
    return _out(margin)


# Lemma 2.2 -----------------------------------------------------------------

def _pre_22(r, s):
    if not (s > r > -1.0):
        raise DomainError(f"needs s > r > -1, got r={r}, s={s}")


def lemma22_ratio(n, r, s):
    """sum (i/n)**r / sum (i/n)**s over i = 1..n."""
    r, s = float(r), float(s)
    _pre_22(r, s)
    n = _n(n)
    return _out(_pow(n, s - r) * _S(n, r) / _S(n, s))


def lemma22_check(n, r, s):
    r, s = float(r), float(s)
    return _out((1.0 + s) / (1.0 + r) - np.asarray(lemma22_ratio(n, r, s)))


def lemma22_f_diag(n, r, s):
    """f(n) = (1+s) S_n(s) - (1+r) n**(s-r) S_n(r); positive, with f(1) = s - r."""
    r, s = float(r), float(s)
    _pre_22(r, s)
    n = _n(n)
    return _out((1.0 + s) * _S(n, s) - (1.0 + r) * _pow(n, s - r) * _S(n, r))


def ineq24_check(n, r):
    """(n+1)**r / ((1+r) ln(1+1/n)) - S_n(r)."""
    r = float(r)
    if not r > -1.0:
        raise DomainError(f"needs r > -1, got r={r}")
    n = _n(n)
    return _out(_pow(n + 1, r) / ((1.0 + r) * _L(n)) - _S(n, r))


# Lemma 2.3 -----------------------------------------------------------------

def _pre_23(r, s, case):
    if case == "high":
        if not (s > r >= 1.0):
            raise DomainError(f"high case needs s > r >= 1, got r={r}, s={s}")
    elif case == "low":
        if not (0.0 > s > r > -1.0):
            raise DomainError(f"low case needs 0 > s > r > -1, got r={r}, s={s}")
    else:
        raise DomainError(f"unknown case {case!r}; expected 'high' or 'low'")


def lemma23_ratio(n, r, s):
    """sum (i/n)**r / sum (i/n)**s over i = 1..n-1 (n >= 2)."""
    n = _n(n, lo=2)
    return _out(_pow(n, s - r) * _S(n - 1, r) / _S(n - 1, s))


def lemma23_bound(r, s, case):
    return 2.0 ** (s - r) if case == "high" else (1.0 + s) / (1.0 + r)


def lemma23_check(n, r, s, case):
    r, s = float(r), float(s)
    _pre_23(r, s, case)
    return _out(lemma23_bound(r, s, case) - np.asarray(lemma23_ratio(n, r, s)))


def lemma23_g_diag(n, r, s):
    """g(n) = 2**(s-r) S_{n-1}(s) - n**(s-r) S_{n-1}(r); zero at n = 2."""
    r, s = float(r), float(s)
    _pre_23(r, s, "high")
    n = _n(n, lo=2)
    return _out(2.0 ** (s - r) * _S(n - 1, s) - _pow(n, s - r) * _S(n - 1, r))


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise DomainError("u must be > 0")
    return u


def _h_logv(u, logv):
    # ((2v)^u - 1) / (1 - v^u) with v given through log v
    return np.expm1(u * (LN2 + logv)) / -np.expm1(u * logv)


def _q_logv(u, logv):
    return u / -np.expm1(u * logv)


def aux_h(u, v):
    """h(u; v) = ((2v)**u - 1) / (1 - v**u) for u > 0, 1/2 <= v < 1."""
    u = _check_u(u)
    v = np.asarray(v, dtype=float)
    if np.any((v < 0.5) | (v >= 1.0)):
        raise DomainError("aux_h needs 1/2 <= v < 1")
    return _out(_h_logv(u, np.log(v)))


def aux_h_du(u, v):
    """Closed form of dh/du: v**u / (1 - v**u)**2 * p(u; ln v)."""
    u = _check_u(u)
    v = np.asarray(v, dtype=float)
    if np.any((v < 0.5) | (v >= 1.0)):
        raise DomainError("aux_h_du needs 1/2 <= v < 1")
    vu = np.power(v, u)
    return _out(vu / np.expm1(u * np.log(v)) ** 2 * np.asarray(aux_pfun(u, np.log(v))))


def aux_pfun(u, w):
    """p(u; w) = (2**u - (2 e**w)**u) ln 2 + w (2**u - 1) for w in [-ln 2, 0]."""
    u = _check_u(u)
    w = np.asarray(w, dtype=float)
    if np.any((w < -LN2 - 1e-15) | (w > 0.0)):
        raise DomainError("aux_pfun needs w in [-ln 2, 0]")
    two_u = np.power(2.0, u)
    return _out(-two_u * np.expm1(u * w) * LN2 + w * np.expm1(u * LN2))


def aux_qfun(u, v):
    """q(u; v) = u / (1 - v**u) for u > 0, 0 < v < 1."""
    u = _check_u(u)
    v = np.asarray(v, dtype=float)
    if np.any((v <= 0.0) | (v >= 1.0)):
        raise DomainError("aux_qfun needs 0 < v < 1")
    return _out(_q_logv(u, np.log(v)))


def ineq25_rhs(n, r, s):
    """n**r h(s - r; n/(n+1)), the upper bound for S_{n-1}(r)."""
    n = _n(n, lo=2)
    return _out(_pow(n, r) * _h_logv(s - r, -_L(n)))


def ineq25_rhs_rational(n, r, s):
    """The same bound written as a quotient of powers of n and n+1."""
    n = _n(n, lo=2)
    nf = n.astype(float)
    num = 2.0 ** (s - r) * _pow(nf, s) - _pow(nf + 1, s - r) * _pow(nf, r)
    den = _pow(nf + 1, s - r) - _pow(nf, s - r)
    return _out(num / den)


def ineq25_check(n, r, s):
    r, s = float(r), float(s)
    _pre_23(r, s, "high")
    n = _n(n, lo=2)
    return _out(np.asarray(ineq25_rhs(n, r, s)) - _S(n - 1, r))


def ineq25_limit_check(n, r):
    """n**r (ln 2 / ln(1+1/n) - 1) - S_{n-1}(r) for r >= 1."""
    r = float(r)
    if r < 1.0:
        raise DomainError(f"needs r >= 1, got r={r}")
    n = _n(n, lo=2)
    return _out(_pow(n, r) * (LN2 / _L(n) - 1.0) - _S(n - 1, r))


def ineq26_rhs(n, r, s):
    n = _n(n, lo=2)
    return _out(_pow(n, s) / (1.0 + s) * (-1.0 - s + _q_logv(s - r, -_L(n))))


def ineq26_check(n, r, s):
    r, s = float(r), float(s)
    _pre_23(r, s, "low")
    n = _n(n, lo=2)
    return _out(np.asarray(ineq26_rhs(n, r, s)) - _S(n - 1, s))


def ineq26_limit_check(n, s):
    """n**s/(1+s) (1/ln(1+1/n) - 1 - s) - S_{n-1}(s) for -1 < s < 0."""
    s = float(s)
    if not (-1.0 < s < 0.0):
        raise DomainError(f"needs -1 < s < 0, got s={s}")
    n = _n(n, lo=2)
    return _out(_pow(n, s) / (1.0 + s) * (1.0 / _L(n) - 1.0 - s) - _S(n - 1, s))


def ineq26_step_check(n, s):
    """(n-1) n**s/(1+s) - S_{n-1}(s), the reversed power-sum step for -1 < s <= 0."""
    s = float(s)
    if not (-1.0 < s <= 0.0):
        raise DomainError(f"needs -1 < s <= 0, got s={s}")
    n = _n(n, lo=2)
    return _out((n - 1) * _pow(n, s) / (1.0 + s) - _S(n - 1, s))


# Lemma 2.4 -----------------------------------------------------------------

@dataclass(frozen=True)
class Lemma24Report:
    hypothesis_holds: bool
    conclusion_holds: bool
    first_hypothesis_failure: int | None
    first_conclusion_failure: int | None

    @property
    def implication_ok(self) -> bool:
        return (not self.hypothesis_holds) or self.conclusion_holds


def _increasing_positive(x, name):
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 3:
        raise DomainError(f"{name} needs length >= 3, got {x.size}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError(f"{name} must be finite and positive")
    if np.any(np.diff(x) <= 0):
        i = int(np.argmax(np.diff(x) <= 0))
        raise DomainError(f"{name} is not strictly increasing at index {i + 1}")
    return x


def _le(a, b, rtol):
    return a <= b + rtol * np.maximum(np.abs(a), np.abs(b))


def lemma24_check(B, C, rtol=1e-12):
    """Evaluate the ratio-comparison hypothesis and conclusion for B and C.

    Ratios are compared by cross-multiplication (everything is positive).
    Failure indices are 1-based positions n.
    """
    B = _increasing_positive(B, "B")
    C = _increasing_positive(C, "C")
    if B.size != C.size:
        raise DomainError(f"B and C differ in length ({B.size} vs {C.size})")
    dB, dC = np.diff(B), np.diff(C)
    hyp = np.concatenate(
        [
            [_le(B[0] * C[1], C[0] * B[1], rtol)],
            _le(dB[:-1] * dC[1:], dC[:-1] * dB[1:], rtol),
        ]
    )
    concl = _le(B[:-1] * C[1:], C[:-1] * B[1:], rtol)
    fh = None if hyp.all() else int(np.argmin(hyp)) + 1
    fc = None if concl.all() else int(np.argmin(concl)) + 1
    return Lemma24Report(bool(hyp.all()), bool(concl.all()), fh, fc)


def lemma24_random_pair(rng: np.random.Generator, length: int):
    """Draw (B, C) satisfying the hypothesis by construction.

    C has arbitrary positive increments.  The increment ratios of B are made
    no larger than those of C, and B_1 is chosen so that B_1/B_2 <= C_1/C_2.
    """
    dC = rng.exponential(1.0, size=length - 1) + 1e-3
    c1 = rng.exponential(1.0) + 1e-3
    C = c1 + np.concatenate([[0.0], np.cumsum(dC)])
    # rho_n = dC_n / dC_{n+1}; B increments ratio sigma_n <= rho_n
    rho = dC[:-1] / dC[1:]
    sigma = rho * rng.uniform(0.2, 1.0, size=rho.size)
    dB = np.empty(length - 1)
    dB[0] = rng.exponential(1.0) + 1e-3
    for j in range(1, length - 1):
        dB[j] = dB[j - 1] / sigma[j - 1]
    # B_1/(B_1 + dB_1) <= C_1/C_2  <=>  B_1 <= C_1 dB_1 / dC_1
    b1 = c1 * dB[0] / dC[0] * rng.uniform(0.2, 1.0)
    B = b1 + np.concatenate([[0.0], np.cumsum(dB)])
    return B, C


def lemma24_random_trials(pairs=1000, lengths=(3, 40), seed=0):
    """Run the implication on random hypothesis-satisfying pairs.

    Returns ``(checked, hypothesis_failures, implication_failures)``; pairs
    whose hypothesis fails after rounding are counted but not asserted.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = lengths
    hyp_fail = bad = 0
    for _ in range(pairs):
        L = int(rng.integers(lo, hi + 1))
        rep = lemma24_check(*lemma24_random_pair(rng, L))
        hyp_fail += not rep.hypothesis_holds
        bad += not rep.implication_ok
    return pairs, hyp_fail, bad


# Lemma 2.5 -----------------------------------------------------------------

def _pre_25(p, r, s):
    if not (0.0 < p < 1.0):
        raise DomainError(f"needs 0 < p < 1, got p={p}")
    if not (1.0 <= s < r < 1.0 / p):
        raise DomainError(f"needs 1 <= s < r < 1/p, got p={p}, r={r}, s={s}")


def _pre_29(p, s):
    if not (0.0 < p < 1.0):
        raise DomainError(f"needs 0 < p < 1, got p={p}")
    if not (s >= 1.0 and s * p < 1.0):
        raise DomainError(f"needs s >= 1 and s p < 1, got p={p}, s={s}")


def _T(k, p, e):
    """(e S_k(e - 1))**-p."""
    return np.power(e * _S(k, e - 1.0), -p)


def _sum_T(n, p, e):
    n = np.asarray(n, dtype=np.int64)
    pref = prefix_sums(_T(np.arange(1, int(n.max()) + 1), p, e))
    return pref[n - 1]


def lemma25_ratio(n, p, r, s):
    p, r, s = float(p), float(r), float(s)
    _pre_25(p, r, s)
    n = _n(n)
    return _out(_sum_T(n, p, r) / _sum_T(n, p, s))


def lemma25_bound(n, p, r, s):
    n = _n(n)
    return _out((1.0 - s * p) / (1.0 - r * p) * _pow(n, (s - r) * p))


def lemma25_check(n, p, r, s):
    return _out(np.asarray(lemma25_bound(n, p, r, s)) - np.asarray(lemma25_ratio(n, p, r, s)))


def lemma25_scaled_ratio(n, p, r, s):
    """ratio * n**((r-s)p); tends to (1-sp)/(1-rp)."""
    n = _n(n)
    return _out(np.asarray(lemma25_ratio(n, p, r, s)) * _pow(n, (r - s) * p))


def ineq28_check(n, p, r, s):
    p, r, s = float(p), float(r), float(s)
    _pre_25(p, r, s)
    n = _n(n)
    x = (r - s) * p
    growth = np.expm1(x * _L(n)) / x
    return _out(_T(n + 1, p, s) - (1.0 - s * p) * growth * _sum_T(n, p, s))


def ineq29_check(n, p, s):
    """Growth of sum_k T_k(s) from n to n+1 against ((n+1)/n)**(1-sp).

    Both sides are written as ``1 + small`` and only the small parts are
    compared, which keeps the margin accurate for large n.
    """
    p, s = float(p), float(s)
    _pre_29(p, s)
    n = _n(n)
    left = _T(n + 1, p, s) / _sum_T(n, p, s)
    right = np.expm1((1.0 - s * p) * _L(n))
    return _out(left - right)


def ineq29_step_check(n, p, s):
    """Intermediate comparison against S_{n+1}(-sp)/S_n(-sp), again minus 1."""
    p, s = float(p), float(s)
    _pre_29(p, s)
    n = _n(n)
    left = _T(n + 1, p, s) / _sum_T(n, p, s)
    right = _pow(n + 1, -s * p) / _S(n, -s * p)
    return _out(left - right)


def ineq29_tail_check(n, p, s):
    """S_{n+1}(-sp)/S_n(-sp) - ((n+1)/n)**(1-sp), both minus 1."""
    p, s = float(p), float(s)
    _pre_29(p, s)
    n = _n(n)
    return _out(_pow(n + 1, -s * p) / _S(n, -s * p) - np.expm1((1.0 - s * p) * _L(n)))


def ineq210_check(n, s):
    """R_n - R_{n+1} for f(t) = t**(s-1), where R_n = (1/n) sum f(i/n)."""
    s = float(s)
    if s < 1.0:
        raise DomainError(f"needs s >= 1, got s={s}")
    n = _n(n)
    Rn = _S(n, s - 1.0) * _pow(n, -s)
    Rn1 = _S(n + 1, s - 1.0) * _pow(n + 1, -s)
    return _out(Rn - Rn1)


def sandwich_check(k, r):
    """(r S_k(r-1) - k**r, (k+1)**r - r S_k(r-1)); both >= 0 for r >= 1."""
    r = float(r)
    if r < 1.0:
        raise DomainError(f"needs r >= 1, got r={r}")
    k = _n(k)
    mid = r * _S(k, r - 1.0)
    return _out(mid - _pow(k, r)), _out(_pow(k + 1, r) - mid)


def weighted_mean_power(n, r):
    """(1 + r) sum_{i<=n} (i/n)**r; strictly increasing in r > -1."""
    n = _n(n)
    return _out((1.0 + r) * _S(n, r) * _pow(n, -r))


# grid runners ----------------------------------------------------------------

@dataclass
class CheckBlock:
    """Margins of one check at one parameter point, over an n axis."""

    check: str
    params: dict
    n: np.ndarray
    value: np.ndarray
    bound: np.ndarray
    margin: np.ndarray
    strict: bool
    equality_at: tuple = ()  # n values where the margin must vanish
    slack: float = SLACK

    @property
    def scale(self) -> np.ndarray:
        return np.maximum(np.maximum(np.abs(self.value), np.abs(self.bound)), 1.0e-300)

    @property
    def ok(self) -> np.ndarray:
        tol = self.slack * self.scale
        ok = self.margin > tol if self.strict else self.margin >= -tol
        if self.equality_at:
            eq = np.isin(self.n, self.equality_at)
            ok = np.where(eq, np.abs(self.margin) <= tol, ok)
        return ok

    @property
    def passed(self) -> bool:
        return bool(self.ok.all())

    def rows(self):
        ok = self.ok
        for j in range(self.n.size):
            yield (
                int(self.n[j]),
                float(self.value[j]),
                float(self.bound[j]),
                float(self.margin[j]),
                bool(ok[j]),
            )


@dataclass
class LemmaGrid:
    """Results of one lemma over its configured grid."""

    lemma: str
    axes: dict
    slack: float
    blocks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.blocks) and all(
            v.get("passed", True) for v in self.extra.values()
        )

    @property
    def points(self) -> int:
        return sum(b.n.size for b in self.blocks)

    def failures(self):
        out = []
        for b in self.blocks:
            bad = ~b.ok
            for j in np.flatnonzero(bad):
                out.append((b.check, b.params, int(b.n[j]), float(b.margin[j])))
        return out


def _block(check, params, n, value, bound, kind, strict, slack, equality_at=()):
    n = np.asarray(n, dtype=np.int64)
    value = np.broadcast_to(np.asarray(value, dtype=float), n.shape).copy()
    bound = np.broadcast_to(np.asarray(bound, dtype=float), n.shape).copy()
    margin = bound - value if kind == "le" else value - bound
    return CheckBlock(check, dict(params), n, value, bound, margin, strict, tuple(equality_at), slack)


def _block_from_margin(check, params, n, margin, ref, strict, slack, equality_at=()):
    """Block where the margin was computed directly in a stable form.

    ``ref`` is the magnitude used for the slack scale.
    """
    n = np.asarray(n, dtype=np.int64)
    margin = np.broadcast_to(np.asarray(margin, dtype=float), n.shape).copy()
    ref = np.broadcast_to(np.abs(np.asarray(ref, dtype=float)), n.shape).copy()
    return CheckBlock(check, dict(params), n, ref, ref - margin, margin, strict, tuple(equality_at), slack)


def _axis(sec, key, default=None):
    if key in sec:
        return [float(x) for x in sec[key]]
    if default is None:
        raise KeyError(key)
    return default


def _n_axis(grid, section, lo=1, key="n"):
    sec = grid.get(section, {})
    vals = sec.get(key, grid.get("common", {}).get("n"))
    if vals is None:
        raise KeyError(f"no n axis for [{section}]")
    n = np.array(sorted({int(v) for v in vals}), dtype=np.int64)
    return n[n >= lo]


def _slack(grid):
    v = grid.get("common", {}).get("slack")
    return float(v[0]) if v else SLACK


def run_lemma21(grid) -> LemmaGrid:
    sec, slack = grid["lemma2.1"], _slack(grid)
    n = _n_axis(grid, "lemma2.1")
    out = LemmaGrid("2.1", {"n": n.tolist()}, slack)
    for variant in LEMMA21_VARIANTS:
        rs = _axis(sec, "r_" + variant)
        out.axes["r_" + variant] = rs
        for r in rs:
            value = _S(n, r)
            bound = np.asarray(lemma21_bound(n, r, variant))
            kind = "le" if variant.endswith("reversed") else "ge"
            out.blocks.append(_block(f"lemma2.1/{variant}", {"r": r}, n, value, bound, kind, False, slack))
    return out


def _pairs(rs, ss, pred):
    return [(r, s) for r in rs for s in ss if pred(r, s)]


def run_lemma22(grid) -> LemmaGrid:
    sec, slack = grid["lemma2.2"], _slack(grid)
    n = _n_axis(grid, "lemma2.2")
    rs, ss = _axis(sec, "r"), _axis(sec, "s")
    pairs = _pairs(rs, ss, lambda r, s: s > r > -1.0)
    out = LemmaGrid("2.2", {"n": n.tolist(), "r": rs, "s": ss}, slack)

    def one(rs_pair):
        r, s = rs_pair
        prm = {"r": r, "s": s}
        ratio = _pow(n, s - r) * _S(n, r) / _S(n, s)
        f = (1.0 + s) * _S(n, s) - (1.0 + r) * _pow(n, s - r) * _S(n, r)
        f_ref = (1.0 + s) * _S(n, s)
        return [
            _block("lemma2.2/ratio", prm, n, ratio, (1.0 + s) / (1.0 + r), "le", True, slack),
            _block_from_margin("lemma2.2/f_positive", prm, n, f, f_ref, True, slack),
            _block("lemma2.2/f_ge_f1", prm, n, f, s - r, "ge", False, slack),
        ]

    out.blocks.extend(_parallel(one, pairs))
    worst = max(abs(lemma22_f_diag(1, r, s) - (s - r)) for r, s in pairs)
    out.extra["f1_equals_s_minus_r"] = {"worst_abs_error": worst, "passed": worst <= slack}
    r24 = sorted({r for r in rs if r > -1.0})
    for r in r24:
        out.blocks.append(
            _block("lemma2.2/ineq_2_4", {"r": r}, n, _S(n, r), _pow(n + 1, r) / ((1.0 + r) * _L(n)), "le", False, slack)
        )
    return out


def run_lemma23(grid) -> LemmaGrid:
    sec, slack = grid["lemma2.3"], _slack(grid)
    n = _n_axis(grid, "lemma2.3", lo=2)
    out = LemmaGrid("2.3", {"n": n.tolist()}, slack)
    high = _pairs(_axis(sec, "high_r"), _axis(sec, "high_s"), lambda r, s: s > r >= 1.0)
    low = _pairs(_axis(sec, "low_r"), _axis(sec, "low_s"), lambda r, s: 0.0 > s > r > -1.0)
    out.axes.update(high=high, low=low)

    def one_high(pair):
        r, s = pair
        prm = {"r": r, "s": s, "case": "high"}
        ratio = _pow(n, s - r) * _S(n - 1, r) / _S(n - 1, s)
        g = 2.0 ** (s - r) * _S(n - 1, s) - _pow(n, s - r) * _S(n - 1, r)
        return [
            _block("lemma2.3/high", prm, n, ratio, 2.0 ** (s - r), "le", False, slack, equality_at=(2,)),
            _block_from_margin("lemma2.3/g_diag", prm, n, g, 2.0 ** (s - r) * _S(n - 1, s), False, slack, equality_at=(2,)),
            _block("lemma2.3/ineq_2_5", prm, n, _S(n - 1, r), ineq25_rhs(n, r, s), "le", False, slack),
        ]

    def one_low(pair):
        r, s = pair
        prm = {"r": r, "s": s, "case": "low"}
        ratio = _pow(n, s - r) * _S(n - 1, r) / _S(n - 1, s)
        return [
            _block("lemma2.3/low", prm, n, ratio, (1.0 + s) / (1.0 + r), "le", True, slack),
            _block("lemma2.3/ineq_2_6", prm, n, _S(n - 1, s), ineq26_rhs(n, r, s), "le", True, slack),
        ]

    out.blocks.extend(_parallel(one_high, high))
    out.blocks.extend(_parallel(one_low, low))
    for r in sorted({r for r, _ in high}):
        out.blocks.append(
            _block("lemma2.3/ineq_2_5_limit", {"r": r}, n, _S(n - 1, r), _pow(n, r) * (LN2 / _L(n) - 1.0), "le", False, slack)
        )
    for s in sorted({s for _, s in low}):
        prm = {"s": s}
        lim = _pow(n, s) / (1.0 + s) * (1.0 / _L(n) - 1.0 - s)
        step = (n - 1) * _pow(n, s) / (1.0 + s)
        out.blocks.append(_block("lemma2.3/ineq_2_6_limit", prm, n, _S(n - 1, s), lim, "le", True, slack))
        out.blocks.append(_block("lemma2.3/ineq_2_6_step", prm, n, _S(n - 1, s), step, "le", False, slack))
    out.extra.update(_aux_properties(sec, slack))
    return out


def _aux_properties(sec, slack):
    u = np.array(_axis(sec, "u"))
    v = np.array(_axis(sec, "v"))
    w_points = int(sec.get("w_points", [17])[0])
    w = np.linspace(-LN2, 0.0, w_points)
    U, W = np.meshgrid(u, w, indexing="ij")
    P = np.asarray(aux_pfun(U, W))
    ends = np.abs(P[:, [0, -1]]).max()
    interior_min = P[:, 1:-1].min() if w_points > 2 else 0.0
    H = np.asarray(aux_h(*np.meshgrid(u, v, indexing="ij")))
    Q = np.asarray(aux_qfun(*np.meshgrid(u, v, indexing="ij")))
    # h is identically 0 at v = 1/2, so only non-decreasing is asserted
    h_inc = bool(np.all(np.diff(H, axis=0) >= -slack * np.abs(H[1:])))
    q_inc = bool(np.all(np.diff(Q, axis=0) > 0))
    return {
        "pfun_endpoints": {"max_abs": float(ends), "passed": bool(ends <= 1e-14)},
        "pfun_nonnegative": {"min": float(interior_min), "passed": bool(interior_min >= -slack)},
        "h_increasing_in_u": {"passed": h_inc},
        "q_increasing_in_u": {"passed": q_inc},
    }


def run_lemma24(grid) -> LemmaGrid:
    sec = grid["lemma2.4"]
    pairs = int(sec.get("pairs", [1000])[0])
    lengths = sec.get("length", [3, 40])
    seed = int(sec.get("seed", [0])[0])
    out = LemmaGrid("2.4", {"pairs": pairs, "length": [min(lengths), max(lengths)], "seed": seed}, _slack(grid))
    checked, hyp_fail, bad = lemma24_random_trials(pairs, (int(min(lengths)), int(max(lengths))), seed)
    fixed = [
        (np.arange(1, 11) ** 2.0, np.arange(1, 11.0)),
        (np.arange(1, 11.0), np.arange(1, 11.0)),
    ]
    fixed_ok = all(lemma24_check(B, C).conclusion_holds for B, C in fixed)
    out.extra["random_pairs"] = {
        "checked": checked,
        "hypothesis_failures": hyp_fail,
        "implication_failures": bad,
        "passed": bad == 0 and hyp_fail < checked,
    }
    out.extra["fixed_pairs"] = {"passed": fixed_ok}
    return out


def run_lemma25(grid) -> LemmaGrid:
    sec, slack = grid["lemma2.5"], _slack(grid)
    n = _n_axis(grid, "lemma2.5")
    ps = _axis(sec, "p")
    rs, ss = _axis(sec, "r"), _axis(sec, "s")
    triples = [(p, r, s) for p in ps for r in rs for s in ss if 1.0 <= s < r < 1.0 / p]
    out = LemmaGrid("2.5", {"n": n.tolist(), "p": ps, "r": rs, "s": ss}, slack)

    def one(t):
        p, r, s = t
        prm = {"p": p, "r": r, "s": s}
        ratio = _sum_T(n, p, r) / _sum_T(n, p, s)
        bound = (1.0 - s * p) / (1.0 - r * p) * _pow(n, (s - r) * p)
        x = (r - s) * p
        rhs28 = (1.0 - s * p) * np.expm1(x * _L(n)) / x * _sum_T(n, p, s)
        return [
            _block("lemma2.5/ineq_2_7", prm, n, ratio, bound, "le", True, slack),
            _block("lemma2.5/ineq_2_8", prm, n, _T(n + 1, p, s), rhs28, "ge", False, slack),
        ]

    out.blocks.extend(_parallel(one, triples))
    for p, s in sorted({(p, s) for p, _, s in triples}):
        prm = {"p": p, "s": s}
        grow = _T(n + 1, p, s) / _sum_T(n, p, s)
        out.blocks.append(_block("lemma2.5/ineq_2_9", prm, n, grow, np.expm1((1 - s * p) * _L(n)), "ge", False, slack))
        out.blocks.append(_block("lemma2.5/ineq_2_9_step", prm, n, grow, _pow(n + 1, -s * p) / _S(n, -s * p), "ge", False, slack))
    for s in sorted({s for _, _, s in triples}):
        Rn = _S(n, s - 1.0) * _pow(n, -s)
        Rn1 = _S(n + 1, s - 1.0) * _pow(n + 1, -s)
        out.blocks.append(_block("lemma2.5/ineq_2_10", {"s": s}, n, Rn1, Rn, "le", False, slack))
    for r in sorted({r for _, r, _ in triples} | {s for _, _, s in triples}):
        mid = r * _S(n, r - 1.0)
        out.blocks.append(_block("lemma2.5/sandwich_lower", {"r": r}, n, mid, _pow(n, r), "ge", False, slack))
        out.blocks.append(_block("lemma2.5/sandwich_upper", {"r": r}, n, mid, _pow(n + 1, r), "le", False, slack))
    mono_r = sorted(set(_axis(sec, "mono_r")))
    mono_n = _n_axis(grid, "lemma2.5", key="mono_n")
    for r1, r2 in zip(mono_r[:-1], mono_r[1:]):
        lo, hi = weighted_mean_power(mono_n, r1), weighted_mean_power(mono_n, r2)
        out.blocks.append(
            _block("lemma2.5/mean_power_increasing", {"r1": r1, "r2": r2}, mono_n, hi, lo, "ge", True, slack)
        )
    return out


RUNNERS = {
    "2.1": run_lemma21,
    "2.2": run_lemma22,
    "2.3": run_lemma23,
    "2.4": run_lemma24,
    "2.5": run_lemma25,
}

_WORKERS = 4


def _parallel(fn, items):
    # each item yields a list of blocks; keep grid order
    if len(items) < 8:
        groups = [fn(x) for x in items]
    else:
        with ThreadPoolExecutor(max_workers=_WORKERS) as ex:
            groups = list(ex.map(fn, items))
    return [b for g in groups for b in g]


def run_lemma(which: str, grid) -> LemmaGrid:
    """Run one lemma (``"2.1"`` ... ``"2.5"``) over a parsed grid."""
    key = str(which).removeprefix("lemma").strip()
    if key not in RUNNERS:
        raise DomainError(f"unknown lemma {which!r}; expected one of {sorted(RUNNERS)}")
    return RUNNERS[key](grid)
