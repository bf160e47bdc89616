"""Deterministic scalar kernels: compensated sums, cached power sums, extrapolation.

All prefix sums are accumulated in fixed blocks of ``BLOCK`` terms.  Inside a
block a plain cumulative sum is used; block totals are carried with Neumaier
compensation.  The block grid is anchored at index 0, so a prefix array grown
in several steps is bit-identical to one computed in a single pass.
"""

from __future__ import annotations

import math
import struct
import threading
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "BLOCK",
    "ExtrapolationEstimate",
    "PowerSumCache",
    "compensated_sum",
    "extrapolate_limit",
    "power_sum",
    "power_sum_cache",
    "power_sums",
    "prefix_sums",
    "scaled_power_sum",
    "trend_of",
]

BLOCK = 256

# exp() overflows past this; used to decide when m**r needs the scaled path
_LOG_MAX = 700.0


def compensated_sum(values) -> float:
    """Sum ``values`` with exact-rounding accumulation.

    Backed by :func:`math.fsum`, so the result is the correctly rounded sum
    and does not depend on the order of the inputs.

    Raises:
        ValueError: if any entry is NaN or infinite; the message names the
            first offending index.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        return 0.0
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = int(np.argmax(bad))
        raise ValueError(f"non-finite value {arr[idx]!r} at index {idx}")
    return math.fsum(arr.tolist())


class _PrefixAccumulator:
    """Blocked compensated prefix sums with state carried between blocks."""

    __slots__ = ("total", "carry")

    def __init__(self):
        self.total = 0.0
        self.carry = 0.0

    def extend(self, terms: np.ndarray) -> np.ndarray:
        n = terms.size
        if n == 0:
            return np.empty(0)
        nb = -(-n // BLOCK)
        padded = np.zeros(nb * BLOCK)
        padded[:n] = terms
        local = np.cumsum(padded.reshape(nb, BLOCK), axis=1)
        offsets = np.empty(nb)
        s, c = self.total, self.carry
        for j, v in enumerate(local[:, -1].tolist()):
            offsets[j] = s + c
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        self.total, self.carry = s, c
        return (offsets[:, None] + local).ravel()[:n]


def prefix_sums(terms) -> np.ndarray:
    """Return the array of partial sums ``out[i] = terms[0] + ... + terms[i]``."""
    return _PrefixAccumulator().extend(np.asarray(terms, dtype=float).ravel())


def _key(r: float) -> int:
    return struct.unpack("<q", struct.pack("<d", float(r)))[0]


class PowerSumCache:
    """Partial sums ``S(n, r) = 1**r + 2**r + ... + n**r`` for one exponent.

    The partials only ever grow, in whole blocks.  Readers take a reference to
    the current array; extension builds a new array under a lock and swaps it
    in, so concurrent readers never see a half-written state.
    """

    def __init__(self, exponent: float):
        self.exponent = float(exponent)
        self._acc = _PrefixAccumulator()
        self._partials = np.empty(0)
        self._lock = threading.Lock()

    def __len__(self):
        return self._partials.size

    def _grow(self, n: int) -> np.ndarray:
        partials = self._partials
        if partials.size >= n:
            return partials
        with self._lock:
            partials = self._partials
            if partials.size >= n:
                return partials
            target = max(n, 2 * partials.size)
            target = -(-target // BLOCK) * BLOCK
            start = partials.size + 1
            i = np.arange(start, target + 1, dtype=float)
            fresh = self._acc.extend(np.power(i, self.exponent))
            partials = np.concatenate([partials, fresh])
            self._partials = partials
            return partials

    def partials(self, n_max: int) -> np.ndarray:
        """Return ``[S(1), ..., S(n_max)]`` (a read-only view)."""
        view = self._grow(int(n_max))[: int(n_max)]
        view.flags.writeable = False
        return view

    def at(self, n) -> np.ndarray | float:
        """Evaluate ``S(n)`` for an integer or an integer array (all >= 1)."""
        idx = np.asarray(n, dtype=np.int64)
        if idx.size and idx.min() < 1:
            raise ValueError("power sums start at n = 1")
        if idx.size == 0:
            return np.empty(idx.shape)
        partials = self._grow(int(idx.max()))
        out = partials[idx - 1]
        return float(out) if out.ndim == 0 else out


_caches: dict[int, PowerSumCache] = {}
_registry_lock = threading.Lock()


def power_sum_cache(r: float) -> PowerSumCache:
    """Shared cache for exponent ``r``, keyed on its exact bit pattern."""
    key = _key(r)
    cache = _caches.get(key)
    if cache is None:
        with _registry_lock:
            cache = _caches.setdefault(key, PowerSumCache(r))
    return cache


def power_sum(n: int, r: float) -> float:
    """``sum_{i=1}^n i**r`` through the shared cache."""
    if int(n) != n or n < 1:
        raise ValueError(f"power_sum needs an integer n >= 1, got {n!r}")
    return power_sum_cache(r).at(int(n))


def power_sums(n_max: int, r: float) -> np.ndarray:
    """Array ``[S(1, r), ..., S(n_max, r)]``."""
    if n_max < 1:
        raise ValueError(f"power_sums needs n_max >= 1, got {n_max!r}")
    return power_sum_cache(r).partials(n_max)


def scaled_power_sum(n: int, m: int, r: float) -> float:
    """``sum_{i=1}^n (i/m)**r``.

    Uses ``m**-r * S(n, r)`` when that is representable and falls back to a
    term-by-term sum in log form otherwise.
    """
    if n < 1 or m < 1:
        raise ValueError(f"scaled_power_sum needs n, m >= 1, got n={n}, m={m}")
    r = float(r)
    if abs(r * math.log(m)) < _LOG_MAX:
        value = power_sum(n, r) * float(m) ** (-r)
        if math.isfinite(value) and value > 0.0:
            return value
    i = np.arange(1, n + 1, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        terms = np.exp(r * (np.log(i) - math.log(m)))
    if not np.all(np.isfinite(terms)):
        raise OverflowError(f"scaled_power_sum overflows for n={n}, m={m}, r={r}")
    value = math.fsum(terms.tolist())
    if not math.isfinite(value):
        raise OverflowError(f"scaled_power_sum overflows for n={n}, m={m}, r={r}")
    return value


@dataclass(frozen=True)
class ExtrapolationEstimate:
    point_estimate: float
    trend: str  # "increasing" | "decreasing" | "nonmonotone"
    last_delta: float
    theta: float | None = None
    points: tuple = ()


def trend_of(values) -> str:
    """Classify a sequence as increasing, decreasing or nonmonotone.

    Flat stretches are allowed inside a monotone trend, but an entirely
    constant sequence counts as nonmonotone.
    """
    d = np.diff(np.asarray(values, dtype=float))
    if d.size == 0:
        return "nonmonotone"
    up, down = bool((d > 0).any()), bool((d < 0).any())
    if up and not down:
        return "increasing"
    if down and not up:
        return "decreasing"
    return "nonmonotone"


def _pick_geometric(idx: np.ndarray) -> tuple[int, int, int]:
    """Positions of three trace points close to ``m3/rho**2, m3/rho, m3``."""
    last = idx.size - 1
    m3 = idx[last]
    rho = min(10.0, math.sqrt(m3 / idx[0]))
    logs = np.log(idx[:last])
    j2 = int(np.argmin(np.abs(logs - math.log(m3 / rho))))
    if j2 == 0:
        j2 = 1
    j1 = int(np.argmin(np.abs(logs[:j2] - math.log(m3 / rho**2))))
    return j1, j2, last


def extrapolate_limit(trace) -> ExtrapolationEstimate:
    """Fit ``value(m) = L - c * m**-theta`` through three trace points.

    ``trace`` is a sequence of ``(index, value)`` pairs (or an ``(N, 2)``
    array) with strictly increasing indices.  The three points are taken
    roughly geometrically spaced and ending at the last index.  When no
    positive ``theta`` fits, the last value is returned with trend
    ``"nonmonotone"``.  Diagnostic only.
    """
    arr = np.asarray(trace, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("trace must be a sequence of (index, value) pairs")
    if arr.shape[0] < 3:
        raise ValueError(f"extrapolate_limit needs at least 3 points, got {arr.shape[0]}")
    idx, val = arr[:, 0], arr[:, 1]
    if np.any(np.diff(idx) <= 0):
        raise ValueError("trace indices must be strictly increasing")
    trend = trend_of(val)
    last_delta = abs(val[-1] - val[-2])
    j1, j2, j3 = _pick_geometric(idx)
    (m1, m2, m3), (v1, v2, v3) = idx[[j1, j2, j3]], val[[j1, j2, j3]]
    points = tuple((float(m), float(v)) for m, v in ((m1, v1), (m2, v2), (m3, v3)))
    d1, d2 = v2 - v1, v3 - v2
    fallback = ExtrapolationEstimate(float(v3), "nonmonotone", float(last_delta), None, points)
    if d1 == 0.0 or d2 == 0.0 or (d1 > 0) != (d2 > 0):
        return fallback
    target = d1 / d2
    if target <= math.log(m2 / m1) / math.log(m3 / m2):
        return fallback

    def gap(theta):
        a, b, c = m1**-theta, m2**-theta, m3**-theta
        return (a - b) - target * (b - c)

    hi = 1.0
    while gap(hi) < 0.0 and hi < 1e3:
        hi *= 2.0
    if gap(hi) < 0.0:
        return ExtrapolationEstimate(float(v3), trend, float(last_delta), math.inf, points)
    theta = brentq(gap, 1e-9, hi, xtol=1e-14, rtol=1e-12)
    coef = d2 / (m2**-theta - m3**-theta)
    return ExtrapolationEstimate(
        float(v3 + coef * m3**-theta), trend, float(last_delta), float(theta), points
    )
