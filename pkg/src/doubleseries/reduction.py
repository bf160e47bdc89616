"""Unit-vector reduction, constant estimation and randomized verification.

When ``a(n,k)/c(k)`` increases in ``k``, an upper-triangular inequality holds
for every non-negative sequence iff it holds at every coordinate vector
``e^(m)``.  The best constant is therefore the extremum over ``m`` of

    U(m) = lhs(e^(m)) / rhs(e^(m))**(e_left / e_right)

and both sides at ``e^(m)`` are prefix sums of the row factors, so a scan to
``M`` costs ``O(M)``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ScanWarning
from .families import (
    DISTRIBUTIONS,
    LE,
    CONVERGENCE_BUDGET,
    FiniteSequence,
    InequalityInstance,
    check_monotone_hypothesis,
    claimed_constant,
    lhs_value,
    random_sequence,
    rhs_value,
)
from .numerics import ExtrapolationEstimate, extrapolate_limit, prefix_sums, trend_of

__all__ = [
    "ConstantEstimate",
    "CriterionReport",
    "CrosscheckReport",
    "RatioTrace",
    "VerificationReport",
    "best_constant",
    "criterion_check",
    "randomized_verify",
    "ratio_scan",
    "sharpness_probe",
    "substitution_form",
    "thm31_crosscheck",
    "trial_seed",
    "unit_vector_sides",
    "verify_on_sequence",
]

VERIFY_SLACK = 1e-9


def _require_upper(inst: InequalityInstance):
    if not inst.is_upper:
        raise DomainError(
            f"{inst.family.value} is not upper-triangular; the unit-vector reduction does not apply"
        )


def _unit_arrays(inst: InequalityInstance, M: int):
    """Both displayed sides at ``e^(1..M)`` plus their logs.

    Returns ``(lhs, rhs, log_lhs, log_rhs)``.  Logs are taken factor by factor
    so that they stay finite when the side itself under- or overflows.
    """
    m = np.arange(1.0, M + 1.0)
    p, q = inst.p, inst.q
    with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
        b = inst.row_weight(m)
        c = inst.col_weight(m)
        w_pref = prefix_sums(np.power(b, p))
        weighted = np.power(c, p) * w_pref
        log_weighted = p * np.log(c) + np.log(w_pref)
        if inst.matrix_factors is not None:
            row, col = inst.matrix_factors
            m_pref = prefix_sums(np.power(row(m), q))
            colm = col(m)
            matrix = np.power(colm, q) * m_pref
            log_matrix = q * np.log(colm) + np.log(m_pref)
        else:
            matrix = np.empty(M)
            for j in range(M):
                n = np.arange(1.0, j + 2.0)
                matrix[j] = math.fsum(np.power(inst.kernel(n, m[j]), q).tolist())
            log_matrix = np.log(matrix)
    if inst.left == "matrix":
        return matrix, weighted, log_matrix, log_weighted
    return weighted, matrix, log_weighted, log_matrix


def unit_vector_sides(inst: InequalityInstance, m: int) -> tuple[float, float]:
    """``(lhs, rhs)`` at ``e^(m)`` from the closed product form.

    For the applications this is ``(col(m)**q * sum_{n<=m} row(n)**q,
    c(m)**p * sum_{n<=m} b(n)**p)``.
    """
    _require_upper(inst)
    if m < 1:
        raise ValueError("m must be >= 1")
    lhs, rhs, _, _ = _unit_arrays(inst, int(m))
    lo, ro = float(lhs[-1]), float(rhs[-1])
    if not ro > 0:
        raise DomainError(f"degenerate instance: right side vanishes at e^({m})")
    return lo, ro


@dataclass
class RatioTrace:
    m: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    U: np.ndarray
    running_sup: float
    running_inf: float
    arg_sup: int
    arg_inf: int
    extrapolation: ExtrapolationEstimate | None
    requested_M: int
    truncated: bool = False
    overflow: bool = False

    @property
    def M(self) -> int:
        return int(self.m[-1])

    @property
    def trend(self) -> str:
        return trend_of(self.U)

    def pairs(self):
        return np.column_stack([self.m, self.U])


def ratio_scan(inst: InequalityInstance, M: int) -> RatioTrace:
    """Compute ``U(m)`` for ``m = 1..M`` with running extrema.

    If the ratio stops being representable the scan is cut at the last
    finite ``m`` and a :class:`ScanWarning` is emitted.
    """
    _require_upper(inst)
    M = int(M)
    if M < 1:
        raise ValueError("M must be >= 1")
    lhs, rhs, llhs, lrhs = _unit_arrays(inst, M)
    e = inst.side_ratio_exponent
    with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
        direct = lhs / np.power(rhs, e)
        via_log = np.exp(llhs - e * lrhs)
    ok_direct = np.isfinite(direct) & (lhs > 0) & (rhs > 0) & np.isfinite(lhs) & np.isfinite(rhs)
    U = np.where(ok_direct, direct, via_log)
    overflow = not bool(ok_direct.all())
    good = np.isfinite(U) & (U > 0)
    truncated = False
    if not good.all():
        stop = int(np.argmin(good))
        if stop == 0:
            raise OverflowError(f"U(1) is not representable for {inst.label()}")
        truncated = True
        warnings.warn(
            f"ratio scan for {inst.label()} truncated at m={stop} (overflow)", ScanWarning, stacklevel=2
        )
        lhs, rhs, U = lhs[:stop], rhs[:stop], U[:stop]
    m = np.arange(1, U.size + 1)
    i_sup, i_inf = int(np.argmax(U)), int(np.argmin(U))
    extrap = extrapolate_limit(np.column_stack([m, U])) if U.size >= 3 else None
    return RatioTrace(
        m=m, lhs=lhs, rhs=rhs, U=U,
        running_sup=float(U[i_sup]), running_inf=float(U[i_inf]),
        arg_sup=i_sup + 1, arg_inf=i_inf + 1,
        extrapolation=extrap, requested_M=M, truncated=truncated, overflow=overflow,
    )


@dataclass
class ConstantEstimate:
    value: float
    arg: int
    selection: str  # "sup" or "inf"
    extrapolated: float | None
    trend: str
    claimed: float | None
    gap: float | None
    converged: bool
    M: int
    warnings: list = field(default_factory=list)

    def within_budget(self, budget: float, slack: float = VERIFY_SLACK) -> bool:
        """Estimate below the claim (up to slack) and at least ``(1-budget)`` of it."""
        if self.claimed is None:
            return False
        c = self.claimed
        if self.selection == "sup":
            return self.value <= c * (1 + slack) and self.value >= (1 - budget) * c
        return self.value >= c * (1 - slack) and self.value <= (1 + budget) * c


def best_constant(inst: InequalityInstance, M: int = 10**5, tol: float = 1e-3) -> ConstantEstimate:
    """Estimate the sharp constant as the extremum of ``U(m)`` over ``m <= M``.

    ``lhs <= K rhs`` instances take the supremum, reversed ones the infimum.
    ``tol`` is the relative distance between the extremum and the
    extrapolated limit below which the scan is reported as converged.
    """
    trace = ratio_scan(inst, M)
    notes = []
    if inst.direction == LE:
        value, arg, sel = trace.running_sup, trace.arg_sup, "sup"
    else:
        value, arg, sel = trace.running_inf, trace.arg_inf, "inf"
    trend = trace.trend
    extrap = trace.extrapolation.point_estimate if trace.extrapolation else None
    if trend == "nonmonotone" and arg == trace.M and trace.M > 1:
        notes.append("scan may be unconverged")
    if trace.truncated:
        notes.append(f"scan truncated at m={trace.M}")
    try:
        claimed = claimed_constant(inst)
    except DomainError:
        claimed = None
    gap = None if claimed is None else (claimed - value) / claimed
    if arg < trace.M:
        converged = True  # attained at an interior index
    else:
        converged = extrap is not None and abs(extrap - value) <= tol * abs(value)
    if inst.family.value != "custom":
        mono = check_monotone_hypothesis(inst, min(trace.M, 200)) if trace.M >= 2 else None
        if mono is not None and not mono.passed:
            notes.append(f"monotone hypothesis fails at (n, k) = {mono.first_violation}")
    for note in notes:
        warnings.warn(f"{inst.label()}: {note}", ScanWarning, stacklevel=2)
    return ConstantEstimate(
        value=value, arg=arg, selection=sel, extrapolated=extrap, trend=trend,
        claimed=claimed, gap=gap, converged=converged, M=trace.M, warnings=notes,
    )


def verify_on_sequence(inst: InequalityInstance, x, K: float) -> float:
    """Signed margin of the inequality with constant ``K`` at ``x``.

    ``K * rhs**e - lhs`` for ``lhs <= K rhs`` instances (reversed otherwise);
    non-negative means the inequality holds at ``x``.
    """
    x = x if isinstance(x, FiniteSequence) else FiniteSequence(x)
    lhs, rhs = lhs_value(inst, x), rhs_value(inst, x)
    bound = K * rhs ** inst.side_ratio_exponent
    return bound - lhs if inst.direction == LE else lhs - bound


def _relative_margin(inst, x, K):
    lhs, rhs = lhs_value(inst, x), rhs_value(inst, x)
    bound = K * rhs ** inst.side_ratio_exponent
    margin = bound - lhs if inst.direction == LE else lhs - bound
    scale = max(abs(lhs), abs(bound))
    return margin / scale if scale > 0 else 0.0


@dataclass
class VerificationReport:
    trials: int
    violations: int
    worst_margin: float  # relative: margin / max(lhs, K * rhs)
    worst_seed: int
    worst_trial: int
    worst_distribution: str
    config: dict

    @property
    def passed(self) -> bool:
        return self.violations == 0


def trial_seed(seed: int, trial: int) -> int:
    """64-bit seed for one trial, derived from the run seed and trial index."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


def randomized_verify(
    inst: InequalityInstance,
    trials: int = 1000,
    seed: int = 42,
    N_max: int = 64,
    K: float | None = None,
    slack: float = VERIFY_SLACK,
    workers: int = 1,
) -> VerificationReport:
    """Check the inequality with constant ``K`` (default: the claimed one) on random sequences.

    Trial ``i`` uses distribution ``DISTRIBUTIONS[i % 3]`` and its own seed
    :func:`trial_seed` ``(seed, i)``, so the report does not depend on
    ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if K is None:
        K = claimed_constant(inst)

    def run(i):
        ts = trial_seed(seed, i)
        dist = DISTRIBUTIONS[i % len(DISTRIBUTIONS)]
        x = random_sequence(ts, N_max, dist)
        return _relative_margin(inst, x, K)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            margins = list(pool.map(run, range(trials)))
    else:
        margins = [run(i) for i in range(trials)]
    margins = np.asarray(margins)
    worst = int(np.argmin(margins))
    return VerificationReport(
        trials=trials,
        violations=int(np.sum(margins < -slack)),
        worst_margin=float(margins[worst]),
        worst_seed=trial_seed(seed, worst),
        worst_trial=worst,
        worst_distribution=DISTRIBUTIONS[worst % len(DISTRIBUTIONS)],
        config={
            "instance": inst.label(), "direction": inst.direction, "K": float(K),
            "trials": trials, "seed": int(seed), "N_max": int(N_max), "slack": slack,
        },
    )


def sharpness_probe(inst: InequalityInstance, m_list) -> list[tuple[int, float]]:
    """``U(m)`` at each requested ``m``."""
    m_list = [int(m) for m in m_list]
    if not m_list:
        raise ValueError("m_list must be non-empty")
    trace = ratio_scan(inst, max(m_list))
    return [(m, float(trace.U[m - 1])) for m in m_list if m <= trace.M]


# criterion for non-increasing sequences ------------------------------------------


@dataclass
class CriterionReport:
    m: np.ndarray
    left: np.ndarray
    right: np.ndarray
    holds: np.ndarray
    regime: str  # "standard" (left >= right) or "reversed" (left <= right)
    first_failure: int | None
    criterion_constant: float  # best C the criterion allows
    base: np.ndarray = field(repr=False, default=None)  # (sum_{n<=m} b_n)**(1/p)

    @property
    def passed(self) -> bool:
        return self.first_failure is None

    @property
    def ratios(self) -> np.ndarray:
        """``left(m) / base(m)``, i.e. the criterion at ``C = 1``."""
        return self.left / self.base


def _regime(p, q, reversed_):
    if reversed_ is None:
        if p >= 1 and 0 < q <= p:
            return "standard"
        if 0 < p <= 1 and q >= p:
            return "reversed"
        raise DomainError(f"criterion needs p >= 1, 0 < q <= p or p <= 1, q >= p (got p={p}, q={q})")
    return "reversed" if reversed_ else "standard"


def criterion_check(matrix, b, C: float, p: float, q: float, M: int | None = None,
                    reversed: bool | None = None, rtol: float = 1e-12) -> CriterionReport:
    """Evaluate, for every ``m <= M``,

        (sum_n (sum_{k<=m} a[n,k])**q)**(1/q)  >=  C (sum_{n<=m} b_n)**(1/p)

    (``<=`` in the reversed regime ``p <= 1 <= q/p``).  ``matrix`` is indexed
    ``[n-1, k-1]``.
    """
    A = np.asarray(matrix, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    M = A.shape[1] if M is None else int(M)
    if M > A.shape[1] or M > b.size:
        raise ValueError("M exceeds the matrix or weight size")
    regime = _regime(p, q, reversed)
    heads = np.cumsum(A[:, :M], axis=1)  # row n, column m-1: sum_{k<=m} a[n,k]
    left = np.array([math.fsum(col) for col in np.power(heads, q).T.tolist()]) ** (1.0 / q)
    base = prefix_sums(b[:M]) ** (1.0 / p)
    right = C * base
    if regime == "standard":
        holds = left >= right * (1 - rtol)
    else:
        holds = left <= right * (1 + rtol)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = left / base
    best = float(np.min(ratios) if regime == "standard" else np.max(ratios))
    first = None if holds.all() else int(np.argmin(holds)) + 1
    return CriterionReport(
        m=np.arange(1, M + 1), left=left, right=right, holds=holds, regime=regime,
        first_failure=first, criterion_constant=best, base=base,
    )


def _form_31(A, b, x, p, q):
    inner = A[:, : x.size] @ x
    left = math.fsum(np.power(inner, q).tolist()) ** (1.0 / q)
    right = math.fsum((b[: x.size] * np.power(x, p)).tolist()) ** (1.0 / p)
    return left, right


@dataclass
class CrosscheckReport:
    criterion: CriterionReport
    trials: int
    violations: int
    worst_margin: float
    witness_m: int | None
    witness_violates: bool | None
    consistent: bool


def thm31_crosscheck(matrix, b, C: float, p: float, q: float, M: int | None = None,
                     trials: int = 500, seed: int = 0, reversed: bool | None = None,
                     slack: float = VERIFY_SLACK) -> CrosscheckReport:
    """Compare the criterion with the inequality on random non-increasing sequences.

    If the criterion holds for every ``m``, no sampled sequence may violate
    the inequality beyond ``slack``.  If it fails at ``m``, the flat head
    ``x = 1_{k <= m}`` must violate it.
    """
    A = np.asarray(matrix, dtype=float)
    b = np.asarray(b, dtype=float)
    crit = criterion_check(A, b, C, p, q, M, reversed)
    M = crit.m.size
    std = crit.regime == "standard"
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    violations, worst = 0, math.inf
    for _ in range(trials):
        L = int(rng.integers(1, M + 1))
        x = np.sort(rng.random(L) + 1e-12)[::-1]
        left, right = _form_31(A, b, x, p, q)
        margin = (left - C * right) if std else (C * right - left)
        scale = max(left, C * right)
        rel = margin / scale if scale > 0 else 0.0
        worst = min(worst, rel)
        violations += rel < -slack
    witness_m = crit.first_failure
    witness_violates = None
    if witness_m is not None:
        left, right = _form_31(A, b, np.ones(witness_m), p, q)
        witness_violates = bool(left < C * right if std else left > C * right)
    if crit.passed:
        consistent = violations == 0
    else:
        consistent = bool(witness_violates)
    return CrosscheckReport(
        criterion=crit, trials=trials, violations=int(violations), worst_margin=float(worst),
        witness_m=witness_m, witness_violates=witness_violates, consistent=consistent,
    )


def substitution_form(inst: InequalityInstance, M: int):
    """Rewrite an upper-triangular instance in non-increasing-sequence form.

    With ``y_n = sum_{k>=n} c_k x_k`` the weighted side becomes
    ``sum b_n**p y_n**p`` and the matrix side uses the differenced matrix
    ``a(n,k)/c(k) - a(n,k-1)/c(k-1)``.  Returns ``(matrix, weights)`` truncated
    to ``M x M``; the matrix is non-negative exactly when the monotone
    hypothesis holds.
    """
    _require_upper(inst)
    n = np.arange(1.0, M + 1.0)[:, None]
    k = np.arange(1.0, M + 1.0)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(k >= n, inst.kernel(n, k) / inst.col_weight(k), 0.0)
    D = np.diff(R, axis=1, prepend=0.0)
    weights = np.power(inst.row_weight(n.ravel()), inst.p)
    return D, weights


def documented_budget(inst: InequalityInstance) -> float:
    return CONVERGENCE_BUDGET.get(inst.family, 0.0)

