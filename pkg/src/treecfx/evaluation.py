"""Evaluation metrics over paired counterfactual result sets.

Pairwise metrics (mean distance, mean relative distance, fraction closer) are
computed on the set of instances where *both* methods produced a valid
example, and the intersection size is always reported so coverage shrinkage
stays visible. Significance uses Welch's unequal-variance two-sample t-test
with the p-value from an own continued-fraction incomplete-beta evaluation,
so no statistics library is needed at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distances import Distance
from .results import CounterfactualResult

SIGNIFICANCE_LEVEL = 0.05

_CF_EPS = 1e-15
_CF_FPMIN = 1e-300
_CF_MAXIT = 300


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by Lentz continued fraction, accurate to ~1e-14."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def two_tailed_t_test(sample_a, sample_b) -> tuple[float, float]:
    """Welch unequal-variance two-sample t statistic and two-sided p-value.

    Degrees of freedom follow Welch-Satterthwaite. Two zero-variance samples
    give (0, 1) when the means agree and (+/-inf, 0) when they do not.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least 2 entries")
    va = float(np.var(a, ddof=1))
    vb = float(np.var(b, ddof=1))
    diff = float(np.mean(a) - np.mean(b))
    if va == 0.0 and vb == 0.0:
        if diff == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, diff), 0.0
    sa = va / a.size
    sb = vb / b.size
    t = diff / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (a.size - 1) + sb**2 / (b.size - 1))
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return t, min(max(p, 0.0), 1.0)


def mean_distance(X, Xbar, distance: Distance) -> float:
    """Average distance over paired rows of X and Xbar."""
    X = np.asarray(X, dtype=float)
    Xbar = np.asarray(Xbar, dtype=float)
    if X.shape != Xbar.shape:
        raise ValueError("X and Xbar must pair up row by row")
    if X.shape[0] == 0:
        raise ValueError("mean distance over an empty set")
    return float(np.mean(distance.batch_value(X, Xbar)))


def _relative_ratios(X, Xbar_a, Xbar_b, distance: Distance) -> tuple[np.ndarray, int]:
    X = np.asarray(X, dtype=float)
    Xbar_a = np.asarray(Xbar_a, dtype=float)
    Xbar_b = np.asarray(Xbar_b, dtype=float)
    if not (X.shape == Xbar_a.shape == Xbar_b.shape):
        raise ValueError("X, Xbar_a and Xbar_b must pair up row by row")
    da = distance.batch_value(X, Xbar_a)
    db = distance.batch_value(X, Xbar_b)
    keep = db != 0.0
    return da[keep] / db[keep], int(np.count_nonzero(~keep))


def mean_relative_distance(X, Xbar_a, Xbar_b, distance: Distance) -> float:
    """Mean per-instance ratio d(x, xbar_a) / d(x, xbar_b); a value below 1
    means method a is closer on average. Pairs with a zero denominator are
    excluded (their count surfaces in the evaluation report)."""
    ratios, _ = _relative_ratios(X, Xbar_a, Xbar_b, distance)
    if ratios.size == 0:
        raise ValueError("no pairs with a nonzero reference distance")
    return float(np.mean(ratios))


def pct_closer(X, Xbar_a, Xbar_b, distance: Distance) -> float:
    """Fraction of pairs where method a is strictly closer than method b."""
    X = np.asarray(X, dtype=float)
    Xbar_a = np.asarray(Xbar_a, dtype=float)
    Xbar_b = np.asarray(Xbar_b, dtype=float)
    if not (X.shape == Xbar_a.shape == Xbar_b.shape):
        raise ValueError("X, Xbar_a and Xbar_b must pair up row by row")
    if X.shape[0] == 0:
        raise ValueError("pct_closer over an empty set")
    da = distance.batch_value(X, Xbar_a)
    db = distance.batch_value(X, Xbar_b)
    return float(np.mean(da < db))


@dataclass
class EvaluationReport:
    """One comparison cell: method_a evaluated against reference method_b."""

    method_a: str
    method_b: str
    n: int
    n_valid_a: int
    n_valid_b: int
    n_compared: int
    n_ratio_excluded: int
    d_mean_a: float
    d_mean_b: float
    d_rmean: float
    pct_closer: float
    t_stat: float
    p_value: float
    marker: str
    dataset: str = ""
    model: str = ""
    distance: str = ""


def compare_result_sets(
    results_a: list[CounterfactualResult],
    results_b: list[CounterfactualResult],
    distance: Distance,
    dataset: str = "",
    model: str = "",
    distance_name: str = "",
) -> EvaluationReport:
    """Build the full comparison cell from two result sets over the same instances.

    Result sets must share the instance index set; all pairwise metrics are
    restricted to indices valid under both methods.
    """
    by_index_a = {r.index: r for r in results_a}
    by_index_b = {r.index: r for r in results_b}
    if sorted(by_index_a) != sorted(by_index_b) or len(by_index_a) != len(results_a):
        raise ValueError("result sets do not share the same instance indices")
    indices = sorted(by_index_a)
    n = len(indices)
    n_valid_a = sum(by_index_a[i].valid for i in indices)
    n_valid_b = sum(by_index_b[i].valid for i in indices)
    both = [i for i in indices if by_index_a[i].valid and by_index_b[i].valid]
    method_a = results_a[0].method if results_a else "a"
    method_b = results_b[0].method if results_b else "b"
    if not both:
        return EvaluationReport(
            method_a=method_a, method_b=method_b, n=n,
            n_valid_a=n_valid_a, n_valid_b=n_valid_b, n_compared=0, n_ratio_excluded=0,
            d_mean_a=math.nan, d_mean_b=math.nan, d_rmean=math.nan, pct_closer=math.nan,
            t_stat=math.nan, p_value=math.nan, marker="none",
            dataset=dataset, model=model, distance=distance_name,
        )
    X = np.vstack([by_index_a[i].original for i in both])
    Xa = np.vstack([by_index_a[i].counterfactual for i in both])
    Xb = np.vstack([by_index_b[i].counterfactual for i in both])
    da = distance.batch_value(X, Xa)
    db = distance.batch_value(X, Xb)
    ratios, n_excluded = _relative_ratios(X, Xa, Xb, distance)
    d_rmean = float(np.mean(ratios)) if ratios.size else math.nan
    if len(both) >= 2:
        t_stat, p_value = two_tailed_t_test(da, db)
    else:
        t_stat, p_value = math.nan, math.nan
    d_mean_a = float(np.mean(da))
    d_mean_b = float(np.mean(db))
    if p_value == p_value and p_value < SIGNIFICANCE_LEVEL and d_mean_a != d_mean_b:
        marker = "improvement" if d_mean_a < d_mean_b else "loss"
    else:
        marker = "none"
    return EvaluationReport(
        method_a=method_a, method_b=method_b, n=n,
        n_valid_a=n_valid_a, n_valid_b=n_valid_b, n_compared=len(both),
        n_ratio_excluded=n_excluded,
        d_mean_a=d_mean_a, d_mean_b=d_mean_b, d_rmean=d_rmean,
        pct_closer=float(np.mean(da < db)),
        t_stat=t_stat, p_value=p_value, marker=marker,
        dataset=dataset, model=model, distance=distance_name,
    )


def report_csv(cells: list[EvaluationReport]) -> str:
    """CSV rendering, one reference row and one candidate row per cell."""
    ref = cells[0].method_b if cells else "ref"
    lines = [
        f"dataset,model,distance,method,d_mean,d_Rmean_vs_{ref},pct_closer_vs_{ref},"
        "n_valid,n_compared,p_value,marker"
    ]
    for c in cells:
        prefix = f"{c.dataset},{c.model},{c.distance}"
        lines.append(f"{prefix},{c.method_b},{c.d_mean_b},,,{c.n_valid_b},{c.n_compared},,")
        lines.append(
            f"{prefix},{c.method_a},{c.d_mean_a},{c.d_rmean},{c.pct_closer},"
            f"{c.n_valid_a},{c.n_compared},{c.p_value},{c.marker}"
        )
    return "\n".join(lines) + "\n"


def report_text(cells: list[EvaluationReport]) -> str:
    """Aligned text table grouped per cell, metric by method."""
    out = []
    for c in cells:
        header = " / ".join(v for v in (c.dataset, c.model, c.distance) if v)
        out.append(header or f"{c.method_a} vs {c.method_b}")
        out.append(
            f"  N={c.n}  valid[{c.method_a}]={c.n_valid_a}  valid[{c.method_b}]={c.n_valid_b}"
            f"  compared={c.n_compared}"
        )
        rows = [
            ("d_mean", c.method_b, f"{c.d_mean_b:.6g}", ""),
            ("d_mean", c.method_a, f"{c.d_mean_a:.6g}",
             f"{c.marker} (p={c.p_value:.3g})" if c.p_value == c.p_value else ""),
            ("d_Rmean", f"{c.method_a}/{c.method_b}", f"{c.d_rmean:.6g}", ""),
            ("pct_closer", f"{c.method_a}<{c.method_b}",
             f"{100.0 * c.pct_closer:.1f}%" if c.pct_closer == c.pct_closer else "nan", ""),
        ]
        for metric, who, val, note in rows:
            out.append(f"  {metric:<11} {who:<14} {val:>12}  {note}".rstrip())
        if c.n_ratio_excluded:
            out.append(f"  pairs excluded for zero reference distance: {c.n_ratio_excluded}")
        out.append("")
    return "\n".join(out)
