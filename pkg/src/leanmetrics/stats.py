"""Evaluation measures and the statistical comparison machinery.

Everything here is a pure function. The Wilcoxon signed-rank test uses the
exact null distribution (dynamic programming over rank sums) up to n = 20
and a continuity-corrected normal approximation beyond; the one-way ANOVA
p-value comes from a hand-rolled regularized incomplete beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AllZeroDifferences,
    DegenerateTestSet,
    LengthMismatch,
    MatchingFailure,
    TooFewSamples,
)

EXACT_WILCOXON_LIMIT = 20

MEASURE_NAMES = ("precision", "recall", "f_measure")


# --- confusion outcomes -----------------------------------------------------


@dataclass(frozen=True)
class Outcome:
    """Confusion counts for one prediction cell."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.total == 0:
            raise ValueError("an outcome needs at least one instance")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MeasureTriple:
    precision: float
    recall: float
    f_measure: float

    def get(self, name: str) -> float:
        return getattr(self, name)


def measures(o: Outcome) -> MeasureTriple:
    """Precision, recall, F-measure with zero-denominator conventions of 0."""
    precision = o.tp / (o.tp + o.fp) if (o.tp + o.fp) > 0 else 0.0
    recall = o.tp / (o.tp + o.fn) if (o.tp + o.fn) > 0 else 0.0
    if precision + recall > 0:
        f = 2.0 * precision * recall / (precision + recall)
    else:
        f = 0.0
    return MeasureTriple(precision, recall, f)


def consistency(o: Outcome) -> float:
    """Stability of defect-prone retrieval: (d*n - k^2) / (k * (n - k)).

    d is the number of defect-prone classes the model returned correctly
    (TP), k the number of actually defect-prone classes, n the test size.
    Equals 1 exactly when every defect-prone class is retrieved; can go
    negative when few are.
    """
    k = o.tp + o.fn
    n = o.total
    if k == 0 or k == n:
        raise DegenerateTestSet("consistency needs both classes in the test set")
    d = o.tp
    return (d * n - k * k) / (k * (n - k))


# --- order statistics -------------------------------------------------------


def median(values: Sequence[float]) -> float:
    """Even-length samples return the mean of the two central order stats."""
    xs = sorted(values)
    if not xs:
        raise ValueError("median of an empty sample")
    n = len(xs)
    mid = n // 2
    if n % 2:
        return float(xs[mid])
    return (xs[mid - 1] + xs[mid]) / 2.0


@dataclass(frozen=True)
class BoxplotStats:
    low: float
    q1: float
    median: float
    q3: float
    high: float
    outliers: tuple[float, ...]


def boxplot_stats(values: Sequence[float]) -> BoxplotStats:
    """Tukey boxplot summary: whiskers at 1.5 IQR, the rest are outliers."""
    arr = np.asarray(sorted(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("boxplot of an empty sample")
    q1, med, q3 = (float(q) for q in np.percentile(arr, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = tuple(float(v) for v in arr[(arr < lo_fence) | (arr > hi_fence)])
    return BoxplotStats(float(inside[0]), q1, med, q3, float(inside[-1]), outliers)


# --- Wilcoxon signed-rank -----------------------------------------------------


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties replaced by the average rank of the tie block."""
    order = np.argsort(values, kind="stable")
    sv = values[order]
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < sv.size:
        j = i
        while j + 1 < sv.size and sv[j + 1] == sv[i]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def _exact_signed_rank_p(ranks: np.ndarray, w_plus: float) -> float:
    """Two-sided exact p by counting all 2^n sign assignments.

    Ranks are multiples of 0.5 (average ranks), so doubling them yields an
    integer knapsack; counts stay below 2^53 for n <= 20 and remain exact in
    float64.
    """
    doubled = np.rint(ranks * 2.0).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.concatenate([np.zeros(r), counts[: total + 1 - r]])
        counts = counts + shifted
    n = ranks.size
    denom = 2.0 ** n
    w2 = int(round(w_plus * 2.0))
    p_le = float(counts[: w2 + 1].sum()) / denom
    p_ge = float(counts[w2:].sum()) / denom
    return min(1.0, 2.0 * min(p_le, p_ge))


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class WilcoxonResult:
    p: float
    n: int
    w_plus: float
    method: str  # "exact" or "approx"


def wilcoxon_signed_rank(
    a: Sequence[float],
    b: Sequence[float],
    exact_limit: int = EXACT_WILCOXON_LIMIT,
) -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped (Wilcoxon's rule); tied absolute
    differences receive average ranks. The exact distribution is used for
    effective n <= ``exact_limit``, otherwise a normal approximation with
    continuity and tie corrections.
    """
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.shape != xb.shape or xa.ndim != 1:
        raise LengthMismatch("paired samples must have equal lengths")
    diffs = xa - xb
    nonzero = diffs[diffs != 0.0]
    if nonzero.size == 0:
        raise AllZeroDifferences("all paired differences are zero")
    if nonzero.size < 5:
        raise TooFewSamples(
            f"need >= 5 non-zero differences, got {nonzero.size}"
        )
    ranks = _average_ranks(np.abs(nonzero))
    w_plus = float(ranks[nonzero > 0].sum())
    n = nonzero.size
    if n <= exact_limit:
        p = _exact_signed_rank_p(ranks, w_plus)
        return WilcoxonResult(p, n, w_plus, "exact")

    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction over blocks of equal |difference|
    _, tie_counts = np.unique(np.abs(nonzero), return_counts=True)
    var -= float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if var <= 0:
        return WilcoxonResult(1.0, n, w_plus, "approx")
    delta = w_plus - mu
    correction = 0.5 * math.copysign(1.0, delta) if delta != 0 else 0.0
    z = (delta - correction) / math.sqrt(var)
    p = min(1.0, 2.0 * (1.0 - _norm_cdf(abs(z))))
    return WilcoxonResult(p, n, w_plus, "approx")


# --- Cliff's delta ------------------------------------------------------------


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> float:
    """(#{a_i > b_j} - #{a_i < b_j}) / (|a| |b|); negative means b is higher."""
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.size == 0 or xb.size == 0:
        raise ValueError("both samples must be non-empty")
    diff = xa[:, None] - xb[None, :]
    greater = int(np.count_nonzero(diff > 0))
    less = int(np.count_nonzero(diff < 0))
    return (greater - less) / (xa.size * xb.size)


# --- one-way ANOVA --------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_survival(f: float, df1: int, df2: int) -> float:
    """P(F_{df1, df2} > f)."""
    if f <= 0.0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


@dataclass(frozen=True)
class AnovaResult:
    f: float
    p: float
    df_between: int
    df_within: int
    ss_between: float
    ss_within: float
    ms_between: float
    ms_within: float
    zero_within: bool = False


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """Standard between/within decomposition with an F-distribution p-value."""
    if len(groups) < 2:
        raise TooFewSamples("ANOVA needs at least 2 groups")
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    for g in arrays:
        if g.size < 2:
            raise TooFewSamples("every ANOVA group needs at least 2 samples")
    n_total = sum(g.size for g in arrays)
    grand = sum(float(g.sum()) for g in arrays) / n_total
    ss_between = sum(g.size * (float(g.mean()) - grand) ** 2 for g in arrays)
    ss_within = sum(float(((g - g.mean()) ** 2).sum()) for g in arrays)
    df_between = len(arrays) - 1
    df_within = n_total - len(arrays)
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ss_within == 0.0:
        if ss_between == 0.0:
            return AnovaResult(0.0, 1.0, df_between, df_within,
                               ss_between, ss_within, ms_between, ms_within, True)
        return AnovaResult(math.inf, 0.0, df_between, df_within,
                           ss_between, ss_within, ms_between, ms_within, True)
    f = ms_between / ms_within
    p = f_survival(f, df_between, df_within)
    return AnovaResult(f, p, df_between, df_within,
                       ss_between, ss_within, ms_between, ms_within, False)


# --- method comparison -----------------------------------------------------------


@dataclass(frozen=True)
class MeasureComparison:
    measure: str
    median_a: float
    median_b: float
    ratio: float          # median_b / median_a
    p: float | None       # None when the test could not run
    p_method: str         # "exact", "approx", "no_difference", "too_few"
    cliffs_d: float
    n: int
    acceptable: bool
    ratio_degenerate: bool = False


@dataclass(frozen=True)
class ComparisonReport:
    label_a: str
    label_b: str
    cells: tuple[MeasureComparison, ...]

    def cell(self, measure: str) -> MeasureComparison:
        for c in self.cells:
            if c.measure == measure:
                return c
        raise KeyError(measure)


def compare_methods(
    rows_a: Mapping[object, MeasureTriple] | Sequence[tuple[object, MeasureTriple]],
    rows_b: Mapping[object, MeasureTriple] | Sequence[tuple[object, MeasureTriple]],
    label_a: str = "A",
    label_b: str = "B",
    measure_names: Sequence[str] = MEASURE_NAMES,
    ratio_threshold: float = 0.9,
    p_threshold: float = 0.01,
) -> ComparisonReport:
    """Compare two matched sets of result rows, B against benchmark A.

    Rows are keyed (typically by target, scenario and classifier) and must
    match one-to-one. Per measure: medians, the B/A median ratio, a paired
    Wilcoxon signed-rank p, and Cliff's delta with A on the left. A cell is
    acceptable when the ratio exceeds ``ratio_threshold`` or the
    distributions show no significant difference (p above ``p_threshold``).
    """
    map_a = dict(rows_a)
    map_b = dict(rows_b)
    only_a = sorted((k for k in map_a if k not in map_b), key=repr)
    only_b = sorted((k for k in map_b if k not in map_a), key=repr)
    if only_a or only_b:
        raise MatchingFailure(only_a, only_b)
    keys = sorted(map_a, key=repr)
    cells = []
    for name in measure_names:
        va = [map_a[k].get(name) for k in keys]
        vb = [map_b[k].get(name) for k in keys]
        med_a = median(va)
        med_b = median(vb)
        degenerate = med_a == 0.0
        if degenerate:
            ratio = 1.0 if med_b == 0.0 else math.inf
        else:
            ratio = med_b / med_a
        p: float | None
        try:
            res = wilcoxon_signed_rank(va, vb)
            p, p_method = res.p, res.method
        except AllZeroDifferences:
            p, p_method = None, "no_difference"
        except TooFewSamples:
            p, p_method = None, "too_few"
        d = cliffs_delta(va, vb)
        acceptable = (ratio > ratio_threshold) or (
            p is not None and p > p_threshold
        ) or p_method == "no_difference"
        cells.append(
            MeasureComparison(
                measure=name,
                median_a=med_a,
                median_b=med_b,
                ratio=ratio,
                p=p,
                p_method=p_method,
                cliffs_d=d,
                n=len(keys),
                acceptable=acceptable,
                ratio_degenerate=degenerate,
            )
        )
    return ComparisonReport(label_a, label_b, tuple(cells))


# --- threshold counting --------------------------------------------------------


@dataclass(frozen=True)
class ThresholdCounts:
    precision: int
    recall: int
    f_measure: int
    total: int


def threshold_counts(
    rows: Iterable[MeasureTriple],
    precision_threshold: float = 0.5,
    recall_threshold: float = 0.7,
    f_threshold: float = 0.583,
) -> ThresholdCounts:
    """Count rows strictly exceeding each threshold; total requires both the
    precision and recall conditions simultaneously."""
    n_p = n_r = n_f = n_t = 0
    for row in rows:
        if row.precision > precision_threshold:
            n_p += 1
        if row.recall > recall_threshold:
            n_r += 1
        if row.f_measure > f_threshold:
            n_f += 1
        if row.precision > precision_threshold and row.recall > recall_threshold:
            n_t += 1
    return ThresholdCounts(n_p, n_r, n_f, n_t)
