"""Filter-style feature selection and its correlation/information machinery.

The subset evaluator scores a candidate set by average feature-class
association against average feature-feature redundancy, both measured with
symmetrical uncertainty over equal-frequency discretized columns. A forward
greedy search drives per-release subset selection; MaxRel and mRMR provide
mutual-information baselines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import METRICS
from .errors import EmptySubset, LengthMismatch, SingleClassData, TooFewSamples

DEFAULT_BINS = 10


# --- correlation ----------------------------------------------------------


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; 0 by convention when either side is constant."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise LengthMismatch(f"vector lengths differ: {xa.shape} vs {ya.shape}")
    if xa.size < 2:
        raise TooFewSamples("pearson needs at least 2 samples")
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    sx = float(np.dot(xd, xd))
    sy = float(np.dot(yd, yd))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.dot(xd, yd) / math.sqrt(sx * sy))


# --- discretization -------------------------------------------------------


@dataclass(frozen=True)
class DiscretizedColumn:
    """Per-instance bin indices for one column."""

    codes: np.ndarray
    bin_count: int
    degenerate: bool = False
    source: str | None = None

    def __len__(self) -> int:
        return len(self.codes)


class EqualFrequencyBinner:
    """Quantile binning with deterministic tie handling.

    Instances are ranked by a stable sort; rank r of n maps to bin
    floor(r * bins / n). All occurrences of a tied value share the bin of the
    value's first occurrence in sort order (ties go to the lower bin).
    """

    def __init__(self, bins: int):
        if bins < 2:
            raise ValueError("bins must be >= 2")
        self.bins = bins
        self._distinct: np.ndarray | None = None
        self._distinct_bins: np.ndarray | None = None
        self.degenerate = False

    def fit(self, values: Sequence[float]) -> "EqualFrequencyBinner":
        arr = np.asarray(values, dtype=np.float64)
        n = arr.size
        if n < self.bins:
            raise TooFewSamples(f"need at least {self.bins} values, got {n}")
        sv = np.sort(arr, kind="stable")
        run_starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
        self._distinct = sv[run_starts]
        self._distinct_bins = (run_starts * self.bins) // n
        self.degenerate = self._distinct.size == 1
        return self

    def transform(self, values: Sequence[float]) -> np.ndarray:
        if self._distinct is None:
            raise RuntimeError("binner not fitted")
        arr = np.asarray(values, dtype=np.float64)
        pos = np.searchsorted(self._distinct, arr, side="right") - 1
        pos = np.clip(pos, 0, self._distinct.size - 1)
        return self._distinct_bins[pos].astype(np.int64)

    @property
    def effective_bins(self) -> int:
        return 1 if self.degenerate else self.bins


def discretize_equal_frequency(
    values: Sequence[float], bins: int, source: str | None = None
) -> DiscretizedColumn:
    """Equal-frequency discretization; a constant column degrades to one
    flagged bin instead of failing."""
    binner = EqualFrequencyBinner(bins).fit(values)
    codes = binner.transform(values)
    return DiscretizedColumn(
        codes=codes,
        bin_count=binner.effective_bins,
        degenerate=binner.degenerate,
        source=source,
    )


# --- information measures -------------------------------------------------


def _codes(column) -> np.ndarray:
    if isinstance(column, DiscretizedColumn):
        return column.codes
    return np.asarray(column, dtype=np.int64)


def entropy(column) -> float:
    """Shannon entropy in nats of a discrete column."""
    codes = _codes(column)
    counts = np.bincount(codes)
    counts = counts[counts > 0]
    p = counts / codes.size
    return float(-np.sum(p * np.log(p)))


def mutual_information(a, b) -> float:
    """I(a; b) in nats from the joint histogram of two discrete columns."""
    ca = _codes(a)
    cb = _codes(b)
    if ca.size != cb.size:
        raise LengthMismatch("columns have different instance counts")
    width = int(cb.max()) + 1
    joint = np.bincount(ca * width + cb, minlength=(int(ca.max()) + 1) * width)
    joint = joint.reshape(int(ca.max()) + 1, width).astype(np.float64)
    n = ca.size
    pj = joint / n
    pa = pj.sum(axis=1)
    pb = pj.sum(axis=0)
    mask = pj > 0
    outer = np.outer(pa, pb)
    return float(np.sum(pj[mask] * np.log(pj[mask] / outer[mask])))


def symmetrical_uncertainty(a, b) -> float:
    """SU(a, b) = 2 I(a;b) / (H(a) + H(b)); 0 when both columns are constant."""
    ha = entropy(a)
    hb = entropy(b)
    denom = ha + hb
    if denom == 0.0:
        return 0.0
    mi = mutual_information(a, b)
    return float(2.0 * mi / denom)


# --- subset merit and searches ----------------------------------------------


class _SuTable:
    """Lazily computed symmetrical-uncertainty lookups for one dataset."""

    def __init__(self, X: np.ndarray, y: np.ndarray, bins: int):
        self.X = np.asarray(X, dtype=np.float64)
        self.y_codes = np.asarray(y).astype(np.int64)
        self.bins = bins
        self.n_features = self.X.shape[1]
        self._cols: dict[int, DiscretizedColumn] = {}
        self._fc: dict[int, float] = {}
        self._ff: dict[tuple[int, int], float] = {}

    def column(self, j: int) -> DiscretizedColumn:
        if j not in self._cols:
            self._cols[j] = discretize_equal_frequency(self.X[:, j], self.bins)
        return self._cols[j]

    def feature_class(self, j: int) -> float:
        if j not in self._fc:
            self._fc[j] = symmetrical_uncertainty(self.column(j), self.y_codes)
        return self._fc[j]

    def feature_feature(self, i: int, j: int) -> float:
        key = (i, j) if i < j else (j, i)
        if key not in self._ff:
            self._ff[key] = symmetrical_uncertainty(self.column(key[0]), self.column(key[1]))
        return self._ff[key]

    def merit(self, subset: Sequence[int]) -> float:
        k = len(subset)
        if k == 0:
            raise EmptySubset("merit of an empty subset is undefined")
        mean_fc = sum(self.feature_class(j) for j in subset) / k
        if k == 1:
            mean_ff = 0.0
        else:
            pair_sum = 0.0
            for a in range(k):
                for b in range(a + 1, k):
                    pair_sum += self.feature_feature(subset[a], subset[b])
            mean_ff = pair_sum / (k * (k - 1) / 2)
        radicand = k + k * (k - 1) * mean_ff
        if radicand <= 0.0:
            return 0.0
        return k * mean_fc / math.sqrt(radicand)


def cfs_merit(
    X: np.ndarray, y: np.ndarray, subset: Sequence[int], bins: int = DEFAULT_BINS
) -> float:
    """Correlation-based merit of a feature subset (column indices into X).

    merit = k * mean SU(f, class) / sqrt(k + k (k-1) * mean SU(f_i, f_j)),
    pair mean over unordered pairs; non-positive radicand returns 0.
    """
    if len(subset) == 0:
        raise EmptySubset("subset must be non-empty")
    return _SuTable(np.asarray(X, dtype=np.float64), y, bins).merit(list(subset))


def _check_two_classes(y: np.ndarray):
    y = np.asarray(y)
    if y.size < 2:
        raise TooFewSamples("need at least 2 instances")
    if np.all(y == y.flat[0]):
        raise SingleClassData("training data contains a single class")


def greedy_stepwise_cfs(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str] = METRICS,
    bins: int = DEFAULT_BINS,
) -> tuple[str, ...]:
    """Forward greedy search over subsets, scored by correlation-based merit.

    Starts from the empty set, always takes the best singleton first, then
    adds the feature that strictly improves merit the most; ties resolve to
    the lowest column index. Returns the selected names in ``names`` order.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != len(names):
        raise LengthMismatch("names must match the number of columns")
    _check_two_classes(y)
    table = _SuTable(X, y, bins)

    selected: list[int] = []
    current = -math.inf
    remaining = list(range(X.shape[1]))
    while remaining:
        best_j = None
        best_merit = current
        for j in remaining:
            m = table.merit(selected + [j])
            if m > best_merit:
                best_merit = m
                best_j = j
        if best_j is None:
            break
        selected.append(best_j)
        remaining.remove(best_j)
        current = best_merit
    selected.sort()
    return tuple(names[j] for j in selected)


def _relevance(table: _SuTable) -> list[float]:
    return [
        mutual_information(table.column(j), table.y_codes)
        for j in range(table.n_features)
    ]


def max_rel(
    X: np.ndarray,
    y: np.ndarray,
    k: int,
    names: Sequence[str] = METRICS,
    bins: int = DEFAULT_BINS,
) -> tuple[str, ...]:
    """The k features with the largest mutual information with the class."""
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k <= X.shape[1]:
        raise ValueError(f"k must be in [1, {X.shape[1]}]")
    table = _SuTable(X, y, bins)
    mi = _relevance(table)
    ranked = sorted(range(X.shape[1]), key=lambda j: (-mi[j], j))
    chosen = sorted(ranked[:k])
    return tuple(names[j] for j in chosen)


def mrmr(
    X: np.ndarray,
    y: np.ndarray,
    k: int,
    names: Sequence[str] = METRICS,
    bins: int = DEFAULT_BINS,
) -> tuple[str, ...]:
    """Greedy minimal-redundancy-maximal-relevance selection.

    The first pick maximizes I(f; class); each later pick maximizes
    I(f; class) - mean over already-selected s of I(f; s). Ties resolve to
    the lowest column index.
    """
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k <= X.shape[1]:
        raise ValueError(f"k must be in [1, {X.shape[1]}]")
    table = _SuTable(X, y, bins)
    mi = _relevance(table)

    mi_ff: dict[tuple[int, int], float] = {}

    def redundancy(i: int, j: int) -> float:
        key = (i, j) if i < j else (j, i)
        if key not in mi_ff:
            mi_ff[key] = mutual_information(table.column(key[0]), table.column(key[1]))
        return mi_ff[key]

    selected: list[int] = []
    remaining = list(range(X.shape[1]))
    while len(selected) < k:
        best_j = None
        best_score = -math.inf
        for j in remaining:
            if selected:
                red = sum(redundancy(j, s) for s in selected) / len(selected)
            else:
                red = 0.0
            score = mi[j] - red
            if score > best_score:
                best_score = score
                best_j = j
        selected.append(best_j)
        remaining.remove(best_j)
    selected.sort()
    return tuple(names[j] for j in selected)
