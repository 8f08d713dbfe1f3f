"""Top-k subset derivation and correlation-based minimization.

Per-release filter subsets are tallied into occurrence counts; the Coverage
index (mean Jaccard overlap between a candidate and every filter subset)
picks the subset size and, after strongly correlated pairs are eliminated,
ranks the surviving combinations to yield the minimum metric subset.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import METRICS, Corpus, Release, pooled_matrix
from .errors import UnknownMetric
from .features import pearson

Combination = tuple[str, ...]


@dataclass(frozen=True)
class OccurrenceTally:
    """How many filter subsets each metric appears in."""

    names: tuple[str, ...]
    counts: tuple[int, ...]
    n_datasets: int

    def count(self, name: str) -> int:
        return self.counts[self.names.index(name)]

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.names, self.counts))


@dataclass(frozen=True)
class CoveragePoint:
    k: int
    subset: tuple[str, ...]
    coverage: float


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric per-pair medians over per-target training correlations."""

    names: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]
    skipped_targets: tuple[tuple[str, str], ...] = ()

    def entry(self, a: str, b: str) -> float:
        return self.values[self.names.index(a)][self.names.index(b)]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)


def _index_of(names: Sequence[str]) -> dict[str, int]:
    return {name: i for i, name in enumerate(names)}


def tally_occurrences(
    filter_subsets: Sequence[Iterable[str]], names: Sequence[str] = METRICS
) -> OccurrenceTally:
    """Count, per metric, the number of filter subsets containing it."""
    if not filter_subsets:
        raise ValueError("need at least one filter subset")
    index = _index_of(names)
    counts = [0] * len(names)
    for subset in filter_subsets:
        for name in set(subset):
            if name not in index:
                raise UnknownMetric(name)
            counts[index[name]] += 1
    return OccurrenceTally(tuple(names), tuple(counts), len(filter_subsets))


def top_k(tally: OccurrenceTally, k: int) -> tuple[str, ...]:
    """The k most frequently occurring metrics; ties break canonically."""
    if not 1 <= k <= len(tally.names):
        raise ValueError(f"k must be in [1, {len(tally.names)}]")
    ranked = sorted(range(len(tally.names)), key=lambda i: (-tally.counts[i], i))
    chosen = sorted(ranked[:k])
    return tuple(tally.names[i] for i in chosen)


def coverage(
    filter_subsets: Sequence[Iterable[str]], candidate: Iterable[str]
) -> float:
    """Mean over datasets of |filter ∩ candidate| / |filter ∪ candidate|."""
    cand = set(candidate)
    if not cand:
        raise ValueError("candidate subset must be non-empty")
    subsets = [set(s) for s in filter_subsets]
    if not subsets:
        raise ValueError("need at least one filter subset")
    total = 0.0
    for s in subsets:
        union = s | cand
        total += len(s & cand) / len(union)
    return total / len(subsets)


def choose_k(
    filter_subsets: Sequence[Iterable[str]],
    k_range: tuple[int, int] = (1, 10),
    names: Sequence[str] = METRICS,
) -> tuple[int, list[CoveragePoint]]:
    """Scan subset sizes and pick the Coverage peak (ties to the smallest k)."""
    lo, hi = k_range
    if lo < 1 or hi > len(names) or lo > hi:
        raise ValueError(f"k_range must lie within [1, {len(names)}]")
    tally = tally_occurrences(filter_subsets, names)
    curve: list[CoveragePoint] = []
    best_k = lo
    best_cov = -math.inf
    for k in range(lo, hi + 1):
        subset = top_k(tally, k)
        cov = coverage(filter_subsets, subset)
        curve.append(CoveragePoint(k, subset, cov))
        if cov > best_cov:
            best_cov = cov
            best_k = k
    return best_k, curve


def correlation_matrix(corpus: Corpus, subset: Sequence[str], scenario) -> CorrelationMatrix:
    """Median, across target releases, of per-target training correlations.

    For each target the scenario defines a training pool; Pearson correlation
    is computed per metric pair over that pool, and the matrix entry is the
    median of the per-target values. Targets without usable training data
    are skipped and recorded.
    """
    from .scenarios import build_tasks  # local import keeps layering acyclic

    names = tuple(subset)
    if len(names) < 2:
        raise ValueError("correlation matrix needs a subset of size >= 2")
    tasks = build_tasks(corpus, scenario)
    per_target: list[np.ndarray] = []
    skipped: list[tuple[str, str]] = []
    k = len(names)
    for task in tasks:
        training: Sequence[Release] = task.training
        if not training:
            # exhaustive cross-project tasks resolve training per cell; for
            # correlation purposes use every foreign release pooled
            training = corpus.foreign_releases(task.target.project)
        if not training or sum(r.n_instances for r in training) < 2:
            skipped.append(task.target.key)
            continue
        X, _ = pooled_matrix(training, names)
        m = np.eye(k)
        for i in range(k):
            for j in range(i + 1, k):
                r = pearson(X[:, i], X[:, j])
                m[i, j] = r
                m[j, i] = r
        per_target.append(m)
    if not per_target:
        raise ValueError("no target release had usable training data")
    stacked = np.stack(per_target)
    med = np.median(stacked, axis=0)
    np.fill_diagonal(med, 1.0)
    values = tuple(tuple(float(v) for v in row) for row in med)
    return CorrelationMatrix(names, values, tuple(skipped))


def strong_pairs(
    matrix: CorrelationMatrix, phi: float = 0.6, signed: bool = True
) -> tuple[tuple[str, str], ...]:
    """All unordered pairs whose correlation strictly exceeds phi.

    The comparison uses the signed coefficient by default; ``signed=False``
    switches to |r| for data with strong negative correlations.
    """
    if not 0.0 < phi < 1.0:
        raise ValueError("phi must lie in (0, 1)")
    pairs = []
    k = len(matrix.names)
    for i in range(k):
        for j in range(i + 1, k):
            r = matrix.values[i][j]
            value = r if signed else abs(r)
            if value > phi:
                pairs.append((matrix.names[i], matrix.names[j]))
    return tuple(pairs)


def enumerate_admissible(
    topk: Sequence[str], strong: Iterable[tuple[str, str]]
) -> list[Combination]:
    """Proper non-empty subsets of the Top-k set that avoid every strong pair.

    The full set is excluded (it is the Top-k case itself). Order is by size,
    then lexicographic in the order of ``topk``.
    """
    members = tuple(topk)
    k = len(members)
    if k < 2:
        raise ValueError("need a Top-k subset of size >= 2")
    forbidden = [frozenset(p) for p in strong]
    out: list[Combination] = []
    for size in range(1, k):
        for combo in itertools.combinations(members, size):
            cs = set(combo)
            if any(pair <= cs for pair in forbidden):
                continue
            out.append(combo)
    return out


def minimum_subset(
    admissible: Sequence[Combination],
    filter_subsets: Sequence[Iterable[str]],
    names: Sequence[str] = METRICS,
) -> list[tuple[Combination, float]]:
    """Rank admissible combinations by Coverage; the head is the minimum subset.

    Ties prefer the smaller combination, then the canonically earlier one.
    """
    if not admissible:
        raise ValueError("no admissible combinations to rank")
    index = _index_of(names)
    scored = [(combo, coverage(filter_subsets, combo)) for combo in admissible]
    scored.sort(
        key=lambda item: (
            -item[1],
            len(item[0]),
            tuple(index[m] for m in item[0]),
        )
    )
    return scored
