"""Measures, Consistency, and the statistical test machinery.

The Wilcoxon and Cliff's delta implementations are checked against literal
brute-force oracles written here; the ANOVA p-value against the pooled-t
identity and a frozen high-precision reference.
"""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leanmetrics import stats as S
from leanmetrics.errors import (
    AllZeroDifferences,
    DegenerateTestSet,
    LengthMismatch,
    MatchingFailure,
    TooFewSamples,
)


class TestMeasures:
    def test_degenerate_denominators(self):
        triple = S.measures(S.Outcome(tp=0, fp=0, tn=10, fn=0))
        assert (triple.precision, triple.recall, triple.f_measure) == (0.0, 0.0, 0.0)

    def test_perfect_classification(self):
        triple = S.measures(S.Outcome(tp=7, fp=0, tn=3, fn=0))
        assert (triple.precision, triple.recall, triple.f_measure) == (1.0, 1.0, 1.0)

    def test_direct_formula_evaluation(self):
        triple = S.measures(S.Outcome(tp=3, fp=1, tn=4, fn=2))
        assert triple.precision == pytest.approx(0.75, abs=1e-12)
        assert triple.recall == pytest.approx(0.6, abs=1e-12)
        assert triple.f_measure == pytest.approx(2 * 0.75 * 0.6 / 1.35, abs=1e-12)
        assert triple.f_measure == pytest.approx(0.6667, abs=1e-4)

    def test_harmonic_identity(self):
        triple = S.measures(S.Outcome(tp=5, fp=3, tn=9, fn=2))
        p, r, f = triple.precision, triple.recall, triple.f_measure
        assert f == pytest.approx(2 * p * r / (p + r), abs=1e-12)

    @given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 30), st.integers(1, 10))
    @settings(max_examples=80, deadline=None)
    def test_more_true_positives_never_hurt(self, tp, fp, fn, extra):
        base = S.measures(S.Outcome(tp=tp, fp=fp, tn=1, fn=fn))
        better = S.measures(S.Outcome(tp=tp + extra, fp=fp, tn=1, fn=fn))
        assert better.precision >= base.precision - 1e-12
        assert better.recall >= base.recall - 1e-12
        assert better.f_measure >= base.f_measure - 1e-12

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            S.Outcome(tp=-1, fp=0, tn=1, fn=0)
        with pytest.raises(ValueError):
            S.Outcome(tp=0, fp=0, tn=0, fn=0)


class TestConsistency:
    def test_all_defects_found_is_exactly_one(self):
        for k, extra in ((4, 6), (1, 9), (7, 3)):
            outcome = S.Outcome(tp=k, fp=2, tn=extra - 2, fn=0)
            assert S.consistency(outcome) == 1.0

    def test_direct_evaluation(self):
        # n=10, k=4, d=3 -> (30 - 16) / 24
        outcome = S.Outcome(tp=3, fp=1, tn=5, fn=1)
        assert S.consistency(outcome) == pytest.approx(14.0 / 24.0, abs=1e-12)

    def test_zero_hits_go_negative(self):
        outcome = S.Outcome(tp=0, fp=2, tn=4, fn=4)
        assert S.consistency(outcome) == pytest.approx(-16.0 / 24.0, abs=1e-12)

    def test_degenerate_test_sets(self):
        with pytest.raises(DegenerateTestSet):
            S.consistency(S.Outcome(tp=0, fp=3, tn=7, fn=0))  # k = 0
        with pytest.raises(DegenerateTestSet):
            S.consistency(S.Outcome(tp=5, fp=0, tn=0, fn=5))  # k = n


class TestMedianAndBoxplot:
    def test_even_length_median(self):
        assert S.median([4.0, 1.0, 3.0, 2.0]) == 2.5

    def test_boxplot_five_values(self):
        b = S.boxplot_stats([1.0, 2.0, 3.0, 4.0, 5.0])
        assert (b.low, b.q1, b.median, b.q3, b.high) == (1.0, 2.0, 3.0, 4.0, 5.0)
        assert b.outliers == ()

    def test_boxplot_flags_outliers(self):
        b = S.boxplot_stats([1.0, 2.0, 3.0, 4.0, 50.0])
        assert 50.0 in b.outliers
        assert b.high < 50.0


def wilcoxon_bruteforce_p(a, b):
    """Literal sign-enumeration oracle for the two-sided exact p."""
    diffs = [x - y for x, y in zip(a, b) if x != y]
    absd = [abs(d) for d in diffs]
    order = sorted(range(len(absd)), key=lambda i: absd[i])
    ranks = [0.0] * len(absd)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and absd[order[j + 1]] == absd[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for pos in range(i, j + 1):
            ranks[order[pos]] = avg
        i = j + 1
    w_obs = sum(r for r, d in zip(ranks, diffs) if d > 0)
    n = len(diffs)
    count_le = count_ge = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        if w <= w_obs:
            count_le += 1
        if w >= w_obs:
            count_ge += 1
    denom = 2.0 ** n
    return min(1.0, 2.0 * min(count_le / denom, count_ge / denom))


class TestWilcoxon:
    def test_identical_samples_raise(self):
        with pytest.raises(AllZeroDifferences):
            S.wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])

    def test_too_few_nonzero_differences(self):
        with pytest.raises(TooFewSamples):
            S.wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 6])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            S.wilcoxon_signed_rank([1, 2, 3], [1, 2])

    def test_small_fixture_matches_enumeration(self):
        a = [12.0, 9.5, 7.0, 4.0, 11.0, 2.0]
        b = [10.0, 10.5, 3.0, 8.0, 6.0, 1.0]
        result = S.wilcoxon_signed_rank(a, b)
        assert result.method == "exact"
        assert result.p == wilcoxon_bruteforce_p(a, b)

    def test_fifty_random_fixtures_exact_match(self):
        rng = np.random.default_rng(77)
        for trial in range(50):
            n = int(rng.integers(5, 13))
            a = rng.normal(size=n)
            b = a + rng.normal(size=n) * rng.choice([0.5, 1.0, 2.0])
            if rng.random() < 0.3:  # force some rank ties
                a = np.round(a, 1)
                b = np.round(b, 1)
            if np.all(a == b):
                continue
            try:
                result = S.wilcoxon_signed_rank(a, b)
            except TooFewSamples:
                continue
            assert result.p == wilcoxon_bruteforce_p(a, b), f"trial {trial}"

    def test_approx_close_to_exact_at_n30(self):
        rng = np.random.default_rng(30)
        a = rng.normal(size=30)
        b = a + rng.normal(scale=0.7, size=30)
        approx = S.wilcoxon_signed_rank(a, b)
        exact = S.wilcoxon_signed_rank(a, b, exact_limit=30)
        assert approx.method == "approx"
        assert exact.method == "exact"
        assert abs(approx.p - exact.p) < 0.005

    def test_two_sided_symmetry(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=10)
        b = a + rng.normal(size=10)
        assert S.wilcoxon_signed_rank(a, b).p == S.wilcoxon_signed_rank(b, a).p

    def test_tied_absolute_differences_average_ranks(self):
        a = [5.0, 5.0, 5.0, 5.0, 5.0, 5.0]
        b = [4.0, 6.0, 4.0, 3.0, 7.0, 3.5]
        result = S.wilcoxon_signed_rank(a, b)
        assert result.p == wilcoxon_bruteforce_p(a, b)


def cliffs_bruteforce(a, b):
    greater = sum(1 for x in a for y in b if x > y)
    less = sum(1 for x in a for y in b if x < y)
    return (greater - less) / (len(a) * len(b))


class TestCliffsDelta:
    def test_symmetric_samples(self):
        assert S.cliffs_delta([1, 2, 3], [1, 2, 3]) == 0.0

    def test_complete_dominance(self):
        assert S.cliffs_delta([2, 3, 4], [1, 1, 1]) == 1.0

    def test_random_fixture_matches_recount(self):
        rng = np.random.default_rng(17)
        a = rng.normal(size=8)
        b = rng.normal(size=7)
        assert S.cliffs_delta(a, b) == cliffs_bruteforce(a.tolist(), b.tolist())

    def test_fifty_random_fixtures_exact(self):
        rng = np.random.default_rng(18)
        for _ in range(50):
            a = rng.integers(0, 6, size=int(rng.integers(2, 9)))
            b = rng.integers(0, 6, size=int(rng.integers(2, 9)))
            assert S.cliffs_delta(a, b) == cliffs_bruteforce(a.tolist(), b.tolist())

    @given(
        # quarter-integer grid keeps additions exact, so the invariance is exact
        st.lists(st.integers(-200, 200).map(lambda v: v / 4.0), min_size=1, max_size=10),
        st.lists(st.integers(-200, 200).map(lambda v: v / 4.0), min_size=1, max_size=10),
        st.integers(-80, 80).map(lambda v: v / 4.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_antisymmetry_and_shift_invariance(self, a, b, shift):
        d = S.cliffs_delta(a, b)
        assert S.cliffs_delta(b, a) == -d
        shifted = S.cliffs_delta([x + shift for x in a], [y + shift for y in b])
        assert shifted == d


class TestAnova:
    def test_two_groups_equal_pooled_t_squared(self):
        rng = np.random.default_rng(4)
        a = rng.normal(0.0, 1.0, size=12)
        b = rng.normal(0.6, 1.0, size=9)
        result = S.anova_oneway([a, b])
        # pooled two-sample t statistic
        na, nb = len(a), len(b)
        sp2 = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
        t = (a.mean() - b.mean()) / math.sqrt(sp2 * (1 / na + 1 / nb))
        assert result.f == pytest.approx(t * t, abs=1e-9)

    def test_identical_constant_groups(self):
        result = S.anova_oneway([[2.0, 2.0, 2.0], [2.0, 2.0, 2.0]])
        assert result.f == 0.0
        assert result.p == 1.0

    def test_three_group_fixture_matches_frozen_reference(self):
        groups = [
            [6.0, 8.0, 4.0, 5.0, 3.0, 4.0],
            [8.0, 12.0, 9.0, 11.0, 6.0, 8.0],
            [13.0, 9.0, 11.0, 8.0, 7.0, 12.0],
        ]
        result = S.anova_oneway(groups)
        # frozen from scipy.stats.f_oneway at double precision
        assert result.f == pytest.approx(9.264705882352942, abs=1e-9)
        assert result.p == pytest.approx(0.0023987773293929083, abs=1e-6)
        assert result.ss_between == pytest.approx(84.0, abs=1e-9)
        assert result.ss_within == pytest.approx(68.0, abs=1e-9)

    def test_zero_within_variance_flag(self):
        result = S.anova_oneway([[1.0, 1.0], [2.0, 2.0]])
        assert result.zero_within
        assert result.p == 0.0

    def test_group_size_preconditions(self):
        with pytest.raises(TooFewSamples):
            S.anova_oneway([[1.0, 2.0]])
        with pytest.raises(TooFewSamples):
            S.anova_oneway([[1.0, 2.0], [3.0]])

    @given(st.floats(-100, 100), st.floats(0.1, 10))
    @settings(max_examples=40, deadline=None)
    def test_shift_and_scale_invariance(self, shift, scale):
        rng = np.random.default_rng(9)
        groups = [rng.normal(0, 1, 8), rng.normal(0.5, 1, 8), rng.normal(1.0, 1, 8)]
        base = S.anova_oneway(groups).f
        moved = S.anova_oneway([g * scale + shift for g in groups]).f
        assert moved == pytest.approx(base, rel=1e-9, abs=1e-9)

    def test_incomplete_beta_matches_frozen_references(self):
        # frozen from scipy.stats.f.sf at double precision
        cases = [
            (0.5, 3, 10, 0.6906222455335574),
            (2.5, 5, 40, 0.046276763968031466),
            (9.26, 2, 15, 0.002403833416917693),
            (0.04, 1, 5, 0.8493605139958291),
        ]
        for f, d1, d2, expected in cases:
            assert S.f_survival(f, d1, d2) == pytest.approx(expected, abs=1e-12)


def make_rows(values_by_key):
    return {
        key: S.MeasureTriple(p, r, f) for key, (p, r, f) in values_by_key.items()
    }


class TestCompareMethods:
    def test_self_comparison_reports_no_difference(self):
        rows = make_rows({i: (0.5 + 0.01 * i, 0.6, 0.4) for i in range(8)})
        report = S.compare_methods(rows, dict(rows), label_a="ALL", label_b="TOP5")
        cell = report.cell("precision")
        assert cell.ratio == pytest.approx(1.0, abs=1e-12)
        assert cell.p_method == "no_difference"
        assert cell.cliffs_d == 0.0
        assert cell.acceptable

    def test_scaled_copy_passes_ratio_rule(self):
        rows_a = make_rows({i: (0.5 + 0.02 * i, 0.6 + 0.01 * i, 0.4) for i in range(10)})
        rows_b = {
            key: S.MeasureTriple(t.precision * 0.95, t.recall * 0.95, t.f_measure * 0.95)
            for key, t in rows_a.items()
        }
        report = S.compare_methods(rows_a, rows_b)
        cell = report.cell("precision")
        assert cell.ratio == pytest.approx(0.95, abs=1e-12)
        assert cell.acceptable  # 0.95 > 0.9 even if the test is significant

    def test_synthetic_grid_matches_recount(self):
        rng = np.random.default_rng(55)
        keys = [(f"p{i}", "v", "s", "c") for i in range(24)]
        rows_a = make_rows({k: tuple(rng.uniform(0.2, 0.9, 3)) for k in keys})
        rows_b = make_rows({k: tuple(rng.uniform(0.2, 0.9, 3)) for k in keys})
        report = S.compare_methods(rows_a, rows_b, label_a="A", label_b="B")
        ordered = sorted(keys, key=repr)
        for measure in ("precision", "recall", "f_measure"):
            va = [getattr(rows_a[k], measure) for k in ordered]
            vb = [getattr(rows_b[k], measure) for k in ordered]
            cell = report.cell(measure)
            assert cell.median_a == S.median(va)
            assert cell.median_b == S.median(vb)
            assert cell.ratio == pytest.approx(S.median(vb) / S.median(va), abs=1e-12)
            assert cell.p == S.wilcoxon_signed_rank(va, vb).p
            assert cell.cliffs_d == cliffs_bruteforce(va, vb)

    def test_matching_failure_lists_keys(self):
        rows_a = make_rows({(1,): (0.5, 0.5, 0.5), (2,): (0.6, 0.6, 0.6)})
        rows_b = make_rows({(1,): (0.5, 0.5, 0.5), (3,): (0.6, 0.6, 0.6)})
        with pytest.raises(MatchingFailure) as err:
            S.compare_methods(rows_a, rows_b)
        assert err.value.unmatched_a == ((2,),)
        assert err.value.unmatched_b == ((3,),)


class TestThresholdCounts:
    def test_saturation(self):
        rows = [S.MeasureTriple(1.0, 1.0, 1.0)] * 6
        counts = S.threshold_counts(rows)
        assert (counts.precision, counts.recall, counts.f_measure, counts.total) == (6, 6, 6, 6)

    def test_all_below(self):
        rows = [S.MeasureTriple(0.4, 0.6, 0.5)] * 4
        counts = S.threshold_counts(rows)
        assert (counts.precision, counts.recall, counts.f_measure, counts.total) == (0, 0, 0, 0)

    def test_mixed_rows_match_hand_tally(self):
        rows = [
            S.MeasureTriple(0.6, 0.8, 0.7),   # all four
            S.MeasureTriple(0.6, 0.5, 0.6),   # precision + f
            S.MeasureTriple(0.4, 0.8, 0.6),   # recall + f
            S.MeasureTriple(0.5, 0.7, 0.583),  # none: thresholds are strict
            S.MeasureTriple(0.9, 0.1, 0.2),   # precision only
            S.MeasureTriple(0.2, 0.9, 0.3),   # recall only
            S.MeasureTriple(0.55, 0.75, 0.1),  # precision + recall -> total
            S.MeasureTriple(0.0, 0.0, 0.9),   # f only
            S.MeasureTriple(0.51, 0.71, 0.584),  # all four
            S.MeasureTriple(0.3, 0.3, 0.3),   # none
        ]
        counts = S.threshold_counts(rows)
        # hand tally: P>0.5 on rows 0,1,4,6,8; R>0.7 on rows 0,2,5,6,8;
        # F>0.583 on rows 0,1,2,7,8; both P and R on rows 0,6,8
        assert counts.precision == 5
        assert counts.recall == 5
        assert counts.f_measure == 5
        assert counts.total == 3
