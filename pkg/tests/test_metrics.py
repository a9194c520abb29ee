import math

import numpy as np
import pytest

from oddkit.metrics import (
    RocCurve,
    RunStats,
    g_index,
    macro_auc,
    roc_auc,
    student_t_cdf,
    t_test,
)
from oddkit.numerics import InvalidInputError


def pairwise_auc(scores, truth):
    """Rank-statistic oracle: P(score_pos > score_neg) + half-ties."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    pos = scores[truth]
    neg = scores[~truth]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


class TestRocAuc:
    def test_perfect_separation(self):
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        truth = np.array([True, True, False, False])
        assert roc_auc(scores, truth).auc == 1.0

    def test_reversed_separation(self):
        scores = np.array([0.1, 0.2, 0.8, 0.9])
        truth = np.array([True, True, False, False])
        assert roc_auc(scores, truth).auc == 0.0

    def test_all_equal_scores_give_half(self):
        scores = np.full(10, 0.5)
        truth = np.arange(10) < 4
        assert roc_auc(scores, truth).auc == pytest.approx(0.5)

    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            m = int(rng.integers(5, 200))
            scores = np.round(rng.normal(size=m), 1)  # rounding injects ties
            truth = rng.random(m) < 0.4
            if truth.all() or not truth.any():
                continue
            got = roc_auc(scores, truth).auc
            want = pairwise_auc(scores, truth)
            assert got == pytest.approx(want, abs=1e-12)

    def test_truth_complement_mirrors_auc(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=60)
        truth = rng.random(60) < 0.5
        a = roc_auc(scores, truth).auc
        b = roc_auc(scores, ~truth).auc
        assert a + b == pytest.approx(1.0, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(7)
        scores = rng.normal(size=80)
        truth = rng.random(80) < 0.5
        base = roc_auc(scores, truth).auc
        affine = roc_auc(3.0 * scores + 2.0, truth).auc
        assert affine == pytest.approx(base, abs=1e-12)

    def test_curve_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(19)
        scores = np.round(rng.normal(size=40), 1)
        truth = rng.random(40) < 0.5
        curve = roc_auc(scores, truth)
        assert isinstance(curve, RocCurve)
        fpr = [p[0] for p in curve.points]
        tpr = [p[1] for p in curve.points]
        assert (fpr[0], tpr[0]) == (0.0, 0.0)
        assert (fpr[-1], tpr[-1]) == (1.0, 1.0)
        assert all(a <= b for a, b in zip(fpr, fpr[1:]))
        assert all(a <= b for a, b in zip(tpr, tpr[1:]))
        # thresholds strictly decrease after the leading sentinel
        thr = [p[2] for p in curve.points[1:]]
        assert all(a > b for a, b in zip(thr, thr[1:]))

    def test_single_class_rejected(self):
        with pytest.raises(InvalidInputError):
            roc_auc(np.array([0.1, 0.2]), np.array([True, True]))

    def test_non_finite_scores_rejected(self):
        with pytest.raises(InvalidInputError):
            roc_auc(np.array([0.1, np.nan]), np.array([True, False]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            roc_auc(np.array([0.1, 0.2, 0.3]), np.array([True, False]))


class TestMacroAuc:
    def test_binary_columns_agree(self):
        # with complementary columns both one-vs-rest terms coincide,
        # so the macro average equals the positive-class AUC
        rng = np.random.default_rng(23)
        s = rng.random(50)
        labels = (rng.random(50) < 0.5).astype(int)
        S = np.column_stack([1.0 - s, s])
        want = roc_auc(s, labels == 1).auc
        assert macro_auc(S, labels) == pytest.approx(want, abs=1e-12)

    def test_three_class_oracle(self):
        rng = np.random.default_rng(29)
        labels = rng.integers(0, 3, 90)
        S = rng.random((90, 3))
        want = np.mean([pairwise_auc(S[:, k], labels == k) for k in range(3)])
        assert macro_auc(S, labels) == pytest.approx(want, abs=1e-12)

    def test_class_order_maps_columns(self):
        labels = np.array([5, 7, 9, 5, 7, 9])
        S = np.array([
            [0.9, 0.1, 0.0],
            [0.1, 0.8, 0.1],
            [0.0, 0.1, 0.9],
            [0.8, 0.2, 0.0],
            [0.2, 0.7, 0.1],
            [0.1, 0.0, 0.9],
        ])
        assert macro_auc(S, labels, class_order=[5, 7, 9]) == 1.0

    def test_missing_class_rejected(self):
        S = np.random.default_rng(0).random((4, 3))
        labels = np.array([0, 0, 1, 1])  # class 2 never appears
        with pytest.raises(InvalidInputError):
            macro_auc(S, labels)

    def test_row_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            macro_auc(np.zeros((4, 2)), np.array([0, 1, 0]))

    def test_wrong_order_length_rejected(self):
        with pytest.raises(InvalidInputError):
            macro_auc(np.zeros((4, 2)), np.array([0, 1, 0, 1]),
                      class_order=[0, 1, 2])


class TestGIndex:
    def test_perfect_train_squares_ratio(self):
        assert g_index(1.0, 0.9) == pytest.approx(0.81)

    def test_equal_performance_is_identity(self):
        for t in (0.25, 0.5, 0.977):
            assert g_index(t, t) == pytest.approx(t, abs=1e-15)

    def test_small_gap_value(self):
        assert g_index(0.977, 0.971) == pytest.approx(0.971 ** 2 / 0.977,
                                                      abs=1e-12)

    def test_nonpositive_train_rejected(self):
        with pytest.raises(InvalidInputError):
            g_index(0.0, 0.5)


class TestStudentTCdf:
    def test_zero_is_half(self):
        for dof in (1.0, 5.0, 30.0):
            assert student_t_cdf(0.0, dof) == pytest.approx(0.5, abs=1e-12)

    def test_t_table_values(self):
        # two-sided 5% critical points from the standard t table
        assert student_t_cdf(12.706, 1) == pytest.approx(0.975, abs=1e-3)
        assert student_t_cdf(2.086, 20) == pytest.approx(0.975, abs=1e-3)
        assert student_t_cdf(1.725, 20) == pytest.approx(0.95, abs=1e-3)
        assert student_t_cdf(2.042, 30) == pytest.approx(0.975, abs=1e-3)

    def test_symmetry(self):
        for t in (0.3, 1.5, 4.0):
            assert student_t_cdf(-t, 8) == pytest.approx(
                1.0 - student_t_cdf(t, 8), abs=1e-12)

    def test_large_dof_approaches_normal(self):
        assert student_t_cdf(1.959964, 1e6) == pytest.approx(0.975, abs=2e-4)

    def test_nonpositive_dof_rejected(self):
        with pytest.raises(InvalidInputError):
            student_t_cdf(1.0, 0.0)


class TestRunStats:
    def test_summary_matches_numpy(self):
        values = np.array([0.7, 0.8, 0.75, 0.9])
        rs = RunStats.from_values(values)
        assert rs.mean == pytest.approx(values.mean())
        assert rs.std == pytest.approx(values.std(ddof=1))
        assert rs.n == 4

    def test_single_value_has_zero_std(self):
        rs = RunStats.from_values([0.5])
        assert rs.std == 0.0 and rs.n == 1

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            RunStats.from_values([0.1, np.inf])

    def test_matrix_rejected(self):
        with pytest.raises(InvalidInputError):
            RunStats.from_values(np.zeros((2, 2)))


class TestTTest:
    def test_identical_samples_not_significant(self):
        a = RunStats.from_values([0.5, 0.6, 0.7])
        res = t_test(a, a)
        assert not res.significant
        assert res.direction == "equal"
        assert res.t_stat == 0.0
        assert res.p_value == pytest.approx(1.0)

    def test_separated_samples_significant(self):
        rng = np.random.default_rng(41)
        a = RunStats.from_values(rng.normal(1.0, 0.1, 50))
        b = RunStats.from_values(rng.normal(2.0, 0.1, 50))
        res = t_test(a, b)
        assert res.significant
        assert res.direction == "b>a"
        assert res.p_value < 1e-6

    def test_swap_negates_statistic(self):
        rng = np.random.default_rng(43)
        a = RunStats.from_values(rng.normal(0.0, 1.0, 30))
        b = RunStats.from_values(rng.normal(0.4, 1.0, 30))
        fwd = t_test(a, b)
        rev = t_test(b, a)
        assert fwd.t_stat == pytest.approx(-rev.t_stat, abs=1e-12)
        assert fwd.p_value == pytest.approx(rev.p_value, abs=1e-12)
        assert {fwd.direction, rev.direction} <= {"a>b", "b>a"}

    def test_zero_variance_distinct_means(self):
        a = RunStats.from_values([0.5, 0.5])
        b = RunStats.from_values([0.6, 0.6])
        res = t_test(a, b)
        assert res.significant and res.direction == "b>a"
        assert math.isinf(res.t_stat) or res.p_value == 0.0

    def test_tiny_sample_rejected(self):
        a = RunStats.from_values([0.5])
        b = RunStats.from_values([0.5, 0.6])
        with pytest.raises(InvalidInputError):
            t_test(a, b)

    def test_welch_dof_between_bounds(self):
        rng = np.random.default_rng(47)
        a = RunStats.from_values(rng.normal(0.0, 1.0, 10))
        b = RunStats.from_values(rng.normal(0.0, 3.0, 25))
        res = t_test(a, b)
        assert min(a.n, b.n) - 1 <= res.dof <= a.n + b.n - 2
