"""Evaluation metrics: ROC/AUC, macro-averaged AUC, a generalization
index, and Welch's two-sample t-test.

The t-test's p-value comes from a self-contained Student-t CDF built on
the continued-fraction expansion of the regularized incomplete beta
function, so the module has no dependency beyond numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from oddkit.numerics import InvalidInputError


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep of a binary scorer.

    points are (false_positive_rate, true_positive_rate, threshold)
    triples ordered from the strictest threshold (0, 0) to the loosest
    (1, 1). Equal scores collapse into a single step, which makes the
    trapezoidal area equal to the pairwise ranking probability with the
    half-tie convention.
    """

    points: tuple
    auc: float


@dataclass(frozen=True)
class RunStats:
    """Sample of per-run performance values with summary statistics."""

    values: np.ndarray
    mean: float
    std: float
    n: int

    @classmethod
    def from_values(cls, values) -> "RunStats":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidInputError("need a 1-D sample with n >= 1")
        if not np.isfinite(arr).all():
            raise InvalidInputError("sample contains non-finite values")
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return cls(values=arr, mean=float(arr.mean()), std=std, n=arr.size)


@dataclass(frozen=True)
class TTestResult:
    significant: bool
    direction: str
    t_stat: float
    dof: float
    p_value: float


def _validate_binary(scores, truth):
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    if scores.ndim != 1 or scores.shape != truth.shape:
        raise InvalidInputError("scores and truth must be matching 1-D arrays")
    if not np.isfinite(scores).all():
        raise InvalidInputError("scores contain non-finite values")
    if not truth.any() or truth.all():
        raise InvalidInputError("both classes must be present")
    return scores, truth


def roc_auc(scores, truth) -> RocCurve:
    """ROC curve and trapezoidal area for binary truth labels.

    Instances scoring at or above a threshold are called positive. The
    sweep visits each distinct score once.
    """
    scores, truth = _validate_binary(scores, truth)
    pos_total = int(truth.sum())
    neg_total = truth.size - pos_total

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truth = truth[order]

    points = [(0.0, 0.0, math.inf)]
    auc = 0.0
    tp = fp = 0
    prev_fpr = prev_tpr = 0.0
    i = 0
    m = scores.size
    while i < m:
        j = i
        while j + 1 < m and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(sorted_truth[i:j + 1].sum())
        fp += (j - i + 1) - int(sorted_truth[i:j + 1].sum())
        fpr = fp / neg_total
        tpr = tp / pos_total
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        points.append((fpr, tpr, float(sorted_scores[i])))
        prev_fpr, prev_tpr = fpr, tpr
        i = j + 1
    return RocCurve(points=tuple(points), auc=float(auc))


def macro_auc(score_matrix, labels, class_order=None) -> float:
    """Unweighted mean of the one-vs-rest AUCs, one per class column.

    Column ``k`` scores the class ``class_order[k]``; when
    ``class_order`` is omitted the columns stand for labels 0..c-1.
    """
    S = np.asarray(score_matrix, dtype=float)
    labels = np.asarray(labels)
    if S.ndim != 2 or S.shape[0] != labels.shape[0]:
        raise InvalidInputError("score matrix rows must match label count")
    c = S.shape[1]
    if class_order is None:
        class_order = range(c)
    class_order = list(class_order)
    if len(class_order) != c:
        raise InvalidInputError("class order must name one label per column")
    missing = [k for k in class_order if not (labels == k).any()]
    if missing:
        raise InvalidInputError(f"classes absent from truth: {missing}")
    return float(np.mean([roc_auc(S[:, i], labels == k).auc
                          for i, k in enumerate(class_order)]))


def g_index(train_perf: float, test_perf: float) -> float:
    """Generalization-adjusted performance: (test / train) * test.

    Equals the test performance when train and test agree and shrinks
    quadratically as the test score falls behind the train score.
    """
    if train_perf <= 0:
        raise InvalidInputError("train performance must be positive")
    return (test_perf / train_perf) * test_perf


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta function."""
    MAXIT, EPS, FPMIN = 200, 3e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return h


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(1.0 - x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, dof: float) -> float:
    """P(T <= t) for Student's t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise InvalidInputError("degrees of freedom must be positive")
    x = dof / (dof + t * t)
    tail = 0.5 * _reg_inc_beta(dof / 2.0, 0.5, x)
    return 1.0 - tail if t >= 0 else tail


def t_test(a: RunStats, b: RunStats, alpha: float = 0.05) -> TTestResult:
    """Welch's unequal-variance two-sample test, two-sided."""
    if a.n < 2 or b.n < 2:
        raise InvalidInputError("both samples need n >= 2")
    var_a = a.std ** 2
    var_b = b.std ** 2
    se_sq = var_a / a.n + var_b / b.n
    if a.mean > b.mean:
        direction = "a>b"
    elif b.mean > a.mean:
        direction = "b>a"
    else:
        direction = "equal"
    if se_sq == 0.0:
        # No variance anywhere: significant only if the means differ,
        # in which case the statistic is unbounded.
        if direction == "equal":
            return TTestResult(False, direction, 0.0, float(a.n + b.n - 2), 1.0)
        return TTestResult(True, direction, math.inf, float(a.n + b.n - 2), 0.0)
    t_stat = (a.mean - b.mean) / math.sqrt(se_sq)
    dof = se_sq ** 2 / (
        (var_a / a.n) ** 2 / (a.n - 1) + (var_b / b.n) ** 2 / (b.n - 1))
    p_value = 2.0 * (1.0 - student_t_cdf(abs(t_stat), dof))
    return TTestResult(
        significant=bool(p_value < alpha),
        direction=direction,
        t_stat=float(t_stat),
        dof=float(dof),
        p_value=float(p_value),
    )
