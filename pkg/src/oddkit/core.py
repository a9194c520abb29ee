"""Core mathematics of the method.

Three pieces work together:

* ``transform`` maps instances through an affine projection, optionally
  squashed by tanh. The bias is folded into the weight matrix, so an
  instance x is presented as the row (x_1, ..., x_n, 1).
* ``objective`` scores a candidate projection by the ratio of summed
  class spreads (plus a constant gamma) to the geometric mean of the
  pairwise distances between class centers. Small values mean tight,
  well-separated classes.
* ``discriminate`` turns distances from a projected point to the class
  centers into a score vector that sums to one, so the closest center
  receives the largest score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from oddkit.numerics import (
    InvalidInputError,
    as_matrix,
    covariance,
    frobenius_norm,
)

NONLINEARITIES = ("linear", "tanh")


@dataclass(frozen=True)
class TransformParams:
    """Projection weights of shape (n + 1) x p with the bias row last."""

    weights: np.ndarray
    nonlinearity: str = "linear"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise InvalidInputError(
                f"weights must be 2-D, got shape {w.shape}")
        if w.shape[0] < 2 or w.shape[1] < 1:
            raise InvalidInputError(
                f"weights need at least 2 rows and 1 column, got {w.shape}")
        if not np.isfinite(w).all():
            raise InvalidInputError("weights contain non-finite entries")
        if self.nonlinearity not in NONLINEARITIES:
            raise InvalidInputError(
                f"unknown nonlinearity {self.nonlinearity!r}")
        object.__setattr__(self, "weights", w)

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def p(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class ClassSummary:
    center: np.ndarray
    spread: float
    count: int


@dataclass(frozen=True)
class ObjectiveValue:
    """Scalar objective plus its two ingredients for reporting."""

    value: float
    spread_sum: float
    center_geomean: float


def transform(params: TransformParams, X) -> np.ndarray:
    """Apply the affine projection (and nonlinearity) to each row of X."""
    X = as_matrix(X, "X")
    if X.shape[1] != params.n_inputs:
        raise InvalidInputError(
            f"X has {X.shape[1]} columns, transform expects {params.n_inputs}")
    ones = np.ones((X.shape[0], 1))
    Y = np.hstack([X, ones]) @ params.weights
    if params.nonlinearity == "tanh":
        Y = np.tanh(Y)
    return Y


def class_summaries(Y, labels, inventory=None) -> list[ClassSummary]:
    """Per-class center and spread of the projected rows.

    The spread is the Euclidean norm of the eigenvalues of the class
    covariance, computed as the Frobenius norm of the covariance (equal
    for symmetric PSD matrices). A single-instance class has spread 0.
    When ``inventory`` is given, one summary is produced per listed
    class, in that order; a listed class with no rows is an error.
    """
    Y = as_matrix(Y, "Y")
    labels = np.asarray(labels)
    if labels.shape[0] != Y.shape[0]:
        raise InvalidInputError(
            f"{labels.shape[0]} labels for {Y.shape[0]} rows")
    out = []
    for k in (np.unique(labels) if inventory is None else inventory):
        rows = Y[labels == k]
        if rows.shape[0] == 0:
            raise InvalidInputError(f"class {k} has no instances")
        out.append(ClassSummary(
            center=rows.mean(axis=0),
            spread=frobenius_norm(covariance(rows)),
            count=rows.shape[0],
        ))
    return out


def objective(params: TransformParams, X, labels, gamma: float = 1.0) -> ObjectiveValue:
    """Evaluate the separation objective for one candidate projection.

    value = (gamma + sum of class spreads) divided by the geometric mean
    of all pairwise center distances. Coincident centers make the
    candidate unusable, reported as a +inf sentinel rather than an error
    so optimizers can rank it as worst and move on.
    """
    if gamma <= 0:
        raise InvalidInputError("gamma must be positive")
    summaries = class_summaries(transform(params, X), labels)
    c = len(summaries)
    if c < 2:
        raise InvalidInputError("objective needs at least 2 classes")
    spread_sum = float(sum(s.spread for s in summaries))
    # Pairwise distance product in log space; c(c-1)/2 factors can
    # overflow a direct product for large c.
    log_sum = 0.0
    for i in range(c):
        for j in range(i + 1, c):
            d = float(np.linalg.norm(summaries[i].center - summaries[j].center))
            if d == 0.0:
                return ObjectiveValue(math.inf, spread_sum, 0.0)
            log_sum += math.log(d)
    geomean = math.exp(log_sum / (c * (c - 1)))
    if not (math.isfinite(spread_sum) and math.isfinite(geomean)):
        # Overflow guard: extreme weight scales can push spreads past
        # float range; rank such candidates as worst.
        return ObjectiveValue(math.inf, spread_sum, geomean)
    return ObjectiveValue(
        value=(gamma + spread_sum) / geomean,
        spread_sum=spread_sum,
        center_geomean=geomean,
    )


def discriminate(centers, y) -> np.ndarray:
    """Score a projected point against each class center.

    f_k = 1/(c-1) - D_k / ((c-1) * sum_i D_i) with D_k the Euclidean
    distance to center k. Scores sum to one and each lies in
    [0, 1/(c-1)]. When the point sits on every center at once (possible
    only if the centers coincide) the scores are uniform.
    """
    centers = as_matrix(centers, "centers")
    y = np.asarray(y, dtype=float)
    c = centers.shape[0]
    if c < 2:
        raise InvalidInputError("need at least 2 centers")
    if y.shape != (centers.shape[1],):
        raise InvalidInputError(
            f"point has shape {y.shape}, centers have {centers.shape[1]} columns")
    D = np.linalg.norm(centers - y, axis=1)
    total = D.sum()
    if total == 0.0:
        return np.full(c, 1.0 / c)
    return 1.0 / (c - 1) - D / ((c - 1) * total)


def pack_params(params: TransformParams) -> np.ndarray:
    """Flatten the weight matrix column by column."""
    return params.weights.flatten(order="F")


def unpack_params(flat, n_prime: int, p: int, nonlinearity: str = "linear") -> TransformParams:
    """Rebuild TransformParams from a column-major flat vector."""
    flat = np.asarray(flat, dtype=float)
    if flat.ndim != 1 or flat.shape[0] != n_prime * p:
        raise InvalidInputError(
            f"flat vector of length {flat.size} cannot fill {n_prime}x{p}")
    return TransformParams(
        weights=flat.reshape((n_prime, p), order="F"),
        nonlinearity=nonlinearity,
    )
