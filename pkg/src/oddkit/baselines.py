"""Reference classifiers the optimizer-trained model is compared against.

The main one is a direct LDA variant: between-class scatter from the
unweighted class means, within-class scatter as the plain sum of class
covariances, solved as a whitened symmetric eigenproblem with NO
regularization. An ill-conditioned within-class scatter is a documented
failure mode, surfaced as ``SingularScatterError`` rather than papered
over, because the comparison experiments rely on seeing it.

A naive nearest-centroid scorer (no optimization, distances in the
input space) serves as the control for the imbalance experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from oddkit.classifier import ModelFormatError, _Reader
from oddkit.core import discriminate
from oddkit.data import NormalizationState
from oddkit.numerics import InvalidInputError, covariance, sym_eigen

DLDA_MAGIC = "DLDAMODEL v1"
CONDITION_LIMIT = 1e12


class SingularScatterError(ArithmeticError):
    """Within-class scatter is numerically singular; carries the class
    sizes so callers can report which class starved the estimate."""

    def __init__(self, class_sizes, condition=None):
        self.class_sizes = tuple(int(s) for s in class_sizes)
        self.condition = condition
        detail = (f"condition number {condition:.3e}"
                  if condition is not None else "rank deficient")
        super().__init__(
            f"within-class scatter is singular ({detail}); "
            f"class sizes {self.class_sizes}")


@dataclass(frozen=True)
class DldaModel:
    projection: np.ndarray
    class_means_projected: np.ndarray
    class_inventory: tuple
    class_names: tuple | None = None
    preprocess: NormalizationState | None = None


@dataclass(frozen=True)
class CentroidModel:
    centroids: np.ndarray
    class_inventory: tuple


def _class_stats(X, labels):
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if X.ndim != 2 or labels.shape != (X.shape[0],):
        raise InvalidInputError("X must be 2-D with one label per row")
    classes = np.unique(labels)
    if classes.size < 2:
        raise InvalidInputError("need at least 2 classes")
    return X, labels, classes


def dlda_fit(X, labels, class_names=None) -> DldaModel:
    """Fit the LDA baseline.

    Between-class scatter: (1/c) sum of (mu_i - mu)(mu_i - mu)^T with mu
    the unweighted average of the class means. Within-class scatter:
    sum of the per-class sample covariances. The projection keeps the
    c - 1 leading generalized eigenvectors.
    """
    X, labels, classes = _class_stats(X, labels)
    c = classes.size
    n = X.shape[1]
    sizes = [int((labels == k).sum()) for k in classes]
    if c - 1 > n:
        raise SingularScatterError(sizes)

    means = np.vstack([X[labels == k].mean(axis=0) for k in classes])
    grand = means.mean(axis=0)
    centered = means - grand
    S_B = centered.T @ centered / c
    S_W = np.zeros((n, n))
    for k in classes:
        S_W += covariance(X[labels == k])

    spectrum = sym_eigen(S_W)
    lam_max = float(spectrum.eigenvalues[0])
    lam_min = float(spectrum.eigenvalues[-1])
    if lam_min <= 0.0 or lam_max / lam_min > CONDITION_LIMIT:
        condition = np.inf if lam_min <= 0 else lam_max / lam_min
        raise SingularScatterError(sizes, condition)

    L = np.linalg.cholesky(S_W)
    # Whitened problem: L^-1 S_B L^-T is symmetric with the same
    # eigenvalues as S_W^-1 S_B.
    half = np.linalg.solve(L, S_B)
    A = np.linalg.solve(L, half.T).T
    eig = sym_eigen((A + A.T) / 2.0)
    top = eig.eigenvectors[:, :c - 1]
    projection = np.linalg.solve(L.T, top)
    norms = np.linalg.norm(projection, axis=0)
    projection = projection / norms
    projected_means = means @ projection
    return DldaModel(
        projection=projection,
        class_means_projected=projected_means,
        class_inventory=tuple(int(k) for k in classes),
        class_names=tuple(class_names) if class_names is not None else None,
    )


def dlda_scores(model: DldaModel, X) -> np.ndarray:
    """Distance-to-projected-mean scores through the same normalized
    transform the optimizer-trained classifier uses, so AUCs compare."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.projection.shape[0]:
        raise InvalidInputError(
            f"expected {model.projection.shape[0]} features, got {X.shape}")
    P = X @ model.projection
    return np.vstack([discriminate(model.class_means_projected, row)
                      for row in P])


def centroid_fit(X, labels) -> CentroidModel:
    """Per-class mean of the raw (already normalized) features. No
    optimization, no projection; the do-nothing control."""
    X, labels, classes = _class_stats(X, labels)
    centroids = np.vstack([X[labels == k].mean(axis=0) for k in classes])
    return CentroidModel(
        centroids=centroids,
        class_inventory=tuple(int(k) for k in classes),
    )


def centroid_scores(model: CentroidModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.centroids.shape[1]:
        raise InvalidInputError(
            f"expected {model.centroids.shape[1]} features, got {X.shape}")
    return np.vstack([discriminate(model.centroids, row) for row in X])


def save_dlda(model: DldaModel, sink) -> None:
    lines = [DLDA_MAGIC]
    n, k = model.projection.shape
    lines.append(f"shape {n} {k}")
    lines.append("classes " + " ".join(str(v) for v in model.class_inventory))
    if model.class_names is not None:
        lines.append("class_names " + " ".join(model.class_names))
    lines.append(f"projection {n} {k}")
    for row in model.projection:
        lines.append(" ".join(repr(float(v)) for v in row))
    c = model.class_means_projected.shape[0]
    lines.append(f"means {c} {k}")
    for row in model.class_means_projected:
        lines.append(" ".join(repr(float(v)) for v in row))
    if model.preprocess is not None:
        st = model.preprocess
        lines.append(f"normalization {st.kept_mask.size}")
        lines.append("min " + " ".join(repr(float(v)) for v in st.feature_min))
        lines.append("max " + " ".join(repr(float(v)) for v in st.feature_max))
        lines.append("mask " + " ".join(str(int(v)) for v in st.kept_mask))
    lines.append("end")
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(text)


def _read_matrix(reader: _Reader, name: str) -> np.ndarray:
    fields = reader.next(name).split()
    if len(fields) != 3 or fields[0] != name:
        raise ModelFormatError(f"line {reader.pos}: expected {name} line")
    rows, cols = int(fields[1]), int(fields[2])
    out = np.empty((rows, cols))
    for i in range(rows):
        parts = reader.next(name).split()
        if len(parts) != cols:
            raise ModelFormatError(
                f"line {reader.pos}: {name} row needs {cols} values")
        out[i] = [float(v) for v in parts]
    if not np.isfinite(out).all():
        raise ModelFormatError(f"non-finite value in {name}")
    return out


def load_dlda(source) -> DldaModel:
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    reader = _Reader(text.splitlines())
    if reader.next("header") != DLDA_MAGIC:
        raise ModelFormatError("line 1: not a recognized model file")
    fields = reader.next("shape").split()
    if len(fields) != 3 or fields[0] != "shape":
        raise ModelFormatError(f"line {reader.pos}: expected shape line")
    fields = reader.next("classes").split()
    if fields[0] != "classes" or len(fields) < 3:
        raise ModelFormatError(f"line {reader.pos}: expected classes line")
    inventory = tuple(int(v) for v in fields[1:])
    class_names = None
    if (reader.pos < len(reader.lines)
            and reader.lines[reader.pos].startswith("class_names ")):
        class_names = tuple(reader.next("class_names").split()[1:])
    projection = _read_matrix(reader, "projection")
    means = _read_matrix(reader, "means")
    preprocess = None
    line = reader.next("end")
    if line.startswith("normalization"):
        n_features = int(line.split()[1])
        vecs = {}
        for key in ("min", "max", "mask"):
            parts = reader.next(key).split()
            if parts[0] != key or len(parts) != n_features + 1:
                raise ModelFormatError(
                    f"line {reader.pos}: expected {key} with "
                    f"{n_features} values")
            vecs[key] = np.array([float(v) for v in parts[1:]])
        preprocess = NormalizationState(
            feature_min=vecs["min"],
            feature_max=vecs["max"],
            kept_mask=vecs["mask"].astype(bool),
        )
        line = reader.next("end")
    if line != "end":
        raise ModelFormatError(f"line {reader.pos}: expected end marker")
    return DldaModel(
        projection=projection,
        class_means_projected=means,
        class_inventory=inventory,
        class_names=class_names,
        preprocess=preprocess,
    )
