"""Dataset container, CSV ingestion, preprocessing, splits, and the
synthetic benchmark generators.

Preprocessing follows a strict train-only discipline: normalization
bounds and the zero-variance feature mask come from the training split
alone and are then applied unchanged to test data, which may therefore
land outside [-1, 1].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from oddkit.numerics import InvalidInputError


class DataError(ValueError):
    """Raised for malformed files or datasets violating preconditions."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with dense integer class labels.

    Labels are 0-based and contiguous; class_names keeps the original
    label spelling in id order when the source had one.
    """

    X: np.ndarray
    labels: np.ndarray
    class_names: tuple | None = None
    provenance: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {X.shape}")
        if labels.ndim != 1 or labels.shape[0] != X.shape[0]:
            raise DataError(
                f"{labels.shape} labels for {X.shape[0]} instances")
        if not np.isfinite(X).all():
            raise DataError("features contain non-finite values")
        if labels.size and labels.min() < 0:
            raise DataError("labels must be nonnegative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class NormalizationState:
    """Per-feature train minima/maxima plus the kept-feature mask."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    kept_mask: np.ndarray


def load_csv(source, label_column=-1, has_header: bool = True) -> Dataset:
    """Read a delimited table into a Dataset.

    label_column selects the class column by header name (string) or
    position (int, negatives allowed). Remaining columns must be
    numeric. Labels map to dense ids in first-appearance order.
    """
    path = Path(source)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")

    header = None
    if has_header:
        header = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no data rows after header")

    width = len(rows[0])
    if isinstance(label_column, str):
        if header is None:
            raise DataError("label column by name requires a header")
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
    else:
        label_idx = label_column if label_column >= 0 else width + label_column
        if not 0 <= label_idx < width:
            raise DataError(f"{path}: label column {label_column} out of range")

    features = []
    raw_labels = []
    first_data_line = 2 if has_header else 1
    for r, row in enumerate(rows, start=first_data_line):
        if len(row) != width:
            raise DataError(
                f"{path}: row {r} has {len(row)} cells, expected {width}")
        vals = []
        for c, cell in enumerate(row):
            if c == label_idx:
                continue
            text = cell.strip()
            if not text:
                raise DataError(f"{path}: row {r}, column {c + 1}: empty cell")
            try:
                vals.append(float(text))
            except ValueError:
                raise DataError(
                    f"{path}: row {r}, column {c + 1}: "
                    f"non-numeric value {text!r}") from None
        features.append(vals)
        raw_labels.append(row[label_idx].strip())

    mapping: dict[str, int] = {}
    labels = []
    for lab in raw_labels:
        if lab not in mapping:
            mapping[lab] = len(mapping)
        labels.append(mapping[lab])
    names = tuple(mapping.keys())
    X = np.asarray(features, dtype=float)
    if not np.isfinite(X).all():
        raise DataError(f"{path}: non-finite feature value")
    return Dataset(
        X=X,
        labels=np.asarray(labels, dtype=int),
        class_names=names,
        provenance=f"csv:{path} labels={dict(mapping)}",
    )


def save_csv(ds: Dataset, path, feature_names=None, label_name: str = "label"):
    """Write a Dataset to CSV with full float precision."""
    path = Path(path)
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(ds.n)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(feature_names) + [label_name])
        for i in range(ds.m):
            lab = (ds.class_names[ds.labels[i]]
                   if ds.class_names else str(ds.labels[i]))
            writer.writerow([repr(float(v)) for v in ds.X[i]] + [lab])


def fit_normalization(train: Dataset) -> NormalizationState:
    """Learn [-1, 1] scaling bounds and drop zero-variance features."""
    if train.m < 1:
        raise DataError("training split is empty")
    lo = train.X.min(axis=0)
    hi = train.X.max(axis=0)
    kept = hi > lo
    if not kept.any():
        raise DataError("every feature has zero variance on the training split")
    return NormalizationState(feature_min=lo, feature_max=hi, kept_mask=kept)


def apply_normalization(state: NormalizationState, ds: Dataset) -> Dataset:
    """Map kept features through the train bounds; no clipping."""
    if ds.n != state.kept_mask.shape[0]:
        raise DataError(
            f"dataset has {ds.n} features, normalization expects "
            f"{state.kept_mask.shape[0]}")
    k = state.kept_mask
    lo, hi = state.feature_min[k], state.feature_max[k]
    Xn = 2.0 * (ds.X[:, k] - lo) / (hi - lo) - 1.0
    return replace(ds, X=Xn, provenance=ds.provenance + " |normalized")


def stratified_split(ds: Dataset, train_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Random per-class split; ceil(fraction * m_k) instances train.

    Every class keeps at least one training instance, and at least one
    test instance when it has two or more overall.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must be in (0, 1)")
    counts = ds.class_counts()
    if (counts == 0).any():
        raise DataError(f"empty class in counts {counts.tolist()}")
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    singletons = []
    for k in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == k)
        take = math.ceil(train_fraction * members.size)
        take = max(1, min(take, members.size if members.size == 1
                          else members.size - 1))
        perm = rng.permutation(members)
        train_idx.append(perm[:take])
        test_idx.append(perm[take:])
        if members.size == 1:
            singletons.append(k)
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx)) if any(
        t.size for t in test_idx) else np.array([], dtype=int)
    note = f" |missing-in-test:{singletons}" if singletons else ""
    train = replace(ds, X=ds.X[train_idx], labels=ds.labels[train_idx],
                    provenance=ds.provenance + " |train")
    test = replace(ds, X=ds.X[test_idx], labels=ds.labels[test_idx],
                   provenance=ds.provenance + " |test" + note)
    return train, test


def imbalance_split(ds: Dataset, majority_fraction: float,
                    minority_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Binary split taking majority_fraction of class 0 and
    minority_fraction of class 1 into training."""
    if ds.n_classes != 2:
        raise DataError("imbalance_split needs a binary dataset")
    if not 0.0 < minority_fraction <= 1.0 or not 0.0 < majority_fraction <= 1.0:
        raise DataError("fractions must be in (0, 1]")
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    for k, frac in ((0, majority_fraction), (1, minority_fraction)):
        members = np.flatnonzero(ds.labels == k)
        take = math.ceil(frac * members.size)
        take = max(1, min(take, members.size - 1 if members.size > 1
                          else members.size))
        perm = rng.permutation(members)
        train_idx.append(perm[:take])
        test_idx.append(perm[take:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    train = replace(ds, X=ds.X[train_idx], labels=ds.labels[train_idx],
                    provenance=ds.provenance + " |imb-train")
    test = replace(ds, X=ds.X[test_idx], labels=ds.labels[test_idx],
                   provenance=ds.provenance + " |imb-test")
    return train, test


SERIES_LEN = 300


def _scaled(count: int, scale: float) -> int:
    if scale <= 0:
        raise DataError("scale must be positive")
    return max(1, round(count * scale))


def _band_series(rng, count: int, z_lo: float, z_hi: float) -> np.ndarray:
    """Sinusoid in a random frequency band plus two fixed-frequency
    cosine components with a shared random amplitude factor and heavy
    Gaussian noise."""
    t = np.arange(SERIES_LEN) / SERIES_LEN
    out = np.empty((count, SERIES_LEN))
    for i in range(count):
        a = rng.uniform(15.0, 25.0)
        z = rng.uniform(z_lo, z_hi)
        r = rng.uniform(0.0, 1.0)
        out[i] = (a * np.sin(2 * np.pi * z * t)
                  + 10.0 * r * np.cos(20 * np.pi * t)
                  + 10.0 * r * np.cos(400 * np.pi * t)
                  + rng.normal(0.0, 30.0, SERIES_LEN))
    return out


def gen_db1(seed, train: bool = True, scale: float = 1.0) -> Dataset:
    """Two-class frequency-band series benchmark.

    Class 0 draws its sinusoid frequency from [65, 75], class 1 from
    [15, 25]. Training is imbalanced (50 vs 500); the test draw uses
    500 per class.
    """
    rng = np.random.default_rng([int(seed), 0 if train else 1])
    counts = (50, 500) if train else (500, 500)
    counts = tuple(_scaled(c, scale) for c in counts)
    X = np.vstack([
        _band_series(rng, counts[0], 65.0, 75.0),
        _band_series(rng, counts[1], 15.0, 25.0),
    ])
    labels = np.repeat([0, 1], counts)
    return Dataset(X=X, labels=labels, class_names=("high_band", "low_band"),
                   provenance=f"gen:db1 seed={seed} train={train} scale={scale}")


DB2_BANDS = ((10.0, 20.0), (30.0, 40.0), (50.0, 60.0), (70.0, 80.0))
DB2_COUNTS = (50, 250, 500, 10)


def gen_db2(seed, train: bool = True, scale: float = 1.0) -> Dataset:
    """Four-class variant of the band benchmark with skewed class sizes
    (50, 250, 500, 10) in both splits."""
    rng = np.random.default_rng([int(seed), 0 if train else 1])
    counts = tuple(_scaled(c, scale) for c in DB2_COUNTS)
    X = np.vstack([
        _band_series(rng, cnt, lo, hi)
        for cnt, (lo, hi) in zip(counts, DB2_BANDS)
    ])
    labels = np.repeat(np.arange(4), counts)
    return Dataset(X=X, labels=labels,
                   class_names=tuple(f"band{i}" for i in range(4)),
                   provenance=f"gen:db2 seed={seed} train={train} scale={scale}")


def _mixed_gaussian_series(rng, count: int, spec_a, spec_b) -> np.ndarray:
    """Series of i.i.d. normal samples whose mean/std pair comes from one
    of two per-instance branches chosen with probability one half."""
    out = np.empty((count, SERIES_LEN))
    for i in range(count):
        if rng.uniform() < 0.5:
            a, b = spec_a[0], rng.uniform(*spec_a[1])
        else:
            a, b = rng.uniform(*spec_b[0]), spec_b[1]
        out[i] = rng.normal(a, b, SERIES_LEN)
    return out


def gen_db3(seed, scale: float = 1.0) -> tuple[Dataset, Dataset]:
    """Two-class benchmark separable only by mean and variance jointly.

    Class 0 instances (100) sample N(40, b) with b ~ U[95, 105] or
    N(a, 80) with a ~ U[49, 51]; class 1 instances (1000) sample
    N(40, b) with b ~ U[55, 65] or N(a, 80) with a ~ U[29, 31]. Returns
    an independently drawn (train, test) pair of equal shape.
    """
    def one(split: int) -> Dataset:
        rng = np.random.default_rng([int(seed), split])
        counts = (_scaled(100, scale), _scaled(1000, scale))
        X = np.vstack([
            _mixed_gaussian_series(rng, counts[0], (40.0, (95.0, 105.0)),
                                   ((49.0, 51.0), 80.0)),
            _mixed_gaussian_series(rng, counts[1], (40.0, (55.0, 65.0)),
                                   ((29.0, 31.0), 80.0)),
        ])
        labels = np.repeat([0, 1], counts)
        return Dataset(X=X, labels=labels, class_names=("wide", "narrow"),
                       provenance=f"gen:db3 seed={seed} split={split} scale={scale}")
    return one(0), one(1)


def bundled_path(name: str) -> Path:
    """Filesystem path of a CSV shipped inside the package."""
    ref = resources.files("oddkit") / "datasets" / name
    path = Path(str(ref))
    if not path.exists():
        raise DataError(f"no bundled dataset named {name!r}")
    return path
