"""The trainable distribution-difference classifier.

``fit`` searches the projection weights with the hybrid optimizer
schedule, freezes the per-class centers of the projected training data,
and picks one-vs-rest decision thresholds on the training scores.
Models persist to a versioned, self-describing text format that round
trips predictions bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from oddkit.core import (
    TransformParams,
    class_summaries,
    discriminate,
    objective,
    pack_params,
    transform,
    unpack_params,
)
from oddkit.data import NormalizationState
from oddkit.numerics import InvalidInputError
from oddkit.optim import OptimizerConfig, OptimizerReport, hybrid_minimize

MODEL_MAGIC = "ODDMODEL v1"


class ModelFormatError(ValueError):
    """Raised when a model file is malformed; message carries the line."""


@dataclass(frozen=True)
class OddConfig:
    """Training configuration.

    p is the projection width; None means "one column per class",
    resolved when the class count is known. The optimizer template's
    dim and seed are filled in by ``fit``; every other optimizer knob
    (budgets, population, step sizes, stall tolerances) passes through.
    """

    p: int | None = None
    nonlinearity: str = "linear"
    gamma: float = 1.0
    optimizer: OptimizerConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.p is not None and self.p < 1:
            raise InvalidInputError("p must be >= 1")
        if self.nonlinearity not in ("linear", "tanh"):
            raise InvalidInputError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.gamma <= 0:
            raise InvalidInputError("gamma must be positive")

    @classmethod
    def odd1(cls, **kw) -> "OddConfig":
        """Single projection column, linear."""
        return cls(p=1, nonlinearity="linear", **kw)

    @classmethod
    def odd_linear(cls, **kw) -> "OddConfig":
        """One column per class, linear."""
        return cls(p=None, nonlinearity="linear", **kw)

    @classmethod
    def odd_tanh(cls, **kw) -> "OddConfig":
        """One column per class, tanh squashing."""
        return cls(p=None, nonlinearity="tanh", **kw)


@dataclass(frozen=True)
class OddModel:
    transform: TransformParams
    centers: np.ndarray
    class_inventory: tuple
    thresholds: np.ndarray
    preprocess: NormalizationState | None = None
    objective_final: float = math.nan
    objective_initial: float = math.nan
    gamma: float = 1.0
    class_names: tuple | None = None
    report: OptimizerReport | None = None


def _resolve_optimizer(config: OddConfig, n_v: int) -> OptimizerConfig:
    base = config.optimizer
    if base is None:
        return OptimizerConfig(dim=n_v, seed=config.seed)
    return OptimizerConfig(
        dim=n_v,
        population=base.population,
        max_iters=base.max_iters,
        seed=config.seed,
        stall_window=base.stall_window,
        stall_tolerance=base.stall_tolerance,
        gradient_tolerance=base.gradient_tolerance,
        initial_step=base.initial_step,
        workers=base.workers,
    )


def fit(X, labels, config: OddConfig = OddConfig(),
        class_names=None) -> OddModel:
    """Train on pre-normalized features.

    Raises on single-class input. A degenerate optimizer termination
    (NaN from the objective) still yields a usable model; the condition
    is visible as report.termination_reason == "degenerate".
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if X.ndim != 2 or labels.shape != (X.shape[0],):
        raise InvalidInputError("X must be 2-D with one label per row")
    classes = np.unique(labels)
    c = classes.size
    if c < 2:
        raise InvalidInputError("training data has a single class")

    p = config.p if config.p is not None else c
    n_prime = X.shape[1] + 1
    n_v = n_prime * p

    # Start from small random weights with a zero bias row: projected
    # coordinates stay near unit scale for [-1, 1] inputs.
    rng = np.random.default_rng(config.seed)
    M0 = rng.normal(0.0, 1.0 / math.sqrt(n_prime), size=(n_prime, p))
    M0[-1, :] = 0.0
    start_params = TransformParams(weights=M0, nonlinearity=config.nonlinearity)
    start_flat = pack_params(start_params)

    def flat_objective(flat):
        params = unpack_params(flat, n_prime, p, config.nonlinearity)
        return objective(params, X, labels, config.gamma).value

    f0 = flat_objective(start_flat)
    opt_cfg = _resolve_optimizer(config, n_v)
    report = hybrid_minimize(flat_objective, opt_cfg, n_v, start=start_flat)

    # The start point is not part of any sampled generation, so guard
    # the no-worse-than-initial guarantee explicitly.
    if report.best_value <= f0:
        best_flat, best_value = report.best_point, report.best_value
    else:
        best_flat, best_value = start_flat, f0
    params = unpack_params(best_flat, n_prime, p, config.nonlinearity)

    Y = transform(params, X)
    summaries = class_summaries(Y, labels)
    centers = np.vstack([s.center for s in summaries])
    scores = predict_scores_from(centers, params, X)
    thresholds = np.array([
        select_threshold(scores[:, k], labels == classes[k])
        for k in range(c)
    ])
    return OddModel(
        transform=params,
        centers=centers,
        class_inventory=tuple(int(k) for k in classes),
        thresholds=thresholds,
        objective_final=float(best_value),
        objective_initial=float(f0),
        gamma=config.gamma,
        class_names=tuple(class_names) if class_names is not None else None,
        report=report,
    )


def predict_scores_from(centers, params: TransformParams, X) -> np.ndarray:
    Y = transform(params, X)
    return np.vstack([discriminate(centers, y) for y in Y])


def predict_scores(model: OddModel, X) -> np.ndarray:
    """Score matrix, one row per instance, one column per class."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.transform.n_inputs:
        raise InvalidInputError(
            f"expected {model.transform.n_inputs} features, got shape {X.shape}")
    return predict_scores_from(model.centers, model.transform, X)


def select_threshold(scores, binary_truth) -> float:
    """Training-set operating point maximizing Youden's J = TPR - FPR.

    Candidate cuts are the midpoints between adjacent distinct scores
    plus {0, 0.5, 1}. Instances scoring at or above the cut are called
    positive. Ties on J resolve toward the cut nearest 0.5, then toward
    the smaller cut.
    """
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(binary_truth, dtype=bool)
    if scores.ndim != 1 or scores.shape != truth.shape:
        raise InvalidInputError("scores and truth must be matching 1-D arrays")
    if not truth.any() or truth.all():
        raise InvalidInputError("threshold selection needs both classes")
    uniq = np.unique(scores)
    candidates = {0.0, 0.5, 1.0}
    candidates.update(((uniq[:-1] + uniq[1:]) / 2.0).tolist())
    pos = truth.sum()
    neg = truth.size - pos
    best = None
    for t in sorted(candidates):
        called = scores >= t
        j = (called & truth).sum() / pos - (called & ~truth).sum() / neg
        key = (-j, abs(t - 0.5), t)
        if best is None or key < best[0]:
            best = (key, t)
    return float(best[1])


def predict_labels(model: OddModel, X) -> np.ndarray:
    """One-vs-rest decision: argmax of (score - threshold) when any
    class clears its threshold, otherwise plain argmax of the scores."""
    scores = predict_scores(model, X)
    margins = scores - model.thresholds[None, :]
    cleared = (margins >= 0).any(axis=1)
    winners = np.where(cleared, margins.argmax(axis=1), scores.argmax(axis=1))
    inventory = np.asarray(model.class_inventory)
    return inventory[winners]


def _write_vector(lines: list, name: str, vec) -> None:
    lines.append(f"{name} {vec.size}")
    for v in np.asarray(vec, dtype=float).ravel():
        lines.append(repr(float(v)))


def save_model(model: OddModel, sink) -> None:
    """Serialize to the versioned text format (full float precision)."""
    lines = [MODEL_MAGIC]
    n_prime, p = model.transform.weights.shape
    lines.append(f"shape {n_prime} {p}")
    lines.append(f"nonlinearity {model.transform.nonlinearity}")
    lines.append(f"gamma {repr(float(model.gamma))}")
    lines.append("classes " + " ".join(str(k) for k in model.class_inventory))
    if model.class_names is not None:
        lines.append("class_names " + " ".join(model.class_names))
    _write_vector(lines, "weights", pack_params(model.transform))
    lines.append(f"centers {model.centers.shape[0]} {model.centers.shape[1]}")
    for row in model.centers:
        lines.append(" ".join(repr(float(v)) for v in row))
    _write_vector(lines, "thresholds", model.thresholds)
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


class _Reader:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self, context: str) -> str:
        if self.pos >= len(self.lines):
            raise ModelFormatError(
                f"line {self.pos + 1}: file truncated while reading {context}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def floats(self, count: int, context: str) -> np.ndarray:
        vals = np.empty(count)
        for i in range(count):
            line = self.next(context)
            try:
                vals[i] = float(line)
            except ValueError:
                raise ModelFormatError(
                    f"line {self.pos}: bad float {line!r} in {context}") from None
        if not np.isfinite(vals).all():
            raise ModelFormatError(f"non-finite value in {context}")
        return vals


def load_model(source) -> OddModel:
    """Parse a saved model; raises ModelFormatError with the offending
    line on any structural problem."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    reader = _Reader(text.splitlines())

    if reader.next("header") != MODEL_MAGIC:
        raise ModelFormatError("line 1: not a recognized model file")
    fields = reader.next("shape").split()
    if len(fields) != 3 or fields[0] != "shape":
        raise ModelFormatError(f"line {reader.pos}: expected shape line")
    n_prime, p = int(fields[1]), int(fields[2])

    fields = reader.next("nonlinearity").split()
    if len(fields) != 2 or fields[0] != "nonlinearity":
        raise ModelFormatError(f"line {reader.pos}: expected nonlinearity line")
    nonlinearity = fields[1]

    fields = reader.next("gamma").split()
    if len(fields) != 2 or fields[0] != "gamma":
        raise ModelFormatError(f"line {reader.pos}: expected gamma line")
    gamma = float(fields[1])

    fields = reader.next("classes").split()
    if fields[0] != "classes" or len(fields) < 3:
        raise ModelFormatError(f"line {reader.pos}: expected classes line")
    inventory = tuple(int(v) for v in fields[1:])

    line = reader.next("weights")
    class_names = None
    if line.startswith("class_names "):
        class_names = tuple(line.split()[1:])
        if len(class_names) != len(inventory):
            raise ModelFormatError(
                f"line {reader.pos}: {len(class_names)} names for "
                f"{len(inventory)} classes")
        line = reader.next("weights")
    fields = line.split()
    if len(fields) != 2 or fields[0] != "weights":
        raise ModelFormatError(f"line {reader.pos}: expected weights line")
    count = int(fields[1])
    if count != n_prime * p:
        raise ModelFormatError(
            f"line {reader.pos}: weight count {count} does not match "
            f"shape {n_prime}x{p}")
    flat = reader.floats(count, "weights")
    try:
        params = unpack_params(flat, n_prime, p, nonlinearity)
    except InvalidInputError as exc:
        raise ModelFormatError(f"invalid weights: {exc}") from exc

    fields = reader.next("centers").split()
    if len(fields) != 3 or fields[0] != "centers":
        raise ModelFormatError(f"line {reader.pos}: expected centers line")
    c, pc = int(fields[1]), int(fields[2])
    if c != len(inventory) or pc != p:
        raise ModelFormatError(
            f"line {reader.pos}: centers shape {c}x{pc} inconsistent")
    centers = np.empty((c, p))
    for i in range(c):
        parts = reader.next("centers").split()
        if len(parts) != p:
            raise ModelFormatError(
                f"line {reader.pos}: center row needs {p} values")
        centers[i] = [float(v) for v in parts]
    if not np.isfinite(centers).all():
        raise ModelFormatError("non-finite value in centers")

    fields = reader.next("thresholds").split()
    if len(fields) != 2 or fields[0] != "thresholds":
        raise ModelFormatError(f"line {reader.pos}: expected thresholds line")
    thresholds = reader.floats(int(fields[1]), "thresholds")

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

    return OddModel(
        transform=params,
        centers=centers,
        class_inventory=inventory,
        thresholds=thresholds,
        preprocess=preprocess,
        gamma=gamma,
        class_names=class_names,
    )
