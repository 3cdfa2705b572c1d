"""Black-box models: the abstraction, built-in trainers and a gradient oracle.

Every built-in model is a deterministic, vectorised predictor returning the
class-1 probability. Interpretable models carry a gold-standard feature set:
non-zero weights for logistic and linear models, split features for forests.
Models are stored as JSON documents holding an architecture tag plus flat
parameter arrays.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit
from tqdm import tqdm

from slime.errors import (
    DatasetError,
    DegenerateData,
    DimensionMismatch,
    NonConvergenceWarning,
)
from slime.neighborhoods import ConversionSpec, convert_batch
from slime.persistence import read_json, write_json
from slime.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

GOLD_WEIGHT_TOL = 1e-9
DEFAULT_FD_STEP = 1e-4

Predictor = Callable[[np.ndarray], np.ndarray]


class Smoothness(str, Enum):
    SMOOTH = "smooth"
    PIECEWISE_CONSTANT = "piecewise_constant"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary classification data: ``m × d`` features and 0/1 labels."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: Tuple[str, ...]

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=float)
        labels = np.array(self.labels)
        if features.ndim != 2:
            raise DimensionMismatch(f"features must be 2-d, got shape {features.shape}")
        m, d = features.shape
        if labels.shape != (m,):
            raise DimensionMismatch(f"{m} rows but labels of shape {labels.shape}")
        if m < 2:
            raise DatasetError(f"a dataset needs at least 2 rows, got {m}")
        if not np.all(np.isfinite(features)):
            raise DatasetError("features contain NaN or infinite entries")
        if not np.all(np.isin(labels, (0, 1))):
            raise DatasetError("labels must be binary 0/1")
        names = tuple(str(name) for name in self.feature_names)
        if len(names) != d:
            raise DimensionMismatch(f"{d} features but {len(names)} feature names")
        features.setflags(write=False)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)

    @property
    def size(self) -> int:
        return int(self.features.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    def require_both_classes(self) -> None:
        present = set(np.unique(self.labels).tolist())
        if present != {0, 1}:
            raise DegenerateData(
                f"training data must contain both classes, found only {sorted(present)}"
            )


@dataclass(frozen=True)
class TrainingReport:
    iterations: int
    final_loss: float
    converged: bool


@dataclass(frozen=True, eq=False)
class BlackBox:
    """Opaque probabilistic classifier ``f : ℝ^d → [0, 1]``."""

    predictor: Predictor
    dimension: int
    smoothness: Smoothness = Smoothness.SMOOTH
    gold_features: Optional[frozenset[int]] = None
    architecture: str = "custom"
    parameters: Dict[str, Any] = field(default_factory=dict)
    training: Optional[TrainingReport] = None


def predict_batch(model: BlackBox, points: np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    """Apply the model row by row (vectorised); preserves order."""

    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.zeros(0)
    if points.ndim != 2 or points.shape[1] != model.dimension:
        raise DimensionMismatch(
            f"batch of shape {points.shape} for a {model.dimension}-d model"
        )
    scores = np.asarray(model.predictor(points), dtype=float)
    if scores.shape != (points.shape[0],):
        raise DimensionMismatch(
            f"predictor returned shape {scores.shape} for {points.shape[0]} rows"
        )
    return scores


# ---------- Parametric model builders ----------


def _linear_predictor(parameters: Dict[str, Any]) -> Predictor:
    coefficients = np.asarray(parameters["coefficients"], dtype=float)
    intercept = float(parameters["intercept"])
    return lambda X: np.clip(intercept + X @ coefficients, 0.0, 1.0)


def _logistic_predictor(parameters: Dict[str, Any]) -> Predictor:
    coefficients = np.asarray(parameters["coefficients"], dtype=float)
    intercept = float(parameters["intercept"])
    return lambda X: expit(intercept + X @ coefficients)


def _forest_predictor(parameters: Dict[str, Any]) -> Predictor:
    offsets = np.asarray(parameters["tree_offsets"], dtype=np.int64)
    feature = np.asarray(parameters["feature"], dtype=np.int64)
    threshold = np.asarray(parameters["threshold"], dtype=float)
    left = np.asarray(parameters["left"], dtype=np.int64)
    right = np.asarray(parameters["right"], dtype=np.int64)
    value = np.asarray(parameters["value"], dtype=float)
    depth = int(parameters["depth"])

    def predict(X: np.ndarray) -> np.ndarray:
        total = np.zeros(X.shape[0])
        rows = np.arange(X.shape[0])
        for root in offsets[:-1]:
            node = np.full(X.shape[0], root, dtype=np.int64)
            for _ in range(depth):
                split = feature[node] >= 0
                if not np.any(split):
                    break
                goes_left = X[rows, np.where(split, feature[node], 0)] <= threshold[node]
                child = np.where(goes_left, left[node], right[node]) + root
                node = np.where(split, child, node)
            total += value[node]
        return total / (offsets.size - 1)

    return predict


def _mlp_predictor(parameters: Dict[str, Any]) -> Predictor:
    hidden = int(parameters["hidden"])
    mean = np.asarray(parameters["mean"], dtype=float)
    scale = np.asarray(parameters["scale"], dtype=float)
    hidden_weights = np.asarray(parameters["hidden_weights"], dtype=float).reshape(
        mean.size, hidden
    )
    hidden_bias = np.asarray(parameters["hidden_bias"], dtype=float)
    output_weights = np.asarray(parameters["output_weights"], dtype=float)
    output_bias = float(parameters["output_bias"])

    def predict(X: np.ndarray) -> np.ndarray:
        activations = expit(((X - mean) / scale) @ hidden_weights + hidden_bias)
        return expit(activations @ output_weights + output_bias)

    return predict


_BUILDERS: Dict[str, Callable[[Dict[str, Any]], Predictor]] = {
    "linear": _linear_predictor,
    "logistic": _logistic_predictor,
    "forest": _forest_predictor,
    "mlp": _mlp_predictor,
}


def _assemble(
    architecture: str,
    dimension: int,
    parameters: Dict[str, Any],
    smoothness: Smoothness,
    gold_features: Optional[frozenset[int]],
    training: Optional[TrainingReport] = None,
) -> BlackBox:
    return BlackBox(
        predictor=_BUILDERS[architecture](parameters),
        dimension=int(dimension),
        smoothness=smoothness,
        gold_features=gold_features,
        architecture=architecture,
        parameters=parameters,
        training=training,
    )


def _support(coefficients: np.ndarray) -> frozenset[int]:
    return frozenset(int(i) for i in np.flatnonzero(np.abs(coefficients) > GOLD_WEIGHT_TOL))


def linear_blackbox(coefficients: Sequence[float], intercept: float) -> BlackBox:
    """``f(x) = clip(intercept + coefficients · x, 0, 1)``."""

    coefficients = np.asarray(coefficients, dtype=float)
    parameters = {"coefficients": coefficients.tolist(), "intercept": float(intercept)}
    return _assemble(
        "linear", coefficients.size, parameters, Smoothness.SMOOTH, _support(coefficients)
    )


def logistic_blackbox(
    coefficients: Sequence[float],
    intercept: float,
    training: Optional[TrainingReport] = None,
) -> BlackBox:
    """``f(x) = sigmoid(intercept + coefficients · x)``."""

    coefficients = np.asarray(coefficients, dtype=float)
    parameters = {"coefficients": coefficients.tolist(), "intercept": float(intercept)}
    return _assemble(
        "logistic",
        coefficients.size,
        parameters,
        Smoothness.SMOOTH,
        _support(coefficients),
        training,
    )


# ---------- Trainers ----------


def _binary_cross_entropy(probabilities: np.ndarray, labels: np.ndarray) -> float:
    clipped = np.clip(probabilities, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(labels * np.log(clipped) + (1 - labels) * np.log1p(-clipped)))


def _plateaued(history: List[float], window: int, tol: float) -> bool:
    if len(history) <= window:
        return False
    previous, current = history[-window - 1], history[-1]
    return abs(previous - current) <= tol * max(1.0, abs(current))


def _report_convergence(name: str, report: TrainingReport) -> None:
    if report.converged:
        logger.info(
            f"{name} converged after {report.iterations} iterations "
            f"(loss={report.final_loss:.6g})"
        )
    else:
        warnings.warn(
            f"{name} did not converge within {report.iterations} iterations "
            f"(loss={report.final_loss:.6g})",
            NonConvergenceWarning,
            stacklevel=3,
        )


def train_logistic(
    data: Dataset,
    l1: float = 0.0,
    max_iter: int = 5000,
    tol: float = 1e-10,
    show_progress: bool = False,
) -> BlackBox:
    """L1-regularised logistic regression by accelerated proximal gradient.

    Minimises the averaged log-loss plus ``l1·‖w‖₁`` (intercept unpenalised),
    starting from zeros with step ``1/L`` where ``L = ‖[1, X]‖₂² / (4m)``.
    Converged when the objective moves by less than ``tol`` (relative) over
    ten iterations.
    """

    data.require_both_classes()
    if l1 < 0.0:
        raise ValueError(f"l1 must be non-negative, got {l1}")
    m, d = data.features.shape
    design = np.column_stack([np.ones(m), data.features])
    labels = data.labels.astype(float)
    lipschitz = max(np.linalg.norm(design, 2) ** 2 / (4.0 * m), 1e-12)
    step = 1.0 / lipschitz

    theta = np.zeros(d + 1)
    momentum_point = theta.copy()
    t = 1.0
    history: List[float] = []
    converged = False
    iterations = 0
    for iterations in tqdm(
        range(1, max_iter + 1), desc="logistic", leave=False, disable=not show_progress
    ):
        gradient = design.T @ (expit(design @ momentum_point) - labels) / m
        candidate = momentum_point - step * gradient
        candidate[1:] = np.sign(candidate[1:]) * np.maximum(
            np.abs(candidate[1:]) - step * l1, 0.0
        )
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        momentum_point = candidate + ((t - 1.0) / t_next) * (candidate - theta)
        theta, t = candidate, t_next

        objective = _binary_cross_entropy(expit(design @ theta), labels) + l1 * float(
            np.abs(theta[1:]).sum()
        )
        history.append(objective)
        if _plateaued(history, window=10, tol=tol):
            converged = True
            break

    report = TrainingReport(iterations=iterations, final_loss=history[-1], converged=converged)
    _report_convergence("logistic regression", report)
    return logistic_blackbox(theta[1:], theta[0], training=report)


def _gini_split(X: np.ndarray, y: np.ndarray) -> Optional[Tuple[int, float]]:
    """Best axis-aligned split by weighted Gini impurity, or None if none helps.

    Ties go to the lowest feature index, then the lowest threshold.
    """

    m, d = X.shape
    positives = y.sum()
    p = positives / m
    best_impurity = 2.0 * p * (1.0 - p) - 1e-12
    best: Optional[Tuple[int, float]] = None
    left_n = np.arange(1, m, dtype=float)
    right_n = m - left_n
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], y[order]
        left_pos = np.cumsum(ys)[:-1]
        p_left = left_pos / left_n
        p_right = (positives - left_pos) / right_n
        impurity = (
            left_n * 2.0 * p_left * (1.0 - p_left)
            + right_n * 2.0 * p_right * (1.0 - p_right)
        ) / m
        impurity[xs[1:] <= xs[:-1]] = np.inf
        if impurity.size == 0:
            continue
        i = int(np.argmin(impurity))
        if impurity[i] < best_impurity:
            best_impurity = impurity[i]
            best = (j, float((xs[i] + xs[i + 1]) / 2.0))
    return best


def _grow_tree(
    X: np.ndarray, y: np.ndarray, depth: int, nodes: Dict[str, List[Any]]
) -> int:
    """Append a subtree to ``nodes`` (tree-local indices); return its root index."""

    index = len(nodes["feature"])
    nodes["feature"].append(-1)
    nodes["threshold"].append(0.0)
    nodes["left"].append(-1)
    nodes["right"].append(-1)
    nodes["value"].append(float(y.mean()))

    split = _gini_split(X, y) if depth > 0 and 0 < y.sum() < y.size else None
    if split is None:
        return index
    feature, threshold = split
    mask = X[:, feature] <= threshold
    nodes["feature"][index] = feature
    nodes["threshold"][index] = threshold
    nodes["left"][index] = _grow_tree(X[mask], y[mask], depth - 1, nodes)
    nodes["right"][index] = _grow_tree(X[~mask], y[~mask], depth - 1, nodes)
    return index


def train_stump_forest(
    data: Dataset, trees: int = 10, depth: int = 3, seed: int = 0, show_progress: bool = False
) -> BlackBox:
    """Bagged axis-aligned decision trees grown by greedy Gini splits.

    Each tree is fitted on a bootstrap resample drawn from ``derive_seed(seed, t)``;
    the forest predicts the mean of the leaves' class-1 fractions. With
    ``trees=1`` this is a single (bootstrapped) decision tree.
    """

    data.require_both_classes()
    if int(trees) < 1 or int(depth) < 1:
        raise ValueError(f"trees and depth must be >= 1, got {trees} and {depth}")
    X, y = data.features, data.labels.astype(float)
    flat: Dict[str, List[Any]] = {k: [] for k in ("feature", "threshold", "left", "right", "value")}
    offsets = [0]
    for t in tqdm(range(int(trees)), desc="forest", leave=False, disable=not show_progress):
        rng = make_rng(derive_seed(seed, t))
        rows = rng.integers(0, data.size, size=data.size)
        nodes: Dict[str, List[Any]] = {k: [] for k in flat}
        _grow_tree(X[rows], y[rows], int(depth), nodes)
        for key in flat:
            flat[key].extend(nodes[key])
        offsets.append(len(flat["feature"]))

    used = frozenset(int(f) for f in flat["feature"] if f >= 0)
    parameters = {"tree_offsets": offsets, "depth": int(depth), **flat}
    logger.info(f"forest of {trees} trees uses features {sorted(used)}")
    return _assemble("forest", data.dimension, parameters, Smoothness.PIECEWISE_CONSTANT, used)


def train_mlp(
    data: Dataset,
    hidden: int = 100,
    seed: int = 0,
    learning_rate: float = 1.0,
    momentum: float = 0.9,
    epochs: int = 3000,
    tol: float = 1e-7,
    show_progress: bool = False,
) -> BlackBox:
    """One hidden layer of logistic units with a sigmoid head.

    Inputs are standardised with the training mean and scale (stored in the
    model); weights start from ``N(0, 1/fan_in)`` drawn with ``seed``; training
    is full-batch gradient descent with heavy-ball momentum on the averaged
    log-loss. Converged when the loss moves by less than ``tol`` (relative) over
    100 epochs.
    """

    data.require_both_classes()
    if int(hidden) < 1:
        raise ValueError(f"hidden must be >= 1, got {hidden}")
    m, d = data.features.shape
    mean = data.features.mean(axis=0)
    scale = data.features.std(axis=0)
    scale[scale == 0.0] = 1.0
    Z = (data.features - mean) / scale
    labels = data.labels.astype(float)

    rng = make_rng(seed)
    W1 = rng.standard_normal((d, hidden)) / np.sqrt(d)
    b1 = np.zeros(hidden)
    w2 = rng.standard_normal(hidden) / np.sqrt(hidden)
    b2 = 0.0
    velocity = [np.zeros_like(W1), np.zeros_like(b1), np.zeros_like(w2), 0.0]

    history: List[float] = []
    converged = False
    epoch = 0
    for epoch in tqdm(range(1, epochs + 1), desc="mlp", leave=False, disable=not show_progress):
        H = expit(Z @ W1 + b1)
        p = expit(H @ w2 + b2)
        history.append(_binary_cross_entropy(p, labels))
        if _plateaued(history, window=100, tol=tol):
            converged = True
            break

        delta = (p - labels) / m
        grad_w2 = H.T @ delta
        grad_b2 = float(delta.sum())
        hidden_delta = np.outer(delta, w2) * H * (1.0 - H)
        grad_W1 = Z.T @ hidden_delta
        grad_b1 = hidden_delta.sum(axis=0)

        velocity[0] = momentum * velocity[0] - learning_rate * grad_W1
        velocity[1] = momentum * velocity[1] - learning_rate * grad_b1
        velocity[2] = momentum * velocity[2] - learning_rate * grad_w2
        velocity[3] = momentum * velocity[3] - learning_rate * grad_b2
        W1 = W1 + velocity[0]
        b1 = b1 + velocity[1]
        w2 = w2 + velocity[2]
        b2 = b2 + velocity[3]

    report = TrainingReport(iterations=epoch, final_loss=history[-1], converged=converged)
    _report_convergence("mlp", report)
    parameters = {
        "hidden": int(hidden),
        "mean": mean.tolist(),
        "scale": scale.tolist(),
        "hidden_weights": W1.ravel().tolist(),
        "hidden_bias": b1.tolist(),
        "output_weights": w2.tolist(),
        "output_bias": float(b2),
    }
    return _assemble("mlp", d, parameters, Smoothness.SMOOTH, None, report)


# ---------- Gradient oracle ----------


def surrogate_gradient_fd(
    model: BlackBox,
    conversion: ConversionSpec,
    at: Optional[np.ndarray] = None,
    h: float = DEFAULT_FD_STEP,
) -> np.ndarray:
    """Central-difference gradient of ``f ∘ η_x`` at ``at`` (default ``x̂``).

    Only meaningful for smooth models; on piecewise-constant models the result
    is whatever the finite differences happen to see.
    """

    if h <= 0.0:
        raise ValueError(f"step h must be positive, got {h}")
    point = conversion.surrogate_target if at is None else np.asarray(at, dtype=float)
    d = conversion.surrogate_dimension
    if point.shape != (d,):
        raise DimensionMismatch(f"point of shape {point.shape} for a {d}-d surrogate space")
    steps = h * np.eye(d)
    stencil = np.vstack([point + steps, point - steps])
    values = predict_batch(model, convert_batch(conversion, stencil))
    return (values[:d] - values[d:]) / (2.0 * h)


# ---------- JSON persistence ----------


def model_to_dict(model: BlackBox) -> Dict[str, Any]:
    if model.architecture not in _BUILDERS:
        raise ValueError(f"cannot serialise a model of architecture {model.architecture!r}")
    return {
        "architecture": model.architecture,
        "dimension": model.dimension,
        "smoothness": model.smoothness.value,
        "gold_features": None if model.gold_features is None else sorted(model.gold_features),
        "parameters": model.parameters,
        "training": None if model.training is None else asdict(model.training),
    }


def model_from_dict(document: Dict[str, Any]) -> BlackBox:
    try:
        architecture = document["architecture"]
        if architecture not in _BUILDERS:
            raise DatasetError(f"unknown model architecture {architecture!r}")
        gold = document.get("gold_features")
        training = document.get("training")
        return _assemble(
            architecture,
            int(document["dimension"]),
            dict(document["parameters"]),
            Smoothness(document["smoothness"]),
            None if gold is None else frozenset(int(i) for i in gold),
            None if training is None else TrainingReport(**training),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"malformed model document: {exc}") from exc


def save_model(model: BlackBox, path: Path) -> None:
    write_json(path, model_to_dict(model))


def load_model(path: Path) -> BlackBox:
    try:
        document = read_json(path)
    except ValueError as exc:
        raise DatasetError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(document)


__all__ = [
    "BlackBox",
    "Dataset",
    "Smoothness",
    "TrainingReport",
    "linear_blackbox",
    "load_model",
    "logistic_blackbox",
    "model_from_dict",
    "model_to_dict",
    "predict_batch",
    "save_model",
    "surrogate_gradient_fd",
    "train_logistic",
    "train_mlp",
    "train_stump_forest",
]
