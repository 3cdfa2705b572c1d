"""Sparse linear surrogates fitted by weighted least squares.

The same solver backs both explainers: LIME passes kernel weights, s-LIME
passes unit weights. Sparsity comes from greedy forward selection followed by a
refit on the selected columns; the intercept is never penalised and never
counts toward ``k``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from slime.errors import DimensionMismatch, InvalidK, SingularSystem

logger = logging.getLogger(__name__)

DEFAULT_DEGENERACY_TOL = 1e-9
# Relative slack under which two candidate RSS values count as tied.
TIE_RELATIVE_TOL = 1e-12


def _frozen_array(values: Any, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LinearSurrogate:
    """Affine explanation ``g(z) = intercept + coefficients · z``."""

    intercept: float
    coefficients: np.ndarray
    selected: Tuple[int, ...]

    def __post_init__(self) -> None:
        coefficients = _frozen_array(self.coefficients, ndim=1)
        selected = tuple(sorted(int(i) for i in self.selected))
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "selected", selected)

        if len(set(selected)) != len(selected):
            raise ValueError(f"duplicate indices in selected: {selected}")
        if any(i < 0 or i >= coefficients.size for i in selected):
            raise DimensionMismatch(
                f"selected {selected} out of range for {coefficients.size} coefficients"
            )
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(coefficients))):
            raise ValueError("surrogate parameters must be finite")
        outside = np.ones(coefficients.size, dtype=bool)
        outside[list(selected)] = False
        if np.any(coefficients[outside] != 0.0):
            raise ValueError("coefficients outside the selected set must be zero")

    @property
    def dimension(self) -> int:
        return int(self.coefficients.size)

    @property
    def explained_features(self) -> frozenset[int]:
        """Selected indices whose refit coefficient is not exactly zero."""

        return frozenset(i for i in self.selected if self.coefficients[i] != 0.0)

    @classmethod
    def constant(cls, intercept: float, dimension: int) -> "LinearSurrogate":
        return cls(intercept=intercept, coefficients=np.zeros(dimension), selected=())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "intercept": self.intercept,
            "coefficients": self.coefficients.tolist(),
            "selected": list(self.selected),
        }


@dataclass(frozen=True, eq=False)
class NeighborhoodSample:
    """Training set for a surrogate: points, per-point weights and black-box labels."""

    points: np.ndarray
    weights: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        points = _frozen_array(self.points, ndim=2)
        weights = _frozen_array(self.weights, ndim=1)
        labels = _frozen_array(self.labels, ndim=1)
        n = points.shape[0]
        if weights.size != n or labels.size != n:
            raise DimensionMismatch(
                f"{n} points but {weights.size} weights and {labels.size} labels"
            )
        if n == 0:
            raise DimensionMismatch("a neighborhood needs at least one point")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(labels))):
            raise ValueError("points and labels must be finite")
        # Kernel weights may underflow to 0.0; negative or all-zero weights are errors.
        if np.any(~np.isfinite(weights)) or np.any(weights < 0.0):
            raise ValueError("weights must be finite and non-negative")
        if not np.any(weights > 0.0):
            raise ValueError("at least one weight must be positive")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def unweighted(cls, points: np.ndarray, labels: np.ndarray) -> "NeighborhoodSample":
        points = np.asarray(points, dtype=float)
        return cls(points=points, weights=np.ones(points.shape[0]), labels=labels)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.points.shape[1])


def _solve_columns(
    sample: NeighborhoodSample, columns: Sequence[int], ridge: float
) -> Tuple[np.ndarray, float]:
    """Weighted least squares on the intercept plus ``columns``.

    Returns the parameter vector (intercept first) and the weighted residual
    sum of squares.
    """

    design = np.column_stack([np.ones(sample.size), sample.points[:, list(columns)]])
    root = np.sqrt(sample.weights)
    scaled = design * root[:, None]
    gram = scaled.T @ scaled

    if ridge == 0.0 and np.linalg.matrix_rank(gram, hermitian=True) < gram.shape[0]:
        raise SingularSystem(
            f"normal matrix of rank < {gram.shape[0]} on columns {list(columns)}"
        )

    labels = sample.labels
    if np.all(labels == labels[0]):
        theta = np.zeros(design.shape[1])
        theta[0] = labels[0]
    else:
        penalty = np.full(design.shape[1], ridge)
        penalty[0] = 0.0
        gram = gram + np.diag(penalty)
        try:
            theta = np.linalg.solve(gram, scaled.T @ (labels * root))
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"normal equations not solvable: {exc}") from exc
        if not np.all(np.isfinite(theta)):
            raise SingularSystem("normal equations produced non-finite parameters")

    residual = labels - design @ theta
    rss = float(np.sum(sample.weights * residual**2))
    return theta, rss


def _check_ridge(ridge: float) -> float:
    ridge = float(ridge)
    if not np.isfinite(ridge) or ridge < 0.0:
        raise ValueError(f"ridge must be a non-negative real, got {ridge}")
    return ridge


def _surrogate_from(
    theta: np.ndarray, columns: Sequence[int], dimension: int
) -> LinearSurrogate:
    coefficients = np.zeros(dimension)
    coefficients[list(columns)] = theta[1:]
    return LinearSurrogate(
        intercept=float(theta[0]), coefficients=coefficients, selected=tuple(columns)
    )


def fit_weighted_least_squares(
    sample: NeighborhoodSample, ridge: float = 0.0
) -> LinearSurrogate:
    """Minimise ``Σ wᵢ(yᵢ − α₀ − α·zᵢ)² + ridge·‖α‖²`` over all features."""

    ridge = _check_ridge(ridge)
    columns = list(range(sample.dimension))
    theta, _ = _solve_columns(sample, columns, ridge)
    return _surrogate_from(theta, columns, sample.dimension)


def fit_k_sparse(
    sample: NeighborhoodSample, k: int, ridge: float = 0.0
) -> LinearSurrogate:
    """Greedy forward selection of ``k`` features, then a refit on them.

    Each round adds the feature whose inclusion most reduces the weighted RSS;
    ties go to the lowest feature index.
    """

    ridge = _check_ridge(ridge)
    d = sample.dimension
    if not isinstance(k, (int, np.integer)) or k < 1 or k > d:
        raise InvalidK(f"k must lie in [1, {d}], got {k}")

    _, null_rss = _solve_columns(sample, [], ridge)
    tie_slack = TIE_RELATIVE_TOL * null_rss

    selected: list[int] = []
    for _ in range(int(k)):
        best_feature = -1
        best_rss = np.inf
        for feature in range(d):
            if feature in selected:
                continue
            _, rss = _solve_columns(sample, selected + [feature], ridge)
            if rss < best_rss - tie_slack:
                best_feature, best_rss = feature, rss
        selected.append(best_feature)
        logger.debug(f"forward selection added feature {best_feature} (rss={best_rss:.6g})")

    columns = sorted(selected)
    theta, _ = _solve_columns(sample, columns, ridge)
    return _surrogate_from(theta, columns, d)


def predict(surrogate: LinearSurrogate, point: np.ndarray) -> float:
    """Evaluate the surrogate at a single surrogate-space point."""

    point = np.asarray(point, dtype=float)
    if point.shape != (surrogate.dimension,):
        raise DimensionMismatch(
            f"point of shape {point.shape} for a {surrogate.dimension}-d surrogate"
        )
    return float(surrogate.intercept + surrogate.coefficients @ point)


def predict_many(surrogate: LinearSurrogate, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != surrogate.dimension:
        raise DimensionMismatch(
            f"points of shape {points.shape} for a {surrogate.dimension}-d surrogate"
        )
    return surrogate.intercept + points @ surrogate.coefficients


def is_degenerate(
    surrogate: LinearSurrogate, tol: float = DEFAULT_DEGENERACY_TOL
) -> bool:
    """True when every coefficient is below ``tol`` in magnitude."""

    if surrogate.dimension == 0:
        return True
    return bool(np.max(np.abs(surrogate.coefficients)) < tol)


__all__ = [
    "DEFAULT_DEGENERACY_TOL",
    "LinearSurrogate",
    "NeighborhoodSample",
    "fit_k_sparse",
    "fit_weighted_least_squares",
    "is_degenerate",
    "predict",
    "predict_many",
]
