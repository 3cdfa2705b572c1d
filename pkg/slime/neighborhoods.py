"""Neighborhood generation, kernel weighting and surrogate-to-original conversion.

LIME draws binary neighbors by toggling bits off the target's all-ones
representation and weighs them with an exponential kernel. s-LIME draws
equally-weighted continuous neighbors whose spread is the bandwidth itself:
uniform on ``[1 − σ, 1]^d̂`` for segmented data, centred Gaussian offsets with
covariance ``σ²I`` for tabular data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from slime.errors import (
    ConfigError,
    DatasetError,
    DimensionMismatch,
    EmptyWeights,
    InvalidSigma,
    MissingSegmentation,
)
from slime.persistence import write_csv
from slime.seeding import make_rng

logger = logging.getLogger(__name__)

SEGMENTATION_COLUMNS = ("original_index", "segment_index")


class DistanceKind(str, Enum):
    EUCLIDEAN = "euclidean"


class SamplerKind(str, Enum):
    BINARY_TOGGLE = "binary_toggle"
    UNIFORM_CUBE = "uniform_cube"
    GAUSSIAN_OFFSET = "gaussian_offset"


class ConversionKind(str, Enum):
    TABULAR = "tabular"
    SEGMENTED = "segmented"


def _check_bandwidth(sigma: float) -> float:
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma <= 0.0:
        raise InvalidSigma(f"sigma must be a positive real, got {sigma}")
    return sigma


@dataclass(frozen=True)
class KernelSpec:
    """Exponential kernel ``exp(−D²/σ²)`` on surrogate vectors."""

    sigma: float
    distance: DistanceKind = DistanceKind.EUCLIDEAN

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", _check_bandwidth(self.sigma))
        object.__setattr__(self, "distance", DistanceKind(self.distance))


@dataclass(frozen=True)
class SamplerSpec:
    kind: SamplerKind
    sigma: float
    n: int
    seed: int

    def __post_init__(self) -> None:
        kind = SamplerKind(self.kind)
        sigma = _check_bandwidth(self.sigma)
        if kind is SamplerKind.UNIFORM_CUBE and sigma > 1.0:
            raise InvalidSigma(f"uniform cube sampler needs sigma in (0, 1], got {sigma}")
        if int(self.n) < 1:
            raise ConfigError(f"sample size n must be >= 1, got {self.n}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True, eq=False)
class ConversionSpec:
    """Conversion ``η_x`` from surrogate points back to the original space.

    Tabular: ``η_x(z) = x + z``, one surrogate feature per original feature.
    Segmented: every original feature ``i`` in segment ``j`` becomes
    ``(1 − z[j])·x₀[i] + z[j]·x[i]``.
    """

    kind: ConversionKind
    target: np.ndarray
    baseline: Optional[np.ndarray] = None
    segmentation: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        kind = ConversionKind(self.kind)
        target = np.array(self.target, dtype=float)
        if target.ndim != 1 or target.size == 0:
            raise DimensionMismatch(f"target must be a non-empty vector, got {target.shape}")
        target.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "target", target)

        if kind is ConversionKind.TABULAR:
            object.__setattr__(self, "baseline", None)
            object.__setattr__(self, "segmentation", None)
            return

        if self.segmentation is None:
            raise MissingSegmentation("segmented conversion requires a segmentation map")
        segmentation = np.array(self.segmentation)
        if segmentation.shape != target.shape:
            raise DimensionMismatch(
                f"segmentation of shape {segmentation.shape} for a {target.size}-d target"
            )
        if not np.issubdtype(segmentation.dtype, np.integer):
            if not np.all(np.mod(segmentation, 1) == 0):
                raise MissingSegmentation("segment indices must be integers")
            segmentation = segmentation.astype(np.int64)
        segments = np.unique(segmentation)
        if segments[0] != 0 or not np.array_equal(segments, np.arange(segments.size)):
            raise MissingSegmentation(
                "segment indices must cover 0..d̂-1 with no empty segment"
            )
        segmentation.setflags(write=False)

        baseline = (
            np.zeros_like(target)
            if self.baseline is None
            else np.array(self.baseline, dtype=float)
        )
        if baseline.shape != target.shape:
            raise DimensionMismatch(
                f"baseline of shape {baseline.shape} for a {target.size}-d target"
            )
        baseline.setflags(write=False)
        object.__setattr__(self, "segmentation", segmentation)
        object.__setattr__(self, "baseline", baseline)

    @classmethod
    def tabular(cls, target: np.ndarray) -> "ConversionSpec":
        return cls(kind=ConversionKind.TABULAR, target=target)

    @classmethod
    def segmented(
        cls,
        target: np.ndarray,
        segmentation: Optional[np.ndarray] = None,
        baseline: Optional[np.ndarray] = None,
    ) -> "ConversionSpec":
        """Segmented conversion; defaults to one segment per feature and ``x₀ = 0``."""

        target = np.asarray(target, dtype=float)
        if segmentation is None:
            segmentation = identity_segmentation(target.size)
        return cls(
            kind=ConversionKind.SEGMENTED,
            target=target,
            baseline=baseline,
            segmentation=segmentation,
        )

    @property
    def original_dimension(self) -> int:
        return int(self.target.size)

    @property
    def surrogate_dimension(self) -> int:
        if self.kind is ConversionKind.TABULAR:
            return self.original_dimension
        return int(self.segmentation.max()) + 1

    @property
    def surrogate_target(self) -> np.ndarray:
        """The target's own surrogate representation ``x̂``."""

        if self.kind is ConversionKind.TABULAR:
            return np.zeros(self.surrogate_dimension)
        return np.ones(self.surrogate_dimension)

    @property
    def is_feature_aligned(self) -> bool:
        """True when surrogate features are exactly the original features."""

        if self.kind is ConversionKind.TABULAR:
            return True
        return bool(np.array_equal(self.segmentation, np.arange(self.target.size)))


def identity_segmentation(d: int) -> np.ndarray:
    return np.arange(int(d), dtype=np.int64)


def fixed_length_segmentation(d: int, length: int) -> np.ndarray:
    """Contiguous fragments of ``length`` features; the last one may be shorter."""

    if int(length) < 1:
        raise ConfigError(f"segment length must be >= 1, got {length}")
    return np.arange(int(d), dtype=np.int64) // int(length)


def load_segmentation_csv(path: Path) -> np.ndarray:
    """Read an ``(original_index, segment_index)`` CSV into a segmentation array."""

    try:
        frame = pd.read_csv(path, comment="#")
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot read segmentation {path}: {exc}") from exc
    if tuple(frame.columns) != SEGMENTATION_COLUMNS:
        raise DatasetError(
            f"segmentation header must be {','.join(SEGMENTATION_COLUMNS)}, "
            f"got {','.join(map(str, frame.columns))}"
        )
    try:
        original = frame["original_index"].to_numpy(dtype=np.int64)
        segment = frame["segment_index"].to_numpy(dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"segmentation indices must be integers: {exc}") from exc
    if not np.array_equal(np.sort(original), np.arange(original.size)):
        raise DatasetError("segmentation must list every original index exactly once")
    segmentation = np.empty(original.size, dtype=np.int64)
    segmentation[original] = segment
    return segmentation


def save_segmentation_csv(segmentation: np.ndarray, path: Path) -> None:
    segmentation = np.asarray(segmentation, dtype=np.int64)
    frame = pd.DataFrame(
        {
            "original_index": np.arange(segmentation.size),
            "segment_index": segmentation,
        }
    )
    write_csv(path, frame)


def _require_kind(spec: SamplerSpec, kind: SamplerKind) -> None:
    if spec.kind is not kind:
        raise ConfigError(f"sampler spec of kind {spec.kind.value}, expected {kind.value}")


def sample_binary_neighborhood(d: int, spec: SamplerSpec) -> np.ndarray:
    """LIME neighborhood: the all-ones target row, then rows with bits toggled off.

    Each non-target row toggles off ``m`` distinct bits, with ``m`` uniform in
    ``{1..d̂}`` and the bits uniform among all subsets of that size.
    """

    _require_kind(spec, SamplerKind.BINARY_TOGGLE)
    d = int(d)
    points = np.ones((spec.n, d))
    if spec.n == 1:
        return points

    rng = make_rng(spec.seed)
    rows = spec.n - 1
    counts = rng.integers(1, d + 1, size=rows)
    # argsort of a uniform key matrix is a uniform random permutation per row;
    # argsorting again yields each bit's rank in that permutation.
    ranks = np.argsort(
        np.argsort(rng.random((rows, d)), axis=1, kind="stable"), axis=1, kind="stable"
    )
    points[1:][ranks < counts[:, None]] = 0.0
    return points


def sample_uniform_cube(d: int, spec: SamplerSpec) -> np.ndarray:
    """s-LIME segmented neighborhood: i.i.d. rows uniform on ``[1 − σ, 1]^d̂``."""

    _require_kind(spec, SamplerKind.UNIFORM_CUBE)
    rng = make_rng(spec.seed)
    return rng.uniform(1.0 - spec.sigma, 1.0, size=(spec.n, int(d)))


def sample_gaussian_offsets(d: int, spec: SamplerSpec) -> np.ndarray:
    """s-LIME tabular neighborhood: i.i.d. rows from ``N(0, σ²I)``."""

    _require_kind(spec, SamplerKind.GAUSSIAN_OFFSET)
    rng = make_rng(spec.seed)
    return spec.sigma * rng.standard_normal((spec.n, int(d)))


_SAMPLERS = {
    SamplerKind.BINARY_TOGGLE: sample_binary_neighborhood,
    SamplerKind.UNIFORM_CUBE: sample_uniform_cube,
    SamplerKind.GAUSSIAN_OFFSET: sample_gaussian_offsets,
}


def sample_neighborhood(d: int, spec: SamplerSpec) -> np.ndarray:
    return _SAMPLERS[spec.kind](d, spec)


def kernel_weight(target: np.ndarray, point: np.ndarray, kernel: KernelSpec) -> float:
    """``exp(−‖target − point‖² / σ²)``."""

    target = np.asarray(target, dtype=float)
    point = np.asarray(point, dtype=float)
    if target.shape != point.shape or target.ndim != 1:
        raise DimensionMismatch(f"shapes {target.shape} and {point.shape} differ")
    squared = float(np.sum((target - point) ** 2))
    return float(np.exp(-squared / kernel.sigma**2))


def kernel_weights(target: np.ndarray, points: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    target = np.asarray(target, dtype=float)
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or target.ndim != 1 or points.shape[1] != target.size:
        raise DimensionMismatch(
            f"points of shape {points.shape} against a target of shape {target.shape}"
        )
    squared = np.sum((points - target) ** 2, axis=1)
    return np.exp(-squared / kernel.sigma**2)


def convert_batch(conversion: ConversionSpec, points: np.ndarray) -> np.ndarray:
    """Map surrogate rows to original-space instances."""

    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != conversion.surrogate_dimension:
        raise DimensionMismatch(
            f"surrogate points of shape {points.shape}, "
            f"expected (*, {conversion.surrogate_dimension})"
        )
    if conversion.kind is ConversionKind.TABULAR:
        return conversion.target + points
    expanded = points[:, conversion.segmentation]
    return (1.0 - expanded) * conversion.baseline + expanded * conversion.target


def convert(conversion: ConversionSpec, point: np.ndarray) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    if point.ndim != 1:
        raise DimensionMismatch(f"expected a surrogate vector, got shape {point.shape}")
    return convert_batch(conversion, point[None, :])[0]


def effective_sample_size(weights: np.ndarray) -> float:
    """``(Σw)² / Σw²``: how many equally-weighted points the weights are worth."""

    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise EmptyWeights("effective sample size of an empty weight vector")
    if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and non-negative")
    peak = weights.max()
    if peak <= 0.0:
        raise EmptyWeights("all weights are zero")
    scaled = weights / peak
    return float(scaled.sum() ** 2 / np.sum(scaled**2))


__all__ = [
    "ConversionKind",
    "ConversionSpec",
    "DistanceKind",
    "KernelSpec",
    "SamplerKind",
    "SamplerSpec",
    "convert",
    "convert_batch",
    "effective_sample_size",
    "fixed_length_segmentation",
    "identity_segmentation",
    "kernel_weight",
    "kernel_weights",
    "load_segmentation_csv",
    "sample_binary_neighborhood",
    "sample_gaussian_offsets",
    "sample_neighborhood",
    "sample_uniform_cube",
    "save_segmentation_csv",
]
