"""Explanation quality: adherence (weighted R²) and gold-standard agreement."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import AbstractSet, Any, Dict, Iterable, Optional, Tuple

import numpy as np

from slime.errors import DimensionMismatch, EmptyExplained, EmptyGold, ZeroVariance
from slime.surrogate_core import LinearSurrogate, NeighborhoodSample, predict_many

RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class FidelityReport:
    r2: Optional[float]
    recall: Optional[float] = None
    precision: Optional[float] = None
    coverage: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def r2_score(surrogate: LinearSurrogate, sample: NeighborhoodSample) -> float:
    """``1 − Σwᵢ(yᵢ − g(zᵢ))² / Σwᵢ(yᵢ − ȳ_w)²`` using the sample's own weights.

    Constant labels make the ratio undefined: a surrogate reproducing them
    exactly scores 1, anything else raises :class:`ZeroVariance`.
    """

    if sample.size < 2:
        raise DimensionMismatch(f"R² needs at least 2 points, got {sample.size}")
    # Rescale so the largest weight is 1; R² is scale-invariant in w.
    weights = sample.weights / sample.weights.max()
    labels = sample.labels
    residual = labels - predict_many(surrogate, sample.points)
    rss = float(np.sum(weights * residual**2))

    active = weights > 0.0
    if np.all(labels[active] == labels[active][0]):
        if np.all(np.abs(residual[active]) <= RESIDUAL_TOL):
            return 1.0
        raise ZeroVariance("labels are constant but the surrogate does not reproduce them")

    mean = float(np.sum(weights * labels) / np.sum(weights))
    tss = float(np.sum(weights * (labels - mean) ** 2))
    if tss <= 0.0:
        if rss <= 0.0:
            return 1.0
        raise ZeroVariance("weighted label variance underflows to zero")
    return 1.0 - rss / tss


def recall_precision(
    gold: AbstractSet[int], explained: AbstractSet[int]
) -> Tuple[float, float]:
    """``(|F_f ∩ F_g| / |F_f|, |F_f ∩ F_g| / |F_g|)``."""

    gold, explained = frozenset(gold), frozenset(explained)
    if not gold:
        raise EmptyGold("gold-standard feature set is empty")
    if not explained:
        raise EmptyExplained("explanation reports no feature")
    hits = len(gold & explained)
    return hits / len(gold), hits / len(explained)


def coverage(gold_segments: AbstractSet[int], explained_segments: AbstractSet[int]) -> float:
    """Share of gold segments that the explanation reports."""

    gold_segments = frozenset(gold_segments)
    if not gold_segments:
        raise EmptyGold("gold-standard segment set is empty")
    return len(gold_segments & frozenset(explained_segments)) / len(gold_segments)


def gold_segments(gold: Iterable[int], segmentation: np.ndarray) -> frozenset[int]:
    """Segments containing at least one gold-standard original feature."""

    segmentation = np.asarray(segmentation)
    return frozenset(int(segmentation[i]) for i in gold)


__all__ = [
    "FidelityReport",
    "coverage",
    "gold_segments",
    "r2_score",
    "recall_precision",
]
