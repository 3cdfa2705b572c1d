"""CSV ingestion and small synthetic datasets used as desk-scale fixtures.

Dataset CSV layout: a header row of feature names followed by a final
``label`` column holding 0/1 values; every other cell must be numeric. Leading
``# key=value`` lines (the echoed run configuration) are skipped.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from slime.blackbox import Dataset
from slime.errors import DatasetError
from slime.persistence import write_csv
from slime.seeding import make_rng

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label"

# Column names and (mean, std) of the 13 chemical measurements in the classic
# wine recognition data; the synthetic version only mimics their scale.
WINE_FEATURES: Tuple[Tuple[str, float, float], ...] = (
    ("alcohol", 13.0, 0.81),
    ("malic_acid", 2.34, 1.12),
    ("ash", 2.37, 0.27),
    ("alcalinity_of_ash", 19.5, 3.3),
    ("magnesium", 99.7, 14.3),
    ("total_phenols", 2.29, 0.63),
    ("flavanoids", 2.03, 1.0),
    ("nonflavanoid_phenols", 0.36, 0.12),
    ("proanthocyanins", 1.59, 0.57),
    ("color_intensity", 5.06, 2.32),
    ("hue", 0.96, 0.23),
    ("od280_od315", 2.61, 0.71),
    ("proline", 747.0, 315.0),
)


def load_dataset_csv(path: Path) -> Dataset:
    """Read a dataset CSV; malformed content raises :class:`DatasetError`."""

    path = Path(path)
    try:
        frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise DatasetError(f"cannot parse {path}: {exc}") from exc

    if frame.shape[1] < 2:
        raise DatasetError(f"{path} needs at least one feature column plus a label column")
    try:
        numeric = frame.apply(pd.to_numeric, errors="raise")
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{path} contains a non-numeric cell: {exc}") from exc
    if numeric.isna().to_numpy().any():
        raise DatasetError(f"{path} contains missing values")

    values = numeric.to_numpy(dtype=float)
    labels = values[:, -1]
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise DatasetError(f"{path}: labels in the last column must be 0 or 1")

    dataset = Dataset(
        features=values[:, :-1],
        labels=labels.astype(np.int64),
        feature_names=tuple(str(c) for c in frame.columns[:-1]),
    )
    logger.debug(f"loaded {dataset.size} rows × {dataset.dimension} features from {path}")
    return dataset


def save_dataset_csv(
    dataset: Dataset, path: Path, header_comments: Optional[Mapping[str, Any]] = None
) -> None:
    frame = pd.DataFrame(dataset.features, columns=list(dataset.feature_names))
    frame[LABEL_COLUMN] = dataset.labels
    write_csv(path, frame, header_comments=header_comments)


def make_sparse_logistic_dataset(
    m: int = 1000, d: int = 10, support: int = 4, seed: int = 0
) -> Tuple[Dataset, np.ndarray]:
    """Standard-normal features labelled by a known sparse logistic model.

    Returns the dataset and the true weight vector (zero outside a random
    support of the given size, magnitudes in ``[1, 2]`` with random signs;
    the true intercept is zero).
    """

    if not 1 <= support <= d:
        raise ValueError(f"support must lie in [1, {d}], got {support}")
    rng = make_rng(seed)
    weights = np.zeros(d)
    chosen = np.sort(rng.choice(d, size=support, replace=False))
    weights[chosen] = rng.uniform(1.0, 2.0, size=support) * rng.choice((-1.0, 1.0), size=support)
    features = rng.standard_normal((m, d))
    probabilities = expit(features @ weights)
    labels = (rng.random(m) < probabilities).astype(np.int64)
    names = tuple(f"x{i}" for i in range(d))
    return Dataset(features=features, labels=labels, feature_names=names), weights


def make_wine_like_dataset(m: int = 500, seed: int = 0) -> Dataset:
    """Thirteen positive, wine-scaled measurements with a rule-based label."""

    rng = make_rng(seed)
    names = tuple(name for name, _, _ in WINE_FEATURES)
    means = np.array([mean for _, mean, _ in WINE_FEATURES])
    stds = np.array([std for _, _, std in WINE_FEATURES])
    features = np.abs(means + stds * rng.standard_normal((m, len(names))))

    column = {name: features[:, i] for i, name in enumerate(names)}
    labels = (
        ((column["flavanoids"] > 2.0) & (column["proline"] > 700.0))
        | ((column["alcohol"] > 13.5) & (column["color_intensity"] > 5.0))
    ).astype(np.int64)
    return Dataset(features=features, labels=labels, feature_names=names)


def make_xor_dataset(m: int = 400, noise: float = 0.2, seed: int = 0) -> Dataset:
    """Four Gaussian blobs at ``(±1, ±1)``; class 1 where the signs differ."""

    rng = make_rng(seed)
    corners = rng.choice((-1.0, 1.0), size=(m, 2))
    features = corners + noise * rng.standard_normal((m, 2))
    labels = (corners[:, 0] != corners[:, 1]).astype(np.int64)
    return Dataset(features=features, labels=labels, feature_names=("x0", "x1"))


SYNTHETIC_KINDS = ("sparse-logistic", "wine-like", "xor")


def make_synthetic_dataset(kind: str, m: int, d: int = 10, seed: int = 0) -> Dataset:
    if kind == "sparse-logistic":
        dataset, _ = make_sparse_logistic_dataset(m=m, d=d, support=min(4, d), seed=seed)
        return dataset
    if kind == "wine-like":
        return make_wine_like_dataset(m=m, seed=seed)
    if kind == "xor":
        return make_xor_dataset(m=m, seed=seed)
    raise ValueError(f"unknown synthetic dataset kind {kind!r}; choose from {SYNTHETIC_KINDS}")


__all__ = [
    "LABEL_COLUMN",
    "SYNTHETIC_KINDS",
    "load_dataset_csv",
    "make_sparse_logistic_dataset",
    "make_synthetic_dataset",
    "make_wine_like_dataset",
    "make_xor_dataset",
    "save_dataset_csv",
]
