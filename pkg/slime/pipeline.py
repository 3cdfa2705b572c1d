"""End-to-end explainers: kernel-weighted LIME and sampling-based s-LIME.

Both methods share one recipe: draw surrogate-space points, convert them to
the original space, label them with the black box and fit a k-sparse linear
surrogate. They differ in where locality comes from. LIME samples binary
neighbors and weighs them with the kernel; s-LIME samples from a distribution
whose width is the bandwidth and keeps every weight at 1.
"""

from __future__ import annotations

import dataclasses
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from slime.blackbox import BlackBox, predict_batch
from slime.errors import (
    AllRowsFailed,
    ConfigError,
    DegenerateWarning,
    DimensionMismatch,
    ExplainerError,
    InvalidK,
    SingularSystem,
    ZeroVariance,
)
from slime.metrics import FidelityReport, coverage, gold_segments, r2_score, recall_precision
from slime.neighborhoods import (
    ConversionKind,
    ConversionSpec,
    KernelSpec,
    SamplerKind,
    SamplerSpec,
    convert_batch,
    effective_sample_size,
    kernel_weights,
    sample_neighborhood,
)
from slime.seeding import derive_seed
from slime.surrogate_core import (
    DEFAULT_DEGENERACY_TOL,
    LinearSurrogate,
    NeighborhoodSample,
    fit_k_sparse,
    is_degenerate,
)

logger = logging.getLogger(__name__)

DEFAULT_K = 6
DEFAULT_LIME_SIGMA = 0.75
DEFAULT_N = 5000
DEGENERATE_ESS = 1.5
FALLBACK_RIDGE = 1e-8
HISTOGRAM_BINS = 20

SWEEP_COLUMNS = ("sigma", "r2", "degenerate", "ess", "recall", "precision", "coverage", "error")


class Method(str, Enum):
    LIME = "lime"
    SLIME = "slime"


@dataclass(frozen=True, eq=False)
class ExplainConfig:
    """Everything an explainer run depends on besides the model.

    ``kernel`` and ``sampler`` are derived: LIME always uses the binary toggle
    sampler with an exponential kernel; s-LIME uses Gaussian offsets on tabular
    data and the uniform cube on segmented data.
    """

    method: Method
    sigma: float
    n: int
    k: int
    conversion: ConversionSpec
    seed: int = 0
    ridge: float = 0.0
    tol: float = DEFAULT_DEGENERACY_TOL
    kernel: Optional[KernelSpec] = field(init=False, default=None)
    sampler: SamplerSpec = field(init=False)

    def __post_init__(self) -> None:
        method = Method(self.method)
        object.__setattr__(self, "method", method)
        conversion = self.conversion
        d_hat = conversion.surrogate_dimension
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)):
            raise InvalidK(f"k must be an integer, got {self.k!r}")
        if not 1 <= self.k <= d_hat:
            raise InvalidK(f"k must lie in [1, {d_hat}], got {self.k}")
        if self.ridge < 0.0 or self.tol <= 0.0:
            raise ConfigError(f"ridge must be >= 0 and tol > 0, got {self.ridge} and {self.tol}")

        if method is Method.LIME:
            if conversion.kind is not ConversionKind.SEGMENTED:
                raise ConfigError(
                    "LIME samples binary presence vectors and needs a segmented conversion; "
                    "use ConversionSpec.segmented (identity segmentation for tabular data)"
                )
            kind = SamplerKind.BINARY_TOGGLE
            object.__setattr__(self, "kernel", KernelSpec(self.sigma))
        elif conversion.kind is ConversionKind.TABULAR:
            kind = SamplerKind.GAUSSIAN_OFFSET
        else:
            kind = SamplerKind.UNIFORM_CUBE
        sampler = SamplerSpec(kind=kind, sigma=self.sigma, n=self.n, seed=self.seed)
        object.__setattr__(self, "sigma", sampler.sigma)
        object.__setattr__(self, "n", sampler.n)
        object.__setattr__(self, "seed", sampler.seed)
        object.__setattr__(self, "sampler", sampler)

    def replace(self, **changes: Any) -> "ExplainConfig":
        return dataclasses.replace(self, **changes)

    def at(self, target: np.ndarray) -> "ExplainConfig":
        """Same configuration, conversion re-anchored on another target."""

        target = np.asarray(target, dtype=float)
        if target.shape != self.conversion.target.shape:
            raise DimensionMismatch(
                f"target of shape {target.shape}, expected {self.conversion.target.shape}"
            )
        return self.replace(conversion=dataclasses.replace(self.conversion, target=target))


@dataclass(frozen=True, eq=False)
class Explanation:
    method: Method
    sigma: float
    n: int
    k: int
    seed: int
    surrogate: LinearSurrogate
    report: FidelityReport
    degenerate: bool
    ess: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "sigma": self.sigma,
            "n": self.n,
            "k": self.k,
            "seed": self.seed,
            **self.surrogate.to_dict(),
            **self.report.to_dict(),
            "degenerate": self.degenerate,
            "ess": self.ess,
        }


def build_neighborhood(model: BlackBox, config: ExplainConfig) -> NeighborhoodSample:
    """Sample, convert, label and weigh the neighborhood of ``config``'s target."""

    conversion = config.conversion
    if conversion.original_dimension != model.dimension:
        raise DimensionMismatch(
            f"target has {conversion.original_dimension} features, model expects {model.dimension}"
        )
    points = sample_neighborhood(conversion.surrogate_dimension, config.sampler)
    labels = predict_batch(model, convert_batch(conversion, points))
    if config.method is Method.LIME:
        weights = kernel_weights(conversion.surrogate_target, points, config.kernel)
    else:
        weights = np.ones(points.shape[0])
    return NeighborhoodSample(points=points, weights=weights, labels=labels)


def _fit_surrogate(sample: NeighborhoodSample, config: ExplainConfig) -> LinearSurrogate:
    try:
        return fit_k_sparse(sample, config.k, ridge=config.ridge)
    except SingularSystem as exc:
        logger.debug(f"σ={config.sigma:g}: {exc}; retrying with ridge={FALLBACK_RIDGE:g}")
    try:
        return fit_k_sparse(sample, config.k, ridge=max(config.ridge, FALLBACK_RIDGE))
    except SingularSystem:
        mean = float(np.sum(sample.weights * sample.labels) / np.sum(sample.weights))
        logger.debug(f"σ={config.sigma:g}: ridge retry failed, returning constant surrogate")
        return LinearSurrogate.constant(mean, sample.dimension)


def _score(
    model: BlackBox,
    config: ExplainConfig,
    surrogate: LinearSurrogate,
    sample: NeighborhoodSample,
    degenerate: bool,
) -> FidelityReport:
    try:
        r2: Optional[float] = r2_score(surrogate, sample)
    except (ZeroVariance, DimensionMismatch) as exc:
        logger.debug(f"R² not reported: {exc}")
        r2 = None

    gold = model.gold_features
    explained = surrogate.explained_features
    if not gold or degenerate or not explained:
        return FidelityReport(r2=r2)
    conversion = config.conversion
    if conversion.is_feature_aligned:
        recall, precision = recall_precision(gold, explained)
        return FidelityReport(r2=r2, recall=recall, precision=precision)
    return FidelityReport(
        r2=r2, coverage=coverage(gold_segments(gold, conversion.segmentation), explained)
    )


def _explain(
    model: BlackBox,
    config: ExplainConfig,
    sample: Optional[NeighborhoodSample] = None,
    warn: bool = True,
) -> Explanation:
    if sample is None:
        sample = build_neighborhood(model, config)
    ess = effective_sample_size(sample.weights)
    if warn and config.method is Method.LIME and ess < DEGENERATE_ESS:
        warnings.warn(
            f"kernel weights collapsed onto the target at σ={config.sigma:g} (ess={ess:.4g})",
            DegenerateWarning,
            stacklevel=3,
        )
    surrogate = _fit_surrogate(sample, config)
    degenerate = is_degenerate(surrogate, config.tol)
    return Explanation(
        method=config.method,
        sigma=config.sigma,
        n=config.n,
        k=config.k,
        seed=config.seed,
        surrogate=surrogate,
        report=_score(model, config, surrogate, sample, degenerate),
        degenerate=degenerate,
        ess=ess,
    )


def _anchored(config: ExplainConfig, target: Optional[np.ndarray]) -> ExplainConfig:
    if target is None:
        return config
    target = np.asarray(target, dtype=float)
    if np.array_equal(target, config.conversion.target):
        return config
    return config.at(target)


def explain_lime(
    model: BlackBox, target: Optional[np.ndarray], config: ExplainConfig
) -> Explanation:
    """Kernel-weighted binary neighborhood around ``target``, k-sparse weighted fit."""

    if config.method is not Method.LIME:
        raise ConfigError(f"explain_lime called with method={config.method.value}")
    return _explain(model, _anchored(config, target))


def explain_slime(
    model: BlackBox, target: Optional[np.ndarray], config: ExplainConfig
) -> Explanation:
    """Equally weighted samples from the bandwidth-wide distribution, k-sparse fit.

    On tabular data the surrogate is fitted on the offsets themselves, so its
    coefficients estimate the gradient of the model at ``target``.
    """

    if config.method is not Method.SLIME:
        raise ConfigError(f"explain_slime called with method={config.method.value}")
    return _explain(model, _anchored(config, target))


def explain(model: BlackBox, target: Optional[np.ndarray], config: ExplainConfig) -> Explanation:
    if config.method is Method.LIME:
        return explain_lime(model, target, config)
    return explain_slime(model, target, config)


# ---------- σ sweeps ----------


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    explanation: Optional[Explanation] = None
    error: Optional[str] = None

    @property
    def r2(self) -> Optional[float]:
        return None if self.explanation is None else self.explanation.report.r2

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {column: None for column in SWEEP_COLUMNS}
        record["sigma"] = self.sigma
        record["error"] = self.error
        if self.explanation is not None:
            report = self.explanation.report
            record.update(
                r2=report.r2,
                degenerate=self.explanation.degenerate,
                ess=self.explanation.ess,
                recall=report.recall,
                precision=report.precision,
                coverage=report.coverage,
            )
        return record


def _check_grid(sigmas: Sequence[float]) -> List[float]:
    grid = [float(s) for s in sigmas]
    if not grid:
        raise ConfigError("σ grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"σ grid must be strictly ascending, got {grid}")
    return grid


def _sweep_row(model: BlackBox, base: ExplainConfig, sigma: float, index: int) -> SweepRow:
    try:
        config = base.replace(sigma=sigma, seed=derive_seed(base.seed, index))
        explanation = _explain(model, config, warn=False)
    except ExplainerError as exc:
        logger.info(f"σ={sigma:g}: row failed with {type(exc).__name__}: {exc}")
        return SweepRow(sigma=sigma, error=f"{type(exc).__name__}: {exc}")
    return SweepRow(sigma=sigma, explanation=explanation)


def sweep_sigma(
    model: BlackBox,
    target: Optional[np.ndarray],
    base: ExplainConfig,
    sigmas: Sequence[float],
    workers: int = 1,
    show_progress: bool = False,
) -> List[SweepRow]:
    """One explanation per σ; row ``i`` uses ``derive_seed(base.seed, i)``.

    Failing rows carry the error text instead of an explanation and never stop
    the sweep. Row order follows the grid whatever the worker count.
    """

    grid = _check_grid(sigmas)
    base = _anchored(base, target)
    rows: List[Optional[SweepRow]] = [None] * len(grid)
    with tqdm(total=len(grid), desc="σ sweep", leave=False, disable=not show_progress) as pbar:
        if workers <= 1:
            for index, sigma in enumerate(grid):
                rows[index] = _sweep_row(model, base, sigma, index)
                pbar.update(1)
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                future_to_index = {
                    executor.submit(_sweep_row, model, base, sigma, index): index
                    for index, sigma in enumerate(grid)
                }
                for future in as_completed(future_to_index):
                    rows[future_to_index[future]] = future.result()
                    pbar.update(1)
    return [row for row in rows if row is not None]


def sweep_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([row.to_record() for row in rows], columns=list(SWEEP_COLUMNS))


def select_best_sigma(
    rows: Sequence[SweepRow], include_degenerate: bool = False
) -> Tuple[float, Explanation]:
    """Row with the highest R²; ties go to the smaller σ.

    Failed rows never qualify. Degenerate rows are skipped unless
    ``include_degenerate``: a collapsed LIME fit interpolates the target alone
    and scores R² = 1 with all-zero coefficients.
    """

    best: Optional[SweepRow] = None
    for row in sorted(rows, key=lambda r: r.sigma):
        if row.explanation is None or row.r2 is None:
            continue
        if row.explanation.degenerate and not include_degenerate:
            continue
        if best is None or row.r2 > best.r2:
            best = row
    if best is None:
        raise AllRowsFailed("no sweep row produced a scored, non-degenerate explanation")
    return best.sigma, best.explanation


def aggregate_sweeps(
    model: BlackBox,
    targets: np.ndarray,
    base: ExplainConfig,
    sigmas: Sequence[float],
    workers: int = 1,
    show_progress: bool = False,
) -> pd.DataFrame:
    """Per-σ averages of the sweep metrics across several targets.

    Target ``t`` sweeps with base seed ``derive_seed(base.seed, t)``. R² of a
    degenerate explanation is left out of ``r2_mean`` and ``r2_std``; how often
    that happened shows in ``degenerate_rate``.
    """

    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    grid = _check_grid(sigmas)
    numeric = ("r2", "degenerate", "ess", "recall", "precision", "coverage")
    records: List[Dict[str, Any]] = []
    for t in tqdm(range(targets.shape[0]), desc="targets", leave=False, disable=not show_progress):
        config = base.at(targets[t]).replace(seed=derive_seed(base.seed, t))
        for row in sweep_sigma(model, None, config, grid, workers=workers):
            record = row.to_record()
            values = {
                key: np.nan if record[key] is None else float(record[key]) for key in numeric
            }
            if record["degenerate"]:
                values["r2"] = np.nan
            records.append({"sigma": row.sigma, "failed": row.error is not None, **values})

    frame = pd.DataFrame(records)
    grouped = frame.groupby("sigma", sort=True)
    table = pd.DataFrame(
        {
            "r2_mean": grouped["r2"].mean(),
            "r2_std": grouped["r2"].std(ddof=0),
            "degenerate_rate": grouped["degenerate"].mean(),
            "ess_mean": grouped["ess"].mean(),
            "recall_mean": grouped["recall"].mean(),
            "precision_mean": grouped["precision"].mean(),
            "coverage_mean": grouped["coverage"].mean(),
            "failures": grouped["failed"].sum().astype(int),
            "targets": grouped["failed"].size().astype(int),
        }
    ).reset_index()
    return table


def select_best_sigma_aggregated(table: pd.DataFrame, include_degenerate: bool = False) -> float:
    """σ with the highest mean R² across targets; ties go to the smaller σ.

    Only σ values where every target produced a non-degenerate explanation
    qualify, unless ``include_degenerate``.
    """

    scored = table.dropna(subset=["r2_mean"])
    if not include_degenerate:
        scored = scored[(scored["degenerate_rate"] == 0.0) & (scored["failures"] == 0)]
    scored = scored.sort_values("sigma", kind="stable")
    if scored.empty:
        raise AllRowsFailed("no σ has a scored, non-degenerate explanation on every target")
    best = scored.loc[scored["r2_mean"].idxmax()]
    return float(best["sigma"])


# ---------- weight concentration ----------


def weight_histogram(weights: np.ndarray, bins: int = HISTOGRAM_BINS) -> Dict[str, Any]:
    """Log-spaced histogram of the positive weights; underflowed zeros counted apart."""

    weights = np.asarray(weights, dtype=float)
    positive = weights[weights > 0.0]
    low = min(float(np.floor(np.log10(positive.min()))), -1.0) if positive.size else -1.0
    edges = np.logspace(low, 0.0, bins + 1)
    counts, _ = np.histogram(np.clip(positive, edges[0], edges[-1]), bins=edges)
    return {
        "edges": edges.tolist(),
        "counts": counts.astype(int).tolist(),
        "zeros": int(weights.size - positive.size),
    }


def weight_concentration(
    model: BlackBox, target: Optional[np.ndarray], config: ExplainConfig
) -> Dict[str, Any]:
    """Weight histogram, effective sample size and explanation at one σ."""

    config = _anchored(config, target)
    sample = build_neighborhood(model, config)
    explanation = _explain(model, config, sample=sample, warn=False)
    return {
        "sigma": config.sigma,
        "ess": effective_sample_size(sample.weights),
        "histogram": weight_histogram(sample.weights),
        "explanation": explanation.to_dict(),
    }


__all__ = [
    "DEFAULT_K",
    "DEFAULT_LIME_SIGMA",
    "DEFAULT_N",
    "SWEEP_COLUMNS",
    "ExplainConfig",
    "Explanation",
    "Method",
    "SweepRow",
    "aggregate_sweeps",
    "build_neighborhood",
    "explain",
    "explain_lime",
    "explain_slime",
    "select_best_sigma",
    "select_best_sigma_aggregated",
    "sweep_frame",
    "sweep_sigma",
    "weight_concentration",
    "weight_histogram",
]
