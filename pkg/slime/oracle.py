"""Exact expected-loss minimisers over small binary surrogate spaces.

With ``d̂ ≤ 14`` every point of ``{0, 1}^d̂`` can be enumerated, so the
population least-squares problem can be solved exactly, with no sampling. That
gives an independent check that kernel-weighting a distribution and sampling
from the kernel-reweighted distribution minimise the same loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import comb

from slime.blackbox import BlackBox, predict_batch
from slime.errors import DimensionMismatch, EnumerationTooLarge, SingularSystem, ZeroMass
from slime.neighborhoods import ConversionSpec, KernelSpec, convert_batch, kernel_weights
from slime.surrogate_core import LinearSurrogate

logger = logging.getLogger(__name__)

MAX_ENUMERATION_DIM = 14
MASS_TOL = 1e-12
# Singular values below this fraction of the largest count as zero.
RANK_RCOND = 1e-6

WeightsFn = Callable[[np.ndarray], np.ndarray]


def _check_dimension(d: int) -> int:
    d = int(d)
    if d < 1:
        raise DimensionMismatch(f"dimension must be >= 1, got {d}")
    if d > MAX_ENUMERATION_DIM:
        raise EnumerationTooLarge(
            f"d̂={d} would enumerate 2^{d} points; the cap is d̂ <= {MAX_ENUMERATION_DIM}"
        )
    return d


def binary_support(d: int) -> np.ndarray:
    """All ``2^d`` binary vectors, row ``r`` being ``r`` written in binary (MSB first)."""

    d = _check_dimension(d)
    codes = np.arange(2**d)[:, None]
    shifts = np.arange(d - 1, -1, -1)[None, :]
    return ((codes >> shifts) & 1).astype(float)


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability masses over ``binary_support(dimension)``."""

    dimension: int
    mass: np.ndarray

    def __post_init__(self) -> None:
        d = _check_dimension(self.dimension)
        mass = np.array(self.mass, dtype=float)
        if mass.shape != (2**d,):
            raise DimensionMismatch(f"expected {2**d} masses, got shape {mass.shape}")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0.0):
            raise ValueError("masses must be finite and non-negative")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {mass.sum()!r}, not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "dimension", d)
        object.__setattr__(self, "mass", mass)

    @property
    def support(self) -> np.ndarray:
        return binary_support(self.dimension)

    @classmethod
    def from_weights(cls, dimension: int, weights: np.ndarray) -> "DiscreteDistribution":
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if not total > 0.0:
            raise ZeroMass("weights carry no mass")
        return cls(dimension=dimension, mass=weights / total)

    @classmethod
    def uniform(cls, dimension: int) -> "DiscreteDistribution":
        d = _check_dimension(dimension)
        return cls(dimension=d, mass=np.full(2**d, 1.0 / 2**d))

    @classmethod
    def point_mass(cls, dimension: int, point: np.ndarray) -> "DiscreteDistribution":
        d = _check_dimension(dimension)
        point = np.asarray(point, dtype=float)
        matches = np.flatnonzero(np.all(binary_support(d) == point, axis=1))
        if matches.size != 1:
            raise ValueError(f"{point} is not a binary vector of length {d}")
        mass = np.zeros(2**d)
        mass[matches[0]] = 1.0
        return cls(dimension=d, mass=mass)

    @classmethod
    def binary_toggle(cls, dimension: int) -> "DiscreteDistribution":
        """Law of one non-target row of the LIME toggle sampler.

        ``m`` zeros with probability ``1/d̂``, uniformly among the ``C(d̂, m)``
        placements; the all-ones target itself has no mass.
        """

        d = _check_dimension(dimension)
        zeros = d - binary_support(d).sum(axis=1)
        mass = np.where(zeros > 0, 1.0 / (d * comb(d, zeros)), 0.0)
        return cls.from_weights(d, mass)


def _labels(model: BlackBox, conversion: ConversionSpec, dist: DiscreteDistribution) -> np.ndarray:
    if conversion.surrogate_dimension != dist.dimension:
        raise DimensionMismatch(
            f"distribution over {dist.dimension} bits, conversion has "
            f"{conversion.surrogate_dimension} surrogate features"
        )
    return predict_batch(model, convert_batch(conversion, dist.support))


def kernel_weights_fn(kernel: KernelSpec, target: np.ndarray) -> WeightsFn:
    target = np.asarray(target, dtype=float)
    return lambda points: kernel_weights(target, points, kernel)


def exact_weighted_minimizer(
    model: BlackBox,
    conversion: ConversionSpec,
    dist: DiscreteDistribution,
    weights_fn: Optional[WeightsFn] = None,
) -> LinearSurrogate:
    """Minimise ``E_dist[w(z)·(f(η_x(z)) − g(z))²]`` over all affine ``g``.

    Solved by SVD least squares on the ``sqrt(mass·w)``-scaled design over the
    full support. ``weights_fn`` defaults to unit weights.
    """

    support = dist.support
    labels = _labels(model, conversion, dist)
    weights = np.ones(support.shape[0]) if weights_fn is None else weights_fn(support)
    effective = dist.mass * np.asarray(weights, dtype=float)
    peak = effective.max()
    if not peak > 0.0:
        raise ZeroMass("weighted distribution has no mass")
    root = np.sqrt(effective / peak)

    design = np.column_stack([np.ones(support.shape[0]), support]) * root[:, None]
    theta, _, rank, _ = np.linalg.lstsq(design, labels * root, rcond=RANK_RCOND)
    if rank < design.shape[1]:
        raise SingularSystem(f"population design has rank {rank} < {design.shape[1]}")
    logger.debug(f"exact minimiser over {support.shape[0]} points: θ={theta}")
    return LinearSurrogate(
        intercept=float(theta[0]),
        coefficients=theta[1:],
        selected=tuple(range(dist.dimension)),
    )


def lemma1_distribution(
    dist: DiscreteDistribution, kernel: KernelSpec, target: Optional[np.ndarray] = None
) -> DiscreteDistribution:
    """Reweight ``dist`` by the kernel around ``target`` (default all ones) and renormalise."""

    target = np.ones(dist.dimension) if target is None else np.asarray(target, dtype=float)
    reweighted = dist.mass * kernel_weights(target, dist.support, kernel)
    total = reweighted.sum()
    if not total > 0.0:
        raise ZeroMass(f"kernel-reweighted mass vanishes at σ={kernel.sigma:g}")
    return DiscreteDistribution(dimension=dist.dimension, mass=reweighted / total)


def verify_lemma1(
    model: BlackBox,
    conversion: ConversionSpec,
    dist: DiscreteDistribution,
    kernel: KernelSpec,
) -> float:
    """ℓ∞ gap between the kernel-weighted minimiser under ``dist`` and the
    unit-weight minimiser under the kernel-reweighted distribution."""

    target = conversion.surrogate_target
    weighted = exact_weighted_minimizer(
        model, conversion, dist, kernel_weights_fn(kernel, target)
    )
    resampled = exact_weighted_minimizer(
        model, conversion, lemma1_distribution(dist, kernel, target)
    )
    gap = max(
        abs(weighted.intercept - resampled.intercept),
        float(np.max(np.abs(weighted.coefficients - resampled.coefficients))),
    )
    return float(gap)


__all__ = [
    "MAX_ENUMERATION_DIM",
    "DiscreteDistribution",
    "binary_support",
    "exact_weighted_minimizer",
    "kernel_weights_fn",
    "lemma1_distribution",
    "verify_lemma1",
]
