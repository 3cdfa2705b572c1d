"""Exception and warning types shared by every explainer module."""

from __future__ import annotations


class ExplainerError(Exception):
    """Base error for explainer failures."""


class DimensionMismatch(ExplainerError, ValueError):
    """Raised when vectors or matrices have inconsistent shapes."""


class SingularSystem(ExplainerError):
    """Raised when the least-squares normal matrix is rank-deficient."""


class InvalidK(ExplainerError, ValueError):
    """Raised when the sparsity budget k lies outside [1, d̂]."""


class InvalidSigma(ExplainerError, ValueError):
    """Raised when a bandwidth is outside the sampler's admissible range."""


class MissingSegmentation(ExplainerError, ValueError):
    """Raised when a segmented conversion has no segmentation map."""


class EmptyWeights(ExplainerError, ValueError):
    """Raised when a weight vector is empty or carries no mass."""


class ZeroVariance(ExplainerError):
    """Raised when R² is undefined: constant labels but non-zero residuals."""


class EmptyGold(ExplainerError, ValueError):
    """Raised when the gold-standard feature set is empty."""


class EmptyExplained(ExplainerError, ValueError):
    """Raised when the explanation reports no feature."""


class DegenerateData(ExplainerError, ValueError):
    """Raised when training data lacks one of the two classes."""


class DatasetError(ExplainerError):
    """Raised when a dataset or model document cannot be parsed."""


class ConfigError(ExplainerError, ValueError):
    """Raised on inconsistent explainer or run configuration."""


class EnumerationTooLarge(ExplainerError, ValueError):
    """Raised when exact enumeration would exceed the 2^14 point cap."""


class ZeroMass(ExplainerError):
    """Raised when a reweighted distribution has zero total mass."""


class AllRowsFailed(ExplainerError):
    """Raised when no sweep row produced a usable explanation."""


class DegenerateWarning(UserWarning):
    """Kernel weights collapsed onto the target; the surrogate carries no signal."""


class NonConvergenceWarning(UserWarning):
    """A trainer exhausted its iteration budget before meeting its tolerance."""


__all__ = [
    "AllRowsFailed",
    "ConfigError",
    "DatasetError",
    "DegenerateData",
    "DegenerateWarning",
    "DimensionMismatch",
    "EmptyExplained",
    "EmptyGold",
    "EmptyWeights",
    "EnumerationTooLarge",
    "ExplainerError",
    "InvalidK",
    "InvalidSigma",
    "MissingSegmentation",
    "NonConvergenceWarning",
    "SingularSystem",
    "ZeroMass",
    "ZeroVariance",
]
