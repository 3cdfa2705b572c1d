"""Run configuration for the command-line tools.

Values come from three layers, later ones winning: field defaults, an optional
``key=value`` config file, then flags given explicitly on the command line.
Environment variables are never consulted.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple, Type

from dotenv import dotenv_values
from pydantic import ValidationError
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from slime.errors import ConfigError
from slime.pipeline import DEFAULT_K, DEFAULT_LIME_SIGMA, DEFAULT_N


class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(extra="forbid", frozen=True, protected_namespaces=())

    # inputs and outputs
    dataset: Optional[Path] = None
    model: Optional[Path] = None
    out: Optional[Path] = None
    segmentation: Optional[Path] = None

    # training
    model_kind: Literal["logistic", "forest", "mlp"] = "logistic"
    l1: float = 0.0
    max_iter: int = 5000
    trees: int = 10
    depth: int = 3
    hidden: int = 100

    # explanation
    method: Literal["lime", "slime"] = "slime"
    conversion: Literal["tabular", "segmented"] = "tabular"
    baseline: Literal["zero", "mean"] = "zero"
    row: int = 0
    rows: str = "0:10"
    sigma: float = DEFAULT_LIME_SIGMA
    sigma_grid: str = "1e-2:1e2:20"
    sigma_pair: str = "0.1,100"
    n: int = DEFAULT_N
    k: int = DEFAULT_K
    ridge: float = 0.0
    seed: int = 0
    workers: int = 1

    # lemma check
    dimension: int = 3
    trials: int = 100

    # synthetic data
    kind: Literal["sparse-logistic", "wine-like", "xor"] = "sparse-logistic"
    m: int = 1000
    d: int = 10

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings,)

    def echo(self) -> Dict[str, Any]:
        """JSON-safe dump written into every output artifact."""

        return self.model_dump(mode="json")


def _normalise_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def load_config_file(path: Path) -> Dict[str, str]:
    """Parse a ``key=value`` file; keys may use hyphens or underscores."""

    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    parsed: Dict[str, str] = {}
    for key, value in values.items():
        if value is None:
            raise ConfigError(f"{path}: line for {key!r} has no '=' value")
        parsed[_normalise_key(key)] = value
    return parsed


def resolve_config(
    config_file: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Merge defaults, the config file and explicit overrides into a RunConfig."""

    values: Dict[str, Any] = {}
    if config_file is not None:
        values.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[_normalise_key(key)] = value
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


__all__ = ["RunConfig", "load_config_file", "resolve_config"]
