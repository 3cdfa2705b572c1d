#!/usr/bin/env python3
"""Train small black boxes and explain them with LIME or s-LIME.

Every artifact (model JSON, explanation JSON, sweep CSV) embeds the fully
resolved run configuration and nothing time-dependent, so rerunning a
command with the same flags reproduces its output byte for byte.

Exit codes: 0 success, 2 validation error, 3 training did not converge,
4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from slime.blackbox import (
    BlackBox,
    Dataset,
    load_model,
    model_to_dict,
    train_logistic,
    train_mlp,
    train_stump_forest,
)
from slime.datasets import load_dataset_csv, make_synthetic_dataset, save_dataset_csv
from slime.errors import (
    AllRowsFailed,
    ConfigError,
    DimensionMismatch,
    ExplainerError,
    SingularSystem,
)
from slime.neighborhoods import (
    ConversionKind,
    ConversionSpec,
    KernelSpec,
    identity_segmentation,
    load_segmentation_csv,
)
from slime.oracle import DiscreteDistribution, verify_lemma1
from slime.persistence import write_csv, write_json
from slime.pipeline import (
    ExplainConfig,
    Method,
    aggregate_sweeps,
    explain,
    select_best_sigma,
    select_best_sigma_aggregated,
    sweep_frame,
    sweep_sigma,
    weight_concentration,
)
from slime.seeding import derive_seed, make_rng
from slime.settings import RunConfig, resolve_config

logger = logging.getLogger("slime.cli")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NON_CONVERGENCE = 3
EXIT_IO = 4

LEMMA_TOL = 1e-8
LEMMA_SIGMA_RANGE = (0.1, 10.0)


class NotConverged(Exception):
    """Raised after a non-converged model has been written."""


# ---------- parsing helpers ----------


def parse_sigma_grid(spec: str) -> List[float]:
    """``"lo:hi:points"`` → ``points`` log-spaced values, endpoints included."""

    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"σ grid must look like lo:hi:points, got {spec!r}")
    try:
        low, high, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"σ grid {spec!r}: {exc}") from exc
    if not (0.0 < low <= high) or points < 1 or (points == 1 and low != high):
        raise ConfigError(f"σ grid {spec!r} needs 0 < lo <= hi and points >= 1")
    if points == 1:
        return [low]
    grid = np.logspace(np.log10(low), np.log10(high), points)
    grid[0], grid[-1] = low, high
    return grid.tolist()


def parse_sigma_pair(spec: str) -> Tuple[float, float]:
    parts = [p for p in spec.replace(":", ",").split(",") if p.strip()]
    if len(parts) != 2:
        raise ConfigError(f"σ pair must be two comma-separated values, got {spec!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"σ pair {spec!r}: {exc}") from exc


def parse_rows(spec: str, size: int) -> List[int]:
    """``"a:b"`` (half-open range) or ``"i,j,k"``; every index must exist."""

    try:
        if ":" in spec:
            start, stop = (int(p) for p in spec.split(":"))
            rows = list(range(start, min(stop, size)))
        else:
            rows = [int(p) for p in spec.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"row selection {spec!r}: {exc}") from exc
    if not rows or any(r < 0 or r >= size for r in rows):
        raise ConfigError(f"row selection {spec!r} is empty or outside 0..{size - 1}")
    return rows


def _require(config: RunConfig, *names: str) -> None:
    missing = [name for name in names if getattr(config, name) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + m for m in missing)}")


def _target(dataset: Dataset, row: int) -> np.ndarray:
    if not 0 <= row < dataset.size:
        raise ConfigError(f"row {row} outside the dataset's 0..{dataset.size - 1}")
    return dataset.features[row]


def _conversion(config: RunConfig, dataset: Dataset, target: np.ndarray) -> ConversionSpec:
    """LIME always explains over a segmented (presence/absence) space; with a
    tabular conversion every feature is its own segment."""

    if config.method == Method.SLIME.value and config.conversion == ConversionKind.TABULAR.value:
        return ConversionSpec.tabular(target)
    segmentation = (
        load_segmentation_csv(config.segmentation)
        if config.segmentation is not None and config.conversion == ConversionKind.SEGMENTED.value
        else identity_segmentation(target.size)
    )
    baseline = dataset.features.mean(axis=0) if config.baseline == "mean" else None
    return ConversionSpec.segmented(target, segmentation=segmentation, baseline=baseline)


def _explain_config(
    config: RunConfig, dataset: Dataset, target: np.ndarray, method: Optional[str] = None
) -> ExplainConfig:
    if method is not None:
        config = config.model_copy(update={"method": method})
    return ExplainConfig(
        method=Method(config.method),
        sigma=config.sigma,
        n=config.n,
        k=config.k,
        conversion=_conversion(config, dataset, target),
        seed=config.seed,
        ridge=config.ridge,
    )


def _load_inputs(config: RunConfig) -> Tuple[BlackBox, Dataset]:
    _require(config, "model", "dataset")
    model = load_model(config.model)
    dataset = load_dataset_csv(config.dataset)
    if dataset.dimension != model.dimension:
        raise DimensionMismatch(
            f"dataset has {dataset.dimension} features, model expects {model.dimension}"
        )
    return model, dataset


# ---------- commands ----------


def cmd_train(config: RunConfig) -> int:
    _require(config, "dataset", "out")
    dataset = load_dataset_csv(config.dataset)
    logger.info(
        f"training {config.model_kind} on {dataset.size} rows × {dataset.dimension} features"
    )
    if config.model_kind == "logistic":
        model = train_logistic(dataset, l1=config.l1, max_iter=config.max_iter)
    elif config.model_kind == "forest":
        model = train_stump_forest(
            dataset, trees=config.trees, depth=config.depth, seed=config.seed
        )
    else:
        model = train_mlp(
            dataset, hidden=config.hidden, seed=config.seed, epochs=config.max_iter
        )

    document = model_to_dict(model)
    document["config"] = config.echo()
    write_json(config.out, document)
    logger.info(f"✅ model written to {config.out}")
    if model.training is not None and not model.training.converged:
        raise NotConverged(
            f"{config.model_kind} stopped after {model.training.iterations} iterations "
            f"without converging; model written to {config.out} and flagged"
        )
    return EXIT_OK


def cmd_explain(config: RunConfig) -> int:
    _require(config, "out")
    model, dataset = _load_inputs(config)
    target = _target(dataset, config.row)
    explanation = explain(model, target, _explain_config(config, dataset, target))
    write_json(config.out, {**explanation.to_dict(), "config": config.echo()})
    logger.info(
        f"{explanation.method.value} σ={explanation.sigma:g}: r2={explanation.report.r2} "
        f"degenerate={explanation.degenerate} ess={explanation.ess:.4g}"
    )
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    _require(config, "out")
    model, dataset = _load_inputs(config)
    grid = parse_sigma_grid(config.sigma_grid)
    target = _target(dataset, config.row)
    # Build the base at the first grid point so σ-dependent checks see a valid value.
    base = _explain_config(config.model_copy(update={"sigma": grid[0]}), dataset, target)
    rows = sweep_sigma(model, target, base, grid, workers=config.workers, show_progress=True)
    write_csv(config.out, sweep_frame(rows), header_comments=config.echo())
    try:
        sigma, best = select_best_sigma(rows)
        logger.info(f"best σ={sigma:g} (r2={best.report.r2})")
        print(f"best_sigma={sigma!r}")
    except AllRowsFailed as exc:
        logger.warning(f"no σ selected: {exc}")
    return EXIT_OK


def _lemma_segmentation(d: int, d_hat: int) -> np.ndarray:
    """``d`` features split into ``d_hat`` contiguous non-empty segments."""

    return (np.arange(d) * d_hat) // d


def cmd_lemma_check(config: RunConfig) -> int:
    _require(config, "model")
    if config.trials < 1:
        raise ConfigError(f"trials must be >= 1, got {config.trials}")
    model = load_model(config.model)
    d_hat = config.dimension
    DiscreteDistribution.uniform(d_hat)  # enforces the enumeration cap up front
    if d_hat > model.dimension:
        raise ConfigError(f"d̂={d_hat} exceeds the model's {model.dimension} features")

    segmentation = _lemma_segmentation(model.dimension, d_hat)
    low, high = np.log(LEMMA_SIGMA_RANGE[0]), np.log(LEMMA_SIGMA_RANGE[1])
    distances: List[float] = []
    skipped = 0
    for trial in range(config.trials):
        rng = make_rng(derive_seed(config.seed, trial))
        target = rng.standard_normal(model.dimension)
        conversion = ConversionSpec.segmented(target, segmentation=segmentation)
        dist = DiscreteDistribution.from_weights(d_hat, rng.dirichlet(np.ones(2**d_hat)))
        kernel = KernelSpec(float(np.exp(rng.uniform(low, high))))
        try:
            distances.append(verify_lemma1(model, conversion, dist, kernel))
        except SingularSystem as exc:
            skipped += 1
            logger.debug(f"trial {trial} skipped (σ={kernel.sigma:.4g}): {exc}")

    if not distances:
        raise ConfigError(f"all {config.trials} trials were rank-deficient; nothing verified")
    worst = max(distances)
    summary: Dict[str, Any] = {
        "config": config.echo(),
        "verified": len(distances),
        "skipped": skipped,
        "max_distance": worst,
        "passed": worst <= LEMMA_TOL,
    }
    if config.out is not None:
        write_json(config.out, summary)
    print(f"max_distance={worst:.3e} verified={len(distances)} skipped={skipped}")
    if worst > LEMMA_TOL:
        logger.error(f"❌ minimisers differ by {worst:.3e} > {LEMMA_TOL:g}")
        return EXIT_VALIDATION
    logger.info("✅ kernel-weighted and resampled minimisers agree")
    return EXIT_OK


def cmd_paradox(config: RunConfig) -> int:
    _require(config, "out")
    model, dataset = _load_inputs(config)
    target = _target(dataset, config.row)
    blocks = []
    for sigma in parse_sigma_pair(config.sigma_pair):
        lime_config = _explain_config(
            config.model_copy(update={"sigma": sigma}), dataset, target, method=Method.LIME.value
        )
        block = weight_concentration(model, target, lime_config)
        logger.info(f"σ={sigma:g}: ess={block['ess']:.4g}")
        blocks.append(block)
    write_json(config.out, {"config": config.echo(), "blocks": blocks})
    return EXIT_OK


def cmd_synth(config: RunConfig) -> int:
    _require(config, "out")
    dataset = make_synthetic_dataset(config.kind, m=config.m, d=config.d, seed=config.seed)
    save_dataset_csv(dataset, config.out, header_comments=config.echo())
    logger.info(f"✅ {config.kind} dataset ({dataset.size} rows) written to {config.out}")
    return EXIT_OK


def cmd_campaign(config: RunConfig) -> int:
    _require(config, "out")
    model, dataset = _load_inputs(config)
    grid = parse_sigma_grid(config.sigma_grid)
    rows = parse_rows(config.rows, dataset.size)
    targets = dataset.features[rows]
    base = _explain_config(config.model_copy(update={"sigma": grid[0]}), dataset, targets[0])
    table = aggregate_sweeps(
        model, targets, base, grid, workers=config.workers, show_progress=True
    )
    write_csv(config.out, table, header_comments=config.echo())
    try:
        sigma = select_best_sigma_aggregated(table)
        logger.info(f"best σ by mean R² over {len(rows)} targets: {sigma:g}")
        print(f"best_sigma={sigma!r}")
    except AllRowsFailed as exc:
        logger.warning(f"no σ selected: {exc}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "train": cmd_train,
    "explain": cmd_explain,
    "sweep": cmd_sweep,
    "lemma-check": cmd_lemma_check,
    "paradox": cmd_paradox,
    "synth": cmd_synth,
    "campaign": cmd_campaign,
}


# ---------- argument parsing ----------


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value file; flags override it")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    common.add_argument("--seed", type=int, help="Base seed for all randomness")
    common.add_argument("--out", type=Path, help="Output artifact path")
    common.add_argument("--workers", type=int, help="Parallel sweep rows (default: 1)")
    return common


def _explain_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", type=Path, help="Model JSON")
    parser.add_argument("--dataset", type=Path, help="Dataset CSV")
    parser.add_argument("--row", type=int, help="0-based row of the target instance")
    parser.add_argument("--method", choices=[m.value for m in Method])
    parser.add_argument("--conversion", choices=[c.value for c in ConversionKind])
    parser.add_argument("--segmentation", type=Path, help="(original_index, segment_index) CSV")
    parser.add_argument("--baseline", choices=["zero", "mean"], help="Replacement for absent segments")
    parser.add_argument("--n", type=int, help="Neighborhood size")
    parser.add_argument("--k", type=int, help="Features in the explanation")
    parser.add_argument("--ridge", type=float, help="Ridge penalty on coefficients")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", parents=[common], help="Train a black-box model")
    train.add_argument("--dataset", type=Path, help="Dataset CSV")
    train.add_argument("--model-kind", choices=["logistic", "forest", "mlp"])
    train.add_argument("--l1", type=float, help="L1 penalty (logistic)")
    train.add_argument("--max-iter", type=int, help="Iteration budget (logistic, mlp)")
    train.add_argument("--trees", type=int, help="Trees in the forest")
    train.add_argument("--depth", type=int, help="Tree depth")
    train.add_argument("--hidden", type=int, help="Hidden units (mlp)")

    explain_cmd = sub.add_parser("explain", parents=[common], help="Explain one instance")
    _explain_arguments(explain_cmd)
    explain_cmd.add_argument("--sigma", type=float, help="Bandwidth")

    sweep = sub.add_parser("sweep", parents=[common], help="Explain one instance over a σ grid")
    _explain_arguments(sweep)
    sweep.add_argument("--sigma-grid", help="lo:hi:points, log-spaced")

    lemma = sub.add_parser("lemma-check", parents=[common], help="Exact minimiser equivalence")
    lemma.add_argument("--model", type=Path, help="Model JSON")
    lemma.add_argument("--dimension", type=int, help="Surrogate dimension d̂ (<= 14)")
    lemma.add_argument("--trials", type=int, help="Randomised trials")

    paradox = sub.add_parser("paradox", parents=[common], help="LIME weight concentration")
    _explain_arguments(paradox)
    paradox.add_argument("--sigma-pair", help="Two bandwidths, e.g. 0.1,100")

    synth = sub.add_parser("synth", parents=[common], help="Write a synthetic dataset")
    synth.add_argument("--kind", choices=["sparse-logistic", "wine-like", "xor"])
    synth.add_argument("--m", type=int, help="Rows")
    synth.add_argument("--d", type=int, help="Features (sparse-logistic)")

    campaign = sub.add_parser("campaign", parents=[common], help="σ sweep averaged over targets")
    _explain_arguments(campaign)
    campaign.add_argument("--rows", help="Target rows: a:b or i,j,k")
    campaign.add_argument("--sigma-grid", help="lo:hi:points, log-spaced")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config", "verbose")
    }
    try:
        config = resolve_config(args.config, overrides)
        return COMMANDS[args.command](config)
    except NotConverged as exc:
        logger.error(f"❌ {exc}")
        return EXIT_NON_CONVERGENCE
    except (ExplainerError, ValueError) as exc:
        logger.error(f"❌ {type(exc).__name__}: {exc}")
        return EXIT_VALIDATION
    except OSError as exc:
        logger.error(f"❌ I/O error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
