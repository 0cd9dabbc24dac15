"""Experiment drivers: bottleneck-weight sweeps, augmentation regimes and target access.

Each driver trains one encoder per configuration and seed, embeds the full
dataset, runs the worst-case all-pairs probe and returns one tidy row per run.
"""

import logging

import pandas as pd
from pydantic import BaseModel, Field

from idg_lab.constants import DEFAULT_PROBE_L2, DEFAULT_WRONG_LABEL_WEIGHT
from idg_lab.data.dataset import EmbeddingDataset
from idg_lab.data.probe import ProbeMode, ProbeResult, evaluate_all_pairs
from idg_lab.learning.objectives import BottleneckKind, BottleneckSpec, ObjectiveKind, ObjectiveSpec
from idg_lab.learning.trainer import TrainConfig, encode, train
from idg_lab.theory.augmentation import RegimeKind

logger = logging.getLogger("idg_lab.experiments")

DEFAULT_LAMBDAS = (0.0, 1e-2, 1e-1, 1.0, 10.0)
DEFAULT_EXPERIMENT_SEEDS = (0, 1, 2, 3, 4)
REFERENCE_ROW = "ce"


class ProbeOptions(BaseModel):
    mode: ProbeMode = ProbeMode.WORST
    l2: float | None = DEFAULT_PROBE_L2
    sample_weight: float = Field(default=DEFAULT_WRONG_LABEL_WEIGHT, ge=0.0)
    jobs: int = Field(default=1, ge=1)


def _with_bottleneck(config: TrainConfig, lam: float, seed: int) -> TrainConfig:
    kind = config.objective.bottleneck.kind
    kind = BottleneckKind.CAD if kind is BottleneckKind.NONE else kind
    objective = config.objective.model_copy(update={"bottleneck": BottleneckSpec(kind=kind, lam=lam)})
    return config.model_copy(update={"objective": objective, "seed": seed})


def _metrics(result: ProbeResult) -> dict[str, float]:
    return {
        "source_accuracy": result.source_accuracy.mean,
        "source_log_likelihood": result.source_log_likelihood.mean,
        "target_accuracy_avg": result.target_accuracy_avg.mean,
        "target_accuracy_worst": result.target_accuracy_worst.mean,
        "target_log_likelihood_avg": result.target_log_likelihood_avg.mean,
        "target_log_likelihood_worst": result.target_log_likelihood_worst.mean,
    }


def run_and_probe(
    dataset: EmbeddingDataset,
    config: TrainConfig,
    options: ProbeOptions,
    targets: list[int] | None = None,
) -> dict[str, float]:
    """Train, embed every row (all domains, both splits) and probe all pairs."""
    result = train(dataset, config)
    embedded = encode(result, dataset)
    probe = evaluate_all_pairs(
        embedded,
        mode=options.mode,
        seeds=[config.seed],
        l2=options.l2,
        sample_weight=options.sample_weight,
        jobs=options.jobs,
        targets=targets,
    )
    return _metrics(probe)


def lambda_sweep(
    dataset: EmbeddingDataset,
    base: TrainConfig,
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS,
    seeds: tuple[int, ...] = DEFAULT_EXPERIMENT_SEEDS,
    options: ProbeOptions | None = None,
) -> pd.DataFrame:
    """One row per (lambda, seed); the base bottleneck kind defaults to CAD."""
    options = options or ProbeOptions()
    rows = []
    for lam in lambdas:
        for seed in seeds:
            metrics = run_and_probe(dataset, _with_bottleneck(base, lam, seed), options)
            rows.append({"lam": lam, "seed": seed, **metrics})
            logger.info(f"lambda={lam} seed={seed}: {metrics['target_log_likelihood_worst']:.4f}")
    return pd.DataFrame(rows)


def regime_comparison(
    dataset: EmbeddingDataset,
    base: TrainConfig,
    regimes: tuple[RegimeKind, ...] = tuple(RegimeKind),
    seeds: tuple[int, ...] = DEFAULT_EXPERIMENT_SEEDS,
    options: ProbeOptions | None = None,
) -> pd.DataFrame:
    """InfoNCE with each regime, plus a supervised-ce reference row, under the base bottleneck."""
    options = options or ProbeOptions()
    lam = base.objective.bottleneck.lam
    rows = []
    for seed in seeds:
        reference = _with_bottleneck(base, lam, seed)
        reference = reference.model_copy(
            update={"objective": reference.objective.model_copy(update={"objective": ObjectiveKind.CE})}
        )
        rows.append({"regime": REFERENCE_ROW, "seed": seed, **run_and_probe(dataset, reference, options)})
        for regime in regimes:
            config = _with_bottleneck(base, lam, seed)
            config = config.model_copy(
                update={
                    "objective": config.objective.model_copy(update={"objective": ObjectiveKind.INFONCE}),
                    "regime": regime,
                    "regime_domain": 0 if regime is RegimeKind.SINGLE_DOM else config.regime_domain,
                }
            )
            rows.append({"regime": regime.value, "seed": seed, **run_and_probe(dataset, config, options)})
            logger.info(f"regime={regime.value} seed={seed} done")
    return pd.DataFrame(rows)


def target_access(
    dataset: EmbeddingDataset,
    base: TrainConfig,
    held_out: int,
    seeds: tuple[int, ...] = DEFAULT_EXPERIMENT_SEEDS,
    options: ProbeOptions | None = None,
) -> pd.DataFrame:
    """Held-out-target metrics when the encoder sees all domains versus all but ``held_out``."""
    options = options or ProbeOptions()
    others = [d for d in range(dataset.n_domains) if d != held_out]
    rows = []
    for seed in seeds:
        for setting, domains in (("all", None), ("without_target", others)):
            config = base.model_copy(update={"seed": seed, "domains": domains})
            metrics = run_and_probe(dataset, config, options, targets=[held_out])
            rows.append({"setting": setting, "held_out": held_out, "seed": seed, **metrics})
    return pd.DataFrame(rows)


def default_objective() -> ObjectiveSpec:
    return ObjectiveSpec(
        objective=ObjectiveKind.CE, bottleneck=BottleneckSpec(kind=BottleneckKind.CAD, lam=1.0)
    )
