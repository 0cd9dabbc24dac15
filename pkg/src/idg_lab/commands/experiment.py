"""Experiment drivers: lambda sweep, augmentation regimes and target access."""

from pathlib import Path
from typing import Any

import pandas as pd
import typer

from idg_lab.cli import experiment_app, fail, usage_error
from idg_lab.commands.train import build_config, parse_floats, parse_ints
from idg_lab.config import resolve_jobs, resolve_seed, write_manifest
from idg_lab.constants import (
    DEFAULT_APPROX_DA_MIX,
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_PROBE_L2,
    DEFAULT_TEMPERATURE,
    DEFAULT_WRONG_LABEL_WEIGHT,
    DEFAULT_Z_DIM,
)
from idg_lab.data.dataset import EmbeddingDataset, ingest_csv
from idg_lab.learning.experiments import (
    ProbeOptions,
    lambda_sweep,
    regime_comparison,
    target_access,
)
from idg_lab.learning.nets import Activation
from idg_lab.learning.objectives import BottleneckKind, CriticMode, ObjectiveKind
from idg_lab.learning.trainer import TrainConfig
from idg_lab.theory.augmentation import RegimeKind
from idg_lab.utils.error_handler import IdgLabError
from idg_lab.utils.output import write_table

SEEDS_HELP = "Comma-separated training seeds"


def _load(data: Path) -> EmbeddingDataset:
    try:
        return ingest_csv(data)
    except IdgLabError as e:
        raise fail(e)


def _base(
    objective: ObjectiveKind,
    bottleneck: BottleneckKind,
    lam: float,
    epochs: int,
    lr: float,
    batch_size: int,
    z_dim: int,
    hidden: str,
    temperature: float,
) -> TrainConfig:
    return build_config(
        objective=objective,
        bottleneck=bottleneck,
        lam=lam,
        regime=RegimeKind.SUPERVISED,
        regime_domain=None,
        mix=DEFAULT_APPROX_DA_MIX,
        critic=CriticMode.TIED,
        temperature=temperature,
        hidden=hidden,
        z_dim=z_dim,
        stochastic=bottleneck is BottleneckKind.MI,
        activation=Activation.RELU,
        lr=lr,
        epochs=epochs,
        batch_size=batch_size,
        domains=None,
        seed=0,
    )


def _finish(
    output: Path, name: str, frame: pd.DataFrame, params: dict[str, Any], seed: int
) -> None:
    path = write_table(output / f"{name}.csv", frame)
    write_manifest(output, f"experiment {name}", params, seed)
    typer.secho(f"Wrote {len(frame)} rows to {path}", fg=typer.colors.GREEN)


def _seeds(text: str) -> tuple[int, ...]:
    seeds = tuple(parse_ints(text))
    if not seeds:
        raise usage_error("at least one seed is required")
    return seeds


@experiment_app.command("lambda")
def lambda_command(
    data: Path = typer.Option(..., "--data", help="Dataset CSV"),
    output: Path = typer.Option(..., "--output", "-o", help="Output directory"),
    lambdas: str = typer.Option("0,1e-2,1e-1,1,10", "--lambdas", help="Bottleneck weights"),
    bottleneck: BottleneckKind = typer.Option(BottleneckKind.CAD, "--bottleneck", help="Bottleneck"),
    objective: ObjectiveKind = typer.Option(ObjectiveKind.CE, "--objective", help="Task loss"),
    seeds: str = typer.Option("0,1,2,3,4", "--seeds", help=SEEDS_HELP),
    epochs: int = typer.Option(DEFAULT_EPOCHS, "--epochs", help="Training epochs"),
    lr: float = typer.Option(DEFAULT_LEARNING_RATE, "--lr", help="Adam learning rate"),
    batch_size: int = typer.Option(DEFAULT_BATCH_SIZE, "--batch-size", help="Batch size"),
    z_dim: int = typer.Option(DEFAULT_Z_DIM, "--z-dim", help="Representation width"),
    hidden: str = typer.Option("64", "--hidden", help="Comma-separated hidden widths"),
    temperature: float = typer.Option(DEFAULT_TEMPERATURE, "--temperature", help="Critic temperature"),
    l2: float = typer.Option(DEFAULT_PROBE_L2, "--l2", help="Probe L2 strength"),
    sample_weight: float = typer.Option(
        DEFAULT_WRONG_LABEL_WEIGHT, "--sample-weight", help="Weight of wrongly labelled target rows"
    ),
    jobs: int | None = typer.Option(None, "--jobs", "-j", help="Parallel probe workers"),
) -> None:
    """Sweep the bottleneck weight and record worst-case target metrics.

    Example:
        idg-lab experiment lambda --data data.csv -o runs/lambda --seeds 0,1
    """
    dataset = _load(data)
    base = _base(objective, bottleneck, 0.0, epochs, lr, batch_size, z_dim, hidden, temperature)
    options = ProbeOptions(l2=l2, sample_weight=sample_weight, jobs=resolve_jobs(jobs))
    grid = tuple(parse_floats(lambdas))
    try:
        frame = lambda_sweep(dataset, base, grid, _seeds(seeds), options)
    except IdgLabError as e:
        raise fail(e)
    params = {"data": data, "lambdas": list(grid), "seeds": seeds, "config": base.model_dump(mode="json")}
    _finish(output, "lambda", frame, params, resolve_seed(None))


@experiment_app.command("regime")
def regime_command(
    data: Path = typer.Option(..., "--data", help="Dataset CSV"),
    output: Path = typer.Option(..., "--output", "-o", help="Output directory"),
    regimes: str = typer.Option(
        ",".join(r.value for r in RegimeKind), "--regimes", help="Comma-separated regimes"
    ),
    bottleneck: BottleneckKind = typer.Option(BottleneckKind.CAD, "--bottleneck", help="Bottleneck"),
    lam: float = typer.Option(1.0, "--lambda", help="Bottleneck weight"),
    seeds: str = typer.Option("0,1,2,3,4", "--seeds", help=SEEDS_HELP),
    epochs: int = typer.Option(DEFAULT_EPOCHS, "--epochs", help="Training epochs"),
    lr: float = typer.Option(DEFAULT_LEARNING_RATE, "--lr", help="Adam learning rate"),
    batch_size: int = typer.Option(DEFAULT_BATCH_SIZE, "--batch-size", help="Batch size"),
    z_dim: int = typer.Option(DEFAULT_Z_DIM, "--z-dim", help="Representation width"),
    hidden: str = typer.Option("64", "--hidden", help="Comma-separated hidden widths"),
    temperature: float = typer.Option(DEFAULT_TEMPERATURE, "--temperature", help="Critic temperature"),
    l2: float = typer.Option(DEFAULT_PROBE_L2, "--l2", help="Probe L2 strength"),
    jobs: int | None = typer.Option(None, "--jobs", "-j", help="Parallel probe workers"),
) -> None:
    """Compare augmentation regimes for InfoNCE against a supervised reference.

    Example:
        idg-lab experiment regime --data data.csv -o runs/regime --regimes supervised,intradom
    """
    dataset = _load(data)
    try:
        kinds = tuple(RegimeKind(r.strip()) for r in regimes.split(",") if r.strip())
    except ValueError:
        raise usage_error(f"unknown regime in {regimes!r}")
    base = _base(ObjectiveKind.INFONCE, bottleneck, lam, epochs, lr, batch_size, z_dim, hidden, temperature)
    options = ProbeOptions(l2=l2, jobs=resolve_jobs(jobs))
    try:
        frame = regime_comparison(dataset, base, kinds, _seeds(seeds), options)
    except IdgLabError as e:
        raise fail(e)
    params = {
        "data": data,
        "regimes": [k.value for k in kinds],
        "seeds": seeds,
        "config": base.model_dump(mode="json"),
    }
    _finish(output, "regime", frame, params, resolve_seed(None))


@experiment_app.command("access")
def access_command(
    data: Path = typer.Option(..., "--data", help="Dataset CSV"),
    output: Path = typer.Option(..., "--output", "-o", help="Output directory"),
    held_out: int | None = typer.Option(
        None, "--held-out", help="Target domain hidden from the encoder (default: last)"
    ),
    bottleneck: BottleneckKind = typer.Option(BottleneckKind.CAD, "--bottleneck", help="Bottleneck"),
    lam: float = typer.Option(1.0, "--lambda", help="Bottleneck weight"),
    seeds: str = typer.Option("0,1,2,3,4", "--seeds", help=SEEDS_HELP),
    epochs: int = typer.Option(DEFAULT_EPOCHS, "--epochs", help="Training epochs"),
    lr: float = typer.Option(DEFAULT_LEARNING_RATE, "--lr", help="Adam learning rate"),
    batch_size: int = typer.Option(DEFAULT_BATCH_SIZE, "--batch-size", help="Batch size"),
    z_dim: int = typer.Option(DEFAULT_Z_DIM, "--z-dim", help="Representation width"),
    hidden: str = typer.Option("64", "--hidden", help="Comma-separated hidden widths"),
    temperature: float = typer.Option(DEFAULT_TEMPERATURE, "--temperature", help="Critic temperature"),
    l2: float = typer.Option(DEFAULT_PROBE_L2, "--l2", help="Probe L2 strength"),
    jobs: int | None = typer.Option(None, "--jobs", "-j", help="Parallel probe workers"),
) -> None:
    """Held-out-target worst case with and without the target in encoder training.

    Example:
        idg-lab experiment access --data data.csv -o runs/access --held-out 3
    """
    dataset = _load(data)
    target = held_out if held_out is not None else dataset.n_domains - 1
    if not 0 <= target < dataset.n_domains:
        raise usage_error(f"--held-out must name one of {dataset.n_domains} domains, got {target}")
    base = _base(ObjectiveKind.CE, bottleneck, lam, epochs, lr, batch_size, z_dim, hidden, temperature)
    options = ProbeOptions(l2=l2, jobs=resolve_jobs(jobs))
    try:
        frame = target_access(dataset, base, target, _seeds(seeds), options)
    except IdgLabError as e:
        raise fail(e)
    params = {"data": data, "held_out": target, "seeds": seeds, "config": base.model_dump(mode="json")}
    _finish(output, "access", frame, params, resolve_seed(None))
