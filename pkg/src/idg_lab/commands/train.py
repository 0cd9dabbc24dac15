"""Encoder training command."""

from pathlib import Path
from typing import Any

import typer
from pydantic import ValidationError

from idg_lab.cli import app, fail, usage_error
from idg_lab.config import resolve_seed, write_manifest
from idg_lab.constants import (
    DEFAULT_APPROX_DA_MIX,
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_TEMPERATURE,
    DEFAULT_Z_DIM,
)
from idg_lab.data.dataset import ingest_csv
from idg_lab.learning.nets import Activation
from idg_lab.learning.objectives import (
    BottleneckKind,
    BottleneckSpec,
    CriticMode,
    CriticSpec,
    ObjectiveKind,
    ObjectiveSpec,
)
from idg_lab.learning.trainer import TrainConfig, train
from idg_lab.theory.augmentation import RegimeKind
from idg_lab.utils.error_handler import IdgLabError


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise usage_error(f"expected comma-separated numbers, got {text!r}")


def parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise usage_error(f"expected comma-separated integers, got {text!r}")


def build_config(**options: Any) -> TrainConfig:
    """TrainConfig from flat command options; invalid values exit with the usage code."""
    try:
        objective = ObjectiveSpec(
            objective=options["objective"],
            bottleneck=BottleneckSpec(kind=options["bottleneck"], lam=options["lam"]),
            critic=CriticSpec(mode=options["critic"], temperature=options["temperature"]),
        )
        return TrainConfig(
            objective=objective,
            regime=options["regime"],
            regime_domain=options["regime_domain"],
            mix=options["mix"],
            hidden=parse_ints(options["hidden"]),
            z_dim=options["z_dim"],
            stochastic=options["stochastic"],
            activation=options["activation"],
            lr=options["lr"],
            epochs=options["epochs"],
            batch_size=options["batch_size"],
            seed=options["seed"],
            domains=parse_ints(options["domains"]) if options["domains"] else None,
        )
    except ValidationError as e:
        raise usage_error(str(e))
    except IdgLabError as e:
        raise fail(e)


@app.command("train")
def train_command(
    data: Path = typer.Option(..., "--data", help="Embedding CSV to train on"),
    output: Path = typer.Option(..., "--output", "-o", help="Run directory"),
    objective: ObjectiveKind = typer.Option(ObjectiveKind.CE, "--objective", help="Task loss"),
    bottleneck: BottleneckKind = typer.Option(
        BottleneckKind.NONE, "--bottleneck", help="Domain bottleneck"
    ),
    lam: float = typer.Option(0.0, "--lambda", help="Bottleneck weight"),
    lambda_grid: str | None = typer.Option(
        None, "--lambda-grid", help="Comma-separated weights; one run per value"
    ),
    regime: RegimeKind = typer.Option(
        RegimeKind.SUPERVISED, "--regime", help="Augmentation regime for infonce"
    ),
    regime_domain: int | None = typer.Option(
        None, "--regime-domain", help="Fixed domain of the singledom regime"
    ),
    mix: float = typer.Option(DEFAULT_APPROX_DA_MIX, "--mix", help="Cross-domain share of approxda"),
    critic: CriticMode = typer.Option(CriticMode.TIED, "--critic", help="Critic parameters"),
    temperature: float = typer.Option(DEFAULT_TEMPERATURE, "--temperature", help="Critic temperature"),
    hidden: str = typer.Option("64", "--hidden", help="Comma-separated hidden widths"),
    z_dim: int = typer.Option(DEFAULT_Z_DIM, "--z-dim", help="Representation width"),
    stochastic: bool = typer.Option(False, "--stochastic", help="Gaussian encoder"),
    activation: Activation = typer.Option(Activation.RELU, "--activation", help="Hidden activation"),
    lr: float = typer.Option(DEFAULT_LEARNING_RATE, "--lr", help="Adam learning rate"),
    epochs: int = typer.Option(DEFAULT_EPOCHS, "--epochs", help="Training epochs"),
    batch_size: int = typer.Option(DEFAULT_BATCH_SIZE, "--batch-size", help="Batch size"),
    domains: str | None = typer.Option(
        None, "--domains", help="Comma-separated training domains (default all)"
    ),
    seed: int | None = typer.Option(None, "--seed", "-s", help="Random seed"),
    resume: Path | None = typer.Option(None, "--resume", help="Continue a saved run"),
) -> None:
    """Train an encoder and write its checkpoint and history.

    Example:
        idg-lab train --data data.csv -o runs/cad --bottleneck cad --lambda 0.1

        idg-lab train --data data.csv -o runs/sweep --bottleneck cad --lambda-grid 0,1e-2,1e-1,1,10

        idg-lab train --data data.csv -o runs/nce --objective infonce --regime intradom
    """
    master = resolve_seed(seed)
    try:
        dataset = ingest_csv(data)
    except IdgLabError as e:
        raise fail(e)

    options = dict(
        objective=objective,
        bottleneck=bottleneck,
        lam=lam,
        regime=regime,
        regime_domain=regime_domain,
        mix=mix,
        critic=critic,
        temperature=temperature,
        hidden=hidden,
        z_dim=z_dim,
        stochastic=stochastic,
        activation=activation,
        lr=lr,
        epochs=epochs,
        batch_size=batch_size,
        domains=domains,
        seed=master,
    )
    grid = parse_floats(lambda_grid) if lambda_grid else None
    if grid and resume is not None:
        raise usage_error("--resume applies to a single run, not a --lambda-grid")
    runs = [(output / f"lam_{v:g}", v) for v in grid] if grid else [(output, lam)]
    for run_dir, weight in runs:
        config = build_config(**{**options, "lam": weight})
        try:
            result = train(dataset, config, resume=resume)
        except IdgLabError as e:
            raise fail(e)
        result.save(run_dir)
        params = {k: (v.value if hasattr(v, "value") else v) for k, v in options.items()}
        write_manifest(
            run_dir,
            "train",
            {**params, "lam": weight, "data": data, "config": config.model_dump(mode="json")},
            master,
        )
        final = result.history[-1]
        typer.secho(
            f"{run_dir}: lambda={weight:g} total={final.total:.5f} after {len(result.history)} epochs",
            fg=typer.colors.GREEN,
        )
