"""Training loop for bottlenecked encoders on embedding datasets."""

import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from idg_lab.autodiff.checkpoint import load_checkpoint, save_checkpoint
from idg_lab.autodiff.optim import Adam, cosine_lr
from idg_lab.autodiff.tensor import Tape
from idg_lab.constants import (
    DEFAULT_APPROX_DA_MIX,
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_HIDDEN_WIDTH,
    DEFAULT_LEARNING_RATE,
    DEFAULT_Z_DIM,
)
from idg_lab.data.dataset import EmbeddingDataset, Split
from idg_lab.learning.nets import Activation, NetSpec, Params, encode_array
from idg_lab.learning.objectives import (
    Batch,
    ObjectiveKind,
    ObjectiveSpec,
    check_compatible,
    init_params,
    objective_loss,
)
from idg_lab.learning.positives import sample_positives
from idg_lab.theory.augmentation import RegimeKind, RegimeSpec
from idg_lab.utils.error_handler import InadmissibleParameterError, MissingArtifactError
from idg_lab.utils.output import write_table

logger = logging.getLogger("idg_lab.trainer")

MODEL_STEM = "model"
OPTIMIZER_STEM = "optimizer"
HISTORY_NAME = "history.csv"


class TrainConfig(BaseModel):
    """Everything that determines a training run."""

    model_config = ConfigDict(frozen=True)

    objective: ObjectiveSpec = ObjectiveSpec()
    regime: RegimeKind = RegimeKind.SUPERVISED
    regime_domain: int | None = None
    mix: float = Field(default=DEFAULT_APPROX_DA_MIX, ge=0.0, le=1.0)
    hidden: list[int] = [DEFAULT_HIDDEN_WIDTH]
    z_dim: int = Field(default=DEFAULT_Z_DIM, ge=1)
    stochastic: bool = False
    activation: Activation = Activation.RELU
    lr: float = Field(default=DEFAULT_LEARNING_RATE, gt=0.0)
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=2)
    seed: int = 0
    domains: list[int] | None = None

    @property
    def labels_available(self) -> bool:
        """Labels reach the loss for ce and for label-driven augmentation regimes."""
        return self.objective.objective is ObjectiveKind.CE or self.regime is not RegimeKind.STANDARD

    def net_spec(self, in_dim: int) -> NetSpec:
        return NetSpec(
            in_dim=in_dim,
            hidden=self.hidden,
            z_dim=self.z_dim,
            stochastic=self.stochastic,
            activation=self.activation,
        )

    def regime_spec(self) -> RegimeSpec:
        return RegimeSpec(regime=self.regime, domain=self.regime_domain, mix=self.mix)


class EpochRecord(BaseModel):
    epoch: int
    aug: float
    supp: float
    total: float


class TrainResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: TrainConfig
    net: NetSpec
    n_labels: int
    params: dict[str, np.ndarray]
    history: list[EpochRecord] = []
    optimizer: Adam | None = None
    rng_state: dict[str, Any] | None = None

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epoch": [r.epoch for r in self.history],
                "L_aug": [r.aug for r in self.history],
                "L_supp": [r.supp for r in self.history],
                "total": [r.total for r in self.history],
            }
        )

    def save(self, out_dir: Path) -> Path:
        """Write model checkpoint, optimizer state and history CSV into ``out_dir``."""
        meta = {
            "config": self.config.model_dump(mode="json"),
            "net": self.net.model_dump(mode="json"),
            "n_labels": self.n_labels,
            "history": [r.model_dump() for r in self.history],
            "rng_state": self.rng_state,
        }
        save_checkpoint(out_dir / MODEL_STEM, self.params, meta)
        if self.optimizer is not None:
            self.optimizer.save(out_dir / OPTIMIZER_STEM)
        write_table(out_dir / HISTORY_NAME, self.history_frame())
        return out_dir

    @classmethod
    def load(cls, out_dir: Path) -> "TrainResult":
        """Inverse of :meth:`save`.

        Raises:
            MissingArtifactError: If the checkpoint is absent
        """
        params, meta = load_checkpoint(out_dir / MODEL_STEM)
        optimizer = None
        if (out_dir / f"{OPTIMIZER_STEM}.json").exists():
            optimizer = Adam.load(out_dir / OPTIMIZER_STEM)
        return cls(
            config=TrainConfig.model_validate(meta["config"]),
            net=NetSpec.model_validate(meta["net"]),
            n_labels=int(meta["n_labels"]),
            params=params,
            history=[EpochRecord.model_validate(r) for r in meta.get("history", [])],
            optimizer=optimizer,
            rng_state=meta.get("rng_state"),
        )


def make_batches(
    domains: np.ndarray, batch_size: int, stratified: bool, rng: np.random.Generator
) -> list[np.ndarray]:
    """Row-index batches of one epoch; a trailing batch of one row joins the previous batch.

    Stratified batches interleave the domains in proportion to their sizes.
    """
    n = domains.size
    if stratified:
        position = np.empty(n)
        for d in np.unique(domains):
            rows = np.flatnonzero(domains == d)
            position[rng.permutation(rows)] = (np.arange(rows.size) + 0.5) / rows.size
        order = np.lexsort((domains, position))
    else:
        order = rng.permutation(n)
    batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and batches[-1].size < 2:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def _training_rows(dataset: EmbeddingDataset, config: TrainConfig) -> EmbeddingDataset:
    rows = dataset.subset(domains=config.domains, split=Split.TRAIN)
    if len(rows) < 2:
        raise InadmissibleParameterError(f"training needs at least two rows, got {len(rows)}")
    return rows


def train(dataset: EmbeddingDataset, config: TrainConfig, resume: Path | None = None) -> TrainResult:
    """Fit the encoder (and heads) on the training split; deterministic given the seed.

    With ``resume`` the run continues from a saved result up to ``config.epochs``.

    Raises:
        ObjectiveConfigError: On an invalid objective/bottleneck/encoder combination
        InadmissibleParameterError: If fewer than two training rows remain
    """
    rows = _training_rows(dataset, config)
    net = config.net_spec(dataset.width)
    spec = config.objective
    check_compatible(spec, net, config.labels_available)
    regime = config.regime_spec()

    rng = np.random.default_rng(config.seed)
    if resume is not None:
        state = TrainResult.load(resume)
        params, history = state.params, list(state.history)
        opt = state.optimizer or Adam(config.lr)
        if state.rng_state is not None:
            rng.bit_generator.state = state.rng_state
        logger.info(f"Resuming from {resume} at epoch {len(history)}")
    else:
        params = init_params(spec, net, dataset.n_labels, rng)
        history = []
        opt = Adam(config.lr)

    stratified = spec.bottleneck.uses_domains
    n_batches = len(make_batches(rows.domains, config.batch_size, stratified, np.random.default_rng(0)))
    total_steps = config.epochs * n_batches
    labels = rows.labels if config.labels_available else None
    wants_views = spec.objective is ObjectiveKind.INFONCE

    for epoch in range(len(history), config.epochs):
        sums = np.zeros(3)
        for index in make_batches(rows.domains, config.batch_size, stratified, rng):
            views = None
            if wants_views:
                views = sample_positives(index, rows.features, rows.labels, rows.domains, regime, rng)
            batch = Batch(
                x=rows.features[index],
                a=views,
                domains=rows.domains[index],
                labels=labels[index] if labels is not None else None,
            )
            tape = Tape()
            terms = objective_loss(tape, params, batch, net, spec, dataset.n_labels, rng)
            grads = tape.backward(terms.total)
            opt.step(params, grads, cosine_lr(config.lr, opt.t, total_steps))
            values = terms.values()
            sums += index.size * np.array([values["aug"], values["supp"], values["total"]])
        aug, supp, total = sums / len(rows)
        history.append(EpochRecord(epoch=epoch, aug=aug, supp=supp, total=total))
        logger.info(f"epoch {epoch}: L_aug={aug:.5f} L_supp={supp:.5f} total={total:.5f}")

    return TrainResult(
        config=config,
        net=net,
        n_labels=dataset.n_labels,
        params=params,
        history=history,
        optimizer=opt,
        rng_state=rng.bit_generator.state,
    )


def encode(result: TrainResult, dataset: EmbeddingDataset) -> EmbeddingDataset:
    """The dataset with features replaced by the trained encoder's embeddings."""
    if dataset.width != result.net.in_dim:
        raise InadmissibleParameterError(
            f"dataset width {dataset.width} does not match encoder input {result.net.in_dim}"
        )
    return dataset.with_features(encode_array(result.net, result.params, dataset.features))


def load_result(out_dir: Path) -> TrainResult:
    if not (out_dir / f"{MODEL_STEM}.json").exists():
        raise MissingArtifactError(f"No trained model in {out_dir}")
    return TrainResult.load(out_dir)


def params_equal(a: Params, b: Params) -> bool:
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
