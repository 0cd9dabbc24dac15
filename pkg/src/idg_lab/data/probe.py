"""Linear probes on frozen embeddings and the all-pairs evaluation protocol.

The probe is multinomial logistic regression with an L2 penalty on the
weights, fitted by full-batch gradient descent with step halving, so the
training objective never increases. The worst-case probe adds the target's
training rows with uniformly redrawn wrong labels at a small weight, which
pushes the fit toward the source minimizer that is worst on the target.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from enum import Enum

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import log_softmax, logsumexp

from idg_lab.constants import (
    DEFAULT_PROBE_L2,
    DEFAULT_WRONG_LABEL_WEIGHT,
    L2_GRID,
    PROBE_GRAD_TOL,
    PROBE_INITIAL_STEP,
    PROBE_MAX_ITERS,
    PROBE_MIN_STEP,
)
from idg_lab.data.dataset import EmbeddingDataset, Split
from idg_lab.utils.arrays import FloatArray
from idg_lab.utils.error_handler import AssumptionViolationError, InadmissibleParameterError

logger = logging.getLogger("idg_lab.probe")


class LinearClassifier(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    weights: FloatArray
    bias: FloatArray
    converged: bool = True
    iterations: int = 0

    def log_proba(self, features: np.ndarray) -> np.ndarray:
        return log_softmax(features @ self.weights + self.bias, axis=1)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(features @ self.weights + self.bias, axis=1)

    def accuracy(self, features: np.ndarray, labels: np.ndarray) -> float:
        return float(np.mean(self.predict(features) == labels))

    def log_likelihood(self, features: np.ndarray, labels: np.ndarray) -> float:
        """Mean log-probability of the true labels."""
        return float(np.mean(self.log_proba(features)[np.arange(labels.size), labels]))


def _loss_and_grad(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray, w: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    logits = X @ W + b
    lse = logsumexp(logits, axis=1)
    nll = lse - (logits * Y).sum(axis=1)
    total = w.sum()
    loss = float((w * nll).sum() / total + 0.5 * l2 * (W**2).sum())
    G = w[:, None] * (np.exp(logits - lse[:, None]) - Y) / total
    return loss, X.T @ G + l2 * W, G.sum(axis=0)


def fit_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    n_labels: int,
    l2: float = DEFAULT_PROBE_L2,
    sample_weight: np.ndarray | None = None,
    seed: int = 0,
    max_iters: int = PROBE_MAX_ITERS,
) -> LinearClassifier:
    """Weighted multinomial logistic regression; weights start standard normal."""
    if l2 < 0:
        raise InadmissibleParameterError(f"l2 must be nonnegative, got {l2}")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((features.shape[1], n_labels))
    b = np.zeros(n_labels)
    Y = np.eye(n_labels)[labels]
    w = np.ones(labels.size) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)

    loss, gW, gb = _loss_and_grad(W, b, features, Y, w, l2)
    step = PROBE_INITIAL_STEP
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        if np.sqrt((gW**2).sum() + (gb**2).sum()) < PROBE_GRAD_TOL:
            converged = True
            break
        while step >= PROBE_MIN_STEP:
            W_new, b_new = W - step * gW, b - step * gb
            new_loss, new_gW, new_gb = _loss_and_grad(W_new, b_new, features, Y, w, l2)
            if new_loss <= loss:
                W, b, loss, gW, gb = W_new, b_new, new_loss, new_gW, new_gb
                step *= 2.0
                break
            step *= 0.5
        else:
            # no descent step left above the floor: stationary to working precision
            converged = True
            break
    if not converged:
        logger.warning(f"Probe did not converge in {max_iters} iterations (l2={l2})")
    return LinearClassifier(weights=W, bias=b, converged=converged, iterations=it)


def _train_rows(dataset: EmbeddingDataset, domain: int) -> EmbeddingDataset:
    return dataset.subset(domains=[domain], split=Split.TRAIN)


def _eval_rows(dataset: EmbeddingDataset, domain: int) -> EmbeddingDataset:
    held = dataset.subset(domains=[domain], split=Split.VAL)
    return held if len(held) else _train_rows(dataset, domain)


def _check_source(rows: EmbeddingDataset, source: int) -> None:
    if np.unique(rows.labels).size < 2:
        raise AssumptionViolationError(f"source domain {source} has fewer than two labels")


def linear_probe(
    dataset: EmbeddingDataset, source: int, l2: float = DEFAULT_PROBE_L2, seed: int = 0
) -> LinearClassifier:
    """Probe fitted on the source domain's training rows.

    Raises:
        AssumptionViolationError: If the source has a single label
    """
    rows = _train_rows(dataset, source)
    _check_source(rows, source)
    return fit_logistic(rows.features, rows.labels, dataset.n_labels, l2, seed=seed)


def select_l2(
    dataset: EmbeddingDataset,
    source: int,
    grid: tuple[float, ...] = L2_GRID,
    seed: int = 0,
) -> float:
    """L2 strength with the best source validation accuracy (first in grid on ties)."""
    held = _eval_rows(dataset, source)
    scores = [
        linear_probe(dataset, source, l2, seed).accuracy(held.features, held.labels) for l2 in grid
    ]
    best = grid[int(np.argmax(scores))]
    logger.debug(f"Source {source}: l2 scores {dict(zip(grid, scores))}, picked {best}")
    return best


def wrong_labels(labels: np.ndarray, n_labels: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the labels other than the true one."""
    return (labels + rng.integers(1, n_labels, size=labels.size)) % n_labels


def worst_case_probe(
    dataset: EmbeddingDataset,
    source: int,
    target: int,
    sample_weight: float = DEFAULT_WRONG_LABEL_WEIGHT,
    l2: float = DEFAULT_PROBE_L2,
    seed: int = 0,
) -> LinearClassifier:
    """Source probe pushed toward the worst source minimizer for ``target``.

    Raises:
        InadmissibleParameterError: If target equals source or the weight is negative
        AssumptionViolationError: If the source has a single label
    """
    if target == source:
        raise InadmissibleParameterError("worst-case probe needs a target distinct from the source")
    if sample_weight < 0:
        raise InadmissibleParameterError(f"sample weight must be nonnegative, got {sample_weight}")
    if sample_weight == 0:
        return linear_probe(dataset, source, l2, seed)
    src = _train_rows(dataset, source)
    _check_source(src, source)
    tgt = _train_rows(dataset, target)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    features = np.concatenate([src.features, tgt.features])
    labels = np.concatenate([src.labels, wrong_labels(tgt.labels, dataset.n_labels, rng)])
    weights = np.concatenate([np.ones(len(src)), np.full(len(tgt), sample_weight)])
    return fit_logistic(features, labels, dataset.n_labels, l2, weights, seed=seed)


def domain_probe_accuracy(dataset: EmbeddingDataset, seed: int = 0) -> float:
    """Held-out accuracy of a logistic domain classifier on the raw features."""
    train = dataset.subset(split=Split.TRAIN)
    held = dataset.subset(split=Split.VAL)
    held = held if len(held) else train
    clf = fit_logistic(train.features, train.domains, dataset.n_domains, seed=seed)
    return clf.accuracy(held.features, held.domains)


class ProbeMode(str, Enum):
    AVG = "avg"
    WORST = "worst"


class PairMetric(BaseModel):
    source: int
    target: int
    seed: int
    accuracy: float = Field(ge=0.0, le=1.0)
    log_likelihood: float


class PairSummary(BaseModel):
    source: int
    target: int
    accuracy_mean: float
    accuracy_se: float
    log_likelihood_mean: float
    log_likelihood_se: float
    n_seeds: int


class Aggregate(BaseModel):
    mean: float
    se: float


class ProbeResult(BaseModel):
    """Per-pair metrics plus seed-level aggregates over off-diagonal pairs."""

    mode: ProbeMode
    seeds: list[int]
    pairs: list[PairSummary]
    target_accuracy_avg: Aggregate
    target_accuracy_worst: Aggregate
    target_log_likelihood_avg: Aggregate
    target_log_likelihood_worst: Aggregate
    source_accuracy: Aggregate
    source_log_likelihood: Aggregate

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([p.model_dump() for p in self.pairs])


def _standard_error(values: np.ndarray) -> float:
    return float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0


def _aggregate(values: list[float]) -> Aggregate:
    arr = np.asarray(values, dtype=np.float64)
    return Aggregate(mean=float(arr.mean()), se=_standard_error(arr))


def _probe_pair(
    task: tuple[EmbeddingDataset, int, int, int, ProbeMode, float | None, float],
) -> PairMetric:
    dataset, source, target, seed, mode, l2, sample_weight = task
    strength = l2 if l2 is not None else select_l2(dataset, source, seed=seed)
    if mode is ProbeMode.WORST and source != target:
        clf = worst_case_probe(dataset, source, target, sample_weight, strength, seed)
    else:
        clf = linear_probe(dataset, source, strength, seed)
    held = _eval_rows(dataset, target)
    return PairMetric(
        source=source,
        target=target,
        seed=seed,
        accuracy=clf.accuracy(held.features, held.labels),
        log_likelihood=clf.log_likelihood(held.features, held.labels),
    )


def _summaries(metrics: list[PairMetric], n_domains: int) -> list[PairSummary]:
    out = []
    for s in range(n_domains):
        for t in range(n_domains):
            acc = np.array([m.accuracy for m in metrics if (m.source, m.target) == (s, t)])
            ll = np.array([m.log_likelihood for m in metrics if (m.source, m.target) == (s, t)])
            out.append(
                PairSummary(
                    source=s,
                    target=t,
                    accuracy_mean=float(acc.mean()),
                    accuracy_se=_standard_error(acc),
                    log_likelihood_mean=float(ll.mean()),
                    log_likelihood_se=_standard_error(ll),
                    n_seeds=int(acc.size),
                )
            )
    return out


def evaluate_all_pairs(
    dataset: EmbeddingDataset,
    mode: ProbeMode = ProbeMode.AVG,
    seeds: list[int] | None = None,
    l2: float | None = None,
    sample_weight: float = DEFAULT_WRONG_LABEL_WEIGHT,
    jobs: int = 1,
    targets: list[int] | None = None,
) -> ProbeResult:
    """Probe every (source, target) pair, diagonal included, for each seed.

    ``l2=None`` selects the strength per source with :func:`select_l2`. Each
    pair's random streams depend only on the seed, so relabeling domains only
    permutes the grid. ``targets`` restricts the off-diagonal aggregates.

    Raises:
        InadmissibleParameterError: If the dataset has fewer than two domains
            or ``targets`` is empty or names an unknown domain
    """
    n = dataset.n_domains
    if n < 2:
        raise InadmissibleParameterError(f"pair evaluation needs at least two domains, got {n}")
    if targets is not None and (not targets or any(not 0 <= t < n for t in targets)):
        raise InadmissibleParameterError(f"targets must be domains in [0, {n}), got {targets}")
    seeds = seeds or [0]
    tasks = [
        (dataset, s, t, seed, mode, l2, sample_weight)
        for seed in seeds
        for s in range(n)
        for t in range(n)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            metrics = list(pool.map(_probe_pair, tasks))
    else:
        metrics = [_probe_pair(t) for t in tasks]

    wanted = set(range(n) if targets is None else targets)
    per_seed: dict[str, list[float]] = {k: [] for k in ("aa", "aw", "la", "lw", "sa", "sl")}
    for seed in seeds:
        mine = [m for m in metrics if m.seed == seed]
        off = [m for m in mine if m.source != m.target and m.target in wanted]
        diag = [m for m in mine if m.source == m.target]
        per_seed["aa"].append(float(np.mean([m.accuracy for m in off])))
        per_seed["aw"].append(min(m.accuracy for m in off))
        per_seed["la"].append(float(np.mean([m.log_likelihood for m in off])))
        per_seed["lw"].append(min(m.log_likelihood for m in off))
        per_seed["sa"].append(float(np.mean([m.accuracy for m in diag])))
        per_seed["sl"].append(float(np.mean([m.log_likelihood for m in diag])))
    logger.info(f"Evaluated {len(tasks)} probes ({mode.value}) over {len(seeds)} seeds")
    return ProbeResult(
        mode=mode,
        seeds=seeds,
        pairs=_summaries(metrics, n),
        target_accuracy_avg=_aggregate(per_seed["aa"]),
        target_accuracy_worst=_aggregate(per_seed["aw"]),
        target_log_likelihood_avg=_aggregate(per_seed["la"]),
        target_log_likelihood_worst=_aggregate(per_seed["lw"]),
        source_accuracy=_aggregate(per_seed["sa"]),
        source_log_likelihood=_aggregate(per_seed["sl"]),
    )
