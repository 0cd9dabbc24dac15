"""Task losses (cross-entropy, InfoNCE) and domain bottlenecks (CAD, CondCAD, Ent, MI).

Every loss is ``task + lam * supp`` built on one tape. Critic scores are
inner products divided by the temperature, including the tied scores inside
the CAD pools. The score-level entry points (``infonce_from_scores``,
``cad_from_scores``, ``cad_posterior``) accept any critic.
"""

import logging
import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import logsumexp

from idg_lab.autodiff import tensor as T
from idg_lab.autodiff.tensor import Tape, Tensor
from idg_lab.constants import DEFAULT_TEMPERATURE, LIKELIHOOD_FLOOR, SUPPORT_TOL
from idg_lab.learning.nets import Encoding, LinearHead, NetSpec, Params, critic_net, encode_tensor
from idg_lab.utils.arrays import FloatArray, IntArray
from idg_lab.utils.error_handler import (
    DimensionMismatchError,
    FullyMaskedSliceError,
    ObjectiveConfigError,
    ShapeMismatchError,
)

logger = logging.getLogger("idg_lab.objectives")


class CriticMode(str, Enum):
    TIED = "tied"
    SEPARATE = "separate"


class CriticSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: CriticMode = CriticMode.TIED
    temperature: float = Field(default=DEFAULT_TEMPERATURE, gt=0.0)


class ObjectiveKind(str, Enum):
    CE = "ce"
    INFONCE = "infonce"


class BottleneckKind(str, Enum):
    NONE = "none"
    CAD = "cad"
    CCAD = "ccad"
    ENT = "ent"
    MI = "mi"


class BottleneckSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: BottleneckKind = BottleneckKind.NONE
    lam: float = Field(default=0.0, ge=0.0)

    @property
    def active(self) -> bool:
        """A bottleneck with zero weight is not evaluated at all."""
        return self.kind is not BottleneckKind.NONE and self.lam > 0

    @property
    def uses_domains(self) -> bool:
        return self.active and self.kind in (BottleneckKind.CAD, BottleneckKind.CCAD)


class ObjectiveSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    objective: ObjectiveKind = ObjectiveKind.CE
    bottleneck: BottleneckSpec = BottleneckSpec()
    critic: CriticSpec = CriticSpec()


class EntropyModel(BaseModel):
    """Factorized logistic density over unit-width bins, one (mu, scale) per dimension."""

    model_config = ConfigDict(frozen=True)

    z_dim: int
    init_scale: float = 1.0

    @model_validator(mode="after")
    def _check_scale(self) -> "EntropyModel":
        if not self.init_scale > 0:
            raise ObjectiveConfigError(f"entropy model scale must be positive, got {self.init_scale}")
        return self

    def init(self) -> Params:
        return {
            "ent/mu": np.zeros(self.z_dim),
            "ent/log_scale": np.full(self.z_dim, math.log(self.init_scale)),
        }

    def nll(self, tape: Tape, params: Params, z: Tensor) -> Tensor:
        """Per-row -log q(z), summed over dimensions."""
        mu = tape.parameter("ent/mu", params["ent/mu"])
        inv_scale = T.exp(T.neg(tape.parameter("ent/log_scale", params["ent/log_scale"])))
        centred = z - mu
        upper = T.sigmoid(T.mul(centred + 0.5, inv_scale))
        lower = T.sigmoid(T.mul(centred - 0.5, inv_scale))
        return T.neg(T.sum(T.log((upper - lower) + LIKELIHOOD_FLOOR), axis=1))


class GaussianPrior(BaseModel):
    """Learned diagonal Gaussian q(Z)."""

    model_config = ConfigDict(frozen=True)

    z_dim: int
    init_var: float = 1.0

    @model_validator(mode="after")
    def _check_var(self) -> "GaussianPrior":
        if not self.init_var > 0:
            raise ObjectiveConfigError(f"prior variance must be positive, got {self.init_var}")
        return self

    def init(self) -> Params:
        return {
            "prior/mu": np.zeros(self.z_dim),
            "prior/logvar": np.full(self.z_dim, math.log(self.init_var)),
        }


class Batch(BaseModel):
    """Inputs, positive views, domains and optional labels; other rows are the negatives."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: FloatArray
    a: FloatArray | None = None
    domains: IntArray
    labels: IntArray | None = None

    @model_validator(mode="after")
    def _check_sizes(self) -> "Batch":
        b = self.x.shape[0]
        if b < 2:
            raise ValueError(f"a batch needs at least two rows, got {b}")
        sizes = [self.domains.shape[0]]
        if self.a is not None:
            sizes.append(self.a.shape[0])
        if self.labels is not None:
            sizes.append(self.labels.shape[0])
        if any(s != b for s in sizes):
            raise ValueError(f"batch fields disagree on the leading dimension: {[b, *sizes]}")
        return self

    @property
    def size(self) -> int:
        return int(self.x.shape[0])


class LossTerms(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    total: Tensor
    task: Tensor
    supp: Tensor | None = None
    bound: float | None = None

    def values(self) -> dict[str, float]:
        return {
            "aug": self.task.item(),
            "supp": self.supp.item() if self.supp is not None else 0.0,
            "total": self.total.item(),
        }


def check_compatible(spec: ObjectiveSpec, net: NetSpec, labels_available: bool) -> None:
    """Reject objective, bottleneck and encoder combinations that cannot be trained.

    Raises:
        ObjectiveConfigError: On an invalid combination
    """
    kind = spec.bottleneck.kind
    if kind is BottleneckKind.ENT and net.stochastic:
        raise ObjectiveConfigError("the ent bottleneck needs a deterministic encoder")
    if kind is BottleneckKind.MI and not net.stochastic:
        raise ObjectiveConfigError("the mi bottleneck needs a stochastic (Gaussian) encoder")
    if kind is BottleneckKind.CCAD and not labels_available:
        raise ObjectiveConfigError("the ccad bottleneck needs labels")
    if spec.objective is ObjectiveKind.CE and not labels_available:
        raise ObjectiveConfigError("the ce objective needs labels")


def init_params(spec: ObjectiveSpec, net: NetSpec, n_labels: int, rng: np.random.Generator) -> Params:
    params = net.body().init(rng)
    if spec.objective is ObjectiveKind.CE:
        params.update(LinearHead(z_dim=net.z_dim, n_labels=n_labels).init(rng))
    elif spec.critic.mode is CriticMode.SEPARATE:
        params.update(critic_net(net).init(rng))
    if not spec.bottleneck.active:
        return params
    if spec.bottleneck.kind is BottleneckKind.ENT:
        params.update(EntropyModel(z_dim=net.z_dim).init())
    if spec.bottleneck.kind is BottleneckKind.MI:
        params.update(GaussianPrior(z_dim=net.z_dim).init())
    return params


def _keys(tape: Tape, params: Params, batch: Batch, net: NetSpec, critic: CriticSpec) -> Tensor:
    if batch.a is None:
        raise ObjectiveConfigError("infonce needs positive views in the batch")
    a = tape.constant(batch.a)
    if critic.mode is CriticMode.TIED:
        return encode_tensor(net, tape, params, a).mean
    return critic_net(net).forward(tape, params, a)


def infonce_from_scores(scores: Tensor) -> tuple[Tensor, float]:
    """Mean InfoNCE loss of a square critic-score matrix and its bound log(b) - loss.

    ``scores[i, j]`` scores query i against key j; the positive pairs sit on
    the diagonal and every other key of a row is a negative.

    Raises:
        ShapeMismatchError: If ``scores`` is not square
    """
    b, n_keys = scores.shape
    if b != n_keys:
        raise ShapeMismatchError(f"InfoNCE needs one key per query, got scores of shape {scores.shape}")
    loss = T.mean(T.softmax_cross_entropy(scores, np.arange(b)))
    return loss, math.log(b) - loss.item()


def infonce_term(z: Tensor, keys: Tensor, temperature: float) -> tuple[Tensor, float]:
    """Mean InfoNCE loss with in-batch negatives and the bound log(b) - loss."""
    return infonce_from_scores(T.scale(T.matmul(z, T.transpose(keys)), 1.0 / temperature))


def ce_term(tape: Tape, params: Params, z: Tensor, labels: np.ndarray, n_labels: int) -> Tensor:
    logits = LinearHead(z_dim=z.shape[1], n_labels=n_labels).forward(tape, params, z)
    return T.mean(T.softmax_cross_entropy(logits, labels))


def cross_domain_weights(
    x: np.ndarray, domains: np.ndarray, labels: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Numerator weights and denominator pools of the CAD ratio.

    Pools are j != i (and same label when ``labels`` is given). The weight of
    j in i's numerator is the count estimate of P(D != D_i | X_j), which is the
    indicator D_j != D_i when inputs are distinct.
    """
    b = x.shape[0]
    pool = ~np.eye(b, dtype=bool)
    if labels is not None:
        pool &= labels[:, None] == labels[None, :]
    groups = np.unique(x, axis=0, return_inverse=True)[1].reshape(-1)
    n_domains = int(domains.max()) + 1
    counts = np.zeros((groups.max() + 1, n_domains))
    np.add.at(counts, (groups, domains), 1.0)
    p_d_given_x = counts[groups] / counts[groups].sum(axis=1, keepdims=True)  # [j, d]
    same = p_d_given_x[:, domains].T  # [i, j] = p(D_i | X_j)
    weights = np.where(pool, 1.0 - same, 0.0)
    weights[weights <= SUPPORT_TOL] = 0.0
    return weights, pool


def cad_posterior(
    scores: np.ndarray,
    domains: np.ndarray,
    n_domains: int | None = None,
    pool: np.ndarray | None = None,
) -> np.ndarray:
    """Implied q(D | query) per row: the softmax mass each domain holds in the row's pool.

    ``scores[i, j]`` scores query i against key j, drawn from domain
    ``domains[j]``. The default pool drops j == i for square scores and keeps
    every key otherwise.

    Raises:
        DimensionMismatchError: If ``domains`` does not match the key count
        ShapeMismatchError: If ``pool`` and ``scores`` differ in shape
        FullyMaskedSliceError: If a row's pool is empty
    """
    m, b = scores.shape
    if domains.shape[0] != b:
        raise DimensionMismatchError("key domains", b, domains.shape[0])
    if pool is None:
        pool = ~np.eye(m, b, dtype=bool) if m == b else np.ones((m, b), dtype=bool)
    if pool.shape != scores.shape:
        raise ShapeMismatchError(f"pool of shape {pool.shape} for scores of shape {scores.shape}")
    empty = np.flatnonzero(~pool.any(axis=1))
    if empty.size:
        raise FullyMaskedSliceError(f"rows {empty.tolist()} have an empty pool")
    masked = np.where(pool, scores, -np.inf)
    probs = np.exp(masked - logsumexp(masked, axis=1, keepdims=True))
    n_domains = n_domains or int(domains.max()) + 1
    return probs @ np.eye(n_domains)[domains]


def cad_from_scores(scores: Tensor, weights: np.ndarray, pool: np.ndarray) -> Tensor:
    """Mean over rows of -log(cross-domain mass / pool mass) for a square score matrix.

    ``weights`` and ``pool`` come from :func:`cross_domain_weights`. Rows with
    no cross-domain weight contribute 0.
    """
    rows = np.flatnonzero(weights.any(axis=1))
    b = scores.shape[0]
    empty = b - rows.size
    if empty:
        logger.warning(f"{empty} of {b} samples have an empty cross-domain pool; they add 0")
    if rows.size == 0:
        return scores.tape.constant(0.0)
    picked = T.gather(scores, rows)
    w = weights[rows]
    log_w = scores.tape.constant(np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), 0.0))
    numerator = T.masked_logsumexp(picked + log_w, w > 0, axis=1)
    denominator = T.masked_logsumexp(picked, pool[rows], axis=1)
    return T.scale(T.sum(denominator - numerator), 1.0 / b)


def cad_term(z: Tensor, batch: Batch, temperature: float, conditional: bool = False) -> Tensor:
    """CAD (or CondCAD) bottleneck under tied scores z_i . z_j / temperature.

    Rows whose cross-domain pool is empty contribute 0.
    """
    labels = batch.labels if conditional else None
    weights, pool = cross_domain_weights(batch.x, batch.domains, labels)
    return cad_from_scores(T.scale(T.matmul(z, T.transpose(z)), 1.0 / temperature), weights, pool)


def ent_term(tape: Tape, params: Params, z: Tensor, noise: np.ndarray) -> Tensor:
    """Mean rate -log q(z + u) with u ~ U(-1/2, 1/2) drawn outside the tape."""
    model = EntropyModel(z_dim=z.shape[1])
    return T.mean(model.nll(tape, params, z + tape.constant(noise)))


def mi_term(tape: Tape, params: Params, enc: Encoding) -> Tensor:
    """Mean KL(p(Z|x) || q(Z)) against the learned prior."""
    assert enc.logvar is not None
    prior_mu = tape.parameter("prior/mu", params["prior/mu"])
    prior_logvar = tape.parameter("prior/logvar", params["prior/logvar"])
    return T.mean(T.gaussian_kl(enc.mean, enc.logvar, prior_mu, prior_logvar))


def sample_z(tape: Tape, enc: Encoding, eps: np.ndarray | None) -> Tensor:
    """Reparameterized sample for stochastic encodings; the mean otherwise."""
    if enc.logvar is None:
        return enc.mean
    if eps is None:
        raise ObjectiveConfigError("a stochastic encoder needs reparameterization noise")
    return enc.mean + T.mul(T.exp(T.scale(enc.logvar, 0.5)), tape.constant(eps))


def _combine(task: Tensor, supp: Tensor | None, lam: float, bound: float | None) -> LossTerms:
    total = task if supp is None else task + T.scale(supp, lam)
    return LossTerms(total=total, task=task, supp=supp, bound=bound)


def _encode(tape: Tape, params: Params, batch: Batch, net: NetSpec) -> Encoding:
    return encode_tensor(net, tape, params, tape.constant(batch.x))


def infonce_loss(
    tape: Tape, params: Params, batch: Batch, net: NetSpec, critic: CriticSpec
) -> LossTerms:
    z = _encode(tape, params, batch, net).mean
    task, bound = infonce_term(z, _keys(tape, params, batch, net, critic), critic.temperature)
    return _combine(task, None, 0.0, bound)


def cad_loss(
    tape: Tape, params: Params, batch: Batch, net: NetSpec, critic: CriticSpec, lam: float
) -> LossTerms:
    z = _encode(tape, params, batch, net).mean
    task, bound = infonce_term(z, _keys(tape, params, batch, net, critic), critic.temperature)
    return _combine(task, cad_term(z, batch, critic.temperature), lam, bound)


def ccad_loss(
    tape: Tape, params: Params, batch: Batch, net: NetSpec, critic: CriticSpec, lam: float
) -> LossTerms:
    """CAD with pools restricted to same-label samples.

    Raises:
        ObjectiveConfigError: If the batch carries no labels
    """
    if batch.labels is None:
        raise ObjectiveConfigError("the ccad bottleneck needs labels")
    z = _encode(tape, params, batch, net).mean
    task, bound = infonce_term(z, _keys(tape, params, batch, net, critic), critic.temperature)
    return _combine(task, cad_term(z, batch, critic.temperature, conditional=True), lam, bound)


def ent_loss(
    tape: Tape,
    params: Params,
    batch: Batch,
    net: NetSpec,
    critic: CriticSpec,
    lam: float,
    noise: np.ndarray,
) -> LossTerms:
    if net.stochastic:
        raise ObjectiveConfigError("the ent bottleneck needs a deterministic encoder")
    z = _encode(tape, params, batch, net).mean
    task, bound = infonce_term(z, _keys(tape, params, batch, net, critic), critic.temperature)
    return _combine(task, ent_term(tape, params, z, noise), lam, bound)


def mi_loss(
    tape: Tape,
    params: Params,
    batch: Batch,
    net: NetSpec,
    critic: CriticSpec,
    lam: float,
    eps: np.ndarray,
) -> LossTerms:
    if not net.stochastic:
        raise ObjectiveConfigError("the mi bottleneck needs a stochastic (Gaussian) encoder")
    enc = _encode(tape, params, batch, net)
    z = sample_z(tape, enc, eps)
    task, bound = infonce_term(z, _keys(tape, params, batch, net, critic), critic.temperature)
    return _combine(task, mi_term(tape, params, enc), lam, bound)


def objective_loss(
    tape: Tape,
    params: Params,
    batch: Batch,
    net: NetSpec,
    spec: ObjectiveSpec,
    n_labels: int,
    rng: np.random.Generator,
) -> LossTerms:
    """Task loss plus the weighted bottleneck for one training batch.

    Noise for stochastic encoders and the entropy model is drawn from ``rng``.
    """
    enc = _encode(tape, params, batch, net)
    eps = rng.standard_normal(enc.mean.shape) if net.stochastic else None
    z = sample_z(tape, enc, eps)
    bound = None
    if spec.objective is ObjectiveKind.CE:
        if batch.labels is None:
            raise ObjectiveConfigError("the ce objective needs labels")
        task = ce_term(tape, params, z, batch.labels, n_labels)
    else:
        task, bound = infonce_term(z, _keys(tape, params, batch, net, spec.critic), spec.critic.temperature)

    bottleneck = spec.bottleneck
    supp = None
    if bottleneck.active:
        tau = spec.critic.temperature
        if bottleneck.kind is BottleneckKind.CAD:
            supp = cad_term(z, batch, tau)
        elif bottleneck.kind is BottleneckKind.CCAD:
            if batch.labels is None:
                raise ObjectiveConfigError("the ccad bottleneck needs labels")
            supp = cad_term(z, batch, tau, conditional=True)
        elif bottleneck.kind is BottleneckKind.ENT:
            supp = ent_term(tape, params, z, rng.uniform(-0.5, 0.5, size=z.shape))
        else:
            supp = mi_term(tape, params, enc)
    return _combine(task, supp, bottleneck.lam, bound)
