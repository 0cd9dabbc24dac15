"""Augmenters p(A|X): domain-agnostic and Bayes-preserving checks, maximal invariants, regimes."""

import logging
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from idg_lab.constants import (
    ACTION_TOL,
    DEFAULT_APPROX_DA_MIX,
    DEFAULT_ENUMERATION_BUDGET,
    DEFAULT_NOISE_KEEP,
    RISK_TOL,
    SUPPORT_TOL,
)
from idg_lab.theory.encoder_risk import Encoder, idg_risk, support_match, target_bayes_risk
from idg_lab.theory.finite_prob import CondKernel, JointTable, dedup_rows, mutual_information
from idg_lab.theory.oracle import enumerate_det_encoders, encoder_index, risks_equal
from idg_lab.theory.world import World, bayes_predictor, validate_world
from idg_lab.utils.arrays import IntArray
from idg_lab.utils.error_handler import AssumptionViolationError, DimensionMismatchError

logger = logging.getLogger("idg_lab.augmentation")


class Augmenter(BaseModel):
    """Stochastic map p(A|X) as an [n_inputs x n_augmentations] kernel."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kernel: CondKernel

    @property
    def n_inputs(self) -> int:
        return self.kernel.n_in

    @property
    def n_augmentations(self) -> int:
        return self.kernel.n_out


class InvariantPartition(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    class_ids: IntArray
    n_classes: int


class AgnosticCheck(BaseModel):
    """Outcome of the domain-agnostic check; the witness names a domain lacking a conditional."""

    passed: bool
    domain: int | None = None
    missing_row: list[float] | None = None


class BayesPreservingCheck(BaseModel):
    passed: bool
    pair: tuple[int, int] | None = None


def _check_augmenter(w: World, a: Augmenter) -> None:
    if a.n_inputs != w.n_inputs:
        raise DimensionMismatchError("augmenter inputs", w.n_inputs, a.n_inputs)


def maximal_invariant(a: Augmenter) -> InvariantPartition:
    """Group inputs whose augmentation conditionals coincide; ids by first occurrence."""
    class_ids, reps = dedup_rows(a.kernel.rows, ACTION_TOL)
    return InvariantPartition(class_ids=class_ids, n_classes=len(reps))


def check_domain_agnostic(w: World, a: Augmenter) -> AgnosticCheck:
    """Every domain sees the same set of augmentation conditionals as supp p(X) does."""
    _check_augmenter(w, a)
    rows = a.kernel.rows
    overall = np.flatnonzero(w.input_marginal() > SUPPORT_TOL)
    for d in range(w.n_domains):
        local = rows[w.p_x_given_d.rows[d] > SUPPORT_TOL]
        for x in overall:
            if not np.any(np.max(np.abs(local - rows[x]), axis=1) <= ACTION_TOL):
                return AgnosticCheck(passed=False, domain=d, missing_row=rows[x].tolist())
    return AgnosticCheck(passed=True)


def check_bayes_preserving(w: World, a: Augmenter) -> BayesPreservingCheck:
    """Equal augmentation conditionals imply equal Bayes actions on supp p(X)."""
    _check_augmenter(w, a)
    actions = np.asarray(bayes_predictor(w).actions)
    rows = a.kernel.rows
    supported = np.flatnonzero(w.input_marginal() > SUPPORT_TOL)
    for i, x in enumerate(supported):
        for x2 in supported[i + 1 :]:
            same_rows = np.max(np.abs(rows[x] - rows[x2])) <= ACTION_TOL
            if same_rows and np.max(np.abs(actions[x] - actions[x2])) > ACTION_TOL:
                return BayesPreservingCheck(passed=False, pair=(int(x), int(x2)))
    return BayesPreservingCheck(passed=True)


def exact_mi_ax(w: World, a: Augmenter) -> float:
    """I(A;X) under the world's input marginal."""
    _check_augmenter(w, a)
    return mutual_information(JointTable(mass=w.input_marginal()[:, None] * a.kernel.rows))


def exact_mi_az(w: World, a: Augmenter, e: Encoder) -> float:
    """I(A;Z) from the joint sum_x p(x) p(a|x) p(z|x); A and Z are independent given X."""
    _check_augmenter(w, a)
    if e.n_inputs != w.n_inputs:
        raise DimensionMismatchError("encoder inputs", w.n_inputs, e.n_inputs)
    mass = np.einsum("x,xa,xz->az", w.input_marginal(), a.kernel.rows, e.kernel.rows)
    return mutual_information(JointTable(mass=mass))


class RegimeKind(str, Enum):
    SUPERVISED = "supervised"
    SINGLE_DOM = "singledom"
    INTRA_DOM = "intradom"
    APPROX_DA = "approxda"
    STANDARD = "standard"


class RegimeSpec(BaseModel):
    """Augmentation regime; ``domain`` is used by singledom, ``mix`` by approxda, ``noise`` by standard."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    regime: RegimeKind
    domain: int | None = Field(default=None, ge=0)
    mix: float = Field(default=DEFAULT_APPROX_DA_MIX, ge=0.0, le=1.0)
    noise: CondKernel | None = None

    @model_validator(mode="after")
    def _check_domain(self) -> "RegimeSpec":
        if self.regime is RegimeKind.SINGLE_DOM and self.domain is None:
            raise ValueError("the singledom regime needs a domain")
        return self


def _bayes_classes(w: World) -> np.ndarray:
    class_ids, _ = dedup_rows(np.asarray(bayes_predictor(w).actions), ACTION_TOL)
    return class_ids


def _restricted_row(weights: np.ndarray, allowed: np.ndarray) -> np.ndarray | None:
    row = np.where(allowed, weights, 0.0)
    total = row.sum()
    return None if total <= SUPPORT_TOL else row / total


def _supervised_rows(w: World, classes: np.ndarray) -> np.ndarray:
    p_x = w.input_marginal()
    rows = []
    for x in range(w.n_inputs):
        row = _restricted_row(p_x, classes == classes[x])
        if row is None:
            raise AssumptionViolationError(f"input {x} has an empty augmentation set")
        rows.append(row)
    return np.stack(rows)


def _single_domain_rows(w: World, classes: np.ndarray, domain: int) -> np.ndarray:
    p_x = w.p_x_given_d.rows[domain]
    rows = []
    for x in range(w.n_inputs):
        row = _restricted_row(p_x, classes == classes[x])
        if row is None:
            raise AssumptionViolationError(
                f"input {x} has an empty augmentation set in domain {domain}"
            )
        rows.append(row)
    return np.stack(rows)


def _intra_domain_rows(w: World, classes: np.ndarray) -> np.ndarray:
    """Mixture over the input's domains (weighted by p(d|x)) of same-class, same-domain rows."""
    joint_dx = w.p_d.probs[:, None] * w.p_x_given_d.rows
    rows = []
    for x in range(w.n_inputs):
        # inputs outside supp p(X) fall back to the domain prior
        weights = joint_dx[:, x] if joint_dx[:, x].sum() > SUPPORT_TOL else w.p_d.probs
        row = np.zeros(w.n_inputs)
        used = 0.0
        for d in np.flatnonzero(weights > SUPPORT_TOL):
            local = _restricted_row(w.p_x_given_d.rows[d], classes == classes[x])
            if local is not None:
                row += weights[d] * local
                used += weights[d]
        if used <= SUPPORT_TOL:
            raise AssumptionViolationError(f"input {x} has an empty augmentation set")
        rows.append(row / used)
    return np.stack(rows)


def within_domain_noise(w: World, keep: float = DEFAULT_NOISE_KEEP) -> CondKernel:
    """Stay put with probability ``keep``, else move uniformly to another input sharing a domain."""
    if not 0.0 <= keep <= 1.0:
        raise ValueError(f"keep must lie in [0, 1], got {keep}")
    supports = w.p_x_given_d.rows > SUPPORT_TOL
    rows = np.zeros((w.n_inputs, w.n_inputs))
    for x in range(w.n_inputs):
        neighbours = supports[supports[:, x]].any(axis=0)
        neighbours[x] = False
        if neighbours.any():
            rows[x, neighbours] = (1.0 - keep) / neighbours.sum()
            rows[x, x] = keep
        else:
            rows[x, x] = 1.0
    return CondKernel(rows=rows)


def build_regime_augmenter(w: World, r: RegimeSpec) -> Augmenter:
    """Augmenter of a regime; A ranges over inputs (A = X').

    Raises:
        AssumptionViolationError: If some input has an empty augmentation set
    """
    classes = _bayes_classes(w)
    if r.regime is RegimeKind.SUPERVISED:
        rows = _supervised_rows(w, classes)
    elif r.regime is RegimeKind.SINGLE_DOM:
        assert r.domain is not None
        if r.domain >= w.n_domains:
            raise DimensionMismatchError("domain id bound", w.n_domains, r.domain)
        rows = _single_domain_rows(w, classes, r.domain)
    elif r.regime is RegimeKind.INTRA_DOM:
        rows = _intra_domain_rows(w, classes)
    elif r.regime is RegimeKind.APPROX_DA:
        rows = r.mix * _supervised_rows(w, classes) + (1.0 - r.mix) * _intra_domain_rows(w, classes)
    else:
        noise = r.noise if r.noise is not None else within_domain_noise(w)
        if noise.rows.shape != (w.n_inputs, w.n_inputs):
            raise DimensionMismatchError("noise kernel side", w.n_inputs, noise.n_in)
        rows = noise.rows
    return Augmenter(kernel=CondKernel(rows=rows))


class SslPropReport(BaseModel):
    """Whether every support-matched maximizer of I(A;Z) is IDG-optimal."""

    applicable: bool
    reason: str = ""
    n_classes: int = 0
    max_mi: float | None = None
    maximizers: list[int] = []
    maximizer_idg: list[float] = []
    target_bayes_risk: float | None = None
    bucketing_index: int | None = None
    bucketing_is_maximizer: bool = False
    all_optimal: bool = False


def verify_ssl_prop(
    w: World, a: Augmenter, n_codes: int, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> SslPropReport:
    """Exhaustive check that augmentation-MI maximizers under support match are IDG-optimal.

    Raises:
        BudgetExceededError: If the enumeration is too large
    """
    assumptions = validate_world(w)
    if not assumptions.passed:
        return SslPropReport(applicable=False, reason=f"assumptions fail: {', '.join(assumptions.failed())}")
    agnostic = check_domain_agnostic(w, a)
    if not agnostic.passed:
        return SslPropReport(
            applicable=False, reason=f"augmenter is not domain-agnostic (domain {agnostic.domain})"
        )
    preserving = check_bayes_preserving(w, a)
    if not preserving.passed:
        return SslPropReport(
            applicable=False, reason=f"augmenter is not Bayes-preserving (inputs {preserving.pair})"
        )
    partition = maximal_invariant(a)
    if n_codes < partition.n_classes:
        return SslPropReport(
            applicable=False,
            reason=f"{n_codes} codes cannot hold {partition.n_classes} invariant classes",
            n_classes=partition.n_classes,
        )

    scored: list[tuple[int, float, Encoder]] = []
    for index, e in enumerate(enumerate_det_encoders(w.n_inputs, n_codes, budget)):
        if support_match(w, e):
            scored.append((index, exact_mi_az(w, a, e), e))
    max_mi = max(mi for _, mi, _ in scored)
    maximizers = [(index, e) for index, mi, e in scored if mi >= max_mi - RISK_TOL]
    risks = [idg_risk(w, e).idg_risk for _, e in maximizers]
    bayes_t = target_bayes_risk(w)
    bucketing = encoder_index(partition.class_ids.tolist(), n_codes)
    indices = [index for index, _ in maximizers]
    all_optimal = all(risks_equal(r, bayes_t) for r in risks)
    if not all_optimal:
        logger.warning(f"{sum(not risks_equal(r, bayes_t) for r in risks)} MI maximizers are not IDG-optimal")
    return SslPropReport(
        applicable=True,
        n_classes=partition.n_classes,
        max_mi=max_mi,
        maximizers=indices,
        maximizer_idg=risks,
        target_bayes_risk=bayes_t,
        bucketing_index=bucketing,
        bucketing_is_maximizer=bucketing in indices,
        all_optimal=all_optimal,
    )
