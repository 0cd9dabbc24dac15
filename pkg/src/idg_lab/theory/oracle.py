"""Brute-force checks of the optimality characterization and adversarial constructions."""

import itertools
import logging
import math
from collections.abc import Iterator, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from idg_lab.constants import (
    ACTION_TOL,
    DEFAULT_ENUMERATION_BUDGET,
    DPI_TOL,
    RISK_TOL,
    SUPPORT_TOL,
)
from idg_lab.theory.encoder_risk import (
    Encoder,
    FamilyKind,
    code_families,
    domain_pair_risk,
    idg_risk,
    induced_joint,
    risk_from_z,
    support_match,
    target_bayes_risk,
)
from idg_lab.theory.finite_prob import CondKernel, FiniteDist, dedup_rows
from idg_lab.theory.losses import LossSpec, one_hot
from idg_lab.theory.world import (
    DomainSlice,
    World,
    bayes_predictor,
    bayes_risk_from_x,
    validate_world,
)
from idg_lab.utils.arrays import ExtendedReal
from idg_lab.utils.error_handler import (
    AssumptionViolationError,
    BudgetExceededError,
    InadmissibleParameterError,
    InsufficientCodesError,
    NoQualifyingInputError,
)
from idg_lab.utils.retry import RejectedSample, sample_until_accepted

logger = logging.getLogger("idg_lab.oracle")

ZERO_ONE = LossSpec.zero_one()


def risks_equal(a: float, b: float, tol: float = RISK_TOL) -> bool:
    """Equality on the extended reals; +inf equals only +inf."""
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol


def encoder_count(n_inputs: int, n_codes: int) -> int:
    return n_codes**n_inputs


def encoder_index(codes: Sequence[int], n_codes: int) -> int:
    """Lexicographic id of a deterministic encoder (first input most significant)."""
    index = 0
    for code in codes:
        index = index * n_codes + int(code)
    return index


def enumerate_det_encoders(
    n_inputs: int, n_codes: int, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> Iterator[Encoder]:
    """Every deterministic encoder exactly once, in lexicographic order.

    Raises:
        BudgetExceededError: If n_codes ** n_inputs exceeds ``budget``
    """
    required = encoder_count(n_inputs, n_codes)
    if required > budget:
        raise BudgetExceededError(required, budget)
    for codes in itertools.product(range(n_codes), repeat=n_inputs):
        yield Encoder.from_assignment(codes, n_codes)


class TheoremReport(BaseModel):
    """Exhaustive comparison of IDG-optimal and characterized encoders."""

    applicable: bool
    reason: str = ""
    n_codes: int
    n_encoders: int = 0
    min_idg: ExtendedReal | None = None
    bayes_risk_x: ExtendedReal | None = None
    target_bayes_risk: ExtendedReal | None = None
    set_idg_optimal: list[int] = []
    set_char_optimal: list[int] = []
    equal: bool = False


def _not_applicable(n_codes: int, reason: str) -> TheoremReport:
    logger.info(f"Characterization check not applicable: {reason}")
    return TheoremReport(applicable=False, reason=reason, n_codes=n_codes)


def verify_theorem1(
    w: World, n_codes: int, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> TheoremReport:
    """Check that IDG-optimal encoders are exactly the risk-minimal, support-matched ones.

    IDG risks are compared against the target-weighted Bayes risk, which is
    the optimum when the pair law's target marginal differs from p(D).

    Raises:
        BudgetExceededError: If the enumeration is too large
    """
    report = validate_world(w)
    if not report.passed:
        return _not_applicable(n_codes, f"assumptions fail: {', '.join(report.failed())}")
    image_size = len(dedup_rows(_supported_actions(w))[1])
    if n_codes < image_size:
        return _not_applicable(n_codes, f"{n_codes} codes cannot hold |A*| = {image_size}")

    bayes_x = bayes_risk_from_x(w)
    bayes_t = target_bayes_risk(w)
    idg_values: list[float] = []
    characterized: list[int] = []
    for index, e in enumerate(enumerate_det_encoders(w.n_inputs, n_codes, budget)):
        idg_values.append(idg_risk(w, e).idg_risk)
        if risks_equal(risk_from_z(w, e), bayes_x) and support_match(w, e):
            characterized.append(index)
    min_idg = min(idg_values)
    optimal = [i for i, v in enumerate(idg_values) if risks_equal(v, min_idg)]
    equal = optimal == characterized and risks_equal(min_idg, bayes_t)
    if not equal:
        logger.warning(
            f"Characterization mismatch: {len(optimal)} IDG-optimal vs "
            f"{len(characterized)} characterized encoders"
        )
    return TheoremReport(
        applicable=True,
        n_codes=n_codes,
        n_encoders=len(idg_values),
        min_idg=min_idg,
        bayes_risk_x=bayes_x,
        target_bayes_risk=bayes_t,
        set_idg_optimal=optimal,
        set_char_optimal=characterized,
        equal=equal,
    )


def _supported_actions(w: World) -> np.ndarray:
    actions = np.asarray(bayes_predictor(w).actions)
    return actions[w.input_marginal() > SUPPORT_TOL]


def construct_optimal_encoder(w: World, n_codes: int) -> Encoder:
    """Deterministic encoder giving each Bayes-image element its own code.

    Inputs outside supp p(X) reuse the code of an equal Bayes action, else code 0.

    Raises:
        InsufficientCodesError: If n_codes < |A*|
    """
    actions = np.asarray(bayes_predictor(w).actions)
    supported = actions[w.input_marginal() > SUPPORT_TOL]
    _, reps = dedup_rows(supported)
    image = supported[reps]
    if n_codes < len(image):
        raise InsufficientCodesError(
            f"{n_codes} codes cannot embed a Bayes image of size {len(image)}"
        )
    codes = []
    for action in actions:
        gaps = np.max(np.abs(image - action), axis=1)
        codes.append(int(np.argmin(gaps)) if gaps.min() <= ACTION_TOL else 0)
    return Encoder.from_assignment(codes, n_codes)


class AdversarialTarget(BaseModel):
    """Target domain putting mass 1 - delta on ``x_star`` labelled ``label``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x_star: int
    label: int
    delta: float
    target: DomainSlice

    @property
    def p_x(self) -> FiniteDist:
        return self.target.p_x


class NoFreeLunchRecord(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    adversarial: AdversarialTarget
    constant_label: int
    q: float
    delta_bound: float
    encoder_sup_risk: float
    constant_sup_risk: float
    strict: bool


class WorstRepresentationRecord(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    adversarial: AdversarialTarget
    epsilon: float
    sup_risk: float
    lower_bound: float


def _adversarial_slice(
    source: DomainSlice, x_star: int, label: int, delta: float
) -> DomainSlice:
    """delta * p(X,Y|ds) plus mass 1 - delta on ``x_star`` with a point-mass label."""
    p_x = delta * source.p_x.probs
    p_x[x_star] += 1.0 - delta
    rows = np.array(source.p_y_given_x.rows)
    rows[x_star] = one_hot(label, source.n_labels)
    return DomainSlice(p_x=FiniteDist(probs=p_x), p_y_given_x=CondKernel(rows=rows))


def _constant_label(source: DomainSlice) -> int:
    p_y = source.p_x.probs @ source.p_y_given_x.rows
    modes = ZERO_ONE.optimal_actions(p_y)
    if len(modes) != 1:
        raise AssumptionViolationError("the source has no unique constant prediction")
    return int(np.argmax(modes[0]))


def _outside_inputs(source: DomainSlice) -> np.ndarray:
    outside = np.flatnonzero(source.p_x.probs <= SUPPORT_TOL)
    if outside.size <= 1:
        raise AssumptionViolationError(
            f"need more than one input outside the source support, found {outside.size}"
        )
    return outside


def non_constant_mass(source: DomainSlice, e: Encoder, constant_label: int) -> np.ndarray:
    """Per input, P(Z lands on a code where a source minimizer may predict other than the constant)."""
    families = code_families(source, e, ZERO_ONE)
    region = np.array(
        [
            f.kind is FamilyKind.FREE
            or any(int(np.argmax(a)) != constant_label for a in f.actions)
            for f in families
        ]
    )
    return e.kernel.rows @ region.astype(np.float64)


def no_free_lunch_input(
    source: DomainSlice, e: Encoder, good_target: DomainSlice
) -> tuple[int, int, float]:
    """Check the no-free-lunch hypotheses and pick the input to overload.

    Returns:
        The constant prediction a_C, the chosen outside input and its mass
        q on non-constant codes

    Raises:
        AssumptionViolationError: If the source or good target violates a hypothesis
        NoQualifyingInputError: If no outside input reaches the non-constant region
    """
    constant_label = _constant_label(source)
    outside = _outside_inputs(source)

    good_support = np.flatnonzero(good_target.p_x.probs > SUPPORT_TOL)
    if good_support.size == 0 or not np.isin(good_support, outside).all():
        raise AssumptionViolationError("good target support must lie outside the source support")
    good_labels = set()
    for x in good_support:
        modes = ZERO_ONE.optimal_actions(good_target.p_y_given_x.rows[x])
        if len(modes) != 1:
            raise AssumptionViolationError(f"good target label tie at input {int(x)}")
        good_labels.add(int(np.argmax(modes[0])))
    if len(good_labels) != source.n_labels:
        raise AssumptionViolationError(
            f"good target Bayes image covers {len(good_labels)} of {source.n_labels} labels"
        )

    q_per_input = non_constant_mass(source, e, constant_label)
    candidates = outside[q_per_input[outside] > SUPPORT_TOL]
    if candidates.size == 0:
        raise NoQualifyingInputError("no input outside the source support reaches a non-constant code")
    x_star = int(candidates[np.argmax(q_per_input[candidates])])

    constant = Encoder.constant(e.n_inputs)
    useful = domain_pair_risk(source, good_target, e, ZERO_ONE) < domain_pair_risk(
        source, good_target, constant, ZERO_ONE
    )
    if not useful:
        raise AssumptionViolationError("the encoder is not better than a constant on the good target")
    return constant_label, x_star, float(q_per_input[x_star])


def no_free_lunch_construct(
    source: DomainSlice, e: Encoder, good_target: DomainSlice, delta: float
) -> NoFreeLunchRecord:
    """Build a target on which ``e`` does strictly worse than a constant encoder (0-1 loss).

    Raises:
        AssumptionViolationError: If the source or good target violates a hypothesis
        NoQualifyingInputError: If no outside input reaches the non-constant region
        InadmissibleParameterError: If delta is outside (0, q / (1 + q))
    """
    constant_label, x_star, q = no_free_lunch_input(source, e, good_target)
    constant = Encoder.constant(e.n_inputs)
    bound = q / (1.0 + q)
    if not 0.0 < delta < bound:
        raise InadmissibleParameterError(f"delta {delta} outside the admissible interval (0, {bound})")

    target = _adversarial_slice(source, x_star, constant_label, delta)
    encoder_risk = domain_pair_risk(source, target, e, ZERO_ONE)
    constant_risk = domain_pair_risk(source, target, constant, ZERO_ONE)
    return NoFreeLunchRecord(
        adversarial=AdversarialTarget(x_star=x_star, label=constant_label, delta=delta, target=target),
        constant_label=constant_label,
        q=q,
        delta_bound=bound,
        encoder_sup_risk=encoder_risk,
        constant_sup_risk=constant_risk,
        strict=encoder_risk > constant_risk,
    )


def worst_representation_construct(
    source: DomainSlice, e: Encoder, epsilon: float, delta: float | None = None
) -> WorstRepresentationRecord:
    """Target on which every source minimizer from ``e`` is within epsilon of the worst 0-1 risk.

    ``delta`` defaults to epsilon / 2.

    Raises:
        NoQualifyingInputError: If every outside input shares codes with the source
        InadmissibleParameterError: If delta is outside (0, epsilon)
    """
    delta = epsilon / 2.0 if delta is None else delta
    if not 0.0 < delta < epsilon:
        raise InadmissibleParameterError(f"delta {delta} must lie in (0, {epsilon})")
    source_codes = source.p_x.probs @ e.kernel.rows > SUPPORT_TOL
    outside = np.flatnonzero(source.p_x.probs <= SUPPORT_TOL)
    disjoint = [
        int(x) for x in outside if not np.any((e.kernel.rows[x] > SUPPORT_TOL) & source_codes)
    ]
    if not disjoint:
        raise NoQualifyingInputError("no input is mapped outside the source code support")
    x_b = disjoint[0]
    source_inputs = np.flatnonzero(source.p_x.probs > SUPPORT_TOL)
    label = min(int(np.argmax(source.p_y_given_x.rows[x])) for x in source_inputs)

    target = _adversarial_slice(source, x_b, label, delta)
    sup_risk = domain_pair_risk(source, target, e, ZERO_ONE)
    return WorstRepresentationRecord(
        adversarial=AdversarialTarget(x_star=x_b, label=label, delta=delta, target=target),
        epsilon=epsilon,
        sup_risk=sup_risk,
        lower_bound=1.0 - delta,
    )


def sample_stochastic_encoders(
    seed: int, n: int, n_inputs: int, n_codes: int
) -> Iterator[Encoder]:
    """Seeded random encoders: dense Dirichlet rows, sparse rows and near-deterministic rows."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        style = rng.integers(3)
        if style == 0:
            rows = rng.dirichlet(np.ones(n_codes), size=n_inputs)
        elif style == 1:
            rows = np.zeros((n_inputs, n_codes))
            for x in range(n_inputs):
                k = int(rng.integers(1, n_codes + 1))
                codes = rng.choice(n_codes, size=k, replace=False)
                rows[x, codes] = rng.dirichlet(np.ones(k))
        else:
            rows = np.eye(n_codes)[rng.integers(0, n_codes, n_inputs)]
            rows = 0.999 * rows + 0.001 * rng.dirichlet(np.ones(n_codes), size=n_inputs)
        yield Encoder(kernel=CondKernel(rows=rows))


class StochasticCheck(BaseModel):
    """Both one-sided characterization implications for one encoder."""

    risk_minimal: bool
    support_match: bool
    idg_risk: ExtendedReal
    target_bayes_risk: float
    holds: bool


def check_stochastic_encoder(w: World, e: Encoder) -> StochasticCheck:
    report = idg_risk(w, e)
    bayes_t = target_bayes_risk(w)
    minimal = risks_equal(report.risk_from_z, bayes_risk_from_x(w))
    if minimal and report.support_match:
        holds = risks_equal(report.idg_risk, bayes_t)
    elif not report.support_match:
        holds = report.idg_risk > bayes_t
    else:
        holds = True
    return StochasticCheck(
        risk_minimal=minimal,
        support_match=report.support_match,
        idg_risk=report.idg_risk,
        target_bayes_risk=bayes_t,
        holds=holds,
    )


class DpiCheck(BaseModel):
    risk_from_z: float
    bayes_risk_x: float
    holds: bool


def check_dpi(w: World, e: Encoder) -> DpiCheck:
    """R[Y|Z] >= R[Y|X] for any encoder."""
    rz, rx = risk_from_z(w, e), bayes_risk_from_x(w)
    return DpiCheck(risk_from_z=rz, bayes_risk_x=rx, holds=rz >= rx - DPI_TOL)


class CmiCheck(BaseModel):
    equality: bool
    agreement: bool
    holds: bool


def check_cmi(w: World, e: Encoder) -> CmiCheck:
    """R[Y|Z] = R[Y|X] iff every on-support code's optimal action is the Bayes action of its inputs."""
    ij = induced_joint(w, e)
    actions = np.asarray(bayes_predictor(w).actions)
    p_xz = w.input_marginal()[:, None] * e.kernel.rows
    agreement = True
    for z in np.flatnonzero(ij.defined()):
        options = w.loss.optimal_actions(ij.p_y_given_z[z])
        inputs = np.flatnonzero(p_xz[:, z] > SUPPORT_TOL)
        if len(options) != 1 or np.any(np.max(np.abs(actions[inputs] - options[0]), axis=1) > ACTION_TOL):
            agreement = False
            break
    equality = risks_equal(risk_from_z(w, e), bayes_risk_from_x(w))
    return CmiCheck(equality=equality, agreement=agreement, holds=equality == agreement)


class NoFreeLunchCase(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    source: DomainSlice
    encoder: Encoder
    good_target: DomainSlice


class WorstRepresentationCase(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    source: DomainSlice
    encoder: Encoder
    epsilon: float = Field(gt=0.0, lt=1.0)


def random_no_free_lunch_case(seed: int) -> NoFreeLunchCase:
    """Seeded source, label-coding encoder and good target satisfying every hypothesis."""
    rng = np.random.default_rng(seed)

    def draw() -> NoFreeLunchCase:
        n_labels = int(rng.integers(2, 4))
        n_source = n_labels + int(rng.integers(0, 2))
        n_outside = n_labels + int(rng.integers(0, 2))
        n_inputs = n_source + n_outside
        labels = np.concatenate(
            [
                rng.permutation(np.concatenate([np.arange(n_labels), rng.integers(0, n_labels, n_source - n_labels)])),
                rng.permutation(np.concatenate([np.arange(n_labels), rng.integers(0, n_labels, n_outside - n_labels)])),
            ]
        )
        rows = np.eye(n_labels)[labels]
        p_source = np.zeros(n_inputs)
        p_source[:n_source] = rng.dirichlet(np.ones(n_source))
        p_good = np.zeros(n_inputs)
        p_good[n_source:] = rng.dirichlet(np.ones(n_outside))
        kernel = np.eye(n_labels)[labels]
        if rng.random() < 0.5:
            kernel = 0.8 * kernel + 0.2 * rng.dirichlet(np.ones(n_labels), size=n_inputs)
        case = NoFreeLunchCase(
            source=DomainSlice(p_x=FiniteDist(probs=p_source), p_y_given_x=CondKernel(rows=rows)),
            encoder=Encoder(kernel=CondKernel(rows=kernel)),
            good_target=DomainSlice(p_x=FiniteDist(probs=p_good), p_y_given_x=CondKernel(rows=rows)),
        )
        try:
            no_free_lunch_input(case.source, case.encoder, case.good_target)
        except AssumptionViolationError as e:
            raise RejectedSample(str(e)) from e
        return case

    return sample_until_accepted(draw, "no-free-lunch case")


def no_free_lunch_bound(case: NoFreeLunchCase) -> float:
    """Upper end q / (1 + q) of the admissible delta interval for a case."""
    q = no_free_lunch_input(case.source, case.encoder, case.good_target)[2]
    return q / (1.0 + q)


def random_worst_representation_case(seed: int) -> WorstRepresentationCase:
    """Seeded deterministic-label source with an encoder sending one outside input to a fresh code."""
    rng = np.random.default_rng(seed)
    n_labels = int(rng.integers(2, 4))
    n_source = n_labels + int(rng.integers(0, 2))
    n_outside = int(rng.integers(1, 3))
    n_inputs = n_source + n_outside
    labels = np.concatenate(
        [
            rng.permutation(np.concatenate([np.arange(n_labels), rng.integers(0, n_labels, n_source - n_labels)])),
            rng.integers(0, n_labels, n_outside),
        ]
    )
    p_source = np.zeros(n_inputs)
    p_source[:n_source] = rng.dirichlet(np.ones(n_source))
    # label codes on the source, a spare code for the outside inputs
    codes = [int(y) for y in labels[:n_source]] + [n_labels] * n_outside
    return WorstRepresentationCase(
        source=DomainSlice(p_x=FiniteDist(probs=p_source), p_y_given_x=CondKernel(rows=np.eye(n_labels)[labels])),
        encoder=Encoder.from_assignment(codes, n_labels + 1),
        epsilon=float(rng.uniform(0.01, 0.5)),
    )
