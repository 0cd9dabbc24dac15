"""Tasks (D, X, Y) with a loss: Bayes predictor, Bayes image and assumption checks."""

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from idg_lab.constants import ACTION_TOL, SUPPORT_TOL
from idg_lab.theory.finite_prob import CondKernel, FiniteDist, JointTable, dedup_rows
from idg_lab.theory.losses import LossKind, LossSpec, one_hot
from idg_lab.utils.arrays import FloatArray
from idg_lab.utils.error_handler import (
    AssumptionViolationError,
    DimensionMismatchError,
    InadmissibleParameterError,
)
from idg_lab.utils.retry import RejectedSample, sample_until_accepted

logger = logging.getLogger("idg_lab.world")

# distinct Bayes actions of generated worlds differ by at least this much
MIN_PROTOTYPE_GAP = 1e-2


class DomainSlice(BaseModel):
    """One domain's input law and label kernel, p(X|d) and p(Y|X,d)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p_x: FiniteDist
    p_y_given_x: CondKernel

    @model_validator(mode="after")
    def _check_dims(self) -> "DomainSlice":
        if self.p_x.size != self.p_y_given_x.n_in:
            raise DimensionMismatchError("label kernel inputs", self.p_x.size, self.p_y_given_x.n_in)
        return self

    @property
    def n_inputs(self) -> int:
        return self.p_x.size

    @property
    def n_labels(self) -> int:
        return self.p_y_given_x.n_out


class World(BaseModel):
    """Joint law of (D, X, Y), the source/target pair law and the loss.

    Stored in covariate-shift form p(Y|X); per-domain label kernels
    p(Y|X,d) may be supplied for generalized covariate shift fixtures, in
    which case ``p_Y_given_X`` is the domain mixture.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, populate_by_name=True)

    p_d: FiniteDist = Field(alias="p_D")
    p_x_given_d: CondKernel = Field(alias="p_X_given_D")
    p_y_given_x: CondKernel = Field(alias="p_Y_given_X")
    p_y_given_xd: list[CondKernel] | None = Field(default=None, alias="p_Y_given_XD")
    pair_dist: JointTable
    loss: LossSpec

    @model_validator(mode="after")
    def _check_structure(self) -> "World":
        n_domains, n_inputs = self.p_d.size, self.p_x_given_d.n_out
        if self.p_x_given_d.n_in != n_domains:
            raise DimensionMismatchError("p(X|D) rows", n_domains, self.p_x_given_d.n_in)
        if self.p_y_given_x.n_in != n_inputs:
            raise DimensionMismatchError("p(Y|X) rows", n_inputs, self.p_y_given_x.n_in)
        if self.pair_dist.shape != (n_domains, n_domains):
            raise DimensionMismatchError("pair_dist side", n_domains, self.pair_dist.shape[0])
        if self.p_y_given_xd is not None:
            if len(self.p_y_given_xd) != n_domains:
                raise DimensionMismatchError("per-domain label kernels", n_domains, len(self.p_y_given_xd))
            for kernel in self.p_y_given_xd:
                if kernel.rows.shape != self.p_y_given_x.rows.shape:
                    raise DimensionMismatchError("per-domain label kernel rows", n_inputs, kernel.n_in)
        if np.any(self.p_d.probs <= SUPPORT_TOL):
            raise ValueError("every domain must have positive probability")
        self.loss.check_labels(self.n_labels)
        return self

    @property
    def n_domains(self) -> int:
        return self.p_d.size

    @property
    def n_inputs(self) -> int:
        return self.p_x_given_d.n_out

    @property
    def n_labels(self) -> int:
        return self.p_y_given_x.n_out

    def input_marginal(self) -> np.ndarray:
        """p(X) = sum_d p(d) p(X|d)."""
        return self.p_d.probs @ self.p_x_given_d.rows

    def label_rows(self, domain: int | None = None) -> np.ndarray:
        """p(Y|X,d) as an [n_inputs x n_labels] matrix (global p(Y|X) for None)."""
        if domain is None or self.p_y_given_xd is None:
            return self.p_y_given_x.rows
        return self.p_y_given_xd[domain].rows

    def label_tensor(self) -> np.ndarray:
        """p(Y|X,D) stacked as [n_domains x n_inputs x n_labels]."""
        return np.stack([self.label_rows(d) for d in range(self.n_domains)])

    def domain_slice(self, domain: int) -> DomainSlice:
        return DomainSlice(
            p_x=FiniteDist(probs=self.p_x_given_d.rows[domain]),
            p_y_given_x=CondKernel(rows=self.label_rows(domain)),
        )

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, exclude_none=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "World":
        return cls.model_validate_json(text)


class BayesPredictor(BaseModel):
    """Bayes action per input, as action vectors over labels."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    actions: FloatArray
    loss: LossSpec

    @property
    def labels(self) -> list[int]:
        """Predicted label per input (the mode of each action vector)."""
        return [int(np.argmax(a)) for a in self.actions]

    def action(self, x: int) -> np.ndarray:
        return self.actions[x]


class ClauseResult(BaseModel):
    passed: bool
    detail: str = ""


class AssumptionReport(BaseModel):
    """Pass/fail per modelling assumption; failures are reported, never raised."""

    unique_optima: ClauseResult
    generalized_covariate_shift: ClauseResult
    constant_bayes_image: ClauseResult
    nontrivial_bayes_image: ClauseResult
    pair_full_support: ClauseResult

    @property
    def passed(self) -> bool:
        return all(clause.passed for clause in self.clauses().values())

    def clauses(self) -> dict[str, ClauseResult]:
        return {
            "unique_optima": self.unique_optima,
            "generalized_covariate_shift": self.generalized_covariate_shift,
            "constant_bayes_image": self.constant_bayes_image,
            "nontrivial_bayes_image": self.nontrivial_bayes_image,
            "pair_full_support": self.pair_full_support,
        }

    def failed(self) -> list[str]:
        return [name for name, clause in self.clauses().items() if not clause.passed]


def _actions_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.max(np.abs(a - b)) <= ACTION_TOL)


def _optimal_action_sets(w: World) -> list[list[np.ndarray]]:
    return [w.loss.optimal_actions(row) for row in w.p_y_given_x.rows]


def _image_of(actions: np.ndarray, inputs: np.ndarray) -> list[np.ndarray]:
    if inputs.size == 0:
        return []
    _, reps = dedup_rows(actions[inputs])
    return [actions[inputs][r] for r in reps]


def _contains(image: list[np.ndarray], action: np.ndarray) -> bool:
    return any(_actions_equal(a, action) for a in image)


def validate_world(w: World) -> AssumptionReport:
    """Check the modelling assumptions of a structurally valid world.

    Clauses: (a) unique optimal action per supported input; (b) generalized
    covariate shift, i.e. each domain's optimal action on its support is the
    global Bayes action (checked when per-domain label kernels are present);
    (c) the Bayes image is the same in every domain; (d) it has at least two
    elements; (e) the pair law has full support on D x D.
    """
    supported = np.flatnonzero(w.input_marginal() > SUPPORT_TOL)
    optimal = _optimal_action_sets(w)

    ties = [int(x) for x in supported if len(optimal[x]) > 1]
    unique = ClauseResult(
        passed=not ties, detail=f"tied optimal actions at inputs {ties}" if ties else ""
    )
    actions = np.stack([options[0] for options in optimal])

    if w.p_y_given_xd is None:
        shift = ClauseResult(passed=True, detail="covariate-shift form")
    elif ties:
        shift = ClauseResult(passed=False, detail="global Bayes predictor is not unique")
    else:
        shift = ClauseResult(passed=True)
        for d in range(w.n_domains):
            rows = w.label_rows(d)
            for x in np.flatnonzero(w.p_x_given_d.rows[d] > SUPPORT_TOL):
                local = w.loss.optimal_actions(rows[x])
                if len(local) != 1 or not _actions_equal(local[0], actions[x]):
                    shift = ClauseResult(
                        passed=False,
                        detail=f"domain {d} disagrees with the Bayes predictor at input {int(x)}",
                    )
                    break
            if not shift.passed:
                break

    image = _image_of(actions, supported)
    constant = ClauseResult(passed=True)
    for d in range(w.n_domains):
        local_image = _image_of(actions, np.flatnonzero(w.p_x_given_d.rows[d] > SUPPORT_TOL))
        missing = [i for i, a in enumerate(image) if not _contains(local_image, a)]
        if missing:
            constant = ClauseResult(
                passed=False, detail=f"domain {d} lacks Bayes image elements {missing}"
            )
            break

    nontrivial = ClauseResult(
        passed=len(image) >= 2, detail=f"|A*| = {len(image)}" if len(image) < 2 else ""
    )
    full = bool(np.all(w.pair_dist.mass > SUPPORT_TOL))
    pairs = ClauseResult(passed=full, detail="" if full else "pair_dist has zero-mass pairs")

    report = AssumptionReport(
        unique_optima=unique,
        generalized_covariate_shift=shift,
        constant_bayes_image=constant,
        nontrivial_bayes_image=nontrivial,
        pair_full_support=pairs,
    )
    if not report.passed:
        logger.debug(f"World fails assumptions: {report.failed()}")
    return report


def bayes_predictor(w: World) -> BayesPredictor:
    """The unique per-input minimizer of expected loss under p(Y|x).

    Raises:
        AssumptionViolationError: If a ZeroOne mode is tied at a supported input
    """
    supported = w.input_marginal() > SUPPORT_TOL
    actions = []
    for x, options in enumerate(_optimal_action_sets(w)):
        if len(options) > 1 and supported[x]:
            raise AssumptionViolationError(
                f"ZeroOne Bayes predictor is not unique at input {x}: "
                f"labels {[int(np.argmax(a)) for a in options]} tie"
            )
        actions.append(options[0])
    return BayesPredictor(actions=np.stack(actions), loss=w.loss)


def bayes_risk_from_x(w: World, domain: int | None = None) -> float:
    """Expected loss of the Bayes predictor, R[Y|X], in one domain or overall."""
    predictor = bayes_predictor(w)
    if domain is None:
        return float(
            sum(w.p_d.probs[d] * bayes_risk_from_x(w, d) for d in range(w.n_domains))
        )
    rows = w.label_rows(domain)
    p_x = w.p_x_given_d.rows[domain]
    return float(
        sum(
            p_x[x] * w.loss.expected_loss(rows[x], predictor.actions[x])
            for x in np.flatnonzero(p_x > SUPPORT_TOL)
        )
    )


def bayes_image(w: World, domain: int | None = None) -> list[np.ndarray]:
    """Distinct Bayes actions over the support of p(X|domain) (or p(X))."""
    predictor = bayes_predictor(w)
    p_x = w.input_marginal() if domain is None else w.p_x_given_d.rows[domain]
    return _image_of(np.asarray(predictor.actions), np.flatnonzero(p_x > SUPPORT_TOL))


class WorldSizes(BaseModel):
    n_domains: int = Field(ge=1)
    n_inputs: int = Field(ge=2)
    n_labels: int = Field(ge=2)


class WorldConstraints(BaseModel):
    """Knobs of :func:`random_world`.

    ``adversarial`` removes one Bayes action from every domain but the first;
    ``per_domain_labels`` emits distinct per-domain ZeroOne label kernels
    sharing their argmax; ``max_bayes_image`` caps the image size so a
    given code budget covers it.
    """

    loss: LossSpec = Field(default_factory=LossSpec.zero_one)
    adversarial: bool = False
    per_domain_labels: bool = False
    deterministic_labels: bool = False
    max_bayes_image: int | None = Field(default=None, ge=2)


def _soft_dirichlet(rng: np.random.Generator, n: int) -> np.ndarray:
    """Dirichlet(1) draw mixed with the uniform law; every entry stays positive."""
    return 0.5 * rng.dirichlet(np.ones(n)) + 0.5 / n


def _domain_supports(
    rng: np.random.Generator, classes: np.ndarray, n_classes: int, n_domains: int
) -> np.ndarray:
    """Boolean [domains x inputs] supports where every domain sees every class."""
    n_inputs = classes.shape[0]
    members = [np.flatnonzero(classes == c) for c in range(n_classes)]
    supports = rng.random((n_domains, n_inputs)) < 0.5
    for d in range(n_domains):
        for inputs in members:
            supports[d, rng.choice(inputs)] = True
    for x in np.flatnonzero(~supports.any(axis=0)):
        supports[rng.integers(n_domains), x] = True
    return supports


def _label_rows(
    rng: np.random.Generator,
    classes: np.ndarray,
    n_classes: int,
    n_labels: int,
    constraints: WorldConstraints,
) -> np.ndarray:
    loss = constraints.loss
    n_inputs = classes.shape[0]
    if loss.kind is LossKind.ZERO_ONE or constraints.deterministic_labels:
        class_labels = rng.permutation(n_labels)[:n_classes]
        if constraints.deterministic_labels:
            return np.stack([one_hot(int(class_labels[c]), n_labels) for c in classes])
        # mode weight 0.6 keeps the argmax strict
        return np.stack(
            [
                0.4 * rng.dirichlet(np.ones(n_labels)) + 0.6 * one_hot(int(class_labels[c]), n_labels)
                for c in classes
            ]
        )
    prototypes = np.stack([_soft_dirichlet(rng, n_labels) for _ in range(n_classes)])
    actions = np.stack([loss.optimal_actions(p)[0] for p in prototypes])
    gaps = [
        np.max(np.abs(actions[i] - actions[j]))
        for i in range(n_classes)
        for j in range(i + 1, n_classes)
    ]
    if min(gaps) <= MIN_PROTOTYPE_GAP:
        raise RejectedSample("prototype actions are not distinct")
    return prototypes[classes].reshape(n_inputs, n_labels)


def random_world(
    seed: int, sizes: WorldSizes, constraints: WorldConstraints | None = None
) -> World:
    """Seeded random world passing :func:`validate_world`.

    Inputs are grouped into Bayes classes that share one optimal action, and
    every domain's support is drawn to contain each class (minus one class
    outside the first domain when ``adversarial``).

    Raises:
        UnsatisfiableConstraintError: If no draw is accepted within the rejection budget
        InadmissibleParameterError: If the constraints contradict the sizes
    """
    constraints = constraints or WorldConstraints()
    loss = constraints.loss
    loss.check_labels(sizes.n_labels)
    max_classes = sizes.n_inputs
    if loss.kind is LossKind.ZERO_ONE or constraints.deterministic_labels:
        max_classes = min(max_classes, sizes.n_labels)
    if constraints.max_bayes_image is not None:
        max_classes = min(max_classes, constraints.max_bayes_image)
    if constraints.adversarial and sizes.n_domains < 2:
        raise InadmissibleParameterError("an adversarial world needs at least two domains")
    if constraints.per_domain_labels and loss.kind is not LossKind.ZERO_ONE:
        raise InadmissibleParameterError("per-domain label kernels are only generated for zero_one")
    if constraints.per_domain_labels and constraints.deterministic_labels:
        raise InadmissibleParameterError("per-domain label kernels need stochastic labels")

    rng = np.random.default_rng(seed)

    def draw() -> World:
        n_classes = int(rng.integers(2, max_classes + 1))
        classes = np.concatenate(
            [np.arange(n_classes), rng.integers(0, n_classes, sizes.n_inputs - n_classes)]
        )
        classes = rng.permutation(classes)
        supports = _domain_supports(rng, classes, n_classes, sizes.n_domains)
        if constraints.adversarial:
            supports[1:, classes == 0] = False
            if not supports.any(axis=0).all():
                supports[0] |= classes == 0
        p_x_given_d = np.zeros((sizes.n_domains, sizes.n_inputs))
        for d in range(sizes.n_domains):
            inputs = np.flatnonzero(supports[d])
            p_x_given_d[d, inputs] = _soft_dirichlet(rng, inputs.size)
        p_d = _soft_dirichlet(rng, sizes.n_domains)
        rows = _label_rows(rng, classes, n_classes, sizes.n_labels, constraints)

        per_domain = None
        if constraints.per_domain_labels:
            modes = rows.argmax(axis=1)
            per_domain = np.stack(
                [
                    np.stack(
                        [0.3 * rng.dirichlet(np.ones(sizes.n_labels)) + 0.7 * one_hot(int(m), sizes.n_labels)
                         for m in modes]
                    )
                    for _ in range(sizes.n_domains)
                ]
            )
            joint_dx = p_d[:, None] * p_x_given_d
            weights = joint_dx / joint_dx.sum(axis=0, keepdims=True)
            rows = np.einsum("dx,dxy->xy", weights, per_domain)

        world = World(
            p_d=FiniteDist(probs=p_d),
            p_x_given_d=CondKernel(rows=p_x_given_d),
            p_y_given_x=CondKernel(rows=rows),
            p_y_given_xd=None if per_domain is None else [CondKernel(rows=r) for r in per_domain],
            pair_dist=JointTable(
                mass=_soft_dirichlet(rng, sizes.n_domains**2).reshape(sizes.n_domains, sizes.n_domains)
            ),
            loss=loss,
        )
        report = validate_world(world)
        if constraints.adversarial:
            if report.constant_bayes_image.passed:
                raise RejectedSample("adversarial world kept a constant Bayes image")
            if len(report.failed()) > 1:
                raise RejectedSample(f"adversarial world failed {report.failed()}")
        elif not report.passed:
            raise RejectedSample(f"world failed {report.failed()}")
        return world

    world = sample_until_accepted(draw, "random world")
    logger.debug(
        f"Sampled world seed={seed}: |D|={sizes.n_domains} |X|={sizes.n_inputs} |Y|={sizes.n_labels}"
    )
    return world
