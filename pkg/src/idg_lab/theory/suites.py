"""Seeded verification suites over random worlds and constructed fixtures."""

import logging
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel

from idg_lab.constants import DEFAULT_ENUMERATION_BUDGET, RISK_TOL
from idg_lab.theory.augmentation import (
    RegimeKind,
    RegimeSpec,
    build_regime_augmenter,
    verify_ssl_prop,
)
from idg_lab.theory.losses import LossSpec
from idg_lab.theory.oracle import (
    check_cmi,
    check_dpi,
    check_stochastic_encoder,
    construct_optimal_encoder,
    encoder_index,
    enumerate_det_encoders,
    no_free_lunch_bound,
    no_free_lunch_construct,
    random_no_free_lunch_case,
    random_worst_representation_case,
    sample_stochastic_encoders,
    verify_theorem1,
    worst_representation_construct,
)
from idg_lab.theory.world import World, WorldConstraints, WorldSizes, random_world

logger = logging.getLogger("idg_lab.suites")

DEFAULT_SAMPLES = 100
DELTA_GRID_POINTS = 5


class SuiteName(str, Enum):
    THEOREM1 = "theorem1"
    DPI = "dpi"
    CMI = "cmi"
    NOFREELUNCH = "nofreelunch"
    WORSTREP = "worstrep"
    SSLPROP = "sslprop"
    ALL = "all"


class OutcomeStatus(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    NOT_APPLICABLE = "not_applicable"


class WorldOutcome(BaseModel):
    index: int
    seed: int
    status: OutcomeStatus
    detail: str = ""
    data: dict[str, Any] = {}


class SuiteReport(BaseModel):
    suite: SuiteName
    n_worlds: int
    seed: int
    outcomes: list[WorldOutcome]

    @property
    def passed(self) -> bool:
        return all(o.status is not OutcomeStatus.FAILED for o in self.outcomes)

    def counts(self) -> dict[str, int]:
        return {s.value: sum(o.status is s for o in self.outcomes) for s in OutcomeStatus}


class SuiteOptions(BaseModel):
    budget: int = DEFAULT_ENUMERATION_BUDGET
    samples: int = DEFAULT_SAMPLES
    allow_invalid: bool = False


def world_seeds(seed: int, n_worlds: int) -> list[int]:
    """Independent per-world seeds derived from the master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n_worlds)]


def acceptance_world(seed: int, allow_invalid: bool = False) -> tuple[World, int]:
    """Small random world (|X| <= 5, |Y|, |D|, |Z| in {2, 3}) and its code budget.

    Worlds alternate between ZeroOne and ClampedLog(1e-3) by seed parity.
    ``allow_invalid`` draws worlds whose Bayes image differs across domains.
    """
    rng = np.random.default_rng(seed)
    n_codes = int(rng.integers(2, 4))
    sizes = WorldSizes(
        n_domains=int(rng.integers(2, 4)),
        n_inputs=int(rng.integers(2, 6)),
        n_labels=int(rng.integers(2, 4)),
    )
    loss = LossSpec.zero_one() if seed % 2 == 0 else LossSpec.clamped_log(1e-3)
    constraints = WorldConstraints(loss=loss, adversarial=allow_invalid, max_bayes_image=n_codes)
    return random_world(seed, sizes, constraints), n_codes


def _outcome(index: int, seed: int, ok: bool, detail: str = "", **data: Any) -> WorldOutcome:
    status = OutcomeStatus.PASSED if ok else OutcomeStatus.FAILED
    return WorldOutcome(index=index, seed=seed, status=status, detail=detail, data=data)


def _not_applicable(index: int, seed: int, reason: str) -> WorldOutcome:
    return WorldOutcome(index=index, seed=seed, status=OutcomeStatus.NOT_APPLICABLE, detail=reason)


def _theorem1(index: int, seed: int, options: SuiteOptions) -> WorldOutcome:
    w, n_codes = acceptance_world(seed, options.allow_invalid)
    report = verify_theorem1(w, n_codes, options.budget)
    if not report.applicable:
        return _not_applicable(index, seed, report.reason)
    constructed = encoder_index(construct_optimal_encoder(w, n_codes).codes(), n_codes)
    ok = report.equal and constructed in report.set_idg_optimal
    detail = "" if ok else f"equal={report.equal}, constructed encoder {constructed} optimal={ok}"
    return _outcome(
        index,
        seed,
        ok,
        detail,
        n_encoders=report.n_encoders,
        n_optimal=len(report.set_idg_optimal),
        min_idg=report.min_idg,
    )


def _dpi(index: int, seed: int, options: SuiteOptions) -> WorldOutcome:
    w, n_codes = acceptance_world(seed, options.allow_invalid)
    failures = []
    for k, e in enumerate(sample_stochastic_encoders(seed, options.samples, w.n_inputs, n_codes)):
        if not check_dpi(w, e).holds:
            failures.append(f"dpi@{k}")
        if not options.allow_invalid and not check_stochastic_encoder(w, e).holds:
            failures.append(f"characterization@{k}")
    return _outcome(index, seed, not failures, ", ".join(failures[:10]), encoders=options.samples)


def _cmi(index: int, seed: int, options: SuiteOptions) -> WorldOutcome:
    w, n_codes = acceptance_world(seed, options.allow_invalid)
    failures = [
        k
        for k, e in enumerate(enumerate_det_encoders(w.n_inputs, n_codes, options.budget))
        if not check_cmi(w, e).holds
    ]
    return _outcome(index, seed, not failures, f"encoders {failures[:10]}" if failures else "")


def _nofreelunch(index: int, seed: int, options: SuiteOptions) -> WorldOutcome:
    case = random_no_free_lunch_case(seed)
    bound = no_free_lunch_bound(case)
    deltas = np.linspace(0.0, bound, DELTA_GRID_POINTS + 2)[1:-1]
    records = [
        no_free_lunch_construct(case.source, case.encoder, case.good_target, float(d))
        for d in deltas
    ]
    weak = [r.adversarial.delta for r in records if not r.strict]
    return _outcome(
        index,
        seed,
        not weak,
        f"non-strict at delta {weak}" if weak else "",
        delta_bound=bound,
        gaps=[r.encoder_sup_risk - r.constant_sup_risk for r in records],
    )


def _worstrep(index: int, seed: int, options: SuiteOptions) -> WorldOutcome:
    case = random_worst_representation_case(seed)
    deltas = np.linspace(0.0, case.epsilon, DELTA_GRID_POINTS + 2)[1:-1]
    bad = []
    for delta in deltas:
        record = worst_representation_construct(case.source, case.encoder, case.epsilon, float(delta))
        if abs(record.sup_risk - (1.0 - delta)) > RISK_TOL or record.sup_risk < 1.0 - case.epsilon:
            bad.append(float(delta))
    return _outcome(index, seed, not bad, f"sup-risk off at delta {bad}" if bad else "", epsilon=case.epsilon)


def _sslprop(index: int, seed: int, options: SuiteOptions) -> WorldOutcome:
    w, n_codes = acceptance_world(seed, options.allow_invalid)
    a = build_regime_augmenter(w, RegimeSpec(regime=RegimeKind.SUPERVISED))
    report = verify_ssl_prop(w, a, n_codes, options.budget)
    if not report.applicable:
        return _not_applicable(index, seed, report.reason)
    ok = report.all_optimal and report.bucketing_is_maximizer
    return _outcome(
        index,
        seed,
        ok,
        "" if ok else f"all_optimal={report.all_optimal}, bucketing={report.bucketing_is_maximizer}",
        maximizers=len(report.maximizers),
    )


_RUNNERS = {
    SuiteName.THEOREM1: _theorem1,
    SuiteName.DPI: _dpi,
    SuiteName.CMI: _cmi,
    SuiteName.NOFREELUNCH: _nofreelunch,
    SuiteName.WORSTREP: _worstrep,
    SuiteName.SSLPROP: _sslprop,
}


def _run_one(task: tuple[SuiteName, int, int, SuiteOptions]) -> WorldOutcome:
    suite, index, seed, options = task
    outcome = _RUNNERS[suite](index, seed, options)
    logger.info(f"{suite.value} world {index} (seed {seed}): {outcome.status.value}")
    return outcome


def run_suite(
    name: SuiteName,
    n_worlds: int,
    seed: int,
    options: SuiteOptions | None = None,
    jobs: int = 1,
) -> list[SuiteReport]:
    """Run one suite (or every suite for ``all``) over ``n_worlds`` seeded instances.

    Results are ordered by world index whatever the worker count.
    """
    if n_worlds < 1:
        raise ValueError(f"n_worlds must be at least 1, got {n_worlds}")
    options = options or SuiteOptions()
    names = [s for s in SuiteName if s is not SuiteName.ALL] if name is SuiteName.ALL else [name]
    seeds = world_seeds(seed, n_worlds)
    reports = []
    for suite in names:
        tasks = [(suite, i, s, options) for i, s in enumerate(seeds)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_run_one, tasks))
        else:
            outcomes = [_run_one(t) for t in tasks]
        report = SuiteReport(suite=suite, n_worlds=n_worlds, seed=seed, outcomes=outcomes)
        logger.info(f"Suite {suite.value}: {report.counts()}")
        reports.append(report)
    return reports
