"""Tests for the seeded verification suites."""

import pytest

from idg_lab.theory.suites import (
    OutcomeStatus,
    SuiteName,
    SuiteOptions,
    acceptance_world,
    run_suite,
    world_seeds,
)
from idg_lab.theory.world import validate_world
from idg_lab.utils.error_handler import BudgetExceededError

FAST = SuiteOptions(samples=10)


def test_world_seeds_are_reproducible():
    assert world_seeds(7, 5) == world_seeds(7, 5)
    assert world_seeds(7, 5) != world_seeds(8, 5)
    assert len(set(world_seeds(0, 20))) == 20


def test_acceptance_worlds_are_small_and_valid():
    for seed in range(6):
        w, n_codes = acceptance_world(seed)
        assert w.n_inputs <= 5
        assert 2 <= n_codes <= 3
        assert validate_world(w).passed


def test_acceptance_worlds_alternate_losses():
    assert acceptance_world(0)[0].loss.kind.value == "zero_one"
    assert acceptance_world(1)[0].loss.kind.value == "clamped_log"


def test_zero_worlds_rejected():
    with pytest.raises(ValueError):
        run_suite(SuiteName.THEOREM1, 0, seed=0)


@pytest.mark.parametrize(
    "suite",
    [SuiteName.THEOREM1, SuiteName.DPI, SuiteName.CMI, SuiteName.NOFREELUNCH, SuiteName.WORSTREP, SuiteName.SSLPROP],
    ids=lambda s: s.value,
)
def test_suites_pass(suite):
    (report,) = run_suite(suite, 4, seed=7, options=FAST)
    assert report.passed
    assert report.counts()["failed"] == 0
    assert [o.index for o in report.outcomes] == [0, 1, 2, 3]


def test_all_runs_every_suite():
    reports = run_suite(SuiteName.ALL, 1, seed=3, options=FAST)
    assert [r.suite for r in reports] == [s for s in SuiteName if s is not SuiteName.ALL]


def test_invalid_worlds_are_not_applicable():
    (report,) = run_suite(SuiteName.THEOREM1, 3, seed=1, options=SuiteOptions(allow_invalid=True))
    assert report.passed
    assert all(o.status is OutcomeStatus.NOT_APPLICABLE for o in report.outcomes)


def test_report_is_deterministic():
    first = run_suite(SuiteName.CMI, 3, seed=5, options=FAST)[0].model_dump()
    second = run_suite(SuiteName.CMI, 3, seed=5, options=FAST)[0].model_dump()
    assert first == second


@pytest.mark.slow
def test_theorem1_acceptance_sweep():
    (report,) = run_suite(SuiteName.THEOREM1, 100, seed=7)
    assert report.passed


@pytest.mark.parametrize("jobs", [1, 2])
def test_budget_error_reaches_the_caller(jobs):
    with pytest.raises(BudgetExceededError) as exc_info:
        run_suite(SuiteName.THEOREM1, 2, seed=0, options=SuiteOptions(budget=1), jobs=jobs)
    assert exc_info.value.budget == 1
    assert exc_info.value.exit_code == 2
