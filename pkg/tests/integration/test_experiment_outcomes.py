"""Directional outcomes of the experiments on the disjoint-support synthetic task.

4 domains x 7 labels with disjoint domain supports, 5 seeds, worst-case probes.
"""

import pandas as pd
import pytest

from idg_lab.data.synthetic import Overlap, SyntheticSpec, gen_synthetic
from idg_lab.learning.experiments import (
    DEFAULT_EXPERIMENT_SEEDS,
    DEFAULT_LAMBDAS,
    REFERENCE_ROW,
    ProbeOptions,
    default_objective,
    lambda_sweep,
    regime_comparison,
    target_access,
)
from idg_lab.learning.trainer import TrainConfig
from idg_lab.theory.augmentation import RegimeKind

pytestmark = pytest.mark.slow

BASE = TrainConfig(objective=default_objective())
OPTIONS = ProbeOptions()
SOURCE = "source_log_likelihood"
TARGET = "target_log_likelihood_worst"
HELD_OUT = 3


@pytest.fixture(scope="module")
def dataset():
    return gen_synthetic(0, SyntheticSpec(n_domains=4, n_labels=7, overlap=Overlap.DISJOINT))


@pytest.fixture(scope="module")
def sweep(dataset) -> pd.DataFrame:
    frame = lambda_sweep(dataset, BASE, DEFAULT_LAMBDAS, DEFAULT_EXPERIMENT_SEEDS, OPTIONS)
    return frame.groupby("lam")[[SOURCE, TARGET]].mean()


@pytest.fixture(scope="module")
def zero_gap(sweep) -> float:
    return float(sweep.loc[0.0, SOURCE] - sweep.loc[0.0, TARGET])


class TestLambdaSweep:
    def test_unconstrained_encoder_has_a_gap(self, zero_gap):
        assert zero_gap > 0.0

    def test_best_lambda_closes_half_the_gap(self, sweep, zero_gap):
        assert sweep[TARGET].max() - sweep.loc[0.0, TARGET] >= 0.5 * zero_gap

    def test_largest_lambda_costs_something(self, sweep):
        largest = max(DEFAULT_LAMBDAS)
        degraded = sweep.loc[largest, TARGET] < sweep[TARGET].max()
        source_dropped = sweep.loc[largest, SOURCE] < sweep.loc[0.0, SOURCE]
        assert degraded or source_dropped


@pytest.fixture(scope="module")
def regimes(dataset) -> pd.Series:
    kinds = (RegimeKind.SUPERVISED, RegimeKind.SINGLE_DOM, RegimeKind.INTRA_DOM, RegimeKind.STANDARD)
    frame = regime_comparison(dataset, BASE, kinds, DEFAULT_EXPERIMENT_SEEDS, OPTIONS)
    return frame.groupby("regime")[TARGET].mean()


class TestRegimes:
    @pytest.mark.parametrize("regime", ["supervised", "singledom"])
    def test_domain_agnostic_regimes_track_supervised_training(self, regimes, regime):
        reference = regimes[REFERENCE_ROW]
        assert abs(regimes[regime] - reference) <= 0.2 * abs(reference)

    @pytest.mark.parametrize("regime", ["intradom", "standard"])
    def test_other_regimes_fall_behind(self, regimes, zero_gap, regime):
        assert regimes["supervised"] - regimes[regime] >= zero_gap


def test_encoder_needs_the_target_domain(dataset):
    frame = target_access(dataset, BASE, HELD_OUT, DEFAULT_EXPERIMENT_SEEDS, OPTIONS)
    per_seed = frame.pivot(index="seed", columns="setting", values=TARGET)
    assert (per_seed["without_target"] < per_seed["all"]).all()
