"""Tests for positive-view sampling per augmentation regime."""

import numpy as np
import pytest

from idg_lab.learning.positives import positive_indices, sample_positives
from idg_lab.theory.augmentation import RegimeKind, RegimeSpec
from idg_lab.utils.error_handler import AssumptionViolationError

LABELS = np.array([0, 0, 1, 1, 0, 0, 1, 1, 0, 1])
DOMAINS = np.array([0, 0, 0, 0, 1, 1, 1, 1, 2, 2])
ANCHORS = np.arange(LABELS.size)


def draw(regime: RegimeSpec, seed: int = 0) -> np.ndarray:
    return positive_indices(ANCHORS, LABELS, DOMAINS, regime, np.random.default_rng(seed))


@pytest.mark.parametrize("seed", range(5))
def test_supervised_keeps_the_label(seed):
    partners = draw(RegimeSpec(regime=RegimeKind.SUPERVISED), seed)
    np.testing.assert_array_equal(LABELS[partners], LABELS)


def test_supervised_crosses_domains():
    crossed = np.concatenate([DOMAINS[draw(RegimeSpec(regime=RegimeKind.SUPERVISED), s)] != DOMAINS for s in range(10)])
    assert crossed.any()


@pytest.mark.parametrize("seed", range(5))
def test_intra_domain_keeps_label_and_domain(seed):
    partners = draw(RegimeSpec(regime=RegimeKind.INTRA_DOM), seed)
    np.testing.assert_array_equal(LABELS[partners], LABELS)
    np.testing.assert_array_equal(DOMAINS[partners], DOMAINS)


def test_single_domain_draws_from_the_fixed_domain():
    partners = draw(RegimeSpec(regime=RegimeKind.SINGLE_DOM, domain=1))
    np.testing.assert_array_equal(LABELS[partners], LABELS)
    assert set(DOMAINS[partners]) == {1}


def test_approx_da_without_mixing_is_intra_domain():
    partners = draw(RegimeSpec(regime=RegimeKind.APPROX_DA, mix=0.0))
    np.testing.assert_array_equal(DOMAINS[partners], DOMAINS)
    np.testing.assert_array_equal(LABELS[partners], LABELS)


def test_approx_da_full_mixing_keeps_labels():
    partners = draw(RegimeSpec(regime=RegimeKind.APPROX_DA, mix=1.0))
    np.testing.assert_array_equal(LABELS[partners], LABELS)


def test_empty_pool_is_an_error():
    labels = np.array([0, 1, 0, 0])
    domains = np.array([0, 0, 1, 1])
    with pytest.raises(AssumptionViolationError, match="no positive candidates"):
        positive_indices(
            np.arange(4),
            labels,
            domains,
            RegimeSpec(regime=RegimeKind.SINGLE_DOM, domain=1),
            np.random.default_rng(0),
        )


def test_anchor_subset_indexes_the_full_pool():
    anchors = np.array([2, 8])
    partners = positive_indices(
        anchors, LABELS, DOMAINS, RegimeSpec(regime=RegimeKind.INTRA_DOM), np.random.default_rng(0)
    )
    np.testing.assert_array_equal(LABELS[partners], LABELS[anchors])
    np.testing.assert_array_equal(DOMAINS[partners], DOMAINS[anchors])


def test_draws_are_reproducible():
    regime = RegimeSpec(regime=RegimeKind.SUPERVISED)
    np.testing.assert_array_equal(draw(regime, 3), draw(regime, 3))


class TestSamplePositives:
    features = np.arange(20, dtype=float).reshape(10, 2)

    def test_standard_jitters_the_anchor(self):
        views = sample_positives(
            ANCHORS, self.features, LABELS, DOMAINS, RegimeSpec(regime=RegimeKind.STANDARD), np.random.default_rng(0)
        )
        assert views.shape == self.features.shape
        assert not np.array_equal(views, self.features)
        assert np.abs(views - self.features).max() < 1.0

    def test_standard_without_jitter_is_the_anchor(self):
        views = sample_positives(
            ANCHORS,
            self.features,
            LABELS,
            DOMAINS,
            RegimeSpec(regime=RegimeKind.STANDARD),
            np.random.default_rng(0),
            jitter=0.0,
        )
        np.testing.assert_array_equal(views, self.features)

    def test_other_regimes_return_partner_rows(self):
        views = sample_positives(
            ANCHORS, self.features, LABELS, DOMAINS, RegimeSpec(regime=RegimeKind.INTRA_DOM), np.random.default_rng(0)
        )
        rows = (views[:, 0] / 2).astype(int)
        np.testing.assert_array_equal(LABELS[rows], LABELS)
        np.testing.assert_array_equal(DOMAINS[rows], DOMAINS)
