"""Tests for the synthetic covariate-shift generator."""

import numpy as np
import pytest
from pydantic import ValidationError

from idg_lab.data.dataset import Split
from idg_lab.data.probe import domain_probe_accuracy
from idg_lab.data.synthetic import (
    LABEL_DIMS,
    Overlap,
    SyntheticSpec,
    domain_offsets,
    gen_synthetic,
    label_means,
)

SMALL = SyntheticSpec(n_domains=3, n_labels=3, dims=4, per_cluster=10)


def test_same_seed_same_bytes(tmp_path):
    first = gen_synthetic(11, SMALL).write_csv(tmp_path / "a.csv")
    second = gen_synthetic(11, SMALL).write_csv(tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()


def test_different_seeds_differ():
    assert not np.array_equal(gen_synthetic(1, SMALL).features, gen_synthetic(2, SMALL).features)


def test_cluster_sizes_and_splits():
    dataset = gen_synthetic(0, SMALL)
    assert len(dataset) == 3 * 3 * 10
    counts = dataset.counts()
    val = counts[counts.split == Split.VAL.value]
    assert (val["count"] == 2).all()
    assert len(val) == 9


def test_label_means_are_evenly_spaced():
    means = label_means(5)
    gaps = np.linalg.norm(means - np.roll(means, 1, axis=0), axis=1)
    np.testing.assert_allclose(gaps, 3.0)


def test_domain_offsets_cycle_over_axes():
    offsets = domain_offsets(SyntheticSpec(n_domains=3, dims=4))
    np.testing.assert_allclose(offsets, [[6.0, 0.0], [0.0, 6.0], [12.0, 0.0]])


def test_shared_offsets_are_closer():
    disjoint = domain_offsets(SyntheticSpec(n_domains=2, dims=4))
    shared = domain_offsets(SyntheticSpec(n_domains=2, dims=4, overlap=Overlap.SHARED))
    assert np.abs(shared).max() < np.abs(disjoint).max()


def test_label_block_does_not_depend_on_the_domain():
    dataset = gen_synthetic(4, SyntheticSpec(n_domains=2, n_labels=2, dims=3, per_cluster=400))
    block = dataset.features[:, :LABEL_DIMS]
    for y in range(2):
        first = block[(dataset.labels == y) & (dataset.domains == 0)].mean(axis=0)
        second = block[(dataset.labels == y) & (dataset.domains == 1)].mean(axis=0)
        np.testing.assert_allclose(first, second, atol=0.15)


def test_disjoint_domains_are_identifiable():
    dataset = gen_synthetic(0, SyntheticSpec(n_domains=3, n_labels=2, dims=4, per_cluster=20))
    assert domain_probe_accuracy(dataset) >= 0.95


@pytest.mark.parametrize(
    "fields",
    [{"n_domains": 1}, {"n_labels": 1}, {"dims": 2}, {"per_cluster": 1}, {"val_fraction": 1.0}],
    ids=["domains", "labels", "dims", "per-cluster", "val-fraction"],
)
def test_spec_bounds(fields):
    with pytest.raises(ValidationError):
        SyntheticSpec(**fields)
