"""Shared pytest fixtures."""

import pytest

from idg_lab.config import reset_settings
from idg_lab.data.synthetic import Overlap, SyntheticSpec, gen_synthetic
from idg_lab.theory.world import World
from tests.fixtures.worlds import four_input_world


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Fresh settings per test, without leaking IDGLAB_* variables from the host."""
    for name in ("IDGLAB_SEED", "IDGLAB_JOBS", "IDGLAB_ENUMERATION_BUDGET", "IDGLAB_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def world() -> World:
    return four_input_world()


@pytest.fixture
def small_dataset():
    """Two disjoint domains, two labels, a few points per cluster."""
    spec = SyntheticSpec(
        n_domains=2, n_labels=2, dims=4, overlap=Overlap.DISJOINT, per_cluster=10, val_fraction=0.2
    )
    return gen_synthetic(seed=3, spec=spec)
