"""Gaussian-cluster covariate-shift datasets.

Features split into a label block and a domain block. The label block is
drawn around a per-label mean shared by all domains and the domain block
around a per-domain offset independent of the label, so p(Y|X) is the same in
every domain while p(X|d) moves with d.
"""

import logging
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field

from idg_lab.constants import (
    DEFAULT_CLUSTER_STD,
    DEFAULT_PER_CLUSTER,
    DEFAULT_VAL_FRACTION,
    DISJOINT_DOMAIN_SEPARATION,
    LABEL_SEPARATION,
)
from idg_lab.data.dataset import EmbeddingDataset, Split

logger = logging.getLogger("idg_lab.synthetic")

LABEL_DIMS = 2
SHARED_DOMAIN_SEPARATION = 0.5


class Overlap(str, Enum):
    DISJOINT = "disjoint"
    SHARED = "shared"


class SyntheticSpec(BaseModel):
    n_domains: int = Field(default=4, ge=2)
    n_labels: int = Field(default=7, ge=2)
    dims: int = Field(default=8, ge=LABEL_DIMS + 1)
    overlap: Overlap = Overlap.DISJOINT
    per_cluster: int = Field(default=DEFAULT_PER_CLUSTER, ge=2)
    val_fraction: float = Field(default=DEFAULT_VAL_FRACTION, ge=0.0, lt=1.0)
    cluster_std: float = Field(default=DEFAULT_CLUSTER_STD, gt=0.0)


def label_means(n_labels: int) -> np.ndarray:
    """Labels on a circle with neighbouring means LABEL_SEPARATION apart."""
    radius = LABEL_SEPARATION / (2.0 * np.sin(np.pi / n_labels))
    angles = 2.0 * np.pi * np.arange(n_labels) / n_labels
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def domain_offsets(spec: SyntheticSpec) -> np.ndarray:
    """Offset of each domain in the domain block (cycled over its axes)."""
    gap = DISJOINT_DOMAIN_SEPARATION if spec.overlap is Overlap.DISJOINT else SHARED_DOMAIN_SEPARATION
    width = spec.dims - LABEL_DIMS
    offsets = np.zeros((spec.n_domains, width))
    for d in range(spec.n_domains):
        offsets[d, d % width] = gap * (1 + d // width)
    return offsets


def gen_synthetic(seed: int, spec: SyntheticSpec) -> EmbeddingDataset:
    """Deterministic dataset of ``per_cluster`` rows per (domain, label) cluster."""
    rng = np.random.default_rng(seed)
    means = label_means(spec.n_labels)
    offsets = domain_offsets(spec)
    n_val = int(round(spec.val_fraction * spec.per_cluster))
    features, domains, labels, splits = [], [], [], []
    for d in range(spec.n_domains):
        for y in range(spec.n_labels):
            centre = np.concatenate([means[y], offsets[d]])
            block = centre + spec.cluster_std * rng.standard_normal((spec.per_cluster, spec.dims))
            tags = np.array([Split.TRAIN] * spec.per_cluster, dtype=object)
            tags[rng.permutation(spec.per_cluster)[:n_val]] = Split.VAL
            features.append(block)
            domains.append(np.full(spec.per_cluster, d))
            labels.append(np.full(spec.per_cluster, y))
            splits.extend(tags.tolist())
    dataset = EmbeddingDataset(
        features=np.concatenate(features),
        domains=np.concatenate(domains),
        labels=np.concatenate(labels),
        splits=splits,
    )
    logger.info(
        f"Generated {len(dataset)} rows: {spec.n_domains} domains x {spec.n_labels} labels, "
        f"{spec.overlap.value} supports"
    )
    return dataset
