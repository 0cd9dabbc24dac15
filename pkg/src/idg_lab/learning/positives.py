"""Positive-view sampling for each augmentation regime on labelled embedding rows.

Supervised draws a same-label row from any domain, IntraDom a same-label row
from the anchor's own domain, SingleDom a same-label row from one fixed domain,
ApproxDA mixes Supervised (with probability ``mix``) and IntraDom, and Standard
jitters the anchor itself, so it never leaves the anchor's domain.
"""

import numpy as np

from idg_lab.constants import DEFAULT_JITTER_SCALE
from idg_lab.theory.augmentation import RegimeKind, RegimeSpec
from idg_lab.utils.error_handler import AssumptionViolationError


def _draw_from_pools(keys: np.ndarray, pool_keys: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """For each anchor, a uniform pool row whose key equals the anchor's key."""
    out = np.empty(keys.shape[0], dtype=np.int64)
    for key in np.unique(keys, axis=0):
        anchors = np.flatnonzero((keys == key).all(axis=1))
        pool = np.flatnonzero((pool_keys == key).all(axis=1))
        if pool.size == 0:
            raise AssumptionViolationError(f"no positive candidates for (label, domain) key {key.tolist()}")
        out[anchors] = rng.choice(pool, size=anchors.size)
    return out


def positive_indices(
    anchors: np.ndarray,
    labels: np.ndarray,
    domains: np.ndarray,
    regime: RegimeSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Row index of a positive for each anchor row (Standard has no partner row)."""
    y, d = labels[anchors], domains[anchors]
    if regime.regime is RegimeKind.SUPERVISED:
        return _draw_from_pools(y[:, None], labels[:, None], rng)
    if regime.regime is RegimeKind.INTRA_DOM:
        return _draw_from_pools(np.stack([y, d], 1), np.stack([labels, domains], 1), rng)
    if regime.regime is RegimeKind.SINGLE_DOM:
        assert regime.domain is not None
        fixed = np.full_like(d, regime.domain)
        return _draw_from_pools(np.stack([y, fixed], 1), np.stack([labels, domains], 1), rng)
    if regime.regime is RegimeKind.APPROX_DA:
        across = _draw_from_pools(y[:, None], labels[:, None], rng)
        within = _draw_from_pools(np.stack([y, d], 1), np.stack([labels, domains], 1), rng)
        return np.where(rng.random(anchors.size) < regime.mix, across, within)
    return anchors.copy()


def sample_positives(
    anchors: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    domains: np.ndarray,
    regime: RegimeSpec,
    rng: np.random.Generator,
    jitter: float = DEFAULT_JITTER_SCALE,
) -> np.ndarray:
    """Feature rows of the positives of ``anchors`` (indices into ``features``)."""
    if regime.regime is RegimeKind.STANDARD:
        base = features[anchors]
        return base + jitter * rng.standard_normal(base.shape)
    return features[positive_indices(anchors, labels, domains, regime, rng)]
