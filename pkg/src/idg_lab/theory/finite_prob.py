"""Exact arithmetic over finite probability spaces.

Distributions, conditional kernels and joint tables are immutable pydantic
models wrapping read-only float64 arrays. All logarithms are natural (nats),
``0 log 0 := 0`` and a mass at or below ``SUPPORT_TOL`` counts as zero.
"""

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.special import entr, rel_entr

from idg_lab.constants import ACTION_TOL, MASS_TOL, SUPPORT_TOL
from idg_lab.utils.arrays import FloatArray
from idg_lab.utils.error_handler import DimensionMismatchError, ZeroProbabilityEventError

MAX_JOINT_AXES = 4


def _normalized(mass: np.ndarray, axis: int | None = None) -> np.ndarray:
    """Validate nonnegativity and unit mass along ``axis``, then renormalize."""
    if not np.all(np.isfinite(mass)):
        raise ValueError("probabilities must be finite")
    if np.any(mass < 0):
        raise ValueError(f"negative probability {mass.min()!r}")
    totals = mass.sum(axis=axis, keepdims=axis is not None)
    if np.any(np.abs(totals - 1.0) > MASS_TOL):
        raise ValueError(f"probabilities must sum to 1 within {MASS_TOL}, got {totals!r}")
    out = mass / totals
    out.setflags(write=False)
    return out


class FiniteDist(BaseModel):
    """Probability vector indexed by outcome id."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    probs: FloatArray

    @field_validator("probs")
    @classmethod
    def _check_probs(cls, probs: np.ndarray) -> np.ndarray:
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("a distribution needs a nonempty 1-D probability vector")
        return _normalized(probs)

    @property
    def size(self) -> int:
        return int(self.probs.shape[0])

    @classmethod
    def uniform(cls, n: int) -> "FiniteDist":
        return cls(probs=np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, outcome: int, n: int) -> "FiniteDist":
        probs = np.zeros(n)
        probs[outcome] = 1.0
        return cls(probs=probs)


class CondKernel(BaseModel):
    """Row-stochastic matrix: row ``i`` is the law of the output given input ``i``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rows: FloatArray

    @field_validator("rows")
    @classmethod
    def _check_rows(cls, rows: np.ndarray) -> np.ndarray:
        if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
            raise ValueError("a kernel needs a nonempty 2-D matrix of rows")
        return _normalized(rows, axis=1)

    @property
    def n_in(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n_out(self) -> int:
        return int(self.rows.shape[1])

    @property
    def is_deterministic(self) -> bool:
        """Every row is a point mass."""
        return bool(np.all(self.rows.max(axis=1) >= 1.0 - SUPPORT_TOL))

    def row(self, i: int) -> FiniteDist:
        return FiniteDist(probs=self.rows[i])

    @classmethod
    def identity(cls, n: int) -> "CondKernel":
        return cls(rows=np.eye(n))

    @classmethod
    def from_assignment(cls, outputs: Sequence[int], n_out: int) -> "CondKernel":
        """Deterministic kernel sending input ``i`` to ``outputs[i]``."""
        rows = np.zeros((len(outputs), n_out))
        rows[np.arange(len(outputs)), np.asarray(outputs, dtype=np.int64)] = 1.0
        return cls(rows=rows)


class JointTable(BaseModel):
    """Dense joint mass over the product of up to four finite index sets."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mass: FloatArray

    @field_validator("mass")
    @classmethod
    def _check_mass(cls, mass: np.ndarray) -> np.ndarray:
        if not 1 <= mass.ndim <= MAX_JOINT_AXES or mass.size == 0:
            raise ValueError(f"a joint table has between 1 and {MAX_JOINT_AXES} nonempty axes")
        return _normalized(mass)

    @property
    def n_axes(self) -> int:
        return int(self.mass.ndim)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.mass.shape)

    @classmethod
    def from_kernel(cls, d: FiniteDist, k: CondKernel) -> "JointTable":
        """Joint of an input law and a kernel, axes (input, output)."""
        if d.size != k.n_in:
            raise DimensionMismatchError("kernel input dimension", d.size, k.n_in)
        return cls(mass=d.probs[:, None] * k.rows)


def support_mask(probs: np.ndarray, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Boolean mask of entries with mass strictly above ``tol``."""
    return np.asarray(probs) > tol


def support(d: FiniteDist, tol: float = SUPPORT_TOL) -> frozenset[int]:
    """Outcome ids with probability strictly greater than ``tol``."""
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    return frozenset(int(i) for i in np.flatnonzero(support_mask(d.probs, tol)))


def entropy_of(probs: np.ndarray) -> float:
    """Shannon entropy in nats of a (possibly multi-axis) mass array."""
    return float(entr(np.asarray(probs)).sum())


def entropy(d: FiniteDist) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    return entropy_of(d.probs)


def kl(p: FiniteDist, q: FiniteDist) -> float:
    """KL(p || q) in nats; +inf when p puts mass where q has none."""
    if p.size != q.size:
        raise DimensionMismatchError("distribution size", p.size, q.size)
    return float(rel_entr(p.probs, q.probs).sum())


def total_variation(p: FiniteDist, q: FiniteDist) -> float:
    if p.size != q.size:
        raise DimensionMismatchError("distribution size", p.size, q.size)
    return float(0.5 * np.abs(p.probs - q.probs).sum())


def marginal(j: JointTable, axes: int | Sequence[int]) -> FiniteDist | JointTable:
    """Marginal on ``axes`` (kept in the given order).

    A single axis yields a FiniteDist, several axes a JointTable.
    """
    keep = [axes] if isinstance(axes, int) else list(axes)
    for axis in keep:
        if not 0 <= axis < j.n_axes:
            raise DimensionMismatchError("axis index bound", j.n_axes, axis)
    dropped = tuple(a for a in range(j.n_axes) if a not in keep)
    mass = j.mass.sum(axis=dropped)
    # sum keeps the remaining axes in ascending order
    order = sorted(keep)
    mass = np.transpose(mass, [order.index(a) for a in keep])
    if len(keep) == 1:
        return FiniteDist(probs=mass)
    return JointTable(mass=mass)


def mutual_information(j: JointTable) -> float:
    """I(axis0; axis1) = H(axis0) + H(axis1) - H(joint), in nats."""
    if j.n_axes != 2:
        raise DimensionMismatchError("joint table axes", 2, j.n_axes)
    value = entropy_of(j.mass.sum(axis=1)) + entropy_of(j.mass.sum(axis=0)) - entropy_of(j.mass)
    return max(value, 0.0)


def conditional_entropy(j: JointTable) -> float:
    """H(axis1 | axis0) of a two-axis table, in nats."""
    if j.n_axes != 2:
        raise DimensionMismatchError("joint table axes", 2, j.n_axes)
    return max(entropy_of(j.mass) - entropy_of(j.mass.sum(axis=1)), 0.0)


def pushforward(k: CondKernel, d: FiniteDist) -> FiniteDist:
    """Law of the kernel output when the input follows ``d``."""
    if d.size != k.n_in:
        raise DimensionMismatchError("kernel input dimension", k.n_in, d.size)
    return FiniteDist(probs=d.probs @ k.rows)


def condition(j: JointTable, axis: int, value: int) -> FiniteDist:
    """Bayes-rule slice of ``j`` at ``axis == value``, renormalized.

    With more than one remaining axis the result is flattened row-major.

    Raises:
        ZeroProbabilityEventError: If the conditioning event has no mass
    """
    if not 0 <= axis < j.n_axes:
        raise DimensionMismatchError("axis index bound", j.n_axes, axis)
    if not 0 <= value < j.shape[axis]:
        raise DimensionMismatchError(f"axis {axis} size", j.shape[axis], value)
    if j.n_axes == 1:
        raise DimensionMismatchError("remaining axes after conditioning", 1, 0)
    sliced = np.take(j.mass, value, axis=axis)
    total = float(sliced.sum())
    if total <= SUPPORT_TOL:
        raise ZeroProbabilityEventError(f"P(axis {axis} = {value}) = {total!r}")
    return FiniteDist(probs=(sliced / total).ravel())


def dedup_rows(rows: np.ndarray, tol: float = ACTION_TOL) -> tuple[np.ndarray, list[int]]:
    """Group rows equal within L-infinity ``tol``.

    Args:
        rows: Matrix whose rows are compared
        tol: Equality tolerance

    Returns:
        Class id per row (canonical by first occurrence) and the index of the
        representative row of each class
    """
    class_ids = np.empty(len(rows), dtype=np.int64)
    representatives: list[int] = []
    for i, row in enumerate(rows):
        for class_id, rep in enumerate(representatives):
            if np.max(np.abs(rows[rep] - row)) <= tol:
                class_ids[i] = class_id
                break
        else:
            class_ids[i] = len(representatives)
            representatives.append(i)
    return class_ids, representatives
