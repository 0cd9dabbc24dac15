"""Loss specifications and their action-level arithmetic.

Actions are represented uniformly as vectors over labels: a ZeroOne action
is the one-hot vector of the predicted label, a Log or ClampedLog action is
the predicted label distribution. ``p`` below is always a label
distribution (the conditional law of Y at some input or code).
"""

from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import xlogy

from idg_lab.constants import DEFAULT_CLAMP_EPSILON, TIE_TOL


class LossKind(str, Enum):
    ZERO_ONE = "zero_one"
    LOG = "log"
    CLAMPED_LOG = "clamped_log"


class LossSpec(BaseModel):
    """Loss function and, implicitly, its action space.

    ``clamped_log`` restricts actions to label distributions with every entry
    at least ``epsilon``; it keeps worst cases finite where plain log loss
    diverges.
    """

    model_config = ConfigDict(frozen=True)

    kind: LossKind
    epsilon: float | None = None

    @model_validator(mode="before")
    @classmethod
    def _default_epsilon(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("kind") == LossKind.CLAMPED_LOG:
            if data.get("epsilon") is None:
                return {**data, "epsilon": DEFAULT_CLAMP_EPSILON}
        return data

    @model_validator(mode="after")
    def _check_epsilon(self) -> "LossSpec":
        if self.kind is LossKind.CLAMPED_LOG:
            if self.epsilon is None or not self.epsilon > 0:
                raise ValueError(f"clamped_log epsilon must be positive, got {self.epsilon}")
        elif self.epsilon is not None:
            raise ValueError(f"epsilon only applies to clamped_log, not {self.kind.value}")
        return self

    @classmethod
    def zero_one(cls) -> "LossSpec":
        return cls(kind=LossKind.ZERO_ONE)

    @classmethod
    def log(cls) -> "LossSpec":
        return cls(kind=LossKind.LOG)

    @classmethod
    def clamped_log(cls, epsilon: float = DEFAULT_CLAMP_EPSILON) -> "LossSpec":
        return cls(kind=LossKind.CLAMPED_LOG, epsilon=epsilon)

    @property
    def eps(self) -> float:
        assert self.epsilon is not None
        return self.epsilon

    def check_labels(self, n_labels: int) -> None:
        """Raise ValueError if the action space is empty for ``n_labels`` labels."""
        if self.kind is LossKind.CLAMPED_LOG and not self.eps < 1.0 / n_labels:
            raise ValueError(
                f"clamped_log epsilon {self.eps} must be below 1/|Y| = {1.0 / n_labels}"
            )

    def expected_loss(self, p: np.ndarray, action: np.ndarray) -> float:
        """Expected loss of ``action`` when Y ~ ``p``; +inf is possible for log losses."""
        if self.kind is LossKind.ZERO_ONE:
            return float(1.0 - p @ action)
        with np.errstate(divide="ignore"):
            return float(-xlogy(p, action).sum())

    def optimal_actions(self, p: np.ndarray) -> list[np.ndarray]:
        """All minimizers of the expected loss under ``p``.

        ZeroOne returns every label within ``TIE_TOL`` of the mode; the log
        losses are strictly proper on their action sets and return one action.
        """
        if self.kind is LossKind.ZERO_ONE:
            labels = np.flatnonzero(p >= p.max() - TIE_TOL)
            return [one_hot(int(y), p.shape[0]) for y in labels]
        if self.kind is LossKind.LOG:
            return [np.asarray(p, dtype=np.float64)]
        return [clamp_project(p, self.eps)]

    def min_loss(self, p: np.ndarray) -> float:
        """Expected loss of the best action under ``p``."""
        if self.kind is LossKind.ZERO_ONE:
            return float(1.0 - p.max())
        return self.expected_loss(p, self.optimal_actions(p)[0])

    def worst_free_loss(self, p: np.ndarray) -> float:
        """Supremum of the expected loss over the whole action space."""
        if self.kind is LossKind.ZERO_ONE:
            return float(1.0 - p.min())
        if self.kind is LossKind.LOG:
            return float("inf")
        return self.expected_loss(p, clamp_vertex(p, self.eps))


def one_hot(label: int, n_labels: int) -> np.ndarray:
    action = np.zeros(n_labels)
    action[label] = 1.0
    return action


def clamp_project(p: np.ndarray, epsilon: float) -> np.ndarray:
    """Minimizer of the cross-entropy ``-sum p log q`` over ``{q : q_y >= epsilon}``.

    Water-filling: the smallest ``k`` entries of ``p`` are clamped to
    ``epsilon`` and the rest keep the proportions of ``p``; ``k`` is the
    unique count satisfying the KKT conditions.
    """
    n_labels = p.shape[0]
    order = np.argsort(p, kind="stable")
    for k in range(n_labels):
        clamped, free = order[:k], order[k:]
        free_mass = float(p[free].sum())
        if free_mass <= 0.0:
            continue
        scale = free_mass / (1.0 - k * epsilon)
        if p[free].min() / scale < epsilon - 1e-15:
            continue
        if k > 0 and p[clamped].max() / scale > epsilon + 1e-15:
            continue
        q = np.full(n_labels, epsilon)
        q[free] = p[free] / scale
        return q
    raise ValueError(f"no feasible projection for epsilon {epsilon} and {n_labels} labels")


def clamp_vertex(p: np.ndarray, epsilon: float) -> np.ndarray:
    """Worst epsilon-floored action: the free mass sits on the least likely label."""
    n_labels = p.shape[0]
    action = np.full(n_labels, epsilon)
    action[int(np.argmin(p))] = 1.0 - (n_labels - 1) * epsilon
    return action
