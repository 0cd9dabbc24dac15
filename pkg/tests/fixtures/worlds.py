"""Small hand-built worlds shared by the theory tests."""

import numpy as np

from idg_lab.theory.encoder_risk import Encoder
from idg_lab.theory.finite_prob import CondKernel, FiniteDist, JointTable
from idg_lab.theory.losses import LossSpec
from idg_lab.theory.world import DomainSlice, World

# x0, x2 carry label 0; x1, x3 carry label 1
FOUR_INPUT_LABELS = [0, 1, 0, 1]

# encoder ids (lexicographic, 2 codes) of the label-bucketing encoders
BUCKETING_INDICES = [5, 10]


def four_input_world(loss: LossSpec | None = None) -> World:
    """Two domains with disjoint supports {x0, x1} and {x2, x3}, deterministic labels."""
    return World(
        p_D=FiniteDist.uniform(2),
        p_X_given_D=CondKernel(rows=np.array([[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]])),
        p_Y_given_X=CondKernel.from_assignment(FOUR_INPUT_LABELS, 2),
        pair_dist=JointTable(mass=np.full((2, 2), 0.25)),
        loss=loss or LossSpec.zero_one(),
    )


def bucketing_encoder() -> Encoder:
    """x0, x2 -> z0 and x1, x3 -> z1."""
    return Encoder.from_assignment(FOUR_INPUT_LABELS, 2)


def single_domain_world(label_rows: np.ndarray, p_x: np.ndarray, loss: LossSpec) -> World:
    """One-domain world with the given input law and label kernel."""
    return World(
        p_D=FiniteDist.uniform(1),
        p_X_given_D=CondKernel(rows=p_x[None, :]),
        p_Y_given_X=CondKernel(rows=label_rows),
        pair_dist=JointTable(mass=np.ones((1, 1))),
        loss=loss,
    )


def restricted_label_world() -> World:
    """Label 1 appears only in domain 0, so domain 1 misses a Bayes image element."""
    return World(
        p_D=FiniteDist.uniform(2),
        p_X_given_D=CondKernel(rows=np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])),
        p_Y_given_X=CondKernel.from_assignment([0, 1, 0], 2),
        pair_dist=JointTable(mass=np.full((2, 2), 0.25)),
        loss=LossSpec.zero_one(),
    )


def shared_argmax_world() -> World:
    """Per-domain label kernels that differ but agree on every argmax."""
    d0 = np.array([[0.9, 0.1], [0.2, 0.8]])
    d1 = np.array([[0.6, 0.4], [0.4, 0.6]])
    p_x_given_d = np.array([[0.5, 0.5], [0.5, 0.5]])
    return World(
        p_D=FiniteDist.uniform(2),
        p_X_given_D=CondKernel(rows=p_x_given_d),
        p_Y_given_X=CondKernel(rows=0.5 * d0 + 0.5 * d1),
        p_Y_given_XD=[CondKernel(rows=d0), CondKernel(rows=d1)],
        pair_dist=JointTable(mass=np.full((2, 2), 0.25)),
        loss=LossSpec.zero_one(),
    )


def no_free_lunch_source() -> DomainSlice:
    """Source on {x0, x1}; x2 has label 1 and x3 label 0 outside the source."""
    return DomainSlice(
        p_x=FiniteDist(probs=np.array([0.6, 0.4, 0.0, 0.0])),
        p_y_given_x=CondKernel.from_assignment([0, 1, 1, 0], 2),
    )


def no_free_lunch_good_target() -> DomainSlice:
    return DomainSlice(
        p_x=FiniteDist(probs=np.array([0.0, 0.0, 0.5, 0.5])),
        p_y_given_x=CondKernel.from_assignment([0, 1, 1, 0], 2),
    )


def no_free_lunch_encoder() -> Encoder:
    """Codes by label: the encoder is perfect on both source and good target."""
    return Encoder.from_assignment([0, 1, 1, 0], 2)
