"""Tape-based reverse-mode differentiation, optimizers and checkpoints."""

from idg_lab.autodiff.tensor import Tape, Tensor

__all__ = ["Tape", "Tensor"]
