"""First-order optimizers over named parameter arrays."""

import math
from pathlib import Path
from typing import Any

import numpy as np

from idg_lab.autodiff.checkpoint import load_checkpoint, save_checkpoint
from idg_lab.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS

Params = dict[str, np.ndarray]


def _check_lr(lr: float) -> None:
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")


class SGD:
    """Plain gradient descent; updates ``params`` in place."""

    def __init__(self, lr: float) -> None:
        _check_lr(lr)
        self.lr = lr

    def step(self, params: Params, grads: Params, lr: float | None = None) -> None:
        rate = self.lr if lr is None else lr
        for name, g in grads.items():
            params[name] -= rate * g


class Adam:
    """Bias-corrected Adam with per-parameter first and second moments."""

    def __init__(
        self,
        lr: float,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        eps: float = ADAM_EPS,
    ) -> None:
        _check_lr(lr)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Params = {}
        self.v: Params = {}

    def step(self, params: Params, grads: Params, lr: float | None = None) -> None:
        rate = self.lr if lr is None else lr
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= rate * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def save(self, stem: Path) -> None:
        arrays = {f"m/{k}": a for k, a in self.m.items()}
        arrays.update({f"v/{k}": a for k, a in self.v.items()})
        meta: dict[str, Any] = {
            "step": self.t,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }
        save_checkpoint(stem, arrays, meta)

    @classmethod
    def load(cls, stem: Path) -> "Adam":
        arrays, meta = load_checkpoint(stem)
        opt = cls(meta["lr"], meta["beta1"], meta["beta2"], meta["eps"])
        opt.t = int(meta["step"])
        for key, a in arrays.items():
            kind, name = key.split("/", 1)
            (opt.m if kind == "m" else opt.v)[name] = a
        return opt


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """Cosine decay from ``base_lr`` at step 0 to 0 at ``total_steps``."""
    if total_steps <= 0:
        return base_lr
    progress = min(step, total_steps) / total_steps
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * progress))
