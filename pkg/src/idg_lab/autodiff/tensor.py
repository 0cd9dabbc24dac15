"""Reverse-mode differentiation over dense float64 arrays.

A :class:`Tape` records every tensor created through it, in creation order,
which is a topological order of the graph. Each non-leaf tensor carries a
closure that pushes its output gradient to its parents; ``Tape.backward``
replays the closures in reverse.

Broadcasting is limited to three cases: equal shapes, a scalar operand, and
an operand whose shape equals the other's trailing shape (bias over the
leading batch axis).
"""

from collections.abc import Callable, Sequence

import numpy as np
from scipy.special import expit, logsumexp as sp_logsumexp

from idg_lab.utils.error_handler import (
    FullyMaskedSliceError,
    NonScalarOutputError,
    ShapeMismatchError,
)


class Tensor:
    """Node of a tape: value, accumulated gradient and backward closure."""

    __slots__ = ("data", "grad", "tape", "name", "op", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data: np.ndarray,
        tape: "Tape",
        parents: tuple["Tensor", ...] = (),
        op: str = "",
        name: str | None = None,
        requires_grad: bool = False,
    ) -> None:
        self.data = data
        self.grad: np.ndarray | None = None
        self.tape = tape
        self.name = name
        self.op = op
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        self.grad = g.copy() if self.grad is None else self.grad + g

    def _wrap(self, other: "Tensor | float") -> "Tensor":
        return other if isinstance(other, Tensor) else self.tape.constant(np.asarray(other, dtype=np.float64))

    def __add__(self, other: "Tensor | float") -> "Tensor":
        return add(self, self._wrap(other))

    def __radd__(self, other: float) -> "Tensor":
        return add(self._wrap(other), self)

    def __sub__(self, other: "Tensor | float") -> "Tensor":
        return sub(self, self._wrap(other))

    def __rsub__(self, other: float) -> "Tensor":
        return sub(self._wrap(other), self)

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other: float) -> "Tensor":
        return scale(self, float(other))

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, name={self.name!r})"


class Tape:
    """Records tensors in creation order and runs reverse-mode sweeps."""

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []
        self.parameters: dict[str, Tensor] = {}

    def _add(self, t: Tensor) -> Tensor:
        self.nodes.append(t)
        return t

    def parameter(self, name: str, array: np.ndarray) -> Tensor:
        """Leaf whose gradient is reported by :meth:`backward` under ``name``."""
        if name in self.parameters:
            return self.parameters[name]
        t = Tensor(np.asarray(array, dtype=np.float64), self, name=name, requires_grad=True)
        self.parameters[name] = t
        return self._add(t)

    def constant(self, array: np.ndarray | float) -> Tensor:
        return self._add(Tensor(np.asarray(array, dtype=np.float64), self))

    def record(
        self,
        data: np.ndarray,
        parents: tuple[Tensor, ...],
        backward: Callable[[np.ndarray], None],
        op: str,
    ) -> Tensor:
        t = Tensor(np.asarray(data, dtype=np.float64), self, parents, op)
        if t.requires_grad:
            t._backward = backward
        return self._add(t)

    def backward(self, output: Tensor) -> dict[str, np.ndarray]:
        """Gradients of a scalar ``output`` with respect to every parameter.

        Raises:
            NonScalarOutputError: If ``output`` holds more than one value
        """
        if output.data.size != 1:
            raise NonScalarOutputError(f"backward needs a scalar output, got shape {output.shape}")
        for node in self.nodes:
            node.grad = None
        output.grad = np.ones_like(output.data)
        stop = self.nodes.index(output)
        for node in reversed(self.nodes[: stop + 1]):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        return {
            name: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for name, p in self.parameters.items()
        }


def _broadcast_ok(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    return a == b or a == () or b == () or a == b[1:] or b == a[1:]


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    return g.sum(axis=tuple(range(g.ndim - len(shape))))


def _check_binary(op: str, a: Tensor, b: Tensor) -> None:
    if not _broadcast_ok(a.shape, b.shape):
        raise ShapeMismatchError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("add", a, b)

    def backward(g: np.ndarray) -> None:
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(g, b.shape))

    return a.tape.record(a.data + b.data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary("sub", a, b)

    def backward(g: np.ndarray) -> None:
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(-g, b.shape))

    return a.tape.record(a.data - b.data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product."""
    _check_binary("mul", a, b)

    def backward(g: np.ndarray) -> None:
        a.accumulate(_unbroadcast(g * b.data, a.shape))
        b.accumulate(_unbroadcast(g * a.data, b.shape))

    return a.tape.record(a.data * b.data, (a, b), backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a.accumulate(c * g)

    return a.tape.record(c * a.data, (a,), backward, "scale")


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g: np.ndarray) -> None:
        a.accumulate(g @ b.data.T)
        b.accumulate(a.data.T @ g)

    return a.tape.record(a.data @ b.data, (a, b), backward, "matmul")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def backward(g: np.ndarray) -> None:
        a.accumulate(g * out)

    return a.tape.record(out, (a,), backward, "exp")


def log(a: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a.accumulate(g / a.data)

    with np.errstate(divide="ignore"):
        return a.tape.record(np.log(a.data), (a,), backward, "log")


def relu(a: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a.accumulate(g * (a.data > 0))

    return a.tape.record(np.maximum(a.data, 0.0), (a,), backward, "relu")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g: np.ndarray) -> None:
        a.accumulate(g * (1.0 - out**2))

    return a.tape.record(out, (a,), backward, "tanh")


def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)

    def backward(g: np.ndarray) -> None:
        a.accumulate(g * out * (1.0 - out))

    return a.tape.record(out, (a,), backward, "sigmoid")


def _expand(g: np.ndarray, shape: tuple[int, ...], axis: int | None) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape)
    return np.broadcast_to(np.expand_dims(g, axis), shape)


def sum(a: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    def backward(g: np.ndarray) -> None:
        a.accumulate(_expand(g, a.shape, axis))

    return a.tape.record(np.sum(a.data, axis=axis), (a,), backward, "sum")


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]

    def backward(g: np.ndarray) -> None:
        a.accumulate(_expand(g, a.shape, axis) / count)

    return a.tape.record(np.mean(a.data, axis=axis), (a,), backward, "mean")


def logsumexp(a: Tensor, axis: int = -1) -> Tensor:
    """Stable log-sum-exp along ``axis``."""
    out = sp_logsumexp(a.data, axis=axis)

    def backward(g: np.ndarray) -> None:
        weights = np.exp(a.data - np.expand_dims(out, axis))
        a.accumulate(np.expand_dims(g, axis) * weights)

    return a.tape.record(out, (a,), backward, "logsumexp")


def masked_logsumexp(a: Tensor, mask: np.ndarray, axis: int = -1) -> Tensor:
    """log sum exp over the entries where ``mask`` is true.

    Raises:
        ShapeMismatchError: If mask and input shapes differ
        FullyMaskedSliceError: If a reduced slice has no unmasked entry
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ShapeMismatchError(f"masked_logsumexp: mask {mask.shape} vs input {a.shape}")
    if not mask.any(axis=axis).all():
        raise FullyMaskedSliceError("masked_logsumexp: a slice has no unmasked entry")
    # masked entries become -inf so they cannot dominate the max shift
    shifted = np.where(mask, a.data, -np.inf)
    out = sp_logsumexp(shifted, axis=axis)

    def backward(g: np.ndarray) -> None:
        weights = np.exp(shifted - np.expand_dims(out, axis))
        a.accumulate(np.expand_dims(g, axis) * weights)

    return a.tape.record(out, (a,), backward, "masked_logsumexp")


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Per-row -log softmax(logits)[label]; returns a [batch] vector."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError(
            f"softmax_cross_entropy: logits {logits.shape} vs labels {labels.shape}"
        )
    rows = np.arange(labels.shape[0])
    lse = sp_logsumexp(logits.data, axis=1)

    def backward(g: np.ndarray) -> None:
        probs = np.exp(logits.data - lse[:, None])
        probs[rows, labels] -= 1.0
        logits.accumulate(g[:, None] * probs)

    return logits.tape.record(lse - logits.data[rows, labels], (logits,), backward, "softmax_xent")


def gather(a: Tensor, rows: np.ndarray) -> Tensor:
    """Rows of ``a`` selected by an integer index array (repeats allowed)."""
    rows = np.asarray(rows, dtype=np.int64)

    def backward(g: np.ndarray) -> None:
        out = np.zeros_like(a.data)
        np.add.at(out, rows, g)
        a.accumulate(out)

    return a.tape.record(a.data[rows], (a,), backward, "gather")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeMismatchError("concat needs at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatchError(f"concat: {e}") from e

    def backward(g: np.ndarray) -> None:
        for t, part in zip(tensors, np.split(g, splits, axis=axis)):
            t.accumulate(part)

    return tensors[0].tape.record(data, tuple(tensors), backward, "concat")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeMismatchError(f"transpose needs a matrix, got shape {a.shape}")

    def backward(g: np.ndarray) -> None:
        a.accumulate(g.T)

    return a.tape.record(a.data.T, (a,), backward, "transpose")


def columns(a: Tensor, start: int, stop: int) -> Tensor:
    """Column block ``a[:, start:stop]`` of a matrix."""
    if a.ndim != 2 or not 0 <= start < stop <= a.shape[1]:
        raise ShapeMismatchError(f"columns [{start}, {stop}) out of range for shape {a.shape}")

    def backward(g: np.ndarray) -> None:
        out = np.zeros_like(a.data)
        out[:, start:stop] = g
        a.accumulate(out)

    return a.tape.record(a.data[:, start:stop], (a,), backward, "columns")


def gaussian_kl(mu_q: Tensor, logvar_q: Tensor, mu_p: Tensor, logvar_p: Tensor) -> Tensor:
    """KL(N(mu_q, e^logvar_q) || N(mu_p, e^logvar_p)) for diagonal Gaussians, summed per row."""
    diff = mu_q - mu_p
    ratio = exp(logvar_q - logvar_p)
    mahalanobis = mul(diff, diff) * exp(neg(logvar_p))
    per_dim = 0.5 * (ratio + mahalanobis - 1.0 - (logvar_q - logvar_p))
    return sum(per_dim, axis=-1) if per_dim.ndim > 0 else per_dim
