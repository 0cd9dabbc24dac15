"""Small feedforward networks expressed on an autodiff tape.

Parameters live in a flat ``dict[str, np.ndarray]`` keyed ``<prefix>/<layer>``;
networks are stateless specs that read from that dict.
"""

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from idg_lab.autodiff import tensor as T
from idg_lab.autodiff.tensor import Tape, Tensor
from idg_lab.constants import DEFAULT_HIDDEN_WIDTH, DEFAULT_Z_DIM

Params = dict[str, np.ndarray]


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"


_ACTIVATIONS = {Activation.RELU: T.relu, Activation.TANH: T.tanh}


class MLP(BaseModel):
    """Affine layers with an activation between them (none after the last)."""

    model_config = ConfigDict(frozen=True)

    prefix: str
    widths: list[int] = Field(min_length=2)
    activation: Activation = Activation.RELU

    def init(self, rng: np.random.Generator) -> Params:
        params: Params = {}
        for i, (fan_in, fan_out) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            params[f"{self.prefix}/W{i}"] = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
            params[f"{self.prefix}/b{i}"] = np.zeros(fan_out)
        return params

    def forward(self, tape: Tape, params: Params, x: Tensor) -> Tensor:
        h = x
        last = len(self.widths) - 2
        for i in range(last + 1):
            W = tape.parameter(f"{self.prefix}/W{i}", params[f"{self.prefix}/W{i}"])
            b = tape.parameter(f"{self.prefix}/b{i}", params[f"{self.prefix}/b{i}"])
            h = T.matmul(h, W) + b
            if i < last:
                h = _ACTIVATIONS[self.activation](h)
        return h


class NetSpec(BaseModel):
    """Encoder architecture; ``stochastic`` selects the diagonal-Gaussian encoder."""

    model_config = ConfigDict(frozen=True)

    in_dim: int = Field(ge=1)
    hidden: list[int] = [DEFAULT_HIDDEN_WIDTH]
    z_dim: int = Field(default=DEFAULT_Z_DIM, ge=1)
    stochastic: bool = False
    activation: Activation = Activation.RELU

    def body(self, prefix: str = "enc") -> MLP:
        out = 2 * self.z_dim if self.stochastic else self.z_dim
        return MLP(prefix=prefix, widths=[self.in_dim, *self.hidden, out], activation=self.activation)


class Encoding(BaseModel):
    """Encoder outputs on the tape; ``logvar`` is set for stochastic encoders."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    mean: Tensor
    logvar: Tensor | None = None


class GaussianEncoder(BaseModel):
    """MLP emitting the mean and log-variance of a diagonal Gaussian p(Z|X)."""

    model_config = ConfigDict(frozen=True)

    net: NetSpec

    def forward(self, tape: Tape, params: Params, x: Tensor) -> Encoding:
        out = self.net.body().forward(tape, params, x)
        k = self.net.z_dim
        return Encoding(mean=T.columns(out, 0, k), logvar=T.columns(out, k, 2 * k))


def encode_tensor(net: NetSpec, tape: Tape, params: Params, x: Tensor) -> Encoding:
    if net.stochastic:
        return GaussianEncoder(net=net).forward(tape, params, x)
    return Encoding(mean=net.body().forward(tape, params, x))


class LinearHead(BaseModel):
    """Affine classifier from Z to label logits."""

    model_config = ConfigDict(frozen=True)

    z_dim: int
    n_labels: int
    prefix: str = "head"

    def mlp(self) -> MLP:
        return MLP(prefix=self.prefix, widths=[self.z_dim, self.n_labels])

    def init(self, rng: np.random.Generator) -> Params:
        return self.mlp().init(rng)

    def forward(self, tape: Tape, params: Params, z: Tensor) -> Tensor:
        return self.mlp().forward(tape, params, z)


def critic_net(net: NetSpec) -> MLP:
    """Separate critic head mapping augmentations into Z space."""
    return MLP(prefix="critic", widths=[net.in_dim, *net.hidden, net.z_dim], activation=net.activation)


def encode_array(net: NetSpec, params: Params, features: np.ndarray) -> np.ndarray:
    """Deterministic embedding of a feature matrix (posterior means when stochastic)."""
    tape = Tape()
    return encode_tensor(net, tape, params, tape.constant(features)).mean.data.copy()
